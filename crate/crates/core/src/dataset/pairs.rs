use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::model::{DatasetBundle, FormMatch, LanguageCode, Role, SentenceKey, SentenceRef};

/// Per-language counts: homonyms, senses, sentences, and sense pairs whose
/// POS tags differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsRow {
    pub language: LanguageCode,
    pub homonyms: usize,
    pub senses: usize,
    pub sentences: usize,
    pub cross_pos_sense_pairs: usize,
}

pub fn dataset_stats(bundle: &DatasetBundle) -> StatsRow {
    let senses = bundle.homonyms.iter().map(|h| h.senses.len()).sum();
    let sentences = bundle
        .homonyms
        .iter()
        .flat_map(|h| &h.senses)
        .map(|s| s.sentences.len())
        .sum();
    let mut cross_pos = 0;
    for hom in &bundle.homonyms {
        for (i, a) in hom.senses.iter().enumerate() {
            for b in &hom.senses[i + 1..] {
                if let (Some(pa), Some(pb)) = (a.pos(), b.pos()) {
                    if pa != pb {
                        cross_pos += 1;
                    }
                }
            }
        }
    }
    StatsRow {
        language: bundle.language.clone(),
        homonyms: bundle.homonyms.len(),
        senses,
        sentences,
        cross_pos_sense_pairs: cross_pos,
    }
}

/// Two dataset sentences labeled with whether their targets share a sense.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabeledPair {
    pub lemma: String,
    pub a: SentenceRef,
    pub b: SentenceRef,
    pub form_a: String,
    pub form_b: String,
    pub same_sense: bool,
}

impl LabeledPair {
    pub fn key_a(&self) -> SentenceKey {
        SentenceKey::new(self.lemma.clone(), self.a.sense_id.clone(), self.a.sentence_id)
    }

    pub fn key_b(&self) -> SentenceKey {
        SentenceKey::new(self.lemma.clone(), self.b.sense_id.clone(), self.b.sentence_id)
    }

    /// Reference used by annotation sheets: `lemma/sense/sent|lemma/sense/sent`.
    pub fn pair_ref(&self) -> String {
        format!("{}|{}", self.key_a(), self.key_b())
    }
}

/// Enumerates the sentence pairs of every homonym.
///
/// The pool is every unordered pair of target-form/synonym sentences
/// (slots 1, 2, 4, 5) across all senses of one homonym, plus each
/// distractor (slot 3) paired with the sentences sharing its context
/// (slots 1 and 2 of the same sense). A pair is same-sense iff both
/// members carry the same sense and neither is a distractor.
///
/// With `wic_only`, only pairs whose target forms match under `form_match`
/// are kept.
pub fn export_pairs(bundle: &DatasetBundle, wic_only: bool, form_match: FormMatch) -> Vec<LabeledPair> {
    let mut out = BTreeSet::new();
    for hom in &bundle.homonyms {
        let mut items = Vec::new();
        for sense in &hom.senses {
            for sent in sense.sentences.values() {
                if sent.role != Role::Distractor {
                    items.push((sense, sent));
                }
            }
        }
        let mut push = |a: (&super::SenseEntry, &super::SentenceRecord),
                        b: (&super::SenseEntry, &super::SentenceRecord)| {
            let (form_a, form_b) = (a.1.target_form(), b.1.target_form());
            if wic_only && !form_match.same(&form_a, &form_b) {
                return;
            }
            let same_sense = a.0.sense_id == b.0.sense_id
                && a.1.role != Role::Distractor
                && b.1.role != Role::Distractor;
            out.insert(LabeledPair {
                lemma: hom.lemma.clone(),
                a: SentenceRef::new(a.0.sense_id.clone(), a.1.sentence_id),
                b: SentenceRef::new(b.0.sense_id.clone(), b.1.sentence_id),
                form_a,
                form_b,
                same_sense,
            });
        };
        for (i, &a) in items.iter().enumerate() {
            for &b in &items[i + 1..] {
                push(a, b);
            }
        }
        for sense in &hom.senses {
            if let Some(distractor) = sense.sentence(3) {
                for anchor in [1u8, 2] {
                    if let Some(s) = sense.sentence(anchor) {
                        push((sense, s), (sense, distractor));
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Tab-separated rendering with a header row.
pub fn pairs_to_tsv(language: &LanguageCode, pairs: &[LabeledPair]) -> String {
    let mut s = String::from("lang\tlemma\tsense_id_a\tsent_id_a\tsense_id_b\tsent_id_b\tform_a\tform_b\tlabel\n");
    for p in pairs {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            language,
            p.lemma,
            p.a.sense_id,
            p.a.sentence_id,
            p.b.sense_id,
            p.b.sentence_id,
            p.form_a,
            p.form_b,
            if p.same_sense { "T" } else { "F" }
        );
    }
    s
}
