//! Sentence triples: generation, experiment classification, POS filtering
//! and the tab-separated triple file.

mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::dataset::{DatasetBundle, FormMatch, LanguageCode, Resolved, Role, SentenceKey, SentenceRef};

pub use io::{diff_triples, load_triples, parse_triples, triples_to_tsv, write_triples, TripleDiff};

#[derive(Debug, thiserror::Error)]
pub enum TripleError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: reference {reference} not found in the dataset")]
    Dangling { line: usize, reference: String },
    #[error("sentence {0} has no POS tag")]
    MissingPos(SentenceKey),
    #[error("triple references {0} which is not in the dataset")]
    Unresolved(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    Other,
}

impl Experiment {
    pub const SCORED: [Experiment; 4] = [
        Experiment::Exp1,
        Experiment::Exp2,
        Experiment::Exp3,
        Experiment::Exp4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::Exp4 => "exp4",
            Experiment::Other => "other",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exp1" => Ok(Experiment::Exp1),
            "exp2" => Ok(Experiment::Exp2),
            "exp3" => Ok(Experiment::Exp3),
            "exp4" => Ok(Experiment::Exp4),
            "other" | "" => Ok(Experiment::Other),
            other => Err(format!("unknown experiment tag {other:?}")),
        }
    }
}

/// Two same-sense anchors `a`, `b` and an outlier `c`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EvalTriple {
    pub lemma: String,
    pub a: SentenceRef,
    pub b: SentenceRef,
    pub c: SentenceRef,
    pub experiment: Experiment,
    pub same_pos: bool,
}

/// Whether the outlier comes from another sense or is the anchors' own
/// distractor sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripleKind {
    CrossSense,
    Distractor,
}

/// Identity of a triple, ignoring the order of the anchors.
pub type TripleId = (String, SentenceRef, SentenceRef, SentenceRef);

impl EvalTriple {
    /// Builds a triple with anchors ordered by sentence id.
    pub fn new(lemma: impl Into<String>, a: SentenceRef, b: SentenceRef, c: SentenceRef) -> Self {
        let (a, b) = if (a.sentence_id, &a.sense_id) <= (b.sentence_id, &b.sense_id) {
            (a, b)
        } else {
            (b, a)
        };
        Self {
            lemma: lemma.into(),
            a,
            b,
            c,
            experiment: Experiment::Other,
            same_pos: false,
        }
    }

    pub fn kind(&self) -> TripleKind {
        if self.c.sense_id == self.a.sense_id {
            TripleKind::Distractor
        } else {
            TripleKind::CrossSense
        }
    }

    /// `(anchor sense, outlier sense)`.
    pub fn direction(&self) -> (&str, &str) {
        (&self.a.sense_id, &self.c.sense_id)
    }

    pub fn id(&self) -> TripleId {
        let (lo, hi) = if self.a <= self.b {
            (self.a.clone(), self.b.clone())
        } else {
            (self.b.clone(), self.a.clone())
        };
        (self.lemma.clone(), lo, hi, self.c.clone())
    }

    pub fn refs(&self) -> [&SentenceRef; 3] {
        [&self.a, &self.b, &self.c]
    }

    pub fn sort_key(&self) -> (&str, &str, u8, u8, &str, u8) {
        (
            &self.lemma,
            &self.a.sense_id,
            self.a.sentence_id,
            self.b.sentence_id,
            &self.c.sense_id,
            self.c.sentence_id,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Generated,
    Loaded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleSet {
    pub language: LanguageCode,
    pub triples: Vec<EvalTriple>,
    pub provenance: Provenance,
}

impl TripleSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Number of triples per experiment tag, including `other`.
    pub fn counts(&self) -> BTreeMap<Experiment, usize> {
        let mut m = BTreeMap::new();
        for t in &self.triples {
            *m.entry(t.experiment).or_insert(0) += 1;
        }
        m
    }

    pub fn count(&self, exp: Experiment) -> usize {
        self.triples.iter().filter(|t| t.experiment == exp).count()
    }

    pub fn only(&self, exp: Experiment) -> TripleSet {
        TripleSet {
            language: self.language.clone(),
            triples: self
                .triples
                .iter()
                .filter(|t| t.experiment == exp)
                .cloned()
                .collect(),
            provenance: self.provenance,
        }
    }

    pub fn same_pos_only(&self) -> TripleSet {
        TripleSet {
            language: self.language.clone(),
            triples: self.triples.iter().filter(|t| t.same_pos).cloned().collect(),
            provenance: self.provenance,
        }
    }

    pub(crate) fn sort(&mut self) {
        self.triples.sort_by(|x, y| x.sort_key().cmp(&y.sort_key()));
    }
}

const ANCHOR_SLOTS: [u8; 4] = [1, 2, 4, 5];
/// Anchor pairs for distractor triples; each contains slot 1 or 2, which
/// share their context with slot 3.
const DISTRACTOR_ANCHORS: [(u8, u8); 3] = [(1, 2), (1, 5), (2, 4)];

/// Enumerates every triple of the dataset and tags it.
///
/// Cross-sense triples: for each ordered pair of senses of one homonym,
/// each unordered anchor pair from the anchor sense's slots {1,2,4,5},
/// crossed with each of the other sense's slots {1,2,4,5} (at most 24 per
/// direction). Distractor triples: anchor pairs (1,2), (1,5), (4,2) with
/// distinct target forms, outlier = the sense's own slot 3.
pub fn generate_triples(bundle: &DatasetBundle) -> TripleSet {
    generate_triples_with(bundle, FormMatch::default())
}

pub fn generate_triples_with(bundle: &DatasetBundle, form_match: FormMatch) -> TripleSet {
    let mut seen = BTreeSet::new();
    let mut triples = Vec::new();
    let mut emit = |t: EvalTriple| {
        if seen.insert(t.id()) {
            triples.push(t);
        }
    };
    for hom in &bundle.homonyms {
        if hom.senses.len() < 2 {
            log::debug!("{}: single sense, distractor triples only", hom.lemma);
        }
        for anchor in &hom.senses {
            let slots: Vec<u8> = ANCHOR_SLOTS
                .into_iter()
                .filter(|n| anchor.sentence(*n).is_some())
                .collect();
            if slots.len() < ANCHOR_SLOTS.len() {
                log::debug!(
                    "{} sense {}: {} of 4 anchor sentences available",
                    hom.lemma,
                    anchor.sense_id,
                    slots.len()
                );
            }
            for other in hom.senses.iter().filter(|s| s.sense_id != anchor.sense_id) {
                for (i, &x) in slots.iter().enumerate() {
                    for &y in &slots[i + 1..] {
                        for z in ANCHOR_SLOTS {
                            if other.sentence(z).is_none() {
                                continue;
                            }
                            emit(EvalTriple::new(
                                hom.lemma.clone(),
                                SentenceRef::new(anchor.sense_id.clone(), x),
                                SentenceRef::new(anchor.sense_id.clone(), y),
                                SentenceRef::new(other.sense_id.clone(), z),
                            ));
                        }
                    }
                }
            }
            if anchor.sentence(3).is_none() {
                continue;
            }
            for (x, y) in DISTRACTOR_ANCHORS {
                let (Some(sx), Some(sy)) = (anchor.sentence(x), anchor.sentence(y)) else {
                    continue;
                };
                if form_match.same(&sx.target_form(), &sy.target_form()) {
                    continue;
                }
                emit(EvalTriple::new(
                    hom.lemma.clone(),
                    SentenceRef::new(anchor.sense_id.clone(), x),
                    SentenceRef::new(anchor.sense_id.clone(), y),
                    SentenceRef::new(anchor.sense_id.clone(), 3),
                ));
            }
        }
    }
    for t in &mut triples {
        t.experiment = classify_with(t, bundle, form_match);
        t.same_pos = pos_agrees(t, bundle).unwrap_or(false);
    }
    let mut set = TripleSet {
        language: bundle.language.clone(),
        triples,
        provenance: Provenance::Generated,
    };
    set.sort();
    set
}

fn resolve3<'a>(t: &EvalTriple, bundle: &'a DatasetBundle) -> Option<[Resolved<'a>; 3]> {
    Some([
        bundle.resolve(&t.a)?,
        bundle.resolve(&t.b)?,
        bundle.resolve(&t.c)?,
    ])
}

fn pos_agrees(t: &EvalTriple, bundle: &DatasetBundle) -> Option<bool> {
    let [a, b, c] = resolve3(t, bundle)?;
    let (pa, pb, pc) = (
        a.sentence.pos.as_deref()?,
        b.sentence.pos.as_deref()?,
        c.sentence.pos.as_deref()?,
    );
    Some(pa == pb && pb == pc)
}

/// Assigns the experiment tag using case-insensitive form comparison.
pub fn classify_triple(t: &EvalTriple, bundle: &DatasetBundle) -> Experiment {
    classify_with(t, bundle, FormMatch::default())
}

/// Experiment predicates:
///
/// * exp1: one surface form throughout, three distinct contexts, cross-sense outlier.
/// * exp2: three distinct forms and contexts; anchors are one target-form and
///   one synonym sentence; outlier is a synonym sentence of another sense.
/// * exp3: distinct contexts; anchors are one target-form and one synonym
///   sentence; outlier is a target-form sentence of another sense whose form
///   equals exactly one anchor form.
/// * exp4: outlier is the anchors' own distractor, sharing a context with at
///   least one anchor; anchor forms differ.
pub fn classify_with(t: &EvalTriple, bundle: &DatasetBundle, fm: FormMatch) -> Experiment {
    let Some([a, b, c]) = resolve3(t, bundle) else {
        return Experiment::Other;
    };
    if a.sense.sense_id != b.sense.sense_id {
        return Experiment::Other;
    }
    let (fa, fb, fc) = (
        fm.key(&a.sentence.target_form()),
        fm.key(&b.sentence.target_form()),
        fm.key(&c.sentence.target_form()),
    );
    let (ca, cb, cc) = (
        &a.sentence.context_id,
        &b.sentence.context_id,
        &c.sentence.context_id,
    );
    let contexts_distinct = ca != cb && ca != cc && cb != cc;
    let cross = c.sense.sense_id != a.sense.sense_id;
    let mut anchor_roles = [a.sentence.role, b.sentence.role];
    anchor_roles.sort();
    let target_and_synonym = anchor_roles == [Role::TargetForm, Role::Synonym];

    if cross && contexts_distinct && fa == fb && fb == fc {
        return Experiment::Exp1;
    }
    if cross
        && contexts_distinct
        && target_and_synonym
        && fa != fb
        && fa != fc
        && fb != fc
        && c.sentence.role == Role::Synonym
    {
        return Experiment::Exp2;
    }
    if cross
        && contexts_distinct
        && target_and_synonym
        && ((fc == fa) != (fc == fb))
        && c.sentence.role == Role::TargetForm
    {
        return Experiment::Exp3;
    }
    if !cross
        && c.sentence.role == Role::Distractor
        && (cc == ca || cc == cb)
        && fa != fb
    {
        return Experiment::Exp4;
    }
    Experiment::Other
}

/// Keeps triples whose three targets share a POS tag, marking them `same_pos`.
pub fn filter_same_pos(ts: &TripleSet, bundle: &DatasetBundle) -> Result<TripleSet, TripleError> {
    let mut kept = Vec::new();
    for t in &ts.triples {
        let mut tags = Vec::with_capacity(3);
        for r in t.refs() {
            let res = bundle
                .resolve(r)
                .ok_or_else(|| TripleError::Unresolved(format!("{}/{r}", t.lemma)))?;
            let pos = res
                .sentence
                .pos
                .as_deref()
                .ok_or_else(|| TripleError::MissingPos(res.key()))?;
            tags.push(pos);
        }
        if tags[0] == tags[1] && tags[1] == tags[2] {
            let mut t = t.clone();
            t.same_pos = true;
            kept.push(t);
        }
    }
    Ok(TripleSet {
        language: ts.language.clone(),
        triples: kept,
        provenance: ts.provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::{coach, sense, sentence};
    use crate::dataset::{AmbiguityLevel, HomonymEntry, SenseEntry};

    type Item<'a> = (&'a str, u8, Role, &'a str);

    /// Brute force: every (x, y, z) with x < y over all sentences of a
    /// homonym, kept when it satisfies either generation predicate.
    fn oracle_count(bundle: &DatasetBundle) -> (usize, usize) {
        let mut cross = 0;
        let mut distractor = 0;
        for hom in &bundle.homonyms {
            let all: Vec<Item> = hom
                .senses
                .iter()
                .flat_map(|s| {
                    s.sentences
                        .values()
                        .map(move |r| (s.sense_id.as_str(), r.sentence_id, r.role, r.text.as_str()))
                })
                .collect();
            let form = |i: &Item| {
                let (sid, n, ..) = *i;
                bundle
                    .resolve(&SentenceRef::new(sid, n))
                    .unwrap()
                    .sentence
                    .target_form()
                    .to_lowercase()
            };
            for (i, x) in all.iter().enumerate() {
                for y in &all[i + 1..] {
                    for z in &all {
                        if x.0 != y.0 || z == x || z == y {
                            continue;
                        }
                        let anchors_ok = x.2 != Role::Distractor && y.2 != Role::Distractor;
                        if anchors_ok && z.0 != x.0 && z.2 != Role::Distractor {
                            cross += 1;
                        }
                        let mut slots = [x.1, y.1];
                        slots.sort();
                        if z.0 == x.0
                            && z.2 == Role::Distractor
                            && matches!(slots, [1, 2] | [1, 5] | [2, 4])
                            && form(x) != form(y)
                        {
                            distractor += 1;
                        }
                    }
                }
            }
        }
        (cross, distractor)
    }

    fn complete_sense(id: &str, lemma: &str, syn: &str, other: &str) -> SenseEntry {
        sense(
            id,
            id,
            vec![
                sentence(1, &format!("first {lemma} frame {id}"), lemma, "NOUN", &format!("{id}a")),
                sentence(2, &format!("first {syn} frame {id}"), syn, "NOUN", &format!("{id}a")),
                sentence(3, &format!("first {other} frame {id}"), other, "NOUN", &format!("{id}a")),
                sentence(4, &format!("second {lemma} here {id}"), lemma, "NOUN", &format!("{id}b")),
                sentence(5, &format!("third {syn} there {id}"), syn, "NOUN", &format!("{id}c")),
            ],
        )
    }

    fn synthetic(n_senses: usize) -> DatasetBundle {
        let senses = (0..n_senses)
            .map(|i| complete_sense(&format!("s{i}"), "bank", &format!("syn{i}"), &format!("oth{i}")))
            .collect();
        DatasetBundle::new(
            LanguageCode::new("en").unwrap(),
            vec![HomonymEntry {
                lemma: "bank".into(),
                ambiguity_level: AmbiguityLevel::Absolute,
                senses,
            }],
        )
    }

    #[test]
    fn toy_homonym_yields_54() {
        let b = coach();
        let ts = generate_triples(&b);
        assert_eq!(oracle_count(&b), (48, 6));
        assert_eq!(ts.len(), 54);
        let cross = ts.triples.iter().filter(|t| t.kind() == TripleKind::CrossSense).count();
        assert_eq!(cross, 48);
    }

    #[test]
    fn synthetic_counts_match_oracle() {
        for n in 2..=4 {
            let b = synthetic(n);
            let (cross, distractor) = oracle_count(&b);
            assert_eq!(cross, 48 * n * (n - 1) / 2);
            assert_eq!(generate_triples(&b).len(), cross + distractor, "{n} senses");
        }
    }

    #[test]
    fn missing_synonyms_shrink_anchor_pairs() {
        let mut b = coach();
        for s in [2u8, 5] {
            b.homonyms[0].senses[0].sentences.remove(&s);
        }
        let b = DatasetBundle::new(b.language.clone(), b.homonyms);
        let ts = generate_triples(&b);
        let from_sense1 = ts
            .triples
            .iter()
            .filter(|t| t.direction() == ("1", "2"))
            .count();
        // only anchor pair {1,4}, crossed with sense 2's four slots
        assert_eq!(from_sense1, 4);
        assert_eq!(ts.len(), oracle_count(&b).0 + oracle_count(&b).1);
    }

    #[test]
    fn single_sense_homonym_gives_distractor_triples_only() {
        let b = DatasetBundle::new(
            LanguageCode::new("en").unwrap(),
            vec![HomonymEntry {
                lemma: "bank".into(),
                ambiguity_level: AmbiguityLevel::Partial,
                senses: vec![complete_sense("only", "bank", "shore", "road")],
            }],
        );
        let ts = generate_triples(&b);
        assert_eq!(ts.len(), 3);
        assert!(ts.triples.iter().all(|t| t.kind() == TripleKind::Distractor));
    }

    fn tag(b: &DatasetBundle, a: (&str, u8), bb: (&str, u8), c: (&str, u8)) -> Experiment {
        let t = EvalTriple::new(
            "coach",
            SentenceRef::new(a.0, a.1),
            SentenceRef::new(bb.0, bb.1),
            SentenceRef::new(c.0, c.1),
        );
        classify_triple(&t, b)
    }

    #[test]
    fn worked_examples_classify() {
        let b = coach();
        assert_eq!(tag(&b, ("1", 1), ("1", 4), ("2", 1)), Experiment::Exp1);
        assert_eq!(tag(&b, ("1", 1), ("1", 5), ("2", 2)), Experiment::Exp2);
        assert_eq!(tag(&b, ("1", 1), ("1", 5), ("2", 1)), Experiment::Exp3);
        assert_eq!(tag(&b, ("2", 1), ("2", 2), ("2", 3)), Experiment::Exp4);
        // same context for the anchors rules out exp2/exp3
        assert_eq!(tag(&b, ("1", 1), ("1", 2), ("2", 2)), Experiment::Other);
    }

    #[test]
    fn form_cardinality_per_experiment() {
        let b = synthetic(3);
        let ts = generate_triples(&b);
        for t in &ts.triples {
            let forms: BTreeSet<String> = t
                .refs()
                .iter()
                .map(|r| b.resolve(r).unwrap().sentence.target_form().to_lowercase())
                .collect();
            match t.experiment {
                Experiment::Exp1 => assert_eq!(forms.len(), 1),
                Experiment::Exp2 => assert_eq!(forms.len(), 3),
                Experiment::Exp3 => assert_eq!(forms.len(), 2),
                _ => {}
            }
        }
        let counts = ts.counts();
        let scored: usize = Experiment::SCORED.iter().map(|e| counts.get(e).copied().unwrap_or(0)).sum();
        assert!(scored < ts.len());
        assert_eq!(counts.values().sum::<usize>(), ts.len());
    }

    #[test]
    fn toy_experiment_counts() {
        let ts = generate_triples(&coach());
        let c = ts.counts();
        // exp1: anchors {1,4} x outlier {1,4}, both directions
        assert_eq!(c[&Experiment::Exp1], 4);
        // exp2: anchors (1,5),(4,2),(4,5) x outlier {2,5}, both directions
        assert_eq!(c[&Experiment::Exp2], 12);
        assert_eq!(c[&Experiment::Exp3], 12);
        assert_eq!(c[&Experiment::Exp4], 6);
    }

    #[test]
    fn anchors_are_ordered_and_distinct() {
        let ts = generate_triples(&synthetic(2));
        for t in &ts.triples {
            assert!(t.a.sentence_id < t.b.sentence_id);
            assert_eq!(t.a.sense_id, t.b.sense_id);
            assert!(t.c != t.a && t.c != t.b);
        }
    }

    #[test]
    fn pos_filter_drops_mixed_tags() {
        let mut b = coach();
        b.homonyms[0].senses[1]
            .sentences
            .values_mut()
            .for_each(|s| s.pos = Some("VERB".into()));
        let b = DatasetBundle::new(b.language.clone(), b.homonyms);
        let ts = generate_triples(&b);
        let kept = filter_same_pos(&ts, &b).unwrap();
        // every cross-sense triple mixes NOUN and VERB
        assert_eq!(kept.len(), 6);
        assert!(kept.triples.iter().all(|t| t.same_pos));
    }

    #[test]
    fn pos_filter_requires_tags() {
        let mut b = coach();
        b.homonyms[0].senses[0].sentences.get_mut(&4).unwrap().pos = None;
        let b = DatasetBundle::new(b.language.clone(), b.homonyms);
        let ts = generate_triples(&b);
        match filter_same_pos(&ts, &b) {
            Err(TripleError::MissingPos(k)) => assert_eq!(k.to_string(), "coach/1/4"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
