//! Import from a flat, one-sentence-per-row layout.
//!
//! Each non-empty, non-`#` line holds tab-separated columns:
//!
//! ```text
//! lemma  ambiguity  sense_id  gloss  sentence_id  pos  context_id  text  [target_lemma]
//! ```
//!
//! * `ambiguity` is `absolute` or `partial`.
//! * `text` marks the target with `[[...]]`; whitespace inside the marker
//!   separates the component words of a multiword target.
//! * An empty `context_id` is derived: slots 1-3 get `<sense_id>:frame`,
//!   slots 4 and 5 get `<sense_id>:<slot>`.
//! * An optional first line starting with `lemma\t` is treated as a header.

use std::collections::BTreeMap;

use super::model::{
    AmbiguityLevel, DatasetBundle, HomonymEntry, LanguageCode, Role, SenseEntry, SentenceRecord,
    TargetSpan,
};
use super::{validate_dataset, DatasetError};

/// Strips `[[...]]` markers from `marked`, returning the plain text and one
/// span per marked word (character offsets into the plain text).
pub fn parse_marked_text(marked: &str) -> Result<(String, Vec<TargetSpan>), String> {
    let mut plain = String::new();
    let mut spans = Vec::new();
    let mut rest = marked;
    let mut len = 0usize;
    while let Some(open) = rest.find("[[") {
        let before = &rest[..open];
        plain.push_str(before);
        len += before.chars().count();
        let after = &rest[open + 2..];
        let close = after
            .find("]]")
            .ok_or_else(|| format!("unterminated target marker in {marked:?}"))?;
        let inner = &after[..close];
        if inner.contains("[[") {
            return Err(format!("nested target marker in {marked:?}"));
        }
        let mut offset = 0usize;
        for piece in inner.split_inclusive(char::is_whitespace) {
            let word = piece.trim_end();
            if !word.is_empty() {
                let start = len + offset;
                spans.push(TargetSpan::new(start, start + word.chars().count(), word));
            }
            offset += piece.chars().count();
        }
        plain.push_str(inner);
        len += inner.chars().count();
        rest = &after[close + 2..];
    }
    if rest.contains("]]") {
        return Err(format!("stray closing marker in {marked:?}"));
    }
    plain.push_str(rest);
    if spans.is_empty() {
        return Err(format!("no [[target]] marker in {marked:?}"));
    }
    Ok((plain, spans))
}

/// Builds and validates a bundle from the flat layout described above.
pub fn import_marked_tsv(language: LanguageCode, input: &str) -> Result<DatasetBundle, DatasetError> {
    // lemma -> (ambiguity, sense order, sense_id -> (gloss, sentences))
    let mut homonyms: Vec<(String, AmbiguityLevel, Vec<SenseEntry>)> = Vec::new();
    for (i, raw) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("lemma\t")) {
            continue;
        }
        let err = |message: String| DatasetError::Import {
            line: line_no,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if !(8..=9).contains(&cols.len()) {
            return Err(err(format!("expected 8 or 9 columns, found {}", cols.len())));
        }
        let lemma = cols[0].trim();
        let ambiguity = match cols[1].trim() {
            "absolute" => AmbiguityLevel::Absolute,
            "partial" => AmbiguityLevel::Partial,
            other => return Err(err(format!("unknown ambiguity level {other:?}"))),
        };
        let sense_id = cols[2].trim();
        let gloss = cols[3].trim();
        let sentence_id: u8 = cols[4]
            .trim()
            .parse()
            .map_err(|_| err(format!("bad sentence_id {:?}", cols[4])))?;
        let role = Role::for_sentence_id(sentence_id)
            .ok_or_else(|| err(format!("sentence_id {sentence_id} outside 1..=5")))?;
        let pos = Some(cols[5].trim()).filter(|p| !p.is_empty()).map(str::to_string);
        let context_id = match cols[6].trim() {
            "" if sentence_id <= 3 => format!("{sense_id}:frame"),
            "" => format!("{sense_id}:{sentence_id}"),
            c => c.to_string(),
        };
        let (text, target) = parse_marked_text(cols[7]).map_err(err)?;
        let target_lemma = cols
            .get(8)
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(str::to_string);

        let hom = match homonyms.iter_mut().position(|h| h.0 == lemma) {
            Some(p) => &mut homonyms[p],
            None => {
                homonyms.push((lemma.to_string(), ambiguity, Vec::new()));
                homonyms.last_mut().expect("just pushed")
            }
        };
        if hom.1 != ambiguity {
            return Err(err(format!("conflicting ambiguity level for {lemma:?}")));
        }
        let sense = match hom.2.iter_mut().position(|s| s.sense_id == sense_id) {
            Some(p) => &mut hom.2[p],
            None => {
                hom.2.push(SenseEntry {
                    sense_id: sense_id.to_string(),
                    gloss: gloss.to_string(),
                    sentences: BTreeMap::new(),
                });
                hom.2.last_mut().expect("just pushed")
            }
        };
        let record = SentenceRecord {
            sentence_id,
            text,
            target,
            role,
            pos,
            context_id,
            lemma: target_lemma,
        };
        if sense.sentences.insert(sentence_id, record).is_some() {
            return Err(err(format!("duplicate sentence {sense_id}:{sentence_id}")));
        }
    }
    let bundle = DatasetBundle::new(
        language,
        homonyms
            .into_iter()
            .map(|(lemma, ambiguity_level, senses)| HomonymEntry {
                lemma,
                ambiguity_level,
                senses,
            })
            .collect(),
    );
    let report = validate_dataset(&bundle);
    if report.error_count() > 0 {
        return Err(DatasetError::Validation { report });
    }
    Ok(bundle)
}
