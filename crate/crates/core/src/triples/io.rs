use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EvalTriple, Experiment, Provenance, TripleError, TripleId, TripleSet};
use crate::dataset::{DatasetBundle, LanguageCode, SentenceRef};

const HEADER: &str = "lang\tlemma\tsense_a\tsent_a\tsense_b\tsent_b\tsense_c\tsent_c\texperiment\tsame_pos";

/// Renders the triple file, sorted by (lemma, sense_a, sent_a, sent_b, sense_c, sent_c).
pub fn triples_to_tsv(ts: &TripleSet) -> String {
    let mut rows: Vec<&EvalTriple> = ts.triples.iter().collect();
    rows.sort_by(|x, y| x.sort_key().cmp(&y.sort_key()));
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(HEADER);
    s.push('\n');
    for t in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            ts.language,
            t.lemma,
            t.a.sense_id,
            t.a.sentence_id,
            t.b.sense_id,
            t.b.sentence_id,
            t.c.sense_id,
            t.c.sentence_id,
            t.experiment,
            t.same_pos
        );
    }
    s
}

pub fn write_triples(ts: &TripleSet, path: impl AsRef<Path>) -> Result<(), TripleError> {
    let path = path.as_ref();
    fs::write(path, triples_to_tsv(ts)).map_err(|source| TripleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "t" | "1" | "yes" => Some(true),
        "false" | "f" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Parses a triple file and checks every reference against `bundle`.
pub fn parse_triples(text: &str, bundle: &DatasetBundle) -> Result<TripleSet, TripleError> {
    let mut triples = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut language: Option<LanguageCode> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || (i == 0 && raw.starts_with("lang\t")) {
            continue;
        }
        let perr = |message: String| TripleError::Parse { line, message };
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 10 {
            return Err(perr(format!("expected 10 columns, found {}", cols.len())));
        }
        let lang = LanguageCode::new(cols[0].trim()).map_err(perr)?;
        if lang != bundle.language {
            return Err(perr(format!(
                "language {lang} does not match dataset language {}",
                bundle.language
            )));
        }
        language.get_or_insert(lang);
        let lemma = cols[1].trim();
        let sent = |s: &str| {
            s.trim()
                .parse::<u8>()
                .map_err(|_| perr(format!("bad sentence id {s:?}")))
        };
        let refs = [
            SentenceRef::new(cols[2].trim(), sent(cols[3])?),
            SentenceRef::new(cols[4].trim(), sent(cols[5])?),
            SentenceRef::new(cols[6].trim(), sent(cols[7])?),
        ];
        for r in &refs {
            let resolved = bundle.resolve(r).filter(|x| x.homonym.lemma == lemma);
            if resolved.is_none() {
                return Err(TripleError::Dangling {
                    line,
                    reference: format!("{lemma}/{r}"),
                });
            }
        }
        let [a, b, c] = refs;
        if a.sense_id != b.sense_id {
            return Err(perr("anchors a and b must share a sense".into()));
        }
        if a == b || a == c || b == c {
            return Err(perr("triple repeats a sentence".into()));
        }
        let experiment: Experiment = cols[8].parse().map_err(perr)?;
        let same_pos = parse_bool(cols[9]).ok_or_else(|| perr(format!("bad same_pos {:?}", cols[9])))?;
        let mut t = EvalTriple::new(lemma, a, b, c);
        t.experiment = experiment;
        t.same_pos = same_pos;
        if !seen.insert(t.id()) {
            return Err(perr("duplicate triple".into()));
        }
        triples.push(t);
    }
    Ok(TripleSet {
        language: language.unwrap_or_else(|| bundle.language.clone()),
        triples,
        provenance: Provenance::Loaded,
    })
}

pub fn load_triples(path: impl AsRef<Path>, bundle: &DatasetBundle) -> Result<TripleSet, TripleError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TripleError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_triples(&text, bundle)
}

/// Set difference between two triple sets under anchor-order-free identity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripleDiff {
    pub only_left: Vec<EvalTriple>,
    pub only_right: Vec<EvalTriple>,
    /// Present in both with different experiment tags: (left, right).
    pub retagged: Vec<(EvalTriple, Experiment)>,
}

impl TripleDiff {
    pub fn is_empty(&self) -> bool {
        self.only_left.is_empty() && self.only_right.is_empty() && self.retagged.is_empty()
    }

    /// One line per divergence: `-` only in the left set, `+` only in the
    /// right set, `~` tag mismatch.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let fmt = |t: &EvalTriple| format!("{}\t{}\t{}\t{}", t.lemma, t.a, t.b, t.c);
        for t in &self.only_left {
            let _ = writeln!(s, "-\t{}\t{}", fmt(t), t.experiment);
        }
        for t in &self.only_right {
            let _ = writeln!(s, "+\t{}\t{}", fmt(t), t.experiment);
        }
        for (t, other) in &self.retagged {
            let _ = writeln!(s, "~\t{}\t{}->{}", fmt(t), t.experiment, other);
        }
        s
    }
}

pub fn diff_triples(left: &TripleSet, right: &TripleSet) -> TripleDiff {
    let l: BTreeMap<TripleId, &EvalTriple> = left.triples.iter().map(|t| (t.id(), t)).collect();
    let r: BTreeMap<TripleId, &EvalTriple> = right.triples.iter().map(|t| (t.id(), t)).collect();
    let mut diff = TripleDiff::default();
    for (id, t) in &l {
        match r.get(id) {
            None => diff.only_left.push((*t).clone()),
            Some(o) if o.experiment != t.experiment => diff.retagged.push(((*t).clone(), o.experiment)),
            Some(_) => {}
        }
    }
    for (id, t) in &r {
        if !l.contains_key(id) {
            diff.only_right.push((*t).clone());
        }
    }
    diff
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::coach;
    use crate::triples::generate_triples;

    #[test]
    fn write_then_load_is_equal() {
        let b = coach();
        let ts = generate_triples(&b);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("en.tsv");
        write_triples(&ts, &path).unwrap();
        let back = load_triples(&path, &b).unwrap();
        assert_eq!(back.provenance, Provenance::Loaded);
        assert_eq!(back.triples, ts.triples);
        assert!(diff_triples(&ts, &back).is_empty());
    }

    #[test]
    fn unknown_sense_is_dangling() {
        let b = coach();
        let text = format!("{HEADER}\nen\tcoach\t1\t1\t1\t4\t9\t1\texp1\ttrue\n");
        match parse_triples(&text, &b) {
            Err(TripleError::Dangling { line, reference }) => {
                assert_eq!(line, 2);
                assert_eq!(reference, "coach/9:1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_and_sort_order() {
        let ts = generate_triples(&coach());
        let tsv = triples_to_tsv(&ts);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], HEADER);
        assert_eq!(lines.len(), 55);
        assert_eq!(lines[1], "en\tcoach\t1\t1\t1\t2\t1\t3\texp4\ttrue");
    }

    #[test]
    fn diff_reports_both_sides() {
        let b = coach();
        let ts = generate_triples(&b);
        let mut other = ts.clone();
        let removed = other.triples.remove(0);
        other.triples[0].experiment = match other.triples[0].experiment {
            Experiment::Exp1 => Experiment::Exp2,
            _ => Experiment::Exp1,
        };
        let d = diff_triples(&ts, &other);
        assert_eq!(d.only_left, vec![removed]);
        assert!(d.only_right.is_empty());
        assert_eq!(d.retagged.len(), 1);
        assert_eq!(d.report().lines().count(), 2);
    }

    #[test]
    fn bad_column_count() {
        let b = coach();
        assert!(matches!(
            parse_triples("en\tcoach\t1\n", &b),
            Err(TripleError::Parse { line: 1, .. })
        ));
    }
}
