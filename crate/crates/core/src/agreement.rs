//! Inter-annotator agreement on same-sense judgements.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{export_pairs, DatasetBundle, FormMatch, LabeledPair};

#[derive(Debug, thiserror::Error)]
pub enum AgreementError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("requested {requested} pairs but only {available} exist")]
    NotEnoughPairs { requested: usize, available: usize },
    #[error("sheets label different pairs ({only_a} only in {a}, {only_b} only in {b}; first: {first})")]
    RefMismatch {
        a: String,
        b: String,
        only_a: usize,
        only_b: usize,
        first: String,
    },
    #[error("sheet {annotator} leaves {count} pair(s) unlabeled; first: {first}")]
    Unlabeled {
        annotator: String,
        count: usize,
        first: String,
    },
    #[error("no labeled pairs")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    T,
    F,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::T => "T",
            Label::F => "F",
        }
    }

    pub fn from_bool(same: bool) -> Self {
        if same {
            Label::T
        } else {
            Label::F
        }
    }
}

/// One annotator's labels, keyed by `LabeledPair::pair_ref`. Unlabeled
/// rows are kept so a blank sheet can be handed out and read back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSheet {
    pub annotator_id: String,
    pub pairs: Vec<(String, Option<Label>)>,
}

impl AnnotationSheet {
    pub fn blank(annotator_id: impl Into<String>, pairs: &[LabeledPair]) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            pairs: pairs.iter().map(|p| (p.pair_ref(), None)).collect(),
        }
    }

    /// Sheet carrying the dataset's own labels.
    pub fn gold(pairs: &[LabeledPair]) -> Self {
        Self {
            annotator_id: "gold".into(),
            pairs: pairs
                .iter()
                .map(|p| (p.pair_ref(), Some(Label::from_bool(p.same_sense))))
                .collect(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("pair_ref\tlabel\n");
        for (r, l) in &self.pairs {
            let _ = writeln!(s, "{r}\t{}", l.map_or("", Label::as_str));
        }
        s
    }

    /// Reads `pair_ref<TAB>label`; an empty or `_` label means unlabeled.
    pub fn parse(annotator_id: impl Into<String>, text: &str) -> Result<Self, AgreementError> {
        let mut pairs = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || (i == 0 && raw.starts_with("pair_ref")) {
                continue;
            }
            let (r, l) = raw.split_once('\t').unwrap_or((raw, ""));
            let label = match l.trim() {
                "" | "_" => None,
                "T" | "t" | "1" | "true" => Some(Label::T),
                "F" | "f" | "0" | "false" => Some(Label::F),
                other => {
                    return Err(AgreementError::Parse {
                        line,
                        message: format!("bad label {other:?}"),
                    })
                }
            };
            let r = r.trim().to_string();
            if !seen.insert(r.clone()) {
                return Err(AgreementError::Parse {
                    line,
                    message: format!("duplicate pair {r}"),
                });
            }
            pairs.push((r, label));
        }
        Ok(Self {
            annotator_id: annotator_id.into(),
            pairs,
        })
    }

    /// Annotator id defaults to the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, AgreementError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| AgreementError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(id, &text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), AgreementError> {
        let path = path.as_ref();
        fs::write(path, self.to_tsv()).map_err(|source| AgreementError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    fn labels(&self) -> HashMap<&str, Label> {
        self.pairs
            .iter()
            .filter_map(|(r, l)| l.map(|l| (r.as_str(), l)))
            .collect()
    }
}

/// Uniform sample without replacement of `n` exported pairs, reproducible
/// from `seed`, in sampled order.
pub fn sample_pair_list(bundle: &DatasetBundle, n: usize, seed: u64) -> Result<Vec<LabeledPair>, AgreementError> {
    let mut pool = export_pairs(bundle, false, FormMatch::default());
    if n > pool.len() {
        return Err(AgreementError::NotEnoughPairs {
            requested: n,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (picked, _) = pool.partial_shuffle(&mut rng, n);
    Ok(picked.to_vec())
}

/// Blank annotation sheet over a seeded sample of `n` pairs.
pub fn sample_pairs(bundle: &DatasetBundle, n: usize, seed: u64) -> Result<AnnotationSheet, AgreementError> {
    Ok(AnnotationSheet::blank("template", &sample_pair_list(bundle, n, seed)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub kappa: f64,
    /// Pairs labeled by both sides.
    pub n: usize,
    pub observed: f64,
    pub expected: f64,
}

/// `(po - pe) / (1 - pe)` from a 2x2 table; `1.0` when `pe == 1`.
fn kappa_from_counts(tt: usize, tf: usize, ft: usize, ff: usize) -> Option<Kappa> {
    let n = tt + tf + ft + ff;
    if n == 0 {
        return None;
    }
    let nf = n as f64;
    let po = (tt + ff) as f64 / nf;
    let a_t = (tt + tf) as f64 / nf;
    let b_t = (tt + ft) as f64 / nf;
    let pe = a_t * b_t + (1.0 - a_t) * (1.0 - b_t);
    let kappa = if pe == 1.0 { 1.0 } else { (po - pe) / (1.0 - pe) };
    Some(Kappa {
        kappa,
        n,
        observed: po,
        expected: pe,
    })
}

#[derive(Default)]
struct Table {
    tt: usize,
    tf: usize,
    ft: usize,
    ff: usize,
}

fn labeled(sheet: &AnnotationSheet) -> Result<HashMap<&str, Label>, AgreementError> {
    let blank: Vec<&str> = sheet
        .pairs
        .iter()
        .filter(|(_, l)| l.is_none())
        .map(|(r, _)| r.as_str())
        .collect();
    if let Some(first) = blank.first() {
        return Err(AgreementError::Unlabeled {
            annotator: sheet.annotator_id.clone(),
            count: blank.len(),
            first: first.to_string(),
        });
    }
    Ok(sheet.labels())
}

impl Table {
    fn fill(&mut self, a: &AnnotationSheet, b: &AnnotationSheet) -> Result<(), AgreementError> {
        let la = labeled(a)?;
        let lb = labeled(b)?;
        let mut only_a: Vec<&str> = la.keys().filter(|r| !lb.contains_key(*r)).copied().collect();
        let mut only_b: Vec<&str> = lb.keys().filter(|r| !la.contains_key(*r)).copied().collect();
        if !only_a.is_empty() || !only_b.is_empty() {
            only_a.sort_unstable();
            only_b.sort_unstable();
            let first = only_a.first().or(only_b.first()).unwrap().to_string();
            return Err(AgreementError::RefMismatch {
                a: a.annotator_id.clone(),
                b: b.annotator_id.clone(),
                only_a: only_a.len(),
                only_b: only_b.len(),
                first,
            });
        }
        for (r, x) in &la {
            match (x, lb[r]) {
                (Label::T, Label::T) => self.tt += 1,
                (Label::T, Label::F) => self.tf += 1,
                (Label::F, Label::T) => self.ft += 1,
                (Label::F, Label::F) => self.ff += 1,
            }
        }
        Ok(())
    }

    fn kappa(&self) -> Result<Kappa, AgreementError> {
        kappa_from_counts(self.tt, self.tf, self.ft, self.ff).ok_or(AgreementError::Empty)
    }
}

/// Cohen's kappa between two sheets over the same pairs, matched by
/// reference regardless of row order.
pub fn cohen_kappa(a: &AnnotationSheet, b: &AnnotationSheet) -> Result<Kappa, AgreementError> {
    let mut t = Table::default();
    t.fill(a, b)?;
    t.kappa()
}

/// Kappa over all items of several sheet pairs pooled together (micro
/// average across languages).
pub fn pooled_kappa(pairs: &[(&AnnotationSheet, &AnnotationSheet)]) -> Result<Kappa, AgreementError> {
    let mut t = Table::default();
    for (a, b) in pairs {
        t.fill(a, b)?;
    }
    t.kappa()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::coach;
    use approx::assert_abs_diff_eq;

    fn sheet(id: &str, labels: &[Label]) -> AnnotationSheet {
        AnnotationSheet {
            annotator_id: id.into(),
            pairs: labels.iter().enumerate().map(|(i, l)| (format!("p{i}"), Some(*l))).collect(),
        }
    }

    use Label::{F, T};

    #[test]
    fn identical_is_one() {
        let a = sheet("a", &[T, F, T, T]);
        assert_eq!(cohen_kappa(&a, &a).unwrap().kappa, 1.0);
        let all_t = sheet("a", &[T, T, T]);
        assert_eq!(cohen_kappa(&all_t, &all_t).unwrap().kappa, 1.0);
    }

    #[test]
    fn chance_agreement_is_zero() {
        let a = sheet("a", &[T, T, F, F]);
        let b = sheet("b", &[T, F, F, T]);
        let k = cohen_kappa(&a, &b).unwrap();
        assert_abs_diff_eq!(k.observed, 0.5);
        assert_abs_diff_eq!(k.expected, 0.5);
        assert_abs_diff_eq!(k.kappa, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_and_label_invariant() {
        let a = sheet("a", &[T, T, F, T, F, T, T]);
        let b = sheet("b", &[T, F, F, T, T, T, F]);
        let flip = |s: &AnnotationSheet| AnnotationSheet {
            annotator_id: s.annotator_id.clone(),
            pairs: s
                .pairs
                .iter()
                .map(|(r, l)| (r.clone(), l.map(|l| if l == T { F } else { T })))
                .collect(),
        };
        let k = cohen_kappa(&a, &b).unwrap().kappa;
        assert_abs_diff_eq!(cohen_kappa(&b, &a).unwrap().kappa, k, epsilon = 1e-12);
        assert_abs_diff_eq!(cohen_kappa(&flip(&a), &flip(&b)).unwrap().kappa, k, epsilon = 1e-12);
    }

    #[test]
    fn aligns_by_reference() {
        let a = sheet("a", &[T, F]);
        let mut b = sheet("b", &[T, F]);
        b.pairs.reverse();
        assert_eq!(cohen_kappa(&a, &b).unwrap().kappa, 1.0);
        b.pairs.push(("extra".into(), Some(T)));
        match cohen_kappa(&a, &b) {
            Err(AgreementError::RefMismatch { only_a: 0, only_b: 1, first, .. }) => assert_eq!(first, "extra"),
            other => panic!("unexpected {other:?}"),
        }
        let mut c = sheet("c", &[T, F]);
        c.pairs[1].1 = None;
        assert!(matches!(cohen_kappa(&a, &c), Err(AgreementError::Unlabeled { count: 1, .. })));
        let none = AnnotationSheet::blank("x", &[]);
        assert!(matches!(cohen_kappa(&none, &none), Err(AgreementError::Empty)));
    }

    #[test]
    fn pooled_counts_all_items() {
        let a1 = sheet("a", &[T, T]);
        let b1 = sheet("b", &[T, T]);
        let a2 = sheet("a", &[F, F]);
        let b2 = sheet("b", &[F, F]);
        // each language alone has pe = 1; pooled has both classes
        let k = pooled_kappa(&[(&a1, &b1), (&a2, &b2)]).unwrap();
        assert_eq!(k.n, 4);
        assert_abs_diff_eq!(k.expected, 0.5);
        assert_eq!(k.kappa, 1.0);
    }

    #[test]
    fn sheet_roundtrip() {
        let mut s = sheet("a", &[T, F]);
        s.pairs.push(("p9".into(), None));
        let back = AnnotationSheet::parse("a", &s.to_tsv()).unwrap();
        assert_eq!(back, s);
        assert!(AnnotationSheet::parse("a", "p1\tmaybe\n").is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let b = coach();
        let x = sample_pairs(&b, 10, 7).unwrap();
        let y = sample_pairs(&b, 10, 7).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.pairs.len(), 10);
        assert!(x.pairs.iter().all(|(_, l)| l.is_none()));
        let all = export_pairs(&b, false, FormMatch::default());
        let refs: Vec<String> = all.iter().map(LabeledPair::pair_ref).collect();
        assert!(x.pairs.iter().all(|(r, _)| refs.contains(r)));
        assert!(matches!(
            sample_pairs(&b, all.len() + 1, 7),
            Err(AgreementError::NotEnoughPairs { .. })
        ));
        let mut full = sample_pair_list(&b, all.len(), 1).unwrap();
        assert_ne!(full, all);
        full.sort();
        assert_eq!(full, all);
    }
}
