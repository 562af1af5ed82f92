use std::collections::HashSet;
use std::fmt;

use super::model::{DatasetBundle, FormMatch, HomonymEntry, Role, SenseEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub lemma: String,
    pub sense_id: Option<String>,
    pub sentence_id: Option<u8>,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}", self.lemma)?;
        if let Some(s) = &self.sense_id {
            write!(f, " sense {s}")?;
        }
        if let Some(n) = self.sentence_id {
            write!(f, " sentence {n}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Warning)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn warning_count(&self) -> usize {
        self.warnings().count()
    }

    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}

struct Collector<'a> {
    lemma: &'a str,
    findings: Vec<Finding>,
}

impl Collector<'_> {
    fn push(&mut self, severity: Severity, sense: Option<&str>, sent: Option<u8>, msg: String) {
        self.findings.push(Finding {
            severity,
            lemma: self.lemma.to_string(),
            sense_id: sense.map(str::to_string),
            sentence_id: sent,
            message: msg,
        });
    }
}

/// Checks every structural invariant of the dataset. Absent synonym
/// sentences (2 and 5) are warnings; everything else is an error.
pub fn validate_dataset(bundle: &DatasetBundle) -> ValidationReport {
    let mut findings = Vec::new();
    let mut seen_senses = HashSet::new();
    for hom in &bundle.homonyms {
        let mut c = Collector {
            lemma: &hom.lemma,
            findings: Vec::new(),
        };
        check_homonym(hom, &mut c, &mut seen_senses);
        findings.extend(c.findings);
    }
    ValidationReport { findings }
}

fn check_homonym(hom: &HomonymEntry, c: &mut Collector<'_>, seen: &mut HashSet<String>) {
    if hom.lemma.trim().is_empty() {
        c.push(Severity::Error, None, None, "empty lemma".into());
    }
    if hom.senses.len() < 2 {
        c.push(
            Severity::Warning,
            None,
            None,
            format!("homonym has {} sense(s); only distractor triples possible", hom.senses.len()),
        );
    }
    for sense in &hom.senses {
        if !seen.insert(sense.sense_id.clone()) {
            c.push(
                Severity::Error,
                Some(&sense.sense_id),
                None,
                "duplicate sense_id in dataset".into(),
            );
        }
        check_sense(hom, sense, c);
    }
}

fn check_sense(hom: &HomonymEntry, sense: &SenseEntry, c: &mut Collector<'_>) {
    let sid = Some(sense.sense_id.as_str());
    for required in [1u8, 3, 4] {
        if sense.sentence(required).is_none() {
            c.push(Severity::Error, sid, Some(required), "required sentence missing".into());
        }
    }
    for optional in [2u8, 5] {
        if sense.sentence(optional).is_none() {
            c.push(
                Severity::Warning,
                sid,
                Some(optional),
                "synonym sentence absent".into(),
            );
        }
    }

    for (&key, sent) in &sense.sentences {
        let n = Some(key);
        if key != sent.sentence_id {
            c.push(
                Severity::Error,
                sid,
                n,
                format!("stored under slot {key} but declares sentence_id {}", sent.sentence_id),
            );
        }
        match Role::for_sentence_id(key) {
            None => c.push(Severity::Error, sid, n, "sentence_id outside 1..=5".into()),
            Some(expected) if expected != sent.role => c.push(
                Severity::Error,
                sid,
                n,
                format!("role {:?} does not match slot (expected {expected:?})", sent.role),
            ),
            Some(_) => {}
        }
        if sent.target.is_empty() {
            c.push(Severity::Error, sid, n, "no target span".into());
        }
        let text_len = sent.text.chars().count();
        for span in &sent.target {
            if !(span.start < span.end && span.end <= text_len) {
                c.push(
                    Severity::Error,
                    sid,
                    n,
                    format!(
                        "span [{}, {}) out of range for text of length {text_len}",
                        span.start, span.end
                    ),
                );
                continue;
            }
            let slice = span.slice(&sent.text).unwrap_or_default();
            if slice != span.form {
                c.push(
                    Severity::Error,
                    sid,
                    n,
                    format!("span [{}, {}) covers {slice:?}, not {:?}", span.start, span.end, span.form),
                );
            }
        }
        if matches!(key, 1 | 4)
            && !sent.target.is_empty()
            && !FormMatch::CaseInsensitive.same(&sent.target_lemma(), &hom.lemma)
        {
            c.push(
                Severity::Error,
                sid,
                n,
                format!(
                    "target {:?} does not match homonym lemma {:?}",
                    sent.target_lemma(),
                    hom.lemma
                ),
            );
        }
    }

    // Sentences 1-3 share one frame; 4 and 5 each have their own.
    let ctx = |n: u8| sense.sentence(n).map(|s| s.context_id.as_str());
    if let Some(frame) = ctx(1) {
        for n in [2u8, 3] {
            if let Some(other) = ctx(n) {
                if other != frame {
                    c.push(
                        Severity::Error,
                        sid,
                        Some(n),
                        format!("context_id {other:?} differs from sentence 1 ({frame:?})"),
                    );
                }
            }
        }
    }
    let frame = ctx(1).or(ctx(2)).or(ctx(3));
    for n in [4u8, 5] {
        if let (Some(own), Some(frame)) = (ctx(n), frame) {
            if own == frame {
                c.push(
                    Severity::Error,
                    sid,
                    Some(n),
                    "context_id must differ from the shared sentence 1-3 context".into(),
                );
            }
        }
    }
    if let (Some(c4), Some(c5)) = (ctx(4), ctx(5)) {
        if c4 == c5 {
            c.push(
                Severity::Error,
                sid,
                Some(5),
                "sentences 4 and 5 must have distinct contexts".into(),
            );
        }
    }
}
