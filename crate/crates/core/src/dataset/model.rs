use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

/// ISO-style language code (`gl`, `en`, `pt`, `es`, ...). Always lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: impl Into<String>) -> Result<Self, String> {
        let code = code.into();
        if code.is_empty() {
            return Err("language code must not be empty".into());
        }
        if code.chars().any(|c| c.is_uppercase() || c.is_whitespace()) {
            return Err(format!("language code {code:?} must be lowercase without spaces"));
        }
        Ok(Self(code))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LanguageCode {
    type Error = String;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<LanguageCode> for String {
    fn from(value: LanguageCode) -> Self {
        value.0
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Character span `[start, end)` of one target word inside a sentence.
///
/// Offsets count Unicode scalar values, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpan {
    pub start: usize,
    pub end: usize,
    pub form: String,
}

impl TargetSpan {
    pub fn new(start: usize, end: usize, form: impl Into<String>) -> Self {
        Self {
            start,
            end,
            form: form.into(),
        }
    }

    /// The substring of `text` covered by this span, if the offsets are in range.
    pub fn slice<'t>(&self, text: &'t str) -> Option<&'t str> {
        if self.start >= self.end {
            return None;
        }
        let mut indices = text.char_indices().map(|(i, _)| i).chain(Some(text.len()));
        let start = indices.nth(self.start)?;
        let end = indices.nth(self.end - self.start - 1)?;
        Some(&text[start..end])
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }
}

/// What the target word of a sentence is, relative to its sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    TargetForm,
    Synonym,
    Distractor,
}

impl Role {
    /// The role fixed by a sentence slot (1..=5).
    pub fn for_sentence_id(sentence_id: u8) -> Option<Role> {
        match sentence_id {
            1 | 4 => Some(Role::TargetForm),
            2 | 5 => Some(Role::Synonym),
            3 => Some(Role::Distractor),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub sentence_id: u8,
    pub text: String,
    /// One span per component word; multiword targets have several.
    pub target: Vec<TargetSpan>,
    pub role: Role,
    /// Universal POS tag of the target occurrence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
    pub context_id: String,
    /// Citation form of the target, when the surface form is inflected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
}

impl SentenceRecord {
    /// Space-joined surface form of the target.
    pub fn target_form(&self) -> String {
        let forms: Vec<&str> = self.target.iter().map(|s| s.form.as_str()).collect();
        forms.join(" ")
    }

    /// Annotated lemma, falling back to the surface form.
    pub fn target_lemma(&self) -> String {
        self.lemma.clone().unwrap_or_else(|| self.target_form())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseEntry {
    pub sense_id: String,
    pub gloss: String,
    pub sentences: BTreeMap<u8, SentenceRecord>,
}

impl SenseEntry {
    pub fn sentence(&self, sentence_id: u8) -> Option<&SentenceRecord> {
        self.sentences.get(&sentence_id)
    }

    /// POS of the sense, taken from its first target-form sentence.
    pub fn pos(&self) -> Option<&str> {
        self.sentence(1)
            .or_else(|| self.sentence(4))
            .and_then(|s| s.pos.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbiguityLevel {
    Absolute,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomonymEntry {
    pub lemma: String,
    pub ambiguity_level: AmbiguityLevel,
    pub senses: Vec<SenseEntry>,
}

/// Reference to one dataset sentence by `(sense_id, sentence_id)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceRef {
    pub sense_id: String,
    pub sentence_id: u8,
}

impl SentenceRef {
    pub fn new(sense_id: impl Into<String>, sentence_id: u8) -> Self {
        Self {
            sense_id: sense_id.into(),
            sentence_id,
        }
    }
}

impl fmt::Display for SentenceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.sense_id, self.sentence_id)
    }
}

/// Fully qualified sentence key, serialized as `lemma/sense_id/sentence_id`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceKey {
    pub lemma: String,
    pub sense_id: String,
    pub sentence_id: u8,
}

impl SentenceKey {
    pub fn new(lemma: impl Into<String>, sense_id: impl Into<String>, sentence_id: u8) -> Self {
        Self {
            lemma: lemma.into(),
            sense_id: sense_id.into(),
            sentence_id,
        }
    }

    pub fn sentence_ref(&self) -> SentenceRef {
        SentenceRef::new(self.sense_id.clone(), self.sentence_id)
    }
}

impl fmt::Display for SentenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.lemma, self.sense_id, self.sentence_id)
    }
}

impl std::str::FromStr for SentenceKey {
    type Err = String;

    /// Parses `lemma/sense_id/sentence_id`; the lemma may itself contain `/`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.rsplitn(3, '/');
        let sent = parts.next();
        let sense = parts.next();
        let lemma = parts.next();
        match (lemma, sense, sent) {
            (Some(lemma), Some(sense), Some(sent)) if !lemma.is_empty() && !sense.is_empty() => {
                let sentence_id = sent
                    .trim()
                    .parse::<u8>()
                    .map_err(|_| format!("bad sentence id in key {s:?}"))?;
                Ok(SentenceKey::new(lemma, sense, sentence_id))
            }
            _ => Err(format!("expected lemma/sense_id/sentence_id, got {s:?}")),
        }
    }
}

/// How surface forms are compared when deciding whether two targets share a form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormMatch {
    #[default]
    CaseInsensitive,
    Exact,
}

impl FormMatch {
    pub fn same(self, a: &str, b: &str) -> bool {
        match self {
            FormMatch::Exact => a == b,
            FormMatch::CaseInsensitive => a.to_lowercase() == b.to_lowercase(),
        }
    }

    pub fn key(self, form: &str) -> String {
        match self {
            FormMatch::Exact => form.to_string(),
            FormMatch::CaseInsensitive => form.to_lowercase(),
        }
    }
}

/// A resolved sentence together with its owning homonym and sense.
#[derive(Debug, Clone, Copy)]
pub struct Resolved<'a> {
    pub homonym: &'a HomonymEntry,
    pub sense: &'a SenseEntry,
    pub sentence: &'a SentenceRecord,
}

impl Resolved<'_> {
    pub fn key(&self) -> SentenceKey {
        SentenceKey::new(
            self.homonym.lemma.clone(),
            self.sense.sense_id.clone(),
            self.sentence.sentence_id,
        )
    }
}

/// All homonyms of one language. Immutable once built.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub language: LanguageCode,
    pub homonyms: Vec<HomonymEntry>,
    sense_index: HashMap<String, (usize, usize)>,
}

impl PartialEq for DatasetBundle {
    fn eq(&self, other: &Self) -> bool {
        self.language == other.language && self.homonyms == other.homonyms
    }
}

impl DatasetBundle {
    /// Builds the bundle and its sense index. When a sense id repeats, the
    /// first occurrence is indexed; validation reports the duplicate.
    pub fn new(language: LanguageCode, homonyms: Vec<HomonymEntry>) -> Self {
        let mut sense_index = HashMap::new();
        for (h, hom) in homonyms.iter().enumerate() {
            for (s, sense) in hom.senses.iter().enumerate() {
                sense_index.entry(sense.sense_id.clone()).or_insert((h, s));
            }
        }
        Self {
            language,
            homonyms,
            sense_index,
        }
    }

    pub fn sense(&self, sense_id: &str) -> Option<(&HomonymEntry, &SenseEntry)> {
        let &(h, s) = self.sense_index.get(sense_id)?;
        let hom = &self.homonyms[h];
        Some((hom, &hom.senses[s]))
    }

    pub fn resolve(&self, r: &SentenceRef) -> Option<Resolved<'_>> {
        let (homonym, sense) = self.sense(&r.sense_id)?;
        let sentence = sense.sentence(r.sentence_id)?;
        Some(Resolved {
            homonym,
            sense,
            sentence,
        })
    }

    pub fn resolve_key(&self, key: &SentenceKey) -> Option<Resolved<'_>> {
        self.resolve(&key.sentence_ref())
            .filter(|r| r.homonym.lemma == key.lemma)
    }

    /// Every sentence in file order.
    pub fn sentences(&self) -> impl Iterator<Item = Resolved<'_>> {
        self.homonyms.iter().flat_map(|homonym| {
            homonym.senses.iter().flat_map(move |sense| {
                sense.sentences.values().map(move |sentence| Resolved {
                    homonym,
                    sense,
                    sentence,
                })
            })
        })
    }
}
