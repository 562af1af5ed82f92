//! Static word vectors: text vector files and the `wv`, `sent` and `syn`
//! strategies.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::conllu::DependencyParse;
use crate::dataset::{DatasetBundle, SentenceKey, SentenceRef, TargetSpan};
use crate::eval::{ProviderError, Strategy, VectorProvider};
use crate::scalar::{add_assign, mean_rows, Scalar};

#[derive(Debug, thiserror::Error)]
pub enum StaticError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("out-of-vocabulary token {0:?}")]
    Oov(String),
    #[error("no in-vocabulary token in sentence")]
    EmptySentence,
    #[error("target has no spans")]
    NoTarget,
    #[error("k must be between 1 and 4, got {0}")]
    BadK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaseFolding {
    #[default]
    None,
    Lower,
}

impl CaseFolding {
    fn fold<'s>(self, s: &'s str) -> std::borrow::Cow<'s, str> {
        match self {
            CaseFolding::None => s.into(),
            CaseFolding::Lower => s.to_lowercase().into(),
        }
    }
}

/// Token → vector map read from a text vector file.
#[derive(Debug, Clone)]
pub struct VectorTable<T> {
    dim: usize,
    folding: CaseFolding,
    index: HashMap<String, usize>,
    data: Vec<T>,
    duplicates: usize,
}

impl<T: Scalar> VectorTable<T> {
    /// Builds a table from in-memory rows (keep-first on duplicates).
    pub fn from_rows<S: AsRef<str>>(
        dim: usize,
        folding: CaseFolding,
        rows: impl IntoIterator<Item = (S, Vec<T>)>,
    ) -> Result<Self, StaticError> {
        if dim == 0 {
            return Err(StaticError::Format {
                line: 0,
                message: "dimension must be positive".into(),
            });
        }
        let mut table = Self {
            dim,
            folding,
            index: HashMap::new(),
            data: Vec::new(),
            duplicates: 0,
        };
        for (i, (tok, v)) in rows.into_iter().enumerate() {
            if v.len() != dim {
                return Err(StaticError::Format {
                    line: i + 1,
                    message: format!("row has {} values, expected {dim}", v.len()),
                });
            }
            table.insert(tok.as_ref(), &v);
        }
        Ok(table)
    }

    fn insert(&mut self, token: &str, v: &[T]) -> bool {
        let key = self.folding.fold(token).into_owned();
        if self.index.contains_key(&key) {
            self.duplicates += 1;
            return false;
        }
        self.index.insert(key, self.index.len());
        self.data.extend_from_slice(v);
        true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.index.len()
    }

    /// Rows dropped because their token (after folding) was already present.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, token: &str) -> Option<&[T]> {
        let &row = self.index.get(self.folding.fold(token).as_ref())?;
        Some(&self.data[row * self.dim..(row + 1) * self.dim])
    }

    fn lookup(&self, token: &str, retry_lower: bool) -> Option<&[T]> {
        self.get(token).or_else(|| {
            if retry_lower {
                self.get(&token.to_lowercase())
            } else {
                None
            }
        })
    }
}

/// Reads the text vector format: a `vocab_size dim` header, then one line
/// per token with `dim` space-separated decimals.
pub fn load_vectors<T: Scalar>(path: impl AsRef<Path>, folding: CaseFolding) -> Result<VectorTable<T>, StaticError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| StaticError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_vectors(BufReader::new(file), folding).map_err(|e| match e {
        StaticError::Io { source, .. } => StaticError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn read_vectors<T: Scalar, R: BufRead>(reader: R, folding: CaseFolding) -> Result<VectorTable<T>, StaticError> {
    let mut lines = reader.lines().enumerate();
    let io = |source| StaticError::Io {
        path: Default::default(),
        source,
    };
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(io)?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => {
                return Err(StaticError::Format {
                    line: 1,
                    message: "empty vector file".into(),
                })
            }
        }
    };
    let fmt_err = |line: usize, message: String| StaticError::Format { line, message };
    let mut parts = header.split_whitespace();
    let (declared, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(n), Some(d), None) => (
            n.parse::<usize>()
                .map_err(|_| fmt_err(1, format!("bad vocabulary size {n:?}")))?,
            d.parse::<usize>()
                .map_err(|_| fmt_err(1, format!("bad dimension {d:?}")))?,
        ),
        _ => return Err(fmt_err(1, format!("expected \"vocab_size dim\" header, got {header:?}"))),
    };
    let mut table = VectorTable::from_rows(dim, folding, std::iter::empty::<(&str, Vec<T>)>())?;
    table.data.reserve(declared.saturating_mul(dim).min(1 << 28));
    let mut rows = 0usize;
    let mut buf: Vec<T> = Vec::with_capacity(dim);
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(io)?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let token = fields.next().expect("non-empty line has a field");
        buf.clear();
        for f in fields {
            let v = f
                .parse::<T>()
                .map_err(|_| fmt_err(line_no, format!("bad value {f:?} for {token:?}")))?;
            buf.push(v);
        }
        if buf.len() != dim {
            return Err(fmt_err(
                line_no,
                format!("{token:?} has {} values, expected {dim}", buf.len()),
            ));
        }
        if !table.insert(token, &buf) {
            log::warn!("line {line_no}: duplicate token {token:?} ignored");
        }
        rows += 1;
    }
    if rows != declared {
        return Err(fmt_err(1, format!("header declares {declared} rows, file has {rows}")));
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    #[default]
    Error,
    Zero,
    LowercaseRetry,
}

/// A vector together with the number of tokens that were not found.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded<T> {
    pub vector: Vec<T>,
    pub oov: usize,
}

fn token_vector<T: Scalar>(table: &VectorTable<T>, token: &str, policy: OovPolicy) -> Result<(Vec<T>, usize), StaticError> {
    match policy {
        OovPolicy::Error => table
            .get(token)
            .map(|v| (v.to_vec(), 0))
            .ok_or_else(|| StaticError::Oov(token.to_string())),
        OovPolicy::LowercaseRetry => table
            .lookup(token, true)
            .map(|v| (v.to_vec(), 0))
            .ok_or_else(|| StaticError::Oov(token.to_string())),
        OovPolicy::Zero => Ok(match table.get(token) {
            Some(v) => (v.to_vec(), 0),
            None => {
                log::warn!("out-of-vocabulary {token:?} mapped to zero vector");
                (vec![T::zero(); table.dim()], 1)
            }
        }),
    }
}

/// Vector of a target; multiword targets average their components.
pub fn word_vector<T: Scalar>(table: &VectorTable<T>, spans: &[TargetSpan], policy: OovPolicy) -> Result<Embedded<T>, StaticError> {
    match spans {
        [] => Err(StaticError::NoTarget),
        [one] => token_vector(table, &one.form, policy).map(|(vector, oov)| Embedded { vector, oov }),
        many => {
            let mut oov = 0;
            let mut rows = Vec::with_capacity(many.len());
            for s in many {
                let (v, miss) = token_vector(table, &s.form, policy)?;
                oov += miss;
                rows.push(v);
            }
            Ok(Embedded {
                vector: mean_rows(rows.iter().map(Vec::as_slice), table.dim()),
                oov,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct SentenceOptions {
    /// Tokens excluded from the average, compared case-insensitively.
    pub stopwords: Option<HashSet<String>>,
    /// Retry a lowercased lookup before counting a token as missing.
    pub lowercase_retry: bool,
}

impl Default for SentenceOptions {
    fn default() -> Self {
        Self {
            stopwords: None,
            lowercase_retry: true,
        }
    }
}

/// Mean of the in-vocabulary token vectors; missing tokens are skipped.
pub fn sentence_vector<T: Scalar, S: AsRef<str>>(
    table: &VectorTable<T>,
    tokens: &[S],
    opts: &SentenceOptions,
) -> Result<Embedded<T>, StaticError> {
    let mut rows = Vec::new();
    let mut oov = 0;
    for tok in tokens {
        let tok = tok.as_ref();
        if let Some(stop) = &opts.stopwords {
            if stop.contains(&tok.to_lowercase()) {
                continue;
            }
        }
        match table.lookup(tok, opts.lowercase_retry) {
            Some(v) => rows.push(v),
            None => oov += 1,
        }
    }
    if rows.is_empty() {
        return Err(StaticError::EmptySentence);
    }
    Ok(Embedded {
        vector: mean_rows(rows, table.dim()),
        oov,
    })
}

/// Whitespace tokenization with punctuation split off into separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let mut cur = String::new();
        for ch in word.chars() {
            if ch.is_alphanumeric() || ch == '-' && !cur.is_empty() {
                cur.push(ch);
            } else {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// Number of context vectors added to the target in the `syn` strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynConfig {
    k: usize,
}

impl SynConfig {
    pub const MAX_K: usize = 4;

    pub fn new(k: usize) -> Result<Self, StaticError> {
        if (1..=Self::MAX_K).contains(&k) {
            Ok(Self { k })
        } else {
            Err(StaticError::BadK(k))
        }
    }

    pub fn k(self) -> usize {
        self.k
    }
}

impl Default for SynConfig {
    fn default() -> Self {
        Self { k: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContextSelection {
    pub indices: Vec<usize>,
    pub warning: Option<String>,
}

const DEP_VERB_RELS: [&str; 3] = ["obj", "nmod", "obl"];
const ARG_RELS: [&str; 3] = ["nsubj", "nmod", "obl"];

/// Picks up to `k` syntactically related tokens of `target` (0-based).
///
/// Nouns: head verb > dependents of the head verb in {obj, nmod, obl} >
/// dependent adjectives > dependent nouns. Verbs: head (verb or noun) >
/// direct object > dependents in {nsubj, nmod, obl}. Ties within a tier go
/// to the lower token index.
pub fn select_syntactic_context(parse: &DependencyParse, target: usize, k: usize) -> ContextSelection {
    select_excluding(parse, target, k, &[target])
}

fn select_excluding(parse: &DependencyParse, target: usize, k: usize, exclude: &[usize]) -> ContextSelection {
    let Some(tok) = parse.tokens.get(target) else {
        return ContextSelection {
            indices: Vec::new(),
            warning: Some(format!("target index {target} out of range")),
        };
    };
    let upos = |i: usize| parse.tokens[i].upos.as_str();
    let rel = |i: usize| parse.tokens[i].base_deprel();
    let head = parse.head_of(target);
    let mut tiers: Vec<Vec<usize>> = Vec::new();
    match tok.upos.as_str() {
        "NOUN" | "PROPN" => {
            let head_verb = head.filter(|&h| upos(h) == "VERB");
            tiers.push(head_verb.into_iter().collect());
            tiers.push(
                head_verb
                    .map(|h| {
                        parse
                            .dependents(h)
                            .filter(|&d| DEP_VERB_RELS.contains(&rel(d)))
                            .collect()
                    })
                    .unwrap_or_default(),
            );
            tiers.push(parse.dependents(target).filter(|&d| upos(d) == "ADJ").collect());
            tiers.push(
                parse
                    .dependents(target)
                    .filter(|&d| matches!(upos(d), "NOUN" | "PROPN"))
                    .collect(),
            );
        }
        "VERB" => {
            tiers.push(
                head.filter(|&h| matches!(upos(h), "VERB" | "NOUN"))
                    .into_iter()
                    .collect(),
            );
            tiers.push(parse.dependents(target).filter(|&d| rel(d) == "obj").collect());
            tiers.push(
                parse
                    .dependents(target)
                    .filter(|&d| ARG_RELS.contains(&rel(d)))
                    .collect(),
            );
        }
        other => {
            return ContextSelection {
                indices: Vec::new(),
                warning: Some(format!("target POS {other} has no context hierarchy")),
            }
        }
    }
    let mut indices = Vec::with_capacity(k);
    for mut tier in tiers {
        tier.sort_unstable();
        for i in tier {
            if indices.len() == k {
                break;
            }
            if !exclude.contains(&i) && !indices.contains(&i) {
                indices.push(i);
            }
        }
    }
    ContextSelection {
        indices,
        warning: None,
    }
}

/// Parse token indices covering the target spans, and the one acting as
/// syntactic head of the target (a component whose head lies outside it).
pub fn align_parse_target(parse: &DependencyParse, text: &str, spans: &[TargetSpan]) -> Option<(usize, Vec<usize>)> {
    let offsets = parse.char_offsets(text);
    let mut covered: Vec<usize> = offsets
        .iter()
        .enumerate()
        .filter_map(|(i, o)| {
            let (s, e) = (*o)?;
            spans.iter().any(|sp| sp.overlaps(s, e)).then_some(i)
        })
        .collect();
    if covered.is_empty() {
        // Fall back to form equality when the parse text was normalized.
        covered = spans
            .iter()
            .filter_map(|sp| parse.tokens.iter().position(|t| t.form == sp.form))
            .collect();
        covered.sort_unstable();
        covered.dedup();
    }
    let head = *covered
        .iter()
        .find(|&&i| parse.head_of(i).is_none_or(|h| !covered.contains(&h)))
        .or(covered.first())?;
    Some((head, covered))
}

/// Target vector plus the vectors of up to `k` syntactic context words.
/// Context words missing from the table are skipped and counted.
pub fn syn_vector<T: Scalar>(
    table: &VectorTable<T>,
    parse: &DependencyParse,
    text: &str,
    spans: &[TargetSpan],
    cfg: SynConfig,
    policy: OovPolicy,
) -> Result<Embedded<T>, StaticError> {
    let Embedded { mut vector, mut oov } = word_vector(table, spans, policy)?;
    let Some((head, covered)) = align_parse_target(parse, text, spans) else {
        log::warn!("target {:?} not found in parse; using word vector", spans);
        return Ok(Embedded { vector, oov });
    };
    let sel = select_excluding(parse, head, cfg.k(), &covered);
    if let Some(w) = &sel.warning {
        log::debug!("{w}");
    }
    for i in sel.indices {
        match table.lookup(&parse.tokens[i].form, policy == OovPolicy::LowercaseRetry) {
            Some(v) => add_assign(&mut vector, v),
            None => oov += 1,
        }
    }
    Ok(Embedded { vector, oov })
}

/// Static provider: resolves dataset sentences to `wv`, `sent` or `syn` vectors.
pub struct StaticProvider<'a, T> {
    bundle: &'a DatasetBundle,
    table: &'a VectorTable<T>,
    parses: Option<&'a HashMap<SentenceKey, DependencyParse>>,
    policy: OovPolicy,
    sentence: SentenceOptions,
    oov: AtomicUsize,
}

impl<'a, T: Scalar> StaticProvider<'a, T> {
    pub fn new(bundle: &'a DatasetBundle, table: &'a VectorTable<T>) -> Self {
        Self {
            bundle,
            table,
            parses: None,
            policy: OovPolicy::default(),
            sentence: SentenceOptions::default(),
            oov: AtomicUsize::new(0),
        }
    }

    pub fn with_parses(mut self, parses: &'a HashMap<SentenceKey, DependencyParse>) -> Self {
        self.parses = Some(parses);
        self
    }

    pub fn with_policy(mut self, policy: OovPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_sentence_options(mut self, opts: SentenceOptions) -> Self {
        self.sentence = opts;
        self
    }

    /// Tokens that were missing from the table so far.
    pub fn oov_count(&self) -> usize {
        self.oov.load(Ordering::Relaxed)
    }

    fn parse_for(&self, key: &SentenceKey) -> Option<&'a DependencyParse> {
        self.parses.and_then(|p| p.get(key))
    }
}

impl<T: Scalar> VectorProvider for StaticProvider<'_, T> {
    type Scalar = T;

    fn describe(&self) -> String {
        format!("static(dim={})", self.table.dim())
    }

    fn supports(&self, strategy: &Strategy) -> bool {
        matches!(strategy, Strategy::Wv | Strategy::Sent | Strategy::Syn(_))
    }

    fn resolves(&self, r: &SentenceRef, strategy: &Strategy) -> bool {
        match self.bundle.resolve(r) {
            None => false,
            Some(res) => match strategy {
                Strategy::Syn(_) => self.parse_for(&res.key()).is_some(),
                _ => true,
            },
        }
    }

    fn vector(&self, r: &SentenceRef, strategy: &Strategy) -> Result<Vec<T>, ProviderError> {
        let res = self
            .bundle
            .resolve(r)
            .ok_or_else(|| ProviderError::Unresolved(r.to_string()))?;
        let key = res.key();
        let sent = res.sentence;
        let out = match strategy {
            Strategy::Wv => word_vector(self.table, &sent.target, self.policy),
            Strategy::Sent => match self.parse_for(&key) {
                Some(p) => {
                    let forms: Vec<&str> = p.tokens.iter().map(|t| t.form.as_str()).collect();
                    sentence_vector(self.table, &forms, &self.sentence)
                }
                None => sentence_vector(self.table, &tokenize(&sent.text), &self.sentence),
            },
            Strategy::Syn(cfg) => {
                let parse = self
                    .parse_for(&key)
                    .ok_or_else(|| ProviderError::Unresolved(format!("parse for {key}")))?;
                syn_vector(self.table, parse, &sent.text, &sent.target, *cfg, self.policy)
            }
            other => return Err(ProviderError::Unsupported(other.to_string())),
        };
        let e = out.map_err(|e| ProviderError::Vector(format!("{key}: {e}")))?;
        self.oov.fetch_add(e.oov, Ordering::Relaxed);
        Ok(e.vector)
    }
}
