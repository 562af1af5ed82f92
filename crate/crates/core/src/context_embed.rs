//! Contextual vectors from exported transformer hidden states.
//!
//! The interchange file holds one JSON object per line, one per dataset
//! sentence:
//!
//! ```json
//! {"version": "ceif/1",
//!  "sentence_key": "coach/1/4",
//!  "model_id": "bert-base-cased",
//!  "num_layers": 12, "hidden_size": 768, "has_layer0": false,
//!  "text": "The coach left at noon.",
//!  "tokens": [{"text": "[CLS]", "start": 0, "end": 0, "special": true, "word_index": null}, ...],
//!  "stack": [[[...hidden_size floats...], ...one row per token...], ...one block per layer...]}
//! ```
//!
//! `start`/`end` are character offsets into `text`. `stack` is layer-major:
//! `num_layers` blocks (plus the embedding layer first when `has_layer0`).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetBundle, SentenceKey, SentenceRef, TargetSpan};
use crate::eval::{LayeredProvider, ProviderError, Strategy, VectorProvider};
use crate::scalar::{mean_rows, Scalar};

pub const CEIF_VERSION: &str = "ceif/1";

/// Layers combined by `cat`, `add` and `sent`.
pub const LAST_N: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum CeifError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: unsupported version {found:?}, expected {CEIF_VERSION}")]
    Version { line: usize, found: String },
    #[error("{key}: {message}")]
    Shape { key: String, message: String },
    #[error("line {line}: duplicate record for {key}")]
    Duplicate { line: usize, key: String },
    #[error("{key}: no sub-word token overlaps target {form:?} at {start}..{end}")]
    Alignment {
        key: String,
        form: String,
        start: usize,
        end: usize,
    },
    #[error("{key}: layer {layer} outside 1..={max}")]
    Layer { key: String, layer: usize, max: usize },
    #[error("{key}: {message}")]
    Strategy { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CeifToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub special: bool,
    #[serde(default)]
    pub word_index: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord<T> {
    version: String,
    sentence_key: String,
    model_id: String,
    num_layers: usize,
    hidden_size: usize,
    #[serde(default)]
    has_layer0: bool,
    #[serde(default)]
    text: Option<String>,
    tokens: Vec<CeifToken>,
    stack: Vec<Vec<Vec<T>>>,
}

#[derive(Serialize)]
struct RawRecordOut<'a, T> {
    version: &'a str,
    sentence_key: String,
    model_id: &'a str,
    num_layers: usize,
    hidden_size: usize,
    has_layer0: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<&'a str>,
    tokens: &'a [CeifToken],
    stack: Vec<Vec<&'a [T]>>,
}

/// Hidden states of one sentence, stored flat as `[layer][token][hidden]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CeifRecord<T> {
    pub key: SentenceKey,
    pub model_id: String,
    pub num_layers: usize,
    pub hidden_size: usize,
    pub has_layer0: bool,
    pub text: Option<String>,
    pub tokens: Vec<CeifToken>,
    stack: Vec<T>,
}

impl<T: Scalar> CeifRecord<T> {
    /// Builds a record from a layer-major stack after checking its shape.
    pub fn new(
        key: SentenceKey,
        model_id: impl Into<String>,
        hidden_size: usize,
        has_layer0: bool,
        tokens: Vec<CeifToken>,
        layers: Vec<Vec<Vec<T>>>,
    ) -> Result<Self, CeifError> {
        let stored = layers.len();
        let num_layers = stored.saturating_sub(usize::from(has_layer0));
        Self::from_parts(key, model_id.into(), num_layers, hidden_size, has_layer0, None, tokens, layers)
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }

    #[allow(clippy::too_many_arguments)]
    fn from_parts(
        key: SentenceKey,
        model_id: String,
        num_layers: usize,
        hidden_size: usize,
        has_layer0: bool,
        text: Option<String>,
        tokens: Vec<CeifToken>,
        layers: Vec<Vec<Vec<T>>>,
    ) -> Result<Self, CeifError> {
        let shape = |message: String| CeifError::Shape {
            key: key.to_string(),
            message,
        };
        if num_layers == 0 || hidden_size == 0 {
            return Err(shape("num_layers and hidden_size must be positive".into()));
        }
        let expect = num_layers + usize::from(has_layer0);
        if layers.len() != expect {
            return Err(shape(format!("stack has {} layers, expected {expect}", layers.len())));
        }
        if tokens.is_empty() {
            return Err(shape("no tokens".into()));
        }
        for (t, tok) in tokens.iter().enumerate() {
            if !tok.special && tok.start >= tok.end {
                return Err(shape(format!("token {t} ({:?}) has empty span", tok.text)));
            }
        }
        let mut stack = Vec::with_capacity(expect * tokens.len() * hidden_size);
        for (l, block) in layers.into_iter().enumerate() {
            if block.len() != tokens.len() {
                return Err(shape(format!(
                    "layer {l} has {} rows for {} tokens",
                    block.len(),
                    tokens.len()
                )));
            }
            for (t, row) in block.into_iter().enumerate() {
                if row.len() != hidden_size {
                    return Err(shape(format!(
                        "layer {l} token {t} has width {}, expected {hidden_size}",
                        row.len()
                    )));
                }
                stack.extend(row);
            }
        }
        Ok(Self {
            key,
            model_id,
            num_layers,
            hidden_size,
            has_layer0,
            text,
            tokens,
            stack,
        })
    }

    /// Hidden state of `token` at transformer layer `layer` (0 is the
    /// embedding layer, present only when `has_layer0`).
    pub fn row(&self, layer: usize, token: usize) -> Option<&[T]> {
        if layer > self.num_layers || token >= self.tokens.len() || (layer == 0 && !self.has_layer0) {
            return None;
        }
        let block = if self.has_layer0 { layer } else { layer - 1 };
        let start = (block * self.tokens.len() + token) * self.hidden_size;
        Some(&self.stack[start..start + self.hidden_size])
    }

    fn layer_mean(&self, layer: usize, tokens: &[usize]) -> Vec<T> {
        mean_rows(tokens.iter().map(|&t| self.row(layer, t).expect("checked index")), self.hidden_size)
    }

    fn layers_block(&self, last_n: usize) -> Result<std::ops::RangeInclusive<usize>, CeifError> {
        if last_n == 0 || last_n > self.num_layers {
            return Err(CeifError::Strategy {
                key: self.key.to_string(),
                message: format!("cannot combine last {last_n} of {} layers", self.num_layers),
            });
        }
        Ok(self.num_layers + 1 - last_n..=self.num_layers)
    }

    fn to_line(&self) -> String {
        let per_layer = self.tokens.len() * self.hidden_size;
        let stack = self
            .stack
            .chunks(per_layer)
            .map(|block| block.chunks(self.hidden_size).collect())
            .collect();
        let raw = RawRecordOut {
            version: CEIF_VERSION,
            sentence_key: self.key.to_string(),
            model_id: &self.model_id,
            num_layers: self.num_layers,
            hidden_size: self.hidden_size,
            has_layer0: self.has_layer0,
            text: self.text.as_deref(),
            tokens: &self.tokens,
            stack,
        };
        serde_json::to_string(&raw).expect("record serializes")
    }
}

/// How a target's sub-word states are turned into one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextStrategy {
    /// Concatenation of the last `n` layer means.
    Cat { last_n: usize },
    /// Elementwise sum of the last `n` layer means.
    Add { last_n: usize },
    /// Mean at a single transformer layer.
    Lay { layer: usize },
}

/// Indices of the non-special tokens overlapping each target component.
pub fn align_target<T: Scalar>(rec: &CeifRecord<T>, spans: &[TargetSpan]) -> Result<Vec<Vec<usize>>, CeifError> {
    spans
        .iter()
        .map(|sp| {
            let pieces: Vec<usize> = rec
                .tokens
                .iter()
                .enumerate()
                .filter(|(_, t)| !t.special && sp.overlaps(t.start, t.end))
                .map(|(i, _)| i)
                .collect();
            if pieces.is_empty() {
                Err(CeifError::Alignment {
                    key: rec.key.to_string(),
                    form: sp.form.clone(),
                    start: sp.start,
                    end: sp.end,
                })
            } else {
                Ok(pieces)
            }
        })
        .collect()
}

/// Target representation at one layer: pieces are averaged within a
/// component, then components are averaged.
fn target_layer<T: Scalar>(rec: &CeifRecord<T>, groups: &[Vec<usize>], layer: usize) -> Vec<T> {
    if groups.len() == 1 {
        return rec.layer_mean(layer, &groups[0]);
    }
    let comps: Vec<Vec<T>> = groups.iter().map(|g| rec.layer_mean(layer, g)).collect();
    mean_rows(comps.iter().map(Vec::as_slice), rec.hidden_size)
}

pub fn target_vector<T: Scalar>(
    rec: &CeifRecord<T>,
    spans: &[TargetSpan],
    strategy: ContextStrategy,
) -> Result<Vec<T>, CeifError> {
    let groups = align_target(rec, spans)?;
    match strategy {
        ContextStrategy::Lay { layer } => {
            if layer == 0 && !rec.has_layer0 || layer > rec.num_layers {
                return Err(CeifError::Layer {
                    key: rec.key.to_string(),
                    layer,
                    max: rec.num_layers,
                });
            }
            Ok(target_layer(rec, &groups, layer))
        }
        ContextStrategy::Cat { last_n } => {
            let mut out = Vec::with_capacity(last_n * rec.hidden_size);
            for l in rec.layers_block(last_n)? {
                out.extend(target_layer(rec, &groups, l));
            }
            Ok(out)
        }
        ContextStrategy::Add { last_n } => {
            let mut acc = vec![0.0f64; rec.hidden_size];
            for l in rec.layers_block(last_n)? {
                for (a, x) in acc.iter_mut().zip(target_layer(rec, &groups, l)) {
                    *a += x.to_f64_lossless();
                }
            }
            Ok(acc.into_iter().map(|a| T::from_f64(a).unwrap_or_else(T::nan)).collect())
        }
    }
}

/// Mean over non-special tokens of the concatenated last `last_n` layers.
pub fn sentence_vector_ctx<T: Scalar>(rec: &CeifRecord<T>, last_n: usize) -> Result<Vec<T>, CeifError> {
    let words: Vec<usize> = (0..rec.tokens.len()).filter(|&i| !rec.tokens[i].special).collect();
    if words.is_empty() {
        return Err(CeifError::Strategy {
            key: rec.key.to_string(),
            message: "no non-special tokens".into(),
        });
    }
    let mut out = Vec::with_capacity(last_n * rec.hidden_size);
    for l in rec.layers_block(last_n)? {
        out.extend(rec.layer_mean(l, &words));
    }
    Ok(out)
}

/// Parses a whole interchange file; records are keyed by sentence.
pub fn parse_ceif<T: Scalar>(
    input: &str,
) -> Result<HashMap<SentenceKey, CeifRecord<T>>, CeifError> {
    let mut out = HashMap::new();
    for (i, raw) in input.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: RawRecord<T> = serde_json::from_str(raw).map_err(|e| CeifError::Json {
            line,
            message: e.to_string(),
        })?;
        if rec.version != CEIF_VERSION {
            return Err(CeifError::Version {
                line,
                found: rec.version,
            });
        }
        let key: SentenceKey = rec
            .sentence_key
            .parse()
            .map_err(|message| CeifError::Json { line, message })?;
        let rec = CeifRecord::from_parts(
            key.clone(),
            rec.model_id,
            rec.num_layers,
            rec.hidden_size,
            rec.has_layer0,
            rec.text,
            rec.tokens,
            rec.stack,
        )?;
        if out.insert(key.clone(), rec).is_some() {
            return Err(CeifError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
    }
    Ok(out)
}

pub fn load_ceif<T: Scalar>(
    path: impl AsRef<Path>,
) -> Result<HashMap<SentenceKey, CeifRecord<T>>, CeifError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CeifError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_ceif(&text)
}

/// Serializes records, one line each, ordered by key.
pub fn ceif_to_string<'a, T: Scalar>(records: impl IntoIterator<Item = &'a CeifRecord<T>>) -> String {
    let mut recs: Vec<&CeifRecord<T>> = records.into_iter().collect();
    recs.sort_by(|a, b| a.key.cmp(&b.key));
    let mut s = String::new();
    for r in recs {
        let _ = writeln!(s, "{}", r.to_line());
    }
    s
}

pub fn write_ceif<'a, T: Scalar>(
    records: impl IntoIterator<Item = &'a CeifRecord<T>>,
    path: impl AsRef<Path>,
) -> Result<(), CeifError> {
    let path = path.as_ref();
    fs::write(path, ceif_to_string(records)).map_err(|source| CeifError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Contextual provider serving `sent`, `cat`, `add` and `layer:<n>`.
pub struct ContextualProvider<'a, T> {
    bundle: &'a DatasetBundle,
    records: &'a HashMap<SentenceKey, CeifRecord<T>>,
}

impl<'a, T: Scalar> ContextualProvider<'a, T> {
    pub fn new(bundle: &'a DatasetBundle, records: &'a HashMap<SentenceKey, CeifRecord<T>>) -> Self {
        Self { bundle, records }
    }

    fn record(&self, r: &SentenceRef) -> Option<&'a CeifRecord<T>> {
        let res = self.bundle.resolve(r)?;
        self.records.get(&res.key())
    }
}

impl<T: Scalar> VectorProvider for ContextualProvider<'_, T> {
    type Scalar = T;

    fn describe(&self) -> String {
        let mut models: Vec<&str> = self.records.values().map(|r| r.model_id.as_str()).collect();
        models.sort_unstable();
        models.dedup();
        format!("contextual({})", models.join(","))
    }

    fn supports(&self, strategy: &Strategy) -> bool {
        matches!(strategy, Strategy::Sent | Strategy::Cat | Strategy::Add | Strategy::Layer(_))
    }

    fn resolves(&self, r: &SentenceRef, _: &Strategy) -> bool {
        self.record(r).is_some()
    }

    fn vector(&self, r: &SentenceRef, strategy: &Strategy) -> Result<Vec<T>, ProviderError> {
        let res = self
            .bundle
            .resolve(r)
            .ok_or_else(|| ProviderError::Unresolved(r.to_string()))?;
        let key = res.key();
        let rec = self
            .records
            .get(&key)
            .ok_or_else(|| ProviderError::Unresolved(key.to_string()))?;
        let spans = &res.sentence.target;
        let out = match *strategy {
            Strategy::Sent => sentence_vector_ctx(rec, LAST_N),
            Strategy::Cat => target_vector(rec, spans, ContextStrategy::Cat { last_n: LAST_N }),
            Strategy::Add => target_vector(rec, spans, ContextStrategy::Add { last_n: LAST_N }),
            Strategy::Layer(layer) => target_vector(rec, spans, ContextStrategy::Lay { layer }),
            other => return Err(ProviderError::Unsupported(other.to_string())),
        };
        out.map_err(|e| ProviderError::Vector(e.to_string()))
    }
}

impl<T: Scalar> LayeredProvider for ContextualProvider<'_, T> {
    fn num_layers(&self) -> Result<usize, ProviderError> {
        let mut counts: Vec<usize> = self.records.values().map(|r| r.num_layers).collect();
        counts.sort_unstable();
        counts.dedup();
        match counts.as_slice() {
            [n] => Ok(*n),
            [] => Err(ProviderError::Layers("no contextual records loaded".into())),
            many => Err(ProviderError::Layers(format!(
                "records disagree on layer count: {many:?}"
            ))),
        }
    }
}
