//! The homonymy/synonymy resource: in-memory model, file format,
//! validation, statistics and pair export.
//!
//! A dataset file is a single JSON object per language:
//!
//! ```json
//! { "schema": "homosem-dataset/1", "language": "en",
//!   "homonyms": [ { "lemma": "coach", "ambiguity_level": "absolute",
//!     "senses": [ { "sense_id": "coach-1", "gloss": "bus",
//!       "sentences": { "1": { "sentence_id": 1, "text": "...",
//!         "target": [ { "start": 31, "end": 36, "form": "coach" } ],
//!         "role": "target_form", "pos": "NOUN", "context_id": "c1" } } } ] } ] }
//! ```

mod convert;
mod model;
mod pairs;
mod validate;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use convert::{import_marked_tsv, parse_marked_text};
pub use model::{
    AmbiguityLevel, DatasetBundle, FormMatch, HomonymEntry, LanguageCode, Resolved, Role,
    SenseEntry, SentenceKey, SentenceRecord, SentenceRef, TargetSpan,
};
pub use pairs::{dataset_stats, export_pairs, pairs_to_tsv, LabeledPair, StatsRow};
pub use validate::{validate_dataset, Finding, Severity, ValidationReport};

pub const SCHEMA_VERSION: &str = "homosem-dataset/1";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: malformed dataset: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: unsupported schema {found:?} (expected {SCHEMA_VERSION:?})")]
    Schema { path: PathBuf, found: String },
    #[error("dataset failed validation with {} error(s):\n{report}", report.error_count())]
    Validation { report: ValidationReport },
    #[error("line {line}: {message}")]
    Import { line: usize, message: String },
}

#[derive(Serialize)]
struct DatasetFileOut<'a> {
    schema: &'a str,
    language: &'a LanguageCode,
    homonyms: &'a [HomonymEntry],
}

#[derive(Deserialize)]
struct DatasetFileIn {
    schema: String,
    language: LanguageCode,
    homonyms: Vec<HomonymEntry>,
}

/// Parses dataset JSON from a string; `origin` is used in error messages.
pub fn parse_dataset(text: &str, origin: &Path) -> Result<DatasetBundle, DatasetError> {
    let file: DatasetFileIn = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.schema != SCHEMA_VERSION {
        return Err(DatasetError::Schema {
            path: origin.to_path_buf(),
            found: file.schema,
        });
    }
    let bundle = DatasetBundle::new(file.language, file.homonyms);
    let report = validate_dataset(&bundle);
    if report.error_count() > 0 {
        return Err(DatasetError::Validation { report });
    }
    for w in report.warnings() {
        log::debug!("{w}");
    }
    Ok(bundle)
}

/// Loads and validates a dataset file. Warnings are logged, errors fail.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetBundle, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, path)
}

pub fn dataset_to_json(bundle: &DatasetBundle) -> String {
    let out = DatasetFileOut {
        schema: SCHEMA_VERSION,
        language: &bundle.language,
        homonyms: &bundle.homonyms,
    };
    // Serializing plain data with string keys cannot fail.
    serde_json::to_string_pretty(&out).expect("dataset serializes") + "\n"
}

pub fn write_dataset(bundle: &DatasetBundle, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    fs::write(path, dataset_to_json(bundle)).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}
