//! Minimal CoNLL-U reader for externally produced dependency parses.
//!
//! Multiword-token ranges (`1-2`) and empty nodes (`1.1`) are skipped; only
//! syntactic words are kept. Blocks are matched to dataset sentences by the
//! comment line `# sent_id = <lemma>/<sense_id>/<sentence_id>`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::dataset::SentenceKey;

#[derive(Debug, thiserror::Error)]
pub enum ConlluError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("sentence {sent_id}: {message}")]
    Invalid { sent_id: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseToken {
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// 1-based head index; 0 is the root.
    pub head: usize,
    pub deprel: String,
}

impl ParseToken {
    /// Relation without its language-specific subtype (`obl:tmod` → `obl`).
    pub fn base_deprel(&self) -> &str {
        self.deprel.split(':').next().unwrap_or(&self.deprel)
    }
}

/// One dependency-parsed sentence. Token indices used by the API are
/// 0-based positions into `tokens`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyParse {
    pub sent_id: Option<String>,
    pub text: Option<String>,
    pub tokens: Vec<ParseToken>,
}

impl DependencyParse {
    /// Checks the tree shape: at least one token, heads in range, one root.
    pub fn validate(&self) -> Result<(), String> {
        if self.tokens.is_empty() {
            return Err("no tokens".into());
        }
        let n = self.tokens.len();
        let mut roots = 0;
        for (i, t) in self.tokens.iter().enumerate() {
            if t.head > n {
                return Err(format!("token {} has head {} beyond {n}", i + 1, t.head));
            }
            if t.head == i + 1 {
                return Err(format!("token {} is its own head", i + 1));
            }
            if t.head == 0 {
                roots += 1;
            }
        }
        if roots != 1 {
            return Err(format!("expected exactly one root, found {roots}"));
        }
        Ok(())
    }

    /// 0-based index of the head of token `i`, or `None` for the root.
    pub fn head_of(&self, i: usize) -> Option<usize> {
        match self.tokens.get(i)?.head {
            0 => None,
            h => Some(h - 1),
        }
    }

    /// 0-based indices of the dependents of token `i`, ascending.
    pub fn dependents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.tokens
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.head == i + 1)
            .map(|(j, _)| j)
    }

    /// Character offsets of each token inside `text`, found by left-to-right
    /// search. Tokens that cannot be located get `None`.
    pub fn char_offsets(&self, text: &str) -> Vec<Option<(usize, usize)>> {
        let chars: Vec<char> = text.chars().collect();
        let mut cursor = 0usize;
        self.tokens
            .iter()
            .map(|t| {
                let form: Vec<char> = t.form.chars().collect();
                if form.is_empty() {
                    return None;
                }
                let found = (cursor..=chars.len().saturating_sub(form.len()))
                    .find(|&s| chars[s..s + form.len()] == form[..]);
                found.map(|s| {
                    cursor = s + form.len();
                    (s, s + form.len())
                })
            })
            .collect()
    }
}

/// Parses every sentence block in `input`.
pub fn parse_conllu(input: &str) -> Result<Vec<DependencyParse>, ConlluError> {
    let mut out = Vec::new();
    let mut cur = DependencyParse {
        sent_id: None,
        text: None,
        tokens: Vec::new(),
    };
    let mut started = false;
    let finish = |cur: &mut DependencyParse, out: &mut Vec<DependencyParse>| -> Result<(), ConlluError> {
        let block = std::mem::replace(
            cur,
            DependencyParse {
                sent_id: None,
                text: None,
                tokens: Vec::new(),
            },
        );
        block.validate().map_err(|message| ConlluError::Invalid {
            sent_id: block.sent_id.clone().unwrap_or_else(|| format!("#{}", out.len() + 1)),
            message,
        })?;
        out.push(block);
        Ok(())
    };
    for (i, raw) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if started {
                finish(&mut cur, &mut out)?;
                started = false;
            }
            continue;
        }
        started = true;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                match k.trim() {
                    "sent_id" => cur.sent_id = Some(v.trim().to_string()),
                    "text" => cur.text = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(ConlluError::Syntax {
                line: line_no,
                message: format!("expected 10 columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| ConlluError::Syntax {
            line: line_no,
            message: format!("bad token id {:?}", cols[0]),
        })?;
        if id != cur.tokens.len() + 1 {
            return Err(ConlluError::Syntax {
                line: line_no,
                message: format!("token id {id} out of sequence"),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| ConlluError::Syntax {
            line: line_no,
            message: format!("bad head {:?}", cols[6]),
        })?;
        cur.tokens.push(ParseToken {
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
    }
    if started {
        finish(&mut cur, &mut out)?;
    }
    Ok(out)
}

/// Parses a CoNLL-U file and indexes its blocks by `sent_id` key.
pub fn load_parses(path: impl AsRef<Path>) -> Result<HashMap<SentenceKey, DependencyParse>, ConlluError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConlluError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    index_parses(parse_conllu(&text)?)
}

pub fn index_parses(
    parses: Vec<DependencyParse>,
) -> Result<HashMap<SentenceKey, DependencyParse>, ConlluError> {
    let mut map = HashMap::new();
    for p in parses {
        let id = p.sent_id.clone().ok_or_else(|| ConlluError::Invalid {
            sent_id: "?".into(),
            message: "block without sent_id comment".into(),
        })?;
        let key: SentenceKey = id.parse().map_err(|message| ConlluError::Invalid {
            sent_id: id.clone(),
            message,
        })?;
        if map.insert(key, p).is_some() {
            return Err(ConlluError::Invalid {
                sent_id: id,
                message: "duplicate sent_id".into(),
            });
        }
    }
    Ok(map)
}
