//! Core data model: token sequences, query features, ranked-and-critiqued
//! response sets, JSONL ingestion, and a byte-level tokenizer.
//!
//! The on-disk format is JSON Lines, one annotated query per line:
//!
//! ```text
//! {"id": "q1", "category": "Short", "features": [0.1, -0.2],
//!  "responses": [{"model": "a", "tokens": [3, 1], "rank": 1,
//!                 "scores": {"helpfulness": 4.0, "faithfulness": 3.5, "ethics": 5.0},
//!                 "critique": [7, 2]}]}
//! ```
//!
//! Ranks are 1-based and smaller means preferred; equal ranks are ties.
//! Per-dimension scores travel with the data as annotation metadata — the
//! training margins come from reward-model scores, not from these fields.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of ids in the byte-level vocabulary: 256 byte values plus one
/// end-of-sequence id.
pub const BYTE_VOCAB_SIZE: usize = 257;

/// End-of-sequence id under the byte-level vocabulary (the reserved last id).
pub const BYTE_EOS: u32 = 256;

/// Errors raised by ingestion, validation, and the byte codec.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    /// Structural inconsistency: feature dimension or vocabulary disagree
    /// across items.
    #[error("line {line}: schema violation: {reason}")]
    Schema { line: usize, reason: String },
    /// Semantic rule violation on an otherwise well-formed line.
    #[error("line {line}: invalid data: {reason}")]
    Validation { line: usize, reason: String },
    #[error("token id {id} is not a byte value and not the end-of-sequence id")]
    NonByteToken { id: u32 },
    #[error("decoded bytes are not valid UTF-8: {source}")]
    InvalidUtf8 {
        #[source]
        source: std::string::FromUtf8Error,
    },
}

/// An immutable sequence of token ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<u32>);

impl TokenSeq {
    pub fn new(tokens: Vec<u32>) -> Self {
        TokenSeq(tokens)
    }

    pub fn empty() -> Self {
        TokenSeq(Vec::new())
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &u32> {
        self.0.iter()
    }

    /// Largest id present, or `None` for the empty sequence.
    pub fn max_id(&self) -> Option<u32> {
        self.0.iter().copied().max()
    }
}

impl From<Vec<u32>> for TokenSeq {
    fn from(tokens: Vec<u32>) -> Self {
        TokenSeq(tokens)
    }
}

impl From<&[u32]> for TokenSeq {
    fn from(tokens: &[u32]) -> Self {
        TokenSeq(tokens.to_vec())
    }
}

/// Task category of a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Long,
    Short,
    #[serde(rename = "MCQ")]
    Mcq,
    Safety,
    Video,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Long,
        Category::Short,
        Category::Mcq,
        Category::Safety,
        Category::Video,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Long => "Long",
            Category::Short => "Short",
            Category::Mcq => "MCQ",
            Category::Safety => "Safety",
            Category::Video => "Video",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Long" => Ok(Category::Long),
            "Short" => Ok(Category::Short),
            "MCQ" => Ok(Category::Mcq),
            "Safety" => Ok(Category::Safety),
            "Video" => Ok(Category::Video),
            other => Err(format!(
                "unknown category {other:?}; expected one of Long, Short, MCQ, Safety, Video"
            )),
        }
    }
}

/// A query's identity, dense feature vector, and category — everything the
/// models condition on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryFeatures {
    pub id: String,
    pub category: Category,
    pub features: Vec<f64>,
}

/// Per-dimension annotation scores attached to a response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimScores {
    pub helpfulness: f64,
    pub faithfulness: f64,
    pub ethics: f64,
}

/// One model response to a query: tokens, human rank, per-dimension scores,
/// and a ground-truth critique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedResponse {
    #[serde(rename = "model")]
    pub model_name: String,
    pub tokens: TokenSeq,
    /// 1-based; smaller is preferred; equal ranks tie.
    pub rank: u32,
    #[serde(rename = "scores")]
    pub dim_scores: DimScores,
    pub critique: TokenSeq,
}

/// A query together with all of its ranked, critiqued responses — one JSONL
/// line of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResponseSet {
    pub id: String,
    pub category: Category,
    pub features: Vec<f64>,
    pub responses: Vec<AnnotatedResponse>,
}

impl RankedResponseSet {
    /// The query view of this item (id, category, features).
    pub fn query(&self) -> QueryFeatures {
        QueryFeatures {
            id: self.id.clone(),
            category: self.category,
            features: self.features.clone(),
        }
    }
}

/// A validated collection of items with consistent feature dimension and
/// vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    items: Vec<RankedResponseSet>,
    vocab_size: usize,
    feature_dim: usize,
}

impl Dataset {
    /// Builds a dataset with an explicitly declared vocabulary size,
    /// validating every item (consistent feature dimension, ranks ≥ 1,
    /// token ids within the vocabulary, unique item ids).
    pub fn from_items(items: Vec<RankedResponseSet>, vocab_size: usize) -> Result<Self, DataError> {
        Self::build(items, Some(vocab_size))
    }

    /// Builds a dataset deriving the vocabulary as `max token id + 1` over
    /// all responses and critiques (minimum 1). Note the derived vocabulary
    /// may not reserve a distinct end-of-sequence id; pass an explicit size
    /// via [`Dataset::from_items`] when generation matters.
    pub fn infer_from_items(items: Vec<RankedResponseSet>) -> Result<Self, DataError> {
        Self::build(items, None)
    }

    fn build(items: Vec<RankedResponseSet>, declared_vocab: Option<usize>) -> Result<Self, DataError> {
        let mut feature_dim: Option<usize> = None;
        let mut max_id: u32 = 0;
        let mut seen_ids: HashSet<&str> = HashSet::new();
        for (index, item) in items.iter().enumerate() {
            let line = index + 1;
            match feature_dim {
                None => feature_dim = Some(item.features.len()),
                Some(d) if d != item.features.len() => {
                    return Err(DataError::Schema {
                        line,
                        reason: format!(
                            "feature dimension {} differs from the file's dimension {}",
                            item.features.len(),
                            d
                        ),
                    });
                }
                _ => {}
            }
            if !seen_ids.insert(item.id.as_str()) {
                return Err(DataError::Validation {
                    line,
                    reason: format!("duplicate item id {:?}", item.id),
                });
            }
            if item.features.iter().any(|f| !f.is_finite()) {
                return Err(DataError::Validation {
                    line,
                    reason: "non-finite feature value".to_string(),
                });
            }
            for (ri, resp) in item.responses.iter().enumerate() {
                if resp.rank < 1 {
                    return Err(DataError::Validation {
                        line,
                        reason: format!("response {ri} has rank 0; ranks are 1-based"),
                    });
                }
                for seq in [&resp.tokens, &resp.critique] {
                    if let Some(id) = seq.max_id() {
                        max_id = max_id.max(id);
                        if let Some(v) = declared_vocab {
                            if id as usize >= v {
                                return Err(DataError::Schema {
                                    line,
                                    reason: format!(
                                        "token id {id} outside declared vocabulary of size {v}"
                                    ),
                                });
                            }
                        }
                    }
                }
            }
        }
        let vocab_size = declared_vocab.unwrap_or_else(|| (max_id as usize + 1).max(1));
        Ok(Dataset {
            items,
            vocab_size,
            feature_dim: feature_dim.unwrap_or(0),
        })
    }

    /// Loads a JSONL file, deriving the vocabulary from the data.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Self::load_impl(path.as_ref(), None)
    }

    /// Loads a JSONL file, validating token ids against a declared vocabulary.
    pub fn load_with_vocab(path: impl AsRef<Path>, vocab_size: usize) -> Result<Self, DataError> {
        Self::load_impl(path.as_ref(), Some(vocab_size))
    }

    fn load_impl(path: &Path, declared_vocab: Option<usize>) -> Result<Self, DataError> {
        let file = fs::File::open(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let reader = BufReader::new(file);
        let mut items = Vec::new();
        let mut line_numbers = Vec::new();
        for (zero_based, line) in reader.lines().enumerate() {
            let line_no = zero_based + 1;
            let text = line.map_err(|source| DataError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if text.trim().is_empty() {
                continue;
            }
            let item: RankedResponseSet = serde_json::from_str(&text)
                .map_err(|source| DataError::Parse { line: line_no, source })?;
            items.push(item);
            line_numbers.push(line_no);
        }
        // Re-map validation errors from item index to file line number.
        Self::build(items, declared_vocab).map_err(|err| match err {
            DataError::Schema { line, reason } => DataError::Schema {
                line: line_numbers.get(line - 1).copied().unwrap_or(line),
                reason,
            },
            DataError::Validation { line, reason } => DataError::Validation {
                line: line_numbers.get(line - 1).copied().unwrap_or(line),
                reason,
            },
            other => other,
        })
    }

    /// Serializes to canonical JSONL: one compact JSON object per line, in
    /// item order. Loading the result reproduces this dataset exactly.
    pub fn to_jsonl_string(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("dataset items serialize"));
            out.push('\n');
        }
        out
    }

    /// Writes canonical JSONL atomically (temp file + rename).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        write_atomic(path.as_ref(), &self.to_jsonl_string())
    }

    pub fn items(&self) -> &[RankedResponseSet] {
        &self.items
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Writes `contents` to `path` atomically: the data lands in a temporary
/// file in the same directory which is then renamed over the target, so a
/// crash never leaves a half-written artifact.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = match parent {
        Some(dir) => dir.join(format!(".{file_name}.tmp")),
        None => PathBuf::from(format!(".{file_name}.tmp")),
    };
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

/// Encodes a string as its UTF-8 bytes, one token id per byte. No
/// end-of-sequence id is appended.
pub fn tokenize_bytes(text: &str) -> TokenSeq {
    TokenSeq(text.bytes().map(u32::from).collect())
}

/// Decodes byte-level token ids back to a string. Decoding stops at the
/// first [`BYTE_EOS`]; any other id above 255 is an error, as is a byte
/// sequence that is not valid UTF-8.
pub fn detokenize_bytes(seq: &TokenSeq) -> Result<String, DataError> {
    let mut bytes = Vec::with_capacity(seq.len());
    for &id in seq.iter() {
        if id == BYTE_EOS {
            break;
        }
        if id > 255 {
            return Err(DataError::NonByteToken { id });
        }
        bytes.push(id as u8);
    }
    String::from_utf8(bytes).map_err(|source| DataError::InvalidUtf8 { source })
}
