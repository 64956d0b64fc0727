//! Corpus construction: decomposing explorer records into source files,
//! near-duplicate elimination over lexical token sets, and `require` mining.

mod dedup;
mod fetch;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ast::{Ast, ParseError, RequireSite};
use crate::lexer;

pub use dedup::{deduplicate, jaccard, DedupOutcome, TokenSet};
pub use fetch::{fetch_verified_source, ApiConfig, FetchError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Language {
    Solidity,
    Vyper,
    Other,
}

/// One verified contract as returned by a block explorer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawContractRecord {
    pub address: String,
    pub contract_name: String,
    pub language: Language,
    /// Either flattened Solidity text or a compiler standard-JSON input
    /// (possibly wrapped in an extra pair of braces, as explorers serve it).
    pub source_payload: String,
    pub compiler_version: String,
    pub license: String,
    pub optimization: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abi: Option<String>,
}

/// A single source unit. Serializes to exactly the corpus line format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolidityFile {
    pub id: String,
    pub path: String,
    pub content: String,
    pub origin_address: String,
    pub compiler_version: String,
    pub license: String,
}

impl SolidityFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        Self {
            id: content_id(&content),
            path: path.into(),
            content,
            origin_address: String::new(),
            compiler_version: String::new(),
            license: String::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records_in: usize,
    pub files_decomposed: usize,
    pub files_unique: usize,
    pub requires_mined: usize,
    pub duplicate_ratio: f64,
}

impl CorpusStats {
    pub(crate) fn with_counts(files_decomposed: usize, files_unique: usize) -> Self {
        let duplicate_ratio = if files_decomposed == 0 {
            0.0
        } else {
            1.0 - files_unique as f64 / files_decomposed as f64
        };
        Self {
            files_decomposed,
            files_unique,
            duplicate_ratio,
            ..Self::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("record {address}: payload is neither a source map nor Solidity text")]
    MalformedPayload { address: String },
    #[error("record {address}: unsupported language {language:?}")]
    UnsupportedLanguage { address: String, language: Language },
    #[error("record {address}: invalid address")]
    InvalidAddress { address: String },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },
}

/// Hex SHA-256 of the file content.
pub fn content_id(content: &str) -> String {
    hex::encode(Sha256::digest(content.as_bytes()))
}

pub fn is_valid_address(address: &str) -> bool {
    address.len() == 42
        && (address.starts_with("0x") || address.starts_with("0X"))
        && address[2..].bytes().all(|b| b.is_ascii_hexdigit())
}

/// Splits a record into its source files, in path order for multi-file payloads.
pub fn decompose(record: &RawContractRecord) -> Result<Vec<SolidityFile>, CorpusError> {
    if record.language != Language::Solidity {
        return Err(CorpusError::UnsupportedLanguage {
            address: record.address.clone(),
            language: record.language,
        });
    }
    if !is_valid_address(&record.address) {
        return Err(CorpusError::InvalidAddress {
            address: record.address.clone(),
        });
    }
    let malformed = || CorpusError::MalformedPayload {
        address: record.address.clone(),
    };
    let payload = record.source_payload.trim();
    if payload.is_empty() {
        return Err(malformed());
    }
    let entries = if payload.starts_with('{') {
        parse_source_map(payload).ok_or_else(malformed)?
    } else if looks_like_solidity(payload) {
        vec![(format!("{}.sol", record.contract_name), record.source_payload.clone())]
    } else {
        return Err(malformed());
    };
    Ok(entries
        .into_iter()
        .map(|(path, content)| SolidityFile {
            id: content_id(&content),
            path,
            content,
            origin_address: record.address.clone(),
            compiler_version: record.compiler_version.clone(),
            license: record.license.clone(),
        })
        .collect())
}

fn parse_source_map(payload: &str) -> Option<Vec<(String, String)>> {
    let value: serde_json::Value = serde_json::from_str(payload).ok().or_else(|| {
        let inner = payload.strip_prefix('{')?.strip_suffix('}')?;
        serde_json::from_str(inner).ok()
    })?;
    let obj = value.as_object()?;
    let sources = match obj.get("sources").and_then(|s| s.as_object()) {
        Some(s) if obj.contains_key("language") || obj.contains_key("settings") || obj.len() == 1 => s,
        _ => obj,
    };
    let mut out = BTreeMap::new();
    for (path, entry) in sources {
        let content = match entry {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Object(o) => o.get("content")?.as_str()?.to_string(),
            _ => return None,
        };
        if content.is_empty() {
            return None;
        }
        out.insert(path.clone(), content);
    }
    if out.is_empty() {
        return None;
    }
    Some(out.into_iter().collect())
}

fn looks_like_solidity(text: &str) -> bool {
    let tokens = lexer::tokenize_lossy(text);
    let mut saw_unit = false;
    let mut depth = 0i64;
    for t in &tokens {
        match t.text(text) {
            "contract" | "library" | "interface" => saw_unit = true,
            "{" => depth += 1,
            "}" => depth -= 1,
            _ => {}
        }
        if t.kind == lexer::TokenKind::Pragma {
            saw_unit = true;
        }
        if depth < 0 {
            return false;
        }
    }
    saw_unit && depth == 0
}

/// Every `require` call in the file, attributed to its enclosing function or
/// modifier and ordered by offset.
pub fn mine_requires(file: &SolidityFile) -> Result<Vec<RequireSite>, CorpusError> {
    let ast = Ast::parse(file.content.as_str()).map_err(|source| CorpusError::Parse {
        path: file.path.clone(),
        source,
    })?;
    Ok(ast.require_sites(&file.id))
}

/// Output of [`build`]: unique files, sites mined from them, parse failures
/// (file path and message) and the aggregate statistics.
#[derive(Debug, Clone)]
pub struct BuiltCorpus {
    pub files: Vec<SolidityFile>,
    pub sites: Vec<RequireSite>,
    pub rejected: Vec<(String, String)>,
    pub stats: CorpusStats,
}

/// Decompose, deduplicate and mine a batch of records. Malformed records are
/// reported in `rejected` and do not stop the run.
pub fn build(records: &[RawContractRecord], threshold: f64) -> BuiltCorpus {
    let decomposed: Vec<_> = records.par_iter().map(decompose).collect();
    let mut files = Vec::new();
    let mut rejected = Vec::new();
    for (record, result) in records.iter().zip(decomposed) {
        match result {
            Ok(fs) => files.extend(fs),
            Err(e) => rejected.push((record.address.clone(), e.to_string())),
        }
    }
    let DedupOutcome { files, mut stats } = deduplicate(files, threshold);
    let mined: Vec<_> = files.par_iter().map(mine_requires).collect();
    let mut sites = Vec::new();
    for (file, result) in files.iter().zip(mined) {
        match result {
            Ok(s) => sites.extend(s),
            Err(e) => rejected.push((file.path.clone(), e.to_string())),
        }
    }
    stats.records_in = records.len();
    stats.requires_mined = sites.len();
    BuiltCorpus {
        files,
        sites,
        rejected,
        stats,
    }
}
