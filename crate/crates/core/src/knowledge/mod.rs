//! Knowledge-base retrieval: one SPARQL query per attribute term, comment
//! text fetched over HTTP with a persistent cache, and the passages joined
//! into a single paragraph.

mod cache;
mod client;
pub mod mock;
mod query;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

pub use cache::KbCache;
pub use client::{fetch_comment, fetch_many, parse_comment, FetchOutcome, FetchPolicy, KbClient, SPARQL_JSON};
pub use query::{build_comment_query, queried_resource, resource_name, SparqlQuery, RESOURCE_PREFIX};

pub const DEFAULT_ENDPOINT: &str = "https://dbpedia.org/sparql";
/// Overrides the configured endpoint when set.
pub const ENDPOINT_ENV: &str = "KBVQA_ENDPOINT";

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("invalid attribute term {term:?}: {reason}")]
    InvalidTerm { term: String, reason: String },
    #[error("invalid endpoint {endpoint:?}: {reason}")]
    InvalidEndpoint { endpoint: String, reason: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("endpoint returned HTTP {0}")]
    Status(u16),
    #[error("malformed SPARQL response: {0}")]
    Malformed(String),
    #[error("knowledge cache {path:?}: {msg}")]
    Cache { path: PathBuf, msg: String },
}

impl KbError {
    /// Worth retrying: connection problems and server-side errors.
    pub fn is_transient(&self) -> bool {
        match self {
            KbError::Network(_) => true,
            KbError::Status(code) => *code >= 500,
            _ => false,
        }
    }

    /// Caused by bad input rather than I/O.
    pub fn is_validation(&self) -> bool {
        matches!(self, KbError::InvalidTerm { .. } | KbError::InvalidEndpoint { .. })
    }
}

/// `ENDPOINT_ENV` if set and nonempty, else `configured`.
pub fn resolve_endpoint(configured: &str) -> String {
    match std::env::var(ENDPOINT_ENV) {
        Ok(e) if !e.trim().is_empty() => e,
        _ => configured.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgePassage {
    pub term: String,
    /// Empty exactly when `not_found`.
    pub comment: String,
    pub not_found: bool,
    /// Endpoint URL, or `"cache"`.
    pub source: String,
    /// RFC 3339.
    pub fetched_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeParagraph {
    pub text: String,
    pub term_order: Vec<String>,
    /// Every passage was empty; callers substitute a zero knowledge vector.
    pub empty: bool,
}

/// Joins nonempty comments with single spaces, in the given (rank) order.
pub fn assemble_paragraph(passages: &[KnowledgePassage]) -> Result<KnowledgeParagraph> {
    ensure!(!passages.is_empty(), "assemble_paragraph needs at least one passage");
    let text = passages
        .iter()
        .map(|p| p.comment.as_str())
        .filter(|c| !c.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(KnowledgeParagraph {
        empty: text.is_empty(),
        text,
        term_order: passages.iter().map(|p| p.term.clone()).collect(),
    })
}
