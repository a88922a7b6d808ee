use std::io::Read;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{build_comment_query, KbCache, KbError, KnowledgePassage, SparqlQuery};

pub const SPARQL_JSON: &str = "application/sparql-results+json";
/// Response bodies larger than this are rejected as malformed.
const MAX_BODY: u64 = 8 << 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchPolicy {
    pub max_retries: u32,
    /// Delay before the first retry; doubled for every later one.
    #[serde(with = "millis")]
    pub backoff: Duration,
    #[serde(with = "millis")]
    pub timeout: Duration,
    pub concurrency: usize,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(10),
            concurrency: 4,
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchOutcome {
    pub passage: KnowledgePassage,
    /// Attempts beyond the first.
    pub retries: u32,
    pub from_cache: bool,
}

/// Blocking SPARQL client for one endpoint.
#[derive(Debug)]
pub struct KbClient {
    endpoint: String,
    agent: ureq::Agent,
    policy: FetchPolicy,
}

impl KbClient {
    pub fn new(endpoint: &str, policy: FetchPolicy) -> Result<Self, KbError> {
        let url = url::Url::parse(endpoint)
            .map_err(|e| KbError::InvalidEndpoint { endpoint: endpoint.into(), reason: e.to_string() })?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(KbError::InvalidEndpoint {
                endpoint: endpoint.into(),
                reason: format!("unsupported scheme `{}`", url.scheme()),
            });
        }
        let agent = ureq::AgentBuilder::new().timeout(policy.timeout).build();
        Ok(Self { endpoint: endpoint.into(), agent, policy })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    /// Serves from `cache` when possible; otherwise queries the endpoint,
    /// retrying network failures and 5xx responses, and caches the result
    /// (including NotFound).
    pub fn fetch(&self, query: &SparqlQuery, cache: &KbCache) -> Result<FetchOutcome, KbError> {
        if let Some(passage) = cache.get(&self.endpoint, &query.term) {
            return Ok(FetchOutcome { passage, retries: 0, from_cache: true });
        }
        let mut retries = 0;
        let comment = loop {
            match self.request(query) {
                Ok(c) => break c,
                Err(e) if e.is_transient() && retries < self.policy.max_retries => {
                    let delay = self.policy.backoff.saturating_mul(1 << retries.min(16));
                    log::warn!("{}: {e}; retrying in {delay:?}", query.term);
                    std::thread::sleep(delay);
                    retries += 1;
                }
                Err(e) => return Err(e),
            }
        };
        let passage = KnowledgePassage {
            term: query.term.clone(),
            not_found: comment.is_none(),
            comment: comment.unwrap_or_default(),
            source: self.endpoint.clone(),
            fetched_at: chrono::Utc::now().to_rfc3339(),
        };
        cache.put(&self.endpoint, &passage)?;
        Ok(FetchOutcome { passage, retries, from_cache: false })
    }

    /// One GET; `Ok(None)` when the result has no bindings.
    fn request(&self, query: &SparqlQuery) -> Result<Option<String>, KbError> {
        let response = self
            .agent
            .get(&self.endpoint)
            .query("query", &query.text)
            .set("Accept", SPARQL_JSON)
            .call();
        let response = match response {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) => return Err(KbError::Status(code)),
            Err(ureq::Error::Transport(t)) => return Err(KbError::Network(t.to_string())),
        };
        let mut body = String::new();
        response
            .into_reader()
            .take(MAX_BODY)
            .read_to_string(&mut body)
            .map_err(|e| KbError::Network(e.to_string()))?;
        parse_comment(&body)
    }
}

/// First `comment` binding of a SPARQL JSON results document.
pub fn parse_comment(body: &str) -> Result<Option<String>, KbError> {
    let doc: serde_json::Value =
        serde_json::from_str(body).map_err(|e| KbError::Malformed(format!("not JSON: {e}")))?;
    let bindings = doc
        .pointer("/results/bindings")
        .and_then(|b| b.as_array())
        .ok_or_else(|| KbError::Malformed("missing results.bindings array".into()))?;
    let Some(first) = bindings.first() else { return Ok(None) };
    first
        .pointer("/comment/value")
        .and_then(|v| v.as_str())
        .map(|s| Some(s.to_string()))
        .ok_or_else(|| KbError::Malformed("first binding has no comment value".into()))
}

/// Looks up every term, running up to `policy.concurrency` requests at a
/// time. Results come back in input order.
pub fn fetch_many(
    client: &KbClient,
    terms: &[String],
    cache: &KbCache,
) -> Vec<Result<FetchOutcome, KbError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<FetchOutcome, KbError>>>> =
        terms.iter().map(|_| Mutex::new(None)).collect();
    let workers = client.policy.concurrency.clamp(1, terms.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(term) = terms.get(i) else { break };
                let result = build_comment_query(term).and_then(|q| client.fetch(&q, cache));
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

/// Single lookup with a throwaway client.
pub fn fetch_comment(
    endpoint: &str,
    query: &SparqlQuery,
    cache: &KbCache,
    policy: &FetchPolicy,
) -> Result<FetchOutcome, KbError> {
    KbClient::new(endpoint, policy.clone())?.fetch(query, cache)
}
