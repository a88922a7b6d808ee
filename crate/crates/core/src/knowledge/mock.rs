//! In-process SPARQL endpoint for tests and offline runs.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use super::query::queried_resource;

/// A scripted response, served before falling back to the comment table.
#[derive(Debug, Clone)]
pub enum MockReply {
    Comment(String),
    NotFound,
    Status(u16),
    Body(String),
}

/// What the mock saw on its most recent request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub method: String,
    pub query: Option<String>,
    pub accept: Option<String>,
}

#[derive(Default)]
struct State {
    comments: HashMap<String, String>,
    script: VecDeque<MockReply>,
    last: Option<RecordedRequest>,
}

/// Answers GET requests carrying a `query` parameter. Resources named in
/// the comment table get one English binding; everything else gets zero.
pub struct MockEndpoint {
    url: String,
    server: Arc<tiny_http::Server>,
    state: Arc<Mutex<State>>,
    requests: Arc<AtomicUsize>,
    handle: Option<JoinHandle<()>>,
}

impl MockEndpoint {
    pub fn start() -> std::io::Result<Self> {
        let server = tiny_http::Server::http("127.0.0.1:0").map_err(std::io::Error::other)?;
        let port = server.server_addr().to_ip().expect("tcp listener").port();
        let server = Arc::new(server);
        let state = Arc::new(Mutex::new(State::default()));
        let requests = Arc::new(AtomicUsize::new(0));
        let handle = {
            let (server, state, requests) = (server.clone(), state.clone(), requests.clone());
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    requests.fetch_add(1, Ordering::SeqCst);
                    serve(request, &state);
                }
            })
        };
        Ok(Self {
            url: format!("http://127.0.0.1:{port}/sparql"),
            server,
            state,
            requests,
            handle: Some(handle),
        })
    }

    /// Mock preloaded with `(resource name, comment)` pairs.
    pub fn with_comments<'a>(comments: impl IntoIterator<Item = (&'a str, &'a str)>) -> std::io::Result<Self> {
        let mock = Self::start()?;
        for (r, c) in comments {
            mock.set_comment(r, c);
        }
        Ok(mock)
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn set_comment(&self, resource: &str, comment: &str) {
        self.state.lock().unwrap().comments.insert(resource.into(), comment.into());
    }

    pub fn push_reply(&self, reply: MockReply) {
        self.state.lock().unwrap().script.push_back(reply);
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn reset_requests(&self) {
        self.requests.store(0, Ordering::SeqCst);
    }

    pub fn last_request(&self) -> Option<RecordedRequest> {
        self.state.lock().unwrap().last.clone()
    }
}

impl Drop for MockEndpoint {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn results_json(comment: Option<&str>) -> String {
    let bindings = match comment {
        Some(c) => serde_json::json!([{ "comment": { "type": "literal", "xml:lang": "en", "value": c } }]),
        None => serde_json::json!([]),
    };
    serde_json::json!({ "head": { "vars": ["comment"] }, "results": { "bindings": bindings } }).to_string()
}

fn serve(request: tiny_http::Request, state: &Mutex<State>) {
    let query = url::Url::parse(&format!("http://mock{}", request.url()))
        .ok()
        .and_then(|u| u.query_pairs().find(|(k, _)| k == "query").map(|(_, v)| v.into_owned()));
    let accept = request
        .headers()
        .iter()
        .find(|h| h.field.equiv("Accept"))
        .map(|h| h.value.to_string());
    let (status, body) = {
        let mut st = state.lock().unwrap();
        st.last = Some(RecordedRequest { method: request.method().to_string(), query: query.clone(), accept });
        let reply = st.script.pop_front().unwrap_or_else(|| {
            match query.as_deref().and_then(queried_resource).and_then(|r| st.comments.get(r)) {
                Some(c) => MockReply::Comment(c.clone()),
                None if query.is_some() => MockReply::NotFound,
                None => MockReply::Status(400),
            }
        });
        match reply {
            MockReply::Comment(c) => (200, results_json(Some(&c))),
            MockReply::NotFound => (200, results_json(None)),
            MockReply::Status(code) => (code, format!("status {code}")),
            MockReply::Body(b) => (200, b),
        }
    };
    let header = tiny_http::Header::from_bytes("Content-Type", super::client::SPARQL_JSON).expect("valid header");
    let _ = request.respond(tiny_http::Response::from_string(body).with_status_code(status).with_header(header));
}
