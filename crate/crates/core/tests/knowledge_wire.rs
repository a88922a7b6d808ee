use std::time::Duration;

use kbvqa::knowledge::mock::{MockEndpoint, MockReply};
use kbvqa::knowledge::*;

fn fast_policy() -> FetchPolicy {
    FetchPolicy { max_retries: 3, backoff: Duration::from_millis(1), timeout: Duration::from_secs(5), concurrency: 4 }
}

const DOG: &str = "The domestic dog is a member of the genus Canis.";

#[test]
fn success_then_served_from_cache() {
    let mock = MockEndpoint::with_comments([("Dog", DOG)]).unwrap();
    let cache = KbCache::in_memory();
    let client = KbClient::new(mock.url(), fast_policy()).unwrap();
    let q = build_comment_query("dog").unwrap();

    let first = client.fetch(&q, &cache).unwrap();
    assert_eq!(first.passage.comment, DOG);
    assert!(!first.passage.not_found && !first.from_cache);
    assert_eq!(first.passage.source, mock.url());
    assert!(chrono::DateTime::parse_from_rfc3339(&first.passage.fetched_at).is_ok());
    assert_eq!(mock.requests(), 1);

    let req = mock.last_request().unwrap();
    assert_eq!(req.method, "GET");
    assert_eq!(req.query.as_deref(), Some(q.text.as_str()));
    assert_eq!(req.accept.as_deref(), Some(SPARQL_JSON));

    mock.reset_requests();
    let second = client.fetch(&q, &cache).unwrap();
    assert!(second.from_cache);
    assert_eq!(second.passage.comment, DOG);
    assert_eq!(mock.requests(), 0);
}

#[test]
fn not_found_is_cached() {
    let mock = MockEndpoint::start().unwrap();
    let cache = KbCache::in_memory();
    let q = build_comment_query("zebra crossing").unwrap();
    let out = fetch_comment(mock.url(), &q, &cache, &fast_policy()).unwrap();
    assert!(out.passage.not_found);
    assert!(out.passage.comment.is_empty());
    mock.reset_requests();
    let again = fetch_comment(mock.url(), &q, &cache, &fast_policy()).unwrap();
    assert!(again.from_cache && again.passage.not_found);
    assert_eq!(mock.requests(), 0);
}

#[test]
fn server_errors_are_retried() {
    let mock = MockEndpoint::with_comments([("Dog", DOG)]).unwrap();
    mock.push_reply(MockReply::Status(500));
    mock.push_reply(MockReply::Status(500));
    let cache = KbCache::in_memory();
    let out = fetch_comment(mock.url(), &build_comment_query("dog").unwrap(), &cache, &fast_policy()).unwrap();
    assert_eq!(out.retries, 2);
    assert_eq!(out.passage.comment, DOG);
    assert_eq!(mock.requests(), 3);
}

#[test]
fn retries_are_bounded() {
    let mock = MockEndpoint::start().unwrap();
    for _ in 0..5 {
        mock.push_reply(MockReply::Status(503));
    }
    let policy = FetchPolicy { max_retries: 2, ..fast_policy() };
    let cache = KbCache::in_memory();
    let err = fetch_comment(mock.url(), &build_comment_query("dog").unwrap(), &cache, &policy).unwrap_err();
    assert!(matches!(err, KbError::Status(503)));
    assert_eq!(mock.requests(), 3);
    assert!(cache.is_empty());
}

#[test]
fn client_errors_are_not_retried() {
    let mock = MockEndpoint::start().unwrap();
    mock.push_reply(MockReply::Status(404));
    let cache = KbCache::in_memory();
    let err = fetch_comment(mock.url(), &build_comment_query("dog").unwrap(), &cache, &fast_policy()).unwrap_err();
    assert!(matches!(err, KbError::Status(404)));
    assert_eq!(mock.requests(), 1);
}

#[test]
fn malformed_body_is_a_distinct_error() {
    let mock = MockEndpoint::start().unwrap();
    mock.push_reply(MockReply::Body("<html>oops</html>".into()));
    let cache = KbCache::in_memory();
    let err = fetch_comment(mock.url(), &build_comment_query("dog").unwrap(), &cache, &fast_policy()).unwrap_err();
    assert!(matches!(err, KbError::Malformed(_)), "{err}");
    assert_eq!(mock.requests(), 1);
    assert!(cache.is_empty());
}

#[test]
fn unreachable_endpoint_is_a_network_error() {
    // bind then drop to get a port nobody listens on
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let policy = FetchPolicy { max_retries: 1, ..fast_policy() };
    let err = fetch_comment(
        &format!("http://127.0.0.1:{port}/sparql"),
        &build_comment_query("dog").unwrap(),
        &KbCache::in_memory(),
        &policy,
    )
    .unwrap_err();
    assert!(matches!(err, KbError::Network(_)), "{err}");
}

#[test]
fn concurrent_fetches_keep_input_order_and_warm_rerun_is_silent() {
    let mock = MockEndpoint::with_comments([
        ("Dog", "Dogs bark."),
        ("Grass", "Grass is green."),
        ("Frisbee", "A flying disc."),
        ("Park", "A public garden."),
    ])
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kb.jsonl");
    let terms: Vec<String> = ["dog", "grass", "frisbee", "park", "unicorn"].map(String::from).to_vec();
    {
        let cache = KbCache::open(&path).unwrap();
        let client = KbClient::new(mock.url(), fast_policy()).unwrap();
        let out = fetch_many(&client, &terms, &cache);
        let comments: Vec<String> = out.into_iter().map(|r| r.unwrap().passage.comment).collect();
        assert_eq!(comments, ["Dogs bark.", "Grass is green.", "A flying disc.", "A public garden.", ""]);
        assert_eq!(mock.requests(), 5);
    }
    mock.reset_requests();
    let cache = KbCache::open(&path).unwrap();
    let client = KbClient::new(mock.url(), fast_policy()).unwrap();
    let out = fetch_many(&client, &terms, &cache);
    assert!(out.iter().all(|r| r.as_ref().unwrap().from_cache));
    assert_eq!(mock.requests(), 0);
    let para = assemble_paragraph(&out.into_iter().map(|r| r.unwrap().passage).collect::<Vec<_>>()).unwrap();
    assert_eq!(para.text, "Dogs bark. Grass is green. A flying disc. A public garden.");
}

#[test]
fn invalid_term_never_reaches_the_network() {
    let mock = MockEndpoint::start().unwrap();
    let client = KbClient::new(mock.url(), fast_policy()).unwrap();
    let out = fetch_many(&client, &["Dog!".to_string()], &KbCache::in_memory());
    assert!(matches!(out[0], Err(KbError::InvalidTerm { .. })));
    assert_eq!(mock.requests(), 0);
}
