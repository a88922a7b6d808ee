//! Fetches abstracts from a local SPARQL stand-in and shows the cache
//! absorbing the second pass.

use std::time::Duration;

use kbvqa::knowledge::mock::MockEndpoint;
use kbvqa::knowledge::{assemble_paragraph, build_comment_query, fetch_many, FetchPolicy, KbCache, KbClient};

fn main() -> kbvqa::Result<()> {
    let mock = MockEndpoint::with_comments([
        ("Dog", "The dog is a domesticated descendant of the wolf."),
        ("Frisbee", "A frisbee is a gliding toy thrown by hand."),
    ])
    .expect("mock endpoint starts");
    println!("{}", build_comment_query("dog")?.text);

    let dir = tempfile::tempdir().expect("tempdir");
    let cache_path = dir.path().join("kb.jsonl");
    let policy = FetchPolicy { backoff: Duration::from_millis(10), ..FetchPolicy::default() };
    let client = KbClient::new(mock.url(), policy)?;
    let terms: Vec<String> = ["dog", "frisbee", "unicorn"].map(String::from).to_vec();

    let cold = fetch_many(&client, &terms, &KbCache::open(&cache_path)?);
    println!("cold pass: {} requests", mock.requests());
    mock.reset_requests();
    let warm = fetch_many(&client, &terms, &KbCache::open(&cache_path)?);
    println!("warm pass: {} requests", mock.requests());

    for (c, w) in cold.iter().zip(&warm) {
        if let (Ok(c), Ok(w)) = (c, w) {
            println!("{:8} not_found={:5} from_cache={} {:?}", c.passage.term, c.passage.not_found, w.from_cache, c.passage.comment);
        }
    }
    let passages: Vec<_> = cold.into_iter().filter_map(Result::ok).map(|o| o.passage).collect();
    println!("paragraph: {}", assemble_paragraph(&passages)?.text);
    Ok(())
}
