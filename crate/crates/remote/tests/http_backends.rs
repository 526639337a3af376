//! Exercises both HTTP clients against a canned TCP server, checking
//! request bodies, auth headers, ordering, and retry behavior.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use caricheck_core::{Embedder, Error, SamplingParams, TextGenerator};
use caricheck_remote::{EndpointConfig, HttpEmbedder, HttpTextGenerator};

/// One captured request: the raw header block and the parsed JSON body.
struct Captured {
    head: String,
    body: serde_json::Value,
}

struct MockServer {
    url: String,
    captured: Arc<Mutex<Vec<Captured>>>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Serves the canned (status, body) responses in order, one
    /// connection each, then stops listening.
    fn start(responses: Vec<(u16, String)>) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let captured = Arc::new(Mutex::new(Vec::new()));
        let sink = Arc::clone(&captured);
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let Ok((mut stream, _)) = listener.accept() else { return };
                let (head, raw_body) = read_request(&mut stream);
                let parsed = serde_json::from_slice(&raw_body)
                    .unwrap_or(serde_json::Value::Null);
                sink.lock().unwrap().push(Captured { head, body: parsed });
                let reason = if status < 400 { "OK" } else { "Error" };
                let reply = format!(
                    "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\n\
                     Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        MockServer { url, captured, handle: Some(handle) }
    }

    fn finish(mut self) -> Vec<Captured> {
        self.handle.take().unwrap().join().expect("server thread");
        Arc::try_unwrap(self.captured).ok().expect("all clones dropped").into_inner().unwrap()
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> (String, Vec<u8>) {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        let n = stream.read(&mut chunk).expect("read");
        buf.extend_from_slice(&chunk[..n]);
        if let Some(pos) = buf.windows(4).position(|w| w == b"\r\n\r\n") {
            break pos + 4;
        }
        assert!(n > 0, "connection closed before headers finished");
    };
    let head = String::from_utf8_lossy(&buf[..header_end]).into_owned();
    let length: usize = head
        .lines()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.eq_ignore_ascii_case("content-length").then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    let mut body = buf[header_end..].to_vec();
    while body.len() < length {
        let n = stream.read(&mut chunk).expect("read body");
        assert!(n > 0, "connection closed mid-body");
        body.extend_from_slice(&chunk[..n]);
    }
    (head, body)
}

fn chat_ok(content: &str) -> (u16, String) {
    (200, format!(r#"{{"choices":[{{"message":{{"role":"assistant","content":"{content}"}}}}]}}"#))
}

#[test]
fn generator_posts_chat_body_and_returns_first_choice() {
    let server = MockServer::start(vec![chat_ok("hello there")]);
    let generator = HttpTextGenerator::new(&EndpointConfig::new(&server.url)).unwrap();
    let sampling = SamplingParams { temperature: 0.7, max_tokens: 128 };
    let out = generator.complete("Describe a forum.", "test-model", &sampling).unwrap();
    assert_eq!(out, "hello there");

    let captured = server.finish();
    assert_eq!(captured.len(), 1);
    let body = &captured[0].body;
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.7);
    assert_eq!(body["max_tokens"], 128);
    assert_eq!(body["n"], 1);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "Describe a forum.");
}

#[test]
fn generator_falls_back_to_completion_text_field() {
    let server = MockServer::start(vec![(200, r#"{"choices":[{"text":"plain"}]}"#.into())]);
    let generator = HttpTextGenerator::new(&EndpointConfig::new(&server.url)).unwrap();
    let out = generator.complete("p", "m", &SamplingParams::default()).unwrap();
    assert_eq!(out, "plain");
    server.finish();
}

#[test]
fn generator_makes_one_attempt_and_surfaces_http_failure() {
    let server = MockServer::start(vec![(503, r#"{"error":"overloaded"}"#.into())]);
    let generator = HttpTextGenerator::new(&EndpointConfig::new(&server.url)).unwrap();
    match generator.complete("p", "m", &SamplingParams::default()) {
        Err(Error::Transport(msg)) => assert!(msg.contains("503"), "{msg}"),
        other => panic!("expected Transport error, got {other:?}"),
    }
    // The harness owns retries; the client itself must not add more.
    assert_eq!(server.finish().len(), 1);
}

#[test]
fn generator_rejects_empty_choice_list() {
    let server = MockServer::start(vec![(200, r#"{"choices":[]}"#.into())]);
    let generator = HttpTextGenerator::new(&EndpointConfig::new(&server.url)).unwrap();
    match generator.complete("p", "m", &SamplingParams::default()) {
        Err(Error::Parse { message, .. }) => assert!(message.contains("no choices"), "{message}"),
        other => panic!("expected Parse error, got {other:?}"),
    }
    server.finish();
}

#[test]
fn embedder_restores_request_order_from_index_field() {
    let server = MockServer::start(vec![(
        200,
        r#"{"data":[{"embedding":[0.0,1.0],"index":1},{"embedding":[1.0,0.0],"index":0}]}"#.into(),
    )]);
    let embedder = HttpEmbedder::new(&EndpointConfig::new(&server.url), "embed-small").unwrap();
    assert_eq!(embedder.embedder_id(), "http:embed-small");
    let vectors = embedder.embed_raw(&["first", "second"]).unwrap();
    assert_eq!(vectors, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);

    let captured = server.finish();
    let body = &captured[0].body;
    assert_eq!(body["model"], "embed-small");
    assert_eq!(body["input"][0], "first");
    assert_eq!(body["input"][1], "second");
}

#[test]
fn embedder_retries_transient_failures() {
    let server = MockServer::start(vec![
        (500, "busy".into()),
        (200, r#"{"data":[{"embedding":[1.0]}]}"#.into()),
    ]);
    let embedder = HttpEmbedder::new(&EndpointConfig::new(&server.url), "m")
        .unwrap()
        .with_retry(3, 1);
    let vectors = embedder.embed_raw(&["t"]).unwrap();
    assert_eq!(vectors, vec![vec![1.0]]);
    assert_eq!(server.finish().len(), 2);
}

#[test]
fn embedder_gives_up_after_configured_attempts() {
    let server = MockServer::start(vec![
        (500, "busy".into()),
        (500, "busy".into()),
        (500, "busy".into()),
    ]);
    let embedder = HttpEmbedder::new(&EndpointConfig::new(&server.url), "m")
        .unwrap()
        .with_retry(3, 1);
    match embedder.embed_raw(&["t"]) {
        Err(Error::Transport(msg)) => assert!(msg.contains("500"), "{msg}"),
        other => panic!("expected Transport error, got {other:?}"),
    }
    assert_eq!(server.finish().len(), 3);
}

#[test]
fn embedder_rejects_count_mismatch_without_retry() {
    let server = MockServer::start(vec![(200, r#"{"data":[{"embedding":[1.0]}]}"#.into())]);
    let embedder = HttpEmbedder::new(&EndpointConfig::new(&server.url), "m").unwrap();
    match embedder.embed_raw(&["a", "b"]) {
        Err(Error::Embedder(msg)) => assert!(msg.contains("returned 1"), "{msg}"),
        other => panic!("expected Embedder error, got {other:?}"),
    }
    assert_eq!(server.finish().len(), 1);
}

#[test]
fn bearer_token_read_from_named_env_var() {
    std::env::set_var("CARICHECK_TEST_TOKEN_A", "sk-fixture");
    let server = MockServer::start(vec![chat_ok("ok")]);
    let config = EndpointConfig::new(&server.url).with_auth_env("CARICHECK_TEST_TOKEN_A");
    let generator = HttpTextGenerator::new(&config).unwrap();
    generator.complete("p", "m", &SamplingParams::default()).unwrap();
    let captured = server.finish();
    assert!(
        captured[0].head.to_ascii_lowercase().contains("authorization: bearer sk-fixture"),
        "auth header missing:\n{}",
        captured[0].head
    );
}

#[test]
fn unset_auth_env_rejected_at_construction() {
    let config =
        EndpointConfig::new("http://127.0.0.1:9/v1").with_auth_env("CARICHECK_TEST_TOKEN_UNSET");
    match HttpTextGenerator::new(&config) {
        Err(Error::InvalidArgument(msg)) => {
            assert!(msg.contains("CARICHECK_TEST_TOKEN_UNSET"), "{msg}")
        }
        other => panic!("expected InvalidArgument, got {:?}", other.err()),
    }
    match HttpEmbedder::new(&config, "m") {
        Err(Error::InvalidArgument(_)) => {}
        other => panic!("expected InvalidArgument, got {:?}", other.err()),
    }
}

#[test]
fn empty_batch_short_circuits_without_network() {
    // URL points at a dead port; an empty batch must not touch it.
    let embedder = HttpEmbedder::new(&EndpointConfig::new("http://127.0.0.1:9/v1"), "m").unwrap();
    assert_eq!(embedder.embed_raw(&[]).unwrap(), Vec::<Vec<f32>>::new());
}
