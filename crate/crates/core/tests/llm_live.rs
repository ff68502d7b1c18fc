//! Live backend against a local HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use redsearch::llm::{Backend, LlmClient, LlmConfig, LlmError, Transcript};
use serde_json::Value;

struct Seen {
    bodies: Vec<Value>,
    auth: Vec<String>,
}

/// Serves the canned (status, body) replies in order, one per connection.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Seen>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Seen { bodies: Vec::new(), auth: Vec::new() }));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if let Some(v) = line.strip_prefix("authorization: ").or_else(|| line.strip_prefix("Authorization: ")) {
                    log.lock().unwrap().auth.push(v.trim().to_string());
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().bodies.push(serde_json::from_slice(&buf).unwrap());
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn ok_body(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 3},
    })
    .to_string()
}

fn config(url: &str, key_env: &str) -> LlmConfig {
    LlmConfig {
        backend: Backend::Live,
        endpoint: Some(url.to_string()),
        api_key_env: key_env.to_string(),
        retry_backoff_secs: 0.01,
        request_timeout_secs: 10.0,
        ..LlmConfig::default()
    }
}

#[test]
fn server_errors_are_retried() {
    let (url, seen) = serve(vec![(503, "busy".into()), (200, ok_body("{{B1}}"))]);
    std::env::set_var("REDSEARCH_TEST_KEY_RETRY", "sk-test");
    let client = LlmClient::live(&config(&url, "REDSEARCH_TEST_KEY_RETRY"))
        .unwrap()
        .recording(None)
        .unwrap();
    assert_eq!(client.complete("hello").unwrap(), "{{B1}}");
    let seen = seen.lock().unwrap();
    assert_eq!(seen.bodies.len(), 2);
    let body = &seen.bodies[1];
    assert_eq!(body["model"], "gpt-4o-mini");
    assert_eq!(body["temperature"], 1.0);
    assert_eq!(body["messages"], serde_json::json!([{"role": "user", "content": "hello"}]));
    assert_eq!(seen.auth[0], "Bearer sk-test");

    let transcript: Transcript = client.recorded().unwrap();
    assert_eq!(transcript.entries.len(), 1);
    assert_eq!(transcript.entries[0].usage.as_ref().unwrap().prompt_tokens, 11);
    // the key never reaches the transcript
    assert!(!transcript.to_jsonl().unwrap().contains("sk-test"));
}

#[test]
fn auth_errors_are_not_retried() {
    let (url, seen) = serve(vec![(401, "{\"error\":\"bad key\"}".into()), (200, ok_body("late"))]);
    std::env::set_var("REDSEARCH_TEST_KEY_AUTH", "sk-wrong");
    let client = LlmClient::live(&config(&url, "REDSEARCH_TEST_KEY_AUTH")).unwrap();
    match client.complete("hello") {
        Err(LlmError::Http { status: 401, .. }) => {}
        other => panic!("expected a 401, got {other:?}"),
    }
    assert_eq!(seen.lock().unwrap().bodies.len(), 1);
}

#[test]
fn retries_give_up_after_the_limit() {
    let replies = (0..4).map(|_| (500, "oops".to_string())).collect();
    let (url, seen) = serve(replies);
    std::env::set_var("REDSEARCH_TEST_KEY_LIMIT", "sk-test");
    let client = LlmClient::live(&config(&url, "REDSEARCH_TEST_KEY_LIMIT")).unwrap();
    assert!(matches!(client.complete("x"), Err(LlmError::Http { status: 500, .. })));
    // one attempt plus three retries
    assert_eq!(seen.lock().unwrap().bodies.len(), 4);
}

#[test]
fn missing_key_is_named() {
    let err = LlmClient::live(&config("http://127.0.0.1:9/", "REDSEARCH_TEST_KEY_UNSET")).unwrap_err();
    assert!(err.to_string().contains("REDSEARCH_TEST_KEY_UNSET"), "{err}");
}
