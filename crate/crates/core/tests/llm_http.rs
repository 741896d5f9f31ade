mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use common::{n, names, W1, W2};
use topotext::instruction::{extract_canonical, RetryBudget, TurnSide};
use topotext::llm::{
    check_tool_name, extract_tool_name, tool_call_response, ChatTransport, HttpTransport, ImplicitMode,
    LlmClient, LlmConfig, LlmError, PromptSet, RecordingTransport, ReplayTransport, DEFAULT_BASE_URL,
    DEFAULT_MODEL,
};

/// Serves one canned reply per connection and keeps the request bodies.
struct Server {
    url: String,
    seen: Arc<Mutex<Vec<(String, Value)>>>,
}

fn serve(replies: Vec<(u16, String, Duration)>) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body, delay) in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = Vec::new();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                head.push(line);
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push((head.join(""), serde_json::from_slice(&buf).unwrap_or(Value::Null)));
            thread::sleep(delay);
            let mut stream = stream;
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    Server { url, seen }
}

fn http_client(url: &str, timeout: Duration) -> LlmClient {
    let config = LlmConfig::new(url, "test-model", "sk-test").unwrap().with_timeout(timeout).unwrap();
    LlmClient::http(&config, PromptSet::default()).unwrap()
}

#[test]
fn successful_extraction_over_http() {
    let body = tool_call_response(extract_tool_name(), &json!({"waypoints": ["n1", "n2", "n4", "n5"], "turn_points": ["n4"]}));
    let server = serve(vec![(200, body.to_string(), Duration::ZERO)]);
    let client = http_client(&server.url, Duration::from_secs(10));
    let tp = client.llm_extract(TurnSide::Left, W2).unwrap();
    assert_eq!(tp.waypoints, names(&["n1", "n2", "n4", "n5"]));
    assert_eq!(tp.turn_points.into_iter().collect::<Vec<_>>(), names(&["n4"]));

    let seen = server.seen.lock().unwrap();
    let (head, request) = &seen[0];
    assert!(head.starts_with("POST /v1/chat/completions"));
    assert!(head.to_ascii_lowercase().contains("authorization: bearer sk-test"));
    assert_eq!(request["model"], "test-model");
    assert_eq!(request["tool_choice"]["function"]["name"], extract_tool_name());
    assert_eq!(request["messages"][1]["content"], W2);
}

#[test]
fn non_2xx_status_carries_the_body() {
    let server = serve(vec![(503, r#"{"error":"overloaded"}"#.into(), Duration::ZERO)]);
    let client = http_client(&server.url, Duration::from_secs(10));
    match client.llm_check_turn(W1, &n("n2")) {
        Err(LlmError::Status { status: 503, body }) => assert!(body.contains("overloaded")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn slow_service_times_out() {
    let server = serve(vec![(200, "{}".into(), Duration::from_millis(1500))]);
    let client = http_client(&server.url, Duration::from_millis(200));
    assert!(matches!(client.llm_check_turn(W1, &n("n2")), Err(LlmError::Timeout)));
}

#[test]
fn unreachable_service_is_a_transport_failure() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = http_client(&format!("http://127.0.0.1:{port}/v1"), Duration::from_secs(5));
    assert!(matches!(client.llm_extract(TurnSide::Right, W1), Err(LlmError::Transport(_))));
}

#[test]
fn bad_payloads_are_schema_errors() {
    let wrong = tool_call_response(check_tool_name(), &json!({"direction": "straight"}));
    let missing = tool_call_response(extract_tool_name(), &json!({"turn_points": ["n4"]}));
    let server = serve(vec![
        (200, wrong.to_string(), Duration::ZERO),
        (200, missing.to_string(), Duration::ZERO),
        (200, "<html>".into(), Duration::ZERO),
    ]);
    let client = http_client(&server.url, Duration::from_secs(10));
    assert!(matches!(client.llm_check_turn(W1, &n("n2")), Err(LlmError::Schema { .. })));
    assert!(matches!(client.llm_extract(TurnSide::Left, W2), Err(LlmError::Schema { .. })));
    match client.llm_extract(TurnSide::Left, W2) {
        Err(LlmError::Schema { raw, .. }) => assert_eq!(raw, "<html>"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn capture_then_replay_without_network() {
    let body = tool_call_response(check_tool_name(), &json!({"direction": "right"}));
    let server = serve(vec![(200, body.to_string(), Duration::ZERO)]);
    let config = LlmConfig::new(&server.url, DEFAULT_MODEL, "k").unwrap();
    let http = HttpTransport::new(&config.base_url, "k", config.timeout).unwrap();
    let recorder = Arc::new(RecordingTransport::new(http));
    let client = LlmClient::new(&config, PromptSet::default(), Box::new(recorder.clone()));
    assert_eq!(client.llm_check_turn(W1, &n("n2")).unwrap(), TurnSide::Right);

    let replay = ReplayTransport::new(recorder.exchanges());
    let offline = LlmClient::new(&config, PromptSet::default(), Box::new(replay));
    assert_eq!(offline.llm_check_turn(W1, &n("n2")).unwrap(), TurnSide::Right);
    assert!(matches!(offline.llm_check_turn(W1, &n("n2")), Err(LlmError::Replay(_))));
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy_transcript.json")
}

fn replay_client() -> (LlmClient, Arc<ReplayTransport>) {
    let config = LlmConfig::new(DEFAULT_BASE_URL, DEFAULT_MODEL, "").unwrap();
    let replay = Arc::new(ReplayTransport::from_file(&fixture()).unwrap());
    (LlmClient::new(&config, PromptSet::default(), Box::new(replay.clone())), replay)
}

#[test]
fn recorded_transcript_extracts_the_toy_paths() {
    let (client, replay) = replay_client();
    let budget = RetryBudget::default();
    let (w1, r1) = extract_canonical(W1, &client, budget).unwrap();
    assert_eq!(w1.to_json(), r#"{"waypoints":["n1","n2","n3"],"actions":["R"]}"#);
    assert_eq!(r1.attempts, 1);
    let (w2, _) = extract_canonical(W2, &client, budget).unwrap();
    assert_eq!(w2.to_json(), r#"{"waypoints":["n1","n2","n4","n5"],"actions":["F","L"]}"#);
    let (w3, r3) = extract_canonical(common::TOY_ANSWER, &client, budget).unwrap();
    assert_eq!(r3.attempts, 2);
    assert_eq!(w3.waypoints, names(&["n5", "n4", "n2", "n3"]));

    let text = client.llm_implicit_query(ImplicitMode::Reverse, &[W1.to_string()], None).unwrap();
    assert!(text.starts_with("Depart from n3"));
    let text = client
        .llm_implicit_query(ImplicitMode::Combined, &[W1.to_string(), W2.to_string()], Some((&n("n5"), &n("n3"))))
        .unwrap();
    assert!(!text.is_empty());
    assert_eq!(replay.remaining(), 0);
}

#[test]
fn recorded_transcript_is_strict_about_requests() {
    let (client, _) = replay_client();
    assert!(matches!(client.llm_extract(TurnSide::Left, "Depart from a to b."), Err(LlmError::Replay(_))));
    let edited = PromptSet { turn_points_checker: "Left or right?".into(), ..PromptSet::default() };
    let config = LlmConfig::new(DEFAULT_BASE_URL, DEFAULT_MODEL, "").unwrap();
    let other = LlmClient::new(&config, edited, Box::new(ReplayTransport::from_file(&fixture()).unwrap()));
    assert!(matches!(other.llm_check_turn(W1, &n("n2")), Err(LlmError::Replay(_))));
    assert!(matches!(
        client.llm_implicit_query(ImplicitMode::Combined, &[], Some((&n("n5"), &n("n3")))),
        Err(LlmError::Precondition(_))
    ));
}

#[test]
fn transport_trait_objects_compose() {
    let replay: Box<dyn ChatTransport> = Box::new(ReplayTransport::new(Vec::new()));
    assert!(replay.post(&json!({})).is_err());
}
