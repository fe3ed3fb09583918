use std::time::Duration;

use layerforge::captioning::{refine_caption, CaptionDraft, CaptionRefiner, HttpRefiner, RefinerConfig};
use layerforge::imaging::RgbaImage;
use layerforge::Error;
use layerforge_testkit::{chat_completion, pattern_image, MockEndpoint, MockResponse};

fn draft(raw: &str) -> CaptionDraft {
    CaptionDraft {
        raw: raw.to_string(),
        region_phrases: Vec::new(),
        refined: None,
    }
}

fn config(endpoint: &MockEndpoint) -> RefinerConfig {
    RefinerConfig {
        endpoint: endpoint.url().to_string(),
        retry_backoff: Duration::ZERO,
        timeout: Duration::from_secs(10),
        ..RefinerConfig::default()
    }
}

fn image() -> RgbaImage {
    pattern_image(3, 32, 24, 255)
}

#[test]
fn echo_endpoint_returns_its_text() {
    let server = MockEndpoint::echo("REFINED");
    let out = refine_caption(&config(&server), &image(), &draft("a raw draft")).unwrap();
    assert_eq!(out.text, "REFINED");
    assert!(out.retries.is_empty());
    assert!(!out.fallback_used);
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn request_carries_prompt_image_and_draft() {
    let server = MockEndpoint::echo("ok");
    let mut cfg = config(&server);
    cfg.api_key = Some("sekrit".into());
    cfg.model = "vlm-test".into();
    refine_caption(&cfg, &image(), &draft("On the left, a cat.")).unwrap();

    let req = &server.requests()[0];
    assert_eq!(req.method, "POST");
    assert_eq!(req.path, "/v1/chat/completions");
    assert_eq!(req.header("authorization"), Some("Bearer sekrit"));
    let body: serde_json::Value = serde_json::from_str(&req.body).unwrap();
    assert_eq!(body["model"], "vlm-test");
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages[0]["role"], "system");
    assert_eq!(messages[0]["content"], cfg.system_prompt.as_str());
    let parts = messages[1]["content"].as_array().unwrap();
    let url = parts[0]["image_url"]["url"].as_str().unwrap();
    assert!(url.starts_with("data:image/png;base64,"));
    assert_eq!(parts[1]["text"], "On the left, a cat.");
}

#[test]
fn two_failures_then_success_records_two_retries() {
    let server = MockEndpoint::scripted(vec![
        MockResponse::status(503),
        MockResponse::status(500),
        MockResponse::ok(chat_completion("better caption")),
    ]);
    let mut cfg = config(&server);
    cfg.max_retries = 3;
    let out = HttpRefiner::new(cfg).unwrap().refine(&image(), &draft("raw")).unwrap();
    assert_eq!(out.text, "better caption");
    assert_eq!(out.retries.len(), 2);
    assert_eq!(out.retries[0].attempt, 1);
    assert_eq!(out.retries[1].attempt, 2);
    assert!(out.retries[0].error.contains("503"));
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn exhausted_retries_fall_back_to_the_raw_draft() {
    let server = MockEndpoint::scripted(vec![MockResponse::status(500)]);
    let mut cfg = config(&server);
    cfg.max_retries = 2;
    let out = refine_caption(&cfg, &image(), &draft("keep me")).unwrap();
    assert_eq!(out.text, "keep me");
    assert!(out.fallback_used);
    assert_eq!(out.retries.len(), 3);
    assert_eq!(out.warnings.len(), 1);
}

#[test]
fn exhausted_retries_without_fallback_name_the_endpoint() {
    let server = MockEndpoint::scripted(vec![MockResponse::status(502)]);
    let mut cfg = config(&server);
    cfg.max_retries = 1;
    cfg.fallback = false;
    match refine_caption(&cfg, &image(), &draft("raw")) {
        Err(Error::Refiner { endpoint, attempts, .. }) => {
            assert_eq!(endpoint, server.url());
            assert_eq!(attempts, 2);
        }
        other => panic!("expected a refiner error, got {other:?}"),
    }
}

#[test]
fn malformed_completion_counts_as_a_failed_attempt() {
    let server = MockEndpoint::scripted(vec![
        MockResponse::ok("{\"choices\": []}"),
        MockResponse::ok(chat_completion("fine")),
    ]);
    let out = refine_caption(&config(&server), &image(), &draft("raw")).unwrap();
    assert_eq!(out.text, "fine");
    assert_eq!(out.retries.len(), 1);
}

#[test]
fn overlong_answers_are_kept_with_a_warning() {
    let long = vec!["word"; 400].join(" ");
    let server = MockEndpoint::echo(&long);
    let out = refine_caption(&config(&server), &image(), &draft("raw")).unwrap();
    assert_eq!(out.text, long);
    assert_eq!(out.warnings.len(), 1);
}

#[test]
fn unreachable_endpoint_falls_back() {
    // Bind and drop a listener so the port is very likely closed.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = RefinerConfig {
        endpoint: format!("http://127.0.0.1:{port}/v1/chat/completions"),
        retry_backoff: Duration::ZERO,
        max_retries: 1,
        ..RefinerConfig::default()
    };
    let out = refine_caption(&cfg, &image(), &draft("offline")).unwrap();
    assert_eq!(out.text, "offline");
    assert!(out.fallback_used);
}
