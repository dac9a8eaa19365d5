use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use stateact::http::{extract_content, HttpBackend, HttpConfig};
use stateact::replay::{prompt_digest, RecordingBackend, ReplayBackend, ReplayMode, ReplayRecord, ReplayStore};
use stateact::stub::{chat_response, StubServer};
use stateact_core::backend::{BackendError, CompletionRequest, ModelBackend, ScriptedBackend};
use stateact_core::assets;

fn backend(server: &StubServer) -> HttpBackend {
    HttpBackend::new(HttpConfig::new(server.endpoint(), "test-model")).unwrap()
}

#[test]
fn fixed_reply_is_cut_at_the_first_blank_line() {
    let server = StubServer::fixed(">goal: x\naction: look\n\nYou see nothing.\n\n>goal: y").unwrap();
    let text = backend(&server).complete(&CompletionRequest::new("prompt")).unwrap();
    assert_eq!(text, ">goal: x\naction: look");
}

#[test]
fn request_body_carries_one_user_message_and_defaults() {
    let server = StubServer::fixed("action: look").unwrap();
    backend(&server).complete(&CompletionRequest::new("the whole prompt")).unwrap();
    let requests = server.requests();
    assert_eq!(requests.len(), 1);
    let req = &requests[0];
    assert_eq!(req.method, "POST");
    assert_eq!(req.path, "/v1/chat/completions");
    let body = req.json().unwrap();
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages.len(), 1);
    assert_eq!(messages[0]["role"], "user");
    assert_eq!(messages[0]["content"], "the whole prompt");
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["top_p"], 1.0);
    assert_eq!(body["stop"], serde_json::json!(["\n\n"]));
    assert_eq!(body["max_tokens"], 2000);
    assert!(body.get("seed").is_none());
}

#[test]
fn token_goes_in_the_header_and_never_in_the_store() {
    let var = "STATEACT_BACKENDS_TEST_TOKEN";
    let secret = "sk-very-secret-value";
    std::env::set_var(var, secret);
    let server = StubServer::fixed("action: look").unwrap();
    let mut cfg = HttpConfig::new(server.endpoint(), "m");
    cfg.token_env = Some(var.into());
    let http = HttpBackend::new(cfg).unwrap();
    assert!(!format!("{http:?}").contains(secret));

    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.jsonl");
    let rec = RecordingBackend::create(http, &store).unwrap();
    rec.complete(&CompletionRequest::new("p").with_key("e", 0)).unwrap();
    assert_eq!(server.requests()[0].header("authorization"), Some(format!("Bearer {secret}").as_str()));
    assert!(!std::fs::read_to_string(&store).unwrap().contains(secret));

    let mut missing = HttpConfig::new(server.endpoint(), "m");
    missing.token_env = Some("STATEACT_BACKENDS_TEST_UNSET".into());
    assert!(HttpBackend::new(missing).is_err());
}

#[test]
fn error_statuses_and_bad_bodies() {
    let server = StubServer::start(|_| (404, "{\"error\":\"no such model\"}".into())).unwrap();
    let err = backend(&server).complete(&CompletionRequest::new("p")).unwrap_err();
    assert!(matches!(err, BackendError::Status { status: 404, .. }));

    let server = StubServer::start(|_| (200, "not json".into())).unwrap();
    assert!(matches!(backend(&server).complete(&CompletionRequest::new("p")), Err(BackendError::MalformedBody(_))));

    assert!(matches!(extract_content("{\"choices\":[]}"), Err(BackendError::MalformedBody(_))));
    assert_eq!(extract_content("{\"choices\":[{\"text\":\"legacy\"}]}").unwrap(), "legacy");
}

#[test]
fn retries_only_when_configured() {
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&hits);
    let server = StubServer::start(move |_| {
        if counter.fetch_add(1, Ordering::SeqCst) < 2 {
            (503, "busy".into())
        } else {
            (200, chat_response("action: look"))
        }
    })
    .unwrap();
    let err = backend(&server).complete(&CompletionRequest::new("p")).unwrap_err();
    assert!(matches!(err, BackendError::Status { status: 503, .. }));
    assert_eq!(hits.load(Ordering::SeqCst), 1);

    let mut cfg = HttpConfig::new(server.endpoint(), "m");
    cfg.retries = 3;
    let text = HttpBackend::new(cfg).unwrap().complete(&CompletionRequest::new("p")).unwrap();
    assert_eq!(text, "action: look");
    assert_eq!(hits.load(Ordering::SeqCst), 3);

    // Client errors other than 429 are not retried.
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&hits);
    let server = StubServer::start(move |_| {
        counter.fetch_add(1, Ordering::SeqCst);
        (400, "bad".into())
    })
    .unwrap();
    let mut cfg = HttpConfig::new(server.endpoint(), "m");
    cfg.retries = 3;
    assert!(HttpBackend::new(cfg).unwrap().complete(&CompletionRequest::new("p")).is_err());
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let endpoint = {
        let server = StubServer::fixed("x").unwrap();
        server.endpoint()
    };
    let mut cfg = HttpConfig::new(endpoint, "m");
    cfg.timeout_secs = 2;
    let err = HttpBackend::new(cfg).unwrap().complete(&CompletionRequest::new("p")).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)));
}

fn heat_blocks() -> Vec<String> {
    let text = assets::HOUSEHOLD_HEAT;
    let body = &text[text.find("You are in the middle").unwrap()..];
    let first = body.split("\n\n\n\n").next().unwrap();
    first.split("\n\n").skip(1).step_by(2).map(str::to_string).collect()
}

#[test]
fn replay_of_appendix_blocks_returns_them_verbatim() {
    let blocks = heat_blocks();
    let store = ReplayStore::from_records(blocks.iter().enumerate().map(|(i, b)| ReplayRecord {
        episode: "heat".into(),
        step: i,
        prompt_digest: String::new(),
        completion: b.clone(),
    }));
    let replay = ReplayBackend::new(store, ReplayMode::ByStep);
    let first = replay.complete(&CompletionRequest::new("anything").with_key("heat", 0)).unwrap();
    assert_eq!(first, blocks[0]);
    assert!(first.starts_with(">goal: put a hot apple in fridge\n"));
    let miss = replay.complete(&CompletionRequest::new("anything").with_key("heat", blocks.len())).unwrap_err();
    assert!(matches!(miss, BackendError::ReplayMiss(_)));
}

#[test]
fn record_then_replay_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    let rec = RecordingBackend::create(ScriptedBackend::new(["first", "second"]), &path).unwrap();
    let r0 = CompletionRequest::new("prompt zero").with_key("ep", 0);
    let r1 = CompletionRequest::new("prompt one").with_key("ep", 1);
    assert_eq!(rec.complete(&r0).unwrap(), "first");
    assert_eq!(rec.complete(&r1).unwrap(), "second");
    drop(rec);

    let store = ReplayStore::load(&path).unwrap();
    assert_eq!(store.len(), 2);
    let by_step = ReplayBackend::new(store.clone(), ReplayMode::ByStep);
    // Out of order.
    assert_eq!(by_step.complete(&r1).unwrap(), "second");
    assert_eq!(by_step.complete(&r0).unwrap(), "first");

    let by_digest = ReplayBackend::new(store, ReplayMode::ByPromptDigest);
    let same_prompt_later = CompletionRequest::new("prompt zero").with_key("other", 7);
    assert_eq!(by_digest.complete(&same_prompt_later).unwrap(), "first");
    assert!(by_digest.complete(&CompletionRequest::new("unseen")).is_err());
}

#[test]
fn digest_mode_collides_on_identical_prompts() {
    let record = |episode: &str, step, completion: &str| ReplayRecord {
        episode: episode.into(),
        step,
        prompt_digest: prompt_digest("same prompt"),
        completion: completion.into(),
    };
    let store = ReplayStore::from_records([record("a", 0, "answer")]);
    let replay = ReplayBackend::new(store, ReplayMode::ByPromptDigest);
    for step in [0, 3, 9] {
        let req = CompletionRequest::new("same prompt").with_key("b", step);
        assert_eq!(replay.complete(&req).unwrap(), "answer");
    }
    assert_eq!(prompt_digest("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

#[test]
fn corrupt_store_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    std::fs::write(&path, "{\"episode\":\"e\",\"step\":0,\"prompt_digest\":\"d\",\"completion\":\"c\"}\n{oops\n").unwrap();
    let err = ReplayStore::load(&path).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}
