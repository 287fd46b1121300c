#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use serde_json::{json, Value};
use tower::ServiceExt;

use framefill_cli::service::router;

fn app(sessions: &std::path::Path) -> Router {
    router(Arc::new(common::engine()), sessions)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (
        status,
        to_bytes(resp.into_body(), usize::MAX)
            .await
            .unwrap()
            .to_vec(),
    )
}

async fn call_json(
    app: &Router,
    method: &str,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let (s, b) = call(app, method, uri, body).await;
    (s, serde_json::from_slice(&b).unwrap())
}

#[tokio::test]
async fn health_and_frames() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = call_json(&app, "GET", "/v1/health", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    let (_, v) = call_json(&app, "GET", "/v1/frames?q=heat", None).await;
    assert!(v["frames"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["name"] == "Apply_heat"));
    let (s, v) = call_json(&app, "GET", "/v2/health", None).await;
    assert_eq!(
        (s, v["error"]["code"].as_str()),
        (StatusCode::NOT_FOUND, Some("not_found"))
    );
}

#[tokio::test]
async fn infill_is_stateless() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let body = json!({
        "sentences": ["Charles went shopping.", null, "Then he left."],
        "frames": [["[Commerce_buy]", "[Food]"]],
        "options": {"mode": "ordered", "num_candidates": 3}
    });
    let (s, a) = call(&app, "POST", "/v1/infill", Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK);
    let (_, b) = call(&app, "POST", "/v1/infill", Some(body)).await;
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a).unwrap();
    let cands = v["blanks"][0]["candidates"].as_array().unwrap();
    assert_eq!(cands.len(), 3);
    assert_eq!(
        cands[0]["satisfied_frames"],
        json!(["[Commerce_buy]", "[Food]"])
    );

    // unguided
    let (s, v) = call_json(
        &app,
        "POST",
        "/v1/infill",
        Some(json!({"sentences": ["A dog ran.", null]})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["blanks"][0]["frames"], json!([]));
}

#[tokio::test]
async fn structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let cases = [
        (
            "/v1/infill",
            json!({"sentences": ["A.", null], "frames": [["[Nope]"]]}),
            StatusCode::NOT_FOUND,
            "unknown_frame",
        ),
        (
            "/v1/infill",
            json!({"sentences": ["A."]}),
            StatusCode::BAD_REQUEST,
            "invalid_request",
        ),
        (
            "/v1/infill",
            json!({"sentences": "A."}),
            StatusCode::BAD_REQUEST,
            "invalid_json",
        ),
        (
            "/v1/infill",
            json!({"sentences": ["A.", null], "options": {"beam_size": 0}}),
            StatusCode::BAD_REQUEST,
            "invalid_request",
        ),
        (
            "/v1/suggest",
            json!({"sentences": ["A."], "position": 3}),
            StatusCode::BAD_REQUEST,
            "invalid_request",
        ),
        (
            "/v1/counterfactual",
            json!({"sentences": ["A.", "B."], "index": 1, "replacement": "C."}),
            StatusCode::BAD_REQUEST,
            "invalid_request",
        ),
        (
            "/v1/suite",
            json!({"frames": ["[Nope]"]}),
            StatusCode::NOT_FOUND,
            "unknown_frame",
        ),
    ];
    for (uri, body, status, code) in cases {
        let (s, v) = call_json(&app, "POST", uri, Some(body.clone())).await;
        assert_eq!(
            (s, v["error"]["code"].as_str()),
            (status, Some(code)),
            "{uri} {body}"
        );
        assert!(v["error"]["message"].is_string());
    }
}

#[tokio::test]
async fn suggest_diversify_counterfactual() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = call_json(
        &app,
        "POST",
        "/v1/suggest",
        Some(
            json!({"sentences": ["Alice went to the grocery store.", null], "position": 1, "k": 3}),
        ),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["frames"].as_array().unwrap().len(), 3);
    assert_eq!(v["suggestion_source"], "frame-transition-counts");

    let (s, v) = call_json(
        &app,
        "POST",
        "/v1/diversify",
        Some(
            json!({"sentences": ["Alice went to the grocery store.", null], "position": 1, "k": 2}),
        ),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["groups"].as_array().unwrap().len(), 2);

    let alec = common::demo_stories(&common::lexicon())[1]
        .sentences
        .clone();
    let (s, v) = call_json(
        &app,
        "POST",
        "/v1/counterfactual",
        Some(json!({"sentences": alec, "index": 1, "replacement": "Alec thought blocks were dull.", "seed": 4})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        v["frames"],
        json!([
            ["[Containers]"],
            ["[Text_creation]"],
            ["[Emotion_directed]"]
        ])
    );
    assert_eq!(v["story"].as_array().unwrap().len(), 5);
    assert!(v["sampling_policy"].as_str().unwrap().contains("seeded"));

    let (s, v) = call_json(
        &app,
        "POST",
        "/v1/plan",
        Some(json!({"frames": ["[Apply_heat]"], "k": 4})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        v["combinations"].as_array().unwrap().len(),
        v["frames"][0]["subsets"].as_array().unwrap().len()
    );
    let (s, v) = call_json(
        &app,
        "POST",
        "/v1/suite",
        Some(json!({"frames": ["[Food]", "[Apply_heat]"], "mode": "ordered"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["mode"], "ordered");
}

#[tokio::test]
async fn sessions_persist_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = call_json(&app, "POST", "/v1/sessions", Some(json!({"id": "alice"}))).await;
    assert_eq!((s, v["id"].as_str()), (StatusCode::CREATED, Some("alice")));
    let (s, _) = call_json(&app, "POST", "/v1/sessions", Some(json!({"id": "alice"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let script = [
        json!({"action": "set_story", "sentences": ["Alice went to the grocery store.", null]}),
        json!({"action": "suggest", "position": 1, "k": 5}),
        json!({"action": "select_frames", "position": 1, "frames": ["[Commerce_buy]"]}),
        json!({"action": "generate", "position": 1}),
        json!({"action": "accept", "position": 1, "candidate": 0}),
        json!({"action": "insert_blank", "at": 2}),
        json!({"action": "suggest", "position": 2, "k": 5}),
    ];
    let mut last = Value::Null;
    for step in script {
        let (s, v) = call_json(
            &app,
            "POST",
            "/v1/sessions/alice/actions",
            Some(step.clone()),
        )
        .await;
        assert_eq!(s, StatusCode::OK, "{step}: {v}");
        last = v["state"].clone();
    }
    assert_eq!(last["history"].as_array().unwrap().len(), 7);
    assert!(dir.path().join("alice.json").exists());

    let (_, stored) = call_json(&app, "GET", "/v1/sessions/alice", None).await;
    assert_eq!(stored, last);
    let (s, v) = call_json(&app, "POST", "/v1/sessions/alice/replay", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["identical"], true);

    // export, import under another id, same candidates on replay
    let (s, _) = call_json(&app, "PUT", "/v1/sessions/bob", Some(stored.clone())).await;
    assert_eq!(s, StatusCode::OK);
    let (_, v) = call_json(&app, "POST", "/v1/sessions/bob/replay", None).await;
    assert_eq!(v["identical"], true);
    assert_eq!(v["state"]["sentences"], stored["sentences"]);

    let (s, v) = call_json(
        &app,
        "POST",
        "/v1/sessions/alice/actions",
        Some(json!({"action": "accept", "position": 0, "candidate": 3})),
    )
    .await;
    assert_eq!(
        (s, v["error"]["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_request"))
    );
    let (s, v) = call_json(&app, "GET", "/v1/sessions/..%2Fetc", None).await;
    assert_eq!(
        (s, v["error"]["code"].as_str()),
        (StatusCode::BAD_REQUEST, Some("invalid_session_id"))
    );
    let (s, _) = call_json(&app, "GET", "/v1/sessions/nobody", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
