mod common;

use std::io::{Read, Write};

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use cbt_core::analysis::analyze_history;
use cbt_core::fixtures::{cyclic_history, fig1_history};
use cbt_core::service::{bind, router, serve, AppState, ServeError};
use cbt_core::{ClusterSession, DistanceConfig};
use common::partition_of;

fn fig1_state() -> AppState {
    let a = analyze_history(&fig1_history(), &DistanceConfig::default()).unwrap();
    AppState::new(ClusterSession::new(a.history, a.partition).unwrap())
}

async fn send(app: &Router, request: Request<Body>) -> (StatusCode, Option<String>, Vec<u8>) {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let content_type = response
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string());
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, content_type, bytes)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, _, bytes) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn post_raw(app: &Router, uri: &str, body: &str) -> (StatusCode, Value) {
    let request = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, _, bytes) = send(app, request).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    post_raw(app, uri, &body.to_string()).await
}

fn cluster_ids(view: &Value) -> Vec<u64> {
    view["clusters"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect()
}

#[tokio::test]
async fn session_view_lists_beads_and_clusters() {
    let app = router(fig1_state());
    let (status, view) = get(&app, "/api/session").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(view["revision"], 0);
    assert_eq!(view["can_undo"], false);
    assert_eq!(view["can_redo"], false);
    assert_eq!(cluster_ids(&view), vec![1, 2, 3, 4]);
    assert_eq!(view["clusters"][1]["bead_ids"], json!(["2", "3", "4"]));
    assert!(view["clusters"][0]["color"].as_str().unwrap().starts_with('#'));

    let beads = view["beads"].as_array().unwrap();
    assert_eq!(beads.len(), 8);
    let last = &beads[7];
    assert_eq!(last["bead_id"], "8");
    assert_eq!(last["seq"], 7);
    assert_eq!(last["y"], 3);
    assert_eq!(last["cluster_id"], 4);
    assert_eq!(last["color"], view["clusters"][3]["color"]);
    assert_eq!(last["label"], "fsm.StateMachine.transit(int)");
    assert_eq!(last["file"], "fsm/StateMachine.java");
    assert_eq!(last["enclosing_class"], "fsm.StateMachine");
    assert_eq!(last["enclosing_method"], "fsm.StateMachine.transit(int)");
}

#[tokio::test]
async fn split_merge_undo_redo_bump_the_revision() {
    let app = router(fig1_state());
    let (status, body) = post(
        &app,
        "/api/clusters/split",
        json!({"revision": 0, "cluster_id": 2, "bead_ids": ["3", "4"]}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["revision"], 1);
    assert_eq!(body["new_cluster"]["id"], 5);
    assert_eq!(body["new_cluster"]["bead_ids"], json!(["3", "4"]));

    let (status, body) = post(&app, "/api/clusters/merge", json!({"revision": 1, "cluster_ids": [1, 2]})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["revision"], 2);
    assert_eq!(body["surviving_cluster"]["id"], 1);
    assert_eq!(body["surviving_cluster"]["bead_ids"], json!(["1", "2"]));

    let (_, view) = get(&app, "/api/session").await;
    assert_eq!(view["revision"], 2);
    assert_eq!(cluster_ids(&view), vec![1, 5, 3, 4]);
    assert_eq!(view["can_undo"], true);

    let (status, body) = post(&app, "/api/undo", json!({"revision": 2})).await;
    assert_eq!((status, body["revision"].clone()), (StatusCode::OK, json!(3)));
    let (_, view) = get(&app, "/api/session").await;
    assert_eq!(cluster_ids(&view), vec![1, 2, 5, 3, 4]);
    assert_eq!(view["can_redo"], true);

    let (status, body) = post(&app, "/api/redo", json!({"revision": 3})).await;
    assert_eq!((status, body["revision"].clone()), (StatusCode::OK, json!(4)));
    let (_, view) = get(&app, "/api/session").await;
    assert_eq!(cluster_ids(&view), vec![1, 5, 3, 4]);
    assert_eq!(view["can_redo"], false);

    let (status, body) = post(&app, "/api/redo", json!({"revision": 4})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "nothing_to_do");
}

#[tokio::test]
async fn stale_revision_is_refused_without_change() {
    let app = router(fig1_state());
    let (status, _) = post(&app, "/api/clusters/merge", json!({"revision": 0, "cluster_ids": [3, 4]})).await;
    assert_eq!(status, StatusCode::OK);
    for (uri, body) in [
        ("/api/clusters/merge", json!({"revision": 0, "cluster_ids": [1, 2]})),
        ("/api/clusters/split", json!({"revision": 0, "cluster_id": 2, "bead_ids": ["3"]})),
        ("/api/undo", json!({"revision": 0})),
    ] {
        let (status, err) = post(&app, uri, body).await;
        assert_eq!(status, StatusCode::CONFLICT, "{uri}");
        assert_eq!(err["error"], "stale_revision");
        assert_eq!(err["revision"], 1);
    }
    let (_, view) = get(&app, "/api/session").await;
    assert_eq!(view["revision"], 1);
    assert_eq!(cluster_ids(&view), vec![1, 2, 3]);
}

#[tokio::test]
async fn unknown_clusters_are_not_found() {
    let app = router(fig1_state());
    let (status, err) = post(
        &app,
        "/api/clusters/split",
        json!({"revision": 0, "cluster_id": 99, "bead_ids": ["1"]}),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"], "unknown_cluster");
    assert_eq!(err["cluster_id"], 99);
    let (status, _) = post(&app, "/api/clusters/merge", json!({"revision": 0, "cluster_ids": [1, 42]})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = get(&app, "/api/diff?clusters=42").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_and_invalid_requests_are_bad_requests() {
    let app = router(fig1_state());
    let cases = [
        ("/api/clusters/split", "not json", "bad_request"),
        ("/api/clusters/split", r#"{"revision":0,"cluster_id":2}"#, "bad_request"),
        ("/api/clusters/merge", r#"{"revision":"x","cluster_ids":[1,2]}"#, "bad_request"),
        ("/api/clusters/split", r#"{"revision":0,"cluster_id":2,"bead_ids":["1"]}"#, "invalid_operation"),
        ("/api/clusters/split", r#"{"revision":0,"cluster_id":2,"bead_ids":["2","3","4"]}"#, "invalid_operation"),
        ("/api/clusters/split", r#"{"revision":0,"cluster_id":2,"bead_ids":[]}"#, "invalid_operation"),
        ("/api/clusters/merge", r#"{"revision":0,"cluster_ids":[1]}"#, "invalid_operation"),
        ("/api/clusters/merge", r#"{"revision":0,"cluster_ids":[1,1]}"#, "invalid_operation"),
        ("/api/export", r#"{"out":"/tmp"}"#, "bad_request"),
    ];
    for (uri, body, kind) in cases {
        let (status, err) = post_raw(&app, uri, body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri} {body}: {err}");
        assert_eq!(err["error"], kind, "{uri} {body}");
        assert!(err["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
    for uri in ["/api/diff", "/api/diff?clusters=1,x", "/api/diff?clusters=1&context=-1"] {
        let (status, err) = get(&app, uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_eq!(err["error"], "bad_request");
    }
    let (_, view) = get(&app, "/api/session").await;
    assert_eq!(view["revision"], 0);
}

#[tokio::test]
async fn diff_attributes_lines_to_clusters() {
    let app = router(fig1_state());
    let (status, diff) = get(&app, "/api/diff?clusters=1,2&context=1").await;
    assert_eq!(status, StatusCode::OK, "{diff}");
    assert_eq!(diff["clusters"], json!([1, 2]));
    let lines = diff["lines"].as_array().unwrap();
    let changed: Vec<&Value> = lines.iter().filter(|l| l["kind"] != "context").collect();
    // Two inserted log lines plus two one-line replacements.
    assert_eq!(changed.len(), 6);
    for l in &changed {
        assert!(l["owner"] == 1 || l["owner"] == 2, "{l}");
        assert!(l["bead_id"].is_string());
        assert!(!l["text"].as_str().unwrap().ends_with('\n'));
    }
    let added: Vec<&Value> = changed.iter().copied().filter(|l| l["kind"] == "added").collect();
    assert_eq!(added[0]["owner"], 1);
    assert_eq!(added[0]["bead_id"], "1");
    assert_eq!(added[0]["base_line"], Value::Null);
    assert_eq!(added[0]["result_line"], 7);
    let context = lines.iter().filter(|l| l["kind"] == "context").count();
    assert!(context < 10, "context=1 keeps few lines, got {context}");
}

#[tokio::test]
async fn diff_with_missing_dependency_is_a_conflict() {
    let app = router(fig1_state());
    let (status, body) = post(
        &app,
        "/api/clusters/split",
        json!({"revision": 0, "cluster_id": 2, "bead_ids": ["3", "4"]}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["new_cluster"]["id"], 5);
    let (status, err) = get(&app, "/api/diff?clusters=2,4").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "selection_patch_conflict");
    assert_eq!(err["seq"], 7);
    assert_eq!(err["bead_id"], "8");
    assert_eq!(err["blocking_seq"], 2);
    assert_eq!(err["blocking_bead_id"], "3");
    let (status, _) = get(&app, "/api/diff?clusters=2,4,5").await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn export_reports_cycles_and_existing_output() {
    let (history, groups) = cyclic_history();
    let groups: Vec<&[&str]> = groups.iter().map(Vec::as_slice).collect();
    let session = ClusterSession::new(history, partition_of(&groups)).unwrap();
    let app = router(AppState::new(session));
    let dir = tempfile::tempdir().unwrap();

    let (status, err) = post(&app, "/api/export", json!({"out_path": dir.path().join("out")})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "cyclic_cluster_dependency");
    assert_eq!(err["clusters"].as_array().unwrap().len(), 2);
    let witnesses = err["witnesses"].as_array().unwrap();
    assert_eq!(witnesses.len(), 2);
    for w in witnesses {
        for key in ["cluster", "bead", "depends_on", "depends_on_bead"] {
            assert!(!w[key].is_null(), "{key} missing in {w}");
        }
    }
    assert!(!dir.path().join("out").exists());

    let app = router(fig1_state());
    std::fs::write(dir.path().join("file"), "x").unwrap();
    let (status, err) = post(&app, "/api/export", json!({"out_path": dir.path()})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"], "output_exists");

    let out = dir.path().join("repo");
    let bundle = dir.path().join("export.json");
    let (status, body) = post(
        &app,
        "/api/export",
        json!({"out_path": out, "bundle_path": bundle, "message_template": "c{cluster_id}"}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["revision"], 0);
    assert_eq!(body["commits"].as_array().unwrap().len(), 4);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(bundle).unwrap()).unwrap();
    assert_eq!(written["commits"][2]["message"], "c3");
}

#[tokio::test]
async fn static_files_and_fallback_page() {
    let app = router(fig1_state());
    let (status, content_type, body) = send(&app, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert!(content_type.unwrap().starts_with("text/html"));
    assert!(String::from_utf8(body).unwrap().contains("/api/session"));
    let (status, _, _) = send(&app, Request::get("/app.js").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let root = tempfile::tempdir().unwrap();
    let assets = root.path().join("ui");
    std::fs::create_dir_all(assets.join("js")).unwrap();
    std::fs::write(assets.join("index.html"), "<p>ui</p>").unwrap();
    std::fs::write(assets.join("js/app.js"), "let x = 1;").unwrap();
    std::fs::write(root.path().join("secret.txt"), "secret").unwrap();
    let app = router(fig1_state().with_assets(&assets));

    let (status, content_type, body) = send(&app, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!((status, body.as_slice()), (StatusCode::OK, b"<p>ui</p>".as_slice()));
    assert!(content_type.unwrap().starts_with("text/html"));
    let (status, content_type, _) = send(&app, Request::get("/js/app.js").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert!(content_type.unwrap().starts_with("text/javascript"));
    for uri in ["/../secret.txt", "/js/../../secret.txt", "/%2e%2e/secret.txt", "/missing.css"] {
        let (status, _, body) = send(&app, Request::get(uri).body(Body::empty()).unwrap()).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_ne!(body, b"secret");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_mutations_at_one_revision_apply_once() {
    let app = router(fig1_state());
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move {
                post(&app, "/api/clusters/merge", json!({"revision": 0, "cluster_ids": [3, 4]})).await.0
            })
        })
        .collect();
    let mut statuses = Vec::new();
    for t in tasks {
        statuses.push(t.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1, "{statuses:?}");
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::CONFLICT).count(), 7);
    let (_, view) = get(&app, "/api/session").await;
    assert_eq!(view["revision"], 1);
}

#[tokio::test]
async fn serves_over_tcp_and_detects_a_taken_port() {
    let listener = bind(0).await.unwrap();
    let addr = listener.local_addr().unwrap();
    assert!(addr.ip().is_loopback());
    assert!(matches!(bind(addr.port()).await, Err(ServeError::PortInUse(p)) if p == addr.port()));

    let state = fig1_state();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(listener, state.clone(), async {
        stopped.await.ok();
    }));

    let body = r#"{"revision":0,"cluster_ids":[1,2]}"#;
    let request = format!(
        "POST /api/clusters/merge HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\n\
         Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let response = tokio::task::spawn_blocking(move || {
        let mut stream = std::net::TcpStream::connect(addr).unwrap();
        stream.write_all(request.as_bytes()).unwrap();
        let mut response = String::new();
        stream.read_to_string(&mut response).unwrap();
        response
    })
    .await
    .unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("\"surviving_cluster\""));

    stop.send(()).unwrap();
    server.await.unwrap().unwrap();
    let sidecar = state.sidecar().await;
    assert_eq!(sidecar.revision, 1);
    assert_eq!(sidecar.partition.len(), 3);
    assert_eq!(sidecar.next_cluster_id, 5);
}
