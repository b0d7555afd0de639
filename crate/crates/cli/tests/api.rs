mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::*;
use http_body_util::BodyExt;
use reseq_cli::config::ProjectConfig;
use reseq_cli::pipeline::EngineSnapshot;
use reseq_cli::server::{router, AppState};
use reseq_core::graphseq::{build_graph, minimum_spanning_tree};
use reseq_core::layout::embed_mst_2d;
use tower::ServiceExt;

fn app(config: ProjectConfig) -> Router {
    let snapshot = EngineSnapshot::build(&config).unwrap();
    router(AppState::new(config, snapshot))
}

async fn call(app: &Router, method: &str, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get_json(app: &Router, uri: &str) -> serde_json::Value {
    let (status, body) = call(app, "GET", uri, "").await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

fn planted_config(dir: &std::path::Path) -> ProjectConfig {
    ProjectConfig {
        images: vec![planted(dir, 29, 1)],
        ..ProjectConfig::default()
    }
}

#[tokio::test]
async fn frames_flag_the_outlier() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(planted_config(tmp.path()));
    let v = get_json(&app, "/api/frames").await;
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 30);
    let flagged: Vec<&str> = list.iter().filter(|f| f["outlier"] == true).map(|f| f["id"].as_str().unwrap()).collect();
    assert_eq!(flagged, ["zz"]);
    let o = get_json(&app, "/api/outliers").await;
    assert_eq!(o["pruned"], true);
    assert_eq!(o["removed"], serde_json::json!(["zz"]));
}

#[tokio::test]
async fn embedding_matches_a_direct_computation() {
    let tmp = tempfile::tempdir().unwrap();
    let config = planted_config(tmp.path());
    let snapshot = EngineSnapshot::build(&config).unwrap();
    let direct = embed_mst_2d(&minimum_spanning_tree(&build_graph(&snapshot.pruned).unwrap()), &snapshot.pruned).unwrap();
    let app = router(AppState::new(config, snapshot));
    let (status, body) = call(&app, "GET", "/api/embedding", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, reseq_core::json::to_vec(&direct).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["coords"].as_object().unwrap().len(), 29);

    let mst = get_json(&app, "/api/mst").await;
    assert_eq!(mst["edges"].as_array().unwrap().len(), 28);
}

#[tokio::test]
async fn sequence_requests() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(ProjectConfig {
        images: vec![triple(tmp.path())],
        no_prune: true,
        ..ProjectConfig::default()
    });
    let (status, body) = call(&app, "POST", "/api/sequence", r#"{"kind":"keyframe","keyframes":["a","b"]}"#).await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["order"], serde_json::json!(["a", "b"]));

    let (_, body) = call(&app, "POST", "/api/sequence", r#"{"kind":"path","start":"c"}"#).await;
    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["order"], serde_json::json!(["c", "b", "a"]));

    let (_, body) = call(&app, "POST", "/api/sequence", r#"{"kind":"cycle"}"#).await;
    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["order"], serde_json::json!(["a", "b", "c"]));

    for bad in [r#"{"kind":"keyframe","keyframes":["a","zz"]}"#, r#"{"kind":"orbit"}"#, "not json"] {
        let (status, body) = call(&app, "POST", "/api/sequence", bad).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
        let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
        assert_eq!(v["error"]["kind"], "contract");
    }
}

#[tokio::test]
async fn pruned_frames_are_only_sequenced_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let app = app(planted_config(tmp.path()));
    let (status, _) = call(&app, "POST", "/api/sequence", r#"{"kind":"keyframe","keyframes":["c00","zz"]}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) =
        call(&app, "POST", "/api/sequence", r#"{"kind":"keyframe","keyframes":["c00","zz"],"no_prune":true}"#).await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["order"].as_array().unwrap().last().unwrap(), "zz");
}

#[tokio::test]
async fn frame_images_are_served_verbatim() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = triple(tmp.path());
    let app = app(ProjectConfig {
        images: vec![dir.clone()],
        no_prune: true,
        ..ProjectConfig::default()
    });
    let (status, body) = call(&app, "GET", "/frames/b", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, std::fs::read(dir.join("b.png")).unwrap());
    let (status, _) = call(&app, "GET", "/frames/nope", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn reload_swaps_in_a_fresh_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = triple(tmp.path());
    let app = app(ProjectConfig {
        images: vec![dir.clone()],
        no_prune: true,
        ..ProjectConfig::default()
    });
    assert_eq!(get_json(&app, "/api/frames").await.as_array().unwrap().len(), 3);
    write_png(&dir.join("d.png"), 2, 2, |_, _| [90, 90, 90]);
    let (status, body) = call(&app, "POST", "/api/reload", "").await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let frames = get_json(&app, "/api/frames").await;
    assert_eq!(frames.as_array().unwrap().len(), 4);
    assert_eq!(get_json(&app, "/api/embedding").await["coords"].as_object().unwrap().len(), 4);
}
