#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use lakescope::cli::{ingest_request, sql_files};
use lakescope::views::IngestRequest;
use lakescope::{Service, ServiceOptions};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn requests(dir: &str) -> Vec<IngestRequest> {
    sql_files(&fixtures().join(dir))
        .unwrap()
        .iter()
        .map(|f| ingest_request(f).unwrap())
        .collect()
}

pub fn open(dir: &Path) -> Arc<Service> {
    Service::open(ServiceOptions::new(dir).offline()).unwrap()
}

pub fn small_store(dir: &Path) -> Arc<Service> {
    let svc = open(dir);
    svc.ingest(requests("small")).unwrap();
    svc
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

/// Polls GET /jobs/{id} until the job leaves pending/running.
pub async fn wait_for_job(app: &Router, id: &str) -> Value {
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let (status, job) = call(app, "GET", &format!("/jobs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK, "{job}");
        if job["state"] == "done" || job["state"] == "failed" {
            return job;
        }
        assert!(Instant::now() < deadline, "job {id} did not finish");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

/// A shell wrapper that runs `exe` with extra environment variables.
pub fn wrapper(dir: &Path, name: &str, exe: &str, env: &[(&str, &str)]) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let vars: String = env.iter().map(|(k, v)| format!("{k}={v} ")).collect();
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{vars}exec {exe} \"$@\"\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}
