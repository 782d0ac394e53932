#![allow(dead_code)]

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

/// Three groups of `per` rows in `A1..A5`, three linked columns following
/// the group, an extra column and a flag.
pub fn fixture_csv(per: usize) -> String {
    let mut out = String::from("A1,A2,A3,A4,A5,X1,X2,X3,Z1,grp\n");
    for c in 0..3 {
        for i in 0..per {
            let t = (c * per + i) as f64;
            let jitter = |k: f64| ((t + 1.0) * k).sin() * 0.4;
            let a: Vec<String> = (0..5)
                .map(|j| {
                    let centre = if j % 3 == c { 5.0 } else { 0.0 };
                    format!("{}", centre + jitter(1.3 + j as f64))
                })
                .collect();
            let x: Vec<String> = (0..3).map(|j| format!("{}", c as f64 * (j + 1) as f64 + jitter(0.7 + j as f64))).collect();
            let flag = if i % 2 == 0 { "on" } else { "off" };
            out.push_str(&format!("{},{},{},{flag}\n", a.join(","), x.join(","), jitter(2.9) * 5.0));
        }
    }
    out
}

pub fn roles() -> Value {
    json!({"clustering": ["A1", "A2", "A3", "A4", "A5"], "linked": ["X1", "X2", "X3"], "flags": ["grp"]})
}

pub struct Client {
    pub app: Router,
}

impl Client {
    pub async fn send(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()))
        };
        (status, value)
    }

    pub async fn raw(&self, method: Method, uri: &str, content_type: &str, body: String) -> (StatusCode, String) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", content_type)
            .body(Body::from(body))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.send(Method::GET, uri, None).await
    }

    /// New session with the fixture uploaded.
    pub async fn loaded_session(&self, per: usize) -> String {
        let (status, body) = self.send(Method::POST, "/sessions", None).await;
        assert_eq!(status, StatusCode::CREATED);
        let id = body["id"].as_str().unwrap().to_string();
        let upload = json!({"csv": fixture_csv(per), "roles": roles()});
        let (status, body) = self.send(Method::POST, &format!("/sessions/{id}/data"), Some(upload)).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        id
    }

    /// Polls a job until it finishes.
    pub async fn wait_job(&self, session: &str, job: &str) -> Value {
        let (status, body) = self.get(&format!("/sessions/{session}/jobs/{job}?wait=60")).await;
        assert_eq!(status, StatusCode::OK);
        body
    }
}

/// Reads server-sent events from a streaming body until `n` data lines
/// have arrived.
pub async fn read_events(body: &mut Body, n: usize) -> Vec<(String, Value)> {
    let mut events = Vec::new();
    let mut buf = String::new();
    while events.len() < n {
        let frame = tokio::time::timeout(std::time::Duration::from_secs(10), body.frame())
            .await
            .expect("event arrives")
            .expect("stream open")
            .unwrap();
        if let Ok(data) = frame.into_data() {
            buf.push_str(std::str::from_utf8(&data).unwrap());
        }
        while let Some(end) = buf.find("\n\n") {
            let block: String = buf.drain(..end + 2).collect();
            let mut name = String::new();
            let mut data = String::new();
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("event:") {
                    name = v.trim().to_string();
                } else if let Some(v) = line.strip_prefix("data:") {
                    data.push_str(v.trim());
                }
            }
            if !data.is_empty() {
                events.push((name, serde_json::from_str(&data).unwrap()));
            }
        }
    }
    events
}
