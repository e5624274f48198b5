#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tagmill_core::clock::SteppingClock;
use tagmill_core::model::AnnotatorKind;
use tagmill_core::{Platform, StoreOptions};
use tagmill_server::{app, AppState, Role, TokenEntry};
use tower::ServiceExt;

pub const MANAGER: &str = "mgr-token";

pub fn annotator_token(i: usize) -> String {
    format!("ann{i}-token")
}

pub fn tokens(annotators: usize) -> Vec<TokenEntry> {
    let mut out = vec![TokenEntry {
        token: MANAGER.into(),
        id: "mgr".into(),
        display_name: Some("Manager".into()),
        kind: AnnotatorKind::Human,
        role: Role::Manager,
    }];
    for i in 0..annotators {
        out.push(TokenEntry {
            token: annotator_token(i),
            id: format!("ann{i}"),
            display_name: None,
            kind: AnnotatorKind::Human,
            role: Role::Annotator,
        });
    }
    out
}

pub struct Client {
    pub platform: Arc<Platform>,
    pub router: Router,
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("not JSON ({e}): {}", self.text))
    }
}

impl Client {
    /// A server over a deterministic in-memory store with a manager and
    /// `annotators` annotator tokens.
    pub fn new(annotators: usize) -> Self {
        let platform = Arc::new(
            Platform::in_memory(StoreOptions {
                id_seed: Some(7),
                clock: Some(Arc::new(SteppingClock::new(1_767_225_600_000, 1_000))),
            })
            .unwrap(),
        );
        let state = AppState::new(platform.clone(), &tokens(annotators)).unwrap();
        Self { platform, router: app(state) }
    }

    pub async fn raw(&self, method: Method, path: &str, token: Option<&str>, body: Option<String>) -> Reply {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let body = match body {
            Some(b) => {
                req = req.header("content-type", "application/json");
                Body::from(b)
            }
            None => Body::empty(),
        };
        let resp = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let content_type = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        Reply { status, content_type, text: String::from_utf8(bytes.to_vec()).unwrap() }
    }

    pub async fn get(&self, path: &str, token: &str) -> Reply {
        self.raw(Method::GET, path, Some(token), None).await
    }

    pub async fn post(&self, path: &str, token: &str, body: Value) -> Reply {
        self.raw(Method::POST, path, Some(token), Some(body.to_string())).await
    }

    pub async fn post_text(&self, path: &str, token: &str, body: String) -> Reply {
        self.raw(Method::POST, path, Some(token), Some(body)).await
    }

    pub async fn delete(&self, path: &str, token: &str) -> Reply {
        self.raw(Method::DELETE, path, Some(token), None).await
    }

    /// POST that must answer with `expected`; returns the JSON body.
    pub async fn ok(&self, path: &str, token: &str, body: Value, expected: StatusCode) -> Value {
        let r = self.post(path, token, body).await;
        assert_eq!(r.status, expected, "POST {path}: {}", r.text);
        if r.text.is_empty() {
            Value::Null
        } else {
            r.json()
        }
    }

    pub async fn get_ok(&self, path: &str, token: &str) -> Value {
        let r = self.get(path, token).await;
        assert_eq!(r.status, StatusCode::OK, "GET {path}: {}", r.text);
        r.json()
    }
}

pub fn s(v: &Value) -> String {
    v.as_str().unwrap_or_else(|| panic!("not a string: {v}")).to_string()
}
