//! HTTP transport and a scriptable in-process double.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Form(Vec<(String, String)>),
    Json(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpRequest {
    pub url: String,
    pub body: Body,
    pub bearer: Option<String>,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

pub trait Transport: Send + Sync {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<ReqwestTransport> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| Error::provider("http", e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse> {
        let mut rb = self.client.post(&request.url).timeout(request.timeout);
        if let Some(token) = &request.bearer {
            rb = rb.bearer_auth(token);
        }
        rb = match &request.body {
            Body::Form(fields) => rb.form(fields),
            Body::Json(v) => rb.json(v),
        };
        let resp = rb
            .send()
            .map_err(|e| Error::provider(request.url.clone(), e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .text()
            .map_err(|e| Error::provider(request.url.clone(), e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

type Handler = Box<dyn Fn(&HttpRequest) -> Result<HttpResponse> + Send + Sync>;

/// Answers requests with a closure and counts every call.
pub struct MockTransport {
    handler: Handler,
    calls: AtomicUsize,
    log: Mutex<Vec<HttpRequest>>,
}

impl MockTransport {
    pub fn new(handler: impl Fn(&HttpRequest) -> Result<HttpResponse> + Send + Sync + 'static) -> Self {
        MockTransport {
            handler: Box::new(handler),
            calls: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Always answers 200 with `body`.
    pub fn fixed(body: impl Into<String>) -> Self {
        let body = body.into();
        Self::new(move |_| {
            Ok(HttpResponse {
                status: 200,
                body: body.clone(),
            })
        })
    }

    /// Fails every request, as if the network were down.
    pub fn offline() -> Self {
        Self::new(|r| Err(Error::provider(r.url.clone(), "network disabled")))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<HttpRequest> {
        self.log.lock().expect("log lock").clone()
    }
}

impl Transport for MockTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().expect("log lock").push(request.clone());
        (self.handler)(request)
    }
}
