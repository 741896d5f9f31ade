//! How request bodies reach a chat-completion endpoint: over HTTP, or from a
//! transcript of earlier exchanges.

use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use reqwest::Url;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::LlmError;

/// Status and body of one HTTP exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawResponse {
    pub status: u16,
    pub body: String,
}

pub trait ChatTransport: Send + Sync {
    fn post(&self, request: &Value) -> Result<RawResponse, LlmError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: Url,
    api_key: String,
}

impl HttpTransport {
    pub fn new(base_url: &Url, api_key: &str, timeout: Duration) -> Result<Self, LlmError> {
        let mut base = base_url.clone();
        if !base.path().ends_with('/') {
            base.set_path(&format!("{}/", base.path()));
        }
        let endpoint = base
            .join("chat/completions")
            .map_err(|e| LlmError::Config(format!("bad base URL {base_url}: {e}")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Config(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpTransport { client, endpoint, api_key: api_key.to_string() })
    }

    pub fn endpoint(&self) -> &Url {
        &self.endpoint
    }
}

impl ChatTransport for HttpTransport {
    fn post(&self, request: &Value) -> Result<RawResponse, LlmError> {
        let classify = |e: reqwest::Error| {
            if e.is_timeout() {
                LlmError::Timeout
            } else {
                LlmError::Transport(e.to_string())
            }
        };
        let response = self
            .client
            .post(self.endpoint.clone())
            .bearer_auth(&self.api_key)
            .json(request)
            .send()
            .map_err(classify)?;
        let status = response.status().as_u16();
        let body = response.text().map_err(classify)?;
        Ok(RawResponse { status, body })
    }
}

/// One recorded request/response pair. Bodies that are JSON are stored as
/// JSON; anything else as a string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: Value,
    pub status: u16,
    pub body: Value,
}

impl Exchange {
    fn new(request: &Value, response: &RawResponse) -> Self {
        let body = serde_json::from_str(&response.body)
            .unwrap_or_else(|_| Value::String(response.body.clone()));
        Exchange { request: request.clone(), status: response.status, body }
    }

    fn raw(&self) -> RawResponse {
        let body = match &self.body {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        RawResponse { status: self.status, body }
    }
}

pub fn load_transcript(path: &Path) -> Result<Vec<Exchange>, LlmError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LlmError::Replay(format!("cannot read transcript {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| LlmError::Replay(format!("malformed transcript {}: {e}", path.display())))
}

pub fn save_transcript(path: &Path, exchanges: &[Exchange]) -> Result<(), LlmError> {
    let mut text = serde_json::to_string_pretty(exchanges).expect("transcripts always serialize");
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| LlmError::Replay(format!("cannot write transcript {}: {e}", path.display())))
}

/// Passes requests through and keeps every exchange that got a response.
pub struct RecordingTransport<T> {
    inner: T,
    log: Mutex<Vec<Exchange>>,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport { inner, log: Mutex::new(Vec::new()) }
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.log.lock().unwrap().clone()
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        save_transcript(path, &self.exchanges())
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn post(&self, request: &Value) -> Result<RawResponse, LlmError> {
        let response = self.inner.post(request)?;
        self.log.lock().unwrap().push(Exchange::new(request, &response));
        Ok(response)
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for std::sync::Arc<T> {
    fn post(&self, request: &Value) -> Result<RawResponse, LlmError> {
        (**self).post(request)
    }
}

/// Answers from a transcript without touching the network. A request is
/// matched to the first unused exchange with an identical request body, so
/// repeated identical requests replay in recorded order.
pub struct ReplayTransport {
    exchanges: Vec<Exchange>,
    used: Mutex<Vec<bool>>,
}

impl ReplayTransport {
    pub fn new(exchanges: Vec<Exchange>) -> Self {
        let used = Mutex::new(vec![false; exchanges.len()]);
        ReplayTransport { exchanges, used }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Ok(ReplayTransport::new(load_transcript(path)?))
    }

    pub fn remaining(&self) -> usize {
        self.used.lock().unwrap().iter().filter(|u| !**u).count()
    }
}

impl ChatTransport for ReplayTransport {
    fn post(&self, request: &Value) -> Result<RawResponse, LlmError> {
        let mut used = self.used.lock().unwrap();
        let hit = self
            .exchanges
            .iter()
            .enumerate()
            .position(|(i, e)| !used[i] && &e.request == request);
        match hit {
            Some(i) => {
                used[i] = true;
                Ok(self.exchanges[i].raw())
            }
            None => Err(LlmError::Replay(format!(
                "no unused recorded exchange matches request {}",
                truncate(&request.to_string(), 200)
            ))),
        }
    }
}

pub(crate) fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}
