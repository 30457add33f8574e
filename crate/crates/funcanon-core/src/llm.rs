//! Blocking chat-completion client shared by the recognition and
//! decomposition remote backends, plus the persistent response cache that
//! makes reruns deterministic and offline-replayable.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;
use thiserror::Error;

pub const URL_ENV: &str = "FUNCANON_VLM_URL";
pub const KEY_ENV: &str = "FUNCANON_VLM_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("remote endpoint not configured; set {URL_ENV}")]
    MissingEndpoint,
    #[error("backend unavailable after {attempts} attempts: {detail}")]
    Unavailable { attempts: u32, detail: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("cache I/O: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, LlmError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

/// Counting semaphore bounding concurrent remote requests.
#[derive(Debug)]
struct InFlightLimit {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlightLimit {
    fn new(max: usize) -> Self {
        InFlightLimit {
            max: max.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(self: &Arc<Self>) -> InFlightGuard {
        let mut active = self.active.lock().unwrap();
        while *active >= self.max {
            active = self.freed.wait(active).unwrap();
        }
        *active += 1;
        InFlightGuard {
            limit: Arc::clone(self),
        }
    }
}

struct InFlightGuard {
    limit: Arc<InFlightLimit>,
}

impl Drop for InFlightGuard {
    fn drop(&mut self) {
        let mut active = self.limit.active.lock().unwrap();
        *active -= 1;
        self.limit.freed.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct ChatClient {
    url: String,
    key: Option<String>,
    model: String,
    retries: u32,
    backoff: Duration,
    limit: Arc<InFlightLimit>,
    agent: ureq::Agent,
}

impl ChatClient {
    pub fn new(url: impl Into<String>, key: Option<String>, model: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        ChatClient {
            url: url.into(),
            key,
            model: model.into(),
            retries: 3,
            backoff: Duration::from_millis(250),
            limit: Arc::new(InFlightLimit::new(4)),
            agent,
        }
    }

    /// Endpoint from FUNCANON_VLM_URL (required) and FUNCANON_VLM_KEY
    /// (optional bearer token).
    pub fn from_env(model: impl Into<String>) -> Result<Self> {
        let url = std::env::var(URL_ENV).map_err(|_| LlmError::MissingEndpoint)?;
        let key = std::env::var(KEY_ENV).ok();
        Ok(ChatClient::new(url, key, model))
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.limit = Arc::new(InFlightLimit::new(max));
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    /// POST the chat request and return the first choice's message content.
    /// Timeouts, connection failures, and 5xx responses are retried with
    /// exponential backoff; anything else fails immediately.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let request = ChatRequest {
            model: self.model.clone(),
            messages: messages.to_vec(),
        };
        let _slot = self.limit.acquire();

        let attempts = self.retries + 1;
        let mut last_detail = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.post_once(&request) {
                Ok(content) => return Ok(content),
                Err(Retry::Transient(detail)) => last_detail = detail,
                Err(Retry::Fatal(err)) => return Err(err),
            }
        }
        Err(LlmError::Unavailable {
            attempts,
            detail: last_detail,
        })
    }

    fn post_once(&self, request: &ChatRequest) -> std::result::Result<String, Retry> {
        let mut call = self.agent.post(&self.url);
        if let Some(key) = &self.key {
            call = call.header("authorization", format!("Bearer {key}"));
        }
        let mut response = call.send_json(request).map_err(classify)?;
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Retry::Fatal(LlmError::Protocol(format!("bad response body: {e}"))))?;
        parsed
            .choices
            .first()
            .map(|c| c.message.content.clone())
            .ok_or_else(|| Retry::Fatal(LlmError::Protocol("response has no choices".into())))
    }
}

enum Retry {
    Transient(String),
    Fatal(LlmError),
}

fn classify(err: ureq::Error) -> Retry {
    match err {
        ureq::Error::StatusCode(code) if (500..=599).contains(&code) => {
            Retry::Transient(format!("server status {code}"))
        }
        ureq::Error::StatusCode(code) => {
            Retry::Fatal(LlmError::Protocol(format!("unexpected status {code}")))
        }
        ureq::Error::Timeout(_)
        | ureq::Error::Io(_)
        | ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound => Retry::Transient(err.to_string()),
        other => Retry::Fatal(LlmError::Protocol(other.to_string())),
    }
}

/// Stable content hash for cache keys: sha256 over the canonical JSON of the
/// keyed value.
pub fn cache_key<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("cache keys serialize");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    hex::encode(hasher.finalize())
}

/// String-to-string response store, optionally persisted as a JSON object.
/// Writes go through one mutex; the file is rewritten atomically on each put.
#[derive(Debug)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: Mutex<BTreeMap<String, String>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            path: None,
            entries: Mutex::new(BTreeMap::new()),
        }
    }

    /// Open a persistent cache; a missing file starts empty.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let entries = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| LlmError::Cache(format!("{}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(LlmError::Cache(format!("{}: {e}", path.display()))),
        };
        Ok(ResponseCache {
            path: Some(path),
            entries: Mutex::new(entries),
        })
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn put(&self, key: impl Into<String>, value: impl Into<String>) -> Result<()> {
        let mut entries = self.entries.lock().unwrap();
        entries.insert(key.into(), value.into());
        if let Some(path) = &self.path {
            let text = serde_json::to_string_pretty(&*entries)
                .map_err(|e| LlmError::Cache(e.to_string()))?;
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, text).map_err(|e| LlmError::Cache(e.to_string()))?;
            std::fs::rename(&tmp, path).map_err(|e| LlmError::Cache(e.to_string()))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// One-shot HTTP server answering each connection with the next canned
    /// (status, body) pair.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = vec![0u8; 65536];
                let mut total = 0;
                let request = loop {
                    let n = stream.read(&mut buf[total..]).unwrap();
                    total += n;
                    let text = String::from_utf8_lossy(&buf[..total]).into_owned();
                    if let Some(header_end) = text.find("\r\n\r\n") {
                        let content_length = text
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        if total >= header_end + 4 + content_length {
                            break text;
                        }
                    }
                    if n == 0 {
                        break text;
                    }
                };
                seen.push(request);
                let reason = if status == 200 { "OK" } else { "ERR" };
                let reply = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
            seen
        });
        (url, handle)
    }

    fn ok_body(content: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        })
        .to_string()
    }

    fn fast_client(url: &str) -> ChatClient {
        ChatClient::new(url, Some("test-key".into()), "test-model")
            .with_backoff(Duration::from_millis(1))
    }

    #[test]
    fn returns_first_choice_content() {
        let (url, server) = serve(vec![(200, ok_body("True"))]);
        let reply = fast_client(&url)
            .complete(&[ChatMessage::user("is it?")])
            .unwrap();
        assert_eq!(reply, "True");
        let requests = server.join().unwrap();
        assert!(requests[0].contains("authorization: Bearer test-key"));
        let body = requests[0].split("\r\n\r\n").nth(1).unwrap();
        let parsed: ChatRequest = serde_json::from_str(body).unwrap();
        assert_eq!(parsed.model, "test-model");
        assert_eq!(parsed.messages, vec![ChatMessage::user("is it?")]);
    }

    #[test]
    fn retries_transient_errors_then_succeeds() {
        let (url, server) = serve(vec![
            (500, "{}".into()),
            (503, "{}".into()),
            (200, ok_body("False")),
        ]);
        let reply = fast_client(&url)
            .complete(&[ChatMessage::user("q")])
            .unwrap();
        assert_eq!(reply, "False");
        assert_eq!(server.join().unwrap().len(), 3);
    }

    #[test]
    fn unavailable_after_exhausting_retries() {
        let (url, server) = serve(vec![(500, "{}".into()); 4]);
        let err = fast_client(&url)
            .complete(&[ChatMessage::user("q")])
            .unwrap_err();
        assert!(matches!(err, LlmError::Unavailable { attempts: 4, .. }));
        assert_eq!(server.join().unwrap().len(), 4);
    }

    #[test]
    fn client_error_status_is_fatal() {
        let (url, server) = serve(vec![(401, "{}".into())]);
        let err = fast_client(&url)
            .complete(&[ChatMessage::user("q")])
            .unwrap_err();
        assert!(matches!(err, LlmError::Protocol(_)));
        assert_eq!(server.join().unwrap().len(), 1);
    }

    #[test]
    fn unparseable_reply_is_protocol_error() {
        let (url, server) = serve(vec![(200, "not json".into())]);
        let err = fast_client(&url)
            .complete(&[ChatMessage::user("q")])
            .unwrap_err();
        assert!(matches!(err, LlmError::Protocol(_)));
        server.join().unwrap();
    }

    #[test]
    fn request_json_round_trips() {
        let request = ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage::system("s"), ChatMessage::user("u")],
        };
        let text = serde_json::to_string(&request).unwrap();
        let back: ChatRequest = serde_json::from_str(&text).unwrap();
        assert_eq!(request, back);
    }

    #[test]
    fn missing_endpoint_env_errors() {
        assert!(std::env::var(URL_ENV).is_err(), "test requires unset env");
        assert!(matches!(
            ChatClient::from_env("m"),
            Err(LlmError::MissingEndpoint)
        ));
    }

    #[test]
    fn cache_key_is_stable_and_content_sensitive() {
        let a = cache_key(&("mug", "grasp", "active"));
        let b = cache_key(&("mug", "grasp", "active"));
        let c = cache_key(&("mug", "pour", "active"));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn cache_persists_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let cache = ResponseCache::open(&path).unwrap();
        assert!(cache.is_empty());
        cache.put("k1", "True").unwrap();
        cache.put("k2", "False").unwrap();

        let reopened = ResponseCache::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
        assert_eq!(reopened.get("k1").as_deref(), Some("True"));
        assert_eq!(reopened.get("k2").as_deref(), Some("False"));
        assert_eq!(reopened.get("k3"), None);
    }

    #[test]
    fn in_flight_limit_blocks_third_acquire() {
        let limit = Arc::new(InFlightLimit::new(2));
        let g1 = limit.acquire();
        let _g2 = limit.acquire();

        let entered = Arc::new(AtomicUsize::new(0));
        let entered_clone = Arc::clone(&entered);
        let limit_clone = Arc::clone(&limit);
        let waiter = std::thread::spawn(move || {
            let _g3 = limit_clone.acquire();
            entered_clone.store(1, Ordering::SeqCst);
        });
        std::thread::sleep(Duration::from_millis(50));
        assert_eq!(entered.load(Ordering::SeqCst), 0, "third slot must wait");
        drop(g1);
        waiter.join().unwrap();
        assert_eq!(entered.load(Ordering::SeqCst), 1);
    }
}
