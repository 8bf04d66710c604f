//! Completion providers.
//!
//! The HTTP contract is a single POST with body
//! `{"prompt": "...", "max_tokens": N}` answered by `{"text": "..."}`.
//! Decoding settings are left to the server.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::render::{context_lines, line_field};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub qid: u64,
    pub prompt: String,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("bad provider response: {0}")]
    BadResponse(String),
}

pub trait Provider: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError>;
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

pub struct HttpProvider {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(url: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            url: url.into(),
            token,
            agent,
        }
    }
}

impl Provider for HttpProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        let mut call = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            call = call.header("Authorization", &format!("Bearer {t}"));
        }
        let body = WireRequest {
            prompt: &req.prompt,
            max_tokens: req.max_tokens,
        };
        let mut resp = call
            .send_json(&body)
            .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
        let parsed: WireResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        Ok(parsed.text)
    }
}

/// Answers every query with its gold label.
pub struct EchoGold {
    pub gold: HashMap<u64, String>,
}

impl Provider for EchoGold {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        self.gold
            .get(&req.qid)
            .cloned()
            .ok_or_else(|| ProviderError::BadResponse(format!("no gold for qid {}", req.qid)))
    }
}

pub struct Constant(pub String);

impl Provider for Constant {
    fn complete(&self, _: &CompletionRequest) -> Result<String, ProviderError> {
        Ok(self.0.clone())
    }
}

/// Reads the relation labels back out of the prompt's context lines and
/// answers with the most frequent one, ties going to the latest. An empty
/// history yields an empty answer.
pub struct FrequencyStub;

impl Provider for FrequencyStub {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        let lines = context_lines(&req.prompt)
            .ok_or_else(|| ProviderError::BadResponse("prompt has no context section".into()))?;
        let mut tally: HashMap<&str, (usize, usize)> = HashMap::new();
        for (i, line) in lines.iter().enumerate() {
            let r = line_field(line, "relation")
                .ok_or_else(|| ProviderError::BadResponse(format!("no relation in {line:?}")))?;
            let e = tally.entry(r).or_insert((0, 0));
            e.0 += 1;
            e.1 = i;
        }
        Ok(tally
            .into_iter()
            .max_by_key(|&(_, k)| k)
            .map(|(r, _)| r.to_string())
            .unwrap_or_default())
    }
}

pub struct FnProvider<F>(pub F);

impl<F> Provider for FnProvider<F>
where
    F: Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync,
{
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        (self.0)(req)
    }
}

pub struct Failing;

impl Provider for Failing {
    fn complete(&self, _: &CompletionRequest) -> Result<String, ProviderError> {
        Err(ProviderError::Unavailable("always failing".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// One-shot HTTP server; returns the raw request it saw.
    fn serve_once(status: &'static str, body: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/complete", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            write!(
                stream,
                "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            head + &String::from_utf8(buf).unwrap()
        });
        (url, handle)
    }

    #[test]
    fn http_roundtrip() {
        let (url, server) = serve_once("200 OK", r#"{"text":"protest (strike)"}"#);
        let p = HttpProvider::new(url, Some("tok".into()), Duration::from_secs(5));
        let req = CompletionRequest {
            qid: 1,
            prompt: "hello".into(),
            max_tokens: 14,
        };
        assert_eq!(p.complete(&req).unwrap(), "protest (strike)");
        let seen = server.join().unwrap();
        assert!(seen.starts_with("POST /complete"));
        assert!(seen.to_ascii_lowercase().contains("authorization: bearer tok"));
        let body: serde_json::Value = serde_json::from_str(seen.split("\r\n\r\n").nth(1).unwrap()).unwrap();
        assert_eq!(body, serde_json::json!({"prompt": "hello", "max_tokens": 14}));
    }

    #[test]
    fn http_server_error() {
        let (url, server) = serve_once("503 Service Unavailable", "{}");
        let p = HttpProvider::new(url, None, Duration::from_secs(5));
        let req = CompletionRequest {
            qid: 1,
            prompt: "x".into(),
            max_tokens: 1,
        };
        assert!(matches!(p.complete(&req), Err(ProviderError::Unavailable(_))));
        server.join().unwrap();
    }

    #[test]
    fn http_bad_body() {
        let (url, server) = serve_once("200 OK", r#"{"answer":"x"}"#);
        let p = HttpProvider::new(url, None, Duration::from_secs(5));
        let req = CompletionRequest {
            qid: 1,
            prompt: "x".into(),
            max_tokens: 1,
        };
        assert!(matches!(p.complete(&req), Err(ProviderError::BadResponse(_))));
        server.join().unwrap();
    }

    #[test]
    fn frequency_stub_reads_context() {
        let prompt = "Here are the historical events to analyze:\n\
            time: 2020-01-01 | actors: [A] | relation: b | recipients: [] | qualifiers: []\n\
            time: 2020-01-02 | actors: [A] | relation: a | recipients: [] | qualifiers: []\n\
            \nHere is the new event to classify:\nx";
        let req = CompletionRequest {
            qid: 0,
            prompt: prompt.into(),
            max_tokens: 14,
        };
        assert_eq!(FrequencyStub.complete(&req).unwrap(), "a");
        let empty = CompletionRequest {
            prompt: "Here are the historical events to analyze:\n\n\nHere is the new event to classify:\n".into(),
            ..req
        };
        assert_eq!(FrequencyStub.complete(&empty).unwrap(), "");
    }
}
