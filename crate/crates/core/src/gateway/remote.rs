//! OpenAI-compatible HTTP client used by the remote completion provider and
//! the remote embedder.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

pub const API_KEY_ENV: &str = "LAKESCOPE_API_KEY";

/// Outcome of a single failed HTTP attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttemptError {
    /// Worth retrying: connection failures, timeouts, 429 and 5xx.
    Transient(String),
    Fatal(String),
}

#[derive(Debug, Clone)]
pub struct OpenAiClient {
    client: Client,
    base: String,
    model: String,
    api_key: Option<String>,
}

impl OpenAiClient {
    pub fn new(endpoint: &str, model: &str, timeout: Duration) -> Result<Self, String> {
        let client = Client::builder()
            .timeout(timeout)
            .connect_timeout(timeout)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self {
            client,
            base: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        })
    }

    fn url(&self, suffix: &str) -> String {
        if self.base.ends_with(suffix) {
            self.base.clone()
        } else {
            format!("{}{suffix}", self.base)
        }
    }

    fn post(&self, url: &str, body: &Value) -> Result<Value, AttemptError> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| AttemptError::Transient(format!("request to {url} failed: {e}")))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            let msg = format!("{url} answered {status}: {}", text.chars().take(200).collect::<String>());
            return Err(if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
                AttemptError::Transient(msg)
            } else {
                AttemptError::Fatal(msg)
            });
        }
        resp.json::<Value>()
            .map_err(|e| AttemptError::Transient(format!("undecodable response from {url}: {e}")))
    }

    pub fn chat(&self, prompt: &str) -> Result<String, AttemptError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let value = self.post(&self.url("/chat/completions"), &body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| AttemptError::Fatal("chat response has no choices[0].message.content".into()))
    }

    pub fn embeddings(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, AttemptError> {
        let body = json!({ "model": self.model, "input": texts });
        let value = self.post(&self.url("/embeddings"), &body)?;
        let data = value["data"]
            .as_array()
            .ok_or_else(|| AttemptError::Fatal("embedding response has no data array".into()))?;
        let mut rows: Vec<(u64, Vec<f64>)> = Vec::with_capacity(data.len());
        for (pos, item) in data.iter().enumerate() {
            let index = item["index"].as_u64().unwrap_or(pos as u64);
            let vector = item["embedding"]
                .as_array()
                .ok_or_else(|| AttemptError::Fatal("embedding item without vector".into()))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| AttemptError::Fatal("non-numeric embedding".into())))
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push((index, vector));
        }
        rows.sort_by_key(|(i, _)| *i);
        if rows.len() != texts.len() {
            return Err(AttemptError::Fatal(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                rows.len()
            )));
        }
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}
