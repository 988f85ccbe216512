//! HTTP client for remotely served models.
//!
//! Wire format: `POST {endpoint}` with body
//! `{"task": "chat"|"qa"|"paraphrase"|"seq2seq", "inputs": {...}, "config": {...}}`
//! and response `{"output": ..., "model": "..."}`. For `qa` the output is
//! `{"label": "yes"|"no", "confidence": float}`; for `paraphrase` it is a list
//! of strings (a bare string is accepted when one paraphrase was requested);
//! otherwise a string.

use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    BackendError, ChatBackend, DecodingConfig, ParaphraseBackend, QaAnswer, QaBackend, Seq2SeqBackend,
};
use crate::dialogue::Turn;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra attempts after the first one.
    pub retries: u32,
    /// Delay before the first retry; doubled on every further retry.
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 3,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RemoteBackend {
    name: String,
    endpoint: String,
    timeout: Duration,
    retry: RetryPolicy,
    default_decoding: DecodingConfig,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct RemoteResponse {
    output: Value,
    #[serde(default)]
    #[allow(dead_code)]
    model: Option<String>,
}

enum Failure {
    Retryable(String),
    Fatal(BackendError),
}

impl RemoteBackend {
    pub fn new(name: &str, endpoint: &str) -> Self {
        let timeout = Duration::from_secs(30);
        RemoteBackend {
            name: name.to_string(),
            endpoint: endpoint.to_string(),
            timeout,
            retry: RetryPolicy::default(),
            default_decoding: DecodingConfig::default(),
            agent: build_agent(timeout),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self.agent = build_agent(timeout);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_default_decoding(mut self, decoding: DecodingConfig) -> Self {
        self.default_decoding = decoding;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn call(&self, task: &str, inputs: Value, config: &DecodingConfig) -> Result<Value, BackendError> {
        let body = json!({ "task": task, "inputs": inputs, "config": config });
        let attempts = self.retry.retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.post_once(&body) {
                Ok(output) => return Ok(output),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(message)) => {
                    log::warn!(
                        "{}: attempt {attempt}/{attempts} against {} failed: {message}",
                        self.name,
                        self.endpoint
                    );
                    last = message;
                    if attempt < attempts {
                        thread::sleep(self.retry.backoff * 2u32.saturating_pow(attempt - 1));
                    }
                }
            }
        }
        Err(BackendError::Transport {
            endpoint: self.endpoint.clone(),
            attempts,
            message: last,
        })
    }

    fn post_once(&self, body: &Value) -> Result<Value, Failure> {
        let mut response = match self.agent.post(&self.endpoint).send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) => {
                return Err(Failure::Fatal(self.protocol(format!("HTTP status {code}"))))
            }
            Err(e) => return Err(Failure::Retryable(e.to_string())),
        };
        let parsed: RemoteResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Failure::Fatal(self.protocol(format!("malformed response: {e}"))))?;
        Ok(parsed.output)
    }

    fn protocol(&self, message: String) -> BackendError {
        BackendError::Protocol {
            backend: self.name.clone(),
            message,
        }
    }

    fn expect_string(&self, output: Value) -> Result<String, BackendError> {
        match output {
            Value::String(s) => Ok(s),
            other => Err(self.protocol(format!("expected a string output, got {other}"))),
        }
    }
}

fn build_agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::new_with_config(
        ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build(),
    )
}

impl ChatBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate_reply(
        &self,
        context: &[Turn],
        persona: &[String],
        config: &DecodingConfig,
    ) -> Result<String, BackendError> {
        let context: Vec<Value> = context
            .iter()
            .map(|t| json!({ "speaker": t.speaker, "text": t.text }))
            .collect();
        let output = self.call("chat", json!({ "context": context, "persona": persona }), config)?;
        self.expect_string(output)
    }
}

impl QaBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn answer(&self, context_text: &str, question: &str) -> Result<QaAnswer, BackendError> {
        let output = self.call(
            "qa",
            json!({ "context": context_text, "question": question }),
            &self.default_decoding,
        )?;
        serde_json::from_value(output).map_err(|e| self.protocol(format!("bad QA output: {e}")))
    }
}

impl ParaphraseBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate_paraphrases(&self, question: &str, n: usize) -> Result<Vec<String>, BackendError> {
        let output = self.call(
            "paraphrase",
            json!({ "question": question, "n": n }),
            &self.default_decoding,
        )?;
        match output {
            Value::String(s) => Ok(vec![s]),
            Value::Array(items) => items.into_iter().map(|v| self.expect_string(v)).collect(),
            other => Err(self.protocol(format!("bad paraphrase output: {other}"))),
        }
    }
}

impl Seq2SeqBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, source: &str, config: &DecodingConfig) -> Result<String, BackendError> {
        let output = self.call("seq2seq", json!({ "source": source }), config)?;
        self.expect_string(output)
    }
}
