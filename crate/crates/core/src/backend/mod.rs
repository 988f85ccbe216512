//! Contracts through which the neural models are reached.
//!
//! Four capabilities are needed: open-domain chat replies, yes/no question
//! answering, question paraphrasing and sequence-to-sequence generation. Each
//! is a trait with a required raw method and a provided, contract-checking
//! wrapper that callers use. Deterministic mocks live in [`mock`], the HTTP
//! client in [`remote`].

pub mod mock;
pub mod remote;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::Turn;
use crate::text::normalize_whitespace;

pub use mock::{MockChat, MockParaphrase, MockQa, MockSeq2Seq, QaRule, ScriptedChat};
pub use remote::{RemoteBackend, RetryPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transport error talking to {endpoint} after {attempts} attempt(s): {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },
    #[error("backend {backend} produced an empty generation")]
    EmptyGeneration { backend: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("backend {backend} broke its contract: {message}")]
    Protocol { backend: String, message: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

/// Sampling parameters for generative backends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodingConfig {
    pub top_k: u32,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub seed: u64,
}

impl DecodingConfig {
    /// Decoding used for transition generation: top-k 80 mixed with
    /// nucleus sampling at 0.95.
    pub fn transition() -> Self {
        DecodingConfig {
            top_k: 80,
            top_p: 0.95,
            max_new_tokens: 64,
            seed: 0,
        }
    }

    /// Decoding used by the task-oriented simulators: plain top-k with k = 120.
    pub fn simulator() -> Self {
        DecodingConfig {
            top_k: 120,
            top_p: 1.0,
            max_new_tokens: 64,
            seed: 0,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DecodingConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.top_k < 1 {
            return Err(BackendError::Config("top_k must be >= 1".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::Config(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.max_new_tokens < 1 {
            return Err(BackendError::Config("max_new_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig::transition()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QaLabel {
    Yes,
    No,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaAnswer {
    pub label: QaLabel,
    pub confidence: f64,
}

impl QaAnswer {
    pub fn yes(confidence: f64) -> Self {
        QaAnswer {
            label: QaLabel::Yes,
            confidence,
        }
    }

    pub fn no(confidence: f64) -> Self {
        QaAnswer {
            label: QaLabel::No,
            confidence,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;

    fn generate_reply(
        &self,
        context: &[Turn],
        persona: &[String],
        config: &DecodingConfig,
    ) -> Result<String, BackendError>;

    /// Produce the next utterance given the conversation so far and the
    /// speaker's persona.
    fn chat_reply(
        &self,
        context: &[Turn],
        persona: &[String],
        config: &DecodingConfig,
    ) -> Result<String, BackendError> {
        if context.is_empty() && persona.is_empty() {
            return Err(BackendError::Precondition(
                "chat_reply needs a context or a persona".into(),
            ));
        }
        config.validate()?;
        non_empty(self.name(), self.generate_reply(context, persona, config)?)
    }
}

pub trait QaBackend: Send + Sync {
    fn name(&self) -> &str;

    fn answer(&self, context_text: &str, question: &str) -> Result<QaAnswer, BackendError>;

    /// Answer a yes/no question about a dialogue context.
    fn answer_question(&self, context_text: &str, question: &str) -> Result<QaAnswer, BackendError> {
        if context_text.trim().is_empty() {
            return Err(BackendError::Precondition("QA context is empty".into()));
        }
        if question.trim().is_empty() {
            return Err(BackendError::Precondition("QA question is empty".into()));
        }
        let answer = self.answer(context_text, question)?;
        if !(0.0..=1.0).contains(&answer.confidence) {
            return Err(BackendError::Protocol {
                backend: self.name().to_string(),
                message: format!("confidence {} outside [0, 1]", answer.confidence),
            });
        }
        Ok(answer)
    }
}

pub trait ParaphraseBackend: Send + Sync {
    fn name(&self) -> &str;

    fn generate_paraphrases(&self, question: &str, n: usize) -> Result<Vec<String>, BackendError>;

    /// Return exactly `n` rephrasings of `question`.
    fn paraphrase(&self, question: &str, n: usize) -> Result<Vec<String>, BackendError> {
        if question.trim().is_empty() {
            return Err(BackendError::Precondition(
                "question to paraphrase is empty".into(),
            ));
        }
        if n == 0 {
            return Err(BackendError::Precondition(
                "paraphrase count must be positive".into(),
            ));
        }
        let outputs = self.generate_paraphrases(question, n)?;
        if outputs.len() != n {
            return Err(BackendError::Protocol {
                backend: self.name().to_string(),
                message: format!("asked for {n} paraphrases, got {}", outputs.len()),
            });
        }
        outputs.into_iter().map(|p| non_empty(self.name(), p)).collect()
    }
}

pub trait Seq2SeqBackend: Send + Sync {
    fn name(&self) -> &str;

    fn generate(&self, source: &str, config: &DecodingConfig) -> Result<String, BackendError>;

    fn seq2seq_generate(&self, source: &str, config: &DecodingConfig) -> Result<String, BackendError> {
        if source.trim().is_empty() {
            return Err(BackendError::Precondition("seq2seq source is empty".into()));
        }
        config.validate()?;
        non_empty(self.name(), self.generate(source, config)?)
    }
}

fn non_empty(backend: &str, text: String) -> Result<String, BackendError> {
    let text = normalize_whitespace(&text);
    if text.is_empty() {
        Err(BackendError::EmptyGeneration {
            backend: backend.to_string(),
        })
    } else {
        Ok(text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Chat,
    Qa,
    Paraphrase,
    Seq2seq,
}

/// How to reach one model: a remote endpoint or a mock (built-in or loaded
/// from a script file).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub name: String,
    /// Mock script file. Ignored when `endpoint` is set; when both are
    /// absent the built-in mock for `kind` is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_script: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default)]
    pub decoding: DecodingConfig,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    200
}

impl BackendDescriptor {
    pub fn mock(kind: BackendKind, name: &str) -> Self {
        BackendDescriptor {
            kind,
            name: name.to_string(),
            mock_script: None,
            endpoint: None,
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            decoding: DecodingConfig::default(),
        }
    }

    pub fn with_decoding(mut self, decoding: DecodingConfig) -> Self {
        self.decoding = decoding;
        self
    }

    pub fn validate(&self, expected: BackendKind) -> Result<(), BackendError> {
        if self.kind != expected {
            return Err(BackendError::Config(format!(
                "backend {} has kind {:?}, expected {:?}",
                self.name, self.kind, expected
            )));
        }
        if self.name.trim().is_empty() {
            return Err(BackendError::Config("backend name is empty".into()));
        }
        if let Some(endpoint) = &self.endpoint {
            if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
                return Err(BackendError::Config(format!(
                    "backend {} endpoint must be an http(s) URL, got {endpoint}",
                    self.name
                )));
            }
        }
        self.decoding.validate()
    }

    fn remote(&self) -> Option<RemoteBackend> {
        self.endpoint.as_ref().map(|endpoint| {
            RemoteBackend::new(&self.name, endpoint)
                .with_timeout(Duration::from_millis(self.timeout_ms))
                .with_retry(RetryPolicy {
                    retries: self.retries,
                    backoff: Duration::from_millis(self.backoff_ms),
                })
                .with_default_decoding(self.decoding.clone())
        })
    }

    pub fn build_chat(&self) -> Result<Arc<dyn ChatBackend>, BackendError> {
        self.build_chat_or(MockChat::chitchat)
    }

    /// Like [`build_chat`](Self::build_chat) with a different built-in mock.
    pub fn build_chat_or(&self, builtin: fn(&str) -> MockChat) -> Result<Arc<dyn ChatBackend>, BackendError> {
        self.validate(BackendKind::Chat)?;
        if let Some(remote) = self.remote() {
            return Ok(Arc::new(remote));
        }
        Ok(match &self.mock_script {
            Some(path) => mock::load_chat_script(&self.name, path)?,
            None => Arc::new(builtin(&self.name)),
        })
    }

    pub fn build_qa(&self) -> Result<Arc<dyn QaBackend>, BackendError> {
        self.validate(BackendKind::Qa)?;
        if let Some(remote) = self.remote() {
            return Ok(Arc::new(remote));
        }
        Ok(match &self.mock_script {
            Some(path) => Arc::new(MockQa::from_script(&self.name, path)?),
            None => Arc::new(MockQa::keyword_table(&self.name)),
        })
    }

    pub fn build_paraphrase(&self) -> Result<Arc<dyn ParaphraseBackend>, BackendError> {
        self.validate(BackendKind::Paraphrase)?;
        if let Some(remote) = self.remote() {
            return Ok(Arc::new(remote));
        }
        Ok(Arc::new(MockParaphrase::new(&self.name)))
    }

    pub fn build_seq2seq(&self) -> Result<Arc<dyn Seq2SeqBackend>, BackendError> {
        self.validate(BackendKind::Seq2seq)?;
        if let Some(remote) = self.remote() {
            return Ok(Arc::new(remote));
        }
        Ok(match &self.mock_script {
            Some(path) => Arc::new(MockSeq2Seq::from_script(&self.name, path)?),
            None => Arc::new(MockSeq2Seq::transitions(&self.name)),
        })
    }
}
