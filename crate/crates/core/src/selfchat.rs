//! Persona-conditioned open-domain self-chat between a user agent and a
//! sales agent.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, DecodingConfig};
use crate::dialogue::{Phase, Speaker, Turn};
use crate::text::normalize_whitespace;

pub const MAX_PERSONA_SENTENCES: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Persona {
    pub sentences: Vec<String>,
    pub role: Speaker,
}

impl Persona {
    pub fn new(role: Speaker, sentences: Vec<String>) -> Result<Persona, SelfChatError> {
        let sentences: Vec<String> = sentences
            .iter()
            .map(|s| normalize_whitespace(s))
            .filter(|s| !s.is_empty())
            .collect();
        if sentences.is_empty() || sentences.len() > MAX_PERSONA_SENTENCES {
            return Err(SelfChatError::Persona(format!(
                "a persona needs 1 to {MAX_PERSONA_SENTENCES} sentences, got {}",
                sentences.len()
            )));
        }
        Ok(Persona { sentences, role })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelfChatConfig {
    pub max_chitchat_turns: usize,
    pub min_chitchat_turns: usize,
    /// Who speaks the first chit-chat turn.
    pub opener: Speaker,
    pub decoding: DecodingConfig,
}

impl Default for SelfChatConfig {
    fn default() -> Self {
        SelfChatConfig {
            max_chitchat_turns: 12,
            min_chitchat_turns: 4,
            opener: Speaker::Sales,
            decoding: DecodingConfig::default(),
        }
    }
}

impl SelfChatConfig {
    pub fn validate(&self) -> Result<(), SelfChatError> {
        if self.min_chitchat_turns == 0 || self.max_chitchat_turns == 0 {
            return Err(SelfChatError::Config("turn bounds must be positive".into()));
        }
        if self.min_chitchat_turns > self.max_chitchat_turns {
            return Err(SelfChatError::Config(format!(
                "min_chitchat_turns ({}) exceeds max_chitchat_turns ({})",
                self.min_chitchat_turns, self.max_chitchat_turns
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SelfChatError {
    #[error("invalid persona: {0}")]
    Persona(String),
    #[error("invalid self-chat config: {0}")]
    Config(String),
    #[error("backend failed after {} turn(s): {source}", partial.len())]
    Backend {
        partial: Vec<Turn>,
        #[source]
        source: BackendError,
    },
    #[error("persona file {path}: {message}")]
    PersonaFile { path: String, message: String },
}

/// Run self-chat until `stop_hook` fires or the turn cap is reached.
///
/// `config.opener` speaks first. `stop_hook` sees the turns so far and is
/// consulted only after USER turns, and only once at least
/// `min_chitchat_turns` turns exist.
pub fn run_selfchat<F>(
    user: &Persona,
    sales: &Persona,
    config: &SelfChatConfig,
    backend: &dyn ChatBackend,
    mut stop_hook: F,
) -> Result<Vec<Turn>, SelfChatError>
where
    F: FnMut(&[Turn]) -> bool,
{
    if user.role != Speaker::User || sales.role != Speaker::Sales {
        return Err(SelfChatError::Persona(
            "expected one USER persona and one SALES persona".into(),
        ));
    }
    config.validate()?;

    let mut turns: Vec<Turn> = Vec::with_capacity(config.max_chitchat_turns);
    let mut speaker = config.opener;
    while turns.len() < config.max_chitchat_turns {
        let persona = match speaker {
            Speaker::User => &user.sentences,
            Speaker::Sales => &sales.sentences,
        };
        let text = match backend.chat_reply(&turns, persona, &config.decoding) {
            Ok(text) => text,
            Err(source) => {
                return Err(SelfChatError::Backend {
                    partial: turns,
                    source,
                })
            }
        };
        turns.push(Turn::new(speaker, &text, Phase::Chitchat).with_meta("backend", backend.name()));
        if speaker == Speaker::User && turns.len() >= config.min_chitchat_turns && stop_hook(&turns) {
            break;
        }
        speaker = speaker.other();
    }
    Ok(turns)
}

/// Load a persona pool: one persona per line, sentences separated by `" | "`.
/// Blank lines and lines starting with `#` are skipped.
pub fn load_persona_pool(path: &Path) -> Result<Vec<Vec<String>>, SelfChatError> {
    let raw = fs::read_to_string(path).map_err(|e| SelfChatError::PersonaFile {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_persona_pool(&raw).map_err(|message| SelfChatError::PersonaFile {
        path: path.display().to_string(),
        message,
    })
}

pub fn parse_persona_pool(raw: &str) -> Result<Vec<Vec<String>>, String> {
    let mut pool = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let sentences: Vec<String> = line
            .split(" | ")
            .map(normalize_whitespace)
            .filter(|s| !s.is_empty())
            .collect();
        if sentences.len() > MAX_PERSONA_SENTENCES {
            return Err(format!(
                "line {}: {} sentences, at most {MAX_PERSONA_SENTENCES} allowed",
                i + 1,
                sentences.len()
            ));
        }
        pool.push(sentences);
    }
    if pool.is_empty() {
        return Err("no personas found".into());
    }
    Ok(pool)
}

/// Draw a persona for `role` from the pool.
pub fn sample_persona<R: Rng>(pool: &[Vec<String>], role: Speaker, rng: &mut R) -> Persona {
    let sentences = pool[rng.random_range(0..pool.len())].clone();
    Persona { sentences, role }
}

/// A small built-in pool used when no persona file is configured.
pub fn builtin_persona_pool() -> Vec<Vec<String>> {
    parse_persona_pool(include_str!("personas.txt")).expect("built-in persona pool parses")
}
