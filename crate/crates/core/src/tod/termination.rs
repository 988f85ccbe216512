use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dialogue::{Phase, Turn};
use crate::text::match_key;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RepetitionRule {
    /// Normalized text equals an earlier utterance of the same speaker.
    #[default]
    ExactSameSpeaker,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerminationPolicy {
    pub keywords: Vec<String>,
    pub end_token: String,
    pub repetition: RepetitionRule,
    pub max_turns: usize,
}

impl Default for TerminationPolicy {
    fn default() -> Self {
        TerminationPolicy {
            keywords: vec!["bye".into(), "goodbye".into()],
            end_token: "<END>".into(),
            repetition: RepetitionRule::ExactSameSpeaker,
            max_turns: 30,
        }
    }
}

impl TerminationPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.keywords.is_empty() || self.keywords.iter().any(|k| k.trim().is_empty()) {
            return Err("keywords must be a non-empty list of non-empty words".into());
        }
        if self.end_token.is_empty() {
            return Err("end_token must not be empty".into());
        }
        if self.max_turns < 2 {
            return Err(format!("max_turns must be at least 2, got {}", self.max_turns));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TerminationKind {
    Keyword,
    EndToken,
    Repetition,
    MaxTurns,
}

impl TerminationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationKind::Keyword => "KEYWORD",
            TerminationKind::EndToken => "END_TOKEN",
            TerminationKind::Repetition => "REPETITION",
            TerminationKind::MaxTurns => "MAX_TURNS",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminationReason {
    pub kind: TerminationKind,
    pub turn_index: usize,
    pub detail: String,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at turn {}: {}",
            self.kind.as_str(),
            self.turn_index,
            self.detail
        )
    }
}

fn contains_word(text: &str, word: &str) -> bool {
    let text = text.to_lowercase();
    let word = word.to_lowercase();
    let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
    text.match_indices(&word).any(|(at, m)| {
        !is_word(text[..at].chars().next_back()) && !is_word(text[at + m.len()..].chars().next())
    })
}

/// Decide whether the latest turn ends the conversation.
///
/// Checked in order: keyword (whole word, any case), end token (raw
/// substring), same-speaker repetition, then the TOD turn cap.
pub fn should_terminate(turns: &[Turn], policy: &TerminationPolicy) -> Option<TerminationReason> {
    let (last_index, last) = turns.iter().enumerate().next_back()?;
    let reason = |kind, detail: String| {
        Some(TerminationReason {
            kind,
            turn_index: last_index,
            detail,
        })
    };

    if let Some(k) = policy.keywords.iter().find(|k| contains_word(&last.text, k)) {
        return reason(TerminationKind::Keyword, k.clone());
    }
    if !policy.end_token.is_empty() && last.text.contains(&policy.end_token) {
        return reason(TerminationKind::EndToken, policy.end_token.clone());
    }
    match policy.repetition {
        RepetitionRule::ExactSameSpeaker => {
            let key = match_key(&last.text);
            if let Some(j) = turns[..last_index]
                .iter()
                .position(|t| t.speaker == last.speaker && match_key(&t.text) == key)
            {
                return reason(TerminationKind::Repetition, format!("repeats turn {j}"));
            }
        }
    }
    let tod = turns.iter().filter(|t| t.phase == Phase::Tod).count();
    if tod >= policy.max_turns {
        return reason(TerminationKind::MaxTurns, format!("{tod} task turns"));
    }
    None
}
