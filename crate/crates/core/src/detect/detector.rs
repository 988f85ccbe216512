//! Zero-shot intent detection by asking a QA model yes/no questions.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::catalog::IntentQuestionSet;
use crate::backend::{BackendError, QaBackend, QaLabel};
use crate::dialogue::{render_context, Speaker, Turn};
use crate::intent::IntentLabel;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// How many trailing turns the QA model sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ContextWindow {
    #[default]
    All,
    Last(usize),
}

impl ContextWindow {
    pub fn apply<'a>(&self, turns: &'a [Turn]) -> &'a [Turn] {
        match *self {
            ContextWindow::All => turns,
            ContextWindow::Last(n) => &turns[turns.len().saturating_sub(n)..],
        }
    }
}

impl fmt::Display for ContextWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextWindow::All => f.write_str("all"),
            ContextWindow::Last(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for ContextWindow {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ContextWindow::All => serializer.serialize_str("all"),
            ContextWindow::Last(n) => serializer.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for ContextWindow {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(u64),
            Word(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Count(0) => Err(serde::de::Error::custom("window must be positive or \"all\"")),
            Repr::Count(n) => Ok(ContextWindow::Last(n as usize)),
            Repr::Word(w) if w.eq_ignore_ascii_case("all") => Ok(ContextWindow::All),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "invalid window `{w}`, expected a positive integer or \"all\""
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionParams {
    pub threshold: f64,
    pub window: ContextWindow,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            threshold: DEFAULT_THRESHOLD,
            window: ContextWindow::All,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    pub intent: IntentLabel,
    pub confidence: f64,
    pub trigger_question: String,
    /// Index of the user turn the detection was made at.
    pub turn_index: usize,
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Ask every question of every intent about the dialogue so far.
///
/// A question hits when the answer is YES with confidence at or above the
/// threshold. An intent scores the best confidence among its hits; the
/// highest-scoring intent wins, ties going to the built-in canonical order
/// (other intents after, in catalog order). Returns `None` when nothing hits.
pub fn detect_intent(
    turns: &[Turn],
    catalog: &[IntentQuestionSet],
    qa: &dyn QaBackend,
    params: &DetectionParams,
) -> Result<Option<DetectionResult>, DetectError> {
    match turns.last() {
        Some(t) if t.speaker == Speaker::User => {}
        Some(_) => return Err(DetectError::Usage("the last turn must be a USER turn".into())),
        None => return Err(DetectError::Usage("no turns to detect over".into())),
    }
    if !(0.0..=1.0).contains(&params.threshold) {
        return Err(DetectError::Usage(format!(
            "threshold {} outside [0, 1]",
            params.threshold
        )));
    }
    let context = render_context(params.window.apply(turns));

    // (tie-break key, confidence, question, set)
    let mut best: Option<((usize, usize), f64, &str, &IntentQuestionSet)> = None;
    for (position, set) in catalog.iter().enumerate() {
        let mut intent_best: Option<(f64, &str)> = None;
        for question in set.questions() {
            let answer = qa.answer_question(&context, question)?;
            if answer.label == QaLabel::Yes
                && answer.confidence >= params.threshold
                && intent_best.is_none_or(|(c, _)| answer.confidence > c)
            {
                intent_best = Some((answer.confidence, question));
            }
        }
        let Some((confidence, question)) = intent_best else {
            continue;
        };
        let key = tie_break_key(set, position);
        let better = match &best {
            None => true,
            Some((best_key, best_conf, _, _)) => {
                confidence > *best_conf || (confidence == *best_conf && key < *best_key)
            }
        };
        if better {
            best = Some((key, confidence, question, set));
        }
    }

    Ok(best.map(|(_, confidence, question, set)| DetectionResult {
        intent: set.intent.clone(),
        confidence,
        trigger_question: question.to_string(),
        turn_index: turns.len() - 1,
    }))
}

fn tie_break_key(set: &IntentQuestionSet, position: usize) -> (usize, usize) {
    match set.intent.canonical_rank() {
        Some(rank) => (0, rank),
        None => (1, position),
    }
}
