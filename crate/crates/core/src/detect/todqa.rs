//! Yes/no QA training data built from intent-annotated task dialogues.

use std::collections::BTreeSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::IntentQuestionSet;
use crate::backend::QaLabel;
use crate::dialogue::{render_lines, Speaker};
use crate::seed::{derive_labeled, rng};
use crate::sgd::SgdDialogue;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaExample {
    pub context: String,
    pub question: String,
    pub answer: QaLabel,
}

impl QaExample {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("QA example serializes")
    }
}

/// Per-dialogue NO downsampling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NegativeSampling {
    Off,
    /// Keep `floor(ratio * #YES)` NO examples of each dialogue.
    Ratio(f64),
}

impl Default for NegativeSampling {
    fn default() -> Self {
        NegativeSampling::Ratio(1.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TodQaError {
    #[error("dialogue {dialogue} turn {turn}: intent `{intent}` is not in the catalog")]
    UnknownIntent {
        dialogue: String,
        turn: usize,
        intent: String,
    },
    #[error("negative ratio must be a finite non-negative number, got {0}")]
    BadRatio(f64),
}

/// One example per (user turn, cataloged intent), labeled YES iff the intent
/// is active at that turn. Context is every turn up to and including the
/// user turn. Only base questions are used.
pub fn build_tod_qa(
    dialogues: &[SgdDialogue],
    catalog: &[IntentQuestionSet],
    sampling: NegativeSampling,
    seed: u64,
) -> Result<Vec<QaExample>, TodQaError> {
    if let NegativeSampling::Ratio(r) = sampling {
        if !r.is_finite() || r < 0.0 {
            return Err(TodQaError::BadRatio(r));
        }
    }
    let names: BTreeSet<&str> = catalog.iter().map(|s| s.intent.name.as_str()).collect();
    let mut out = Vec::new();
    for dialogue in dialogues {
        let mut examples = Vec::new();
        for (i, turn) in dialogue.turns.iter().enumerate() {
            if turn.speaker != Speaker::User {
                continue;
            }
            if let Some(unknown) = turn.active_intents.iter().find(|a| !names.contains(a.as_str())) {
                return Err(TodQaError::UnknownIntent {
                    dialogue: dialogue.id.clone(),
                    turn: i,
                    intent: unknown.clone(),
                });
            }
            let context = render_lines(dialogue.turns[..=i].iter().map(|t| (t.speaker, t.text.as_str())));
            for set in catalog {
                let answer = if turn.active_intents.contains(&set.intent.name) {
                    QaLabel::Yes
                } else {
                    QaLabel::No
                };
                examples.push(QaExample {
                    context: context.clone(),
                    question: set.base_question.clone(),
                    answer,
                });
            }
        }
        match sampling {
            NegativeSampling::Off => out.extend(examples),
            NegativeSampling::Ratio(r) => {
                out.extend(downsample(examples, r, derive_labeled(seed, &dialogue.id)))
            }
        }
    }
    Ok(out)
}

fn downsample(examples: Vec<QaExample>, ratio: f64, seed: u64) -> Vec<QaExample> {
    let negatives: Vec<usize> = examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.answer == QaLabel::No)
        .map(|(i, _)| i)
        .collect();
    let positives = examples.len() - negatives.len();
    let keep = ((ratio * positives as f64).floor() as usize).min(negatives.len());
    let chosen: BTreeSet<usize> = index::sample(&mut rng(seed), negatives.len(), keep)
        .into_iter()
        .map(|k| negatives[k])
        .collect();
    examples
        .into_iter()
        .enumerate()
        .filter(|(i, e)| e.answer == QaLabel::Yes || chosen.contains(i))
        .map(|(_, e)| e)
        .collect()
}

/// Split dialogues into those whose annotations all fall inside the catalog
/// and the ids of the rest.
pub fn restrict_to_catalog(
    dialogues: Vec<SgdDialogue>,
    catalog: &[IntentQuestionSet],
) -> (Vec<SgdDialogue>, Vec<String>) {
    let names: BTreeSet<&str> = catalog.iter().map(|s| s.intent.name.as_str()).collect();
    let mut skipped = Vec::new();
    let kept = dialogues
        .into_iter()
        .filter(|d| {
            let ok = d.intents().iter().all(|i| names.contains(i.as_str()));
            if !ok {
                skipped.push(d.id.clone());
            }
            ok
        })
        .collect();
    (kept, skipped)
}
