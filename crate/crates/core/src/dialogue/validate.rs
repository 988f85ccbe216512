use std::fmt;

use serde::Serialize;

use super::{Dialogue, Phase, Speaker, CANDIDATE_COUNT};
use crate::text::match_key;

/// One violated invariant. `turn` is set when the problem is located at a
/// specific turn index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub turn: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }

    fn at(&mut self, turn: usize, message: String) {
        self.violations.push(Violation {
            turn: Some(turn),
            message,
        });
    }

    fn global(&mut self, message: String) {
        self.violations.push(Violation { turn: None, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let messages: Vec<_> = self.violations.iter().map(|v| v.message.as_str()).collect();
        f.write_str(&messages.join("; "))
    }
}

/// Check every dialogue and turn invariant, reporting all violations.
pub fn validate(dialogue: &Dialogue) -> ValidationReport {
    let mut report = ValidationReport::default();

    if dialogue.id.trim().is_empty() {
        report.global("id is empty".into());
    }
    if dialogue.turns.is_empty() {
        report.global("dialogue has no turns".into());
    }

    let mut highest_phase = Phase::Chitchat;
    let mut transitions = Vec::new();
    for (i, turn) in dialogue.turns.iter().enumerate() {
        if turn.text.trim().is_empty() {
            report.at(i, format!("empty text at turn {i}"));
        }
        if i > 0 && dialogue.turns[i - 1].speaker == turn.speaker {
            report.at(i, format!("alternation violated at turn {i}"));
        }
        if turn.phase < highest_phase {
            report.at(
                i,
                format!(
                    "phase order violated at turn {i}: {} after {}",
                    turn.phase.as_str(),
                    highest_phase.as_str()
                ),
            );
        } else {
            highest_phase = turn.phase;
        }
        if turn.phase == Phase::Transition {
            if turn.speaker != Speaker::Sales {
                report.at(i, format!("transition turn {i} is not spoken by SALES"));
            }
            transitions.push(i);
        }
    }
    if transitions.len() > 1 {
        report.at(
            transitions[1],
            format!("more than one transition turn ({} found)", transitions.len()),
        );
    }

    match (&dialogue.intent, transitions.is_empty()) {
        (Some(_), true) => report.global("intent is set but there is no transition turn".into()),
        (None, false) => report.global("transition turn present but intent is not set".into()),
        _ => {}
    }

    if let Some(intent) = &dialogue.intent {
        if intent.name.trim().is_empty() {
            report.global("intent name is empty".into());
        }
        if let Some(known) = intent.known() {
            if intent.description != known.description() {
                report.global(format!(
                    "intent description for {} does not match its canonical description",
                    known.name()
                ));
            }
        }
    }

    let candidates = &dialogue.transition_candidates;
    if !candidates.is_empty() {
        if candidates.len() != CANDIDATE_COUNT {
            report.global(format!(
                "transition_candidates must hold {CANDIDATE_COUNT} entries, found {}",
                candidates.len()
            ));
        }
        if let Some(&t) = transitions.first() {
            let key = match_key(&dialogue.turns[t].text);
            if !candidates.iter().any(|c| match_key(c) == key) {
                report.at(
                    t,
                    format!("transition text at turn {t} is not one of the candidates"),
                );
            }
        } else {
            report.global("transition_candidates present without a transition turn".into());
        }
    }

    report
}
