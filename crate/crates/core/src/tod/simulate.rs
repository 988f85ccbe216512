use thiserror::Error;

use super::termination::{should_terminate, TerminationPolicy};
use crate::backend::{BackendError, ChatBackend, DecodingConfig};
use crate::dialogue::{Phase, Speaker, Turn};
use crate::seed::derive_seed;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("simulation precondition: {0}")]
    Precondition(String),
    #[error("termination policy: {0}")]
    Policy(String),
    #[error("{source} (after {} simulated turns)", partial.len())]
    Backend {
        partial: Vec<Turn>,
        source: BackendError,
    },
}

/// Let the user and sales simulators talk after the transition turn until
/// the policy stops them. The user speaks first; the final turn's meta holds
/// the termination reason under `"termination"`.
pub fn simulate_continuation(
    context: &[Turn],
    user: &dyn ChatBackend,
    sales: &dyn ChatBackend,
    policy: &TerminationPolicy,
    decoding: &DecodingConfig,
) -> Result<Vec<Turn>, SimulationError> {
    simulate_continuation_from(context, Vec::new(), user, sales, policy, decoding)
}

/// Like [`simulate_continuation`], resuming from task turns that already
/// follow `context`.
pub fn simulate_continuation_from(
    context: &[Turn],
    existing: Vec<Turn>,
    user: &dyn ChatBackend,
    sales: &dyn ChatBackend,
    policy: &TerminationPolicy,
    decoding: &DecodingConfig,
) -> Result<Vec<Turn>, SimulationError> {
    policy.validate().map_err(SimulationError::Policy)?;
    match context.last() {
        Some(t) if t.phase == Phase::Transition && t.speaker == Speaker::Sales => {}
        _ => {
            return Err(SimulationError::Precondition(
                "context must end with the SALES transition turn".into(),
            ))
        }
    }
    for (i, t) in existing.iter().enumerate() {
        let expected = if i % 2 == 0 { Speaker::User } else { Speaker::Sales };
        if t.speaker != expected || t.phase != Phase::Tod {
            return Err(SimulationError::Precondition(format!(
                "existing turn {i} must be a {} task turn",
                expected.as_str()
            )));
        }
    }

    let mut tod = existing;
    if !tod.is_empty() && finish(&mut tod, policy) {
        return Ok(tod);
    }
    let mut full: Vec<Turn> = context.iter().cloned().chain(tod.iter().cloned()).collect();
    loop {
        let (speaker, backend) = if tod.len().is_multiple_of(2) {
            (Speaker::User, user)
        } else {
            (Speaker::Sales, sales)
        };
        let config = decoding.with_seed(derive_seed(decoding.seed, tod.len() as u64));
        let text = match backend.chat_reply(&full, &[], &config) {
            Ok(text) => text,
            Err(source) => return Err(SimulationError::Backend { partial: tod, source }),
        };
        let turn = Turn::new(speaker, &text, Phase::Tod).with_meta("backend", backend.name());
        full.push(turn.clone());
        tod.push(turn);
        if finish(&mut tod, policy) {
            return Ok(tod);
        }
    }
}

fn finish(tod: &mut [Turn], policy: &TerminationPolicy) -> bool {
    let Some(reason) = should_terminate(tod, policy) else {
        return false;
    };
    let value = serde_json::to_value(&reason).expect("reason serializes");
    if let Some(last) = tod.last_mut() {
        last.meta.insert("termination".into(), value);
    }
    true
}
