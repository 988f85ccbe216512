//! Transition turns: templates, seq2seq training data and candidate
//! generation.

use std::io::Read;

use serde::Serialize;
use thiserror::Error;

use crate::backend::{BackendError, DecodingConfig, Seq2SeqBackend};
use crate::dialogue::{Dialogue, Phase, Speaker, CANDIDATE_COUNT};
use crate::intent::IntentLabel;
use crate::seed::derive_seed;
use crate::text::normalize_whitespace;

pub const DEFAULT_CANDIDATES: usize = CANDIDATE_COUNT;

const PAST_TAG: &str = "past: ";
const FUTURE_SEP: &str = " future: ";

#[derive(Debug, Error, PartialEq)]
pub enum TransitionError {
    #[error("intent {0} has an empty description")]
    EmptyDescription(String),
}

/// "Do you want to {description}?" with the description's first letter
/// lowered and trailing punctuation dropped.
pub fn template_transition(intent: &IntentLabel) -> Result<String, TransitionError> {
    template_from_description(&intent.name, &intent.description)
}

pub(crate) fn template_from_description(name: &str, description: &str) -> Result<String, TransitionError> {
    let slot = normalize_whitespace(description);
    let slot = slot.trim_end_matches(['.', '?', '!', ' ']);
    let mut chars = slot.chars();
    let Some(first) = chars.next() else {
        return Err(TransitionError::EmptyDescription(name.to_string()));
    };
    Ok(format!(
        "Do you want to {}{}?",
        first.to_lowercase(),
        chars.as_str()
    ))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransitionTriple {
    pub past: String,
    pub future: String,
    pub target: String,
}

impl TransitionTriple {
    /// `{"source": ..., "target": ...}` as one JSON line.
    pub fn to_json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            source: String,
            target: &'a str,
        }
        serde_json::to_string(&Line {
            source: encode_triple_source(&self.past, &self.future),
            target: &self.target,
        })
        .expect("triple serializes")
    }
}

/// The seq2seq source for a (past, future) pair. Shared by data export and
/// generation so the two never drift apart.
pub fn encode_triple_source(past: &str, future: &str) -> String {
    format!("{PAST_TAG}{past}{FUTURE_SEP}{future}")
}

/// Inverse of [`encode_triple_source`]; the separator is searched from the
/// right, so `past` may itself contain it.
pub fn decode_triple_source(source: &str) -> Option<(&str, &str)> {
    let body = source.strip_prefix(PAST_TAG)?;
    let at = body.rfind(FUTURE_SEP)?;
    Some((&body[..at], &body[at + FUTURE_SEP.len()..]))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripleReport {
    pub triples: Vec<TransitionTriple>,
    /// (dialogue id, reason)
    pub skipped: Vec<(String, String)>,
}

/// One triple per dialogue: the last user chit-chat turn, the first user
/// task turn and the transition turn between them.
pub fn build_training_triples(dialogues: &[Dialogue]) -> TripleReport {
    let mut report = TripleReport::default();
    for d in dialogues {
        match triple_of(d) {
            Ok(t) => report.triples.push(t),
            Err(reason) => report.skipped.push((d.id.clone(), reason.to_string())),
        }
    }
    report
}

fn triple_of(d: &Dialogue) -> Result<TransitionTriple, &'static str> {
    let mut transitions = d.turns.iter().filter(|t| t.phase == Phase::Transition);
    let target = transitions.next().ok_or("no transition turn")?;
    if transitions.next().is_some() {
        return Err("more than one transition turn");
    }
    let user_in = |phase: Phase| {
        d.turns
            .iter()
            .filter(move |t| t.speaker == Speaker::User && t.phase == phase)
    };
    let past = user_in(Phase::Chitchat)
        .next_back()
        .ok_or("no user chit-chat turn")?;
    let future = user_in(Phase::Tod).next().ok_or("no user task turn")?;
    if past.text.is_empty() || future.text.is_empty() || target.text.is_empty() {
        return Err("empty text");
    }
    Ok(TransitionTriple {
        past: past.text.clone(),
        future: future.text.clone(),
        target: target.text.clone(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OttersReport {
    pub triples: Vec<TransitionTriple>,
    pub total: usize,
    pub skipped: usize,
}

impl std::fmt::Display for OttersReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} triples, {} skipped", self.triples.len(), self.skipped)
    }
}

/// Read tab-separated topic-transition records laid out as
/// `topic A <TAB> bridge <TAB> topic B`. Extra columns are ignored; rows with
/// fewer than three fields or an empty one are counted as skipped.
pub fn adapt_otters<R: Read>(reader: R, has_header: bool) -> Result<OttersReport, csv::Error> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(has_header)
        .flexible(true)
        .quoting(false)
        .from_reader(reader);
    let mut report = OttersReport::default();
    for record in rdr.records() {
        let record = record?;
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        report.total += 1;
        let field = |i: usize| record.get(i).map(normalize_whitespace).filter(|s| !s.is_empty());
        match (field(0), field(1), field(2)) {
            (Some(past), Some(target), Some(future)) => {
                report.triples.push(TransitionTriple { past, future, target })
            }
            _ => report.skipped += 1,
        }
    }
    Ok(report)
}

/// Sample `n` transitions for a (past, future) pair; candidate `i` uses the
/// sub-seed `derive_seed(config.seed, i)`.
pub fn generate_transitions(
    past: &str,
    future: &str,
    backend: &dyn Seq2SeqBackend,
    config: &DecodingConfig,
    n: usize,
) -> Result<Vec<String>, BackendError> {
    if n == 0 {
        return Err(BackendError::Precondition("n_candidates must be positive".into()));
    }
    if past.trim().is_empty() || future.trim().is_empty() {
        return Err(BackendError::Precondition(
            "past and future must be non-empty".into(),
        ));
    }
    let source = encode_triple_source(past, future);
    (0..n as u64)
        .map(|i| backend.seq2seq_generate(&source, &config.with_seed(derive_seed(config.seed, i))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockSeq2Seq;
    use crate::dialogue::fixtures::valid_dialogue;
    use crate::intent::KnownIntent;

    #[test]
    fn templates() {
        assert_eq!(
            template_transition(&KnownIntent::FindMovies.label()).unwrap(),
            "Do you want to find movies to watch?"
        );
        assert_eq!(
            template_transition(&KnownIntent::FindAttractions.label()).unwrap(),
            "Do you want to find attractions to visit?"
        );
        assert_eq!(
            template_transition(&IntentLabel::new(
                "X",
                "Find movies by genre and optionally director."
            ))
            .unwrap(),
            "Do you want to find movies by genre and optionally director?"
        );
        assert_eq!(
            template_transition(&IntentLabel::new("X", " .")),
            Err(TransitionError::EmptyDescription("X".into()))
        );
    }

    #[test]
    fn encoding() {
        assert_eq!(encode_triple_source("A", "B"), "past: A future: B");
        assert_eq!(encode_triple_source("past: x", "y"), "past: past: x future: y");
        assert_eq!(decode_triple_source("past: A future: B"), Some(("A", "B")));
        assert_eq!(decode_triple_source("A future: B"), None);
    }

    #[test]
    fn triples_from_dialogue() {
        let d = valid_dialogue();
        let r = build_training_triples(std::slice::from_ref(&d));
        assert!(r.skipped.is_empty());
        let t = &r.triples[0];
        assert_eq!(t.target, d.turns[2].text);
        assert_eq!(t.past, d.turns[1].text);
        assert_eq!(t.future, d.turns[3].text);
    }

    #[test]
    fn dialogue_without_task_user_turn_is_skipped() {
        let mut d = valid_dialogue();
        d.turns.pop();
        let r = build_training_triples(&[d]);
        assert!(r.triples.is_empty());
        assert_eq!(r.skipped[0].1, "no user task turn");
    }

    #[test]
    fn otters_rows() {
        let data = "a1\tb1\tc1\n\
                    a2\t\tc2\n\
                    a3\tb3\n\
                    a4\tb4\tc4\textra\n";
        let r = adapt_otters(data.as_bytes(), false).unwrap();
        assert_eq!(r.total, 4);
        assert_eq!(r.skipped, 2);
        assert_eq!(
            r.triples[0],
            TransitionTriple {
                past: "a1".into(),
                future: "c1".into(),
                target: "b1".into()
            }
        );
        assert_eq!(r.to_string(), "2 triples, 2 skipped");
        let r = adapt_otters("A\tBridge\tB\nx\ty\tz\n".as_bytes(), true).unwrap();
        assert_eq!(r.triples.len(), 1);
    }

    #[test]
    fn candidates_are_reproducible() {
        let b = MockSeq2Seq::transitions("s2s");
        let cfg = DecodingConfig::transition().with_seed(11);
        let a = generate_transitions("I like movies.", "Find me a film.", &b, &cfg, 5).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(
            a,
            generate_transitions("I like movies.", "Find me a film.", &b, &cfg, 5).unwrap()
        );
        assert_eq!(generate_transitions("p", "f", &b, &cfg, 1).unwrap().len(), 1);
        assert!(generate_transitions("p", "f", &b, &cfg, 0).is_err());
    }

    #[test]
    fn json_line() {
        let t = TransitionTriple {
            past: "A".into(),
            future: "B".into(),
            target: "T?".into(),
        };
        assert_eq!(
            t.to_json_line(),
            r#"{"source":"past: A future: B","target":"T?"}"#
        );
    }
}
