//! The dialogue data model.
//!
//! A [`Dialogue`] is an ordered list of [`Turn`]s that opens with chit-chat,
//! pivots through a single sales transition turn and continues as a
//! task-oriented conversation.

mod codec;
mod stats;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::intent::IntentLabel;
use crate::text::normalize_whitespace;

pub use codec::{
    from_json, read_corpus, read_corpus_file, to_json, write_corpus, CodecError, CorpusError, SchemaError,
};
pub use stats::{compute_stats, CorpusStats, GroupStats};
pub use validate::{validate, ValidationReport, Violation};

/// Number of transition candidates a dialogue carries when it carries any.
pub const CANDIDATE_COUNT: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speaker {
    User,
    Sales,
}

impl Speaker {
    pub fn other(self) -> Speaker {
        match self {
            Speaker::User => Speaker::Sales,
            Speaker::Sales => Speaker::User,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::User => "USER",
            Speaker::Sales => "SALES",
        }
    }

    pub fn parse(s: &str) -> Option<Speaker> {
        match s {
            "USER" => Some(Speaker::User),
            "SALES" => Some(Speaker::Sales),
            _ => None,
        }
    }

    /// Capitalized display name, as used in exported transcripts.
    pub fn display_name(self) -> &'static str {
        match self {
            Speaker::User => "User",
            Speaker::Sales => "Sales",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which part of the dialogue a turn belongs to. Ordered by position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Phase {
    Chitchat,
    Transition,
    Tod,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Chitchat => "CHITCHAT",
            Phase::Transition => "TRANSITION",
            Phase::Tod => "TOD",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        match s {
            "CHITCHAT" => Some(Phase::Chitchat),
            "TRANSITION" => Some(Phase::Transition),
            "TOD" => Some(Phase::Tod),
            _ => None,
        }
    }
}

/// Which continuation strategy produced the task-oriented part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "MERGE_SGD")]
    MergeSgd,
    #[serde(rename = "SIMULATION")]
    Simulation,
}

impl Provenance {
    pub const ALL: [Provenance; 2] = [Provenance::MergeSgd, Provenance::Simulation];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::MergeSgd => "MERGE_SGD",
            Provenance::Simulation => "SIMULATION",
        }
    }

    pub fn parse(s: &str) -> Option<Provenance> {
        match s {
            "MERGE_SGD" => Some(Provenance::MergeSgd),
            "SIMULATION" => Some(Provenance::Simulation),
            _ => None,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One utterance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub phase: Phase,
    pub meta: Map<String, Value>,
}

impl Turn {
    /// Build a turn; the text is whitespace-normalized.
    pub fn new(speaker: Speaker, text: &str, phase: Phase) -> Turn {
        Turn {
            speaker,
            text: normalize_whitespace(text),
            phase,
            meta: Map::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Turn {
        self.meta.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dialogue {
    pub id: String,
    pub seed: u64,
    pub provenance: Provenance,
    pub intent: Option<IntentLabel>,
    pub transition_candidates: Vec<String>,
    pub turns: Vec<Turn>,
}

impl Dialogue {
    pub fn transition_index(&self) -> Option<usize> {
        self.turns.iter().position(|t| t.phase == Phase::Transition)
    }

    pub fn transition_turn(&self) -> Option<&Turn> {
        self.transition_index().map(|i| &self.turns[i])
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Number of turns in the given phase.
    pub fn phase_len(&self, phase: Phase) -> usize {
        self.turns.iter().filter(|t| t.phase == phase).count()
    }
}

/// Render turns as `SPEAKER: text` lines, the context format handed to QA
/// models.
pub fn render_context(turns: &[Turn]) -> String {
    render_lines(turns.iter().map(|t| (t.speaker, t.text.as_str())))
}

pub fn render_lines<'a, I>(lines: I) -> String
where
    I: IntoIterator<Item = (Speaker, &'a str)>,
{
    lines
        .into_iter()
        .map(|(speaker, text)| format!("{}: {}", speaker.as_str(), text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Render turns as a human-readable transcript (`Sales: ...`).
pub fn render_transcript(turns: &[Turn]) -> String {
    turns
        .iter()
        .map(|t| format!("{}: {}", t.speaker.display_name(), t.text))
        .collect::<Vec<_>>()
        .join("\n")
}
