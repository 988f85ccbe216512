//! Crowdsourced evaluation: task exports, annotation ingest and aggregates.

mod aggregate;
mod export;
mod ingest;

use std::fmt;
use std::str::FromStr;

pub use aggregate::{
    aggregate_ranks, aggregate_scores, bin_label, compare_provenance, DetectorRank, ItemScores,
    ProvenanceComparison, QuestionSummary, RankReport, RankUnit, ScoreReport, StdMode, HISTOGRAM_BINS,
};
pub use export::{
    export_amt, export_task1, export_task2, export_task3, instructions_path, read_snippets, ExportError,
    ExportInput, Snippet, DETECTORS,
};
pub use ingest::{
    ingest_annotations, read_annotations, Annotations, IngestError, Task1Annotation, Task2Annotation,
    Task3Annotation,
};

/// The three crowdsourcing tasks: whole-dialogue quality, transition
/// quality, and detector ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Task {
    Dialogue = 1,
    Transition = 2,
    Detection = 3,
}

impl Task {
    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Task> {
        match n {
            1 => Some(Task::Dialogue),
            2 => Some(Task::Transition),
            3 => Some(Task::Detection),
            _ => None,
        }
    }

    /// Score question columns and their short names.
    pub fn questions(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Task::Dialogue => &[("q1", "relevance"), ("q2", "aggressiveness"), ("q3", "overall")],
            Task::Transition => &[
                ("q1", "right_time"),
                ("q2", "relevance"),
                ("q3", "aggressiveness"),
                ("q4", "overall"),
            ],
            Task::Detection => &[],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "task {}", self.number())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<u8>()
            .ok()
            .and_then(Task::from_number)
            .ok_or_else(|| format!("task must be 1, 2 or 3, got `{s}`"))
    }
}

/// Workers per item.
pub const WORKERS_PER_ITEM: usize = 3;
