use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Task;
use crate::dialogue::{Dialogue, Phase, CANDIDATE_COUNT};

pub const DETECTORS: [&str; 3] = ["Detector1", "Detector2", "Detector3"];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("dialogues without {CANDIDATE_COUNT} transition candidates: {}", .0.join(", "))]
    MissingCandidates(Vec<String>),
    #[error("dialogues without a transition turn: {}", .0.join(", "))]
    MissingTransition(Vec<String>),
    #[error("snippets without outputs for all three detectors: {}", .0.join(", "))]
    MissingDetectors(Vec<String>),
    #[error("task {0} needs {1}")]
    WrongInput(u8, &'static str),
    #[error("line {line}: {message}")]
    Snippet { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A chit-chat excerpt with the intents each detector proposed for it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snippet {
    pub snippet_id: String,
    pub context: String,
    pub detectors: BTreeMap<String, Vec<String>>,
}

/// Read snippets from JSON lines; blank lines are skipped.
pub fn read_snippets<R: BufRead>(reader: R) -> Result<Vec<Snippet>, ExportError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| ExportError::Io {
            path: "<snippets>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ExportError::Snippet {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub enum ExportInput<'a> {
    Dialogues(&'a [Dialogue]),
    Snippets(&'a [Snippet]),
}

fn transcript(d: &Dialogue, mark_transition: bool) -> String {
    d.turns
        .iter()
        .map(|t| {
            if mark_transition && t.phase == Phase::Transition {
                format!("{}: [TRANSITION] {}", t.speaker.display_name(), t.text)
            } else {
                format!("{}: {}", t.speaker.display_name(), t.text)
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn intent_name(d: &Dialogue) -> &str {
    d.intent.as_ref().map(|i| i.name.as_str()).unwrap_or("")
}

/// Columns: dialogue_id, provenance, intent, dialogue.
pub fn export_task1<W: Write>(dialogues: &[Dialogue], writer: W) -> Result<usize, ExportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["dialogue_id", "provenance", "intent", "dialogue"])?;
    for d in dialogues {
        w.write_record([
            d.id.as_str(),
            d.provenance.as_str(),
            intent_name(d),
            &transcript(d, false),
        ])?;
    }
    w.flush().map_err(|source| ExportError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(dialogues.len())
}

/// Columns: dialogue_id, provenance, intent, dialogue (transition marked
/// `[TRANSITION]`), transition, candidate_0 .. candidate_4.
pub fn export_task2<W: Write>(dialogues: &[Dialogue], writer: W) -> Result<usize, ExportError> {
    let no_candidates: Vec<String> = dialogues
        .iter()
        .filter(|d| d.transition_candidates.len() != CANDIDATE_COUNT)
        .map(|d| d.id.clone())
        .collect();
    if !no_candidates.is_empty() {
        return Err(ExportError::MissingCandidates(no_candidates));
    }
    let no_transition: Vec<String> = dialogues
        .iter()
        .filter(|d| d.transition_turn().is_none())
        .map(|d| d.id.clone())
        .collect();
    if !no_transition.is_empty() {
        return Err(ExportError::MissingTransition(no_transition));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "dialogue_id".to_string(),
        "provenance".into(),
        "intent".into(),
        "dialogue".into(),
        "transition".into(),
    ];
    header.extend((0..CANDIDATE_COUNT).map(|i| format!("candidate_{i}")));
    w.write_record(&header)?;
    for d in dialogues {
        let mut row = vec![
            d.id.clone(),
            d.provenance.as_str().to_string(),
            intent_name(d).to_string(),
            transcript(d, true),
            d.transition_turn().map(|t| t.text.clone()).unwrap_or_default(),
        ];
        row.extend(d.transition_candidates.iter().cloned());
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| ExportError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(dialogues.len())
}

/// Columns: snippet_id, snippet, detector1, detector2, detector3; intent
/// lists are joined with `"; "`.
pub fn export_task3<W: Write>(snippets: &[Snippet], writer: W) -> Result<usize, ExportError> {
    let missing: Vec<String> = snippets
        .iter()
        .filter(|s| DETECTORS.iter().any(|d| !s.detectors.contains_key(*d)))
        .map(|s| s.snippet_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(ExportError::MissingDetectors(missing));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["snippet_id", "snippet", "detector1", "detector2", "detector3"])?;
    for s in snippets {
        let lists: Vec<String> = DETECTORS.iter().map(|d| s.detectors[*d].join("; ")).collect();
        w.write_record([
            s.snippet_id.as_str(),
            s.context.as_str(),
            &lists[0],
            &lists[1],
            &lists[2],
        ])?;
    }
    w.flush().map_err(|source| ExportError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(snippets.len())
}

/// Path of the instructions file written next to an export.
pub fn instructions_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".instructions.txt");
    out.with_file_name(name)
}

fn default_instructions(task: Task) -> String {
    let body = match task {
        Task::Dialogue => {
            "Read the whole conversation between a salesperson and a customer.\n\
             q1: how relevant is the task the salesperson raises to the earlier chat? (1-5)\n\
             q2: how pushy is the salesperson? (1 = not at all, 5 = very)\n\
             q3: overall, how good is this conversation from a business point of view? (1-5)\n"
        }
        Task::Transition => {
            "Read the conversation; the turn marked [TRANSITION] is where the salesperson\n\
             moves from small talk to a task.\n\
             q1: is this the right moment to bring up the task? (1-5)\n\
             q2: how relevant is the transition to the chat before it? (1-5)\n\
             q3: how pushy is the transition? (1 = not at all, 5 = very)\n\
             q4: overall quality of the transition (1-5)\n\
             best_idx: which of candidate_0..candidate_4 fits best? (0-4)\n"
        }
        Task::Detection => {
            "Read the snippet and the intents proposed by three detectors.\n\
             rank_d1..rank_d3: rank each detector by how well its intents fit (1 = best, 3 = worst;\n\
             equal ranks are allowed).\n\
             own_intents: the intents you would pick, separated by ';', or NONE.\n"
        }
    };
    format!("Instructions for {task}\n\n{body}")
}

/// Write the task CSV to `out` and an instructions file beside it. When
/// `guidelines` is given its content is copied unchanged.
pub fn export_amt(
    input: ExportInput<'_>,
    task: Task,
    out: &Path,
    guidelines: Option<&Path>,
) -> Result<usize, ExportError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ExportError::Io { path, source }
    };
    let instructions = match guidelines {
        Some(path) => fs::read_to_string(path).map_err(io(path))?,
        None => default_instructions(task),
    };
    let mut buffer = Vec::new();
    let count = match (task, input) {
        (Task::Dialogue, ExportInput::Dialogues(d)) => export_task1(d, &mut buffer)?,
        (Task::Transition, ExportInput::Dialogues(d)) => export_task2(d, &mut buffer)?,
        (Task::Detection, ExportInput::Snippets(s)) => export_task3(s, &mut buffer)?,
        (Task::Detection, _) => return Err(ExportError::WrongInput(3, "detector snippets")),
        (t, _) => return Err(ExportError::WrongInput(t.number(), "a dialogue corpus")),
    };
    File::create(out)
        .and_then(|mut f| f.write_all(&buffer))
        .map_err(io(out))?;
    let inst = instructions_path(out);
    fs::write(&inst, instructions).map_err(io(&inst))?;
    Ok(count)
}
