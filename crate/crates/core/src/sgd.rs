//! Reader for the Schema-Guided Dialogue (SGD) file layout.
//!
//! A corpus directory holds `dialogues_*.json` files (each a JSON array of
//! dialogues with per-turn frames) and optionally a `schema.json` describing
//! services and their intents. System turns map to the SALES speaker.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::dialogue::Speaker;
use crate::text::normalize_whitespace;

/// SGD's placeholder for "no active intent yet".
pub const NO_INTENT: &str = "NONE";

#[derive(Debug, Error)]
pub enum SgdError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{file}{}: {message}", record.map(|r| format!(" record {r}")).unwrap_or_default())]
    Parse {
        file: String,
        record: Option<usize>,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SgdTurn {
    pub speaker: Speaker,
    pub text: String,
    /// Active intents of a user turn (empty for system turns and for
    /// turns whose frames all say `NONE`).
    pub active_intents: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SgdDialogue {
    pub id: String,
    pub turns: Vec<SgdTurn>,
}

impl SgdDialogue {
    /// Every intent the dialogue is annotated with.
    pub fn intents(&self) -> BTreeSet<String> {
        self.turns
            .iter()
            .flat_map(|t| t.active_intents.iter().cloned())
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SgdCorpus {
    pub dialogues: Vec<SgdDialogue>,
    /// Intent descriptions from the schema file, when one was present.
    pub intent_descriptions: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SgdLoadOptions {
    /// Replace annotated slot spans in system turns with `[slot_name]`.
    /// Use when reading raw (not yet delexicalized) SGD.
    pub delexicalize: bool,
}

#[derive(Deserialize)]
struct RawDialogue {
    dialogue_id: String,
    turns: Vec<RawTurn>,
}

#[derive(Deserialize)]
struct RawTurn {
    speaker: String,
    utterance: String,
    #[serde(default)]
    frames: Vec<RawFrame>,
}

#[derive(Deserialize)]
struct RawFrame {
    #[serde(default)]
    slots: Vec<RawSlot>,
    #[serde(default)]
    state: Option<RawState>,
}

#[derive(Deserialize)]
struct RawSlot {
    slot: String,
    start: usize,
    exclusive_end: usize,
}

#[derive(Deserialize)]
struct RawState {
    active_intent: String,
}

#[derive(Deserialize)]
struct RawService {
    #[serde(default)]
    intents: Vec<RawIntent>,
}

#[derive(Deserialize)]
struct RawIntent {
    name: String,
    #[serde(default)]
    description: String,
}

/// Load a corpus from a directory (or a single dialogue file).
pub fn load_sgd(path: &Path, options: SgdLoadOptions) -> Result<SgdCorpus, SgdError> {
    let io = |p: &Path, source| SgdError::Io {
        path: p.display().to_string(),
        source,
    };
    let mut corpus = SgdCorpus::default();
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };

    for file in files {
        let raw = fs::read_to_string(&file).map_err(|e| io(&file, e))?;
        let name = file.display().to_string();
        if file.file_name().is_some_and(|n| n == "schema.json") {
            corpus.intent_descriptions.extend(parse_schema(&raw, &name)?);
        } else {
            corpus.dialogues.extend(parse_dialogues(&raw, &name, options)?);
        }
    }
    Ok(corpus)
}

/// Parse one `dialogues_*.json` file.
pub fn parse_dialogues(raw: &str, file: &str, options: SgdLoadOptions) -> Result<Vec<SgdDialogue>, SgdError> {
    let records: Vec<Value> = serde_json::from_str(raw).map_err(|e| SgdError::Parse {
        file: file.to_string(),
        record: None,
        message: e.to_string(),
    })?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, value)| {
            let parse_err = |message: String| SgdError::Parse {
                file: file.to_string(),
                record: Some(i),
                message,
            };
            let raw: RawDialogue = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
            convert(raw, options).map_err(parse_err)
        })
        .collect()
}

fn convert(raw: RawDialogue, options: SgdLoadOptions) -> Result<SgdDialogue, String> {
    let mut turns = Vec::with_capacity(raw.turns.len());
    for (t, turn) in raw.turns.into_iter().enumerate() {
        let speaker = match turn.speaker.as_str() {
            "USER" => Speaker::User,
            "SYSTEM" | "SALES" => Speaker::Sales,
            other => return Err(format!("turn {t}: unknown speaker `{other}`")),
        };
        let mut text = turn.utterance;
        if options.delexicalize && speaker == Speaker::Sales {
            let spans = turn.frames.iter().flat_map(|f| f.slots.iter());
            text = delexicalize(&text, spans.map(|s| (s.start, s.exclusive_end, s.slot.as_str())));
        }
        let active_intents = if speaker == Speaker::User {
            turn.frames
                .iter()
                .filter_map(|f| f.state.as_ref())
                .map(|s| s.active_intent.clone())
                .filter(|i| i != NO_INTENT && !i.is_empty())
                .collect()
        } else {
            BTreeSet::new()
        };
        turns.push(SgdTurn {
            speaker,
            text: normalize_whitespace(&text),
            active_intents,
        });
    }
    Ok(SgdDialogue {
        id: raw.dialogue_id,
        turns,
    })
}

/// Replace character spans `[start, end)` with `[slot]`. Overlapping or
/// out-of-range spans are ignored.
pub fn delexicalize<'a, I>(text: &str, spans: I) -> String
where
    I: IntoIterator<Item = (usize, usize, &'a str)>,
{
    let chars: Vec<char> = text.chars().collect();
    let mut spans: Vec<(usize, usize, &str)> = spans
        .into_iter()
        .filter(|(s, e, _)| s < e && *e <= chars.len())
        .collect();
    spans.sort();
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for (start, end, slot) in spans {
        if start < cursor {
            continue;
        }
        out.extend(&chars[cursor..start]);
        out.push('[');
        out.push_str(slot);
        out.push(']');
        cursor = end;
    }
    out.extend(&chars[cursor..]);
    out
}

fn parse_schema(raw: &str, file: &str) -> Result<BTreeMap<String, String>, SgdError> {
    let services: Vec<RawService> = serde_json::from_str(raw).map_err(|e| SgdError::Parse {
        file: file.to_string(),
        record: None,
        message: e.to_string(),
    })?;
    let mut out = BTreeMap::new();
    for intent in services.into_iter().flat_map(|s| s.intents) {
        if !intent.description.trim().is_empty() {
            out.entry(intent.name).or_insert(intent.description);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = r#"[
      {"dialogue_id": "1_0001", "services": ["Media_1"], "turns": [
        {"speaker": "USER", "utterance": "Find me a movie.", "frames": [
          {"service": "Media_1", "slots": [], "state": {"active_intent": "FindMovies", "slot_values": {}}}]},
        {"speaker": "SYSTEM", "utterance": "How about Inception?", "frames": [
          {"service": "Media_1", "slots": [{"slot": "title", "start": 10, "exclusive_end": 19}]}]},
        {"speaker": "USER", "utterance": "Thanks!", "frames": [
          {"service": "Media_1", "slots": [], "state": {"active_intent": "NONE", "slot_values": {}}}]}
      ]}
    ]"#;

    #[test]
    fn parses_turns_and_intents() {
        let ds = parse_dialogues(FILE, "f.json", SgdLoadOptions::default()).unwrap();
        assert_eq!(ds.len(), 1);
        let d = &ds[0];
        assert_eq!(d.turns[1].speaker, Speaker::Sales);
        assert_eq!(
            d.turns[0].active_intents,
            BTreeSet::from(["FindMovies".to_string()])
        );
        assert!(d.turns[2].active_intents.is_empty());
        assert_eq!(d.intents().len(), 1);
        assert_eq!(d.turns[1].text, "How about Inception?");
    }

    #[test]
    fn delexicalizes_system_slots_on_request() {
        let ds = parse_dialogues(FILE, "f.json", SgdLoadOptions { delexicalize: true }).unwrap();
        assert_eq!(ds[0].turns[1].text, "How about [title]?");
        assert_eq!(ds[0].turns[0].text, "Find me a movie.");
    }

    #[test]
    fn delexicalize_uses_char_offsets_and_skips_overlaps() {
        assert_eq!(
            delexicalize("Café Rio tonight", [(0, 8, "venue")]),
            "[venue] tonight"
        );
        assert_eq!(
            delexicalize("abc def", [(0, 3, "a"), (2, 5, "b"), (4, 7, "c")]),
            "[a] [c]"
        );
        assert_eq!(delexicalize("abc", [(1, 9, "x")]), "abc");
    }

    #[test]
    fn parse_errors_name_file_and_record() {
        let bad = r#"[{"dialogue_id": "a", "turns": []}, {"turns": []}]"#;
        let err = parse_dialogues(bad, "dialogues_009.json", SgdLoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("dialogues_009.json record 1:"), "{msg}");
    }

    #[test]
    fn loads_directory_with_schema() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("dialogues_001.json"), FILE).unwrap();
        fs::write(
            dir.path().join("schema.json"),
            r#"[{"service_name": "Media_1", "intents": [{"name": "FindMovies", "description": "Find movies by genre and optionally director"}]}]"#,
        )
        .unwrap();
        let corpus = load_sgd(dir.path(), SgdLoadOptions::default()).unwrap();
        assert_eq!(corpus.dialogues.len(), 1);
        assert_eq!(
            corpus.intent_descriptions["FindMovies"],
            "Find movies by genre and optionally director"
        );
    }
}
