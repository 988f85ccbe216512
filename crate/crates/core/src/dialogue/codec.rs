//! JSON encoding of dialogues and newline-delimited corpus files.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

use super::{validate, Dialogue, Phase, Provenance, Speaker, Turn, ValidationReport};
use crate::intent::IntentLabel;
use crate::text::normalize_whitespace;

/// A dialogue record that does not match the file schema.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("{0}: required")]
    Required(String),
    #[error("{0}: not in enum")]
    NotInEnum(String),
    #[error("{path}: expected {expected}")]
    WrongType { path: String, expected: &'static str },
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("refusing to serialize invalid dialogue {id}: {report}")]
    Invalid { id: String, report: ValidationReport },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {source}")]
    Schema { line: usize, source: SchemaError },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Serialize a valid dialogue as a single-line JSON object.
pub fn to_json(dialogue: &Dialogue) -> Result<String, CodecError> {
    let report = validate(dialogue);
    if !report.is_valid() {
        return Err(CodecError::Invalid {
            id: dialogue.id.clone(),
            report,
        });
    }
    Ok(serde_json::to_string(dialogue)?)
}

/// Parse one dialogue object. Text fields are whitespace-normalized.
pub fn from_json(input: &str) -> Result<Dialogue, SchemaError> {
    let value: Value = serde_json::from_str(input).map_err(|e| SchemaError::Syntax(e.to_string()))?;
    dialogue_from_value(&value)
}

pub fn dialogue_from_value(value: &Value) -> Result<Dialogue, SchemaError> {
    let obj = Obj::root(value)?;
    let id = obj.string("id")?;
    let seed = obj.unsigned("seed")?;
    let provenance = obj.enumerated("provenance", Provenance::parse)?;
    let intent = match obj.get_optional("intent") {
        None => None,
        Some(v) => {
            let o = obj.child(v, "intent")?;
            Some(IntentLabel {
                name: o.string("name")?,
                description: o.string("description")?,
            })
        }
    };
    let transition_candidates = match obj.get_optional("transition_candidates") {
        None => Vec::new(),
        Some(v) => obj
            .array(v, "transition_candidates")?
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.as_str()
                    .map(normalize_whitespace)
                    .ok_or_else(|| SchemaError::WrongType {
                        path: format!("transition_candidates[{i}]"),
                        expected: "string",
                    })
            })
            .collect::<Result<_, _>>()?,
    };
    let turns_value = obj.required("turns")?;
    let turns = obj
        .array(turns_value, "turns")?
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let o = obj.child(t, &format!("turns[{i}]"))?;
            let meta = match o.get_optional("meta") {
                None => Map::new(),
                Some(Value::Object(m)) => m.clone(),
                Some(_) => {
                    return Err(SchemaError::WrongType {
                        path: o.path("meta"),
                        expected: "object",
                    })
                }
            };
            Ok(Turn {
                speaker: o.enumerated("speaker", Speaker::parse)?,
                text: normalize_whitespace(&o.string("text")?),
                phase: o.enumerated("phase", Phase::parse)?,
                meta,
            })
        })
        .collect::<Result<_, _>>()?;

    Ok(Dialogue {
        id,
        seed,
        provenance,
        intent,
        transition_candidates,
        turns,
    })
}

/// Read a newline-delimited corpus; blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Dialogue>, CorpusError> {
    let mut dialogues = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: "<reader>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let dialogue = from_json(&line).map_err(|source| CorpusError::Schema { line: i + 1, source })?;
        dialogues.push(dialogue);
    }
    Ok(dialogues)
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<Dialogue>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(BufReader::new(file))
}

/// Write dialogues one per line. Fails on the first invalid dialogue.
pub fn write_corpus<W: Write>(mut writer: W, dialogues: &[Dialogue]) -> Result<(), CorpusError> {
    for d in dialogues {
        let line = to_json(d)?;
        writeln!(writer, "{line}").map_err(|source| CorpusError::Io {
            path: "<writer>".into(),
            source,
        })?;
    }
    Ok(())
}

/// A JSON object being decoded, with the path used in error messages.
struct Obj<'a> {
    map: &'a Map<String, Value>,
    prefix: String,
}

impl<'a> Obj<'a> {
    fn root(value: &'a Value) -> Result<Obj<'a>, SchemaError> {
        match value {
            Value::Object(map) => Ok(Obj {
                map,
                prefix: String::new(),
            }),
            _ => Err(SchemaError::WrongType {
                path: "<root>".into(),
                expected: "object",
            }),
        }
    }

    fn child(&self, value: &'a Value, path: &str) -> Result<Obj<'a>, SchemaError> {
        let full = self.path(path);
        match value {
            Value::Object(map) => Ok(Obj {
                map,
                prefix: format!("{full}."),
            }),
            _ => Err(SchemaError::WrongType {
                path: full,
                expected: "object",
            }),
        }
    }

    fn path(&self, key: &str) -> String {
        format!("{}{key}", self.prefix)
    }

    fn get_optional(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn required(&self, key: &str) -> Result<&'a Value, SchemaError> {
        self.get_optional(key)
            .ok_or_else(|| SchemaError::Required(self.path(key)))
    }

    fn string(&self, key: &str) -> Result<String, SchemaError> {
        self.required(key)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| SchemaError::WrongType {
                path: self.path(key),
                expected: "string",
            })
    }

    fn unsigned(&self, key: &str) -> Result<u64, SchemaError> {
        self.required(key)?
            .as_u64()
            .ok_or_else(|| SchemaError::WrongType {
                path: self.path(key),
                expected: "unsigned integer",
            })
    }

    fn enumerated<T>(&self, key: &str, parse: fn(&str) -> Option<T>) -> Result<T, SchemaError> {
        let raw = self.required(key)?;
        let s = raw.as_str().ok_or_else(|| SchemaError::WrongType {
            path: self.path(key),
            expected: "string",
        })?;
        parse(s).ok_or_else(|| SchemaError::NotInEnum(self.path(key)))
    }

    fn array(&self, value: &'a Value, key: &str) -> Result<&'a Vec<Value>, SchemaError> {
        value.as_array().ok_or_else(|| SchemaError::WrongType {
            path: self.path(key),
            expected: "array",
        })
    }
}
