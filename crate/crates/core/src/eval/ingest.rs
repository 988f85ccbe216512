use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use super::{Task, DETECTORS};
use crate::intent::KnownIntent;

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: {column} = {value} is outside [{min}, {max}]")]
    Range {
        row: u64,
        column: String,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("row {row}: {column} = `{value}` is not an integer")]
    NotInteger { row: u64, column: String, value: String },
    #[error("row {row}: `{value}` is not a known intent")]
    UnknownIntent { row: u64, value: String },
    #[error("row {row}: empty {column}")]
    Empty { row: u64, column: String },
    #[error("row {row}: worker {worker} already annotated {item}")]
    Duplicate { row: u64, item: String, worker: String },
    #[error("{0}")]
    Csv(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task1Annotation {
    pub dialogue_id: String,
    pub worker_id: String,
    /// relevance, aggressiveness, overall
    pub scores: [u8; 3],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task2Annotation {
    pub dialogue_id: String,
    pub worker_id: String,
    /// right time, relevance, aggressiveness, overall
    pub scores: [u8; 4],
    pub best_candidate_index: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task3Annotation {
    pub snippet_id: String,
    pub worker_id: String,
    /// Ranks of Detector1..Detector3; ties allowed.
    pub ranks: [u8; 3],
    /// Empty means NONE.
    pub own_intents: BTreeSet<KnownIntent>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Annotations {
    Task1(Vec<Task1Annotation>),
    Task2(Vec<Task2Annotation>),
    Task3(Vec<Task3Annotation>),
}

impl Annotations {
    pub fn len(&self) -> usize {
        match self {
            Annotations::Task1(v) => v.len(),
            Annotations::Task2(v) => v.len(),
            Annotations::Task3(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    columns: &'a HashMap<String, usize>,
    line: u64,
}

impl Row<'_> {
    fn text(&self, column: &str) -> Result<String, IngestError> {
        let value = self.record.get(self.columns[column]).unwrap_or("").trim();
        if value.is_empty() {
            return Err(IngestError::Empty {
                row: self.line,
                column: column.into(),
            });
        }
        Ok(value.to_string())
    }

    fn int(&self, column: &str, min: i64, max: i64) -> Result<u8, IngestError> {
        let raw = self.text(column)?;
        let value: i64 = raw.parse().map_err(|_| IngestError::NotInteger {
            row: self.line,
            column: column.into(),
            value: raw.clone(),
        })?;
        if !(min..=max).contains(&value) {
            return Err(IngestError::Range {
                row: self.line,
                column: column.into(),
                value,
                min,
                max,
            });
        }
        Ok(value as u8)
    }

    fn intents(&self, column: &str) -> Result<BTreeSet<KnownIntent>, IngestError> {
        let raw = self.record.get(self.columns[column]).unwrap_or("");
        let mut out = BTreeSet::new();
        for part in raw.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("NONE") {
                continue;
            }
            let intent = KnownIntent::from_name(part).ok_or_else(|| IngestError::UnknownIntent {
                row: self.line,
                value: part.into(),
            })?;
            out.insert(intent);
        }
        Ok(out)
    }
}

fn required_columns(task: Task) -> Vec<String> {
    let id = if task == Task::Detection {
        "snippet_id"
    } else {
        "dialogue_id"
    };
    let mut cols = vec![id.to_string(), "worker_id".to_string()];
    cols.extend(task.questions().iter().map(|(c, _)| c.to_string()));
    match task {
        Task::Dialogue => {}
        Task::Transition => cols.push("best_idx".into()),
        Task::Detection => {
            cols.extend((1..=DETECTORS.len()).map(|i| format!("rank_d{i}")));
            cols.push("own_intents".into());
        }
    }
    cols
}

/// Parse a filled-in export: the exported columns plus answer columns.
/// Row numbers in errors are file line numbers (the header is line 1).
pub fn read_annotations<R: Read>(reader: R, task: Task) -> Result<Annotations, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::Csv(e.to_string()))?
        .clone();
    let columns: HashMap<String, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    for c in required_columns(task) {
        if !columns.contains_key(&c) {
            return Err(IngestError::MissingColumn(c));
        }
    }

    let mut seen = HashSet::new();
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    let mut t3 = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| IngestError::Csv(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = Row {
            record: &record,
            columns: &columns,
            line,
        };
        let id_column = if task == Task::Detection {
            "snippet_id"
        } else {
            "dialogue_id"
        };
        let item = row.text(id_column)?;
        let worker = row.text("worker_id")?;
        if !seen.insert((item.clone(), worker.clone())) {
            return Err(IngestError::Duplicate {
                row: line,
                item,
                worker,
            });
        }
        match task {
            Task::Dialogue => t1.push(Task1Annotation {
                dialogue_id: item,
                worker_id: worker,
                scores: [row.int("q1", 1, 5)?, row.int("q2", 1, 5)?, row.int("q3", 1, 5)?],
            }),
            Task::Transition => t2.push(Task2Annotation {
                dialogue_id: item,
                worker_id: worker,
                scores: [
                    row.int("q1", 1, 5)?,
                    row.int("q2", 1, 5)?,
                    row.int("q3", 1, 5)?,
                    row.int("q4", 1, 5)?,
                ],
                best_candidate_index: row.int("best_idx", 0, 4)?,
            }),
            Task::Detection => t3.push(Task3Annotation {
                snippet_id: item,
                worker_id: worker,
                ranks: [
                    row.int("rank_d1", 1, 3)?,
                    row.int("rank_d2", 1, 3)?,
                    row.int("rank_d3", 1, 3)?,
                ],
                own_intents: row.intents("own_intents")?,
            }),
        }
    }
    Ok(match task {
        Task::Dialogue => Annotations::Task1(t1),
        Task::Transition => Annotations::Task2(t2),
        Task::Detection => Annotations::Task3(t3),
    })
}

pub fn ingest_annotations(path: &Path, task: Task) -> Result<Annotations, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::Csv(format!("{}: {e}", path.display())))?;
    read_annotations(file, task)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1(rows: &[&str]) -> Result<Annotations, IngestError> {
        let mut raw = String::from("dialogue_id,dialogue,worker_id,q1,q2,q3\n");
        for r in rows {
            raw.push_str(r);
            raw.push('\n');
        }
        read_annotations(raw.as_bytes(), Task::Dialogue)
    }

    #[test]
    fn nine_rows() {
        let rows: Vec<String> = (0..3)
            .flat_map(|d| (0..3).map(move |w| format!("d{d},\"User: a\nSales: b\",w{w},3,2,4")))
            .collect();
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let a = t1(&refs).unwrap();
        assert_eq!(a.len(), 9);
        let Annotations::Task1(v) = a else { panic!() };
        assert_eq!(v[0].scores, [3, 2, 4]);
    }

    #[test]
    fn zero_score_is_a_range_error_with_row() {
        let err = t1(&["d,x,w1,3,3,3", "d,x,w2,0,3,3"]).unwrap_err();
        assert_eq!(
            err,
            IngestError::Range {
                row: 3,
                column: "q1".into(),
                value: 0,
                min: 1,
                max: 5
            }
        );
        assert!(matches!(
            t1(&["d,x,w1,6,3,3"]),
            Err(IngestError::Range { value: 6, .. })
        ));
        assert!(matches!(
            t1(&["d,x,w1,x,3,3"]),
            Err(IngestError::NotInteger { .. })
        ));
    }

    #[test]
    fn duplicate_worker() {
        assert!(matches!(
            t1(&["d,x,w1,3,3,3", "d,x,w1,4,4,4"]),
            Err(IngestError::Duplicate { row: 3, .. })
        ));
    }

    #[test]
    fn missing_column() {
        let err = read_annotations("dialogue_id,worker_id,q1,q2\n".as_bytes(), Task::Dialogue).unwrap_err();
        assert_eq!(err, IngestError::MissingColumn("q3".into()));
    }

    #[test]
    fn task2_best_index_range() {
        let head = "dialogue_id,worker_id,q1,q2,q3,q4,best_idx\n";
        let ok = format!("{head}d,w,1,2,3,4,4\n");
        assert!(read_annotations(ok.as_bytes(), Task::Transition).is_ok());
        let bad = format!("{head}d,w,1,2,3,4,5\n");
        assert!(matches!(
            read_annotations(bad.as_bytes(), Task::Transition),
            Err(IngestError::Range { ref column, .. }) if column == "best_idx"
        ));
    }

    #[test]
    fn task3_intents() {
        let head = "snippet_id,worker_id,rank_d1,rank_d2,rank_d3,own_intents\n";
        let raw = format!("{head}s,w1,1,1,3,FindMovies; PlaySong\ns,w2,2,1,3,NONE\ns,w3,2,1,3,\n");
        let Annotations::Task3(v) = read_annotations(raw.as_bytes(), Task::Detection).unwrap() else {
            panic!()
        };
        assert_eq!(v[0].own_intents.len(), 2);
        assert!(v[1].own_intents.is_empty() && v[2].own_intents.is_empty());
        let bad = format!("{head}s,w1,1,1,3,BookFlight\n");
        assert!(matches!(
            read_annotations(bad.as_bytes(), Task::Detection),
            Err(IngestError::UnknownIntent { row: 2, .. })
        ));
    }
}
