use std::collections::BTreeMap;
use std::sync::LazyLock;

use rand::Rng;
use regex::Regex;
use thiserror::Error;

use crate::dialogue::{Phase, Speaker, Turn};
use crate::intent::{IntentLabel, KnownIntent};
use crate::seed::rng;
use crate::sgd::SgdCorpus;

static SLOT_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[[a-z_]+\]").unwrap());

#[derive(Debug, Error, PartialEq)]
pub enum TodError {
    #[error("no SGD dialogue indexed for intent {0}")]
    EmptyBucket(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexedDialogue {
    pub id: String,
    /// Starts at the first USER turn and alternates.
    pub turns: Vec<(Speaker, String)>,
}

/// SGD dialogues grouped by the built-in intents they are annotated with.
#[derive(Clone, Debug, Default)]
pub struct SgdIndex {
    pub buckets: BTreeMap<String, Vec<IndexedDialogue>>,
    /// Schema descriptions of the indexed intents, when the corpus had them.
    pub descriptions: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl SgdIndex {
    pub fn bucket(&self, intent: &str) -> &[IndexedDialogue] {
        self.buckets.get(intent).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.values().all(Vec::is_empty)
    }

    /// The schema description for `intent`, falling back to its own.
    pub fn description_for(&self, intent: &IntentLabel) -> String {
        self.descriptions
            .get(&intent.name)
            .cloned()
            .unwrap_or_else(|| intent.description.clone())
    }
}

fn brackets_well_formed(text: &str) -> bool {
    !SLOT_TOKEN.replace_all(text, "").contains(['[', ']'])
}

pub fn index_sgd(corpus: &SgdCorpus) -> SgdIndex {
    let mut index = SgdIndex::default();
    for dialogue in &corpus.dialogues {
        let intents: Vec<String> = dialogue
            .intents()
            .into_iter()
            .filter(|i| KnownIntent::from_name(i).is_some())
            .collect();
        if intents.is_empty() {
            continue;
        }
        let Some(start) = dialogue.turns.iter().position(|t| t.speaker == Speaker::User) else {
            index
                .warnings
                .push(format!("{}: no USER turn, excluded", dialogue.id));
            continue;
        };
        let turns: Vec<(Speaker, String)> = dialogue.turns[start..]
            .iter()
            .map(|t| (t.speaker, t.text.clone()))
            .collect();
        if turns.windows(2).any(|w| w[0].0 == w[1].0) {
            index
                .warnings
                .push(format!("{}: speakers do not alternate, excluded", dialogue.id));
            continue;
        }
        if let Some((_, bad)) = turns.iter().find(|(_, t)| !brackets_well_formed(t)) {
            index.warnings.push(format!(
                "{}: malformed slot brackets in `{bad}`, excluded",
                dialogue.id
            ));
            continue;
        }
        let entry = IndexedDialogue {
            id: dialogue.id.clone(),
            turns,
        };
        for intent in intents {
            index.buckets.entry(intent).or_default().push(entry.clone());
        }
    }
    for name in index.buckets.keys() {
        if let Some(d) = corpus.intent_descriptions.get(name) {
            index.descriptions.insert(name.clone(), d.clone());
        }
    }
    if index.is_empty() {
        index
            .warnings
            .push("no dialogue is annotated with a supported intent; the index is empty".into());
    }
    index
}

/// Sample one indexed dialogue for `intent` and return it as TOD turns.
pub fn merge_continuation(intent: &IntentLabel, index: &SgdIndex, seed: u64) -> Result<Vec<Turn>, TodError> {
    let bucket = index.bucket(&intent.name);
    if bucket.is_empty() {
        return Err(TodError::EmptyBucket(intent.name.clone()));
    }
    let picked = &bucket[rng(seed).random_range(0..bucket.len())];
    Ok(picked
        .turns
        .iter()
        .map(|(speaker, text)| Turn::new(*speaker, text, Phase::Tod).with_meta("sgd_id", picked.id.as_str()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgd::{SgdDialogue, SgdTurn};

    fn dlg(id: &str, intent: &str, lines: &[(Speaker, &str)]) -> SgdDialogue {
        SgdDialogue {
            id: id.into(),
            turns: lines
                .iter()
                .map(|(s, t)| SgdTurn {
                    speaker: *s,
                    text: t.to_string(),
                    active_intents: if *s == Speaker::User {
                        intent
                            .split(',')
                            .filter(|i| !i.is_empty())
                            .map(String::from)
                            .collect()
                    } else {
                        Default::default()
                    },
                })
                .collect(),
        }
    }

    fn corpus(dialogues: Vec<SgdDialogue>) -> SgdCorpus {
        SgdCorpus {
            dialogues,
            intent_descriptions: BTreeMap::new(),
        }
    }

    const U: Speaker = Speaker::User;
    const S: Speaker = Speaker::Sales;

    #[test]
    fn bucket_sizes() {
        let c = corpus(vec![
            dlg("1", "FindMovies", &[(U, "a"), (S, "b")]),
            dlg("2", "FindMovies", &[(U, "a"), (S, "b")]),
            dlg("3", "PlaySong", &[(U, "a"), (S, "b")]),
            dlg("4", "FindMovies,PlaySong", &[(U, "a")]),
        ]);
        let idx = index_sgd(&c);
        assert_eq!(idx.bucket("FindMovies").len(), 3);
        assert_eq!(idx.bucket("PlaySong").len(), 2);
        assert!(idx.warnings.is_empty());
    }

    #[test]
    fn out_of_scope_only_gives_empty_index_with_warning() {
        let idx = index_sgd(&corpus(vec![dlg("1", "ReserveHotel", &[(U, "a")])]));
        assert!(idx.is_empty());
        assert_eq!(idx.warnings.len(), 1);
    }

    #[test]
    fn bad_dialogues_are_excluded() {
        let idx = index_sgd(&corpus(vec![
            dlg("brackets", "PlaySong", &[(U, "a"), (S, "play [song_name")]),
            dlg("upper", "PlaySong", &[(U, "a"), (S, "play [Song]")]),
            dlg("alternation", "PlaySong", &[(U, "a"), (U, "b")]),
            dlg("ok", "PlaySong", &[(U, "a"), (S, "play [song_name] now")]),
        ]));
        assert_eq!(idx.bucket("PlaySong").len(), 1);
        assert_eq!(idx.warnings.len(), 3);
    }

    #[test]
    fn merge_drops_leading_sales_turns() {
        let idx = index_sgd(&corpus(vec![dlg(
            "g",
            "FindMovies",
            &[(S, "Hello!"), (U, "Find me a movie."), (S, "How about [title]?")],
        )]));
        let turns = merge_continuation(&KnownIntent::FindMovies.label(), &idx, 1).unwrap();
        assert_eq!(turns.len(), 2);
        assert_eq!(turns[0].speaker, U);
        assert!(turns
            .iter()
            .all(|t| t.phase == Phase::Tod && t.meta["sgd_id"] == "g"));
    }

    #[test]
    fn merge_is_seeded_and_errors_on_empty_bucket() {
        let idx = index_sgd(&corpus(
            (0..20)
                .map(|i| dlg(&i.to_string(), "PlaySong", &[(U, &format!("song {i}"))]))
                .collect(),
        ));
        let label = KnownIntent::PlaySong.label();
        assert_eq!(
            merge_continuation(&label, &idx, 9).unwrap(),
            merge_continuation(&label, &idx, 9).unwrap()
        );
        let picks: std::collections::BTreeSet<String> = (0..50)
            .map(|s| merge_continuation(&label, &idx, s).unwrap()[0].text.clone())
            .collect();
        assert!(picks.len() > 5);
        assert_eq!(
            merge_continuation(&KnownIntent::LookupSong.label(), &idx, 0),
            Err(TodError::EmptyBucket("LookupSong".into()))
        );
    }
}
