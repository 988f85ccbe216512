//! The catalog of yes/no questions asked to detect each intent.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ParaphraseBackend};
use crate::intent::IntentLabel;
use crate::text::match_key;

pub const DEFAULT_PARAPHRASES: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntentQuestionSet {
    pub intent: IntentLabel,
    pub base_question: String,
    pub paraphrases: Vec<String>,
}

impl IntentQuestionSet {
    /// Base question first, then paraphrases in order.
    pub fn questions(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.base_question.as_str()).chain(self.paraphrases.iter().map(String::as_str))
    }

    pub fn contains_question(&self, question: &str) -> bool {
        let key = match_key(question);
        self.questions().any(|q| match_key(q) == key)
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("intent {0} has an empty description")]
    EmptyDescription(String),
    #[error("catalog file {path}: {message}")]
    File { path: String, message: String },
}

/// One question set per intent. Built-in intents get their hand-written
/// question; others get `Is the user asking about {gerund phrase}?`.
pub fn build_question_catalog(intents: &[IntentLabel]) -> Result<Vec<IntentQuestionSet>, CatalogError> {
    intents
        .iter()
        .map(|intent| {
            if intent.description.trim().is_empty() {
                return Err(CatalogError::EmptyDescription(intent.name.clone()));
            }
            let base_question = match intent.known() {
                Some(known) => known.base_question().to_string(),
                None => format!("Is the user asking about {}?", gerund_phrase(&intent.description)),
            };
            Ok(IntentQuestionSet {
                intent: intent.clone(),
                base_question,
                paraphrases: Vec::new(),
            })
        })
        .collect()
}

/// Add up to `n_per_intent` paraphrases to every set. Paraphrases that
/// duplicate the base question or another paraphrase (case and whitespace
/// insensitive) are dropped. On error nothing is committed.
pub fn augment_with_paraphrases(
    catalog: &[IntentQuestionSet],
    backend: &dyn ParaphraseBackend,
    n_per_intent: usize,
) -> Result<Vec<IntentQuestionSet>, BackendError> {
    let mut out = catalog.to_vec();
    if n_per_intent == 0 {
        return Ok(out);
    }
    for set in out.iter_mut() {
        let mut seen: Vec<String> = set.questions().map(match_key).collect();
        for candidate in backend.paraphrase(&set.base_question, n_per_intent)? {
            let key = match_key(&candidate);
            if !seen.contains(&key) {
                seen.push(key);
                set.paraphrases.push(candidate);
            }
        }
    }
    Ok(out)
}

/// Turn an imperative description ("find movies to watch") into a gerund
/// phrase ("finding movies to watch").
pub fn gerund_phrase(description: &str) -> String {
    let description = description.trim().trim_end_matches(['.', '?', '!']);
    let mut words = description.split_whitespace();
    let Some(first) = words.next() else {
        return String::new();
    };
    let rest: Vec<&str> = words.collect();
    let mut verb = gerund(&first.to_lowercase());
    if !rest.is_empty() {
        verb.push(' ');
        verb.push_str(&rest.join(" "));
    }
    verb
}

fn gerund(verb: &str) -> String {
    const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];
    if verb.ends_with("ing") && verb.len() > 4 {
        return verb.to_string();
    }
    if let Some(stem) = verb.strip_suffix("ie") {
        return format!("{stem}ying");
    }
    if verb.ends_with('e') && !verb.ends_with("ee") && !verb.ends_with("ye") && verb.len() > 2 {
        return format!("{}ing", &verb[..verb.len() - 1]);
    }
    let chars: Vec<char> = verb.chars().collect();
    let n = chars.len();
    // Short consonant-vowel-consonant verbs double the final consonant
    // (get -> getting, shop -> shopping).
    if (3..=4).contains(&n) && !matches!(verb, "open" | "edit") {
        let (a, b, c) = (chars[n - 3], chars[n - 2], chars[n - 1]);
        if !VOWELS.contains(&a)
            && VOWELS.contains(&b)
            && !VOWELS.contains(&c)
            && !matches!(c, 'w' | 'x' | 'y')
            && c.is_ascii_alphabetic()
        {
            return format!("{verb}{c}ing");
        }
    }
    format!("{verb}ing")
}

#[derive(Serialize, Deserialize)]
struct CatalogRecord {
    intent: String,
    description: String,
    base_question: String,
    #[serde(default)]
    paraphrases: Vec<String>,
}

pub fn catalog_to_json(catalog: &[IntentQuestionSet]) -> String {
    let records: Vec<CatalogRecord> = catalog
        .iter()
        .map(|s| CatalogRecord {
            intent: s.intent.name.clone(),
            description: s.intent.description.clone(),
            base_question: s.base_question.clone(),
            paraphrases: s.paraphrases.clone(),
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("catalog serializes")
}

pub fn catalog_from_json(raw: &str) -> Result<Vec<IntentQuestionSet>, serde_json::Error> {
    let records: Vec<CatalogRecord> = serde_json::from_str(raw)?;
    Ok(records
        .into_iter()
        .map(|r| IntentQuestionSet {
            intent: IntentLabel::new(r.intent, r.description),
            base_question: r.base_question,
            paraphrases: r.paraphrases,
        })
        .collect())
}

pub fn load_catalog(path: &Path) -> Result<Vec<IntentQuestionSet>, CatalogError> {
    let err = |message: String| CatalogError::File {
        path: path.display().to_string(),
        message,
    };
    let raw = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    catalog_from_json(&raw).map_err(|e| err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockParaphrase;
    use crate::intent::{known_labels, KnownIntent};

    #[test]
    fn built_in_questions() {
        let catalog = build_question_catalog(&known_labels()).unwrap();
        assert_eq!(catalog.len(), 6);
        let q = |i: KnownIntent| catalog[i.rank()].base_question.clone();
        assert_eq!(
            q(KnownIntent::PlaySong),
            "Is the user asking about playing songs?"
        );
        assert_eq!(
            q(KnownIntent::FindAttractions),
            "Is the user asking about finding attractions?"
        );
        assert!(catalog.iter().all(|s| s.paraphrases.is_empty()));
    }

    #[test]
    fn empty_intent_list_gives_empty_catalog() {
        assert!(build_question_catalog(&[]).unwrap().is_empty());
    }

    #[test]
    fn unknown_intents_get_generated_questions() {
        let catalog = build_question_catalog(&[
            IntentLabel::new("ReserveRestaurant", "Reserve a table at a restaurant."),
            IntentLabel::new("GetRide", "get a cab to a destination"),
            IntentLabel::new("BuyBus", "buy bus tickets"),
        ])
        .unwrap();
        assert_eq!(
            catalog[0].base_question,
            "Is the user asking about reserving a table at a restaurant?"
        );
        assert_eq!(
            catalog[1].base_question,
            "Is the user asking about getting a cab to a destination?"
        );
        assert_eq!(
            catalog[2].base_question,
            "Is the user asking about buying bus tickets?"
        );
    }

    #[test]
    fn empty_description_names_the_intent() {
        let err = build_question_catalog(&[IntentLabel::new("Foo", " ")]).unwrap_err();
        assert_eq!(err.to_string(), "intent Foo has an empty description");
    }

    #[test]
    fn gerunds() {
        for (verb, expected) in [
            ("find", "finding"),
            ("play", "playing"),
            ("obtain", "obtaining"),
            ("make", "making"),
            ("shop", "shopping"),
            ("book", "booking"),
            ("visit", "visiting"),
            ("see", "seeing"),
            ("lie", "lying"),
            ("fix", "fixing"),
            ("open", "opening"),
        ] {
            assert_eq!(gerund(verb), expected);
        }
    }

    #[test]
    fn augmentation_adds_distinct_paraphrases() {
        let catalog = build_question_catalog(&known_labels()).unwrap();
        let augmented = augment_with_paraphrases(&catalog, &MockParaphrase::new("p"), 3).unwrap();
        for set in &augmented {
            assert!(set.paraphrases.len() <= 3);
            let mut keys: Vec<String> = set.questions().map(match_key).collect();
            let n = keys.len();
            keys.sort();
            keys.dedup();
            assert_eq!(keys.len(), n, "duplicates in {set:?}");
        }
        assert_eq!(augmented[0].base_question, catalog[0].base_question);
    }

    #[test]
    fn zero_paraphrases_is_identity() {
        let catalog = build_question_catalog(&known_labels()).unwrap();
        assert_eq!(
            augment_with_paraphrases(&catalog, &MockParaphrase::new("p"), 0).unwrap(),
            catalog
        );
    }

    struct Echo;
    impl ParaphraseBackend for Echo {
        fn name(&self) -> &str {
            "echo"
        }
        fn generate_paraphrases(&self, question: &str, n: usize) -> Result<Vec<String>, BackendError> {
            let mut out = vec![question.to_uppercase()];
            out.extend((1..n).map(|i| format!("Variant {i}?")));
            Ok(out)
        }
    }

    #[test]
    fn verbatim_base_question_is_dropped() {
        let catalog = build_question_catalog(&[KnownIntent::PlaySong.label()]).unwrap();
        let augmented = augment_with_paraphrases(&catalog, &Echo, 3).unwrap();
        assert_eq!(augmented[0].paraphrases, vec!["Variant 1?", "Variant 2?"]);
    }

    #[test]
    fn catalog_json_round_trip() {
        let catalog = augment_with_paraphrases(
            &build_question_catalog(&known_labels()).unwrap(),
            &MockParaphrase::new("p"),
            2,
        )
        .unwrap();
        let json = catalog_to_json(&catalog);
        assert!(json.contains("\"base_question\""));
        assert_eq!(catalog_from_json(&json).unwrap(), catalog);
    }
}
