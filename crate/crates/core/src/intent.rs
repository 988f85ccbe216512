//! The task-oriented intents the pipeline targets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six target intents, in canonical order.
///
/// The declaration order is significant: it is the tie-break order used by
/// intent detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KnownIntent {
    FindMovies,
    GetTimesForMovie,
    FindAttractions,
    LookupMusic,
    PlaySong,
    LookupSong,
}

impl KnownIntent {
    pub const ALL: [KnownIntent; 6] = [
        KnownIntent::FindMovies,
        KnownIntent::GetTimesForMovie,
        KnownIntent::FindAttractions,
        KnownIntent::LookupMusic,
        KnownIntent::PlaySong,
        KnownIntent::LookupSong,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KnownIntent::FindMovies => "FindMovies",
            KnownIntent::GetTimesForMovie => "GetTimesForMovie",
            KnownIntent::FindAttractions => "FindAttractions",
            KnownIntent::LookupMusic => "LookupMusic",
            KnownIntent::PlaySong => "PlaySong",
            KnownIntent::LookupSong => "LookupSong",
        }
    }

    /// Short natural-language description of the intent.
    pub fn description(self) -> &'static str {
        match self {
            KnownIntent::FindMovies => "find movies to watch",
            KnownIntent::GetTimesForMovie => "obtain the available time for watching a movie",
            KnownIntent::FindAttractions => "find attractions to visit",
            KnownIntent::LookupMusic => "find music to listen to",
            KnownIntent::PlaySong => "play songs",
            KnownIntent::LookupSong => "find songs to listen to",
        }
    }

    /// The hand-written yes/no detection question for the intent.
    pub fn base_question(self) -> &'static str {
        match self {
            KnownIntent::FindMovies => "Is the user asking about finding movies?",
            KnownIntent::GetTimesForMovie => "Is the user asking about getting the time for movies?",
            KnownIntent::FindAttractions => "Is the user asking about finding attractions?",
            KnownIntent::LookupMusic => "Is the user asking about looking up music?",
            KnownIntent::PlaySong => "Is the user asking about playing songs?",
            KnownIntent::LookupSong => "Is the user asking about looking up songs?",
        }
    }

    /// Position in the canonical order.
    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn label(self) -> IntentLabel {
        IntentLabel {
            name: self.name().to_string(),
            description: self.description().to_string(),
        }
    }

    pub fn from_name(name: &str) -> Option<KnownIntent> {
        KnownIntent::ALL.into_iter().find(|i| i.name() == name)
    }
}

impl fmt::Display for KnownIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KnownIntent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KnownIntent::from_name(s).ok_or_else(|| format!("unknown intent `{s}`"))
    }
}

/// An intent name together with its description.
///
/// The name is an open string so that catalogs can be extended beyond the
/// built-in six; [`IntentLabel::known`] resolves the built-in ones.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntentLabel {
    pub name: String,
    pub description: String,
}

impl IntentLabel {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        IntentLabel {
            name: name.into(),
            description: description.into(),
        }
    }

    pub fn known(&self) -> Option<KnownIntent> {
        KnownIntent::from_name(&self.name)
    }

    /// Sort key for tie-breaking: built-in intents first in canonical order.
    pub fn canonical_rank(&self) -> Option<usize> {
        self.known().map(KnownIntent::rank)
    }
}

impl From<KnownIntent> for IntentLabel {
    fn from(intent: KnownIntent) -> Self {
        intent.label()
    }
}

/// Labels for all six built-in intents in canonical order.
pub fn known_labels() -> Vec<IntentLabel> {
    KnownIntent::ALL.iter().map(|i| i.label()).collect()
}
