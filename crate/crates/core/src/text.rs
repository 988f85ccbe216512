//! Utterance text normalization.

/// Trim and collapse internal whitespace runs to a single space.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Matching key used for equality checks (repetition, deduplication):
/// whitespace-normalized and lower-cased.
pub fn match_key(text: &str) -> String {
    normalize_whitespace(text).to_lowercase()
}
