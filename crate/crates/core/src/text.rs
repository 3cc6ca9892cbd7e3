//! Shared text normalization.
//!
//! Every component that compares words (corpus statistics, prompt checks,
//! metrics, question typology) goes through [`normalize_tokens`] so that
//! "What", "what" and "what?" are the same token everywhere.

/// Whitespace word count, the convention used for corpus length statistics.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Lowercases a single token and strips leading and trailing characters that
/// are not alphanumeric. Returns `None` when nothing is left.
pub fn normalize_token(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_lowercase())
    }
}

/// Splits on whitespace and normalizes each token, dropping empties.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(normalize_token).collect()
}

/// Normalized tokens joined back with single spaces.
pub fn normalize_phrase(text: &str) -> String {
    normalize_tokens(text).join(" ")
}
