//! Rule-based token categorisation.
//!
//! Rules are evaluated in a fixed order and the first match wins:
//! special-token pattern, signed digit runs, majority-punctuation tokens,
//! variable/function names (underscore-joined words or mixed-case camel),
//! all-caps Latin words, other Latin words, tokens containing non-Latin
//! characters, and a final catch-all. One leading space (the byte-level
//! word-boundary marker) is stripped first; tokens that do not decode as
//! UTF-8 go to NonLatin when they contain non-ASCII bytes, otherwise Other.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use crate::error::Result;
use crate::escape::unescape_bytes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TokenCategory {
    SpecialToken,
    DigitsAndNumbers,
    Punctuation,
    VariableOrFunctionName,
    AllCapsLatin,
    OtherLatin,
    NonLatin,
    Other,
}

impl TokenCategory {
    pub const ALL: [TokenCategory; 8] = [
        TokenCategory::SpecialToken,
        TokenCategory::DigitsAndNumbers,
        TokenCategory::Punctuation,
        TokenCategory::VariableOrFunctionName,
        TokenCategory::AllCapsLatin,
        TokenCategory::OtherLatin,
        TokenCategory::NonLatin,
        TokenCategory::Other,
    ];

    /// Human-readable row label for reports.
    pub fn label(self) -> &'static str {
        match self {
            TokenCategory::SpecialToken => "Special tokens",
            TokenCategory::DigitsAndNumbers => "Digits and numbers",
            TokenCategory::Punctuation => "Punctuation",
            TokenCategory::VariableOrFunctionName => "Full or partial variable or function names",
            TokenCategory::AllCapsLatin => "ALL-CAPS Latin words",
            TokenCategory::OtherLatin => "Other Latin words",
            TokenCategory::NonLatin => "Non-Latin words or characters",
            TokenCategory::Other => "Other",
        }
    }
}

static SPECIAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^<[^>]+>$").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?[0-9]+$").unwrap());
static CAMEL_NAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[a-zA-Z]*[A-Z][a-zA-Z]*$").unwrap());
static ALL_CAPS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[A-Z]+$").unwrap());
static LATIN_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\p{Latin}+$").unwrap());
static PUNCT_CHAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\p{P}$").unwrap());

/// ASCII punctuation per the conventional `string.punctuation` set.
fn is_ascii_punct(c: char) -> bool {
    c.is_ascii() && c.is_ascii_punctuation()
}

fn is_punct_char(c: char) -> bool {
    is_ascii_punct(c) || PUNCT_CHAR.is_match(c.encode_utf8(&mut [0; 4]))
}

fn is_latin_char(c: char) -> bool {
    c.is_ascii() || LATIN_WORD.is_match(c.encode_utf8(&mut [0; 4]))
}

/// Categorise one token given as raw bytes.
pub fn classify(token: &[u8]) -> TokenCategory {
    let token = token.strip_prefix(b" ").unwrap_or(token);
    let Ok(text) = std::str::from_utf8(token) else {
        return if token.iter().any(|&b| b >= 0x80) {
            TokenCategory::NonLatin
        } else {
            TokenCategory::Other
        };
    };
    if text.is_empty() {
        return TokenCategory::Other;
    }
    if SPECIAL.is_match(text) {
        return TokenCategory::SpecialToken;
    }
    if NUMBER.is_match(text) {
        return TokenCategory::DigitsAndNumbers;
    }
    let chars = text.chars().count();
    let punct = text.chars().filter(|&c| is_punct_char(c)).count();
    if punct as f64 > 0.8 * chars as f64 {
        return TokenCategory::Punctuation;
    }
    if is_variable_name(text) {
        return TokenCategory::VariableOrFunctionName;
    }
    if ALL_CAPS.is_match(text) {
        return TokenCategory::AllCapsLatin;
    }
    if LATIN_WORD.is_match(text) {
        return TokenCategory::OtherLatin;
    }
    if text.chars().any(|c| !is_latin_char(c)) {
        return TokenCategory::NonLatin;
    }
    TokenCategory::Other
}

/// Underscore-joined alphabetic words, or a camel-shaped name. All-caps
/// words are left for the ALL-CAPS rule, so the camel shape additionally
/// requires a lowercase letter.
fn is_variable_name(text: &str) -> bool {
    if text.contains('_') {
        let mut segments = text.split('_');
        return segments.all(|seg| !seg.is_empty() && seg.chars().all(|c| c.is_ascii_alphabetic()));
    }
    CAMEL_NAME.is_match(text) && text.chars().any(|c| c.is_ascii_lowercase())
}

/// Categorise a token written in escaped form.
pub fn classify_escaped(token: &str) -> Result<TokenCategory> {
    Ok(classify(&unescape_bytes(token)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct CategoryRow {
    pub category: TokenCategory,
    pub label: &'static str,
    pub count: usize,
    pub percentage: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyReport {
    pub total: usize,
    pub rows: Vec<CategoryRow>,
}

/// Count categories over a token list and report counts plus percentages of
/// the input set, one row per category in rule order.
pub fn classify_report<'a, I>(tokens: I) -> ClassifyReport
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut counts: BTreeMap<TokenCategory, usize> = BTreeMap::new();
    let mut total = 0usize;
    for token in tokens {
        *counts.entry(classify(token)).or_insert(0) += 1;
        total += 1;
    }
    let rows = TokenCategory::ALL
        .into_iter()
        .map(|category| {
            let count = counts.get(&category).copied().unwrap_or(0);
            CategoryRow {
                category,
                label: category.label(),
                count,
                percentage: if total == 0 {
                    0.0
                } else {
                    100.0 * count as f64 / total as f64
                },
            }
        })
        .collect();
    ClassifyReport { total, rows }
}
