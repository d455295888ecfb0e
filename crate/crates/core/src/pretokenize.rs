//! Byte-level pre-tokenization.
//!
//! Documents are split into pre-tokens before training and encoding; merges
//! never cross pre-token boundaries. The default scheme works on raw bytes
//! and produces, greedily left to right:
//!
//! * an optional single leading space glued to a maximal letter run
//!   (`" numpy"`), where "letter" means ASCII alphabetic or any byte >= 0x80
//!   so multi-byte UTF-8 sequences stay inside word-like units,
//! * maximal ASCII digit runs, kept intact (`"123456"` is one pre-token),
//! * maximal punctuation/symbol runs,
//! * maximal whitespace runs, except that each `\n` is its own pre-token and
//!   a space immediately followed by a letter is left for the next token.
//!
//! The scheme identifier is stored in tokenizer files, so any artifact
//! records exactly how its corpus was split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the default splitting scheme.
pub const DEFAULT_SCHEME: &str = "byte-class-v1";

/// Pre-tokenizer settings carried inside a tokenizer file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreTokenizerConfig {
    pub scheme: String,
}

impl Default for PreTokenizerConfig {
    fn default() -> Self {
        PreTokenizerConfig {
            scheme: DEFAULT_SCHEME.to_string(),
        }
    }
}

impl PreTokenizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scheme == DEFAULT_SCHEME {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unknown pre-tokenizer scheme {:?} (supported: {DEFAULT_SCHEME:?})",
                self.scheme
            )))
        }
    }
}

/// A pre-token with its occurrence count inside one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreToken {
    pub bytes: Vec<u8>,
    pub count: u32,
}

#[inline]
fn is_letter(b: u8) -> bool {
    b.is_ascii_alphabetic() || b >= 0x80
}

#[inline]
fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

#[inline]
fn class_other(b: u8) -> bool {
    !is_letter(b) && !b.is_ascii_digit() && !is_space(b)
}

/// Split raw bytes into pre-token slices. Concatenating the slices in order
/// reproduces the input exactly.
pub fn split(text: &[u8]) -> Vec<&[u8]> {
    let mut out = Vec::new();
    let n = text.len();
    let mut i = 0;
    while i < n {
        let b = text[i];
        let start = i;
        if b == b' ' && i + 1 < n && is_letter(text[i + 1]) {
            i += 1;
            while i < n && is_letter(text[i]) {
                i += 1;
            }
        } else if is_letter(b) {
            while i < n && is_letter(text[i]) {
                i += 1;
            }
        } else if b.is_ascii_digit() {
            while i < n && text[i].is_ascii_digit() {
                i += 1;
            }
        } else if b == b'\n' {
            i += 1;
        } else if is_space(b) {
            // Whitespace run; stop at a newline or before a space that
            // begins the next word's leading-space token.
            i += 1;
            while i < n && is_space(text[i]) && text[i] != b'\n' {
                if text[i] == b' ' && i + 1 < n && is_letter(text[i + 1]) {
                    break;
                }
                i += 1;
            }
        } else {
            while i < n && class_other(text[i]) {
                i += 1;
            }
        }
        out.push(&text[start..i]);
    }
    out
}

/// Split a document and aggregate identical pre-tokens, preserving
/// first-occurrence order.
pub fn pretokenize(text: &[u8]) -> Vec<PreToken> {
    let mut order: Vec<PreToken> = Vec::new();
    let mut index: std::collections::HashMap<&[u8], usize> = std::collections::HashMap::new();
    for piece in split(text) {
        if let Some(&at) = index.get(piece) {
            order[at].count += 1;
        } else {
            index.insert(piece, order.len());
            order.push(PreToken {
                bytes: piece.to_vec(),
                count: 1,
            });
        }
    }
    order
}
