//! Intrinsic tokenizer evaluation.
//!
//! Compression rate is corpus bytes divided by emitted token count; coverage
//! is the number of vocabulary tokens used at least once; mean token length
//! is averaged over merged vocabulary types (base bytes and reserved tokens
//! excluded, with an inclusive variant reported alongside). Per-language
//! breakdowns, the Gini disparity of per-language compression, three-digit
//! number counts, identifier name-part histograms, token frequency export,
//! and vocabulary diffs round out the report.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::escape::escape_bytes;
use crate::tokenizer::Tokenizer;
use crate::TokenId;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LangMetrics {
    pub bytes: u64,
    pub tokens: u64,
    pub compression_rate: f64,
    pub coverage: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub compression_rate: f64,
    pub coverage: usize,
    /// Mean byte-length over merged vocabulary types.
    pub mean_token_length: f64,
    /// Variant including base bytes and reserved tokens.
    pub mean_token_length_all_types: f64,
    pub gini: f64,
    pub three_digit_count: usize,
    pub total_bytes: u64,
    pub total_tokens: u64,
    pub vocab_size: usize,
    pub per_language: BTreeMap<String, LangMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_executed: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_skipped: Option<usize>,
}

impl MetricsReport {
    pub fn set_steps(&mut self, executed: usize, skipped: usize) {
        self.steps_executed = Some(executed);
        self.steps_skipped = Some(skipped);
    }

    /// Flat CSV header matching [`MetricsReport::csv_row`].
    pub const CSV_HEADER: [&'static str; 10] = [
        "compression_rate",
        "coverage",
        "mean_token_length",
        "mean_token_length_all_types",
        "gini",
        "three_digit_count",
        "total_bytes",
        "total_tokens",
        "steps_executed",
        "steps_skipped",
    ];

    pub fn csv_row(&self) -> [String; 10] {
        [
            self.compression_rate.to_string(),
            self.coverage.to_string(),
            self.mean_token_length.to_string(),
            self.mean_token_length_all_types.to_string(),
            self.gini.to_string(),
            self.three_digit_count.to_string(),
            self.total_bytes.to_string(),
            self.total_tokens.to_string(),
            self.steps_executed.map(|v| v.to_string()).unwrap_or_default(),
            self.steps_skipped.map(|v| v.to_string()).unwrap_or_default(),
        ]
    }
}

#[derive(Default)]
struct Agg {
    bytes: u64,
    tokens: u64,
    used: HashSet<TokenId>,
    per_lang: HashMap<String, (u64, u64, HashSet<TokenId>)>,
}

impl Agg {
    fn absorb(mut self, other: Agg) -> Agg {
        self.bytes += other.bytes;
        self.tokens += other.tokens;
        self.used.extend(other.used);
        for (lang, (bytes, tokens, used)) in other.per_lang {
            let slot = self.per_lang.entry(lang).or_default();
            slot.0 += bytes;
            slot.1 += tokens;
            slot.2.extend(used);
        }
        self
    }
}

/// Evaluate a tokenizer against a corpus.
pub fn evaluate(tok: &Tokenizer, docs: &[Document]) -> Result<MetricsReport> {
    if docs.is_empty() {
        return Err(Error::InvalidInput("empty evaluation corpus".to_string()));
    }
    let agg = docs
        .par_iter()
        .fold(Agg::default, |mut agg, doc| {
            let ids = tok.encode(&doc.text);
            agg.bytes += doc.text.len() as u64;
            agg.tokens += ids.len() as u64;
            let slot = agg.per_lang.entry(doc.lang.clone()).or_default();
            slot.0 += doc.text.len() as u64;
            slot.1 += ids.len() as u64;
            for id in ids {
                agg.used.insert(id);
                slot.2.insert(id);
            }
            agg
        })
        .reduce(Agg::default, Agg::absorb);

    if agg.bytes == 0 {
        return Err(Error::InvalidInput(
            "evaluation corpus contains no bytes".to_string(),
        ));
    }

    let per_language: BTreeMap<String, LangMetrics> = agg
        .per_lang
        .into_iter()
        .filter(|(_, (bytes, _, _))| *bytes > 0)
        .map(|(lang, (bytes, tokens, used))| {
            (
                lang,
                LangMetrics {
                    bytes,
                    tokens,
                    compression_rate: bytes as f64 / tokens as f64,
                    coverage: used.len(),
                },
            )
        })
        .collect();

    let lang_rates: Vec<f64> = per_language
        .values()
        .map(|m| m.compression_rate)
        .collect();

    Ok(MetricsReport {
        compression_rate: agg.bytes as f64 / agg.tokens as f64,
        coverage: agg.used.len(),
        mean_token_length: mean_token_length(tok, false),
        mean_token_length_all_types: mean_token_length(tok, true),
        gini: gini(&lang_rates)?,
        three_digit_count: count_three_digit(tok),
        total_bytes: agg.bytes,
        total_tokens: agg.tokens,
        vocab_size: tok.vocab_size(),
        per_language,
        steps_executed: None,
        steps_skipped: None,
    })
}

/// Mean byte-length over vocabulary types. With `include_base` false only
/// merged tokens count; an empty merge list yields 0.
pub fn mean_token_length(tok: &Tokenizer, include_base: bool) -> f64 {
    let (sum, n) = if include_base {
        let sum: usize = (0..tok.vocab_size() as TokenId)
            .map(|id| tok.token_bytes(id).expect("id in range").len())
            .sum();
        (sum, tok.vocab_size())
    } else {
        let sum: usize = tok
            .merged_ids()
            .map(|id| tok.token_bytes(id).expect("id in range").len())
            .sum();
        (sum, tok.vocab_size() - tok.base_len())
    };
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

/// Gini index of positive values: the normalized mean absolute pairwise
/// difference, computed via the sorted-weights form. Constant inputs are
/// exactly zero.
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("gini of empty input".to_string()));
    }
    if values.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::InvalidInput(
            "gini requires strictly positive values".to_string(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.first() == sorted.last() {
        return Ok(0.0);
    }
    let n = sorted.len() as f64;
    let total: f64 = sorted.iter().sum();
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2.0 * (i as f64 + 1.0) - n - 1.0) * x)
        .sum();
    Ok(weighted / (n * total))
}

/// Number of vocabulary tokens that are exactly a three-digit number
/// (100..=999): three ASCII digits, no sign, no space, no leading zero.
pub fn count_three_digit(tok: &Tokenizer) -> usize {
    (0..tok.vocab_size() as TokenId)
        .filter(|&id| {
            let bytes = tok.token_bytes(id).expect("id in range");
            bytes.len() == 3 && bytes.iter().all(u8::is_ascii_digit) && bytes[0] != b'0'
        })
        .count()
}

/// Identifier style recognised by the name-part analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentStyle {
    Camel,
    Snake,
}

/// Split an identifier-looking token into name parts.
///
/// Snake case splits on underscores; camel case splits at lowercase/digit to
/// uppercase transitions and where an uppercase run ends before an uppercase
/// followed by lowercase, so abbreviation runs count as one part
/// (`getHTTPStatus` has three). One leading space is ignored. Returns
/// `None` for tokens matching neither shape.
pub fn identifier_parts(token: &[u8]) -> Option<(IdentStyle, usize)> {
    let token = token.strip_prefix(b" ").unwrap_or(token);
    if token.is_empty() {
        return None;
    }
    if token.contains(&b'_') {
        let segments: Vec<&[u8]> = token.split(|&b| b == b'_').collect();
        let valid = segments.iter().all(|seg| {
            !seg.is_empty()
                && seg[0].is_ascii_alphabetic()
                && seg.iter().all(u8::is_ascii_alphanumeric)
        });
        return if valid {
            Some((IdentStyle::Snake, segments.len()))
        } else {
            None
        };
    }
    if !token[0].is_ascii_alphabetic() || !token.iter().all(u8::is_ascii_alphanumeric) {
        return None;
    }
    let has_upper = token.iter().any(u8::is_ascii_uppercase);
    let has_lower = token.iter().any(u8::is_ascii_lowercase);
    if !has_upper || !has_lower {
        return None;
    }
    let mut parts = 1;
    for i in 1..token.len() {
        let prev = token[i - 1];
        let cur = token[i];
        let lower_to_upper =
            (prev.is_ascii_lowercase() || prev.is_ascii_digit()) && cur.is_ascii_uppercase();
        let run_break = prev.is_ascii_uppercase()
            && cur.is_ascii_uppercase()
            && token.get(i + 1).is_some_and(u8::is_ascii_lowercase);
        if lower_to_upper || run_break {
            parts += 1;
        }
    }
    Some((IdentStyle::Camel, parts))
}

/// Distribution of vocabulary tokens over name-part counts, separately for
/// CamelCase and snake_case.
#[derive(Debug, Clone, Default, Serialize, PartialEq, Eq)]
pub struct NamePartHistogram {
    pub camel: BTreeMap<usize, usize>,
    pub snake: BTreeMap<usize, usize>,
}

pub fn name_part_histogram(tok: &Tokenizer) -> NamePartHistogram {
    let mut hist = NamePartHistogram::default();
    for id in 0..tok.vocab_size() as TokenId {
        let bytes = tok.token_bytes(id).expect("id in range");
        match identifier_parts(bytes) {
            Some((IdentStyle::Camel, parts)) => *hist.camel.entry(parts).or_insert(0) += 1,
            Some((IdentStyle::Snake, parts)) => *hist.snake.entry(parts).or_insert(0) += 1,
            None => {}
        }
    }
    hist
}

#[derive(Debug, Clone, Serialize)]
pub struct TokenFrequency {
    pub token_id: TokenId,
    pub token: String,
    pub count: u64,
    pub probability: f64,
}

/// Occurrence counts and probabilities for every vocabulary token on a
/// corpus, sorted by id. Probabilities sum to one.
pub fn token_frequencies(tok: &Tokenizer, docs: &[Document]) -> Result<Vec<TokenFrequency>> {
    if docs.is_empty() {
        return Err(Error::InvalidInput("empty corpus".to_string()));
    }
    let counts = docs
        .par_iter()
        .fold(
            || vec![0u64; tok.vocab_size()],
            |mut counts, doc| {
                for id in tok.encode(&doc.text) {
                    counts[id as usize] += 1;
                }
                counts
            },
        )
        .reduce(
            || vec![0u64; tok.vocab_size()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("corpus contains no bytes".to_string()));
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(id, count)| TokenFrequency {
            token_id: id as TokenId,
            token: escape_bytes(tok.token_bytes(id as TokenId).expect("id in range")),
            count,
            probability: count as f64 / total as f64,
        })
        .collect())
}

/// Write token frequencies as CSV: `token_id,token,count,probability`.
pub fn write_frequencies_csv<W: io::Write>(rows: &[TokenFrequency], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::InvalidInput(format!("frequency export failed: {e}"));
    csv.write_record(["token_id", "token", "count", "probability"])
        .map_err(io_err)?;
    for row in rows {
        csv.write_record([
            row.token_id.to_string(),
            row.token.clone(),
            row.count.to_string(),
            row.probability.to_string(),
        ])
        .map_err(io_err)?;
    }
    csv.flush()
        .map_err(|e| Error::InvalidInput(format!("frequency export failed: {e}")))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct VocabDiff {
    /// Symmetric-difference cardinality over token byte-strings.
    pub count: usize,
    pub only_in_a: Vec<String>,
    pub only_in_b: Vec<String>,
}

pub fn vocab_diff(a: &Tokenizer, b: &Tokenizer) -> VocabDiff {
    let set_of = |tok: &Tokenizer| -> HashSet<Vec<u8>> {
        (0..tok.vocab_size() as TokenId)
            .map(|id| tok.token_bytes(id).expect("id in range").to_vec())
            .collect()
    };
    let sa = set_of(a);
    let sb = set_of(b);
    let mut only_in_a: Vec<String> = sa
        .difference(&sb)
        .map(|t| escape_bytes(t))
        .collect();
    let mut only_in_b: Vec<String> = sb
        .difference(&sa)
        .map(|t| escape_bytes(t))
        .collect();
    only_in_a.sort_unstable();
    only_in_b.sort_unstable();
    VocabDiff {
        count: only_in_a.len() + only_in_b.len(),
        only_in_a,
        only_in_b,
    }
}
