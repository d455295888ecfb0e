//! BPE training with attribution-aware priority and skip criteria.
//!
//! The loop is classic greedy BPE over a lazy max-priority queue: pop the
//! best candidate, re-score it against live statistics, reinsert if stale,
//! otherwise merge. Two hooks modify the classic behaviour:
//!
//! * the priority criterion scores a pair from its frequency and its
//!   distinct repository/language counts instead of frequency alone;
//! * the skip criterion permanently discards a popped candidate that is
//!   present in too few repositories or languages.
//!
//! Permanent discarding is sound because a pair's frequency and attribution
//! counts never increase during training, so a candidate that fails a
//! threshold once can never satisfy it later.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::io;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attribution::{AttributedWord, Interner, PairKey, PairTable};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::pretokenize::{self, PreTokenizerConfig};
use crate::tokenizer::{Metadata, Tokenizer};
use crate::{TokenId, BYTE_ALPHABET};

/// Scoring objective for choosing the next merge.
///
/// `f` is the pair frequency, `r`/`l` the distinct repository and language
/// counts. Logarithms are natural; the variants using `ln r` nullify pairs
/// present in a single repository.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorityCriterion {
    /// Plain frequency (classic BPE).
    #[serde(rename = "F", alias = "f")]
    F,
    /// `f * l`
    #[serde(rename = "F_L", alias = "f_l")]
    FL,
    /// `f * ln(r + 1)`
    #[serde(rename = "F_LOG_R1", alias = "f_log_r1")]
    FLogR1,
    /// `f * ln(r)`
    #[serde(rename = "F_LOG_R", alias = "f_log_r")]
    FLogR,
    /// `f * ln(r + 1) * l`
    #[serde(rename = "F_LOG_R1_L", alias = "f_log_r1_l")]
    FLogR1L,
    /// `f * ln(r) * l`
    #[serde(rename = "F_LOG_R_L", alias = "f_log_r_l")]
    FLogRL,
}

impl PriorityCriterion {
    pub const ALL: [PriorityCriterion; 6] = [
        PriorityCriterion::F,
        PriorityCriterion::FL,
        PriorityCriterion::FLogR1,
        PriorityCriterion::FLogR,
        PriorityCriterion::FLogR1L,
        PriorityCriterion::FLogRL,
    ];

    /// Canonical name, as stored in tokenizer metadata.
    pub fn name(self) -> &'static str {
        match self {
            PriorityCriterion::F => "F",
            PriorityCriterion::FL => "F_L",
            PriorityCriterion::FLogR1 => "F_LOG_R1",
            PriorityCriterion::FLogR => "F_LOG_R",
            PriorityCriterion::FLogR1L => "F_LOG_R1_L",
            PriorityCriterion::FLogRL => "F_LOG_R_L",
        }
    }

    pub fn score(self, freq: u64, repos: u64, langs: u64) -> f64 {
        let f = freq as f64;
        let l = langs as f64;
        match self {
            PriorityCriterion::F => f,
            PriorityCriterion::FL => f * l,
            PriorityCriterion::FLogR1 => f * ((repos + 1) as f64).ln(),
            PriorityCriterion::FLogR => f * (repos as f64).ln(),
            PriorityCriterion::FLogR1L => f * ((repos + 1) as f64).ln() * l,
            PriorityCriterion::FLogRL => f * (repos as f64).ln() * l,
        }
    }

    /// Whether the criterion zeroes single-repository pairs.
    pub fn excludes_single_repo(self) -> bool {
        matches!(self, PriorityCriterion::FLogR | PriorityCriterion::FLogRL)
    }
}

impl std::str::FromStr for PriorityCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lowered = s.to_ascii_lowercase();
        PriorityCriterion::ALL
            .into_iter()
            .find(|c| c.name().to_ascii_lowercase() == lowered)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown criterion {s:?} (expected one of f, f_l, f_log_r1, f_log_r, f_log_r1_l, f_log_r_l)"
                ))
            })
    }
}

/// Minimum distinct repository/language counts a candidate must reach to be
/// merged. `(1, 1)` disables skipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCriterion {
    pub min_repos: u64,
    pub min_langs: u64,
}

impl Default for SkipCriterion {
    fn default() -> Self {
        SkipCriterion {
            min_repos: 1,
            min_langs: 1,
        }
    }
}

impl SkipCriterion {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_repos < 1 || self.min_langs < 1 {
            return Err(Error::Config(
                "skip thresholds must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    pub fn admits(&self, repos: u64, langs: u64) -> bool {
        repos >= self.min_repos && langs >= self.min_langs
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub vocab_size: usize,
    pub criterion: PriorityCriterion,
    pub skip: SkipCriterion,
    pub reserved_tokens: Vec<String>,
    pub pretokenizer: PreTokenizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            vocab_size: 32768,
            criterion: PriorityCriterion::F,
            skip: SkipCriterion::none(),
            reserved_tokens: Vec::new(),
            pretokenizer: PreTokenizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.skip.validate()?;
        self.pretokenizer.validate()?;
        let alphabet = BYTE_ALPHABET + self.reserved_tokens.len();
        if self.vocab_size <= alphabet {
            return Err(Error::Config(format!(
                "vocab size {} must exceed alphabet size {} (256 bytes + {} reserved)",
                self.vocab_size,
                alphabet,
                self.reserved_tokens.len()
            )));
        }
        let mut seen = HashSet::new();
        for token in &self.reserved_tokens {
            if token.is_empty() {
                return Err(Error::Config("reserved token must be non-empty".into()));
            }
            if !seen.insert(token.as_str()) {
                return Err(Error::Config(format!("duplicate reserved token {token:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeAction {
    Executed,
    Skipped,
}

/// One training step: a fresh candidate pop that was either merged or
/// discarded by the skip criterion, with its statistics at that moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub step: u32,
    pub action: MergeAction,
    pub left: TokenId,
    pub right: TokenId,
    /// Id of the produced token; `None` for skipped steps.
    pub new_id: Option<TokenId>,
    pub freq: u64,
    pub repos: u64,
    pub langs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainStatus {
    /// Vocabulary reached the requested size.
    Completed,
    /// Candidates ran out (or only zero-score pairs remained) first.
    QueueExhausted,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub tokenizer: Tokenizer,
    pub history: Vec<MergeRecord>,
    /// Final segmented corpus state, for parity checks and diagnostics.
    pub words: Vec<AttributedWord>,
    pub repos: Interner,
    pub langs: Interner,
    pub status: TrainStatus,
}

impl TrainOutcome {
    pub fn executed_steps(&self) -> usize {
        self.history
            .iter()
            .filter(|r| r.action == MergeAction::Executed)
            .count()
    }

    pub fn skipped_steps(&self) -> usize {
        self.history.len() - self.executed_steps()
    }
}

/// Pre-tokenized corpus with interned attribution.
pub struct PreparedCorpus {
    pub words: Vec<AttributedWord>,
    pub repos: Interner,
    pub langs: Interner,
    pub fingerprint: String,
}

/// Pre-tokenize and aggregate a document stream into attributed words.
/// Identical pre-tokens within the same repository and language collapse
/// into one word with a summed count; the result is sorted so it does not
/// depend on thread count.
pub fn prepare_corpus(docs: &[Document], pretok: &PreTokenizerConfig) -> Result<PreparedCorpus> {
    pretok.validate()?;
    let mut repos = Interner::default();
    let mut langs = Interner::default();
    let mut hasher = Sha256::new();
    let mut attributed: Vec<(u32, u32, &[u8])> = Vec::with_capacity(docs.len());
    for doc in docs {
        if doc.repo.is_empty() || doc.lang.is_empty() {
            return Err(Error::InvalidInput(
                "document with empty repo or lang label".to_string(),
            ));
        }
        for part in [doc.repo.as_bytes(), doc.lang.as_bytes(), &doc.text] {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part);
        }
        attributed.push((repos.intern(&doc.repo), langs.intern(&doc.lang), &doc.text));
    }
    let fingerprint = to_hex(&hasher.finalize());

    // Word identity is (bytes, repo, lang): the same pre-token in two
    // repositories stays two words.
    type WordKey = (Vec<u8>, u32, u32);
    let counts: HashMap<WordKey, u64> = attributed
        .par_iter()
        .fold(HashMap::new, |mut map, &(repo, lang, text)| {
            for pre in pretokenize::pretokenize(text) {
                *map.entry((pre.bytes, repo, lang)).or_insert(0) += pre.count as u64;
            }
            map
        })
        .reduce(HashMap::new, |mut a, b| {
            for (key, n) in b {
                *a.entry(key).or_insert(0) += n;
            }
            a
        });

    let mut entries: Vec<(WordKey, u64)> = counts.into_iter().collect();
    entries.sort_unstable_by(|a, b| {
        (a.0 .1, a.0 .2, &a.0 .0).cmp(&(b.0 .1, b.0 .2, &b.0 .0))
    });
    let words = entries
        .into_iter()
        .map(|((bytes, repo, lang), count)| AttributedWord {
            symbols: bytes.iter().map(|&b| b as TokenId).collect(),
            count,
            repo,
            lang,
        })
        .collect();
    Ok(PreparedCorpus {
        words,
        repos,
        langs,
        fingerprint,
    })
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Queue entry. Ordering: higher score wins, ties prefer higher frequency,
/// then lexicographically smaller left bytes, then smaller right bytes.
struct Candidate {
    score: f64,
    freq: u64,
    left_bytes: Arc<[u8]>,
    right_bytes: Arc<[u8]>,
    pair: PairKey,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| self.freq.cmp(&other.freq))
            .then_with(|| other.left_bytes.cmp(&self.left_bytes))
            .then_with(|| other.right_bytes.cmp(&self.right_bytes))
    }
}

/// Run training over a document corpus.
pub fn train(docs: &[Document], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(Error::InvalidInput("empty corpus".to_string()));
    }
    let prepared = prepare_corpus(docs, &cfg.pretokenizer)?;
    train_prepared(prepared, cfg)
}

/// Training entry point for an already prepared corpus.
pub fn train_prepared(prepared: PreparedCorpus, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let PreparedCorpus {
        mut words,
        repos,
        langs,
        fingerprint,
    } = prepared;

    let mut vocab: Vec<Arc<[u8]>> = (0u8..=255).map(|b| Arc::from([b].as_slice())).collect();
    for token in &cfg.reserved_tokens {
        vocab.push(Arc::from(token.as_bytes()));
    }
    let mut known: HashSet<Arc<[u8]>> = vocab.iter().cloned().collect();
    if known.len() != vocab.len() {
        return Err(Error::Config(
            "reserved token duplicates an existing token".to_string(),
        ));
    }

    let mut table = PairTable::build(&words);
    let mut queue: BinaryHeap<Candidate> = table
        .stats()
        .iter()
        .map(|(&pair, stats)| Candidate {
            score: cfg
                .criterion
                .score(stats.freq, stats.repos(), stats.langs()),
            freq: stats.freq,
            left_bytes: vocab[pair.left as usize].clone(),
            right_bytes: vocab[pair.right as usize].clone(),
            pair,
        })
        .collect();

    let mut discarded: HashSet<PairKey> = HashSet::new();
    // Shadow set of criterion-skipped pairs: since counts never increase, a
    // skipped pair must still fail the criterion whenever it pops again.
    #[cfg(debug_assertions)]
    let mut skip_discarded: HashSet<PairKey> = HashSet::new();
    let mut history: Vec<MergeRecord> = Vec::new();
    let mut merges: Vec<(TokenId, TokenId)> = Vec::new();
    let mut executed = 0usize;
    let mut status = TrainStatus::QueueExhausted;

    while vocab.len() < cfg.vocab_size {
        let Some(candidate) = queue.pop() else {
            break;
        };
        let pair = candidate.pair;
        if discarded.contains(&pair) {
            #[cfg(debug_assertions)]
            if skip_discarded.contains(&pair) {
                if let Some(stats) = table.get(&pair) {
                    debug_assert!(
                        !cfg.skip.admits(stats.repos(), stats.langs()),
                        "permanently skipped pair re-qualified: {pair:?}"
                    );
                }
            }
            continue;
        }
        let Some(stats) = table.get(&pair) else {
            // The pair died through neighbouring merges.
            continue;
        };
        let (freq, r, l) = (stats.freq, stats.repos(), stats.langs());
        let score = cfg.criterion.score(freq, r, l);
        if score != candidate.score || freq != candidate.freq {
            queue.push(Candidate {
                score,
                freq,
                ..candidate
            });
            continue;
        }
        if score == 0.0 {
            // Only nullified pairs remain; no merge can be chosen.
            break;
        }

        let step = history.len() as u32;
        if !cfg.skip.admits(r, l) {
            history.push(MergeRecord {
                step,
                action: MergeAction::Skipped,
                left: pair.left,
                right: pair.right,
                new_id: None,
                freq,
                repos: r,
                langs: l,
            });
            discarded.insert(pair);
            #[cfg(debug_assertions)]
            skip_discarded.insert(pair);
            continue;
        }

        let mut bytes = vocab[pair.left as usize].to_vec();
        bytes.extend_from_slice(&vocab[pair.right as usize]);
        let bytes: Arc<[u8]> = Arc::from(bytes.as_slice());
        if known.contains(&bytes) {
            // The concatenation already names a token reachable through an
            // earlier merge path; executing would duplicate vocabulary.
            // Dropped without a record so executed steps track vocab growth.
            discarded.insert(pair);
            continue;
        }

        debug_assert!(
            !cfg.criterion.excludes_single_repo() || r >= 2,
            "single-repository pair executed under a nullifying criterion"
        );

        let new_id = vocab.len() as TokenId;
        vocab.push(bytes.clone());
        known.insert(bytes);
        merges.push((pair.left, pair.right));
        history.push(MergeRecord {
            step,
            action: MergeAction::Executed,
            left: pair.left,
            right: pair.right,
            new_id: Some(new_id),
            freq,
            repos: r,
            langs: l,
        });
        executed += 1;
        if executed.is_multiple_of(1000) {
            log::info!(
                "{executed} merges executed, {} skipped, {} candidates queued",
                history.len() - executed,
                queue.len()
            );
        }

        let delta = table.apply_merge(&mut words, pair, new_id)?;
        for created in delta.created {
            let stats = table.get(&created).expect("created pair is live");
            queue.push(Candidate {
                score: cfg
                    .criterion
                    .score(stats.freq, stats.repos(), stats.langs()),
                freq: stats.freq,
                left_bytes: vocab[created.left as usize].clone(),
                right_bytes: vocab[created.right as usize].clone(),
                pair: created,
            });
        }

        if vocab.len() == cfg.vocab_size {
            status = TrainStatus::Completed;
        }
    }

    if status == TrainStatus::QueueExhausted {
        log::warn!(
            "merge queue exhausted at vocabulary size {} (requested {}); returning partial tokenizer",
            vocab.len(),
            cfg.vocab_size
        );
    }

    let metadata = Metadata {
        criterion: Some(cfg.criterion.name().to_string()),
        min_repos: Some(cfg.skip.min_repos),
        min_langs: Some(cfg.skip.min_langs),
        log_base: Some("e".to_string()),
        corpus_fingerprint: Some(fingerprint),
    };
    let tokenizer = Tokenizer::from_parts(
        cfg.reserved_tokens
            .iter()
            .map(|t| t.as_bytes().to_vec())
            .collect(),
        merges,
        cfg.pretokenizer.clone(),
        metadata,
    )?;
    Ok(TrainOutcome {
        tokenizer,
        history,
        words,
        repos,
        langs,
        status,
    })
}

/// Write the merge history as CSV with the fixed header
/// `step,action,left,right,freq,repos,langs`. Token columns are escaped
/// byte-strings.
pub fn export_history<W: io::Write>(
    tokenizer: &Tokenizer,
    records: &[MergeRecord],
    writer: W,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["step", "action", "left", "right", "freq", "repos", "langs"])
        .map_err(|e| Error::InvalidInput(format!("history export failed: {e}")))?;
    for record in records {
        let action = match record.action {
            MergeAction::Executed => "executed",
            MergeAction::Skipped => "skipped",
        };
        csv.write_record([
            record.step.to_string(),
            action.to_string(),
            crate::escape::escape_bytes(tokenizer.token_bytes(record.left)?),
            crate::escape::escape_bytes(tokenizer.token_bytes(record.right)?),
            record.freq.to_string(),
            record.repos.to_string(),
            record.langs.to_string(),
        ])
        .map_err(|e| Error::InvalidInput(format!("history export failed: {e}")))?;
    }
    csv.flush()
        .map_err(|e| Error::InvalidInput(format!("history export failed: {e}")))?;
    Ok(())
}
