//! Pair statistics with per-repository and per-language attribution.
//!
//! For every live candidate pair the table tracks its total frequency and
//! occurrence counts per repository and per language. Distinct counts (the
//! number of repositories/languages containing the pair) are the map sizes,
//! never stored separately, so they can't go stale. Counts rather than
//! booleans are kept so that decrements during a merge can detect when a
//! repository or language drops out.
//!
//! The central invariant is incremental-equals-batch: after any sequence of
//! [`PairTable::apply_merge`] calls, the table is exactly what
//! [`PairTable::build`] would produce from the current words.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::TokenId;

/// Interns opaque string identifiers (repositories, languages) to dense ids
/// in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.ids.insert(name.to_string(), id);
        self.names.push(name.to_string());
        id
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// An adjacent token pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairKey {
    pub left: TokenId,
    pub right: TokenId,
}

impl PairKey {
    pub fn new(left: TokenId, right: TokenId) -> Self {
        PairKey { left, right }
    }
}

/// Frequency and attribution counts for one pair.
///
/// `freq` always equals the sum over `per_repo` (and over `per_lang`);
/// zero entries are removed eagerly so the distinct counts are map sizes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairStats {
    pub freq: u64,
    pub per_repo: HashMap<u32, u64>,
    pub per_lang: HashMap<u32, u64>,
}

impl PairStats {
    /// Number of distinct repositories containing the pair.
    pub fn repos(&self) -> u64 {
        self.per_repo.len() as u64
    }

    /// Number of distinct languages containing the pair.
    pub fn langs(&self) -> u64 {
        self.per_lang.len() as u64
    }

    fn add(&mut self, amount: u64, repo: u32, lang: u32) {
        self.freq += amount;
        *self.per_repo.entry(repo).or_insert(0) += amount;
        *self.per_lang.entry(lang).or_insert(0) += amount;
    }

    fn sub(&mut self, amount: u64, repo: u32, lang: u32) {
        debug_assert!(self.freq >= amount, "pair frequency underflow");
        self.freq -= amount;
        for (map, key) in [(&mut self.per_repo, repo), (&mut self.per_lang, lang)] {
            let slot = map.get_mut(&key).expect("decrement of untracked attribution");
            debug_assert!(*slot >= amount);
            *slot -= amount;
            if *slot == 0 {
                map.remove(&key);
            }
        }
    }

    fn merge_from(&mut self, other: PairStats) {
        self.freq += other.freq;
        for (repo, n) in other.per_repo {
            *self.per_repo.entry(repo).or_insert(0) += n;
        }
        for (lang, n) in other.per_lang {
            *self.per_lang.entry(lang).or_insert(0) += n;
        }
    }
}

/// A pre-token as seen by the trainer: its current symbol sequence, its
/// occurrence count, and the repository/language it belongs to. The same
/// byte sequence in two repositories is two distinct words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributedWord {
    pub symbols: Vec<TokenId>,
    pub count: u64,
    pub repo: u32,
    pub lang: u32,
}

/// Report of one merge application.
#[derive(Debug, Clone)]
pub struct MergeDelta {
    /// Pairs that gained occurrences; all of them contain the new token.
    pub created: Vec<PairKey>,
    /// Words in which at least one replacement happened.
    pub words_touched: usize,
    /// Total replaced occurrences, weighted by word counts.
    pub occurrences: u64,
}

/// Live pair statistics plus, per pair, the set of word indices that may
/// still contain it. Postings are stale-tolerant: a listed word is rescanned
/// on use and skipped when the pair is no longer present.
#[derive(Debug, Default, Clone)]
pub struct PairTable {
    stats: HashMap<PairKey, PairStats>,
    postings: HashMap<PairKey, HashSet<u32>>,
}

impl PairTable {
    /// Count all adjacent pairs in all words. Overlapping positions in runs
    /// of identical symbols are all counted ("aaa" contributes two (a,a)).
    pub fn build(words: &[AttributedWord]) -> PairTable {
        words
            .par_iter()
            .enumerate()
            .fold(PairTable::default, |mut table, (idx, word)| {
                table.add_word(idx as u32, word);
                table
            })
            .reduce(PairTable::default, PairTable::merged)
    }

    fn add_word(&mut self, idx: u32, word: &AttributedWord) {
        for win in word.symbols.windows(2) {
            let pair = PairKey::new(win[0], win[1]);
            self.stats
                .entry(pair)
                .or_default()
                .add(word.count, word.repo, word.lang);
            self.postings.entry(pair).or_default().insert(idx);
        }
    }

    fn merged(mut self, other: PairTable) -> PairTable {
        for (pair, stats) in other.stats {
            self.stats.entry(pair).or_default().merge_from(stats);
        }
        for (pair, posting) in other.postings {
            self.postings.entry(pair).or_default().extend(posting);
        }
        self
    }

    pub fn get(&self, pair: &PairKey) -> Option<&PairStats> {
        self.stats.get(pair)
    }

    pub fn stats(&self) -> &HashMap<PairKey, PairStats> {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    /// Replace every occurrence of `pair` (leftmost-first within each word)
    /// by `new_id`, adjusting neighbour pair statistics incrementally.
    ///
    /// The merged pair's entry disappears; pairs adjacent to a replacement
    /// are decremented and pairs involving `new_id` are created. Counts of
    /// pre-existing pairs can only decrease here, which is what makes
    /// permanent skipping sound.
    pub fn apply_merge(
        &mut self,
        words: &mut [AttributedWord],
        pair: PairKey,
        new_id: TokenId,
    ) -> Result<MergeDelta> {
        if !self.stats.contains_key(&pair) {
            return Err(Error::PairAbsent(pair.left, pair.right));
        }
        let posting = self.postings.remove(&pair).unwrap_or_default();
        let mut created: HashSet<PairKey> = HashSet::new();
        let mut words_touched = 0usize;
        let mut occurrences = 0u64;
        let mut deltas: Vec<(PairKey, i64)> = Vec::new();

        for idx in posting {
            let word = &mut words[idx as usize];
            let symbols = &word.symbols;
            let mut replaced = 0u64;
            let mut new_symbols = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == pair.left && symbols[i + 1] == pair.right
                {
                    new_symbols.push(new_id);
                    replaced += 1;
                    i += 2;
                } else {
                    new_symbols.push(symbols[i]);
                    i += 1;
                }
            }
            if replaced == 0 {
                // Stale posting: the word no longer contains the pair.
                continue;
            }
            words_touched += 1;
            occurrences += replaced * word.count;

            deltas.clear();
            for win in symbols.windows(2) {
                accumulate(&mut deltas, PairKey::new(win[0], win[1]), -1);
            }
            for win in new_symbols.windows(2) {
                accumulate(&mut deltas, PairKey::new(win[0], win[1]), 1);
            }
            let (count, repo, lang) = (word.count, word.repo, word.lang);
            word.symbols = new_symbols;
            for &(p, d) in &deltas {
                match d {
                    0 => {}
                    d if d > 0 => {
                        debug_assert!(
                            p.left == new_id || p.right == new_id,
                            "only pairs containing the new token may gain occurrences"
                        );
                        self.stats
                            .entry(p)
                            .or_default()
                            .add(d as u64 * count, repo, lang);
                        self.postings.entry(p).or_default().insert(idx);
                        created.insert(p);
                    }
                    d => {
                        let stats = self
                            .stats
                            .get_mut(&p)
                            .expect("decrement of pair missing from table");
                        stats.sub((-d) as u64 * count, repo, lang);
                        if stats.freq == 0 {
                            self.stats.remove(&p);
                            self.postings.remove(&p);
                        }
                    }
                }
            }
        }

        // Every occurrence was replaced, so the merged pair must be gone.
        debug_assert!(!self.stats.contains_key(&pair));
        debug_assert!(created.iter().all(|p| self.stats.contains_key(p)));

        let mut created: Vec<PairKey> = created.into_iter().collect();
        created.sort_unstable();
        Ok(MergeDelta {
            created,
            words_touched,
            occurrences,
        })
    }
}

fn accumulate(deltas: &mut Vec<(PairKey, i64)>, pair: PairKey, d: i64) {
    for entry in deltas.iter_mut() {
        if entry.0 == pair {
            entry.1 += d;
            return;
        }
    }
    deltas.push((pair, d));
}
