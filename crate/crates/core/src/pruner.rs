//! Vocabulary pruning and compression curves.
//!
//! Two strategies: dropping merges from the end of the list, and leaf-based
//! pruning that repeatedly removes the lowest-scoring token not referenced
//! by any retained merge. Scores come from an external file and are treated
//! as opaque (lower prunes first); ties prefer the later merge.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::metrics;
use crate::tokenizer::Tokenizer;
use crate::TokenId;

/// Which order tokens are pruned in.
pub enum PruneOrder {
    ReverseMergeOrder,
    /// Map from merged token id to its score; lower scores prune first.
    ScoreOrder(HashMap<TokenId, f64>),
}

/// One point of a compression-vs-pruned-count curve.
#[derive(Debug, Clone, Serialize)]
pub struct PruneCurvePoint {
    pub removed: usize,
    pub compression_rate: f64,
    pub per_language: std::collections::BTreeMap<String, f64>,
}

/// A single removal performed by [`prune_by_score`].
#[derive(Debug, Clone, PartialEq)]
pub struct PruneRemoval {
    pub token_id: TokenId,
    pub bytes: Vec<u8>,
    pub score: f64,
}

/// Drop the last `k` merges and their result tokens. Retained ids are
/// unchanged because suffix removal cannot orphan a constituent.
pub fn prune_reverse(tok: &Tokenizer, k: usize) -> Result<Tokenizer> {
    let total = tok.merges().len();
    if k > total {
        return Err(Error::InvalidInput(format!(
            "cannot prune {k} merges, tokenizer has {total}"
        )));
    }
    let pairs = tok.merges()[..total - k]
        .iter()
        .map(|m| (m.left, m.right))
        .collect();
    Tokenizer::from_parts(
        tok.reserved_tokens().to_vec(),
        pairs,
        tok.pretokenizer().clone(),
        tok.metadata().clone(),
    )
}

#[derive(Debug, Clone, Copy)]
struct LeafCandidate {
    score: f64,
    rank: usize,
}

impl PartialEq for LeafCandidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for LeafCandidate {}

impl PartialOrd for LeafCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LeafCandidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Under `Reverse`, the heap yields the lowest score; among equal
        // scores the higher rank (the later merge) comes out first.
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.rank.cmp(&self.rank))
    }
}

/// Remove `k` tokens by score, lowest first, restricted to current leaves
/// (merged tokens not used as constituents by any retained merge). Removing
/// a merge may expose its children as new leaves.
pub fn prune_by_score(
    tok: &Tokenizer,
    scores: &HashMap<TokenId, f64>,
    k: usize,
) -> Result<(Tokenizer, Vec<PruneRemoval>)> {
    let base = tok.base_len();
    let merges = tok.merges();
    for id in tok.merged_ids() {
        match scores.get(&id) {
            None => {
                return Err(Error::InvalidInput(format!(
                    "score file does not cover token id {id}"
                )))
            }
            Some(s) if !s.is_finite() => {
                return Err(Error::InvalidInput(format!(
                    "score for token id {id} is not finite"
                )))
            }
            Some(_) => {}
        }
    }

    let mut refcount = vec![0u32; merges.len()];
    for rule in merges {
        for constituent in [rule.left, rule.right] {
            if constituent as usize >= base {
                refcount[constituent as usize - base] += 1;
            }
        }
    }
    let mut alive = vec![true; merges.len()];
    let mut heap: BinaryHeap<Reverse<LeafCandidate>> = refcount
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c == 0)
        .map(|(rank, _)| {
            Reverse(LeafCandidate {
                score: scores[&((base + rank) as TokenId)],
                rank,
            })
        })
        .collect();

    let mut removals = Vec::with_capacity(k);
    while removals.len() < k {
        let candidate = loop {
            match heap.pop() {
                None => {
                    return Err(Error::PruneExhausted {
                        removed: removals.len(),
                        requested: k,
                    })
                }
                Some(Reverse(c)) if alive[c.rank] && refcount[c.rank] == 0 => break c,
                Some(_) => {}
            }
        };
        alive[candidate.rank] = false;
        let rule = merges[candidate.rank];
        removals.push(PruneRemoval {
            token_id: rule.result,
            bytes: tok.token_bytes(rule.result)?.to_vec(),
            score: candidate.score,
        });
        for constituent in [rule.left, rule.right] {
            if constituent as usize >= base {
                let rank = constituent as usize - base;
                refcount[rank] -= 1;
                if refcount[rank] == 0 && alive[rank] {
                    heap.push(Reverse(LeafCandidate {
                        score: scores[&constituent],
                        rank,
                    }));
                }
            }
        }
    }

    // Compact retained merges, remapping ids to stay consecutive.
    let mut remap: HashMap<TokenId, TokenId> = (0..base as TokenId).map(|id| (id, id)).collect();
    let mut pairs = Vec::with_capacity(merges.len() - k);
    for (rank, rule) in merges.iter().enumerate() {
        if !alive[rank] {
            continue;
        }
        let new_result = (base + pairs.len()) as TokenId;
        remap.insert(rule.result, new_result);
        pairs.push((remap[&rule.left], remap[&rule.right]));
    }
    let pruned = Tokenizer::from_parts(
        tok.reserved_tokens().to_vec(),
        pairs,
        tok.pretokenizer().clone(),
        tok.metadata().clone(),
    )?;
    Ok((pruned, removals))
}

/// Evaluate compression at each checkpoint of removed-token counts.
/// Checkpoints must be strictly ascending; each one prunes from the original
/// tokenizer and re-encodes the evaluation corpus from scratch.
pub fn prune_curve(
    tok: &Tokenizer,
    docs: &[Document],
    order: &PruneOrder,
    checkpoints: &[usize],
) -> Result<Vec<PruneCurvePoint>> {
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "checkpoints must be strictly ascending".to_string(),
        ));
    }
    let mut points = Vec::with_capacity(checkpoints.len());
    for &removed in checkpoints {
        let pruned = match order {
            PruneOrder::ReverseMergeOrder => prune_reverse(tok, removed)?,
            PruneOrder::ScoreOrder(scores) => prune_by_score(tok, scores, removed)?.0,
        };
        let report = metrics::evaluate(&pruned, docs)?;
        points.push(PruneCurvePoint {
            removed,
            compression_rate: report.compression_rate,
            per_language: report
                .per_language
                .iter()
                .map(|(lang, m)| (lang.clone(), m.compression_rate))
                .collect(),
        });
    }
    Ok(points)
}

/// Write a curve as CSV: `removed,compression_rate[,<lang>...]`.
pub fn write_curve_csv<W: io::Write>(points: &[PruneCurvePoint], writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let langs: Vec<String> = points
        .first()
        .map(|p| p.per_language.keys().cloned().collect())
        .unwrap_or_default();
    let mut header = vec!["removed".to_string(), "compression_rate".to_string()];
    header.extend(langs.iter().cloned());
    let io_err = |e: csv::Error| Error::InvalidInput(format!("curve export failed: {e}"));
    csv.write_record(&header).map_err(io_err)?;
    for point in points {
        let mut row = vec![point.removed.to_string(), point.compression_rate.to_string()];
        for lang in &langs {
            row.push(
                point
                    .per_language
                    .get(lang)
                    .map(|cr| cr.to_string())
                    .unwrap_or_default(),
            );
        }
        csv.write_record(&row).map_err(io_err)?;
    }
    csv.flush()
        .map_err(|e| Error::InvalidInput(format!("curve export failed: {e}")))?;
    Ok(())
}

/// Read a `token_id,score` CSV.
pub fn read_scores_csv(path: &Path) -> Result<HashMap<TokenId, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read scores {}: {e}", path.display())))?;
    let mut scores = HashMap::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            Error::InvalidInput(format!("scores {}: row {}: {e}", path.display(), idx + 2))
        })?;
        if record.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "scores {}: row {} has {} fields, expected token_id,score",
                path.display(),
                idx + 2,
                record.len()
            )));
        }
        let id: TokenId = record[0].trim().parse().map_err(|_| {
            Error::InvalidInput(format!("scores: invalid token id {:?}", &record[0]))
        })?;
        let score: f64 = record[1].trim().parse().map_err(|_| {
            Error::InvalidInput(format!("scores: invalid score {:?}", &record[1]))
        })?;
        scores.insert(id, score);
    }
    Ok(scores)
}
