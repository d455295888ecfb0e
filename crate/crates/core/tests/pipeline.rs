//! Cross-module integration tests: training/inference parity, pruning
//! curves on trained tokenizers, attribution trends in merge histories, and
//! persistence of trained artifacts.

mod common;

use srcbpe::corpus::Document;
use srcbpe::metrics;
use srcbpe::pruner::{self, PruneOrder};
use srcbpe::tokenizer::Tokenizer;
use srcbpe::trainer::{self, MergeAction, PriorityCriterion, SkipCriterion, TrainConfig};

fn config(vocab_size: usize, criterion: PriorityCriterion) -> TrainConfig {
    TrainConfig {
        vocab_size,
        criterion,
        ..TrainConfig::default()
    }
}

/// The incremental trainer matches the naive rescan oracle under every
/// modified priority criterion and under skip thresholds, not just plain
/// frequency: identical executed merges, identical skip records, identical
/// statistics at each step.
#[test]
fn oracle_equivalence_for_modified_criteria() {
    let mut seeds = common::rng(0xB0);
    let cases = [
        (PriorityCriterion::FL, 1, 1),
        (PriorityCriterion::FLogR1, 1, 1),
        (PriorityCriterion::FLogR, 1, 1),
        (PriorityCriterion::FLogRL, 1, 1),
        (PriorityCriterion::F, 2, 1),
        (PriorityCriterion::F, 1, 2),
        (PriorityCriterion::FLogRL, 3, 2),
    ];
    for (criterion, min_repos, min_langs) in cases {
        let corpus = common::random_corpus(&mut seeds, 5, 3, 14);
        let cfg = TrainConfig {
            vocab_size: 300,
            criterion,
            skip: SkipCriterion {
                min_repos,
                min_langs,
            },
            reserved_tokens: vec!["<|unused_token_1|>".to_string()],
            ..TrainConfig::default()
        };
        let outcome = trainer::train(&corpus, &cfg).unwrap();
        let oracle = common::naive_train(&corpus, &cfg);
        assert_eq!(
            common::trainer_merges_as_bytes(&outcome),
            oracle.merges,
            "{criterion:?} skip ({min_repos},{min_langs}): merges diverged"
        );
        assert_eq!(
            common::history_as_bytes(&outcome),
            oracle.history,
            "{criterion:?} skip ({min_repos},{min_langs}): history diverged"
        );
    }
}

/// Encoding the training corpus must reproduce the trainer's final
/// segmentation, for the classic criterion and for the modified ones.
#[test]
fn inference_matches_final_training_state() {
    let mut seeds = common::rng(0xA0);
    for criterion in [
        PriorityCriterion::F,
        PriorityCriterion::FLogR1,
        PriorityCriterion::FLogRL,
    ] {
        let corpus = common::random_corpus(&mut seeds, 5, 3, 20);
        let outcome = trainer::train(&corpus, &config(330, criterion)).unwrap();
        let prepared = trainer::prepare_corpus(&corpus, &Default::default()).unwrap();
        for (final_word, original) in outcome.words.iter().zip(prepared.words.iter()) {
            let bytes: Vec<u8> = original
                .symbols
                .iter()
                .map(|&id| id as u8)
                .collect();
            assert_eq!(
                outcome.tokenizer.encode(&bytes),
                final_word.symbols,
                "{criterion:?}: encode diverged from training state on {:?}",
                String::from_utf8_lossy(&bytes)
            );
        }
    }
}

/// Skip criteria only reorder and remove merges; inference parity must hold
/// for them as well.
#[test]
fn inference_parity_with_skips() {
    let mut seeds = common::rng(0xA1);
    let corpus = common::random_corpus(&mut seeds, 6, 3, 24);
    let cfg = TrainConfig {
        vocab_size: 320,
        criterion: PriorityCriterion::F,
        skip: SkipCriterion {
            min_repos: 3,
            min_langs: 2,
        },
        ..TrainConfig::default()
    };
    let outcome = trainer::train(&corpus, &cfg).unwrap();
    for record in &outcome.history {
        match record.action {
            MergeAction::Executed => {
                assert!(record.repos >= 3 && record.langs >= 2)
            }
            MergeAction::Skipped => {
                assert!(record.repos < 3 || record.langs < 2)
            }
        }
    }
    let prepared = trainer::prepare_corpus(&corpus, &Default::default()).unwrap();
    for (final_word, original) in outcome.words.iter().zip(prepared.words.iter()) {
        let bytes: Vec<u8> = original.symbols.iter().map(|&id| id as u8).collect();
        assert_eq!(outcome.tokenizer.encode(&bytes), final_word.symbols);
    }
}

/// Compression rate never improves as reverse pruning removes merges.
#[test]
fn reverse_prune_curve_is_non_increasing() {
    let mut seeds = common::rng(0xA2);
    let corpus = common::random_corpus(&mut seeds, 4, 2, 18);
    let tok = trainer::train(&corpus, &config(370, PriorityCriterion::F))
        .unwrap()
        .tokenizer;
    let merges = tok.merges().len();
    let checkpoints: Vec<usize> = vec![0, 1, merges / 8, merges / 4, merges / 2, merges]
        .into_iter()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let points =
        pruner::prune_curve(&tok, &corpus, &PruneOrder::ReverseMergeOrder, &checkpoints).unwrap();
    assert_eq!(points[0].removed, 0);
    let unpruned = metrics::evaluate(&tok, &corpus).unwrap().compression_rate;
    assert_eq!(points[0].compression_rate, unpruned);
    for pair in points.windows(2) {
        assert!(
            pair[1].compression_rate <= pair[0].compression_rate + 1e-12,
            "compression improved from {} to {} at {} removed",
            pair[0].compression_rate,
            pair[1].compression_rate,
            pair[1].removed
        );
    }
    assert_eq!(points.last().unwrap().compression_rate, 1.0);
}

/// Leaf pruning with score = -rank reproduces reverse pruning point by
/// point, and its curve re-encodes to the same rates.
#[test]
fn score_prune_curve_matches_reverse_for_rank_scores() {
    let mut seeds = common::rng(0xA3);
    let corpus = common::random_corpus(&mut seeds, 4, 2, 12);
    let tok = trainer::train(&corpus, &config(310, PriorityCriterion::F))
        .unwrap()
        .tokenizer;
    let scores: std::collections::HashMap<_, _> = tok
        .merges()
        .iter()
        .enumerate()
        .map(|(rank, rule)| (rule.result, -(rank as f64)))
        .collect();
    let checkpoints = [0, 5, 20];
    let reverse =
        pruner::prune_curve(&tok, &corpus, &PruneOrder::ReverseMergeOrder, &checkpoints).unwrap();
    let scored = pruner::prune_curve(
        &tok,
        &corpus,
        &PruneOrder::ScoreOrder(scores),
        &checkpoints,
    )
    .unwrap();
    for (a, b) in reverse.iter().zip(&scored) {
        assert_eq!(a.compression_rate, b.compression_rate);
    }
}

/// On a corpus mixing cross-repo words with repo-specific tails, the
/// repository counts of executed merges trend downward along the history.
#[test]
fn history_repo_counts_trend_downward() {
    let shared = ["import", "return", "value", "count", "print", "index"];
    let mut docs = Vec::new();
    for repo in 0..12 {
        let mut text = String::new();
        for i in 0..240 {
            text.push_str(shared[(i + repo) % shared.len()]);
            text.push(' ');
        }
        // Repo-specific identifier, frequent within its repository only.
        for _ in 0..120 {
            text.push_str(&format!("ident{repo:02}x "));
        }
        docs.push(Document::new(
            text.into_bytes(),
            format!("repo{repo}"),
            if repo % 2 == 0 { "Python" } else { "Java" },
        ));
    }
    let outcome = trainer::train(&docs, &config(380, PriorityCriterion::F)).unwrap();
    let executed: Vec<u64> = outcome
        .history
        .iter()
        .filter(|r| r.action == MergeAction::Executed)
        .map(|r| r.repos)
        .collect();
    assert!(executed.len() >= 40);
    let quarter = executed.len() / 4;
    let head: f64 = executed[..quarter].iter().sum::<u64>() as f64 / quarter as f64;
    let tail: f64 =
        executed[executed.len() - quarter..].iter().sum::<u64>() as f64 / quarter as f64;
    assert!(
        head >= tail,
        "expected repo counts to decline: first quarter mean {head}, last quarter mean {tail}"
    );
}

/// A trained tokenizer survives save/load with identical behaviour, and the
/// exported history parses back as CSV with the documented header.
#[test]
fn trained_artifact_round_trips() {
    let mut seeds = common::rng(0xA4);
    let corpus = common::random_corpus(&mut seeds, 5, 2, 16);
    let cfg = TrainConfig {
        vocab_size: 340,
        criterion: PriorityCriterion::FLogR1L,
        reserved_tokens: vec![
            "<|unused_token_1|>".to_string(),
            "<|unused_token_2|>".to_string(),
        ],
        ..TrainConfig::default()
    };
    let outcome = trainer::train(&corpus, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trained.json");
    outcome.tokenizer.save(&path).unwrap();
    let loaded = Tokenizer::load(&path).unwrap();
    assert_eq!(
        loaded.metadata().criterion.as_deref(),
        Some("F_LOG_R1_L")
    );
    assert_eq!(loaded.metadata().log_base.as_deref(), Some("e"));
    assert!(loaded
        .metadata()
        .corpus_fingerprint
        .as_deref()
        .is_some_and(|f| f.len() == 64));
    for doc in &corpus {
        assert_eq!(loaded.encode(&doc.text), outcome.tokenizer.encode(&doc.text));
    }

    let mut history_csv = Vec::new();
    trainer::export_history(&outcome.tokenizer, &outcome.history, &mut history_csv).unwrap();
    let mut reader = csv::Reader::from_reader(history_csv.as_slice());
    assert_eq!(
        reader.headers().unwrap(),
        &csv::StringRecord::from(vec![
            "step", "action", "left", "right", "freq", "repos", "langs"
        ])
    );
    assert_eq!(reader.records().count(), outcome.history.len());
}

/// Token frequencies over the training corpus sum to one and agree with
/// compression totals.
#[test]
fn frequency_export_consistent_with_evaluation() {
    let mut seeds = common::rng(0xA5);
    let corpus = common::random_corpus(&mut seeds, 3, 2, 10);
    let tok = trainer::train(&corpus, &config(300, PriorityCriterion::F))
        .unwrap()
        .tokenizer;
    let report = metrics::evaluate(&tok, &corpus).unwrap();
    let rows = metrics::token_frequencies(&tok, &corpus).unwrap();
    let total: u64 = rows.iter().map(|r| r.count).sum();
    assert_eq!(total, report.total_tokens);
    let prob_sum: f64 = rows.iter().map(|r| r.probability).sum();
    assert!((prob_sum - 1.0).abs() < 1e-9);
    let used = rows.iter().filter(|r| r.count > 0).count();
    assert_eq!(used, report.coverage);
}
