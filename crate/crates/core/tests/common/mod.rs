//! Shared test support: a naive brute-force BPE oracle and deterministic
//! corpus generators.
//!
//! The oracle rescans the corpus from scratch at every step and represents
//! tokens as byte-strings rather than ids, so it shares no bookkeeping with
//! the incremental trainer. It implements the same selection order (score,
//! then frequency, then lexicographically smaller left and right bytes), the
//! same skip semantics, and the same silent drop of candidates whose
//! concatenation already names a token.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use srcbpe::corpus::Document;
use srcbpe::pretokenize;
use srcbpe::trainer::{MergeAction, TrainConfig, TrainOutcome};
use srcbpe::BYTE_ALPHABET;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRecord {
    pub action: MergeAction,
    pub left: Vec<u8>,
    pub right: Vec<u8>,
    pub freq: u64,
    pub repos: u64,
    pub langs: u64,
}

pub struct OracleOutcome {
    pub merges: Vec<(Vec<u8>, Vec<u8>)>,
    pub history: Vec<OracleRecord>,
}

type BytePair = (Vec<u8>, Vec<u8>);

pub fn naive_train(docs: &[Document], cfg: &TrainConfig) -> OracleOutcome {
    let mut counts: HashMap<(Vec<u8>, &str, &str), u64> = HashMap::new();
    for doc in docs {
        for piece in pretokenize::split(&doc.text) {
            *counts
                .entry((piece.to_vec(), doc.repo.as_str(), doc.lang.as_str()))
                .or_insert(0) += 1;
        }
    }
    let mut words: Vec<(Vec<Vec<u8>>, u64, &str, &str)> = counts
        .into_iter()
        .map(|((bytes, repo, lang), count)| {
            let tokens: Vec<Vec<u8>> = bytes.iter().map(|&b| vec![b]).collect();
            (tokens, count, repo, lang)
        })
        .collect();

    let mut vocab: HashSet<Vec<u8>> = (0u8..=255).map(|b| vec![b]).collect();
    for token in &cfg.reserved_tokens {
        vocab.insert(token.as_bytes().to_vec());
    }
    let mut vocab_len = BYTE_ALPHABET + cfg.reserved_tokens.len();
    let mut discarded: HashSet<BytePair> = HashSet::new();
    let mut merges: Vec<BytePair> = Vec::new();
    let mut history: Vec<OracleRecord> = Vec::new();

    while vocab_len < cfg.vocab_size {
        // Full rescan of pair statistics.
        let mut stats: HashMap<BytePair, (u64, HashSet<&str>, HashSet<&str>)> = HashMap::new();
        for (tokens, count, repo, lang) in &words {
            for win in tokens.windows(2) {
                let entry = stats
                    .entry((win[0].clone(), win[1].clone()))
                    .or_insert_with(|| (0, HashSet::new(), HashSet::new()));
                entry.0 += count;
                entry.1.insert(repo);
                entry.2.insert(lang);
            }
        }

        let mut best: Option<(BytePair, f64, u64, u64, u64)> = None;
        for (pair, (freq, repo_set, lang_set)) in &stats {
            if discarded.contains(pair) {
                continue;
            }
            let (r, l) = (repo_set.len() as u64, lang_set.len() as u64);
            let score = cfg.criterion.score(*freq, r, l);
            let better = match &best {
                None => true,
                Some((best_pair, best_score, best_freq, _, _)) => {
                    match score.total_cmp(best_score) {
                        std::cmp::Ordering::Greater => true,
                        std::cmp::Ordering::Less => false,
                        std::cmp::Ordering::Equal => match freq.cmp(best_freq) {
                            std::cmp::Ordering::Greater => true,
                            std::cmp::Ordering::Less => false,
                            std::cmp::Ordering::Equal => match pair.0.cmp(&best_pair.0) {
                                std::cmp::Ordering::Less => true,
                                std::cmp::Ordering::Greater => false,
                                std::cmp::Ordering::Equal => pair.1 < best_pair.1,
                            },
                        },
                    }
                }
            };
            if better {
                best = Some((pair.clone(), score, *freq, r, l));
            }
        }

        let Some((pair, score, freq, repos, langs)) = best else {
            break;
        };
        if score == 0.0 {
            break;
        }
        if !cfg.skip.admits(repos, langs) {
            history.push(OracleRecord {
                action: MergeAction::Skipped,
                left: pair.0.clone(),
                right: pair.1.clone(),
                freq,
                repos,
                langs,
            });
            discarded.insert(pair);
            continue;
        }
        let concat = [pair.0.as_slice(), pair.1.as_slice()].concat();
        if vocab.contains(&concat) {
            discarded.insert(pair);
            continue;
        }
        vocab.insert(concat.clone());
        vocab_len += 1;
        history.push(OracleRecord {
            action: MergeAction::Executed,
            left: pair.0.clone(),
            right: pair.1.clone(),
            freq,
            repos,
            langs,
        });
        merges.push(pair.clone());

        for (tokens, _, _, _) in &mut words {
            let mut next = Vec::with_capacity(tokens.len());
            let mut i = 0;
            while i < tokens.len() {
                if i + 1 < tokens.len() && tokens[i] == pair.0 && tokens[i + 1] == pair.1 {
                    next.push(concat.clone());
                    i += 2;
                } else {
                    next.push(std::mem::take(&mut tokens[i]));
                    i += 1;
                }
            }
            *tokens = next;
        }
    }

    OracleOutcome { merges, history }
}

/// Trainer history re-expressed as byte-strings for oracle comparison.
pub fn history_as_bytes(outcome: &TrainOutcome) -> Vec<OracleRecord> {
    outcome
        .history
        .iter()
        .map(|r| OracleRecord {
            action: r.action,
            left: outcome.tokenizer.token_bytes(r.left).unwrap().to_vec(),
            right: outcome.tokenizer.token_bytes(r.right).unwrap().to_vec(),
            freq: r.freq,
            repos: r.repos,
            langs: r.langs,
        })
        .collect()
}

pub fn trainer_merges_as_bytes(outcome: &TrainOutcome) -> Vec<BytePair> {
    outcome
        .tokenizer
        .merges()
        .iter()
        .map(|m| {
            (
                outcome.tokenizer.token_bytes(m.left).unwrap().to_vec(),
                outcome.tokenizer.token_bytes(m.right).unwrap().to_vec(),
            )
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random attributed corpus with at least `repos` repositories spanning
/// `langs` languages. Text mixes short letter words from a small alphabet
/// (to force frequency ties), digit runs, punctuation, newlines and the odd
/// multi-byte UTF-8 sequence.
pub fn random_corpus(rng: &mut ChaCha8Rng, repos: usize, langs: usize, docs: usize) -> Vec<Document> {
    let letters = b"abcdef";
    let puncts = ["();", "->", "=", "{", "}", "//", ","];
    let lang_names: Vec<String> = (0..langs).map(|i| format!("Lang{i}")).collect();
    let mut out = Vec::new();
    for d in 0..docs.max(repos) {
        let repo = format!("repo{:02}", d % repos);
        let lang = lang_names[d % langs].clone();
        let mut text = Vec::new();
        let pieces = rng.gen_range(40..160);
        for _ in 0..pieces {
            match rng.gen_range(0..10) {
                0..=5 => {
                    // Short letter word.
                    let len = rng.gen_range(1..6);
                    text.push(b' ');
                    for _ in 0..len {
                        text.push(letters[rng.gen_range(0..letters.len())]);
                    }
                }
                6 => {
                    let digits = rng.gen_range(1..5);
                    for _ in 0..digits {
                        text.push(b'0' + rng.gen_range(0..10) as u8);
                    }
                }
                7 => text.extend_from_slice(
                    puncts[rng.gen_range(0..puncts.len())].as_bytes(),
                ),
                8 => text.push(b'\n'),
                _ => text.extend_from_slice("é".as_bytes()),
            }
        }
        out.push(Document::new(text, repo, lang));
    }
    out
}

pub struct DeskScaleCorpus {
    pub train: Vec<Document>,
    pub held_out: Vec<Document>,
}

const DESK_LANGS: [(&str, &[&str]); 6] = [
    (
        "Python",
        &[
            "def", "return", "import", "class", "self", "None", "True", "False", "for", "in",
            "if", "else", "lambda", "yield", "with", "try", "except", "raise", "print", "range",
        ],
    ),
    (
        "Java",
        &[
            "public", "private", "static", "void", "class", "extends", "return", "new", "int",
            "boolean", "final", "null", "this", "throws", "import", "package", "interface",
            "String",
        ],
    ),
    (
        "Rust",
        &[
            "fn", "let", "mut", "pub", "struct", "impl", "enum", "match", "use", "mod", "crate",
            "Some", "None", "Ok", "Err", "trait", "loop", "while",
        ],
    ),
    (
        "Go",
        &[
            "func", "package", "import", "type", "struct", "interface", "return", "defer", "go",
            "chan", "map", "range", "nil", "err", "var", "const", "select", "case",
        ],
    ),
    (
        "Ruby",
        &[
            "def", "end", "module", "class", "require", "nil", "true", "false", "do", "yield",
            "puts", "unless", "begin", "rescue", "self", "then",
        ],
    ),
    (
        "Lua",
        &[
            "function", "local", "end", "then", "if", "else", "elseif", "return", "nil", "true",
            "false", "for", "do", "while", "repeat", "until", "require",
        ],
    ),
];

const SYLLABLES: [&str; 60] = [
    "get", "set", "dat", "idx", "val", "nam", "cnt", "lst", "nod", "itm", "map", "key", "usr",
    "fil", "pth", "lin", "txt", "tok", "par", "red", "wrt", "buf", "siz", "typ", "cod", "inf",
    "tim", "run", "nxt", "ini", "lod", "sav", "opn", "cls", "hsh", "tre", "lnk", "bas", "cor",
    "utl", "tst", "mnu", "arg", "cal", "flg", "wrd", "chr", "num", "tmp", "res", "obj", "pos",
    "len", "max", "min", "sum", "avg", "row", "col", "ptr",
];

fn shared_pool(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut pool = Vec::with_capacity(size);
    while pool.len() < size {
        let a = SYLLABLES[rng.gen_range(0..SYLLABLES.len())];
        let word = match rng.gen_range(0..10) {
            0..=2 => a.to_string(),
            3..=7 => {
                let b = SYLLABLES[rng.gen_range(0..SYLLABLES.len())];
                let mut w = a.to_string();
                let mut chars = b.chars();
                if let Some(first) = chars.next() {
                    w.push(first.to_ascii_uppercase());
                    w.extend(chars);
                }
                w
            }
            _ => {
                let b = SYLLABLES[rng.gen_range(0..SYLLABLES.len())];
                format!("{a}_{b}")
            }
        };
        if seen.insert(word.clone()) {
            pool.push(word);
        }
    }
    pool
}

fn private_identifier(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::with_capacity(18);
    for _ in 0..3 {
        for i in 0..6 {
            let c = (b'a' + rng.gen_range(0..26) as u8) as char;
            out.push(if i == 0 { c.to_ascii_uppercase() } else { c });
        }
    }
    out
}

fn zipf_cumulative(n: usize) -> Vec<f64> {
    let mut cum = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n {
        total += 1.0 / ((i + 6) as f64).powf(1.05);
        cum.push(total);
    }
    for c in &mut cum {
        *c /= total;
    }
    cum
}

fn zipf_pick(cum: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let roll: f64 = rng.gen();
    cum.partition_point(|&c| c < roll).min(cum.len() - 1)
}

fn desk_repo_docs(
    rng: &mut ChaCha8Rng,
    repo: &str,
    lang_idx: usize,
    shared: &[String],
    cum: &[f64],
    tokens: usize,
) -> Vec<Document> {
    let (lang, keywords) = DESK_LANGS[lang_idx];
    // Two private identifiers per repository, each hit often enough that a
    // pure-frequency objective must spend vocabulary on them long before the
    // shared zipf tail is exhausted.
    let privates: Vec<String> = (0..2).map(|_| private_identifier(rng)).collect();
    let mut docs = Vec::new();
    let per_doc = tokens / 4;
    for _ in 0..4 {
        let mut text: Vec<u8> = Vec::with_capacity(per_doc * 8);
        for i in 0..per_doc {
            if i > 0 && i % 12 == 0 {
                text.push(b'\n');
            }
            let roll: f64 = rng.gen();
            let token: &str = if roll < 0.20 {
                keywords[rng.gen_range(0..keywords.len())]
            } else if roll < 0.70 {
                &shared[zipf_pick(cum, rng)]
            } else {
                &privates[rng.gen_range(0..privates.len())]
            };
            text.push(b' ');
            text.extend_from_slice(token.as_bytes());
            if rng.gen_bool(0.15) {
                let punct = b"():;,.";
                text.push(punct[rng.gen_range(0..punct.len())]);
            }
        }
        docs.push(Document::new(text, repo, lang));
    }
    docs
}

/// A ~100 MB corpus: 220 training repositories plus 40 unseen held-out
/// repositories over six languages. All repositories share a zipf-weighted
/// identifier pool and per-language keywords; each repository additionally
/// hammers on a handful of private gibberish identifiers, the overfitting
/// bait that source-attribution criteria are supposed to resist.
pub fn desk_scale_corpus(seed: u64) -> DeskScaleCorpus {
    let mut rng = rng(seed);
    let shared = shared_pool(&mut rng, 3000);
    let cum = zipf_cumulative(shared.len());
    let tokens_per_repo = 36_000;
    let mut train = Vec::new();
    for r in 0..220 {
        let repo = format!("train-repo-{r:03}");
        train.extend(desk_repo_docs(
            &mut rng,
            &repo,
            r % DESK_LANGS.len(),
            &shared,
            &cum,
            tokens_per_repo,
        ));
    }
    let mut held_out = Vec::new();
    for r in 0..40 {
        let repo = format!("heldout-repo-{r:03}");
        held_out.extend(desk_repo_docs(
            &mut rng,
            &repo,
            r % DESK_LANGS.len(),
            &shared,
            &cum,
            tokens_per_repo,
        ));
    }
    DeskScaleCorpus { train, held_out }
}

/// Corpus of `n` distinct random words (one occurrence each) spread over a
/// few repositories and languages; rich enough in candidate merges to train
/// large vocabularies without exhausting the queue.
pub fn distinct_word_corpus(
    rng: &mut ChaCha8Rng,
    n: usize,
    word_len: usize,
    repos: usize,
    langs: usize,
) -> Vec<Document> {
    let mut seen = HashSet::new();
    let mut docs: Vec<Vec<u8>> = vec![Vec::new(); repos];
    let mut made = 0usize;
    while made < n {
        let word: Vec<u8> = (0..word_len)
            .map(|_| b'a' + rng.gen_range(0..26) as u8)
            .collect();
        if !seen.insert(word.clone()) {
            continue;
        }
        let repo = made % repos;
        docs[repo].push(b' ');
        docs[repo].extend_from_slice(&word);
        made += 1;
    }
    docs.into_iter()
        .enumerate()
        .map(|(i, text)| {
            Document::new(text, format!("repo{i:02}"), format!("Lang{}", i % langs))
        })
        .collect()
}
