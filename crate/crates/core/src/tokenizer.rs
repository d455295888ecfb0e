//! The trained tokenizer artifact: vocabulary plus ordered merges.
//!
//! Ids 0..256 are the single bytes, reserved tokens follow, and merged
//! tokens occupy consecutive ids in merge order. Encoding applies merges by
//! rank within each pre-token, so inference is plain byte-level BPE no
//! matter which training objective produced the merge list.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::escape::{escape_bytes, unescape_bytes};
use crate::pretokenize::{self, PreTokenizerConfig};
use crate::{TokenId, BYTE_ALPHABET};

pub const FORMAT_VERSION: u32 = 1;

/// One ordered merge. `result`'s bytes are the concatenation of its
/// constituents' bytes, and constituents always have smaller ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRule {
    pub left: TokenId,
    pub right: TokenId,
    pub result: TokenId,
}

/// Training provenance carried inside the tokenizer file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_repos: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_langs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_base: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_fingerprint: Option<String>,
}

/// Immutable trained tokenizer.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    vocab: Vec<Vec<u8>>,
    merges: Vec<MergeRule>,
    reserved: Vec<Vec<u8>>,
    pretokenizer: PreTokenizerConfig,
    metadata: Metadata,
    // Derived lookups, rebuilt on construction.
    ranks: HashMap<(TokenId, TokenId), u32>,
}

impl Tokenizer {
    /// Build and validate a tokenizer from its reserved literals and merge
    /// pairs. The vocabulary is derived: 256 byte tokens, then reserved
    /// tokens, then one token per merge in order.
    pub fn from_parts(
        reserved: Vec<Vec<u8>>,
        merge_pairs: Vec<(TokenId, TokenId)>,
        pretokenizer: PreTokenizerConfig,
        metadata: Metadata,
    ) -> Result<Tokenizer> {
        pretokenizer.validate()?;
        let mut vocab: Vec<Vec<u8>> = (0u8..=255).map(|b| vec![b]).collect();
        let mut seen: HashMap<Vec<u8>, TokenId> = vocab
            .iter()
            .enumerate()
            .map(|(id, bytes)| (bytes.clone(), id as TokenId))
            .collect();
        for token in &reserved {
            if token.is_empty() {
                return Err(Error::Format("reserved token must be non-empty".into()));
            }
            if seen.contains_key(token) {
                return Err(Error::Format(format!(
                    "duplicate vocabulary entry {:?}",
                    escape_bytes(token)
                )));
            }
            seen.insert(token.clone(), vocab.len() as TokenId);
            vocab.push(token.clone());
        }
        let mut merges = Vec::with_capacity(merge_pairs.len());
        let mut ranks = HashMap::with_capacity(merge_pairs.len());
        for (rank, (left, right)) in merge_pairs.into_iter().enumerate() {
            let result = vocab.len() as TokenId;
            for constituent in [left, right] {
                if constituent >= result {
                    return Err(Error::Format(format!(
                        "merge {rank} references id {constituent} at or above its result {result}"
                    )));
                }
            }
            let mut bytes = vocab[left as usize].clone();
            bytes.extend_from_slice(&vocab[right as usize]);
            if seen.contains_key(&bytes) {
                return Err(Error::Format(format!(
                    "duplicate vocabulary entry {:?} produced by merge {rank}",
                    escape_bytes(&bytes)
                )));
            }
            seen.insert(bytes.clone(), result);
            vocab.push(bytes);
            ranks.insert((left, right), rank as u32);
            merges.push(MergeRule {
                left,
                right,
                result,
            });
        }
        Ok(Tokenizer {
            vocab,
            merges,
            reserved,
            pretokenizer,
            metadata,
            ranks,
        })
    }

    /// A tokenizer with no merges and no reserved tokens: one token per byte.
    pub fn byte_level() -> Tokenizer {
        Tokenizer::from_parts(
            Vec::new(),
            Vec::new(),
            PreTokenizerConfig::default(),
            Metadata::default(),
        )
        .expect("byte-level tokenizer is always valid")
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Ids below this are base bytes or reserved tokens; merged tokens start
    /// here.
    pub fn base_len(&self) -> usize {
        BYTE_ALPHABET + self.reserved.len()
    }

    pub fn merges(&self) -> &[MergeRule] {
        &self.merges
    }

    pub fn reserved_tokens(&self) -> &[Vec<u8>] {
        &self.reserved
    }

    pub fn pretokenizer(&self) -> &PreTokenizerConfig {
        &self.pretokenizer
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn token_bytes(&self, id: TokenId) -> Result<&[u8]> {
        self.vocab
            .get(id as usize)
            .map(|v| v.as_slice())
            .ok_or(Error::UnknownTokenId(id))
    }

    pub fn is_reserved(&self, id: TokenId) -> bool {
        (BYTE_ALPHABET..self.base_len()).contains(&(id as usize))
    }

    pub fn is_merged(&self, id: TokenId) -> bool {
        (id as usize) >= self.base_len()
    }

    /// Ids of all merged tokens, in merge order.
    pub fn merged_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (self.base_len()..self.vocab.len()).map(|i| i as TokenId)
    }

    /// Encode raw bytes. Reserved tokens are not recognised; any byte
    /// sequence is encodable because the byte alphabet is complete.
    pub fn encode(&self, text: &[u8]) -> Vec<TokenId> {
        self.encode_impl(text, false)
    }

    /// Encode, recognising reserved token literals as whole tokens first.
    pub fn encode_with_specials(&self, text: &[u8]) -> Vec<TokenId> {
        self.encode_impl(text, true)
    }

    fn encode_impl(&self, text: &[u8], parse_specials: bool) -> Vec<TokenId> {
        let mut out = Vec::new();
        if parse_specials && !self.reserved.is_empty() {
            for segment in self.split_reserved(text) {
                match segment {
                    Segment::Reserved(id) => out.push(id),
                    Segment::Raw(bytes) => self.encode_raw(bytes, &mut out),
                }
            }
        } else {
            self.encode_raw(text, &mut out);
        }
        out
    }

    fn encode_raw(&self, text: &[u8], out: &mut Vec<TokenId>) {
        for piece in pretokenize::split(text) {
            self.merge_piece(piece, out);
        }
    }

    /// Apply merges to one pre-token: repeatedly take the lowest-rank
    /// applicable rule and replace its occurrences leftmost-first.
    fn merge_piece(&self, piece: &[u8], out: &mut Vec<TokenId>) {
        let mut symbols: Vec<TokenId> = piece.iter().map(|&b| b as TokenId).collect();
        while symbols.len() > 1 {
            let mut best: Option<u32> = None;
            for win in symbols.windows(2) {
                if let Some(&rank) = self.ranks.get(&(win[0], win[1])) {
                    if best.is_none_or(|b| rank < b) {
                        best = Some(rank);
                    }
                }
            }
            let Some(rank) = best else { break };
            let rule = self.merges[rank as usize];
            let mut next = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len()
                    && symbols[i] == rule.left
                    && symbols[i + 1] == rule.right
                {
                    next.push(rule.result);
                    i += 2;
                } else {
                    next.push(symbols[i]);
                    i += 1;
                }
            }
            symbols = next;
        }
        out.extend_from_slice(&symbols);
    }

    fn split_reserved<'a>(&'a self, text: &'a [u8]) -> Vec<Segment<'a>> {
        // Longest literal wins at equal positions.
        let mut literals: Vec<(usize, &[u8])> = self
            .reserved
            .iter()
            .enumerate()
            .map(|(i, t)| (BYTE_ALPHABET + i, t.as_slice()))
            .collect();
        literals.sort_by_key(|(_, t)| std::cmp::Reverse(t.len()));

        let mut segments = Vec::new();
        let mut start = 0;
        let mut i = 0;
        'scan: while i < text.len() {
            for &(id, lit) in &literals {
                if text[i..].starts_with(lit) {
                    if start < i {
                        segments.push(Segment::Raw(&text[start..i]));
                    }
                    segments.push(Segment::Reserved(id as TokenId));
                    i += lit.len();
                    start = i;
                    continue 'scan;
                }
            }
            i += 1;
        }
        if start < text.len() {
            segments.push(Segment::Raw(&text[start..]));
        }
        segments
    }

    /// Concatenate token byte-strings. Fails on an unknown id.
    pub fn decode(&self, ids: &[TokenId]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for &id in ids {
            out.extend_from_slice(self.token_bytes(id)?);
        }
        Ok(out)
    }

    /// Binary decomposition of a token down to base bytes and reserved
    /// tokens.
    pub fn merge_tree(&self, id: TokenId) -> Result<MergeTree> {
        self.token_bytes(id)?;
        Ok(self.tree_of(id))
    }

    fn tree_of(&self, id: TokenId) -> MergeTree {
        if !self.is_merged(id) {
            return MergeTree::Leaf(id);
        }
        let rule = self.merges[id as usize - self.base_len()];
        MergeTree::Node {
            id,
            left: Box::new(self.tree_of(rule.left)),
            right: Box::new(self.tree_of(rule.right)),
        }
    }

    /// Render the top `levels` of a token's merge tree in bracket notation;
    /// deeper subtrees collapse to their token text.
    pub fn render_merge_tree(&self, id: TokenId, levels: usize) -> Result<String> {
        let tree = self.merge_tree(id)?;
        let mut out = String::new();
        self.render_tree(&tree, levels, &mut out);
        Ok(out)
    }

    fn render_tree(&self, tree: &MergeTree, levels: usize, out: &mut String) {
        match tree {
            MergeTree::Leaf(id) => {
                let _ = write!(out, "{}", escape_bytes(&self.vocab[*id as usize]));
            }
            MergeTree::Node { id, .. } if levels == 0 => {
                let _ = write!(out, "{}", escape_bytes(&self.vocab[*id as usize]));
            }
            MergeTree::Node { left, right, .. } => {
                out.push('[');
                self.render_tree(left, levels - 1, out);
                out.push(' ');
                self.render_tree(right, levels - 1, out);
                out.push(']');
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = TokenizerFile {
            format_version: FORMAT_VERSION,
            pretokenizer: self.pretokenizer.clone(),
            metadata: self.metadata.clone(),
            reserved_tokens: self.reserved.iter().map(|t| escape_bytes(t)).collect(),
            merges: self.merges.iter().map(|m| (m.left, m.right)).collect(),
            vocab: self.vocab.iter().map(|t| escape_bytes(t)).collect(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Tokenizer> {
        let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Tokenizer::from_json(&data)
    }

    pub fn from_json(data: &str) -> Result<Tokenizer> {
        let file: TokenizerFile = serde_json::from_str(data).map_err(|e| {
            if e.is_eof() {
                Error::Format(format!("unexpected end of input: {e}"))
            } else {
                Error::Format(e.to_string())
            }
        })?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                found: file.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let reserved = file
            .reserved_tokens
            .iter()
            .map(|t| unescape_bytes(t))
            .collect::<Result<Vec<_>>>()?;
        let tokenizer =
            Tokenizer::from_parts(reserved, file.merges, file.pretokenizer, file.metadata)?;
        // The stored vocabulary is redundant with the merges; verify it.
        if file.vocab.len() != tokenizer.vocab.len() {
            return Err(Error::Format(format!(
                "vocab lists {} entries but merges imply {}",
                file.vocab.len(),
                tokenizer.vocab.len()
            )));
        }
        for (id, stored) in file.vocab.iter().enumerate() {
            let bytes = unescape_bytes(stored)?;
            if bytes != tokenizer.vocab[id] {
                return Err(Error::Format(format!(
                    "vocab entry {id} is {:?} but merges imply {:?}",
                    stored,
                    escape_bytes(&tokenizer.vocab[id])
                )));
            }
        }
        Ok(tokenizer)
    }
}

enum Segment<'a> {
    Raw(&'a [u8]),
    Reserved(TokenId),
}

/// On-disk JSON layout.
#[derive(Serialize, Deserialize)]
struct TokenizerFile {
    format_version: u32,
    pretokenizer: PreTokenizerConfig,
    #[serde(default)]
    metadata: Metadata,
    #[serde(default)]
    reserved_tokens: Vec<String>,
    merges: Vec<(TokenId, TokenId)>,
    vocab: Vec<String>,
}

/// Binary decomposition of a token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MergeTree {
    Leaf(TokenId),
    Node {
        id: TokenId,
        left: Box<MergeTree>,
        right: Box<MergeTree>,
    },
}

impl MergeTree {
    pub fn leaf_ids(&self) -> Vec<TokenId> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<TokenId>) {
        match self {
            MergeTree::Leaf(id) => out.push(*id),
            MergeTree::Node { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hi_tokenizer() -> Tokenizer {
        // Single merge: (h, i) -> "hi".
        Tokenizer::from_parts(
            Vec::new(),
            vec![(b'h' as TokenId, b'i' as TokenId)],
            PreTokenizerConfig::default(),
            Metadata::default(),
        )
        .unwrap()
    }

    #[test]
    fn byte_level_encode_is_bytes() {
        let tok = Tokenizer::byte_level();
        assert_eq!(
            tok.encode(b"hi"),
            vec![b'h' as TokenId, b'i' as TokenId]
        );
    }

    #[test]
    fn single_rule_applies() {
        let tok = hi_tokenizer();
        assert_eq!(tok.encode(b"hi"), vec![256]);
        assert_eq!(tok.decode(&[256]).unwrap(), b"hi");
    }

    #[test]
    fn decode_empty_and_unknown() {
        let tok = hi_tokenizer();
        assert_eq!(tok.decode(&[]).unwrap(), b"");
        assert!(matches!(
            tok.decode(&[999]).unwrap_err(),
            Error::UnknownTokenId(999)
        ));
    }

    #[test]
    fn lowest_rank_wins() {
        // Rules: (a,b) then (b,c). "abc" must become "ab" "c".
        let tok = Tokenizer::from_parts(
            Vec::new(),
            vec![
                (b'a' as TokenId, b'b' as TokenId),
                (b'b' as TokenId, b'c' as TokenId),
            ],
            PreTokenizerConfig::default(),
            Metadata::default(),
        )
        .unwrap();
        assert_eq!(tok.encode(b"abc"), vec![256, b'c' as TokenId]);
    }

    #[test]
    fn reserved_tokens_only_with_special_parsing() {
        let tok = Tokenizer::from_parts(
            vec![b"<|unused_token_1|>".to_vec()],
            Vec::new(),
            PreTokenizerConfig::default(),
            Metadata::default(),
        )
        .unwrap();
        let text = b"a<|unused_token_1|>b";
        let plain = tok.encode(text);
        assert!(!plain.contains(&256));
        let special = tok.encode_with_specials(text);
        assert_eq!(special, vec![b'a' as TokenId, 256, b'b' as TokenId]);
        assert_eq!(tok.decode(&special).unwrap(), text);
    }

    #[test]
    fn merge_tree_shapes() {
        let tok = hi_tokenizer();
        assert_eq!(tok.merge_tree(b'h' as TokenId).unwrap(), MergeTree::Leaf(104));
        let tree = tok.merge_tree(256).unwrap();
        assert_eq!(tree.leaf_ids(), vec![104, 105]);
        assert_eq!(tok.render_merge_tree(256, 6).unwrap(), "[h i]");
        assert_eq!(tok.render_merge_tree(256, 0).unwrap(), "hi");
    }

    #[test]
    fn merge_tree_depth_limited_render() {
        // he + l -> hel, hel + lo(l,o) ... build a 3-merge chain by hand.
        let tok = Tokenizer::from_parts(
            Vec::new(),
            vec![
                (b'h' as TokenId, b'e' as TokenId), // 256 "he"
                (b'l' as TokenId, b'o' as TokenId), // 257 "lo"
                (256, 257),                         // 258 "helo"
            ],
            PreTokenizerConfig::default(),
            Metadata::default(),
        )
        .unwrap();
        assert_eq!(tok.render_merge_tree(258, 1).unwrap(), "[he lo]");
        assert_eq!(tok.render_merge_tree(258, 2).unwrap(), "[[h e] [l o]]");
        let leaves = tok.merge_tree(258).unwrap().leaf_ids();
        let bytes: Vec<u8> = leaves
            .iter()
            .flat_map(|&id| tok.token_bytes(id).unwrap().to_vec())
            .collect();
        assert_eq!(bytes, b"helo");
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tok.json");
        let tok = Tokenizer::from_parts(
            vec![b"<|unused_token_1|>".to_vec()],
            vec![
                (b'h' as TokenId, b'i' as TokenId),
                (257, b'!' as TokenId),
            ],
            PreTokenizerConfig::default(),
            Metadata {
                criterion: Some("F_LOG_R_L".to_string()),
                min_repos: Some(1),
                min_langs: Some(1),
                log_base: Some("e".to_string()),
                corpus_fingerprint: None,
            },
        )
        .unwrap();
        tok.save(&path).unwrap();
        let loaded = Tokenizer::load(&path).unwrap();
        assert_eq!(loaded.metadata().criterion.as_deref(), Some("F_LOG_R_L"));
        for text in [&b"hi!hi"[..], b"plain words", b"\x00\xff"] {
            assert_eq!(tok.encode(text), loaded.encode(text));
        }
    }

    #[test]
    fn load_truncated_file_reports_eof() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tok.json");
        let tok = hi_tokenizer();
        tok.save(&path).unwrap();
        let data = fs::read_to_string(&path).unwrap();
        fs::write(&path, &data[..data.len() / 2]).unwrap();
        let err = Tokenizer::load(&path).unwrap_err();
        assert!(err.to_string().contains("unexpected end of input"), "{err}");
    }

    #[test]
    fn load_rejects_version_mismatch() {
        let tok = hi_tokenizer();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tok.json");
        tok.save(&path).unwrap();
        let data = fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        let err = Tokenizer::from_json(&data).unwrap_err();
        assert!(matches!(err, Error::Version { found: 99, .. }));
    }

    #[test]
    fn from_parts_rejects_forward_references() {
        let err = Tokenizer::from_parts(
            Vec::new(),
            vec![(300, b'a' as TokenId)],
            PreTokenizerConfig::default(),
            Metadata::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("merge 0"));
    }

    #[test]
    fn from_parts_rejects_duplicate_bytes() {
        let err = Tokenizer::from_parts(
            vec![b"hi".to_vec()],
            vec![(b'h' as TokenId, b'i' as TokenId)],
            PreTokenizerConfig::default(),
            Metadata::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    proptest! {
        #[test]
        fn round_trip_arbitrary_bytes(text in proptest::collection::vec(any::<u8>(), 0..1024)) {
            let tok = Tokenizer::from_parts(
                Vec::new(),
                vec![
                    (b'h' as TokenId, b'i' as TokenId),
                    (b' ' as TokenId, b't' as TokenId),
                    (257, b'h' as TokenId),
                ],
                PreTokenizerConfig::default(),
                Metadata::default(),
            ).unwrap();
            let ids = tok.encode(&text);
            prop_assert_eq!(tok.decode(&ids).unwrap(), text);
        }
    }
}
