//! Corpus ingestion with repository and language attribution.
//!
//! Two sources are supported: JSONL files with explicit `text`/`repo`/`lang`
//! fields, and directory trees where the repository is the top-level
//! directory name and the language comes from an extension map.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One source file: raw bytes plus its repository and language labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub text: Vec<u8>,
    pub repo: String,
    pub lang: String,
}

impl Document {
    pub fn new(text: impl Into<Vec<u8>>, repo: impl Into<String>, lang: impl Into<String>) -> Self {
        Document {
            text: text.into(),
            repo: repo.into(),
            lang: lang.into(),
        }
    }
}

/// Maps file extensions (lowercase, without dot) to language names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExtensionMap(pub BTreeMap<String, String>);

impl Default for ExtensionMap {
    /// The default covers the 18 code languages used throughout the
    /// evaluation harness.
    fn default() -> Self {
        let pairs = [
            ("java", "Java"),
            ("cs", "C#"),
            ("cpp", "C++"),
            ("hpp", "C++"),
            ("py", "Python"),
            ("hs", "Haskell"),
            ("dart", "Dart"),
            ("go", "Go"),
            ("js", "JavaScript"),
            ("jl", "Julia"),
            ("kt", "Kotlin"),
            ("rb", "Ruby"),
            ("rs", "Rust"),
            ("scala", "Scala"),
            ("sc", "Scala"),
            ("swift", "Swift"),
            ("vue", "Vue"),
            ("php", "PHP"),
            ("lua", "Lua"),
            ("ml", "OCaml"),
            ("mli", "OCaml"),
        ];
        ExtensionMap(
            pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        )
    }
}

impl ExtensionMap {
    pub fn lookup(&self, extension: &str) -> Option<&str> {
        self.0.get(&extension.to_ascii_lowercase()).map(|s| s.as_str())
    }

    /// Load a map from a flat JSON object or TOML table file
    /// (`{"py": "Python", ...}` / `py = "Python"`).
    pub fn load(path: &Path) -> Result<Self> {
        let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |e: String| Error::Config(format!("invalid extension map {}: {e}", path.display()));
        let map: BTreeMap<String, String> =
            if path.extension().and_then(|e| e.to_str()) == Some("toml") {
                toml::from_str(&data).map_err(|e| bad(e.to_string()))?
            } else {
                serde_json::from_str(&data).map_err(|e| bad(e.to_string()))?
            };
        Ok(ExtensionMap(
            map.into_iter()
                .map(|(k, v)| (k.to_ascii_lowercase(), v))
                .collect(),
        ))
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    text: String,
    repo: String,
    lang: String,
}

/// Stream documents from a JSONL file, one object per line, in file order.
///
/// Blank lines are skipped. A malformed line or a missing/empty field yields
/// an error naming the line number.
pub fn ingest_jsonl(path: &Path) -> Result<impl Iterator<Item = Result<Document>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let path = path.to_path_buf();
    Ok(reader.lines().enumerate().filter_map(move |(idx, line)| {
        let line_no = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                return Some(Err(Error::io(&path, e)));
            }
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(parse_jsonl_line(&line, line_no))
    }))
}

fn parse_jsonl_line(line: &str, line_no: usize) -> Result<Document> {
    let record: JsonlRecord = serde_json::from_str(line).map_err(|e| Error::Jsonl {
        line: line_no,
        message: e.to_string(),
    })?;
    for (name, value) in [("repo", &record.repo), ("lang", &record.lang)] {
        if value.is_empty() {
            return Err(Error::Jsonl {
                line: line_no,
                message: format!("empty field {name}"),
            });
        }
    }
    Ok(Document {
        text: record.text.into_bytes(),
        repo: record.repo,
        lang: record.lang,
    })
}

/// Ingest a directory tree. The repository is the first path component under
/// `root`; the language comes from the extension map. Files with unmapped
/// extensions are skipped, unreadable files are logged and skipped, and the
/// result is sorted by path so two runs over the same tree are identical.
pub fn ingest_tree(root: &Path, map: &ExtensionMap) -> Result<Vec<Document>> {
    if !root.is_dir() {
        return Err(Error::InvalidInput(format!(
            "corpus root {} is not a directory",
            root.display()
        )));
    }
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in walkdir::WalkDir::new(root).follow_links(false) {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                log::warn!("skipping unreadable entry under {}: {e}", root.display());
                continue;
            }
        };
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    files.sort();

    let mut docs = Vec::new();
    for path in files {
        let Some(ext) = path.extension().and_then(|e| e.to_str()) else {
            continue;
        };
        let Some(lang) = map.lookup(ext) else {
            continue;
        };
        let rel = path.strip_prefix(root).expect("walked path under root");
        let mut components = rel.components();
        let first = components.next();
        let repo = match (first, components.next()) {
            (Some(c), Some(_)) => c.as_os_str().to_string_lossy().into_owned(),
            _ => {
                log::warn!(
                    "skipping {}: no repository directory between root and file",
                    path.display()
                );
                continue;
            }
        };
        match fs::read(&path) {
            Ok(text) => docs.push(Document {
                text,
                repo,
                lang: lang.to_string(),
            }),
            Err(e) => log::warn!("skipping unreadable file {}: {e}", path.display()),
        }
    }
    Ok(docs)
}

/// Load a corpus path that is either a JSONL file or a directory tree.
pub fn load_corpus(path: &Path, map: &ExtensionMap) -> Result<Vec<Document>> {
    if path.is_dir() {
        ingest_tree(path, map)
    } else {
        ingest_jsonl(path)?.collect()
    }
}
