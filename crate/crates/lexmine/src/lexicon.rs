//! Whitelist and blacklist wordsets.
//!
//! A lexicon is the query: a set of types that are common in the target
//! language and rare in its high-resource cousins (whitelist), or that
//! characterize noise to reject (blacklist). Lists are plain UTF-8 text,
//! one type per line, `#` for comments.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rustc_hash::FxHashSet;

/// Whether a lexicon selects documents or rejects them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LexiconKind {
    Whitelist,
    Blacklist,
}

impl fmt::Display for LexiconKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LexiconKind::Whitelist => f.write_str("whitelist"),
            LexiconKind::Blacklist => f.write_str("blacklist"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("lexicon {path} has no types of length >= {min_type_len}")]
    Empty { path: PathBuf, min_type_len: usize },
}

/// One language's type set, immutable after load and safe to share across
/// any number of scoring threads.
#[derive(Debug, Clone)]
pub struct Lexicon {
    language_code: String,
    kind: LexiconKind,
    types: FxHashSet<String>,
    min_type_len: usize,
}

/// What the loader dropped while building a [`Lexicon`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Types shorter than the minimum length. Short types are the entry
    /// point for whitespace-shattered noise, so they are refused outright.
    pub rejected_short: usize,
    /// Lines containing internal whitespace; whitespace tokenization can
    /// never produce a multiword type, so keeping them would be dead weight.
    pub rejected_multiword: usize,
}

impl Lexicon {
    /// Load a newline-delimited wordlist. Lines are trimmed and case-folded;
    /// blank lines and `#` comments are ignored; types shorter than
    /// `min_type_len` scalar values are rejected and counted.
    pub fn load(
        path: &Path,
        language_code: &str,
        kind: LexiconKind,
        min_type_len: usize,
    ) -> Result<(Self, LoadReport), LexiconError> {
        let raw = fs::read_to_string(path).map_err(|source| LexiconError::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        let mut report = LoadReport::default();
        let mut types = FxHashSet::default();
        for line in raw.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.chars().any(char::is_whitespace) {
                report.rejected_multiword += 1;
                continue;
            }
            if line.chars().count() < min_type_len {
                report.rejected_short += 1;
                continue;
            }
            types.insert(line.to_lowercase());
        }
        if types.is_empty() {
            return Err(LexiconError::Empty {
                path: path.to_path_buf(),
                min_type_len,
            });
        }
        Ok((
            Lexicon {
                language_code: language_code.to_string(),
                kind,
                types,
                min_type_len,
            },
            report,
        ))
    }

    /// Build a lexicon from an in-memory list, applying the same folding and
    /// length policy as [`Lexicon::load`]. Returns `None` when nothing
    /// survives the policy.
    pub fn from_types<I>(
        language_code: &str,
        kind: LexiconKind,
        raw_types: I,
        min_type_len: usize,
    ) -> Option<Self>
    where
        I: IntoIterator<Item = String>,
    {
        let types: FxHashSet<String> = raw_types
            .into_iter()
            .map(|t| t.trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .filter(|t| !t.chars().any(char::is_whitespace))
            .filter(|t| t.chars().count() >= min_type_len)
            .collect();
        if types.is_empty() {
            return None;
        }
        Some(Lexicon {
            language_code: language_code.to_string(),
            kind,
            types,
            min_type_len,
        })
    }

    pub fn language_code(&self) -> &str {
        &self.language_code
    }

    pub fn kind(&self) -> LexiconKind {
        self.kind
    }

    pub fn min_type_len(&self) -> usize {
        self.min_type_len
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn contains(&self, ty: &str) -> bool {
        self.types.contains(ty)
    }

    pub(crate) fn types(&self) -> &FxHashSet<String> {
        &self.types
    }

    /// Types in lexicographic order (diagnostics, serialization).
    pub fn sorted_types(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.types.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}

/// Shared types between two lexicons, for operator diagnosis of
/// collision-prone lists (e.g. sister Creoles sharing function words).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapReport {
    pub count: usize,
    /// Up to 20 shared types, sorted, as a sample for eyeballing.
    pub samples: Vec<String>,
}

pub fn overlap_report(a: &Lexicon, b: &Lexicon) -> OverlapReport {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut shared: Vec<&str> = small
        .types()
        .iter()
        .filter(|t| large.contains(t))
        .map(String::as_str)
        .collect();
    shared.sort_unstable();
    OverlapReport {
        count: shared.len(),
        samples: shared.into_iter().take(20).map(str::to_owned).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_list(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    #[test]
    fn min_length_rejects_short_types() {
        let f = write_list(&["piti", "ka", "lapli"]);
        let (lexicon, report) = Lexicon::load(f.path(), "gcr", LexiconKind::Whitelist, 3).unwrap();
        assert_eq!(lexicon.len(), 2);
        assert!(lexicon.contains("piti") && lexicon.contains("lapli"));
        assert_eq!(report.rejected_short, 1);
    }

    #[test]
    fn case_fold_collapses_duplicates() {
        let f = write_list(&["Piti", "piti"]);
        let (lexicon, _) = Lexicon::load(f.path(), "gcr", LexiconKind::Whitelist, 1).unwrap();
        assert_eq!(lexicon.len(), 1);
        assert!(lexicon.contains("piti"));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let f = write_list(&["# header", "", "piti", "  lapli  "]);
        let (lexicon, report) = Lexicon::load(f.path(), "gcr", LexiconKind::Whitelist, 1).unwrap();
        assert_eq!(lexicon.len(), 2);
        assert_eq!(report, LoadReport::default());
    }

    #[test]
    fn multiword_lines_are_rejected() {
        let f = write_list(&["no dey", "piti"]);
        let (lexicon, report) = Lexicon::load(f.path(), "pcm", LexiconKind::Whitelist, 1).unwrap();
        assert_eq!(lexicon.len(), 1);
        assert_eq!(report.rejected_multiword, 1);
    }

    #[test]
    fn thousand_random_words_all_survive() {
        // Oracle: independent line-count/dedup via a BTreeSet over the raw input.
        let words: Vec<String> = (0..1000).map(|i| format!("mot{i:04}")).collect();
        let oracle: std::collections::BTreeSet<&String> = words.iter().collect();
        let f = write_list(&words.iter().map(String::as_str).collect::<Vec<_>>());
        let (lexicon, _) = Lexicon::load(f.path(), "syn", LexiconKind::Whitelist, 1).unwrap();
        assert_eq!(lexicon.len(), oracle.len());
        assert_eq!(lexicon.len(), 1000);
    }

    #[test]
    fn empty_result_is_a_hard_error() {
        let f = write_list(&["ka", "an"]);
        let err = Lexicon::load(f.path(), "gcr", LexiconKind::Whitelist, 3).unwrap_err();
        assert!(matches!(
            err,
            LexiconError::Empty {
                min_type_len: 3,
                ..
            }
        ));
    }

    #[test]
    fn unreadable_file_is_a_hard_error() {
        let err = Lexicon::load(
            Path::new("/nonexistent/wordlist.txt"),
            "gcr",
            LexiconKind::Whitelist,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, LexiconError::Unreadable { .. }));
    }

    #[test]
    fn loading_is_idempotent() {
        let f = write_list(&["Piti", "zòt", "lapli", "piti"]);
        let (first, _) = Lexicon::load(f.path(), "gcr", LexiconKind::Whitelist, 2).unwrap();
        let g = write_list(&first.sorted_types());
        let (second, _) = Lexicon::load(g.path(), "gcr", LexiconKind::Whitelist, 2).unwrap();
        assert_eq!(first.sorted_types(), second.sorted_types());
    }

    #[test]
    fn raising_min_type_len_never_adds_types() {
        let lines = ["a", "an", "ant", "ants", "antspeak"];
        let f = write_list(&lines);
        let mut prev = usize::MAX;
        for min_len in 1..=5 {
            let (lexicon, _) =
                Lexicon::load(f.path(), "tst", LexiconKind::Whitelist, min_len).unwrap();
            assert!(lexicon.len() <= prev);
            prev = lexicon.len();
        }
    }

    #[test]
    fn overlap_of_identical_lexicons_is_their_size() {
        let f = write_list(&["piti", "zot", "lapli"]);
        let (a, _) = Lexicon::load(f.path(), "gcr", LexiconKind::Whitelist, 1).unwrap();
        let report = overlap_report(&a, &a.clone());
        assert_eq!(report.count, 3);
    }

    #[test]
    fn overlap_of_disjoint_lexicons_is_zero() {
        let a = Lexicon::from_types("a", LexiconKind::Whitelist, vec!["x".into()], 1).unwrap();
        let b = Lexicon::from_types("b", LexiconKind::Whitelist, vec!["y".into()], 1).unwrap();
        assert_eq!(overlap_report(&a, &b).count, 0);
    }

    #[test]
    fn overlap_counts_planted_shared_words() {
        let a_words = [
            "un", "de", "twa", "kat", "senk", "sis", "set", "uit", "nef", "dis",
        ];
        let b_words = [
            "one", "two", "twa", "four", "senk", "six", "set", "eight", "nine", "ten",
        ];
        let a = Lexicon::from_types(
            "a",
            LexiconKind::Whitelist,
            a_words.iter().map(|s| s.to_string()),
            1,
        )
        .unwrap();
        let b = Lexicon::from_types(
            "b",
            LexiconKind::Whitelist,
            b_words.iter().map(|s| s.to_string()),
            1,
        )
        .unwrap();
        let report = overlap_report(&a, &b);
        assert_eq!(report.count, 3);
        assert_eq!(report.samples, vec!["senk", "set", "twa"]);
    }
}
