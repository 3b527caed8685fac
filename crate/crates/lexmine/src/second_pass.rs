//! Post-ranking refinement of a kept corpus.
//!
//! After the first pass, the surviving documents are few enough to inspect
//! and cheap enough to re-score, so this stage trades generality for
//! operator control: a loading threshold keeps low scorers out of memory
//! entirely, crawler-declared languages knock out confidently-unrelated
//! content, sister-language lexicons claim documents they explain better
//! than the target, and known-bad URLs are blocked outright. Every drop is
//! written to an audit log.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use globset::GlobBuilder;

use crate::filter::DocRecord;
use crate::index::{IndexError, IndexReader};
use crate::lexicon::{Lexicon, LexiconError, LexiconKind};
use crate::score::{score, tokenize, ScoreConfig, TypeSet};

#[derive(Debug, thiserror::Error)]
pub enum SecondPassError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad JSON record in {path} line {line}: {source}")]
    Json {
        path: PathBuf,
        line: u64,
        #[source]
        source: serde_json::Error,
    },
    #[error("bad second-pass config: {0}")]
    Config(String),
    #[error("URL pattern {pattern:?} is not a valid glob: {source}")]
    BadPattern {
        pattern: String,
        #[source]
        source: globset::Error,
    },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("index input needs a target-wordlist to recompute scores")]
    MissingTargetWordlist,
}

/// The three drop stages, applied in configured order. Each is a pure
/// predicate, so survivor sets do not depend on the order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    CrawlerLang,
    RelatedLang,
    Source,
}

pub const DEFAULT_STAGE_ORDER: [Stage; 3] = [Stage::CrawlerLang, Stage::RelatedLang, Stage::Source];

/// A compiled URL rule: plain substring when the pattern has no glob
/// metacharacters, full glob otherwise. Matching is case-insensitive.
#[derive(Debug, Clone)]
pub struct SourceRule {
    pub pattern: String,
    matcher: Matcher,
}

#[derive(Debug, Clone)]
enum Matcher {
    Substring(String),
    Glob(globset::GlobMatcher),
}

impl SourceRule {
    pub fn compile(pattern: &str) -> Result<SourceRule, SecondPassError> {
        if pattern.is_empty() {
            return Err(SecondPassError::Config(
                "blocked-url-patterns entries must be non-empty".into(),
            ));
        }
        let matcher = if pattern.contains(['*', '?', '[', ']', '{', '}']) {
            let glob = GlobBuilder::new(pattern)
                .case_insensitive(true)
                .literal_separator(false)
                .build()
                .map_err(|source| SecondPassError::BadPattern {
                    pattern: pattern.to_string(),
                    source,
                })?;
            Matcher::Glob(glob.compile_matcher())
        } else {
            Matcher::Substring(pattern.to_lowercase())
        };
        Ok(SourceRule {
            pattern: pattern.to_string(),
            matcher,
        })
    }

    pub fn matches(&self, uri: &str) -> bool {
        match &self.matcher {
            Matcher::Substring(needle) => uri.to_lowercase().contains(needle),
            Matcher::Glob(glob) => glob.is_match(uri),
        }
    }
}

/// Runtime configuration with lexicons loaded and patterns compiled.
#[derive(Debug, Clone)]
pub struct SecondPassConfig {
    pub target: String,
    /// Minimum first-pass whitelist score to load a candidate at all. Must
    /// not be below the first-pass threshold.
    pub loading_threshold: usize,
    /// Crawler tags (lowercased) that disqualify a document outright.
    pub blocked_crawler_langs: HashSet<String>,
    /// Sister-language whitelists competing with the target.
    pub related_targets: Vec<Lexicon>,
    pub source_rules: Vec<SourceRule>,
    pub stage_order: Vec<Stage>,
    pub score: ScoreConfig,
    /// Needed when loading from a vocabulary index, where first-pass scores
    /// are not stored and must be recomputed.
    pub target_whitelist: Option<Lexicon>,
}

impl SecondPassConfig {
    pub fn new(target: &str, loading_threshold: usize) -> Self {
        SecondPassConfig {
            target: target.to_string(),
            loading_threshold,
            blocked_crawler_langs: HashSet::new(),
            related_targets: Vec::new(),
            source_rules: Vec::new(),
            stage_order: DEFAULT_STAGE_ORDER.to_vec(),
            score: ScoreConfig::default(),
            target_whitelist: None,
        }
    }
}

/// On-disk form of the config (TOML, human-editable).
///
/// ```toml
/// target = "acf"
/// loading-threshold = 10
/// blocked-crawler-langs = ["swe", "ron", "tur"]
/// blocked-url-patterns = ["gcr.wikipedia.org", "*.clicanoo.re/*"]
/// min-type-len = 3
///
/// [[related]]
/// lang = "gcr"
/// wordlist = "wordlists/gcr.txt"
/// ```
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SecondPassConfigFile {
    pub target: String,
    pub loading_threshold: usize,
    #[serde(default)]
    pub blocked_crawler_langs: Vec<String>,
    #[serde(default)]
    pub blocked_url_patterns: Vec<String>,
    #[serde(default)]
    pub related: Vec<RelatedEntry>,
    #[serde(default)]
    pub filter_order: Option<Vec<Stage>>,
    /// Minimum type length used when loading the wordlists named here.
    #[serde(default)]
    pub min_type_len: Option<usize>,
    #[serde(default)]
    pub score: ScoreConfig,
    pub target_wordlist: Option<PathBuf>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RelatedEntry {
    pub lang: String,
    pub wordlist: PathBuf,
}

impl SecondPassConfigFile {
    pub fn parse(text: &str) -> Result<Self, SecondPassError> {
        toml::from_str(text).map_err(|e| SecondPassError::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, SecondPassError> {
        let text = std::fs::read_to_string(path).map_err(|source| SecondPassError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Load lexicons and compile patterns. Paths in the file are resolved
    /// relative to `base_dir`.
    pub fn into_config(self, base_dir: &Path) -> Result<SecondPassConfig, SecondPassError> {
        let min_type_len = self
            .min_type_len
            .unwrap_or(crate::filter::DEFAULT_MIN_TYPE_LEN);
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let mut related_targets = Vec::new();
        for entry in &self.related {
            let (lexicon, _) = Lexicon::load(
                &resolve(&entry.wordlist),
                &entry.lang,
                LexiconKind::Whitelist,
                min_type_len,
            )?;
            related_targets.push(lexicon);
        }
        let target_whitelist = match &self.target_wordlist {
            Some(path) => Some(
                Lexicon::load(
                    &resolve(path),
                    &self.target,
                    LexiconKind::Whitelist,
                    min_type_len,
                )?
                .0,
            ),
            None => None,
        };
        let source_rules = self
            .blocked_url_patterns
            .iter()
            .map(|p| SourceRule::compile(p))
            .collect::<Result<Vec<_>, _>>()?;
        self.score.validate().map_err(SecondPassError::Config)?;
        Ok(SecondPassConfig {
            target: self.target,
            loading_threshold: self.loading_threshold,
            blocked_crawler_langs: self
                .blocked_crawler_langs
                .iter()
                .map(|t| t.to_lowercase())
                .collect(),
            related_targets,
            source_rules,
            stage_order: self
                .filter_order
                .unwrap_or_else(|| DEFAULT_STAGE_ORDER.to_vec()),
            score: self.score,
            target_whitelist,
        })
    }
}

/// One loaded candidate: the first-pass record plus its type set, so
/// related-language scores can be computed without another tokenization
/// pass downstream.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub record: DocRecord,
    pub types: TypeSet,
}

/// Why a candidate was dropped; serialized into the audit log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DropReason {
    CrawlerLanguage {
        tag: String,
    },
    RelatedLanguage {
        language: String,
        related_wsc: usize,
        target_wsc: usize,
    },
    BlockedSource {
        pattern: String,
    },
}

impl DropReason {
    pub fn code(&self) -> &'static str {
        match self {
            DropReason::CrawlerLanguage { .. } => "crawler-language",
            DropReason::RelatedLanguage { .. } => "related-language",
            DropReason::BlockedSource { .. } => "blocked-source",
        }
    }

    pub fn detail(&self) -> String {
        match self {
            DropReason::CrawlerLanguage { tag } => tag.clone(),
            DropReason::RelatedLanguage {
                language,
                related_wsc,
                target_wsc,
            } => format!("{language} scored {related_wsc} > {target_wsc}"),
            DropReason::BlockedSource { pattern } => pattern.clone(),
        }
    }
}

/// Audit log line: `{"id":…,"reason":"…","detail":"…"}`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AuditEntry {
    pub id: u64,
    pub reason: String,
    pub detail: String,
}

impl AuditEntry {
    fn new(id: u64, reason: &DropReason) -> AuditEntry {
        AuditEntry {
            id,
            reason: reason.code().to_string(),
            detail: reason.detail(),
        }
    }
}

/// Drop when any crawler tag is blocked. Documents without tags pass: the
/// crawler's labels are unreliable for the targets themselves, so only
/// confidently-unrelated tags are actionable.
pub fn crawler_language_drop(cand: &Candidate, config: &SecondPassConfig) -> Option<DropReason> {
    cand.record
        .lang
        .iter()
        .find(|tag| {
            config
                .blocked_crawler_langs
                .contains(tag.to_lowercase().as_str())
        })
        .map(|tag| DropReason::CrawlerLanguage { tag: tag.clone() })
}

/// Drop when any sister language scores strictly higher than the target.
/// Exact ties keep the document: sister Creoles share many types, and the
/// point is removing documents a sister explains *better*.
pub fn related_language_drop(cand: &Candidate, config: &SecondPassConfig) -> Option<DropReason> {
    let target_wsc = cand.record.wsc;
    for related in &config.related_targets {
        let related_wsc = score(&cand.types, related);
        if related_wsc > target_wsc {
            return Some(DropReason::RelatedLanguage {
                language: related.language_code().to_string(),
                related_wsc,
                target_wsc,
            });
        }
    }
    None
}

/// Drop when the URI matches any blocked pattern.
pub fn source_drop(cand: &Candidate, config: &SecondPassConfig) -> Option<DropReason> {
    config
        .source_rules
        .iter()
        .find(|rule| rule.matches(&cand.record.uri))
        .map(|rule| DropReason::BlockedSource {
            pattern: rule.pattern.clone(),
        })
}

pub fn stage_drop(stage: Stage, cand: &Candidate, config: &SecondPassConfig) -> Option<DropReason> {
    match stage {
        Stage::CrawlerLang => crawler_language_drop(cand, config),
        Stage::RelatedLang => related_language_drop(cand, config),
        Stage::Source => source_drop(cand, config),
    }
}

/// Batch form of the crawler-language filter.
pub fn filter_crawler_language(docs: Vec<Candidate>, config: &SecondPassConfig) -> Vec<Candidate> {
    docs.into_iter()
        .filter(|c| crawler_language_drop(c, config).is_none())
        .collect()
}

/// Batch form of the comparative related-language filter. With no related
/// targets configured this is the identity.
pub fn filter_related_languages(docs: Vec<Candidate>, config: &SecondPassConfig) -> Vec<Candidate> {
    docs.into_iter()
        .filter(|c| related_language_drop(c, config).is_none())
        .collect()
}

/// Batch form of the URL source filter.
pub fn filter_sources(docs: Vec<Candidate>, config: &SecondPassConfig) -> Vec<Candidate> {
    docs.into_iter()
        .filter(|c| source_drop(c, config).is_none())
        .collect()
}

/// Run the configured stages in order, keeping an audit entry per drop.
pub fn apply_stages(
    candidates: Vec<Candidate>,
    config: &SecondPassConfig,
) -> (Vec<Candidate>, Vec<AuditEntry>) {
    let mut survivors = candidates;
    let mut audit = Vec::new();
    for stage in &config.stage_order {
        survivors.retain(|cand| match stage_drop(*stage, cand, config) {
            Some(reason) => {
                audit.push(AuditEntry::new(cand.record.id, &reason));
                false
            }
            None => true,
        });
    }
    (survivors, audit)
}

/// Counters from [`load_candidates`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LoadStats {
    pub loaded: u64,
    pub skipped_below_loading_threshold: u64,
}

#[derive(serde::Deserialize)]
struct WscProbe {
    wsc: usize,
}

fn sniff_index(path: &Path) -> Result<bool, SecondPassError> {
    let file = File::open(path).map_err(|source| SecondPassError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut first = String::new();
    let mut reader = BufReader::new(file);
    reader
        .read_line(&mut first)
        .map_err(|source| SecondPassError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(first.starts_with("#lexmine-vocab"))
}

/// Stream first-pass output (ranked JSONL or a vocabulary index), keeping
/// only documents whose target score reaches the loading threshold. Records
/// below it are probed cheaply and never fully materialized.
pub fn load_candidates(
    path: &Path,
    config: &SecondPassConfig,
) -> Result<(Vec<Candidate>, LoadStats), SecondPassError> {
    if sniff_index(path)? {
        load_from_index(path, config)
    } else {
        load_from_jsonl(path, config)
    }
}

fn load_from_jsonl(
    path: &Path,
    config: &SecondPassConfig,
) -> Result<(Vec<Candidate>, LoadStats), SecondPassError> {
    let file = File::open(path).map_err(|source| SecondPassError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut stats = LoadStats::default();
    let mut out = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| SecondPassError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let json_err = |source| SecondPassError::Json {
            path: path.to_path_buf(),
            line: line_no as u64 + 1,
            source,
        };
        // Cheap probe first: the full record (with its text body) is only
        // deserialized for documents that clear the loading threshold.
        let probe: WscProbe = serde_json::from_str(&line).map_err(json_err)?;
        if probe.wsc < config.loading_threshold {
            stats.skipped_below_loading_threshold += 1;
            continue;
        }
        let record: DocRecord = serde_json::from_str(&line).map_err(json_err)?;
        let types = tokenize(&record.text, &config.score);
        stats.loaded += 1;
        out.push(Candidate { record, types });
    }
    Ok((out, stats))
}

fn load_from_index(
    path: &Path,
    config: &SecondPassConfig,
) -> Result<(Vec<Candidate>, LoadStats), SecondPassError> {
    let whitelist = config
        .target_whitelist
        .as_ref()
        .ok_or(SecondPassError::MissingTargetWordlist)?;
    let mut stats = LoadStats::default();
    let mut out = Vec::new();
    for record in IndexReader::open(path)? {
        let record = record?;
        let wsc = score(&record.types, whitelist);
        if wsc < config.loading_threshold {
            stats.skipped_below_loading_threshold += 1;
            continue;
        }
        stats.loaded += 1;
        out.push(Candidate {
            record: DocRecord {
                id: record.id,
                uri: record.uri,
                lang: record.crawler_lang,
                wsc,
                bsc: 0,
                text: String::new(),
            },
            types: record.types,
        });
    }
    Ok((out, stats))
}
