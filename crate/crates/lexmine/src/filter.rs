//! Document-level double-list filtering.
//!
//! Each document is tokenized once, scored against every target whitelist
//! independently, and gated in two stages: the whitelist threshold first,
//! then — only for documents that pass it — the blacklist tolerance. The
//! staggering matters: on crawl data almost everything dies at the cheap
//! whitelist gate, so blacklist work is spent on a tiny fraction of the
//! stream. [`FilterStats::blacklist_evals`] exists to keep that contract
//! honest.

use std::collections::BTreeMap;

use crate::lexicon::{Lexicon, LexiconKind};
use crate::score::{score, tokenize, ScoreConfig, TypeSet};
use crate::wet::Document;

/// Gate settings for one run. Immutable while filtering; share freely
/// across shard workers.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    /// Minimum whitelist score for a document to survive (per language).
    pub threshold: usize,
    /// Blacklist score at or above which a whitelist-passing document is
    /// rejected. 1 is the strictest setting: any blacklist hit rejects.
    pub tolerance: usize,
    /// Target whitelists; a document is kept when it passes for any of them.
    pub targets: Vec<Lexicon>,
    /// Noise/distractor lexicons. Scored lazily; aggregated by maximum.
    pub blacklists: Vec<Lexicon>,
    /// Persist per-document vocabularies for replayable scoring.
    pub cache_vocabularies: bool,
    /// Which documents the vocabulary index covers.
    pub cache_scope: CacheScope,
    pub score: ScoreConfig,
}

/// Indexing everything makes future searches for other languages cheap;
/// indexing only whitelist-passing documents saves space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheScope {
    All,
    PassingOnly,
}

/// Headline defaults: threshold 5, tolerance 1, plain whitespace
/// tokenization.
pub const DEFAULT_THRESHOLD: usize = 5;
pub const DEFAULT_TOLERANCE: usize = 1;
pub const DEFAULT_MIN_TYPE_LEN: usize = 3;

impl FilterConfig {
    pub fn new(targets: Vec<Lexicon>) -> Self {
        FilterConfig {
            threshold: DEFAULT_THRESHOLD,
            tolerance: DEFAULT_TOLERANCE,
            targets,
            blacklists: Vec::new(),
            cache_vocabularies: false,
            cache_scope: CacheScope::PassingOnly,
            score: ScoreConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.threshold == 0 {
            return Err(ConfigError::ZeroThreshold);
        }
        if self.tolerance == 0 {
            return Err(ConfigError::ZeroTolerance);
        }
        if self.targets.is_empty() {
            return Err(ConfigError::NoTargets);
        }
        let mut seen = std::collections::HashSet::new();
        for target in &self.targets {
            if target.kind() != LexiconKind::Whitelist {
                return Err(ConfigError::WrongKind {
                    language: target.language_code().to_string(),
                    expected: LexiconKind::Whitelist,
                });
            }
            if !seen.insert(target.language_code().to_string()) {
                return Err(ConfigError::DuplicateTarget(
                    target.language_code().to_string(),
                ));
            }
        }
        for blacklist in &self.blacklists {
            if blacklist.kind() != LexiconKind::Blacklist {
                return Err(ConfigError::WrongKind {
                    language: blacklist.language_code().to_string(),
                    expected: LexiconKind::Blacklist,
                });
            }
        }
        self.score.validate().map_err(ConfigError::Score)?;
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("threshold must be at least 1")]
    ZeroThreshold,
    #[error("tolerance must be at least 1")]
    ZeroTolerance,
    #[error("at least one target whitelist is required")]
    NoTargets,
    #[error("target language {0} appears twice")]
    DuplicateTarget(String),
    #[error("lexicon for {language} is not a {expected}")]
    WrongKind {
        language: String,
        expected: LexiconKind,
    },
    #[error("{0}")]
    Score(String),
}

/// A document that survived both gates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredDocument {
    pub document: Document,
    /// Whitelist score per target language. Every configured target is
    /// present; scores are independent of each other.
    pub wsc: BTreeMap<String, usize>,
    /// Maximum score over the configured blacklists.
    pub bsc: usize,
}

impl ScoredDocument {
    pub fn wsc_for(&self, language: &str) -> usize {
        self.wsc.get(language).copied().unwrap_or(0)
    }

    /// True when this document passes the gate for `language` specifically.
    pub fn passes_for(&self, language: &str, threshold: usize) -> bool {
        self.wsc_for(language) >= threshold
    }
}

/// Per-run counters; one per worker, merged at the end.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FilterStats {
    pub scanned: u64,
    pub kept: u64,
    pub rejected_below_threshold: u64,
    pub rejected_blacklist: u64,
    /// Number of documents whose blacklist score was actually computed.
    /// Stays at zero when nothing passes the whitelist gate.
    pub blacklist_evals: u64,
}

impl FilterStats {
    pub fn merge(&mut self, other: &FilterStats) {
        self.scanned += other.scanned;
        self.kept += other.kept;
        self.rejected_below_threshold += other.rejected_below_threshold;
        self.rejected_blacklist += other.rejected_blacklist;
        self.blacklist_evals += other.blacklist_evals;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Kept,
    BelowThreshold,
    BlacklistRejected,
}

/// Outcome of gating one type set.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub wsc: BTreeMap<String, usize>,
    /// `None` when the blacklist stage never ran (below threshold).
    pub bsc: Option<usize>,
    pub verdict: Verdict,
}

/// Gate a pre-tokenized type set. This is the one scoring path for both
/// raw documents and index replay, so the two stay equivalent by
/// construction.
pub fn evaluate(types: &TypeSet, config: &FilterConfig, stats: &mut FilterStats) -> Evaluation {
    stats.scanned += 1;
    let mut wsc = BTreeMap::new();
    let mut best = 0;
    for target in &config.targets {
        let s = score(types, target);
        best = best.max(s);
        wsc.insert(target.language_code().to_string(), s);
    }
    if best < config.threshold {
        stats.rejected_below_threshold += 1;
        return Evaluation {
            wsc,
            bsc: None,
            verdict: Verdict::BelowThreshold,
        };
    }
    stats.blacklist_evals += 1;
    let bsc = config
        .blacklists
        .iter()
        .map(|b| score(types, b))
        .max()
        .unwrap_or(0);
    if bsc >= config.tolerance {
        stats.rejected_blacklist += 1;
        return Evaluation {
            wsc,
            bsc: Some(bsc),
            verdict: Verdict::BlacklistRejected,
        };
    }
    stats.kept += 1;
    Evaluation {
        wsc,
        bsc: Some(bsc),
        verdict: Verdict::Kept,
    }
}

/// Tokenize and gate one document. Rejection is a normal outcome, not an
/// error.
pub fn filter_document(
    doc: Document,
    config: &FilterConfig,
    stats: &mut FilterStats,
) -> Option<ScoredDocument> {
    let types = tokenize(&doc.text, &config.score);
    match evaluate(&types, config, stats) {
        Evaluation {
            verdict: Verdict::Kept,
            wsc,
            bsc,
        } => Some(ScoredDocument {
            document: doc,
            wsc,
            bsc: bsc.unwrap_or(0),
        }),
        _ => None,
    }
}

/// Order kept documents for one language: descending whitelist score, ties
/// broken by ascending document id so output is reproducible.
pub fn rank(mut scored: Vec<ScoredDocument>, language: &str) -> Vec<ScoredDocument> {
    scored.sort_by(|a, b| {
        b.wsc_for(language)
            .cmp(&a.wsc_for(language))
            .then_with(|| a.document.id.cmp(&b.document.id))
    });
    scored
}

/// Wire format for per-language ranked corpora (JSON lines, one document
/// per line, descending `wsc`).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DocRecord {
    pub id: u64,
    pub uri: String,
    /// Crawler-identified language tags from the WET headers.
    pub lang: Vec<String>,
    /// Whitelist score for the language this corpus file belongs to.
    pub wsc: usize,
    pub bsc: usize,
    pub text: String,
}

impl DocRecord {
    pub fn from_scored(scored: &ScoredDocument, language: &str) -> DocRecord {
        DocRecord {
            id: scored.document.id,
            uri: scored.document.uri.clone(),
            lang: scored.document.crawler_lang.clone(),
            wsc: scored.wsc_for(language),
            bsc: scored.bsc,
            text: scored.document.text.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Lexicon;

    fn whitelist(lang: &str, words: &[&str]) -> Lexicon {
        Lexicon::from_types(
            lang,
            LexiconKind::Whitelist,
            words.iter().map(|w| w.to_string()),
            1,
        )
        .unwrap()
    }

    fn blacklist(words: &[&str]) -> Lexicon {
        Lexicon::from_types(
            "noise",
            LexiconKind::Blacklist,
            words.iter().map(|w| w.to_string()),
            1,
        )
        .unwrap()
    }

    fn doc(id: u64, text: &str) -> Document {
        Document {
            id,
            uri: format!("https://example.org/{id}"),
            crawler_lang: Vec::new(),
            text: text.to_string(),
            byte_len: text.len(),
        }
    }

    fn config(threshold: usize, tolerance: usize) -> FilterConfig {
        let mut cfg = FilterConfig::new(vec![whitelist(
            "gcr",
            &["piti", "lapli", "zot", "ka", "tonbe", "moun", "jodla", "wè"],
        )]);
        cfg.threshold = threshold;
        cfg.tolerance = tolerance;
        cfg.blacklists = vec![blacklist(&["spam", "casino", "viagra"])];
        cfg
    }

    #[test]
    fn below_threshold_never_touches_blacklists() {
        let cfg = config(5, 1);
        let mut stats = FilterStats::default();
        let kept = filter_document(doc(0, "rien de tout cela ici"), &cfg, &mut stats);
        assert!(kept.is_none());
        assert_eq!(stats.rejected_below_threshold, 1);
        assert_eq!(stats.blacklist_evals, 0);
    }

    #[test]
    fn passing_both_gates_keeps_the_document() {
        let cfg = config(5, 1);
        let mut stats = FilterStats::default();
        let kept = filter_document(
            doc(7, "piti lapli zot ka tonbe moun jodla"),
            &cfg,
            &mut stats,
        )
        .expect("document passes both gates");
        assert_eq!(kept.wsc_for("gcr"), 7);
        assert_eq!(kept.bsc, 0);
        assert_eq!(stats.kept, 1);
        assert_eq!(stats.blacklist_evals, 1);
    }

    #[test]
    fn blacklist_hit_at_tolerance_rejects() {
        let cfg = config(5, 1);
        let mut stats = FilterStats::default();
        let kept = filter_document(doc(1, "piti lapli zot ka tonbe casino"), &cfg, &mut stats);
        assert!(kept.is_none());
        assert_eq!(stats.rejected_blacklist, 1);
        assert_eq!(stats.blacklist_evals, 1);
    }

    #[test]
    fn kept_set_matches_brute_force_predicates() {
        // 1,000 synthetic documents with planted whitelist/blacklist counts;
        // the oracle evaluates both predicates naively on every document.
        let wl_words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let bl_words: Vec<String> = (0..10).map(|i| format!("b{i}")).collect();
        let mut cfg = FilterConfig::new(vec![Lexicon::from_types(
            "syn",
            LexiconKind::Whitelist,
            wl_words.clone(),
            1,
        )
        .unwrap()]);
        cfg.threshold = 5;
        cfg.tolerance = 2;
        cfg.blacklists =
            vec![
                Lexicon::from_types("noise", LexiconKind::Blacklist, bl_words.clone(), 1).unwrap(),
            ];

        let mut kept_ids = Vec::new();
        let mut oracle_ids = Vec::new();
        let mut stats = FilterStats::default();
        for i in 0..1000u64 {
            let wl_count = (i * 7 % 13) as usize; // 0..=12
            let bl_count = (i % 4) as usize; // 0..=3
            let mut text = String::from("le la et ou filler");
            for w in wl_words.iter().take(wl_count) {
                text.push(' ');
                text.push_str(w);
            }
            for b in bl_words.iter().take(bl_count) {
                text.push(' ');
                text.push_str(b);
            }

            // Oracle: recount from the raw text, both predicates, no staging.
            let tokens: Vec<&str> = text.split_whitespace().collect();
            let o_wsc = wl_words
                .iter()
                .filter(|w| tokens.contains(&w.as_str()))
                .count();
            let o_bsc = bl_words
                .iter()
                .filter(|b| tokens.contains(&b.as_str()))
                .count();
            if o_wsc >= cfg.threshold && o_bsc < cfg.tolerance {
                oracle_ids.push(i);
            }

            if filter_document(doc(i, &text), &cfg, &mut stats).is_some() {
                kept_ids.push(i);
            }
        }
        assert_eq!(kept_ids, oracle_ids);
        assert_eq!(stats.scanned, 1000);
    }

    #[test]
    fn rank_orders_by_score_then_id() {
        let cfg = config(1, 1);
        let mut stats = FilterStats::default();
        let texts = [
            "piti lapli zot",
            "piti lapli zot ka tonbe moun jodla wè x",
            "piti lapli zot ka tonbe",
        ];
        let scored: Vec<ScoredDocument> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| filter_document(doc(i as u64 + 1, t), &cfg, &mut stats).unwrap())
            .collect();
        assert_eq!(
            scored.iter().map(|s| s.wsc_for("gcr")).collect::<Vec<_>>(),
            vec![3, 8, 5]
        );
        let ranked = rank(scored, "gcr");
        let ids: Vec<u64> = ranked.iter().map(|s| s.document.id).collect();
        assert_eq!(ids, vec![2, 3, 1]);
    }

    #[test]
    fn equal_scores_fall_back_to_input_id_order() {
        let cfg = config(1, 1);
        let mut stats = FilterStats::default();
        let scored: Vec<ScoredDocument> = (0..5)
            .map(|i| filter_document(doc(i, "piti lapli"), &cfg, &mut stats).unwrap())
            .collect();
        let ranked = rank(scored, "gcr");
        let ids: Vec<u64> = ranked.iter().map(|s| s.document.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rank_matches_sort_oracle_on_random_scores() {
        // 10,000 pseudo-random scores; oracle is an independent sort of
        // (score, id) pairs via the standard library.
        let mut state = 42u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let docs: Vec<ScoredDocument> = (0..10_000u64)
            .map(|id| {
                let s = (next() % 50) as usize;
                ScoredDocument {
                    document: doc(id, ""),
                    wsc: BTreeMap::from([("syn".to_string(), s)]),
                    bsc: 0,
                }
            })
            .collect();
        let mut oracle: Vec<(usize, u64)> = docs
            .iter()
            .map(|d| (d.wsc_for("syn"), d.document.id))
            .collect();
        oracle.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));

        let ranked = rank(docs, "syn");
        let got: Vec<(usize, u64)> = ranked
            .iter()
            .map(|d| (d.wsc_for("syn"), d.document.id))
            .collect();
        assert_eq!(got, oracle);
    }

    #[test]
    fn ranking_is_a_permutation_of_the_kept_set() {
        let cfg = config(1, 1);
        let mut stats = FilterStats::default();
        let scored: Vec<ScoredDocument> = (0..20)
            .map(|i| filter_document(doc(i, "piti lapli zot"), &cfg, &mut stats).unwrap())
            .collect();
        let mut before: Vec<u64> = scored.iter().map(|s| s.document.id).collect();
        let ranked = rank(scored, "gcr");
        let mut after: Vec<u64> = ranked.iter().map(|s| s.document.id).collect();
        before.sort_unstable();
        after.sort_unstable();
        assert_eq!(before, after);
    }

    #[test]
    fn threshold_and_tolerance_are_monotone() {
        let wl_words: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let bl_words: Vec<String> = (0..6).map(|i| format!("b{i}")).collect();
        let texts: Vec<String> = (0..200u64)
            .map(|i| {
                let wl = (i % 15) as usize;
                let bl = (i % 5) as usize;
                let mut t = String::from("pad");
                wl_words.iter().take(wl).for_each(|w| {
                    t.push(' ');
                    t.push_str(w);
                });
                bl_words.iter().take(bl).for_each(|b| {
                    t.push(' ');
                    t.push_str(b);
                });
                t
            })
            .collect();

        let kept_ids = |threshold: usize, tolerance: usize| -> Vec<u64> {
            let mut cfg = FilterConfig::new(vec![Lexicon::from_types(
                "syn",
                LexiconKind::Whitelist,
                wl_words.clone(),
                1,
            )
            .unwrap()]);
            cfg.threshold = threshold;
            cfg.tolerance = tolerance;
            cfg.blacklists =
                vec![
                    Lexicon::from_types("noise", LexiconKind::Blacklist, bl_words.clone(), 1)
                        .unwrap(),
                ];
            let mut stats = FilterStats::default();
            texts
                .iter()
                .enumerate()
                .filter_map(|(i, t)| filter_document(doc(i as u64, t), &cfg, &mut stats))
                .map(|s| s.document.id)
                .collect()
        };

        for t in 1..10 {
            let lo = kept_ids(t, 2);
            let hi = kept_ids(t + 1, 2);
            assert!(hi.iter().all(|id| lo.contains(id)), "threshold {t}");
        }
        for tol in 1..4 {
            let tight = kept_ids(3, tol);
            let loose = kept_ids(3, tol + 1);
            assert!(tight.iter().all(|id| loose.contains(id)), "tolerance {tol}");
        }
    }

    #[test]
    fn zero_passing_corpus_never_evaluates_blacklists() {
        let cfg = config(5, 1);
        let mut stats = FilterStats::default();
        for i in 0..100 {
            filter_document(doc(i, "du texte sans aucun mot cible"), &cfg, &mut stats);
        }
        assert_eq!(stats.blacklist_evals, 0);
        assert_eq!(stats.rejected_below_threshold, 100);
    }

    #[test]
    fn validate_rejects_bad_configs() {
        let mut cfg = config(5, 1);
        cfg.threshold = 0;
        assert!(matches!(cfg.validate(), Err(ConfigError::ZeroThreshold)));
        let mut cfg = config(5, 1);
        cfg.tolerance = 0;
        assert!(matches!(cfg.validate(), Err(ConfigError::ZeroTolerance)));
        let cfg = FilterConfig::new(Vec::new());
        assert!(matches!(cfg.validate(), Err(ConfigError::NoTargets)));
        let mut cfg = config(5, 1);
        cfg.targets.push(cfg.targets[0].clone());
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::DuplicateTarget(_))
        ));
    }
}
