//! Line-level ranking inside kept documents.
//!
//! Lines are scored like documents (distinct whitelist types present), then
//! normalized by line length in scalar values. Normalization pushes long
//! noisy strings that match a few types by chance to the bottom and lets
//! short meaningful lines surface. Exact duplicates land on equal scores,
//! so they cluster together in the ranking and can be collapsed.

use crate::filter::ScoredDocument;
use crate::lexicon::Lexicon;
use crate::score::{scalar_len, score, tokenize, ScoreConfig};

/// Boilerplate length floor. Tunable: list-based content like dictionaries
/// lives below it.
pub const DEFAULT_MIN_LINE_LEN: usize = 15;

/// One line of a kept document with its normalized score.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedLine {
    pub doc_id: u64,
    /// Zero-based position of the line within its document.
    pub line_no: u64,
    pub text: String,
    /// Distinct whitelist types present in the line.
    pub matches: usize,
    /// `matches` divided by line length in Unicode scalar values; zero when
    /// nothing matches.
    pub norm_score: f64,
}

/// A collapsed duplicate group: the surviving representative plus how many
/// identical lines it stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct LineGroup {
    pub line: RankedLine,
    pub dup_count: usize,
}

/// Wire format for the line corpus (JSON lines, descending `norm_score`).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineRecord {
    pub doc_id: u64,
    pub line_no: u64,
    pub norm_score: f64,
    pub matches: usize,
    pub dup_count: usize,
    pub text: String,
}

impl LineRecord {
    pub fn from_group(group: &LineGroup) -> LineRecord {
        LineRecord {
            doc_id: group.line.doc_id,
            line_no: group.line.line_no,
            norm_score: group.line.norm_score,
            matches: group.line.matches,
            dup_count: group.dup_count,
            text: group.line.text.clone(),
        }
    }
}

/// Split a kept document into lines, score each against the whitelist, and
/// rank descending by normalized score. Lines shorter than `min_line_len`
/// scalar values are dropped as boilerplate.
pub fn rank_lines(
    doc: &ScoredDocument,
    whitelist: &Lexicon,
    min_line_len: usize,
    config: &ScoreConfig,
) -> Vec<RankedLine> {
    let mut out = Vec::new();
    for (line_no, line) in doc.document.text.split('\n').enumerate() {
        let len = scalar_len(line);
        if len < min_line_len {
            continue;
        }
        let matches = score(&tokenize(line, config), whitelist);
        let norm_score = if matches == 0 {
            0.0
        } else {
            matches as f64 / len as f64
        };
        out.push(RankedLine {
            doc_id: doc.document.id,
            line_no: line_no as u64,
            text: line.to_string(),
            matches,
            norm_score,
        });
    }
    sort_ranked(&mut out);
    out
}

/// Descending by score, ties by (doc_id, line_no) ascending.
pub fn sort_ranked(lines: &mut [RankedLine]) {
    lines.sort_by(|a, b| {
        b.norm_score
            .partial_cmp(&a.norm_score)
            .expect("norm scores are finite")
            .then_with(|| (a.doc_id, a.line_no).cmp(&(b.doc_id, b.line_no)))
    });
}

fn duplicate_key(text: &str) -> String {
    text.trim().to_lowercase()
}

/// Collapse byte-identical lines (after trim and case fold) within each
/// equal-score run of an already ranked list. The representative is the
/// first occurrence, i.e. the lowest `(doc_id, line_no)`; the group size is
/// retained. Lines with unique text always survive.
pub fn cluster_duplicates(lines: Vec<RankedLine>) -> Vec<LineGroup> {
    let mut out: Vec<LineGroup> = Vec::with_capacity(lines.len());
    let mut run_index: rustc_hash::FxHashMap<String, usize> = Default::default();
    let mut current_score: Option<f64> = None;

    for line in lines {
        if current_score != Some(line.norm_score) {
            current_score = Some(line.norm_score);
            run_index.clear();
        }
        match run_index.entry(duplicate_key(&line.text)) {
            std::collections::hash_map::Entry::Occupied(slot) => {
                out[*slot.get()].dup_count += 1;
            }
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert(out.len());
                out.push(LineGroup { line, dup_count: 1 });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::LexiconKind;
    use crate::wet::Document;
    use std::collections::BTreeMap;
    use std::collections::HashMap;

    fn whitelist(words: &[&str]) -> Lexicon {
        Lexicon::from_types(
            "tst",
            LexiconKind::Whitelist,
            words.iter().map(|w| w.to_string()),
            1,
        )
        .unwrap()
    }

    fn scored(id: u64, text: &str) -> ScoredDocument {
        ScoredDocument {
            document: Document {
                id,
                uri: String::new(),
                crawler_lang: Vec::new(),
                text: text.to_string(),
                byte_len: text.len(),
            },
            wsc: BTreeMap::new(),
            bsc: 0,
        }
    }

    #[test]
    fn normalized_score_is_matches_over_length() {
        let doc = scored(0, "piti piti");
        let lines = rank_lines(&doc, &whitelist(&["piti"]), 1, &ScoreConfig::default());
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].matches, 1);
        assert!((lines[0].norm_score - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn no_matches_scores_zero_and_ranks_last() {
        let doc = scored(0, "piti ka tonbe jodla\nrien du tout la dedans");
        let lines = rank_lines(
            &doc,
            &whitelist(&["piti", "jodla"]),
            1,
            &ScoreConfig::default(),
        );
        assert_eq!(lines.len(), 2);
        assert!(lines[0].norm_score > 0.0);
        assert_eq!(lines[1].matches, 0);
        assert_eq!(lines[1].norm_score, 0.0);
        assert_eq!(lines[1].line_no, 1);
    }

    #[test]
    fn short_lines_are_dropped() {
        let doc = scored(0, "piti\nsa ka fèt piti lapli jodla menm");
        let lines = rank_lines(&doc, &whitelist(&["piti"]), 15, &ScoreConfig::default());
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].line_no, 1);
    }

    #[test]
    fn ordering_matches_brute_force_oracle() {
        // 200 synthetic lines of varying lengths and match counts.
        let wl_words: Vec<String> = (0..10).map(|i| format!("cible{i}")).collect();
        let wl = whitelist(&wl_words.iter().map(String::as_str).collect::<Vec<_>>());
        let mut text = String::new();
        for i in 0..200usize {
            let matches = i % 7;
            let fillers = i % 13;
            let mut line = String::new();
            for w in wl_words.iter().take(matches) {
                line.push_str(w);
                line.push(' ');
            }
            for f in 0..fillers {
                line.push_str(&format!("bruit{f} "));
            }
            line.push_str("fin");
            text.push_str(&line);
            if i != 199 {
                text.push('\n');
            }
        }
        let doc = scored(3, &text);
        let cfg = ScoreConfig::default();
        let ranked = rank_lines(&doc, &wl, 1, &cfg);

        // Oracle: recompute each line's score naively and sort with the
        // standard library on the same key.
        let mut oracle: Vec<(f64, u64)> = text
            .split('\n')
            .enumerate()
            .map(|(no, line)| {
                let toks: Vec<String> = line.split_whitespace().map(|t| t.to_lowercase()).collect();
                let m = wl_words.iter().filter(|w| toks.contains(w)).count();
                let len = line.chars().count();
                let s = if m == 0 { 0.0 } else { m as f64 / len as f64 };
                (s, no as u64)
            })
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

        let got: Vec<(f64, u64)> = ranked.iter().map(|l| (l.norm_score, l.line_no)).collect();
        assert_eq!(got, oracle);
    }

    #[test]
    fn appending_noise_strictly_lowers_the_score() {
        let wl = whitelist(&["piti", "jodla"]);
        let cfg = ScoreConfig::default();
        let base = "piti jodla ka vini la menm";
        let padded = format!("{base} {}", "x".repeat(100));
        let short = rank_lines(&scored(0, base), &wl, 1, &cfg);
        let long = rank_lines(&scored(0, &padded), &wl, 1, &cfg);
        assert_eq!(short[0].matches, long[0].matches);
        assert!(long[0].norm_score < short[0].norm_score);
    }

    #[test]
    fn three_identical_lines_collapse_to_one() {
        let doc = scored(0, "piti lapli jodla\npiti lapli jodla\npiti lapli jodla");
        let ranked = rank_lines(&doc, &whitelist(&["piti"]), 1, &ScoreConfig::default());
        let groups = cluster_duplicates(ranked);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].dup_count, 3);
        assert_eq!(groups[0].line.line_no, 0);
    }

    #[test]
    fn fold_and_trim_define_duplicate_equality() {
        let doc = scored(
            0,
            "Piti Lapli Jodla\n  piti lapli jodla  \npiti lapli JODLA",
        );
        let ranked = rank_lines(&doc, &whitelist(&["piti"]), 1, &ScoreConfig::default());
        // Same matches but different scalar lengths: only the two lines of
        // equal length share a score run and can merge.
        let groups = cluster_duplicates(ranked);
        assert!(groups.len() < 3);
        assert!(groups.iter().all(|g| g.dup_count >= 1));
    }

    #[test]
    fn without_duplicates_clustering_is_identity() {
        let doc = scored(0, "piti lapli jodla\nzot ka vini jodla\nrien isit monchè");
        let ranked = rank_lines(
            &doc,
            &whitelist(&["piti", "zot"]),
            1,
            &ScoreConfig::default(),
        );
        let texts_before: Vec<String> = ranked.iter().map(|l| l.text.clone()).collect();
        let groups = cluster_duplicates(ranked);
        assert_eq!(
            groups
                .iter()
                .map(|g| g.line.text.clone())
                .collect::<Vec<_>>(),
            texts_before
        );
        assert!(groups.iter().all(|g| g.dup_count == 1));
    }

    #[test]
    fn planted_clusters_match_hash_map_oracle() {
        // Build lines where every third line repeats one of five templates.
        let wl = whitelist(&["mak"]);
        let cfg = ScoreConfig::default();
        let mut all = Vec::new();
        for id in 0..10u64 {
            let mut body = String::new();
            for j in 0..30usize {
                if j % 3 == 0 {
                    body.push_str(&format!("mak tenplat nimewo {}", j % 5));
                } else {
                    body.push_str(&format!("mak liy inik {id} {j} avek pad"));
                }
                body.push('\n');
            }
            all.extend(rank_lines(&scored(id, body.trim_end()), &wl, 1, &cfg));
        }
        sort_ranked(&mut all);

        // Oracle: count multiplicity of (score, folded text) with a map.
        let mut oracle: HashMap<(u64, String), usize> = HashMap::new();
        for line in &all {
            *oracle
                .entry((line.norm_score.to_bits(), line.text.trim().to_lowercase()))
                .or_default() += 1;
        }

        let groups = cluster_duplicates(all);
        assert_eq!(groups.len(), oracle.len());
        for g in &groups {
            let key = (
                g.line.norm_score.to_bits(),
                g.line.text.trim().to_lowercase(),
            );
            assert_eq!(oracle[&key], g.dup_count, "line {:?}", g.line.text);
        }
    }

    #[test]
    fn output_is_descending_in_norm_score() {
        let doc = scored(
            0,
            "piti jodla zot ka\nlapli piti ka tonbe jodla menm koté\nrien ici\npiti piti piti",
        );
        let ranked = rank_lines(
            &doc,
            &whitelist(&["piti", "jodla", "lapli"]),
            1,
            &ScoreConfig::default(),
        );
        for pair in ranked.windows(2) {
            assert!(pair[0].norm_score >= pair[1].norm_score);
        }
    }
}
