//! Needle/hay benchmark construction and measurement.
//!
//! Two corpus sources are supported: operator-supplied document dumps (for
//! faithful reproduction against real Wikipedia data) and a fully synthetic
//! generator that plants a known number of whitelist types into hay
//! templates. The synthetic path is what CI runs: every recall and
//! false-positive count it produces has a closed-form expectation from the
//! planting schedule.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rustc_hash::FxHashSet;

use crate::filter::{evaluate, FilterConfig, FilterStats, Verdict};
use crate::lexicon::{Lexicon, LexiconKind};
use crate::score::tokenize;
use crate::wet::Document;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("not enough {kind} documents: need {need}, have {have} after exclusions")]
    InsufficientSource {
        kind: &'static str,
        need: usize,
        have: usize,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad JSON in {path} line {line}: {detail}")]
    Json {
        path: PathBuf,
        line: u64,
        detail: String,
    },
}

/// Gold label of a benchmark document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldLabel {
    Needle,
    Hay,
}

/// A labeled evaluation corpus. Ids are assigned in corpus order.
#[derive(Debug, Clone)]
pub struct BenchmarkCorpus {
    pub documents: Vec<(Document, GoldLabel)>,
    pub needle_count: usize,
    pub hay_count: usize,
    pub skip_word: Option<String>,
}

/// One row of the threshold sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BenchResult {
    pub threshold: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub recall_pct: f64,
    pub fpr_pct: f64,
    pub wall_time_secs: f64,
}

/// Deterministic generator (SplitMix64). The sequence is fixed forever, so
/// seeded corpora are bit-reproducible across builds and platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }
}

/// Seeded Fisher–Yates.
pub fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        items.swap(i, rng.below(i as u64 + 1) as usize);
    }
}

/// Sample a mixed corpus: `needle_count` from the needle source and
/// `hay_count` from the hay source, without replacement, with hay documents
/// containing `skip_word` (case-folded substring) excluded first. The final
/// corpus order is a seeded shuffle, so builds are reproducible.
pub fn build_benchmark(
    needle_source: &[Document],
    hay_source: &[Document],
    needle_count: usize,
    hay_count: usize,
    skip_word: Option<&str>,
    seed: u64,
) -> Result<BenchmarkCorpus, BenchError> {
    let mut rng = SplitMix64::new(seed);

    let eligible_hay: Vec<&Document> = match skip_word {
        Some(word) => {
            let folded = word.to_lowercase();
            hay_source
                .iter()
                .filter(|d| !d.text.to_lowercase().contains(&folded))
                .collect()
        }
        None => hay_source.iter().collect(),
    };
    if needle_source.len() < needle_count {
        return Err(BenchError::InsufficientSource {
            kind: "needle",
            need: needle_count,
            have: needle_source.len(),
        });
    }
    if eligible_hay.len() < hay_count {
        return Err(BenchError::InsufficientSource {
            kind: "hay",
            need: hay_count,
            have: eligible_hay.len(),
        });
    }

    let mut needle_idx: Vec<usize> = (0..needle_source.len()).collect();
    shuffle(&mut needle_idx, &mut rng);
    let mut hay_idx: Vec<usize> = (0..eligible_hay.len()).collect();
    shuffle(&mut hay_idx, &mut rng);

    let mut documents: Vec<(Document, GoldLabel)> = needle_idx
        .into_iter()
        .take(needle_count)
        .map(|i| (needle_source[i].clone(), GoldLabel::Needle))
        .chain(
            hay_idx
                .into_iter()
                .take(hay_count)
                .map(|i| (eligible_hay[i].clone(), GoldLabel::Hay)),
        )
        .collect();
    shuffle(&mut documents, &mut rng);
    for (pos, (doc, _)) in documents.iter_mut().enumerate() {
        doc.id = pos as u64;
    }

    Ok(BenchmarkCorpus {
        documents,
        needle_count,
        hay_count,
        skip_word: skip_word.map(str::to_string),
    })
}

/// Sweep thresholds over the corpus and measure recall, false-positive rate
/// and wall time per run. Timing covers scoring only, not corpus
/// construction. A document counts as found for `target` when it passes
/// both gates *for that language*.
pub fn run_benchmark(
    corpus: &BenchmarkCorpus,
    base_config: &FilterConfig,
    thresholds: &[usize],
    target: &str,
) -> Vec<BenchResult> {
    let mut results = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut config = base_config.clone();
        config.threshold = threshold;
        let mut stats = FilterStats::default();
        let mut true_positives = 0;
        let mut false_positives = 0;

        let start = Instant::now();
        for (doc, gold) in &corpus.documents {
            let types = tokenize(&doc.text, &config.score);
            let evaluation = evaluate(&types, &config, &mut stats);
            let found = evaluation.verdict == Verdict::Kept
                && evaluation.wsc.get(target).copied().unwrap_or(0) >= threshold;
            if found {
                match gold {
                    GoldLabel::Needle => true_positives += 1,
                    GoldLabel::Hay => false_positives += 1,
                }
            }
        }
        let wall_time_secs = start.elapsed().as_secs_f64();

        let recall_pct = if corpus.needle_count == 0 {
            100.0 // vacuous: every one of zero needles was found
        } else {
            100.0 * true_positives as f64 / corpus.needle_count as f64
        };
        let fpr_pct = if corpus.hay_count == 0 {
            0.0
        } else {
            100.0 * false_positives as f64 / corpus.hay_count as f64
        };
        results.push(BenchResult {
            threshold,
            true_positives,
            false_positives,
            recall_pct,
            fpr_pct,
            wall_time_secs,
        });
    }
    results
}

/// Score the corpus once per worker chunk across `threads` threads and
/// return documents per second. The scaling check for shard workers uses
/// this; single-threaded numbers stay per-core comparable.
pub fn throughput(corpus: &BenchmarkCorpus, config: &FilterConfig, threads: usize) -> f64 {
    let docs: Vec<&Document> = corpus.documents.iter().map(|(d, _)| d).collect();
    let chunk = docs.len().div_ceil(threads.max(1));
    let start = Instant::now();
    std::thread::scope(|scope| {
        for piece in docs.chunks(chunk) {
            scope.spawn(move || {
                let mut stats = FilterStats::default();
                for doc in piece {
                    let types = tokenize(&doc.text, &config.score);
                    evaluate(&types, config, &mut stats);
                }
            });
        }
    });
    docs.len() as f64 / start.elapsed().as_secs_f64()
}

// ---------------------------------------------------------------------------
// Synthetic corpus with a known planting schedule
// ---------------------------------------------------------------------------

/// Recipe for a corpus whose scores are known in advance: document `i` of
/// each class contains exactly `plants[i]` distinct whitelist types and no
/// other whitelist overlap (needle and hay vocabularies are disjoint by
/// construction).
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub needle_plants: Vec<usize>,
    pub hay_plants: Vec<usize>,
    /// Size of the synthetic target wordlist.
    pub whitelist_size: usize,
    /// Hay filler tokens per document (controls document length).
    pub filler_tokens: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The schedule used by the self-contained acceptance benchmark:
    /// `needles` documents cycling 1..=15 planted types (mean 8), and
    /// `hay` documents planted so that roughly 80% carry none and none
    /// carries 5 or more (mean well under 1).
    pub fn standard(needles: usize, hay: usize, seed: u64) -> SyntheticSpec {
        let needle_plants = (0..needles).map(|i| (i % 15) + 1).collect();
        let hay_plants = (0..hay)
            .map(|i| match i % 1000 {
                0..=799 => 0,
                800..=919 => 1,
                920..=969 => 2,
                970..=993 => 3,
                _ => 4,
            })
            .collect();
        SyntheticSpec {
            needle_plants,
            hay_plants,
            whitelist_size: 2000,
            filler_tokens: 30,
            seed,
        }
    }
}

/// A generated corpus plus everything needed to verify results exactly.
#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub corpus: BenchmarkCorpus,
    pub whitelist: Lexicon,
    /// Planted type count per document id.
    pub plants_by_id: BTreeMap<u64, usize>,
}

impl SyntheticBenchmark {
    /// Closed-form expected counts at a threshold, straight from the plan.
    pub fn expected(&self, threshold: usize) -> (usize, usize) {
        let mut tp = 0;
        let mut fp = 0;
        for (doc, gold) in &self.corpus.documents {
            if self.plants_by_id[&doc.id] >= threshold {
                match gold {
                    GoldLabel::Needle => tp += 1,
                    GoldLabel::Hay => fp += 1,
                }
            }
        }
        (tp, fp)
    }
}

fn whitelist_word(i: usize) -> String {
    format!("tgt{i:05}")
}

fn synth_document(
    plants: usize,
    whitelist_size: usize,
    filler_tokens: usize,
    rng: &mut SplitMix64,
) -> String {
    let mut chosen: FxHashSet<usize> = FxHashSet::default();
    while chosen.len() < plants {
        chosen.insert(rng.below(whitelist_size as u64) as usize);
    }
    let mut tokens: Vec<String> = chosen.into_iter().map(whitelist_word).collect();
    for _ in 0..filler_tokens {
        tokens.push(format!("hay{:05}", rng.below(5000)));
    }
    shuffle(&mut tokens, rng);
    // Break into lines so line-level stages have something to chew on.
    let mut text = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        text.push_str(tok);
        text.push(if i % 12 == 11 { '\n' } else { ' ' });
    }
    text
}

/// Generate the corpus for a spec. Deterministic for a given seed.
pub fn synthetic_benchmark(spec: &SyntheticSpec) -> SyntheticBenchmark {
    let mut rng = SplitMix64::new(spec.seed);
    let whitelist = Lexicon::from_types(
        "syn",
        LexiconKind::Whitelist,
        (0..spec.whitelist_size).map(whitelist_word),
        1,
    )
    .expect("synthetic whitelist is never empty");

    let mut documents: Vec<(Document, GoldLabel)> = Vec::new();
    let mut plants: Vec<usize> = Vec::new();
    for (&count, gold) in spec
        .needle_plants
        .iter()
        .map(|c| (c, GoldLabel::Needle))
        .chain(spec.hay_plants.iter().map(|c| (c, GoldLabel::Hay)))
    {
        let text = synth_document(count, spec.whitelist_size, spec.filler_tokens, &mut rng);
        documents.push((
            Document {
                id: 0, // assigned after the shuffle
                uri: String::new(),
                crawler_lang: Vec::new(),
                byte_len: text.len(),
                text,
            },
            gold,
        ));
        plants.push(count);
    }

    let mut order: Vec<usize> = (0..documents.len()).collect();
    shuffle(&mut order, &mut rng);
    let mut shuffled = Vec::with_capacity(documents.len());
    let mut plants_by_id = BTreeMap::new();
    let mut docs_by_slot: Vec<Option<(Document, GoldLabel)>> =
        documents.into_iter().map(Some).collect();
    for (pos, &slot) in order.iter().enumerate() {
        let (mut doc, gold) = docs_by_slot[slot].take().expect("each slot used once");
        doc.id = pos as u64;
        doc.uri = format!("https://synthetic.example/{pos}");
        plants_by_id.insert(doc.id, plants[slot]);
        shuffled.push((doc, gold));
    }

    SyntheticBenchmark {
        corpus: BenchmarkCorpus {
            needle_count: spec.needle_plants.len(),
            hay_count: spec.hay_plants.len(),
            documents: shuffled,
            skip_word: None,
        },
        whitelist,
        plants_by_id,
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Corpus record on disk: `{"gold":"needle","text":"…"}`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
struct CorpusRecord {
    gold: GoldLabel,
    text: String,
}

pub fn write_corpus(corpus: &BenchmarkCorpus, path: &Path) -> Result<(), BenchError> {
    let io_err = |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for (doc, gold) in &corpus.documents {
        let record = CorpusRecord {
            gold: *gold,
            text: doc.text.clone(),
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| BenchError::Json {
            path: path.to_path_buf(),
            line: 0,
            detail: e.to_string(),
        })?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<BenchmarkCorpus, BenchError> {
    let io_err = |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut documents = Vec::new();
    let mut needle_count = 0;
    let mut hay_count = 0;
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(&line).map_err(|e| BenchError::Json {
            path: path.to_path_buf(),
            line: line_no as u64 + 1,
            detail: e.to_string(),
        })?;
        match record.gold {
            GoldLabel::Needle => needle_count += 1,
            GoldLabel::Hay => hay_count += 1,
        }
        documents.push((
            Document {
                id: documents.len() as u64,
                uri: String::new(),
                crawler_lang: Vec::new(),
                byte_len: record.text.len(),
                text: record.text,
            },
            record.gold,
        ));
    }
    Ok(BenchmarkCorpus {
        documents,
        needle_count,
        hay_count,
        skip_word: None,
    })
}

/// Load a document source from JSONL: any objects carrying a string `text`
/// field (extra fields are ignored; `uri`/`url` is kept when present).
pub fn load_jsonl_source(path: &Path) -> Result<Vec<Document>, BenchError> {
    #[derive(serde::Deserialize)]
    struct SourceRecord {
        text: String,
        #[serde(default, alias = "url")]
        uri: Option<String>,
    }
    let io_err = |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut docs = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SourceRecord = serde_json::from_str(&line).map_err(|e| BenchError::Json {
            path: path.to_path_buf(),
            line: line_no as u64 + 1,
            detail: e.to_string(),
        })?;
        docs.push(Document {
            id: docs.len() as u64,
            uri: record.uri.unwrap_or_default(),
            crawler_lang: Vec::new(),
            byte_len: record.text.len(),
            text: record.text,
        });
    }
    Ok(docs)
}

/// Results as CSV with one row per threshold.
pub fn write_results_csv(results: &[BenchResult], path: &Path) -> Result<(), BenchError> {
    let io_err = |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    writeln!(
        out,
        "threshold,true_positives,false_positives,recall_pct,fpr_pct,wall_time_secs"
    )
    .map_err(io_err)?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.6}",
            r.threshold,
            r.true_positives,
            r.false_positives,
            r.recall_pct,
            r.fpr_pct,
            r.wall_time_secs
        )
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(())
}
