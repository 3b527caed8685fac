//! End-to-end orchestration: sharded first pass, ranked corpus emission,
//! vocabulary indexing, and the second-pass job.
//!
//! Sharding is by input file, which matches how WET archives are
//! distributed and avoids mid-record splits. Workers share nothing mutable:
//! each owns its input files, its counters, and its output run files. The
//! merger runs after all workers complete and performs a k-way merge of the
//! sorted shard runs, so the final ranking never needs a global re-sort and
//! is byte-identical for any shard count.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rustc_hash::FxHashMap;

use crate::filter::{
    evaluate, CacheScope, DocRecord, FilterConfig, FilterStats, ScoredDocument, Verdict,
};
use crate::index::{IndexError, IndexWriter};
use crate::lines::{rank_lines, sort_ranked, LineRecord, RankedLine, DEFAULT_MIN_LINE_LEN};
use crate::score::tokenize;
use crate::second_pass::{apply_stages, load_candidates, SecondPassConfig, SecondPassError};
use crate::wet::{IngestStats, WetReader};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] crate::filter::ConfigError),
    #[error("no input files found")]
    NoInput,
    #[error("missing input: {path}")]
    MissingInput { path: PathBuf },
    #[error("shard {shard} failed: {message}")]
    ShardFailed { shard: usize, message: String },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    SecondPass(#[from] SecondPassError),
    #[error("loading threshold {loading} is below the first-pass threshold {threshold}")]
    LoadingThresholdTooLow { loading: usize, threshold: usize },
    #[error("corrupt intermediate run {path} line {line}")]
    CorruptRun { path: PathBuf, line: u64 },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything a first-pass run needs.
#[derive(Debug, Clone)]
pub struct JobConfig {
    /// WET files, or directories whose files are taken (non-recursive).
    pub input_paths: Vec<PathBuf>,
    pub shard_count: usize,
    pub output_dir: PathBuf,
    pub filter: FilterConfig,
    /// Also emit the ranked line corpus per language.
    pub emit_lines: bool,
    pub min_line_len: usize,
    /// Write per-shard vocabulary indices here. `None` disables indexing.
    pub index_dir: Option<PathBuf>,
    /// Documents between progress reports on stderr; 0 silences them.
    /// Reporting is pure observation and never changes results.
    pub stats_interval: u64,
}

impl JobConfig {
    pub fn new(input_paths: Vec<PathBuf>, output_dir: PathBuf, filter: FilterConfig) -> Self {
        JobConfig {
            input_paths,
            shard_count: 1,
            output_dir,
            filter,
            emit_lines: false,
            min_line_len: DEFAULT_MIN_LINE_LEN,
            index_dir: None,
            stats_interval: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.input_paths.is_empty() {
            return Err(PipelineError::NoInput);
        }
        if self.shard_count == 0 {
            return Err(PipelineError::ShardFailed {
                shard: 0,
                message: "shard count must be at least 1".into(),
            });
        }
        self.filter.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RejectionBreakdown {
    pub below_threshold: u64,
    pub blacklist: u64,
}

/// The run manifest. Conservation invariant:
/// `documents_scanned = kept_total + below_threshold + blacklist + parse_skipped`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunReport {
    /// WET records seen, including records the parser had to skip.
    pub documents_scanned: u64,
    pub documents_kept: BTreeMap<String, u64>,
    /// Documents kept for at least one language (each counted once).
    pub documents_kept_total: u64,
    pub bytes_scanned: u64,
    pub wall_time_secs: f64,
    /// `documents_scanned / (workers × wall_time)`.
    pub docs_per_core_second: f64,
    pub rejection_breakdown: RejectionBreakdown,
    pub parse_skipped: u64,
    pub decode_replacements: u64,
    pub shard_count: usize,
    pub files_processed: usize,
    pub files_skipped_unreadable: usize,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct Manifest {
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    config: ManifestConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<RunReport>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ManifestConfig {
    threshold: usize,
    tolerance: usize,
    targets: Vec<String>,
    blacklists: usize,
    punct_normalize: bool,
    min_token_len: usize,
    shard_count: usize,
    emit_lines: bool,
    min_line_len: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    index_dir: Option<PathBuf>,
}

fn manifest_config(config: &JobConfig, workers: usize) -> ManifestConfig {
    ManifestConfig {
        threshold: config.filter.threshold,
        tolerance: config.filter.tolerance,
        targets: config
            .filter
            .targets
            .iter()
            .map(|t| t.language_code().to_string())
            .collect(),
        blacklists: config.filter.blacklists.len(),
        punct_normalize: config.filter.score.punct_normalize,
        min_token_len: config.filter.score.min_token_len,
        shard_count: workers,
        emit_lines: config.emit_lines,
        min_line_len: config.min_line_len,
        index_dir: config.index_dir.clone(),
    }
}

fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, json).map_err(io_err(path))
}

/// Where shard run files go before the merge. `LEXMINE_TMPDIR` overrides
/// the default location inside the output directory; this is the only
/// environment variable the pipeline reads.
fn shard_tmp_dir(output_dir: &Path) -> PathBuf {
    static RUN: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    match std::env::var_os("LEXMINE_TMPDIR") {
        Some(root) => PathBuf::from(root).join(format!(
            "lexmine-shards-{}-{}",
            std::process::id(),
            RUN.fetch_add(1, std::sync::atomic::Ordering::Relaxed)
        )),
        None => output_dir.join("tmp-shards"),
    }
}

/// Collect the actual input files: explicit paths stay as given, directory
/// entries are expanded one level deep. The list is sorted so file ordinals
/// (and therefore document ids) are independent of shard layout.
fn expand_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let entries = fs::read_dir(path).map_err(io_err(path))?;
            for entry in entries {
                let entry = entry.map_err(io_err(path))?;
                let p = entry.path();
                let hidden = p
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with('.'));
                if p.is_file() && !hidden {
                    files.push(p);
                }
            }
        } else {
            files.push(path.clone());
        }
    }
    files.sort();
    files.dedup();
    if files.is_empty() {
        return Err(PipelineError::NoInput);
    }
    Ok(files)
}

struct ShardOutcome {
    ingest: IngestStats,
    filter: FilterStats,
    files_processed: usize,
    files_unreadable: usize,
    kept_by_lang: BTreeMap<String, u64>,
}

fn doc_run_path(tmp: &Path, shard: usize, lang: &str) -> PathBuf {
    tmp.join(format!("shard{shard:04}.{lang}.docs.jsonl"))
}

fn line_run_path(tmp: &Path, shard: usize, lang: &str) -> PathBuf {
    tmp.join(format!("shard{shard:04}.{lang}.lines.jsonl"))
}

fn run_shard(
    shard_id: usize,
    files: &[(usize, PathBuf)],
    config: &JobConfig,
    tmp_dir: &Path,
) -> Result<ShardOutcome, PipelineError> {
    let mut ingest = IngestStats::default();
    let mut filter_stats = FilterStats::default();
    let mut files_processed = 0;
    let mut files_unreadable = 0;
    let mut kept: Vec<ScoredDocument> = Vec::new();

    let mut index_writer = match &config.index_dir {
        Some(dir) => {
            let label = format!("shard{shard_id:04}");
            Some(IndexWriter::create(
                &dir.join(format!("{label}.vocab")),
                &label,
            )?)
        }
        None => None,
    };

    for (file_ordinal, path) in files {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) => {
                // Crawl data is dirty; one bad file must not kill the job.
                eprintln!("warning: skipping unreadable {}: {e}", path.display());
                files_unreadable += 1;
                continue;
            }
        };
        let id_base = (*file_ordinal as u64) << 32;
        let mut reader = WetReader::with_id_base(BufReader::with_capacity(1 << 20, file), id_base);
        for result in reader.by_ref() {
            let doc = result.map_err(|e| PipelineError::ShardFailed {
                shard: shard_id,
                message: format!("read error in {}: {e}", path.display()),
            })?;
            let types = tokenize(&doc.text, &config.filter.score);
            let evaluation = evaluate(&types, &config.filter, &mut filter_stats);
            let is_kept = evaluation.verdict == Verdict::Kept;
            if let Some(writer) = &mut index_writer {
                if is_kept || config.filter.cache_scope == CacheScope::All {
                    writer.write_record(&doc, &types)?;
                }
            }
            if is_kept {
                kept.push(ScoredDocument {
                    document: doc,
                    wsc: evaluation.wsc,
                    bsc: evaluation.bsc.unwrap_or(0),
                });
            }
            if config.stats_interval > 0 && filter_stats.scanned % config.stats_interval == 0 {
                eprintln!(
                    "shard {shard_id}: {} documents scanned, {} kept",
                    filter_stats.scanned, filter_stats.kept
                );
            }
        }
        let file_stats = reader.into_stats();
        ingest.merge(&file_stats);
        files_processed += 1;
    }

    if let Some(writer) = index_writer {
        writer.finish()?;
    }

    // One sorted run per language.
    let mut kept_by_lang = BTreeMap::new();
    for target in &config.filter.targets {
        let lang = target.language_code();
        let mut selected: Vec<&ScoredDocument> = kept
            .iter()
            .filter(|s| s.passes_for(lang, config.filter.threshold))
            .collect();
        selected.sort_by(|a, b| {
            b.wsc_for(lang)
                .cmp(&a.wsc_for(lang))
                .then_with(|| a.document.id.cmp(&b.document.id))
        });
        kept_by_lang.insert(lang.to_string(), selected.len() as u64);

        let run_path = doc_run_path(tmp_dir, shard_id, lang);
        let mut out = BufWriter::new(File::create(&run_path).map_err(io_err(&run_path))?);
        for scored in &selected {
            let record = DocRecord::from_scored(scored, lang);
            serde_json::to_writer(&mut out, &record).map_err(|e| PipelineError::ShardFailed {
                shard: shard_id,
                message: format!("serialize failure: {e}"),
            })?;
            out.write_all(b"\n").map_err(io_err(&run_path))?;
        }
        out.flush().map_err(io_err(&run_path))?;

        if config.emit_lines {
            let mut lines: Vec<RankedLine> = Vec::new();
            for scored in &selected {
                lines.extend(rank_lines(
                    scored,
                    target,
                    config.min_line_len,
                    &config.filter.score,
                ));
            }
            sort_ranked(&mut lines);
            let run_path = line_run_path(tmp_dir, shard_id, lang);
            let mut out = BufWriter::new(File::create(&run_path).map_err(io_err(&run_path))?);
            for line in &lines {
                let record = LineRecord {
                    doc_id: line.doc_id,
                    line_no: line.line_no,
                    norm_score: line.norm_score,
                    matches: line.matches,
                    dup_count: 1,
                    text: line.text.clone(),
                };
                serde_json::to_writer(&mut out, &record).map_err(|e| {
                    PipelineError::ShardFailed {
                        shard: shard_id,
                        message: format!("serialize failure: {e}"),
                    }
                })?;
                out.write_all(b"\n").map_err(io_err(&run_path))?;
            }
            out.flush().map_err(io_err(&run_path))?;
        }
    }

    Ok(ShardOutcome {
        ingest,
        filter: filter_stats,
        files_processed,
        files_unreadable,
        kept_by_lang,
    })
}

struct RunCursor {
    lines: std::io::Lines<BufReader<File>>,
    path: PathBuf,
    line_no: u64,
}

impl RunCursor {
    fn open(path: PathBuf) -> Result<Self, PipelineError> {
        let file = File::open(&path).map_err(io_err(&path))?;
        Ok(RunCursor {
            lines: BufReader::new(file).lines(),
            path,
            line_no: 0,
        })
    }

    fn next<T: serde::de::DeserializeOwned>(&mut self) -> Result<Option<T>, PipelineError> {
        match self.lines.next() {
            None => Ok(None),
            Some(Err(source)) => Err(PipelineError::Io {
                path: self.path.clone(),
                source,
            }),
            Some(Ok(line)) => {
                self.line_no += 1;
                serde_json::from_str(&line)
                    .map(Some)
                    .map_err(|_| PipelineError::CorruptRun {
                        path: self.path.clone(),
                        line: self.line_no,
                    })
            }
        }
    }
}

struct HeapDoc {
    record: DocRecord,
    cursor: usize,
}

impl PartialEq for HeapDoc {
    fn eq(&self, other: &Self) -> bool {
        self.record.wsc == other.record.wsc && self.record.id == other.record.id
    }
}
impl Eq for HeapDoc {}
impl PartialOrd for HeapDoc {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapDoc {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap: highest wsc first, then lowest id.
        (self.record.wsc, Reverse(self.record.id))
            .cmp(&(other.record.wsc, Reverse(other.record.id)))
    }
}

fn merge_doc_runs(
    tmp_dir: &Path,
    shards: usize,
    lang: &str,
    out_path: &Path,
) -> Result<u64, PipelineError> {
    let mut cursors = Vec::new();
    for shard in 0..shards {
        cursors.push(RunCursor::open(doc_run_path(tmp_dir, shard, lang))?);
    }
    let mut heap = BinaryHeap::new();
    for (i, cursor) in cursors.iter_mut().enumerate() {
        if let Some(record) = cursor.next::<DocRecord>()? {
            heap.push(HeapDoc { record, cursor: i });
        }
    }
    let mut out = BufWriter::new(File::create(out_path).map_err(io_err(out_path))?);
    let mut written = 0;
    while let Some(HeapDoc { record, cursor }) = heap.pop() {
        serde_json::to_writer(&mut out, &record).map_err(|e| PipelineError::Io {
            path: out_path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
        out.write_all(b"\n").map_err(io_err(out_path))?;
        written += 1;
        if let Some(next) = cursors[cursor].next::<DocRecord>()? {
            heap.push(HeapDoc {
                record: next,
                cursor,
            });
        }
    }
    out.flush().map_err(io_err(out_path))?;
    Ok(written)
}

struct HeapLine {
    record: LineRecord,
    cursor: usize,
}

impl PartialEq for HeapLine {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for HeapLine {}
impl PartialOrd for HeapLine {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapLine {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap: highest score first, then lowest (doc_id, line_no).
        self.record
            .norm_score
            .partial_cmp(&other.record.norm_score)
            .expect("scores are finite")
            .then_with(|| {
                Reverse((self.record.doc_id, self.record.line_no))
                    .cmp(&Reverse((other.record.doc_id, other.record.line_no)))
            })
    }
}

/// Streaming duplicate collapse over an already merged (descending) line
/// sequence: buffers one equal-score run at a time.
struct RunCollapser<W: Write> {
    out: W,
    current_score: Option<f64>,
    run: Vec<LineRecord>,
    index: FxHashMap<String, usize>,
    written: u64,
}

impl<W: Write> RunCollapser<W> {
    fn new(out: W) -> Self {
        RunCollapser {
            out,
            current_score: None,
            run: Vec::new(),
            index: FxHashMap::default(),
            written: 0,
        }
    }

    fn push(&mut self, record: LineRecord, path: &Path) -> Result<(), PipelineError> {
        if self.current_score != Some(record.norm_score) {
            self.flush(path)?;
            self.current_score = Some(record.norm_score);
        }
        let key = record.text.trim().to_lowercase();
        match self.index.entry(key) {
            std::collections::hash_map::Entry::Occupied(slot) => {
                self.run[*slot.get()].dup_count += record.dup_count;
            }
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert(self.run.len());
                self.run.push(record);
            }
        }
        Ok(())
    }

    fn flush(&mut self, path: &Path) -> Result<(), PipelineError> {
        for record in self.run.drain(..) {
            serde_json::to_writer(&mut self.out, &record).map_err(|e| PipelineError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e),
            })?;
            self.out.write_all(b"\n").map_err(io_err(path))?;
            self.written += 1;
        }
        self.index.clear();
        Ok(())
    }
}

fn merge_line_runs(
    tmp_dir: &Path,
    shards: usize,
    lang: &str,
    out_path: &Path,
) -> Result<u64, PipelineError> {
    let mut cursors = Vec::new();
    for shard in 0..shards {
        cursors.push(RunCursor::open(line_run_path(tmp_dir, shard, lang))?);
    }
    let mut heap = BinaryHeap::new();
    for (i, cursor) in cursors.iter_mut().enumerate() {
        if let Some(record) = cursor.next::<LineRecord>()? {
            heap.push(HeapLine { record, cursor: i });
        }
    }
    let out = BufWriter::new(File::create(out_path).map_err(io_err(out_path))?);
    let mut collapser = RunCollapser::new(out);
    while let Some(HeapLine { record, cursor }) = heap.pop() {
        collapser.push(record, out_path)?;
        if let Some(next) = cursors[cursor].next::<LineRecord>()? {
            heap.push(HeapLine {
                record: next,
                cursor,
            });
        }
    }
    collapser.flush(out_path)?;
    collapser.out.flush().map_err(io_err(out_path))?;
    Ok(collapser.written)
}

/// Path of the ranked per-language document corpus inside an output dir.
pub fn docs_output_path(out_dir: &Path, lang: &str) -> PathBuf {
    out_dir.join(format!("docs.{lang}.jsonl"))
}

/// Path of the ranked per-language line corpus inside an output dir.
pub fn lines_output_path(out_dir: &Path, lang: &str) -> PathBuf {
    out_dir.join(format!("lines.{lang}.jsonl"))
}

/// Run the sharded first pass: WET → filter → per-shard sorted runs →
/// k-way merge into globally ranked per-language corpora, plus a manifest.
///
/// A hard failure in any shard aborts the job; the manifest is then written
/// with `status: "aborted"` so partial outputs are clearly marked. An
/// unreadable input file is skipped with a warning instead.
pub fn run_first_pass(config: &JobConfig) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let start = Instant::now();

    let files = expand_inputs(&config.input_paths)?;
    fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    if let Some(dir) = &config.index_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp_dir = shard_tmp_dir(&config.output_dir);
    fs::create_dir_all(&tmp_dir).map_err(io_err(&tmp_dir))?;

    let workers = config.shard_count.min(files.len()).max(1);
    let mut assignments: Vec<Vec<(usize, PathBuf)>> = vec![Vec::new(); workers];
    for (ordinal, path) in files.iter().enumerate() {
        assignments[ordinal % workers].push((ordinal, path.clone()));
    }

    let manifest_path = config.output_dir.join("manifest.json");
    let outcomes: Vec<Result<ShardOutcome, PipelineError>> = std::thread::scope(|scope| {
        let tmp_dir = tmp_dir.as_path();
        let handles: Vec<_> = assignments
            .iter()
            .enumerate()
            .map(|(shard_id, shard_files)| {
                scope.spawn(move || run_shard(shard_id, shard_files, config, tmp_dir))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("shard worker panicked"))
            .collect()
    });

    let mut ingest = IngestStats::default();
    let mut filter_stats = FilterStats::default();
    let mut kept_by_lang: BTreeMap<String, u64> = BTreeMap::new();
    let mut files_processed = 0;
    let mut files_unreadable = 0;
    for outcome in outcomes {
        match outcome {
            Ok(shard) => {
                ingest.merge(&shard.ingest);
                filter_stats.merge(&shard.filter);
                files_processed += shard.files_processed;
                files_unreadable += shard.files_unreadable;
                for (lang, n) in shard.kept_by_lang {
                    *kept_by_lang.entry(lang).or_default() += n;
                }
            }
            Err(e) => {
                let manifest = Manifest {
                    status: "aborted".into(),
                    error: Some(e.to_string()),
                    config: manifest_config(config, workers),
                    report: None,
                };
                write_manifest(&manifest_path, &manifest)?;
                return Err(e);
            }
        }
    }

    for target in &config.filter.targets {
        let lang = target.language_code();
        merge_doc_runs(
            &tmp_dir,
            workers,
            lang,
            &docs_output_path(&config.output_dir, lang),
        )?;
        if config.emit_lines {
            merge_line_runs(
                &tmp_dir,
                workers,
                lang,
                &lines_output_path(&config.output_dir, lang),
            )?;
        }
    }
    fs::remove_dir_all(&tmp_dir).map_err(io_err(&tmp_dir))?;

    let wall_time_secs = start.elapsed().as_secs_f64();
    let report = RunReport {
        documents_scanned: ingest.records_read,
        documents_kept: kept_by_lang,
        documents_kept_total: filter_stats.kept,
        bytes_scanned: ingest.bytes_read,
        wall_time_secs,
        docs_per_core_second: ingest.records_read as f64 / (workers as f64 * wall_time_secs),
        rejection_breakdown: RejectionBreakdown {
            below_threshold: filter_stats.rejected_below_threshold,
            blacklist: filter_stats.rejected_blacklist,
        },
        parse_skipped: ingest.records_skipped,
        decode_replacements: ingest.decode_replacements,
        shard_count: workers,
        files_processed,
        files_skipped_unreadable: files_unreadable,
    };
    let manifest = Manifest {
        status: "complete".into(),
        error: None,
        config: manifest_config(config, workers),
        report: Some(report.clone()),
    };
    write_manifest(&manifest_path, &manifest)?;
    Ok(report)
}

/// What the second pass did, serialized into its manifest.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SecondPassReport {
    pub input: PathBuf,
    pub loaded: u64,
    pub skipped_below_loading_threshold: u64,
    pub survivors: u64,
    pub dropped: BTreeMap<String, u64>,
}

/// Read the first-pass threshold from a manifest next to the input, when
/// one exists, to enforce the loading-threshold invariant.
fn first_pass_threshold(dir: &Path) -> Option<usize> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(manifest_path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value
        .get("config")?
        .get("threshold")?
        .as_u64()
        .map(|v| v as usize)
}

/// Apply the second-pass stages to a first-pass corpus. `input` may be a
/// first-pass output directory (its `docs.<target>.jsonl` is used), a JSONL
/// corpus file, or a vocabulary index. Writes the refined corpus, the
/// drop-reason audit log, and a manifest into `out_dir`.
pub fn run_second_pass(
    input: &Path,
    config: &SecondPassConfig,
    out_dir: &Path,
) -> Result<SecondPassReport, PipelineError> {
    let input_path = if input.is_dir() {
        docs_output_path(input, &config.target)
    } else {
        input.to_path_buf()
    };
    if !input_path.exists() {
        return Err(PipelineError::MissingInput { path: input_path });
    }
    if let Some(threshold) = input_path.parent().and_then(first_pass_threshold) {
        if config.loading_threshold < threshold {
            return Err(PipelineError::LoadingThresholdTooLow {
                loading: config.loading_threshold,
                threshold,
            });
        }
    }

    let (candidates, load_stats) = load_candidates(&input_path, config)?;
    let (survivors, audit) = apply_stages(candidates, config);

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let corpus_path = docs_output_path(out_dir, &config.target);
    let mut out = BufWriter::new(File::create(&corpus_path).map_err(io_err(&corpus_path))?);
    for candidate in &survivors {
        serde_json::to_writer(&mut out, &candidate.record).map_err(|e| PipelineError::Io {
            path: corpus_path.clone(),
            source: std::io::Error::other(e),
        })?;
        out.write_all(b"\n").map_err(io_err(&corpus_path))?;
    }
    out.flush().map_err(io_err(&corpus_path))?;

    let audit_path = out_dir.join("audit.jsonl");
    let mut audit_out = BufWriter::new(File::create(&audit_path).map_err(io_err(&audit_path))?);
    let mut dropped: BTreeMap<String, u64> = BTreeMap::new();
    for entry in &audit {
        *dropped.entry(entry.reason.clone()).or_default() += 1;
        serde_json::to_writer(&mut audit_out, entry).map_err(|e| PipelineError::Io {
            path: audit_path.clone(),
            source: std::io::Error::other(e),
        })?;
        audit_out.write_all(b"\n").map_err(io_err(&audit_path))?;
    }
    audit_out.flush().map_err(io_err(&audit_path))?;

    let report = SecondPassReport {
        input: input_path,
        loaded: load_stats.loaded,
        skipped_below_loading_threshold: load_stats.skipped_below_loading_threshold,
        survivors: survivors.len() as u64,
        dropped,
    };
    let manifest_path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&manifest_path, json).map_err(io_err(&manifest_path))?;
    Ok(report)
}
