use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lexmine::bench::{
    build_benchmark, load_jsonl_source, run_benchmark, synthetic_benchmark, write_corpus,
    write_results_csv, BenchResult, SyntheticSpec,
};
use lexmine::filter::{CacheScope, FilterConfig, DEFAULT_MIN_TYPE_LEN};
use lexmine::lexicon::{Lexicon, LexiconKind};
use lexmine::pipeline::{run_first_pass, run_second_pass, JobConfig};
use lexmine::second_pass::SecondPassConfigFile;

#[derive(Parser)]
#[command(
    name = "mine",
    version,
    about = "Mine web-crawl archives for low-resource language corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sharded document-level filtering over WET archives.
    FirstPass(FirstPassArgs),
    /// Refine a first-pass corpus with crawler-language, related-language
    /// and URL filters.
    SecondPass(SecondPassArgs),
    /// Build a needle/hay benchmark and sweep score thresholds.
    Bench(BenchArgs),
}

/// `lang=path` pairs on the command line.
#[derive(Clone, Debug)]
struct WordlistArg {
    lang: String,
    path: PathBuf,
}

fn parse_wordlist(raw: &str) -> Result<WordlistArg, String> {
    match raw.split_once('=') {
        Some((lang, path)) if !lang.is_empty() && !path.is_empty() => Ok(WordlistArg {
            lang: lang.to_string(),
            path: PathBuf::from(path),
        }),
        _ => Err(format!("expected lang=path, got {raw:?}")),
    }
}

#[derive(Args)]
struct FirstPassArgs {
    /// WET files or directories of WET files.
    #[arg(long = "input", required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Target whitelist as lang=path; repeat for multiple languages.
    #[arg(long = "wordlist", value_parser = parse_wordlist, required = true)]
    wordlist: Vec<WordlistArg>,
    /// Blacklist wordlist file; repeatable.
    #[arg(long = "blacklist")]
    blacklist: Vec<PathBuf>,
    /// Minimum whitelist score to keep a document.
    #[arg(long, default_value_t = 5)]
    threshold: usize,
    /// Blacklist score at or above which a document is rejected.
    #[arg(long, default_value_t = 1)]
    tolerance: usize,
    /// Minimum type length when loading wordlists.
    #[arg(long = "min-type-len", default_value_t = DEFAULT_MIN_TYPE_LEN)]
    min_type_len: usize,
    /// Strip punctuation before tokenizing.
    #[arg(long = "normalize-punct")]
    normalize_punct: bool,
    /// Write per-shard vocabulary indices into this directory.
    #[arg(long = "index-out")]
    index_out: Option<PathBuf>,
    /// Index every document, not only whitelist-passing ones.
    #[arg(long = "index-all", requires = "index_out")]
    index_all: bool,
    /// Also emit the ranked line corpus per language.
    #[arg(long = "emit-lines")]
    emit_lines: bool,
    /// Minimum line length (scalar values) for the line corpus.
    #[arg(long = "min-line-len", default_value_t = lexmine::lines::DEFAULT_MIN_LINE_LEN)]
    min_line_len: usize,
    /// Worker count; input files are sharded round-robin.
    #[arg(long, default_value_t = 1)]
    shards: usize,
    /// Documents between progress reports (0 = quiet).
    #[arg(long = "stats-interval", default_value_t = 0)]
    stats_interval: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SecondPassArgs {
    /// First-pass output directory (or a docs JSONL / vocabulary index).
    #[arg(long = "in")]
    input: PathBuf,
    /// TOML config (see the book's second-pass chapter for the schema).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// JSONL of target-language documents ({"text": …} per line).
    #[arg(long, required_unless_present = "synthetic")]
    needles: Option<PathBuf>,
    /// JSONL of distractor documents.
    #[arg(long, required_unless_present = "synthetic")]
    hay: Option<PathBuf>,
    /// Target whitelist as lang=path.
    #[arg(long = "wordlist", value_parser = parse_wordlist, required_unless_present = "synthetic")]
    wordlist: Option<WordlistArg>,
    /// Generate a synthetic corpus with a known planting schedule instead
    /// of reading sources.
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value = "1,3,5,10,15", value_delimiter = ',')]
    thresholds: Vec<usize>,
    #[arg(long = "needle-count", default_value_t = 200)]
    needle_count: usize,
    #[arg(long = "hay-count", default_value_t = 9800)]
    hay_count: usize,
    /// Exclude hay documents containing this word.
    #[arg(long = "skip-word")]
    skip_word: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "min-type-len", default_value_t = DEFAULT_MIN_TYPE_LEN)]
    min_type_len: usize,
    /// Also write the sampled corpus as JSONL ({"gold","text"}).
    #[arg(long = "dump-corpus")]
    dump_corpus: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::FirstPass(args) => first_pass(args),
        Command::SecondPass(args) => second_pass(args),
        Command::Bench(args) => bench(args),
    }
}

fn load_whitelist(arg: &WordlistArg, min_type_len: usize) -> Result<Lexicon> {
    let (lexicon, report) =
        Lexicon::load(&arg.path, &arg.lang, LexiconKind::Whitelist, min_type_len)
            .with_context(|| format!("loading whitelist for {}", arg.lang))?;
    if report.rejected_short > 0 {
        eprintln!(
            "{}: {} types shorter than {} rejected",
            arg.lang, report.rejected_short, min_type_len
        );
    }
    Ok(lexicon)
}

fn first_pass(args: FirstPassArgs) -> Result<()> {
    let mut targets = Vec::new();
    for arg in &args.wordlist {
        targets.push(load_whitelist(arg, args.min_type_len)?);
    }
    let mut blacklists = Vec::new();
    for path in &args.blacklist {
        let label = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("blacklist");
        let (lexicon, _) = Lexicon::load(path, label, LexiconKind::Blacklist, args.min_type_len)
            .with_context(|| format!("loading blacklist {}", path.display()))?;
        blacklists.push(lexicon);
    }

    let mut filter = FilterConfig::new(targets);
    filter.threshold = args.threshold;
    filter.tolerance = args.tolerance;
    filter.blacklists = blacklists;
    filter.score.punct_normalize = args.normalize_punct;
    filter.cache_vocabularies = args.index_out.is_some();
    filter.cache_scope = if args.index_all {
        CacheScope::All
    } else {
        CacheScope::PassingOnly
    };

    let mut job = JobConfig::new(args.input, args.out.clone(), filter);
    job.shard_count = args.shards;
    job.emit_lines = args.emit_lines;
    job.min_line_len = args.min_line_len;
    job.index_dir = args.index_out;
    job.stats_interval = args.stats_interval;

    let report = run_first_pass(&job)?;
    println!("first pass complete");
    println!("  documents scanned  {}", report.documents_scanned);
    print!("  kept               {}", report.documents_kept_total);
    let per_lang: Vec<String> = report
        .documents_kept
        .iter()
        .map(|(lang, n)| format!("{lang}: {n}"))
        .collect();
    if per_lang.is_empty() {
        println!();
    } else {
        println!(" ({})", per_lang.join(", "));
    }
    println!(
        "  rejected           below-threshold {}, blacklist {}",
        report.rejection_breakdown.below_threshold, report.rejection_breakdown.blacklist
    );
    println!("  parse skipped      {}", report.parse_skipped);
    println!("  bytes scanned      {}", report.bytes_scanned);
    println!("  wall time          {:.2}s", report.wall_time_secs);
    println!(
        "  throughput         {:.0} docs/s/core over {} worker(s)",
        report.docs_per_core_second, report.shard_count
    );
    println!("  output             {}", args.out.display());
    Ok(())
}

fn second_pass(args: SecondPassArgs) -> Result<()> {
    let file = SecondPassConfigFile::read(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let base_dir = args
        .config
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let config = file.into_config(&base_dir)?;
    let report = run_second_pass(&args.input, &config, &args.out)?;
    println!("second pass complete");
    println!("  input              {}", report.input.display());
    println!(
        "  loaded             {} ({} below loading threshold)",
        report.loaded, report.skipped_below_loading_threshold
    );
    println!("  survivors          {}", report.survivors);
    for (reason, n) in &report.dropped {
        println!("  dropped            {n} ({reason})");
    }
    println!("  output             {}", args.out.display());
    Ok(())
}

fn print_results(results: &[BenchResult]) {
    println!(
        "{:>9}  {:>6}  {:>6}  {:>9}  {:>8}  {:>9}",
        "threshold", "TP", "FP", "recall %", "FPR %", "time (s)"
    );
    for r in results {
        println!(
            "{:>9}  {:>6}  {:>6}  {:>9.2}  {:>8.3}  {:>9.3}",
            r.threshold,
            r.true_positives,
            r.false_positives,
            r.recall_pct,
            r.fpr_pct,
            r.wall_time_secs
        );
    }
    let mean = results.iter().map(|r| r.wall_time_secs).sum::<f64>() / results.len().max(1) as f64;
    println!("mean wall time per run: {mean:.3}s");
}

fn bench(args: BenchArgs) -> Result<()> {
    if args.thresholds.is_empty() {
        bail!("at least one threshold is required");
    }
    let (corpus, config, target) = if args.synthetic {
        let spec = SyntheticSpec::standard(args.needle_count, args.hay_count, args.seed);
        let synth = synthetic_benchmark(&spec);
        let config = FilterConfig::new(vec![synth.whitelist.clone()]);
        (synth.corpus, config, "syn".to_string())
    } else {
        let wordlist = args.wordlist.as_ref().expect("enforced by clap");
        let whitelist = load_whitelist(wordlist, args.min_type_len)?;
        let needles = load_jsonl_source(args.needles.as_ref().expect("enforced by clap"))?;
        let hay = load_jsonl_source(args.hay.as_ref().expect("enforced by clap"))?;
        let corpus = build_benchmark(
            &needles,
            &hay,
            args.needle_count,
            args.hay_count,
            args.skip_word.as_deref(),
            args.seed,
        )?;
        let config = FilterConfig::new(vec![whitelist]);
        (corpus, config, wordlist.lang.clone())
    };

    if let Some(path) = &args.dump_corpus {
        write_corpus(&corpus, path)?;
    }
    let results = run_benchmark(&corpus, &config, &args.thresholds, &target);
    print_results(&results);
    write_results_csv(&results, &args.out)?;

    let manifest = serde_json::json!({
        "seed": args.seed,
        "needle_count": corpus.needle_count,
        "hay_count": corpus.hay_count,
        "skip_word": corpus.skip_word,
        "thresholds": args.thresholds,
        "tolerance": config.tolerance,
        "min_type_len": args.min_type_len,
        "synthetic": args.synthetic,
        "target": target,
        "mean_wall_time_secs": results.iter().map(|r| r.wall_time_secs).sum::<f64>()
            / results.len() as f64,
    });
    let manifest_path = args.out.with_extension("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    println!("results: {}", args.out.display());
    Ok(())
}
