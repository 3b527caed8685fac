//! Lexicon-driven mining of web-crawl archives for low-resource languages.
//!
//! Most of a web crawl is of no interest when the target is a small
//! language: the job is data triage, not classification. This crate treats
//! the problem as a search: lexicons are the queries, crawl archives are the
//! haystack, and the output is a ranked candidate corpus per language.
//!
//! The pipeline runs in stages ordered by cost per rejected document:
//!
//! 1. [`wet`] streams WARC/WET archives into [`wet::Document`]s.
//! 2. [`mod@score`] reduces a document to its set of distinct token types.
//! 3. [`filter`] gates documents on a whitelist score threshold, then (only
//!    for survivors) a blacklist tolerance, and ranks the kept set.
//! 4. [`lines`] ranks individual lines inside kept documents by
//!    length-normalized type matches.
//! 5. [`second_pass`] refines a ranked corpus with crawler-language,
//!    related-language, and URL filters.
//!
//! [`index`] persists per-document vocabularies so any of this can be
//! replayed without re-reading the crawl; [`mod@bench`] builds mixed
//! needle/hay corpora and measures recall, false-positive rate, and speed;
//! [`pipeline`] orchestrates sharded runs end to end.

pub mod bench;
pub mod filter;
pub mod index;
pub mod lexicon;
pub mod lines;
pub mod pipeline;
pub mod score;
pub mod second_pass;
pub mod wet;

pub use filter::{filter_document, rank, FilterConfig, FilterStats, ScoredDocument};
pub use lexicon::{Lexicon, LexiconKind};
pub use score::{score, tokenize, ScoreConfig, TypeSet};
pub use wet::{read_wet_stream, Document, IngestStats, WetReader};
