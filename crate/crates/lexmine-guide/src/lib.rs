//! The mdbook guide, smushed into one crate so `cargo test --doc` runs
//! every code block in the book. mdbook itself cannot execute snippets
//! against the workspace; including each chapter as a doc comment gives
//! rustdoc-test semantics with zero duplication. One module per chapter so
//! a failing snippet names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/concepts.md")]
pub mod concepts {}

#[doc = include_str!("../../../book/src/lexicons.md")]
pub mod lexicons {}

#[doc = include_str!("../../../book/src/scoring.md")]
pub mod scoring {}

#[doc = include_str!("../../../book/src/document-filtering.md")]
pub mod document_filtering {}

#[doc = include_str!("../../../book/src/vocabulary-indices.md")]
pub mod vocabulary_indices {}

#[doc = include_str!("../../../book/src/line-ranking.md")]
pub mod line_ranking {}

#[doc = include_str!("../../../book/src/second-pass.md")]
pub mod second_pass {}

#[doc = include_str!("../../../book/src/benchmarking.md")]
pub mod benchmarking {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/scaling.md")]
pub mod scaling {}
