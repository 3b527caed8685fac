//! Persisted vocabulary indices.
//!
//! Tokenization dominates first-pass cost, so the per-document type sets are
//! worth keeping: a saved index lets later searches (new languages, new
//! thresholds, new tolerances) replay scoring without touching the raw WET
//! data. The file is line-oriented and versioned, with a record-count footer
//! so a truncated write can never be mistaken for a complete index.
//!
//! Format, one line each, tab-separated:
//!
//! ```text
//! #lexmine-vocab v1 shard=<provenance>
//! <id>\t<uri>\t<lang,lang>\t<type>\t<type>...
//! #end <record count>
//! ```

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::filter::{evaluate, Evaluation, FilterConfig, FilterStats, ScoredDocument, Verdict};
use crate::score::TypeSet;
use crate::wet::Document;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("index io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path} is not a vocabulary index or has an unsupported version (header {header:?})")]
    VersionMismatch { path: PathBuf, header: String },
    #[error("{path} is truncated: {detail}")]
    Truncated { path: PathBuf, detail: String },
    #[error("{path} line {line}: malformed index record")]
    Malformed { path: PathBuf, line: u64 },
}

/// Streaming writer; call [`IndexWriter::finish`] to seal the file with the
/// footer. A file without a footer is treated as truncated by every reader.
pub struct IndexWriter<W: Write> {
    inner: W,
    path: PathBuf,
    records: u64,
}

impl IndexWriter<BufWriter<File>> {
    pub fn create(path: &Path, provenance: &str) -> Result<Self, IndexError> {
        let file = File::create(path).map_err(|source| IndexError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        IndexWriter::from_writer(BufWriter::new(file), path, provenance)
    }
}

impl<W: Write> IndexWriter<W> {
    pub fn from_writer(mut inner: W, path: &Path, provenance: &str) -> Result<Self, IndexError> {
        let io_err = |source| IndexError::Io {
            path: path.to_path_buf(),
            source,
        };
        writeln!(inner, "#lexmine-vocab v{FORMAT_VERSION} shard={provenance}").map_err(io_err)?;
        Ok(IndexWriter {
            inner,
            path: path.to_path_buf(),
            records: 0,
        })
    }

    pub fn write_record(&mut self, doc: &Document, types: &TypeSet) -> Result<(), IndexError> {
        let mut line = String::with_capacity(64 + types.len() * 8);
        line.push_str(&doc.id.to_string());
        line.push('\t');
        // Tabs cannot legally appear in a URI; keep the framing safe anyway.
        if doc.uri.contains('\t') {
            line.push_str(&doc.uri.replace('\t', " "));
        } else {
            line.push_str(&doc.uri);
        }
        line.push('\t');
        line.push_str(&doc.crawler_lang.join(","));
        for ty in types.sorted() {
            line.push('\t');
            line.push_str(ty);
        }
        line.push('\n');
        self.inner
            .write_all(line.as_bytes())
            .map_err(|source| IndexError::Io {
                path: self.path.clone(),
                source,
            })?;
        self.records += 1;
        Ok(())
    }

    /// Write the footer and flush. Returns the record count.
    pub fn finish(mut self) -> Result<u64, IndexError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| IndexError::Io { path, source }
        };
        writeln!(self.inner, "#end {}", self.records).map_err(io_err(&self.path))?;
        self.inner.flush().map_err(io_err(&self.path))?;
        Ok(self.records)
    }
}

/// Persist one index file for an iterator of tokenized documents.
pub fn write_index<'a, I>(docs: I, path: &Path, provenance: &str) -> Result<u64, IndexError>
where
    I: IntoIterator<Item = (&'a Document, &'a TypeSet)>,
{
    let mut writer = IndexWriter::create(path, provenance)?;
    for (doc, types) in docs {
        writer.write_record(doc, types)?;
    }
    writer.finish()
}

/// One replayable entry: everything scoring needs, no text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRecord {
    pub id: u64,
    pub uri: String,
    pub crawler_lang: Vec<String>,
    pub types: TypeSet,
}

/// Streaming reader. Validates the header eagerly and the footer on drain;
/// iterate to completion (or use [`read_index`]) to get the truncation check.
pub struct IndexReader<R: BufRead> {
    lines: io::Lines<R>,
    path: PathBuf,
    pub provenance: String,
    line_no: u64,
    records_seen: u64,
    footer_seen: bool,
}

impl IndexReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self, IndexError> {
        let file = File::open(path).map_err(|source| IndexError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        IndexReader::from_reader(BufReader::new(file), path)
    }
}

impl<R: BufRead> IndexReader<R> {
    pub fn from_reader(reader: R, path: &Path) -> Result<Self, IndexError> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(Ok(line)) => line,
            Some(Err(source)) => {
                return Err(IndexError::Io {
                    path: path.to_path_buf(),
                    source,
                })
            }
            None => String::new(),
        };
        let expected = format!("#lexmine-vocab v{FORMAT_VERSION} ");
        if !header.starts_with(&expected) {
            return Err(IndexError::VersionMismatch {
                path: path.to_path_buf(),
                header,
            });
        }
        let provenance = header
            .split_once("shard=")
            .map(|(_, p)| p.to_string())
            .unwrap_or_default();
        Ok(IndexReader {
            lines,
            path: path.to_path_buf(),
            provenance,
            line_no: 1,
            records_seen: 0,
            footer_seen: false,
        })
    }

    fn parse_record(&self, line: &str) -> Result<IndexRecord, IndexError> {
        let malformed = || IndexError::Malformed {
            path: self.path.clone(),
            line: self.line_no,
        };
        let mut fields = line.split('\t');
        let id = fields
            .next()
            .and_then(|f| f.parse::<u64>().ok())
            .ok_or_else(malformed)?;
        let uri = fields.next().ok_or_else(malformed)?.to_string();
        let langs = fields.next().ok_or_else(malformed)?;
        let crawler_lang = if langs.is_empty() {
            Vec::new()
        } else {
            langs.split(',').map(str::to_string).collect()
        };
        let types: TypeSet = fields.collect();
        Ok(IndexRecord {
            id,
            uri,
            crawler_lang,
            types,
        })
    }

    fn next_record(&mut self) -> Option<Result<IndexRecord, IndexError>> {
        loop {
            let line = match self.lines.next() {
                None => {
                    if !self.footer_seen {
                        return Some(Err(IndexError::Truncated {
                            path: self.path.clone(),
                            detail: "missing #end footer (partial write)".into(),
                        }));
                    }
                    return None;
                }
                Some(Err(source)) => {
                    return Some(Err(IndexError::Io {
                        path: self.path.clone(),
                        source,
                    }))
                }
                Some(Ok(line)) => line,
            };
            self.line_no += 1;
            if self.footer_seen {
                // Data after the footer means a mangled file.
                return Some(Err(IndexError::Truncated {
                    path: self.path.clone(),
                    detail: "records found after #end footer".into(),
                }));
            }
            if let Some(count) = line.strip_prefix("#end ") {
                self.footer_seen = true;
                match count.trim().parse::<u64>() {
                    Ok(n) if n == self.records_seen => continue,
                    _ => {
                        return Some(Err(IndexError::Truncated {
                            path: self.path.clone(),
                            detail: format!(
                                "footer count {count} does not match {} records",
                                self.records_seen
                            ),
                        }))
                    }
                }
            }
            self.records_seen += 1;
            return Some(self.parse_record(&line));
        }
    }
}

impl<R: BufRead> Iterator for IndexReader<R> {
    type Item = Result<IndexRecord, IndexError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record()
    }
}

/// Read a whole index into memory, enforcing header and footer.
pub fn read_index(path: &Path) -> Result<Vec<IndexRecord>, IndexError> {
    IndexReader::open(path)?.collect()
}

/// Re-run the document gate over a saved index. Produces exactly the kept
/// set and scores that [`crate::filter::filter_document`] would produce on
/// the original raw documents — for any threshold and tolerance, which is
/// the point of caching vocabularies.
pub fn replay_index(
    path: &Path,
    config: &FilterConfig,
    stats: &mut FilterStats,
) -> Result<Vec<ScoredDocument>, IndexError> {
    let mut kept = Vec::new();
    for record in IndexReader::open(path)? {
        let record = record?;
        if let Evaluation {
            verdict: Verdict::Kept,
            wsc,
            bsc,
        } = evaluate(&record.types, config, stats)
        {
            kept.push(ScoredDocument {
                document: Document {
                    id: record.id,
                    uri: record.uri,
                    crawler_lang: record.crawler_lang,
                    text: String::new(),
                    byte_len: 0,
                },
                wsc,
                bsc: bsc.unwrap_or(0),
            });
        }
    }
    Ok(kept)
}
