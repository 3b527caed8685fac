//! Streaming reader for WET archives (WARC/1.0 `conversion` records).
//!
//! Crawl data is dirty by nature, so the reader never aborts a shard over a
//! bad record: malformed headers cause a scan to the next record boundary,
//! truncation at end of stream yields nothing for the partial record, and
//! everything skipped is accounted for in [`IngestStats`].

use std::io::{self, BufRead};

/// One crawl record, decoded and ready for scoring.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Document {
    /// Strictly increasing ordinal within the input stream (plus any id base
    /// the caller supplied to keep ids unique across shards).
    pub id: u64,
    /// Value of `WARC-Target-URI`, empty when the record carries none.
    pub uri: String,
    /// Language tags from `WARC-Identified-Content-Language`, lowercased,
    /// in header order. Empty when the crawl declared none.
    pub crawler_lang: Vec<String>,
    /// Record body decoded as UTF-8; invalid sequences become U+FFFD and are
    /// counted in [`IngestStats::decode_replacements`], never dropped.
    pub text: String,
    /// Declared `Content-Length` of the source record.
    pub byte_len: usize,
}

/// Counters for one stream. `records_read` always equals documents yielded
/// plus `records_skipped`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IngestStats {
    pub records_read: u64,
    /// Non-`conversion` records, malformed records, and truncated tails.
    pub records_skipped: u64,
    pub decode_replacements: u64,
    pub bytes_read: u64,
}

impl IngestStats {
    pub fn merge(&mut self, other: &IngestStats) {
        self.records_read += other.records_read;
        self.records_skipped += other.records_skipped;
        self.decode_replacements += other.decode_replacements;
        self.bytes_read += other.bytes_read;
    }
}

/// Streaming WET parser. Iterate to get one [`Document`] per `conversion`
/// record; call [`WetReader::stats`] afterwards for the accounting.
pub struct WetReader<R> {
    inner: R,
    id_base: u64,
    next_ordinal: u64,
    stats: IngestStats,
    finished: bool,
    /// Reused for every header line read.
    line_buf: Vec<u8>,
    /// A version line already consumed while resynchronizing.
    pending_version: Option<Vec<u8>>,
}

/// Open a WET stream with document ids starting at zero.
pub fn read_wet_stream<R: BufRead>(source: R) -> WetReader<R> {
    WetReader::new(source)
}

#[derive(Default)]
struct RecordHeader {
    warc_type: Option<String>,
    uri: Option<String>,
    langs: Option<String>,
    content_length: Option<usize>,
}

impl<R: BufRead> WetReader<R> {
    pub fn new(inner: R) -> Self {
        WetReader::with_id_base(inner, 0)
    }

    /// Ids are `id_base + ordinal`; shard runners pass a per-file base so
    /// ids stay unique and reproducible across any shard layout.
    pub fn with_id_base(inner: R, id_base: u64) -> Self {
        WetReader {
            inner,
            id_base,
            next_ordinal: 0,
            stats: IngestStats::default(),
            finished: false,
            line_buf: Vec::with_capacity(256),
            pending_version: None,
        }
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    pub fn into_stats(self) -> IngestStats {
        self.stats
    }

    /// Read the next line into `line_buf` without its trailing newline.
    /// Returns false at end of stream.
    fn read_line(&mut self) -> io::Result<bool> {
        self.line_buf.clear();
        let n = self.inner.read_until(b'\n', &mut self.line_buf)?;
        if n == 0 {
            return Ok(false);
        }
        self.stats.bytes_read += n as u64;
        while matches!(self.line_buf.last(), Some(b'\n') | Some(b'\r')) {
            self.line_buf.pop();
        }
        Ok(true)
    }

    /// Scan forward to the next `WARC/` version line, stashing it for the
    /// next record attempt. Returns false at end of stream.
    fn resync(&mut self) -> io::Result<bool> {
        loop {
            if !self.read_line()? {
                return Ok(false);
            }
            if self.line_buf.starts_with(b"WARC/") {
                self.pending_version = Some(self.line_buf.clone());
                return Ok(true);
            }
        }
    }

    fn read_headers(&mut self) -> io::Result<HeaderOutcome> {
        let mut header = RecordHeader::default();
        loop {
            if !self.read_line()? {
                return Ok(HeaderOutcome::Truncated);
            }
            if self.line_buf.is_empty() {
                return Ok(HeaderOutcome::Complete(header));
            }
            let text = String::from_utf8_lossy(&self.line_buf);
            let Some((name, value)) = text.split_once(':') else {
                return Ok(HeaderOutcome::Malformed);
            };
            let value = value.trim();
            match name.trim().to_ascii_lowercase().as_str() {
                "warc-type" => header.warc_type = Some(value.to_ascii_lowercase()),
                "warc-target-uri" => header.uri = Some(value.to_string()),
                "warc-identified-content-language" => header.langs = Some(value.to_string()),
                "content-length" => header.content_length = value.parse().ok(),
                _ => {}
            }
        }
    }

    /// Read exactly `len` body bytes, reporting how many actually arrived.
    fn read_body(&mut self, len: usize) -> io::Result<(Vec<u8>, usize)> {
        let mut body = vec![0u8; len];
        let mut filled = 0;
        while filled < len {
            let n = self.inner.read(&mut body[filled..])?;
            if n == 0 {
                break;
            }
            filled += n;
        }
        self.stats.bytes_read += filled as u64;
        body.truncate(filled);
        Ok((body, filled))
    }

    fn next_document(&mut self) -> io::Result<Option<Document>> {
        loop {
            match self.pending_version.take() {
                Some(line) => self.line_buf = line,
                None => {
                    if !self.read_line()? {
                        return Ok(None);
                    }
                }
            }
            if self.line_buf.is_empty() {
                continue; // separator between records
            }
            self.stats.records_read += 1;
            if !self.line_buf.starts_with(b"WARC/") {
                // Corrupted boundary: charge one skipped record for the
                // garbage segment and pick up at the next version line.
                self.stats.records_skipped += 1;
                if !self.resync()? {
                    return Ok(None);
                }
                continue;
            }

            let header = match self.read_headers()? {
                HeaderOutcome::Complete(header) => header,
                HeaderOutcome::Truncated => {
                    self.stats.records_skipped += 1;
                    return Ok(None);
                }
                HeaderOutcome::Malformed => {
                    self.stats.records_skipped += 1;
                    if !self.resync()? {
                        return Ok(None);
                    }
                    continue;
                }
            };

            let Some(content_length) = header.content_length else {
                self.stats.records_skipped += 1;
                if !self.resync()? {
                    return Ok(None);
                }
                continue;
            };

            let (body, got) = self.read_body(content_length)?;
            if got < content_length {
                // Truncated final record: yield nothing for it.
                self.stats.records_skipped += 1;
                return Ok(None);
            }

            if header.warc_type.as_deref() != Some("conversion") {
                self.stats.records_skipped += 1;
                continue;
            }

            let (text, replacements) = decode_lossy_counting(body);
            self.stats.decode_replacements += replacements;
            let id = self.id_base + self.next_ordinal;
            self.next_ordinal += 1;
            return Ok(Some(Document {
                id,
                uri: header.uri.unwrap_or_default(),
                crawler_lang: split_language_tags(header.langs.as_deref()),
                text,
                byte_len: content_length,
            }));
        }
    }
}

enum HeaderOutcome {
    Complete(RecordHeader),
    Malformed,
    Truncated,
}

impl<R: BufRead> Iterator for WetReader<R> {
    type Item = io::Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        match self.next_document() {
            Ok(Some(doc)) => Some(Ok(doc)),
            Ok(None) => {
                self.finished = true;
                None
            }
            Err(e) => {
                self.finished = true;
                Some(Err(e))
            }
        }
    }
}

fn split_language_tags(raw: Option<&str>) -> Vec<String> {
    raw.map(|value| {
        value
            .split(',')
            .map(|tag| tag.trim().to_lowercase())
            .filter(|tag| !tag.is_empty())
            .collect()
    })
    .unwrap_or_default()
}

/// UTF-8 decode with U+FFFD substitution, counting how many invalid
/// sequences were replaced.
fn decode_lossy_counting(bytes: Vec<u8>) -> (String, u64) {
    match String::from_utf8(bytes) {
        Ok(s) => (s, 0),
        Err(err) => {
            let bytes = err.into_bytes();
            let mut out = String::with_capacity(bytes.len());
            let mut count = 0;
            let mut rest = bytes.as_slice();
            loop {
                match std::str::from_utf8(rest) {
                    Ok(tail) => {
                        out.push_str(tail);
                        break;
                    }
                    Err(err) => {
                        let valid = err.valid_up_to();
                        out.push_str(std::str::from_utf8(&rest[..valid]).unwrap());
                        out.push('\u{FFFD}');
                        count += 1;
                        let skip = err.error_len().unwrap_or(rest.len() - valid);
                        rest = &rest[valid + skip..];
                    }
                }
            }
            (out, count)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Build one WARC/1.0 record with CRLF framing, as crawlers emit them.
    fn record(warc_type: &str, uri: &str, lang: Option<&str>, body: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"WARC/1.0\r\n");
        out.extend_from_slice(format!("WARC-Type: {warc_type}\r\n").as_bytes());
        if !uri.is_empty() {
            out.extend_from_slice(format!("WARC-Target-URI: {uri}\r\n").as_bytes());
        }
        if let Some(lang) = lang {
            out.extend_from_slice(
                format!("WARC-Identified-Content-Language: {lang}\r\n").as_bytes(),
            );
        }
        out.extend_from_slice(format!("Content-Length: {}\r\n", body.len()).as_bytes());
        out.extend_from_slice(b"\r\n");
        out.extend_from_slice(body);
        out.extend_from_slice(b"\r\n\r\n");
        out
    }

    fn golden_bodies() -> [&'static [u8]; 3] {
        [
            "Lapli ka tonbé asou sé moun-lan.\n".as_bytes(),
            b"Plain ASCII body, two lines.\nSecond line.\n",
            "Ti kreyòl: piti piti zòt ké wè.\n".as_bytes(),
        ]
    }

    fn golden_file() -> Vec<u8> {
        let bodies = golden_bodies();
        let mut file = Vec::new();
        file.extend(record("warcinfo", "", None, b"software: test\r\n"));
        file.extend(record(
            "conversion",
            "https://a.example/1",
            Some("fra"),
            bodies[0],
        ));
        file.extend(record(
            "conversion",
            "https://b.example/2",
            Some("fra,eng"),
            bodies[1],
        ));
        file.extend(record("conversion", "https://c.example/3", None, bodies[2]));
        file
    }

    /// Independent splitter: find version-line offsets, then extract each
    /// body via the declared Content-Length. Shares nothing with WetReader.
    fn oracle_bodies(file: &[u8]) -> Vec<Vec<u8>> {
        let hay = file;
        let mut bodies = Vec::new();
        let mut start = 0;
        while let Some(idx) = find(&hay[start..], b"WARC/1.0\r\n") {
            let rec_start = start + idx;
            let header_end = find(&hay[rec_start..], b"\r\n\r\n").unwrap() + rec_start;
            let headers = std::str::from_utf8(&hay[rec_start..header_end]).unwrap();
            let mut len = None;
            let mut is_conversion = false;
            for line in headers.lines() {
                if let Some(v) = line.strip_prefix("Content-Length: ") {
                    len = Some(v.trim().parse::<usize>().unwrap());
                }
                if line == "WARC-Type: conversion" {
                    is_conversion = true;
                }
            }
            let len = len.unwrap();
            let body_start = header_end + 4;
            if is_conversion {
                bodies.push(hay[body_start..body_start + len].to_vec());
            }
            start = body_start + len;
        }
        bodies
    }

    fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
        hay.windows(needle.len()).position(|w| w == needle)
    }

    fn collect(file: &[u8]) -> (Vec<Document>, IngestStats) {
        let mut reader = read_wet_stream(io::BufReader::new(file));
        let docs: Vec<Document> = reader.by_ref().map(Result::unwrap).collect();
        let stats = reader.into_stats();
        (docs, stats)
    }

    #[test]
    fn non_conversion_records_are_filtered() {
        let mut file = record("warcinfo", "", None, b"software: x\r\n");
        file.extend(record("conversion", "https://x.example/", None, b"abc"));
        let (docs, stats) = collect(&file);
        assert_eq!(docs.len(), 1);
        assert_eq!(stats.records_read, 2);
        assert_eq!(stats.records_skipped, 1);
    }

    #[test]
    fn zero_length_body() {
        let file = record("conversion", "https://x.example/", None, b"");
        let (docs, _) = collect(&file);
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].text, "");
        assert_eq!(docs[0].byte_len, 0);
    }

    #[test]
    fn golden_file_bodies_round_trip() {
        let file = golden_file();
        let (docs, stats) = collect(&file);
        assert_eq!(docs.len(), 3);
        for (doc, body) in docs.iter().zip(golden_bodies()) {
            assert_eq!(doc.text.as_bytes(), body);
            assert_eq!(doc.byte_len, body.len());
        }
        assert_eq!(oracle_bodies(&file), golden_bodies().map(<[u8]>::to_vec));
        assert_eq!(stats.records_read, 4);
        assert_eq!(stats.records_skipped, 1);
        assert_eq!(docs[1].crawler_lang, vec!["fra", "eng"]);
        assert_eq!(docs[0].uri, "https://a.example/1");
    }

    #[test]
    fn ids_preserve_stream_order() {
        let (docs, _) = collect(&golden_file());
        let ids: Vec<u64> = docs.iter().map(|d| d.id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn id_base_offsets_every_document() {
        let file = golden_file();
        let mut reader = WetReader::with_id_base(io::BufReader::new(file.as_slice()), 1 << 32);
        let ids: Vec<u64> = reader.by_ref().map(|d| d.unwrap().id).collect();
        assert_eq!(ids, vec![1 << 32, (1 << 32) + 1, (1 << 32) + 2]);
    }

    #[test]
    fn corrupted_record_between_two_valid_ones() {
        let mut file = record("conversion", "https://a.example/", None, b"first body");
        file.extend_from_slice(b"WARC/1.0\r\nThis header has no colon\r\n\r\n");
        file.extend(record(
            "conversion",
            "https://b.example/",
            None,
            b"second body",
        ));
        let (docs, stats) = collect(&file);
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].text, "first body");
        assert_eq!(docs[1].text, "second body");
        assert_eq!(
            stats.records_read,
            docs.len() as u64 + stats.records_skipped
        );
    }

    #[test]
    fn garbage_between_records_is_survived() {
        let mut file = record("conversion", "https://a.example/", None, b"first");
        file.extend_from_slice(b"%%% not a record at all %%%\r\njunk\r\n");
        file.extend(record("conversion", "https://b.example/", None, b"second"));
        let (docs, stats) = collect(&file);
        assert_eq!(docs.len(), 2);
        assert!(stats.records_skipped >= 1);
        assert_eq!(stats.records_read, 2 + stats.records_skipped);
    }

    #[test]
    fn truncated_final_record_yields_nothing() {
        let mut file = record("conversion", "https://a.example/", None, b"whole");
        file.extend_from_slice(
            b"WARC/1.0\r\nWARC-Type: conversion\r\nContent-Length: 100\r\n\r\nonly a few bytes",
        );
        let (docs, stats) = collect(&file);
        assert_eq!(docs.len(), 1);
        assert_eq!(stats.records_read, 2);
        assert_eq!(stats.records_skipped, 1);
    }

    #[test]
    fn header_names_are_case_insensitive() {
        let mut file = Vec::new();
        file.extend_from_slice(b"WARC/1.0\r\n");
        file.extend_from_slice(b"warc-type: conversion\r\n");
        file.extend_from_slice(b"WARC-TARGET-URI: https://x.example/\r\n");
        file.extend_from_slice(b"content-length: 3\r\n\r\nabc\r\n\r\n");
        let (docs, _) = collect(&file);
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].uri, "https://x.example/");
    }

    #[test]
    fn invalid_utf8_is_replaced_and_counted() {
        let body = b"bon \xFF\xFE jou"; // two invalid bytes
        let file = record("conversion", "https://x.example/", None, body);
        let (docs, stats) = collect(&file);
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].text, "bon \u{FFFD}\u{FFFD} jou");
        assert_eq!(stats.decode_replacements, 2);
        assert_eq!(docs[0].byte_len, body.len());
    }

    #[test]
    fn missing_content_length_skips_record() {
        let mut file = Vec::new();
        file.extend_from_slice(b"WARC/1.0\r\nWARC-Type: conversion\r\n\r\n");
        file.extend(record("conversion", "https://ok.example/", None, b"kept"));
        let (docs, stats) = collect(&file);
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].text, "kept");
        assert_eq!(stats.records_skipped, 1);
    }

    #[test]
    fn stats_invariant_holds_on_golden_file() {
        let (docs, stats) = collect(&golden_file());
        assert_eq!(
            stats.records_read,
            docs.len() as u64 + stats.records_skipped
        );
    }
}
