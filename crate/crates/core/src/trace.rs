//! Block I/O trace ingestion.
//!
//! Four on-disk layouts are understood:
//!
//! | kind         | layout                                                            |
//! |--------------|-------------------------------------------------------------------|
//! | `plaintext`  | one block address per non-empty line, decimal or hex              |
//! | `csv`        | comma-separated rows, block address in a configurable column      |
//! | `binary64`   | packed little-endian `u64` block addresses                        |
//! | `extent-csv` | MSR-Cambridge style rows carrying a byte offset and a byte length |
//!
//! Extent rows are expanded into every block they touch, so downstream code
//! only ever sees block indices. Logical sequence numbers are assigned in
//! emission order starting at zero.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

/// Address value reserved as the empty-cell marker of the prefetching table.
pub const RESERVED_ADDR: u64 = u64::MAX;

pub const DEFAULT_BLOCK_SIZE: u64 = 4096;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot open trace {}: {source}", path.display())]
    Open { path: PathBuf, source: io::Error },
    #[error("I/O error while reading trace: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("unknown trace format `{0}` (expected plaintext, csv, binary64 or extent-csv)")]
    UnknownKind(String),
    #[error("invalid trace format: {0}")]
    InvalidFormat(String),
}

/// One demand request in a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockRequest {
    pub seq: u64,
    pub addr: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Plaintext,
    Csv,
    Binary64,
    ExtentCsv,
}

impl FromStr for TraceKind {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plaintext" | "txt" | "text" => Ok(TraceKind::Plaintext),
            "csv" => Ok(TraceKind::Csv),
            "binary64" | "bin" => Ok(TraceKind::Binary64),
            "extent-csv" | "msr" => Ok(TraceKind::ExtentCsv),
            other => Err(TraceError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceKind::Plaintext => "plaintext",
            TraceKind::Csv => "csv",
            TraceKind::Binary64 => "binary64",
            TraceKind::ExtentCsv => "extent-csv",
        })
    }
}

/// What to do with a record that fails to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OnParseError {
    #[default]
    Fail,
    Skip,
}

impl FromStr for OnParseError {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fail" => Ok(OnParseError::Fail),
            "skip" => Ok(OnParseError::Skip),
            other => Err(TraceError::InvalidFormat(format!(
                "on_parse_error must be `fail` or `skip`, got `{other}`"
            ))),
        }
    }
}

/// Layout description for a trace file.
///
/// `addr_col` is the block address column for `csv` and the byte offset column
/// for `extent-csv`. `len_col` is only consulted for `extent-csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceFormat {
    pub kind: TraceKind,
    pub addr_col: usize,
    pub len_col: usize,
    pub op_col: Option<usize>,
    pub block_size: u64,
    pub radix: u32,
    pub reads_only: bool,
    pub on_parse_error: OnParseError,
}

impl TraceFormat {
    pub fn plaintext() -> Self {
        Self::with_kind(TraceKind::Plaintext)
    }

    pub fn binary64() -> Self {
        Self::with_kind(TraceKind::Binary64)
    }

    pub fn csv(addr_col: usize) -> Self {
        TraceFormat {
            addr_col,
            ..Self::with_kind(TraceKind::Csv)
        }
    }

    /// MSR Cambridge column order: timestamp, host, disk, op, offset, length, latency.
    pub fn msr() -> Self {
        Self::with_kind(TraceKind::ExtentCsv)
    }

    /// Column defaults for `kind`; csv reads column 0, extent-csv uses the MSR layout.
    pub fn with_kind(kind: TraceKind) -> Self {
        let (addr_col, len_col, op_col) = match kind {
            TraceKind::ExtentCsv => (4, 5, Some(3)),
            _ => (0, 1, None),
        };
        TraceFormat {
            kind,
            addr_col,
            len_col,
            op_col,
            block_size: DEFAULT_BLOCK_SIZE,
            radix: 10,
            reads_only: false,
            on_parse_error: OnParseError::Fail,
        }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        if self.radix != 10 && self.radix != 16 {
            return Err(TraceError::InvalidFormat(format!(
                "address radix must be 10 or 16, got {}",
                self.radix
            )));
        }
        if self.kind == TraceKind::ExtentCsv && self.block_size == 0 {
            return Err(TraceError::InvalidFormat(
                "block_size must be positive for extent-csv".into(),
            ));
        }
        Ok(())
    }
}

/// Blocks touched by a byte extent. Zero-length extents touch the block
/// containing `offset`.
///
/// # Panics
///
/// Panics if `block_size` is zero.
pub fn expand_extent(offset: u64, length: u64, block_size: u64) -> RangeInclusive<u64> {
    assert!(block_size > 0, "block_size must be positive");
    let first = offset / block_size;
    let last_byte = offset.saturating_add(length.max(1) - 1);
    first..=last_byte / block_size
}

enum Source {
    Lines(Box<dyn BufRead>),
    Csv(csv::Reader<Box<dyn Read>>),
    Binary(Box<dyn BufRead>),
}

/// Sequential reader over one trace.
pub struct TraceReader {
    source: Source,
    format: TraceFormat,
    record: u64,
    emitted: u64,
    pending: Option<RangeInclusive<u64>>,
    line_buf: String,
    csv_buf: csv::StringRecord,
}

/// Opens `path` for reading with the given layout.
pub fn open_trace(path: impl AsRef<Path>, format: &TraceFormat) -> Result<TraceReader, TraceError> {
    let path = path.as_ref();
    format.validate()?;
    let file = File::open(path).map_err(|source| TraceError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(TraceReader::from_reader(file, format.clone()))
}

/// Reads a whole trace into memory as a vector of block addresses.
pub fn load_addresses(path: impl AsRef<Path>, format: &TraceFormat) -> Result<Vec<u64>, TraceError> {
    let mut reader = open_trace(path, format)?;
    let mut out = Vec::new();
    while let Some(req) = reader.next_request()? {
        out.push(req.addr);
    }
    Ok(out)
}

impl TraceReader {
    pub fn from_reader<R: Read + 'static>(reader: R, format: TraceFormat) -> Self {
        let source = match format.kind {
            TraceKind::Plaintext => Source::Lines(Box::new(BufReader::new(reader))),
            TraceKind::Binary64 => Source::Binary(Box::new(BufReader::new(reader))),
            TraceKind::Csv | TraceKind::ExtentCsv => Source::Csv(
                csv::ReaderBuilder::new()
                    .has_headers(false)
                    .flexible(true)
                    .trim(csv::Trim::All)
                    .from_reader(Box::new(reader) as Box<dyn Read>),
            ),
        };
        TraceReader {
            source,
            format,
            record: 0,
            emitted: 0,
            pending: None,
            line_buf: String::new(),
            csv_buf: csv::StringRecord::new(),
        }
    }

    pub fn format(&self) -> &TraceFormat {
        &self.format
    }

    /// Number of requests emitted so far.
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Returns the next request, `Ok(None)` at end of stream.
    ///
    /// A malformed record is reported with its 1-based line (or record) number.
    /// Under [`OnParseError::Skip`] such records are dropped silently instead.
    pub fn next_request(&mut self) -> Result<Option<BlockRequest>, TraceError> {
        loop {
            if let Some(range) = self.pending.as_mut() {
                if let Some(addr) = range.next() {
                    return Ok(Some(self.emit(addr)));
                }
                self.pending = None;
            }
            match self.next_record() {
                Ok(None) => return Ok(None),
                Ok(Some(range)) => self.pending = Some(range),
                Err(TraceError::Malformed { .. })
                    if self.format.on_parse_error == OnParseError::Skip => {}
                Err(err) => return Err(err),
            }
        }
    }

    fn emit(&mut self, addr: u64) -> BlockRequest {
        let req = BlockRequest {
            seq: self.emitted,
            addr,
        };
        self.emitted += 1;
        req
    }

    fn malformed(&self, reason: impl Into<String>) -> TraceError {
        TraceError::Malformed {
            line: self.record,
            reason: reason.into(),
        }
    }

    /// Next record as the range of blocks it touches; filtered rows are skipped.
    fn next_record(&mut self) -> Result<Option<RangeInclusive<u64>>, TraceError> {
        loop {
            self.record += 1;
            let range = match &mut self.source {
                Source::Lines(reader) => {
                    self.line_buf.clear();
                    if reader.read_line(&mut self.line_buf)? == 0 {
                        return Ok(None);
                    }
                    let text = self.line_buf.trim();
                    if text.is_empty() {
                        continue;
                    }
                    let addr = parse_addr(text, self.format.radix).map_err(|r| self.malformed(r))?;
                    addr..=addr
                }
                Source::Binary(reader) => {
                    let mut word = [0u8; 8];
                    let mut filled = 0;
                    while filled < word.len() {
                        let n = reader.read(&mut word[filled..])?;
                        if n == 0 {
                            break;
                        }
                        filled += n;
                    }
                    if filled == 0 {
                        return Ok(None);
                    }
                    if filled < word.len() {
                        return Err(self.malformed(format!(
                            "truncated record: {filled} of 8 bytes"
                        )));
                    }
                    let addr = u64::from_le_bytes(word);
                    if addr == RESERVED_ADDR {
                        return Err(self.malformed("address 0xffffffffffffffff is reserved"));
                    }
                    addr..=addr
                }
                Source::Csv(reader) => {
                    let more = reader.read_record(&mut self.csv_buf).map_err(|e| {
                        if e.is_io_error() {
                            match e.into_kind() {
                                csv::ErrorKind::Io(io) => TraceError::Io(io),
                                _ => unreachable!(),
                            }
                        } else {
                            TraceError::Malformed {
                                line: self.record,
                                reason: e.to_string(),
                            }
                        }
                    })?;
                    if !more {
                        return Ok(None);
                    }
                    if self.csv_buf.iter().all(str::is_empty) {
                        continue;
                    }
                    match self.parse_csv_row()? {
                        Some(range) => range,
                        None => continue,
                    }
                }
            };
            return Ok(Some(range));
        }
    }

    fn parse_csv_row(&self) -> Result<Option<RangeInclusive<u64>>, TraceError> {
        let row = &self.csv_buf;
        let field = |col: usize| {
            row.get(col)
                .ok_or_else(|| self.malformed(format!("missing column {col}")))
        };
        if let Some(op_col) = self.format.op_col {
            let is_write = parse_op(field(op_col)?).map_err(|r| self.malformed(r))?;
            if is_write && self.format.reads_only {
                return Ok(None);
            }
        }
        let addr = parse_addr(field(self.format.addr_col)?, self.format.radix)
            .map_err(|r| self.malformed(r))?;
        match self.format.kind {
            TraceKind::ExtentCsv => {
                let len_text = field(self.format.len_col)?;
                let length: u64 = len_text
                    .parse()
                    .map_err(|_| self.malformed(format!("invalid length `{len_text}`")))?;
                let range = expand_extent(addr, length, self.format.block_size);
                if *range.end() == RESERVED_ADDR {
                    return Err(self.malformed("extent reaches the reserved address"));
                }
                Ok(Some(range))
            }
            _ => Ok(Some(addr..=addr)),
        }
    }
}

impl Iterator for TraceReader {
    type Item = Result<BlockRequest, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_request().transpose()
    }
}

fn parse_addr(text: &str, radix: u32) -> Result<u64, String> {
    let digits = if radix == 16 {
        text.strip_prefix("0x")
            .or_else(|| text.strip_prefix("0X"))
            .unwrap_or(text)
    } else {
        text
    };
    let addr = u64::from_str_radix(digits, radix)
        .map_err(|e| format!("invalid address `{text}`: {e}"))?;
    if addr == RESERVED_ADDR {
        return Err(format!("address `{text}` is reserved"));
    }
    Ok(addr)
}

/// `true` for writes.
fn parse_op(text: &str) -> Result<bool, String> {
    match text.to_ascii_lowercase().as_str() {
        "read" | "r" | "rs" => Ok(false),
        "write" | "w" | "ws" => Ok(true),
        other => Err(format!("unknown operation `{other}`")),
    }
}
