//! Event stream file formats.
//!
//! CSV: a `cycle,channel` header line, then one `<u64>,<XX|XCO|XCROSS>`
//! record per line.
//!
//! Binary: the magic bytes `CTEV1`, then 9-byte records of a little-endian
//! u64 cycle index followed by a u8 channel code (0 = XX, 1 = XCO,
//! 2 = XCROSS).
//!
//! Readers stream record by record; errors carry the byte offset of the
//! offending line or record.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::Error;
use crate::events::{Channel, EventRecord, EventStream};

pub const CSV_HEADER: &str = "cycle,channel";
pub const BINARY_MAGIC: &[u8; 5] = b"CTEV1";
const BINARY_RECORD: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Binary,
}

impl EventFormat {
    /// Guesses from the leading bytes of a file.
    pub fn sniff(prefix: &[u8]) -> EventFormat {
        if prefix.starts_with(BINARY_MAGIC) {
            EventFormat::Binary
        } else {
            EventFormat::Csv
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            EventFormat::Csv => "csv",
            EventFormat::Binary => "bin",
        }
    }
}

impl std::str::FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(EventFormat::Csv),
            "binary" | "bin" => Ok(EventFormat::Binary),
            other => Err(Error::invalid(
                "event format",
                format!("{other:?} is not csv or binary"),
            )),
        }
    }
}

pub fn write_csv<W: Write>(stream: &EventStream, out: W) -> Result<(), Error> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "{CSV_HEADER}")?;
    for r in stream.records() {
        writeln!(out, "{},{}", r.cycle, r.channel)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_binary<W: Write>(stream: &EventStream, out: W) -> Result<(), Error> {
    let mut out = std::io::BufWriter::new(out);
    out.write_all(BINARY_MAGIC)?;
    for r in stream.records() {
        out.write_all(&r.cycle.to_le_bytes())?;
        out.write_all(&[r.channel.code()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_events<W: Write>(
    stream: &EventStream,
    format: EventFormat,
    out: W,
) -> Result<(), Error> {
    match format {
        EventFormat::Csv => write_csv(stream, out),
        EventFormat::Binary => write_binary(stream, out),
    }
}

fn parse_error(offset: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

/// Record-at-a-time reader over either format.
pub struct EventReader<R: Read> {
    inner: BufReader<R>,
    format: EventFormat,
    offset: u64,
    last_cycle: Option<u64>,
    line: String,
    started: bool,
    done: bool,
}

impl<R: Read> EventReader<R> {
    pub fn new(source: R, format: EventFormat) -> Self {
        EventReader {
            inner: BufReader::new(source),
            format,
            offset: 0,
            last_cycle: None,
            line: String::new(),
            started: false,
            done: false,
        }
    }

    fn read_preamble(&mut self) -> Result<(), Error> {
        self.started = true;
        match self.format {
            EventFormat::Csv => {
                self.line.clear();
                let n = self.inner.read_line(&mut self.line)?;
                if n == 0 {
                    return Err(parse_error(
                        0,
                        "empty input: missing `cycle,channel` header",
                    ));
                }
                if self.line.trim_end_matches(['\n', '\r']) != CSV_HEADER {
                    return Err(parse_error(0, format!("expected header {CSV_HEADER:?}")));
                }
                self.offset = n as u64;
            }
            EventFormat::Binary => {
                let mut magic = [0u8; 5];
                let got = read_full(&mut self.inner, &mut magic)?;
                if got < magic.len() || &magic != BINARY_MAGIC {
                    return Err(parse_error(0, "missing CTEV1 magic"));
                }
                self.offset = magic.len() as u64;
            }
        }
        Ok(())
    }

    fn next_csv(&mut self) -> Result<Option<EventRecord>, Error> {
        self.line.clear();
        let start = self.offset;
        let n = self.inner.read_line(&mut self.line)?;
        if n == 0 {
            return Ok(None);
        }
        self.offset += n as u64;
        let text = self.line.trim_end_matches(['\n', '\r']);
        let (cycle, channel) = text
            .split_once(',')
            .ok_or_else(|| parse_error(start, format!("expected `cycle,channel`, got {text:?}")))?;
        let cycle: u64 = cycle
            .parse()
            .map_err(|_| parse_error(start, format!("bad cycle index {cycle:?}")))?;
        let channel: Channel = channel
            .parse()
            .map_err(|_| parse_error(start, format!("unknown channel {channel:?}")))?;
        Ok(Some(EventRecord::new(cycle, channel)))
    }

    fn next_binary(&mut self) -> Result<Option<EventRecord>, Error> {
        let start = self.offset;
        let mut buf = [0u8; BINARY_RECORD];
        let got = read_full(&mut self.inner, &mut buf)?;
        if got == 0 {
            return Ok(None);
        }
        if got < BINARY_RECORD {
            return Err(parse_error(
                start,
                format!("truncated record: {got} of {BINARY_RECORD} bytes"),
            ));
        }
        self.offset += BINARY_RECORD as u64;
        let cycle = u64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let channel = Channel::from_code(buf[8])
            .ok_or_else(|| parse_error(start + 8, format!("unknown channel code {}", buf[8])))?;
        Ok(Some(EventRecord::new(cycle, channel)))
    }

    fn next_record(&mut self) -> Result<Option<EventRecord>, Error> {
        if !self.started {
            self.read_preamble()?;
        }
        let start = self.offset;
        let rec = match self.format {
            EventFormat::Csv => self.next_csv()?,
            EventFormat::Binary => self.next_binary()?,
        };
        if let Some(r) = rec {
            if let Some(prev) = self.last_cycle {
                if r.cycle < prev {
                    return Err(parse_error(
                        start,
                        format!("cycle index {} decreases (previous {prev})", r.cycle),
                    ));
                }
            }
            self.last_cycle = Some(r.cycle);
        }
        Ok(rec)
    }
}

impl<R: Read> Iterator for EventReader<R> {
    type Item = Result<EventRecord, Error>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize, Error> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

/// Reads a whole stream into memory.
pub fn parse_events<R: Read>(source: R, format: EventFormat) -> Result<EventStream, Error> {
    let records = EventReader::new(source, format).collect::<Result<Vec<_>, _>>()?;
    EventStream::new(records, None)
}
