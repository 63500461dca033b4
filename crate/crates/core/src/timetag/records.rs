use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Location, Result};

pub const CHANNELS: u8 = 16;
pub const BINARY_RECORD_LEN: usize = 9;

/// One detector click. Ordered by time, then channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimetagRecord {
    pub time_ps: u64,
    pub channel: u8,
}

impl TimetagRecord {
    pub fn new(channel: u8, time_ps: u64) -> Result<Self> {
        if channel >= CHANNELS {
            return Err(Error::domain(format!(
                "channel {channel} is not below {CHANNELS}"
            )));
        }
        Ok(Self { time_ps, channel })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    Text,
    Binary,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Text => "text",
            Format::Binary => "binary",
        })
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "csv" | "txt" => Ok(Format::Text),
            "binary" | "bin" => Ok(Format::Binary),
            other => Err(Error::domain(format!("unknown timetag format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseOptions {
    /// How far, in ps, a record may trail the latest time seen and still be
    /// put back in order. Zero demands a non-decreasing stream.
    pub reorder_tolerance_ps: u64,
}

enum Source<R> {
    Text {
        reader: BufReader<R>,
        line: usize,
        buf: String,
    },
    Binary {
        reader: BufReader<R>,
        index: u64,
    },
}

impl<R: Read> Source<R> {
    fn next_raw(&mut self) -> Option<Result<(TimetagRecord, Location)>> {
        match self {
            Source::Text { reader, line, buf } => loop {
                buf.clear();
                match reader.read_line(buf) {
                    Ok(0) => return None,
                    Ok(_) => {}
                    Err(e) => return Some(Err(e.into())),
                }
                *line += 1;
                let text = buf.trim();
                if text.is_empty() || text.starts_with('#') {
                    continue;
                }
                let loc = Location::Line(*line);
                return Some(parse_text_line(text, loc).map(|r| (r, loc)));
            },
            Source::Binary { reader, index } => {
                let mut rec = [0u8; BINARY_RECORD_LEN];
                let loc = Location::Record {
                    index: *index,
                    offset: *index * BINARY_RECORD_LEN as u64,
                };
                let mut filled = 0;
                while filled < BINARY_RECORD_LEN {
                    match reader.read(&mut rec[filled..]) {
                        Ok(0) => break,
                        Ok(n) => filled += n,
                        Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                        Err(e) => return Some(Err(e.into())),
                    }
                }
                if filled == 0 {
                    return None;
                }
                *index += 1;
                if filled < BINARY_RECORD_LEN {
                    return Some(Err(Error::parse(
                        loc,
                        format!("truncated record: {filled} of {BINARY_RECORD_LEN} bytes"),
                    )));
                }
                let channel = rec[0];
                let time_ps = u64::from_le_bytes(rec[1..].try_into().expect("eight bytes"));
                if channel >= CHANNELS {
                    return Some(Err(Error::parse(loc, format!("unknown channel {channel}"))));
                }
                Some(Ok((TimetagRecord { time_ps, channel }, loc)))
            }
        }
    }
}

fn parse_text_line(text: &str, loc: Location) -> Result<TimetagRecord> {
    let (ch, time) = text
        .split_once(',')
        .ok_or_else(|| Error::parse(loc, format!("expected channel,time_ps, found {text:?}")))?;
    let channel: u8 = ch
        .trim()
        .parse()
        .map_err(|e| Error::parse(loc, format!("bad channel {:?}: {e}", ch.trim())))?;
    if channel >= CHANNELS {
        return Err(Error::parse(loc, format!("unknown channel {channel}")));
    }
    let time_ps: u64 = time
        .trim()
        .parse()
        .map_err(|e| Error::parse(loc, format!("bad time {:?}: {e}", time.trim())))?;
    Ok(TimetagRecord { time_ps, channel })
}

/// Validated, time-ordered records from a text or binary stream.
pub struct TimetagStream<R> {
    source: Source<R>,
    tolerance: u64,
    pending: BinaryHeap<Reverse<TimetagRecord>>,
    max_seen: Option<u64>,
    done: bool,
}

impl<R: Read> TimetagStream<R> {
    fn pop_ready(&mut self) -> Option<TimetagRecord> {
        let max_seen = self.max_seen?;
        match self.pending.peek() {
            Some(Reverse(r))
                if self.done || r.time_ps.saturating_add(self.tolerance) <= max_seen =>
            {
                self.pending.pop().map(|Reverse(r)| r)
            }
            _ => None,
        }
    }
}

impl<R: Read> Iterator for TimetagStream<R> {
    type Item = Result<TimetagRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(r) = self.pop_ready() {
                return Some(Ok(r));
            }
            if self.done {
                return None;
            }
            match self.source.next_raw() {
                None => self.done = true,
                Some(Err(e)) => {
                    self.done = true;
                    self.pending.clear();
                    return Some(Err(e));
                }
                Some(Ok((rec, loc))) => {
                    if let Some(max_seen) = self.max_seen {
                        if rec.time_ps.saturating_add(self.tolerance) < max_seen {
                            self.done = true;
                            self.pending.clear();
                            return Some(Err(Error::parse(
                                loc,
                                format!(
                                    "time {} ps precedes {} ps by more than the reorder tolerance of {} ps",
                                    rec.time_ps, max_seen, self.tolerance
                                ),
                            )));
                        }
                    }
                    self.max_seen = Some(self.max_seen.map_or(rec.time_ps, |m| m.max(rec.time_ps)));
                    self.pending.push(Reverse(rec));
                }
            }
        }
    }
}

/// Stream records from `reader`; errors name the offending line or record.
pub fn parse_timetags<R: Read>(reader: R, format: Format, opts: ParseOptions) -> TimetagStream<R> {
    let reader = BufReader::with_capacity(1 << 16, reader);
    let source = match format {
        Format::Text => Source::Text {
            reader,
            line: 0,
            buf: String::new(),
        },
        Format::Binary => Source::Binary { reader, index: 0 },
    };
    TimetagStream {
        source,
        tolerance: opts.reorder_tolerance_ps,
        pending: BinaryHeap::new(),
        max_seen: None,
        done: false,
    }
}

pub fn read_timetags<R: Read>(
    reader: R,
    format: Format,
    opts: ParseOptions,
) -> Result<Vec<TimetagRecord>> {
    parse_timetags(reader, format, opts).collect()
}

pub fn write_text<W: Write>(mut w: W, records: &[TimetagRecord]) -> io::Result<()> {
    for r in records {
        writeln!(w, "{},{}", r.channel, r.time_ps)?;
    }
    w.flush()
}

pub fn write_binary<W: Write>(mut w: W, records: &[TimetagRecord]) -> io::Result<()> {
    let mut rec = [0u8; BINARY_RECORD_LEN];
    for r in records {
        rec[0] = r.channel;
        rec[1..].copy_from_slice(&r.time_ps.to_le_bytes());
        w.write_all(&rec)?;
    }
    w.flush()
}
