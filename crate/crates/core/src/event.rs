//! Event-log ingestion.
//!
//! The wire format is CSV with a mandatory `sender_id,recipient_id,timestamp`
//! header. An empty `sender_id` marks a seed (infected at campaign start, not
//! by another participant). Timestamps are either integer epoch seconds or
//! RFC 3339; the format is auto-detected from the first data row and must be
//! consistent within one file. Lines starting with `#` are comments.
//!
//! Malformed rows do not abort ingestion: they are skipped and reported with
//! their line numbers so callers can surface diagnostics.

use std::io::{Read, Write};

use chrono::DateTime;
use thiserror::Error;

/// Actor identifier as it appears in the log.
pub type ActorId = String;

/// One transmission record. `sender == None` marks a seed infection.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub sender: Option<ActorId>,
    pub recipient: ActorId,
    /// Epoch seconds.
    pub timestamp: i64,
}

impl EventRecord {
    pub fn is_seed(&self) -> bool {
        self.sender.is_none()
    }
}

/// An ordered campaign trace: records sorted non-decreasing by timestamp.
///
/// Records with equal timestamps keep their file order (stable sort), so a
/// log maps to exactly one forest.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    records: Vec<EventRecord>,
}

impl EventLog {
    /// Builds a log from records in any order; sorts by timestamp, stable.
    pub fn new(mut records: Vec<EventRecord>) -> Self {
        records.sort_by_key(|r| r.timestamp);
        Self { records }
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Timestamp convention of the `timestamp` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimestampFormat {
    /// Detect from the first data row; the rest of the file must agree.
    #[default]
    Auto,
    EpochSeconds,
    Rfc3339,
}

/// CSV dialect settings for [`parse_events`].
#[derive(Debug, Clone)]
pub struct FormatConfig {
    pub timestamp: TimestampFormat,
    pub delimiter: u8,
}

impl Default for FormatConfig {
    fn default() -> Self {
        Self {
            timestamp: TimestampFormat::Auto,
            delimiter: b',',
        }
    }
}

/// A skipped input line, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineIssue {
    pub line: u64,
    pub message: String,
}

impl std::fmt::Display for LineIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Result of ingestion: the ordered log plus per-line diagnostics.
#[derive(Debug, Clone)]
pub struct ParsedLog {
    pub log: EventLog,
    /// Malformed lines that were skipped, in file order.
    pub skipped: Vec<LineIssue>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("i/o error reading events: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty input: no event records found")]
    EmptyInput,
    #[error("expected header `sender_id,recipient_id,timestamp`, found `{found}`")]
    BadHeader { found: String },
    #[error("line {line}: mixed timestamp formats in one file ({detected:?} detected earlier)")]
    MixedTimestampFormats {
        line: u64,
        detected: TimestampFormat,
    },
}

const HEADER: [&str; 3] = ["sender_id", "recipient_id", "timestamp"];

enum TsParse {
    Epoch(i64),
    Rfc(i64),
    Neither,
}

fn parse_timestamp(raw: &str) -> TsParse {
    let raw = raw.trim();
    if let Ok(secs) = raw.parse::<i64>() {
        return TsParse::Epoch(secs);
    }
    match DateTime::parse_from_rfc3339(raw) {
        Ok(dt) => TsParse::Rfc(dt.timestamp()),
        Err(_) => TsParse::Neither,
    }
}

/// Parses an event CSV stream into a timestamp-ordered [`EventLog`].
///
/// Malformed rows (wrong field count, empty recipient, unparsable timestamp)
/// are collected into [`ParsedLog::skipped`] rather than aborting. A file
/// that yields no valid record at all is [`ParseError::EmptyInput`]; a row
/// whose timestamp parses in the *other* convention than the one detected
/// for this file is [`ParseError::MixedTimestampFormats`].
pub fn parse_events<R: Read>(source: R, format: &FormatConfig) -> Result<ParsedLog, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .comment(Some(b'#'))
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    {
        let headers = reader.headers()?;
        let fields: Vec<&str> = headers.iter().collect();
        if fields != HEADER {
            return Err(ParseError::BadHeader {
                found: fields.join(","),
            });
        }
    }

    let mut detected = match format.timestamp {
        TimestampFormat::Auto => None,
        other => Some(other),
    };
    let mut records = Vec::new();
    let mut skipped = Vec::new();

    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 {
            skipped.push(LineIssue {
                line,
                message: format!("expected 3 fields, found {}", row.len()),
            });
            continue;
        }
        let recipient = row[1].to_string();
        if recipient.is_empty() {
            skipped.push(LineIssue {
                line,
                message: "empty recipient id".into(),
            });
            continue;
        }
        let ts = match (parse_timestamp(&row[2]), detected) {
            (TsParse::Neither, _) => {
                skipped.push(LineIssue {
                    line,
                    message: format!("unparsable timestamp `{}`", &row[2]),
                });
                continue;
            }
            (TsParse::Epoch(s), None) => {
                detected = Some(TimestampFormat::EpochSeconds);
                s
            }
            (TsParse::Rfc(s), None) => {
                detected = Some(TimestampFormat::Rfc3339);
                s
            }
            (TsParse::Epoch(s), Some(TimestampFormat::EpochSeconds)) => s,
            (TsParse::Rfc(s), Some(TimestampFormat::Rfc3339)) => s,
            (_, Some(fmt)) => {
                return Err(ParseError::MixedTimestampFormats {
                    line,
                    detected: fmt,
                });
            }
        };
        let sender = if row[0].is_empty() {
            None
        } else {
            Some(row[0].to_string())
        };
        records.push(EventRecord {
            sender,
            recipient,
            timestamp: ts,
        });
    }

    if records.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    Ok(ParsedLog {
        log: EventLog::new(records),
        skipped,
    })
}

/// Quotes a field when CSV requires it, or when it starts with `#` (an
/// unquoted leading `#` would turn the row into a comment on re-read).
fn escape_field(field: &str) -> std::borrow::Cow<'_, str> {
    let needs_quoting = field.starts_with('#')
        || field.contains(',')
        || field.contains('"')
        || field.contains('\n')
        || field.contains('\r');
    if needs_quoting {
        std::borrow::Cow::Owned(format!("\"{}\"", field.replace('"', "\"\"")))
    } else {
        std::borrow::Cow::Borrowed(field)
    }
}

/// Writes a log in the canonical event CSV form (epoch-second timestamps).
///
/// `comments` are emitted as `# `-prefixed lines above the header; the
/// simulator uses them to record its parameters.
pub fn write_events<W: Write>(
    mut out: W,
    log: &EventLog,
    comments: &[String],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{}", HEADER.join(","))?;
    for r in log.records() {
        writeln!(
            out,
            "{},{},{}",
            escape_field(r.sender.as_deref().unwrap_or("")),
            escape_field(&r.recipient),
            r.timestamp
        )?;
    }
    Ok(())
}

/// [`write_events`] into a fresh string.
pub fn events_to_string(log: &EventLog, comments: &[String]) -> String {
    let mut buf = Vec::new();
    write_events(&mut buf, log, comments).expect("in-memory write cannot fail");
    String::from_utf8(buf).expect("event csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ParsedLog, ParseError> {
        parse_events(s.as_bytes(), &FormatConfig::default())
    }

    const HDR: &str = "sender_id,recipient_id,timestamp\n";

    #[test]
    fn single_seed_record() {
        let parsed = parse(&format!("{HDR},A,100\n")).unwrap();
        assert_eq!(parsed.log.len(), 1);
        let r = &parsed.log.records()[0];
        assert!(r.is_seed());
        assert_eq!(r.recipient, "A");
        assert_eq!(r.timestamp, 100);
        assert!(parsed.skipped.is_empty());
    }

    #[test]
    fn records_reordered_by_timestamp() {
        let parsed = parse(&format!("{HDR}A,B,200\n,A,100\n")).unwrap();
        let recs = parsed.log.records();
        assert!(recs[0].is_seed());
        assert_eq!(recs[0].recipient, "A");
        assert_eq!(recs[1].sender.as_deref(), Some("A"));
    }

    #[test]
    fn bad_timestamp_reported_with_line_number() {
        let parsed = parse(&format!("{HDR},A,100\nA,B,nonsense{}\nB,C,300\n", "!")).unwrap();
        assert_eq!(parsed.log.len(), 2);
        assert_eq!(parsed.skipped.len(), 1);
        assert_eq!(parsed.skipped[0].line, 3);
        assert!(parsed.skipped[0].message.contains("timestamp"));
    }

    #[test]
    fn empty_file_is_empty_input() {
        assert!(matches!(parse(HDR), Err(ParseError::EmptyInput)));
        // All rows malformed counts as empty too.
        assert!(matches!(
            parse(&format!("{HDR}A,B,bad\n")),
            Err(ParseError::EmptyInput)
        ));
    }

    #[test]
    fn header_is_required() {
        assert!(matches!(
            parse(",A,100\nA,B,200\n"),
            Err(ParseError::BadHeader { .. })
        ));
    }

    #[test]
    fn rfc3339_auto_detected() {
        let parsed = parse(&format!(
            "{HDR},A,1970-01-01T00:02:00Z\nA,B,1970-01-01T00:03:20+00:00\n"
        ))
        .unwrap();
        assert_eq!(parsed.log.records()[0].timestamp, 120);
        assert_eq!(parsed.log.records()[1].timestamp, 200);
    }

    #[test]
    fn mixing_formats_is_an_error() {
        let err = parse(&format!("{HDR},A,100\nA,B,1970-01-01T00:03:20Z\n")).unwrap_err();
        match err {
            ParseError::MixedTimestampFormats { line, detected } => {
                assert_eq!(line, 3);
                assert_eq!(detected, TimestampFormat::EpochSeconds);
            }
            other => panic!("expected mixed-format error, got {other:?}"),
        }
    }

    #[test]
    fn declared_epoch_format_rejects_rfc_rows() {
        let cfg = FormatConfig {
            timestamp: TimestampFormat::EpochSeconds,
            ..Default::default()
        };
        let err =
            parse_events(format!("{HDR},A,1970-01-01T00:02:00Z\n").as_bytes(), &cfg).unwrap_err();
        assert!(matches!(err, ParseError::MixedTimestampFormats { .. }));
    }

    #[test]
    fn comments_and_empty_recipient() {
        let parsed = parse(&format!("# params: whatever\n{HDR},A,100\nA,,200\n")).unwrap();
        assert_eq!(parsed.log.len(), 1);
        assert_eq!(parsed.skipped.len(), 1);
        assert!(parsed.skipped[0].message.contains("recipient"));
    }

    #[test]
    fn equal_timestamps_keep_file_order() {
        let parsed = parse(&format!("{HDR},A,100\nA,B,100\nA,C,100\n")).unwrap();
        let recs = parsed.log.records();
        assert_eq!(recs[1].recipient, "B");
        assert_eq!(recs[2].recipient, "C");
    }

    #[test]
    fn awkward_ids_round_trip() {
        // Leading '#' (comment collision), commas, quotes.
        let log = EventLog::new(vec![
            EventRecord {
                sender: None,
                recipient: "#root".into(),
                timestamp: 1,
            },
            EventRecord {
                sender: Some("#root".into()),
                recipient: "a,b".into(),
                timestamp: 2,
            },
            EventRecord {
                sender: Some("a,b".into()),
                recipient: "q\"q".into(),
                timestamp: 3,
            },
        ]);
        let text = events_to_string(&log, &[]);
        let reparsed = parse(&text).unwrap();
        assert!(reparsed.skipped.is_empty());
        assert_eq!(reparsed.log, log);
    }
}
