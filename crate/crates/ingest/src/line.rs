//! The whitespace-separated event line format.

use std::io::BufRead;

use cdmon_core::{DataValue, Event, TimedDataWord, Timestamp};

use crate::IngestError;

fn valid_field(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

/// `<label> <field>... <timestamp>`, single-space separated, no newline.
pub fn format_event(e: &Event) -> Result<String, IngestError> {
    let mut out = e.label.clone();
    for (index, f) in e.fields.iter().enumerate() {
        let text = f.to_string();
        if !valid_field(&text) {
            return Err(IngestError::BadField {
                label: e.label.clone(),
                index,
                value: text,
            });
        }
        out.push(' ');
        out.push_str(&text);
    }
    out.push(' ');
    out.push_str(&e.timestamp.to_string());
    Ok(out)
}

fn timestamp(line: usize, s: &str) -> Result<Timestamp, IngestError> {
    s.parse::<Timestamp>()
        .ok()
        .filter(|t| *t >= 0)
        .ok_or_else(|| IngestError::Timestamp {
            line,
            value: s.to_string(),
        })
}

fn build(line: usize, cols: &[&str]) -> Result<Event, IngestError> {
    let (label, rest) = cols.split_first().expect("caller checks column count");
    let (ts, fields) = rest.split_last().expect("caller checks column count");
    let ts = timestamp(line, ts)?;
    Event::new(*label, fields.iter().map(DataValue::text).collect(), ts)
        .map_err(|source| IngestError::Event { line, source })
}

/// Strict `create`/`fetch` layout: exactly four columns.
pub fn parse_line(text: &str, line: usize) -> Result<Event, IngestError> {
    let cols: Vec<&str> = text.split_whitespace().collect();
    if cols.len() != 4 {
        return Err(IngestError::Columns {
            line,
            expected: "4 (label name tag timestamp)",
            found: cols.len(),
        });
    }
    build(line, &cols)
}

/// Any arity: a label, zero or more fields, and a timestamp.
pub fn parse_event_line(text: &str, line: usize) -> Result<Event, IngestError> {
    let cols: Vec<&str> = text.split_whitespace().collect();
    if cols.len() < 2 {
        return Err(IngestError::Columns {
            line,
            expected: "at least 2 (label ... timestamp)",
            found: cols.len(),
        });
    }
    build(line, &cols)
}

/// Reads a whole log. Blank lines and lines starting with `#` are skipped;
/// line numbers in errors are 1-based.
pub fn read_log<R: BufRead>(reader: R) -> Result<TimedDataWord, IngestError> {
    let mut word = TimedDataWord::new();
    for (i, text) in reader.lines().enumerate() {
        let text = text?;
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let e = parse_event_line(trimmed, i + 1)?;
        word.push(e).map_err(|source| IngestError::Event {
            line: i + 1,
            source,
        })?;
    }
    Ok(word)
}
