//! Opening inputs and reading event logs against a signature schema.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Lines, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use cdmon_core::specdsl::FieldType;
use cdmon_core::{DataValue, Event, SpecAst, TimedDataWord, Timestamp};
use cdmon_ingest::parse_event_line;

/// `-` is standard input.
pub fn open_input(path: &str) -> Result<Box<dyn BufRead>> {
    if path == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).with_context(|| format!("cannot open {path}"))?;
    Ok(Box::new(BufReader::new(f)))
}

/// `None` or `-` is standard output; files are truncated unless `append`.
pub fn open_output(path: Option<&str>, append: bool) -> Result<Box<dyn Write + Send>> {
    match path {
        None | Some("-") => Ok(Box::new(io::stdout())),
        Some(p) => {
            let f = OpenOptions::new()
                .write(true)
                .create(true)
                .append(append)
                .truncate(!append)
                .open(p)
                .with_context(|| format!("cannot open {p} for writing"))?;
            Ok(Box::new(f))
        }
    }
}

pub fn load_spec(path: &Path) -> Result<SpecAst> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    cdmon_core::parse_spec(&text).map_err(|e| anyhow!(e.with_file(&path.display().to_string())))
}

/// Event labels and field types a log must conform to.
#[derive(Debug, Clone)]
pub struct Schema {
    labels: Vec<(String, Vec<FieldType>)>,
}

impl Schema {
    pub fn of_spec(spec: &SpecAst) -> Self {
        Schema {
            labels: spec
                .signatures
                .iter()
                .map(|s| (s.name.clone(), s.fields.iter().map(|f| f.ty).collect()))
                .collect(),
        }
    }

    /// Two string fields each for `create` and `fetch`.
    pub fn create_fetch() -> Self {
        let two = vec![FieldType::String; 2];
        Schema {
            labels: vec![("create".into(), two.clone()), ("fetch".into(), two)],
        }
    }

    fn conform(&self, e: Event) -> Result<Event, String> {
        let Some((_, types)) = self.labels.iter().find(|(l, _)| *l == e.label) else {
            let known: Vec<&str> = self.labels.iter().map(|(l, _)| l.as_str()).collect();
            return Err(format!(
                "unknown event label `{}` (expected {})",
                e.label,
                known.join(", ")
            ));
        };
        if types.len() != e.fields.len() {
            return Err(format!(
                "`{}` expects {} field(s), got {}",
                e.label,
                types.len(),
                e.fields.len()
            ));
        }
        let mut fields = Vec::with_capacity(types.len());
        for (ty, v) in types.iter().zip(e.fields) {
            fields.push(match (ty, v) {
                (FieldType::Number, DataValue::Text(s)) => s
                    .parse::<i64>()
                    .map(DataValue::Number)
                    .map_err(|_| format!("`{s}` is not an integer"))?,
                (_, v) => v,
            });
        }
        Event::new(e.label, fields, e.timestamp).map_err(|err| err.to_string())
    }
}

/// Streams conforming events from a log, one per non-blank, non-`#` line.
/// Errors carry the input name and 1-based line number.
pub struct LogReader<R> {
    name: String,
    lines: Lines<R>,
    line: usize,
    schema: Schema,
    last: Option<Timestamp>,
}

impl<R: BufRead> LogReader<R> {
    pub fn new(name: &str, reader: R, schema: Schema) -> Self {
        LogReader {
            name: name.to_string(),
            lines: reader.lines(),
            line: 0,
            schema,
            last: None,
        }
    }

    fn at(&self, message: impl std::fmt::Display) -> anyhow::Error {
        anyhow!("{}: line {}: {message}", self.name, self.line)
    }

    fn next_event(&mut self) -> Result<Option<Event>> {
        loop {
            let Some(text) = self.lines.next() else {
                return Ok(None);
            };
            self.line += 1;
            let text = text.with_context(|| format!("{}: read failed", self.name))?;
            let trimmed = text.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let raw =
                parse_event_line(trimmed, self.line).map_err(|e| anyhow!("{}: {e}", self.name))?;
            let e = self.schema.conform(raw).map_err(|m| self.at(m))?;
            if let Some(prev) = self.last {
                if e.timestamp < prev {
                    bail!(self.at(format!(
                        "timestamp {} precedes previous timestamp {prev}",
                        e.timestamp
                    )));
                }
            }
            self.last = Some(e.timestamp);
            return Ok(Some(e));
        }
    }

    pub fn read_word(mut self) -> Result<TimedDataWord> {
        let mut events = Vec::new();
        while let Some(e) = self.next_event()? {
            events.push(e);
        }
        Ok(TimedDataWord::from_events(events)?)
    }
}

impl<R: BufRead> Iterator for LogReader<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_event().transpose()
    }
}
