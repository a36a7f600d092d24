//! Batch and streaming conversion of raw records.

use std::io::{BufRead, Read, Write};

use cdmon_core::Event;
use serde_json::Value;

use crate::line::format_event;
use crate::source::SourceParser;
use crate::IngestError;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FollowStats {
    pub records: usize,
    pub emitted: usize,
    pub skipped: usize,
    pub rejected: usize,
}

/// Streams line-delimited JSON through `parser`, writing one event line per
/// match. Bad records are reported through `on_reject` with their 1-based
/// line number and do not stop the stream.
pub fn follow<R, W, F>(
    input: R,
    mut output: W,
    parser: &dyn SourceParser,
    mut on_reject: F,
) -> Result<FollowStats, IngestError>
where
    R: BufRead,
    W: Write,
    F: FnMut(usize, &IngestError),
{
    let mut stats = FollowStats::default();
    for (i, text) in input.lines().enumerate() {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        stats.records += 1;
        let event = serde_json::from_str::<Value>(&text)
            .map_err(IngestError::from)
            .and_then(|v| parser.parse(&v))
            .and_then(|e| e.map(|e| format_event(&e)).transpose());
        match event {
            Ok(Some(line)) => {
                writeln!(output, "{line}")?;
                output.flush()?;
                stats.emitted += 1;
            }
            Ok(None) => stats.skipped += 1,
            Err(e) => {
                stats.rejected += 1;
                on_reject(i + 1, &e);
            }
        }
    }
    Ok(stats)
}

/// Reads a file of JSON objects, one per line or pretty-printed and
/// concatenated. Returns each record's parse result in input order.
pub fn read_records<R: Read>(
    input: R,
    parser: &dyn SourceParser,
) -> Result<Vec<Result<Option<Event>, IngestError>>, IngestError> {
    let mut out = Vec::new();
    for value in serde_json::Deserializer::from_reader(input).into_iter::<Value>() {
        out.push(parser.parse(&value?));
    }
    Ok(out)
}

/// Merges per-source event lists by timestamp. Ties keep the order of
/// `sources` (lower rank first), then input order.
pub fn merge(sources: Vec<(usize, Vec<Event>)>) -> Vec<Event> {
    let mut all: Vec<(usize, Event)> = sources
        .into_iter()
        .flat_map(|(rank, events)| events.into_iter().map(move |e| (rank, e)))
        .collect();
    all.sort_by_key(|(rank, e)| (e.timestamp, *rank));
    all.into_iter().map(|(_, e)| e).collect()
}

/// Converts and merges several sources. `rebase` shifts all timestamps so
/// that the first event is at 0.
pub fn preprocess(sources: Vec<(usize, Vec<Event>)>, rebase: bool) -> Vec<Event> {
    let mut events = merge(sources);
    if rebase {
        if let Some(first) = events.first().map(|e| e.timestamp) {
            for e in &mut events {
                e.timestamp -= first;
            }
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{FluxcdSource, WebhookSource};

    fn poll(ts: &str, name: &str, tag: &str) -> String {
        format!(
            r#"{{"level":"info","ts":"{ts}","msg":"Latest image tag for ghcr.io/o/{name} resolved to {tag}"}}"#
        )
    }

    #[test]
    fn follow_counts_matches_and_skips() {
        let input = [
            poll("2025-07-03T07:06:59Z", "a", "t1"),
            r#"{"level":"info","ts":"2025-07-03T07:07:00Z","msg":"no updates"}"#.to_string(),
            poll("2025-07-03T07:08:00Z", "b", "t2"),
            r#"{"level":"info","ts":"2025-07-03T07:09:00Z","msg":"reconciling"}"#.to_string(),
            poll("2025-07-03T07:10:00Z", "a", "t3"),
        ]
        .join("\n");
        let mut out = Vec::new();
        let stats = follow(input.as_bytes(), &mut out, &FluxcdSource, |_, _| {}).unwrap();
        assert_eq!((stats.emitted, stats.skipped, stats.rejected), (3, 2, 0));
        let out = String::from_utf8(out).unwrap();
        assert_eq!(out.lines().next(), Some("fetch a t1 1751526419"));
        assert!(out.lines().all(|l| l.starts_with("fetch ")));
    }

    #[test]
    fn follow_survives_bad_lines() {
        let input = format!("not json\n\n{}\n", poll("2025-07-03T07:06:59Z", "a", "t"));
        let mut out = Vec::new();
        let mut bad = Vec::new();
        let stats = follow(input.as_bytes(), &mut out, &FluxcdSource, |n, _| {
            bad.push(n)
        })
        .unwrap();
        assert_eq!((stats.emitted, stats.rejected), (1, 1));
        assert_eq!(bad, [1]);
        let mut out = Vec::new();
        assert_eq!(
            follow(&b""[..], &mut out, &FluxcdSource, |_, _| {}).unwrap(),
            FollowStats::default()
        );
        assert!(out.is_empty());
    }

    #[test]
    fn records_may_be_pretty_printed() {
        let text = "{\n \"time\": \"2025-07-02T02:50:46Z\",\n \"package_name\": \"a\",\n \"package_tag\": \"t\"\n}\n{\"time\":\"2025-07-02T02:50:47Z\",\"package_name\":\"b\",\"package_tag\":\"u\"}";
        let recs = read_records(text.as_bytes(), &WebhookSource).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| matches!(r, Ok(Some(_)))));
    }

    #[test]
    fn merge_is_stable_with_source_rank() {
        let ev = |l: &str, n: &str, ts| Event::text(l, &[n, "t"], ts).unwrap();
        let merged = preprocess(
            vec![
                (1, vec![ev("fetch", "x", 5), ev("fetch", "y", 10)]),
                (0, vec![ev("create", "z", 10), ev("create", "w", 12)]),
            ],
            false,
        );
        let names: Vec<String> = merged.iter().map(|e| e.fields[0].to_string()).collect();
        assert_eq!(names, ["x", "z", "y", "w"]);
        let rebased = preprocess(
            vec![(0, vec![ev("create", "a", 100), ev("fetch", "a", 160)])],
            true,
        );
        assert_eq!(
            rebased.iter().map(|e| e.timestamp).collect::<Vec<_>>(),
            [0, 60]
        );
    }
}
