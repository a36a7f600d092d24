//! Subcommands of the `cdmon` executable, written against plain readers and
//! writers so they can be driven from tests without a process.

pub mod input;

use std::io::{BufRead, Write};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use cdmon_core::generator::{generate, Scenario};
use cdmon_core::oracle::latency_check;
use cdmon_core::{Engine, EngineConfig, EngineRegistry, MatchReport, SpecAst, TimedDataWord};
use cdmon_ingest::collector::{bind, local_addr, serve, LineSink};
use cdmon_ingest::{format_event, read_records, FollowStats, SourceRegistry};

use crate::input::{open_input, LogReader, Schema};

pub fn write_reports(out: &mut dyn Write, reports: &[MatchReport]) -> Result<()> {
    for r in reports {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

/// Runs `engine` over a log and prints one line per report. Engines that
/// support it report while reading, so a live stream works as input.
/// Returns the number of reports.
pub fn monitor(
    spec: &SpecAst,
    engine: &str,
    bound: Option<u64>,
    log_name: &str,
    log: impl BufRead,
    out: &mut dyn Write,
) -> Result<usize> {
    let engine = EngineRegistry::with_builtins()
        .create(engine, &EngineConfig::new(spec.clone()).with_bound(bound))?;
    let reader = LogReader::new(log_name, log, Schema::of_spec(spec));
    if let Some(mut stepper) = engine.stepper() {
        let mut count = 0;
        for event in reader {
            let reports = stepper.step(&event?)?;
            if !reports.is_empty() {
                write_reports(out, &reports)?;
                out.flush()?;
                count += reports.len();
            }
        }
        return Ok(count);
    }
    let word = reader.read_word()?;
    let reports = engine.run(&word)?;
    write_reports(out, &reports)?;
    Ok(reports.len())
}

/// The direct create/fetch latency check, printed like `monitor`.
pub fn oracle(bound: u64, log_name: &str, log: impl BufRead, out: &mut dyn Write) -> Result<usize> {
    let word = LogReader::new(log_name, log, Schema::create_fetch()).read_word()?;
    let reports = latency_check(&word, bound)?;
    write_reports(out, &reports)?;
    Ok(reports.len())
}

pub fn write_word(out: &mut dyn Write, word: &TimedDataWord) -> Result<()> {
    for e in word.events() {
        writeln!(out, "{}", format_event(e)?)?;
    }
    Ok(())
}

/// Writes the log of a scenario; returns the number of entries.
pub fn generate_log(scenario: &Scenario, out: &mut dyn Write) -> Result<usize> {
    let word = generate(scenario)?;
    write_word(out, &word)?;
    Ok(word.len())
}

/// Converts raw records from named sources and writes the merged log.
/// `inputs` pairs a source name with a path. Any bad record is fatal.
pub fn preprocess(inputs: &[(String, String)], rebase: bool, out: &mut dyn Write) -> Result<usize> {
    let registry = SourceRegistry::with_builtins();
    let mut sources = Vec::new();
    for (source, path) in inputs {
        let (rank, parser) = registry.get(source)?;
        let records =
            read_records(open_input(path)?, parser).map_err(|e| anyhow!("{path}: {e}"))?;
        let mut events = Vec::new();
        for (i, r) in records.into_iter().enumerate() {
            match r {
                Ok(Some(e)) => events.push(e),
                Ok(None) => {}
                Err(e) => return Err(anyhow!("{path}: record {}: {e}", i + 1)),
            }
        }
        sources.push((rank, events));
    }
    let events = cdmon_ingest::preprocess(sources, rebase);
    for e in &events {
        writeln!(out, "{}", format_event(e)?)?;
    }
    Ok(events.len())
}

/// Converts a live stream of one source. Bad lines are reported on stderr
/// and skipped.
pub fn follow(
    source: &str,
    name: &str,
    input: impl BufRead,
    out: impl Write,
) -> Result<FollowStats> {
    let registry = SourceRegistry::with_builtins();
    let (_, parser) = registry.get(source)?;
    Ok(cdmon_ingest::follow(input, out, parser, |line, e| {
        eprintln!("{name}: line {line}: {e}");
    })?)
}

/// Receives webhooks on `addr` until interrupted.
pub fn collect(addr: &str, out: Box<dyn Write + Send>) -> Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        eprintln!("listening on http://{}/webhook", local_addr(&listener)?);
        serve(listener, LineSink::new(out), async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub entries: usize,
    pub reports: usize,
    pub millis: f64,
}

/// Median wall time of `runs` engine runs over an already loaded word.
pub fn bench(engine: &dyn Engine, word: &TimedDataWord, runs: usize) -> Result<BenchRow> {
    let mut times = Vec::with_capacity(runs);
    let mut reports = 0;
    for _ in 0..runs.max(1) {
        let start = Instant::now();
        reports = engine.run(word)?.len();
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    Ok(BenchRow {
        entries: word.len(),
        reports,
        millis: times[times.len() / 2],
    })
}

pub fn write_bench_table(out: &mut dyn Write, rows: &[BenchRow]) -> Result<()> {
    writeln!(out, "{:>8} {:>8} {:>10}", "entries", "reports", "ms")?;
    for r in rows {
        writeln!(out, "{:>8} {:>8} {:>10.1}", r.entries, r.reports, r.millis)?;
    }
    Ok(())
}
