use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use cdmon_cli::input::{load_spec, open_input, open_output, LogReader, Schema};
use cdmon_core::generator::{parse_scenario, preset_scenario};
use cdmon_core::{compile, describe, resolve, EngineConfig, EngineRegistry};
use clap::{Parser, Subcommand, ValueEnum};

/// Online monitoring of timed event logs against parametric timed patterns.
#[derive(Parser)]
#[command(name = "cdmon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report every log prefix matching the specification.
    /// Exit status: 0 no reports, 1 reports, 2 error.
    Monitor {
        #[arg(long)]
        spec: PathBuf,
        /// Replace every `within` bound, in seconds.
        #[arg(long)]
        bound: Option<u64>,
        /// Matching engine (see `cdmon engines`).
        #[arg(long, default_value = "symbolic")]
        engine: String,
        /// Event log, `-` for stdin.
        #[arg(default_value = "-")]
        log: String,
    },
    /// Check the create/fetch latency property directly, without a specification.
    Oracle {
        #[arg(long, default_value_t = 300)]
        bound: u64,
        #[arg(default_value = "-")]
        log: String,
    },
    /// Convert webhook payloads and poller logs into one event log.
    Preprocess {
        /// Webhook payload file (repeatable).
        #[arg(long)]
        webhook: Vec<String>,
        /// Poller log file (repeatable).
        #[arg(long)]
        fluxcd: Vec<String>,
        /// Shift timestamps so the first event is at 0.
        #[arg(long)]
        rebase: bool,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Accept webhooks over HTTP and append one event line per push.
    Collect {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        /// Appended to; stdout when absent.
        #[arg(long)]
        output: Option<String>,
    },
    /// Convert a live line-delimited JSON stream into event lines.
    Follow {
        #[arg(long, default_value = "fluxcd")]
        source: String,
        #[arg(default_value = "-")]
        input: String,
    },
    /// Generate a synthetic deployment log.
    Generate {
        #[arg(
            long,
            conflicts_with = "scenario",
            required_unless_present = "scenario"
        )]
        preset: Option<Preset>,
        /// Scenario file of key=value lines.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Time the matching engine: entries, reports and median milliseconds per log.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        bound: Option<u64>,
        #[arg(long, default_value = "symbolic")]
        engine: String,
        /// Also time a generated preset log (repeatable).
        #[arg(long)]
        preset: Vec<Preset>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        logs: Vec<String>,
    },
    /// Print the compiled automaton.
    Describe {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        bound: Option<u64>,
    },
    /// List the available matching engines.
    Engines,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    #[value(name = "5d")]
    Days5,
    #[value(name = "10d")]
    Days10,
    #[value(name = "15d")]
    Days15,
}

impl Preset {
    fn days(self) -> u32 {
        match self {
            Preset::Days5 => 5,
            Preset::Days10 => 10,
            Preset::Days15 => 15,
        }
    }
}

/// Number of reports for commands whose exit status depends on it.
fn execute(command: Command) -> Result<Option<usize>> {
    let stdout = io::stdout();
    match command {
        Command::Monitor {
            spec,
            bound,
            engine,
            log,
        } => {
            let spec = load_spec(&spec)?;
            let n = cdmon_cli::monitor(
                &spec,
                &engine,
                bound,
                &log,
                open_input(&log)?,
                &mut stdout.lock(),
            )?;
            Ok(Some(n))
        }
        Command::Oracle { bound, log } => {
            let n = cdmon_cli::oracle(bound, &log, open_input(&log)?, &mut stdout.lock())?;
            Ok(Some(n))
        }
        Command::Preprocess {
            webhook,
            fluxcd,
            rebase,
            output,
        } => {
            if webhook.is_empty() && fluxcd.is_empty() {
                bail!("nothing to do: give --webhook and/or --fluxcd");
            }
            let inputs: Vec<(String, String)> = webhook
                .into_iter()
                .map(|p| ("webhook".to_string(), p))
                .chain(fluxcd.into_iter().map(|p| ("fluxcd".to_string(), p)))
                .collect();
            let mut out = io::BufWriter::new(open_output(output.as_deref(), false)?);
            cdmon_cli::preprocess(&inputs, rebase, &mut out)?;
            out.flush()?;
            Ok(None)
        }
        Command::Collect { bind, output } => {
            cdmon_cli::collect(&bind, open_output(output.as_deref(), true)?)?;
            Ok(None)
        }
        Command::Follow { source, input } => {
            let stats = cdmon_cli::follow(&source, &input, open_input(&input)?, stdout.lock())?;
            eprintln!(
                "{} records: {} emitted, {} skipped, {} rejected",
                stats.records, stats.emitted, stats.skipped, stats.rejected
            );
            Ok(None)
        }
        Command::Generate {
            preset,
            scenario,
            seed,
            output,
        } => {
            let mut s = match (preset, scenario) {
                (Some(p), _) => preset_scenario(p.days(), seed.unwrap_or(1)),
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path)?;
                    parse_scenario(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let mut out = io::BufWriter::new(open_output(output.as_deref(), false)?);
            cdmon_cli::generate_log(&s, &mut out)?;
            out.flush()?;
            Ok(None)
        }
        Command::Bench {
            spec,
            bound,
            engine,
            preset,
            seed,
            runs,
            logs,
        } => {
            let spec = load_spec(&spec)?;
            let engine = EngineRegistry::with_builtins()
                .create(&engine, &EngineConfig::new(spec.clone()).with_bound(bound))?;
            let mut rows = Vec::new();
            for log in &logs {
                let word =
                    LogReader::new(log, open_input(log)?, Schema::of_spec(&spec)).read_word()?;
                rows.push(cdmon_cli::bench(engine.as_ref(), &word, runs)?);
            }
            for p in preset {
                let word = cdmon_core::generator::generate(&preset_scenario(p.days(), seed))?;
                rows.push(cdmon_cli::bench(engine.as_ref(), &word, runs)?);
            }
            cdmon_cli::write_bench_table(&mut stdout.lock(), &rows)?;
            Ok(None)
        }
        Command::Describe { spec, bound } => {
            let mut spec = load_spec(&spec)?;
            if let Some(b) = bound {
                spec = spec.with_bound(b);
            }
            print!("{}", describe(&compile(&resolve(&spec), &spec)?));
            Ok(None)
        }
        Command::Engines => {
            let registry = EngineRegistry::with_builtins();
            for name in registry.names() {
                println!("{name:<10} {}", registry.describe(name).unwrap_or_default());
            }
            Ok(None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Some(n)) if n > 0 => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cdmon: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
}
