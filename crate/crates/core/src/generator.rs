//! Synthetic deployment logs.
//!
//! A [`Scenario`] describes image pushes and a registry poller: pushes
//! become `create` events, and at every polling tick each package yields a
//! `fetch` event carrying the newest tag the poller can see at that moment.
//! A push can be hidden from the poller for a while with a per-tag delay.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Event, TimedDataWord, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Push {
    pub package: String,
    pub tag: String,
    /// Seconds after the scenario start.
    pub time: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub seed: u64,
    /// Unix time of offset 0.
    pub start: Timestamp,
    /// Length of the simulated window in seconds.
    pub duration: i64,
    pub packages: Vec<String>,
    pub pushes: Vec<Push>,
    pub poll_interval: i64,
    /// Inclusive bounds of the uniform per-fetch jitter, in seconds.
    pub jitter: (i64, i64),
    /// Extra seconds before a pushed tag becomes visible to the poller.
    pub delays: Vec<(String, i64)>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 1,
            start: 0,
            duration: 86_400,
            packages: Vec::new(),
            pushes: Vec::new(),
            poll_interval: 60,
            jitter: (0, 0),
            delays: Vec::new(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if self.poll_interval <= 0 {
            return invalid(format!(
                "poll_interval must be positive, got {}",
                self.poll_interval
            ));
        }
        if self.duration < 0 {
            return invalid(format!(
                "duration must be non-negative, got {}",
                self.duration
            ));
        }
        if self.start < 0 {
            return invalid(format!("start must be non-negative, got {}", self.start));
        }
        if self.jitter.0 > self.jitter.1 {
            return invalid(format!(
                "jitter {}..{} is empty",
                self.jitter.0, self.jitter.1
            ));
        }
        for p in &self.pushes {
            if !(0..=self.duration).contains(&p.time) {
                return invalid(format!(
                    "push of {} at {} is outside the scenario",
                    p.tag, p.time
                ));
            }
            if !self.packages.contains(&p.package) {
                return invalid(format!("push refers to unknown package `{}`", p.package));
            }
        }
        for (tag, d) in &self.delays {
            if *d < 0 {
                return invalid(format!("negative delay for `{tag}`"));
            }
        }
        Ok(())
    }

    fn delay_of(&self, tag: &str) -> i64 {
        self.delays
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, d)| *d)
            .unwrap_or(0)
    }

    /// Serializes to the `key = value` format read by [`parse_scenario`].
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "start = {}", self.start);
        let _ = writeln!(out, "duration_secs = {}", self.duration);
        let _ = writeln!(out, "packages = {}", self.packages.join(","));
        let _ = writeln!(out, "poll_interval = {}", self.poll_interval);
        let _ = writeln!(out, "jitter = {}..{}", self.jitter.0, self.jitter.1);
        for p in &self.pushes {
            let _ = writeln!(out, "push = {} {} {}", p.package, p.tag, p.time);
        }
        for (tag, d) in &self.delays {
            let _ = writeln!(out, "delay = {tag} {d}");
        }
        out
    }
}

/// Parses a scenario file: one `key = value` per line, `#` comments.
///
/// Keys: `seed`, `start`, `duration_secs` or `duration_days`, `packages`
/// (comma-separated), `poll_interval`, `jitter` (`lo..hi`), and the
/// repeatable `push = <package> <tag> <offset>` and `delay = <tag> <secs>`.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut s = Scenario::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| ScenarioError::Parse { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let int = |v: &str| {
            v.parse::<i64>()
                .map_err(|_| err(format!("`{key}` expects an integer, got `{v}`")))
        };
        match key {
            "seed" => {
                s.seed = value.parse().map_err(|_| {
                    err(format!("`seed` expects an unsigned integer, got `{value}`"))
                })?
            }
            "start" => s.start = int(value)?,
            "duration_secs" => s.duration = int(value)?,
            "duration_days" => s.duration = int(value)? * 86_400,
            "packages" => {
                s.packages = value
                    .split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(String::from)
                    .collect()
            }
            "poll_interval" => s.poll_interval = int(value)?,
            "jitter" => {
                let (lo, hi) = value
                    .split_once("..")
                    .ok_or_else(|| err(format!("`jitter` expects `lo..hi`, got `{value}`")))?;
                s.jitter = (int(lo.trim())?, int(hi.trim())?);
            }
            "push" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                let [package, tag, time] = parts[..] else {
                    return Err(err(format!(
                        "`push` expects `<package> <tag> <offset>`, got `{value}`"
                    )));
                };
                s.pushes.push(Push {
                    package: package.to_string(),
                    tag: tag.to_string(),
                    time: int(time)?,
                });
            }
            "delay" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                let [tag, secs] = parts[..] else {
                    return Err(err(format!(
                        "`delay` expects `<tag> <seconds>`, got `{value}`"
                    )));
                };
                s.delays.push((tag.to_string(), int(secs)?));
            }
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    s.validate()?;
    Ok(s)
}

fn random_tag(rng: &mut ChaCha8Rng, build: u32) -> String {
    let mut hex = String::with_capacity(40);
    for _ in 0..20 {
        let _ = write!(hex, "{:02x}", rng.gen::<u8>());
    }
    format!("stg-{hex}-{build}")
}

/// Produces the log of a scenario, sorted by timestamp with `create` before
/// `fetch` at equal seconds.
pub fn generate(s: &Scenario) -> Result<TimedDataWord, ScenarioError> {
    s.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let initial: Vec<String> = s.packages.iter().map(|_| random_tag(&mut rng, 0)).collect();

    // (timestamp, rank, event); rank 0 = create, 1 = fetch.
    let mut rows: Vec<(i64, u8, Event)> = Vec::new();
    let invalid = |e: crate::model::CoreError| ScenarioError::Invalid(e.to_string());
    for p in &s.pushes {
        rows.push((
            p.time,
            0,
            Event::text("create", &[&p.package, &p.tag], s.start + p.time).map_err(invalid)?,
        ));
    }

    let mut k = 1;
    while k * s.poll_interval <= s.duration {
        let base = k * s.poll_interval;
        for (pi, package) in s.packages.iter().enumerate() {
            let t = (base + rng.gen_range(s.jitter.0..=s.jitter.1)).clamp(0, s.duration);
            let latest = s
                .pushes
                .iter()
                .filter(|p| p.package == *package && p.time + s.delay_of(&p.tag) <= t)
                .max_by_key(|p| p.time)
                .map(|p| p.tag.as_str())
                .unwrap_or(&initial[pi]);
            rows.push((
                t,
                1,
                Event::text("fetch", &[package, latest], s.start + t).map_err(invalid)?,
            ));
        }
        k += 1;
    }

    rows.sort_by_key(|(t, rank, _)| (*t, *rank));
    TimedDataWord::from_events(rows.into_iter().map(|(_, _, e)| e).collect()).map_err(invalid)
}

/// Target entry counts of the 5/10/15-day presets.
pub const TARGET_ENTRY_COUNTS: [(u32, usize); 3] = [(5, 12_758), (10, 25_223), (15, 41_151)];

/// Start of the synthetic window: 2025-07-02T00:00:00Z.
pub const PRESET_START: Timestamp = 1_751_414_400;

/// A scenario sized like the deployment logs: three packages, twelve pushes
/// per five days, and a polling interval solved from the entry counts.
///
/// With `n` fetches spread over `d` seconds and `p` packages, the interval is
/// `d * p / n`: 432000*3/12746 ≈ 102, 864000*3/25199 ≈ 103,
/// 1296000*3/41115 ≈ 95. Other day counts reuse the 5-day rate.
/// One push in five is hidden from the poller for 310 s, so it is detected
/// after more than five but less than ten minutes.
pub fn preset_scenario(days: u32, seed: u64) -> Scenario {
    let poll_interval = match days {
        10 => 103,
        15 => 95,
        _ => 102,
    };
    let duration = i64::from(days) * 86_400;
    let packages: Vec<String> = ["auth-backend", "auth-frontend", "auth-example"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fd3_910e);
    let count = (12 * days / 5).max(1) as i64;
    let slot = duration / count;
    let mut pushes = Vec::new();
    let mut delays = Vec::new();
    for i in 0..count {
        let time = i * slot + rng.gen_range(slot / 4..=3 * slot / 4);
        let tag = random_tag(&mut rng, 1440 + i as u32);
        if i % 5 == 2 {
            delays.push((tag.clone(), 310));
        }
        pushes.push(Push {
            package: packages[(i as usize) % packages.len()].clone(),
            tag,
            time,
        });
    }
    Scenario {
        seed,
        start: PRESET_START,
        duration,
        packages,
        pushes,
        poll_interval,
        jitter: (0, 5),
        delays,
    }
}
