//! Online symbolic monitoring.
//!
//! A [`Session`] keeps the set of live configurations of an [`Automaton`]:
//! a location, the reset time of every clock, and the constraint on the
//! global parameters under which the run is possible. Configurations that
//! agree on location and clocks are merged by disjoining their constraints.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::automaton::{Automaton, LocationId};
pub use crate::model::{canonicalize, MatchReport};
use crate::model::{Conjunction, CoreError, Event, ParamConstraint, TimedDataWord, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("event {index}: timestamp {current} precedes previous timestamp {previous}")]
    NonMonotonic {
        index: usize,
        previous: Timestamp,
        current: Timestamp,
    },
    #[error("event {index}: unknown event label `{label}`")]
    UnknownLabel { index: usize, label: String },
    #[error("event {index}: `{label}` expects {expected} field(s), got {actual}")]
    Arity {
        index: usize,
        label: String,
        expected: usize,
        actual: usize,
    },
    #[error("event {index}: {source}")]
    Data { index: usize, source: CoreError },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ConfigKey {
    location: LocationId,
    /// Reset time per clock; dead clocks are normalized to 0.
    resets: Vec<Timestamp>,
}

pub struct Session<'a> {
    automaton: &'a Automaton,
    configs: BTreeMap<ConfigKey, ParamConstraint>,
    consumed: usize,
    last_timestamp: Option<Timestamp>,
}

impl<'a> Session<'a> {
    pub fn new(automaton: &'a Automaton) -> Self {
        let mut configs = BTreeMap::new();
        configs.insert(
            ConfigKey {
                location: automaton.initial,
                resets: vec![0; automaton.num_clocks()],
            },
            ParamConstraint::top(),
        );
        Session {
            automaton,
            configs,
            consumed: 0,
            last_timestamp: None,
        }
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    /// Number of live (location, clock state) configurations.
    pub fn live_configurations(&self) -> usize {
        self.configs.len()
    }

    /// Total number of disjuncts over all live configurations.
    pub fn live_disjuncts(&self) -> usize {
        self.configs.values().map(|c| c.disjuncts().len()).sum()
    }

    /// Consumes one event and returns the reports for prefixes ending at it.
    pub fn step(&mut self, event: &Event) -> Result<Vec<MatchReport>, MonitorError> {
        let index = self.consumed;
        if let Some(previous) = self.last_timestamp {
            if event.timestamp < previous {
                return Err(MonitorError::NonMonotonic {
                    index,
                    previous,
                    current: event.timestamp,
                });
            }
        }
        let a = self.automaton;
        let label = a
            .label_index(&event.label)
            .ok_or_else(|| MonitorError::UnknownLabel {
                index,
                label: event.label.clone(),
            })?;
        let expected = a.signatures[label].1;
        if event.fields.len() != expected {
            return Err(MonitorError::Arity {
                index,
                label: event.label.clone(),
                expected,
                actual: event.fields.len(),
            });
        }

        let now = event.timestamp;
        let data_err = |source| MonitorError::Data { index, source };
        let mut guard_cache: Vec<Option<ParamConstraint>> = vec![None; a.atoms.len()];
        let mut next: BTreeMap<ConfigKey, ParamConstraint> = BTreeMap::new();
        let mut accepted: Vec<Conjunction> = Vec::new();

        for (key, constraint) in &self.configs {
            for &ti in a.outgoing(key.location, label) {
                let t = &a.transitions[ti];
                if !t
                    .clock_guard
                    .iter()
                    .all(|g| g.holds(now - key.resets[g.clock]))
                {
                    continue;
                }
                if guard_cache[t.atom].is_none() {
                    let g = a.atoms[t.atom]
                        .guard
                        .instantiate(&event.fields)
                        .map_err(data_err)?;
                    guard_cache[t.atom] = Some(g);
                }
                let guard = guard_cache[t.atom].as_ref().expect("filled above");
                if !guard.is_satisfiable() {
                    continue;
                }
                let combined = constraint.conjoin(guard).map_err(data_err)?;
                if !combined.is_satisfiable() {
                    continue;
                }
                if a.is_accepting(t.target) {
                    accepted.extend(combined.disjuncts().iter().cloned());
                    continue;
                }
                let mut resets = key.resets.clone();
                for &c in &t.resets {
                    resets[c] = now;
                }
                for (c, r) in resets.iter_mut().enumerate() {
                    if !a.is_clock_live(t.target, c) {
                        *r = 0;
                    }
                }
                let target_key = ConfigKey {
                    location: t.target,
                    resets,
                };
                match next.get_mut(&target_key) {
                    Some(existing) => *existing = existing.disjoin(&combined),
                    None => {
                        next.insert(target_key, combined);
                    }
                }
            }
        }

        self.configs = next;
        self.consumed += 1;
        self.last_timestamp = Some(now);

        let mut reports: Vec<MatchReport> = ParamConstraint::any_of(accepted)
            .disjuncts()
            .iter()
            .map(|c| MatchReport {
                time_point: index,
                timestamp: now,
                constraint: c.clone(),
            })
            .collect();
        canonicalize(&mut reports);
        Ok(reports)
    }
}

/// Runs a whole word through a fresh session.
pub fn run(automaton: &Automaton, word: &TimedDataWord) -> Result<Vec<MatchReport>, MonitorError> {
    let mut session = Session::new(automaton);
    let mut out = Vec::new();
    for e in word.events() {
        out.extend(session.step(e)?);
    }
    Ok(out)
}
