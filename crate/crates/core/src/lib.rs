//! Online symbolic monitoring of timed event logs.
//!
//! A specification written in a small timed-pattern language
//! ([`specdsl`]) is compiled into a timed automaton with symbolic data guards
//! ([`automaton`]). The [`monitor`] feeds events through it one at a time and
//! reports every accepted prefix together with the parameter valuations that
//! make it accepted. [`oracle`] holds brute-force references used to check the
//! monitor, [`generator`] produces synthetic deployment logs, and [`engine`]
//! exposes the matchers behind a common trait selected by name.

pub mod automaton;
pub mod engine;
pub mod generator;
pub mod model;
pub mod monitor;
pub mod oracle;
pub mod specdsl;

pub use automaton::{compile, describe, Automaton, CompileError};
pub use engine::{Engine, EngineConfig, EngineError, EngineRegistry, Stepper};
pub use model::{
    Conjunction, CoreError, DataValue, Event, MatchReport, ParamAtom, ParamConstraint,
    TimedDataWord, Timestamp,
};
pub use monitor::{run, MonitorError, Session};
pub use specdsl::{parse_spec, resolve, SpecAst, SpecError};
