//! Named matching engines.
//!
//! Every engine turns a timed data word into match reports for one
//! specification. The symbolic monitor is the production engine; the other
//! built-ins are brute-force references kept selectable so their output can
//! be diffed against it from the command line.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::automaton::{compile, Automaton, CompileError};
use crate::model::{Event, MatchReport, TimedDataWord};
use crate::monitor::{self, MonitorError, Session};
use crate::oracle::{self, OracleError};
use crate::specdsl::{self, ExprNode, SpecAst};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown engine `{name}` (available: {available})")]
    Unknown { name: String, available: String },
    #[error("engine `{engine}`: {message}")]
    Config {
        engine: &'static str,
        message: String,
    },
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub trait Engine: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, word: &TimedDataWord) -> Result<Vec<MatchReport>, EngineError>;

    /// An incremental matcher, for engines that can report while reading.
    fn stepper(&self) -> Option<Box<dyn Stepper + '_>> {
        None
    }
}

/// Consumes events one at a time; the concatenated outputs equal `run`.
pub trait Stepper {
    fn step(&mut self, event: &Event) -> Result<Vec<MatchReport>, EngineError>;
}

impl Stepper for Session<'_> {
    fn step(&mut self, event: &Event) -> Result<Vec<MatchReport>, EngineError> {
        Ok(Session::step(self, event)?)
    }
}

/// What an engine is built from.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub spec: SpecAst,
    /// Replaces every `within` bound of the specification.
    pub bound: Option<u64>,
}

impl EngineConfig {
    pub fn new(spec: SpecAst) -> Self {
        EngineConfig { spec, bound: None }
    }

    pub fn with_bound(mut self, bound: Option<u64>) -> Self {
        self.bound = bound;
        self
    }

    /// The specification with the bound override applied.
    pub fn effective_spec(&self) -> SpecAst {
        match self.bound {
            Some(b) => self.spec.clone().with_bound(b),
            None => self.spec.clone(),
        }
    }
}

pub type EngineFactory = fn(&EngineConfig) -> Result<Box<dyn Engine>, EngineError>;

pub struct EngineRegistry {
    entries: BTreeMap<&'static str, (&'static str, EngineFactory)>,
}

impl EngineRegistry {
    pub fn empty() -> Self {
        EngineRegistry {
            entries: BTreeMap::new(),
        }
    }

    /// `symbolic`, `latency` and `naive`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(
            "symbolic",
            "compiled automaton with symbolic parameter constraints",
            SymbolicEngine::create,
        );
        r.register(
            "latency",
            "direct create/fetch latency check (create/fetch logs only)",
            LatencyEngine::create,
        );
        r.register(
            "naive",
            "recursive matcher over every witnessed valuation (tiny logs only)",
            NaiveEngine::create,
        );
        r
    }

    pub fn register(
        &mut self,
        name: &'static str,
        description: &'static str,
        factory: EngineFactory,
    ) {
        self.entries.insert(name, (description, factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn describe(&self, name: &str) -> Option<&'static str> {
        self.entries.get(name).map(|(d, _)| *d)
    }

    pub fn create(
        &self,
        name: &str,
        config: &EngineConfig,
    ) -> Result<Box<dyn Engine>, EngineError> {
        match self.entries.get(name) {
            Some((_, factory)) => factory(config),
            None => Err(EngineError::Unknown {
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }
}

impl Default for EngineRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

pub struct SymbolicEngine {
    automaton: Automaton,
}

impl SymbolicEngine {
    fn create(config: &EngineConfig) -> Result<Box<dyn Engine>, EngineError> {
        let spec = config.effective_spec();
        let automaton = compile(&specdsl::resolve(&spec), &spec)?;
        Ok(Box::new(SymbolicEngine { automaton }))
    }

    pub fn automaton(&self) -> &Automaton {
        &self.automaton
    }
}

impl Engine for SymbolicEngine {
    fn name(&self) -> &'static str {
        "symbolic"
    }

    fn run(&self, word: &TimedDataWord) -> Result<Vec<MatchReport>, EngineError> {
        Ok(monitor::run(&self.automaton, word)?)
    }

    fn stepper(&self) -> Option<Box<dyn Stepper + '_>> {
        Some(Box::new(Session::new(&self.automaton)))
    }
}

pub struct LatencyEngine {
    bound: u64,
}

impl LatencyEngine {
    fn create(config: &EngineConfig) -> Result<Box<dyn Engine>, EngineError> {
        let err = |message: String| EngineError::Config {
            engine: "latency",
            message,
        };
        let spec = &config.spec;
        for name in ["create", "fetch"] {
            match spec.signature(name) {
                Some(sig) if sig.arity() == 2 => {}
                _ => return Err(err(format!("needs a `{name}` signature with two fields"))),
            }
        }
        if spec.vars.len() != 2 {
            return Err(err("needs exactly two global variables".into()));
        }
        let bound = match config.bound {
            Some(b) => b,
            None => {
                let mut bounds = Vec::new();
                collect_bounds(&specdsl::resolve(spec), &mut bounds);
                match bounds[..] {
                    [b] => b,
                    _ => {
                        return Err(err(format!(
                            "needs exactly one `within` bound or --bound, found {}",
                            bounds.len()
                        )))
                    }
                }
            }
        };
        Ok(Box::new(LatencyEngine { bound }))
    }
}

fn collect_bounds(e: &ExprNode, out: &mut Vec<u64>) {
    match e {
        ExprNode::EventAtom { .. } | ExprNode::Ref(_) => {}
        ExprNode::Seq(xs) | ExprNode::OneOf(xs) => xs.iter().for_each(|x| collect_bounds(x, out)),
        ExprNode::ZeroOrMore(b) => collect_bounds(b, out),
        ExprNode::Within { bound, body, .. } => {
            out.push(*bound);
            collect_bounds(body, out);
        }
    }
}

impl Engine for LatencyEngine {
    fn name(&self) -> &'static str {
        "latency"
    }

    fn run(&self, word: &TimedDataWord) -> Result<Vec<MatchReport>, EngineError> {
        Ok(oracle::latency_check(word, self.bound)?)
    }
}

pub struct NaiveEngine {
    expr: ExprNode,
    globals: Vec<String>,
}

impl NaiveEngine {
    fn create(config: &EngineConfig) -> Result<Box<dyn Engine>, EngineError> {
        let spec = config.effective_spec();
        Ok(Box::new(NaiveEngine {
            expr: specdsl::resolve(&spec),
            globals: spec.vars.iter().map(|v| v.name.clone()).collect(),
        }))
    }
}

impl Engine for NaiveEngine {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn run(&self, word: &TimedDataWord) -> Result<Vec<MatchReport>, EngineError> {
        Ok(oracle::naive_reports(&self.expr, &self.globals, word)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Event;
    use crate::specdsl::parse_spec;

    fn config() -> EngineConfig {
        EngineConfig::new(parse_spec(include_str!("../specs/failed_5min.symon")).unwrap())
    }

    #[test]
    fn builtins_are_registered() {
        let r = EngineRegistry::with_builtins();
        assert_eq!(
            r.names().collect::<Vec<_>>(),
            ["latency", "naive", "symbolic"]
        );
        assert!(matches!(
            r.create("nope", &config()),
            Err(EngineError::Unknown { .. })
        ));
    }

    #[test]
    fn engines_agree_on_a_small_log() {
        let word = TimedDataWord::from_events(vec![
            Event::text("create", &["a", "t"], 0).unwrap(),
            Event::text("fetch", &["b", "u"], 150).unwrap(),
            Event::text("create", &["b", "u"], 200).unwrap(),
            Event::text("fetch", &["b", "u"], 320).unwrap(),
            Event::text("fetch", &["a", "t"], 340).unwrap(),
        ])
        .unwrap();
        let r = EngineRegistry::with_builtins();
        let outputs: Vec<Vec<String>> = ["symbolic", "latency", "naive"]
            .iter()
            .map(|name| {
                let engine = r.create(name, &config()).unwrap();
                assert_eq!(engine.name(), *name);
                engine
                    .run(&word)
                    .unwrap()
                    .iter()
                    .map(ToString::to_string)
                    .collect()
            })
            .collect();
        assert_eq!(outputs[0].len(), 2);
        let symbolic = r.create("symbolic", &config()).unwrap();
        let mut stepper = symbolic.stepper().unwrap();
        let stepped: Vec<String> = word
            .events()
            .iter()
            .flat_map(|e| stepper.step(e).unwrap())
            .map(|r| r.to_string())
            .collect();
        assert_eq!(stepped, outputs[0]);
        assert!(r.create("latency", &config()).unwrap().stepper().is_none());
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }

    #[test]
    fn latency_takes_bound_from_spec_or_override() {
        let word = TimedDataWord::from_events(vec![
            Event::text("create", &["a", "t"], 0).unwrap(),
            Event::text("fetch", &["b", "u"], 400).unwrap(),
        ])
        .unwrap();
        let r = EngineRegistry::with_builtins();
        let e = r.create("latency", &config()).unwrap();
        assert_eq!(e.run(&word).unwrap().len(), 1);
        let e = r
            .create("latency", &config().with_bound(Some(600)))
            .unwrap();
        assert!(e.run(&word).unwrap().is_empty());
    }

    #[test]
    fn latency_rejects_foreign_specs() {
        let spec = parse_spec("signature a { x: string; } a(x)").unwrap();
        let r = EngineRegistry::with_builtins();
        assert!(matches!(
            r.create("latency", &EngineConfig::new(spec)),
            Err(EngineError::Config { .. })
        ));
    }
}
