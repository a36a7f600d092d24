//! Brute-force reference semantics used to validate the monitor.
//!
//! Nothing here touches the automaton or the monitor: the matcher works
//! directly on expression trees with a concrete parameter valuation, and the
//! latency check is a literal reading of the create/fetch property.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{
    canonicalize, Conjunction, CoreError, DataValue, Event, MatchReport, ParamAtom, TimedDataWord,
};
use crate::specdsl::{ExprNode, Guard, GuardOp, Operand, SpecAst};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no value for global variable `{0}`")]
    MissingValuation(String),
    #[error("unknown expression `{0}`")]
    UnknownExpr(String),
    #[error(
        "event {index}: expected `create` or `fetch` with 2 fields, got `{label}` with {arity}"
    )]
    Schema {
        index: usize,
        label: String,
        arity: usize,
    },
    #[error(transparent)]
    Data(#[from] CoreError),
}

/// Concrete values for the global variables, by name.
pub type Valuation = BTreeMap<String, DataValue>;

struct Matcher<'a> {
    events: &'a [Event],
    valuation: &'a Valuation,
    defs: Option<&'a SpecAst>,
}

impl Matcher<'_> {
    /// Time at which a scope starting at position `i` is anchored.
    fn anchor(&self, i: usize) -> i64 {
        if i == 0 {
            0
        } else {
            self.events[i - 1].timestamp
        }
    }

    /// All `j` such that `e` matches `events[i..j]`.
    fn ends(&self, e: &ExprNode, i: usize) -> Result<BTreeSet<usize>, OracleError> {
        let mut out = BTreeSet::new();
        match e {
            ExprNode::EventAtom {
                signature,
                binders,
                guard,
            } => {
                if let Some(ev) = self.events.get(i) {
                    if ev.label == *signature
                        && ev.fields.len() == binders.len()
                        && match guard {
                            Some(g) => self.eval(g, binders, &ev.fields)?,
                            None => true,
                        }
                    {
                        out.insert(i + 1);
                    }
                }
            }
            ExprNode::Seq(items) => {
                let mut frontier = BTreeSet::from([i]);
                for item in items {
                    let mut nextf = BTreeSet::new();
                    for &k in &frontier {
                        nextf.extend(self.ends(item, k)?);
                    }
                    frontier = nextf;
                }
                out = frontier;
            }
            ExprNode::OneOf(branches) => {
                for b in branches {
                    out.extend(self.ends(b, i)?);
                }
            }
            ExprNode::ZeroOrMore(body) => {
                out.insert(i);
                let mut todo = vec![i];
                while let Some(k) = todo.pop() {
                    for j in self.ends(body, k)? {
                        if out.insert(j) {
                            todo.push(j);
                        }
                    }
                }
            }
            ExprNode::Within { cmp, bound, body } => {
                let anchor = self.anchor(i);
                for j in self.ends(body, i)? {
                    let last = if j > i {
                        self.events[j - 1].timestamp
                    } else {
                        anchor
                    };
                    if cmp.holds(last - anchor, *bound as i64) {
                        out.insert(j);
                    }
                }
            }
            ExprNode::Ref(name) => {
                let def = self
                    .defs
                    .and_then(|d| d.expr(name))
                    .ok_or_else(|| OracleError::UnknownExpr(name.clone()))?;
                out = self.ends(&def.body, i)?;
            }
        }
        Ok(out)
    }

    fn eval(
        &self,
        g: &Guard,
        binders: &[String],
        fields: &[DataValue],
    ) -> Result<bool, OracleError> {
        Ok(match g {
            Guard::And(a, b) => self.eval(a, binders, fields)? && self.eval(b, binders, fields)?,
            Guard::Or(a, b) => self.eval(a, binders, fields)? || self.eval(b, binders, fields)?,
            Guard::Cmp { lhs, op, rhs } => {
                let l = self.value(lhs, binders, fields)?;
                let r = self.value(rhs, binders, fields)?;
                let equal = l.try_eq(&r)?;
                match op {
                    GuardOp::Eq => equal,
                    GuardOp::Neq => !equal,
                }
            }
        })
    }

    fn value(
        &self,
        o: &Operand,
        binders: &[String],
        fields: &[DataValue],
    ) -> Result<DataValue, OracleError> {
        match o {
            Operand::Literal(s) => Ok(DataValue::text(s)),
            Operand::Ident(name) => {
                if let Some(i) = binders.iter().position(|b| b == name) {
                    Ok(fields[i].clone())
                } else {
                    self.valuation
                        .get(name)
                        .cloned()
                        .ok_or_else(|| OracleError::MissingValuation(name.clone()))
                }
            }
        }
    }
}

/// End indices (0-based, inclusive) of the non-empty prefixes of `word`
/// matched by `expr` under `valuation`. `expr` must not contain references.
pub fn naive_match(
    expr: &ExprNode,
    word: &TimedDataWord,
    valuation: &Valuation,
) -> Result<BTreeSet<usize>, OracleError> {
    prefix_ends(expr, word, valuation, None)
}

/// Like [`naive_match`], interpreting references by looking up the named
/// expressions of `defs` at match time.
pub fn naive_match_with_defs(
    expr: &ExprNode,
    defs: &SpecAst,
    word: &TimedDataWord,
    valuation: &Valuation,
) -> Result<BTreeSet<usize>, OracleError> {
    prefix_ends(expr, word, valuation, Some(defs))
}

fn prefix_ends(
    expr: &ExprNode,
    word: &TimedDataWord,
    valuation: &Valuation,
    defs: Option<&SpecAst>,
) -> Result<BTreeSet<usize>, OracleError> {
    let m = Matcher {
        events: word.events(),
        valuation,
        defs,
    };
    Ok(m.ends(expr, 0)?
        .into_iter()
        .filter(|&j| j > 0)
        .map(|j| j - 1)
        .collect())
}

/// All valuations of `globals` drawn from the data values occurring in `word`.
pub fn witnessed_valuations(globals: &[String], word: &TimedDataWord) -> Vec<Valuation> {
    let domain: BTreeSet<DataValue> = word
        .events()
        .iter()
        .flat_map(|e| e.fields.iter().cloned())
        .collect();
    let mut out = vec![Valuation::new()];
    for g in globals {
        let mut grown = Vec::with_capacity(out.len() * domain.len());
        for v in &out {
            for d in &domain {
                let mut v = v.clone();
                v.insert(g.clone(), d.clone());
                grown.push(v);
            }
        }
        out = grown;
    }
    out
}

/// Reports every prefix matched under some witnessed valuation, each with
/// the valuation pinned as `x<i> == v` atoms.
pub fn naive_reports(
    expr: &ExprNode,
    globals: &[String],
    word: &TimedDataWord,
) -> Result<Vec<MatchReport>, OracleError> {
    let mut out = Vec::new();
    for valuation in witnessed_valuations(globals, word) {
        let ends = naive_match(expr, word, &valuation)?;
        if ends.is_empty() {
            continue;
        }
        let atoms = globals
            .iter()
            .enumerate()
            .map(|(i, g)| ParamAtom::eq(i, valuation[g].clone()));
        let conj = Conjunction::from_atoms(atoms)?.expect("equalities on distinct params");
        for k in ends {
            out.push(MatchReport {
                time_point: k,
                timestamp: word.events()[k].timestamp,
                constraint: conj.clone(),
            });
        }
    }
    canonicalize(&mut out);
    Ok(out)
}

/// Direct check of the deployment-latency property: report `(k, n, g)` iff
/// some earlier `create(n, g)` at `i` has `t_k - t_i > bound` and no
/// `fetch(n, g)` occurs strictly between `i` and `k`.
pub fn latency_check(word: &TimedDataWord, bound: u64) -> Result<Vec<MatchReport>, OracleError> {
    let events = word.events();
    let mut pair_ids: HashMap<(&DataValue, &DataValue), usize> = HashMap::new();
    let mut pairs = Vec::with_capacity(events.len());
    for (index, e) in events.iter().enumerate() {
        if !(e.label == "create" || e.label == "fetch") || e.fields.len() != 2 {
            return Err(OracleError::Schema {
                index,
                label: e.label.clone(),
                arity: e.fields.len(),
            });
        }
        let next = pair_ids.len();
        pairs.push(*pair_ids.entry((&e.fields[0], &e.fields[1])).or_insert(next));
    }

    let bound = bound as i64;
    let mut out = Vec::new();
    let mut fetched_between = vec![false; pair_ids.len()];
    let mut reported = vec![false; pair_ids.len()];
    for k in 0..events.len() {
        fetched_between.iter_mut().for_each(|f| *f = false);
        reported.iter_mut().for_each(|r| *r = false);
        for i in (0..k).rev() {
            let e = &events[i];
            let p = pairs[i];
            if e.label == "fetch" {
                fetched_between[p] = true;
            } else if !fetched_between[p]
                && !reported[p]
                && events[k].timestamp - e.timestamp > bound
            {
                reported[p] = true;
                let conj = Conjunction::from_atoms([
                    ParamAtom::eq(0, e.fields[0].clone()),
                    ParamAtom::eq(1, e.fields[1].clone()),
                ])?
                .expect("two distinct parameters");
                out.push(MatchReport {
                    time_point: k,
                    timestamp: events[k].timestamp,
                    constraint: conj,
                });
            }
        }
    }
    canonicalize(&mut out);
    Ok(out)
}
