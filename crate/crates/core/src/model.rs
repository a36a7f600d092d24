//! Timed data words and symbolic parameter constraints.
//!
//! A [`TimedDataWord`] is the monitor's input: a timestamp-ordered sequence of
//! [`Event`]s, each carrying a label from a finite alphabet and a list of data
//! values. A [`ParamConstraint`] describes a set of valuations of the global
//! parameters as a disjunction of conjunctions of `x == v` / `x != v` atoms.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Seconds since the Unix epoch (or since an arbitrary origin after rebasing).
pub type Timestamp = i64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoreError {
    #[error("type mismatch: cannot compare {left} with {right}")]
    TypeMismatch { left: DataValue, right: DataValue },
    #[error("invalid event label {0:?}: labels must be non-empty and contain no whitespace")]
    InvalidLabel(String),
    #[error("negative timestamp {0}")]
    NegativeTimestamp(Timestamp),
    #[error("timestamp {current} precedes previous timestamp {previous}")]
    NonMonotonic {
        previous: Timestamp,
        current: Timestamp,
    },
}

/// A value carried by an event field or bound to a parameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataValue {
    Text(Arc<str>),
    /// Reserved. Parsed but rejected by the compiler.
    Number(i64),
}

impl DataValue {
    pub fn text(s: impl AsRef<str>) -> Self {
        DataValue::Text(Arc::from(s.as_ref()))
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            DataValue::Text(s) => Some(s),
            DataValue::Number(_) => None,
        }
    }

    fn same_variant(&self, other: &DataValue) -> bool {
        matches!(
            (self, other),
            (DataValue::Text(_), DataValue::Text(_)) | (DataValue::Number(_), DataValue::Number(_))
        )
    }

    /// Equality that refuses to compare values of different variants.
    pub fn try_eq(&self, other: &DataValue) -> Result<bool, CoreError> {
        if !self.same_variant(other) {
            return Err(CoreError::TypeMismatch {
                left: self.clone(),
                right: other.clone(),
            });
        }
        Ok(self == other)
    }
}

impl fmt::Display for DataValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataValue::Text(s) => f.write_str(s),
            DataValue::Number(n) => write!(f, "{n}"),
        }
    }
}

impl From<&str> for DataValue {
    fn from(s: &str) -> Self {
        DataValue::text(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    pub label: String,
    pub fields: Vec<DataValue>,
    pub timestamp: Timestamp,
}

impl Event {
    pub fn new(
        label: impl Into<String>,
        fields: Vec<DataValue>,
        timestamp: Timestamp,
    ) -> Result<Self, CoreError> {
        let label = label.into();
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(CoreError::InvalidLabel(label));
        }
        if timestamp < 0 {
            return Err(CoreError::NegativeTimestamp(timestamp));
        }
        Ok(Event {
            label,
            fields,
            timestamp,
        })
    }

    /// Shorthand for an event whose fields are all text.
    pub fn text(label: &str, fields: &[&str], timestamp: Timestamp) -> Result<Self, CoreError> {
        Event::new(
            label,
            fields.iter().map(DataValue::text).collect(),
            timestamp,
        )
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        for field in &self.fields {
            write!(f, " {field}")?;
        }
        write!(f, " {}", self.timestamp)
    }
}

/// A sequence of events with non-decreasing timestamps.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TimedDataWord {
    events: Vec<Event>,
}

impl TimedDataWord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<Event>) -> Result<Self, CoreError> {
        let mut word = TimedDataWord::new();
        for e in events {
            word.push(e)?;
        }
        Ok(word)
    }

    /// Appends an event. Fails if its timestamp is earlier than the last one.
    pub fn push(&mut self, event: Event) -> Result<(), CoreError> {
        if let Some(last) = self.events.last() {
            if event.timestamp < last.timestamp {
                return Err(CoreError::NonMonotonic {
                    previous: last.timestamp,
                    current: event.timestamp,
                });
            }
        }
        self.events.push(event);
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomOp {
    Eq,
    Neq,
}

impl fmt::Display for AtomOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AtomOp::Eq => "==",
            AtomOp::Neq => "!=",
        })
    }
}

/// `x<param> op value`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParamAtom {
    pub param: usize,
    pub op: AtomOp,
    pub value: DataValue,
}

impl ParamAtom {
    pub fn eq(param: usize, value: impl Into<DataValue>) -> Self {
        ParamAtom {
            param,
            op: AtomOp::Eq,
            value: value.into(),
        }
    }

    pub fn neq(param: usize, value: impl Into<DataValue>) -> Self {
        ParamAtom {
            param,
            op: AtomOp::Neq,
            value: value.into(),
        }
    }
}

/// What a single conjunction says about one parameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum ParamState {
    Equal(DataValue),
    /// Non-empty set of excluded values.
    Excludes(BTreeSet<DataValue>),
}

impl ParamState {
    fn variant_witness(&self) -> &DataValue {
        match self {
            ParamState::Equal(v) => v,
            ParamState::Excludes(set) => set.iter().next().expect("non-empty exclusion set"),
        }
    }

    /// Whether every valuation allowed by `self` is allowed by `other`.
    fn implies(&self, other: &ParamState) -> bool {
        match (self, other) {
            (ParamState::Equal(a), ParamState::Equal(b)) => a == b,
            (ParamState::Equal(a), ParamState::Excludes(bs)) => !bs.contains(a),
            (ParamState::Excludes(_), ParamState::Equal(_)) => false,
            (ParamState::Excludes(a), ParamState::Excludes(b)) => b.is_subset(a),
        }
    }
}

/// A satisfiable conjunction of atoms, stored per parameter in index order.
///
/// An equality on a parameter absorbs every disequality on it, so two
/// conjunctions denoting the same valuations have the same representation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Conjunction {
    params: Vec<(usize, ParamState)>,
}

impl Conjunction {
    /// The empty conjunction (`true`).
    pub fn top() -> Self {
        Self::default()
    }

    /// Builds a conjunction from atoms; `Ok(None)` if they are contradictory.
    pub fn from_atoms<I>(atoms: I) -> Result<Option<Self>, CoreError>
    where
        I: IntoIterator<Item = ParamAtom>,
    {
        let mut conj = Conjunction::top();
        for atom in atoms {
            if !conj.add(atom)? {
                return Ok(None);
            }
        }
        Ok(Some(conj))
    }

    pub fn is_top(&self) -> bool {
        self.params.is_empty()
    }

    /// Adds an atom in place. Returns `false` if the conjunction became
    /// unsatisfiable, in which case `self` must be discarded.
    pub fn add(&mut self, atom: ParamAtom) -> Result<bool, CoreError> {
        let pos = self.params.binary_search_by_key(&atom.param, |(p, _)| *p);
        let idx = match pos {
            Err(idx) => {
                let state = match atom.op {
                    AtomOp::Eq => ParamState::Equal(atom.value),
                    AtomOp::Neq => ParamState::Excludes(BTreeSet::from([atom.value])),
                };
                self.params.insert(idx, (atom.param, state));
                return Ok(true);
            }
            Ok(idx) => idx,
        };
        let state = &mut self.params[idx].1;
        let witness = state.variant_witness();
        if !witness.same_variant(&atom.value) {
            return Err(CoreError::TypeMismatch {
                left: witness.clone(),
                right: atom.value,
            });
        }
        match (state, atom.op) {
            (ParamState::Equal(v), AtomOp::Eq) => Ok(*v == atom.value),
            (ParamState::Equal(v), AtomOp::Neq) => Ok(*v != atom.value),
            (state @ ParamState::Excludes(_), AtomOp::Eq) => {
                let ParamState::Excludes(set) = &*state else {
                    unreachable!()
                };
                if set.contains(&atom.value) {
                    return Ok(false);
                }
                *state = ParamState::Equal(atom.value);
                Ok(true)
            }
            (ParamState::Excludes(set), AtomOp::Neq) => {
                set.insert(atom.value);
                Ok(true)
            }
        }
    }

    pub fn conjoin(&self, other: &Conjunction) -> Result<Option<Conjunction>, CoreError> {
        if other.is_top() {
            return Ok(Some(self.clone()));
        }
        let mut out = self.clone();
        for atom in other.atoms() {
            if !out.add(atom)? {
                return Ok(None);
            }
        }
        Ok(Some(out))
    }

    /// Atoms in canonical order: by parameter index, then by value.
    pub fn atoms(&self) -> impl Iterator<Item = ParamAtom> + '_ {
        self.atom_refs().map(|(param, op, value)| ParamAtom {
            param,
            op,
            value: value.clone(),
        })
    }

    fn atom_refs(&self) -> impl Iterator<Item = (usize, AtomOp, &DataValue)> + '_ {
        self.params.iter().flat_map(|(p, state)| {
            let (eq, neq) = match state {
                ParamState::Equal(v) => (Some(v), None),
                ParamState::Excludes(set) => (None, Some(set)),
            };
            eq.into_iter()
                .map(move |v| (*p, AtomOp::Eq, v))
                .chain(neq.into_iter().flatten().map(move |v| (*p, AtomOp::Neq, v)))
        })
    }

    /// `Some(b)` when every parameter `other` mentions is pinned by `self`,
    /// `b` being whether the pinned values satisfy `other`. `None` otherwise,
    /// including when a comparison would mix value types.
    fn decides(&self, other: &Conjunction) -> Option<bool> {
        let mut holds = true;
        for (p, theirs) in &other.params {
            let i = self.params.binary_search_by_key(p, |(q, _)| *q).ok()?;
            let ParamState::Equal(v) = &self.params[i].1 else {
                return None;
            };
            if !v.same_variant(theirs.variant_witness()) {
                return None;
            }
            holds &= match theirs {
                ParamState::Equal(w) => v == w,
                ParamState::Excludes(set) => !set.contains(v),
            };
        }
        Some(holds)
    }

    /// Whether every valuation satisfying `self` satisfies `other`.
    pub fn implies(&self, other: &Conjunction) -> bool {
        other.params.iter().all(|(p, theirs)| {
            match self.params.binary_search_by_key(p, |(q, _)| *q) {
                Ok(i) => self.params[i].1.implies(theirs),
                Err(_) => false,
            }
        })
    }

    /// Evaluates under a concrete valuation indexed by parameter.
    pub fn satisfied_by(&self, valuation: &[DataValue]) -> bool {
        self.params.iter().all(|(p, state)| {
            let Some(v) = valuation.get(*p) else {
                return false;
            };
            match state {
                ParamState::Equal(e) => v == e,
                ParamState::Excludes(set) => !set.contains(v),
            }
        })
    }

    /// A concrete valuation satisfying this conjunction. Parameters not
    /// mentioned, and parameters only constrained by disequalities, receive a
    /// fresh value outside every excluded set.
    pub fn witness(&self, num_params: usize) -> Vec<DataValue> {
        (0..num_params)
            .map(
                |p| match self.params.binary_search_by_key(&p, |(q, _)| *q) {
                    Ok(i) => match &self.params[i].1 {
                        ParamState::Equal(v) => v.clone(),
                        ParamState::Excludes(set) => fresh_value(set),
                    },
                    Err(_) => fresh_value(&BTreeSet::new()),
                },
            )
            .collect()
    }
}

fn fresh_value(excluded: &BTreeSet<DataValue>) -> DataValue {
    if let Some(DataValue::Number(_)) = excluded.iter().next() {
        let max = excluded
            .iter()
            .filter_map(|v| match v {
                DataValue::Number(n) => Some(*n),
                DataValue::Text(_) => None,
            })
            .max()
            .unwrap_or(0);
        return DataValue::Number(max.wrapping_add(1));
    }
    // Longer than every excluded string, hence distinct from all of them.
    let longest = excluded
        .iter()
        .filter_map(DataValue::as_text)
        .map(str::len)
        .max()
        .unwrap_or(0);
    DataValue::text("#".repeat(longest + 1))
}

impl Conjunction {
    /// Appends the tab-separated `x<i> == v` / `x<i> != v` atoms.
    pub fn write_text(&self, out: &mut String) {
        for (i, (param, op, value)) in self.atom_refs().enumerate() {
            if i > 0 {
                out.push('\t');
            }
            out.push('x');
            out.push_str(&param.to_string());
            out.push_str(match op {
                AtomOp::Eq => " == ",
                AtomOp::Neq => " != ",
            });
            match value {
                DataValue::Text(s) => out.push_str(s),
                DataValue::Number(n) => out.push_str(&n.to_string()),
            }
        }
    }
}

/// Decimal digits of `n` without allocating.
fn decimal(n: i128) -> impl Iterator<Item = u8> {
    let mut buf = [0u8; 40];
    let mut i = buf.len();
    let mut m = n.unsigned_abs();
    loop {
        i -= 1;
        buf[i] = b'0' + (m % 10) as u8;
        m /= 10;
        if m == 0 {
            break;
        }
    }
    if n < 0 {
        i -= 1;
        buf[i] = b'-';
    }
    buf.into_iter().skip(i)
}

impl Conjunction {
    /// The bytes of [`Conjunction::write_text`], lazily.
    fn text_bytes(&self) -> impl Iterator<Item = u8> + '_ {
        self.atom_refs()
            .enumerate()
            .flat_map(|(i, (param, op, value))| {
                let (text, number) = match value {
                    DataValue::Text(s) => (Some(s.bytes()), None),
                    DataValue::Number(n) => (None, Some(decimal(i128::from(*n)))),
                };
                let value = text
                    .into_iter()
                    .flatten()
                    .chain(number.into_iter().flatten());
                (i > 0)
                    .then_some(b'\t')
                    .into_iter()
                    .chain(std::iter::once(b'x'))
                    .chain(decimal(param as i128))
                    .chain(match op {
                        AtomOp::Eq => b" == ".iter().copied(),
                        AtomOp::Neq => b" != ".iter().copied(),
                    })
                    .chain(value)
            })
    }

    /// Compares the serialized forms without building them.
    pub fn text_cmp(&self, other: &Conjunction) -> std::cmp::Ordering {
        self.text_bytes().cmp(other.text_bytes())
    }
}

impl fmt::Display for Conjunction {
    /// Tab-separated atoms; empty for `true`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_text(&mut s);
        f.write_str(&s)
    }
}

/// A set of parameter valuations in disjunctive normal form.
///
/// Every stored disjunct is satisfiable and no disjunct implies another, so
/// the empty disjunction is exactly the unsatisfiable constraint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ParamConstraint {
    disjuncts: Vec<Conjunction>,
}

impl ParamConstraint {
    pub fn top() -> Self {
        ParamConstraint {
            disjuncts: vec![Conjunction::top()],
        }
    }

    pub fn bottom() -> Self {
        ParamConstraint::default()
    }

    pub fn from_conjunction(c: Conjunction) -> Self {
        ParamConstraint { disjuncts: vec![c] }
    }

    /// Builds a constraint from raw disjuncts, pruning contradictory ones.
    pub fn from_atom_sets<I, J>(disjuncts: I) -> Result<Self, CoreError>
    where
        I: IntoIterator<Item = J>,
        J: IntoIterator<Item = ParamAtom>,
    {
        let mut kept = Vec::new();
        for atoms in disjuncts {
            if let Some(c) = Conjunction::from_atoms(atoms)? {
                kept.push(c);
            }
        }
        Ok(Self::normalized(kept))
    }

    fn normalized(mut disjuncts: Vec<Conjunction>) -> Self {
        if disjuncts.len() <= 1 {
            return ParamConstraint { disjuncts };
        }
        disjuncts.sort();
        disjuncts.dedup();
        if disjuncts.len() > 1 {
            let mut keep = vec![true; disjuncts.len()];
            for i in 0..disjuncts.len() {
                for j in 0..disjuncts.len() {
                    if i != j && keep[j] && disjuncts[i].implies(&disjuncts[j]) {
                        keep[i] = false;
                        break;
                    }
                }
            }
            let mut it = keep.into_iter();
            disjuncts.retain(|_| it.next().unwrap_or(true));
        }
        ParamConstraint { disjuncts }
    }

    pub fn disjuncts(&self) -> &[Conjunction] {
        &self.disjuncts
    }

    pub fn is_satisfiable(&self) -> bool {
        !self.disjuncts.is_empty()
    }

    pub fn is_top(&self) -> bool {
        self.disjuncts.len() == 1 && self.disjuncts[0].is_top()
    }

    /// DNF of `self ∧ other` with contradictory conjunctions removed.
    pub fn conjoin(&self, other: &ParamConstraint) -> Result<ParamConstraint, CoreError> {
        if self.is_top() {
            return Ok(other.clone());
        }
        if other.is_top() {
            return Ok(self.clone());
        }
        let mut out = Vec::with_capacity(self.disjuncts.len() * other.disjuncts.len());
        // Disjuncts of `self` that decide `other` survive unchanged or vanish,
        // and a subset of a normalized list is still normalized.
        let mut subset = true;
        for a in &self.disjuncts {
            let mut decided = Some(false);
            for b in &other.disjuncts {
                match a.decides(b) {
                    Some(true) => {
                        decided = Some(true);
                        break;
                    }
                    Some(false) => {}
                    None => {
                        decided = None;
                        break;
                    }
                }
            }
            match decided {
                Some(true) => out.push(a.clone()),
                Some(false) => {}
                None => {
                    subset = false;
                    for b in &other.disjuncts {
                        if let Some(c) = a.conjoin(b)? {
                            out.push(c);
                        }
                    }
                }
            }
        }
        if subset {
            return Ok(ParamConstraint { disjuncts: out });
        }
        Ok(Self::normalized(out))
    }

    /// Disjunction of arbitrary conjunctions, normalized once.
    pub fn any_of<I: IntoIterator<Item = Conjunction>>(disjuncts: I) -> ParamConstraint {
        Self::normalized(disjuncts.into_iter().collect())
    }

    pub fn disjoin(&self, other: &ParamConstraint) -> ParamConstraint {
        let mut all = self.disjuncts.clone();
        all.extend(other.disjuncts.iter().cloned());
        Self::normalized(all)
    }

    pub fn satisfied_by(&self, valuation: &[DataValue]) -> bool {
        self.disjuncts.iter().any(|c| c.satisfied_by(valuation))
    }
}

impl fmt::Display for ParamConstraint {
    /// One disjunct per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.disjuncts.is_empty() {
            return f.write_str("false");
        }
        for (i, c) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            if c.is_top() {
                f.write_str("true")?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// One accepted prefix under one disjunct of the parameter constraint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatchReport {
    /// 0-based index of the event completing the match.
    pub time_point: usize,
    pub timestamp: Timestamp,
    pub constraint: Conjunction,
}

impl MatchReport {
    /// The key used for per-step ordering and duplicate elimination.
    pub fn sort_key(&self) -> (usize, String) {
        let mut text = String::new();
        self.constraint.write_text(&mut text);
        (self.time_point, text)
    }
}

impl fmt::Display for MatchReport {
    /// `@<ts>.000000.\t(time-point <n>)\t<atoms...>\ttrue`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "@{}.000000.\t(time-point {})\t",
            self.timestamp, self.time_point
        )?;
        if !self.constraint.is_top() {
            write!(f, "{}\t", self.constraint)?;
        }
        f.write_str("true")
    }
}

/// Sorts reports by time point then constraint text and drops duplicates.
pub fn canonicalize(reports: &mut Vec<MatchReport>) {
    if reports.len() < 2 {
        return;
    }
    reports.sort_by(|a, b| {
        a.time_point
            .cmp(&b.time_point)
            .then_with(|| a.constraint.text_cmp(&b.constraint))
    });
    reports.dedup_by(|a, b| a.time_point == b.time_point && a.constraint == b.constraint);
}

/// Per-conjunction satisfiability of a list of atoms over an infinite domain.
pub fn is_satisfiable(atoms: &[ParamAtom]) -> Result<bool, CoreError> {
    Ok(Conjunction::from_atoms(atoms.iter().cloned())?.is_some())
}
