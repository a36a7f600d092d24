//! Compilation of resolved expressions into timed automata with symbolic
//! data guards.
//!
//! Every `within` scope owns one clock. The clock is reset when the event
//! right before the scope is consumed (or at time 0 when the scope starts the
//! word) and compared against the bound when the event completing the scope
//! is consumed.
//!
//! Construction goes through an intermediate automaton with silent moves
//! that carry clock resets and checks. Silent moves are then folded into the
//! event-consuming transitions: a transition consumes one event, evaluates its
//! data guard and clock guard at that event's timestamp, applies its resets
//! and lands in the location that waits for the next event atom, or in the
//! accepting sink.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::{self, Write};

use thiserror::Error;

use crate::model::{AtomOp, CoreError, DataValue, ParamAtom, ParamConstraint};
use crate::specdsl::{self, Comparator, ExprNode, FieldType, Guard, GuardOp, Operand, SpecAst};

pub type LocationId = usize;
pub type ClockId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("unsupported in this build: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClockAtom {
    pub clock: ClockId,
    pub cmp: Comparator,
    pub bound: i64,
}

impl ClockAtom {
    pub fn holds(&self, value: i64) -> bool {
        self.cmp.holds(value, self.bound)
    }
}

impl fmt::Display for ClockAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{} {} {}", self.clock, self.cmp, self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Binder(usize),
    Global(usize),
    Literal(DataValue),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GuardAtom {
    pub lhs: Term,
    pub op: AtomOp,
    pub rhs: Term,
}

enum Side<'a> {
    Param(usize),
    Value(&'a DataValue),
}

impl Term {
    fn side<'a>(&'a self, fields: &'a [DataValue]) -> Side<'a> {
        match self {
            Term::Binder(i) => Side::Value(&fields[*i]),
            Term::Global(g) => Side::Param(*g),
            Term::Literal(v) => Side::Value(v),
        }
    }
}

/// A data guard in disjunctive normal form over binders, globals and
/// literals. `true` is a single empty disjunct.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DataGuard {
    dnf: Vec<Vec<GuardAtom>>,
}

impl DataGuard {
    pub fn always() -> Self {
        DataGuard { dnf: vec![vec![]] }
    }

    pub fn is_always(&self) -> bool {
        self.dnf.iter().any(Vec::is_empty)
    }

    /// Substitutes the event's field values for binders and returns the
    /// resulting constraint on the globals.
    pub fn instantiate(&self, fields: &[DataValue]) -> Result<ParamConstraint, CoreError> {
        if self.is_always() {
            return Ok(ParamConstraint::top());
        }
        let mut disjuncts: Vec<Vec<ParamAtom>> = Vec::with_capacity(self.dnf.len());
        'disjunct: for conj in &self.dnf {
            let mut atoms = Vec::with_capacity(conj.len());
            for atom in conj {
                match (atom.lhs.side(fields), atom.rhs.side(fields)) {
                    (Side::Value(a), Side::Value(b)) => {
                        if a.try_eq(b)? != (atom.op == AtomOp::Eq) {
                            continue 'disjunct;
                        }
                    }
                    (Side::Param(p), Side::Value(v)) | (Side::Value(v), Side::Param(p)) => {
                        atoms.push(ParamAtom {
                            param: p,
                            op: atom.op,
                            value: v.clone(),
                        });
                    }
                    (Side::Param(_), Side::Param(_)) => {
                        unreachable!("parameter-to-parameter comparisons are rejected by compile")
                    }
                }
            }
            disjuncts.push(atoms);
        }
        ParamConstraint::from_atom_sets(disjuncts)
    }

    fn render(&self, binders: &[String], globals: &[String]) -> String {
        let term = |t: &Term| match t {
            Term::Binder(i) => binders[*i].clone(),
            Term::Global(g) => globals[*g].clone(),
            Term::Literal(v) => format!("{:?}", v.to_string()),
        };
        self.dnf
            .iter()
            .map(|conj| {
                if conj.is_empty() {
                    return "true".to_string();
                }
                conj.iter()
                    .map(|a| format!("{} {} {}", term(&a.lhs), a.op, term(&a.rhs)))
                    .collect::<Vec<_>>()
                    .join(" && ")
            })
            .collect::<Vec<_>>()
            .join(" || ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocationKind {
    /// Start of every run; waits for the listed atoms.
    Initial(Vec<usize>),
    /// Waiting to consume one of the listed event atoms (indices into
    /// `atoms`, sorted).
    Waiting(Vec<usize>),
    Accepting,
}

impl LocationKind {
    pub fn atoms(&self) -> &[usize] {
        match self {
            LocationKind::Initial(a) | LocationKind::Waiting(a) => a,
            LocationKind::Accepting => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub id: LocationId,
    pub kind: LocationKind,
}

/// An event atom of the compiled expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomInfo {
    pub signature: usize,
    pub binders: Vec<String>,
    pub guard: DataGuard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub source: LocationId,
    pub target: LocationId,
    /// Index into [`Automaton::signatures`].
    pub label: usize,
    /// Index into [`Automaton::atoms`] of the atom consuming the event.
    pub atom: usize,
    pub clock_guard: Vec<ClockAtom>,
    pub resets: Vec<ClockId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockInfo {
    pub cmp: Comparator,
    pub bound: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automaton {
    pub locations: Vec<Location>,
    pub initial: LocationId,
    pub clocks: Vec<ClockInfo>,
    pub globals: Vec<String>,
    /// `(name, arity)` in declaration order.
    pub signatures: Vec<(String, usize)>,
    pub atoms: Vec<AtomInfo>,
    pub transitions: Vec<Transition>,
    /// `outgoing[location][label]` lists transition indices.
    outgoing: Vec<Vec<Vec<usize>>>,
    /// Clocks whose current value may still be read from each location.
    live_clocks: Vec<Vec<bool>>,
    label_index: HashMap<String, usize>,
}

impl Automaton {
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    pub fn outgoing(&self, location: LocationId, label: usize) -> &[usize] {
        &self.outgoing[location][label]
    }

    pub fn is_accepting(&self, location: LocationId) -> bool {
        self.locations[location].kind == LocationKind::Accepting
    }

    pub fn is_clock_live(&self, location: LocationId, clock: ClockId) -> bool {
        self.live_clocks[location][clock]
    }

    pub fn num_clocks(&self) -> usize {
        self.clocks.len()
    }
}

/// Silent-move operations of the intermediate automaton.
#[derive(Debug, Clone, Copy)]
enum Silent {
    Plain,
    Reset(ClockId),
    Check(ClockAtom),
}

#[derive(Default)]
struct Thompson {
    silent: Vec<Vec<(usize, Silent)>>,
    /// For states that consume an event: `(atom, successor state)`.
    consume: Vec<Option<(usize, usize)>>,
    atoms: Vec<AtomInfo>,
    clocks: Vec<ClockInfo>,
}

impl Thompson {
    fn state(&mut self) -> usize {
        self.silent.push(Vec::new());
        self.consume.push(None);
        self.silent.len() - 1
    }

    fn edge(&mut self, from: usize, to: usize, op: Silent) {
        self.silent[from].push((to, op));
    }

    fn fragment(
        &mut self,
        e: &ExprNode,
        ctx: &CompileCtx<'_>,
    ) -> Result<(usize, usize), CompileError> {
        Ok(match e {
            ExprNode::EventAtom {
                signature,
                binders,
                guard,
            } => {
                let sig = ctx
                    .ast
                    .signatures
                    .iter()
                    .position(|s| s.name == *signature)
                    .ok_or_else(|| {
                        CompileError::Unsupported(format!("unknown signature `{signature}`"))
                    })?;
                if ctx.ast.signatures[sig].arity() != binders.len() {
                    return Err(CompileError::Unsupported(format!(
                        "atom `{signature}` has the wrong number of binders"
                    )));
                }
                let guard = match guard {
                    Some(g) => compile_guard(g, binders, ctx.ast)?,
                    None => DataGuard::always(),
                };
                let s = self.state();
                let f = self.state();
                self.atoms.push(AtomInfo {
                    signature: sig,
                    binders: binders.clone(),
                    guard,
                });
                self.consume[s] = Some((self.atoms.len() - 1, f));
                (s, f)
            }
            ExprNode::Seq(items) => {
                let s = self.state();
                let mut cur = s;
                for item in items {
                    let (a, b) = self.fragment(item, ctx)?;
                    self.edge(cur, a, Silent::Plain);
                    cur = b;
                }
                (s, cur)
            }
            ExprNode::OneOf(branches) => {
                let s = self.state();
                let f = self.state();
                for b in branches {
                    let (bs, bf) = self.fragment(b, ctx)?;
                    self.edge(s, bs, Silent::Plain);
                    self.edge(bf, f, Silent::Plain);
                }
                (s, f)
            }
            ExprNode::ZeroOrMore(body) => {
                let s = self.state();
                let hub = self.state();
                let f = self.state();
                let (bs, bf) = self.fragment(body, ctx)?;
                self.edge(s, hub, Silent::Plain);
                self.edge(hub, bs, Silent::Plain);
                self.edge(bf, hub, Silent::Plain);
                self.edge(hub, f, Silent::Plain);
                (s, f)
            }
            ExprNode::Within { cmp, bound, body } => {
                let clock = self.clocks.len();
                let bound = i64::try_from(*bound).map_err(|_| {
                    CompileError::Unsupported(format!("within bound {bound} is too large"))
                })?;
                self.clocks.push(ClockInfo { cmp: *cmp, bound });
                let s = self.state();
                let f = self.state();
                let (bs, bf) = self.fragment(body, ctx)?;
                self.edge(s, bs, Silent::Reset(clock));
                self.edge(
                    bf,
                    f,
                    Silent::Check(ClockAtom {
                        clock,
                        cmp: *cmp,
                        bound,
                    }),
                );
                (s, f)
            }
            ExprNode::Ref(name) => {
                let def = ctx.ast.expr(name).ok_or_else(|| {
                    CompileError::Unsupported(format!("unknown expression `{name}`"))
                })?;
                let body = specdsl::inline(&def.body, ctx.ast);
                self.fragment(&body, ctx)?
            }
        })
    }

    /// Every way to reach an event-consuming state or `end` from `from`
    /// through silent moves, with the accumulated clock effect.
    fn closure(&self, from: usize, end: usize) -> Vec<(Stop, Effect)> {
        let mut seen: HashSet<(usize, Effect)> = HashSet::new();
        let mut queue = VecDeque::new();
        let mut out = Vec::new();
        seen.insert((from, Effect::default()));
        queue.push_back((from, Effect::default()));
        while let Some((state, effect)) = queue.pop_front() {
            if let Some((atom, _)) = self.consume[state] {
                out.push((Stop::Atom(atom), effect.clone()));
            }
            if state == end {
                out.push((Stop::End, effect.clone()));
            }
            for &(next, op) in &self.silent[state] {
                let mut e = effect.clone();
                match op {
                    Silent::Plain => {}
                    Silent::Reset(c) => {
                        e.resets.insert(c);
                    }
                    Silent::Check(atom) => {
                        // A clock reset earlier on this path reads 0.
                        if e.resets.contains(&atom.clock) {
                            if !atom.holds(0) {
                                continue;
                            }
                        } else {
                            e.guards.insert(atom);
                        }
                    }
                }
                if seen.insert((next, e.clone())) {
                    queue.push_back((next, e));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Stop {
    Atom(usize),
    End,
}

/// Clock guard on values before the move, plus the clocks reset by it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Effect {
    guards: BTreeSet<ClockAtom>,
    resets: BTreeSet<ClockId>,
}

struct CompileCtx<'a> {
    ast: &'a SpecAst,
}

fn compile_guard(g: &Guard, binders: &[String], ast: &SpecAst) -> Result<DataGuard, CompileError> {
    let term = |o: &Operand| -> Result<Term, CompileError> {
        match o {
            Operand::Literal(s) => Ok(Term::Literal(DataValue::text(s))),
            Operand::Ident(name) => {
                if let Some(i) = binders.iter().position(|b| b == name) {
                    Ok(Term::Binder(i))
                } else if let Some(g) = ast.var_index(name) {
                    Ok(Term::Global(g))
                } else {
                    Err(CompileError::Unsupported(format!(
                        "unknown identifier `{name}`"
                    )))
                }
            }
        }
    };
    fn dnf(
        g: &Guard,
        term: &dyn Fn(&Operand) -> Result<Term, CompileError>,
    ) -> Result<Vec<Vec<GuardAtom>>, CompileError> {
        Ok(match g {
            Guard::Cmp { lhs, op, rhs } => {
                let (lhs, rhs) = (term(lhs)?, term(rhs)?);
                if matches!((&lhs, &rhs), (Term::Global(_), Term::Global(_))) {
                    return Err(CompileError::Unsupported(
                        "comparison between two global variables".to_string(),
                    ));
                }
                let op = match op {
                    GuardOp::Eq => AtomOp::Eq,
                    GuardOp::Neq => AtomOp::Neq,
                };
                vec![vec![GuardAtom { lhs, op, rhs }]]
            }
            Guard::Or(a, b) => {
                let mut out = dnf(a, term)?;
                out.extend(dnf(b, term)?);
                out
            }
            Guard::And(a, b) => {
                let (xs, ys) = (dnf(a, term)?, dnf(b, term)?);
                let mut out = Vec::with_capacity(xs.len() * ys.len());
                for x in &xs {
                    for y in &ys {
                        out.push(x.iter().chain(y).cloned().collect());
                    }
                }
                out
            }
        })
    }
    Ok(DataGuard {
        dnf: dnf(g, &term)?,
    })
}

fn check_types(ast: &SpecAst) -> Result<(), CompileError> {
    for v in &ast.vars {
        if v.ty == FieldType::Number {
            return Err(CompileError::Unsupported(format!(
                "number-typed variable `{}`",
                v.name
            )));
        }
    }
    for s in &ast.signatures {
        for f in &s.fields {
            if f.ty == FieldType::Number {
                return Err(CompileError::Unsupported(format!(
                    "number-typed field `{}.{}`",
                    s.name, f.name
                )));
            }
        }
    }
    Ok(())
}

/// Compiles an expression of `ast` (typically `specdsl::resolve(ast)`).
pub fn compile(expr: &ExprNode, ast: &SpecAst) -> Result<Automaton, CompileError> {
    check_types(ast)?;
    let mut nfa = Thompson::default();
    let ctx = CompileCtx { ast };
    let (start, end) = nfa.fragment(expr, &ctx)?;

    // Per atom: the transitions leaving its location.
    let mut atom_moves: Vec<Vec<(Stop, Effect)>> = Vec::with_capacity(nfa.atoms.len());
    for atom in 0..nfa.atoms.len() {
        let consumer = nfa
            .consume
            .iter()
            .position(|c| matches!(c, Some((a, _)) if *a == atom))
            .expect("every atom has a consuming state");
        let (_, after) = nfa.consume[consumer].expect("consuming state");
        atom_moves.push(nfa.closure(after, end));
    }

    // At time 0 every clock reads 0, so the initial closure is decided
    // statically and resets in it are no-ops.
    let initial_atoms: Vec<usize> = nfa
        .closure(start, end)
        .into_iter()
        .filter(|(_, eff)| eff.guards.iter().all(|g| g.holds(0)))
        .filter_map(|(stop, _)| match stop {
            Stop::Atom(a) => Some(a),
            Stop::End => None,
        })
        .collect::<BTreeSet<usize>>()
        .into_iter()
        .collect();

    // A location is the set of atoms a run may consume next. Moves after an
    // atom are grouped by clock effect, which is applied on the incoming
    // transition, so runs that only differ in the next atom share a location.
    let mut locations = vec![Location {
        id: 0,
        kind: LocationKind::Initial(initial_atoms.clone()),
    }];
    let mut loc_of: HashMap<Vec<usize>, LocationId> = HashMap::new();
    loc_of.insert(initial_atoms.clone(), 0);
    let mut accepting: Option<LocationId> = None;
    let mut transitions: Vec<Transition> = Vec::new();
    let mut queue: VecDeque<(LocationId, Vec<usize>)> = VecDeque::new();
    queue.push_back((0, initial_atoms));

    while let Some((source, atoms)) = queue.pop_front() {
        for atom in atoms {
            let mut groups: BTreeMap<&Effect, (BTreeSet<usize>, bool)> = BTreeMap::new();
            for (stop, effect) in &atom_moves[atom] {
                let group = groups.entry(effect).or_default();
                match stop {
                    Stop::Atom(a) => {
                        group.0.insert(*a);
                    }
                    Stop::End => group.1 = true,
                }
            }
            for (effect, (next, accepts)) in groups {
                let mut targets = Vec::with_capacity(2);
                if !next.is_empty() {
                    let next: Vec<usize> = next.into_iter().collect();
                    let id = match loc_of.get(&next) {
                        Some(&id) => id,
                        None => {
                            let id = locations.len();
                            locations.push(Location {
                                id,
                                kind: LocationKind::Waiting(next.clone()),
                            });
                            loc_of.insert(next.clone(), id);
                            queue.push_back((id, next));
                            id
                        }
                    };
                    targets.push(id);
                }
                if accepts {
                    let id = *accepting.get_or_insert_with(|| {
                        locations.push(Location {
                            id: locations.len(),
                            kind: LocationKind::Accepting,
                        });
                        locations.len() - 1
                    });
                    targets.push(id);
                }
                for target in targets {
                    transitions.push(Transition {
                        source,
                        target,
                        label: nfa.atoms[atom].signature,
                        atom,
                        clock_guard: effect.guards.iter().copied().collect(),
                        resets: effect.resets.iter().copied().collect(),
                    });
                }
            }
        }
    }

    let signatures: Vec<(String, usize)> = ast
        .signatures
        .iter()
        .map(|s| (s.name.clone(), s.arity()))
        .collect();
    let mut outgoing = vec![vec![Vec::new(); signatures.len()]; locations.len()];
    for (i, t) in transitions.iter().enumerate() {
        outgoing[t.source][t.label].push(i);
    }
    let live_clocks = liveness(locations.len(), nfa.clocks.len(), &transitions);
    let label_index = signatures
        .iter()
        .enumerate()
        .map(|(i, (name, _))| (name.clone(), i))
        .collect();

    Ok(Automaton {
        locations,
        initial: 0,
        clocks: nfa.clocks,
        globals: ast.vars.iter().map(|v| v.name.clone()).collect(),
        signatures,
        atoms: nfa.atoms,
        transitions,
        outgoing,
        live_clocks,
        label_index,
    })
}

/// A clock is live at a location if some path from it reads the clock
/// before resetting it.
#[allow(clippy::needless_range_loop)]
fn liveness(num_locations: usize, num_clocks: usize, transitions: &[Transition]) -> Vec<Vec<bool>> {
    let mut live = vec![vec![false; num_clocks]; num_locations];
    loop {
        let mut changed = false;
        for t in transitions {
            for c in 0..num_clocks {
                let reads = t.clock_guard.iter().any(|g| g.clock == c);
                let passes = !t.resets.contains(&c) && live[t.target][c];
                if (reads || passes) && !live[t.source][c] {
                    live[t.source][c] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return live;
        }
    }
}

/// Deterministic, human-readable dump of an automaton.
pub fn describe(a: &Automaton) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "automaton: locations={} transitions={} clocks={}",
        a.locations.len(),
        a.transitions.len(),
        a.clocks.len()
    );
    for (i, g) in a.globals.iter().enumerate() {
        let _ = writeln!(out, "global x{i}: {g}");
    }
    for (i, c) in a.clocks.iter().enumerate() {
        let _ = writeln!(out, "clock c{i}: within ({}{})", c.cmp, c.bound);
    }
    for loc in &a.locations {
        let what = match &loc.kind {
            LocationKind::Initial(atoms) => format!("initial, before {}", atoms_text(a, atoms)),
            LocationKind::Accepting => "accepting".to_string(),
            LocationKind::Waiting(atoms) => format!("before {}", atoms_text(a, atoms)),
        };
        let _ = writeln!(out, "location L{}: {what}", loc.id);
    }
    for t in &a.transitions {
        let _ = write!(
            out,
            "transition L{} -> L{} on {}",
            t.source,
            t.target,
            atom_text(a, t.atom)
        );
        if !t.clock_guard.is_empty() {
            let g: Vec<String> = t.clock_guard.iter().map(ToString::to_string).collect();
            let _ = write!(out, " when {}", g.join(" && "));
        }
        if !t.resets.is_empty() {
            let r: Vec<String> = t.resets.iter().map(|c| format!("c{c}")).collect();
            let _ = write!(out, " reset {}", r.join(", "));
        }
        out.push('\n');
    }
    out
}

fn atoms_text(a: &Automaton, atoms: &[usize]) -> String {
    let parts: Vec<String> = atoms.iter().map(|&i| atom_text(a, i)).collect();
    format!("{{ {} }}", parts.join("; "))
}

fn atom_text(a: &Automaton, atom: usize) -> String {
    let info = &a.atoms[atom];
    let mut s = format!(
        "{}({}",
        a.signatures[info.signature].0,
        info.binders.join(", ")
    );
    if !info.guard.is_always() {
        let _ = write!(s, " | {}", info.guard.render(&info.binders, &a.globals));
    }
    s.push(')');
    s
}
