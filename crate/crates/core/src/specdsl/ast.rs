use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldType {
    String,
    Number,
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldType::String => "string",
            FieldType::Number => "number",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub ty: FieldType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub fields: Vec<VarDecl>,
}

impl Signature {
    pub fn arity(&self) -> usize {
        self.fields.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprDef {
    pub name: String,
    pub body: ExprNode,
}

/// A parsed and validated specification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecAst {
    pub vars: Vec<VarDecl>,
    pub signatures: Vec<Signature>,
    pub exprs: Vec<ExprDef>,
    pub main: ExprNode,
}

impl SpecAst {
    pub fn signature(&self, name: &str) -> Option<&Signature> {
        self.signatures.iter().find(|s| s.name == name)
    }

    pub fn expr(&self, name: &str) -> Option<&ExprDef> {
        self.exprs.iter().find(|e| e.name == name)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Replaces the bound of every `within` in the main expression and in
    /// every named expression.
    pub fn with_bound(mut self, bound: u64) -> SpecAst {
        self.main.set_within_bounds(bound);
        for def in &mut self.exprs {
            def.body.set_within_bounds(bound);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Comparator {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
}

impl Comparator {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "==",
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprNode {
    EventAtom {
        signature: String,
        binders: Vec<String>,
        guard: Option<Guard>,
    },
    Seq(Vec<ExprNode>),
    /// Two or more alternatives.
    OneOf(Vec<ExprNode>),
    ZeroOrMore(Box<ExprNode>),
    Within {
        cmp: Comparator,
        bound: u64,
        body: Box<ExprNode>,
    },
    Ref(String),
}

impl ExprNode {
    pub fn atom(signature: &str, binders: &[&str], guard: Option<Guard>) -> Self {
        ExprNode::EventAtom {
            signature: signature.to_string(),
            binders: binders.iter().map(|b| b.to_string()).collect(),
            guard,
        }
    }

    pub fn within(cmp: Comparator, bound: u64, body: ExprNode) -> Self {
        ExprNode::Within {
            cmp,
            bound,
            body: Box::new(body),
        }
    }

    pub fn star(body: ExprNode) -> Self {
        ExprNode::ZeroOrMore(Box::new(body))
    }

    pub fn depth(&self) -> usize {
        1 + match self {
            ExprNode::EventAtom { .. } | ExprNode::Ref(_) => 0,
            ExprNode::Seq(xs) | ExprNode::OneOf(xs) => {
                xs.iter().map(ExprNode::depth).max().unwrap_or(0)
            }
            ExprNode::ZeroOrMore(b) | ExprNode::Within { body: b, .. } => b.depth(),
        }
    }

    pub fn count_within(&self) -> usize {
        match self {
            ExprNode::EventAtom { .. } | ExprNode::Ref(_) => 0,
            ExprNode::Seq(xs) | ExprNode::OneOf(xs) => xs.iter().map(ExprNode::count_within).sum(),
            ExprNode::ZeroOrMore(b) => b.count_within(),
            ExprNode::Within { body, .. } => 1 + body.count_within(),
        }
    }

    pub fn contains_ref(&self) -> bool {
        match self {
            ExprNode::Ref(_) => true,
            ExprNode::EventAtom { .. } => false,
            ExprNode::Seq(xs) | ExprNode::OneOf(xs) => xs.iter().any(ExprNode::contains_ref),
            ExprNode::ZeroOrMore(b) | ExprNode::Within { body: b, .. } => b.contains_ref(),
        }
    }

    fn set_within_bounds(&mut self, new_bound: u64) {
        match self {
            ExprNode::EventAtom { .. } | ExprNode::Ref(_) => {}
            ExprNode::Seq(xs) | ExprNode::OneOf(xs) => {
                xs.iter_mut().for_each(|x| x.set_within_bounds(new_bound))
            }
            ExprNode::ZeroOrMore(b) => b.set_within_bounds(new_bound),
            ExprNode::Within { bound, body, .. } => {
                *bound = new_bound;
                body.set_within_bounds(new_bound);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    /// A binder of the enclosing event atom or a global variable; which one
    /// is decided by name lookup.
    Ident(String),
    Literal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GuardOp {
    Eq,
    Neq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    Cmp {
        lhs: Operand,
        op: GuardOp,
        rhs: Operand,
    },
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn cmp(lhs: Operand, op: GuardOp, rhs: Operand) -> Self {
        Guard::Cmp { lhs, op, rhs }
    }

    pub fn and(self, other: Guard) -> Self {
        Guard::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Guard) -> Self {
        Guard::Or(Box::new(self), Box::new(other))
    }
}
