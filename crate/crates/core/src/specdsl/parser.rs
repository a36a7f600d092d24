use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::{Pos, SpecError, SpecErrorKind};

const KEYWORDS: &[&str] = &[
    "var",
    "signature",
    "expr",
    "one_of",
    "or",
    "zero_or_more",
    "within",
];
const MAX_NESTING: usize = 128;

/// Checks that can only run once every declaration has been seen.
enum Deferred {
    Ref {
        name: String,
        pos: Pos,
        /// Enclosing named expression, `None` for the main expression.
        from: Option<String>,
    },
    Atom {
        signature: String,
        arity: usize,
        pos: Pos,
    },
    /// Binder names of an atom, checked against globals for shadowing.
    Binder { name: String, pos: Pos },
    /// Guard identifier that is not a binder of its atom; must be a global.
    GuardIdent { name: String, pos: Pos },
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    depth: usize,
    current_def: Option<String>,
    deferred: Vec<Deferred>,
}

pub fn parse_spec(source: &str) -> Result<SpecAst, SpecError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        at: 0,
        depth: 0,
        current_def: None,
        deferred: Vec::new(),
    };
    let (ast, decl_pos) = p.spec()?;
    validate(&ast, &decl_pos, p.deferred)?;
    Ok(ast)
}

#[derive(Default)]
struct DeclPositions {
    exprs: HashMap<String, Pos>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn syntax(&self, expected: &str) -> SpecError {
        SpecError::new(
            self.pos(),
            SpecErrorKind::Syntax,
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Pos, SpecError> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.syntax(what))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), SpecError> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                let pos = self.bump().pos;
                Ok((s, pos))
            }
            _ => Err(self.syntax(what)),
        }
    }

    fn spec(&mut self) -> Result<(SpecAst, DeclPositions), SpecError> {
        let mut vars: Vec<VarDecl> = Vec::new();
        let mut signatures: Vec<Signature> = Vec::new();
        let mut exprs: Vec<ExprDef> = Vec::new();
        let mut decl_pos = DeclPositions::default();
        let mut sig_names = HashSet::new();

        loop {
            if self.is_keyword("var") {
                self.bump();
                for (decl, pos) in self.field_block()? {
                    if vars.iter().any(|v| v.name == decl.name) {
                        return Err(duplicate(pos, "variable", &decl.name));
                    }
                    vars.push(decl);
                }
            } else if self.is_keyword("signature") {
                self.bump();
                let (name, pos) = self.ident("signature name")?;
                if !sig_names.insert(name.clone()) {
                    return Err(duplicate(pos, "signature", &name));
                }
                let mut fields: Vec<VarDecl> = Vec::new();
                for (decl, pos) in self.field_block()? {
                    if fields.iter().any(|f| f.name == decl.name) {
                        return Err(duplicate(pos, "field", &decl.name));
                    }
                    fields.push(decl);
                }
                signatures.push(Signature { name, fields });
            } else if self.is_keyword("expr") {
                self.bump();
                let (name, pos) = self.ident("expression name")?;
                if decl_pos.exprs.contains_key(&name) {
                    return Err(duplicate(pos, "expression", &name));
                }
                decl_pos.exprs.insert(name.clone(), pos);
                self.current_def = Some(name.clone());
                let body = self.block()?;
                self.current_def = None;
                exprs.push(ExprDef { name, body });
            } else {
                break;
            }
        }

        let main = self.top_expr()?;
        if *self.peek() != Tok::Eof {
            return Err(self.syntax("`;` or end of input"));
        }
        Ok((
            SpecAst {
                vars,
                signatures,
                exprs,
                main,
            },
            decl_pos,
        ))
    }

    /// `'{' (IDENT ':' type ';')* '}'`
    fn field_block(&mut self) -> Result<Vec<(VarDecl, Pos)>, SpecError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            let (name, pos) = self.ident("field name or `}`")?;
            self.expect(Tok::Colon, "`:`")?;
            let ty = match self.peek() {
                Tok::Ident(t) if t == "string" => FieldType::String,
                Tok::Ident(t) if t == "number" => FieldType::Number,
                _ => return Err(self.syntax("type `string` or `number`")),
            };
            self.bump();
            self.expect(Tok::Semi, "`;`")?;
            out.push((VarDecl { name, ty }, pos));
        }
        self.bump();
        Ok(out)
    }

    fn block(&mut self) -> Result<ExprNode, SpecError> {
        self.expect(Tok::LBrace, "`{`")?;
        let e = self.top_expr()?;
        self.expect(Tok::RBrace, "`;` or `}`")?;
        Ok(e)
    }

    fn top_expr(&mut self) -> Result<ExprNode, SpecError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(SpecError::new(
                self.pos(),
                SpecErrorKind::Syntax,
                format!("expression nesting exceeds {MAX_NESTING} levels"),
            ));
        }
        let mut items = vec![self.term()?];
        while *self.peek() == Tok::Semi {
            self.bump();
            items.push(self.term()?);
        }
        self.depth -= 1;
        Ok(if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            ExprNode::Seq(items)
        })
    }

    fn term(&mut self) -> Result<ExprNode, SpecError> {
        if self.is_keyword("one_of") {
            self.bump();
            let mut branches = vec![self.block()?];
            if !self.is_keyword("or") {
                return Err(self.syntax("`or`"));
            }
            while self.is_keyword("or") {
                self.bump();
                branches.push(self.block()?);
            }
            return Ok(ExprNode::OneOf(branches));
        }
        if self.is_keyword("zero_or_more") {
            self.bump();
            return Ok(ExprNode::star(self.block()?));
        }
        if self.is_keyword("within") {
            self.bump();
            self.expect(Tok::LParen, "`(`")?;
            let cmp = match self.peek() {
                Tok::Gt => Comparator::Gt,
                Tok::Ge => Comparator::Ge,
                Tok::Lt => Comparator::Lt,
                Tok::Le => Comparator::Le,
                Tok::EqEq => Comparator::Eq,
                _ => return Err(self.syntax("comparator (`>`, `>=`, `<`, `<=`, `==`)")),
            };
            self.bump();
            let bound = match *self.peek() {
                Tok::Int(n) => n,
                _ => return Err(self.syntax("integer bound")),
            };
            self.bump();
            self.expect(Tok::RParen, "`)`")?;
            let body = self.block()?;
            return Ok(ExprNode::within(cmp, bound, body));
        }

        let (name, pos) = self.ident("expression")?;
        if *self.peek() != Tok::LParen {
            self.deferred.push(Deferred::Ref {
                name: name.clone(),
                pos,
                from: self.current_def.clone(),
            });
            return Ok(ExprNode::Ref(name));
        }
        self.bump();

        let mut binders: Vec<String> = Vec::new();
        if matches!(self.peek(), Tok::Ident(_)) {
            loop {
                let (b, bpos) = self.ident("binder name")?;
                if binders.contains(&b) {
                    return Err(duplicate(bpos, "binder", &b));
                }
                self.deferred.push(Deferred::Binder {
                    name: b.clone(),
                    pos: bpos,
                });
                binders.push(b);
                if *self.peek() != Tok::Comma {
                    break;
                }
                self.bump();
            }
        }
        let guard = if *self.peek() == Tok::Pipe {
            self.bump();
            Some(self.guard_or(&binders)?)
        } else {
            None
        };
        self.expect(Tok::RParen, "`,`, `|` or `)`")?;
        self.deferred.push(Deferred::Atom {
            signature: name.clone(),
            arity: binders.len(),
            pos,
        });
        Ok(ExprNode::EventAtom {
            signature: name,
            binders,
            guard,
        })
    }

    fn guard_or(&mut self, binders: &[String]) -> Result<Guard, SpecError> {
        let mut g = self.guard_and(binders)?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            g = g.or(self.guard_and(binders)?);
        }
        Ok(g)
    }

    fn guard_and(&mut self, binders: &[String]) -> Result<Guard, SpecError> {
        let mut g = self.guard_primary(binders)?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            g = g.and(self.guard_primary(binders)?);
        }
        Ok(g)
    }

    fn guard_primary(&mut self, binders: &[String]) -> Result<Guard, SpecError> {
        if *self.peek() == Tok::LParen {
            self.depth += 1;
            if self.depth > MAX_NESTING {
                return Err(SpecError::new(
                    self.pos(),
                    SpecErrorKind::Syntax,
                    format!("guard nesting exceeds {MAX_NESTING} levels"),
                ));
            }
            self.bump();
            let g = self.guard_or(binders)?;
            self.expect(Tok::RParen, "`)`")?;
            self.depth -= 1;
            return Ok(g);
        }
        let start = self.pos();
        let lhs = self.operand(binders)?;
        let op = match self.peek() {
            Tok::EqEq => GuardOp::Eq,
            Tok::NotEq => GuardOp::Neq,
            _ => return Err(self.syntax("`==` or `!=`")),
        };
        self.bump();
        let rhs = self.operand(binders)?;
        if matches!((&lhs, &rhs), (Operand::Literal(_), Operand::Literal(_))) {
            return Err(SpecError::new(
                start,
                SpecErrorKind::Syntax,
                "comparison between two literals".to_string(),
            ));
        }
        Ok(Guard::cmp(lhs, op, rhs))
    }

    fn operand(&mut self, binders: &[String]) -> Result<Operand, SpecError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(Operand::Literal(s))
            }
            Tok::Ident(_) => {
                let (name, pos) = self.ident("identifier or string literal")?;
                if !binders.contains(&name) {
                    self.deferred.push(Deferred::GuardIdent {
                        name: name.clone(),
                        pos,
                    });
                }
                Ok(Operand::Ident(name))
            }
            _ => Err(self.syntax("identifier or string literal")),
        }
    }
}

fn duplicate(pos: Pos, what: &str, name: &str) -> SpecError {
    SpecError::new(
        pos,
        SpecErrorKind::DuplicateName,
        format!("duplicate {what} `{name}`"),
    )
}

fn validate(
    ast: &SpecAst,
    decl_pos: &DeclPositions,
    deferred: Vec<Deferred>,
) -> Result<(), SpecError> {
    // Reference edges between named expressions, in source order.
    let mut edges: HashMap<&str, Vec<(String, Pos)>> = HashMap::new();
    for d in &deferred {
        match d {
            Deferred::Ref { name, pos, from } => {
                if ast.expr(name).is_none() {
                    return Err(SpecError::new(
                        *pos,
                        SpecErrorKind::UnresolvedReference,
                        format!("unknown expression `{name}`"),
                    ));
                }
                if let Some(from) = from {
                    edges
                        .entry(from.as_str())
                        .or_default()
                        .push((name.clone(), *pos));
                }
            }
            Deferred::Atom {
                signature,
                arity,
                pos,
            } => {
                let Some(sig) = ast.signature(signature) else {
                    return Err(SpecError::new(
                        *pos,
                        SpecErrorKind::UnresolvedReference,
                        format!("unknown signature `{signature}`"),
                    ));
                };
                if sig.arity() != *arity {
                    return Err(SpecError::new(
                        *pos,
                        SpecErrorKind::ArityMismatch,
                        format!(
                            "signature `{signature}` has {} field(s) but {arity} binder(s) were given",
                            sig.arity()
                        ),
                    ));
                }
            }
            Deferred::Binder { name, pos } => {
                if ast.var_index(name).is_some() {
                    return Err(SpecError::new(
                        *pos,
                        SpecErrorKind::DuplicateName,
                        format!("binder `{name}` shadows global variable `{name}`"),
                    ));
                }
            }
            Deferred::GuardIdent { name, pos } => {
                if ast.var_index(name).is_none() {
                    return Err(SpecError::new(
                        *pos,
                        SpecErrorKind::UnresolvedReference,
                        format!(
                            "`{name}` is neither a binder of this event nor a declared variable"
                        ),
                    ));
                }
            }
        }
    }

    // Cycle detection over named expressions.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unvisited,
        Active,
        Done,
    }
    fn visit<'a>(
        node: &'a str,
        edges: &'a HashMap<&str, Vec<(String, Pos)>>,
        marks: &mut HashMap<&'a str, Mark>,
    ) -> Result<(), SpecError> {
        marks.insert(node, Mark::Active);
        for (next, pos) in edges.get(node).map(Vec::as_slice).unwrap_or(&[]) {
            match marks.get(next.as_str()).copied().unwrap_or(Mark::Unvisited) {
                Mark::Active => {
                    return Err(SpecError::new(
                        *pos,
                        SpecErrorKind::CyclicReference,
                        format!("expression `{next}` refers to itself through `{node}`"),
                    ))
                }
                Mark::Unvisited => visit(next, edges, marks)?,
                Mark::Done => {}
            }
        }
        marks.insert(node, Mark::Done);
        Ok(())
    }
    let mut marks: HashMap<&str, Mark> = HashMap::new();
    let mut order: Vec<&ExprDef> = ast.exprs.iter().collect();
    order.sort_by_key(|d| decl_pos.exprs.get(&d.name).copied());
    for def in order {
        if marks
            .get(def.name.as_str())
            .copied()
            .unwrap_or(Mark::Unvisited)
            == Mark::Unvisited
        {
            visit(&def.name, &edges, &mut marks)?;
        }
    }
    Ok(())
}
