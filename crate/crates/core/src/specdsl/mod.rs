//! The timed-pattern specification language.
//!
//! A specification declares global parameter variables, event signatures and
//! named sub-expressions, followed by the main expression:
//!
//! ```text
//! var { current_name: string; }
//! signature create { name: string; tag: string; }
//! expr seen { create(name, tag | name == current_name) }
//! zero_or_more { create(n, t) }; within (>300) { seen }
//! ```
//!
//! Layout is free-form, `//` starts a line comment, and a leading `#!` line
//! is ignored.

mod ast;
mod lexer;
mod parser;
mod pretty;

use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use parser::parse_spec;
pub use pretty::pretty;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecErrorKind {
    Lexical,
    Syntax,
    DuplicateName,
    UnresolvedReference,
    ArityMismatch,
    CyclicReference,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct SpecError {
    pub pos: Pos,
    pub kind: SpecErrorKind,
    pub message: String,
}

impl SpecError {
    pub fn new(pos: Pos, kind: SpecErrorKind, message: String) -> Self {
        SpecError { pos, kind, message }
    }

    /// `<file>:<line>:<col>: <message>`
    pub fn with_file(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

/// Returns the main expression with every named-expression reference
/// replaced by its definition.
pub fn resolve(ast: &SpecAst) -> ExprNode {
    inline(&ast.main, ast)
}

/// Inlines references inside an arbitrary expression of `ast`.
pub fn inline(expr: &ExprNode, ast: &SpecAst) -> ExprNode {
    match expr {
        ExprNode::Ref(name) => {
            let def = ast
                .expr(name)
                .unwrap_or_else(|| panic!("unresolved reference `{name}` in a validated spec"));
            inline(&def.body, ast)
        }
        ExprNode::EventAtom { .. } => expr.clone(),
        ExprNode::Seq(xs) => ExprNode::Seq(xs.iter().map(|x| inline(x, ast)).collect()),
        ExprNode::OneOf(xs) => ExprNode::OneOf(xs.iter().map(|x| inline(x, ast)).collect()),
        ExprNode::ZeroOrMore(b) => ExprNode::star(inline(b, ast)),
        ExprNode::Within { cmp, bound, body } => ExprNode::within(*cmp, *bound, inline(body, ast)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SPEC_5MIN: &str = include_str!("../../specs/failed_5min.symon");

    #[test]
    fn parses_the_deployment_spec() {
        let ast = parse_spec(SPEC_5MIN).unwrap();
        let vars: Vec<&str> = ast.vars.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(vars, ["current_name", "current_tag"]);
        let sigs: Vec<(&str, usize)> = ast
            .signatures
            .iter()
            .map(|s| (s.name.as_str(), s.arity()))
            .collect();
        assert_eq!(sigs, [("create", 2), ("fetch", 2)]);
        let exprs: Vec<&str> = ast.exprs.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(exprs, ["ignore_any", "ignore_irrelevant", "failed"]);
        assert_eq!(
            ast.main,
            ExprNode::Seq(vec![
                ExprNode::Ref("ignore_any".into()),
                ExprNode::Ref("failed".into())
            ])
        );
    }

    #[test]
    fn minimal_spec() {
        let ast = parse_spec("signature a { x: string; } a(x)").unwrap();
        assert_eq!(ast.signatures.len(), 1);
        assert_eq!(ast.main, ExprNode::atom("a", &["x"], None));
    }

    #[test]
    fn bound_change_only_changes_the_bound() {
        let a = parse_spec(SPEC_5MIN).unwrap();
        let b = parse_spec(&SPEC_5MIN.replace("within (>300)", "within (>600)")).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.with_bound(600), b);
    }

    #[test]
    fn resolve_inlines_everything() {
        let ast = parse_spec(SPEC_5MIN).unwrap();
        let main = resolve(&ast);
        assert!(!main.contains_ref());
        assert!(main.depth() >= 5, "depth {}", main.depth());
        assert_eq!(main.count_within(), 1);
    }

    #[test]
    fn resolve_keeps_plain_atoms() {
        let ast = parse_spec("signature a { x: string; } a(x)").unwrap();
        assert_eq!(resolve(&ast), ast.main);
    }

    #[test]
    fn resolve_is_transitive() {
        let ast = parse_spec("signature e { x: string; } expr A { B } expr B { e(x) } A").unwrap();
        assert_eq!(resolve(&ast), ExprNode::atom("e", &["x"], None));
    }

    fn err(src: &str) -> SpecError {
        parse_spec(src).unwrap_err()
    }

    #[test]
    fn positioned_errors() {
        let e = err("signature a { x: string; }\na(x) ; ?");
        assert_eq!(e.kind, SpecErrorKind::Lexical);
        assert_eq!(e.pos, Pos { line: 2, col: 8 });

        let e = err("signature a { x: string; } a(x");
        assert_eq!(e.kind, SpecErrorKind::Syntax);

        let e = err("signature a { x: string; } signature a { y: string; } a(x)");
        assert_eq!(e.kind, SpecErrorKind::DuplicateName);
        assert_eq!(e.pos, Pos { line: 1, col: 38 });

        let e = err("signature a { x: string; } b(x)");
        assert_eq!(e.kind, SpecErrorKind::UnresolvedReference);

        let e = err("signature a { x: string; } nothing");
        assert_eq!(e.kind, SpecErrorKind::UnresolvedReference);

        let e = err("signature a { x: string; } a(x, y)");
        assert_eq!(e.kind, SpecErrorKind::ArityMismatch);

        let e = err("signature a { x: string; } expr A { a(x); B } expr B { A } A");
        assert_eq!(e.kind, SpecErrorKind::CyclicReference);

        let e = err("signature a { x: string; } expr A { A } a(x)");
        assert_eq!(e.kind, SpecErrorKind::CyclicReference);
    }

    #[test]
    fn guard_identifiers_must_resolve() {
        let e = err("signature a { x: string; } a(x | x == y)");
        assert_eq!(e.kind, SpecErrorKind::UnresolvedReference);
        assert_eq!(e.pos, Pos { line: 1, col: 39 });
        assert!(parse_spec("var { y: string; } signature a { x: string; } a(x | x == y)").is_ok());
    }

    #[test]
    fn binders_may_not_shadow_globals() {
        let e = err("var { x: string; } signature a { x: string; } a(x)");
        assert_eq!(e.kind, SpecErrorKind::DuplicateName);
    }

    #[test]
    fn guard_precedence() {
        let ast = parse_spec(
            "var { g: string; } signature a { x: string; y: string; } a(x, y | x == g || y == g && x != \"k\")",
        )
        .unwrap();
        let ExprNode::EventAtom { guard: Some(g), .. } = ast.main else {
            panic!()
        };
        assert!(matches!(g, Guard::Or(_, ref r) if matches!(**r, Guard::And(_, _))));
    }

    #[test]
    fn comments_and_shebang() {
        let src =
            "#!/usr/local/bin/symon -dnf\n// hello\nsignature a { x: string; } // trailing\n a(x)";
        assert!(parse_spec(src).is_ok());
    }

    #[test]
    fn error_display_includes_file() {
        let e = err("signature a { x: string; } b(x)");
        assert_eq!(
            e.with_file("spec.symon"),
            "spec.symon:1:28: unknown signature `b`"
        );
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!(
            "signature a {{ x: string; }} {}a(x){}",
            "zero_or_more { ".repeat(10_000),
            " }".repeat(10_000)
        );
        assert_eq!(err(&src).kind, SpecErrorKind::Syntax);
    }
}
