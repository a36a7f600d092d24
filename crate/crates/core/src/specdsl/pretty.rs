use std::fmt::Write;

use super::ast::*;

/// Renders a specification back to source text that parses to the same AST.
pub fn pretty(ast: &SpecAst) -> String {
    let mut out = String::new();
    if !ast.vars.is_empty() {
        out.push_str("var {\n");
        for v in &ast.vars {
            let _ = writeln!(out, "    {}: {};", v.name, v.ty);
        }
        out.push_str("}\n");
    }
    for sig in &ast.signatures {
        let _ = writeln!(out, "signature {} {{", sig.name);
        for f in &sig.fields {
            let _ = writeln!(out, "    {}: {};", f.name, f.ty);
        }
        out.push_str("}\n");
    }
    for def in &ast.exprs {
        let _ = writeln!(out, "expr {} {{", def.name);
        write_expr(&mut out, &def.body, 1);
        out.push_str("\n}\n");
    }
    write_expr(&mut out, &ast.main, 0);
    out.push('\n');
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn write_block(out: &mut String, e: &ExprNode, level: usize) {
    out.push_str("{\n");
    write_expr(out, e, level + 1);
    out.push('\n');
    indent(out, level);
    out.push('}');
}

fn write_expr(out: &mut String, e: &ExprNode, level: usize) {
    match e {
        ExprNode::Seq(items) => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(";\n");
                }
                write_term(out, item, level);
            }
        }
        other => write_term(out, other, level),
    }
}

fn write_term(out: &mut String, e: &ExprNode, level: usize) {
    indent(out, level);
    match e {
        ExprNode::EventAtom {
            signature,
            binders,
            guard,
        } => {
            let _ = write!(out, "{signature}({}", binders.join(", "));
            if let Some(g) = guard {
                out.push_str(" | ");
                write_guard(out, g, 0);
            }
            out.push(')');
        }
        ExprNode::Ref(name) => out.push_str(name),
        ExprNode::OneOf(branches) => {
            out.push_str("one_of ");
            for (i, b) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(" or ");
                }
                write_block(out, b, level);
            }
        }
        ExprNode::ZeroOrMore(b) => {
            out.push_str("zero_or_more ");
            write_block(out, b, level);
        }
        ExprNode::Within { cmp, bound, body } => {
            let _ = write!(out, "within ({cmp}{bound}) ");
            write_block(out, body, level);
        }
        // The parser never nests `Seq` directly; hand-built trees that do are
        // printed flattened.
        ExprNode::Seq(_) => {
            out.truncate(out.len() - 4 * level);
            write_expr(out, e, level);
        }
    }
}

/// Precedence: 0 = `||`, 1 = `&&`, 2 = comparison.
fn write_guard(out: &mut String, g: &Guard, ctx: u8) {
    match g {
        Guard::Cmp { lhs, op, rhs } => {
            write_operand(out, lhs);
            out.push_str(match op {
                GuardOp::Eq => " == ",
                GuardOp::Neq => " != ",
            });
            write_operand(out, rhs);
        }
        Guard::Or(a, b) => {
            if ctx > 0 {
                out.push('(');
            }
            write_guard(out, a, 0);
            out.push_str(" || ");
            // `||` is left-associative; a right-nested `||` needs parentheses.
            write_guard(out, b, 1);
            if ctx > 0 {
                out.push(')');
            }
        }
        Guard::And(a, b) => {
            if ctx > 1 {
                out.push('(');
            }
            write_guard(out, a, 1);
            out.push_str(" && ");
            write_guard(out, b, 2);
            if ctx > 1 {
                out.push(')');
            }
        }
    }
}

fn write_operand(out: &mut String, o: &Operand) {
    match o {
        Operand::Ident(name) => out.push_str(name),
        Operand::Literal(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
    }
}
