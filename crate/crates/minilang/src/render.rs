//! Canonical source rendering.
//!
//! Rendering is byte-deterministic: structurally equal trees render to
//! identical text, and `parse(render(u))` reproduces `u` including token
//! spans. Every statement occupies its own line, which gives line-level
//! change units a stable meaning.

use crate::ast::*;

const INDENT: &str = "    ";

pub fn render_unit(unit: &CompilationUnit) -> String {
    let mut out = String::new();
    out.push_str("package ");
    out.push_str(&unit.package_name);
    out.push_str(";\n");
    for class in &unit.classes {
        out.push('\n');
        render_class(class, &mut out);
    }
    out
}

fn render_class(class: &ClassDecl, out: &mut String) {
    out.push_str("class ");
    out.push_str(&class.name);
    out.push_str(" {\n");
    for field in &class.fields {
        out.push_str(INDENT);
        out.push_str(field.ty.as_str());
        out.push(' ');
        out.push_str(&field.name);
        out.push_str(";\n");
    }
    for (i, method) in class.methods.iter().enumerate() {
        if i > 0 || !class.fields.is_empty() {
            out.push('\n');
        }
        push_method(method, 1, out);
    }
    out.push_str("}\n");
}

/// Renders a single method at class-member indentation. Used both by the
/// whole-unit renderer and when method declarations travel as text.
pub fn render_method(method: &MethodDecl) -> String {
    let mut out = String::new();
    push_method(method, 1, &mut out);
    out
}

fn push_method(method: &MethodDecl, depth: usize, out: &mut String) {
    push_indent(depth, out);
    match &method.return_type {
        Some(ty) => out.push_str(ty.as_str()),
        None => out.push_str("void"),
    }
    out.push(' ');
    out.push_str(&method.name);
    out.push('(');
    for (i, p) in method.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(p.ty.as_str());
        out.push(' ');
        out.push_str(&p.name);
    }
    out.push_str(") {\n");
    for stmt in &method.body {
        push_stmt(stmt, depth + 1, out);
    }
    push_indent(depth, out);
    out.push_str("}\n");
}

/// Renders one statement at the given indent depth (0 = no indent).
pub fn render_stmt(stmt: &Stmt, depth: usize) -> String {
    let mut out = String::new();
    push_stmt(stmt, depth, &mut out);
    out
}

fn push_indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn push_stmt(stmt: &Stmt, depth: usize, out: &mut String) {
    match stmt {
        Stmt::VarDecl { ty, name, init, .. } => {
            push_indent(depth, out);
            out.push_str(ty.as_str());
            out.push(' ');
            out.push_str(name);
            if let Some(init) = init {
                out.push_str(" = ");
                out.push_str(&render_expr(init));
            }
            out.push_str(";\n");
        }
        Stmt::Assign { target, value, .. } => {
            push_indent(depth, out);
            out.push_str(&render_expr(target));
            out.push_str(" = ");
            out.push_str(&render_expr(value));
            out.push_str(";\n");
        }
        Stmt::If { .. } => {
            push_indent(depth, out);
            push_if(stmt, depth, out);
        }
        Stmt::While { cond, body, .. } => {
            push_indent(depth, out);
            out.push_str("while (");
            out.push_str(&render_expr(cond));
            out.push_str(") {\n");
            for s in body {
                push_stmt(s, depth + 1, out);
            }
            push_indent(depth, out);
            out.push_str("}\n");
        }
        Stmt::Return { value, .. } => {
            push_indent(depth, out);
            match value {
                Some(v) => {
                    out.push_str("return ");
                    out.push_str(&render_expr(v));
                    out.push_str(";\n");
                }
                None => out.push_str("return;\n"),
            }
        }
        Stmt::ExprStmt { expr, .. } => {
            push_indent(depth, out);
            out.push_str(&render_expr(expr));
            out.push_str(";\n");
        }
        Stmt::Assert { cond, .. } => {
            push_indent(depth, out);
            out.push_str("assert ");
            out.push_str(&render_expr(cond));
            out.push_str(";\n");
        }
    }
}

/// Renders an if-statement assuming the leading indent is already emitted,
/// so `else if` chains stay on the closing-brace line.
fn push_if(stmt: &Stmt, depth: usize, out: &mut String) {
    let Stmt::If { cond, then_branch, else_branch, .. } = stmt else {
        unreachable!("push_if called on non-if");
    };
    out.push_str("if (");
    out.push_str(&render_expr(cond));
    out.push_str(") {\n");
    for s in then_branch {
        push_stmt(s, depth + 1, out);
    }
    push_indent(depth, out);
    out.push('}');
    match else_branch {
        None => out.push('\n'),
        Some(ElseBranch::Block(stmts)) => {
            out.push_str(" else {\n");
            for s in stmts {
                push_stmt(s, depth + 1, out);
            }
            push_indent(depth, out);
            out.push_str("}\n");
        }
        Some(ElseBranch::If(nested)) => {
            out.push_str(" else ");
            push_if(nested, depth, out);
        }
    }
}

pub fn render_expr(expr: &Expr) -> String {
    let mut out = String::new();
    push_expr(expr, &mut out);
    out
}

fn push_expr(expr: &Expr, out: &mut String) {
    match expr {
        Expr::IntLit(v, _) => out.push_str(&v.to_string()),
        Expr::BoolLit(b, _) => out.push_str(if *b { "true" } else { "false" }),
        Expr::StrLit(raw, _) => {
            out.push('"');
            out.push_str(raw);
            out.push('"');
        }
        Expr::NullLit(_) => out.push_str("null"),
        Expr::Name(n, _) => out.push_str(n),
        Expr::FieldAccess { recv, field, .. } => {
            push_expr(recv, out);
            out.push('.');
            out.push_str(field);
        }
        Expr::Call { recv, name, args, .. } => {
            if let Some(recv) = recv {
                push_expr(recv, out);
                out.push('.');
            }
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                push_expr(a, out);
            }
            out.push(')');
        }
        Expr::Unary { op, operand, .. } => {
            out.push_str(op.symbol());
            push_expr(operand, out);
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            push_expr(lhs, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            push_expr(rhs, out);
        }
        Expr::Paren(inner, _) => {
            out.push('(');
            push_expr(inner, out);
            out.push(')');
        }
    }
}
