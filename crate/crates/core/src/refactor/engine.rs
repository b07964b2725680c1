//! Reapplication of detected refactorings onto the older version.
//!
//! A [`ReapplyPlan`] either applies fully or not at all: the first
//! conflict (missing subject, occupied target name, or a result that no
//! longer passes checks) abandons the whole plan and the caller falls
//! back to the unrefactored tree. Renames rewrite declarations, every
//! reference, and — for classes and packages — the file paths named
//! after them. The whole tree is rewritten, tests included, so the old
//! version's tests keep compiling against the refactored sources.

use std::collections::BTreeMap;

use minilang::ast::{
    ClassDecl, CompilationUnit, ElseBranch, Expr, MethodDecl, Span, Stmt, TypeName,
};
use minilang::check::{check_tree, ExprType, Scope, Symbols};
use minilang::interp::{run_cases, TestCase, DEFAULT_STEP_BUDGET};
use minilang::lexer::{lex, TokenKind};
use minilang::parser::parse;
use minilang::render::{render_method, render_unit};
use minilang::SourceTree;
use thiserror::Error;

use super::miner::{expr_tokens, stmts_tokens, substituted_body_tokens};
use super::{Refactoring, RefactoringKind};

/// An ordered list of refactorings to replay, with room for notes the
/// pipeline attaches (e.g. why a plan was abandoned).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReapplyPlan {
    pub refactorings: Vec<Refactoring>,
    pub notes: Vec<String>,
}

impl ReapplyPlan {
    pub fn new(refactorings: Vec<Refactoring>) -> Self {
        ReapplyPlan {
            refactorings,
            notes: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.refactorings.is_empty()
    }
}

impl From<Vec<Refactoring>> for ReapplyPlan {
    fn from(refactorings: Vec<Refactoring>) -> Self {
        ReapplyPlan::new(refactorings)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("cannot reapply {refactoring}: {reason}")]
pub struct ReapplyConflict {
    pub refactoring: String,
    pub reason: String,
}

impl ReapplyConflict {
    fn new(refactoring: impl ToString, reason: impl Into<String>) -> Self {
        ReapplyConflict {
            refactoring: refactoring.to_string(),
            reason: reason.into(),
        }
    }
}

/// Replays `plan` on `base`, returning the refactoring-included tree.
///
/// Renames are applied before extracts (extract parameters are spelled
/// in post-rename names, as detected from the newer version); within a
/// kind, plan order is preserved.
pub fn reapply(base: &SourceTree, plan: &ReapplyPlan) -> Result<SourceTree, ReapplyConflict> {
    if plan.is_empty() {
        return Ok(base.clone());
    }
    let mut units = base
        .parse_all()
        .map_err(|e| ReapplyConflict::new("plan", format!("base tree does not parse: {e}")))?;

    let mut ordered: Vec<&Refactoring> = plan.refactorings.iter().collect();
    ordered.sort_by_key(|r| phase(r.kind()));
    for refactoring in ordered {
        apply_one(&mut units, refactoring)
            .map_err(|reason| ReapplyConflict::new(refactoring, reason))?;
    }

    let mut files = BTreeMap::new();
    for unit in &units {
        if files.insert(unit.path.clone(), render_unit(unit)).is_some() {
            return Err(ReapplyConflict::new(
                "plan",
                format!("file path collision at '{}'", unit.path),
            ));
        }
    }
    let tree = SourceTree::from_files(files.iter().map(|(p, t)| (p.as_str(), t.as_str())));
    let diagnostics = check_tree(&tree);
    if let Some(first) = diagnostics.first() {
        return Err(ReapplyConflict::new(
            "plan",
            format!("refactored tree fails checks: {first}"),
        ));
    }
    Ok(tree)
}

/// True iff both trees report identical per-test outcomes for `suite`.
pub fn verify_behavior(base: &SourceTree, refactored: &SourceTree, suite: &[TestCase]) -> bool {
    let (Ok(base_units), Ok(refactored_units)) = (base.parse_all(), refactored.parse_all()) else {
        return false;
    };
    let before = run_cases(&base_units, suite, DEFAULT_STEP_BUDGET);
    let after = run_cases(&refactored_units, suite, DEFAULT_STEP_BUDGET);
    before.results == after.results
}

fn phase(kind: RefactoringKind) -> u8 {
    match kind {
        RefactoringKind::RenameVariable => 0,
        RefactoringKind::RenameParameter => 1,
        RefactoringKind::RenameField => 2,
        RefactoringKind::RenameMethod => 3,
        RefactoringKind::RenameClass => 4,
        RefactoringKind::RenamePackage => 5,
        RefactoringKind::ExtractMethod => 6,
        RefactoringKind::ExtractVariable => 7,
    }
}

fn apply_one(units: &mut Vec<CompilationUnit>, refactoring: &Refactoring) -> Result<(), String> {
    match refactoring {
        Refactoring::RenamePackage { old, new } => rename_package(units, old, new),
        Refactoring::RenameClass { package, old, new } => rename_class(units, package, old, new),
        Refactoring::RenameField { class, old, new } => rename_field(units, class, old, new),
        Refactoring::RenameMethod { class, old, new } => rename_method(units, class, old, new),
        Refactoring::RenameParameter {
            class,
            method,
            old,
            new,
        } => rename_parameter(units, class, method, old, new),
        Refactoring::RenameVariable {
            class,
            method,
            old,
            new,
        } => rename_variable(units, class, method, old, new),
        Refactoring::ExtractMethod {
            class,
            source_method,
            new_method,
            new_method_text,
            call_text,
            span,
        } => extract_method(units, class, source_method, new_method, new_method_text, call_text, *span),
        Refactoring::ExtractVariable {
            class,
            method,
            var_name,
            var_type,
            initializer,
        } => extract_variable(units, class, method, var_name, var_type, initializer),
    }
}

// ---------------------------------------------------------------------------
// Lookup helpers

fn find_class(units: &[CompilationUnit], name: &str) -> Option<(usize, usize)> {
    units.iter().enumerate().find_map(|(ui, unit)| {
        unit.classes
            .iter()
            .position(|c| c.name == name)
            .map(|ci| (ui, ci))
    })
}

fn class_exists(units: &[CompilationUnit], name: &str) -> bool {
    find_class(units, name).is_some()
}

/// Identifier tokens anywhere in a class's rendering.
fn class_has_ident(class: &ClassDecl, name: &str) -> bool {
    if class.name == name || class.fields.iter().any(|f| f.name == name || f.ty.as_str() == name) {
        return true;
    }
    class.methods.iter().any(|m| method_has_ident(m, name))
}

fn method_has_ident(method: &MethodDecl, name: &str) -> bool {
    lex(&render_method(method))
        .expect("rendered method lexes")
        .iter()
        .any(|t| t.kind == TokenKind::Ident && t.text == name)
}

// ---------------------------------------------------------------------------
// Read-only and name-only expression walks

fn for_each_expr<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Expr)) {
    fn expr<'a>(e: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
        f(e);
        match e {
            Expr::FieldAccess { recv, .. } => expr(recv, f),
            Expr::Call { recv, args, .. } => {
                if let Some(r) = recv {
                    expr(r, f);
                }
                for a in args {
                    expr(a, f);
                }
            }
            Expr::Unary { operand, .. } => expr(operand, f),
            Expr::Binary { lhs, rhs, .. } => {
                expr(lhs, f);
                expr(rhs, f);
            }
            Expr::Paren(inner, _) => expr(inner, f),
            _ => {}
        }
    }
    for stmt in stmts {
        match stmt {
            Stmt::VarDecl { init, .. } => {
                if let Some(e) = init {
                    expr(e, f);
                }
            }
            Stmt::Assign { target, value, .. } => {
                expr(target, f);
                expr(value, f);
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                expr(cond, f);
                for_each_expr(then_branch, f);
                match else_branch {
                    Some(ElseBranch::Block(stmts)) => for_each_expr(stmts, f),
                    Some(ElseBranch::If(stmt)) => for_each_expr(std::slice::from_ref(stmt), f),
                    None => {}
                }
            }
            Stmt::While { cond, body, .. } => {
                expr(cond, f);
                for_each_expr(body, f);
            }
            Stmt::Return { value, .. } => {
                if let Some(e) = value {
                    expr(e, f);
                }
            }
            Stmt::ExprStmt { expr: e, .. } => expr(e, f),
            Stmt::Assert { cond, .. } => expr(cond, f),
        }
    }
}

fn has_bare_call(class: &ClassDecl, name: &str) -> bool {
    let mut found = false;
    for method in &class.methods {
        for_each_expr(&method.body, &mut |e| {
            if let Expr::Call {
                recv: None,
                name: n,
                ..
            } = e
            {
                if n == name {
                    found = true;
                }
            }
        });
    }
    found
}

/// Renames every bare `Expr::Name(old)` in the statements. Correct for
/// parameters, which cannot be shadowed.
fn rename_names(stmts: &mut [Stmt], old: &str, new: &str) {
    fn expr(e: &mut Expr, old: &str, new: &str) {
        match e {
            Expr::Name(n, _) => {
                if n == old {
                    *n = new.to_string();
                }
            }
            Expr::FieldAccess { recv, .. } => expr(recv, old, new),
            Expr::Call { recv, args, .. } => {
                if let Some(r) = recv {
                    expr(r, old, new);
                }
                for a in args {
                    expr(a, old, new);
                }
            }
            Expr::Unary { operand, .. } => expr(operand, old, new),
            Expr::Binary { lhs, rhs, .. } => {
                expr(lhs, old, new);
                expr(rhs, old, new);
            }
            Expr::Paren(inner, _) => expr(inner, old, new),
            _ => {}
        }
    }
    for stmt in stmts {
        match stmt {
            Stmt::VarDecl { init, .. } => {
                if let Some(e) = init {
                    expr(e, old, new);
                }
            }
            Stmt::Assign { target, value, .. } => {
                expr(target, old, new);
                expr(value, old, new);
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                expr(cond, old, new);
                rename_names(then_branch, old, new);
                match else_branch {
                    Some(ElseBranch::Block(stmts)) => rename_names(stmts, old, new),
                    Some(ElseBranch::If(stmt)) => {
                        rename_names(std::slice::from_mut(stmt.as_mut()), old, new)
                    }
                    None => {}
                }
            }
            Stmt::While { cond, body, .. } => {
                expr(cond, old, new);
                rename_names(body, old, new);
            }
            Stmt::Return { value, .. } => {
                if let Some(e) = value {
                    expr(e, old, new);
                }
            }
            Stmt::ExprStmt { expr: e, .. } => expr(e, old, new),
            Stmt::Assert { cond, .. } => expr(cond, old, new),
        }
    }
}

// ---------------------------------------------------------------------------
// Scope-aware reference rewriting

enum Rewrite<'a> {
    Field {
        class: &'a str,
        old: &'a str,
        new: &'a str,
    },
    Method {
        class: &'a str,
        old: &'a str,
        new: &'a str,
    },
    Constructor {
        old: &'a str,
        new: &'a str,
    },
}

/// Rewrites references across the whole tree with full scope tracking,
/// resolving receiers against a pre-rewrite snapshot of the symbols.
fn rewrite_tree(units: &mut [CompilationUnit], rw: &Rewrite) {
    let snapshot: Vec<CompilationUnit> = units.to_vec();
    let symbols = Symbols::from_units(&snapshot);
    for unit in units.iter_mut() {
        for class in unit.classes.iter_mut() {
            let class_name = class.name.clone();
            for method in class.methods.iter_mut() {
                let proto = method.clone();
                let mut scope = Scope::for_method(&symbols, &class_name, &proto);
                rewrite_stmts(&mut method.body, &mut scope, &class_name, rw);
            }
        }
    }
}

fn rewrite_stmts(stmts: &mut [Stmt], scope: &mut Scope, class_name: &str, rw: &Rewrite) {
    for stmt in stmts {
        match stmt {
            Stmt::VarDecl { ty, name, init, .. } => {
                if let Some(e) = init {
                    rewrite_expr(e, scope, class_name, rw);
                }
                scope.declare(name, ty.clone());
            }
            Stmt::Assign { target, value, .. } => {
                rewrite_expr(target, scope, class_name, rw);
                rewrite_expr(value, scope, class_name, rw);
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                rewrite_expr(cond, scope, class_name, rw);
                scope.enter();
                rewrite_stmts(then_branch, scope, class_name, rw);
                scope.exit();
                match else_branch {
                    Some(ElseBranch::Block(stmts)) => {
                        scope.enter();
                        rewrite_stmts(stmts, scope, class_name, rw);
                        scope.exit();
                    }
                    Some(ElseBranch::If(stmt)) => {
                        rewrite_stmts(std::slice::from_mut(stmt.as_mut()), scope, class_name, rw)
                    }
                    None => {}
                }
            }
            Stmt::While { cond, body, .. } => {
                rewrite_expr(cond, scope, class_name, rw);
                scope.enter();
                rewrite_stmts(body, scope, class_name, rw);
                scope.exit();
            }
            Stmt::Return { value, .. } => {
                if let Some(e) = value {
                    rewrite_expr(e, scope, class_name, rw);
                }
            }
            Stmt::ExprStmt { expr, .. } => rewrite_expr(expr, scope, class_name, rw),
            Stmt::Assert { cond, .. } => rewrite_expr(cond, scope, class_name, rw),
        }
    }
}

fn recv_class(scope: &Scope, recv: &Expr) -> Option<String> {
    match scope.type_of(recv) {
        Ok(ExprType::Ty(TypeName::Class(c))) => Some(c),
        _ => None,
    }
}

fn rewrite_expr(e: &mut Expr, scope: &Scope, class_name: &str, rw: &Rewrite) {
    match e {
        Expr::Name(n, _) => {
            if let Rewrite::Field { class, old, new } = rw {
                if n == old && class_name == *class && scope.resolves_to_own_field(old) {
                    *n = new.to_string();
                }
            }
        }
        Expr::FieldAccess { recv, field, .. } => {
            // Type the receiver before rewriting it: resolution must see
            // pre-rewrite names, matching the symbols snapshot.
            let recv_ty = recv_class(scope, recv);
            rewrite_expr(recv, scope, class_name, rw);
            if let Rewrite::Field { class, old, new } = rw {
                if field == old && recv_ty.as_deref() == Some(class) {
                    *field = new.to_string();
                }
            }
        }
        Expr::Call {
            recv, name, args, ..
        } => {
            let recv_ty = recv.as_deref().and_then(|r| recv_class(scope, r));
            if let Some(r) = recv {
                rewrite_expr(r, scope, class_name, rw);
            }
            for a in args.iter_mut() {
                rewrite_expr(a, scope, class_name, rw);
            }
            match rw {
                Rewrite::Method { class, old, new } if name == old => {
                    let applies = match (&recv, recv_ty.as_deref()) {
                        (Some(_), Some(c)) => c == *class,
                        (None, _) => class_name == *class,
                        _ => false,
                    };
                    if applies {
                        *name = new.to_string();
                    }
                }
                Rewrite::Constructor { old, new } => {
                    if recv.is_none() && name == old && scope.resolves_to_constructor(old) {
                        *name = new.to_string();
                    }
                }
                _ => {}
            }
        }
        Expr::Unary { operand, .. } => rewrite_expr(operand, scope, class_name, rw),
        Expr::Binary { lhs, rhs, .. } => {
            rewrite_expr(lhs, scope, class_name, rw);
            rewrite_expr(rhs, scope, class_name, rw);
        }
        Expr::Paren(inner, _) => rewrite_expr(inner, scope, class_name, rw),
        _ => {}
    }
}

// ---------------------------------------------------------------------------
// Rename kinds

/// Maps `dir/stem.ext` under an optional `tests/` root.
fn map_package_path(path: &str, old_dir: &str, new_dir: &str) -> Option<String> {
    let (root, rest) = match path.strip_prefix(minilang::TEST_ROOT) {
        Some(rest) => (minilang::TEST_ROOT, rest),
        None => ("", path),
    };
    let tail = rest.strip_prefix(old_dir)?;
    if tail.contains('/') {
        return None;
    }
    Some(format!("{root}{new_dir}{tail}"))
}

fn rename_package(units: &mut [CompilationUnit], old: &str, new: &str) -> Result<(), String> {
    if !units.iter().any(|u| u.package_name == old) {
        return Err(format!("package '{old}' not found"));
    }
    if units.iter().any(|u| u.package_name == new) {
        return Err(format!("package '{new}' already exists"));
    }
    let old_dir = format!("{}/", old.replace('.', "/"));
    let new_dir = format!("{}/", new.replace('.', "/"));
    for unit in units.iter_mut() {
        if unit.package_name == old {
            unit.package_name = new.to_string();
            if let Some(mapped) = map_package_path(&unit.path, &old_dir, &new_dir) {
                unit.path = mapped;
            }
        }
    }
    Ok(())
}

fn rename_class(
    units: &mut [CompilationUnit],
    package: &str,
    old: &str,
    new: &str,
) -> Result<(), String> {
    let (ui, ci) = find_class(units, old).ok_or_else(|| format!("class '{old}' not found"))?;
    if units[ui].package_name != package {
        return Err(format!(
            "class '{old}' is in package '{}', not '{package}'",
            units[ui].package_name
        ));
    }
    if new == "String" {
        return Err("the name 'String' is reserved for the built-in type".to_string());
    }
    if class_exists(units, new) {
        return Err(format!("class '{new}' already exists"));
    }

    // Constructor calls resolve against the old name, so rewrite them
    // before touching the declaration.
    rewrite_tree(units, &Rewrite::Constructor { old, new });

    // Every type annotation spelling the old name.
    for unit in units.iter_mut() {
        for class in unit.classes.iter_mut() {
            for field in class.fields.iter_mut() {
                retype(&mut field.ty, old, new);
            }
            for method in class.methods.iter_mut() {
                if let Some(ty) = method.return_type.as_mut() {
                    retype(ty, old, new);
                }
                for param in method.params.iter_mut() {
                    retype(&mut param.ty, old, new);
                }
                retype_stmts(&mut method.body, old, new);
            }
        }
    }

    units[ui].classes[ci].name = new.to_string();

    // One public class per file: a file named after the class follows it.
    let path = &units[ui].path;
    let (dir, file) = path.rsplit_once('/').map_or(("", path.as_str()), |(d, f)| (d, f));
    if file == format!("{old}.{}", minilang::DEFAULT_EXTENSION) {
        let renamed = if dir.is_empty() {
            format!("{new}.{}", minilang::DEFAULT_EXTENSION)
        } else {
            format!("{dir}/{new}.{}", minilang::DEFAULT_EXTENSION)
        };
        units[ui].path = renamed;
    }
    Ok(())
}

fn retype(ty: &mut TypeName, old: &str, new: &str) {
    if let TypeName::Class(name) = ty {
        if name == old {
            *name = new.to_string();
        }
    }
}

fn retype_stmts(stmts: &mut [Stmt], old: &str, new: &str) {
    for stmt in stmts {
        match stmt {
            Stmt::VarDecl { ty, .. } => retype(ty, old, new),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                retype_stmts(then_branch, old, new);
                match else_branch {
                    Some(ElseBranch::Block(stmts)) => retype_stmts(stmts, old, new),
                    Some(ElseBranch::If(stmt)) => {
                        retype_stmts(std::slice::from_mut(stmt.as_mut()), old, new)
                    }
                    None => {}
                }
            }
            Stmt::While { body, .. } => retype_stmts(body, old, new),
            _ => {}
        }
    }
}

fn rename_field(
    units: &mut [CompilationUnit],
    class: &str,
    old: &str,
    new: &str,
) -> Result<(), String> {
    let (ui, ci) = find_class(units, class).ok_or_else(|| format!("class '{class}' not found"))?;
    let decl = &units[ui].classes[ci];
    let idx = decl
        .fields
        .iter()
        .position(|f| f.name == old)
        .ok_or_else(|| format!("field '{old}' not found in class '{class}'"))?;
    if class_has_ident(decl, new) {
        return Err(format!("name '{new}' already occurs in class '{class}'"));
    }
    rewrite_tree(units, &Rewrite::Field { class, old, new });
    units[ui].classes[ci].fields[idx].name = new.to_string();
    Ok(())
}

fn rename_method(
    units: &mut [CompilationUnit],
    class: &str,
    old: &str,
    new: &str,
) -> Result<(), String> {
    let (ui, ci) = find_class(units, class).ok_or_else(|| format!("class '{class}' not found"))?;
    let decl = &units[ui].classes[ci];
    let idx = decl
        .methods
        .iter()
        .position(|m| m.name == old)
        .ok_or_else(|| format!("method '{old}' not found in class '{class}'"))?;
    if decl.methods.iter().any(|m| m.name == new) {
        return Err(format!("method '{new}' already exists in class '{class}'"));
    }
    if has_bare_call(decl, new) {
        return Err(format!(
            "a call to '{new}' inside class '{class}' would be captured"
        ));
    }
    rewrite_tree(units, &Rewrite::Method { class, old, new });
    units[ui].classes[ci].methods[idx].name = new.to_string();
    Ok(())
}

fn find_method<'a>(
    units: &'a mut [CompilationUnit],
    class: &str,
    method: &str,
) -> Result<&'a mut MethodDecl, String> {
    let (ui, ci) = find_class(units, class).ok_or_else(|| format!("class '{class}' not found"))?;
    units[ui].classes[ci]
        .methods
        .iter_mut()
        .find(|m| m.name == method)
        .ok_or_else(|| format!("method '{method}' not found in class '{class}'"))
}

fn rename_parameter(
    units: &mut [CompilationUnit],
    class: &str,
    method: &str,
    old: &str,
    new: &str,
) -> Result<(), String> {
    let decl = find_method(units, class, method)?;
    let Some(idx) = decl.params.iter().position(|p| p.name == old) else {
        return Err(format!("parameter '{old}' not found in '{class}.{method}'"));
    };
    if method_has_ident(decl, new) {
        return Err(format!("name '{new}' already occurs in '{class}.{method}'"));
    }
    decl.params[idx].name = new.to_string();
    rename_names(&mut decl.body, old, new);
    Ok(())
}

fn count_local_decls(stmts: &[Stmt], name: &str) -> usize {
    let mut count = 0;
    for stmt in stmts {
        match stmt {
            Stmt::VarDecl { name: n, .. } => {
                if n == name {
                    count += 1;
                }
            }
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                count += count_local_decls(then_branch, name);
                match else_branch {
                    Some(ElseBranch::Block(stmts)) => count += count_local_decls(stmts, name),
                    Some(ElseBranch::If(stmt)) => {
                        count += count_local_decls(std::slice::from_ref(stmt), name)
                    }
                    None => {}
                }
            }
            Stmt::While { body, .. } => count += count_local_decls(body, name),
            _ => {}
        }
    }
    count
}

/// Renames references only while the declaration is in scope: a local
/// may shadow a field, and bare names before the declaration must keep
/// referring to the field.
fn rename_local_block(stmts: &mut [Stmt], old: &str, new: &str, mut active: bool) {
    fn in_expr(e: &mut Expr, old: &str, new: &str, active: bool) {
        if active {
            rename_in_one_expr(e, old, new);
        }
    }
    for stmt in stmts {
        match stmt {
            Stmt::VarDecl { name, init, .. } => {
                if let Some(e) = init {
                    in_expr(e, old, new, active);
                }
                if name == old {
                    *name = new.to_string();
                    active = true;
                }
            }
            Stmt::Assign { target, value, .. } => {
                in_expr(target, old, new, active);
                in_expr(value, old, new, active);
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                in_expr(cond, old, new, active);
                rename_local_block(then_branch, old, new, active);
                match else_branch {
                    Some(ElseBranch::Block(stmts)) => rename_local_block(stmts, old, new, active),
                    Some(ElseBranch::If(stmt)) => {
                        rename_local_block(std::slice::from_mut(stmt.as_mut()), old, new, active)
                    }
                    None => {}
                }
            }
            Stmt::While { cond, body, .. } => {
                in_expr(cond, old, new, active);
                rename_local_block(body, old, new, active);
            }
            Stmt::Return { value, .. } => {
                if let Some(e) = value {
                    in_expr(e, old, new, active);
                }
            }
            Stmt::ExprStmt { expr, .. } => in_expr(expr, old, new, active),
            Stmt::Assert { cond, .. } => in_expr(cond, old, new, active),
        }
    }
}

fn rename_in_one_expr(e: &mut Expr, old: &str, new: &str) {
    let mut single = [Stmt::ExprStmt {
        expr: e.clone(),
        span: Span::default(),
    }];
    rename_names(&mut single, old, new);
    let Stmt::ExprStmt { expr, .. } = single[0].clone() else {
        unreachable!()
    };
    *e = expr;
}

fn rename_variable(
    units: &mut [CompilationUnit],
    class: &str,
    method: &str,
    old: &str,
    new: &str,
) -> Result<(), String> {
    let decl = find_method(units, class, method)?;
    match count_local_decls(&decl.body, old) {
        0 => return Err(format!("local '{old}' not found in '{class}.{method}'")),
        1 => {}
        _ => {
            return Err(format!(
                "local '{old}' is declared more than once in '{class}.{method}'"
            ))
        }
    }
    if method_has_ident(decl, new) {
        return Err(format!("name '{new}' already occurs in '{class}.{method}'"));
    }
    rename_local_block(&mut decl.body, old, new, false);
    Ok(())
}

// ---------------------------------------------------------------------------
// Extract kinds

fn parse_method_text(text: &str) -> Result<MethodDecl, String> {
    let src = format!("package x;\n\nclass X {{\n{text}}}\n");
    let mut unit =
        parse(&src, "<refactoring>").map_err(|e| format!("method text does not parse: {e}"))?;
    let class = unit.classes.remove(0);
    if class.methods.len() != 1 || !class.fields.is_empty() {
        return Err("method text must declare exactly one method".to_string());
    }
    Ok(class.methods.into_iter().next().unwrap())
}

fn parse_stmt_text(text: &str) -> Result<Stmt, String> {
    let src = format!("package x;\n\nclass X {{\n    void f() {{\n        {text}\n    }}\n}}\n");
    let mut unit =
        parse(&src, "<refactoring>").map_err(|e| format!("statement does not parse: {e}"))?;
    let mut body = unit.classes.remove(0).methods.remove(0).body;
    if body.len() != 1 {
        return Err("expected exactly one statement".to_string());
    }
    Ok(body.remove(0))
}

fn parse_expr_text(text: &str) -> Result<Expr, String> {
    let stmt = parse_stmt_text(&format!("return {text};"))
        .map_err(|e| format!("initializer does not parse: {e}"))?;
    match stmt {
        Stmt::Return { value: Some(e), .. } => Ok(e),
        _ => Err("initializer does not parse as an expression".to_string()),
    }
}

fn extract_method(
    units: &mut [CompilationUnit],
    class: &str,
    source_method: &str,
    new_method: &str,
    new_method_text: &str,
    call_text: &str,
    span: (usize, usize),
) -> Result<(), String> {
    let (ui, ci) = find_class(units, class).ok_or_else(|| format!("class '{class}' not found"))?;
    let decl = &units[ui].classes[ci];
    if decl.methods.iter().any(|m| m.name == new_method) {
        return Err(format!("method '{new_method}' already exists in class '{class}'"));
    }
    let src_idx = decl
        .methods
        .iter()
        .position(|m| m.name == source_method)
        .ok_or_else(|| format!("method '{source_method}' not found in class '{class}'"))?;

    let extracted = parse_method_text(new_method_text)?;
    if extracted.name != new_method {
        return Err(format!(
            "method text declares '{}', expected '{new_method}'",
            extracted.name
        ));
    }
    let call_stmt = parse_stmt_text(call_text)?;
    let Stmt::ExprStmt {
        expr: Expr::Call {
            recv: None,
            name,
            args,
            ..
        },
        ..
    } = &call_stmt
    else {
        return Err("replacement must be a bare call statement".to_string());
    };
    if name != new_method || args.len() != extracted.params.len() {
        return Err("call statement does not invoke the extracted method".to_string());
    }

    let (start, end) = span;
    let body_len = decl.methods[src_idx].body.len();
    if start >= end || end > body_len {
        return Err(format!(
            "span {start}..{end} is out of range for a {body_len}-statement body"
        ));
    }
    let needle = substituted_body_tokens(&extracted, args);
    let actual = stmts_tokens(&decl.methods[src_idx].body[start..end]);
    if actual != needle {
        return Err("statements in the span do not match the extracted method body".to_string());
    }

    let class_decl = &mut units[ui].classes[ci];
    class_decl.methods[src_idx].body.splice(start..end, [call_stmt]);
    class_decl.methods.insert(src_idx + 1, extracted);
    Ok(())
}

/// Replaces every expression whose token stream equals `needle` with a
/// bare name, outermost first. Returns the replacement count.
fn hoist_occurrences(stmts: &mut [Stmt], needle: &[String], name: &str) -> usize {
    fn in_expr(e: &mut Expr, needle: &[String], name: &str) -> usize {
        if expr_tokens(e) == needle {
            *e = Expr::Name(name.to_string(), Span::default());
            return 1;
        }
        match e {
            Expr::FieldAccess { recv, .. } => in_expr(recv, needle, name),
            Expr::Call { recv, args, .. } => {
                let mut n = 0;
                if let Some(r) = recv {
                    n += in_expr(r, needle, name);
                }
                n + args.iter_mut().map(|a| in_expr(a, needle, name)).sum::<usize>()
            }
            Expr::Unary { operand, .. } => in_expr(operand, needle, name),
            Expr::Binary { lhs, rhs, .. } => {
                in_expr(lhs, needle, name) + in_expr(rhs, needle, name)
            }
            Expr::Paren(inner, _) => in_expr(inner, needle, name),
            _ => 0,
        }
    }
    let mut count = 0;
    for stmt in stmts {
        match stmt {
            Stmt::VarDecl { init, .. } => {
                if let Some(e) = init {
                    count += in_expr(e, needle, name);
                }
            }
            Stmt::Assign { target, value, .. } => {
                count += in_expr(target, needle, name);
                count += in_expr(value, needle, name);
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                count += in_expr(cond, needle, name);
                count += hoist_occurrences(then_branch, needle, name);
                match else_branch {
                    Some(ElseBranch::Block(stmts)) => {
                        count += hoist_occurrences(stmts, needle, name)
                    }
                    Some(ElseBranch::If(stmt)) => {
                        count +=
                            hoist_occurrences(std::slice::from_mut(stmt.as_mut()), needle, name)
                    }
                    None => {}
                }
            }
            Stmt::While { cond, body, .. } => {
                count += in_expr(cond, needle, name);
                count += hoist_occurrences(body, needle, name);
            }
            Stmt::Return { value, .. } => {
                if let Some(e) = value {
                    count += in_expr(e, needle, name);
                }
            }
            Stmt::ExprStmt { expr, .. } => count += in_expr(expr, needle, name),
            Stmt::Assert { cond, .. } => count += in_expr(cond, needle, name),
        }
    }
    count
}

fn extract_variable(
    units: &mut [CompilationUnit],
    class: &str,
    method: &str,
    var_name: &str,
    var_type: &str,
    initializer: &str,
) -> Result<(), String> {
    let decl = find_method(units, class, method)?;
    if method_has_ident(decl, var_name) {
        return Err(format!(
            "name '{var_name}' already occurs in '{class}.{method}'"
        ));
    }
    let init_expr = parse_expr_text(initializer)?;
    let needle = expr_tokens(&init_expr);

    let insert_at = decl.body.iter().position(|stmt| {
        let tokens = stmts_tokens(std::slice::from_ref(stmt));
        tokens.windows(needle.len().max(1)).any(|w| w == &needle[..])
    });
    let Some(insert_at) = insert_at else {
        return Err(format!("initializer '{initializer}' not found in '{class}.{method}'"));
    };

    let replaced = hoist_occurrences(&mut decl.body, &needle, var_name);
    if replaced == 0 {
        return Err("initializer occurrences are not complete expressions".to_string());
    }
    decl.body.insert(
        insert_at,
        Stmt::VarDecl {
            ty: TypeName::parse(var_type),
            name: var_name.to_string(),
            init: Some(init_expr),
            span: Span::default(),
        },
    );
    Ok(())
}
