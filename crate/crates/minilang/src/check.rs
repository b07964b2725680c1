//! Static checking ("compilation") for MiniLang trees.
//!
//! A tree compiles when every file parses and the whole program passes name
//! resolution, arity checking, and simple type checking. The same machinery
//! is exposed for reuse: [`Symbols`] is an owned snapshot of every class
//! signature, and [`Scope`] answers resolution and typing questions inside a
//! method body, which the refactoring engine relies on to find the
//! occurrences a rename must touch.
//!
//! Rules, briefly:
//! - class names share one global namespace regardless of package;
//! - field names, method names, and parameter names are unique per owner;
//! - locals may not shadow parameters or other locals (fields are fine);
//! - bare names resolve local, then parameter, then own field;
//! - a bare call resolves to an own method first, then to a zero-argument
//!   constructor of a class with that name;
//! - `null` is assignable to `String` and class types only;
//! - arithmetic and ordering operators take `int`s, logic takes `boolean`s,
//!   and `==`/`!=` take operands of one shared type.

use std::collections::BTreeMap;
use std::fmt;

use crate::ast::*;
use crate::lexer::{lex, LexError, Token};
use crate::parser::{parse_tokens, SyntaxError};
use crate::tree::SourceTree;

/// One checker finding, formatted `path:line:col: message`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Diagnostic {
    pub path: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path, self.line, self.col, self.message)
    }
}

impl From<SyntaxError> for Diagnostic {
    fn from(e: SyntaxError) -> Self {
        Diagnostic {
            path: e.path,
            line: e.line,
            col: e.col,
            message: e.message,
        }
    }
}

/// Static type of an expression. `Null` and `Void` exist only during
/// checking; declarations always carry a concrete [`TypeName`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprType {
    Void,
    Null,
    Ty(TypeName),
}

impl ExprType {
    pub fn assignable_to(&self, target: &TypeName) -> bool {
        match self {
            ExprType::Ty(t) => t == target,
            ExprType::Null => is_ref(target),
            ExprType::Void => false,
        }
    }

    pub fn describe(&self) -> &str {
        match self {
            ExprType::Void => "void",
            ExprType::Null => "null",
            ExprType::Ty(t) => t.as_str(),
        }
    }
}

fn is_ref(t: &TypeName) -> bool {
    matches!(t, TypeName::Str | TypeName::Class(_))
}

/// A typing failure, positioned by token span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeError {
    pub span: Span,
    pub message: String,
}

impl TypeError {
    fn new(span: Span, message: impl Into<String>) -> Self {
        TypeError {
            span,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSig {
    pub params: Vec<(String, TypeName)>,
    pub return_type: Option<TypeName>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassInfo {
    pub package: String,
    /// Tree-relative path of the declaring file.
    pub path: String,
    pub fields: Vec<(String, TypeName)>,
    pub methods: Vec<(String, MethodSig)>,
}

impl ClassInfo {
    pub fn field_type(&self, name: &str) -> Option<&TypeName> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn method_sig(&self, name: &str) -> Option<&MethodSig> {
        self.methods.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

/// Owned signature table for a whole program. On duplicate declarations the
/// first occurrence (in path order) wins, so resolution stays deterministic
/// even while the checker reports the duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Symbols {
    pub classes: BTreeMap<String, ClassInfo>,
}

impl Symbols {
    pub fn from_units(units: &[CompilationUnit]) -> Symbols {
        let mut classes = BTreeMap::new();
        for unit in units {
            for class in &unit.classes {
                if class.name == "String" || classes.contains_key(&class.name) {
                    continue;
                }
                let mut fields: Vec<(String, TypeName)> = Vec::new();
                for f in &class.fields {
                    if !fields.iter().any(|(n, _)| *n == f.name) {
                        fields.push((f.name.clone(), f.ty.clone()));
                    }
                }
                let mut methods: Vec<(String, MethodSig)> = Vec::new();
                for m in &class.methods {
                    if !methods.iter().any(|(n, _)| *n == m.name) {
                        methods.push((
                            m.name.clone(),
                            MethodSig {
                                params: m.params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect(),
                                return_type: m.return_type.clone(),
                            },
                        ));
                    }
                }
                classes.insert(
                    class.name.clone(),
                    ClassInfo {
                        package: unit.package_name.clone(),
                        path: unit.path.clone(),
                        fields,
                        methods,
                    },
                );
            }
        }
        Symbols { classes }
    }

    pub fn class(&self, name: &str) -> Option<&ClassInfo> {
        self.classes.get(name)
    }

    fn type_exists(&self, ty: &TypeName) -> bool {
        match ty {
            TypeName::Class(n) => self.classes.contains_key(n),
            _ => true,
        }
    }
}

/// Resolution context inside one method body: the signature table, the
/// enclosing class, and a stack of local-variable frames (parameters at the
/// bottom).
#[derive(Debug, Clone)]
pub struct Scope<'s> {
    symbols: &'s Symbols,
    class_name: String,
    frames: Vec<Vec<(String, TypeName)>>,
}

impl<'s> Scope<'s> {
    pub fn for_method(symbols: &'s Symbols, class_name: &str, method: &MethodDecl) -> Self {
        let params = method
            .params
            .iter()
            .map(|p| (p.name.clone(), p.ty.clone()))
            .collect();
        Scope {
            symbols,
            class_name: class_name.to_string(),
            frames: vec![params],
        }
    }

    pub fn symbols(&self) -> &'s Symbols {
        self.symbols
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn enter(&mut self) {
        self.frames.push(Vec::new());
    }

    pub fn exit(&mut self) {
        self.frames.pop();
    }

    /// Declares a local in the innermost frame. Returns `false` (without
    /// declaring) if the name is already a parameter or local.
    pub fn declare(&mut self, name: &str, ty: TypeName) -> bool {
        if self.lookup_var(name).is_some() {
            return false;
        }
        self.frames
            .last_mut()
            .expect("scope has a frame")
            .push((name.to_string(), ty));
        true
    }

    /// Resolves a name to a parameter or local, innermost frame first.
    pub fn lookup_var(&self, name: &str) -> Option<&TypeName> {
        self.frames
            .iter()
            .rev()
            .find_map(|frame| frame.iter().find(|(n, _)| n == name).map(|(_, t)| t))
    }

    /// True when a bare `name` here resolves to a field of the enclosing
    /// class rather than to a parameter or local.
    pub fn resolves_to_own_field(&self, name: &str) -> bool {
        self.lookup_var(name).is_none()
            && self
                .symbols
                .class(&self.class_name)
                .is_some_and(|c| c.field_type(name).is_some())
    }

    /// True when a bare `name(...)` call here resolves to the constructor of
    /// class `name` rather than to an own method.
    pub fn resolves_to_constructor(&self, name: &str) -> bool {
        self.symbols
            .class(&self.class_name)
            .is_some_and(|c| c.method_sig(name).is_none())
            && self.symbols.class(name).is_some()
    }

    /// Best-effort static type of `e` in this scope.
    pub fn type_of(&self, e: &Expr) -> Result<ExprType, TypeError> {
        match e {
            Expr::IntLit(..) => Ok(ExprType::Ty(TypeName::Int)),
            Expr::BoolLit(..) => Ok(ExprType::Ty(TypeName::Boolean)),
            Expr::StrLit(..) => Ok(ExprType::Ty(TypeName::Str)),
            Expr::NullLit(_) => Ok(ExprType::Null),
            Expr::Paren(inner, _) => self.type_of(inner),
            Expr::Name(name, span) => {
                if let Some(ty) = self.lookup_var(name) {
                    return Ok(ExprType::Ty(ty.clone()));
                }
                if let Some(class) = self.symbols.class(&self.class_name) {
                    if let Some(ty) = class.field_type(name) {
                        return Ok(ExprType::Ty(ty.clone()));
                    }
                }
                Err(TypeError::new(*span, format!("unknown name '{name}'")))
            }
            Expr::FieldAccess { recv, field, span } => {
                let recv_ty = self.type_of(recv)?;
                match &recv_ty {
                    ExprType::Ty(TypeName::Class(c)) => {
                        let info = self
                            .symbols
                            .class(c)
                            .ok_or_else(|| TypeError::new(*span, format!("unknown class '{c}'")))?;
                        match info.field_type(field) {
                            Some(ty) => Ok(ExprType::Ty(ty.clone())),
                            None => Err(TypeError::new(
                                *span,
                                format!("unknown field '{field}' in class '{c}'"),
                            )),
                        }
                    }
                    other => Err(TypeError::new(
                        *span,
                        format!("cannot access field '{}' on {}", field, other.describe()),
                    )),
                }
            }
            Expr::Call {
                recv: None,
                name,
                args,
                span,
            } => {
                if let Some(sig) = self
                    .symbols
                    .class(&self.class_name)
                    .and_then(|c| c.method_sig(name))
                {
                    return self.check_call(name, sig, args, *span);
                }
                if self.symbols.class(name).is_some() {
                    if !args.is_empty() {
                        return Err(TypeError::new(
                            *span,
                            format!("constructor '{name}()' takes no arguments"),
                        ));
                    }
                    return Ok(ExprType::Ty(TypeName::Class(name.clone())));
                }
                Err(TypeError::new(
                    *span,
                    format!("unknown method '{}' in class '{}'", name, self.class_name),
                ))
            }
            Expr::Call {
                recv: Some(recv),
                name,
                args,
                span,
            } => {
                let recv_ty = self.type_of(recv)?;
                match &recv_ty {
                    ExprType::Ty(TypeName::Class(c)) => {
                        let info = self
                            .symbols
                            .class(c)
                            .ok_or_else(|| TypeError::new(*span, format!("unknown class '{c}'")))?;
                        match info.method_sig(name) {
                            Some(sig) => self.check_call(name, sig, args, *span),
                            None => Err(TypeError::new(
                                *span,
                                format!("unknown method '{name}' in class '{c}'"),
                            )),
                        }
                    }
                    other => Err(TypeError::new(
                        *span,
                        format!("cannot call a method on {}", other.describe()),
                    )),
                }
            }
            Expr::Unary { op, operand, span } => {
                let t = self.type_of(operand)?;
                let (want, give) = match op {
                    UnOp::Not => (TypeName::Boolean, "boolean"),
                    UnOp::Neg => (TypeName::Int, "int"),
                };
                if t == ExprType::Ty(want.clone()) {
                    Ok(ExprType::Ty(want))
                } else {
                    Err(TypeError::new(
                        *span,
                        format!("operator '{}' expects {give}, found {}", op.symbol(), t.describe()),
                    ))
                }
            }
            Expr::Binary { op, lhs, rhs, span } => {
                let l = self.type_of(lhs)?;
                let r = self.type_of(rhs)?;
                let int = ExprType::Ty(TypeName::Int);
                let boolean = ExprType::Ty(TypeName::Boolean);
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                        if l == int && r == int {
                            Ok(int)
                        } else {
                            Err(TypeError::new(
                                *span,
                                format!(
                                    "operator '{}' expects int operands, found {} and {}",
                                    op.symbol(),
                                    l.describe(),
                                    r.describe()
                                ),
                            ))
                        }
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if l == int && r == int {
                            Ok(boolean)
                        } else {
                            Err(TypeError::new(
                                *span,
                                format!(
                                    "operator '{}' expects int operands, found {} and {}",
                                    op.symbol(),
                                    l.describe(),
                                    r.describe()
                                ),
                            ))
                        }
                    }
                    BinOp::And | BinOp::Or => {
                        if l == boolean && r == boolean {
                            Ok(boolean)
                        } else {
                            Err(TypeError::new(
                                *span,
                                format!(
                                    "operator '{}' expects boolean operands, found {} and {}",
                                    op.symbol(),
                                    l.describe(),
                                    r.describe()
                                ),
                            ))
                        }
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if comparable(&l, &r) {
                            Ok(boolean)
                        } else {
                            Err(TypeError::new(
                                *span,
                                format!("cannot compare {} and {}", l.describe(), r.describe()),
                            ))
                        }
                    }
                }
            }
        }
    }

    fn check_call(
        &self,
        name: &str,
        sig: &MethodSig,
        args: &[Expr],
        span: Span,
    ) -> Result<ExprType, TypeError> {
        if args.len() != sig.params.len() {
            return Err(TypeError::new(
                span,
                format!(
                    "method '{}' expects {} argument(s), got {}",
                    name,
                    sig.params.len(),
                    args.len()
                ),
            ));
        }
        for (arg, (_, want)) in args.iter().zip(&sig.params) {
            let got = self.type_of(arg)?;
            if !got.assignable_to(want) {
                return Err(TypeError::new(
                    arg.span(),
                    format!("type mismatch: expected {}, found {}", want.as_str(), got.describe()),
                ));
            }
        }
        Ok(match &sig.return_type {
            Some(t) => ExprType::Ty(t.clone()),
            None => ExprType::Void,
        })
    }
}

fn comparable(l: &ExprType, r: &ExprType) -> bool {
    match (l, r) {
        (ExprType::Void, _) | (_, ExprType::Void) => false,
        (ExprType::Null, ExprType::Null) => true,
        (ExprType::Null, ExprType::Ty(t)) | (ExprType::Ty(t), ExprType::Null) => is_ref(t),
        (ExprType::Ty(a), ExprType::Ty(b)) => a == b,
    }
}

/// Checks a whole tree. An empty result means the tree compiles.
/// Diagnostics come back sorted by path, then position.
pub fn check_tree(tree: &SourceTree) -> Vec<Diagnostic> {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let mut parsed: Vec<(CompilationUnit, Vec<Token>)> = Vec::new();

    for (path, text) in tree.iter() {
        match lex(text) {
            Err(e) => diags.push(lex_diag(path, e)),
            Ok(tokens) => match parse_tokens(&tokens, path) {
                Err(e) => diags.push(e.into()),
                Ok(unit) => parsed.push((unit, tokens)),
            },
        }
    }

    let units: Vec<CompilationUnit> = parsed.iter().map(|(u, _)| u.clone()).collect();
    let symbols = Symbols::from_units(&units);

    // Global duplicate-class pass, first declaration wins.
    let mut seen_classes: BTreeMap<&str, &str> = BTreeMap::new();
    for (unit, tokens) in &parsed {
        for class in &unit.classes {
            if class.name == "String" {
                diags.push(at(
                    &unit.path,
                    tokens,
                    class.span,
                    "class name 'String' conflicts with the built-in String type".to_string(),
                ));
            } else if let Some(first) = seen_classes.get(class.name.as_str()) {
                diags.push(at(
                    &unit.path,
                    tokens,
                    class.span,
                    format!("duplicate class '{}' (first declared in {})", class.name, first),
                ));
            } else {
                seen_classes.insert(&class.name, &unit.path);
            }
        }
    }

    for (unit, tokens) in &parsed {
        check_unit(unit, tokens, &symbols, &mut diags);
    }

    diags.sort();
    diags
}

/// Convenience wrapper over [`check_tree`].
pub fn compiles(tree: &SourceTree) -> bool {
    check_tree(tree).is_empty()
}

fn check_unit(unit: &CompilationUnit, tokens: &[Token], symbols: &Symbols, diags: &mut Vec<Diagnostic>) {
    for class in &unit.classes {
        let mut field_names: Vec<&str> = Vec::new();
        for field in &class.fields {
            if field_names.contains(&field.name.as_str()) {
                diags.push(at(
                    &unit.path,
                    tokens,
                    field.span,
                    format!("duplicate field '{}' in class '{}'", field.name, class.name),
                ));
            } else {
                field_names.push(&field.name);
            }
            if !symbols.type_exists(&field.ty) {
                diags.push(at(
                    &unit.path,
                    tokens,
                    field.span,
                    format!("unknown type '{}'", field.ty.as_str()),
                ));
            }
        }

        let mut method_names: Vec<&str> = Vec::new();
        for method in &class.methods {
            if method_names.contains(&method.name.as_str()) {
                diags.push(at(
                    &unit.path,
                    tokens,
                    method.span,
                    format!("duplicate method '{}' in class '{}'", method.name, class.name),
                ));
            } else {
                method_names.push(&method.name);
            }
            let mut param_names: Vec<&str> = Vec::new();
            for param in &method.params {
                if param_names.contains(&param.name.as_str()) {
                    diags.push(at(
                        &unit.path,
                        tokens,
                        param.span,
                        format!("duplicate parameter '{}'", param.name),
                    ));
                } else {
                    param_names.push(&param.name);
                }
                if !symbols.type_exists(&param.ty) {
                    diags.push(at(
                        &unit.path,
                        tokens,
                        param.span,
                        format!("unknown type '{}'", param.ty.as_str()),
                    ));
                }
            }
            if let Some(ret) = &method.return_type {
                if !symbols.type_exists(ret) {
                    diags.push(at(
                        &unit.path,
                        tokens,
                        method.span,
                        format!("unknown type '{}'", ret.as_str()),
                    ));
                }
            }

            let mut ck = BodyCk {
                path: &unit.path,
                tokens,
                symbols,
                ret: method.return_type.clone(),
                diags,
            };
            let mut scope = Scope::for_method(symbols, &class.name, method);
            ck.block(&method.body, &mut scope);
        }
    }
}

struct BodyCk<'a> {
    path: &'a str,
    tokens: &'a [Token],
    symbols: &'a Symbols,
    ret: Option<TypeName>,
    diags: &'a mut Vec<Diagnostic>,
}

impl BodyCk<'_> {
    fn diag(&mut self, span: Span, message: String) {
        self.diags.push(at(self.path, self.tokens, span, message));
    }

    /// Types `e`, reporting any failure. `None` means already reported.
    fn expr_ty(&mut self, e: &Expr, scope: &Scope) -> Option<ExprType> {
        match scope.type_of(e) {
            Ok(t) => Some(t),
            Err(te) => {
                self.diag(te.span, te.message);
                None
            }
        }
    }

    fn block(&mut self, stmts: &[Stmt], scope: &mut Scope) {
        for stmt in stmts {
            self.stmt(stmt, scope);
        }
    }

    fn stmt(&mut self, stmt: &Stmt, scope: &mut Scope) {
        match stmt {
            Stmt::VarDecl { ty, name, init, span } => {
                if !self.symbols.type_exists(ty) {
                    self.diag(*span, format!("unknown type '{}'", ty.as_str()));
                }
                // The initializer is checked before the declaration takes
                // effect, so `int x = x;` is an unknown name.
                if let Some(init) = init {
                    if let Some(got) = self.expr_ty(init, scope) {
                        if !got.assignable_to(ty) {
                            self.diag(
                                init.span(),
                                format!(
                                    "type mismatch: expected {}, found {}",
                                    ty.as_str(),
                                    got.describe()
                                ),
                            );
                        }
                    }
                }
                if !scope.declare(name, ty.clone()) {
                    self.diag(*span, format!("variable '{name}' is already declared"));
                }
            }
            Stmt::Assign { target, value, .. } => {
                let target_ty = self.expr_ty(target, scope);
                let value_ty = self.expr_ty(value, scope);
                if let (Some(ExprType::Ty(want)), Some(got)) = (target_ty, value_ty) {
                    if !got.assignable_to(&want) {
                        self.diag(
                            value.span(),
                            format!(
                                "type mismatch: expected {}, found {}",
                                want.as_str(),
                                got.describe()
                            ),
                        );
                    }
                }
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                self.cond(cond, scope);
                scope.enter();
                self.block(then_branch, scope);
                scope.exit();
                match else_branch {
                    Some(ElseBranch::Block(stmts)) => {
                        scope.enter();
                        self.block(stmts, scope);
                        scope.exit();
                    }
                    Some(ElseBranch::If(nested)) => self.stmt(nested, scope),
                    None => {}
                }
            }
            Stmt::While { cond, body, .. } => {
                self.cond(cond, scope);
                scope.enter();
                self.block(body, scope);
                scope.exit();
            }
            Stmt::Return { value, span } => match (&self.ret.clone(), value) {
                (None, Some(v)) => {
                    self.expr_ty(v, scope);
                    self.diag(*span, "cannot return a value from a void method".to_string());
                }
                (None, None) => {}
                (Some(want), None) => {
                    self.diag(*span, format!("missing return value: expected {}", want.as_str()));
                }
                (Some(want), Some(v)) => {
                    if let Some(got) = self.expr_ty(v, scope) {
                        if !got.assignable_to(want) {
                            self.diag(
                                v.span(),
                                format!(
                                    "type mismatch: expected {}, found {}",
                                    want.as_str(),
                                    got.describe()
                                ),
                            );
                        }
                    }
                }
            },
            Stmt::ExprStmt { expr, .. } => {
                self.expr_ty(expr, scope);
            }
            Stmt::Assert { cond, .. } => {
                if let Some(t) = self.expr_ty(cond, scope) {
                    if t != ExprType::Ty(TypeName::Boolean) {
                        self.diag(
                            cond.span(),
                            format!("assert condition must be boolean, found {}", t.describe()),
                        );
                    }
                }
            }
        }
    }

    fn cond(&mut self, cond: &Expr, scope: &Scope) {
        if let Some(t) = self.expr_ty(cond, scope) {
            if t != ExprType::Ty(TypeName::Boolean) {
                self.diag(
                    cond.span(),
                    format!("condition must be boolean, found {}", t.describe()),
                );
            }
        }
    }
}

fn at(path: &str, tokens: &[Token], span: Span, message: String) -> Diagnostic {
    let (line, col) = tokens
        .get(span.start)
        .or_else(|| tokens.last())
        .map(|t| (t.line, t.col))
        .unwrap_or((1, 1));
    Diagnostic {
        path: path.to_string(),
        line,
        col,
        message,
    }
}

fn lex_diag(path: &str, e: LexError) -> Diagnostic {
    let (line, col) = match e {
        LexError::UnterminatedString { line, col }
        | LexError::UnterminatedComment { line, col }
        | LexError::UnexpectedChar { line, col, .. } => (line, col),
    };
    Diagnostic {
        path: path.to_string(),
        line,
        col,
        message: e.to_string(),
    }
}
