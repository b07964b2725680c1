//! Structural fingerprints used to match program elements across versions.
//!
//! A fingerprint is a digest of an element's token stream with every
//! identifier *declared inside the element* α-renamed to a positional
//! placeholder. Literals are kept verbatim. Renaming an element (or
//! anything it declares) therefore leaves its fingerprint unchanged,
//! while any other token edit changes it — which is exactly the
//! threshold-free signal rename detection needs.

use minilang::ast::{ClassDecl, CompilationUnit, FieldDecl, MethodDecl, Stmt};
use minilang::lexer::{lex, Token, TokenKind};
use minilang::render::{render_method, render_unit};
use sha2::{Digest, Sha256};

/// Hex digest of a token stream. Tokens are joined with an unlexable
/// separator so no two distinct streams collide textually.
fn digest(tokens: &[String]) -> String {
    let mut hasher = Sha256::new();
    for tok in tokens {
        hasher.update(tok.as_bytes());
        hasher.update([0x1f]);
    }
    format!("{:x}", hasher.finalize())
}

/// Replaces identifier tokens that appear in `declared` with positional
/// placeholders (`⟨0⟩`, `⟨1⟩`, ...). Position is the name's index in
/// `declared`, so two elements declaring the same shapes in the same
/// order normalize identically regardless of spelling.
fn normalize(tokens: Vec<Token>, declared: &[String]) -> Vec<String> {
    tokens
        .into_iter()
        .map(|tok| {
            if tok.kind == TokenKind::Ident {
                if let Some(pos) = declared.iter().position(|d| *d == tok.text) {
                    return format!("\u{27e8}{pos}\u{27e9}");
                }
            }
            tok.text
        })
        .collect()
}

/// Names declared by a method: its own name, its parameters, then every
/// local in statement walk order.
fn method_declared(method: &MethodDecl) -> Vec<String> {
    let mut names = vec![method.name.clone()];
    names.extend(method.params.iter().map(|p| p.name.clone()));
    collect_locals(&method.body, &mut names);
    names
}

fn collect_locals(stmts: &[Stmt], out: &mut Vec<String>) {
    for stmt in stmts {
        match stmt {
            Stmt::VarDecl { name, .. } => out.push(name.clone()),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_locals(then_branch, out);
                match else_branch {
                    Some(minilang::ast::ElseBranch::Block(stmts)) => collect_locals(stmts, out),
                    Some(minilang::ast::ElseBranch::If(stmt)) => {
                        collect_locals(std::slice::from_ref(stmt), out)
                    }
                    None => {}
                }
            }
            Stmt::While { body, .. } => collect_locals(body, out),
            _ => {}
        }
    }
}

fn lex_rendered(text: &str) -> Vec<Token> {
    lex(text).expect("rendered source always lexes")
}

/// Fingerprint of a method body (including its signature tokens).
pub fn method_fingerprint(method: &MethodDecl) -> String {
    let declared = method_declared(method);
    let tokens = lex_rendered(&render_method(method));
    digest(&normalize(tokens, &declared))
}

/// Fingerprint of a field declaration. Only the type survives
/// normalization, so fields pair by type.
pub fn field_fingerprint(field: &FieldDecl) -> String {
    digest(&[field.ty.as_str().to_string(), "\u{27e8}0\u{27e9}".to_string(), ";".to_string()])
}

/// Fingerprint of a whole class declaration. The class's own name and
/// everything its members declare are normalized; references to other
/// classes and all literals stay verbatim.
pub fn class_fingerprint(class: &ClassDecl) -> String {
    let mut declared = vec![class.name.clone()];
    declared.extend(class.fields.iter().map(|f| f.name.clone()));
    declared.extend(class.methods.iter().map(|m| m.name.clone()));
    for method in &class.methods {
        declared.extend(method.params.iter().map(|p| p.name.clone()));
        collect_locals(&method.body, &mut declared);
    }
    // Dedupe while keeping first-declaration positions stable.
    let mut seen = std::collections::HashSet::new();
    declared.retain(|n| seen.insert(n.clone()));

    let unit = CompilationUnit {
        path: String::new(),
        package_name: "x".to_string(),
        classes: vec![class.clone()],
        span: minilang::ast::Span::default(),
    };
    let tokens = lex_rendered(&render_unit(&unit));
    // Drop the synthetic `package x ;` prefix.
    let body_start = tokens
        .iter()
        .position(|t| t.text == ";")
        .map(|i| i + 1)
        .unwrap_or(0);
    digest(&normalize(tokens.into_iter().skip(body_start).collect(), &declared))
}

/// Fingerprint of a package: the stems and token streams of its
/// compilation units (sorted by path) with the package name normalized.
/// Two packages pair exactly when they hold the same files with the same
/// contents apart from the `package` declaration itself.
pub fn package_fingerprint(units: &[&CompilationUnit]) -> String {
    let mut entries: Vec<(String, Vec<String>)> = units
        .iter()
        .map(|unit| {
            let stem = file_stem(&unit.path).to_string();
            let tokens = lex_rendered(&render_unit(unit));
            let decl_end = tokens
                .iter()
                .position(|t| t.text == ";")
                .map(|i| i + 1)
                .unwrap_or(0);
            let mut stream = vec!["\u{27e8}pkg\u{27e9}".to_string()];
            stream.extend(tokens.into_iter().skip(decl_end).map(|t| t.text));
            (stem, stream)
        })
        .collect();
    entries.sort();

    let mut flat = Vec::new();
    for (stem, stream) in entries {
        flat.push(stem);
        flat.extend(stream);
    }
    digest(&flat)
}

/// The file name without directories or the extension.
pub fn file_stem(path: &str) -> &str {
    let name = path.rsplit('/').next().unwrap_or(path);
    name.strip_suffix(".ml4j").unwrap_or(name)
}
