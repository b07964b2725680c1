//! Element matching and refactoring detection between two versions.
//!
//! Matching runs in two phases: elements with equal qualified names pair
//! first; the leftovers pair by [`fingerprint`](super::fingerprint)
//! equality inside a matched parent scope. Ambiguous fingerprint groups
//! (several candidates on either side) are left unmatched rather than
//! guessed — matching is exact and threshold-free.
//!
//! Detection then reads refactorings off the matching: fingerprint pairs
//! with differing names are renames; parameter and local renames align
//! declarations by position and type inside matched method pairs; the
//! extract kinds look for a new method or local whose body reproduces
//! part of the matched old method.

use std::collections::{BTreeMap, HashSet};

use minilang::ast::{CompilationUnit, Expr, MethodDecl, Stmt, TypeName};
use minilang::lexer::{lex, TokenKind};
use minilang::parser::SyntaxError;
use minilang::render::{render_expr, render_method, render_stmt};
use minilang::SourceTree;

use super::fingerprint;
use super::Refactoring;

/// The program element kinds that participate in matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementKind {
    Package,
    Class,
    Method,
    Field,
    Parameter,
    LocalVariable,
}

impl ElementKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ElementKind::Package => "package",
            ElementKind::Class => "class",
            ElementKind::Method => "method",
            ElementKind::Field => "field",
            ElementKind::Parameter => "parameter",
            ElementKind::LocalVariable => "local-variable",
        }
    }
}

/// One element of a version, as seen by the matcher.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeElement {
    pub kind: ElementKind,
    /// Dotted path: `pkg`, `pkg.Class`, or `pkg.Class.member`.
    pub qualified_name: String,
    /// Kind-specific: parameter types for methods, the type for fields.
    pub signature: String,
    pub body_fingerprint: String,
}

/// The cross-version matching: a partial bijection plus the leftovers.
#[derive(Debug, Clone, Default)]
pub struct ElementMatching {
    pub matched: Vec<(CodeElement, CodeElement)>,
    pub removed: Vec<CodeElement>,
    pub added: Vec<CodeElement>,
}

impl ElementMatching {
    /// The new-side qualified name an old element is matched to.
    pub fn new_name_of(&self, kind: ElementKind, old_qualified: &str) -> Option<&str> {
        self.matched
            .iter()
            .find(|(o, _)| o.kind == kind && o.qualified_name == old_qualified)
            .map(|(_, n)| n.qualified_name.as_str())
    }
}

// ---------------------------------------------------------------------------
// Version inventories

#[derive(Clone)]
struct ClassEntry {
    package: String,
    name: String,
    fingerprint: String,
}

#[derive(Clone)]
struct MemberEntry {
    package: String,
    class: String,
    name: String,
    unit_idx: usize,
    class_idx: usize,
    member_idx: usize,
    fingerprint: String,
    signature: String,
}

struct Side {
    units: Vec<CompilationUnit>,
    /// package name -> fingerprint
    packages: BTreeMap<String, String>,
    /// class simple name -> entry (class names are globally unique)
    classes: BTreeMap<String, ClassEntry>,
    /// `Class.method` -> entry
    methods: BTreeMap<String, MemberEntry>,
    /// `Class.field` -> entry
    fields: BTreeMap<String, MemberEntry>,
}

impl Side {
    fn build(tree: &SourceTree) -> Result<Side, SyntaxError> {
        let units = tree.main_only().parse_all()?;

        let mut by_package: BTreeMap<String, Vec<&CompilationUnit>> = BTreeMap::new();
        for unit in &units {
            by_package.entry(unit.package_name.clone()).or_default().push(unit);
        }
        let packages = by_package
            .iter()
            .map(|(name, members)| (name.clone(), fingerprint::package_fingerprint(members)))
            .collect();

        let mut classes = BTreeMap::new();
        let mut methods = BTreeMap::new();
        let mut fields = BTreeMap::new();
        for (unit_idx, unit) in units.iter().enumerate() {
            for (class_idx, class) in unit.classes.iter().enumerate() {
                classes.insert(
                    class.name.clone(),
                    ClassEntry {
                        package: unit.package_name.clone(),
                        name: class.name.clone(),
                        fingerprint: fingerprint::class_fingerprint(class),
                    },
                );
                for (member_idx, method) in class.methods.iter().enumerate() {
                    methods.insert(
                        format!("{}.{}", class.name, method.name),
                        MemberEntry {
                            package: unit.package_name.clone(),
                            class: class.name.clone(),
                            name: method.name.clone(),
                            unit_idx,
                            class_idx,
                            member_idx,
                            fingerprint: fingerprint::method_fingerprint(method),
                            signature: method_signature(method),
                        },
                    );
                }
                for (member_idx, field) in class.fields.iter().enumerate() {
                    fields.insert(
                        format!("{}.{}", class.name, field.name),
                        MemberEntry {
                            package: unit.package_name.clone(),
                            class: class.name.clone(),
                            name: field.name.clone(),
                            unit_idx,
                            class_idx,
                            member_idx,
                            fingerprint: fingerprint::field_fingerprint(field),
                            signature: field.ty.as_str().to_string(),
                        },
                    );
                }
            }
        }
        Ok(Side {
            units,
            packages,
            classes,
            methods,
            fields,
        })
    }

    fn method_decl(&self, entry: &MemberEntry) -> &MethodDecl {
        &self.units[entry.unit_idx].classes[entry.class_idx].methods[entry.member_idx]
    }
}

fn method_signature(method: &MethodDecl) -> String {
    let params: Vec<&str> = method.params.iter().map(|p| p.ty.as_str()).collect();
    format!("({})", params.join(", "))
}

// ---------------------------------------------------------------------------
// Matching

struct Matching {
    packages: Vec<(String, String)>,
    classes: Vec<(ClassEntry, ClassEntry)>,
    methods: Vec<(MemberEntry, MemberEntry)>,
    fields: Vec<(MemberEntry, MemberEntry)>,
    removed_methods: Vec<MemberEntry>,
    added_methods: Vec<MemberEntry>,
    removed_fields: Vec<MemberEntry>,
    added_fields: Vec<MemberEntry>,
    removed_classes: Vec<ClassEntry>,
    added_classes: Vec<ClassEntry>,
    removed_packages: Vec<String>,
    added_packages: Vec<String>,
}

/// Pairs the old-only and new-only entries of one kind by fingerprint,
/// scoped to a matched parent. A pair forms only when the (parent,
/// fingerprint) bucket is a singleton on both sides.
fn pair_by_fingerprint<E: Clone>(
    removed: Vec<E>,
    added: Vec<E>,
    parent_of_old: impl Fn(&E) -> Option<String>,
    parent_of_new: impl Fn(&E) -> String,
    fp: impl Fn(&E) -> String,
) -> (Vec<(E, E)>, Vec<E>, Vec<E>) {
    // Bucket key: (new-side parent, fingerprint). Old entries map their
    // parent through the parent matching; entries whose parent is
    // unmatched cannot pair.
    let mut old_buckets: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, e) in removed.iter().enumerate() {
        if let Some(parent) = parent_of_old(e) {
            old_buckets.entry((parent, fp(e))).or_default().push(i);
        }
    }
    let mut new_buckets: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, e) in added.iter().enumerate() {
        new_buckets.entry((parent_of_new(e), fp(e))).or_default().push(i);
    }

    let mut pairs = Vec::new();
    let mut used_old = HashSet::new();
    let mut used_new = HashSet::new();
    for (key, old_ids) in &old_buckets {
        if let Some(new_ids) = new_buckets.get(key) {
            if old_ids.len() == 1 && new_ids.len() == 1 {
                pairs.push((removed[old_ids[0]].clone(), added[new_ids[0]].clone()));
                used_old.insert(old_ids[0]);
                used_new.insert(new_ids[0]);
            }
        }
    }
    let removed_rest = removed
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !used_old.contains(i))
        .map(|(_, e)| e)
        .collect();
    let added_rest = added
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !used_new.contains(i))
        .map(|(_, e)| e)
        .collect();
    (pairs, removed_rest, added_rest)
}

fn compute_matching(old: &Side, new: &Side) -> Matching {
    // Packages: exact names, then fingerprints.
    let mut packages: Vec<(String, String)> = Vec::new();
    let removed: Vec<String> = old
        .packages
        .keys()
        .filter(|p| !new.packages.contains_key(*p))
        .cloned()
        .collect();
    let added: Vec<String> = new
        .packages
        .keys()
        .filter(|p| !old.packages.contains_key(*p))
        .cloned()
        .collect();
    for name in old.packages.keys() {
        if new.packages.contains_key(name) {
            packages.push((name.clone(), name.clone()));
        }
    }
    let (pairs, removed_packages, added_packages) = pair_by_fingerprint(
        removed,
        added,
        |_| Some(String::new()),
        |_| String::new(),
        |p: &String| old.packages.get(p).or_else(|| new.packages.get(p)).cloned().unwrap_or_default(),
    );
    packages.extend(pairs);
    let package_match: BTreeMap<&str, &str> = packages
        .iter()
        .map(|(o, n)| (o.as_str(), n.as_str()))
        .collect();

    // Classes: exact qualified names (package + simple name), then
    // fingerprints under a matched package.
    let mut classes: Vec<(ClassEntry, ClassEntry)> = Vec::new();
    let mut removed_c: Vec<ClassEntry> = Vec::new();
    let mut added_c: Vec<ClassEntry> = Vec::new();
    for (name, oe) in &old.classes {
        match new.classes.get(name) {
            Some(ne) if ne.package == oe.package => classes.push((oe.clone(), ne.clone())),
            _ => removed_c.push(oe.clone()),
        }
    }
    for (name, ne) in &new.classes {
        if !old
            .classes
            .get(name)
            .is_some_and(|oe| oe.package == ne.package)
        {
            added_c.push(ne.clone());
        }
    }
    let (pairs, removed_classes, added_classes) = pair_by_fingerprint(
        removed_c,
        added_c,
        |e: &ClassEntry| package_match.get(e.package.as_str()).map(|p| p.to_string()),
        |e: &ClassEntry| e.package.clone(),
        |e: &ClassEntry| e.fingerprint.clone(),
    );
    classes.extend(pairs);
    let class_match: BTreeMap<&str, &str> = classes
        .iter()
        .map(|(o, n)| (o.name.as_str(), n.name.as_str()))
        .collect();

    // Methods and fields: exact `pkg.Class.name`, then fingerprints under
    // a matched class.
    let member_phase = |old_members: &BTreeMap<String, MemberEntry>,
                        new_members: &BTreeMap<String, MemberEntry>|
     -> (Vec<(MemberEntry, MemberEntry)>, Vec<MemberEntry>, Vec<MemberEntry>) {
        let mut matched = Vec::new();
        let mut removed_m = Vec::new();
        let mut added_m = Vec::new();
        for (key, oe) in old_members {
            match new_members.get(key) {
                Some(ne) if ne.package == oe.package => matched.push((oe.clone(), ne.clone())),
                _ => removed_m.push(oe.clone()),
            }
        }
        for (key, ne) in new_members {
            if !old_members
                .get(key)
                .is_some_and(|oe| oe.package == ne.package)
            {
                added_m.push(ne.clone());
            }
        }
        let (pairs, removed_m, added_m) = pair_by_fingerprint(
            removed_m,
            added_m,
            |e: &MemberEntry| class_match.get(e.class.as_str()).map(|c| c.to_string()),
            |e: &MemberEntry| e.class.clone(),
            |e: &MemberEntry| e.fingerprint.clone(),
        );
        matched.extend(pairs);
        (matched, removed_m, added_m)
    };
    let (methods, removed_methods, added_methods) = member_phase(&old.methods, &new.methods);
    let (fields, removed_fields, added_fields) = member_phase(&old.fields, &new.fields);

    Matching {
        packages,
        classes,
        methods,
        fields,
        removed_methods,
        added_methods,
        removed_fields,
        added_fields,
        removed_classes,
        added_classes,
        removed_packages,
        added_packages,
    }
}

// ---------------------------------------------------------------------------
// Public operations

fn package_element(name: &str, fp: &str) -> CodeElement {
    CodeElement {
        kind: ElementKind::Package,
        qualified_name: name.to_string(),
        signature: String::new(),
        body_fingerprint: fp.to_string(),
    }
}

fn class_element(e: &ClassEntry) -> CodeElement {
    CodeElement {
        kind: ElementKind::Class,
        qualified_name: format!("{}.{}", e.package, e.name),
        signature: "class".to_string(),
        body_fingerprint: e.fingerprint.clone(),
    }
}

fn member_element(kind: ElementKind, e: &MemberEntry) -> CodeElement {
    CodeElement {
        kind,
        qualified_name: format!("{}.{}.{}", e.package, e.class, e.name),
        signature: e.signature.clone(),
        body_fingerprint: e.fingerprint.clone(),
    }
}

/// Matches program elements of the two versions. Test files do not
/// contribute elements.
pub fn match_elements(old: &SourceTree, new: &SourceTree) -> Result<ElementMatching, SyntaxError> {
    let old_side = Side::build(old)?;
    let new_side = Side::build(new)?;
    let m = compute_matching(&old_side, &new_side);

    let mut out = ElementMatching::default();
    for (o, n) in &m.packages {
        out.matched.push((
            package_element(o, &old_side.packages[o]),
            package_element(n, &new_side.packages[n]),
        ));
    }
    for (o, n) in &m.classes {
        out.matched.push((class_element(o), class_element(n)));
    }
    for (o, n) in &m.methods {
        out.matched.push((
            member_element(ElementKind::Method, o),
            member_element(ElementKind::Method, n),
        ));
    }
    for (o, n) in &m.fields {
        out.matched.push((
            member_element(ElementKind::Field, o),
            member_element(ElementKind::Field, n),
        ));
    }
    for p in &m.removed_packages {
        out.removed.push(package_element(p, &old_side.packages[p]));
    }
    for c in &m.removed_classes {
        out.removed.push(class_element(c));
    }
    for e in &m.removed_methods {
        out.removed.push(member_element(ElementKind::Method, e));
    }
    for e in &m.removed_fields {
        out.removed.push(member_element(ElementKind::Field, e));
    }
    for p in &m.added_packages {
        out.added.push(package_element(p, &new_side.packages[p]));
    }
    for c in &m.added_classes {
        out.added.push(class_element(c));
    }
    for e in &m.added_methods {
        out.added.push(member_element(ElementKind::Method, e));
    }
    for e in &m.added_fields {
        out.added.push(member_element(ElementKind::Field, e));
    }
    Ok(out)
}

/// Detects refactorings applied between `old` and `new`, in canonical
/// (kind, subject) order. Only the eight reapplicable kinds are
/// reported; anything else is left for validation to reject.
pub fn detect(old: &SourceTree, new: &SourceTree) -> Result<Vec<Refactoring>, SyntaxError> {
    let old_side = Side::build(old)?;
    let new_side = Side::build(new)?;
    let m = compute_matching(&old_side, &new_side);
    let mut out = Vec::new();

    for (o, n) in &m.packages {
        if o != n {
            out.push(Refactoring::RenamePackage {
                old: o.clone(),
                new: n.clone(),
            });
        }
    }
    for (o, n) in &m.classes {
        if o.name != n.name {
            out.push(Refactoring::RenameClass {
                package: o.package.clone(),
                old: o.name.clone(),
                new: n.name.clone(),
            });
        }
    }
    for (o, n) in &m.fields {
        if o.name != n.name {
            out.push(Refactoring::RenameField {
                class: o.class.clone(),
                old: o.name.clone(),
                new: n.name.clone(),
            });
        }
    }

    for (o, n) in &m.methods {
        let om = old_side.method_decl(o);
        let nm = new_side.method_decl(n);
        if o.name != n.name {
            out.push(Refactoring::RenameMethod {
                class: o.class.clone(),
                old: o.name.clone(),
                new: n.name.clone(),
            });
        }
        detect_parameter_renames(o, om, nm, &mut out);
        let before = out.len();
        detect_variable_renames(o, om, nm, &mut out);
        // A declaration that a variable rename just accounted for is not
        // a new extraction, even though its initializer also occurs in
        // the old body.
        let renamed: HashSet<String> = out[before..]
            .iter()
            .filter_map(|r| match r {
                Refactoring::RenameVariable { new, .. } => Some(new.clone()),
                _ => None,
            })
            .collect();
        detect_extract_variables(o, om, nm, &renamed, &mut out);
    }

    detect_extract_methods(&old_side, &new_side, &m, &mut out);

    out.sort_by_key(|r| r.sort_key());
    out.dedup();
    Ok(out)
}

/// Identifier tokens appearing anywhere in a method's rendering.
fn ident_tokens(method: &MethodDecl) -> HashSet<String> {
    lex(&render_method(method))
        .expect("rendered method lexes")
        .into_iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .map(|t| t.text)
        .collect()
}

/// All token texts of a method's rendering, in order.
fn method_tokens(method: &MethodDecl) -> Vec<String> {
    lex(&render_method(method))
        .expect("rendered method lexes")
        .into_iter()
        .map(|t| t.text)
        .collect()
}

pub(crate) fn expr_tokens(expr: &Expr) -> Vec<String> {
    lex(&render_expr(expr))
        .expect("rendered expression lexes")
        .into_iter()
        .map(|t| t.text)
        .collect()
}

pub(crate) fn stmts_tokens(stmts: &[Stmt]) -> Vec<String> {
    let mut text = String::new();
    for stmt in stmts {
        text.push_str(&render_stmt(stmt, 0));
    }
    lex(&text)
        .expect("rendered statements lex")
        .into_iter()
        .map(|t| t.text)
        .collect()
}

fn contains_subseq(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Parameters aligned by position and type; a differing name is a rename
/// when the old name has vanished from the new body and the new name is
/// fresh with respect to the old one (the exact-substitution check, made
/// robust to unrelated edits in the same method).
fn detect_parameter_renames(
    o: &MemberEntry,
    om: &MethodDecl,
    nm: &MethodDecl,
    out: &mut Vec<Refactoring>,
) {
    if om.params.len() != nm.params.len() {
        return;
    }
    let old_idents = ident_tokens(om);
    let new_idents = ident_tokens(nm);
    for (po, pn) in om.params.iter().zip(&nm.params) {
        if po.ty == pn.ty
            && po.name != pn.name
            && !new_idents.contains(&po.name)
            && !old_idents.contains(&pn.name)
        {
            out.push(Refactoring::RenameParameter {
                class: o.class.clone(),
                method: o.name.clone(),
                old: po.name.clone(),
                new: pn.name.clone(),
            });
        }
    }
}

fn local_decls(stmts: &[Stmt], out: &mut Vec<(TypeName, String)>) {
    for stmt in stmts {
        match stmt {
            Stmt::VarDecl { ty, name, .. } => out.push((ty.clone(), name.clone())),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                local_decls(then_branch, out);
                match else_branch {
                    Some(minilang::ast::ElseBranch::Block(stmts)) => local_decls(stmts, out),
                    Some(minilang::ast::ElseBranch::If(stmt)) => {
                        local_decls(std::slice::from_ref(stmt), out)
                    }
                    None => {}
                }
            }
            Stmt::While { body, .. } => local_decls(body, out),
            _ => {}
        }
    }
}

fn detect_variable_renames(
    o: &MemberEntry,
    om: &MethodDecl,
    nm: &MethodDecl,
    out: &mut Vec<Refactoring>,
) {
    let mut old_vars = Vec::new();
    let mut new_vars = Vec::new();
    local_decls(&om.body, &mut old_vars);
    local_decls(&nm.body, &mut new_vars);
    if old_vars.len() != new_vars.len() {
        return;
    }
    let old_idents = ident_tokens(om);
    let new_idents = ident_tokens(nm);
    for ((oty, oname), (nty, nname)) in old_vars.iter().zip(&new_vars) {
        if oty == nty
            && oname != nname
            && !new_idents.contains(oname)
            && !old_idents.contains(nname)
        {
            out.push(Refactoring::RenameVariable {
                class: o.class.clone(),
                method: o.name.clone(),
                old: oname.clone(),
                new: nname.clone(),
            });
        }
    }
}

/// A new top-level local whose initializer's token stream occurs in the
/// old body, with the new name fresh there and actually used in the new
/// body, is an extract-variable. Single-token initializers are ignored:
/// hoisting a bare name or literal is not a meaningful extraction and
/// would match almost anything.
fn detect_extract_variables(
    o: &MemberEntry,
    om: &MethodDecl,
    nm: &MethodDecl,
    renamed: &HashSet<String>,
    out: &mut Vec<Refactoring>,
) {
    let old_tokens = method_tokens(om);
    let old_idents = ident_tokens(om);
    for stmt in &nm.body {
        let Stmt::VarDecl {
            ty,
            name,
            init: Some(init),
            ..
        } = stmt
        else {
            continue;
        };
        let init_tokens = expr_tokens(init);
        if init_tokens.len() < 2
            || old_idents.contains(name)
            || renamed.contains(name)
            || !contains_subseq(&old_tokens, &init_tokens)
        {
            continue;
        }
        // Used at least once beyond its own declaration.
        let uses = method_tokens(nm).iter().filter(|t| *t == name).count();
        if uses < 2 {
            continue;
        }
        out.push(Refactoring::ExtractVariable {
            class: o.class.clone(),
            method: o.name.clone(),
            var_name: name.clone(),
            var_type: ty.as_str().to_string(),
            initializer: render_expr(init),
        });
    }
}

/// Substitutes call arguments for parameter names in the extracted
/// method's body tokens, yielding the stream the old method must contain.
pub(crate) fn substituted_body_tokens(extracted: &MethodDecl, args: &[Expr]) -> Vec<String> {
    let arg_tokens: Vec<Vec<String>> = args.iter().map(expr_tokens).collect();
    let mut out = Vec::new();
    for tok in stmts_tokens(&extracted.body) {
        match extracted.params.iter().position(|p| p.name == tok) {
            Some(k) => out.extend(arg_tokens[k].iter().cloned()),
            None => out.push(tok),
        }
    }
    out
}

/// Finds the top-level statement range of `body` whose concatenated
/// tokens equal `needle`.
fn find_stmt_range(body: &[Stmt], needle: &[String]) -> Option<(usize, usize)> {
    for i in 0..body.len() {
        let mut acc: Vec<String> = Vec::new();
        for (j, stmt) in body.iter().enumerate().skip(i) {
            acc.extend(stmts_tokens(std::slice::from_ref(stmt)));
            if acc.len() == needle.len() {
                if acc == needle {
                    return Some((i, j + 1));
                }
                break;
            }
            if acc.len() > needle.len() {
                break;
            }
        }
    }
    None
}

fn detect_extract_methods(
    old_side: &Side,
    new_side: &Side,
    m: &Matching,
    out: &mut Vec<Refactoring>,
) {
    for added in &m.added_methods {
        let extracted = new_side.method_decl(added);
        // The enclosing class must exist on both sides.
        let Some((oc, _nc)) = m.classes.iter().find(|(_, n)| n.name == added.class) else {
            continue;
        };
        let mut pairs: Vec<&(MemberEntry, MemberEntry)> = m
            .methods
            .iter()
            .filter(|(o, _)| o.class == oc.name)
            .collect();
        pairs.sort_by(|a, b| a.0.name.cmp(&b.0.name));

        'pair: for (o, n) in pairs {
            let om = old_side.method_decl(o);
            let nm = new_side.method_decl(n);
            for stmt in &nm.body {
                let Stmt::ExprStmt {
                    expr:
                        Expr::Call {
                            recv: None,
                            name,
                            args,
                            ..
                        },
                    ..
                } = stmt
                else {
                    continue;
                };
                if *name != added.name || args.len() != extracted.params.len() {
                    continue;
                }
                let needle = substituted_body_tokens(extracted, args);
                if let Some(span) = find_stmt_range(&om.body, &needle) {
                    out.push(Refactoring::ExtractMethod {
                        class: o.class.clone(),
                        source_method: o.name.clone(),
                        new_method: added.name.clone(),
                        new_method_text: render_method(extracted),
                        call_text: render_stmt(stmt, 0).trim_end().to_string(),
                        span,
                    });
                    break 'pair;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(files: &[(&str, &str)]) -> SourceTree {
        SourceTree::from_files(files.iter().copied())
    }

    const PROP: &str = "package p;\n\nclass Prop {\n    int count;\n\n    int bump(int n) {\n        count = count + n;\n        return count;\n    }\n\n    int reset() {\n        count = 0;\n        return count;\n    }\n}\n";

    #[test]
    fn identical_trees_match_completely() {
        let t = tree(&[("p/Prop.ml4j", PROP)]);
        let m = match_elements(&t, &t).unwrap();
        assert!(m.removed.is_empty());
        assert!(m.added.is_empty());
        // 1 package + 1 class + 2 methods + 1 field.
        assert_eq!(m.matched.len(), 5);
        assert_eq!(detect(&t, &t).unwrap(), vec![]);
    }

    #[test]
    fn renamed_method_pairs_via_fingerprint() {
        let old = tree(&[("p/Prop.ml4j", PROP)]);
        let new = tree(&[("p/Prop.ml4j", &PROP.replace("bump", "increment"))]);
        let m = match_elements(&old, &new).unwrap();
        assert_eq!(
            m.new_name_of(ElementKind::Method, "p.Prop.bump"),
            Some("p.Prop.increment")
        );
        assert_eq!(
            detect(&old, &new).unwrap(),
            vec![Refactoring::RenameMethod {
                class: "Prop".into(),
                old: "bump".into(),
                new: "increment".into(),
            }]
        );
    }

    #[test]
    fn twin_renames_in_one_class_stay_unmatched() {
        let old = tree(&[(
            "p/A.ml4j",
            "package p;\n\nclass A {\n    int f() {\n        return 1;\n    }\n\n    int g() {\n        return 1;\n    }\n}\n",
        )]);
        let new = tree(&[(
            "p/A.ml4j",
            "package p;\n\nclass A {\n    int h() {\n        return 1;\n    }\n\n    int k() {\n        return 1;\n    }\n}\n",
        )]);
        let m = match_elements(&old, &new).unwrap();
        assert_eq!(m.removed.len(), 2, "both old methods unmatched");
        assert_eq!(m.added.len(), 2);
        assert_eq!(detect(&old, &new).unwrap(), vec![]);
    }

    #[test]
    fn twin_renames_in_distinct_classes_resolve_by_enclosing_class() {
        let old = tree(&[
            (
                "p/A.ml4j",
                "package p;\n\nclass A {\n    int f() {\n        return 1;\n    }\n}\n",
            ),
            (
                "p/B.ml4j",
                "package p;\n\nclass B {\n    int f() {\n        return 1;\n    }\n}\n",
            ),
        ]);
        let new = tree(&[
            (
                "p/A.ml4j",
                "package p;\n\nclass A {\n    int g() {\n        return 1;\n    }\n}\n",
            ),
            (
                "p/B.ml4j",
                "package p;\n\nclass B {\n    int h() {\n        return 1;\n    }\n}\n",
            ),
        ]);
        assert_eq!(
            detect(&old, &new).unwrap(),
            vec![
                Refactoring::RenameMethod {
                    class: "A".into(),
                    old: "f".into(),
                    new: "g".into(),
                },
                Refactoring::RenameMethod {
                    class: "B".into(),
                    old: "f".into(),
                    new: "h".into(),
                },
            ]
        );
    }

    #[test]
    fn renamed_class_is_detected_and_members_follow() {
        let old = tree(&[("p/Prop.ml4j", PROP)]);
        let new = tree(&[("p/Property.ml4j", &PROP.replace("Prop", "Property"))]);
        let detected = detect(&old, &new).unwrap();
        assert_eq!(
            detected,
            vec![Refactoring::RenameClass {
                package: "p".into(),
                old: "Prop".into(),
                new: "Property".into(),
            }]
        );
        // Members still pair (by fingerprint) under the renamed class.
        let m = match_elements(&old, &new).unwrap();
        assert_eq!(
            m.new_name_of(ElementKind::Method, "p.Prop.bump"),
            Some("p.Property.bump")
        );
    }

    #[test]
    fn renamed_package_is_detected() {
        let old = tree(&[("p/Prop.ml4j", PROP)]);
        let new = tree(&[("core/Prop.ml4j", &PROP.replace("package p;", "package core;"))]);
        assert_eq!(
            detect(&old, &new).unwrap(),
            vec![Refactoring::RenamePackage {
                old: "p".into(),
                new: "core".into(),
            }]
        );
    }

    #[test]
    fn renamed_field_pairs_by_type_when_unambiguous() {
        let old = tree(&[("p/Prop.ml4j", PROP)]);
        let new = tree(&[("p/Prop.ml4j", &PROP.replace("count", "total"))]);
        assert_eq!(
            detect(&old, &new).unwrap(),
            vec![Refactoring::RenameField {
                class: "Prop".into(),
                old: "count".into(),
                new: "total".into(),
            }]
        );
    }

    #[test]
    fn renamed_parameter_is_detected() {
        let old = tree(&[("p/Prop.ml4j", PROP)]);
        let new = tree(&[("p/Prop.ml4j", &PROP.replace("int n", "int amount").replace("+ n", "+ amount"))]);
        assert_eq!(
            detect(&old, &new).unwrap(),
            vec![Refactoring::RenameParameter {
                class: "Prop".into(),
                method: "bump".into(),
                old: "n".into(),
                new: "amount".into(),
            }]
        );
    }

    #[test]
    fn renamed_local_is_detected_and_swaps_are_not() {
        let base = "package p;\n\nclass A {\n    int f(int n) {\n        int twice = n + n;\n        return twice;\n    }\n}\n";
        let old = tree(&[("p/A.ml4j", base)]);
        let new = tree(&[("p/A.ml4j", &base.replace("twice", "doubled"))]);
        assert_eq!(
            detect(&old, &new).unwrap(),
            vec![Refactoring::RenameVariable {
                class: "A".into(),
                method: "f".into(),
                old: "twice".into(),
                new: "doubled".into(),
            }]
        );

        let two = "package p;\n\nclass A {\n    int f() {\n        int a = 1;\n        int b = 2;\n        return a - b;\n    }\n}\n";
        let swapped = "package p;\n\nclass A {\n    int f() {\n        int b = 1;\n        int a = 2;\n        return b - a;\n    }\n}\n";
        let old = tree(&[("p/A.ml4j", two)]);
        let new = tree(&[("p/A.ml4j", swapped)]);
        assert_eq!(detect(&old, &new).unwrap(), vec![]);
    }

    #[test]
    fn extract_variable_fires_even_with_an_unrelated_edit_in_the_same_method() {
        let old = tree(&[(
            "p/Prop.ml4j",
            "package p;\n\nclass Prop {\n    Node gramps;\n\n    boolean removeProp(Node node) {\n        return doRemove(codeOf(node), codeOf(node));\n    }\n}\n",
        )]);
        // The new version hoists `codeOf(node)` and also inserts a guard.
        let new = tree(&[(
            "p/Prop.ml4j",
            "package p;\n\nclass Prop {\n    Node gramps;\n\n    boolean removeProp(Node node) {\n        int code = codeOf(node);\n        if (isDelProp(gramps)) {\n            return false;\n        }\n        return doRemove(code, code);\n    }\n}\n",
        )]);
        assert_eq!(
            detect(&old, &new).unwrap(),
            vec![Refactoring::ExtractVariable {
                class: "Prop".into(),
                method: "removeProp".into(),
                var_name: "code".into(),
                var_type: "int".into(),
                initializer: "codeOf(node)".into(),
            }]
        );
    }

    #[test]
    fn extract_method_is_detected_with_and_without_parameters() {
        let old = tree(&[(
            "p/A.ml4j",
            "package p;\n\nclass A {\n    int count;\n\n    void run() {\n        count = count + 1;\n        count = count * 2;\n        count = count - 3;\n    }\n}\n",
        )]);
        let new = tree(&[(
            "p/A.ml4j",
            "package p;\n\nclass A {\n    int count;\n\n    void run() {\n        count = count + 1;\n        scale();\n    }\n\n    void scale() {\n        count = count * 2;\n        count = count - 3;\n    }\n}\n",
        )]);
        assert_eq!(
            detect(&old, &new).unwrap(),
            vec![Refactoring::ExtractMethod {
                class: "A".into(),
                source_method: "run".into(),
                new_method: "scale".into(),
                new_method_text: "    void scale() {\n        count = count * 2;\n        count = count - 3;\n    }\n".into(),
                call_text: "scale();".into(),
                span: (1, 3),
            }]
        );

        let old = tree(&[(
            "p/A.ml4j",
            "package p;\n\nclass A {\n    int count;\n\n    void run(int step) {\n        count = count + step;\n        count = count + step;\n        count = 0;\n    }\n}\n",
        )]);
        let new = tree(&[(
            "p/A.ml4j",
            "package p;\n\nclass A {\n    int count;\n\n    void run(int step) {\n        grow(step);\n        count = 0;\n    }\n\n    void grow(int by) {\n        count = count + by;\n        count = count + by;\n    }\n}\n",
        )]);
        let detected = detect(&old, &new).unwrap();
        assert_eq!(detected.len(), 1);
        let Refactoring::ExtractMethod { span, call_text, .. } = &detected[0] else {
            panic!("expected ExtractMethod, got {:?}", detected);
        };
        assert_eq!(*span, (0, 2));
        assert_eq!(call_text, "grow(step);");
    }

    #[test]
    fn pure_fixes_yield_no_refactorings() {
        let old = tree(&[("p/Prop.ml4j", PROP)]);
        let new = tree(&[("p/Prop.ml4j", &PROP.replace("count + n", "count + n + 1"))]);
        assert_eq!(detect(&old, &new).unwrap(), vec![]);
    }

    #[test]
    fn detection_order_is_kind_then_subject() {
        let old = tree(&[(
            "p/A.ml4j",
            "package p;\n\nclass A {\n    int f(int n) {\n        return n;\n    }\n\n    int g() {\n        return 2;\n    }\n}\n",
        )]);
        let new = tree(&[(
            "p/A.ml4j",
            "package p;\n\nclass A {\n    int f(int m) {\n        return m;\n    }\n\n    int h() {\n        return 2;\n    }\n}\n",
        )]);
        let detected = detect(&old, &new).unwrap();
        assert_eq!(detected.len(), 2);
        assert!(matches!(detected[0], Refactoring::RenameMethod { .. }));
        assert!(matches!(detected[1], Refactoring::RenameParameter { .. }));
    }
}
