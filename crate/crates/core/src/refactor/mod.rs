//! Refactoring detection and reapplication.
//!
//! [`miner`] compares two program versions, matches their elements, and
//! detects instances of the eight supported refactoring kinds. [`engine`]
//! replays a detected plan onto the older version, producing the
//! refactoring-included tree that patch extraction diffs against.
//!
//! Detection runs over main source files only; reapplication rewrites
//! the whole tree (tests included) so the old version's tests keep
//! compiling against renamed declarations.

pub mod engine;
pub mod fingerprint;
pub mod miner;

pub use engine::{reapply, verify_behavior, ReapplyConflict, ReapplyPlan};
pub use miner::{detect, match_elements, CodeElement, ElementKind, ElementMatching};

use serde::Serialize;

/// The eight supported refactoring kinds, in the canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RefactoringKind {
    RenamePackage,
    RenameClass,
    RenameField,
    RenameMethod,
    RenameParameter,
    RenameVariable,
    ExtractMethod,
    ExtractVariable,
}

impl RefactoringKind {
    pub const ALL: [RefactoringKind; 8] = [
        RefactoringKind::RenamePackage,
        RefactoringKind::RenameClass,
        RefactoringKind::RenameField,
        RefactoringKind::RenameMethod,
        RefactoringKind::RenameParameter,
        RefactoringKind::RenameVariable,
        RefactoringKind::ExtractMethod,
        RefactoringKind::ExtractVariable,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RefactoringKind::RenamePackage => "RenamePackage",
            RefactoringKind::RenameClass => "RenameClass",
            RefactoringKind::RenameField => "RenameField",
            RefactoringKind::RenameMethod => "RenameMethod",
            RefactoringKind::RenameParameter => "RenameParameter",
            RefactoringKind::RenameVariable => "RenameVariable",
            RefactoringKind::ExtractMethod => "ExtractMethod",
            RefactoringKind::ExtractVariable => "ExtractVariable",
        }
    }
}

/// One detected refactoring. Every variant carries enough to reapply it
/// to the older version without consulting the newer one again.
///
/// Class names are globally unique in MiniLang, so member subjects are
/// qualified by simple class name; packages qualify classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Refactoring {
    RenamePackage {
        old: String,
        new: String,
    },
    RenameClass {
        package: String,
        old: String,
        new: String,
    },
    RenameField {
        class: String,
        old: String,
        new: String,
    },
    RenameMethod {
        class: String,
        old: String,
        new: String,
    },
    RenameParameter {
        class: String,
        method: String,
        old: String,
        new: String,
    },
    RenameVariable {
        class: String,
        method: String,
        old: String,
        new: String,
    },
    ExtractMethod {
        class: String,
        source_method: String,
        new_method: String,
        /// Declaration of the extracted method, rendered as it appears
        /// in the newer version.
        new_method_text: String,
        /// The call statement that replaces the extracted statements.
        call_text: String,
        /// Half-open top-level statement range extracted from the source
        /// method's body in the older version.
        span: (usize, usize),
    },
    ExtractVariable {
        class: String,
        method: String,
        var_name: String,
        var_type: String,
        /// The hoisted initializer expression, rendered canonically.
        initializer: String,
    },
}

impl Refactoring {
    pub fn kind(&self) -> RefactoringKind {
        match self {
            Refactoring::RenamePackage { .. } => RefactoringKind::RenamePackage,
            Refactoring::RenameClass { .. } => RefactoringKind::RenameClass,
            Refactoring::RenameField { .. } => RefactoringKind::RenameField,
            Refactoring::RenameMethod { .. } => RefactoringKind::RenameMethod,
            Refactoring::RenameParameter { .. } => RefactoringKind::RenameParameter,
            Refactoring::RenameVariable { .. } => RefactoringKind::RenameVariable,
            Refactoring::ExtractMethod { .. } => RefactoringKind::ExtractMethod,
            Refactoring::ExtractVariable { .. } => RefactoringKind::ExtractVariable,
        }
    }

    /// Dotted name of the element the refactoring starts from.
    pub fn subject(&self) -> String {
        match self {
            Refactoring::RenamePackage { old, .. } => old.clone(),
            Refactoring::RenameClass { package, old, .. } => format!("{package}.{old}"),
            Refactoring::RenameField { class, old, .. }
            | Refactoring::RenameMethod { class, old, .. } => format!("{class}.{old}"),
            Refactoring::RenameParameter {
                class, method, old, ..
            }
            | Refactoring::RenameVariable {
                class, method, old, ..
            } => format!("{class}.{method}.{old}"),
            Refactoring::ExtractMethod {
                class,
                source_method,
                ..
            } => format!("{class}.{source_method}"),
            Refactoring::ExtractVariable { class, method, .. } => format!("{class}.{method}"),
        }
    }

    /// The name the refactoring introduces.
    pub fn new_name(&self) -> &str {
        match self {
            Refactoring::RenamePackage { new, .. }
            | Refactoring::RenameClass { new, .. }
            | Refactoring::RenameField { new, .. }
            | Refactoring::RenameMethod { new, .. }
            | Refactoring::RenameParameter { new, .. }
            | Refactoring::RenameVariable { new, .. } => new,
            Refactoring::ExtractMethod { new_method, .. } => new_method,
            Refactoring::ExtractVariable { var_name, .. } => var_name,
        }
    }

    /// Extracted statement range, for extract-method refactorings.
    pub fn span(&self) -> Option<(usize, usize)> {
        match self {
            Refactoring::ExtractMethod { span, .. } => Some(*span),
            _ => None,
        }
    }

    /// Sort key giving the canonical detection order.
    pub(crate) fn sort_key(&self) -> (RefactoringKind, String, String) {
        (self.kind(), self.subject(), self.new_name().to_string())
    }
}

impl std::fmt::Display for Refactoring {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} -> {}", self.kind().as_str(), self.subject(), self.new_name())
    }
}

#[derive(Serialize)]
struct RefactoringView<'a> {
    kind: &'static str,
    subject: String,
    new_name: &'a str,
    span: Option<(usize, usize)>,
}

/// JSON array of `{kind, subject, new_name, span}` objects, as emitted
/// by `mine --dump-refactorings`.
pub fn dump_refactorings(refactorings: &[Refactoring]) -> String {
    let views: Vec<RefactoringView> = refactorings
        .iter()
        .map(|r| RefactoringView {
            kind: r.kind().as_str(),
            subject: r.subject(),
            new_name: r.new_name(),
            span: r.span(),
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&views).expect("refactoring list serializes");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_order_is_renames_then_extracts() {
        let kinds = RefactoringKind::ALL;
        let mut sorted = kinds;
        sorted.sort();
        assert_eq!(kinds, sorted);
        assert!(RefactoringKind::RenameVariable < RefactoringKind::ExtractMethod);
    }

    #[test]
    fn dump_shape() {
        let r = Refactoring::RenameMethod {
            class: "Prop".into(),
            old: "del".into(),
            new: "delTree".into(),
        };
        let dump = dump_refactorings(std::slice::from_ref(&r));
        let parsed: serde_json::Value = serde_json::from_str(&dump).unwrap();
        assert_eq!(parsed[0]["kind"], "RenameMethod");
        assert_eq!(parsed[0]["subject"], "Prop.del");
        assert_eq!(parsed[0]["new_name"], "delTree");
        assert!(parsed[0]["span"].is_null());
        assert_eq!(r.to_string(), "RenameMethod Prop.del -> delTree");
    }
}
