//! MiniLang: a deliberately small Java-like language used as the subject
//! language for patch extraction experiments.
//!
//! The crate provides the full toolchain for `.ml4j` sources:
//!
//! - [`lexer`]: whitespace-insensitive tokenization,
//! - [`parser`]: recursive-descent parsing to a span-carrying AST ([`ast`]),
//! - [`render`]: the canonical pretty-printer (parse ∘ render is the
//!   identity on token streams, and render ∘ parse is the identity on
//!   canonically formatted text),
//! - [`check`]: static "compilation" — name resolution, arity, and simple
//!   type checking with `path:line:col:` diagnostics,
//! - [`interp`]: a deterministic interpreter and `test_*` runner,
//! - [`tree`]: [`SourceTree`], the on-disk representation of one program
//!   version with its `tests/` subtree.
//!
//! The language has packages, classes with fields and methods, `int` /
//! `boolean` / `String` / class-reference types, and statement forms
//! `if`/`else`, `while`, `return`, assignment, local declaration, `assert`,
//! and expression statements. There is no inheritance, no overloading, no
//! static members, and no I/O, which keeps both the checker and the
//! interpreter small and every run reproducible.

pub mod ast;
pub mod check;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod render;
pub mod tree;

pub use ast::{CompilationUnit, Expr, Span, Stmt, TypeName};
pub use check::{check_tree, compiles, Diagnostic, Scope, Symbols};
pub use interp::{
    discover_tests, run_suite, SuiteOutcome, TestCase, TestOutcome, TestResult,
    DEFAULT_STEP_BUDGET,
};
pub use lexer::{lex, lex_texts, Token, TokenKind};
pub use parser::{parse, parse_tokens, SyntaxError};
pub use render::{render_method, render_stmt, render_unit};
pub use tree::{is_test_path, SourceTree, DEFAULT_EXTENSION, TEST_ROOT};
