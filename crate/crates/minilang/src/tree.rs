//! [`SourceTree`]: an ordered mapping from relative file path to source
//! text, representing one program version. Trees are value types; pipeline
//! stages produce new trees instead of mutating in place.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;

use crate::ast::CompilationUnit;
use crate::parser::{parse, SyntaxError};
use crate::render::render_unit;

/// Default extension for MiniLang source files.
pub const DEFAULT_EXTENSION: &str = "ml4j";

/// Path prefix identifying test files.
pub const TEST_ROOT: &str = "tests/";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceTree {
    files: BTreeMap<String, String>,
}

pub fn is_test_path(path: &str) -> bool {
    path.starts_with(TEST_ROOT)
}

impl SourceTree {
    pub fn new() -> Self {
        SourceTree::default()
    }

    pub fn from_files<I, P, S>(files: I) -> Self
    where
        I: IntoIterator<Item = (P, S)>,
        P: Into<String>,
        S: Into<String>,
    {
        let files = files
            .into_iter()
            .map(|(p, s)| (normalize_path(&p.into()), s.into()))
            .filter(|(_, text)| !text.is_empty())
            .collect();
        SourceTree { files }
    }

    /// Loads every `.<ext>` file under `root`, keyed by slash-separated
    /// relative path.
    pub fn load_dir(root: &Path) -> io::Result<Self> {
        Self::load_dir_with_ext(root, DEFAULT_EXTENSION)
    }

    pub fn load_dir_with_ext(root: &Path, ext: &str) -> io::Result<Self> {
        let mut files = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir)? {
                let entry = entry?;
                let path = entry.path();
                if path.is_dir() {
                    stack.push(path);
                } else if path.extension().and_then(|e| e.to_str()) == Some(ext) {
                    let rel = path
                        .strip_prefix(root)
                        .expect("entry under root")
                        .to_string_lossy()
                        .replace('\\', "/");
                    files.insert(rel, std::fs::read_to_string(&path)?);
                }
            }
        }
        Ok(SourceTree { files })
    }

    pub fn write_dir(&self, root: &Path) -> io::Result<()> {
        for (rel, text) in &self.files {
            let dest = root.join(rel);
            if let Some(parent) = dest.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(dest, text)?;
        }
        Ok(())
    }

    pub fn insert(&mut self, path: impl Into<String>, text: impl Into<String>) {
        let text = text.into();
        let path = normalize_path(&path.into());
        // An empty file and an absent file are the same thing.
        if text.is_empty() {
            self.files.remove(&path);
        } else {
            self.files.insert(path, text);
        }
    }

    pub fn remove(&mut self, path: &str) -> Option<String> {
        self.files.remove(path)
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(|s| s.as_str())
    }

    pub fn contains(&self, path: &str) -> bool {
        self.files.contains_key(path)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// All files in path order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.files.iter().map(|(p, t)| (p.as_str(), t.as_str()))
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(|p| p.as_str())
    }

    /// Non-test files only.
    pub fn main_files(&self) -> impl Iterator<Item = (&str, &str)> {
        self.iter().filter(|(p, _)| !is_test_path(p))
    }

    pub fn test_files(&self) -> impl Iterator<Item = (&str, &str)> {
        self.iter().filter(|(p, _)| is_test_path(p))
    }

    /// The tree restricted to non-test files.
    pub fn main_only(&self) -> SourceTree {
        SourceTree {
            files: self
                .files
                .iter()
                .filter(|(p, _)| !is_test_path(p))
                .map(|(p, t)| (p.clone(), t.clone()))
                .collect(),
        }
    }

    /// This tree's main files combined with `tests`' test files.
    pub fn with_tests_from(&self, tests: &SourceTree) -> SourceTree {
        let mut files: BTreeMap<String, String> = self
            .files
            .iter()
            .filter(|(p, _)| !is_test_path(p))
            .map(|(p, t)| (p.clone(), t.clone()))
            .collect();
        for (p, t) in tests.test_files() {
            files.insert(p.to_string(), t.to_string());
        }
        SourceTree { files }
    }

    /// Parses every file. Returns units in path order or the first error.
    pub fn parse_all(&self) -> Result<Vec<CompilationUnit>, SyntaxError> {
        self.iter().map(|(p, t)| parse(t, p)).collect()
    }

    /// Re-renders every file canonically. Fails if any file does not parse.
    pub fn canonicalized(&self) -> Result<SourceTree, SyntaxError> {
        let mut files = BTreeMap::new();
        for (p, t) in self.iter() {
            let unit = parse(t, p)?;
            files.insert(p.to_string(), render_unit(&unit));
        }
        Ok(SourceTree { files })
    }
}

impl fmt::Display for SourceTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, t) in self.iter() {
            writeln!(f, "=== {p} ===")?;
            f.write_str(t)?;
        }
        Ok(())
    }
}

fn normalize_path(path: &str) -> String {
    path.replace('\\', "/")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_path_rule() {
        assert!(is_test_path("tests/p/ATests.ml4j"));
        assert!(!is_test_path("p/A.ml4j"));
        assert!(!is_test_path("src/tests/A.ml4j"));
    }

    #[test]
    fn empty_text_means_absent() {
        let mut tree = SourceTree::new();
        tree.insert("p/A.ml4j", "package p;\n");
        tree.insert("p/A.ml4j", "");
        assert!(!tree.contains("p/A.ml4j"));
    }

    #[test]
    fn with_tests_from_swaps_only_test_files() {
        let old = SourceTree::from_files([
            ("p/A.ml4j", "package p; class A { }"),
            ("tests/p/T.ml4j", "package p; class T { }"),
        ]);
        let newer = SourceTree::from_files([
            ("p/A.ml4j", "package p; class A2 { }"),
            ("tests/p/T.ml4j", "package p; class T2 { }"),
            ("tests/p/U.ml4j", "package p; class U { }"),
        ]);
        let combined = old.with_tests_from(&newer);
        assert_eq!(combined.get("p/A.ml4j").unwrap(), "package p; class A { }");
        assert_eq!(combined.get("tests/p/T.ml4j").unwrap(), "package p; class T2 { }");
        assert!(combined.contains("tests/p/U.ml4j"));
    }

    #[test]
    fn round_trips_through_directory() {
        let dir = std::env::temp_dir().join(format!("ml4j-tree-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let tree = SourceTree::from_files([
            ("p/A.ml4j", "package p;\n\nclass A {\n}\n"),
            ("tests/p/T.ml4j", "package p;\n\nclass T {\n}\n"),
        ]);
        tree.write_dir(&dir).unwrap();
        let loaded = SourceTree::load_dir(&dir).unwrap();
        assert_eq!(tree, loaded);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
