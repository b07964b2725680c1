//! The compile/test oracle: a harness abstraction over "does this tree
//! compile" and "which tests pass", plus suite preparation and the
//! candidate verdict.
//!
//! Validation is two-phased. A candidate tree must first compile; only
//! then are tests consulted: any failing regression test rejects the
//! candidate, and at least one triggering test must pass for it to count
//! as a fix. Suites are prepared once per commit: each version's tests
//! are filtered down to those that pass on their own version, so a test
//! that was already broken cannot reject anything.

use std::collections::{BTreeMap, BTreeSet};

use minilang::check::check_tree;
use minilang::interp::{discover_tests, run_cases, DEFAULT_STEP_BUDGET};
use minilang::SourceTree;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// A version that must compile does not; the commit is unbuildable.
    #[error("{version} version does not compile: {diagnostic}")]
    Unbuildable {
        version: &'static str,
        diagnostic: String,
    },
    #[error("harness command failed: {0}")]
    Command(String),
    #[error("cannot interpret test output: {0}")]
    Report(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompileStatus {
    Clean,
    Rejected { diagnostics: Vec<String> },
}

impl CompileStatus {
    pub fn is_clean(&self) -> bool {
        matches!(self, CompileStatus::Clean)
    }

    pub fn first_diagnostic(&self) -> Option<&str> {
        match self {
            CompileStatus::Clean => None,
            CompileStatus::Rejected { diagnostics } => diagnostics.first().map(String::as_str),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestStatus {
    Pass,
    Fail,
    /// Exceeded the per-test budget. Counts as a failure.
    Timeout,
}

impl TestStatus {
    pub fn passed(&self) -> bool {
        matches!(self, TestStatus::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestRecord {
    /// Fully qualified `package.Class.method`.
    pub name: String,
    pub status: TestStatus,
    /// Failure message, when the harness has one.
    pub detail: Option<String>,
}

/// Results of one suite run, sorted by test name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TestReport {
    pub records: Vec<TestRecord>,
}

impl TestReport {
    pub fn from_records(mut records: Vec<TestRecord>) -> TestReport {
        records.sort_by(|a, b| a.name.cmp(&b.name));
        TestReport { records }
    }

    pub fn status_of(&self, name: &str) -> Option<TestStatus> {
        self.records.iter().find(|r| r.name == name).map(|r| r.status)
    }

    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.status.passed())
    }

    pub fn passing(&self) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| r.status.passed())
            .map(|r| r.name.as_str())
            .collect()
    }

    pub fn failing(&self) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| !r.status.passed())
            .map(|r| r.name.as_str())
            .collect()
    }
}

/// A compile/test oracle. Implementations hold no shared mutable state,
/// so one harness can serve concurrent validations of private trees.
pub trait Harness: Sync {
    fn compile_check(&self, tree: &SourceTree) -> Result<CompileStatus, HarnessError>;

    /// Runs tests on `tree`: all discoverable tests when `selection` is
    /// `None`, otherwise exactly the named ones (a name the tree does not
    /// define reports as failed, never silently dropped).
    fn run_suite(
        &self,
        tree: &SourceTree,
        selection: Option<&[String]>,
    ) -> Result<TestReport, HarnessError>;

    /// Whether identical inputs always yield identical reports. Harnesses
    /// that answer `false` get flaky-test screening during suite
    /// preparation.
    fn deterministic(&self) -> bool {
        true
    }
}

/// One version's usable tests: the names that pass on their own version,
/// plus the test files to graft onto other trees when running them.
#[derive(Debug, Clone, Default)]
pub struct Suite {
    pub names: Vec<String>,
    pub files: SourceTree,
}

impl Suite {
    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }
}

/// The two filtered suites of a commit.
#[derive(Debug, Clone, Default)]
pub struct SuitePair {
    /// Regression tests accompanying the older version.
    pub old: Suite,
    /// Tests accompanying the fixed version.
    pub new: Suite,
    /// The older version has no passing tests at all: validation can
    /// still run, but without any regression safety net.
    pub weak_regression: bool,
    /// Human-readable notes about filtered and flaky-excluded tests.
    pub notes: Vec<String>,
}

/// Verdict on one candidate tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Fails to compile.
    Illegal,
    /// Breaks at least one regression test.
    Regressing,
    /// Compiles and regresses nothing, but no triggering test passes.
    NonFixing,
    /// Passes all regression tests and at least one triggering test.
    Candidate,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Illegal => "illegal",
            Verdict::Regressing => "regressing",
            Verdict::NonFixing => "non-fixing",
            Verdict::Candidate => "candidate",
        }
    }
}

/// How many times a nondeterministic harness re-runs a suite before
/// trusting it; tests that disagree across runs are excluded as flaky.
const FLAKY_RUNS: usize = 3;

/// Filters both versions' suites down to self-passing tests.
///
/// Fails with [`HarnessError::Unbuildable`] if either version does not
/// compile. An empty old suite is not an error: the pair comes back with
/// `weak_regression` set and validation proceeds on triggering tests
/// alone.
pub fn prepare_suites(
    vn1: &SourceTree,
    vn: &SourceTree,
    harness: &dyn Harness,
) -> Result<SuitePair, HarnessError> {
    for (version, tree) in [("old", vn1), ("new", vn)] {
        let status = harness.compile_check(tree)?;
        if let Some(diag) = status.first_diagnostic() {
            return Err(HarnessError::Unbuildable {
                version,
                diagnostic: diag.to_string(),
            });
        }
    }
    let mut notes = Vec::new();
    let old = prepare_one(vn1, "old", harness, &mut notes)?;
    let new = prepare_one(vn, "new", harness, &mut notes)?;
    let weak_regression = old.is_empty();
    if weak_regression {
        notes.push("old version has no passing tests; regression checking is weak".to_string());
    }
    Ok(SuitePair {
        old,
        new,
        weak_regression,
        notes,
    })
}

fn prepare_one(
    tree: &SourceTree,
    label: &str,
    harness: &dyn Harness,
    notes: &mut Vec<String>,
) -> Result<Suite, HarnessError> {
    let runs = if harness.deterministic() { 1 } else { FLAKY_RUNS };
    let reports: Vec<TestReport> = (0..runs)
        .map(|_| harness.run_suite(tree, None))
        .collect::<Result<_, _>>()?;

    let mut statuses: BTreeMap<&str, Vec<TestStatus>> = BTreeMap::new();
    for report in &reports {
        for record in &report.records {
            statuses.entry(&record.name).or_default().push(record.status);
        }
    }

    let mut names = Vec::new();
    let mut dropped = 0usize;
    for (name, observed) in &statuses {
        let passes = observed.iter().filter(|s| s.passed()).count();
        if passes == observed.len() {
            names.push(name.to_string());
        } else if passes == 0 {
            dropped += 1;
            notes.push(format!("{label} suite: excluded '{name}' (fails on its own version)"));
        } else {
            dropped += 1;
            notes.push(format!(
                "{label} suite: excluded '{name}' (flaky: disagreed across {runs} runs)"
            ));
        }
    }
    notes.push(format!(
        "{label} suite: kept {} of {} tests",
        names.len(),
        names.len() + dropped
    ));

    let files = SourceTree::from_files(tree.test_files());
    Ok(Suite { names, files })
}

/// The subset of the new version's tests that fail on `vn1` (with the
/// new version's test files grafted on). Empty means the commit has no
/// triggering test and cannot be processed.
pub fn triggering_tests(
    vn1: &SourceTree,
    tn: &Suite,
    harness: &dyn Harness,
) -> Result<Vec<String>, HarnessError> {
    if tn.is_empty() {
        return Ok(Vec::new());
    }
    let grafted = vn1.with_tests_from(&tn.files);
    let report = harness.run_suite(&grafted, Some(&tn.names))?;
    Ok(report.failing().into_iter().map(String::from).collect())
}

/// What a validation run observed; candidates carry this as proof.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationEvidence {
    /// Regression tests that passed (all of them, for a candidate).
    pub regression_passed: usize,
    /// Triggering tests that passed (≥ 1, for a candidate).
    pub triggering_passed: Vec<String>,
}

/// Two-phase check of one candidate tree.
pub fn validate(
    tree: &SourceTree,
    suites: &SuitePair,
    trig: &[String],
    harness: &dyn Harness,
) -> Result<Verdict, HarnessError> {
    validate_evidence(tree, suites, trig, harness).map(|(verdict, _)| verdict)
}

/// [`validate`] plus the observations backing the verdict. Phases stop
/// at the first rejection, so evidence is partial for rejected trees.
pub fn validate_evidence(
    tree: &SourceTree,
    suites: &SuitePair,
    trig: &[String],
    harness: &dyn Harness,
) -> Result<(Verdict, ValidationEvidence), HarnessError> {
    let mut evidence = ValidationEvidence::default();
    if !harness.compile_check(tree)?.is_clean() {
        return Ok((Verdict::Illegal, evidence));
    }
    if !suites.old.is_empty() {
        let report = harness.run_suite(tree, Some(&suites.old.names))?;
        evidence.regression_passed = report.passing().len();
        if !report.all_passed() {
            return Ok((Verdict::Regressing, evidence));
        }
    }
    let grafted = tree.with_tests_from(&suites.new.files);
    let report = harness.run_suite(&grafted, Some(trig))?;
    evidence.triggering_passed = report.passing().into_iter().map(String::from).collect();
    if evidence.triggering_passed.is_empty() {
        Ok((Verdict::NonFixing, evidence))
    } else {
        Ok((Verdict::Candidate, evidence))
    }
}

/// The in-process MiniLang harness: checking is the compiler, the
/// interpreter is the runner, and the per-test step budget stands in for
/// a wall-clock timeout.
#[derive(Debug, Clone)]
pub struct MiniLangHarness {
    pub step_budget: u64,
}

impl Default for MiniLangHarness {
    fn default() -> Self {
        MiniLangHarness {
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

impl Harness for MiniLangHarness {
    fn compile_check(&self, tree: &SourceTree) -> Result<CompileStatus, HarnessError> {
        let diagnostics = check_tree(tree);
        Ok(if diagnostics.is_empty() {
            CompileStatus::Clean
        } else {
            CompileStatus::Rejected {
                diagnostics: diagnostics.iter().map(|d| d.to_string()).collect(),
            }
        })
    }

    /// Tests run per test file in isolation: the main sources plus that
    /// one file. A test file that no longer compiles against the
    /// candidate fails all of its tests instead of poisoning the others.
    fn run_suite(
        &self,
        tree: &SourceTree,
        selection: Option<&[String]>,
    ) -> Result<TestReport, HarnessError> {
        let wanted: Option<BTreeSet<&str>> =
            selection.map(|names| names.iter().map(String::as_str).collect());
        let mut records = Vec::new();

        let main = tree.main_only();
        for (path, text) in tree.test_files() {
            let mut scoped = main.clone();
            scoped.insert(path, text);
            let diagnostics = check_tree(&scoped);
            if !diagnostics.is_empty() {
                // Parse errors hide the file's tests entirely; selected
                // names it would have defined surface in the final sweep.
                let Ok(units) = scoped.parse_all() else { continue };
                let first = diagnostics[0].to_string();
                for case in discover_tests(&units) {
                    if case.path == path && selected(&wanted, &case.name) {
                        records.push(TestRecord {
                            name: case.name,
                            status: TestStatus::Fail,
                            detail: Some(format!("does not compile: {first}")),
                        });
                    }
                }
                continue;
            }
            let units = scoped.parse_all().expect("checked tree parses");
            let cases: Vec<_> = discover_tests(&units)
                .into_iter()
                .filter(|c| c.path == path && selected(&wanted, &c.name))
                .collect();
            for result in run_cases(&units, &cases, self.step_budget).results {
                records.push(to_record(result));
            }
        }

        if let Some(names) = selection {
            for name in names {
                if !records.iter().any(|r| &r.name == name) {
                    records.push(TestRecord {
                        name: name.clone(),
                        status: TestStatus::Fail,
                        detail: Some("test not found".to_string()),
                    });
                }
            }
        }
        Ok(TestReport::from_records(records))
    }
}

fn selected(wanted: &Option<BTreeSet<&str>>, name: &str) -> bool {
    wanted.as_ref().is_none_or(|set| set.contains(name))
}

fn to_record(result: minilang::interp::TestResult) -> TestRecord {
    use minilang::interp::TestOutcome;
    let (status, detail) = match result.outcome {
        TestOutcome::Pass => (TestStatus::Pass, None),
        TestOutcome::Fail { message } => (TestStatus::Fail, Some(message)),
        TestOutcome::Error { message } => {
            if message.contains("step budget exhausted") {
                (TestStatus::Timeout, Some(message))
            } else {
                (TestStatus::Fail, Some(message))
            }
        }
    };
    TestRecord {
        name: result.name,
        status,
        detail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    fn tree(files: &[(&str, &str)]) -> SourceTree {
        SourceTree::from_files(files.iter().copied())
    }

    const CALC_BUGGY: &str = "package p;\n\nclass Calc {\n    int add(int a, int b) {\n        return a - b;\n    }\n\n    int twice(int a) {\n        return a + a;\n    }\n}\n";
    const CALC_FIXED: &str = "package p;\n\nclass Calc {\n    int add(int a, int b) {\n        return a + b;\n    }\n\n    int twice(int a) {\n        return a + a;\n    }\n}\n";
    const TWICE_TEST: &str = "package p;\n\nclass TwiceTest {\n    void test_twice_doubles() {\n        Calc c = Calc();\n        assert c.twice(4) == 8;\n    }\n}\n";
    const ADD_TEST: &str = "package p;\n\nclass AddTest {\n    void test_add_sums() {\n        Calc c = Calc();\n        assert c.add(2, 3) == 5;\n    }\n}\n";

    fn commit() -> (SourceTree, SourceTree) {
        let old = tree(&[
            ("p/Calc.ml4j", CALC_BUGGY),
            ("tests/p/TwiceTest.ml4j", TWICE_TEST),
        ]);
        let new = tree(&[
            ("p/Calc.ml4j", CALC_FIXED),
            ("tests/p/TwiceTest.ml4j", TWICE_TEST),
            ("tests/p/AddTest.ml4j", ADD_TEST),
        ]);
        (old, new)
    }

    #[test]
    fn prepare_filters_self_failing_tests() {
        let five = tree(&[
            ("p/Calc.ml4j", CALC_FIXED),
            ("tests/p/T.ml4j", "package p;\n\nclass T {\n    void test_a() {\n        assert 1 == 1;\n    }\n\n    void test_b() {\n        assert 2 == 2;\n    }\n\n    void test_c() {\n        assert 3 == 3;\n    }\n\n    void test_d() {\n        assert 4 == 4;\n    }\n\n    void test_broken() {\n        assert 1 == 2;\n    }\n}\n"),
        ]);
        let harness = MiniLangHarness::default();
        let pair = prepare_suites(&five, &five, &harness).unwrap();
        assert_eq!(pair.old.len(), 4);
        assert!(!pair.old.names.iter().any(|n| n.contains("broken")));
        assert!(pair
            .notes
            .iter()
            .any(|n| n.contains("test_broken") && n.contains("fails on its own version")));
    }

    #[test]
    fn prepare_keeps_all_passing_tests() {
        let (_, new) = commit();
        let harness = MiniLangHarness::default();
        let pair = prepare_suites(&new, &new, &harness).unwrap();
        assert_eq!(pair.old.len(), 2);
        assert_eq!(pair.new.len(), 2);
        assert!(!pair.weak_regression);
    }

    #[test]
    fn uncompilable_version_is_unbuildable() {
        let broken = tree(&[("p/Calc.ml4j", "package p;\n\nclass Calc {\n    int add(int a) {\n        return missing;\n    }\n}\n")]);
        let (_, new) = commit();
        let harness = MiniLangHarness::default();
        let err = prepare_suites(&broken, &new, &harness).unwrap_err();
        assert!(matches!(err, HarnessError::Unbuildable { version: "old", .. }), "{err}");
    }

    #[test]
    fn empty_old_suite_is_flagged_weak() {
        let (mut old, new) = commit();
        old.remove("tests/p/TwiceTest.ml4j");
        let harness = MiniLangHarness::default();
        let pair = prepare_suites(&old, &new, &harness).unwrap();
        assert!(pair.weak_regression);
        assert!(pair.old.is_empty());
    }

    #[test]
    fn triggering_set_is_the_new_failing_subset() {
        let (old, new) = commit();
        let harness = MiniLangHarness::default();
        let pair = prepare_suites(&old, &new, &harness).unwrap();
        let trig = triggering_tests(&old, &pair.new, &harness).unwrap();
        assert_eq!(trig, vec!["p.AddTest.test_add_sums".to_string()]);
    }

    #[test]
    fn unchanged_suites_trigger_nothing() {
        let (_, new) = commit();
        let harness = MiniLangHarness::default();
        let pair = prepare_suites(&new, &new, &harness).unwrap();
        let trig = triggering_tests(&new, &pair.new, &harness).unwrap();
        assert!(trig.is_empty());
    }

    #[test]
    fn verdicts_cover_the_four_cases() {
        let (old, new) = commit();
        let harness = MiniLangHarness::default();
        let pair = prepare_suites(&old, &new, &harness).unwrap();
        let trig = triggering_tests(&old, &pair.new, &harness).unwrap();

        // The unmodified old version still fails the triggering test.
        assert_eq!(validate(&old, &pair, &trig, &harness).unwrap(), Verdict::NonFixing);

        // The fix applied in full is a candidate.
        let fixed = {
            let mut t = old.clone();
            t.insert("p/Calc.ml4j", CALC_FIXED);
            t
        };
        assert_eq!(validate(&fixed, &pair, &trig, &harness).unwrap(), Verdict::Candidate);

        // A tree that no longer compiles is illegal.
        let broken = {
            let mut t = old.clone();
            t.insert("p/Calc.ml4j", "package p;\n\nclass Calc {\n    int add(int a, int b) {\n        return a +;\n    }\n}\n");
            t
        };
        assert_eq!(validate(&broken, &pair, &trig, &harness).unwrap(), Verdict::Illegal);

        // A tree that breaks the old suite is regressing, even if it
        // somehow passes the triggering test.
        let regressing = {
            let mut t = old.clone();
            t.insert("p/Calc.ml4j", "package p;\n\nclass Calc {\n    int add(int a, int b) {\n        return a + b;\n    }\n\n    int twice(int a) {\n        return a * a;\n    }\n}\n");
            t
        };
        assert_eq!(validate(&regressing, &pair, &trig, &harness).unwrap(), Verdict::Regressing);
    }

    #[test]
    fn verdicts_ignore_selection_order() {
        let (old, new) = commit();
        let harness = MiniLangHarness::default();
        let mut pair = prepare_suites(&old, &new, &harness).unwrap();
        let mut trig = triggering_tests(&old, &pair.new, &harness).unwrap();
        let fixed = {
            let mut t = old.clone();
            t.insert("p/Calc.ml4j", CALC_FIXED);
            t
        };
        let forward = validate(&fixed, &pair, &trig, &harness).unwrap();
        pair.old.names.reverse();
        pair.new.names.reverse();
        trig.reverse();
        assert_eq!(validate(&fixed, &pair, &trig, &harness).unwrap(), forward);
    }

    #[test]
    fn budget_exhaustion_reports_timeout() {
        let spinning = tree(&[
            ("p/Calc.ml4j", CALC_FIXED),
            ("tests/p/SpinTest.ml4j", "package p;\n\nclass SpinTest {\n    void test_spin() {\n        int x = 0;\n        while (x == 0) {\n            x = x * 1;\n        }\n    }\n}\n"),
        ]);
        let harness = MiniLangHarness {
            step_budget: 10_000,
        };
        let report = harness.run_suite(&spinning, None).unwrap();
        assert_eq!(report.status_of("p.SpinTest.test_spin"), Some(TestStatus::Timeout));
        assert_eq!(report.failing(), vec!["p.SpinTest.test_spin"]);
    }

    #[test]
    fn uncompilable_test_file_fails_only_its_own_tests() {
        let t = tree(&[
            ("p/Calc.ml4j", CALC_FIXED),
            ("tests/p/TwiceTest.ml4j", TWICE_TEST),
            ("tests/p/StaleTest.ml4j", "package p;\n\nclass StaleTest {\n    void test_gone() {\n        Calc c = Calc();\n        assert c.vanished() == 1;\n    }\n}\n"),
        ]);
        let harness = MiniLangHarness::default();
        let report = harness.run_suite(&t, None).unwrap();
        assert_eq!(report.status_of("p.TwiceTest.test_twice_doubles"), Some(TestStatus::Pass));
        assert_eq!(report.status_of("p.StaleTest.test_gone"), Some(TestStatus::Fail));
        let record = report.records.iter().find(|r| r.name.contains("gone")).unwrap();
        assert!(record.detail.as_deref().unwrap().contains("does not compile"));
    }

    #[test]
    fn missing_selected_test_reports_failure() {
        let (old, _) = commit();
        let harness = MiniLangHarness::default();
        let report = harness
            .run_suite(&old, Some(&["p.Ghost.test_missing".to_string()]))
            .unwrap();
        assert_eq!(report.status_of("p.Ghost.test_missing"), Some(TestStatus::Fail));
    }

    /// A harness whose designated test alternates outcomes per call:
    /// deterministic harnesses never see this path, nondeterministic ones
    /// must screen such a test out.
    struct FlakyHarness {
        inner: MiniLangHarness,
        flaky: String,
        calls: Mutex<usize>,
    }

    impl Harness for FlakyHarness {
        fn compile_check(&self, tree: &SourceTree) -> Result<CompileStatus, HarnessError> {
            self.inner.compile_check(tree)
        }

        fn run_suite(
            &self,
            tree: &SourceTree,
            selection: Option<&[String]>,
        ) -> Result<TestReport, HarnessError> {
            let mut report = self.inner.run_suite(tree, selection)?;
            let mut calls = self.calls.lock().unwrap();
            *calls += 1;
            if *calls % 2 == 0 {
                for record in &mut report.records {
                    if record.name == self.flaky {
                        record.status = TestStatus::Fail;
                        record.detail = Some("flaked".to_string());
                    }
                }
            }
            Ok(report)
        }

        fn deterministic(&self) -> bool {
            false
        }
    }

    #[test]
    fn flaky_tests_are_excluded_after_disagreement() {
        let (_, new) = commit();
        let harness = FlakyHarness {
            inner: MiniLangHarness::default(),
            flaky: "p.AddTest.test_add_sums".to_string(),
            calls: Mutex::new(0),
        };
        let pair = prepare_suites(&new, &new, &harness).unwrap();
        let all: Vec<&String> = pair.old.names.iter().chain(&pair.new.names).collect();
        assert!(!all.iter().any(|n| n.contains("add_sums")), "{all:?}");
        assert!(pair.notes.iter().any(|n| n.contains("flaky")), "{:?}", pair.notes);
    }
}
