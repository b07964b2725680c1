//! Subsequence enumeration over a change sequence and the search for a
//! unique validated patch.
//!
//! Every non-empty subsequence of the change sequence is a potential
//! patch. The search applies each one, validates the resulting tree, and
//! collects the survivors; a patch is emitted only when exactly one
//! candidate exists, because two surviving candidates mean the evidence
//! cannot tell which is the real fix.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use itertools::Itertools;
use minilang::SourceTree;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::change::{apply_selection, ChangeSeq};
use crate::validate::{validate_evidence, Harness, HarnessError, SuitePair, Verdict};

/// How many subsequences are validated per parallel batch. Early stop
/// and deduplication bookkeeping advance at batch boundaries, which
/// keeps the candidate set independent of worker scheduling.
const BATCH: usize = 64;

/// Resource limits for one commit's search.
#[derive(Debug, Clone)]
pub struct SearchBudget {
    /// Wall-clock limit over the whole commit, refactoring stage
    /// included.
    pub wall_clock: Duration,
    /// Largest processable change sequence, in (line-equivalent) units.
    pub max_units: usize,
    /// Stop searching once this many candidates exist; `None` keeps
    /// enumerating to the end. Two is enough to fix the decision.
    pub max_candidates: Option<usize>,
}

impl SearchBudget {
    pub fn new(wall_clock: Duration, max_units: usize, max_candidates: Option<usize>) -> Self {
        assert!(!wall_clock.is_zero(), "wall-clock budget must be positive");
        assert!(max_units > 0, "max units must be positive");
        assert!(
            max_candidates.is_none_or(|c| c > 0),
            "candidate limit must be positive"
        );
        SearchBudget {
            wall_clock,
            max_units,
            max_candidates,
        }
    }

    /// Whether a change sequence of `len` units is small enough to
    /// search; a commit that is not is skipped as `too-large`.
    pub fn fits(&self, len: usize) -> bool {
        len <= self.max_units
    }

    pub fn deadline_from(&self, start: Instant) -> Instant {
        start + self.wall_clock
    }
}

impl Default for SearchBudget {
    /// 40 minutes, 30 units, stop at the second candidate.
    fn default() -> Self {
        SearchBudget::new(Duration::from_secs(40 * 60), 30, Some(2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("wall-clock budget exceeded")]
pub struct BudgetExceeded;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("no triggering tests; nothing to search for")]
    NoTriggeringTests,
    #[error("subsequence failed to apply: {0}")]
    Apply(String),
}

/// One subsequence that survived both validation phases.
#[derive(Debug, Clone)]
pub struct CandidatePatch {
    /// Indices into the change sequence, ascending.
    pub selection: Vec<usize>,
    /// The tree the selection produces.
    pub tree: SourceTree,
    /// Regression tests that passed (all of them).
    pub regression_passed: usize,
    /// Triggering tests that passed (at least one).
    pub triggering_passed: Vec<String>,
}

/// All non-empty subsequences of `0..len`, ascending cardinality first,
/// lexicographic within a cardinality; terminates with an error once the
/// deadline passes.
pub fn subsequences(
    len: usize,
    deadline: Instant,
) -> impl Iterator<Item = Result<Vec<usize>, BudgetExceeded>> {
    (1..=len)
        .flat_map(move |k| (0..len).combinations(k))
        .map(move |sel| {
            if Instant::now() > deadline {
                Err(BudgetExceeded)
            } else {
                Ok(sel)
            }
        })
        .scan(false, |stopped, item| {
            if *stopped {
                return None;
            }
            *stopped = item.is_err();
            Some(item)
        })
}

/// [`subsequences`] sized for a change sequence under a budget.
pub fn enumerate(
    chgs: &ChangeSeq,
    budget: &SearchBudget,
    start: Instant,
) -> impl Iterator<Item = Result<Vec<usize>, BudgetExceeded>> {
    subsequences(chgs.len(), budget.deadline_from(start))
}

/// Identity of a tree's rendered content, for deduplicating
/// subsequences that produce identical text.
pub(crate) fn tree_hash(tree: &SourceTree) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for (path, text) in tree.iter() {
        hasher.update(path.as_bytes());
        hasher.update([0]);
        hasher.update(text.as_bytes());
        hasher.update([0xff]);
    }
    hasher.finalize().into()
}

struct Checked {
    hash: [u8; 32],
    /// `None` when skipped as a duplicate or after the stop flag rose.
    outcome: Option<Option<CandidatePatch>>,
}

/// Runs the full subsequence search.
///
/// Batches are validated in parallel but accounted for in enumeration
/// order, so the returned candidates (ascending cardinality, then
/// lexicographic selection) do not depend on thread count. With a
/// candidate limit, the search stops at the first batch boundary where
/// the limit is reached; workers also observe a stop flag between
/// validations and skip the remainder of an in-flight batch.
pub fn search(
    vprime: &SourceTree,
    chgs: &ChangeSeq,
    harness: &dyn Harness,
    suites: &SuitePair,
    trig: &[String],
    budget: &SearchBudget,
    start: Instant,
) -> Result<Vec<CandidatePatch>, SearchError> {
    if trig.is_empty() {
        return Err(SearchError::NoTriggeringTests);
    }
    let deadline = budget.deadline_from(start);
    let stop = AtomicBool::new(false);
    let mut seen: HashSet<[u8; 32]> = HashSet::new();
    let mut candidates: Vec<CandidatePatch> = Vec::new();

    let mut stream = subsequences(chgs.len(), deadline);
    loop {
        let mut batch: Vec<Vec<usize>> = Vec::with_capacity(BATCH);
        let mut exhausted = false;
        while batch.len() < BATCH {
            match stream.next() {
                Some(Ok(selection)) => batch.push(selection),
                Some(Err(e)) => return Err(e.into()),
                None => {
                    exhausted = true;
                    break;
                }
            }
        }

        let results: Vec<Result<Checked, SearchError>> = batch
            .into_par_iter()
            .map(|selection| check_one(vprime, chgs, harness, suites, trig, &seen, &stop, selection))
            .collect();

        for result in results {
            let checked = result?;
            if !seen.insert(checked.hash) {
                continue;
            }
            if let Some(Some(candidate)) = checked.outcome {
                candidates.push(candidate);
            }
        }
        if let Some(limit) = budget.max_candidates {
            if candidates.len() >= limit {
                stop.store(true, Ordering::Relaxed);
                break;
            }
        }
        if exhausted {
            break;
        }
        if Instant::now() > deadline {
            return Err(BudgetExceeded.into());
        }
    }
    Ok(candidates)
}

#[allow(clippy::too_many_arguments)]
fn check_one(
    vprime: &SourceTree,
    chgs: &ChangeSeq,
    harness: &dyn Harness,
    suites: &SuitePair,
    trig: &[String],
    seen: &HashSet<[u8; 32]>,
    stop: &AtomicBool,
    selection: Vec<usize>,
) -> Result<Checked, SearchError> {
    let tree = apply_selection(vprime, chgs, &selection)
        .map_err(|e| SearchError::Apply(e.to_string()))?;
    let hash = tree_hash(&tree);
    if seen.contains(&hash) || stop.load(Ordering::Relaxed) {
        return Ok(Checked {
            hash,
            outcome: None,
        });
    }
    let (verdict, evidence) = validate_evidence(&tree, suites, trig, harness)?;
    let candidate = (verdict == Verdict::Candidate).then(|| CandidatePatch {
        selection,
        tree,
        regression_passed: evidence.regression_passed,
        triggering_passed: evidence.triggering_passed,
    });
    Ok(Checked {
        hash,
        outcome: Some(candidate),
    })
}

/// Why [`decide`] did not emit a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoPatch {
    ZeroCandidates,
    MultipleCandidates { count: usize },
}

impl NoPatch {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoPatch::ZeroCandidates => "zero-candidates",
            NoPatch::MultipleCandidates { .. } => "multiple-candidates",
        }
    }
}

/// The single-candidate rule: a patch comes out iff exactly one
/// candidate survived.
pub fn decide(candidates: Vec<CandidatePatch>) -> Result<CandidatePatch, NoPatch> {
    match candidates.len() {
        0 => Err(NoPatch::ZeroCandidates),
        1 => Ok(candidates.into_iter().next().expect("length checked")),
        count => Err(NoPatch::MultipleCandidates { count }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::change::{apply, coarsen, diff};
    use crate::validate::{prepare_suites, triggering_tests, MiniLangHarness};

    fn tree(files: &[(&str, &str)]) -> SourceTree {
        SourceTree::from_files(files.iter().copied())
    }

    fn far() -> Instant {
        Instant::now() + Duration::from_secs(3600)
    }

    #[test]
    fn three_units_give_seven_subsequences() {
        let all: Vec<_> = subsequences(3, far()).map(Result::unwrap).collect();
        assert_eq!(
            all,
            vec![
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 1, 2],
            ]
        );
    }

    #[test]
    fn one_unit_gives_only_the_full_sequence() {
        let all: Vec<_> = subsequences(1, far()).map(Result::unwrap).collect();
        assert_eq!(all, vec![vec![0]]);
    }

    #[test]
    fn ten_units_give_1023_distinct_subsequences() {
        let mut seen = HashSet::new();
        let mut count = 0usize;
        let mut last_len = 0usize;
        for sel in subsequences(10, far()) {
            let sel = sel.unwrap();
            assert!(sel.len() >= last_len, "cardinality must not descend");
            last_len = sel.len();
            assert!(seen.insert(sel), "duplicate subsequence");
            count += 1;
        }
        assert_eq!(count, 1023);
    }

    #[test]
    fn expired_deadline_ends_the_stream_with_an_error() {
        let past = Instant::now() - Duration::from_secs(1);
        let mut stream = subsequences(5, past);
        assert_eq!(stream.next(), Some(Err(BudgetExceeded)));
        assert_eq!(stream.next(), None);
    }

    #[test]
    fn budget_limits_must_be_positive() {
        assert!(std::panic::catch_unwind(|| {
            SearchBudget::new(Duration::ZERO, 30, None)
        })
        .is_err());
        assert!(std::panic::catch_unwind(|| {
            SearchBudget::new(Duration::from_secs(1), 0, None)
        })
        .is_err());
        let budget = SearchBudget::default();
        assert!(budget.fits(30));
        assert!(!budget.fits(31));
    }

    const CALC_BUGGY: &str = "package p;\n\nclass Calc {\n    int add(int a, int b) {\n        return a - b;\n    }\n\n    int twice(int a) {\n        return a + a;\n    }\n}\n";
    const CALC_FIXED: &str = "package p;\n\nclass Calc {\n    int add(int a, int b) {\n        return a + b;\n    }\n\n    int twice(int a) {\n        return a + a;\n    }\n}\n";
    const TWICE_TEST: &str = "package p;\n\nclass TwiceTest {\n    void test_twice_doubles() {\n        Calc c = Calc();\n        assert c.twice(4) == 8;\n    }\n}\n";
    const ADD_TEST: &str = "package p;\n\nclass AddTest {\n    void test_add_sums() {\n        Calc c = Calc();\n        assert c.add(2, 3) == 5;\n    }\n}\n";

    struct Fixture {
        old: SourceTree,
        chgs: ChangeSeq,
        suites: SuitePair,
        trig: Vec<String>,
        harness: MiniLangHarness,
    }

    fn fixture(old_main: &str, new_main: &str) -> Fixture {
        let old = tree(&[
            ("p/Calc.ml4j", old_main),
            ("tests/p/TwiceTest.ml4j", TWICE_TEST),
        ]);
        let new = tree(&[
            ("p/Calc.ml4j", new_main),
            ("tests/p/TwiceTest.ml4j", TWICE_TEST),
            ("tests/p/AddTest.ml4j", ADD_TEST),
        ]);
        let harness = MiniLangHarness::default();
        let suites = prepare_suites(&old, &new, &harness).unwrap();
        let trig = triggering_tests(&old, &suites.new, &harness).unwrap();
        let raw = diff(&old.main_only(), &new.main_only()).unwrap();
        let chgs = coarsen(&raw, &old);
        Fixture {
            old,
            chgs,
            suites,
            trig,
            harness,
        }
    }

    #[test]
    fn single_line_fix_yields_exactly_one_candidate() {
        let f = fixture(CALC_BUGGY, CALC_FIXED);
        assert_eq!(f.chgs.len(), 2, "operator substitution is two token units");
        let candidates = search(
            &f.old,
            &f.chgs,
            &f.harness,
            &f.suites,
            &f.trig,
            &SearchBudget::default(),
            Instant::now(),
        )
        .unwrap();
        assert_eq!(candidates.len(), 1);
        let patch = decide(candidates).unwrap();
        assert_eq!(patch.selection, vec![0, 1]);
        assert_eq!(patch.triggering_passed, vec!["p.AddTest.test_add_sums"]);
        assert_eq!(patch.regression_passed, 1);
        assert_eq!(
            patch.tree.get("p/Calc.ml4j"),
            Some(CALC_FIXED),
            "the unique candidate is the fixed tree"
        );
    }

    /// The fix plus an edit nothing observes: the fix alone and the full
    /// sequence both survive, so no patch may be emitted.
    const CALC_BUGGY_MISC: &str = "package p;\n\nclass Calc {\n    int add(int a, int b) {\n        return a - b;\n    }\n\n    int twice(int a) {\n        return a + a;\n    }\n\n    int misc() {\n        return 7;\n    }\n}\n";
    const CALC_FIXED_MISC: &str = "package p;\n\nclass Calc {\n    int add(int a, int b) {\n        return a + b;\n    }\n\n    int twice(int a) {\n        return a + a;\n    }\n\n    int misc() {\n        return 8;\n    }\n}\n";

    #[test]
    fn unobserved_extra_edit_yields_two_candidates() {
        let f = fixture(CALC_BUGGY_MISC, CALC_FIXED_MISC);
        assert_eq!(f.chgs.len(), 4);
        let candidates = search(
            &f.old,
            &f.chgs,
            &f.harness,
            &f.suites,
            &f.trig,
            &SearchBudget::default(),
            Instant::now(),
        )
        .unwrap();
        assert_eq!(candidates.len(), 2, "{:?}", selections(&candidates));
        let err = decide(candidates).unwrap_err();
        assert_eq!(err, NoPatch::MultipleCandidates { count: 2 });
        assert_eq!(err.as_str(), "multiple-candidates");
    }

    fn selections(candidates: &[CandidatePatch]) -> Vec<Vec<usize>> {
        candidates.iter().map(|c| c.selection.clone()).collect()
    }

    #[test]
    fn empty_triggering_set_is_an_error_before_enumeration() {
        let f = fixture(CALC_BUGGY, CALC_FIXED);
        let err = search(
            &f.old,
            &f.chgs,
            &f.harness,
            &f.suites,
            &[],
            &SearchBudget::default(),
            Instant::now(),
        )
        .unwrap_err();
        assert!(matches!(err, SearchError::NoTriggeringTests));
    }

    #[test]
    fn exhausted_budget_is_a_timeout() {
        let f = fixture(CALC_BUGGY, CALC_FIXED);
        let tiny = SearchBudget::new(Duration::from_nanos(1), 30, None);
        let start = Instant::now() - Duration::from_secs(1);
        let err = search(
            &f.old, &f.chgs, &f.harness, &f.suites, &f.trig, &tiny, start,
        )
        .unwrap_err();
        assert!(matches!(err, SearchError::Budget(_)));
    }

    /// Exhaustive oracle sharing only the apply/validate primitives: a
    /// plain sequential loop over bitmasks with its own bookkeeping.
    fn oracle_candidate_hashes(f: &Fixture) -> Vec<[u8; 32]> {
        let n = f.chgs.len();
        assert!(n <= 12);
        let mut hashes = Vec::new();
        let mut seen = HashSet::new();
        for mask in 1u32..(1 << n) {
            let selection: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let tree = apply_selection(&f.old, &f.chgs, &selection).unwrap();
            let hash = tree_hash(&tree);
            if !seen.insert(hash) {
                continue;
            }
            let (verdict, _) =
                validate_evidence(&tree, &f.suites, &f.trig, &f.harness).unwrap();
            if verdict == Verdict::Candidate {
                hashes.push(hash);
            }
        }
        hashes.sort();
        hashes
    }

    #[test]
    fn search_matches_the_exhaustive_oracle() {
        for (buggy, fixed) in [
            (CALC_BUGGY, CALC_FIXED),
            (CALC_BUGGY_MISC, CALC_FIXED_MISC),
        ] {
            let f = fixture(buggy, fixed);
            let candidates = search(
                &f.old,
                &f.chgs,
                &f.harness,
                &f.suites,
                &f.trig,
                &SearchBudget::new(Duration::from_secs(600), 30, None),
                Instant::now(),
            )
            .unwrap();
            let mut found: Vec<[u8; 32]> =
                candidates.iter().map(|c| tree_hash(&c.tree)).collect();
            found.sort();
            assert_eq!(found, oracle_candidate_hashes(&f));
        }
    }

    #[test]
    fn candidate_order_is_thread_count_independent() {
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let f = fixture(CALC_BUGGY_MISC, CALC_FIXED_MISC);
                let candidates = search(
                    &f.old,
                    &f.chgs,
                    &f.harness,
                    &f.suites,
                    &f.trig,
                    &SearchBudget::new(Duration::from_secs(600), 30, None),
                    Instant::now(),
                )
                .unwrap();
                selections(&candidates)
            })
        };
        assert_eq!(run_with(1), run_with(4));
    }

    #[test]
    fn decide_requires_exactly_one() {
        assert_eq!(decide(Vec::new()).unwrap_err(), NoPatch::ZeroCandidates);
        assert_eq!(NoPatch::ZeroCandidates.as_str(), "zero-candidates");

        let f = fixture(CALC_BUGGY, CALC_FIXED);
        let full = apply(&f.old, &f.chgs).unwrap();
        let one = CandidatePatch {
            selection: vec![0, 1],
            tree: full.clone(),
            regression_passed: 1,
            triggering_passed: vec!["t".to_string()],
        };
        assert_eq!(decide(vec![one.clone()]).unwrap().selection, vec![0, 1]);
        assert_eq!(
            decide(vec![one.clone(), one]).unwrap_err(),
            NoPatch::MultipleCandidates { count: 2 }
        );
    }
}
