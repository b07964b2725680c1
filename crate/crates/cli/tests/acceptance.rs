//! Release acceptance suite. Each test is one shipping criterion and
//! shows up as one pass/fail line in `cargo test` output; tolerances and
//! budgets are asserted inside.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use minilang::{discover_tests, SourceTree};
use patchdistill_core::change::{apply_selection, coarsen, diff, to_unified_diff};
use patchdistill_core::corpus::{
    generate, load_ledger, load_manifest, random_search_commit, random_tree_pair,
    refactoring_case, token_streams, write_corpus, Category, CorpusPlan,
};
use patchdistill_core::metrics::{eval, normalize_patch};
use patchdistill_core::pipeline::{extract, CommitJob, Outcome};
use patchdistill_core::refactor::engine::{reapply, verify_behavior, ReapplyPlan};
use patchdistill_core::refactor::{detect, Refactoring, RefactoringKind};
use patchdistill_core::search::{search, SearchBudget};
use patchdistill_core::validate::{
    prepare_suites, triggering_tests, validate, MiniLangHarness, Verdict,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const METER_OLD: &str = concat!(
    "package billing;\n\nclass Meter {\n    int rate;\n\n",
    "    int charge(int units) {\n        return units * 3 + rate;\n    }\n\n",
    "    int split(int total, int users) {\n        return total / users;\n    }\n}\n",
);

const METER_TESTS: &str = concat!(
    "package billing;\n\nclass MeterTest {\n",
    "    void test_charge_scales() {\n        Meter x = Meter();\n        assert x.charge(2) == 6;\n    }\n\n",
    "    void test_split_shares() {\n        Meter x = Meter();\n        assert x.split(8, 2) == 4;\n    }\n}\n",
);

const METER_BUG_TEST: &str = concat!(
    "package billing;\n\nclass MeterBugTest {\n",
    "    void test_split_with_nobody() {\n        Meter x = Meter();\n        assert x.split(5, 0) == 0;\n    }\n}\n",
);

const SPLIT_BUGGY_BODY: &str = "        return total / users;\n";

const SPLIT_GUARD: &str =
    "        if (users == 0) {\n            return 0;\n        }\n        return total / users;\n";

/// A commit mixing one extract-variable refactoring with a guard-if fix
/// and a new triggering test — the motivating scenario this tool exists
/// for. The emitted patch must be exactly the guard insertion, expressed
/// against the refactoring-included old version.
#[test]
fn acceptance_1_motivating_example() {
    let old = SourceTree::from_files([
        ("billing/Meter.ml4j", METER_OLD),
        ("tests/billing/MeterTest.ml4j", METER_TESTS),
    ]);
    let refactoring = Refactoring::ExtractVariable {
        class: "Meter".into(),
        method: "charge".into(),
        var_name: "base".into(),
        var_type: "int".into(),
        initializer: "units * 3".into(),
    };
    let vprime = reapply(&old, &ReapplyPlan::from(vec![refactoring])).unwrap();

    let mut new = vprime.clone();
    let meter = new.get("billing/Meter.ml4j").unwrap();
    assert!(meter.contains(SPLIT_BUGGY_BODY));
    new.insert(
        "billing/Meter.ml4j",
        meter.replacen(SPLIT_BUGGY_BODY, SPLIT_GUARD, 1),
    );
    new.insert("tests/billing/MeterBugTest.ml4j", METER_BUG_TEST);
    let truth = to_unified_diff(&vprime.main_only(), &new.main_only());

    let started = Instant::now();
    let extraction = extract(
        &CommitJob::new("motivating-example", old, new),
        &MiniLangHarness::default(),
    )
    .unwrap();
    let elapsed = started.elapsed();

    assert_eq!(extraction.report.outcome, Outcome::Patch);
    assert_eq!(extraction.patch_text.as_deref(), Some(truth.as_str()));
    assert_eq!(extraction.report.refactorings.len(), 1);
    assert!(
        extraction.report.refactorings[0].starts_with("ExtractVariable"),
        "detected: {:?}",
        extraction.report.refactorings
    );
    assert_eq!(
        token_streams(&extraction.vprime),
        token_streams(&vprime),
        "materialized base tree diverges from the reapplied one"
    );
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
}

/// Corpus-level precision: every patch the tool emits over the generated
/// corpus byte-equals the recorded ground truth, and the commits with an
/// entangled unsupported change yield no patch at all.
#[test]
fn acceptance_2_corpus_precision() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(&CorpusPlan::default());
    assert!(corpus.commits.len() >= 60);
    write_corpus(&corpus, dir.path()).unwrap();

    let manifest = load_manifest(&dir.path().join("manifest.json")).unwrap();
    let metrics = eval(
        &manifest,
        dir.path(),
        &MiniLangHarness::default(),
        SearchBudget::default(),
    )
    .unwrap();

    assert_eq!(metrics.total_bug_fixing, 60);
    assert_eq!(metrics.generated, 40, "one patch per supported commit");
    assert_eq!(metrics.matched, metrics.generated);
    assert_eq!(metrics.precision, Some(1.0));
    for row in &metrics.commits {
        if row.id.contains("fix-with-unsupported") {
            assert_ne!(
                row.report.outcome,
                Outcome::Patch,
                "{}: unsupported commit must not produce a patch",
                row.id
            );
        }
    }

    // The detected refactorings are exactly the injected ones.
    let ledger = load_ledger(&dir.path().join("ledger.json")).unwrap();
    for entry in &ledger.commits {
        if entry.category != Category::FixWithRefactoring {
            continue;
        }
        let row = metrics.commits.iter().find(|r| r.id == entry.id).unwrap();
        assert_eq!(
            row.report.refactorings,
            vec![entry.refactoring.clone().unwrap()],
            "{}: detection disagrees with the ledger",
            entry.id
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(15 * 60), "took {elapsed:?}");
}

/// Ablation: with refactoring handling switched off, the fix+refactoring
/// subset loses at least half of its emitted patches, and whatever is
/// still emitted remains byte-identical to the ground truth.
#[test]
fn acceptance_3_refactoring_ablation() {
    let plan = CorpusPlan {
        pure_fix: 0,
        with_refactoring: 20,
        with_unsupported: 0,
        refactoring_only: 0,
        seed: 17,
    };
    let harness = MiniLangHarness::default();
    let mut full = 0usize;
    let mut ablated = 0usize;

    for commit in &generate(&plan).commits {
        let truth = normalize_patch(commit.ground_truth.as_deref().unwrap());
        let baseline = CommitJob::new(commit.id.clone(), commit.old.clone(), commit.new.clone());
        let mut without = baseline.clone();
        without.no_refactoring = true;

        let result = extract(&baseline, &harness).unwrap();
        if let Some(patch) = result.patch_text {
            full += 1;
            assert_eq!(normalize_patch(&patch), truth, "{}: wrong patch", commit.id);
        }
        let result = extract(&without, &harness).unwrap();
        if let Some(patch) = result.patch_text {
            ablated += 1;
            assert_eq!(
                normalize_patch(&patch),
                truth,
                "{}: wrong patch under --no-refactoring",
                commit.id
            );
        }
    }

    assert_eq!(full, 20, "baseline should crack the whole subset");
    assert!(ablated > 0, "some caller-invisible-free commits still emit");
    assert!(ablated < full, "ablation must lose patches (strictly)");
    assert!(
        ablated * 2 <= full,
        "expected at least a 50% drop: {ablated} of {full} remain"
    );
}

/// The batched search returns exactly what a sequential brute-force
/// enumeration of every subsequence returns, on 200 randomized commits
/// with small change sequences.
#[test]
fn acceptance_4_search_matches_exhaustive_oracle() {
    let started = Instant::now();
    let harness = MiniLangHarness::default();
    let budget = SearchBudget::new(Duration::from_secs(240), 30, None);
    let mut rng = ChaCha8Rng::seed_from_u64(404);

    for round in 0..200 {
        let (old, new) = random_search_commit(&mut rng);
        let suites = prepare_suites(&old, &new, &harness).unwrap();
        let trig = triggering_tests(&old, &suites.new, &harness).unwrap();
        let raw = diff(&old.main_only(), &new.main_only()).unwrap();
        let chgs = coarsen(&raw, &old);
        assert!((1..=12).contains(&chgs.len()), "round {round}: {}", chgs.len());

        let found = search(&old, &chgs, &harness, &suites, &trig, &budget, Instant::now())
            .unwrap()
            .into_iter()
            .map(|c| (c.selection, tree_view(&c.tree)))
            .collect::<Vec<_>>();

        // Same subset order (ascending cardinality, lexicographic), same
        // first-tree-wins deduplication, sequential validation.
        let mut subsets: Vec<Vec<usize>> = (1u32..1 << chgs.len())
            .map(|mask| (0..chgs.len()).filter(|i| mask >> i & 1 == 1).collect())
            .collect();
        subsets.sort_by_key(|s| (s.len(), s.clone()));
        let mut seen = BTreeSet::new();
        let mut naive = Vec::new();
        for selection in subsets {
            let tree = apply_selection(&old, &chgs, &selection).unwrap();
            let view = tree_view(&tree);
            if !seen.insert(view.clone()) {
                continue;
            }
            if validate(&tree, &suites, &trig, &harness).unwrap() == Verdict::Candidate {
                naive.push((selection, view));
            }
        }

        assert_eq!(found, naive, "round {round}: candidate sets differ");
    }

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(5 * 60), "took {elapsed:?}");
}

fn tree_view(tree: &SourceTree) -> Vec<(String, String)> {
    tree.iter()
        .map(|(p, t)| (p.to_string(), t.to_string()))
        .collect()
}

/// Token-level diffing round-trips: applying a tree's own diff always
/// reproduces the target's token streams.
#[test]
fn acceptance_5_diff_apply_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for round in 0..1000 {
        let (base, target) = random_tree_pair(&mut rng);
        let seq = diff(&base, &target).unwrap();
        let back = patchdistill_core::change::apply(&base, &seq).unwrap();
        assert_eq!(
            token_streams(&back),
            token_streams(&target),
            "round {round}: round trip diverged"
        );
    }
}

/// Reapplying an injected refactoring and mining the result recovers
/// exactly the injected refactoring, for every kind; rename-only plans
/// preserve observable behavior.
#[test]
fn acceptance_6_refactoring_round_trip() {
    for (offset, kind) in RefactoringKind::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(606 + offset as u64);
        for round in 0..25 {
            let (base, refactoring) = refactoring_case(&mut rng, kind);
            let vprime =
                reapply(&base, &ReapplyPlan::from(vec![refactoring.clone()])).unwrap();
            let detected = detect(&base, &vprime).unwrap();
            assert_eq!(
                detected,
                vec![refactoring],
                "{kind:?} round {round}: detection is not the inverse of reapplication"
            );
            if kind < RefactoringKind::ExtractMethod {
                let cases = discover_tests(&base.parse_all().unwrap());
                assert!(
                    verify_behavior(&base, &vprime, &cases),
                    "{kind:?} round {round}: rename-only plan changed behavior"
                );
            }
        }
    }
}

/// Budget behavior: an over-sized change sequence is skipped up front,
/// and an engineered search explosion stops at the wall clock, within
/// ±10% of a 10-second budget.
#[test]
fn acceptance_7_budget_behavior() {
    let harness = MiniLangHarness::default();

    // 40 coarsened units (3 guard lines + a 37-line method) against the
    // default 30-unit ceiling.
    let old = SourceTree::from_files([
        ("billing/Meter.ml4j", METER_OLD),
        ("tests/billing/MeterTest.ml4j", METER_TESTS),
    ]);
    let mut new = old.clone();
    let meter = new.get("billing/Meter.ml4j").unwrap();
    let fixed = meter.replacen(SPLIT_BUGGY_BODY, SPLIT_GUARD, 1);
    new.insert("billing/Meter.ml4j", append_method(&fixed, &chained_method(35)));
    new.insert("tests/billing/MeterBugTest.ml4j", METER_BUG_TEST);
    let report = extract(&CommitJob::new("too-large", old.clone(), new), &harness)
        .unwrap()
        .report;
    assert_eq!(report.chgs_coarsened, 40, "fixture drifted");
    assert_eq!(report.outcome, Outcome::TooLarge);
    assert_eq!(report.candidates, 0);

    // 29 units whose only valid candidate is the full selection — the
    // last subsequence of 2^29, far beyond a 10-second wall clock.
    let mut new = old.clone();
    let meter = new.get("billing/Meter.ml4j").unwrap();
    let guarded = meter.replacen(
        SPLIT_BUGGY_BODY,
        "        if (users == 0) {\n            return audit(0);\n        }\n        return total / users;\n",
        1,
    );
    new.insert("billing/Meter.ml4j", append_method(&guarded, &chained_method(24)));
    new.insert("tests/billing/MeterBugTest.ml4j", METER_BUG_TEST);
    let budget = SearchBudget::new(Duration::from_secs(10), 30, Some(2));
    let report = extract(
        &CommitJob::new("engineered-timeout", old, new).with_budget(budget),
        &harness,
    )
    .unwrap()
    .report;
    assert_eq!(report.chgs_coarsened, 29, "fixture drifted");
    assert_eq!(report.outcome, Outcome::Timeout);
    assert!(
        (9.0..=11.0).contains(&report.timings.total_secs),
        "stopped at {:.3}s against a 10s budget",
        report.timings.total_secs
    );
}

/// Inserts a method before the closing brace of the file's last class,
/// separated by a blank line.
fn append_method(file: &str, method: &str) -> String {
    let tail = "    }\n}\n";
    assert!(file.ends_with(tail), "unexpected file shape");
    let mut out = file[..file.len() - tail.len()].to_string();
    out.push_str("    }\n\n");
    out.push_str(method);
    out.push_str("}\n");
    out
}

/// A new method whose lines each depend on the previous one, so no
/// proper subset of its lines survives both compilation and execution.
/// `lines` counts the body statements; the rendered text adds the
/// signature and closing brace. `audit(0)` returns 0.
fn chained_method(lines: usize) -> String {
    let mut out = String::from("    int audit(int n) {\n");
    out.push_str("        int a1 = n * 1;\n");
    for i in 2..lines {
        out.push_str(&format!("        int a{i} = a{} * 1;\n", i - 1));
    }
    out.push_str(&format!("        return a{};\n", lines - 1));
    out.push_str("    }\n");
    out
}

/// The share-of-identical-patches statistic on a ten-commit corpus where
/// exactly four ground-truth patches coincide with the whole commit diff
/// comes out to 0.400, exactly.
#[test]
fn acceptance_8_p_same_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(&CorpusPlan {
        pure_fix: 4,
        with_refactoring: 6,
        with_unsupported: 0,
        refactoring_only: 0,
        seed: 808,
    });
    write_corpus(&corpus, dir.path()).unwrap();

    let manifest = load_manifest(&dir.path().join("manifest.json")).unwrap();
    let metrics = eval(
        &manifest,
        dir.path(),
        &MiniLangHarness::default(),
        SearchBudget::default(),
    )
    .unwrap();

    assert_eq!(metrics.total_bug_fixing, 10);
    let same = metrics.commits.iter().filter(|r| r.same_as_commit).count();
    assert_eq!(same, 4);
    assert_eq!(metrics.p_same, 0.4, "share must be exact");
}
