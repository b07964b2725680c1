//! Per-commit orchestration: detect refactorings, reapply them, diff the
//! remainder, search the subsequences, and decide.
//!
//! Every stage failure that reflects a property of the commit becomes an
//! [`Outcome`] in the report; only harness and input problems surface as
//! errors.

use std::time::Instant;

use minilang::{discover_tests, SourceTree, TestCase};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::change::{coarsen, diff, to_unified_diff, DiffError};
use crate::refactor::engine::{reapply, verify_behavior, ReapplyPlan};
use crate::refactor::{detect, Refactoring};
use crate::search::{decide, search, NoPatch, SearchBudget, SearchError};
use crate::validate::{prepare_suites, triggering_tests, Harness, HarnessError};

/// One commit to process: the faulty version, the fixed version, and the
/// knobs that govern the run.
#[derive(Debug, Clone)]
pub struct CommitJob {
    pub id: String,
    pub old: SourceTree,
    pub new: SourceTree,
    pub budget: SearchBudget,
    /// Skip refactoring detection entirely (the ablation mode).
    pub no_refactoring: bool,
}

impl CommitJob {
    pub fn new(id: impl Into<String>, old: SourceTree, new: SourceTree) -> Self {
        CommitJob {
            id: id.into(),
            old,
            new,
            budget: SearchBudget::default(),
            no_refactoring: false,
        }
    }

    pub fn with_budget(mut self, budget: SearchBudget) -> Self {
        self.budget = budget;
        self
    }
}

/// Terminal state of one commit, as serialized in its report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// Exactly one candidate survived; a patch was emitted.
    Patch,
    ZeroCandidates,
    MultipleCandidates,
    /// The change sequence exceeded the unit budget; never searched.
    TooLarge,
    Timeout,
    /// No test in the new suite fails on the refactoring-included
    /// version; there is no fix signal to search for.
    NoTriggeringTest,
    /// Reapplication failed and no fallback was possible.
    ReapplyConflict,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Patch => "patch",
            Outcome::ZeroCandidates => "zero-candidates",
            Outcome::MultipleCandidates => "multiple-candidates",
            Outcome::TooLarge => "too-large",
            Outcome::Timeout => "timeout",
            Outcome::NoTriggeringTest => "no-triggering-test",
            Outcome::ReapplyConflict => "reapply-conflict",
        }
    }
}

/// Wall-clock seconds spent in each stage.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub prepare_secs: f64,
    pub refactor_secs: f64,
    pub diff_secs: f64,
    pub search_secs: f64,
    pub total_secs: f64,
}

/// The serializable record of one commit's run. Field order is the
/// report's JSON key order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommitReport {
    pub id: String,
    pub outcome: Outcome,
    /// Detected refactorings, rendered; see `refactoring_fallback` for
    /// whether they were actually reapplied.
    pub refactorings: Vec<String>,
    /// Why detected refactorings were dropped, when they were.
    pub refactoring_fallback: Option<String>,
    /// The old version had no usable regression tests.
    pub weak_regression: bool,
    pub chgs_raw: usize,
    pub chgs_coarsened: usize,
    pub triggering_tests: Vec<String>,
    pub candidates: usize,
    /// Path of the emitted patch file, filled in by the caller that
    /// writes it; `None` unless the outcome is `patch`.
    pub patch: Option<String>,
    pub timings: StageTimings,
    pub notes: Vec<String>,
}

impl CommitReport {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}

/// Everything `extract` produces: the report plus the artifacts the
/// report refers to.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub report: CommitReport,
    /// Unified diff against `vprime`, present iff the outcome is
    /// `patch`.
    pub patch_text: Option<String>,
    /// The refactoring-included version the patch applies to.
    pub vprime: SourceTree,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("diff failed: {0}")]
    Diff(#[from] DiffError),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Reapplies `detected` to `old` when it is safe to do so.
///
/// Returns the tree the rest of the pipeline should use, plus the reason
/// the plan was dropped when it was: a reapplication conflict or a
/// behavior difference observed on the old suite. Either way the
/// fallback is the unmodified old version, per the all-or-nothing
/// contract.
pub fn choose_vprime(
    old: &SourceTree,
    detected: Vec<Refactoring>,
    cases: &[TestCase],
) -> (SourceTree, Option<String>) {
    if detected.is_empty() {
        return (old.clone(), None);
    }
    match reapply(old, &ReapplyPlan::from(detected)) {
        Ok(vprime) => {
            if verify_behavior(old, &vprime, cases) {
                (vprime, None)
            } else {
                (
                    old.clone(),
                    Some(
                        "reapplied refactorings altered observable behavior; \
                         proceeding without them"
                            .to_string(),
                    ),
                )
            }
        }
        Err(conflict) => (
            old.clone(),
            Some(format!("{conflict}; proceeding without refactorings")),
        ),
    }
}

/// Runs the whole per-commit pipeline and reports the outcome.
pub fn extract(job: &CommitJob, harness: &dyn Harness) -> Result<Extraction, PipelineError> {
    let start = Instant::now();
    let mut timings = StageTimings::default();
    let mut notes = Vec::new();

    let suites = prepare_suites(&job.old, &job.new, harness)?;
    notes.extend(suites.notes.iter().cloned());
    timings.prepare_secs = start.elapsed().as_secs_f64();

    // Refactoring stage: detect on the main files, reapply to the whole
    // tree, keep the result only if the old suite cannot tell the
    // difference.
    let refactor_started = Instant::now();
    let detected = if job.no_refactoring {
        Vec::new()
    } else {
        detect(&job.old, &job.new).map_err(|e| PipelineError::Internal(e.to_string()))?
    };
    let rendered: Vec<String> = detected.iter().map(|r| r.to_string()).collect();
    let cases = regression_cases(&job.old, &suites.old.names)?;
    let (vprime, fallback) = choose_vprime(&job.old, detected, &cases);
    let suites = remap_old_suite(suites, &vprime)?;
    timings.refactor_secs = refactor_started.elapsed().as_secs_f64();

    let report = |outcome, timings: StageTimings, extra: ReportExtra| {
        let mut timings = timings;
        timings.total_secs = start.elapsed().as_secs_f64();
        CommitReport {
            id: job.id.clone(),
            outcome,
            refactorings: rendered.clone(),
            refactoring_fallback: fallback.clone(),
            weak_regression: suites.weak_regression,
            chgs_raw: extra.chgs_raw,
            chgs_coarsened: extra.chgs_coarsened,
            triggering_tests: extra.triggering,
            candidates: extra.candidates,
            patch: None,
            timings,
            notes: notes.clone(),
        }
    };

    let triggering = triggering_tests(&vprime, &suites.new, harness)?;
    if triggering.is_empty() {
        return Ok(Extraction {
            report: report(Outcome::NoTriggeringTest, timings, ReportExtra::default()),
            patch_text: None,
            vprime,
        });
    }

    let diff_started = Instant::now();
    let raw = diff(&vprime.main_only(), &job.new.main_only())?;
    let chgs = coarsen(&raw, &vprime);
    timings.diff_secs = diff_started.elapsed().as_secs_f64();
    let mut extra = ReportExtra {
        chgs_raw: raw.len(),
        chgs_coarsened: chgs.len(),
        triggering: triggering.clone(),
        candidates: 0,
    };

    if !job.budget.fits(chgs.len()) {
        return Ok(Extraction {
            report: report(Outcome::TooLarge, timings, extra),
            patch_text: None,
            vprime,
        });
    }

    let search_started = Instant::now();
    let searched = search(
        &vprime,
        &chgs,
        harness,
        &suites,
        &triggering,
        &job.budget,
        start,
    );
    timings.search_secs = search_started.elapsed().as_secs_f64();

    let candidates = match searched {
        Ok(candidates) => candidates,
        Err(SearchError::Budget(_)) => {
            return Ok(Extraction {
                report: report(Outcome::Timeout, timings, extra),
                patch_text: None,
                vprime,
            });
        }
        Err(SearchError::NoTriggeringTests) => {
            return Ok(Extraction {
                report: report(Outcome::NoTriggeringTest, timings, extra),
                patch_text: None,
                vprime,
            });
        }
        Err(SearchError::Harness(e)) => return Err(e.into()),
        Err(SearchError::Apply(msg)) => return Err(PipelineError::Internal(msg)),
    };
    extra.candidates = candidates.len();

    match decide(candidates) {
        Ok(patch) => {
            let text = to_unified_diff(&vprime, &patch.tree);
            Ok(Extraction {
                report: report(Outcome::Patch, timings, extra),
                patch_text: Some(text),
                vprime,
            })
        }
        Err(NoPatch::ZeroCandidates) => Ok(Extraction {
            report: report(Outcome::ZeroCandidates, timings, extra),
            patch_text: None,
            vprime,
        }),
        Err(NoPatch::MultipleCandidates { .. }) => Ok(Extraction {
            report: report(Outcome::MultipleCandidates, timings, extra),
            patch_text: None,
            vprime,
        }),
    }
}

#[derive(Default)]
struct ReportExtra {
    chgs_raw: usize,
    chgs_coarsened: usize,
    triggering: Vec<String>,
    candidates: usize,
}

/// The old version's screened regression tests as runnable cases, for
/// behavior verification.
fn regression_cases(old: &SourceTree, names: &[String]) -> Result<Vec<TestCase>, PipelineError> {
    let units = old
        .parse_all()
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    Ok(discover_tests(&units)
        .into_iter()
        .filter(|case| names.contains(&case.name))
        .collect())
}

/// Rewrites the old suite's test names into the refactoring-included
/// tree's namespace.
///
/// Reapplied refactorings never rename test classes or test methods
/// (detection looks at main files only), but a package rename moves the
/// test files, which changes their qualified names. The `(class,
/// method)` pair stays a unique key because class names are global.
fn remap_old_suite(
    mut suites: crate::validate::SuitePair,
    vprime: &SourceTree,
) -> Result<crate::validate::SuitePair, PipelineError> {
    let units = vprime
        .parse_all()
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    let renamed: std::collections::HashMap<(String, String), String> = discover_tests(&units)
        .into_iter()
        .map(|case| ((case.class, case.method), case.name))
        .collect();
    for name in &mut suites.old.names {
        let mut parts = name.rsplitn(3, '.');
        let (Some(method), Some(class)) = (parts.next(), parts.next()) else {
            continue;
        };
        if let Some(new_name) = renamed.get(&(class.to_string(), method.to_string())) {
            name.clone_from(new_name);
        }
    }
    suites.old.names.sort();
    Ok(suites)
}
