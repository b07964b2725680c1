//! Corpus-level evaluation: precision, recall, the commit-identical
//! patch ratio, and the runtime-vs-size table.
//!
//! `eval` replays extraction over every bug-fixing commit of a corpus
//! manifest and compares each emitted patch against the recorded ground
//! truth. Comparison is textual: byte equality after newline and
//! trailing-whitespace normalization.

use std::io;
use std::path::Path;

use minilang::SourceTree;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::change::to_unified_diff;
use crate::corpus::{Manifest, ManifestEntry};
use crate::pipeline::{extract, CommitJob, CommitReport, Outcome, PipelineError};
use crate::search::SearchBudget;
use crate::validate::Harness;

#[derive(Debug, Error)]
#[error("manifest: {0}")]
pub struct ManifestError(pub String);

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Per-commit evaluation row.
#[derive(Debug, Clone, Serialize)]
pub struct CommitEval {
    pub id: String,
    pub project: String,
    /// Ground truth equals the full commit diff (main files only).
    pub same_as_commit: bool,
    /// Emitted patch equals the ground truth, when a patch was emitted.
    pub matched: Option<bool>,
    pub report: CommitReport,
}

/// Per-project commit counts: all commits (N1) and bug-fixing commits
/// (N2), with their ratio.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectRow {
    pub project: String,
    pub n1: usize,
    pub n2: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusMetrics {
    /// Share of bug-fixing commits whose concise patch is the whole
    /// commit.
    pub p_same: f64,
    pub p_diff: f64,
    pub projects: Vec<ProjectRow>,
    /// Commits for which a patch was emitted.
    pub generated: usize,
    /// Emitted patches equal to their ground truth.
    pub matched: usize,
    /// matched / generated; absent when nothing was generated.
    pub precision: Option<f64>,
    /// matched / total bug-fixing commits.
    pub recall: f64,
    pub total_bug_fixing: usize,
    pub commits: Vec<CommitEval>,
}

impl CorpusMetrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize") + "\n"
    }
}

/// Newline and trailing-whitespace normalization applied before any
/// patch comparison: CRLF becomes LF, trailing spaces and tabs drop,
/// and the text ends with exactly one newline.
pub fn normalize_patch(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Replays extraction over the manifest's bug-fixing commits and scores
/// the emitted patches against the recorded ground truth.
///
/// `root` is the directory the manifest's relative paths resolve
/// against — normally the manifest's parent directory. Commits are
/// scored in parallel on the ambient rayon pool; the row order still
/// follows the manifest.
pub fn eval(
    manifest: &Manifest,
    root: &Path,
    harness: &dyn Harness,
    budget: SearchBudget,
) -> Result<CorpusMetrics, EvalError> {
    let jobs: Vec<&ManifestEntry> = manifest
        .commits
        .iter()
        .filter(|entry| entry.bug_fixing)
        .collect();
    for entry in &jobs {
        if entry.ground_truth.is_none() {
            return Err(ManifestError(format!(
                "{}: bug-fixing commit without ground truth",
                entry.id
            ))
            .into());
        }
    }

    let commits: Vec<CommitEval> = jobs
        .par_iter()
        .map(|entry| eval_one(entry, root, harness, &budget))
        .collect::<Result<_, EvalError>>()?;

    let total_bug_fixing = commits.len();
    let same = commits.iter().filter(|c| c.same_as_commit).count();
    let generated = commits.iter().filter(|c| c.matched.is_some()).count();
    let matched = commits
        .iter()
        .filter(|c| c.matched == Some(true))
        .count();

    let p_same = ratio(same, total_bug_fixing);
    Ok(CorpusMetrics {
        p_same,
        p_diff: 1.0 - p_same,
        projects: project_rows(&manifest.commits),
        generated,
        matched,
        precision: (generated > 0).then(|| ratio(matched, generated)),
        recall: ratio(matched, total_bug_fixing),
        total_bug_fixing,
        commits,
    })
}

fn eval_one(
    entry: &ManifestEntry,
    root: &Path,
    harness: &dyn Harness,
    budget: &SearchBudget,
) -> Result<CommitEval, EvalError> {
    let truth_rel = entry.ground_truth.as_ref().expect("screened above");
    let truth = normalize_patch(&std::fs::read_to_string(root.join(truth_rel))?);

    let (old, new) = load_pair(entry, root)?;
    let full = normalize_patch(&to_unified_diff(&old.main_only(), &new.main_only()));
    let same_as_commit = truth == full;

    let job = CommitJob::new(entry.id.clone(), old, new).with_budget(budget.clone());
    let extraction = extract(&job, harness)?;
    let matched = extraction
        .patch_text
        .as_ref()
        .map(|patch| normalize_patch(patch) == truth);
    Ok(CommitEval {
        id: entry.id.clone(),
        project: entry.project.clone(),
        same_as_commit,
        matched,
        report: extraction.report,
    })
}

fn load_pair(entry: &ManifestEntry, root: &Path) -> Result<(SourceTree, SourceTree), EvalError> {
    let old = SourceTree::load_dir(&root.join(&entry.old))?;
    let new = SourceTree::load_dir(&root.join(&entry.new))?;
    Ok((old, new))
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn project_rows(entries: &[ManifestEntry]) -> Vec<ProjectRow> {
    let mut by_project: std::collections::BTreeMap<&str, (usize, usize)> =
        std::collections::BTreeMap::new();
    for entry in entries {
        let slot = by_project.entry(&entry.project).or_default();
        slot.0 += 1;
        if entry.bug_fixing {
            slot.1 += 1;
        }
    }
    by_project
        .into_iter()
        .map(|(project, (n1, n2))| ProjectRow {
            project: project.to_string(),
            n1,
            n2,
            ratio: ratio(n2, n1),
        })
        .collect()
}

/// The per-commit evaluation table as CSV.
pub fn metrics_csv(metrics: &CorpusMetrics) -> String {
    let mut out = String::from("id,project,units,seconds,outcome,same_as_commit,matched\n");
    for row in &metrics.commits {
        out.push_str(&format!(
            "{},{},{},{:.3},{},{},{}\n",
            row.id,
            row.project,
            row.report.chgs_coarsened,
            row.report.timings.total_secs,
            row.report.outcome.as_str(),
            row.same_as_commit,
            match row.matched {
                Some(true) => "true",
                Some(false) => "false",
                None => "",
            },
        ));
    }
    out
}

/// The RQ4-style size-vs-time table: one CSV row per report.
pub fn runtime_csv(reports: &[CommitReport]) -> String {
    let mut out = String::from("id,units,seconds,outcome\n");
    for report in reports {
        out.push_str(&format!(
            "{},{},{:.3},{}\n",
            report.id,
            report.chgs_coarsened,
            report.timings.total_secs,
            report.outcome.as_str(),
        ));
    }
    out
}

/// Median total seconds per change-sequence size, ascending by size.
/// The qualitative check on generated corpora: larger change sequences
/// do not get cheaper.
pub fn median_secs_by_size(reports: &[CommitReport]) -> Vec<(usize, f64)> {
    let mut by_size: std::collections::BTreeMap<usize, Vec<f64>> =
        std::collections::BTreeMap::new();
    for report in reports {
        by_size
            .entry(report.chgs_coarsened)
            .or_default()
            .push(report.timings.total_secs);
    }
    by_size
        .into_iter()
        .map(|(size, mut secs)| {
            secs.sort_by(f64::total_cmp);
            let mid = secs.len() / 2;
            let median = if secs.len() % 2 == 1 {
                secs[mid]
            } else {
                (secs[mid - 1] + secs[mid]) / 2.0
            };
            (size, median)
        })
        .collect()
}

const SVG_WIDTH: f64 = 640.0;
const SVG_HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn outcome_color(outcome: Outcome) -> &'static str {
    match outcome {
        Outcome::Patch => "#2a7f3f",
        Outcome::ZeroCandidates => "#888888",
        Outcome::MultipleCandidates => "#555555",
        Outcome::TooLarge => "#b8860b",
        Outcome::Timeout => "#c23b22",
        Outcome::NoTriggeringTest => "#4682b4",
        Outcome::ReapplyConflict => "#7b3fa0",
    }
}

/// Runtime-vs-size scatter plot as a standalone SVG document.
pub fn runtime_svg(reports: &[CommitReport]) -> String {
    let max_units = reports
        .iter()
        .map(|r| r.chgs_coarsened)
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let max_secs = reports
        .iter()
        .map(|r| r.timings.total_secs)
        .fold(0.0_f64, f64::max)
        .max(1e-3);

    let x = |units: f64| MARGIN + units / max_units * (SVG_WIDTH - 2.0 * MARGIN);
    let y = |secs: f64| SVG_HEIGHT - MARGIN - secs / max_secs * (SVG_HEIGHT - 2.0 * MARGIN);

    let mut svg = format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "  <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "  <line x1=\"{m}\" y1=\"{ybase}\" x2=\"{xmax}\" y2=\"{ybase}\" stroke=\"black\"/>\n",
            "  <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{ybase}\" stroke=\"black\"/>\n",
            "  <text x=\"{xmid}\" y=\"{xlab}\" text-anchor=\"middle\" font-size=\"12\">",
            "change units</text>\n",
            "  <text x=\"14\" y=\"{ymid}\" text-anchor=\"middle\" font-size=\"12\" ",
            "transform=\"rotate(-90 14 {ymid})\">seconds</text>\n",
            "  <text x=\"{xmax}\" y=\"{xlab}\" text-anchor=\"end\" font-size=\"10\">{umax}</text>\n",
            "  <text x=\"{m}\" y=\"{ytop}\" text-anchor=\"start\" font-size=\"10\">{smax:.2}s</text>\n",
        ),
        w = SVG_WIDTH,
        h = SVG_HEIGHT,
        m = MARGIN,
        ybase = SVG_HEIGHT - MARGIN,
        xmax = SVG_WIDTH - MARGIN,
        xmid = SVG_WIDTH / 2.0,
        xlab = SVG_HEIGHT - 14.0,
        ymid = SVG_HEIGHT / 2.0,
        ytop = MARGIN - 8.0,
        umax = max_units as usize,
        smax = max_secs,
    );
    for report in reports {
        svg.push_str(&format!(
            "  <circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"{}\" fill-opacity=\"0.7\"><title>{}: {} units, {:.3}s, {}</title></circle>\n",
            x(report.chgs_coarsened as f64),
            y(report.timings.total_secs),
            outcome_color(report.outcome),
            report.id,
            report.chgs_coarsened,
            report.timings.total_secs,
            report.outcome.as_str(),
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate, write_corpus, CorpusPlan};
    use crate::validate::MiniLangHarness;

    fn report(id: &str, units: usize, secs: f64, outcome: Outcome) -> CommitReport {
        CommitReport {
            id: id.to_string(),
            outcome,
            refactorings: Vec::new(),
            refactoring_fallback: None,
            weak_regression: false,
            chgs_raw: units,
            chgs_coarsened: units,
            triggering_tests: Vec::new(),
            candidates: 0,
            patch: None,
            timings: crate::pipeline::StageTimings {
                total_secs: secs,
                ..Default::default()
            },
            notes: Vec::new(),
        }
    }

    #[test]
    fn normalization_strips_cr_and_trailing_whitespace() {
        assert_eq!(normalize_patch("a \r\nb\t\nc"), "a\nb\nc\n");
        assert_eq!(normalize_patch("a\nb\n"), "a\nb\n");
    }

    #[test]
    fn small_corpus_eval_is_fully_precise() {
        let corpus = generate(&CorpusPlan {
            pure_fix: 2,
            with_refactoring: 2,
            with_unsupported: 2,
            refactoring_only: 1,
            seed: 41,
        });
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&corpus, dir.path()).unwrap();
        let manifest = crate::corpus::load_manifest(&dir.path().join("manifest.json")).unwrap();

        let metrics = eval(
            &manifest,
            dir.path(),
            &MiniLangHarness::default(),
            SearchBudget::default(),
        )
        .unwrap();

        assert_eq!(metrics.total_bug_fixing, 6);
        // Pure-fix and fix+refactoring commits must all produce matching
        // patches; fix+unsupported must produce none.
        assert_eq!(metrics.generated, 4, "json: {}", metrics.to_json());
        assert_eq!(metrics.matched, 4);
        assert_eq!(metrics.precision, Some(1.0));
        assert!((metrics.recall - 4.0 / 6.0).abs() < 1e-12);
        // Only the pure-fix commits equal their whole commit.
        assert!((metrics.p_same - 2.0 / 6.0).abs() < 1e-12);
        assert!((metrics.p_same + metrics.p_diff - 1.0).abs() < 1e-12);
        // Three projects in round-robin; N1 counts the refactoring-only
        // commit, N2 does not.
        let n1: usize = metrics.projects.iter().map(|p| p.n1).sum();
        let n2: usize = metrics.projects.iter().map(|p| p.n2).sum();
        assert_eq!((n1, n2), (7, 6));

        let csv = metrics_csv(&metrics);
        assert_eq!(csv.lines().count(), 1 + 6);
        assert!(csv.starts_with("id,project,units,seconds,outcome"));
    }

    #[test]
    fn missing_ground_truth_is_a_manifest_error() {
        let corpus = generate(&CorpusPlan {
            pure_fix: 1,
            with_refactoring: 0,
            with_unsupported: 0,
            refactoring_only: 0,
            seed: 2,
        });
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&corpus, dir.path()).unwrap();
        let mut manifest = crate::corpus::load_manifest(&dir.path().join("manifest.json")).unwrap();
        manifest.commits[0].ground_truth = None;

        let err = eval(
            &manifest,
            dir.path(),
            &MiniLangHarness::default(),
            SearchBudget::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::Manifest(_)), "got: {err}");
    }

    #[test]
    fn runtime_table_has_one_row_per_report() {
        let reports = vec![
            report("a", 2, 0.5, Outcome::Patch),
            report("b", 40, 0.0, Outcome::TooLarge),
        ];
        let csv = runtime_csv(&reports);
        assert_eq!(
            csv,
            "id,units,seconds,outcome\na,2,0.500,patch\nb,40,0.000,too-large\n"
        );
    }

    #[test]
    fn median_by_size_orders_and_aggregates() {
        let reports = vec![
            report("a", 2, 0.4, Outcome::Patch),
            report("b", 2, 0.2, Outcome::Patch),
            report("c", 5, 0.9, Outcome::MultipleCandidates),
        ];
        assert_eq!(
            median_secs_by_size(&reports),
            vec![(2, 0.30000000000000004), (5, 0.9)]
        );
    }

    #[test]
    fn scatter_svg_contains_one_point_per_report() {
        let reports = vec![
            report("a", 2, 0.5, Outcome::Patch),
            report("b", 8, 2.0, Outcome::Timeout),
        ];
        let svg = runtime_svg(&reports);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.starts_with("<svg xmlns"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("#2a7f3f") && svg.contains("#c23b22"));
    }
}
