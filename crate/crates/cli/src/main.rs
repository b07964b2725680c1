//! Patch extraction front end.
//!
//! `extract` runs the whole pipeline on one commit (two program
//! versions), `eval` replays it over a corpus manifest and reports
//! precision/recall, `mine` only detects refactorings, `gen-corpus`
//! builds a synthetic evaluation corpus, and `report-runtime` turns a
//! pile of commit reports into the size-vs-time table.
//!
//! Exit codes: 0 when a patch is emitted (and for the non-extraction
//! subcommands), 10 for clean no-patch outcomes, 20 for harness or
//! setup failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use minilang::SourceTree;
use patchdistill_core::corpus::{generate, load_manifest, write_corpus, CorpusPlan};
use patchdistill_core::external::ExternalHarness;
use patchdistill_core::metrics::{self, eval};
use patchdistill_core::pipeline::{extract, CommitJob, CommitReport, Outcome};
use patchdistill_core::refactor::{detect, dump_refactorings, reapply, ReapplyPlan};
use patchdistill_core::search::SearchBudget;
use patchdistill_core::validate::{Harness, MiniLangHarness};

#[derive(Parser)]
#[command(
    name = "patchdistill",
    about = "Extract complete and concise bug-fixing patches from version pairs"
)]
struct Cli {
    /// Worker threads for validation (and commits, under eval).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on one commit: old and new version trees.
    Extract(ExtractArgs),
    /// Score extraction against a corpus manifest's ground truth.
    Eval(EvalArgs),
    /// Detect refactorings between two versions without searching.
    Mine(MineArgs),
    /// Generate a synthetic commit corpus with ledger and ground truth.
    GenCorpus(GenCorpusArgs),
    /// Collect commit reports into the size-vs-time table.
    ReportRuntime(ReportRuntimeArgs),
}

#[derive(Args)]
struct BudgetArgs {
    /// Wall-clock budget per commit, in minutes.
    #[arg(long, default_value_t = 40)]
    budget_mins: u64,
    /// Skip commits whose coarsened change sequence exceeds this.
    #[arg(long, default_value_t = 30)]
    max_units: usize,
}

impl BudgetArgs {
    fn budget(&self) -> SearchBudget {
        SearchBudget {
            wall_clock: Duration::from_secs(self.budget_mins * 60),
            max_units: self.max_units,
            ..SearchBudget::default()
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// The faulty version V_{n-1}: a directory or .tar.gz archive.
    #[arg(long)]
    old: PathBuf,
    /// The fixed version V_n: a directory or .tar.gz archive.
    #[arg(long)]
    new: PathBuf,
    /// External harness config (TOML or JSON); defaults to the built-in
    /// MiniLang interpreter harness.
    #[arg(long)]
    harness: Option<PathBuf>,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Where patch.diff, vprime/, and report.json go.
    #[arg(long, default_value = "pd-out")]
    out: PathBuf,
    /// Ablation: treat the commit as if no refactorings were detected.
    #[arg(long)]
    no_refactoring: bool,
    /// Also write the refactoring-included tree V'_{n-1} here.
    #[arg(long)]
    emit_refactored_tree: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus manifest; relative paths resolve against its directory.
    #[arg(long)]
    manifest: PathBuf,
    /// Where metrics.json, metrics.csv, and runtime.csv go.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    harness: Option<PathBuf>,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Also write the runtime scatter plot (runtime.svg).
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    old: PathBuf,
    #[arg(long)]
    new: PathBuf,
    /// Emit the detected list as JSON instead of one line each.
    #[arg(long)]
    dump_refactorings: bool,
    /// Reapply the detected refactorings and write V'_{n-1} here.
    #[arg(long)]
    emit_refactored_tree: Option<PathBuf>,
}

#[derive(Args)]
struct GenCorpusArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 17)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    pure_fix: usize,
    #[arg(long, default_value_t = 20)]
    with_refactoring: usize,
    #[arg(long, default_value_t = 20)]
    with_unsupported: usize,
    #[arg(long, default_value_t = 6)]
    refactoring_only: usize,
}

#[derive(Args)]
struct ReportRuntimeArgs {
    /// report.json files, or directories searched recursively for them.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the runtime scatter plot (runtime.svg).
    #[arg(long)]
    svg: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("patchdistill: cannot size worker pool: {e}");
            return ExitCode::from(20);
        }
    }
    let result = match cli.command {
        Command::Extract(args) => run_extract(&args),
        Command::Eval(args) => run_eval(&args),
        Command::Mine(args) => run_mine(&args),
        Command::GenCorpus(args) => run_gen_corpus(&args),
        Command::ReportRuntime(args) => run_report_runtime(&args),
    };
    result.unwrap_or_else(|err| {
        eprintln!("patchdistill: {err:#}");
        ExitCode::from(20)
    })
}

/// Loads a version tree from a directory or a `.tar.gz` / `.tgz`
/// archive. An archive holding a single top-level directory is treated
/// as rooted there.
fn load_tree(path: &Path) -> anyhow::Result<SourceTree> {
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if name.ends_with(".tar.gz") || name.ends_with(".tgz") {
        let scratch = tempfile::tempdir().context("cannot create unpack directory")?;
        let file = std::fs::File::open(path).with_context(|| format!("cannot open {name}"))?;
        tar::Archive::new(flate2::read::GzDecoder::new(file))
            .unpack(scratch.path())
            .with_context(|| format!("cannot unpack {name}"))?;
        let root = sole_subdir(scratch.path())?.unwrap_or_else(|| scratch.path().to_path_buf());
        Ok(SourceTree::load_dir(&root)?)
    } else {
        SourceTree::load_dir(path).with_context(|| format!("cannot load tree {}", path.display()))
    }
}

fn sole_subdir(dir: &Path) -> anyhow::Result<Option<PathBuf>> {
    let entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| Ok(e?.path()))
        .collect::<anyhow::Result<_>>()?;
    Ok(match entries.as_slice() {
        [single] if single.is_dir() => Some(single.clone()),
        _ => None,
    })
}

fn make_harness(config: Option<&PathBuf>) -> anyhow::Result<Box<dyn Harness>> {
    Ok(match config {
        Some(path) => Box::new(ExternalHarness::from_config_file(path)?),
        None => Box::new(MiniLangHarness::default()),
    })
}

/// A stable commit id: the shared parent directory name when both trees
/// sit in one (the `commits/<id>/{old,new}` layout), else "commit".
fn commit_id(old: &Path, new: &Path) -> String {
    let parent = |p: &Path| {
        p.parent()
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned())
    };
    match (parent(old), parent(new)) {
        (Some(a), Some(b)) if a == b && !a.is_empty() => a,
        _ => "commit".to_string(),
    }
}

/// Prints one line, dying quietly with the shell's SIGPIPE code when
/// stdout has gone away (as under `... | head`).
fn say(line: &str) {
    use std::io::Write;
    if writeln!(std::io::stdout(), "{line}").is_err() {
        std::process::exit(141);
    }
}

fn write_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn outcome_exit(outcome: Outcome) -> ExitCode {
    match outcome {
        Outcome::Patch => ExitCode::SUCCESS,
        _ => ExitCode::from(10),
    }
}

fn run_extract(args: &ExtractArgs) -> anyhow::Result<ExitCode> {
    let old = load_tree(&args.old)?;
    let new = load_tree(&args.new)?;
    let harness = make_harness(args.harness.as_ref())?;
    let mut job =
        CommitJob::new(commit_id(&args.old, &args.new), old, new).with_budget(args.budget.budget());
    job.no_refactoring = args.no_refactoring;

    let extraction = extract(&job, harness.as_ref())?;
    let mut report = extraction.report;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    if let Some(patch) = &extraction.patch_text {
        std::fs::write(args.out.join("patch.diff"), patch)?;
        extraction.vprime.write_dir(&args.out.join("vprime"))?;
        report.patch = Some("patch.diff".to_string());
    }
    if let Some(dir) = &args.emit_refactored_tree {
        extraction.vprime.write_dir(dir)?;
    }
    write_atomic(&args.out.join("report.json"), &report.to_json())?;

    say(&format!("{}: {}", report.id, report.outcome.as_str()));
    Ok(outcome_exit(report.outcome))
}

fn run_eval(args: &EvalArgs) -> anyhow::Result<ExitCode> {
    let manifest = load_manifest(&args.manifest)
        .with_context(|| format!("cannot load manifest {}", args.manifest.display()))?;
    let root = args.manifest.parent().unwrap_or(Path::new("."));
    let harness = make_harness(args.harness.as_ref())?;

    let results = eval(&manifest, root, harness.as_ref(), args.budget.budget())?;

    std::fs::create_dir_all(&args.out)?;
    write_atomic(&args.out.join("metrics.json"), &results.to_json())?;
    write_atomic(&args.out.join("metrics.csv"), &metrics::metrics_csv(&results))?;
    let reports: Vec<CommitReport> = results.commits.iter().map(|c| c.report.clone()).collect();
    write_atomic(&args.out.join("runtime.csv"), &metrics::runtime_csv(&reports))?;
    if args.svg {
        write_atomic(&args.out.join("runtime.svg"), &metrics::runtime_svg(&reports))?;
    }

    say(&format!(
        "{} bug-fixing commits: {} generated, {} matched, precision {}, recall {:.3}, P_same {:.3}",
        results.total_bug_fixing,
        results.generated,
        results.matched,
        results
            .precision
            .map_or_else(|| "n/a".to_string(), |p| format!("{p:.3}")),
        results.recall,
        results.p_same,
    ));
    Ok(ExitCode::SUCCESS)
}

fn run_mine(args: &MineArgs) -> anyhow::Result<ExitCode> {
    let old = load_tree(&args.old)?;
    let new = load_tree(&args.new)?;
    let refactorings = detect(&old, &new).map_err(|e| anyhow::anyhow!("{e}"))?;

    if args.dump_refactorings {
        say(&dump_refactorings(&refactorings));
    } else {
        for refactoring in &refactorings {
            say(&refactoring.to_string());
        }
    }
    if let Some(dir) = &args.emit_refactored_tree {
        let vprime = reapply(&old, &ReapplyPlan::from(refactorings))
            .map_err(|e| anyhow::anyhow!("cannot reapply: {e}"))?;
        vprime.write_dir(dir)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run_gen_corpus(args: &GenCorpusArgs) -> anyhow::Result<ExitCode> {
    let plan = CorpusPlan {
        pure_fix: args.pure_fix,
        with_refactoring: args.with_refactoring,
        with_unsupported: args.with_unsupported,
        refactoring_only: args.refactoring_only,
        seed: args.seed,
    };
    let corpus = generate(&plan);
    std::fs::create_dir_all(&args.out)?;
    write_corpus(&corpus, &args.out)?;
    say(&format!(
        "{} commits written to {} (seed {})",
        corpus.commits.len(),
        args.out.display(),
        args.seed
    ));
    Ok(ExitCode::SUCCESS)
}

fn collect_reports(paths: &[PathBuf]) -> anyhow::Result<Vec<CommitReport>> {
    fn visit(path: &Path, found: &mut Vec<PathBuf>) -> anyhow::Result<()> {
        if path.is_dir() {
            for entry in std::fs::read_dir(path)? {
                visit(&entry?.path(), found)?;
            }
        } else if path.file_name().is_some_and(|n| n == "report.json") {
            found.push(path.to_path_buf());
        }
        Ok(())
    }

    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            visit(path, &mut files)?;
        } else {
            files.push(path.clone());
        }
    }
    files.sort();
    let mut reports = Vec::new();
    for file in files {
        let text = std::fs::read_to_string(&file)
            .with_context(|| format!("cannot read {}", file.display()))?;
        let report: CommitReport = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a commit report", file.display()))?;
        reports.push(report);
    }
    anyhow::ensure!(!reports.is_empty(), "no commit reports found");
    Ok(reports)
}

fn run_report_runtime(args: &ReportRuntimeArgs) -> anyhow::Result<ExitCode> {
    let reports = collect_reports(&args.reports)?;
    std::fs::create_dir_all(&args.out)?;
    write_atomic(&args.out.join("runtime.csv"), &metrics::runtime_csv(&reports))?;
    if args.svg {
        write_atomic(&args.out.join("runtime.svg"), &metrics::runtime_svg(&reports))?;
    }
    say(&format!("{} reports tabulated", reports.len()));
    Ok(ExitCode::SUCCESS)
}
