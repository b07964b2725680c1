//! MiniLang toolchain front end: static checking and test running for
//! `.ml4j` source trees.
//!
//! The `test` subcommand speaks every result format the external
//! harness understands — human lines, `--tap`, `--junit <file>`, and the
//! exit code itself (0 iff everything selected passed) — so a config of
//! `minilang check {tree}` / `minilang test {tree} ...` turns any tree
//! into an externally driven project.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use minilang::{
    check_tree, discover_tests, interp::run_cases, SourceTree, TestOutcome, TestResult,
    DEFAULT_STEP_BUDGET,
};

#[derive(Parser)]
#[command(name = "minilang", about = "Check and test MiniLang source trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and statically check a source tree; diagnostics go to
    /// stdout as `path:line:col: message`.
    Check { tree: PathBuf },
    /// Run the `test_*` methods under `tests/`.
    Test(TestArgs),
}

#[derive(Args)]
struct TestArgs {
    tree: PathBuf,
    /// Print the discovered test names, one per line, without running.
    #[arg(long)]
    list: bool,
    /// Run only the named tests (repeatable); names are
    /// `package.Class.method`.
    #[arg(long = "name")]
    names: Vec<String>,
    /// Print TAP instead of the human lines.
    #[arg(long, conflicts_with = "junit")]
    tap: bool,
    /// Write a JUnit XML report to this path.
    #[arg(long)]
    junit: Option<PathBuf>,
    /// Interpreter step budget per test.
    #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
    budget: u64,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Check { tree } => check(&tree),
        Command::Test(args) => test(&args),
    }
    .unwrap_or_else(|err| {
        eprintln!("minilang: {err}");
        ExitCode::from(2)
    })
}

/// Prints one line, dying quietly with the shell's SIGPIPE code when
/// stdout has gone away (as under `... | head`).
fn say(line: &str) {
    use std::io::Write;
    if writeln!(std::io::stdout(), "{line}").is_err() {
        std::process::exit(141);
    }
}

fn load(path: &PathBuf) -> anyhow::Result<SourceTree> {
    Ok(SourceTree::load_dir(path)?)
}

fn check(path: &PathBuf) -> anyhow::Result<ExitCode> {
    let tree = load(path)?;
    let diagnostics = check_tree(&tree);
    for diagnostic in &diagnostics {
        say(&diagnostic.to_string());
    }
    Ok(if diagnostics.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn test(args: &TestArgs) -> anyhow::Result<ExitCode> {
    let tree = load(&args.tree)?;
    let units = tree
        .parse_all()
        .map_err(|e| anyhow::anyhow!("{}:{}:{}: {}", e.path, e.line, e.col, e.message))?;
    let mut cases = discover_tests(&units);
    if !args.names.is_empty() {
        let missing: Vec<&String> = args
            .names
            .iter()
            .filter(|n| !cases.iter().any(|c| &c.name == *n))
            .collect();
        if let Some(name) = missing.first() {
            anyhow::bail!("no such test: {name}");
        }
        cases.retain(|c| args.names.contains(&c.name));
    }

    if args.list {
        for case in &cases {
            say(&case.name);
        }
        return Ok(ExitCode::SUCCESS);
    }

    let outcome = run_cases(&units, &cases, args.budget);
    if args.tap {
        print_tap(&outcome.results);
    } else if let Some(report) = &args.junit {
        std::fs::write(report, junit_xml(&outcome.results))?;
    } else {
        print_human(&outcome.results);
    }
    Ok(if outcome.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn print_human(results: &[TestResult]) {
    let mut passed = 0usize;
    for result in results {
        match &result.outcome {
            TestOutcome::Pass => {
                passed += 1;
                say(&format!("pass  {}", result.name));
            }
            TestOutcome::Fail { message } => say(&format!("FAIL  {}: {message}", result.name)),
            TestOutcome::Error { message } => say(&format!("ERROR {}: {message}", result.name)),
        }
    }
    say(&format!("{passed}/{} passed", results.len()));
}

fn print_tap(results: &[TestResult]) {
    say(&format!("1..{}", results.len()));
    for (i, result) in results.iter().enumerate() {
        let n = i + 1;
        match &result.outcome {
            TestOutcome::Pass => say(&format!("ok {n} - {}", result.name)),
            TestOutcome::Fail { .. } | TestOutcome::Error { .. } => {
                say(&format!("not ok {n} - {}", result.name));
            }
        }
    }
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn junit_xml(results: &[TestResult]) -> String {
    let failures = results.iter().filter(|r| !r.outcome.passed()).count();
    let mut xml = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    xml.push_str(&format!(
        "<testsuite name=\"minilang\" tests=\"{}\" failures=\"{failures}\">\n",
        results.len()
    ));
    for result in results {
        // `package.Class.method` splits into JUnit's classname + name.
        let (classname, method) = result
            .name
            .rsplit_once('.')
            .unwrap_or(("", result.name.as_str()));
        xml.push_str(&format!(
            "  <testcase classname=\"{}\" name=\"{}\"",
            xml_escape(classname),
            xml_escape(method)
        ));
        match &result.outcome {
            TestOutcome::Pass => xml.push_str("/>\n"),
            TestOutcome::Fail { message } => xml.push_str(&format!(
                ">\n    <failure message=\"{}\"/>\n  </testcase>\n",
                xml_escape(message)
            )),
            TestOutcome::Error { message } => xml.push_str(&format!(
                ">\n    <error message=\"{}\"/>\n  </testcase>\n",
                xml_escape(message)
            )),
        }
    }
    xml.push_str("</testsuite>\n");
    xml
}
