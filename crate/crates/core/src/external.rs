//! Harness backed by configured shell commands, for projects whose
//! build and test toolchain lives outside this process.
//!
//! Every call materializes the tree into a disposable scratch copy, runs
//! the configured command there, and interprets the result per the
//! declared format. The input tree is never mutated, so concurrent
//! validations are safe. Commands run through `sh -c` with three
//! placeholders substituted: `{tree}` (the materialized copy), `{test}`
//! (one test's name, per-test formats only), and `{report}` (where a
//! JUnit XML report must be written).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use minilang::SourceTree;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::Deserialize;
use tempfile::TempDir;
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::validate::{
    CompileStatus, Harness, HarnessError, TestRecord, TestReport, TestStatus,
};

/// Environment variable naming the scratch root for working copies.
pub const WORKDIR_ENV: &str = "PD_WORKDIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResultFormat {
    /// `test_cmd` runs the whole suite and writes a JUnit XML file to
    /// `{report}`.
    JunitXml,
    /// `test_cmd` runs the whole suite and prints TAP on stdout.
    Tap,
    /// `test_cmd` runs one test (`{test}`); exit 0 means pass. Listing
    /// all tests requires `test_list_cmd`.
    ExitcodePerTest,
}

fn default_build_timeout() -> u64 {
    120
}

fn default_suite_timeout() -> u64 {
    300
}

fn default_test_timeout() -> u64 {
    30
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    /// Compile check; exit 0 means the tree builds.
    pub build_cmd: String,
    /// Test runner, interpreted per `result_format`.
    pub test_cmd: String,
    /// Prints one test name per line; required for `exitcode-per-test`
    /// runs without an explicit selection.
    #[serde(default)]
    pub test_list_cmd: Option<String>,
    pub result_format: ResultFormat,
    /// Scratch root for working copies; defaults to `$PD_WORKDIR`, then
    /// the system temp directory.
    #[serde(default)]
    pub workdir: Option<PathBuf>,
    /// Extra environment for every command.
    #[serde(default)]
    pub env: BTreeMap<String, String>,
    /// Per-test timeout (exitcode-per-test runs); timeouts count as fail.
    #[serde(default = "default_test_timeout")]
    pub test_timeout_secs: u64,
    /// Timeout for one whole-suite run (junit-xml and tap).
    #[serde(default = "default_suite_timeout")]
    pub suite_timeout_secs: u64,
    /// Timeout for the build command.
    #[serde(default = "default_build_timeout")]
    pub build_timeout_secs: u64,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read harness config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse harness config {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl ExternalConfig {
    /// Loads TOML or JSON, chosen by file extension (`.json` is JSON,
    /// anything else is TOML).
    pub fn load(path: &Path) -> Result<ExternalConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let parse_err = |message: String| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        };
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
        }
    }

    fn scratch_root(&self) -> PathBuf {
        self.workdir
            .clone()
            .or_else(|| std::env::var_os(WORKDIR_ENV).map(PathBuf::from))
            .unwrap_or_else(std::env::temp_dir)
    }
}

pub struct ExternalHarness {
    config: ExternalConfig,
}

impl ExternalHarness {
    pub fn new(config: ExternalConfig) -> ExternalHarness {
        ExternalHarness { config }
    }

    pub fn from_config_file(path: &Path) -> Result<ExternalHarness, ConfigError> {
        Ok(ExternalHarness::new(ExternalConfig::load(path)?))
    }

    /// Writes `tree` into a fresh scratch directory that is deleted when
    /// the returned guard drops.
    fn materialize(&self, tree: &SourceTree) -> Result<Workspace, HarnessError> {
        let root = self.config.scratch_root();
        std::fs::create_dir_all(&root)
            .map_err(|e| HarnessError::Command(format!("cannot create scratch root: {e}")))?;
        let dir = tempfile::Builder::new()
            .prefix("pd-work-")
            .tempdir_in(&root)
            .map_err(|e| HarnessError::Command(format!("cannot create working copy: {e}")))?;
        let tree_dir = dir.path().join("tree");
        tree.write_dir(&tree_dir)
            .map_err(|e| HarnessError::Command(format!("cannot write working copy: {e}")))?;
        Ok(Workspace { dir, tree_dir })
    }

    fn run(
        &self,
        template: &str,
        workspace: &Workspace,
        test: Option<&str>,
        report: Option<&Path>,
        timeout: Duration,
    ) -> Result<Exec, HarnessError> {
        let mut cmd_line = template.replace("{tree}", &workspace.tree_dir.to_string_lossy());
        if let Some(test) = test {
            cmd_line = cmd_line.replace("{test}", test);
        }
        if let Some(report) = report {
            cmd_line = cmd_line.replace("{report}", &report.to_string_lossy());
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&cmd_line)
            .current_dir(&workspace.tree_dir)
            .envs(&self.config.env)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| HarnessError::Command(format!("cannot spawn '{cmd_line}': {e}")))?;
        let status = child
            .wait_timeout(timeout)
            .map_err(|e| HarnessError::Command(format!("cannot wait for '{cmd_line}': {e}")))?;
        let timed_out = status.is_none();
        if timed_out {
            let _ = child.kill();
        }
        let output = child
            .wait_with_output()
            .map_err(|e| HarnessError::Command(format!("cannot collect '{cmd_line}': {e}")))?;
        Ok(Exec {
            exit_ok: !timed_out && output.status.success(),
            timed_out,
            stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        })
    }

    fn list_tests(&self, workspace: &Workspace) -> Result<Vec<String>, HarnessError> {
        let Some(template) = &self.config.test_list_cmd else {
            return Err(HarnessError::Command(
                "exitcode-per-test needs test_list_cmd to enumerate tests".to_string(),
            ));
        };
        let exec = self.run(
            template,
            workspace,
            None,
            None,
            Duration::from_secs(self.config.suite_timeout_secs),
        )?;
        if !exec.exit_ok {
            return Err(HarnessError::Command(format!(
                "test_list_cmd failed: {}",
                exec.tail()
            )));
        }
        Ok(exec
            .stdout
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect())
    }

    fn run_per_test(
        &self,
        workspace: &Workspace,
        selection: Option<&[String]>,
    ) -> Result<TestReport, HarnessError> {
        let names: Vec<String> = match selection {
            Some(names) => names.to_vec(),
            None => self.list_tests(workspace)?,
        };
        let timeout = Duration::from_secs(self.config.test_timeout_secs);
        let mut records = Vec::new();
        for name in names {
            let exec = self.run(&self.config.test_cmd, workspace, Some(&name), None, timeout)?;
            let (status, detail) = if exec.timed_out {
                (TestStatus::Timeout, Some("timed out".to_string()))
            } else if exec.exit_ok {
                (TestStatus::Pass, None)
            } else {
                (TestStatus::Fail, Some(exec.tail()))
            };
            records.push(TestRecord {
                name,
                status,
                detail,
            });
        }
        Ok(TestReport::from_records(records))
    }

    fn run_whole_suite(
        &self,
        workspace: &Workspace,
        selection: Option<&[String]>,
    ) -> Result<TestReport, HarnessError> {
        let timeout = Duration::from_secs(self.config.suite_timeout_secs);
        let report_path = workspace.dir.path().join("report.xml");
        let exec = self.run(
            &self.config.test_cmd,
            workspace,
            None,
            Some(&report_path),
            timeout,
        )?;
        if exec.timed_out {
            return Err(HarnessError::Command(format!(
                "test_cmd exceeded {}s",
                self.config.suite_timeout_secs
            )));
        }
        let full = match self.config.result_format {
            ResultFormat::JunitXml => {
                let xml = std::fs::read_to_string(&report_path).map_err(|e| {
                    HarnessError::Report(format!("no JUnit report at {{report}}: {e}"))
                })?;
                parse_junit(&xml)?
            }
            ResultFormat::Tap => parse_tap(&exec.stdout)?,
            ResultFormat::ExitcodePerTest => unreachable!("handled by run_per_test"),
        };
        Ok(project(full, selection))
    }
}

impl Harness for ExternalHarness {
    fn compile_check(&self, tree: &SourceTree) -> Result<CompileStatus, HarnessError> {
        let workspace = self.materialize(tree)?;
        let exec = self.run(
            &self.config.build_cmd,
            &workspace,
            None,
            None,
            Duration::from_secs(self.config.build_timeout_secs),
        )?;
        Ok(if exec.exit_ok {
            CompileStatus::Clean
        } else {
            CompileStatus::Rejected {
                diagnostics: vec![exec.tail()],
            }
        })
    }

    fn run_suite(
        &self,
        tree: &SourceTree,
        selection: Option<&[String]>,
    ) -> Result<TestReport, HarnessError> {
        let workspace = self.materialize(tree)?;
        match self.config.result_format {
            ResultFormat::ExitcodePerTest => self.run_per_test(&workspace, selection),
            ResultFormat::JunitXml | ResultFormat::Tap => {
                self.run_whole_suite(&workspace, selection)
            }
        }
    }

    /// External toolchains are trusted only best-effort; suite
    /// preparation screens for flaky tests.
    fn deterministic(&self) -> bool {
        false
    }
}

/// A materialized working copy, deleted on drop.
struct Workspace {
    dir: TempDir,
    tree_dir: PathBuf,
}

struct Exec {
    exit_ok: bool,
    timed_out: bool,
    stdout: String,
    stderr: String,
}

impl Exec {
    /// A short failure summary: last stderr line, else last stdout line.
    fn tail(&self) -> String {
        let last = |s: &str| s.lines().rev().find(|l| !l.trim().is_empty()).map(String::from);
        if self.timed_out {
            return "timed out".to_string();
        }
        last(&self.stderr)
            .or_else(|| last(&self.stdout))
            .unwrap_or_else(|| "command failed with no output".to_string())
    }
}

/// Restricts a full-suite report to `selection`; selected names the run
/// never mentioned come back failed rather than silently dropped.
fn project(full: TestReport, selection: Option<&[String]>) -> TestReport {
    let Some(names) = selection else { return full };
    let mut records = Vec::new();
    for name in names {
        match full.records.iter().find(|r| &r.name == name) {
            Some(record) => records.push(record.clone()),
            None => records.push(TestRecord {
                name: name.clone(),
                status: TestStatus::Fail,
                detail: Some("test not found".to_string()),
            }),
        }
    }
    TestReport::from_records(records)
}

/// Extracts `<testcase>` results from a JUnit XML document. A testcase
/// passes unless it contains a `failure`, `error`, or `skipped` child.
fn parse_junit(xml: &str) -> Result<TestReport, HarnessError> {
    fn attr(tag: &quick_xml::events::BytesStart, key: &[u8]) -> Option<String> {
        tag.attributes()
            .flatten()
            .find(|a| a.key.as_ref() == key)
            .map(|a| String::from_utf8_lossy(&a.value).into_owned())
    }

    // `has_end` distinguishes <testcase>...</testcase> from <testcase/>;
    // only the former can still contain a failure child.
    fn open(
        tag: &quick_xml::events::BytesStart,
        has_end: bool,
        in_case: &mut bool,
        records: &mut Vec<TestRecord>,
    ) {
        match tag.name().as_ref() {
            b"testcase" => {
                let case = attr(tag, b"name").unwrap_or_default();
                let name = match attr(tag, b"classname").filter(|c| !c.is_empty()) {
                    Some(class) => format!("{class}.{case}"),
                    None => case,
                };
                records.push(TestRecord {
                    name,
                    status: TestStatus::Pass,
                    detail: None,
                });
                *in_case = has_end;
            }
            kind @ (b"failure" | b"error" | b"skipped") if *in_case => {
                if let Some(last) = records.last_mut() {
                    last.status = TestStatus::Fail;
                    last.detail = Some(attr(tag, b"message").unwrap_or_else(|| {
                        String::from_utf8_lossy(kind).into_owned()
                    }));
                }
            }
            _ => {}
        }
    }

    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);
    let mut records: Vec<TestRecord> = Vec::new();
    let mut in_case = false;
    loop {
        match reader
            .read_event()
            .map_err(|e| HarnessError::Report(format!("bad JUnit XML: {e}")))?
        {
            Event::Start(tag) => open(&tag, true, &mut in_case, &mut records),
            Event::Empty(tag) => open(&tag, false, &mut in_case, &mut records),
            Event::End(tag) => {
                if tag.name().as_ref() == b"testcase" {
                    in_case = false;
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if records.is_empty() {
        return Err(HarnessError::Report(
            "JUnit report contains no testcases".to_string(),
        ));
    }
    Ok(TestReport::from_records(records))
}

/// Parses TAP lines of the form `ok N - name` / `not ok N - name`.
/// Directives demote to failure: a skipped test is not a passing test.
fn parse_tap(output: &str) -> Result<TestReport, HarnessError> {
    let mut records = Vec::new();
    for line in output.lines() {
        let line = line.trim();
        let (passed, rest) = if let Some(rest) = line.strip_prefix("not ok") {
            (false, rest)
        } else if let Some(rest) = line.strip_prefix("ok") {
            (true, rest)
        } else {
            continue;
        };
        let rest = rest.trim_start();
        let rest = rest.trim_start_matches(|c: char| c.is_ascii_digit());
        let rest = rest.trim_start();
        let rest = rest.strip_prefix('-').unwrap_or(rest).trim_start();
        let (name, directive) = match rest.split_once('#') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (rest, None),
        };
        if name.is_empty() {
            continue;
        }
        let skipped = directive.is_some_and(|d| d.to_ascii_lowercase().starts_with("skip"));
        let (status, detail) = if passed && !skipped {
            (TestStatus::Pass, None)
        } else if skipped {
            (TestStatus::Fail, Some("skipped".to_string()))
        } else {
            (TestStatus::Fail, None)
        };
        records.push(TestRecord {
            name: name.to_string(),
            status,
            detail,
        });
    }
    if records.is_empty() {
        return Err(HarnessError::Report(
            "TAP output contains no test lines".to_string(),
        ));
    }
    Ok(TestReport::from_records(records))
}
