//! Deterministic synthetic commit corpus with ground truth.
//!
//! Every commit is a freshly generated two-package project: the first
//! package holds the class that receives the bug, the second a utility
//! class that receives refactorings. Keeping the two apart means an
//! injected refactoring never overlaps the fix, so its fingerprint
//! pairing survives the edit.
//!
//! The generator records what it injected (the ledger) and the unified
//! diff of the fix alone (the ground truth), which is what a correct
//! extraction must reproduce byte for byte.

use std::io;
use std::path::Path;

use minilang::{check_tree, run_suite, SourceTree, DEFAULT_STEP_BUDGET};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::change::to_unified_diff;
use crate::refactor::engine::{reapply, ReapplyPlan};
use crate::refactor::{Refactoring, RefactoringKind};

/// How many commits of each flavor to generate.
#[derive(Debug, Clone)]
pub struct CorpusPlan {
    pub pure_fix: usize,
    pub with_refactoring: usize,
    pub with_unsupported: usize,
    /// Non-bug-fixing commits; they pad the per-project commit counts
    /// and give the miner soundness cases.
    pub refactoring_only: usize,
    pub seed: u64,
}

impl Default for CorpusPlan {
    fn default() -> Self {
        CorpusPlan {
            pure_fix: 20,
            with_refactoring: 20,
            with_unsupported: 20,
            refactoring_only: 6,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    PureFix,
    FixWithRefactoring,
    FixWithUnsupported,
    RefactoringOnly,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::PureFix => "pure-fix",
            Category::FixWithRefactoring => "fix-with-refactoring",
            Category::FixWithUnsupported => "fix-with-unsupported",
            Category::RefactoringOnly => "refactoring-only",
        }
    }
}

/// One generated commit with everything the evaluation needs.
#[derive(Debug, Clone)]
pub struct GeneratedCommit {
    pub id: String,
    pub project: String,
    pub category: Category,
    pub old: SourceTree,
    pub new: SourceTree,
    /// Unified diff of the fix alone, against the refactoring-included
    /// old version. `None` for non-bug-fixing commits.
    pub ground_truth: Option<String>,
    pub bug: Option<String>,
    pub refactoring: Option<String>,
    pub unsupported: Option<String>,
}

impl GeneratedCommit {
    pub fn bug_fixing(&self) -> bool {
        !matches!(self.category, Category::RefactoringOnly)
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub commits: Vec<GeneratedCommit>,
}

/// Manifest entry, as serialized to `manifest.json`. Paths are relative
/// to the corpus root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub project: String,
    pub bug_fixing: bool,
    pub old: String,
    pub new: String,
    pub ground_truth: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub commits: Vec<ManifestEntry>,
}

/// Ledger entry, as serialized to `ledger.json`: the record of what was
/// injected into the commit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub id: String,
    pub project: String,
    pub category: Category,
    pub bug: Option<String>,
    pub refactoring: Option<String>,
    pub unsupported: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ledger {
    pub commits: Vec<LedgerEntry>,
}

const PROJECTS: &[&str] = &["orbit", "quarry", "harbor"];
const MAIN_PACKAGES: &[&str] = &["billing", "audit", "metering", "inventory", "payroll"];
const UTIL_PACKAGES: &[&str] = &["util", "support", "common", "kitparts"];
const RENAMED_PACKAGES: &[&str] = &["storage", "depot", "annex", "backroom"];
const MAIN_CLASSES: &[&str] = &["Scale", "Meter", "Tally", "Gauge", "Quota"];
const UTIL_CLASSES: &[&str] = &["Box", "Pool", "Stash", "Rack", "Bin"];
const RENAMED_CLASSES: &[&str] = &["Vault", "Chest", "Locker", "Depot"];
const OPERATOR_METHODS: &[&str] = &["sum", "merge", "combine", "join"];
const LITERAL_METHODS: &[&str] = &["clamp", "bound", "cap", "scaled", "grown"];
const GUARD_METHODS: &[&str] = &["share", "split", "ratio", "perHead"];
const ACCUM_METHODS: &[&str] = &["accum", "push", "feed"];
const WEIGH_METHODS: &[&str] = &["weigh", "score", "rate"];
const TOTAL_METHODS: &[&str] = &["total", "settle", "drain"];
const HELPER_METHODS: &[&str] = &["slack", "margin", "spare"];
const FEATURE_METHODS: &[&str] = &["square", "mirror", "amplify"];
const RENAMED_METHODS: &[&str] = &["gather", "collect", "fetchAll"];
const EXTRACTED_METHODS: &[&str] = &["pumpBoth", "fillBoth", "loadBoth"];
const FIELDS: &[&str] = &["held", "kept", "bank"];
const RENAMED_FIELDS: &[&str] = &["stored", "ledgered", "banked"];
const PARAMS: &[&str] = &["v", "amt", "q"];
const RENAMED_PARAMS: &[&str] = &["amount", "portion", "units"];
const LOCALS: &[&str] = &["base", "mid", "lead"];
const RENAMED_LOCALS: &[&str] = &["anchor", "pivot", "stage"];

fn pick<'a>(rng: &mut impl Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

/// One buggy method plus the tests that pin it down.
struct BugSite {
    label: &'static str,
    name: String,
    fixed: String,
    buggy: String,
    /// Test method passing on both versions.
    basic: String,
    /// Test method passing only on the fixed version.
    trig: String,
}

fn operator_site(rng: &mut impl Rng, class: &str) -> BugSite {
    let name = pick(rng, OPERATOR_METHODS).to_string();
    let p = rng.gen_range(2..=9);
    let q = rng.gen_range(2..=9);
    let k = rng.gen_range(2..=9);
    if rng.gen_bool(0.5) {
        BugSite {
            label: "operator-flip",
            buggy: method_text(&format!("int {name}(int a, int b)"), &["return a - b;"]),
            fixed: method_text(&format!("int {name}(int a, int b)"), &["return a + b;"]),
            basic: test_text(
                &format!("test_{name}_keeps_identity"),
                class,
                &[format!("assert x.{name}({k}, 0) == {k};")],
            ),
            trig: test_text(
                &format!("test_{name}_adds"),
                class,
                &[format!("assert x.{name}({p}, {q}) == {};", p + q)],
            ),
            name,
        }
    } else {
        BugSite {
            label: "operator-flip",
            buggy: method_text(&format!("int {name}(int a, int b)"), &["return a + b;"]),
            fixed: method_text(&format!("int {name}(int a, int b)"), &["return a * b;"]),
            // 2+2 == 2*2, so this passes either way.
            basic: test_text(
                &format!("test_{name}_squares_two"),
                class,
                &[format!("assert x.{name}(2, 2) == 4;")],
            ),
            trig: test_text(
                &format!("test_{name}_multiplies"),
                class,
                &[format!("assert x.{name}(3, {q}) == {};", 3 * q)],
            ),
            name,
        }
    }
}

fn literal_site(rng: &mut impl Rng, class: &str) -> BugSite {
    let name = pick(rng, LITERAL_METHODS).to_string();
    if rng.gen_bool(0.5) {
        let limit = rng.gen_range(6..=15);
        let make = |l: i64| {
            method_text(
                &format!("int {name}(int n)"),
                &[
                    &format!("if (n > {l}) {{"),
                    &format!("    return {limit};"),
                    "}",
                    "return n;",
                ],
            )
        };
        BugSite {
            label: "literal-bound",
            buggy: make(limit + 2),
            fixed: make(limit),
            basic: test_text(
                &format!("test_{name}_edges"),
                class,
                &[
                    format!("assert x.{name}({}) == {};", limit - 2, limit - 2),
                    format!("assert x.{name}({}) == {limit};", limit + 4),
                ],
            ),
            trig: test_text(
                &format!("test_{name}_caps_just_over"),
                class,
                &[format!("assert x.{name}({}) == {limit};", limit + 1)],
            ),
            name,
        }
    } else {
        let factor = rng.gen_range(3..=7);
        let make = |m: i64| method_text(&format!("int {name}(int n)"), &[&format!("return n * {m};")]);
        BugSite {
            label: "literal-factor",
            buggy: make(factor - 1),
            fixed: make(factor),
            basic: test_text(
                &format!("test_{name}_zero"),
                class,
                &[format!("assert x.{name}(0) == 0;")],
            ),
            trig: test_text(
                &format!("test_{name}_scales"),
                class,
                &[format!("assert x.{name}(3) == {};", 3 * factor)],
            ),
            name,
        }
    }
}

fn guard_site(rng: &mut impl Rng, class: &str) -> BugSite {
    let name = pick(rng, GUARD_METHODS).to_string();
    let per = rng.gen_range(2..=6);
    let heads = rng.gen_range(2..=5);
    BugSite {
        label: "missing-guard",
        buggy: method_text(
            &format!("int {name}(int total, int users)"),
            &["return total / users;"],
        ),
        fixed: method_text(
            &format!("int {name}(int total, int users)"),
            &[
                "if (users == 0) {",
                "    return 0;",
                "}",
                "return total / users;",
            ],
        ),
        basic: test_text(
            &format!("test_{name}_splits_evenly"),
            class,
            &[format!("assert x.{name}({}, {heads}) == {per};", per * heads)],
        ),
        trig: test_text(
            &format!("test_{name}_with_nobody"),
            class,
            &[format!("assert x.{name}({per}, 0) == 0;")],
        ),
        name,
    }
}

fn method_text(signature: &str, body: &[&str]) -> String {
    let mut out = format!("    {signature} {{\n");
    for line in body {
        out.push_str("        ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str("    }\n");
    out
}

fn test_text(name: &str, class: &str, asserts: &[String]) -> String {
    let mut body = vec![format!("{class} x = {class}();")];
    body.extend(asserts.iter().cloned());
    let refs: Vec<&str> = body.iter().map(String::as_str).collect();
    method_text(&format!("void {name}()"), &refs)
}

fn class_file(package: &str, class: &str, methods: &[&str], field: Option<&str>) -> String {
    let mut out = format!("package {package};\n\nclass {class} {{\n");
    if let Some(field) = field {
        out.push_str(&format!("    int {field};\n\n"));
    }
    out.push_str(&methods.join("\n"));
    out.push_str("}\n");
    out
}

/// Names and constants of the utility class.
struct UtilShape {
    field: String,
    accum: String,
    param: String,
    weigh: String,
    local: String,
    total: String,
    helper: String,
    /// k[0]: weigh multiplier, k[1]: weigh offset, k[2]/k[3]: the two
    /// accumulated amounts, k[4]: local offset, k[5]: helper constant.
    k: [i64; 6],
}

impl UtilShape {
    fn random(rng: &mut impl Rng) -> Self {
        UtilShape {
            field: pick(rng, FIELDS).to_string(),
            accum: pick(rng, ACCUM_METHODS).to_string(),
            param: pick(rng, PARAMS).to_string(),
            weigh: pick(rng, WEIGH_METHODS).to_string(),
            local: pick(rng, LOCALS).to_string(),
            total: pick(rng, TOTAL_METHODS).to_string(),
            helper: pick(rng, HELPER_METHODS).to_string(),
            k: [
                rng.gen_range(2..=5),
                rng.gen_range(1..=9),
                rng.gen_range(4..=9),
                rng.gen_range(4..=9),
                rng.gen_range(1..=6),
                rng.gen_range(10..=40),
            ],
        }
    }

    fn accum_text(&self) -> String {
        method_text(
            &format!("void {}(int {})", self.accum, self.param),
            &[&format!("{f} = {f} + {p};", f = self.field, p = self.param)],
        )
    }

    fn weigh_text(&self) -> String {
        method_text(
            &format!("int {}(int q)", self.weigh),
            &[
                &format!("int {} = q + {};", self.local, self.k[4]),
                &format!("return {} * {} + {};", self.local, self.k[0], self.k[1]),
            ],
        )
    }

    fn total_text(&self, inlined: bool) -> String {
        let lines: Vec<String> = if inlined {
            vec![
                format!("{f} = {f} + {};", self.k[2], f = self.field),
                format!("{f} = {f} + {};", self.k[3], f = self.field),
                format!("return {};", self.field),
            ]
        } else {
            vec![
                format!("{}({});", self.accum, self.k[2]),
                format!("{}({});", self.accum, self.k[3]),
                format!("return {};", self.field),
            ]
        };
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        method_text(&format!("int {}()", self.total), &refs)
    }

    fn helper_text(&self, bump: i64) -> String {
        method_text(
            &format!("int {}()", self.helper),
            &[&format!("return {};", self.k[5] + bump)],
        )
    }
}

/// One generated two-package project, before any commit-level edits.
struct ProjectDraft {
    pkg_a: String,
    class_a: String,
    pkg_b: String,
    class_b: String,
    sites: Vec<BugSite>,
    buggy: usize,
    util: UtilShape,
}

impl ProjectDraft {
    fn random(rng: &mut impl Rng) -> Self {
        let class_a = pick(rng, MAIN_CLASSES).to_string();
        let sites = vec![
            operator_site(rng, &class_a),
            literal_site(rng, &class_a),
            guard_site(rng, &class_a),
        ];
        ProjectDraft {
            pkg_a: pick(rng, MAIN_PACKAGES).to_string(),
            buggy: rng.gen_range(0..sites.len()),
            class_a,
            pkg_b: pick(rng, UTIL_PACKAGES).to_string(),
            class_b: pick(rng, UTIL_CLASSES).to_string(),
            sites,
            util: UtilShape::random(rng),
        }
    }

    fn a_path(&self) -> String {
        format!("{}/{}.ml4j", self.pkg_a, self.class_a)
    }

    fn a_file(&self, fixed: bool, feature: Option<&str>) -> String {
        let mut methods: Vec<String> = self
            .sites
            .iter()
            .enumerate()
            .map(|(i, site)| {
                if fixed || i != self.buggy {
                    site.fixed.clone()
                } else {
                    site.buggy.clone()
                }
            })
            .collect();
        if let Some(feature) = feature {
            methods.push(method_text(
                &format!("int {feature}(int n)"),
                &["return n * n;"],
            ));
        }
        let refs: Vec<&str> = methods.iter().map(String::as_str).collect();
        class_file(&self.pkg_a, &self.class_a, &refs, None)
    }

    fn b_file(&self, inlined_total: bool, helper_bump: i64) -> String {
        let methods = [
            self.util.accum_text(),
            self.util.weigh_text(),
            self.util.total_text(inlined_total),
            self.util.helper_text(helper_bump),
        ];
        let refs: Vec<&str> = methods.iter().map(String::as_str).collect();
        class_file(&self.pkg_b, &self.class_b, &refs, Some(&self.util.field))
    }

    fn a_test_file(&self) -> String {
        let methods: Vec<&str> = self.sites.iter().map(|s| s.basic.as_str()).collect();
        class_file(&self.pkg_a, &format!("{}Test", self.class_a), &methods, None)
    }

    fn b_test_file(&self) -> String {
        let u = &self.util;
        let w = 4;
        let methods = [
            test_text(
                &format!("test_{}_accumulates", u.total),
                &self.class_b,
                &[format!("assert x.{}() == {};", u.total, u.k[2] + u.k[3])],
            ),
            test_text(
                &format!("test_{}_combines", u.weigh),
                &self.class_b,
                &[format!(
                    "assert x.{}({w}) == {};",
                    u.weigh,
                    (w + u.k[4]) * u.k[0] + u.k[1]
                )],
            ),
        ];
        let refs: Vec<&str> = methods.iter().map(String::as_str).collect();
        class_file(&self.pkg_b, &format!("{}Test", self.class_b), &refs, None)
    }

    fn trig_test_file(&self) -> String {
        let site = &self.sites[self.buggy];
        class_file(
            &self.pkg_a,
            &format!("{}BugTest", self.class_a),
            &[&site.trig],
            None,
        )
    }

    fn feature_test_file(&self, feature: &str) -> String {
        let test = test_text(
            &format!("test_{feature}_squares"),
            &self.class_a,
            &[format!("assert x.{feature}(3) == 9;")],
        );
        class_file(
            &self.pkg_a,
            &format!("{}FeatTest", self.class_a),
            &[&test],
            None,
        )
    }

    /// The old version: buggy main class, pristine utility class, and
    /// the tests both versions share.
    fn old_tree(&self) -> SourceTree {
        SourceTree::from_files([
            (self.a_path(), self.a_file(false, None)),
            (
                format!("{}/{}.ml4j", self.pkg_b, self.class_b),
                self.b_file(false, 0),
            ),
            (
                format!("tests/{}/{}Test.ml4j", self.pkg_a, self.class_a),
                self.a_test_file(),
            ),
            (
                format!("tests/{}/{}Test.ml4j", self.pkg_b, self.class_b),
                self.b_test_file(),
            ),
        ])
    }

    /// A refactoring of `kind` targeting the utility side.
    fn refactoring(&self, rng: &mut impl Rng, kind: RefactoringKind) -> Refactoring {
        let u = &self.util;
        match kind {
            RefactoringKind::RenamePackage => Refactoring::RenamePackage {
                old: self.pkg_b.clone(),
                new: pick(rng, RENAMED_PACKAGES).to_string(),
            },
            RefactoringKind::RenameClass => Refactoring::RenameClass {
                package: self.pkg_b.clone(),
                old: self.class_b.clone(),
                new: pick(rng, RENAMED_CLASSES).to_string(),
            },
            RefactoringKind::RenameField => Refactoring::RenameField {
                class: self.class_b.clone(),
                old: u.field.clone(),
                new: pick(rng, RENAMED_FIELDS).to_string(),
            },
            RefactoringKind::RenameMethod => Refactoring::RenameMethod {
                class: self.class_b.clone(),
                old: u.weigh.clone(),
                new: pick(rng, RENAMED_METHODS).to_string(),
            },
            RefactoringKind::RenameParameter => Refactoring::RenameParameter {
                class: self.class_b.clone(),
                method: u.accum.clone(),
                old: u.param.clone(),
                new: pick(rng, RENAMED_PARAMS).to_string(),
            },
            RefactoringKind::RenameVariable => Refactoring::RenameVariable {
                class: self.class_b.clone(),
                method: u.weigh.clone(),
                old: u.local.clone(),
                new: pick(rng, RENAMED_LOCALS).to_string(),
            },
            RefactoringKind::ExtractMethod => {
                let new_method = pick(rng, EXTRACTED_METHODS).to_string();
                Refactoring::ExtractMethod {
                    class: self.class_b.clone(),
                    source_method: u.total.clone(),
                    new_method_text: method_text(
                        &format!("void {new_method}()"),
                        &[
                            &format!("{}({});", u.accum, u.k[2]),
                            &format!("{}({});", u.accum, u.k[3]),
                        ],
                    ),
                    call_text: format!("{new_method}();"),
                    new_method,
                    span: (0, 2),
                }
            }
            RefactoringKind::ExtractVariable => Refactoring::ExtractVariable {
                class: self.class_b.clone(),
                method: u.weigh.clone(),
                var_name: pick(rng, RENAMED_LOCALS).to_string(),
                var_type: "int".to_string(),
                initializer: format!("{} * {}", u.local, u.k[0]),
            },
        }
    }
}

/// Applies the fix by swapping the buggy method text for the fixed one.
/// Refactorings never touch the buggy class, so plain text replacement
/// is exact.
fn apply_fix(tree: &SourceTree, draft: &ProjectDraft) -> SourceTree {
    let site = &draft.sites[draft.buggy];
    let path = draft.a_path();
    let text = tree.get(&path).expect("buggy class present");
    assert!(
        text.contains(&site.buggy),
        "buggy method body should be intact in {path}"
    );
    let mut out = tree.clone();
    out.insert(path, text.replacen(&site.buggy, &site.fixed, 1));
    out
}

fn add_test(tree: &mut SourceTree, package: &str, class: &str, text: String) {
    tree.insert(format!("tests/{package}/{class}.ml4j"), text);
}

/// The three unsupported-change flavors of the fix+unsupported subset.
fn unsupported_variant(i: usize) -> &'static str {
    ["new-feature", "untested-tweak", "inline-call"][i % 3]
}

pub fn generate(plan: &CorpusPlan) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut commits = Vec::new();
    let categories = [
        (Category::PureFix, plan.pure_fix),
        (Category::FixWithRefactoring, plan.with_refactoring),
        (Category::FixWithUnsupported, plan.with_unsupported),
        (Category::RefactoringOnly, plan.refactoring_only),
    ];
    let mut serial = 0usize;
    for (category, count) in categories {
        for i in 0..count {
            serial += 1;
            let commit = generate_commit(&mut rng, category, i, serial);
            validate_commit(&commit);
            commits.push(commit);
        }
    }
    Corpus { commits }
}

fn generate_commit(
    rng: &mut ChaCha8Rng,
    category: Category,
    index: usize,
    serial: usize,
) -> GeneratedCommit {
    let draft = ProjectDraft::random(rng);
    let old = draft.old_tree();
    let site = &draft.sites[draft.buggy];
    let bug = format!(
        "{} in {}.{}.{}",
        site.label, draft.pkg_a, draft.class_a, site.name
    );
    let id = format!("c{:03}-{}", serial, category.as_str());
    let project = PROJECTS[serial % PROJECTS.len()].to_string();

    let (new, ground_truth, bug, refactoring, unsupported) = match category {
        Category::PureFix => {
            let mut new = apply_fix(&old, &draft);
            add_test(
                &mut new,
                &draft.pkg_a,
                &format!("{}BugTest", draft.class_a),
                draft.trig_test_file(),
            );
            let truth = to_unified_diff(&old.main_only(), &new.main_only());
            (new, Some(truth), Some(bug), None, None)
        }
        Category::FixWithRefactoring => {
            let kind = RefactoringKind::ALL[index % RefactoringKind::ALL.len()];
            let refactoring = draft.refactoring(rng, kind);
            let vprime = reapply(&old, &ReapplyPlan::from(vec![refactoring.clone()]))
                .expect("injected refactoring reapplies");
            let mut new = apply_fix(&vprime, &draft);
            add_test(
                &mut new,
                &draft.pkg_a,
                &format!("{}BugTest", draft.class_a),
                draft.trig_test_file(),
            );
            let truth = to_unified_diff(&vprime.main_only(), &new.main_only());
            (
                new,
                Some(truth),
                Some(bug),
                Some(refactoring.to_string()),
                None,
            )
        }
        Category::FixWithUnsupported => {
            let fixed = apply_fix(&old, &draft);
            let truth = to_unified_diff(&old.main_only(), &fixed.main_only());
            let variant = unsupported_variant(index);
            let mut new = fixed;
            let unsupported = match variant {
                "new-feature" => {
                    let feature = pick(rng, FEATURE_METHODS).to_string();
                    new.insert(draft.a_path(), {
                        let with_feature = draft.a_file(true, Some(&feature));
                        with_feature
                    });
                    add_test(
                        &mut new,
                        &draft.pkg_a,
                        &format!("{}FeatTest", draft.class_a),
                        draft.feature_test_file(&feature),
                    );
                    format!("new-feature {}.{}", draft.class_a, feature)
                }
                "untested-tweak" => {
                    new.insert(
                        format!("{}/{}.ml4j", draft.pkg_b, draft.class_b),
                        draft.b_file(false, 1),
                    );
                    format!("untested-tweak {}.{}", draft.class_b, draft.util.helper)
                }
                _ => {
                    new.insert(
                        format!("{}/{}.ml4j", draft.pkg_b, draft.class_b),
                        draft.b_file(true, 0),
                    );
                    format!("inline-call {}.{}", draft.class_b, draft.util.total)
                }
            };
            add_test(
                &mut new,
                &draft.pkg_a,
                &format!("{}BugTest", draft.class_a),
                draft.trig_test_file(),
            );
            (new, Some(truth), Some(bug), None, Some(unsupported))
        }
        Category::RefactoringOnly => {
            // Not a bug-fixing commit: the main class ships fixed on
            // both sides and only the refactoring lands.
            let kind = RefactoringKind::ALL[index % RefactoringKind::ALL.len()];
            let refactoring = draft.refactoring(rng, kind);
            let mut old_clean = old.clone();
            old_clean.insert(draft.a_path(), draft.a_file(true, None));
            let new = reapply(&old_clean, &ReapplyPlan::from(vec![refactoring.clone()]))
                .expect("injected refactoring reapplies");
            return finish_commit(
                id,
                project,
                category,
                old_clean,
                new,
                None,
                None,
                Some(refactoring.to_string()),
                None,
            );
        }
    };
    finish_commit(
        id, project, category, old, new, ground_truth, bug, refactoring, unsupported,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish_commit(
    id: String,
    project: String,
    category: Category,
    old: SourceTree,
    new: SourceTree,
    ground_truth: Option<String>,
    bug: Option<String>,
    refactoring: Option<String>,
    unsupported: Option<String>,
) -> GeneratedCommit {
    GeneratedCommit {
        id,
        project,
        category,
        old,
        new,
        ground_truth,
        bug,
        refactoring,
        unsupported,
    }
}

/// Invariants every generated commit must satisfy; violations are
/// generator bugs, so they panic.
fn validate_commit(commit: &GeneratedCommit) {
    let diag = check_tree(&commit.old);
    assert!(diag.is_empty(), "{}: old does not check: {diag:?}", commit.id);
    let diag = check_tree(&commit.new);
    assert!(diag.is_empty(), "{}: new does not check: {diag:?}", commit.id);

    let outcome = run_suite(&commit.old, DEFAULT_STEP_BUDGET).expect("old parses");
    assert!(
        outcome.all_passed(),
        "{}: old suite fails on old: {outcome:?}",
        commit.id
    );
    let outcome = run_suite(&commit.new, DEFAULT_STEP_BUDGET).expect("new parses");
    assert!(
        outcome.all_passed(),
        "{}: new suite fails on new: {outcome:?}",
        commit.id
    );

    if commit.bug_fixing() {
        // The new suite grafted onto the old version must fail: that
        // failing test is the fix signal.
        let grafted = commit.old.with_tests_from(&commit.new);
        let outcome = run_suite(&grafted, DEFAULT_STEP_BUDGET).expect("grafted parses");
        assert!(
            !outcome.all_passed(),
            "{}: no triggering test distinguishes the versions",
            commit.id
        );
    }
}

/// Writes `commits/<id>/{old,new}/`, per-commit ground truth files, the
/// manifest, and the ledger under `root`.
pub fn write_corpus(corpus: &Corpus, root: &Path) -> io::Result<()> {
    let mut manifest = Manifest {
        commits: Vec::new(),
    };
    let mut ledger = Ledger {
        commits: Vec::new(),
    };
    for commit in &corpus.commits {
        let old_rel = format!("commits/{}/old", commit.id);
        let new_rel = format!("commits/{}/new", commit.id);
        commit.old.write_dir(&root.join(&old_rel))?;
        commit.new.write_dir(&root.join(&new_rel))?;
        let truth_rel = match &commit.ground_truth {
            Some(text) => {
                let rel = format!("commits/{}/ground-truth.diff", commit.id);
                std::fs::write(root.join(&rel), text)?;
                Some(rel)
            }
            None => None,
        };
        manifest.commits.push(ManifestEntry {
            id: commit.id.clone(),
            project: commit.project.clone(),
            bug_fixing: commit.bug_fixing(),
            old: old_rel,
            new: new_rel,
            ground_truth: truth_rel,
        });
        ledger.commits.push(LedgerEntry {
            id: commit.id.clone(),
            project: commit.project.clone(),
            category: commit.category,
            bug: commit.bug.clone(),
            refactoring: commit.refactoring.clone(),
            unsupported: commit.unsupported.clone(),
        });
    }
    std::fs::write(
        root.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;
    std::fs::write(
        root.join("ledger.json"),
        serde_json::to_string_pretty(&ledger).expect("ledger serializes") + "\n",
    )?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> io::Result<Manifest> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn load_ledger(path: &Path) -> io::Result<Ledger> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

/// A fresh check-clean project plus a refactoring of `kind` that applies
/// to it — the raw material for detect∘reapply round-trip checks.
pub fn refactoring_case(rng: &mut ChaCha8Rng, kind: RefactoringKind) -> (SourceTree, Refactoring) {
    let draft = ProjectDraft::random(rng);
    let refactoring = draft.refactoring(rng, kind);
    let mut base = draft.old_tree();
    // The bug is irrelevant here; ship the fixed main class.
    base.insert(draft.a_path(), draft.a_file(true, None));
    (base, refactoring)
}

/// A commit pair suitable for exhaustive-search comparison: the change
/// sequence stays small (≤ 12 coarsened units) and refactorings are not
/// involved. Besides the fix, the commit may carry an untested literal
/// tweak and/or an untested new method, so candidate sets beyond
/// singletons do occur.
pub fn random_search_commit(rng: &mut ChaCha8Rng) -> (SourceTree, SourceTree) {
    let draft = ProjectDraft::random(rng);
    let old = draft.old_tree();
    let mut new = apply_fix(&old, &draft);
    if rng.gen_bool(0.5) {
        new.insert(
            format!("{}/{}.ml4j", draft.pkg_b, draft.class_b),
            draft.b_file(false, 1),
        );
    }
    if rng.gen_bool(0.5) {
        let feature = pick(rng, FEATURE_METHODS).to_string();
        new.insert(draft.a_path(), draft.a_file(true, Some(&feature)));
    }
    add_test(
        &mut new,
        &draft.pkg_a,
        &format!("{}BugTest", draft.class_a),
        draft.trig_test_file(),
    );
    (old, new)
}

/// Token stream of every file in `tree`, skipping files with no tokens.
///
/// [`apply`](crate::change::apply) re-renders files from their spliced
/// token streams and keeps fully emptied files around as empty text, so
/// the diff/apply round-trip guarantee is equality of these maps, not of
/// raw bytes. Panics on unlexable text; generated trees always lex.
pub fn token_streams(tree: &SourceTree) -> std::collections::BTreeMap<String, Vec<String>> {
    tree.iter()
        .map(|(path, text)| {
            let tokens = minilang::lexer::lex(text).expect("tree lexes");
            let texts: Vec<String> = tokens.into_iter().map(|t| t.text).collect();
            (path.to_string(), texts)
        })
        .filter(|(_, tokens)| !tokens.is_empty())
        .collect()
}

const STRAY_LINES: &[&str] = &[
    "        int extra = 41;",
    "        assert 1 == 1;",
    "    int probeDepth;",
    "        extra = extra + 1;",
    "}",
];

/// A randomized pair of lexable trees for diff/apply round-trip checks.
/// The target need not compile — the diff layer works on token streams.
pub fn random_tree_pair(rng: &mut ChaCha8Rng) -> (SourceTree, SourceTree) {
    let base = ProjectDraft::random(rng).old_tree();
    let mut target = base.clone();
    let edits = rng.gen_range(0..=6);
    for _ in 0..edits {
        random_edit(rng, &mut target);
    }
    (base, target)
}

fn random_edit(rng: &mut ChaCha8Rng, tree: &mut SourceTree) {
    let paths: Vec<String> = tree.paths().map(String::from).collect();
    if paths.is_empty() {
        return;
    }
    let path = paths[rng.gen_range(0..paths.len())].clone();
    match rng.gen_range(0..6) {
        0 => {
            // Delete a random line.
            let text = tree.get(&path).unwrap();
            let mut lines: Vec<&str> = text.lines().collect();
            if lines.len() > 1 {
                lines.remove(rng.gen_range(0..lines.len()));
                let joined = lines.join("\n") + "\n";
                tree.insert(path, joined);
            }
        }
        1 => {
            // Duplicate a random line.
            let text = tree.get(&path).unwrap();
            let mut lines: Vec<&str> = text.lines().collect();
            let at = rng.gen_range(0..lines.len());
            lines.insert(at, lines[at]);
            let joined = lines.join("\n") + "\n";
            tree.insert(path, joined);
        }
        2 => {
            // Insert a stray (lexable) line.
            let text = tree.get(&path).unwrap();
            let mut lines: Vec<&str> = text.lines().collect();
            let at = rng.gen_range(0..=lines.len());
            lines.insert(at, pick(rng, STRAY_LINES));
            let joined = lines.join("\n") + "\n";
            tree.insert(path, joined);
        }
        3 => {
            // Replace every digit run in one line with a fresh number.
            let text = tree.get(&path).unwrap();
            let mut lines: Vec<String> = text.lines().map(String::from).collect();
            let at = rng.gen_range(0..lines.len());
            let fresh = rng.gen_range(0..=99).to_string();
            let mut rebuilt = String::new();
            let mut in_digits = false;
            for ch in lines[at].clone().chars() {
                if ch.is_ascii_digit() {
                    if !in_digits {
                        rebuilt.push_str(&fresh);
                        in_digits = true;
                    }
                } else {
                    in_digits = false;
                    rebuilt.push(ch);
                }
            }
            lines[at] = rebuilt;
            let joined = lines.join("\n") + "\n";
            tree.insert(path, joined);
        }
        4 => {
            // Remove a whole file (but keep at least one).
            if paths.len() > 1 {
                tree.remove(&path);
            }
        }
        _ => {
            // Add a small fresh file.
            let name = rng.gen_range(0..1000);
            tree.insert(
                format!("extras/Extra{name}.ml4j"),
                format!("package extras;\n\nclass Extra{name} {{\n    int tag;\n}}\n"),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refactor::detect;

    #[test]
    fn default_plan_generates_sixty_six_commits() {
        let corpus = generate(&CorpusPlan::default());
        assert_eq!(corpus.commits.len(), 66);
        let bug_fixing = corpus.commits.iter().filter(|c| c.bug_fixing()).count();
        assert_eq!(bug_fixing, 60);
        assert!(corpus.commits.iter().all(|c| {
            c.bug_fixing() == c.ground_truth.is_some()
        }));
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let plan = CorpusPlan {
            pure_fix: 3,
            with_refactoring: 3,
            with_unsupported: 3,
            refactoring_only: 1,
            seed: 5,
        };
        let a = generate(&plan);
        let b = generate(&plan);
        for (x, y) in a.commits.iter().zip(&b.commits) {
            assert_eq!(x.id, y.id);
            assert_eq!(
                x.old.iter().collect::<Vec<_>>(),
                y.old.iter().collect::<Vec<_>>()
            );
            assert_eq!(
                x.new.iter().collect::<Vec<_>>(),
                y.new.iter().collect::<Vec<_>>()
            );
            assert_eq!(x.ground_truth, y.ground_truth);
        }
        let c = generate(&CorpusPlan { seed: 6, ..plan });
        let differs = a
            .commits
            .iter()
            .zip(&c.commits)
            .any(|(x, y)| x.old.iter().collect::<Vec<_>>() != y.old.iter().collect::<Vec<_>>());
        assert!(differs, "different seeds should give different programs");
    }

    #[test]
    fn pure_fix_ground_truth_is_the_whole_main_diff() {
        let corpus = generate(&CorpusPlan {
            pure_fix: 4,
            with_refactoring: 0,
            with_unsupported: 0,
            refactoring_only: 0,
            seed: 11,
        });
        for commit in &corpus.commits {
            let full = to_unified_diff(&commit.old.main_only(), &commit.new.main_only());
            assert_eq!(commit.ground_truth.as_deref(), Some(full.as_str()));
        }
    }

    #[test]
    fn refactoring_commits_divert_from_the_full_diff() {
        let corpus = generate(&CorpusPlan {
            pure_fix: 0,
            with_refactoring: 8,
            with_unsupported: 0,
            refactoring_only: 0,
            seed: 11,
        });
        for commit in &corpus.commits {
            let full = to_unified_diff(&commit.old.main_only(), &commit.new.main_only());
            assert_ne!(
                commit.ground_truth.as_deref(),
                Some(full.as_str()),
                "{}: the commit must contain more than the fix",
                commit.id
            );
        }
    }

    /// Miner soundness: on commits whose only change is the ledgered
    /// refactoring, detection reports exactly that entry.
    #[test]
    fn detection_on_refactoring_only_commits_matches_the_ledger() {
        let corpus = generate(&CorpusPlan {
            pure_fix: 0,
            with_refactoring: 0,
            with_unsupported: 0,
            refactoring_only: 8,
            seed: 23,
        });
        for commit in &corpus.commits {
            let detected = detect(&commit.old, &commit.new).unwrap();
            let rendered: Vec<String> = detected.iter().map(|r| r.to_string()).collect();
            assert_eq!(
                rendered,
                vec![commit.refactoring.clone().unwrap()],
                "{}",
                commit.id
            );
        }
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let corpus = generate(&CorpusPlan {
            pure_fix: 1,
            with_refactoring: 1,
            with_unsupported: 1,
            refactoring_only: 1,
            seed: 3,
        });
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&corpus, dir.path()).unwrap();
        let manifest = load_manifest(&dir.path().join("manifest.json")).unwrap();
        let ledger = load_ledger(&dir.path().join("ledger.json")).unwrap();
        assert_eq!(manifest.commits.len(), 4);
        assert_eq!(ledger.commits.len(), 4);
        for entry in &manifest.commits {
            let old = SourceTree::load_dir(&dir.path().join(&entry.old)).unwrap();
            let original = corpus
                .commits
                .iter()
                .find(|c| c.id == entry.id)
                .unwrap();
            assert_eq!(
                old.iter().collect::<Vec<_>>(),
                original.old.iter().collect::<Vec<_>>()
            );
            assert_eq!(entry.bug_fixing, original.bug_fixing());
            if let Some(rel) = &entry.ground_truth {
                let text = std::fs::read_to_string(dir.path().join(rel)).unwrap();
                assert_eq!(Some(text), original.ground_truth);
            }
        }
    }

    #[test]
    fn refactoring_cases_cover_all_kinds_and_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in RefactoringKind::ALL {
            for _ in 0..3 {
                let (base, refactoring) = refactoring_case(&mut rng, kind);
                assert_eq!(refactoring.kind(), kind);
                assert!(check_tree(&base).is_empty());
                let replayed =
                    reapply(&base, &ReapplyPlan::from(vec![refactoring.clone()])).unwrap();
                let detected = detect(&base, &replayed).unwrap();
                assert_eq!(detected, vec![refactoring]);
            }
        }
    }

    #[test]
    fn random_tree_pairs_survive_the_diff_apply_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let (base, target) = random_tree_pair(&mut rng);
            let seq = crate::change::diff(&base, &target).unwrap();
            let back = crate::change::apply(&base, &seq).unwrap();
            assert_eq!(token_streams(&back), token_streams(&target));
        }
    }

    #[test]
    fn random_search_commits_stay_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let (old, new) = random_search_commit(&mut rng);
            let raw = crate::change::diff(&old.main_only(), &new.main_only()).unwrap();
            let chgs = crate::change::coarsen(&raw, &old);
            assert!(
                (1..=12).contains(&chgs.len()),
                "changes out of range: {}",
                chgs.len()
            );
        }
    }
}
