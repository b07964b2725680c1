//! Tree-walking interpreter and test runner.
//!
//! Execution is fully deterministic: no clock, no I/O, no randomness. The
//! only resource limits are a step budget (one unit per statement or
//! expression node) and a call-depth cap, both of which fail the running
//! test with an `Error` outcome instead of hanging. That makes the budget a
//! deterministic stand-in for a wall-clock timeout.
//!
//! A test is any zero-parameter method whose name starts with `test_`,
//! declared in a file under `tests/`. Each test runs on a fresh heap: the
//! declaring class is instantiated with default field values and the method
//! is invoked on it. An `assert` with a false condition fails the test; any
//! runtime fault (null dereference, division by zero, overflow, missing
//! return, exhausted budget) errors it.

use std::collections::BTreeMap;
use std::fmt;

use crate::ast::*;
use crate::parser::SyntaxError;
use crate::render::render_expr;
use crate::tree::{is_test_path, SourceTree};

/// Default per-test step budget.
pub const DEFAULT_STEP_BUDGET: u64 = 2_000_000;
/// Maximum interpreter call depth.
pub const MAX_CALL_DEPTH: usize = 200;
/// Required prefix of test method names.
pub const TEST_PREFIX: &str = "test_";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(String),
    /// Heap index of an instance.
    Ref(usize),
    Null,
}

#[derive(Debug, Clone)]
struct Instance {
    class: String,
    fields: BTreeMap<String, Value>,
}

/// Why a test did not pass.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Fault {
    /// An `assert` condition evaluated to `false`.
    AssertFailed(String),
    /// A runtime error: the program state is broken, not merely wrong.
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestOutcome {
    Pass,
    Fail { message: String },
    Error { message: String },
}

impl TestOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, TestOutcome::Pass)
    }
}

impl fmt::Display for TestOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestOutcome::Pass => write!(f, "pass"),
            TestOutcome::Fail { message } => write!(f, "fail: {message}"),
            TestOutcome::Error { message } => write!(f, "error: {message}"),
        }
    }
}

/// One discovered test method.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TestCase {
    /// Fully qualified `package.Class.method`.
    pub name: String,
    pub path: String,
    pub class: String,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestResult {
    pub name: String,
    pub outcome: TestOutcome,
}

/// Results of one suite run, in test-name order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SuiteOutcome {
    pub results: Vec<TestResult>,
}

impl SuiteOutcome {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.outcome.passed())
    }

    pub fn outcome_of(&self, name: &str) -> Option<&TestOutcome> {
        self.results.iter().find(|r| r.name == name).map(|r| &r.outcome)
    }

    pub fn passing_names(&self) -> Vec<String> {
        self.results
            .iter()
            .filter(|r| r.outcome.passed())
            .map(|r| r.name.clone())
            .collect()
    }

    pub fn failing_names(&self) -> Vec<String> {
        self.results
            .iter()
            .filter(|r| !r.outcome.passed())
            .map(|r| r.name.clone())
            .collect()
    }
}

/// Lists every test method in `units`, sorted by qualified name.
pub fn discover_tests(units: &[CompilationUnit]) -> Vec<TestCase> {
    let mut cases: Vec<TestCase> = Vec::new();
    for unit in units {
        if !is_test_path(&unit.path) {
            continue;
        }
        for class in &unit.classes {
            for method in &class.methods {
                if method.name.starts_with(TEST_PREFIX) && method.params.is_empty() {
                    cases.push(TestCase {
                        name: format!("{}.{}.{}", unit.package_name, class.name, method.name),
                        path: unit.path.clone(),
                        class: class.name.clone(),
                        method: method.name.clone(),
                    });
                }
            }
        }
    }
    cases.sort();
    cases
}

/// Runs every test in `tree` with the given per-test budget.
pub fn run_suite(tree: &SourceTree, budget: u64) -> Result<SuiteOutcome, SyntaxError> {
    let units = tree.parse_all()?;
    let cases = discover_tests(&units);
    Ok(run_cases(&units, &cases, budget))
}

/// Runs the given subset of tests against `units`.
pub fn run_cases(units: &[CompilationUnit], cases: &[TestCase], budget: u64) -> SuiteOutcome {
    let runner = Runner::new(units);
    let mut results: Vec<TestResult> = cases
        .iter()
        .map(|case| TestResult {
            name: case.name.clone(),
            outcome: runner.run_test(&case.class, &case.method, budget),
        })
        .collect();
    results.sort_by(|a, b| a.name.cmp(&b.name));
    SuiteOutcome { results }
}

/// Shared immutable program context; per-test state lives in [`Exec`].
pub struct Runner<'p> {
    classes: BTreeMap<&'p str, &'p ClassDecl>,
}

impl<'p> Runner<'p> {
    pub fn new(units: &'p [CompilationUnit]) -> Self {
        let mut classes = BTreeMap::new();
        for unit in units {
            for class in &unit.classes {
                // First declaration wins, mirroring the checker.
                classes.entry(class.name.as_str()).or_insert(class);
            }
        }
        Runner { classes }
    }

    /// Instantiates `class` and invokes `method` on it under `budget`.
    pub fn run_test(&self, class: &str, method: &str, budget: u64) -> TestOutcome {
        let mut exec = Exec {
            classes: &self.classes,
            heap: Vec::new(),
            fuel: budget,
            depth: 0,
        };
        let result = exec
            .instantiate(class)
            .and_then(|this| exec.call_method(this, class, method, Vec::new()));
        match result {
            Ok(_) => TestOutcome::Pass,
            Err(Fault::AssertFailed(message)) => TestOutcome::Fail { message },
            Err(Fault::Error(message)) => TestOutcome::Error { message },
        }
    }
}

struct Exec<'p> {
    classes: &'p BTreeMap<&'p str, &'p ClassDecl>,
    heap: Vec<Instance>,
    fuel: u64,
    depth: usize,
}

/// One activation record: the receiver, its class, and local scopes with the
/// parameter frame at the bottom.
struct Frame {
    this_ref: usize,
    class: String,
    scopes: Vec<Vec<(String, Value)>>,
}

impl Frame {
    fn lookup(&self, name: &str) -> Option<&Value> {
        self.scopes
            .iter()
            .rev()
            .find_map(|scope| scope.iter().find(|(n, _)| n == name).map(|(_, v)| v))
    }

    fn lookup_mut(&mut self, name: &str) -> Option<&mut Value> {
        self.scopes
            .iter_mut()
            .rev()
            .find_map(|scope| scope.iter_mut().find(|(n, _)| n == name).map(|(_, v)| v))
    }
}

/// What a statement did to control flow.
enum Flow {
    Normal,
    Return(Value),
}

impl<'p> Exec<'p> {
    fn step(&mut self) -> Result<(), Fault> {
        if self.fuel == 0 {
            return Err(Fault::Error("step budget exhausted".to_string()));
        }
        self.fuel -= 1;
        Ok(())
    }

    fn class(&self, name: &str) -> Result<&'p ClassDecl, Fault> {
        self.classes
            .get(name)
            .copied()
            .ok_or_else(|| Fault::Error(format!("unknown class '{name}'")))
    }

    fn instantiate(&mut self, class_name: &str) -> Result<Value, Fault> {
        self.step()?;
        let class = self.class(class_name)?;
        let fields = class
            .fields
            .iter()
            .map(|f| (f.name.clone(), default_value(&f.ty)))
            .collect();
        self.heap.push(Instance {
            class: class_name.to_string(),
            fields,
        });
        Ok(Value::Ref(self.heap.len() - 1))
    }

    fn call_method(
        &mut self,
        recv: Value,
        class_name: &str,
        method_name: &str,
        args: Vec<Value>,
    ) -> Result<Value, Fault> {
        let this_ref = match recv {
            Value::Ref(r) => r,
            Value::Null => return Err(Fault::Error(format!("null dereference calling '{method_name}'"))),
            _ => return Err(Fault::Error(format!("cannot call a method on {}", kind_name(&recv)))),
        };
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Fault::Error("call depth exceeded".to_string()));
        }
        let class = self.class(class_name)?;
        let method = class.find_method(method_name).ok_or_else(|| {
            Fault::Error(format!("unknown method '{method_name}' in class '{class_name}'"))
        })?;
        if method.params.len() != args.len() {
            return Err(Fault::Error(format!(
                "method '{}' expects {} argument(s), got {}",
                method_name,
                method.params.len(),
                args.len()
            )));
        }
        let params = method
            .params
            .iter()
            .zip(args)
            .map(|(p, v)| (p.name.clone(), v))
            .collect();
        let mut frame = Frame {
            this_ref,
            class: class_name.to_string(),
            scopes: vec![params],
        };
        self.depth += 1;
        let flow = self.exec_block(&method.body, &mut frame);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            Flow::Normal if method.return_type.is_none() => Ok(Value::Null),
            Flow::Normal => Err(Fault::Error(format!(
                "method '{method_name}' did not return a value"
            ))),
        }
    }

    fn exec_block(&mut self, stmts: &[Stmt], frame: &mut Frame) -> Result<Flow, Fault> {
        for stmt in stmts {
            if let Flow::Return(v) = self.exec_stmt(stmt, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_scoped(&mut self, stmts: &[Stmt], frame: &mut Frame) -> Result<Flow, Fault> {
        frame.scopes.push(Vec::new());
        let flow = self.exec_block(stmts, frame);
        frame.scopes.pop();
        flow
    }

    fn exec_stmt(&mut self, stmt: &Stmt, frame: &mut Frame) -> Result<Flow, Fault> {
        self.step()?;
        match stmt {
            Stmt::VarDecl { ty, name, init, .. } => {
                let value = match init {
                    Some(e) => self.eval(e, frame)?,
                    None => default_value(ty),
                };
                frame
                    .scopes
                    .last_mut()
                    .expect("frame has a scope")
                    .push((name.clone(), value));
                Ok(Flow::Normal)
            }
            Stmt::Assign { target, value, .. } => {
                let value = self.eval(value, frame)?;
                self.assign(target, value, frame)?;
                Ok(Flow::Normal)
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                if self.eval_bool(cond, frame)? {
                    self.exec_scoped(then_branch, frame)
                } else {
                    match else_branch {
                        Some(ElseBranch::Block(stmts)) => self.exec_scoped(stmts, frame),
                        Some(ElseBranch::If(nested)) => self.exec_stmt(nested, frame),
                        None => Ok(Flow::Normal),
                    }
                }
            }
            Stmt::While { cond, body, .. } => {
                while self.eval_bool(cond, frame)? {
                    if let Flow::Return(v) = self.exec_scoped(body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::Return { value, .. } => {
                let v = match value {
                    Some(e) => self.eval(e, frame)?,
                    None => Value::Null,
                };
                Ok(Flow::Return(v))
            }
            Stmt::ExprStmt { expr, .. } => {
                self.eval(expr, frame)?;
                Ok(Flow::Normal)
            }
            Stmt::Assert { cond, .. } => {
                if self.eval_bool(cond, frame)? {
                    Ok(Flow::Normal)
                } else {
                    Err(Fault::AssertFailed(format!(
                        "assertion failed: {}",
                        render_expr(cond)
                    )))
                }
            }
        }
    }

    fn assign(&mut self, target: &Expr, value: Value, frame: &mut Frame) -> Result<(), Fault> {
        match target {
            Expr::Name(name, _) => {
                if let Some(slot) = frame.lookup_mut(name) {
                    *slot = value;
                    return Ok(());
                }
                let this_ref = frame.this_ref;
                match self.heap[this_ref].fields.get_mut(name) {
                    Some(slot) => {
                        *slot = value;
                        Ok(())
                    }
                    None => Err(Fault::Error(format!("unknown name '{name}'"))),
                }
            }
            Expr::FieldAccess { recv, field, .. } => {
                let recv = self.eval(recv, frame)?;
                let r = self.deref(&recv, field)?;
                match self.heap[r].fields.get_mut(field) {
                    Some(slot) => {
                        *slot = value;
                        Ok(())
                    }
                    None => Err(Fault::Error(format!(
                        "unknown field '{}' in class '{}'",
                        field, self.heap[r].class
                    ))),
                }
            }
            _ => Err(Fault::Error("invalid assignment target".to_string())),
        }
    }

    fn deref(&self, value: &Value, field: &str) -> Result<usize, Fault> {
        match value {
            Value::Ref(r) => Ok(*r),
            Value::Null => Err(Fault::Error(format!("null dereference accessing '{field}'"))),
            other => Err(Fault::Error(format!(
                "cannot access field '{}' on {}",
                field,
                kind_name(other)
            ))),
        }
    }

    fn eval_bool(&mut self, e: &Expr, frame: &mut Frame) -> Result<bool, Fault> {
        match self.eval(e, frame)? {
            Value::Bool(b) => Ok(b),
            other => Err(Fault::Error(format!(
                "condition must be boolean, found {}",
                kind_name(&other)
            ))),
        }
    }

    fn eval(&mut self, e: &Expr, frame: &mut Frame) -> Result<Value, Fault> {
        self.step()?;
        match e {
            Expr::IntLit(v, _) => Ok(Value::Int(*v)),
            Expr::BoolLit(b, _) => Ok(Value::Bool(*b)),
            Expr::StrLit(raw, _) => Ok(Value::Str(unescape(raw))),
            Expr::NullLit(_) => Ok(Value::Null),
            Expr::Paren(inner, _) => self.eval(inner, frame),
            Expr::Name(name, _) => {
                if let Some(v) = frame.lookup(name) {
                    return Ok(v.clone());
                }
                match self.heap[frame.this_ref].fields.get(name) {
                    Some(v) => Ok(v.clone()),
                    None => Err(Fault::Error(format!("unknown name '{name}'"))),
                }
            }
            Expr::FieldAccess { recv, field, .. } => {
                let recv = self.eval(recv, frame)?;
                let r = self.deref(&recv, field)?;
                match self.heap[r].fields.get(field) {
                    Some(v) => Ok(v.clone()),
                    None => Err(Fault::Error(format!(
                        "unknown field '{}' in class '{}'",
                        field, self.heap[r].class
                    ))),
                }
            }
            Expr::Call {
                recv, name, args, ..
            } => {
                // Receiver first, then arguments, left to right.
                let recv_value = match recv {
                    Some(recv) => Some(self.eval(recv, frame)?),
                    None => None,
                };
                let mut arg_values = Vec::with_capacity(args.len());
                for arg in args {
                    arg_values.push(self.eval(arg, frame)?);
                }
                match recv_value {
                    Some(recv) => {
                        let class = match &recv {
                            Value::Ref(r) => self.heap[*r].class.clone(),
                            Value::Null => {
                                return Err(Fault::Error(format!(
                                    "null dereference calling '{name}'"
                                )))
                            }
                            other => {
                                return Err(Fault::Error(format!(
                                    "cannot call a method on {}",
                                    kind_name(other)
                                )))
                            }
                        };
                        self.call_method(recv, &class, name, arg_values)
                    }
                    None => {
                        let own_class = frame.class.clone();
                        let has_own_method = self
                            .classes
                            .get(own_class.as_str())
                            .is_some_and(|c| c.find_method(name).is_some());
                        if has_own_method {
                            let this = Value::Ref(frame.this_ref);
                            self.call_method(this, &own_class, name, arg_values)
                        } else if self.classes.contains_key(name.as_str()) {
                            if !arg_values.is_empty() {
                                return Err(Fault::Error(format!(
                                    "constructor '{name}()' takes no arguments"
                                )));
                            }
                            self.instantiate(name)
                        } else {
                            Err(Fault::Error(format!(
                                "unknown method '{}' in class '{}'",
                                name, own_class
                            )))
                        }
                    }
                }
            }
            Expr::Unary { op, operand, .. } => {
                let v = self.eval(operand, frame)?;
                match (op, v) {
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    (UnOp::Neg, Value::Int(n)) => n
                        .checked_neg()
                        .map(Value::Int)
                        .ok_or_else(|| Fault::Error("integer overflow".to_string())),
                    (op, v) => Err(Fault::Error(format!(
                        "operator '{}' cannot apply to {}",
                        op.symbol(),
                        kind_name(&v)
                    ))),
                }
            }
            Expr::Binary { op, lhs, rhs, .. } => self.eval_binary(*op, lhs, rhs, frame),
        }
    }

    fn eval_binary(
        &mut self,
        op: BinOp,
        lhs: &Expr,
        rhs: &Expr,
        frame: &mut Frame,
    ) -> Result<Value, Fault> {
        // Short-circuit forms first.
        match op {
            BinOp::And => {
                return Ok(Value::Bool(
                    self.eval_bool(lhs, frame)? && self.eval_bool(rhs, frame)?,
                ));
            }
            BinOp::Or => {
                return Ok(Value::Bool(
                    self.eval_bool(lhs, frame)? || self.eval_bool(rhs, frame)?,
                ));
            }
            _ => {}
        }
        let l = self.eval(lhs, frame)?;
        let r = self.eval(rhs, frame)?;
        match op {
            BinOp::Eq => Ok(Value::Bool(values_equal(&l, &r)?)),
            BinOp::Ne => Ok(Value::Bool(!values_equal(&l, &r)?)),
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                let (a, b) = int_operands(op, &l, &r)?;
                let result = match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                    BinOp::Div if b == 0 => return Err(Fault::Error("division by zero".to_string())),
                    BinOp::Div => a.checked_div(b),
                    BinOp::Mod if b == 0 => return Err(Fault::Error("division by zero".to_string())),
                    BinOp::Mod => a.checked_rem(b),
                    _ => unreachable!(),
                };
                result
                    .map(Value::Int)
                    .ok_or_else(|| Fault::Error("integer overflow".to_string()))
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let (a, b) = int_operands(op, &l, &r)?;
                Ok(Value::Bool(match op {
                    BinOp::Lt => a < b,
                    BinOp::Le => a <= b,
                    BinOp::Gt => a > b,
                    BinOp::Ge => a >= b,
                    _ => unreachable!(),
                }))
            }
            BinOp::And | BinOp::Or => unreachable!("handled above"),
        }
    }
}

fn int_operands(op: BinOp, l: &Value, r: &Value) -> Result<(i64, i64), Fault> {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => Ok((*a, *b)),
        _ => Err(Fault::Error(format!(
            "operator '{}' expects int operands, found {} and {}",
            op.symbol(),
            kind_name(l),
            kind_name(r)
        ))),
    }
}

/// `==` semantics: value equality for primitives and strings, identity for
/// instances, and `null` equal only to itself.
fn values_equal(l: &Value, r: &Value) -> Result<bool, Fault> {
    match (l, r) {
        (Value::Int(a), Value::Int(b)) => Ok(a == b),
        (Value::Bool(a), Value::Bool(b)) => Ok(a == b),
        (Value::Str(a), Value::Str(b)) => Ok(a == b),
        (Value::Ref(a), Value::Ref(b)) => Ok(a == b),
        (Value::Null, Value::Null) => Ok(true),
        (Value::Null, Value::Str(_) | Value::Ref(_)) => Ok(false),
        (Value::Str(_) | Value::Ref(_), Value::Null) => Ok(false),
        _ => Err(Fault::Error(format!(
            "cannot compare {} and {}",
            kind_name(l),
            kind_name(r)
        ))),
    }
}

fn default_value(ty: &TypeName) -> Value {
    match ty {
        TypeName::Int => Value::Int(0),
        TypeName::Boolean => Value::Bool(false),
        TypeName::Str | TypeName::Class(_) => Value::Null,
    }
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::Int(_) => "int",
        Value::Bool(_) => "boolean",
        Value::Str(_) => "String",
        Value::Ref(_) => "an instance",
        Value::Null => "null",
    }
}

/// Expands the escape sequences the lexer accepts: `\"`, `\\`, `\n`, `\t`.
fn unescape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn suite(files: &[(&str, &str)]) -> SuiteOutcome {
        let tree = SourceTree::from_files(files.iter().copied());
        run_suite(&tree, DEFAULT_STEP_BUDGET).expect("tree parses")
    }

    #[test]
    fn passing_and_failing_asserts() {
        let out = suite(&[(
            "tests/p/T.ml4j",
            "package p;\n\
             class T {\n\
             void test_arith() { assert 2 + 3 * 4 == 14; }\n\
             void test_wrong() { assert 1 == 2; }\n\
             }\n",
        )]);
        assert_eq!(out.results.len(), 2);
        assert_eq!(out.outcome_of("p.T.test_arith"), Some(&TestOutcome::Pass));
        assert_eq!(
            out.outcome_of("p.T.test_wrong"),
            Some(&TestOutcome::Fail {
                message: "assertion failed: 1 == 2".to_string()
            })
        );
    }

    #[test]
    fn discovery_ignores_main_files_params_and_other_names() {
        let tree = SourceTree::from_files([
            ("p/A.ml4j", "package p; class A { void test_not_in_tests() { } }"),
            (
                "tests/p/T.ml4j",
                "package p; class T { void test_ok() { } void helper() { } void test_param(int x) { } }",
            ),
        ]);
        let units = tree.parse_all().unwrap();
        let cases = discover_tests(&units);
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0].name, "p.T.test_ok");
    }

    #[test]
    fn fields_methods_and_objects() {
        let out = suite(&[
            (
                "p/Counter.ml4j",
                "package p;\n\
                 class Counter {\n\
                 int value;\n\
                 void add(int by) { value = value + by; }\n\
                 int get() { return value; }\n\
                 }\n",
            ),
            (
                "tests/p/T.ml4j",
                "package p;\n\
                 class T {\n\
                 void test_counter() {\n\
                 Counter c = Counter();\n\
                 c.add(2);\n\
                 c.add(3);\n\
                 assert c.get() == 5;\n\
                 Counter d = Counter();\n\
                 assert d.get() == 0;\n\
                 assert c != d;\n\
                 }\n\
                 }\n",
            ),
        ]);
        assert!(out.all_passed(), "{:?}", out.results);
    }

    #[test]
    fn string_values_and_escapes() {
        let out = suite(&[(
            "tests/p/T.ml4j",
            "package p;\n\
             class T {\n\
             String greet() { return \"hi\\n\"; }\n\
             void test_strings() {\n\
             assert greet() == \"hi\\n\";\n\
             assert greet() != \"hi\";\n\
             assert greet() != null;\n\
             String s = null;\n\
             assert s == null;\n\
             }\n\
             }\n",
        )]);
        assert!(out.all_passed(), "{:?}", out.results);
    }

    #[test]
    fn runtime_faults_are_errors_not_failures() {
        let out = suite(&[(
            "tests/p/T.ml4j",
            "package p;\n\
             class T {\n\
             T other;\n\
             void test_null_deref() { int x = other.probe(); }\n\
             int probe() { return 1; }\n\
             void test_div_zero() { int x = 1 / 0; }\n\
             void test_overflow() { int x = 9223372036854775807 + 1; }\n\
             void test_missing_return() { int x = bad(); }\n\
             int bad() { int y = 0; }\n\
             }\n",
        )]);
        for result in &out.results {
            assert!(
                matches!(result.outcome, TestOutcome::Error { .. }),
                "{}: {:?}",
                result.name,
                result.outcome
            );
        }
        assert_eq!(
            out.outcome_of("p.T.test_div_zero"),
            Some(&TestOutcome::Error {
                message: "division by zero".to_string()
            })
        );
    }

    #[test]
    fn infinite_loop_exhausts_budget() {
        let tree = SourceTree::from_files([(
            "tests/p/T.ml4j",
            "package p; class T { void test_spin() { while (true) { } } }",
        )]);
        let out = run_suite(&tree, 10_000).unwrap();
        assert_eq!(
            out.outcome_of("p.T.test_spin"),
            Some(&TestOutcome::Error {
                message: "step budget exhausted".to_string()
            })
        );
    }

    #[test]
    fn recursion_terminates_or_hits_depth_cap() {
        let out = suite(&[(
            "tests/p/T.ml4j",
            "package p;\n\
             class T {\n\
             int fib(int n) { if (n < 2) { return n; } return fib(n - 1) + fib(n - 2); }\n\
             void test_fib() { assert fib(10) == 55; }\n\
             int down(int n) { return down(n); }\n\
             void test_infinite_recursion() { int x = down(1); }\n\
             }\n",
        )]);
        assert_eq!(out.outcome_of("p.T.test_fib"), Some(&TestOutcome::Pass));
        assert!(matches!(
            out.outcome_of("p.T.test_infinite_recursion"),
            Some(TestOutcome::Error { .. })
        ));
    }

    #[test]
    fn while_loop_runs_and_shortcircuit_protects() {
        let out = suite(&[(
            "tests/p/T.ml4j",
            "package p;\n\
             class T {\n\
             int sum(int n) {\n\
             int total = 0;\n\
             int i = 1;\n\
             while (i <= n) { total = total + i; i = i + 1; }\n\
             return total;\n\
             }\n\
             void test_sum() { assert sum(10) == 55; }\n\
             void test_shortcircuit() {\n\
             int zero = 0;\n\
             assert zero == 0 || 1 / zero == 1;\n\
             assert !(zero != 0 && 1 / zero == 1);\n\
             }\n\
             }\n",
        )]);
        assert!(out.all_passed(), "{:?}", out.results);
    }

    #[test]
    fn each_test_gets_a_fresh_heap() {
        let out = suite(&[(
            "tests/p/T.ml4j",
            "package p;\n\
             class T {\n\
             int counter;\n\
             void test_a() { counter = counter + 1; assert counter == 1; }\n\
             void test_b() { counter = counter + 1; assert counter == 1; }\n\
             }\n",
        )]);
        assert!(out.all_passed(), "{:?}", out.results);
    }
}
