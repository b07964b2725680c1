//! Token- and line-level change model.
//!
//! A [`ChangeSeq`] is the minimal edit script between two source trees,
//! expressed as independent [`ChangeUnit`]s: single-token (or, after
//! [`coarsen`], whole-line) removes and inserts positioned against the
//! *base* version. The crucial property is that any subsequence of a
//! ChangeSeq can be applied on its own, which is what makes candidate-patch
//! enumeration possible.
//!
//! Anchor semantics:
//! - token remove at `a`: delete base token `a` (payload must equal it);
//! - token insert at `a`: put the payload token in the gap before base
//!   token `a` (`a == len` appends);
//! - line remove at `L`: delete every token of 0-based base line `L`;
//! - line insert at `L`: insert the payload line's tokens before the first
//!   token at or after base line `L`.
//!
//! Application splices the base token stream, joins with single spaces, and
//! re-parses; when the splice parses, the file is re-rendered canonically,
//! so applying a full diff between two canonically formatted trees
//! reproduces the target byte-for-byte. Unparseable intermediate states are
//! kept as the joined text and surface later through the compile check.
//!
//! Diffs are computed per file (files paired by identical path) as an LCS
//! edit script with a fixed tie-break, so the output is a pure, byte-stable
//! function of its inputs. Test files are the caller's concern: the
//! pipeline diffs main-only trees.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use minilang::lexer::{lex, LexError, Token};
use minilang::parser::parse;
use minilang::render::render_unit;
use minilang::tree::SourceTree;
use serde::Serialize;
use thiserror::Error;

/// Context lines in unified diffs.
pub const CONTEXT_LINES: usize = 3;

/// Lexes one file's text into its token stream.
pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    lex(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitKind {
    Token,
    Line,
}

impl UnitKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            UnitKind::Token => "token",
            UnitKind::Line => "line",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditKind {
    Remove,
    Insert,
}

impl EditKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EditKind::Remove => "remove",
            EditKind::Insert => "insert",
        }
    }
}

/// One independent edit against the base tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeUnit {
    pub file: String,
    pub kind: UnitKind,
    /// Base token index (token units) or 0-based base line (line units).
    pub anchor: usize,
    pub edit: EditKind,
    /// Token text or full line text (without newline).
    pub payload: String,
    /// Inserts only: ordering discriminator, strictly increasing in target
    /// order among inserts at the same anchor.
    pub target_pos: Option<usize>,
    /// Canonical intra-file position at token resolution (equals `anchor`
    /// for token units; the line's first-token index for line units).
    pub(crate) tok_anchor: usize,
    /// Token inserts only: which target line the token came from, with the
    /// exact line text when that line is inserted in full.
    pub(crate) origin_line: Option<OriginLine>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct OriginLine {
    pub line: usize,
    pub full_text: Option<String>,
}

impl ChangeUnit {
    pub fn is_insert(&self) -> bool {
        self.edit == EditKind::Insert
    }

    fn sort_key(&self) -> (&str, usize, u8, usize) {
        let rank = match self.edit {
            EditKind::Remove => 0,
            EditKind::Insert => 1,
        };
        (&self.file, self.tok_anchor, rank, self.target_pos.unwrap_or(0))
    }
}

/// A change sequence in canonical order: file path, then base position,
/// then removes before inserts, then target order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeSeq {
    units: Vec<ChangeUnit>,
}

impl ChangeSeq {
    pub(crate) fn from_units(mut units: Vec<ChangeUnit>) -> ChangeSeq {
        units.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        ChangeSeq { units }
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ChangeUnit> {
        self.units.iter()
    }

    pub fn units(&self) -> &[ChangeUnit] {
        &self.units
    }

    pub fn files(&self) -> BTreeSet<&str> {
        self.units.iter().map(|u| u.file.as_str()).collect()
    }
}

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("{path}: {source}")]
    Lex { path: String, source: LexError },
}

/// Computes the canonical minimal edit script turning `base` into `target`.
///
/// Files are paired by identical path; a file present on one side only
/// becomes whole-file line-level units. The caller passes main-only trees
/// when test changes must be excluded.
pub fn diff(base: &SourceTree, target: &SourceTree) -> Result<ChangeSeq, DiffError> {
    let mut units: Vec<ChangeUnit> = Vec::new();
    let paths: BTreeSet<&str> = base.paths().chain(target.paths()).collect();
    for path in paths {
        match (base.get(path), target.get(path)) {
            (Some(b), Some(t)) if b == t => {}
            (Some(b), Some(t)) => diff_file(path, b, t, &mut units)?,
            (Some(b), None) => remove_whole_file(path, b, &mut units)?,
            (None, Some(t)) => insert_whole_file(path, t, &mut units),
            (None, None) => unreachable!("path came from one of the trees"),
        }
    }
    Ok(ChangeSeq::from_units(units))
}

fn lex_for(path: &str, text: &str) -> Result<Vec<Token>, DiffError> {
    lex(text).map_err(|source| DiffError::Lex {
        path: path.to_string(),
        source,
    })
}

fn diff_file(path: &str, base: &str, target: &str, units: &mut Vec<ChangeUnit>) -> Result<(), DiffError> {
    let b = lex_for(path, base)?;
    let t = lex_for(path, target)?;
    let ops = lcs_ops(b.len(), t.len(), |i, j| b[i].text == t[j].text);

    // A target line is "fully inserted" iff none of its tokens matched.
    let matched_target_lines: HashSet<usize> = ops
        .iter()
        .filter_map(|op| match op {
            Op::Match { b: j, .. } => Some(line_of(&t[*j])),
            _ => None,
        })
        .collect();
    let target_lines: Vec<&str> = target.lines().collect();

    // Inserts anchor at the base position where their edit run began, so
    // a substitution's remove and insert share one anchor.
    let mut bpos = 0usize;
    let mut run_anchor: Option<usize> = None;
    for op in &ops {
        match *op {
            Op::Match { a, .. } => {
                bpos = a + 1;
                run_anchor = None;
            }
            Op::Remove { a } => {
                run_anchor.get_or_insert(a);
                units.push(ChangeUnit {
                    file: path.to_string(),
                    kind: UnitKind::Token,
                    anchor: a,
                    edit: EditKind::Remove,
                    payload: b[a].text.clone(),
                    target_pos: None,
                    tok_anchor: a,
                    origin_line: None,
                });
                bpos = a + 1;
            }
            Op::Insert { b: j } => {
                let anchor = *run_anchor.get_or_insert(bpos);
                let line = line_of(&t[j]);
                let full_text = if matched_target_lines.contains(&line) {
                    None
                } else {
                    Some(target_lines[line].to_string())
                };
                units.push(ChangeUnit {
                    file: path.to_string(),
                    kind: UnitKind::Token,
                    anchor,
                    edit: EditKind::Insert,
                    payload: t[j].text.clone(),
                    target_pos: Some(j),
                    tok_anchor: anchor,
                    origin_line: Some(OriginLine { line, full_text }),
                });
            }
        }
    }
    Ok(())
}

fn remove_whole_file(path: &str, base: &str, units: &mut Vec<ChangeUnit>) -> Result<(), DiffError> {
    let tokens = lex_for(path, base)?;
    for (idx, line) in base.lines().enumerate() {
        units.push(ChangeUnit {
            file: path.to_string(),
            kind: UnitKind::Line,
            anchor: idx,
            edit: EditKind::Remove,
            payload: line.to_string(),
            target_pos: None,
            tok_anchor: first_token_at_or_after(&tokens, idx),
            origin_line: None,
        });
    }
    Ok(())
}

fn insert_whole_file(path: &str, target: &str, units: &mut Vec<ChangeUnit>) {
    for (idx, line) in target.lines().enumerate() {
        units.push(ChangeUnit {
            file: path.to_string(),
            kind: UnitKind::Line,
            anchor: 0,
            edit: EditKind::Insert,
            payload: line.to_string(),
            target_pos: Some(idx),
            tok_anchor: 0,
            origin_line: None,
        });
    }
}

/// 0-based source line of a token.
fn line_of(token: &Token) -> usize {
    (token.line - 1) as usize
}

/// Index of the first token on or after 0-based line `line` (`len` if none).
fn first_token_at_or_after(tokens: &[Token], line: usize) -> usize {
    tokens.partition_point(|t| line_of(t) < line)
}

/// Replaces exactly-line-shaped runs of token units with single line units.
///
/// A base line all of whose tokens are removed becomes one line-level
/// remove; a fully inserted target line whose insertion point falls on a
/// base line boundary becomes one line-level insert. Everything else is
/// kept as-is, so application semantics are unchanged; only the granularity
/// of subsequence selection gets coarser.
pub fn coarsen(seq: &ChangeSeq, base: &SourceTree) -> ChangeSeq {
    let mut out: Vec<ChangeUnit> = Vec::new();
    let mut by_file: BTreeMap<&str, Vec<&ChangeUnit>> = BTreeMap::new();
    for unit in seq.iter() {
        by_file.entry(&unit.file).or_default().push(unit);
    }

    for (path, units) in by_file {
        let text = base.get(path).unwrap_or("");
        let tokens = match lex(text) {
            Ok(t) => t,
            Err(_) => {
                // Pre-condition violated; pass the units through untouched.
                out.extend(units.into_iter().cloned());
                continue;
            }
        };
        let lines: Vec<&str> = text.lines().collect();
        let line_token_counts: Vec<usize> = {
            let mut counts = vec![0usize; lines.len()];
            for tok in &tokens {
                counts[line_of(tok)] += 1;
            }
            counts
        };

        // Which base lines are removed in full?
        let mut removed_per_line: HashMap<usize, usize> = HashMap::new();
        for unit in &units {
            if unit.kind == UnitKind::Token && unit.edit == EditKind::Remove {
                *removed_per_line.entry(line_of(&tokens[unit.anchor])).or_default() += 1;
            }
        }
        let fully_removed = |line: usize| {
            line_token_counts[line] > 0 && removed_per_line.get(&line) == Some(&line_token_counts[line])
        };

        let mut emitted_removed_lines: HashSet<usize> = HashSet::new();
        let mut idx = 0;
        while idx < units.len() {
            let unit = units[idx];
            match (unit.kind, unit.edit) {
                (UnitKind::Token, EditKind::Remove) => {
                    let line = line_of(&tokens[unit.anchor]);
                    if fully_removed(line) {
                        if emitted_removed_lines.insert(line) {
                            out.push(ChangeUnit {
                                file: unit.file.clone(),
                                kind: UnitKind::Line,
                                anchor: line,
                                edit: EditKind::Remove,
                                payload: lines[line].to_string(),
                                target_pos: None,
                                tok_anchor: first_token_at_or_after(&tokens, line),
                                origin_line: None,
                            });
                        }
                    } else {
                        out.push(unit.clone());
                    }
                    idx += 1;
                }
                (UnitKind::Token, EditKind::Insert) => {
                    // Try to take a whole fully-inserted target line.
                    let full = unit.origin_line.as_ref().and_then(|o| {
                        o.full_text.as_ref().map(|text| (o.line, text.clone()))
                    });
                    let boundary = unit.tok_anchor == tokens.len()
                        || unit.tok_anchor == 0
                        || line_of(&tokens[unit.tok_anchor - 1]) < line_of(&tokens[unit.tok_anchor]);
                    if let (Some((line, line_text)), true) = (full, boundary) {
                        let mut end = idx + 1;
                        while end < units.len()
                            && units[end].kind == UnitKind::Token
                            && units[end].edit == EditKind::Insert
                            && units[end].tok_anchor == unit.tok_anchor
                            && units[end].origin_line.as_ref().is_some_and(|o| o.line == line)
                        {
                            end += 1;
                        }
                        let group = &units[idx..end];
                        let expected = lex(&line_text).map(|t| t.len()).unwrap_or(usize::MAX);
                        if group.len() == expected {
                            let anchor_line = if unit.tok_anchor == tokens.len() {
                                lines.len()
                            } else {
                                line_of(&tokens[unit.tok_anchor])
                            };
                            out.push(ChangeUnit {
                                file: unit.file.clone(),
                                kind: UnitKind::Line,
                                anchor: anchor_line,
                                edit: EditKind::Insert,
                                payload: line_text,
                                target_pos: unit.target_pos,
                                tok_anchor: unit.tok_anchor,
                                origin_line: None,
                            });
                            idx = end;
                            continue;
                        }
                    }
                    out.push(unit.clone());
                    idx += 1;
                }
                (UnitKind::Line, _) => {
                    out.push(unit.clone());
                    idx += 1;
                }
            }
        }
    }
    ChangeSeq::from_units(out)
}

/// Anchor validation failure during [`apply`]: the selection does not fit
/// the base tree, which signals internal corruption rather than a normal
/// pipeline outcome.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{path}: {detail}")]
pub struct AnchorError {
    pub path: String,
    pub detail: String,
}

impl AnchorError {
    fn new(path: &str, detail: impl Into<String>) -> Self {
        AnchorError {
            path: path.to_string(),
            detail: detail.into(),
        }
    }
}

/// Reusable application context: base token streams are lexed once per
/// changed file, then any number of selections can be applied cheaply.
pub struct Applier<'a> {
    base: &'a SourceTree,
    files: HashMap<String, ApplyFile>,
}

struct ApplyFile {
    token_texts: Vec<String>,
    token_lines: Vec<usize>,
    lines: Vec<String>,
}

impl<'a> Applier<'a> {
    pub fn new(base: &'a SourceTree, seq: &ChangeSeq) -> Result<Self, AnchorError> {
        let mut files = HashMap::new();
        for path in seq.files() {
            let text = base.get(path).unwrap_or("");
            let tokens = lex(text)
                .map_err(|e| AnchorError::new(path, format!("base does not lex: {e}")))?;
            files.insert(
                path.to_string(),
                ApplyFile {
                    token_texts: tokens.iter().map(|t| t.text.clone()).collect(),
                    token_lines: tokens.iter().map(line_of).collect(),
                    lines: text.lines().map(str::to_string).collect(),
                },
            );
        }
        Ok(Applier { base, files })
    }

    /// Applies the units at `selection` (ascending indices into `seq`).
    pub fn apply_selection(&self, seq: &ChangeSeq, selection: &[usize]) -> Result<SourceTree, AnchorError> {
        self.apply_units(selection.iter().map(|&i| &seq.units()[i]))
    }

    pub fn apply_units<'u>(
        &self,
        units: impl IntoIterator<Item = &'u ChangeUnit>,
    ) -> Result<SourceTree, AnchorError> {
        let mut by_file: BTreeMap<&str, Vec<&ChangeUnit>> = BTreeMap::new();
        for unit in units {
            by_file.entry(&unit.file).or_default().push(unit);
        }

        let mut result = self.base.clone();
        for (path, units) in by_file {
            let ctx = self
                .files
                .get(path)
                .ok_or_else(|| AnchorError::new(path, "file not covered by this applier"))?;
            let text = splice_file(path, ctx, &units)?;
            result.insert(path, text);
        }
        Ok(result)
    }
}

fn splice_file(path: &str, ctx: &ApplyFile, units: &[&ChangeUnit]) -> Result<String, AnchorError> {
    let n = ctx.token_texts.len();
    let mut removed: HashSet<usize> = HashSet::new();
    let mut inserts: BTreeMap<usize, Vec<String>> = BTreeMap::new();

    for unit in units {
        match (unit.kind, unit.edit) {
            (UnitKind::Token, EditKind::Remove) => {
                if unit.anchor >= n {
                    return Err(AnchorError::new(path, format!("token anchor {} out of range", unit.anchor)));
                }
                if ctx.token_texts[unit.anchor] != unit.payload {
                    return Err(AnchorError::new(
                        path,
                        format!(
                            "remove payload {:?} does not match base token {:?} at {}",
                            unit.payload, ctx.token_texts[unit.anchor], unit.anchor
                        ),
                    ));
                }
                if !removed.insert(unit.anchor) {
                    return Err(AnchorError::new(path, format!("duplicate removal at {}", unit.anchor)));
                }
            }
            (UnitKind::Token, EditKind::Insert) => {
                if unit.anchor > n {
                    return Err(AnchorError::new(path, format!("insert anchor {} out of range", unit.anchor)));
                }
                inserts.entry(unit.anchor).or_default().push(unit.payload.clone());
            }
            (UnitKind::Line, EditKind::Remove) => {
                if unit.anchor >= ctx.lines.len() {
                    return Err(AnchorError::new(path, format!("line anchor {} out of range", unit.anchor)));
                }
                if ctx.lines[unit.anchor] != unit.payload {
                    return Err(AnchorError::new(
                        path,
                        format!("remove payload does not match base line {}", unit.anchor),
                    ));
                }
                for (idx, line) in ctx.token_lines.iter().enumerate() {
                    if *line == unit.anchor && !removed.insert(idx) {
                        return Err(AnchorError::new(path, format!("duplicate removal at {idx}")));
                    }
                }
            }
            (UnitKind::Line, EditKind::Insert) => {
                if unit.anchor > ctx.lines.len() {
                    return Err(AnchorError::new(path, format!("line anchor {} out of range", unit.anchor)));
                }
                let gap = ctx.token_lines.partition_point(|l| *l < unit.anchor);
                let payload_tokens = lex(&unit.payload)
                    .map_err(|e| AnchorError::new(path, format!("insert payload does not lex: {e}")))?;
                inserts
                    .entry(gap)
                    .or_default()
                    .extend(payload_tokens.into_iter().map(|t| t.text));
            }
        }
    }

    // Gap-walk splice.
    let mut out: Vec<&str> = Vec::with_capacity(n + inserts.len());
    for i in 0..=n {
        if let Some(texts) = inserts.get(&i) {
            out.extend(texts.iter().map(String::as_str));
        }
        if i < n && !removed.contains(&i) {
            out.push(&ctx.token_texts[i]);
        }
    }

    if out.is_empty() {
        return Ok(String::new());
    }
    let joined = out.join(" ");
    Ok(match parse(&joined, path) {
        Ok(unit) => render_unit(&unit),
        Err(_) => format!("{joined}\n"),
    })
}

/// One-shot [`Applier`] for a full sequence.
pub fn apply(base: &SourceTree, seq: &ChangeSeq) -> Result<SourceTree, AnchorError> {
    Applier::new(base, seq)?.apply_units(seq.iter())
}

/// One-shot [`Applier`] for a selection of `seq` by ascending index.
pub fn apply_selection(base: &SourceTree, seq: &ChangeSeq, selection: &[usize]) -> Result<SourceTree, AnchorError> {
    Applier::new(base, seq)?.apply_selection(seq, selection)
}

/// Renders the standard unified diff (3 context lines, `a/`–`b/` path
/// prefixes, `/dev/null` for added or deleted files) between two trees.
/// Files are assumed newline-terminated, which canonical trees always are.
pub fn to_unified_diff(base: &SourceTree, patched: &SourceTree) -> String {
    let paths: BTreeSet<&str> = base.paths().chain(patched.paths()).collect();
    let mut out = String::new();
    for path in paths {
        let old = base.get(path);
        let new = patched.get(path);
        if old != new {
            file_unified_diff(path, old, new, &mut out);
        }
    }
    out
}

fn file_unified_diff(path: &str, old: Option<&str>, new: Option<&str>, out: &mut String) {
    let old_lines: Vec<&str> = old.map(|t| t.lines().collect()).unwrap_or_default();
    let new_lines: Vec<&str> = new.map(|t| t.lines().collect()).unwrap_or_default();
    let ops = lcs_ops(old_lines.len(), new_lines.len(), |i, j| old_lines[i] == new_lines[j]);

    // Display rows, with removes before inserts inside each changed run.
    #[derive(Clone, Copy, PartialEq)]
    enum Row {
        Ctx(usize, usize),
        Del(usize),
        Add(usize),
    }
    let mut rows: Vec<Row> = Vec::with_capacity(ops.len());
    let mut pending_adds: Vec<Row> = Vec::new();
    for op in &ops {
        match *op {
            Op::Match { a, b } => {
                rows.append(&mut pending_adds);
                rows.push(Row::Ctx(a, b));
            }
            Op::Remove { a } => rows.push(Row::Del(a)),
            Op::Insert { b } => pending_adds.push(Row::Add(b)),
        }
    }
    rows.append(&mut pending_adds);

    // Group changed rows into hunks with up to CONTEXT_LINES of context,
    // merging hunks whose context would touch or overlap.
    let changed: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| !matches!(r, Row::Ctx(..)))
        .map(|(i, _)| i)
        .collect();
    if changed.is_empty() {
        return;
    }

    match (old, new) {
        (Some(_), _) => {
            out.push_str("--- a/");
            out.push_str(path);
            out.push('\n');
        }
        (None, _) => out.push_str("--- /dev/null\n"),
    }
    match new {
        Some(_) => {
            out.push_str("+++ b/");
            out.push_str(path);
            out.push('\n');
        }
        None => out.push_str("+++ /dev/null\n"),
    }

    let mut groups: Vec<(usize, usize)> = Vec::new();
    for &idx in &changed {
        match groups.last_mut() {
            Some((_, end)) if idx <= *end + 2 * CONTEXT_LINES => *end = idx,
            _ => groups.push((idx, idx)),
        }
    }

    for (first, last) in groups {
        let start = first.saturating_sub(CONTEXT_LINES);
        let end = (last + CONTEXT_LINES + 1).min(rows.len());
        let hunk = &rows[start..end];

        let old_count = hunk.iter().filter(|r| !matches!(r, Row::Add(_))).count();
        let new_count = hunk.iter().filter(|r| !matches!(r, Row::Del(_))).count();
        let old_start = hunk
            .iter()
            .find_map(|r| match r {
                Row::Ctx(a, _) | Row::Del(a) => Some(a + 1),
                Row::Add(_) => None,
            })
            .unwrap_or_else(|| {
                // Pure insertion: the position after the preceding old line.
                rows[..start]
                    .iter()
                    .filter(|r| !matches!(r, Row::Add(_)))
                    .count()
            });
        let new_start = hunk
            .iter()
            .find_map(|r| match r {
                Row::Ctx(_, b) | Row::Add(b) => Some(b + 1),
                Row::Del(_) => None,
            })
            .unwrap_or_else(|| {
                rows[..start]
                    .iter()
                    .filter(|r| !matches!(r, Row::Del(_)))
                    .count()
            });
        let old_start = if old_count == 0 { old_start } else { old_start.max(1) };
        let new_start = if new_count == 0 { new_start } else { new_start.max(1) };

        out.push_str("@@ -");
        push_range(out, old_start, old_count);
        out.push_str(" +");
        push_range(out, new_start, new_count);
        out.push_str(" @@\n");
        for row in hunk {
            match row {
                Row::Ctx(a, _) => {
                    out.push(' ');
                    out.push_str(old_lines[*a]);
                }
                Row::Del(a) => {
                    out.push('-');
                    out.push_str(old_lines[*a]);
                }
                Row::Add(b) => {
                    out.push('+');
                    out.push_str(new_lines[*b]);
                }
            }
            out.push('\n');
        }
    }
}

fn push_range(out: &mut String, start: usize, count: usize) {
    out.push_str(&start.to_string());
    if count != 1 {
        out.push(',');
        out.push_str(&count.to_string());
    }
}

/// Serializes a sequence as JSON lines `{file, kind, anchor, edit, payload}`.
pub fn dump_jsonl(seq: &ChangeSeq) -> String {
    #[derive(Serialize)]
    struct UnitDump<'a> {
        file: &'a str,
        kind: &'a str,
        anchor: usize,
        edit: &'a str,
        payload: &'a str,
    }
    let mut out = String::new();
    for unit in seq.iter() {
        let dump = UnitDump {
            file: &unit.file,
            kind: unit.kind.as_str(),
            anchor: unit.anchor,
            edit: unit.edit.as_str(),
            payload: &unit.payload,
        };
        out.push_str(&serde_json::to_string(&dump).expect("serializable"));
        out.push('\n');
    }
    out
}

/// LCS edit script between two indexed sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Match { a: usize, b: usize },
    Remove { a: usize },
    Insert { b: usize },
}

/// Classic DP LCS over suffixes with a deterministic forward walk.
///
/// Among the maximum-length alignments the walk picks the one that keeps
/// edit runs contiguous: an in-progress remove or insert run continues as
/// long as doing so stays optimal, so an inserted block that happens to
/// contain a token equal to the next base token is not split around a
/// premature match. At a fresh divergence, ties prefer removal.
fn lcs_ops(n: usize, m: usize, eq: impl Fn(usize, usize) -> bool) -> Vec<Op> {
    // dp[i][j] = LCS length of base[i..] and target[j..].
    let width = m + 1;
    let mut dp = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i * width + j] = if eq(i, j) {
                dp[(i + 1) * width + j + 1] + 1
            } else {
                dp[(i + 1) * width + j].max(dp[i * width + j + 1])
            };
        }
    }

    let mut ops = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        let here = dp[i * width + j];
        let can_match = eq(i, j) && here == dp[(i + 1) * width + j + 1] + 1;
        let can_remove = here == dp[(i + 1) * width + j];
        let can_insert = here == dp[i * width + j + 1];
        let continuing_remove =
            can_remove && matches!(ops.last(), Some(Op::Remove { .. }));
        let continuing_insert =
            can_insert && matches!(ops.last(), Some(Op::Insert { .. }));
        if continuing_remove || (!continuing_insert && !can_match && can_remove) {
            ops.push(Op::Remove { a: i });
            i += 1;
        } else if continuing_insert || !can_match {
            ops.push(Op::Insert { b: j });
            j += 1;
        } else {
            ops.push(Op::Match { a: i, b: j });
            i += 1;
            j += 1;
        }
    }
    ops.extend((i..n).map(|a| Op::Remove { a }));
    ops.extend((j..m).map(|b| Op::Insert { b }));
    ops
}
