//! Invariant synthesis: injection-point planning, backend calls, predicate
//! extraction and reversible injection of `require` statements.

mod backend;
mod extract;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{abstract_function, AbstractionError, LexicalCounter, TokenCounter, DEFAULT_BUDGET};
use crate::ast::{Ast, AstError, Block, FunctionInfo, ParseError, Stmt, StmtKind};
use crate::corpus::SolidityFile;
use crate::fim::{self, FimError};

pub use backend::{
    default_stops, BackendCounter, BackendError, CompletionRequest, HttpBackend, ModelBackend, Recording,
    ReplayBackend, StaticBackend, KEY_ENV,
};
pub use extract::{extract_predicate, is_trivial, ExtractError, Triviality};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Pre,
    Post,
}

impl PointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PointKind::Pre => "pre",
            PointKind::Post => "post",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Pre,
    Post,
    PreAndPost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    SingleTurn,
    MultiTurn,
}

/// Where, relative to the surrounding code, an injection point sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "at")]
pub enum Anchor {
    /// Right after the body's opening brace.
    BodyStart,
    /// At the start of a `return` statement ending at `end`. `wrap` is set
    /// when the return is the direct branch of an `if`/loop and needs braces.
    BeforeReturn { end: usize, wrap: bool },
    /// After the last statement of a body whose end is reachable.
    BodyEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionPoint {
    pub kind: PointKind,
    pub offset: usize,
    pub function: String,
    pub anchor: Anchor,
}

/// Text inserted at `at` (a byte offset of the source it was planned on).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insertion {
    pub at: usize,
    pub text: String,
}

impl InjectionPoint {
    /// The edits that place `stmt` at this point in `src`, laid out to match
    /// the surrounding indentation.
    pub fn insertions(&self, src: &str, stmt: &str) -> Vec<Insertion> {
        let at = self.offset;
        let one = |text: String| vec![Insertion { at, text }];
        match self.anchor {
            Anchor::BodyStart | Anchor::BodyEnd => {
                let indent = match self.anchor {
                    Anchor::BodyStart => following_line_indent(src, at),
                    _ => trailing_line_indent(src, at),
                };
                match indent {
                    Some(ind) => one(format!("\n{ind}{stmt}")),
                    None => one(format!(" {stmt}")),
                }
            }
            Anchor::BeforeReturn { end, wrap: true } => vec![
                Insertion {
                    at,
                    text: format!("{{ {stmt} "),
                },
                Insertion {
                    at: end,
                    text: " }".to_string(),
                },
            ],
            Anchor::BeforeReturn { wrap: false, .. } => match leading_line_indent(src, at) {
                Some(ind) => one(format!("{stmt}\n{ind}")),
                None => one(format!("{stmt} ")),
            },
        }
    }

    fn shifted(&self, map: impl Fn(usize) -> usize) -> InjectionPoint {
        let anchor = match self.anchor {
            Anchor::BeforeReturn { end, wrap } => Anchor::BeforeReturn { end: map(end), wrap },
            a => a,
        };
        InjectionPoint {
            kind: self.kind,
            offset: map(self.offset),
            function: self.function.clone(),
            anchor,
        }
    }
}

fn line_start(src: &str, at: usize) -> usize {
    src[..at].rfind('\n').map_or(0, |i| i + 1)
}

fn line_indent(src: &str, at: usize) -> String {
    src[line_start(src, at)..]
        .chars()
        .take_while(|c| *c == ' ' || *c == '\t')
        .collect()
}

/// Indentation of the line holding `at` when only whitespace precedes it there.
fn leading_line_indent(src: &str, at: usize) -> Option<String> {
    let prefix = &src[line_start(src, at)..at];
    prefix.trim().is_empty().then(|| prefix.to_string())
}

/// Indentation of the line holding `at` when only whitespace follows it there.
fn trailing_line_indent(src: &str, at: usize) -> Option<String> {
    let rest = &src[at..];
    let eol = rest.find('\n').unwrap_or(rest.len());
    rest[..eol].trim().is_empty().then(|| line_indent(src, at))
}

/// Indentation for a new first statement after an opening brace at `at - 1`.
fn following_line_indent(src: &str, at: usize) -> Option<String> {
    let rest = &src[at..];
    let nl = rest.find('\n')?;
    if !rest[..nl].trim().is_empty() {
        return None;
    }
    let next = &rest[nl + 1..];
    let indent: String = next.chars().take_while(|c| *c == ' ' || *c == '\t').collect();
    if next[indent.len()..].starts_with('}') {
        let mut deeper = indent;
        deeper.push_str("    ");
        return Some(deeper);
    }
    Some(indent)
}

/// Injection points for `target` (a name or `Contract.name`).
pub fn plan_locations(ast: &Ast, target: &str, placement: Placement) -> Result<Vec<InjectionPoint>, SynthError> {
    let f = ast.function(target)?;
    plan_for(f, placement)
}

fn plan_for(f: &FunctionInfo, placement: Placement) -> Result<Vec<InjectionPoint>, SynthError> {
    let body = f.body.as_ref().ok_or_else(|| SynthError::NoBody(f.name.clone()))?;
    let mut points = Vec::new();
    if placement != Placement::Post {
        points.push(InjectionPoint {
            kind: PointKind::Pre,
            offset: body.span.start + 1,
            function: f.name.clone(),
            anchor: Anchor::BodyStart,
        });
    }
    if placement != Placement::Pre {
        let mut returns = Vec::new();
        collect_returns(&body.stmts, true, &mut returns);
        for (stmt, in_block) in returns {
            points.push(InjectionPoint {
                kind: PointKind::Post,
                offset: stmt.span.start,
                function: f.name.clone(),
                anchor: Anchor::BeforeReturn {
                    end: stmt.span.end,
                    wrap: !in_block,
                },
            });
        }
        if !body.always_exits() {
            points.push(InjectionPoint {
                kind: PointKind::Post,
                offset: body.stmts.last().map_or(body.span.start + 1, |s| s.span.end),
                function: f.name.clone(),
                anchor: Anchor::BodyEnd,
            });
        }
    }
    Ok(points)
}

fn collect_returns<'a>(stmts: &'a [Stmt], in_block: bool, out: &mut Vec<(&'a Stmt, bool)>) {
    for s in stmts {
        collect_stmt(s, in_block, out);
    }
}

fn collect_stmt<'a>(s: &'a Stmt, in_block: bool, out: &mut Vec<(&'a Stmt, bool)>) {
    let block = |b: &'a Block, out: &mut Vec<_>| collect_returns(&b.stmts, true, out);
    match &s.kind {
        StmtKind::Return(_) => out.push((s, in_block)),
        StmtKind::Block(b) | StmtKind::Unchecked(b) => block(b, out),
        StmtKind::If { then, otherwise, .. } => {
            collect_stmt(then, false, out);
            if let Some(o) = otherwise {
                collect_stmt(o, false, out);
            }
        }
        StmtKind::For { body, .. } | StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => {
            collect_stmt(body, false, out)
        }
        StmtKind::Try { body, catches, .. } => {
            block(body, out);
            for c in catches {
                block(c, out);
            }
        }
        _ => {}
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ast(#[from] AstError),
    #[error("function `{0}` has no body")]
    NoBody(String),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Fim(#[from] FimError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterChoice {
    Lexical,
    Backend,
}

#[derive(Debug, Clone)]
pub struct SynthesisTask {
    pub file: SolidityFile,
    pub target_function: String,
    pub placement: Placement,
    pub strategy: Strategy,
    pub budget: usize,
    pub counter: CounterChoice,
    /// Extra backend calls per point after a malformed or empty completion.
    pub retries: u32,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl SynthesisTask {
    pub fn new(file: SolidityFile, target_function: impl Into<String>, placement: Placement, strategy: Strategy) -> Self {
        Self {
            file,
            target_function: target_function.into(),
            placement,
            strategy,
            budget: DEFAULT_BUDGET,
            counter: CounterChoice::Lexical,
            retries: 0,
            max_tokens: 64,
            temperature: 0.0,
        }
    }

    /// Replay key for the completion at `kind`.
    pub fn sample_id(&self, kind: PointKind) -> String {
        format!("{}:{}", self.target_function, kind.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedInvariant {
    pub predicate_text: String,
    pub point: InjectionPoint,
    pub raw_completion: String,
    pub trivial: Triviality,
}

/// A point left untouched because no usable predicate came back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub point: InjectionPoint,
    pub raw_completion: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardenedContract {
    pub source: String,
    pub injected: Vec<SynthesizedInvariant>,
    pub skipped: Vec<SkippedPoint>,
    pub compiles: Option<bool>,
    /// Inserted text in original coordinates, in application order.
    pub insertions: Vec<Insertion>,
    /// Prompts sent to the backend, in order.
    pub prompts: Vec<String>,
}

impl HardenedContract {
    /// The source with every injected statement removed again.
    pub fn strip(&self) -> String {
        let mut out = String::with_capacity(self.source.len());
        let mut cursor = 0;
        for (pos, len) in hardened_positions(&self.insertions) {
            out.push_str(&self.source[cursor..pos]);
            cursor = pos + len;
        }
        out.push_str(&self.source[cursor..]);
        out
    }

    pub fn trivial_invariants(&self) -> impl Iterator<Item = &SynthesizedInvariant> {
        self.injected.iter().filter(|i| i.trivial != Triviality::No)
    }
}

/// Insertions sorted by original offset; equal offsets keep application order.
fn ordered(insertions: &[Insertion]) -> Vec<&Insertion> {
    let mut v: Vec<&Insertion> = insertions.iter().collect();
    v.sort_by_key(|i| i.at);
    v
}

/// `(start, len)` of every insertion inside the hardened text, ascending.
fn hardened_positions(insertions: &[Insertion]) -> Vec<(usize, usize)> {
    let mut shift = 0;
    ordered(insertions)
        .into_iter()
        .map(|i| {
            let pos = i.at + shift;
            shift += i.text.len();
            (pos, i.text.len())
        })
        .collect()
}

/// Applies insertions (original coordinates) to `original`.
pub fn apply_insertions(original: &str, insertions: &[Insertion]) -> String {
    let mut out = String::with_capacity(original.len() + insertions.iter().map(|i| i.text.len()).sum::<usize>());
    let mut cursor = 0;
    for i in ordered(insertions) {
        out.push_str(&original[cursor..i.at]);
        out.push_str(&i.text);
        cursor = i.at;
    }
    out.push_str(&original[cursor..]);
    out
}

/// Maps an original offset into the text produced by `insertions`; a new
/// insertion at the same offset lands after the existing ones.
fn map_through(insertions: &[Insertion], offset: usize) -> usize {
    offset + insertions.iter().filter(|i| i.at <= offset).map(|i| i.text.len()).sum::<usize>()
}

/// Synthesizes and injects invariants for one task.
///
/// Points are visited in plan order (pre-condition first). A single backend
/// call serves every exit of the function; its prompt uses the fall-through
/// end when reachable, otherwise the last `return`.
pub fn harden(task: &SynthesisTask, backend: &dyn ModelBackend) -> Result<HardenedContract, SynthError> {
    let original = task.file.content.as_str();
    let ast = Ast::parse(original)?;
    let f = ast.function(&task.target_function)?;
    let points = plan_for(f, task.placement)?;
    let func_start = f.span.start;

    let counter_backend = BackendCounter(backend);
    let counter: &dyn TokenCounter = match task.counter {
        CounterChoice::Lexical => &LexicalCounter,
        CounterChoice::Backend => &counter_backend,
    };

    let mut out = HardenedContract {
        source: String::new(),
        injected: Vec::new(),
        skipped: Vec::new(),
        compiles: None,
        insertions: Vec::new(),
        prompts: Vec::new(),
    };
    let groups: Vec<(PointKind, Vec<&InjectionPoint>)> = [PointKind::Pre, PointKind::Post]
        .into_iter()
        .map(|k| (k, points.iter().filter(|p| p.kind == k).collect::<Vec<_>>()))
        .filter(|(_, ps)| !ps.is_empty())
        .collect();

    for (kind, group) in groups {
        let prompt_point = *group
            .iter()
            .rev()
            .find(|p| p.anchor == Anchor::BodyEnd)
            .unwrap_or_else(|| group.last().expect("group is non-empty"));
        let prompt = match task.strategy {
            Strategy::SingleTurn => build_prompt(original, func_start, prompt_point, task.budget, counter)?,
            Strategy::MultiTurn => {
                let current = apply_insertions(original, &out.insertions);
                let moved = prompt_point.shifted(|o| map_through(&out.insertions, o));
                build_prompt(&current, func_start, &moved, task.budget, counter)?
            }
        };
        out.prompts.push(prompt.clone());
        let request = CompletionRequest {
            prompt,
            max_tokens: task.max_tokens,
            stop: default_stops(),
            temperature: task.temperature,
            sample_id: Some(task.sample_id(kind)),
        };
        let mut attempt = 0;
        let (raw, extracted) = loop {
            let raw = backend.complete(&request)?;
            let extracted = extract_predicate(&raw);
            if extracted.is_ok() || attempt >= task.retries {
                break (raw, extracted);
            }
            attempt += 1;
            tracing::debug!(function = %task.target_function, attempt, "resampling malformed completion");
        };
        match extracted {
            Ok(pred) => {
                let trivial = is_trivial(&pred);
                if trivial != Triviality::No {
                    tracing::warn!(function = %task.target_function, predicate = %pred, ?trivial, "trivial invariant");
                }
                let stmt = format!("require({pred});");
                for p in group {
                    out.insertions.extend(p.insertions(original, &stmt));
                    out.injected.push(SynthesizedInvariant {
                        predicate_text: pred.clone(),
                        point: p.clone(),
                        raw_completion: raw.clone(),
                        trivial,
                    });
                }
            }
            Err(e) => {
                tracing::warn!(function = %task.target_function, error = %e, "skipping injection point");
                for p in group {
                    out.skipped.push(SkippedPoint {
                        point: p.clone(),
                        raw_completion: raw.clone(),
                        error: e.to_string(),
                    });
                }
            }
        }
    }
    out.source = apply_insertions(original, &out.insertions);
    Ok(out)
}

fn build_prompt(
    src: &str,
    func_start: usize,
    point: &InjectionPoint,
    budget: usize,
    counter: &dyn TokenCounter,
) -> Result<String, SynthError> {
    let ast = Ast::parse(src)?;
    let f = ast
        .function_at(func_start)
        .ok_or_else(|| SynthError::NoBody(point.function.clone()))?;
    let ctx = abstract_function(&ast, f, budget, counter)?;
    Ok(fim::make_inference_prompt(&ctx, point)?.context)
}
