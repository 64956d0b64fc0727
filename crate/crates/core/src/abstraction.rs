//! Budget-bounded context around one target function.
//!
//! The context keeps, in order of priority: the target's full definition,
//! full definitions of the functions that call it, the modifiers those full
//! definitions apply, every other function as a `header { }` stub, and the
//! state variable declarations. Events are removed and everything else
//! (pragmas, imports, structs, enums, `using`) is kept verbatim. When the
//! result is over budget, caller bodies are demoted to stubs farthest-first,
//! then state variables not mentioned in any retained body are dropped.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{Ast, AstError, FunctionInfo, PartKind};
use crate::lexer;
use crate::span::Span;

pub const DEFAULT_BUDGET: usize = 4096;

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("context needs {needed} tokens, budget is {budget}")]
    OverBudget { needed: usize, budget: usize },
    #[error(transparent)]
    Ast(#[from] AstError),
    #[error("function `{0}` has no body")]
    NoBody(String),
    #[error("token counter unavailable: {0}")]
    BackendUnavailable(String),
}

/// Token counting strategy for budget checks.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> Result<usize, AbstractionError>;
}

/// Counts Solidity lexical tokens; comments and whitespace are free.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalCounter;

impl TokenCounter for LexicalCounter {
    fn count(&self, text: &str) -> Result<usize, AbstractionError> {
        Ok(lexer::tokenize_lossy(text).len())
    }
}

pub fn count_tokens(text: &str, counter: &dyn TokenCounter) -> Result<usize, AbstractionError> {
    counter.count(text)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kept {
    pub full_bodies: Vec<String>,
    pub signatures_only: Vec<String>,
    pub modifiers: Vec<String>,
    pub state_vars: usize,
    pub events_removed: usize,
}

/// One replaced region: `original` in the source became `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub original: Span,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractedContext {
    pub text: String,
    pub target_function: String,
    pub kept: Kept,
    pub token_count: usize,
    pub budget: usize,
    /// Span of the target function definition, in original coordinates.
    pub target_span: Span,
    /// Span of the target body including braces, in original coordinates.
    pub target_body: Span,
    /// Sorted, non-overlapping edits that turn the original into `text`.
    pub edits: Vec<Edit>,
}

impl AbstractedContext {
    /// Maps an offset in the original source to `text`; `None` when the
    /// offset lies strictly inside an edited region.
    pub fn map_offset(&self, offset: usize) -> Option<usize> {
        let mut delta: isize = 0;
        for e in &self.edits {
            if offset <= e.original.start {
                break;
            }
            if offset < e.original.end {
                return None;
            }
            delta += e.replacement.len() as isize - e.original.len() as isize;
        }
        Some((offset as isize + delta) as usize)
    }

    pub fn map_span(&self, span: Span) -> Option<Span> {
        let start = self.map_offset(span.start)?;
        let end = self.map_offset(span.end)?;
        (end - start == span.len()).then_some(Span::new(start, end))
    }

    /// Span of the target function definition inside `text`.
    pub fn target_span_in_text(&self) -> Span {
        self.map_span(self.target_span).expect("target definition is never edited")
    }
}

/// Builds the context for `target` (a name or `Contract.name`).
pub fn abstract_context(
    ast: &Ast,
    target: &str,
    budget: usize,
    counter: &dyn TokenCounter,
) -> Result<AbstractedContext, AbstractionError> {
    abstract_function(ast, ast.function(target)?, budget, counter)
}

/// Like [`abstract_context`] for an already resolved definition, which
/// disambiguates overloads.
pub fn abstract_function(
    ast: &Ast,
    target_fn: &FunctionInfo,
    budget: usize,
    counter: &dyn TokenCounter,
) -> Result<AbstractedContext, AbstractionError> {
    let target = target_fn.name.as_str();
    if target_fn.body.is_none() {
        return Err(AbstractionError::NoBody(target.to_string()));
    }
    let target_len = counter.count(target_fn.span.slice(ast.source()))?;
    if target_len > budget {
        return Err(AbstractionError::OverBudget {
            needed: target_len,
            budget,
        });
    }

    let mut callers: Vec<&FunctionInfo> = ast
        .callers_of_fn(target_fn)
        .into_iter()
        .filter(|f| f.body.is_some())
        .collect();
    let all_vars: BTreeSet<usize> = state_var_starts(ast).collect();
    let mut plan = Plan {
        ast,
        target: target_fn,
        callers: callers.clone(),
        state_vars: all_vars.clone(),
    };
    let mut ctx = plan.render(target, budget, counter)?;
    if ctx.token_count <= budget {
        return Ok(ctx);
    }

    let distance = |f: &FunctionInfo| f.span.start.abs_diff(target_fn.span.start);
    callers.sort_by_key(|f| std::cmp::Reverse(distance(f)));
    for demoted in callers {
        plan.callers.retain(|c| c.span != demoted.span);
        ctx = plan.render(target, budget, counter)?;
        tracing::debug!(caller = %demoted.name, tokens = ctx.token_count, "demoted caller");
        if ctx.token_count <= budget {
            return Ok(ctx);
        }
    }

    let used = plan.referenced_identifiers();
    plan.state_vars = ast
        .parts()
        .filter_map(|p| match &p.kind {
            PartKind::StateVar(v) if used.contains(v.name.as_str()) => Some(p.span.start),
            _ => None,
        })
        .collect();
    ctx = plan.render(target, budget, counter)?;
    if ctx.token_count <= budget {
        return Ok(ctx);
    }
    Err(AbstractionError::OverBudget {
        needed: ctx.token_count,
        budget,
    })
}

fn state_var_starts(ast: &Ast) -> impl Iterator<Item = usize> + '_ {
    ast.parts().filter_map(|p| matches!(p.kind, PartKind::StateVar(_)).then_some(p.span.start))
}

struct Plan<'a> {
    ast: &'a Ast,
    target: &'a FunctionInfo,
    callers: Vec<&'a FunctionInfo>,
    /// Start offsets of the state variable parts to keep.
    state_vars: BTreeSet<usize>,
}

impl Plan<'_> {
    fn is_full(&self, f: &FunctionInfo) -> bool {
        f.span == self.target.span || self.callers.iter().any(|c| c.span == f.span)
    }

    fn full_functions(&self) -> impl Iterator<Item = &FunctionInfo> {
        std::iter::once(self.target).chain(self.callers.iter().copied())
    }

    fn applied_modifiers(&self) -> HashSet<&str> {
        self.full_functions().flat_map(|f| f.modifier_names()).collect()
    }

    /// Identifier tokens in retained bodies: full functions and kept modifiers.
    fn referenced_identifiers(&self) -> HashSet<&str> {
        let src = self.ast.source();
        let applied = self.applied_modifiers();
        let mut spans: Vec<Span> = self.full_functions().map(|f| f.span).collect();
        spans.extend(
            self.ast
                .modifiers()
                .filter(|m| applied.contains(m.name.as_str()))
                .map(|m| m.span),
        );
        let mut out = HashSet::new();
        for s in spans {
            let text = s.slice(src);
            for t in lexer::tokenize_lossy(text) {
                if t.kind == lexer::TokenKind::Ident {
                    out.insert(&src[s.start + t.span.start..s.start + t.span.end]);
                }
            }
        }
        out
    }

    fn render(
        &self,
        target: &str,
        budget: usize,
        counter: &dyn TokenCounter,
    ) -> Result<AbstractedContext, AbstractionError> {
        let src = self.ast.source();
        let applied = self.applied_modifiers();
        let mut kept = Kept::default();
        let mut edits = Vec::new();
        for part in self.ast.parts() {
            match &part.kind {
                PartKind::Function(f) => {
                    if self.is_full(f) {
                        kept.full_bodies.push(f.name.clone());
                    } else if let Some(body) = &f.body {
                        kept.signatures_only.push(f.name.clone());
                        edits.push(Edit {
                            original: body.span,
                            replacement: "{ }".to_string(),
                        });
                    } else {
                        kept.signatures_only.push(f.name.clone());
                    }
                }
                PartKind::Modifier(m) => {
                    if applied.contains(m.name.as_str()) {
                        kept.modifiers.push(m.name.clone());
                    } else {
                        edits.push(deletion(src, part.span));
                    }
                }
                PartKind::StateVar(_) => {
                    if self.state_vars.contains(&part.span.start) {
                        kept.state_vars += 1;
                    } else {
                        edits.push(deletion(src, part.span));
                    }
                }
                PartKind::Event(_) => {
                    kept.events_removed += 1;
                    edits.push(deletion(src, part.span));
                }
                PartKind::Other { .. } => {}
            }
        }
        edits.sort_by_key(|e| e.original.start);
        let mut text = String::with_capacity(src.len());
        let mut cursor = 0;
        for e in &edits {
            text.push_str(&src[cursor..e.original.start]);
            text.push_str(&e.replacement);
            cursor = e.original.end;
        }
        text.push_str(&src[cursor..]);
        let token_count = counter.count(&text)?;
        Ok(AbstractedContext {
            text,
            target_function: target.to_string(),
            kept,
            token_count,
            budget,
            target_span: self.target.span,
            target_body: self.target.body_span(),
            edits,
        })
    }
}

/// Removes `span`, taking its whole line with it when nothing else is on it.
fn deletion(src: &str, span: Span) -> Edit {
    let bytes = src.as_bytes();
    let mut start = span.start;
    while start > 0 && matches!(bytes[start - 1], b' ' | b'\t') {
        start -= 1;
    }
    let mut end = span.end;
    while end < bytes.len() && matches!(bytes[end], b' ' | b'\t' | b'\r') {
        end += 1;
    }
    let at_line_start = start == 0 || bytes[start - 1] == b'\n';
    let at_line_end = end == bytes.len() || bytes[end] == b'\n';
    let original = if at_line_start && at_line_end {
        Span::new(start, (end + 1).min(bytes.len()))
    } else {
        span
    };
    Edit {
        original,
        replacement: String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexical_counts() {
        assert_eq!(count_tokens("", &LexicalCounter).unwrap(), 0);
        assert_eq!(count_tokens("uint x;", &LexicalCounter).unwrap(), 3);
        assert_eq!(count_tokens("uint x; // trailing", &LexicalCounter).unwrap(), 3);
    }

    #[test]
    fn deletion_takes_whole_line_only_when_alone() {
        let src = "a\n    event E();\nb";
        let start = src.find("event").unwrap();
        let e = deletion(src, Span::new(start, start + "event E();".len()));
        assert_eq!(e.original, Span::new(2, src.find('b').unwrap()));
        let src = "uint x; event E();";
        let start = src.find("event").unwrap();
        let e = deletion(src, Span::new(start, src.len()));
        assert_eq!(e.original, Span::new(start, src.len()));
    }
}
