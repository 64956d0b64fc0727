//! Solidity syntax trees with byte-exact spans.
//!
//! [`Ast::parse`] builds an immutable tree over one source file. The queries
//! here (functions, modifiers, require sites, intra-file callers) are what the
//! abstraction, mining and injection stages need; none of them resolve types
//! or inheritance beyond matching names.

mod nodes;
mod parser;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer;
pub use crate::span::Span;
pub use nodes::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {line}:{column}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub column: usize,
    pub offset: usize,
}

impl ParseError {
    pub(crate) fn at(src: &str, offset: usize, message: impl Into<String>) -> Self {
        let (line, column) = lexer::line_col(src, offset);
        Self {
            message: message.into(),
            line,
            column,
            offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AstError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("span {start}..{end} is out of bounds or not on a character boundary (source is {len} bytes)")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
}

/// A parsed source file. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Ast {
    source: String,
    unit: SourceUnit,
}

/// A located `require(<predicate>[, message])` call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequireSite {
    pub file_id: String,
    pub contract: Option<String>,
    /// Enclosing function, or modifier when `in_modifier` is set.
    pub function_name: String,
    pub in_modifier: bool,
    /// Start of the enclosing function or modifier definition; identifies it
    /// unambiguously when names are overloaded.
    pub function_start: usize,
    pub call_span: Span,
    pub predicate_text: String,
    pub predicate_span: Span,
    pub message_text: Option<String>,
}

impl Ast {
    pub fn parse(source: impl Into<String>) -> Result<Ast, ParseError> {
        let source = source.into();
        let unit = parser::parse_source_unit(&source)?;
        Ok(Ast { source, unit })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn unit(&self) -> &SourceUnit {
        &self.unit
    }

    pub fn contracts(&self) -> impl Iterator<Item = &Contract> {
        self.unit.items.iter().filter_map(|i| match i {
            Item::Contract(c) => Some(c),
            _ => None,
        })
    }

    /// Every definition in source order, contract members and file-level alike.
    pub fn parts(&self) -> impl Iterator<Item = &Part> {
        self.unit.items.iter().flat_map(|i| -> Box<dyn Iterator<Item = &Part> + '_> {
            match i {
                Item::Contract(c) => Box::new(c.parts.iter()),
                Item::Part(p) => Box::new(std::iter::once(p)),
                _ => Box::new(std::iter::empty()),
            }
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionInfo> {
        self.parts().filter_map(|p| match &p.kind {
            PartKind::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn modifiers(&self) -> impl Iterator<Item = &ModifierInfo> {
        self.parts().filter_map(|p| match &p.kind {
            PartKind::Modifier(m) => Some(m),
            _ => None,
        })
    }

    pub fn state_vars(&self) -> impl Iterator<Item = &StateVarInfo> {
        self.parts().filter_map(|p| match &p.kind {
            PartKind::StateVar(v) => Some(v),
            _ => None,
        })
    }

    pub fn events(&self) -> impl Iterator<Item = &EventInfo> {
        self.parts().filter_map(|p| match &p.kind {
            PartKind::Event(e) => Some(e),
            _ => None,
        })
    }

    /// Resolves `name` or `Contract.name`, preferring definitions with a body.
    pub fn function(&self, name: &str) -> Result<&FunctionInfo, AstError> {
        let (contract, fname) = match name.split_once('.') {
            Some((c, f)) => (Some(c), f),
            None => (None, name),
        };
        let mut candidates = self
            .functions()
            .filter(|f| f.name == fname && (contract.is_none() || f.contract.as_deref() == contract));
        let first = candidates.next();
        first
            .filter(|f| f.body.is_some())
            .or_else(|| candidates.find(|f| f.body.is_some()))
            .or(first)
            .ok_or_else(|| AstError::UnknownFunction(name.to_string()))
    }

    /// The function whose definition starts at `start`.
    pub fn function_at(&self, start: usize) -> Option<&FunctionInfo> {
        self.functions().find(|f| f.span.start == start)
    }

    /// Functions with a body that call `target` by name, in source order.
    ///
    /// A call matches when its callee is the bare name, or a member access of
    /// the name through `super`, `this`, or a contract declared in this file.
    pub fn callers_of(&self, target: &str) -> Result<Vec<&FunctionInfo>, AstError> {
        Ok(self.callers_of_fn(self.function(target)?))
    }

    /// [`Ast::callers_of`] for an already resolved definition.
    pub fn callers_of_fn(&self, target_fn: &FunctionInfo) -> Vec<&FunctionInfo> {
        let name = target_fn.name.as_str();
        let contracts: Vec<&str> = self.contracts().map(|c| c.name.as_str()).collect();
        let mut out = Vec::new();
        for f in self.functions() {
            if f.span == target_fn.span {
                continue;
            }
            let Some(body) = &f.body else { continue };
            let mut calls = false;
            body.walk_exprs(&mut |e| {
                if let ExprKind::Call { callee, .. } = &e.kind {
                    if callee_matches(callee, name, &contracts) {
                        calls = true;
                    }
                }
            });
            if calls {
                out.push(f);
            }
        }
        out
    }

    /// Every syntactic `require(...)` in function and modifier bodies, by offset.
    pub fn require_sites(&self, file_id: &str) -> Vec<RequireSite> {
        let mut sites = Vec::new();
        let mut visit = |body: &Block, contract: &Option<String>, name: &str, start: usize, in_modifier: bool| {
            body.walk_exprs(&mut |e| {
                let ExprKind::Call { callee, args, names } = &e.kind else { return };
                if callee.as_ident() != Some("require") || args.is_empty() || !names.is_empty() {
                    return;
                }
                let pred = &args[0];
                sites.push(RequireSite {
                    file_id: file_id.to_string(),
                    contract: contract.clone(),
                    function_name: name.to_string(),
                    in_modifier,
                    function_start: start,
                    call_span: e.span,
                    predicate_text: pred.span.slice(&self.source).to_string(),
                    predicate_span: pred.span,
                    message_text: args.get(1).map(|m| m.span.slice(&self.source).to_string()),
                });
            });
        };
        for part in self.parts() {
            match &part.kind {
                PartKind::Function(f) => {
                    if let Some(b) = &f.body {
                        visit(b, &f.contract, &f.name, f.span.start, false);
                    }
                }
                PartKind::Modifier(m) => {
                    if let Some(b) = &m.body {
                        visit(b, &m.contract, &m.name, m.span.start, true);
                    }
                }
                _ => {}
            }
        }
        sites.sort_by_key(|s| s.call_span.start);
        sites
    }
}

fn callee_matches(callee: &Expr, name: &str, contracts: &[&str]) -> bool {
    let callee = match &callee.unparen().kind {
        ExprKind::CallOptions { callee, .. } => callee.unparen(),
        _ => callee.unparen(),
    };
    match &callee.kind {
        ExprKind::Ident(n) => n == name,
        ExprKind::Member { base, member } if member == name => match base.as_ident() {
            Some("super") | Some("this") => true,
            Some(other) => contracts.contains(&other),
            None => false,
        },
        _ => false,
    }
}

/// Parses a standalone Solidity expression.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    parser::parse_expression(text)
}

/// Parses a single standalone statement.
pub fn parse_statement(text: &str) -> Result<Stmt, ParseError> {
    parser::parse_statement(text)
}

/// Replaces `source[span]` with `replacement`; bytes outside `span` are untouched.
pub fn splice(source: &str, span: Span, replacement: &str) -> Result<String, AstError> {
    if span.start > span.end
        || span.end > source.len()
        || !source.is_char_boundary(span.start)
        || !source.is_char_boundary(span.end)
    {
        return Err(AstError::SpanOutOfBounds {
            start: span.start,
            end: span.end,
            len: source.len(),
        });
    }
    let mut out = String::with_capacity(source.len() - span.len() + replacement.len());
    out.push_str(&source[..span.start]);
    out.push_str(replacement);
    out.push_str(&source[span.end..]);
    Ok(out)
}

#[cfg(test)]
mod tests;
