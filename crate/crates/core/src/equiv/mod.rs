//! Semantic comparison of a synthesized predicate against a ground truth.
//!
//! Predicates are parsed into [`PredicateAst`], normalized, and compared by
//! checking implication in both directions over the integers (or over
//! 256-bit words in bounded mode). The built-in procedure handles linear
//! arithmetic with boolean structure exactly and falls back to an external
//! SMT solver, when one is configured, for anything it cannot settle.

mod predicate;
mod smt;
mod solver;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{Ast, ExprKind, StmtKind};

pub use predicate::{normalize, Poly, PredicateAst, Rel};
pub use smt::SmtBridge;
pub use solver::Implication;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("cannot parse predicate `{text}`: {message}")]
    Parse { text: String, message: String },
    #[error("ill-typed predicate: {0}")]
    Type(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ty {
    #[serde(alias = "uint256", alias = "uint8", alias = "uint128")]
    Uint,
    #[serde(alias = "int256")]
    Int,
    Bool,
    Address,
    Bytes,
    Mapping,
    #[default]
    Unknown,
}

impl Ty {
    /// Type of a Solidity type name such as `uint96` or `address payable`.
    pub fn of_type_name(text: &str) -> Ty {
        let t = text.trim();
        if t.starts_with("uint") {
            Ty::Uint
        } else if t.starts_with("int") {
            Ty::Int
        } else if t == "bool" {
            Ty::Bool
        } else if t.starts_with("address") {
            Ty::Address
        } else if t.starts_with("bytes") || t == "string" {
            Ty::Bytes
        } else if t.starts_with("mapping") {
            Ty::Mapping
        } else {
            Ty::Unknown
        }
    }
}

/// Types, value ranges and aliases of the terms appearing in predicates,
/// keyed by canonical term text. Unlisted terms are treated as unsigned.
#[derive(Debug, Clone, Default)]
pub struct TypeEnv {
    types: BTreeMap<String, Ty>,
    bounds: BTreeMap<String, (BigInt, BigInt)>,
    aliases: BTreeMap<PredicateAst, PredicateAst>,
}

fn canonical_term(text: &str) -> Result<PredicateAst, EquivError> {
    predicate::normalize_plain(&PredicateAst::parse(text)?)
}

impl TypeEnv {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declarations of state variables and parameters in `ast`. A name
    /// declared with different types in different places is left untyped.
    pub fn from_ast(ast: &Ast) -> Self {
        let mut env = Self::default();
        let mut seen: BTreeMap<String, Ty> = BTreeMap::new();
        let mut conflicted = std::collections::BTreeSet::new();
        let mut note = |name: &str, ty: Ty| {
            if let Some(prev) = seen.insert(name.to_string(), ty) {
                if prev != ty {
                    conflicted.insert(name.to_string());
                }
            }
        };
        for v in ast.state_vars() {
            note(&v.name, Ty::of_type_name(&v.type_text));
        }
        for f in ast.functions() {
            for p in f.params.iter().chain(&f.returns) {
                if let Some(n) = &p.name {
                    note(n, Ty::of_type_name(&p.type_text));
                }
            }
        }
        for (name, ty) in seen {
            if !conflicted.contains(&name) {
                env.types.insert(name, ty);
            }
        }
        for (from, to) in seed_aliases(ast) {
            let _ = env.alias(&from, &to);
        }
        env
    }

    pub fn declare(&mut self, term: &str, ty: Ty) -> Result<&mut Self, EquivError> {
        let key = canonical_term(term)?.to_string();
        self.types.insert(key, ty);
        Ok(self)
    }

    /// Restricts `term` to `lo..=hi`, replacing the range implied by its type.
    pub fn bound(&mut self, term: &str, lo: impl Into<BigInt>, hi: impl Into<BigInt>) -> Result<&mut Self, EquivError> {
        let key = canonical_term(term)?.to_string();
        self.bounds.insert(key, (lo.into(), hi.into()));
        Ok(self)
    }

    /// Treats `from` as another spelling of `to`, e.g. a getter and the
    /// variable it returns.
    pub fn alias(&mut self, from: &str, to: &str) -> Result<&mut Self, EquivError> {
        let from = canonical_term(from)?;
        let to = canonical_term(to)?;
        self.aliases.insert(from, to);
        Ok(self)
    }

    pub fn alias_target(&self, term: &PredicateAst) -> Option<&PredicateAst> {
        self.aliases.get(term)
    }

    pub fn ty(&self, term: &str) -> Ty {
        self.types.get(term).copied().unwrap_or_default()
    }

    pub(crate) fn bounds_of(&self, term: &str) -> Option<&(BigInt, BigInt)> {
        self.bounds.get(term)
    }
}

/// Getter aliases from `ast`: every parameterless function whose body is a
/// single `return <name>;` maps `f()` to the returned expression.
pub fn seed_aliases(ast: &Ast) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for f in ast.functions() {
        if !f.params.is_empty() || f.name.is_empty() {
            continue;
        }
        let Some(body) = &f.body else { continue };
        let [stmt] = body.stmts.as_slice() else { continue };
        let StmtKind::Return(Some(e)) = &stmt.kind else { continue };
        if matches!(e.unparen().kind, ExprKind::Ident(_) | ExprKind::Member { .. } | ExprKind::Index { .. }) {
            out.push((format!("{}()", f.name), e.span.slice(ast.source()).to_string()));
        }
    }
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    ExactMatch,
    Equivalent,
    SynthesizedStronger,
    GroundTruthStronger,
    Inconclusive,
}

impl Verdict {
    pub const ALL: [Verdict; 5] = [
        Verdict::ExactMatch,
        Verdict::Equivalent,
        Verdict::SynthesizedStronger,
        Verdict::GroundTruthStronger,
        Verdict::Inconclusive,
    ];
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ExactMatch => "ExactMatch",
            Verdict::Equivalent => "Equivalent",
            Verdict::SynthesizedStronger => "SynthesizedStronger",
            Verdict::GroundTruthStronger => "GroundTruthStronger",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone)]
pub struct EquivConfig {
    /// Per implication query.
    pub timeout: Duration,
    /// Model uint arithmetic as wrapping 256-bit words instead of integers.
    pub bounded: bool,
    pub node_budget: usize,
    pub bridge: Option<SmtBridge>,
}

impl Default for EquivConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(5),
            bounded: false,
            node_budget: 100_000,
            bridge: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub syn_normalized: String,
    pub gt_normalized: String,
    /// `syn => gt`; absent when decided syntactically.
    pub syn_implies_gt: Option<Implication>,
    /// `gt => syn`.
    pub gt_implies_syn: Option<Implication>,
}

/// Does `p` imply `q`?
pub fn implies(p: &PredicateAst, q: &PredicateAst, env: &TypeEnv, cfg: &EquivConfig) -> Result<Implication, EquivError> {
    let p = normalize(p, env)?;
    let q = normalize(q, env)?;
    Ok(implies_normalized(&p, &q, env, cfg))
}

fn implies_normalized(p: &PredicateAst, q: &PredicateAst, env: &TypeEnv, cfg: &EquivConfig) -> Implication {
    let (outcome, script) = solver::check(p, q, env, cfg);
    match (&outcome, &cfg.bridge, script) {
        (Implication::Unknown { reason }, Some(bridge), Some(script)) => match bridge.run(&script, cfg.timeout) {
            Implication::Unknown { reason: why } => Implication::Unknown {
                reason: format!("{reason}; external solver: {why}"),
            },
            settled => settled,
        },
        _ => outcome,
    }
}

pub fn classify(syn: &str, gt: &str, env: &TypeEnv, cfg: &EquivConfig) -> Result<Classification, EquivError> {
    let s = PredicateAst::parse(syn)?;
    let g = PredicateAst::parse(gt)?;
    let sn = normalize(&s, env)?;
    let gn = normalize(&g, env)?;
    let mut out = Classification {
        verdict: Verdict::ExactMatch,
        syn_normalized: sn.to_string(),
        gt_normalized: gn.to_string(),
        syn_implies_gt: None,
        gt_implies_syn: None,
    };
    if PredicateAst::strip_whitespace(syn) == PredicateAst::strip_whitespace(gt) {
        return Ok(out);
    }
    if sn == gn {
        out.verdict = Verdict::Equivalent;
        return Ok(out);
    }
    let fwd = implies_normalized(&sn, &gn, env, cfg);
    let bwd = implies_normalized(&gn, &sn, env, cfg);
    out.verdict = match (fwd.is_proven(), bwd.is_proven()) {
        (true, true) => Verdict::Equivalent,
        (true, false) => Verdict::SynthesizedStronger,
        (false, true) => Verdict::GroundTruthStronger,
        (false, false) => Verdict::Inconclusive,
    };
    out.syn_implies_gt = Some(fwd);
    out.gt_implies_syn = Some(bwd);
    Ok(out)
}
