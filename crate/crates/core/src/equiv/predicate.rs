use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{EquivError, TypeEnv};
use crate::ast::{parse_expression, Expr, ExprKind};
use crate::lexer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rel {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Rel {
    fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
            Rel::Eq => "==",
            Rel::Ne => "!=",
        }
    }
}

/// Predicate tree. `parse` keeps the source shape; [`normalize`] removes
/// `Sub`, `Neg`, `Gt` and `Ge` and puts arithmetic into polynomial form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredicateAst {
    Bool(bool),
    Int(BigInt),
    Ident(String),
    Member(Box<PredicateAst>, String),
    Index(Box<PredicateAst>, Box<PredicateAst>),
    Call(Box<PredicateAst>, Vec<PredicateAst>),
    Not(Box<PredicateAst>),
    And(Vec<PredicateAst>),
    Or(Vec<PredicateAst>),
    Add(Vec<PredicateAst>),
    Sub(Box<PredicateAst>, Box<PredicateAst>),
    Mul(Vec<PredicateAst>),
    Neg(Box<PredicateAst>),
    Div(Box<PredicateAst>, Box<PredicateAst>),
    Mod(Box<PredicateAst>, Box<PredicateAst>),
    Pow(Box<PredicateAst>, Box<PredicateAst>),
    Cmp(Rel, Box<PredicateAst>, Box<PredicateAst>),
    /// Anything outside the modelled fragment, by its token text.
    Opaque(String),
}

use PredicateAst as P;

impl PredicateAst {
    pub fn parse(text: &str) -> Result<Self, EquivError> {
        let expr = parse_expression(text).map_err(|e| EquivError::Parse {
            text: text.to_string(),
            message: e.to_string(),
        })?;
        Ok(from_expr(&expr, text))
    }

    /// Whitespace-free source text, the basis of exact matching.
    pub fn strip_whitespace(text: &str) -> String {
        text.chars().filter(|c| !c.is_whitespace()).collect()
    }

    pub(crate) fn is_boolean(&self) -> bool {
        matches!(self, P::Bool(_) | P::Not(_) | P::And(_) | P::Or(_) | P::Cmp(..))
    }

    pub(crate) fn is_arithmetic(&self) -> bool {
        matches!(
            self,
            P::Int(_) | P::Add(_) | P::Sub(..) | P::Mul(_) | P::Neg(_) | P::Div(..) | P::Mod(..) | P::Pow(..)
        )
    }

    fn prec(&self) -> u8 {
        match self {
            P::Or(_) => 1,
            P::And(_) => 2,
            P::Cmp(Rel::Eq | Rel::Ne, ..) => 3,
            P::Cmp(..) => 4,
            P::Add(_) | P::Sub(..) => 5,
            P::Mul(_) | P::Div(..) | P::Mod(..) => 6,
            P::Pow(..) => 7,
            P::Not(_) | P::Neg(_) => 8,
            P::Int(v) if v.is_negative() => 8,
            P::Opaque(t) if t.contains(' ') => 0,
            _ => 9,
        }
    }
}

fn from_expr(e: &Expr, src: &str) -> PredicateAst {
    let opaque = || P::Opaque(token_text(e.span.slice(src)));
    let sub = |x: &Expr| Box::new(from_expr(x, src));
    match &e.kind {
        ExprKind::Ident(name) => P::Ident(name.clone()),
        ExprKind::Bool(b) => P::Bool(*b),
        ExprKind::Number { text, unit } => match number_value(text, unit.as_deref()) {
            Some(v) => P::Int(v),
            None => opaque(),
        },
        ExprKind::Member { base, member } => P::Member(sub(base), member.clone()),
        ExprKind::Index { base, index: Some(i) } => P::Index(sub(base), sub(i)),
        ExprKind::Call { callee, args, names } if names.is_empty() => {
            P::Call(sub(callee), args.iter().map(|a| from_expr(a, src)).collect())
        }
        ExprKind::Paren(inner) => from_expr(inner, src),
        ExprKind::Tuple(items) if items.len() == 1 && items[0].is_some() => from_expr(items[0].as_ref().unwrap(), src),
        ExprKind::Unary { op, operand, prefix: true } if op == "!" => P::Not(sub(operand)),
        ExprKind::Unary { op, operand, prefix: true } if op == "-" => P::Neg(sub(operand)),
        ExprKind::Binary { op, lhs, rhs } => {
            let (l, r) = (sub(lhs), sub(rhs));
            match op.as_str() {
                "&&" => P::And(vec![*l, *r]),
                "||" => P::Or(vec![*l, *r]),
                "+" => P::Add(vec![*l, *r]),
                "-" => P::Sub(l, r),
                "*" => P::Mul(vec![*l, *r]),
                "/" => P::Div(l, r),
                "%" => P::Mod(l, r),
                "**" => P::Pow(l, r),
                "<" => P::Cmp(Rel::Lt, l, r),
                "<=" => P::Cmp(Rel::Le, l, r),
                ">" => P::Cmp(Rel::Gt, l, r),
                ">=" => P::Cmp(Rel::Ge, l, r),
                "==" => P::Cmp(Rel::Eq, l, r),
                "!=" => P::Cmp(Rel::Ne, l, r),
                _ => opaque(),
            }
        }
        _ => opaque(),
    }
}

fn token_text(s: &str) -> String {
    lexer::tokenize_lossy(s).iter().map(|t| t.text(s)).collect::<Vec<_>>().join(" ")
}

fn unit_factor(unit: &str) -> Option<u64> {
    Some(match unit {
        "wei" | "seconds" => 1,
        "gwei" => 1_000_000_000,
        "szabo" => 1_000_000_000_000,
        "finney" => 1_000_000_000_000_000,
        "ether" => 1_000_000_000_000_000_000,
        "minutes" => 60,
        "hours" => 3_600,
        "days" => 86_400,
        "weeks" => 604_800,
        "years" => 31_536_000,
        _ => return None,
    })
}

/// Value of a numeric literal; `None` when it is not an integer.
pub(crate) fn number_value(text: &str, unit: Option<&str>) -> Option<BigInt> {
    let t = text.replace('_', "");
    let factor = BigInt::from(unit.map_or(Some(1), unit_factor)?);
    if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        return BigInt::parse_bytes(h.as_bytes(), 16).map(|v| v * factor);
    }
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i64>().ok()?),
        None => (t.as_str(), 0),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits = format!("{int}{frac}");
    let mut v = BigInt::parse_bytes(if digits.is_empty() { b"0" } else { digits.as_bytes() }, 10)? * factor;
    let scale = exp - frac.len() as i64;
    if scale.unsigned_abs() > 4096 {
        return None;
    }
    let ten = BigInt::from(10);
    if scale >= 0 {
        v *= num_traits::pow(ten, scale as usize);
    } else {
        let d = num_traits::pow(ten, (-scale) as usize);
        if !(&v % &d).is_zero() {
            return None;
        }
        v /= d;
    }
    Some(v)
}

/// Sum of monomials; a monomial is a sorted list of atom factors and the
/// empty monomial is the constant term.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly(pub BTreeMap<Vec<PredicateAst>, BigInt>);

impl Poly {
    pub fn constant(v: BigInt) -> Self {
        let mut p = Poly::default();
        p.add_term(Vec::new(), v);
        p
    }

    pub fn atom(a: PredicateAst) -> Self {
        let mut p = Poly::default();
        p.add_term(vec![a], BigInt::one());
        p
    }

    fn add_term(&mut self, mono: Vec<PredicateAst>, c: BigInt) {
        let e = self.0.entry(mono).or_default();
        *e += c;
        if e.is_zero() {
            self.0.retain(|_, v| !v.is_zero());
        }
    }

    pub fn as_constant(&self) -> Option<BigInt> {
        match self.0.len() {
            0 => Some(BigInt::zero()),
            1 => self.0.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn plus(mut self, other: &Poly) -> Poly {
        for (m, c) in &other.0 {
            self.add_term(m.clone(), c.clone());
        }
        self
    }

    pub fn scale(mut self, k: &BigInt) -> Poly {
        if k.is_zero() {
            return Poly::default();
        }
        for c in self.0.values_mut() {
            *c *= k;
        }
        self
    }

    pub fn times(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                let mut m: Vec<PredicateAst> = m1.iter().chain(m2).cloned().collect();
                m.sort();
                out.add_term(m, c1 * c2);
            }
        }
        out
    }

    /// Canonical tree: non-constant monomials in order, constant last.
    pub fn to_ast(&self) -> PredicateAst {
        let mut terms: Vec<PredicateAst> = Vec::new();
        let mut constant = None;
        let (pos, neg): (Vec<_>, Vec<_>) = self.0.iter().partition(|(_, c)| !c.is_negative());
        for (m, c) in pos.into_iter().chain(neg) {
            if m.is_empty() {
                constant = Some(P::Int(c.clone()));
                continue;
            }
            let mut factors = Vec::new();
            if !c.is_one() {
                factors.push(P::Int(c.clone()));
            }
            factors.extend(m.iter().cloned());
            terms.push(if factors.len() == 1 { factors.pop().unwrap() } else { P::Mul(factors) });
        }
        terms.extend(constant);
        match terms.len() {
            0 => P::Int(BigInt::zero()),
            1 => terms.pop().unwrap(),
            _ => P::Add(terms),
        }
    }

    /// Polynomial of an already normalized arithmetic tree.
    pub fn of_normalized(n: &PredicateAst) -> Poly {
        match n {
            P::Int(v) => Poly::constant(v.clone()),
            P::Add(xs) => xs.iter().fold(Poly::default(), |acc, x| acc.plus(&Poly::of_normalized(x))),
            P::Mul(xs) => xs
                .iter()
                .fold(Poly::constant(BigInt::one()), |acc, x| acc.times(&Poly::of_normalized(x))),
            P::Sub(a, b) => Poly::of_normalized(a).plus(&Poly::of_normalized(b).scale(&BigInt::from(-1))),
            P::Neg(a) => Poly::of_normalized(a).scale(&BigInt::from(-1)),
            other => Poly::atom(other.clone()),
        }
    }
}

/// Rewrites `p` to its canonical form under `env`.
pub fn normalize(p: &PredicateAst, env: &TypeEnv) -> Result<PredicateAst, EquivError> {
    let n = Normalizer { env, aliases: true }.boolean(p)?;
    Ok(n)
}

/// Normal form without alias substitution, used for alias-table keys.
pub(crate) fn normalize_plain(p: &PredicateAst) -> Result<PredicateAst, EquivError> {
    let env = TypeEnv::default();
    Normalizer { env: &env, aliases: false }.any(p)
}

struct Normalizer<'a> {
    env: &'a TypeEnv,
    aliases: bool,
}

fn type_error(what: &str, n: &PredicateAst) -> EquivError {
    EquivError::Type(format!("{what}: `{n}`"))
}

impl Normalizer<'_> {
    /// Normalizes a node in boolean position.
    fn boolean(&self, p: &PredicateAst) -> Result<PredicateAst, EquivError> {
        let n = self.any(p)?;
        if n.is_arithmetic() {
            return Err(type_error("number used as a condition", &n));
        }
        Ok(n)
    }

    fn any(&self, p: &PredicateAst) -> Result<PredicateAst, EquivError> {
        if p.is_arithmetic() {
            return Ok(self.arith(p)?.to_ast());
        }
        Ok(match p {
            P::Bool(_) | P::Opaque(_) => p.clone(),
            P::Not(x) => negate(self.boolean(x)?),
            P::And(xs) => mk_and(xs.iter().map(|x| self.boolean(x)).collect::<Result<_, _>>()?),
            P::Or(xs) => mk_or(xs.iter().map(|x| self.boolean(x)).collect::<Result<_, _>>()?),
            P::Cmp(rel, a, b) => {
                let (a, b) = (self.any(a)?, self.any(b)?);
                if matches!(rel, Rel::Lt | Rel::Le | Rel::Gt | Rel::Ge) && (a.is_boolean() || b.is_boolean()) {
                    return Err(type_error("ordering comparison on a boolean", p));
                }
                mk_cmp(*rel, a, b)
            }
            term => self.term(term)?,
        })
    }

    fn term(&self, p: &PredicateAst) -> Result<PredicateAst, EquivError> {
        let n = match p {
            P::Ident(name) if name == "now" => member(P::Ident("block".into()), "timestamp"),
            P::Ident(_) => p.clone(),
            P::Call(callee, args) => match (callee.as_ref(), args.as_slice()) {
                (P::Ident(f), []) if f == "_msgSender" => member(P::Ident("msg".into()), "sender"),
                (P::Ident(f), []) if f == "_msgData" => member(P::Ident("msg".into()), "data"),
                (P::Member(a, op), [b]) if safe_math(op).is_some() => {
                    return self.any(&safe_math(op).unwrap()(a.as_ref().clone(), b.clone()));
                }
                (P::Member(lib, op), [a, b]) if matches!(lib.as_ref(), P::Ident(l) if l == "SafeMath") && safe_math(op).is_some() => {
                    return self.any(&safe_math(op).unwrap()(a.clone(), b.clone()));
                }
                _ => P::Call(
                    Box::new(self.any(callee)?),
                    args.iter().map(|a| self.any(a)).collect::<Result<_, _>>()?,
                ),
            },
            P::Member(base, m) => P::Member(Box::new(self.any(base)?), m.clone()),
            P::Index(base, i) => P::Index(Box::new(self.any(base)?), Box::new(self.any(i)?)),
            other => other.clone(),
        };
        if self.aliases {
            if let Some(target) = self.env.alias_target(&n) {
                return Ok(target.clone());
            }
        }
        Ok(n)
    }

    fn arith(&self, p: &PredicateAst) -> Result<Poly, EquivError> {
        Ok(match p {
            P::Int(v) => Poly::constant(v.clone()),
            P::Add(xs) => {
                let mut acc = Poly::default();
                for x in xs {
                    acc = acc.plus(&self.arith(x)?);
                }
                acc
            }
            P::Sub(a, b) => self.arith(a)?.plus(&self.arith(b)?.scale(&BigInt::from(-1))),
            P::Neg(a) => self.arith(a)?.scale(&BigInt::from(-1)),
            P::Mul(xs) => {
                let mut acc = Poly::constant(BigInt::one());
                for x in xs {
                    acc = acc.times(&self.arith(x)?);
                }
                acc
            }
            P::Div(a, b) | P::Mod(a, b) | P::Pow(a, b) => {
                let (pa, pb) = (self.arith(a)?, self.arith(b)?);
                if let (Some(x), Some(y)) = (pa.as_constant(), pb.as_constant()) {
                    if let Some(v) = fold_op(p, &x, &y) {
                        return Ok(Poly::constant(v));
                    }
                }
                let (a, b) = (Box::new(pa.to_ast()), Box::new(pb.to_ast()));
                if matches!(p, P::Div(..)) && pb.as_constant().is_some_and(|c| c.is_one()) {
                    return Ok(pa);
                }
                Poly::atom(match p {
                    P::Div(..) => P::Div(a, b),
                    P::Mod(..) => P::Mod(a, b),
                    _ => P::Pow(a, b),
                })
            }
            other => {
                let n = self.any(other)?;
                if n.is_boolean() {
                    return Err(type_error("boolean used as a number", other));
                }
                if n.is_arithmetic() {
                    Poly::of_normalized(&n)
                } else {
                    Poly::atom(n)
                }
            }
        })
    }
}

fn fold_op(op: &PredicateAst, x: &BigInt, y: &BigInt) -> Option<BigInt> {
    match op {
        P::Div(..) if !y.is_zero() => Some(x / y),
        P::Mod(..) if !y.is_zero() => Some(x % y),
        P::Pow(..) => {
            let e = y.to_u32().filter(|e| *e <= 1024)?;
            Some(num_traits::pow(x.clone(), e as usize))
        }
        _ => None,
    }
}

type Builder = fn(PredicateAst, PredicateAst) -> PredicateAst;

fn safe_math(op: &str) -> Option<Builder> {
    Some(match op {
        "add" => |a, b| P::Add(vec![a, b]),
        "sub" => |a, b| P::Sub(Box::new(a), Box::new(b)),
        "mul" => |a, b| P::Mul(vec![a, b]),
        "div" => |a, b| P::Div(Box::new(a), Box::new(b)),
        "mod" => |a, b| P::Mod(Box::new(a), Box::new(b)),
        _ => return None,
    })
}

fn member(base: PredicateAst, m: &str) -> PredicateAst {
    P::Member(Box::new(base), m.to_string())
}

fn negate(n: PredicateAst) -> PredicateAst {
    match n {
        P::Bool(b) => P::Bool(!b),
        P::Not(x) => *x,
        P::Cmp(Rel::Lt, a, b) => mk_cmp(Rel::Le, *b, *a),
        P::Cmp(Rel::Le, a, b) => mk_cmp(Rel::Lt, *b, *a),
        P::Cmp(Rel::Eq, a, b) => mk_cmp(Rel::Ne, *a, *b),
        P::Cmp(Rel::Ne, a, b) => mk_cmp(Rel::Eq, *a, *b),
        other => P::Not(Box::new(other)),
    }
}

fn mk_cmp(rel: Rel, a: PredicateAst, b: PredicateAst) -> PredicateAst {
    match rel {
        Rel::Gt => return mk_cmp(Rel::Lt, b, a),
        Rel::Ge => return mk_cmp(Rel::Le, b, a),
        _ => {}
    }
    if let (P::Int(x), P::Int(y)) = (&a, &b) {
        return P::Bool(match rel {
            Rel::Lt => x < y,
            Rel::Le => x <= y,
            Rel::Eq => x == y,
            _ => x != y,
        });
    }
    if matches!(rel, Rel::Eq | Rel::Ne) {
        let flip = rel == Rel::Ne;
        match (&a, &b) {
            (P::Bool(v), other) | (other, P::Bool(v)) => {
                let keep = *v != flip;
                return if keep { other.clone() } else { negate(other.clone()) };
            }
            _ => {}
        }
    }
    if a == b {
        return P::Bool(matches!(rel, Rel::Le | Rel::Eq));
    }
    let (a, b) = if matches!(rel, Rel::Eq | Rel::Ne) && b < a { (b, a) } else { (a, b) };
    P::Cmp(rel, Box::new(a), Box::new(b))
}

fn mk_junction(xs: Vec<PredicateAst>, is_and: bool) -> PredicateAst {
    let mut out = Vec::new();
    for x in xs {
        match x {
            P::And(inner) if is_and => out.extend(inner),
            P::Or(inner) if !is_and => out.extend(inner),
            P::Bool(b) if b == is_and => {}
            P::Bool(_) => return P::Bool(!is_and),
            other => out.push(other),
        }
    }
    out.sort();
    out.dedup();
    match out.len() {
        0 => P::Bool(is_and),
        1 => out.pop().unwrap(),
        _ if is_and => P::And(out),
        _ => P::Or(out),
    }
}

fn mk_and(xs: Vec<PredicateAst>) -> PredicateAst {
    mk_junction(xs, true)
}

fn mk_or(xs: Vec<PredicateAst>) -> PredicateAst {
    mk_junction(xs, false)
}

impl PredicateAst {
    fn write(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.prec() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            P::Bool(b) => write!(f, "{b}")?,
            P::Int(v) => write!(f, "{v}")?,
            P::Ident(s) | P::Opaque(s) => f.write_str(s)?,
            P::Member(b, m) => {
                b.write(f, 9)?;
                write!(f, ".{m}")?;
            }
            P::Index(b, i) => {
                b.write(f, 9)?;
                f.write_str("[")?;
                i.write(f, 0)?;
                f.write_str("]")?;
            }
            P::Call(c, args) => {
                c.write(f, 9)?;
                f.write_str("(")?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    a.write(f, 0)?;
                }
                f.write_str(")")?;
            }
            P::Not(x) => {
                f.write_str("!")?;
                x.write(f, 8)?;
            }
            P::Neg(x) => {
                f.write_str("-")?;
                x.write(f, 8)?;
            }
            P::And(xs) => join(f, xs, " && ", 3)?,
            P::Or(xs) => join(f, xs, " || ", 2)?,
            P::Mul(xs) => join(f, xs, " * ", 7)?,
            P::Add(xs) => {
                for (k, x) in xs.iter().enumerate() {
                    match (k, negated_term(x)) {
                        (0, _) => x.write(f, 5)?,
                        (_, Some(pos)) => {
                            f.write_str(" - ")?;
                            pos.write(f, 6)?;
                        }
                        (_, None) => {
                            f.write_str(" + ")?;
                            x.write(f, 6)?;
                        }
                    }
                }
            }
            P::Sub(a, b) => binary(f, a, " - ", b, 5, 6)?,
            P::Div(a, b) => binary(f, a, " / ", b, 6, 7)?,
            P::Mod(a, b) => binary(f, a, " % ", b, 6, 7)?,
            P::Pow(a, b) => binary(f, a, " ** ", b, 8, 7)?,
            P::Cmp(rel, a, b) => {
                let side = if matches!(rel, Rel::Eq | Rel::Ne) { 4 } else { 5 };
                a.write(f, side)?;
                write!(f, " {} ", rel.symbol())?;
                b.write(f, side)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// The positive form of a negative-coefficient term, for ` - ` printing.
fn negated_term(x: &PredicateAst) -> Option<PredicateAst> {
    match x {
        P::Int(v) if v.is_negative() => Some(P::Int(-v)),
        P::Mul(fs) => match fs.first() {
            Some(P::Int(c)) if c.is_negative() => {
                let mut rest: Vec<PredicateAst> = Vec::new();
                if !(-c).is_one() {
                    rest.push(P::Int(-c));
                }
                rest.extend(fs[1..].iter().cloned());
                Some(if rest.len() == 1 { rest.pop().unwrap() } else { P::Mul(rest) })
            }
            _ => None,
        },
        _ => None,
    }
}

fn join(f: &mut fmt::Formatter<'_>, xs: &[PredicateAst], sep: &str, min: u8) -> fmt::Result {
    for (k, x) in xs.iter().enumerate() {
        if k > 0 {
            f.write_str(sep)?;
        }
        x.write(f, min)?;
    }
    Ok(())
}

fn binary(
    f: &mut fmt::Formatter<'_>,
    a: &PredicateAst,
    op: &str,
    b: &PredicateAst,
    lmin: u8,
    rmin: u8,
) -> fmt::Result {
    a.write(f, lmin)?;
    f.write_str(op)?;
    b.write(f, rmin)
}

impl fmt::Display for PredicateAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(s: &str) -> String {
        normalize(&PredicateAst::parse(s).unwrap(), &TypeEnv::default()).unwrap().to_string()
    }

    #[test]
    fn literals() {
        assert_eq!(number_value("1e18", None), Some(BigInt::from(10u64.pow(18))));
        assert_eq!(number_value("2.5", Some("ether")), Some(BigInt::from(2_500_000_000_000_000_000u64)));
        assert_eq!(number_value("1_000", None), Some(BigInt::from(1000)));
        assert_eq!(number_value("0x0", None), Some(BigInt::zero()));
        assert_eq!(number_value("0.5", None), None);
        assert_eq!(number_value("1", Some("days")), Some(BigInt::from(86_400)));
    }

    #[test]
    fn canonical_text() {
        assert_eq!(norm("x > 0"), "0 < x");
        assert_eq!(norm("a.add(b) >= a"), "a <= a + b");
        assert_eq!(norm("msg.value>=((cost*_mintAmount)-(cost*1))"), norm("msg.value>=(cost*(_mintAmount-1))"));
        assert_eq!(normalize_plain(&PredicateAst::parse("cost * (n - 1)").unwrap()).unwrap().to_string(), "cost * n - cost");
        assert_eq!(norm("!(a < b)"), "b <= a");
        assert_eq!(norm("!!flag"), "flag");
        assert_eq!(norm("flag == false"), "!flag");
        assert_eq!(norm("b && a && b"), "a && b");
        assert_eq!(norm("1 + 2 > 2"), "true");
        assert_eq!(norm("now >= t"), "t <= block.timestamp");
        assert_eq!(norm("x / 1 == x"), "true");
        assert_eq!(norm("10**18 == 1e18"), "true");
    }

    #[test]
    fn type_errors() {
        let env = TypeEnv::default();
        for bad in ["x + 1", "(a < b) + 1", "!(x + 1)", "true < 1"] {
            assert!(matches!(normalize(&PredicateAst::parse(bad).unwrap(), &env), Err(EquivError::Type(_))), "{bad}");
        }
    }
}
