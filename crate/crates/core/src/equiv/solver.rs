use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::time::Instant;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::predicate::{Poly, PredicateAst, Rel};
use super::{EquivConfig, Ty, TypeEnv};

/// Outcome of an implication check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Implication {
    Proven,
    /// A model of `p && !q`; `None` when it came from the external solver.
    Disproven { witness: Option<BTreeMap<String, String>> },
    Unknown { reason: String },
}

impl Implication {
    pub fn is_proven(&self) -> bool {
        matches!(self, Implication::Proven)
    }

    fn unknown(reason: impl Into<String>) -> Self {
        Implication::Unknown { reason: reason.into() }
    }
}

const MAX_CUBES: usize = 1 << 14;
const MAX_ROWS: usize = 4_000;
/// Ranges up to this width are searched exhaustively.
const FULL_RANGE: u32 = 256;
/// Values tried at each open end of a wider range.
const WINDOW: i64 = 48;

/// `sum(coeffs[i] * x_i) + c <= 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Row {
    pub coeffs: BTreeMap<usize, BigInt>,
    pub c: BigInt,
}

impl Row {
    fn negated_strict(&self) -> Row {
        // not (r <= 0)  <=>  -r + 1 <= 0
        Row {
            coeffs: self.coeffs.iter().map(|(k, v)| (*k, -v)).collect(),
            c: -&self.c + 1,
        }
    }

    /// Divides by the coefficient gcd, rounding the bound toward feasibility
    /// of integer points only.
    fn tighten(mut self) -> Row {
        let g = self.coeffs.values().fold(BigInt::zero(), |g, v| g.gcd(v));
        if g > BigInt::one() {
            for v in self.coeffs.values_mut() {
                *v /= &g;
            }
            self.c = self.c.div_ceil(&g);
        }
        self
    }
}

#[derive(Debug, Clone)]
pub(crate) enum F {
    Const(bool),
    Bool(usize, bool),
    Le(Row),
    And(Vec<F>),
    Or(Vec<F>),
}

#[derive(Debug, Clone)]
pub(crate) enum VarKind {
    Bool,
    Int,
    /// Product of the listed int variables.
    Monomial(Vec<usize>),
    /// Wraparound quotient of bounded mode.
    Wrap,
}

#[derive(Debug, Clone)]
pub(crate) struct Var {
    pub name: String,
    pub kind: VarKind,
    pub lo: Option<BigInt>,
    pub hi: Option<BigInt>,
}

pub(crate) struct Builder<'a> {
    env: &'a TypeEnv,
    bounded: bool,
    pub vars: Vec<Var>,
    index: HashMap<(String, bool), usize>,
    /// Side constraints defining wraparound quotients.
    pub defs: Vec<F>,
}

fn two_pow(n: u32) -> BigInt {
    BigInt::one() << n
}

impl<'a> Builder<'a> {
    pub fn new(env: &'a TypeEnv, bounded: bool) -> Self {
        Self {
            env,
            bounded,
            vars: Vec::new(),
            index: HashMap::new(),
            defs: Vec::new(),
        }
    }

    fn bool_var(&mut self, name: String) -> usize {
        if let Some(&i) = self.index.get(&(name.clone(), true)) {
            return i;
        }
        self.vars.push(Var {
            name: name.clone(),
            kind: VarKind::Bool,
            lo: None,
            hi: None,
        });
        self.index.insert((name, true), self.vars.len() - 1);
        self.vars.len() - 1
    }

    fn int_var(&mut self, name: String, kind: VarKind, ty: Ty) -> usize {
        if let Some(&i) = self.index.get(&(name.clone(), false)) {
            return i;
        }
        let (lo, hi) = match self.env.bounds_of(&name) {
            Some((lo, hi)) => (Some(lo.clone()), Some(hi.clone())),
            None => self.type_range(ty),
        };
        self.vars.push(Var {
            name: name.clone(),
            kind,
            lo,
            hi,
        });
        self.index.insert((name, false), self.vars.len() - 1);
        self.vars.len() - 1
    }

    fn type_range(&self, ty: Ty) -> (Option<BigInt>, Option<BigInt>) {
        let b = self.bounded;
        match ty {
            Ty::Int => (b.then(|| -two_pow(255)), b.then(|| two_pow(255) - 1)),
            Ty::Bool => (Some(BigInt::zero()), Some(BigInt::one())),
            Ty::Address => (Some(BigInt::zero()), b.then(|| two_pow(160) - 1)),
            _ => (Some(BigInt::zero()), b.then(|| two_pow(256) - 1)),
        }
    }

    /// Linear form of an arithmetic tree: coefficients per variable and a constant.
    fn linear(&mut self, n: &PredicateAst) -> (BTreeMap<usize, BigInt>, BigInt) {
        let poly = Poly::of_normalized(n);
        let mut coeffs: BTreeMap<usize, BigInt> = BTreeMap::new();
        let mut c = BigInt::zero();
        for (mono, k) in &poly.0 {
            match mono.len() {
                0 => c += k,
                1 => {
                    let name = mono[0].to_string();
                    let ty = self.env.ty(&name);
                    let v = self.int_var(name, VarKind::Int, ty);
                    *coeffs.entry(v).or_default() += k;
                }
                _ => {
                    let factors: Vec<usize> = mono
                        .iter()
                        .map(|a| {
                            let name = a.to_string();
                            let ty = self.env.ty(&name);
                            self.int_var(name, VarKind::Int, ty)
                        })
                        .collect();
                    let nonneg = factors.iter().all(|f| self.vars[*f].lo.as_ref().is_some_and(|l| !l.is_negative()));
                    let name = PredicateAst::Mul(mono.clone()).to_string();
                    let ty = if nonneg { Ty::Uint } else { Ty::Int };
                    let fresh = !self.index.contains_key(&(name.clone(), false));
                    let v = self.int_var(name, VarKind::Monomial(factors.clone()), ty);
                    if fresh && nonneg {
                        self.product_axioms(v, &factors);
                    }
                    *coeffs.entry(v).or_default() += k;
                }
            }
        }
        if self.bounded && (poly.0.len() > 1 || poly.0.values().any(|k| !k.is_one())) {
            // value = expr - 2^256 * q, with 0 <= value < 2^256
            let q = self.vars.len();
            self.vars.push(Var {
                name: format!("wrap#{q}"),
                kind: VarKind::Wrap,
                lo: None,
                hi: None,
            });
            let m = two_pow(256);
            coeffs.insert(q, -&m);
            let lower = Row {
                coeffs: coeffs.iter().map(|(k, v)| (*k, -v)).collect(),
                c: -&c,
            };
            let upper = Row {
                coeffs: coeffs.clone(),
                c: &c - (&m - 1),
            };
            self.defs.push(F::Le(lower));
            self.defs.push(F::Le(upper));
        }
        coeffs.retain(|_, v| !v.is_zero());
        (coeffs, c)
    }

    /// Over the naturals a nonzero product has every factor at least 1 and
    /// is at least as large as each factor.
    fn product_axioms(&mut self, m: usize, factors: &[usize]) {
        let one = BigInt::one;
        let zero = || Row {
            coeffs: BTreeMap::from([(m, one())]),
            c: BigInt::zero(),
        };
        for &f in factors {
            let f_positive = Row {
                coeffs: BTreeMap::from([(f, -one())]),
                c: one(),
            };
            let dominates = Row {
                coeffs: BTreeMap::from([(f, one()), (m, -one())]),
                c: BigInt::zero(),
            };
            self.defs.push(F::Or(vec![F::Le(zero()), F::Le(f_positive)]));
            if !factors.iter().all(|g| *g == f) {
                self.defs.push(F::Or(vec![F::Le(zero()), F::Le(dominates)]));
            }
        }
    }

    /// Formula for `n` (or its negation when `positive` is false) in
    /// negation normal form.
    pub fn formula(&mut self, n: &PredicateAst, positive: bool) -> F {
        use PredicateAst as P;
        match n {
            P::Bool(b) => F::Const(*b == positive),
            P::Not(x) => self.formula(x, !positive),
            P::And(xs) | P::Or(xs) => {
                let parts = xs.iter().map(|x| self.formula(x, positive)).collect();
                if matches!(n, P::And(_)) == positive {
                    F::And(parts)
                } else {
                    F::Or(parts)
                }
            }
            P::Cmp(rel, a, b) if matches!(rel, Rel::Eq | Rel::Ne) && (a.is_boolean() || b.is_boolean()) => {
                let same = (*rel == Rel::Eq) == positive;
                let (fa, na) = (self.formula(a, true), self.formula(a, false));
                let (fb, nb) = (self.formula(b, true), self.formula(b, false));
                if same {
                    F::Or(vec![F::And(vec![fa, fb]), F::And(vec![na, nb])])
                } else {
                    F::Or(vec![F::And(vec![fa, nb]), F::And(vec![na, fb])])
                }
            }
            P::Cmp(rel, a, b) => {
                let (ca, ka) = self.linear(a);
                let (cb, kb) = self.linear(b);
                let mut d = ca;
                for (v, k) in cb {
                    *d.entry(v).or_default() -= k;
                }
                d.retain(|_, v| !v.is_zero());
                let diff = Row { coeffs: d, c: ka - kb };
                let neg = |r: &Row| Row {
                    coeffs: r.coeffs.iter().map(|(k, v)| (*k, -v)).collect(),
                    c: -&r.c,
                };
                let le = |r: Row| F::Le(r);
                // a - b rel 0
                let f = match rel {
                    Rel::Le => le(diff.clone()),
                    Rel::Lt => le(Row { c: &diff.c + 1, ..diff.clone() }),
                    Rel::Ge => le(neg(&diff)),
                    Rel::Gt => le(Row { c: -&diff.c + 1, ..neg(&diff) }),
                    Rel::Eq => F::And(vec![le(diff.clone()), le(neg(&diff))]),
                    Rel::Ne => F::Or(vec![
                        le(Row { c: &diff.c + 1, ..diff.clone() }),
                        le(Row { c: -&diff.c + 1, ..neg(&diff) }),
                    ]),
                };
                if positive {
                    f
                } else {
                    negate(f)
                }
            }
            other => {
                let v = self.bool_var(other.to_string());
                F::Bool(v, positive)
            }
        }
    }
}

fn negate(f: F) -> F {
    match f {
        F::Const(b) => F::Const(!b),
        F::Bool(v, p) => F::Bool(v, !p),
        F::Le(r) => F::Le(r.negated_strict()),
        F::And(xs) => F::Or(xs.into_iter().map(negate).collect()),
        F::Or(xs) => F::And(xs.into_iter().map(negate).collect()),
    }
}

#[derive(Debug, Clone, Default)]
struct Cube {
    bools: BTreeMap<usize, bool>,
    rows: Vec<Row>,
}

impl Cube {
    fn merge(&self, other: &Cube) -> Option<Cube> {
        let mut out = self.clone();
        for (v, p) in &other.bools {
            if out.bools.insert(*v, *p).is_some_and(|old| old != *p) {
                return None;
            }
        }
        out.rows.extend(other.rows.iter().cloned());
        Some(out)
    }
}

fn dnf(f: &F, deadline: Instant) -> Result<Vec<Cube>, String> {
    if Instant::now() > deadline {
        return Err("timeout".into());
    }
    Ok(match f {
        F::Const(true) => vec![Cube::default()],
        F::Const(false) => Vec::new(),
        F::Bool(v, p) => vec![Cube {
            bools: BTreeMap::from([(*v, *p)]),
            rows: Vec::new(),
        }],
        F::Le(r) => vec![Cube {
            bools: BTreeMap::new(),
            rows: vec![r.clone()],
        }],
        F::Or(xs) => {
            let mut out = Vec::new();
            for x in xs {
                out.extend(dnf(x, deadline)?);
                if out.len() > MAX_CUBES {
                    return Err("formula too large".into());
                }
            }
            out
        }
        F::And(xs) => {
            let mut acc = vec![Cube::default()];
            for x in xs {
                let part = dnf(x, deadline)?;
                let mut next = Vec::new();
                for a in &acc {
                    for b in &part {
                        if let Some(m) = a.merge(b) {
                            next.push(m);
                        }
                    }
                }
                if next.len() > MAX_CUBES {
                    return Err("formula too large".into());
                }
                acc = next;
            }
            acc
        }
    })
}

enum Search {
    Sat(BTreeMap<usize, BigInt>),
    Unsat,
    Unknown(String),
}

struct Searcher {
    deadline: Instant,
    budget: usize,
}

enum Projection {
    Range(Option<BigInt>, Option<BigInt>),
    Unsat,
    TooBig,
}

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_ceil(b)
}

/// Drops trivially true rows; `None` on a violated constant row.
fn simplify(rows: impl IntoIterator<Item = Row>) -> Option<Vec<Row>> {
    let mut set = BTreeSet::new();
    for r in rows {
        let r = r.tighten();
        if r.coeffs.is_empty() {
            if r.c.is_positive() {
                return None;
            }
            continue;
        }
        set.insert(r);
    }
    Some(set.into_iter().collect())
}

/// Fourier-Motzkin elimination of every variable except `keep`.
fn project(rows: &[Row], keep: usize, deadline: Instant) -> Projection {
    let Some(mut rows) = simplify(rows.iter().cloned()) else {
        return Projection::Unsat;
    };
    loop {
        if Instant::now() > deadline {
            return Projection::TooBig;
        }
        let vars: BTreeSet<usize> = rows.iter().flat_map(|r| r.coeffs.keys().copied()).filter(|v| *v != keep).collect();
        let Some(&x) = vars.iter().min_by_key(|v| {
            let pos = rows.iter().filter(|r| r.coeffs.get(v).is_some_and(|c| c.is_positive())).count();
            let neg = rows.iter().filter(|r| r.coeffs.get(v).is_some_and(|c| c.is_negative())).count();
            pos * neg
        }) else {
            break;
        };
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for r in rows {
            match r.coeffs.get(&x).map(|c| c.sign()) {
                Some(num_bigint::Sign::Plus) => pos.push(r),
                Some(num_bigint::Sign::Minus) => neg.push(r),
                _ => rest.push(r),
            }
        }
        if pos.len() * neg.len() + rest.len() > MAX_ROWS {
            return Projection::TooBig;
        }
        for p in &pos {
            for n in &neg {
                let a = &p.coeffs[&x];
                let b = -&n.coeffs[&x];
                let mut coeffs: BTreeMap<usize, BigInt> = BTreeMap::new();
                for (k, v) in &p.coeffs {
                    *coeffs.entry(*k).or_default() += v * &b;
                }
                for (k, v) in &n.coeffs {
                    *coeffs.entry(*k).or_default() += v * a;
                }
                coeffs.retain(|_, v| !v.is_zero());
                rest.push(Row {
                    coeffs,
                    c: &p.c * &b + &n.c * a,
                });
            }
        }
        match simplify(rest) {
            Some(r) => rows = r,
            None => return Projection::Unsat,
        }
    }
    let (mut lo, mut hi): (Option<BigInt>, Option<BigInt>) = (None, None);
    for r in &rows {
        let a = &r.coeffs[&keep];
        if a.is_positive() {
            let b = floor_div(&-&r.c, a);
            hi = Some(hi.map_or(b.clone(), |h| h.min(b)));
        } else {
            let b = ceil_div(&r.c, &-a);
            lo = Some(lo.map_or(b.clone(), |l| l.max(b)));
        }
    }
    if let (Some(l), Some(h)) = (&lo, &hi) {
        if l > h {
            return Projection::Unsat;
        }
    }
    Projection::Range(lo, hi)
}

fn substitute(rows: &[Row], x: usize, v: &BigInt) -> Vec<Row> {
    rows.iter()
        .map(|r| {
            let mut r = r.clone();
            if let Some(a) = r.coeffs.remove(&x) {
                r.c += a * v;
            }
            r
        })
        .collect()
}

impl Searcher {
    fn run(&mut self, rows: Vec<Row>) -> Search {
        let Some(rows) = simplify(rows) else {
            return Search::Unsat;
        };
        let vars: BTreeSet<usize> = rows.iter().flat_map(|r| r.coeffs.keys().copied()).collect();
        let Some(&x) = vars.iter().next() else {
            return Search::Sat(BTreeMap::new());
        };
        if Instant::now() > self.deadline {
            return Search::Unknown("timeout".into());
        }
        if self.budget == 0 {
            return Search::Unknown("search budget exhausted".into());
        }
        self.budget -= 1;
        let (lo, hi) = match project(&rows, x, self.deadline) {
            Projection::Unsat => return Search::Unsat,
            Projection::TooBig => return Search::Unknown("elimination too large".into()),
            Projection::Range(lo, hi) => (lo, hi),
        };
        let (candidates, complete) = candidates(lo.as_ref(), hi.as_ref());
        let mut unknown = (!complete).then(|| "search window exceeded".to_string());
        for v in candidates {
            match self.run(substitute(&rows, x, &v)) {
                Search::Sat(mut m) => {
                    m.insert(x, v);
                    return Search::Sat(m);
                }
                Search::Unsat => {}
                Search::Unknown(why) => {
                    unknown.get_or_insert(why);
                }
            }
        }
        match unknown {
            Some(why) => Search::Unknown(why),
            None => Search::Unsat,
        }
    }
}

fn candidates(lo: Option<&BigInt>, hi: Option<&BigInt>) -> (Vec<BigInt>, bool) {
    fn span(a: &BigInt, n: i64) -> Vec<BigInt> {
        (0..n).map(|i| a + i).collect()
    }
    match (lo, hi) {
        (Some(l), Some(h)) if h - l < BigInt::from(FULL_RANGE) => (span(l, (h - l + 1i32).try_into().unwrap_or(0)), true),
        (Some(l), Some(h)) => {
            let mut v = span(l, WINDOW);
            v.extend(span(&(h - WINDOW + 1i32), WINDOW));
            (v, false)
        }
        (Some(l), None) => (span(l, WINDOW), false),
        (None, Some(h)) => (span(&(h - WINDOW + 1i32), WINDOW).into_iter().rev().collect(), false),
        (None, None) => {
            let mut v: Vec<BigInt> = Vec::new();
            for i in 0..WINDOW / 2 {
                v.push(BigInt::from(i));
                v.push(BigInt::from(-i - 1));
            }
            (v, false)
        }
    }
}

fn bound_rows(vars: &[Var], used: &BTreeSet<usize>) -> Vec<Row> {
    let mut rows = Vec::new();
    for &v in used {
        let var = &vars[v];
        if let Some(lo) = &var.lo {
            rows.push(Row {
                coeffs: BTreeMap::from([(v, -BigInt::one())]),
                c: lo.clone(),
            });
        }
        if let Some(hi) = &var.hi {
            rows.push(Row {
                coeffs: BTreeMap::from([(v, BigInt::one())]),
                c: -hi,
            });
        }
    }
    rows
}

fn within(var: &Var, v: &BigInt) -> bool {
    var.lo.as_ref().is_none_or(|l| v >= l) && var.hi.as_ref().is_none_or(|h| v <= h)
}

/// Chooses values for factors that only occur inside products so that each
/// product variable equals the product of its factors.
fn realize(vars: &[Var], assign: &mut BTreeMap<usize, BigInt>) -> bool {
    let monos: Vec<(usize, Vec<usize>)> = assign
        .keys()
        .filter_map(|m| match &vars[*m].kind {
            VarKind::Monomial(fs) => Some((*m, fs.clone())),
            _ => None,
        })
        .collect();
    for (m, factors) in &monos {
        let target = assign[m].clone();
        let known: BigInt = factors.iter().filter_map(|f| assign.get(f)).product();
        let free: Vec<usize> = factors.iter().copied().filter(|f| !assign.contains_key(f)).collect();
        let Some((&first, others)) = free.split_first() else {
            continue;
        };
        let value = if known.is_zero() {
            if !target.is_zero() {
                return false;
            }
            BigInt::zero()
        } else if (&target % &known).is_zero() {
            &target / &known
        } else {
            return false;
        };
        assign.insert(first, value);
        for f in others {
            assign.insert(*f, BigInt::one());
        }
    }
    monos.iter().all(|(m, factors)| {
        let product: BigInt = factors.iter().map(|f| assign[f].clone()).product();
        product == assign[m]
    }) && assign.iter().all(|(v, x)| within(&vars[*v], x))
}

pub(crate) fn check(p: &PredicateAst, q: &PredicateAst, env: &TypeEnv, cfg: &EquivConfig) -> (Implication, Option<String>) {
    let deadline = Instant::now() + cfg.timeout;
    let mut b = Builder::new(env, cfg.bounded);
    let fp = b.formula(p, true);
    let fq = b.formula(q, false);
    let mut parts = vec![fp, fq];
    parts.append(&mut b.defs);
    let f = F::And(parts);
    let script = cfg.bridge.as_ref().map(|_| smt_script(&f, &b.vars));
    let outcome = decide(&f, &b.vars, deadline, cfg.node_budget);
    (outcome, script)
}

fn decide(f: &F, vars: &[Var], deadline: Instant, budget: usize) -> Implication {
    let cubes = match dnf(f, deadline) {
        Ok(c) => c,
        Err(why) => return Implication::unknown(why),
    };
    let mut searcher = Searcher { deadline, budget };
    let mut unknown: Option<String> = None;
    for cube in cubes {
        let used: BTreeSet<usize> = cube.rows.iter().flat_map(|r| r.coeffs.keys().copied()).collect();
        let mut rows = cube.rows.clone();
        rows.extend(bound_rows(vars, &used));
        match searcher.run(rows) {
            Search::Unsat => {}
            Search::Unknown(why) => {
                unknown.get_or_insert(why);
            }
            Search::Sat(mut assign) => {
                for v in &used {
                    assign.entry(*v).or_insert_with(|| vars[*v].lo.clone().unwrap_or_default());
                }
                if !realize(vars, &mut assign) {
                    unknown.get_or_insert_with(|| "model not realizable over products".into());
                    continue;
                }
                let mut witness: BTreeMap<String, String> = assign
                    .iter()
                    .filter(|(v, _)| matches!(vars[**v].kind, VarKind::Int))
                    .map(|(v, x)| (vars[*v].name.clone(), x.to_string()))
                    .collect();
                for (v, p) in &cube.bools {
                    witness.insert(vars[*v].name.clone(), p.to_string());
                }
                return Implication::Disproven { witness: Some(witness) };
            }
        }
    }
    match unknown {
        Some(reason) => Implication::Unknown { reason },
        None => Implication::Proven,
    }
}

fn smt_int(v: &BigInt) -> String {
    if v.is_negative() {
        format!("(- {})", -v)
    } else {
        v.to_string()
    }
}

fn smt_formula(f: &F, out: &mut String) {
    match f {
        F::Const(b) => out.push_str(if *b { "true" } else { "false" }),
        F::Bool(v, true) => {
            let _ = write!(out, "b{v}");
        }
        F::Bool(v, false) => {
            let _ = write!(out, "(not b{v})");
        }
        F::Le(r) => {
            out.push_str("(<= (+");
            for (v, k) in &r.coeffs {
                let _ = write!(out, " (* {} x{v})", smt_int(k));
            }
            let _ = write!(out, " {}) 0)", smt_int(&r.c));
        }
        F::And(xs) | F::Or(xs) => {
            out.push_str(if matches!(f, F::And(_)) { "(and true" } else { "(or false" });
            for x in xs {
                out.push(' ');
                smt_formula(x, out);
            }
            out.push(')');
        }
    }
}

/// SMT-LIB v2 query whose unsatisfiability proves the implication.
fn smt_script(f: &F, vars: &[Var]) -> String {
    let mut s = String::from("(set-logic ALL)\n");
    for (i, v) in vars.iter().enumerate() {
        let name = v.name.replace('\n', " ");
        match &v.kind {
            VarKind::Bool => {
                let _ = writeln!(s, "(declare-const b{i} Bool) ; {name}");
            }
            _ => {
                let _ = writeln!(s, "(declare-const x{i} Int) ; {name}");
            }
        }
    }
    for (i, v) in vars.iter().enumerate() {
        if let Some(lo) = &v.lo {
            let _ = writeln!(s, "(assert (>= x{i} {}))", smt_int(lo));
        }
        if let Some(hi) = &v.hi {
            let _ = writeln!(s, "(assert (<= x{i} {}))", smt_int(hi));
        }
        if let VarKind::Monomial(fs) = &v.kind {
            let factors: Vec<String> = fs.iter().map(|f| format!("x{f}")).collect();
            let _ = writeln!(s, "(assert (= x{i} (* {})))", factors.join(" "));
        }
    }
    s.push_str("(assert ");
    smt_formula(f, &mut s);
    s.push_str(")\n(check-sat)\n");
    s
}
