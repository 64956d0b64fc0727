mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::{fixture, read_fixture};
use flames_core::ast::Ast;
use flames_core::equiv::{
    classify, implies, seed_aliases, EquivConfig, EquivError, Implication, PredicateAst, SmtBridge, Ty, TypeEnv,
    Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Deserialize)]
struct Pair {
    id: String,
    gt: String,
    syn: String,
    expected: Verdict,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

fn table() -> Vec<Pair> {
    read_fixture("equiv/verdict_pairs.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn env_for(p: &Pair) -> TypeEnv {
    let mut env = TypeEnv::new();
    for (from, to) in &p.aliases {
        env.alias(from, to).unwrap();
    }
    env
}

fn pred(s: &str) -> PredicateAst {
    PredicateAst::parse(s).unwrap()
}

fn check(p: &str, q: &str) -> Implication {
    implies(&pred(p), &pred(q), &TypeEnv::new(), &EquivConfig::default()).unwrap()
}

#[test]
fn table_groups_have_five_pairs_each() {
    let started = Instant::now();
    let cfg = EquivConfig::default();
    let mut groups: BTreeMap<&str, usize> = BTreeMap::new();
    let mut wrong = Vec::new();
    let rows = table();
    for p in &rows {
        let c = classify(&p.syn, &p.gt, &env_for(p), &cfg).unwrap();
        let group = match c.verdict {
            Verdict::ExactMatch | Verdict::Equivalent => "equivalent",
            Verdict::SynthesizedStronger => "syn_stronger",
            Verdict::GroundTruthStronger => "gt_stronger",
            Verdict::Inconclusive => "inconclusive",
        };
        *groups.entry(group).or_default() += 1;
        if c.verdict != p.expected {
            wrong.push(format!("{}: {} (expected {})", p.id, c.verdict, p.expected));
        }
    }
    assert!(wrong.is_empty(), "{wrong:?}");
    assert_eq!(groups.values().copied().collect::<Vec<_>>(), [5, 5, 5, 5]);
    assert!(started.elapsed() < Duration::from_secs(60));
}

#[test]
fn getter_alias_is_needed_for_pair_two() {
    let p = table().into_iter().find(|p| p.id == "2").unwrap();
    let without = classify(&p.syn, &p.gt, &TypeEnv::new(), &EquivConfig::default()).unwrap();
    assert_eq!(without.verdict, Verdict::Inconclusive);
    let with = classify(&p.syn, &p.gt, &env_for(&p), &EquivConfig::default()).unwrap();
    assert_eq!(with.verdict, Verdict::Equivalent);
}

#[test]
fn exact_and_normal_form_matches() {
    let env = TypeEnv::new();
    let cfg = EquivConfig::default();
    let c = classify("a > b", "a>b", &env, &cfg).unwrap();
    assert_eq!(c.verdict, Verdict::ExactMatch);
    assert!(c.syn_implies_gt.is_none());
    let c = classify("account==_msgSender()", "msg.sender==account", &env, &cfg).unwrap();
    assert_eq!(c.verdict, Verdict::Equivalent);
    assert_eq!(c.syn_normalized, c.gt_normalized);
}

#[test]
fn guard_is_stronger_than_true() {
    let c = classify(
        "_rec.length == 0||_value <= type(uint256).max/_rec.length",
        "true",
        &TypeEnv::new(),
        &EquivConfig::default(),
    )
    .unwrap();
    assert_eq!(c.verdict, Verdict::SynthesizedStronger);
}

#[test]
fn implication_examples() {
    assert!(check("x > 5", "x > 3").is_proven());
    assert!(check("x == y && y == z", "x == z").is_proven());
    assert!(check("a && b", "a").is_proven());
    assert!(check("2*x == 7", "false").is_proven());
    assert!(check("x < 10 && x > 8", "x == 9").is_proven());
    assert!(check("x >= 1", "x != 0").is_proven());
    assert!(check("x*y > 0", "x > 0").is_proven());
    match check("x > 3", "x > 5") {
        Implication::Disproven { witness: Some(w) } => {
            let x: i64 = w["x"].parse().unwrap();
            assert!(x > 3 && x <= 5, "{w:?}");
        }
        other => panic!("{other:?}"),
    }
    match check("a || b", "a") {
        Implication::Disproven { witness: Some(w) } => assert_eq!(w["a"], "false"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn signed_terms_are_not_assumed_non_negative() {
    let mut env = TypeEnv::new();
    let (p, q) = (pred("true"), pred("x + x >= x"));
    assert!(implies(&p, &q, &env, &EquivConfig::default()).unwrap().is_proven());
    env.declare("x", Ty::Int).unwrap();
    assert!(matches!(implies(&p, &q, &env, &EquivConfig::default()).unwrap(), Implication::Disproven { .. }));
}

#[test]
fn wraparound_only_in_bounded_mode() {
    let env = TypeEnv::new();
    let p = pred("true");
    let q = pred("a + b >= a");
    assert!(implies(&p, &q, &env, &EquivConfig::default()).unwrap().is_proven());
    let bounded = EquivConfig { bounded: true, ..EquivConfig::default() };
    match implies(&p, &q, &env, &bounded).unwrap() {
        Implication::Disproven { witness: Some(w) } => {
            let a: num_bigint::BigInt = w["a"].parse().unwrap();
            let b: num_bigint::BigInt = w["b"].parse().unwrap();
            assert!(a + b >= num_bigint::BigInt::from(1) << 256usize);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn type_and_parse_errors() {
    let env = TypeEnv::new();
    let cfg = EquivConfig::default();
    assert!(matches!(classify("x + 1", "x > 0", &env, &cfg), Err(EquivError::Type(_))));
    assert!(matches!(classify("x >", "x > 0", &env, &cfg), Err(EquivError::Parse { .. })));
}

#[test]
fn aliases_come_from_getters() {
    let ast = Ast::parse(read_fixture("contracts/apemaga.sol")).unwrap();
    let aliases = seed_aliases(&ast);
    assert!(aliases.contains(&("totalSupply()".to_string(), "_totalSupply".to_string())), "{aliases:?}");
    assert!(aliases.contains(&("_msgSender()".to_string(), "msg.sender".to_string())));
    assert!(!aliases.iter().any(|(f, _)| f == "trading()"));
    let env = TypeEnv::from_ast(&ast);
    assert_eq!(env.ty("_totalSupply"), Ty::Uint);
    let c = classify("totalSupply() > 0", "_totalSupply > 0", &env, &EquivConfig::default()).unwrap();
    assert_eq!(c.verdict, Verdict::Equivalent);
}

#[test]
fn properties_on_table_predicates() {
    let cfg = EquivConfig::default();
    for p in table() {
        let env = env_for(&p);
        for s in [&p.syn, &p.gt] {
            let a = pred(s);
            assert!(implies(&a, &a, &env, &cfg).unwrap().is_proven(), "reflexive: {s}");
            let twice = pred(&format!("({s}) && ({s})"));
            assert!(implies(&twice, &a, &env, &cfg).unwrap().is_proven());
            assert!(implies(&a, &twice, &env, &cfg).unwrap().is_proven());
        }
        let (s, g) = (pred(&p.syn), pred(&p.gt));
        let (ns, ng) = (pred(&format!("!({})", p.syn)), pred(&format!("!({})", p.gt)));
        assert_eq!(
            implies(&s, &g, &env, &cfg).unwrap().is_proven(),
            implies(&ng, &ns, &env, &cfg).unwrap().is_proven(),
            "contrapositive of {}",
            p.id
        );
        let forward = classify(&p.syn, &p.gt, &env, &cfg).unwrap().verdict;
        let flipped = classify(&p.gt, &p.syn, &env, &cfg).unwrap().verdict;
        let expected = match forward {
            Verdict::SynthesizedStronger => Verdict::GroundTruthStronger,
            Verdict::GroundTruthStronger => Verdict::SynthesizedStronger,
            other => other,
        };
        assert_eq!(flipped, expected, "swap of {}", p.id);
    }
}

#[test]
fn more_time_never_loses_a_proof() {
    let env = TypeEnv::new();
    let p = pred("x + y <= 10 && x >= 3 && y >= 4");
    let q = pred("x <= 6 && y <= 7");
    let short = EquivConfig { timeout: Duration::from_nanos(1), ..EquivConfig::default() };
    let long = EquivConfig::default();
    let a = implies(&p, &q, &env, &short).unwrap();
    let b = implies(&p, &q, &env, &long).unwrap();
    assert!(b.is_proven());
    assert!(!matches!(a, Implication::Disproven { .. }), "{a:?}");
}

fn fake_solver(answer: &str) -> (tempfile::TempDir, SmtBridge) {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solver");
    let log = dir.path().join("query.smt2");
    std::fs::write(&path, format!("#!/bin/sh\ncat > {}\necho {answer}\n", log.display())).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    (dir, SmtBridge::new(path, Vec::<String>::new()))
}

#[test]
fn external_solver_settles_what_the_builtin_cannot() {
    // Nonlinear: x*x >= x holds over the naturals but is outside the
    // built-in fragment.
    let env = TypeEnv::new();
    let p = pred("true");
    let q = pred("x * x >= x");
    let plain = EquivConfig { node_budget: 50, ..EquivConfig::default() };
    assert!(matches!(implies(&p, &q, &env, &plain).unwrap(), Implication::Unknown { .. }));

    let (dir, bridge) = fake_solver("unsat");
    let cfg = EquivConfig { bridge: Some(bridge), ..plain.clone() };
    assert_eq!(implies(&p, &q, &env, &cfg).unwrap(), Implication::Proven);
    let query = std::fs::read_to_string(dir.path().join("query.smt2")).unwrap();
    assert!(query.starts_with("(set-logic ALL)"));
    assert!(query.contains("(check-sat)"));
    assert!(query.contains("(* x0 x0)") || query.contains("(* x1 x1)"), "{query}");

    let (_dir, bridge) = fake_solver("sat");
    let cfg = EquivConfig { bridge: Some(bridge), ..plain.clone() };
    assert_eq!(implies(&p, &q, &env, &cfg).unwrap(), Implication::Disproven { witness: None });

    let cfg = EquivConfig { bridge: Some(SmtBridge::new(fixture("no-such-solver"), ["-in"])), ..plain };
    assert!(matches!(implies(&p, &q, &env, &cfg).unwrap(), Implication::Unknown { .. }));
}

/// Random linear formula over up to three variables, evaluated directly.
#[derive(Debug, Clone)]
enum Gen {
    Atom { coeffs: [i64; 3], rel: &'static str, rhs: i64 },
    Not(Box<Gen>),
    And(Box<Gen>, Box<Gen>),
    Or(Box<Gen>, Box<Gen>),
}

const NAMES: [&str; 3] = ["x", "y", "z"];
const RELS: [&str; 6] = ["<", "<=", ">", ">=", "==", "!="];

impl Gen {
    fn random(rng: &mut ChaCha8Rng, vars: usize, depth: u32) -> Gen {
        if depth == 0 || rng.gen_bool(0.4) {
            let mut coeffs = [0; 3];
            for c in coeffs.iter_mut().take(vars) {
                *c = rng.gen_range(-8..=8);
            }
            return Gen::Atom {
                coeffs,
                rel: RELS[rng.gen_range(0..RELS.len())],
                rhs: rng.gen_range(-64..=256),
            };
        }
        let a = Box::new(Gen::random(rng, vars, depth - 1));
        match rng.gen_range(0..3) {
            0 => Gen::Not(a),
            1 => Gen::And(a, Box::new(Gen::random(rng, vars, depth - 1))),
            _ => Gen::Or(a, Box::new(Gen::random(rng, vars, depth - 1))),
        }
    }

    fn text(&self) -> String {
        match self {
            Gen::Atom { coeffs, rel, rhs } => {
                let mut s = String::from("0");
                for (c, n) in coeffs.iter().zip(NAMES) {
                    if *c < 0 {
                        s += &format!(" - {}*{n}", -c);
                    } else {
                        s += &format!(" + {c}*{n}");
                    }
                }
                let rhs = if *rhs < 0 { format!("0 - {}", -rhs) } else { rhs.to_string() };
                format!("{s} {rel} {rhs}")
            }
            Gen::Not(a) => format!("!({})", a.text()),
            Gen::And(a, b) => format!("({}) && ({})", a.text(), b.text()),
            Gen::Or(a, b) => format!("({}) || ({})", a.text(), b.text()),
        }
    }

    fn eval(&self, v: &[i64; 3]) -> bool {
        match self {
            Gen::Atom { coeffs, rel, rhs } => {
                let l: i64 = coeffs.iter().zip(v).map(|(c, x)| c * x).sum();
                match *rel {
                    "<" => l < *rhs,
                    "<=" => l <= *rhs,
                    ">" => l > *rhs,
                    ">=" => l >= *rhs,
                    "==" => l == *rhs,
                    _ => l != *rhs,
                }
            }
            Gen::Not(a) => !a.eval(v),
            Gen::And(a, b) => a.eval(v) && b.eval(v),
            Gen::Or(a, b) => a.eval(v) || b.eval(v),
        }
    }
}

fn brute_force_implies(p: &Gen, q: &Gen, vars: usize) -> bool {
    let top = |i: usize| if i < vars { 63 } else { 0 };
    for x in 0..=top(0) {
        for y in 0..=top(1) {
            for z in 0..=top(2) {
                let v = [x, y, z];
                if p.eval(&v) && !q.eval(&v) {
                    return false;
                }
            }
        }
    }
    true
}

#[test]
fn agrees_with_exhaustive_search_on_random_linear_predicates() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut env = TypeEnv::new();
    for n in NAMES {
        env.bound(n, 0, 63).unwrap();
    }
    let cfg = EquivConfig::default();
    let mut disagreements = Vec::new();
    let mut proven = 0;
    for _ in 0..500 {
        let vars = rng.gen_range(1..=3);
        let p = Gen::random(&mut rng, vars, 2);
        let q = Gen::random(&mut rng, vars, 2);
        let expected = brute_force_implies(&p, &q, vars);
        let got = implies(&pred(&p.text()), &pred(&q.text()), &env, &cfg).unwrap();
        if let Implication::Disproven { witness: Some(w) } = &got {
            let v: Vec<i64> = NAMES.iter().map(|n| w.get(*n).map_or(0, |s| s.parse().unwrap())).collect();
            let v = [v[0], v[1], v[2]];
            assert!(p.eval(&v) && !q.eval(&v), "bad witness {w:?} for {} => {}", p.text(), q.text());
        }
        proven += usize::from(expected);
        if got.is_proven() != expected || matches!(got, Implication::Unknown { .. }) {
            disagreements.push(format!("{} => {}: {got:?}", p.text(), q.text()));
        }
    }
    assert!(disagreements.is_empty(), "{} disagreements: {:#?}", disagreements.len(), &disagreements[..disagreements.len().min(5)]);
    assert!(proven > 20, "too few valid implications generated: {proven}");
}
