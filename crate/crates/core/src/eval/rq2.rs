use std::collections::BTreeMap;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{to_jsonl, Report, Table};
use super::EvalError;
use crate::equiv::{classify, EquivConfig, EquivError, Ty, TypeEnv, Verdict};

/// One manifest line: a synthesized and a ground-truth predicate plus the
/// typing context they are compared under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rq2Pair {
    pub id: String,
    pub syn: String,
    pub gt: String,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
    #[serde(default)]
    pub types: BTreeMap<String, Ty>,
    /// Inclusive ranges as decimal strings.
    #[serde(default)]
    pub bounds: BTreeMap<String, (String, String)>,
    /// Expected verdict, if the manifest records one.
    #[serde(default)]
    pub expected: Option<Verdict>,
}

impl Rq2Pair {
    pub fn new(id: impl Into<String>, syn: impl Into<String>, gt: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            syn: syn.into(),
            gt: gt.into(),
            aliases: BTreeMap::new(),
            types: BTreeMap::new(),
            bounds: BTreeMap::new(),
            expected: None,
        }
    }

    pub fn env(&self) -> Result<TypeEnv, EquivError> {
        let mut env = TypeEnv::new();
        for (from, to) in &self.aliases {
            env.alias(from, to)?;
        }
        for (term, ty) in &self.types {
            env.declare(term, *ty)?;
        }
        for (term, (lo, hi)) in &self.bounds {
            let num = |s: &str| {
                s.parse::<BigInt>()
                    .map_err(|_| EquivError::Type(format!("bound `{s}` of `{term}` is not an integer")))
            };
            env.bound(term, num(lo)?, num(hi)?)?;
        }
        Ok(env)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rq2Record {
    pub id: String,
    pub verdict: Option<Verdict>,
    pub expected: Option<Verdict>,
    pub syn_normalized: Option<String>,
    pub gt_normalized: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rq2Tally {
    pub counts: BTreeMap<Verdict, usize>,
    pub records: Vec<Rq2Record>,
}

impl Rq2Tally {
    pub fn count(&self, v: Verdict) -> usize {
        self.counts.get(&v).copied().unwrap_or(0)
    }

    pub fn evaluated(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Rq2Record> {
        self.records.iter().filter(|r| r.error.is_some())
    }

    /// Counts in the four groups Exact-or-Equivalent, SynthesizedStronger,
    /// GroundTruthStronger and Inconclusive.
    pub fn grouped(&self) -> [usize; 4] {
        [
            self.count(Verdict::ExactMatch) + self.count(Verdict::Equivalent),
            self.count(Verdict::SynthesizedStronger),
            self.count(Verdict::GroundTruthStronger),
            self.count(Verdict::Inconclusive),
        ]
    }
}

pub fn load_rq2_manifest(text: &str) -> Result<Vec<Rq2Pair>, EvalError> {
    Ok(super::report::from_jsonl(text)?)
}

pub fn run_rq2(pairs: &[Rq2Pair], cfg: &EquivConfig, jobs: usize) -> Result<Rq2Tally, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let records: Vec<Rq2Record> = pool.install(|| {
        pairs
            .par_iter()
            .map(|p| {
                let mut rec = Rq2Record {
                    id: p.id.clone(),
                    verdict: None,
                    expected: p.expected,
                    syn_normalized: None,
                    gt_normalized: None,
                    error: None,
                };
                match p.env().and_then(|env| classify(&p.syn, &p.gt, &env, cfg)) {
                    Ok(c) => {
                        rec.verdict = Some(c.verdict);
                        rec.syn_normalized = Some(c.syn_normalized);
                        rec.gt_normalized = Some(c.gt_normalized);
                    }
                    Err(e) => rec.error = Some(e.to_string()),
                }
                rec
            })
            .collect()
    });
    let mut tally = Rq2Tally {
        counts: Verdict::ALL.iter().map(|v| (*v, 0)).collect(),
        records,
    };
    for r in &tally.records {
        if let Some(v) = r.verdict {
            *tally.counts.entry(v).or_default() += 1;
        }
    }
    Ok(tally)
}

impl Report for Rq2Tally {
    fn records_jsonl(&self) -> String {
        to_jsonl(&self.records)
    }

    fn records_table(&self) -> Table {
        let mut t = Table::new(["id", "verdict", "expected", "syn_normalized", "gt_normalized", "error"]);
        for r in &self.records {
            t.push([
                r.id.clone(),
                r.verdict.map(|v| v.to_string()).unwrap_or_default(),
                r.expected.map(|v| v.to_string()).unwrap_or_default(),
                r.syn_normalized.clone().unwrap_or_default(),
                r.gt_normalized.clone().unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ]);
        }
        t
    }

    fn summary(&self) -> Table {
        let mut t = Table::new(["verdict", "count"]);
        for v in Verdict::ALL {
            t.push([v.to_string(), self.count(v).to_string()]);
        }
        t
    }
}
