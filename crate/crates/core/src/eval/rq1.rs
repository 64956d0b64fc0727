use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{to_jsonl, Report, Table};
use super::EvalError;
use crate::abstraction::TokenCounter;
use crate::ast::splice;
use crate::compile::{CompileSettings, Compiler};
use crate::corpus::{mine_requires, SolidityFile};
use crate::fim::{make_training_sample, FimSample};
use crate::synth::{extract_predicate, CompletionRequest, ModelBackend, ReplayBackend};

#[derive(Debug, Clone)]
pub struct Rq1Options {
    pub settings: CompileSettings,
    /// Extra backend calls after a malformed completion.
    pub retries: u32,
    pub jobs: usize,
}

impl Default for Rq1Options {
    fn default() -> Self {
        Self {
            settings: CompileSettings::default(),
            retries: 0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rq1Record {
    pub id: String,
    pub file_id: String,
    pub function: String,
    pub original_compiles: bool,
    pub predicate: Option<String>,
    /// `None` when nothing was compiled.
    pub injected_compiles: Option<bool>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rq1Failure {
    pub id: String,
    pub diagnostic: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rq1Stats {
    pub total: usize,
    pub compiled_original: usize,
    pub compiled_after_injection: usize,
    pub failures: Vec<Rq1Failure>,
    pub records: Vec<Rq1Record>,
}

/// Replay key of a dataset sample.
pub fn sample_key(s: &FimSample) -> String {
    format!("{}:{}", s.meta.file_id, s.meta.span.start)
}

/// One masked sample per `require` outside modifiers. Sites that cannot be
/// turned into a sample are returned with the reason.
pub fn rq1_samples(
    files: &[SolidityFile],
    budget: usize,
    counter: &dyn TokenCounter,
) -> (Vec<FimSample>, Vec<Rq1Failure>) {
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for f in files {
        let sites = match mine_requires(f) {
            Ok(s) => s,
            Err(e) => {
                skipped.push(Rq1Failure {
                    id: f.id.clone(),
                    diagnostic: e.to_string(),
                });
                continue;
            }
        };
        for site in sites.iter().filter(|s| !s.in_modifier) {
            match make_training_sample(f, site, budget, counter) {
                Ok(s) => samples.push(s),
                Err(e) => skipped.push(Rq1Failure {
                    id: format!("{}:{}", f.id, site.predicate_span.start),
                    diagnostic: e.to_string(),
                }),
            }
        }
    }
    (samples, skipped)
}

/// A backend answering every sample with its own masked predicate.
pub fn ground_truth_replay(samples: &[FimSample]) -> ReplayBackend {
    ReplayBackend::new(
        samples
            .iter()
            .filter_map(|s| s.target.as_ref().map(|t| (sample_key(s), format!("{t});")))),
    )
}

/// Fills every sample through `backend`, splices the predicate back into the
/// full source and compiles it with the file's own compiler version.
pub fn run_rq1(
    samples: &[FimSample],
    sources: &[SolidityFile],
    backend: &dyn ModelBackend,
    compiler: &Compiler,
    opts: &Rq1Options,
) -> Result<Rq1Stats, EvalError> {
    let by_id: BTreeMap<&str, &SolidityFile> = sources.iter().map(|f| (f.id.as_str(), f)).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs.max(1)).build()?;
    let originals: BTreeMap<&str, Result<(), String>> = pool.install(|| {
        let mut ids: Vec<&str> = samples.iter().map(|s| s.meta.file_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.par_iter()
            .map(|id| {
                let r = match by_id.get(id) {
                    None => Err(format!("source `{id}` is not in the corpus")),
                    Some(f) => compile_file(compiler, f, &f.content, opts.settings),
                };
                (*id, r)
            })
            .collect()
    });
    let records: Vec<Rq1Record> = pool.install(|| {
        samples
            .par_iter()
            .map(|s| one_sample(s, by_id.get(s.meta.file_id.as_str()).copied(), &originals, backend, compiler, opts))
            .collect()
    });
    let mut stats = Rq1Stats {
        total: records.len(),
        ..Rq1Stats::default()
    };
    for r in &records {
        stats.compiled_original += usize::from(r.original_compiles);
        stats.compiled_after_injection += usize::from(r.injected_compiles == Some(true));
        if let Some(d) = &r.diagnostic {
            stats.failures.push(Rq1Failure {
                id: r.id.clone(),
                diagnostic: d.clone(),
            });
        }
    }
    stats.records = records;
    Ok(stats)
}

fn compile_file(compiler: &Compiler, f: &SolidityFile, source: &str, settings: CompileSettings) -> Result<(), String> {
    let metadata = Some(f.compiler_version.as_str()).filter(|v| !v.is_empty());
    match compiler.compile_auto(&f.path, source, metadata, settings) {
        Ok(r) if r.success => Ok(()),
        Ok(r) => Err(r.first_error().unwrap_or("compilation failed").to_string()),
        Err(e) => Err(e.to_string()),
    }
}

fn one_sample(
    s: &FimSample,
    file: Option<&SolidityFile>,
    originals: &BTreeMap<&str, Result<(), String>>,
    backend: &dyn ModelBackend,
    compiler: &Compiler,
    opts: &Rq1Options,
) -> Rq1Record {
    let mut rec = Rq1Record {
        id: sample_key(s),
        file_id: s.meta.file_id.clone(),
        function: s.meta.function.clone(),
        original_compiles: false,
        predicate: None,
        injected_compiles: None,
        diagnostic: None,
    };
    match originals.get(s.meta.file_id.as_str()) {
        Some(Ok(())) => rec.original_compiles = true,
        Some(Err(e)) => {
            rec.diagnostic = Some(format!("original does not compile: {e}"));
            return rec;
        }
        None => unreachable!("every sample's file was compiled"),
    }
    let file = file.expect("compiled original exists");
    let request = CompletionRequest::new(s.context.clone()).with_id(rec.id.clone());
    let mut attempt = 0;
    let predicate = loop {
        let raw = match backend.complete(&request) {
            Ok(r) => r,
            Err(e) => {
                rec.diagnostic = Some(e.to_string());
                return rec;
            }
        };
        match extract_predicate(&raw) {
            Ok(p) => break p,
            Err(e) if attempt >= opts.retries => {
                rec.diagnostic = Some(e.to_string());
                return rec;
            }
            Err(_) => attempt += 1,
        }
    };
    let injected = match splice(&file.content, s.meta.span, &predicate) {
        Ok(t) => t,
        Err(e) => {
            rec.diagnostic = Some(e.to_string());
            return rec;
        }
    };
    rec.predicate = Some(predicate);
    let result = compile_file(compiler, file, &injected, opts.settings);
    rec.injected_compiles = Some(result.is_ok());
    rec.diagnostic = result.err();
    rec
}

impl Report for Rq1Stats {
    fn records_jsonl(&self) -> String {
        to_jsonl(&self.records)
    }

    fn records_table(&self) -> Table {
        let mut t = Table::new(["id", "function", "original", "injected", "predicate", "diagnostic"]);
        for r in &self.records {
            t.push([
                r.id.clone(),
                r.function.clone(),
                r.original_compiles.to_string(),
                r.injected_compiles.map_or("skipped".to_string(), |b| b.to_string()),
                r.predicate.clone().unwrap_or_default(),
                r.diagnostic.clone().unwrap_or_default().replace('\n', " "),
            ]);
        }
        t
    }

    fn summary(&self) -> Table {
        let mut t = Table::new(["metric", "count"]);
        t.push(["total".to_string(), self.total.to_string()]);
        t.push(["compiled_original".to_string(), self.compiled_original.to_string()]);
        t.push(["compiled_after_injection".to_string(), self.compiled_after_injection.to_string()]);
        t.push(["failures".to_string(), self.failures.len().to_string()]);
        t
    }
}
