//! Fill-in-the-middle samples: masked `require` predicates for training and
//! placeholder prompts for inference, plus the line-delimited dataset format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{abstract_function, AbstractedContext, AbstractionError, TokenCounter};
use crate::ast::{splice, Ast, ParseError, RequireSite};
use crate::corpus::SolidityFile;
use crate::span::Span;
use crate::synth::{InjectionPoint, PointKind};

pub const PLACEHOLDER: &str = "<FILL_ME>";

#[derive(Debug, Error)]
pub enum FimError {
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("require site at {0} is not inside the abstracted context")]
    SiteNotInAbstraction(usize),
    #[error("require site at {0} belongs to a modifier")]
    SiteInModifier(usize),
    #[error("offset {offset} is outside the body of `{function}`")]
    PointOutOfRange { offset: usize, function: String },
    #[error("source already contains the placeholder literal")]
    PlaceholderCollision,
    #[error("dataset i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset line {line}: {source}")]
    Format {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplePlacement {
    /// The predicate of an existing `require` was masked.
    Site,
    Pre,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FimMeta {
    pub file_id: String,
    pub function: String,
    pub placement: SamplePlacement,
    /// Masked predicate span (training) or injection offset (inference), in
    /// original source coordinates.
    pub span: Span,
}

/// One dataset record. Field order is the serialized order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FimSample {
    pub context: String,
    pub target: Option<String>,
    pub meta: FimMeta,
}

impl FimSample {
    /// Context with the placeholder replaced by the target.
    pub fn filled(&self) -> Option<String> {
        self.target.as_ref().map(|t| self.context.replacen(PLACEHOLDER, t, 1))
    }
}

fn check_single(text: &str) -> Result<(), FimError> {
    if text.matches(PLACEHOLDER).count() == 1 {
        Ok(())
    } else {
        Err(FimError::PlaceholderCollision)
    }
}

/// Masks `site`'s predicate inside the abstracted context of its function.
pub fn make_training_sample(
    file: &SolidityFile,
    site: &RequireSite,
    budget: usize,
    counter: &dyn TokenCounter,
) -> Result<FimSample, FimError> {
    if site.in_modifier {
        return Err(FimError::SiteInModifier(site.call_span.start));
    }
    let ast = Ast::parse(file.content.as_str())?;
    let f = ast
        .function_at(site.function_start)
        .ok_or(FimError::SiteNotInAbstraction(site.predicate_span.start))?;
    let ctx = abstract_function(&ast, f, budget, counter)?;
    let span = ctx
        .map_span(site.predicate_span)
        .filter(|s| s.slice(&ctx.text) == site.predicate_text)
        .ok_or(FimError::SiteNotInAbstraction(site.predicate_span.start))?;
    let context = splice(&ctx.text, span, PLACEHOLDER).expect("mapped span is valid");
    check_single(&context)?;
    Ok(FimSample {
        context,
        target: Some(site.predicate_text.clone()),
        meta: FimMeta {
            file_id: file.id.clone(),
            function: f.name.clone(),
            placement: SamplePlacement::Site,
            span: site.predicate_span,
        },
    })
}

/// Inserts `require(<FILL_ME>);` at `point` (original coordinates of `ctx`).
pub fn make_inference_prompt(ctx: &AbstractedContext, point: &InjectionPoint) -> Result<FimSample, FimError> {
    let out_of_range = || FimError::PointOutOfRange {
        offset: point.offset,
        function: ctx.target_function.clone(),
    };
    let body = ctx.target_body;
    if point.offset <= body.start || point.offset >= body.end {
        return Err(out_of_range());
    }
    let base = ctx.map_offset(body.start).ok_or_else(out_of_range)?;
    let local = |o: usize| o - body.start + base;
    let mapped = InjectionPoint {
        offset: local(point.offset),
        anchor: match point.anchor {
            crate::synth::Anchor::BeforeReturn { end, wrap } => crate::synth::Anchor::BeforeReturn { end: local(end), wrap },
            a => a,
        },
        ..point.clone()
    };
    let stmt = format!("require({PLACEHOLDER});");
    let mut text = ctx.text.clone();
    let mut edits = mapped.insertions(&ctx.text, &stmt);
    edits.sort_by_key(|e| std::cmp::Reverse(e.at));
    for e in edits {
        text.insert_str(e.at, &e.text);
    }
    check_single(&text)?;
    Ok(FimSample {
        context: text,
        target: None,
        meta: FimMeta {
            file_id: String::new(),
            function: ctx.target_function.clone(),
            placement: match point.kind {
                PointKind::Pre => SamplePlacement::Pre,
                PointKind::Post => SamplePlacement::Post,
            },
            span: Span::empty(point.offset),
        },
    })
}

/// Training samples: files are visited in a seeded shuffle, each contributes
/// one randomly chosen function-body site, until `n` samples exist. Files
/// that cannot produce a sample are reported with the reason.
pub fn sample_training_set(
    files: &[SolidityFile],
    n: usize,
    seed: u64,
    budget: usize,
    counter: &dyn TokenCounter,
) -> (Vec<FimSample>, Vec<(String, String)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<&SolidityFile> = files.iter().collect();
    order.shuffle(&mut rng);
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for file in order {
        if samples.len() >= n {
            break;
        }
        let sites = match Ast::parse(file.content.as_str()) {
            Ok(ast) => ast.require_sites(&file.id),
            Err(e) => {
                skipped.push((file.path.clone(), e.to_string()));
                continue;
            }
        };
        let sites: Vec<&RequireSite> = sites.iter().filter(|s| !s.in_modifier).collect();
        let Some(site) = sites.choose(&mut rng) else {
            skipped.push((file.path.clone(), "no function-body require".into()));
            continue;
        };
        match make_training_sample(file, site, budget, counter) {
            Ok(s) => samples.push(s),
            Err(e) => skipped.push((file.path.clone(), e.to_string())),
        }
    }
    (samples, skipped)
}

pub fn export_dataset(samples: &[FimSample], path: &Path) -> Result<usize, FimError> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut w, s).map_err(|e| FimError::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(samples.len())
}

pub fn import_dataset(path: &Path) -> Result<Vec<FimSample>, FimError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| FimError::Format { line: i + 1, source })?);
    }
    Ok(out)
}
