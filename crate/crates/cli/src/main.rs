mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use flames_core::abstraction::{LexicalCounter, TokenCounter};
use flames_core::ast::Ast;
use flames_core::compile::CompileSettings;
use flames_core::corpus::{decompose, deduplicate, mine_requires, RawContractRecord, SolidityFile};
use flames_core::equiv::{classify, TypeEnv};
use flames_core::eval::{
    emit_report, from_jsonl, ground_truth_replay, load_bench, load_rq2_manifest, rq1_samples, run_rq1, run_rq2,
    run_rq3, to_jsonl, Report, Rq1Options, Rq3Options,
};
use flames_core::fim::{export_dataset, sample_training_set};
use flames_core::synth::{
    harden, BackendCounter, CounterChoice, HttpBackend, ModelBackend, Placement, ReplayBackend, StaticBackend,
    Strategy, SynthesisTask, Triviality,
};
use serde_json::json;
use tracing_subscriber::EnvFilter;

use config::{Config, Overrides};

#[derive(Parser)]
#[command(name = "flames", version, about = "Mine, synthesize, inject and check Solidity invariants")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Token budget for abstracted contexts.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Directory holding installed solc releases.
    #[arg(long, global = true)]
    solc_cache: Option<PathBuf>,
    /// More log output on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    #[command(subcommand)]
    Corpus(CorpusCmd),
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Inject synthesized invariants into one function.
    Harden(HardenArgs),
    /// Classify a synthesized predicate against a ground-truth one.
    CheckEquiv(EquivArgs),
    #[command(subcommand)]
    Eval(EvalCmd),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Explorer records (JSONL) to one file record per source unit.
    Decompose(IoArgs),
    /// Drop near-duplicate files.
    Dedup {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// List the require sites of every file.
    Mine(IoArgs),
}

#[derive(Args)]
struct IoArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output JSONL; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Sample masked-require training examples from a file corpus.
    Export {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Backend used when the tokenizer is `backend`.
        #[arg(long)]
        backend: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlacementArg {
    Pre,
    Post,
    Both,
}

impl From<PlacementArg> for Placement {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::Pre => Placement::Pre,
            PlacementArg::Post => Placement::Post,
            PlacementArg::Both => Placement::PreAndPost,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Single,
    Multi,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Single => Strategy::SingleTurn,
            StrategyArg::Multi => Strategy::MultiTurn,
        }
    }
}

#[derive(Args)]
struct HardenArgs {
    contract: PathBuf,
    #[arg(long)]
    function: String,
    #[arg(long, value_enum, default_value = "pre")]
    placement: PlacementArg,
    #[arg(long, value_enum, default_value = "single")]
    strategy: StrategyArg,
    /// `http(s)://...`, `replay:FILE.json` or `static:COMPLETION`.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long, default_value_t = 0)]
    retries: u32,
    /// Defaults to `<name>.hardened.sol` beside the input.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Compile the hardened contract and fail when it does not build.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct EquivArgs {
    #[arg(long)]
    syn: String,
    #[arg(long)]
    gt: String,
    /// JSON object mapping terms to the terms they stand for.
    #[arg(long)]
    alias: Option<PathBuf>,
    /// Contract whose declarations type the predicates.
    #[arg(long)]
    source: Option<PathBuf>,
    /// Wrapping 256-bit arithmetic.
    #[arg(long)]
    bounded: bool,
    /// Print the full classification as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Compilability of injected predicates over a file corpus.
    Rq1 {
        #[command(flatten)]
        common: EvalArgs,
        /// Defaults to replaying each site's own predicate.
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, default_value_t = 0)]
        retries: u32,
    },
    /// Verdict distribution over predicate pairs.
    Rq2 {
        #[command(flatten)]
        common: EvalArgs,
    },
    /// Mitigation of a vulnerability benchmark.
    Rq3 {
        #[command(flatten)]
        common: EvalArgs,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, default_value_t = 0)]
        retries: u32,
        /// `placement:strategy`, e.g. `pre:single`; repeatable.
        #[arg(long = "variant")]
        variants: Vec<String>,
    },
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Write `<rq>.jsonl`, `<rq>.csv` and `<rq>.summary.txt` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "error",
        1 => "warn",
        2 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}

fn run(cli: Cli) -> Result<()> {
    let flags = Overrides {
        jobs: cli.jobs,
        budget: cli.budget,
        solc_cache: cli.solc_cache,
    };
    let cfg = Config::load(cli.config.as_deref(), &flags)?;
    match cli.cmd {
        Command::Corpus(c) => corpus(c, &cfg),
        Command::Dataset(DatasetCmd::Export {
            corpus,
            n,
            seed,
            out,
            backend,
        }) => {
            let files: Vec<SolidityFile> = read_jsonl(&corpus)?;
            let backend = match (cfg.tokenizer, backend) {
                (CounterChoice::Backend, spec) => Some(make_backend(spec.as_deref(), &cfg)?),
                _ => None,
            };
            let counter_backend = backend.as_deref().map(BackendCounter);
            let counter: &dyn TokenCounter = match &counter_backend {
                Some(c) => c,
                None => &LexicalCounter,
            };
            let (samples, skipped) = sample_training_set(&files, n, seed, cfg.budget, counter);
            for (path, why) in &skipped {
                tracing::info!(%path, %why, "file skipped");
            }
            export_dataset(&samples, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("{}", json!({"written": samples.len(), "skipped": skipped.len(), "out": out}));
            Ok(())
        }
        Command::Harden(a) => harden_cmd(a, &cfg),
        Command::CheckEquiv(a) => check_equiv(a, &cfg),
        Command::Eval(e) => eval(e, &cfg),
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_jsonl(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn corpus(cmd: CorpusCmd, cfg: &Config) -> Result<()> {
    match cmd {
        CorpusCmd::Decompose(io) => {
            let records: Vec<RawContractRecord> = read_jsonl(&io.input)?;
            let mut files = Vec::new();
            let mut rejected = 0;
            for r in &records {
                match decompose(r) {
                    Ok(fs) => files.extend(fs),
                    Err(e) => {
                        rejected += 1;
                        tracing::warn!(error = %e, "record rejected");
                    }
                }
            }
            write_out(io.out.as_deref(), &to_jsonl(&files))?;
            eprintln!("{} records, {} files, {} rejected", records.len(), files.len(), rejected);
        }
        CorpusCmd::Dedup { io, threshold } => {
            let files: Vec<SolidityFile> = read_jsonl(&io.input)?;
            let threshold = threshold.unwrap_or(cfg.dedup_threshold);
            if !(0.0..=1.0).contains(&threshold) {
                bail!("threshold {threshold} is outside [0, 1]");
            }
            let outcome = deduplicate(files, threshold);
            write_out(io.out.as_deref(), &to_jsonl(&outcome.files))?;
            eprintln!("{}", serde_json::to_string(&outcome.stats)?);
        }
        CorpusCmd::Mine(io) => {
            let files: Vec<SolidityFile> = read_jsonl(&io.input)?;
            let mut sites = Vec::new();
            for f in &files {
                match mine_requires(f) {
                    Ok(s) => sites.extend(s),
                    Err(e) => tracing::warn!(error = %e, "file skipped"),
                }
            }
            write_out(io.out.as_deref(), &to_jsonl(&sites))?;
            eprintln!("{} files, {} require sites", files.len(), sites.len());
        }
    }
    Ok(())
}

/// Builds a backend from `http(s)://...`, `replay:FILE` or `static:TEXT`,
/// falling back to the configured URL.
fn make_backend(spec: Option<&str>, cfg: &Config) -> Result<Box<dyn ModelBackend>> {
    let spec = match spec.map(str::to_string).or_else(|| cfg.backend.url.clone()) {
        Some(s) => s,
        None => bail!("no backend given; pass --backend or set backend.url"),
    };
    if spec.starts_with("http://") || spec.starts_with("https://") {
        let b = &cfg.backend;
        return Ok(Box::new(HttpBackend::with_settings(
            spec,
            cfg.backend_key(),
            Duration::from_secs(b.timeout_secs),
            b.retries,
            Duration::from_millis(b.backoff_ms),
        )));
    }
    if let Some(path) = spec.strip_prefix("replay:") {
        let text = fs::read_to_string(path).with_context(|| format!("reading recordings {path}"))?;
        let map: BTreeMap<String, String> =
            serde_json::from_str(&text).with_context(|| format!("parsing recordings {path}"))?;
        return Ok(Box::new(ReplayBackend::new(map)));
    }
    if let Some(text) = spec.strip_prefix("static:") {
        return Ok(Box::new(StaticBackend::new(text)));
    }
    bail!("unrecognized backend `{spec}`; expected a URL, replay:FILE or static:TEXT")
}

fn read_contract(path: &Path) -> Result<SolidityFile> {
    let content = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(SolidityFile::new(name, content))
}

fn harden_cmd(a: HardenArgs, cfg: &Config) -> Result<()> {
    let file = read_contract(&a.contract)?;
    let path_name = file.path.clone();
    let backend = make_backend(a.backend.as_deref(), cfg)?;
    let mut task = SynthesisTask::new(file, &a.function, a.placement.into(), a.strategy.into());
    task.retries = a.retries;
    task.budget = cfg.budget;
    task.counter = cfg.tokenizer;
    let mut hardened = harden(&task, backend.as_ref())?;

    for inv in hardened.trivial_invariants() {
        eprintln!("warning: trivial invariant: {:?} ({})", inv.trivial, inv.predicate_text);
    }
    for s in &hardened.skipped {
        eprintln!("warning: point skipped: {}", s.error);
    }
    if a.check {
        let settings = CompileSettings {
            optimization: cfg.compiler.optimization,
        };
        let r = cfg.compiler().compile_auto(&path_name, &hardened.source, None, settings)?;
        hardened.compiles = Some(r.success);
        if !r.success {
            bail!("hardened contract does not compile: {}", r.first_error().unwrap_or("unknown error"));
        }
    }
    let out = a.out.unwrap_or_else(|| {
        let stem = a.contract.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        a.contract.with_file_name(format!("{stem}.hardened.sol"))
    });
    fs::write(&out, &hardened.source).with_context(|| format!("writing {}", out.display()))?;
    let injected: Vec<_> = hardened
        .injected
        .iter()
        .map(|i| json!({"predicate": i.predicate_text, "trivial": i.trivial != Triviality::No}))
        .collect();
    println!(
        "{}",
        json!({"out": out, "injected": injected, "skipped": hardened.skipped.len(), "compiles": hardened.compiles})
    );
    Ok(())
}

fn check_equiv(a: EquivArgs, cfg: &Config) -> Result<()> {
    let mut env = match &a.source {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            TypeEnv::from_ast(&Ast::parse(text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => TypeEnv::new(),
    };
    if let Some(p) = &a.alias {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let map: BTreeMap<String, String> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        for (from, to) in &map {
            env.alias(from, to)?;
        }
    }
    let mut ecfg = cfg.equiv();
    ecfg.bounded |= a.bounded;
    let c = classify(&a.syn, &a.gt, &env, &ecfg)?;
    if a.json {
        println!("{}", serde_json::to_string(&c)?);
    } else {
        println!("{}", c.verdict);
    }
    Ok(())
}

fn parse_variant(s: &str) -> Result<(Placement, Strategy)> {
    let (p, st) = s.split_once(':').unwrap_or((s, "single"));
    let p = PlacementArg::from_str(p, true).map_err(anyhow::Error::msg)?;
    let st = StrategyArg::from_str(st, true).map_err(anyhow::Error::msg)?;
    Ok((p.into(), st.into()))
}

fn finish(report: &dyn Report, out: Option<&Path>, stem: &str) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        for p in emit_report(report, dir, stem)? {
            tracing::info!(path = %p.display(), "wrote report");
        }
    }
    print!("{}", report.summary().to_text());
    Ok(())
}

fn eval(cmd: EvalCmd, cfg: &Config) -> Result<()> {
    let compiler = cfg.compiler();
    let settings = CompileSettings {
        optimization: cfg.compiler.optimization,
    };
    match cmd {
        EvalCmd::Rq1 {
            common,
            backend,
            retries,
        } => {
            let files: Vec<SolidityFile> = read_jsonl(&common.manifest)?;
            let (samples, skipped) = rq1_samples(&files, cfg.budget, &LexicalCounter);
            for s in &skipped {
                tracing::warn!(id = %s.id, why = %s.diagnostic, "site skipped");
            }
            let backend: Box<dyn ModelBackend> = match backend.as_deref() {
                None | Some("replay") => Box::new(ground_truth_replay(&samples)),
                Some(spec) => make_backend(Some(spec), cfg)?,
            };
            let opts = Rq1Options {
                settings,
                retries,
                jobs: cfg.jobs(),
            };
            let stats = run_rq1(&samples, &files, backend.as_ref(), &compiler, &opts)?;
            finish(&stats, common.out.as_deref(), "rq1")
        }
        EvalCmd::Rq2 { common } => {
            let text = fs::read_to_string(&common.manifest)
                .with_context(|| format!("reading {}", common.manifest.display()))?;
            let pairs = load_rq2_manifest(&text)?;
            let tally = run_rq2(&pairs, &cfg.equiv(), cfg.jobs())?;
            for r in tally.errors() {
                eprintln!("warning: pair {}: {}", r.id, r.error.as_deref().unwrap_or_default());
            }
            finish(&tally, common.out.as_deref(), "rq2")?;
            let g = tally.grouped();
            println!("groups: {}/{}/{}/{}", g[0], g[1], g[2], g[3]);
            Ok(())
        }
        EvalCmd::Rq3 {
            common,
            backend,
            retries,
            variants,
        } => {
            let bench = load_bench(&common.manifest)?;
            let backend = make_backend(backend.as_deref(), cfg)?;
            let mut opts = Rq3Options {
                settings,
                retries,
                jobs: cfg.jobs(),
                ..Rq3Options::default()
            };
            if !variants.is_empty() {
                opts.variants = variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?;
            }
            let report = run_rq3(&bench, backend.as_ref(), &compiler, &opts)?;
            finish(&report, common.out.as_deref(), "rq3")
        }
    }
}
