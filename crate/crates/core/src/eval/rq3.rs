use std::collections::BTreeMap;
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::report::{from_jsonl, to_jsonl, Report, Table};
use super::EvalError;
use crate::compile::{CompileSettings, Compiler};
use crate::corpus::SolidityFile;
use crate::synth::{harden, BackendError, CompletionRequest, ModelBackend, Placement, Strategy, SynthesisTask};

fn default_timeout() -> u64 {
    300
}

/// One vulnerable contract with its functional tests and exploit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub id: String,
    pub vulnerability_class: String,
    /// Relative to `workdir`.
    pub contract_path: PathBuf,
    pub target_function: String,
    #[serde(default)]
    pub vulnerable_lines: Vec<u32>,
    /// Shell command; passes on exit 0.
    pub test_cmd: String,
    /// Shell command; exits 0 when the exploit succeeded.
    pub exploit_cmd: String,
    /// Directory copied into the sandbox, relative to the manifest.
    #[serde(default)]
    pub workdir: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Output text that also counts as a blocked exploit.
    #[serde(default)]
    pub blocked_marker: Option<String>,
    #[serde(default)]
    pub compiler_version: Option<String>,
}

/// Reads a manifest; relative work directories are resolved against its
/// parent directory.
pub fn load_bench(manifest: &Path) -> Result<Vec<BenchmarkEntry>, EvalError> {
    let text = std::fs::read_to_string(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut entries: Vec<BenchmarkEntry> = from_jsonl(&text)?;
    for e in &mut entries {
        e.workdir = Some(match e.workdir.take() {
            Some(w) if w.is_absolute() => w,
            Some(w) => base.join(w),
            None => base.to_path_buf(),
        });
    }
    Ok(entries)
}

pub const DEFAULT_ENV_ALLOWLIST: [&str; 5] = ["PATH", "HOME", "LANG", "NODE_PATH", "FLAMES_SOLC_CACHE"];

#[derive(Debug, Clone)]
pub struct Rq3Options {
    pub variants: Vec<(Placement, Strategy)>,
    pub settings: CompileSettings,
    pub retries: u32,
    pub jobs: usize,
    /// Variables passed through to the commands; everything else is cleared.
    pub env_allowlist: Vec<String>,
    /// Directory names linked rather than copied into the sandbox.
    pub link_dirs: Vec<String>,
}

impl Default for Rq3Options {
    fn default() -> Self {
        Self {
            variants: vec![(Placement::Pre, Strategy::SingleTurn)],
            settings: CompileSettings::default(),
            retries: 0,
            jobs: 1,
            env_allowlist: DEFAULT_ENV_ALLOWLIST.map(String::from).to_vec(),
            link_dirs: vec!["node_modules".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryOutcome {
    pub id: String,
    pub vulnerability_class: String,
    pub placement: Placement,
    pub strategy: Strategy,
    pub invariants: Vec<String>,
    pub compiles: bool,
    /// `None` when the gate did not run.
    pub tests_pass: Option<bool>,
    pub exploit_blocked: Option<bool>,
    pub success: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub entries: Vec<EntryOutcome>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantTotals {
    pub entries: usize,
    pub compiles: usize,
    pub tests_pass: usize,
    pub exploit_blocked: usize,
    pub success: usize,
}

impl MitigationReport {
    pub fn totals(&self) -> BTreeMap<(Placement, Strategy), VariantTotals> {
        let mut out: BTreeMap<(Placement, Strategy), VariantTotals> = BTreeMap::new();
        for e in &self.entries {
            let t = out.entry((e.placement, e.strategy)).or_default();
            t.entries += 1;
            t.compiles += usize::from(e.compiles);
            t.tests_pass += usize::from(e.tests_pass == Some(true));
            t.exploit_blocked += usize::from(e.exploit_blocked == Some(true));
            t.success += usize::from(e.success);
        }
        out
    }

    pub fn outcome(&self, id: &str, placement: Placement, strategy: Strategy) -> Option<&EntryOutcome> {
        self.entries
            .iter()
            .find(|e| e.id == id && e.placement == placement && e.strategy == strategy)
    }
}

/// Keys requests by entry so one replay file can serve a whole benchmark.
struct EntryScoped<'a> {
    inner: &'a dyn ModelBackend,
    entry: &'a str,
}

impl ModelBackend for EntryScoped<'_> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let mut req = req.clone();
        req.sample_id = req.sample_id.map(|id| entry_sample_id(self.entry, &id));
        self.inner.complete(&req)
    }

    fn count_tokens(&self, text: &str) -> Result<usize, BackendError> {
        self.inner.count_tokens(text)
    }
}

/// Replay key used for an entry's completion at `sample_id`.
pub fn entry_sample_id(entry: &str, sample_id: &str) -> String {
    format!("{entry}/{sample_id}")
}

pub fn run_rq3(
    bench: &[BenchmarkEntry],
    backend: &dyn ModelBackend,
    compiler: &Compiler,
    opts: &Rq3Options,
) -> Result<MitigationReport, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs.max(1)).build()?;
    let jobs: Vec<(&BenchmarkEntry, Placement, Strategy)> = bench
        .iter()
        .flat_map(|e| opts.variants.iter().map(move |(p, s)| (e, *p, *s)))
        .collect();
    let entries = pool.install(|| {
        jobs.par_iter()
            .map(|(e, p, s)| run_entry(e, *p, *s, backend, compiler, opts))
            .collect()
    });
    Ok(MitigationReport { entries })
}

fn run_entry(
    entry: &BenchmarkEntry,
    placement: Placement,
    strategy: Strategy,
    backend: &dyn ModelBackend,
    compiler: &Compiler,
    opts: &Rq3Options,
) -> EntryOutcome {
    let mut out = EntryOutcome {
        id: entry.id.clone(),
        vulnerability_class: entry.vulnerability_class.clone(),
        placement,
        strategy,
        invariants: Vec::new(),
        compiles: false,
        tests_pass: None,
        exploit_blocked: None,
        success: false,
        notes: Vec::new(),
    };
    if let Err(e) = gates(entry, placement, strategy, backend, compiler, opts, &mut out) {
        out.notes.push(e);
    }
    out.success = out.compiles && out.tests_pass == Some(true) && out.exploit_blocked == Some(true);
    out
}

fn gates(
    entry: &BenchmarkEntry,
    placement: Placement,
    strategy: Strategy,
    backend: &dyn ModelBackend,
    compiler: &Compiler,
    opts: &Rq3Options,
    out: &mut EntryOutcome,
) -> Result<(), String> {
    let workdir = entry.workdir.as_deref().unwrap_or(Path::new("."));
    let sandbox = tempfile::Builder::new()
        .prefix(&format!("flames-{}-", entry.id))
        .tempdir()
        .map_err(|e| format!("sandbox: {e}"))?;
    copy_tree(workdir, sandbox.path(), &opts.link_dirs).map_err(|e| format!("copying {}: {e}", workdir.display()))?;
    let contract = sandbox.path().join(&entry.contract_path);
    let source = std::fs::read_to_string(&contract).map_err(|e| format!("reading {}: {e}", contract.display()))?;

    let file = SolidityFile::new(entry.contract_path.to_string_lossy(), source);
    let mut task = SynthesisTask::new(file, &entry.target_function, placement, strategy);
    task.retries = opts.retries;
    let scoped = EntryScoped {
        inner: backend,
        entry: &entry.id,
    };
    let hardened = harden(&task, &scoped).map_err(|e| format!("hardening: {e}"))?;
    out.invariants = hardened.injected.iter().map(|i| i.predicate_text.clone()).collect();
    out.invariants.dedup();
    for s in &hardened.skipped {
        out.notes.push(format!("{} point skipped: {}", s.point.kind.as_str(), s.error));
    }
    std::fs::write(&contract, &hardened.source).map_err(|e| format!("writing hardened source: {e}"))?;

    let result = compiler
        .compile_auto(&entry.contract_path.to_string_lossy(), &hardened.source, entry.compiler_version.as_deref(), opts.settings)
        .map_err(|e| format!("compiling: {e}"))?;
    if !result.success {
        return Err(format!("hardened source does not compile: {}", result.first_error().unwrap_or("no artifacts")));
    }
    out.compiles = true;
    let artifacts: BTreeMap<String, _> = result
        .artifacts
        .into_iter()
        .map(|(k, v)| (k.rsplit(':').next().unwrap_or_default().to_string(), v))
        .collect();
    let artifacts_path = sandbox.path().join(".flames-artifacts.json");
    std::fs::write(&artifacts_path, serde_json::to_string_pretty(&artifacts).expect("artifacts serialize"))
        .map_err(|e| format!("writing artifacts: {e}"))?;

    let mut env: Vec<(String, String)> = opts
        .env_allowlist
        .iter()
        .filter_map(|k| std::env::var(k).ok().map(|v| (k.clone(), v)))
        .collect();
    env.push(("FLAMES_CONTRACT".into(), contract.to_string_lossy().into_owned()));
    env.push(("FLAMES_ARTIFACTS".into(), artifacts_path.to_string_lossy().into_owned()));
    env.push(("FLAMES_ENTRY".into(), entry.id.clone()));
    let timeout = Duration::from_secs(entry.timeout_secs);

    let tests = run_shell(&entry.test_cmd, sandbox.path(), &env, timeout);
    out.tests_pass = Some(tests.status == Some(0));
    if tests.timed_out {
        out.notes.push(format!("test_cmd timed out after {}s", entry.timeout_secs));
    }
    let exploit = run_shell(&entry.exploit_cmd, sandbox.path(), &env, timeout);
    let marked = entry.blocked_marker.as_ref().is_some_and(|m| exploit.output.contains(m.as_str()));
    out.exploit_blocked = Some(!exploit.timed_out && (exploit.status != Some(0) || marked));
    if exploit.timed_out {
        out.notes.push(format!("exploit_cmd timed out after {}s", entry.timeout_secs));
    }
    Ok(())
}

/// Copies `from` into `to`; directories named in `link` become symlinks.
fn copy_tree(from: &Path, to: &Path, link: &[String]) -> std::io::Result<()> {
    std::fs::create_dir_all(to)?;
    for e in std::fs::read_dir(from)? {
        let e = e?;
        let src = e.path();
        let dst = to.join(e.file_name());
        let ty = e.file_type()?;
        if ty.is_dir() && link.iter().any(|l| e.file_name() == l.as_str()) {
            std::os::unix::fs::symlink(src.canonicalize()?, &dst)?;
        } else if ty.is_dir() {
            copy_tree(&src, &dst, link)?;
        } else {
            std::fs::copy(&src, &dst)?;
        }
    }
    Ok(())
}

pub(crate) struct ShellOutcome {
    pub status: Option<i32>,
    pub output: String,
    pub timed_out: bool,
}

pub(crate) fn run_shell(cmd: &str, dir: &Path, env: &[(String, String)], timeout: Duration) -> ShellOutcome {
    let spawned = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .current_dir(dir)
        .env_clear()
        .envs(env.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn();
    let mut child = match spawned {
        Ok(c) => c,
        Err(e) => {
            return ShellOutcome {
                status: None,
                output: e.to_string(),
                timed_out: false,
            }
        }
    };
    let drain = |r: Option<Box<dyn Read + Send>>| {
        std::thread::spawn(move || {
            let mut s = String::new();
            if let Some(mut r) = r {
                let _ = r.read_to_string(&mut s);
            }
            s
        })
    };
    let out = drain(child.stdout.take().map(|r| Box::new(r) as Box<dyn Read + Send>));
    let err = drain(child.stderr.take().map(|r| Box::new(r) as Box<dyn Read + Send>));
    let (status, timed_out) = match child.wait_timeout(timeout) {
        Ok(Some(s)) => (s.code(), false),
        _ => {
            // Kill the whole group so grandchildren release the pipes.
            if let Ok(pgid) = i32::try_from(child.id()) {
                // SAFETY: plain syscall on the group the child leads.
                unsafe {
                    libc::killpg(pgid, libc::SIGKILL);
                }
            }
            let _ = child.kill();
            let _ = child.wait();
            (None, true)
        }
    };
    let mut output = out.join().unwrap_or_default();
    output += &err.join().unwrap_or_default();
    ShellOutcome {
        status,
        output,
        timed_out,
    }
}

fn placement_name(p: Placement) -> &'static str {
    match p {
        Placement::Pre => "pre",
        Placement::Post => "post",
        Placement::PreAndPost => "both",
    }
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::SingleTurn => "single",
        Strategy::MultiTurn => "multi",
    }
}

fn gate(v: Option<bool>) -> String {
    v.map_or("skipped".to_string(), |b| b.to_string())
}

impl Report for MitigationReport {
    fn records_jsonl(&self) -> String {
        to_jsonl(&self.entries)
    }

    fn records_table(&self) -> Table {
        let mut t = Table::new([
            "id",
            "class",
            "placement",
            "strategy",
            "compiles",
            "tests_pass",
            "exploit_blocked",
            "success",
        ]);
        for e in &self.entries {
            t.push([
                e.id.clone(),
                e.vulnerability_class.clone(),
                placement_name(e.placement).to_string(),
                strategy_name(e.strategy).to_string(),
                e.compiles.to_string(),
                gate(e.tests_pass),
                gate(e.exploit_blocked),
                e.success.to_string(),
            ]);
        }
        t
    }

    fn summary(&self) -> Table {
        let mut t = Table::new(["placement", "strategy", "entries", "compiles", "tests_pass", "exploit_blocked", "success"]);
        for ((p, s), v) in self.totals() {
            t.push([
                placement_name(p).to_string(),
                strategy_name(s).to_string(),
                v.entries.to_string(),
                v.compiles.to_string(),
                v.tests_pass.to_string(),
                v.exploit_blocked.to_string(),
                v.success.to_string(),
            ]);
        }
        t
    }
}
