//! Compiler resolution and standard-JSON compilation of original and hardened
//! sources.

mod cache;
mod pragma;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use semver::Version;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use wait_timeout::ChildExt;

pub use cache::{CompilerCache, ReleaseSource, CACHE_ENV, OFFICIAL_LIST};
pub use pragma::{parse_metadata_version, source_constraint, PragmaError, VersionConstraint};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Caps concurrent compiler processes across the whole process; defaults to
/// the available parallelism.
pub const JOBS_ENV: &str = "FLAMES_COMPILE_JOBS";

struct Slots {
    used: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct Slot(&'static Slots);

impl Drop for Slot {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

fn acquire_slot() -> Slot {
    static SLOTS: OnceLock<Slots> = OnceLock::new();
    let slots = SLOTS.get_or_init(|| Slots {
        used: Mutex::new(0),
        freed: Condvar::new(),
        limit: std::env::var(JOBS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1),
    });
    let mut used = slots.used.lock().unwrap_or_else(|e| e.into_inner());
    while *used >= slots.limit {
        used = slots.freed.wait(used).unwrap_or_else(|e| e.into_inner());
    }
    *used += 1;
    Slot(slots)
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("source has no `pragma solidity` directive and no compiler version was supplied")]
    NoPragma,
    #[error(transparent)]
    Pragma(#[from] PragmaError),
    #[error("no installed compiler satisfies `{constraint}` (installed: {})", fmt_versions(.installed))]
    NoMatchingCompiler { constraint: String, installed: Vec<Version> },
    #[error("solc {0} is not in the compiler cache")]
    NotInstalled(Version),
    #[error("compiler exited with {status:?} without JSON output: {stderr}")]
    CompilerCrash { status: Option<i32>, stderr: String },
    #[error("compiler did not finish within {0:?}")]
    Timeout(Duration),
    #[error("compiler fetch failed: {0}")]
    Fetch(String),
    #[error("compiler i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn fmt_versions(vs: &[Version]) -> String {
    if vs.is_empty() {
        return "none".into();
    }
    vs.iter().map(Version::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub file: String,
    pub start: i64,
    pub end: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: String,
    pub message: String,
    pub location: Option<Location>,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity.eq_ignore_ascii_case("error")
    }
}

/// Deployable output of one contract.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    #[serde(default)]
    pub abi: serde_json::Value,
    /// Creation bytecode, hex without `0x`.
    #[serde(default)]
    pub bytecode: String,
    /// Function signature to 4-byte selector (hex).
    #[serde(default)]
    pub method_identifiers: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResult {
    pub success: bool,
    pub compiler_version: String,
    pub diagnostics: Vec<Diagnostic>,
    pub artifacts_present: bool,
    /// Keyed by `file:Contract`.
    #[serde(default)]
    pub artifacts: BTreeMap<String, Artifact>,
}

impl CompileResult {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    /// First error message, for one-line reports.
    pub fn first_error(&self) -> Option<&str> {
        self.errors().next().map(|d| d.message.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CompileSettings {
    pub optimization: bool,
}

/// Picks the compiler for `source`. A metadata version wins over the pragma;
/// otherwise the highest installed release satisfying every directive.
pub fn resolve_compiler(source: &str, metadata: Option<&str>, installed: &[Version]) -> Result<Version, CompileError> {
    if let Some(v) = metadata.and_then(parse_metadata_version) {
        return Ok(v);
    }
    let constraint = source_constraint(source)?.ok_or(CompileError::NoPragma)?;
    constraint
        .best_match(installed)
        .cloned()
        .ok_or_else(|| CompileError::NoMatchingCompiler {
            constraint: constraint.to_string(),
            installed: installed.to_vec(),
        })
}

#[derive(Debug, Clone)]
pub struct Compiler {
    pub cache: CompilerCache,
    pub timeout: Duration,
}

impl Compiler {
    pub fn new(cache: CompilerCache) -> Self {
        Self {
            cache,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn resolve(&self, source: &str, metadata: Option<&str>) -> Result<Version, CompileError> {
        resolve_compiler(source, metadata, &self.cache.installed())
    }

    /// Resolves the version and compiles `source` as a single file.
    pub fn compile_auto(
        &self,
        file_name: &str,
        source: &str,
        metadata: Option<&str>,
        settings: CompileSettings,
    ) -> Result<CompileResult, CompileError> {
        let version = self.resolve(source, metadata)?;
        self.compile(file_name, source, &version, settings)
    }

    pub fn compile(
        &self,
        file_name: &str,
        source: &str,
        version: &Version,
        settings: CompileSettings,
    ) -> Result<CompileResult, CompileError> {
        let mut sources = BTreeMap::new();
        sources.insert(file_name.to_string(), source.to_string());
        self.compile_sources(&sources, version, settings)
    }

    /// Compiles a set of files together (imports resolve by path).
    pub fn compile_sources(
        &self,
        sources: &BTreeMap<String, String>,
        version: &Version,
        settings: CompileSettings,
    ) -> Result<CompileResult, CompileError> {
        let bin = self.cache.ensure(version)?;
        let input = standard_input(sources, settings);
        let _slot = acquire_slot();
        let mut child = Command::new(&bin)
            .arg("--standard-json")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        let mut stderr = child.stderr.take().expect("piped stderr");
        let err_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let status = match child.wait_timeout(self.timeout)? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(CompileError::Timeout(self.timeout));
            }
        };
        // A compiler that exits early closes stdin; the output decides.
        let _ = writer.join();
        let out = reader.join().expect("stdout reader")?;
        let stderr = err_reader.join().unwrap_or_default();
        let parsed = out.find('{').and_then(|i| serde_json::from_str::<StandardOutput>(&out[i..]).ok());
        let Some(parsed) = parsed else {
            return Err(CompileError::CompilerCrash {
                status: status.code(),
                stderr: if stderr.is_empty() { out } else { stderr },
            });
        };
        Ok(parsed.into_result(version))
    }
}

fn standard_input(sources: &BTreeMap<String, String>, settings: CompileSettings) -> String {
    let srcs: serde_json::Map<String, serde_json::Value> = sources
        .iter()
        .map(|(k, v)| (k.clone(), json!({ "content": v })))
        .collect();
    json!({
        "language": "Solidity",
        "sources": srcs,
        "settings": {
            "optimizer": { "enabled": settings.optimization, "runs": 200 },
            "outputSelection": { "*": { "*": ["abi", "evm.bytecode.object", "evm.methodIdentifiers"] } }
        }
    })
    .to_string()
}

#[derive(Debug, Deserialize)]
struct StandardOutput {
    #[serde(default)]
    errors: Vec<RawDiagnostic>,
    #[serde(default)]
    contracts: BTreeMap<String, BTreeMap<String, RawContract>>,
}

#[derive(Debug, Default, Deserialize)]
struct RawContract {
    #[serde(default)]
    abi: serde_json::Value,
    #[serde(default)]
    evm: RawEvm,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawEvm {
    #[serde(default)]
    bytecode: RawBytecode,
    #[serde(default)]
    method_identifiers: BTreeMap<String, String>,
}

#[derive(Debug, Default, Deserialize)]
struct RawBytecode {
    #[serde(default)]
    object: String,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawDiagnostic {
    severity: String,
    #[serde(default)]
    message: String,
    #[serde(default)]
    formatted_message: Option<String>,
    #[serde(default)]
    source_location: Option<Location>,
}

impl StandardOutput {
    fn into_result(self, version: &Version) -> CompileResult {
        let diagnostics: Vec<Diagnostic> = self
            .errors
            .into_iter()
            .map(|d| Diagnostic {
                severity: d.severity,
                message: if d.message.is_empty() {
                    d.formatted_message.unwrap_or_default()
                } else {
                    d.message
                },
                location: d.source_location,
            })
            .collect();
        let artifacts: BTreeMap<String, Artifact> = self
            .contracts
            .into_iter()
            .flat_map(|(file, cs)| {
                cs.into_iter().map(move |(name, c)| {
                    let a = Artifact {
                        abi: c.abi,
                        bytecode: c.evm.bytecode.object,
                        method_identifiers: c.evm.method_identifiers,
                    };
                    (format!("{file}:{name}"), a)
                })
            })
            .collect();
        let artifacts_present = !artifacts.is_empty();
        let success = artifacts_present && !diagnostics.iter().any(Diagnostic::is_error);
        CompileResult {
            success,
            compiler_version: version.to_string(),
            diagnostics,
            artifacts_present,
            artifacts,
        }
    }
}
