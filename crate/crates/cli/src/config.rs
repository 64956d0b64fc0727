use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use flames_core::abstraction::DEFAULT_BUDGET;
use flames_core::compile::{Compiler, CompilerCache, ReleaseSource, CACHE_ENV};
use flames_core::equiv::{EquivConfig, SmtBridge};
use flames_core::synth::{CounterChoice, KEY_ENV};
use serde::Deserialize;

pub const CONFIG_ENV: &str = "FLAMES_CONFIG";
pub const BACKEND_URL_ENV: &str = "FLAMES_BACKEND_URL";
pub const JOBS_ENV: &str = "FLAMES_JOBS";

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub url: Option<String>,
    /// Name of the environment variable holding the bearer key.
    pub key_env: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            url: None,
            key_env: KEY_ENV.to_string(),
            timeout_secs: 60,
            retries: 2,
            backoff_ms: 500,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CompilerSection {
    pub cache_dir: Option<PathBuf>,
    pub timeout_secs: u64,
    /// Fetch missing releases from the official list.
    pub download: bool,
    pub optimization: bool,
}

impl Default for CompilerSection {
    fn default() -> Self {
        Self {
            cache_dir: None,
            timeout_secs: 60,
            download: false,
            optimization: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EquivSection {
    pub timeout_ms: u64,
    pub bounded: bool,
    pub node_budget: usize,
    pub solver: Option<SmtBridge>,
}

impl Default for EquivSection {
    fn default() -> Self {
        let d = EquivConfig::default();
        Self {
            timeout_ms: d.timeout.as_millis() as u64,
            bounded: d.bounded,
            node_budget: d.node_budget,
            solver: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub jobs: usize,
    pub budget: usize,
    pub tokenizer: CounterChoice,
    pub dedup_threshold: f64,
    pub backend: BackendSection,
    pub compiler: CompilerSection,
    pub equiv: EquivSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            jobs: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            budget: DEFAULT_BUDGET,
            tokenizer: CounterChoice::Lexical,
            dedup_threshold: 0.9,
            backend: BackendSection::default(),
            compiler: CompilerSection::default(),
            equiv: EquivSection::default(),
        }
    }
}

/// Values given on the command line; `None` leaves lower layers in charge.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub jobs: Option<usize>,
    pub budget: Option<usize>,
    pub solc_cache: Option<PathBuf>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// File (explicit path, else `$FLAMES_CONFIG`), then environment, then flags.
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let path = path.map(Path::to_path_buf).or_else(|| env(CONFIG_ENV).map(PathBuf::from));
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p).with_context(|| format!("reading config {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Self::default(),
        };
        cfg.apply_env()?;
        cfg.apply(flags);
        Ok(cfg)
    }

    fn apply_env(&mut self) -> Result<()> {
        if let Some(dir) = env(CACHE_ENV) {
            self.compiler.cache_dir = Some(dir.into());
        }
        if let Some(url) = env(BACKEND_URL_ENV) {
            self.backend.url = Some(url);
        }
        if let Some(j) = env(JOBS_ENV) {
            self.jobs = j.parse().with_context(|| format!("{JOBS_ENV}={j} is not a number"))?;
        }
        Ok(())
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
        if let Some(b) = o.budget {
            self.budget = b;
        }
        if let Some(d) = &o.solc_cache {
            self.compiler.cache_dir = Some(d.clone());
        }
    }

    pub fn jobs(&self) -> usize {
        self.jobs.max(1)
    }

    pub fn compiler(&self) -> Compiler {
        let root = self.compiler.cache_dir.clone().unwrap_or_else(CompilerCache::default_root);
        let mut cache = CompilerCache::new(root);
        if self.compiler.download {
            cache = cache.online(ReleaseSource::official());
        }
        let mut c = Compiler::new(cache);
        c.timeout = Duration::from_secs(self.compiler.timeout_secs);
        c
    }

    pub fn equiv(&self) -> EquivConfig {
        EquivConfig {
            timeout: Duration::from_millis(self.equiv.timeout_ms),
            bounded: self.equiv.bounded,
            node_budget: self.equiv.node_budget,
            bridge: self.equiv.solver.clone(),
        }
    }

    pub fn backend_key(&self) -> Option<String> {
        env(&self.backend.key_env)
    }
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}
