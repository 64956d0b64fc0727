use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use semver::Version;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::CompileError;

pub const CACHE_ENV: &str = "FLAMES_SOLC_CACHE";
pub const OFFICIAL_LIST: &str = "https://binaries.soliditylang.org/linux-amd64";

/// Versioned compiler binaries laid out as `<root>/<version>/solc`.
#[derive(Debug, Clone)]
pub struct CompilerCache {
    pub root: PathBuf,
    /// Release list to download missing versions from. `None` means offline.
    pub source: Option<ReleaseSource>,
}

impl CompilerCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            source: None,
        }
    }

    /// `$FLAMES_SOLC_CACHE`, else `~/.cache/flames/solc`.
    pub fn default_root() -> PathBuf {
        if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
            return PathBuf::from(dir);
        }
        let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
        home.join(".cache/flames/solc")
    }

    pub fn from_env() -> Self {
        Self::new(Self::default_root())
    }

    pub fn online(mut self, source: ReleaseSource) -> Self {
        self.source = Some(source);
        self
    }

    pub fn binary(&self, version: &Version) -> PathBuf {
        self.root.join(version.to_string()).join("solc")
    }

    /// Installed versions, ascending.
    pub fn installed(&self) -> Vec<Version> {
        let Ok(entries) = fs::read_dir(&self.root) else {
            return Vec::new();
        };
        let mut out: Vec<Version> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| Version::parse(e.file_name().to_str()?).ok())
            .filter(|v| self.binary(v).is_file())
            .collect();
        out.sort();
        out
    }

    /// Path to the binary for `version`, downloading it when missing and
    /// a release source is configured.
    pub fn ensure(&self, version: &Version) -> Result<PathBuf, CompileError> {
        let bin = self.binary(version);
        if bin.is_file() {
            return Ok(bin);
        }
        let Some(source) = &self.source else {
            return Err(CompileError::NotInstalled(version.clone()));
        };
        fs::create_dir_all(&self.root)?;
        let lock = File::create(self.root.join(".lock"))?;
        lock.lock()?;
        let result = if bin.is_file() {
            Ok(bin)
        } else {
            source.download(version, &bin).map(|_| bin)
        };
        lock.unlock()?;
        result
    }
}

#[derive(Debug, Deserialize)]
struct ReleaseList {
    builds: Vec<Build>,
}

#[derive(Debug, Deserialize)]
struct Build {
    path: String,
    version: String,
    #[serde(default)]
    prerelease: Option<String>,
    sha256: String,
}

/// A solc-bin style directory: `<base>/list.json` plus the binaries it names.
#[derive(Debug, Clone)]
pub struct ReleaseSource {
    pub base_url: String,
    pub timeout: Duration,
}

impl ReleaseSource {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeout: Duration::from_secs(120),
        }
    }

    pub fn official() -> Self {
        Self::new(OFFICIAL_LIST)
    }

    fn get(&self, agent: &ureq::Agent, url: &str) -> Result<Vec<u8>, CompileError> {
        let fetch = |e: ureq::Error| CompileError::Fetch(format!("{url}: {e}"));
        let mut resp = agent.get(url).call().map_err(fetch)?;
        let mut buf = Vec::new();
        resp.body_mut()
            .with_config()
            .limit(512 * 1024 * 1024)
            .reader()
            .read_to_end(&mut buf)?;
        Ok(buf)
    }

    fn download(&self, version: &Version, dest: &Path) -> Result<(), CompileError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let list: ReleaseList = serde_json::from_slice(&self.get(&agent, &format!("{}/list.json", self.base_url))?)
            .map_err(|e| CompileError::Fetch(format!("release list: {e}")))?;
        let wanted = version.to_string();
        let build = list
            .builds
            .iter()
            .find(|b| b.version == wanted && b.prerelease.is_none())
            .ok_or_else(|| CompileError::Fetch(format!("release list has no solc {wanted}")))?;
        let bytes = self.get(&agent, &format!("{}/{}", self.base_url, build.path))?;
        let actual = hex::encode(Sha256::digest(&bytes));
        let expected = build.sha256.trim_start_matches("0x").to_ascii_lowercase();
        if actual != expected {
            return Err(CompileError::Fetch(format!(
                "checksum mismatch for solc {wanted}: expected {expected}, got {actual}"
            )));
        }
        let dir = dest.parent().expect("binary path has a parent");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        std::io::Write::write_all(&mut tmp, &bytes)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o755))?;
        }
        tmp.persist(dest).map_err(|e| CompileError::Io(e.error))?;
        tracing::info!(version = %wanted, path = %dest.display(), "installed compiler");
        Ok(())
    }
}
