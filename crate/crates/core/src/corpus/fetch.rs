use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use thiserror::Error;

use super::{is_valid_address, Language, RawContractRecord};

/// Block-explorer access (Etherscan-compatible `getsourcecode` endpoint).
#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub endpoint: String,
    pub api_key: String,
    /// Raw responses are stored here and replayed on later calls.
    pub cache_dir: Option<PathBuf>,
    /// Serve from `cache_dir` only; a miss is a transport error.
    pub offline: bool,
    pub timeout: Duration,
    /// Minimum spacing between outgoing requests in this process.
    pub min_interval: Duration,
    /// How many times an HTTP 429 is waited out before giving up.
    pub max_retries: u32,
    /// Cap on any single retry-after wait.
    pub max_backoff: Duration,
}

impl ApiConfig {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            cache_dir: None,
            offline: false,
            timeout: Duration::from_secs(30),
            min_interval: Duration::from_millis(200),
            max_retries: 2,
            max_backoff: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("{address}: source is not verified")]
    NotVerified { address: String },
    #[error("rate limited{}", retry_after.map(|d| format!(", retry after {}s", d.as_secs())).unwrap_or_default())]
    RateLimited { retry_after: Option<Duration> },
    #[error("transport error: {0}")]
    TransportError(String),
}

static LAST_REQUEST: Mutex<Option<Instant>> = Mutex::new(None);

#[derive(Deserialize)]
struct Envelope {
    status: String,
    #[serde(default)]
    message: String,
    result: serde_json::Value,
}

#[derive(Deserialize)]
#[serde(rename_all = "PascalCase")]
struct SourceEntry {
    source_code: String,
    #[serde(rename = "ABI", default)]
    abi: String,
    contract_name: String,
    compiler_version: String,
    #[serde(default)]
    optimization_used: String,
    #[serde(default)]
    license_type: String,
}

/// Retrieves the verified source of `address`.
pub fn fetch_verified_source(address: &str, cfg: &ApiConfig) -> Result<RawContractRecord, FetchError> {
    if !is_valid_address(address) {
        return Err(FetchError::TransportError(format!("invalid address `{address}`")));
    }
    let cache_file = cfg
        .cache_dir
        .as_ref()
        .map(|d| d.join(format!("{}.json", address.to_ascii_lowercase())));
    if let Some(path) = &cache_file {
        if let Ok(body) = std::fs::read_to_string(path) {
            return parse_response(address, &body);
        }
    }
    if cfg.offline {
        return Err(FetchError::TransportError(format!("{address}: not in cache (offline)")));
    }
    let body = request(address, cfg)?;
    let record = parse_response(address, &body);
    if let (Some(path), Ok(_) | Err(FetchError::NotVerified { .. })) = (&cache_file, &record) {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| FetchError::TransportError(e.to_string()))?;
        }
        std::fs::write(path, &body).map_err(|e| FetchError::TransportError(e.to_string()))?;
    }
    record
}

fn request(address: &str, cfg: &ApiConfig) -> Result<String, FetchError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(cfg.timeout))
        .build()
        .into();
    let mut attempt = 0;
    loop {
        pace(cfg.min_interval);
        let mut resp = agent
            .get(&cfg.endpoint)
            .query("module", "contract")
            .query("action", "getsourcecode")
            .query("address", address)
            .query("apikey", &cfg.api_key)
            .call()
            .map_err(|e| FetchError::TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 {
            let retry_after = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            if attempt >= cfg.max_retries {
                return Err(FetchError::RateLimited { retry_after });
            }
            attempt += 1;
            let wait = retry_after.unwrap_or(Duration::from_secs(1 << attempt.min(5)));
            tracing::warn!(address, ?wait, "explorer rate limit, backing off");
            std::thread::sleep(wait.min(cfg.max_backoff));
            continue;
        }
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| FetchError::TransportError(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(FetchError::TransportError(format!("HTTP {status}")));
        }
        return Ok(body);
    }
}

fn pace(min_interval: Duration) {
    let mut last = LAST_REQUEST.lock().unwrap_or_else(|p| p.into_inner());
    if let Some(t) = *last {
        let since = t.elapsed();
        if since < min_interval {
            std::thread::sleep(min_interval - since);
        }
    }
    *last = Some(Instant::now());
}

fn parse_response(address: &str, body: &str) -> Result<RawContractRecord, FetchError> {
    let env: Envelope =
        serde_json::from_str(body).map_err(|e| FetchError::TransportError(format!("bad response body: {e}")))?;
    if env.status != "1" {
        let text = env.result.as_str().unwrap_or(&env.message).to_ascii_lowercase();
        if text.contains("rate limit") {
            return Err(FetchError::RateLimited { retry_after: None });
        }
        if text.contains("not verified") {
            return Err(FetchError::NotVerified {
                address: address.to_string(),
            });
        }
        return Err(FetchError::TransportError(format!("explorer error: {text}")));
    }
    let entries: Vec<SourceEntry> = serde_json::from_value(env.result)
        .map_err(|e| FetchError::TransportError(format!("bad result: {e}")))?;
    let entry = entries
        .into_iter()
        .next()
        .ok_or_else(|| FetchError::TransportError("empty result".into()))?;
    if entry.source_code.trim().is_empty() || entry.abi.contains("not verified") {
        return Err(FetchError::NotVerified {
            address: address.to_string(),
        });
    }
    let language = if entry.compiler_version.starts_with("vyper") {
        Language::Vyper
    } else {
        Language::Solidity
    };
    Ok(RawContractRecord {
        address: address.to_string(),
        contract_name: entry.contract_name,
        language,
        source_payload: entry.source_code,
        compiler_version: entry.compiler_version,
        license: entry.license_type,
        optimization: entry.optimization_used == "1",
        abi: (!entry.abi.is_empty()).then_some(entry.abi),
    })
}
