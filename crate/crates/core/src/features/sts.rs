//! External semantic textual similarity (STS) scores with a persistent,
//! order-insensitive cache.
//!
//! The cache file holds `pairhash<TAB>score` lines and is only ever appended
//! to; when a hash appears more than once the last line wins.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StsError {
    #[error("STS request failed: {0}")]
    Network(String),
    #[error("no cached STS score for pair {key} and the provider is offline")]
    OfflineCacheMiss { key: String },
    #[error("STS provider returned a non-numeric body: {0:?}")]
    NonNumeric(String),
    #[error("STS score {0} outside [0, 1] after scaling")]
    OutOfRange(f64),
    #[error("STS cache {path}: {message}")]
    Cache { path: String, message: String },
}

impl StsError {
    /// Network failures may succeed on retry; everything else will not.
    pub fn is_retriable(&self) -> bool {
        matches!(self, StsError::Network(_))
    }
}

/// A similarity oracle returning scores in `[0, 1]`. Implementations are
/// expected to be symmetric; the cache enforces this by always querying
/// with the pair in canonical order.
pub trait StsProvider: Send + Sync {
    fn sts(&self, a: &str, b: &str) -> Result<f64, StsError>;
}

/// Returns the same score for every pair.
#[derive(Debug, Clone, Copy)]
pub struct ConstantStsProvider(pub f64);

impl StsProvider for ConstantStsProvider {
    fn sts(&self, _a: &str, _b: &str) -> Result<f64, StsError> {
        Ok(self.0)
    }
}

/// Queries a remote service with `GET endpoint?<param_a>=..&<param_b>=..`;
/// the response body is a bare number, divided by `scale`.
#[derive(Debug, Clone)]
pub struct HttpStsProvider {
    pub endpoint: String,
    pub timeout: Duration,
    pub scale: f64,
    pub param_a: String,
    pub param_b: String,
}

impl HttpStsProvider {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpStsProvider {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(10),
            scale: 1.0,
            param_a: "phrase1".into(),
            param_b: "phrase2".into(),
        }
    }
}

impl StsProvider for HttpStsProvider {
    fn sts(&self, a: &str, b: &str) -> Result<f64, StsError> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into();
        let mut response = agent
            .get(&self.endpoint)
            .query(&self.param_a, a)
            .query(&self.param_b, b)
            .call()
            .map_err(|e| StsError::Network(e.to_string()))?;
        let body = response.body_mut().read_to_string().map_err(|e| StsError::Network(e.to_string()))?;
        let raw: f64 = body.trim().parse().map_err(|_| StsError::NonNumeric(body.clone()))?;
        if !raw.is_finite() {
            return Err(StsError::NonNumeric(body));
        }
        Ok(raw / self.scale)
    }
}

/// Canonical cache key: SHA-256 over the length-prefixed pair in sorted order.
pub fn pair_key(a: &str, b: &str) -> String {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut h = Sha256::new();
    for s in [lo, hi] {
        h.update((s.len() as u64).to_le_bytes());
        h.update(s.as_bytes());
    }
    hex::encode(h.finalize())
}

/// Write-through score cache. Reads are concurrent; appends are serialized.
#[derive(Debug, Default)]
pub struct StsCache {
    path: Option<PathBuf>,
    scores: RwLock<HashMap<String, f64>>,
    writer: Mutex<Option<File>>,
}

impl StsCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or lazily creates) a cache file.
    pub fn open(path: &Path) -> Result<Self, StsError> {
        let cache_err = |message: String| StsError::Cache { path: path.display().to_string(), message };
        let mut scores = HashMap::new();
        match std::fs::read_to_string(path) {
            Ok(text) => {
                for (i, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let (key, score) =
                        line.split_once('\t').ok_or_else(|| cache_err(format!("line {}: expected `hash<TAB>score`", i + 1)))?;
                    let score: f64 = score.trim().parse().map_err(|_| cache_err(format!("line {}: bad score `{score}`", i + 1)))?;
                    scores.insert(key.to_string(), score);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(cache_err(e.to_string())),
        }
        Ok(StsCache { path: Some(path.to_path_buf()), scores: RwLock::new(scores), writer: Mutex::new(None) })
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.scores.read().unwrap().get(&pair_key(a, b)).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&self, a: &str, b: &str, score: f64) -> Result<(), StsError> {
        let key = pair_key(a, b);
        let mut writer = self.writer.lock().unwrap();
        if let Some(path) = &self.path {
            let cache_err = |e: std::io::Error| StsError::Cache { path: path.display().to_string(), message: e.to_string() };
            if writer.is_none() {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent).map_err(cache_err)?;
                }
                *writer = Some(OpenOptions::new().create(true).append(true).open(path).map_err(cache_err)?);
            }
            let file = writer.as_mut().expect("writer opened above");
            writeln!(file, "{key}\t{score}").map_err(cache_err)?;
            file.flush().map_err(cache_err)?;
        }
        self.scores.write().unwrap().insert(key, score);
        Ok(())
    }
}

/// Cached STS score. On a miss the provider is queried with the pair in
/// canonical order and the result persisted; with no provider (offline) a
/// miss is an error.
pub fn external_sts(a: &str, b: &str, provider: Option<&dyn StsProvider>, cache: &StsCache) -> Result<f64, StsError> {
    if let Some(score) = cache.get(a, b) {
        return Ok(score);
    }
    let Some(provider) = provider else {
        return Err(StsError::OfflineCacheMiss { key: pair_key(a, b) });
    };
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let score = provider.sts(lo, hi)?;
    if !(0.0..=1.0).contains(&score) {
        return Err(StsError::OutOfRange(score));
    }
    cache.insert(a, b, score)?;
    Ok(score)
}
