use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    /// Checkpoint used to score closed sessions.
    pub checkpoint: Option<PathBuf>,
    /// Scoring jobs allowed to run at once.
    pub workers: usize,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub token: Option<String>,
    /// Largest accepted request body, bytes.
    pub max_body: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            data_dir: PathBuf::from("gazereader-data"),
            checkpoint: None,
            workers: 2,
            token: None,
            max_body: 16 << 20,
        }
    }
}

pub const ENV_PREFIX: &str = "GAZEREADER_";

impl ServiceConfig {
    /// Reads a JSON config file, or the defaults when `path` is `None`, then
    /// applies `GAZEREADER_*` environment overrides.
    pub fn load(path: Option<&Path>) -> ServiceResult<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(|e| ServiceError::BadRequest(format!("{}: {e}", p.display())))?
            }
            None => ServiceConfig::default(),
        };
        cfg.apply_overrides(|k| std::env::var(format!("{ENV_PREFIX}{k}")).ok())?;
        Ok(cfg)
    }

    /// `BIND`, `DATA_DIR`, `CHECKPOINT`, `WORKERS`, `TOKEN`, `MAX_BODY`.
    pub fn apply_overrides(&mut self, get: impl Fn(&str) -> Option<String>) -> ServiceResult<()> {
        let bad = |k: &str, v: &str| ServiceError::BadRequest(format!("{ENV_PREFIX}{k}={v:?} is not valid"));
        if let Some(v) = get("BIND") {
            self.bind = v.parse().map_err(|_| bad("BIND", &v))?;
        }
        if let Some(v) = get("DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = get("CHECKPOINT") {
            self.checkpoint = (!v.is_empty()).then(|| v.into());
        }
        if let Some(v) = get("WORKERS") {
            self.workers = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| bad("WORKERS", &v))?;
        }
        if let Some(v) = get("TOKEN") {
            self.token = (!v.is_empty()).then_some(v);
        }
        if let Some(v) = get("MAX_BODY") {
            self.max_body = v.parse().map_err(|_| bad("MAX_BODY", &v))?;
        }
        if self.workers == 0 {
            return Err(ServiceError::BadRequest("workers must be at least 1".into()));
        }
        Ok(())
    }
}
