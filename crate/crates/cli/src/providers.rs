//! Provider ids: `mock-echo`, `mock-fixed:<text>`, `mock-bow`,
//! `mock-oracle` (probe only) and `http:<NAME>` (endpoint and token from
//! `CLOZEKIT_<NAME>_URL` / `CLOZEKIT_<NAME>_TOKEN`).

use std::path::PathBuf;
use std::time::Duration;

use clozekit::providers::{
    BagOfWordsEmbedder, CacheMode, DiskCache, EchoGenerator, Embedder, FixedGenerator, Generator,
    HttpConfig, HttpProvider, ProviderError,
};

use crate::settings::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct HttpOptions {
    pub cache_dir: Option<PathBuf>,
    pub cache_mode: CacheMode,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    pub retries: u32,
}

pub fn provider_error(e: ProviderError) -> CliError {
    CliError::Provider(e.to_string())
}

fn http(name: &str, opts: &HttpOptions) -> CliResult<HttpProvider> {
    let mut cfg = HttpConfig::from_env(name).map_err(provider_error)?;
    cfg.max_in_flight = opts.max_in_flight;
    cfg.timeout = Duration::from_secs(opts.timeout_secs);
    cfg.retry.max_attempts = opts.retries.max(1);
    let mut p = HttpProvider::from_config(cfg);
    if let Some(dir) = &opts.cache_dir {
        let cache = DiskCache::open(dir).map_err(provider_error)?;
        p = p.with_cache(cache, opts.cache_mode);
    }
    Ok(p)
}

pub fn generator(id: &str, opts: &HttpOptions) -> CliResult<Box<dyn Generator>> {
    if id == "mock-echo" {
        return Ok(Box::new(EchoGenerator));
    }
    if let Some(text) = id.strip_prefix("mock-fixed:") {
        return Ok(Box::new(FixedGenerator::new(text)));
    }
    if let Some(name) = id.strip_prefix("http:") {
        return Ok(Box::new(http(name, opts)?));
    }
    Err(CliError::Usage(format!(
        "unknown generator {id:?} (mock-echo, mock-fixed:<text>, http:<NAME>)"
    )))
}

pub fn embedder(id: &str, opts: &HttpOptions) -> CliResult<Box<dyn Embedder>> {
    if id == "mock-bow" {
        return Ok(Box::new(BagOfWordsEmbedder::default()));
    }
    if let Some(name) = id.strip_prefix("http:") {
        return Ok(Box::new(http(name, opts)?));
    }
    Err(CliError::Usage(format!("unknown embedder {id:?} (mock-bow, http:<NAME>)")))
}
