use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde_json::Value;

use super::ProviderError;

const LOCK_STRIPES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CacheMode {
    /// Serve hits, store misses.
    #[default]
    ReadWrite,
    /// Serve hits only; a miss is an error.
    Replay,
    Off,
}

impl std::str::FromStr for CacheMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "read_write" | "readwrite" | "rw" | "on" => Ok(CacheMode::ReadWrite),
            "replay" => Ok(CacheMode::Replay),
            "off" => Ok(CacheMode::Off),
            other => Err(format!("unknown cache mode {other:?} (read_write|replay|off)")),
        }
    }
}

/// Content-addressed store of JSON responses: `<dir>/<k[..2]>/<k>.json`.
/// Writes go through a temp file and a rename, serialized per key stripe.
#[derive(Debug)]
pub struct DiskCache {
    dir: PathBuf,
    locks: Vec<Mutex<()>>,
}

fn cache_err(path: &Path, e: impl std::fmt::Display) -> ProviderError {
    ProviderError::Cache(format!("{}: {e}", path.display()))
}

impl DiskCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| cache_err(&dir, e))?;
        Ok(DiskCache {
            dir,
            locks: (0..LOCK_STRIPES).map(|_| Mutex::new(())).collect(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("xx");
        self.dir.join(shard).join(format!("{key}.json"))
    }

    fn stripe(&self, key: &str) -> &Mutex<()> {
        let h = key
            .bytes()
            .fold(0usize, |acc, b| acc.wrapping_mul(31).wrapping_add(b as usize));
        &self.locks[h % LOCK_STRIPES]
    }

    pub fn get(&self, key: &str) -> Result<Option<Value>, ProviderError> {
        let path = self.path(key);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| cache_err(&path, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(cache_err(&path, e)),
        }
    }

    pub fn put(&self, key: &str, value: &Value) -> Result<(), ProviderError> {
        let path = self.path(key);
        let parent = path.parent().expect("cache paths have a parent");
        let _guard = self.stripe(key).lock().unwrap_or_else(|p| p.into_inner());
        fs::create_dir_all(parent).map_err(|e| cache_err(parent, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| cache_err(parent, e))?;
        serde_json::to_writer(&mut tmp, value).map_err(|e| cache_err(&path, e))?;
        tmp.flush().map_err(|e| cache_err(&path, e))?;
        tmp.persist(&path).map_err(|e| cache_err(&path, e.error))?;
        Ok(())
    }
}
