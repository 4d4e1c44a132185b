//! Flat `key = value` configuration with flag > config > default
//! precedence, and the errors that map to exit codes.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Keys that do not change results and stay out of the config hash.
const UNHASHED: &[&str] = &["out", "workers", "cache_dir", "cache_mode", "max_in_flight"];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    MissingInput(PathBuf),
    Provider(String),
    Failed(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Provider(_) => 4,
            CliError::Failed(_) => 1,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::MissingInput(p) => write!(f, "missing input: {}", p.display()),
            CliError::Provider(m) => write!(f, "provider failure: {m}"),
            CliError::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failed(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// On/off switch accepting `on|off|true|false|yes|no|1|0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Toggle(pub bool);

impl FromStr for Toggle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "on" | "true" | "yes" | "1" => Ok(Toggle(true)),
            "off" | "false" | "no" | "0" => Ok(Toggle(false)),
            other => Err(format!("expected on|off, got {other:?}")),
        }
    }
}

impl Display for Toggle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.0 { "on" } else { "off" })
    }
}

fn norm_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            if !path.is_file() {
                return Err(CliError::MissingInput(path.to_path_buf()));
            }
            let text = std::fs::read_to_string(path)?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1))
                })?;
                file.insert(norm_key(k), v.trim().to_string());
            }
        }
        Ok(Settings {
            file,
            resolved: BTreeMap::new(),
        })
    }

    fn parse<T: FromStr>(key: &str, raw: &str) -> CliResult<T>
    where
        T::Err: Display,
    {
        raw.parse()
            .map_err(|e| CliError::Usage(format!("invalid value for {key}: {e}")))
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(raw) => Some(Self::parse(key, raw)?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    pub fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        let v = self.optional(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn required<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<T>
    where
        T::Err: Display,
    {
        self.optional(key, flag)?.ok_or_else(|| {
            CliError::Usage(format!(
                "--{} is required (or set {key} in the config file)",
                key.replace('_', "-")
            ))
        })
    }

    /// A required input that must exist on disk.
    pub fn input(&mut self, key: &str, flag: Option<String>) -> CliResult<PathBuf> {
        let p = PathBuf::from(self.required(key, flag)?);
        if !p.exists() {
            return Err(CliError::MissingInput(p));
        }
        Ok(p)
    }

    pub fn optional_input(&mut self, key: &str, flag: Option<String>) -> CliResult<Option<PathBuf>> {
        match self.optional(key, flag)? {
            Some(p) => {
                let p = PathBuf::from(p);
                if !p.exists() {
                    return Err(CliError::MissingInput(p));
                }
                Ok(Some(p))
            }
            None => Ok(None),
        }
    }

    /// Resolved settings that affect results.
    pub fn hashed(&self) -> BTreeMap<String, String> {
        self.resolved
            .iter()
            .filter(|(k, _)| !UNHASHED.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }
}
