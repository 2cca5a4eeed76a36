use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::heat::HeatKernel;
use crate::spectral::SpectralBasis;

/// Keys understood by every command.
const COMMON_KEYS: &[&str] = &[
    "basis",
    "levels",
    "quad_order",
    "basis_file",
    "horizon",
    "t_min",
    "tol",
    "out",
];

/// A resolved run configuration: `key = value` lines from the config file,
/// overridden by `--set key=value` flags.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut values = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        values.insert(key.to_string(), value.trim().to_string());
    }
    Ok(values)
}

impl RunConfig {
    pub fn new(file: Option<&Path>, overrides: &[String], allowed: &[&str]) -> Result<Self> {
        let mut values = match file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        if let Some(key) = values
            .keys()
            .find(|k| !COMMON_KEYS.contains(&k.as_str()) && !allowed.contains(&k.as_str()))
        {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        Ok(RunConfig { values })
    }

    pub fn set_default(&mut self, key: &str, value: impl Into<String>) {
        self.values
            .entry(key.to_string())
            .or_insert_with(|| value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    pub fn real(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn real_required(&self, key: &str) -> Result<f64> {
        self.parsed(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn count(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn seed(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Comma- or whitespace-separated reals.
    pub fn reals(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{s}`")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.path("out").unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn horizon(&self) -> Result<f64> {
        self.real("horizon", 1.0)
    }

    /// The basis named by `basis` (`interval`, `disk` or `import`).
    pub fn basis(&self) -> Result<Arc<SpectralBasis>> {
        let kind = self.string("basis", "interval");
        let basis = match kind.as_str() {
            "interval" | "disk" => {
                let levels = self.count("levels", 40)?;
                let quad_order = self.count("quad_order", (2 * levels + 32).max(64))?;
                if kind == "interval" {
                    SpectralBasis::interval(levels, quad_order)?
                } else {
                    SpectralBasis::disk(levels, quad_order)?
                }
            }
            "import" => {
                let path = self
                    .path("basis_file")
                    .ok_or_else(|| Error::Config("`basis = import` needs `basis_file`".into()))?;
                let file = fs::File::open(&path)
                    .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
                SpectralBasis::import(BufReader::new(file))?
            }
            other => {
                return Err(Error::Config(format!(
                    "`basis`: unknown kind `{other}` (interval, disk, import)"
                )))
            }
        };
        Ok(Arc::new(basis))
    }

    pub fn kernel(&self, basis: Arc<SpectralBasis>) -> Result<Arc<HeatKernel>> {
        let t_min = self.real("t_min", 0.05)?;
        let tol = self.real("tol", 1e-10)?;
        Ok(Arc::new(HeatKernel::new(basis, t_min, tol)?))
    }

    /// Resolved configuration as sorted `key=value` lines.
    pub fn resolved(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.resolved().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
