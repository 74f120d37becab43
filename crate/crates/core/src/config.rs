//! TOML run configuration.
//!
//! ```toml
//! [model]
//! m = 1
//!
//! [prior]
//! a = [4.0, 2.0]
//! b = [1.0, 1.0]
//! c = 0.4
//! d = 1.0
//!
//! [sampler]
//! kind = "hybrid"
//! r = 0.5
//! iterations = 1000
//! burnin = 100
//! thin = 1
//! seed = 42
//!
//! [io]
//! output_path = "chain.csv"
//! y = "y.csv"
//! x = "x.csv"
//! z = ["z1.csv"]
//! ```
//!
//! Relative data paths are resolved against the directory holding the config.
//! There are no default prior values.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DataPaths;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub prior: PriorSection,
    pub sampler: SamplerConfig,
    pub io: IoSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    #[serde(rename = "hybrid")]
    Hybrid,
    #[serde(rename = "gibbs_deterministic", alias = "gibbs")]
    GibbsDeterministic,
    #[serde(rename = "gibbs_random_scan", alias = "random-scan", alias = "random_scan")]
    GibbsRandomScan,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Hybrid => "hybrid",
            SamplerKind::GibbsDeterministic => "gibbs_deterministic",
            SamplerKind::GibbsRandomScan => "gibbs_random_scan",
        }
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(SamplerKind::Hybrid),
            "gibbs" | "gibbs_deterministic" => Ok(SamplerKind::GibbsDeterministic),
            "random-scan" | "random_scan" | "gibbs_random_scan" => Ok(SamplerKind::GibbsRandomScan),
            other => Err(Error::validation(format!(
                "unknown sampler '{other}' (expected hybrid, gibbs or random-scan)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Probability of the θ-update in the hybrid kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub iterations: usize,
    #[serde(default)]
    pub burnin: usize,
    #[serde(default = "one")]
    pub thin: usize,
    pub seed: u64,
    /// Selection probabilities of (τ, θ, λ) for the random-scan Gibbs kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_probs: Option<[f64; 3]>,
    #[serde(default)]
    pub store_tau: bool,
}

fn one() -> usize {
    1
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::validation("sampler.thin must be at least 1"));
        }
        match self.kind {
            SamplerKind::Hybrid => match self.r {
                Some(r) if r > 0.0 && r < 1.0 => {}
                Some(r) => return Err(Error::validation(format!("sampler.r must lie in (0, 1), got {r}"))),
                None => return Err(Error::validation("sampler.r is required for the hybrid sampler")),
            },
            SamplerKind::GibbsRandomScan => {
                if let Some(p) = self.scan_probs {
                    validate_scan_probs(&p)?;
                }
            }
            SamplerKind::GibbsDeterministic => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    pub output_path: PathBuf,
    pub y: PathBuf,
    pub x: PathBuf,
    pub z: Vec<PathBuf>,
}

/// User-supplied constants for the drift certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    pub c_star: Option<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.io.z.len() != self.model.m {
            return Err(Error::validation(format!(
                "io.z lists {} files but model.m = {}",
                self.io.z.len(),
                self.model.m
            )));
        }
        if self.prior.a.len() != self.model.m + 1 || self.prior.b.len() != self.model.m + 1 {
            return Err(Error::validation(format!(
                "prior.a and prior.b need m + 1 = {} entries",
                self.model.m + 1
            )));
        }
        Ok(())
    }

    /// Data paths resolved against `base` (usually the config's directory).
    pub fn data_paths(&self, base: &Path) -> DataPaths {
        DataPaths {
            y: self.io.y.clone(),
            x: self.io.x.clone(),
            z: self.io.z.clone(),
        }
        .relative_to(base)
    }
}

pub(crate) fn validate_scan_probs(p: &[f64; 3]) -> Result<()> {
    if p.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::validation(format!("scan probabilities must be positive, got {p:?}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::validation(format!("scan probabilities must sum to 1, got {total}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
[model]
m = 1

[prior]
a = [4.0, 2.0]
b = [1.0, 1.0]
c = 0.4
d = 1.0

[sampler]
kind = "hybrid"
r = 0.5
iterations = 10
seed = 3

[io]
output_path = "out.csv"
y = "y.csv"
x = "x.csv"
z = ["z1.csv"]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = Config::parse(TEXT).unwrap();
        assert_eq!(cfg.sampler.thin, 1);
        assert_eq!(cfg.sampler.kind, SamplerKind::Hybrid);
        let again = Config::parse(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn hybrid_requires_r() {
        let text = TEXT.replace("r = 0.5\n", "");
        assert!(Config::parse(&text).unwrap_err().to_string().contains("sampler.r"));
        let text = TEXT.replace("r = 0.5", "r = 1.0");
        assert!(Config::parse(&text).is_err());
    }

    #[test]
    fn sampler_aliases() {
        let text = TEXT.replace("\"hybrid\"", "\"random-scan\"");
        assert_eq!(Config::parse(&text).unwrap().sampler.kind, SamplerKind::GibbsRandomScan);
        assert_eq!("gibbs".parse::<SamplerKind>().unwrap(), SamplerKind::GibbsDeterministic);
        assert!("metropolis".parse::<SamplerKind>().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = TEXT.replace("c = 0.4", "c = 0.4\nlambda = 3");
        assert!(Config::parse(&text).is_err());
    }
}
