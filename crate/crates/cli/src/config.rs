//! Optional TOML config file and flag resolution. Precedence is CLI flag,
//! then config file, then built-in default; the resolved values are written
//! next to the outputs as `effective-config.toml`.

use std::ops::RangeInclusive;
use std::path::Path;

use serde::Deserialize;
use spherecc::error::{Error, Result};
use spherecc::geometry::minimal_admissible_omega;
use spherecc::trainer::{BatchSpec, OmegaSpec};

/// Flat key-value file mirroring the long flag names. Unknown keys are
/// rejected so typos fail loudly instead of silently using a default.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub separation: Option<f64>,
    pub spread: Option<f64>,
    pub test_fraction: Option<f64>,
    pub constraints: Option<usize>,
    pub embed_dim: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub lr: Option<f64>,
    pub lambda: Option<f64>,
    pub omega: Option<String>,
    pub epochs_max: Option<usize>,
    pub constraint_batch: Option<usize>,
    pub instance_batch: Option<String>,
    pub early_stop_warmup: Option<usize>,
    pub early_stop_rel_tol: Option<f64>,
    pub early_stop_patience: Option<usize>,
    pub standardize: Option<bool>,
    pub k: Option<usize>,
    pub method: Option<String>,
    pub restarts: Option<usize>,
    pub rho: Option<f64>,
    pub k_range: Option<String>,
    pub subsample: Option<usize>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::BadFormat {
            what: format!("config file {}: {e}", path.display()),
        })
    }
}

/// `auto`, `exact` (the tightest admissible factor for `k` clusters), or a
/// literal float.
pub fn parse_omega(s: &str, k: Option<usize>) -> Result<OmegaSpec> {
    match s {
        "auto" => Ok(OmegaSpec::Auto),
        "exact" => {
            let k = k.ok_or_else(|| Error::InvalidParameter {
                what: "--omega exact requires --k".into(),
            })?;
            Ok(OmegaSpec::Fixed(minimal_admissible_omega(k)?))
        }
        other => other
            .parse::<f64>()
            .map(OmegaSpec::Fixed)
            .map_err(|_| Error::InvalidParameter {
                what: format!("omega must be auto, exact, or a number, got {other:?}"),
            }),
    }
}

/// `auto` or a literal count.
pub fn parse_instance_batch(s: &str) -> Result<BatchSpec> {
    match s {
        "auto" => Ok(BatchSpec::Auto),
        other => other
            .parse::<usize>()
            .map(BatchSpec::Fixed)
            .map_err(|_| Error::InvalidParameter {
                what: format!("instance batch must be auto or a count, got {other:?}"),
            }),
    }
}

/// `lo:hi` inclusive, e.g. `2:9`.
pub fn parse_k_range(s: &str) -> Result<RangeInclusive<usize>> {
    let bad = || Error::InvalidParameter {
        what: format!("k range must look like lo:hi, got {s:?}"),
    };
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    Ok(lo..=hi)
}

pub fn write_effective<T: serde::Serialize>(dir: &Path, cfg: &T) -> Result<()> {
    let text = toml::to_string_pretty(cfg).map_err(|e| Error::BadFormat {
        what: format!("effective config serialization: {e}"),
    })?;
    std::fs::write(dir.join("effective-config.toml"), text)?;
    Ok(())
}
