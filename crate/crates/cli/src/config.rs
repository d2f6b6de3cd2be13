//! Pipeline configuration file (TOML).
//!
//! Precedence: built-in defaults, then the config file, then command-line
//! flags. Unknown keys anywhere in the file are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vesselfuse::partition::{BifurcationRadius, SizeClass, SizeIntervals, SizeMeasure};
use vesselfuse::vesselness::FilterParams;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Ircad,
    Bullitt,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Nn,
    Bspline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionConfig {
    pub preset: Preset,
    /// Custom preset only.
    pub classes: Option<Vec<SizeClass>>,
    /// Custom preset only: upper bounds in mm of every class but the last.
    pub cuts: Option<Vec<f64>>,
    pub size_measure: SizeMeasure,
    pub bifurcation_radius: BifurcationRadius,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            preset: Preset::Ircad,
            classes: None,
            cuts: None,
            size_measure: SizeMeasure::Diameter,
            bifurcation_radius: BifurcationRadius::default(),
        }
    }
}

impl PartitionConfig {
    pub fn intervals(&self) -> CliResult<SizeIntervals> {
        let mut s = match self.preset {
            Preset::Ircad => SizeIntervals::ircad(),
            Preset::Bullitt => SizeIntervals::bullitt(),
            Preset::Custom => {
                let (Some(classes), Some(cuts)) = (self.classes.clone(), self.cuts.clone()) else {
                    return Err(CliError::usage("preset \"custom\" needs partition.classes and partition.cuts"));
                };
                SizeIntervals::custom(classes, cuts).map_err(|e| CliError::usage(e.to_string()))?
            }
        };
        if self.preset != Preset::Custom && (self.classes.is_some() || self.cuts.is_some()) {
            return Err(CliError::usage("partition.classes / partition.cuts are only valid with preset \"custom\""));
        }
        s.measure = self.size_measure;
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResampleConfig {
    /// Interpolation for intensity volumes.
    pub scan: Interp,
    /// Interpolation for binary masks.
    pub mask: Interp,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig { scan: Interp::Bspline, mask: Interp::Nn }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub filters: FilterParams,
    pub partition: PartitionConfig,
    pub resample: ResampleConfig,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let cfg = match path {
            None => PipelineConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::usage(format!("invalid config {}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.threads == Some(0) {
            return Err(CliError::usage("threads must be >= 1"));
        }
        self.filters.validate().map_err(|e| CliError::usage(format!("filters: {e}")))?;
        self.partition.intervals()?;
        self.partition
            .bifurcation_radius
            .validate()
            .map_err(|e| CliError::usage(format!("partition: {e}")))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding settings that cannot
    /// change results (thread count, output directory).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.threads = None;
        c.output_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
