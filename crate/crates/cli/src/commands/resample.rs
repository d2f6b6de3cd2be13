use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use log::info;
use serde::Serialize;
use vesselfuse::io::{read_mask, read_volume, write_mask, write_volume};
use vesselfuse::resample::{finest_isotropic_spacing, resample_isotropic, resample_mask, resample_nearest};
use vesselfuse::BinaryMask;

use super::sidecar_path;
use crate::config::{Interp, PipelineConfig};
use crate::error::{CliError, CliResult, Context};
use crate::provenance::Provenance;

/// `auto` or explicit spacing in mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Spacing {
    Auto,
    Mm([f64; 3]),
}

impl FromStr for Spacing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Spacing::Auto);
        }
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad spacing '{t}': {e}")))
            .collect::<Result<_, _>>()?;
        let mm = match v[..] {
            [a] => [a; 3],
            [a, b, c] => [a, b, c],
            _ => return Err(format!("spacing needs 1 or 3 values, got {}", v.len())),
        };
        if mm.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(format!("spacing must be positive, got {s}"));
        }
        Ok(Spacing::Mm(mm))
    }
}

#[derive(Debug, Args)]
pub struct ResampleArgs {
    /// Input NIfTI volume.
    pub input: PathBuf,
    /// Target spacing: `auto` (finest input spacing on all axes), `s` or `x,y,z` in mm.
    #[arg(long, default_value = "auto")]
    pub spacing: Spacing,
    /// Treat the input as a binary mask.
    #[arg(long)]
    pub mask: bool,
    /// Interpolation for masks; implies --mask. Defaults to the config value (nn).
    #[arg(long, value_enum)]
    pub mask_mode: Option<Interp>,
    /// Output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Params {
    spacing: [f64; 3],
    kind: &'static str,
    interpolation: Interp,
}

impl ResampleArgs {
    pub fn run(self, cfg: &PipelineConfig) -> CliResult<()> {
        let is_mask = self.mask || self.mask_mode.is_some();
        if let Some(dir) = self.out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Data(anyhow::anyhow!("cannot create {}: {e}", dir.display())))?;
        }
        let params = if is_mask {
            let mode = self.mask_mode.unwrap_or(cfg.resample.mask);
            let m = read_mask(&self.input).context_path("reading", &self.input)?;
            let target = self.target(m.geometry());
            let out = match mode {
                Interp::Nn => resample_mask(&m, target)?,
                Interp::Bspline => {
                    let v = resample_isotropic(&m.to_volume::<f64>(), target)?;
                    BinaryMask::from_fn(*v.geometry(), |x, y, z| v.get(x, y, z) >= 0.5)
                }
            };
            info!("mask {:?} -> {:?}, {} -> {} voxels", m.dims(), out.dims(), m.count(), out.count());
            write_mask(&out, &self.out).context_path("writing", &self.out)?;
            Params { spacing: target, kind: "mask", interpolation: mode }
        } else {
            let mode = cfg.resample.scan;
            let v = read_volume::<f64>(&self.input).context_path("reading", &self.input)?;
            let target = self.target(v.geometry());
            let out = match mode {
                Interp::Bspline => resample_isotropic(&v, target)?,
                Interp::Nn => resample_nearest(&v, target)?,
            };
            info!("volume {:?} -> {:?}", v.dims(), out.dims());
            write_volume(&out, &self.out).context_path("writing", &self.out)?;
            Params { spacing: target, kind: "volume", interpolation: mode }
        };
        let mut prov = Provenance::new("resample", cfg.hash()).parameters(&params);
        prov.input("input", &self.input)?;
        prov.output(&self.out)?;
        prov.write(&sidecar_path(&self.out))
    }

    fn target(&self, g: &vesselfuse::Geometry) -> [f64; 3] {
        let t = match self.spacing {
            Spacing::Auto => finest_isotropic_spacing(g),
            Spacing::Mm(s) => s,
        };
        info!("input spacing {:?} mm, target spacing {:?} mm", g.spacing, t);
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_spacing() {
        assert_eq!("auto".parse::<Spacing>().unwrap(), Spacing::Auto);
        assert_eq!("0.5".parse::<Spacing>().unwrap(), Spacing::Mm([0.5; 3]));
        assert_eq!("1,1,1.5".parse::<Spacing>().unwrap(), Spacing::Mm([1.0, 1.0, 1.5]));
        assert!("1,2".parse::<Spacing>().is_err());
        assert!("0,1,1".parse::<Spacing>().is_err());
        assert!("x".parse::<Spacing>().is_err());
    }
}
