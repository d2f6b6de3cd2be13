use std::path::PathBuf;

use clap::{Args, ValueEnum};
use log::info;
use serde::Serialize;
use vesselfuse::io::{write_mask, write_volume};
use vesselfuse::phantom::{self, Phantom, PhantomMeta, YParams};
use vesselfuse::Geometry;

use super::output_dir;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, Context};
use crate::provenance::{write_json, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    Tube,
    Y,
    TwoTubes,
    NoisyTube,
}

#[derive(Debug, Args, Serialize)]
pub struct PhantomArgs {
    #[arg(value_enum)]
    pub kind: PhantomKind,
    /// Isotropic voxel spacing, mm.
    #[arg(long, default_value_t = 0.5)]
    pub spacing: f64,
    /// Tube radius, mm (first tube for two-tubes).
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    /// Second tube radius for two-tubes, mm.
    #[arg(long, default_value_t = 4.0)]
    pub radius2: f64,
    /// Tube length, mm.
    #[arg(long, default_value_t = 40.0)]
    pub length: f64,
    /// Clearance around the shape, mm.
    #[arg(long, default_value_t = 4.0)]
    pub margin: f64,
    /// Gaussian noise sigma; 0.1 for noisy-tube, 0 otherwise.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Vessel intensity over a zero background.
    #[arg(long, default_value_t = 1.0)]
    pub contrast: f64,
    /// Grid size `nx,ny,nz`; derived from the shape when omitted.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub dims: Option<Vec<usize>>,
    /// Output directory; falls back to `output_dir` from the config.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct MetaFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    meta: &'a PhantomMeta,
    voxel_count: usize,
    /// Union volume of the segments divided by the voxel volume, where it has a closed form.
    #[serde(skip_serializing_if = "Option::is_none")]
    analytic_voxel_count: Option<f64>,
}

fn cells(extent_mm: f64, s: f64) -> usize {
    (extent_mm / s - 1e-9).ceil().max(1.0) as usize
}

impl PhantomArgs {
    /// Odd cross-section so the axis sits on a voxel center, even length so the
    /// flat ends fall between voxel planes.
    fn tube_dims(&self, r: f64) -> [usize; 3] {
        let n = 2 * cells(r + self.margin, self.spacing) + 1;
        [n, n, 2 * cells(0.5 * self.length + self.margin, self.spacing)]
    }

    fn tube_margin(&self, nz: usize) -> f64 {
        0.5 * ((nz - 1) as f64 * self.spacing - self.length)
    }

    fn generate(&self) -> vesselfuse::Result<(Phantom<f64>, Option<f64>)> {
        let s = self.spacing;
        let dims_or = |d: [usize; 3]| match &self.dims {
            Some(v) => [v[0], v[1], v[2]],
            None => d,
        };
        let cyl = |r: f64| std::f64::consts::PI * r * r * self.length / (s * s * s);
        let (p, analytic) = match self.kind {
            PhantomKind::Tube | PhantomKind::NoisyTube => {
                let g = Geometry::new(dims_or(self.tube_dims(self.radius)), [s; 3], [0.0; 3])?;
                let m = if self.dims.is_some() { self.margin } else { self.tube_margin(g.dims[2]) };
                let analytic = ((g.dims[2] - 1) as f64 * s - 2.0 * m) / self.length * cyl(self.radius);
                let mut p = phantom::tube::<f64>(g, self.radius, m, self.contrast)?;
                if self.kind == PhantomKind::NoisyTube {
                    p.meta.kind = "noisy-tube".into();
                }
                (p, Some(analytic))
            }
            PhantomKind::TwoTubes => {
                let (r1, r2) = (self.radius, self.radius2);
                let nx = cells(2.0 * (r1 + r2) + 3.0 * self.margin, s) + 1;
                let [_, ny, nz] = self.tube_dims(r1.max(r2));
                let g = Geometry::new(dims_or([nx, ny, nz]), [s; 3], [0.0; 3])?;
                let m = if self.dims.is_some() { self.margin } else { self.tube_margin(g.dims[2]) };
                let len = (g.dims[2] - 1) as f64 * s - 2.0 * m;
                let analytic = len / self.length * (cyl(r1) + cyl(r2));
                (phantom::two_tubes::<f64>(g, r1, r2, m, self.contrast)?, Some(analytic))
            }
            PhantomKind::Y => {
                let g = Geometry::new(dims_or([160; 3]), [s; 3], [0.0; 3])?;
                (phantom::y_junction::<f64>(g, YParams::default(), self.contrast)?, None)
            }
        };
        let sigma = self.noise.unwrap_or(if self.kind == PhantomKind::NoisyTube { 0.1 } else { 0.0 });
        let p = if sigma > 0.0 || self.noise.is_some() { p.with_noise(sigma, self.seed)? } else { p };
        Ok((p, analytic))
    }

    pub fn run(self, cfg: &PipelineConfig) -> CliResult<()> {
        let dir = output_dir(self.out.as_deref(), cfg)?;
        let (p, analytic) = self.generate().map_err(|e| CliError::usage(format!("phantom parameters: {e}")))?;
        let count = p.gt.count();
        info!("{} phantom {:?} at {} mm: {count} foreground voxels", p.meta.kind, p.gt.dims(), self.spacing);
        if let Some(a) = analytic {
            info!("analytic voxel count {a:.1}, relative error {:+.2}%", 100.0 * (count as f64 - a) / a);
        }
        let vol_path = dir.join("volume.nii.gz");
        write_volume(&p.volume, &vol_path).context_path("writing", &vol_path)?;
        let gt_path = dir.join("gt.nii.gz");
        write_mask(&p.gt, &gt_path).context_path("writing", &gt_path)?;
        let meta_path = dir.join("meta.json");
        let meta = MetaFile { schema_version: 1, meta: &p.meta, voxel_count: count, analytic_voxel_count: analytic };
        write_json(&meta, &meta_path)?;

        let mut prov = Provenance::new("phantom", cfg.hash()).parameters(&self);
        for path in [&vol_path, &gt_path, &meta_path] {
            prov.output(path)?;
        }
        prov.write(&dir.join("provenance.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(kind: PhantomKind) -> PhantomArgs {
        PhantomArgs {
            kind,
            spacing: 0.5,
            radius: 2.0,
            radius2: 4.0,
            length: 40.0,
            margin: 4.0,
            noise: None,
            seed: 0,
            contrast: 1.0,
            dims: None,
            out: None,
        }
    }

    #[test]
    fn tube_grid_places_ends_between_planes() {
        let a = args(PhantomKind::Tube);
        let d = a.tube_dims(2.0);
        assert_eq!(d, [25, 25, 96]);
        let m = a.tube_margin(d[2]);
        assert!((m - 3.75).abs() < 1e-12);
        assert!((m / 0.5 - (m / 0.5).floor() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tube_volume_close_to_analytic() {
        let (p, a) = args(PhantomKind::Tube).generate().unwrap();
        let rel = (p.gt.count() as f64 - a.unwrap()).abs() / a.unwrap();
        assert!(rel < 0.03, "{rel}");
        assert_eq!(p.meta.noise_sigma, 0.0);
    }

    #[test]
    fn two_tubes_fit() {
        let (p, a) = args(PhantomKind::TwoTubes).generate().unwrap();
        let rel = (p.gt.count() as f64 - a.unwrap()).abs() / a.unwrap();
        assert!(rel < 0.03, "{rel}");
    }

    #[test]
    fn noisy_tube_defaults_to_sigma_01() {
        let (p, _) = args(PhantomKind::NoisyTube).generate().unwrap();
        assert_eq!(p.meta.noise_sigma, 0.1);
        assert_eq!(p.meta.kind, "noisy-tube");
    }

    #[test]
    fn y_has_one_junction() {
        let mut a = args(PhantomKind::Y);
        a.dims = Some(vec![160, 160, 160]);
        let (p, _) = a.generate().unwrap();
        assert_eq!(p.meta.junctions.len(), 1);
    }
}
