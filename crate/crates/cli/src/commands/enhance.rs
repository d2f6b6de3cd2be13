use std::path::PathBuf;

use clap::Args;
use log::info;
use vesselfuse::hypervolume::{build_hypervolume, HyperVolumeSidecar, CHANNEL_NAMES};
use vesselfuse::io::{read_volume, write_hypervolume};

use super::output_dir;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, Context};
use crate::provenance::{write_json, Provenance};

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// Input scan (3D NIfTI), ideally already isotropic.
    pub input: PathBuf,
    /// Output directory; falls back to `output_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Filter scales in mm, comma separated; overrides `filters.scales`.
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<f64>>,
    /// Not supported: the hyper-volume always has all seven channels.
    #[arg(long, hide = true)]
    pub channels: Option<String>,
}

impl EnhanceArgs {
    pub fn run(self, cfg: &PipelineConfig) -> CliResult<()> {
        if let Some(c) = &self.channels {
            return Err(CliError::usage(format!(
                "--channels {c}: channel subsetting is refused, the hyper-volume has a fixed 7-channel contract ({})",
                CHANNEL_NAMES.join(", ")
            )));
        }
        let mut cfg = cfg.clone();
        if let Some(s) = self.scales.clone() {
            cfg.filters.scales = s;
            cfg.validate()?;
        }
        let dir = output_dir(self.out.as_deref(), &cfg)?;
        let scan = read_volume::<f64>(&self.input).context_path("reading", &self.input)?;
        info!("scan {:?} at {:?} mm, scales {:?} mm", scan.dims(), scan.spacing(), cfg.filters.scales);
        let t = std::time::Instant::now();
        let hv = build_hypervolume(&scan, &cfg.filters)?;
        info!("hyper-volume built in {:.2} s", t.elapsed().as_secs_f64());

        let hv_path = dir.join("hypervolume.nii.gz");
        write_hypervolume(&hv, &hv_path).context_path("writing", &hv_path)?;
        let side_path = dir.join("hypervolume.json");
        write_json(&HyperVolumeSidecar::of(&hv), &side_path)?;

        let mut prov = Provenance::new("enhance", cfg.hash()).parameters(&cfg.filters);
        prov.input("input", &self.input)?;
        prov.output(&hv_path)?;
        prov.output(&side_path)?;
        prov.write(&dir.join("provenance.json"))
    }
}
