use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use vesselfuse::hypervolume::{enhanced_channel, CHANNEL_NAMES};
use vesselfuse::io::{read_hypervolume, read_mask, read_volume};
use vesselfuse::metrics::{
    aggregate_report, evaluate_case, psnr, write_csv_rows, AggregateReport, Decibels, MetricsReport, PsnrReport,
    PSNR_DEFINITION, REPORT_SCHEMA_VERSION,
};
use vesselfuse::{BinaryMask, Error as CoreError, HyperVolume};

use super::{nifti_stem, partition_gt, sidecar_path};
use crate::config::{PartitionConfig, PipelineConfig, Preset};
use crate::error::{CliError, CliResult, Context};
use crate::provenance::{write_json, Provenance};

/// Region mask files looked up in a `--masks` directory.
pub const MASK_FILES: [(&str, &str); 4] =
    [("small", "m_small.nii.gz"), ("medium", "m_medium.nii.gz"), ("large", "m_large.nii.gz"), ("bifurcations", "m_bif.nii.gz")];

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted mask (3D NIfTI).
    #[arg(required_unless_present = "batch", requires = "gt")]
    pub pred: Option<PathBuf>,
    /// Ground truth mask (3D NIfTI).
    #[arg(required_unless_present = "batch")]
    pub gt: Option<PathBuf>,
    /// Directory holding m_small / m_medium / m_large / m_bif masks.
    #[arg(long, conflicts_with = "preset")]
    pub masks: Option<PathBuf>,
    /// Derive region masks from the ground truth with this size preset.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Intensity volume for PSNR: a 3D scan or a 7-channel hyper-volume.
    #[arg(long)]
    pub intensity: Option<PathBuf>,
    /// Directory of cases `<case>/pred.nii.gz` + `<case>/gt.nii.gz`, each
    /// optionally with `masks/` and `intensity.nii.gz`.
    #[arg(long, conflicts_with_all = ["pred", "gt", "intensity", "masks"])]
    pub batch: Option<PathBuf>,
    /// Case name in the report; defaults to the prediction file name.
    #[arg(long)]
    pub case: Option<String>,
    /// Report JSON path; the CSV table is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

/// Where the region masks come from.
enum Regions<'a> {
    None,
    Dir(&'a Path),
    Derived(&'a PartitionConfig),
}

struct CaseInputs {
    name: String,
    pred: PathBuf,
    gt: PathBuf,
    masks: Option<PathBuf>,
    intensity: Option<PathBuf>,
}

#[derive(Serialize)]
struct BatchReport<'a> {
    schema_version: u32,
    cases: &'a [MetricsReport],
    aggregate: &'a AggregateReport,
}

impl EvaluateArgs {
    pub fn run(self, cfg: &PipelineConfig) -> CliResult<()> {
        let mut cfg = cfg.clone();
        if let Some(p) = self.preset {
            if p != Preset::Custom {
                cfg.partition.classes = None;
                cfg.partition.cuts = None;
            }
            cfg.partition.preset = p;
            cfg.validate()?;
        }
        if let Some(dir) = self.out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Data(anyhow::anyhow!("cannot create {}: {e}", dir.display())))?;
        }
        let csv_path = self.out.with_extension("csv");
        let mut prov = Provenance::new("evaluate", cfg.hash());

        match &self.batch {
            None => {
                let pred = self.pred.clone().expect("clap enforces pred");
                let gt = self.gt.clone().expect("clap enforces gt");
                let case = CaseInputs {
                    name: self.case.clone().unwrap_or_else(|| nifti_stem(&pred)),
                    pred,
                    gt,
                    masks: self.masks.clone(),
                    intensity: self.intensity.clone(),
                };
                let regions = self.regions(&case, &cfg);
                let report = evaluate_one(&case, regions, &cfg)?;
                log_report(&report);
                write_json(&report, &self.out)?;
                write_csv(&csv_path, |f| write_csv_rows(std::slice::from_ref(&report), f))?;
                add_inputs(&mut prov, "", &case)?;
                prov = prov.parameters(&serde_json::json!({ "case": case.name, "regions": self.region_source() }));
            }
            Some(dir) => {
                let cases = discover(dir)?;
                info!("batch of {} cases in {}", cases.len(), dir.display());
                let reports: Vec<MetricsReport> = cases
                    .par_iter()
                    .map(|c| evaluate_one(c, self.regions(c, &cfg), &cfg))
                    .collect::<CliResult<_>>()?;
                let agg = aggregate_report(&reports)?;
                for r in &agg.regions {
                    if let (Some(d), Some(c)) = (&r.dice, &r.cl_dice) {
                        info!(
                            "{:<12} dice {:.4} ± {:.4}  cl_dice {:.4} ± {:.4}  (n = {})",
                            r.region, d.mean, d.std, c.mean, c.std, d.n
                        );
                    }
                }
                let batch = BatchReport { schema_version: REPORT_SCHEMA_VERSION, cases: &reports, aggregate: &agg };
                write_json(&batch, &self.out)?;
                write_csv(&csv_path, |f| write_csv_rows(&reports, f))?;
                let stem = self.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let agg_path = self.out.with_file_name(format!("{stem}_aggregate.csv"));
                write_csv(&agg_path, |f| agg.write_csv(f))?;
                prov.output(&agg_path)?;
                for c in &cases {
                    add_inputs(&mut prov, &format!("{}/", c.name), c)?;
                }
                prov = prov.parameters(&serde_json::json!({
                    "cases": cases.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
                    "regions": self.region_source(),
                }));
            }
        }
        prov.output(&self.out)?;
        prov.output(&csv_path)?;
        prov.write(&sidecar_path(&self.out))
    }

    fn regions<'a>(&'a self, case: &'a CaseInputs, cfg: &'a PipelineConfig) -> Regions<'a> {
        match (&case.masks, self.preset) {
            (Some(d), _) => Regions::Dir(d),
            (None, Some(_)) => Regions::Derived(&cfg.partition),
            (None, None) => Regions::None,
        }
    }

    fn region_source(&self) -> String {
        match (&self.masks, self.preset, &self.batch) {
            (Some(_), _, _) => "masks".into(),
            (None, Some(p), _) => format!("derived:{p:?}").to_lowercase(),
            (None, None, Some(_)) => "per-case masks/ when present".into(),
            (None, None, None) => "global only".into(),
        }
    }
}

fn write_csv(path: &Path, f: impl FnOnce(File) -> vesselfuse::Result<()>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::Data(anyhow::anyhow!("cannot write {}: {e}", path.display())))?;
    f(file).context_path("writing", path)
}

fn add_inputs(prov: &mut Provenance, prefix: &str, c: &CaseInputs) -> CliResult<()> {
    prov.input(&format!("{prefix}pred"), &c.pred)?;
    prov.input(&format!("{prefix}gt"), &c.gt)?;
    if let Some(i) = &c.intensity {
        prov.input(&format!("{prefix}intensity"), i)?;
    }
    if let Some(d) = &c.masks {
        for (_, f) in MASK_FILES {
            let p = d.join(f);
            if p.exists() {
                prov.input(&format!("{prefix}masks/{f}"), &p)?;
            }
        }
    }
    Ok(())
}

/// Case subdirectories of `dir` holding both `pred.nii.gz` and `gt.nii.gz`, by name.
fn discover(dir: &Path) -> CliResult<Vec<CaseInputs>> {
    let rd = std::fs::read_dir(dir).map_err(|e| CliError::Data(anyhow::anyhow!("cannot list {}: {e}", dir.display())))?;
    let mut cases = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| CliError::Data(e.into()))?.path();
        if !path.is_dir() {
            continue;
        }
        let (pred, gt) = (path.join("pred.nii.gz"), path.join("gt.nii.gz"));
        if !(pred.exists() && gt.exists()) {
            warn!("skipping {}: needs pred.nii.gz and gt.nii.gz", path.display());
            continue;
        }
        let masks = Some(path.join("masks")).filter(|m| m.is_dir());
        let intensity = Some(path.join("intensity.nii.gz")).filter(|p| p.exists());
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        cases.push(CaseInputs { name, pred, gt, masks, intensity });
    }
    if cases.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("no cases found in {}", dir.display())));
    }
    cases.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(cases)
}

fn load_regions(dir: &Path) -> CliResult<BTreeMap<String, BinaryMask>> {
    let mut out = BTreeMap::new();
    for (name, file) in MASK_FILES {
        let p = dir.join(file);
        if p.exists() {
            out.insert(name.to_string(), read_mask(&p).context_path("reading", &p)?);
        }
    }
    if out.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!("no region masks (m_*.nii.gz) in {}", dir.display())));
    }
    Ok(out)
}

fn evaluate_one(c: &CaseInputs, regions: Regions<'_>, cfg: &PipelineConfig) -> CliResult<MetricsReport> {
    let pred = read_mask(&c.pred).context_path("reading", &c.pred)?;
    let gt = read_mask(&c.gt).context_path("reading", &c.gt)?;
    pred.geometry().ensure_matches(gt.geometry(), "prediction vs ground truth").context_path("checking", &c.pred)?;
    let masks = match regions {
        Regions::None => BTreeMap::new(),
        Regions::Dir(d) => load_regions(d)?,
        Regions::Derived(p) => {
            if gt.is_empty() {
                return Err(CliError::Data(anyhow::anyhow!("cannot derive regions: ground truth {} is empty", c.gt.display())));
            }
            partition_gt(&gt, p)?.1.regions()
        }
    };
    let mut report = evaluate_case(&c.name, &pred, &gt, &masks).context_path("evaluating", &c.pred)?;
    if let Some(i) = &c.intensity {
        report.psnr = Some(psnr_report(i, &gt)?);
    }
    let mut inputs = Provenance::new("evaluate", cfg.hash());
    add_inputs(&mut inputs, "", c)?;
    report.provenance = inputs.to_map();
    report.provenance.remove("outputs");
    report.provenance.remove("parameters");
    Ok(report)
}

/// PSNR of a 3D scan, or of every channel plus the max-of-filters channel of a hyper-volume.
fn psnr_report(path: &Path, gt: &BinaryMask) -> CliResult<PsnrReport> {
    let mut values = BTreeMap::new();
    match read_volume::<f64>(path) {
        Ok(v) => {
            values.insert("intensity".to_string(), Decibels(psnr(&v, gt).context_path("PSNR of", path)?));
        }
        Err(CoreError::Unexpected4D { .. }) => {
            let hv = read_hypervolume::<f64>(path).context_path("reading", path)?;
            if hv.num_channels() != CHANNEL_NAMES.len() {
                return Err(CliError::Data(anyhow::anyhow!(
                    "{} has {} channels, the hyper-volume contract is {}",
                    path.display(),
                    hv.num_channels(),
                    CHANNEL_NAMES.len()
                )));
            }
            let hv = HyperVolume::new(hv.into_channels(), CHANNEL_NAMES.iter().map(|s| s.to_string()).collect())?;
            for (name, ch) in hv.channel_names().iter().zip(hv.channels()) {
                values.insert(name.to_lowercase(), Decibels(psnr(ch, gt).context_path("PSNR of", path)?));
            }
            let enhanced = enhanced_channel(&hv)?;
            values.insert("enhanced_max".to_string(), Decibels(psnr(&enhanced, gt).context_path("PSNR of", path)?));
        }
        Err(e) => return Err(e).context_path("reading", path),
    }
    Ok(PsnrReport { definition: PSNR_DEFINITION.into(), values })
}

fn log_report(r: &MetricsReport) {
    for s in &r.regions {
        match (s.dice, s.cl_dice) {
            (Some(d), Some(c)) => info!("{:<12} dice {d:.4}  cl_dice {c:.4}", s.region),
            _ => info!("{:<12} absent", s.region),
        }
    }
    if let Some(p) = &r.psnr {
        for (k, v) in &p.values {
            info!("psnr {k}: {v} dB");
        }
    }
}
