use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use log::info;
use serde::Serialize;
use vesselfuse::io::{read_mask, write_mask};
use vesselfuse::partition::{classify_branches, PartitionSidecar, SizeClass};
use vesselfuse::skeleton::VesselGraph;

use super::{output_dir, partition_gt};
use crate::config::{PipelineConfig, Preset};
use crate::error::{CliError, CliResult, Context};
use crate::provenance::{write_json, Provenance};

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// Ground truth mask (3D NIfTI).
    pub gt: PathBuf,
    /// Size-interval preset; overrides `partition.preset`.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory; falls back to `output_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// One bin of the branch size histogram, `[lo, hi[` in mm.
#[derive(Debug, Serialize)]
pub struct HistogramBin {
    pub lo_mm: f64,
    pub hi_mm: f64,
    pub count: usize,
}

#[derive(Debug, Serialize)]
pub struct PartitionSummary {
    pub branches: usize,
    pub bifurcations: usize,
    pub endpoints: usize,
    /// Branch count per size class.
    pub branches_per_class: BTreeMap<String, usize>,
    /// Branch sizes binned at 1 mm.
    pub size_histogram: Vec<HistogramBin>,
}

#[derive(Debug, Serialize)]
struct PartitionFile {
    #[serde(flatten)]
    sidecar: PartitionSidecar,
    summary: PartitionSummary,
}

pub fn summarize(graph: &VesselGraph, classes: &[SizeClass], intervals: &[SizeClass]) -> PartitionSummary {
    let mut per_class: BTreeMap<String, usize> = intervals.iter().map(|c| (c.name().to_string(), 0)).collect();
    for c in classes {
        *per_class.entry(c.name().to_string()).or_default() += 1;
    }
    let top = graph.branches.iter().map(|b| b.size_mm.floor() as usize).max().map_or(0, |m| m + 1);
    let mut hist: Vec<HistogramBin> =
        (0..top).map(|i| HistogramBin { lo_mm: i as f64, hi_mm: i as f64 + 1.0, count: 0 }).collect();
    for b in &graph.branches {
        hist[b.size_mm.floor() as usize].count += 1;
    }
    PartitionSummary {
        branches: graph.branches.len(),
        bifurcations: graph.bifurcation_count(),
        endpoints: graph.endpoints.len(),
        branches_per_class: per_class,
        size_histogram: hist,
    }
}

impl PartitionArgs {
    pub fn run(self, cfg: &PipelineConfig) -> CliResult<()> {
        let mut cfg = cfg.clone();
        if let Some(p) = self.preset {
            if p == Preset::Custom && cfg.partition.cuts.is_none() {
                return Err(CliError::usage("--preset custom needs partition.classes and partition.cuts in the config"));
            }
            if p != Preset::Custom {
                cfg.partition.classes = None;
                cfg.partition.cuts = None;
            }
            cfg.partition.preset = p;
            cfg.validate()?;
        }
        let dir = output_dir(self.out.as_deref(), &cfg)?;
        let gt = read_mask(&self.gt).context_path("reading", &self.gt)?;
        if gt.is_empty() {
            return Err(CliError::Data(anyhow::anyhow!("ground truth {} is empty", self.gt.display())));
        }
        let (graph, masks) = partition_gt(&gt, &cfg.partition)?;
        let classes = classify_branches(&graph, &masks.intervals);

        let mut prov = Provenance::new("partition", cfg.hash()).parameters(&cfg.partition);
        prov.input("gt", &self.gt)?;
        for (c, m) in &masks.classes {
            let path = dir.join(format!("m_{}.nii.gz", c.name()));
            write_mask(m, &path).context_path("writing", &path)?;
            info!("{}: {} voxels", path.display(), m.count());
            prov.output(&path)?;
        }
        let bif_path = dir.join("m_bif.nii.gz");
        write_mask(&masks.m_bif, &bif_path).context_path("writing", &bif_path)?;
        prov.output(&bif_path)?;

        let graph_path = dir.join("graph.json");
        write_json(&graph.export(), &graph_path)?;
        prov.output(&graph_path)?;

        let summary = summarize(&graph, &classes, &masks.intervals.classes);
        info!(
            "{} branches, {} bifurcations, branches per class {:?}",
            summary.branches, summary.bifurcations, summary.branches_per_class
        );
        let part_path = dir.join("partition.json");
        write_json(&PartitionFile { sidecar: masks.sidecar(&graph), summary }, &part_path)?;
        prov.output(&part_path)?;
        prov.write(&dir.join("provenance.json"))
    }
}
