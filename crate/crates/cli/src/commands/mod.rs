pub mod enhance;
pub mod evaluate;
pub mod partition;
pub mod phantom;
pub mod resample;

use std::path::{Path, PathBuf};

use log::info;
use vesselfuse::partition::PartitionMasks;
use vesselfuse::skeleton::{build_graph, distance_transform, skeletonize_with, VesselGraph};
use vesselfuse::BinaryMask;

use crate::config::{PartitionConfig, PipelineConfig};
use crate::error::{CliError, CliResult};

/// `--out` if given, else the config's output directory; created if missing.
pub fn output_dir(flag: Option<&Path>, cfg: &PipelineConfig) -> CliResult<PathBuf> {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::usage("no output directory: pass --out or set output_dir in the config"))?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Data(anyhow::anyhow!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Graph and partition masks of a ground truth mask.
pub fn partition_gt(gt: &BinaryMask, p: &PartitionConfig) -> CliResult<(VesselGraph, PartitionMasks)> {
    let intervals = p.intervals()?;
    let t = std::time::Instant::now();
    let dt = distance_transform(gt)?;
    let skel = skeletonize_with(gt, &dt)?;
    let graph = build_graph(&skel, &dt)?;
    info!(
        "skeleton: {} voxels, {} branches, {} bifurcations ({:.2} s)",
        graph.skeleton.len(),
        graph.branches.len(),
        graph.bifurcation_count(),
        t.elapsed().as_secs_f64()
    );
    let masks = vesselfuse::partition::partition(&graph, gt, &intervals, p.bifurcation_radius)?;
    Ok((graph, masks))
}

/// File name without `.nii` / `.nii.gz`.
pub fn nifti_stem(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(".nii.gz").or_else(|| name.strip_suffix(".nii")).unwrap_or(&name).to_string()
}

/// `<dir>/<stem>.provenance.json` next to a single output file.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let stem = nifti_stem(out);
    let stem = stem.strip_suffix(".json").or_else(|| stem.strip_suffix(".csv")).unwrap_or(&stem).to_string();
    out.with_file_name(format!("{stem}.provenance.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems() {
        assert_eq!(nifti_stem(Path::new("a/b.nii.gz")), "b");
        assert_eq!(nifti_stem(Path::new("b.nii")), "b");
        assert_eq!(sidecar_path(Path::new("d/report.json")), PathBuf::from("d/report.provenance.json"));
        assert_eq!(sidecar_path(Path::new("d/x.nii.gz")), PathBuf::from("d/x.provenance.json"));
    }
}
