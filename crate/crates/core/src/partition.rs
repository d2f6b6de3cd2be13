//! Vessel-size partition masks and the bifurcation mask.
//!
//! Branches are classed by size into small / medium / large. Each class mask
//! is the union of balls centred on the class's skeleton voxels, radius equal
//! to the local distance value plus one voxel, intersected with the ground
//! truth. Ground-truth voxels left uncovered go to the class of the
//! geodesically nearest skeleton voxel (26-connected steps through the ground
//! truth), so the class masks always cover it. Masks may overlap at junctions.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{Junction, VesselGraph};
use crate::volume::{BinaryMask, Geometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    pub const ALL: [SizeClass; 3] = [SizeClass::Small, SizeClass::Medium, SizeClass::Large];

    pub fn name(self) -> &'static str {
        match self {
            SizeClass::Small => "small",
            SizeClass::Medium => "medium",
            SizeClass::Large => "large",
        }
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which branch measure the intervals apply to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeMeasure {
    /// Twice the distance value (the branch size as stored in the graph).
    #[default]
    Diameter,
    /// The distance value itself.
    Radius,
}

/// Consecutive size classes split at `cuts` (mm).
///
/// The first interval is `[0, cuts[0]]`, the middle ones `]cuts[i-1], cuts[i]]`
/// and the last `]cuts[last], +inf[`, so the intervals are disjoint and cover
/// `[0, +inf[` by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeIntervals {
    pub name: String,
    pub classes: Vec<SizeClass>,
    pub cuts: Vec<f64>,
    #[serde(default)]
    pub measure: SizeMeasure,
}

impl SizeIntervals {
    /// Hepatic CT preset: `[0,3]`, `]3,6]`, `]6,+inf[`.
    pub fn ircad() -> Self {
        SizeIntervals {
            name: "ircad".into(),
            classes: SizeClass::ALL.to_vec(),
            cuts: vec![3.0, 6.0],
            measure: SizeMeasure::Diameter,
        }
    }

    /// Cerebral MRA preset: `[0,0.513]`, `]0.513,+inf[`; no large class.
    pub fn bullitt() -> Self {
        SizeIntervals {
            name: "bullitt".into(),
            classes: vec![SizeClass::Small, SizeClass::Medium],
            cuts: vec![0.513],
            measure: SizeMeasure::Diameter,
        }
    }

    pub fn custom(classes: Vec<SizeClass>, cuts: Vec<f64>) -> Result<Self> {
        let s = SizeIntervals { name: "custom".into(), classes, cuts, measure: SizeMeasure::Diameter };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.classes.is_empty() {
            return bad("size intervals need at least one class".into());
        }
        if self.cuts.len() + 1 != self.classes.len() {
            return bad(format!("{} classes need {} cuts, got {}", self.classes.len(), self.classes.len() - 1, self.cuts.len()));
        }
        if self.classes.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("classes must be ordered small < medium < large: {:?}", self.classes));
        }
        if self.cuts.iter().any(|c| !c.is_finite() || *c <= 0.0) || self.cuts.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("cuts must be positive, finite and increasing: {:?}", self.cuts));
        }
        Ok(())
    }

    /// Class whose interval contains `size_mm`.
    pub fn classify(&self, size_mm: f64) -> SizeClass {
        let i = self.cuts.iter().position(|&c| size_mm <= c).unwrap_or(self.cuts.len());
        self.classes[i]
    }

    /// Interval notation per class, e.g. `"]3,6]"`.
    pub fn notation(&self) -> Vec<(SizeClass, String)> {
        self.classes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let lo = if i == 0 { "[0".to_string() } else { format!("]{}", self.cuts[i - 1]) };
                let hi = if i == self.cuts.len() { "+∞[".to_string() } else { format!("{}]", self.cuts[i]) };
                (c, format!("{lo},{hi}"))
            })
            .collect()
    }

    fn measure_of(&self, size_mm: f64) -> f64 {
        match self.measure {
            SizeMeasure::Diameter => size_mm,
            SizeMeasure::Radius => size_mm / 2.0,
        }
    }
}

impl FromStr for SizeIntervals {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ircad" => Ok(Self::ircad()),
            "bullitt" => Ok(Self::bullitt()),
            other => Err(Error::InvalidParameter(format!("unknown preset {other:?} (expected ircad or bullitt)"))),
        }
    }
}

/// Class of every branch, indexed by `label - 1`.
pub fn classify_branches(graph: &VesselGraph, intervals: &SizeIntervals) -> Vec<SizeClass> {
    graph.branches.iter().map(|b| intervals.classify(intervals.measure_of(b.size_mm))).collect()
}

/// Radius rule for the bifurcation mask.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BifurcationRadius {
    /// Fixed radius in mm.
    Fixed(f64),
    /// Multiple of the local vessel diameter at the junction center.
    DiameterFactor(f64),
}

impl Default for BifurcationRadius {
    fn default() -> Self {
        BifurcationRadius::DiameterFactor(2.0)
    }
}

impl BifurcationRadius {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            BifurcationRadius::Fixed(v) | BifurcationRadius::DiameterFactor(v) => v,
        };
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter(format!("bifurcation radius must be finite and >= 0, got {v}")));
        }
        Ok(())
    }

    /// Radius in mm for junction `j`.
    pub fn radius_for(&self, j: &Junction) -> f64 {
        match *self {
            BifurcationRadius::Fixed(r) => r,
            BifurcationRadius::DiameterFactor(k) => k * 2.0 * j.radius_mm,
        }
    }
}

/// Sets every voxel of `region` within `radius` mm of voxel `center` in `out`.
fn stamp_ball(out: &mut [u8], region: &BinaryMask, center: usize, radius: f64) {
    let g = region.geometry();
    let c = g.coords(center);
    let reach: [usize; 3] = std::array::from_fn(|a| (radius / g.spacing[a]).floor() as usize);
    let lo: [usize; 3] = std::array::from_fn(|a| c[a].saturating_sub(reach[a]));
    let hi: [usize; 3] = std::array::from_fn(|a| (c[a] + reach[a]).min(g.dims[a] - 1));
    let r2 = radius * radius + 1e-9;
    for z in lo[2]..=hi[2] {
        let dz = (z as f64 - c[2] as f64) * g.spacing[2];
        for y in lo[1]..=hi[1] {
            let dy = (y as f64 - c[1] as f64) * g.spacing[1];
            for x in lo[0]..=hi[0] {
                let dx = (x as f64 - c[0] as f64) * g.spacing[0];
                if dx * dx + dy * dy + dz * dz <= r2 {
                    let i = g.index(x, y, z);
                    if region.is_set(i) {
                        out[i] = 1;
                    }
                }
            }
        }
    }
}

/// Class masks plus the bifurcation mask.
#[derive(Clone, Debug)]
pub struct PartitionMasks {
    pub intervals: SizeIntervals,
    pub classes: Vec<(SizeClass, BinaryMask)>,
    pub m_bif: BinaryMask,
    pub bif_radius: BifurcationRadius,
}

impl PartitionMasks {
    pub fn class(&self, c: SizeClass) -> Option<&BinaryMask> {
        self.classes.iter().find(|(k, _)| *k == c).map(|(_, m)| m)
    }

    /// Masks keyed by evaluation-region name.
    pub fn regions(&self) -> BTreeMap<String, BinaryMask> {
        let mut out: BTreeMap<String, BinaryMask> =
            self.classes.iter().map(|(c, m)| (c.name().to_string(), m.clone())).collect();
        out.insert("bifurcations".into(), self.m_bif.clone());
        out
    }

    /// Union of the class masks.
    pub fn union(&self) -> BinaryMask {
        let g = *self.m_bif.geometry();
        self.classes.iter().fold(BinaryMask::empty(g), |acc, (_, m)| acc.or(m))
    }

    pub fn sidecar(&self, graph: &VesselGraph) -> PartitionSidecar {
        PartitionSidecar {
            schema_version: 1,
            preset: self.intervals.name.clone(),
            size_measure: self.intervals.measure,
            intervals: self.intervals.notation().into_iter().map(|(c, s)| (c.name().to_string(), s)).collect(),
            dilation_rule: "ball radius = local distance value + 1 voxel, intersected with ground truth".into(),
            bifurcation_radius: self.bif_radius,
            bifurcation_radii_mm: graph.bifurcations().map(|j| self.bif_radius.radius_for(j)).collect(),
            voxel_counts: self
                .classes
                .iter()
                .map(|(c, m)| (c.name().to_string(), m.count()))
                .chain([("bifurcations".to_string(), self.m_bif.count())])
                .collect(),
        }
    }
}

/// JSON metadata written next to the partition masks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSidecar {
    pub schema_version: u32,
    pub preset: String,
    pub size_measure: SizeMeasure,
    pub intervals: BTreeMap<String, String>,
    pub dilation_rule: String,
    pub bifurcation_radius: BifurcationRadius,
    pub bifurcation_radii_mm: Vec<f64>,
    pub voxel_counts: BTreeMap<String, usize>,
}

fn class_of_skeleton_voxels(graph: &VesselGraph, classes: &[SizeClass]) -> Vec<Vec<SizeClass>> {
    let mut pos: BTreeMap<usize, usize> = BTreeMap::new();
    for (k, &v) in graph.skeleton.iter().enumerate() {
        pos.insert(v, k);
    }
    let mut out: Vec<Vec<SizeClass>> = graph
        .branch_label
        .iter()
        .map(|&l| if l == 0 { Vec::new() } else { vec![classes[l as usize - 1]] })
        .collect();
    for j in &graph.junctions {
        let mut cs: Vec<SizeClass> = j.branches.iter().map(|&l| classes[l as usize - 1]).collect();
        cs.sort();
        cs.dedup();
        for v in &j.voxels {
            out[pos[v]] = cs.clone();
        }
    }
    out
}

/// Class masks from a classified graph; `classes` is indexed by `label - 1`.
pub fn build_class_masks(
    graph: &VesselGraph,
    classes: &[SizeClass],
    gt: &BinaryMask,
    intervals: &SizeIntervals,
) -> Result<Vec<(SizeClass, BinaryMask)>> {
    let geom: Geometry = *gt.geometry();
    geom.ensure_matches(graph.geometry(), "graph vs ground truth")?;
    if classes.len() != graph.branches.len() {
        return Err(Error::InvalidParameter(format!(
            "{} classes for {} branches",
            classes.len(),
            graph.branches.len()
        )));
    }
    let margin = geom.max_spacing();
    let per_voxel = class_of_skeleton_voxels(graph, classes);
    let mut masks: Vec<Vec<u8>> = vec![vec![0u8; geom.len()]; intervals.classes.len()];
    let slot = |c: SizeClass| intervals.classes.iter().position(|&k| k == c);
    for (k, &v) in graph.skeleton.iter().enumerate() {
        let radius = graph.distance_at(v) + margin;
        for &c in &per_voxel[k] {
            if let Some(s) = slot(c) {
                stamp_ball(&mut masks[s], gt, v, radius);
            }
        }
    }

    // Geodesic nearest-skeleton assignment for uncovered ground truth.
    let mut label: Vec<Option<usize>> = vec![None; geom.len()];
    let mut queue = VecDeque::new();
    for (k, &v) in graph.skeleton.iter().enumerate() {
        if gt.is_set(v) && label[v].is_none() {
            if let Some(s) = per_voxel[k].last().and_then(|&c| slot(c)) {
                label[v] = Some(s);
                queue.push_back(v);
            }
        }
    }
    let covered = |i: usize, masks: &[Vec<u8>]| masks.iter().any(|m| m[i] == 1);
    let any_gap = gt.foreground().any(|i| !covered(i, &masks));
    if any_gap {
        while let Some(v) = queue.pop_front() {
            let c = geom.coords(v);
            for dz in -1isize..=1 {
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        if let Some(q) = geom.offset_index(c, [dx, dy, dz]) {
                            if gt.is_set(q) && label[q].is_none() {
                                label[q] = label[v];
                                queue.push_back(q);
                            }
                        }
                    }
                }
            }
        }
        let gaps: Vec<usize> = gt.foreground().filter(|&i| !covered(i, &masks)).collect();
        for i in gaps {
            if let Some(s) = label[i] {
                masks[s][i] = 1;
            }
        }
    }

    intervals
        .classes
        .iter()
        .zip(masks)
        .map(|(&c, m)| BinaryMask::new(geom, m).map(|m| (c, m)))
        .collect()
}

/// Balls around every bifurcation cluster voxel, intersected with `gt`.
pub fn bifurcation_mask(graph: &VesselGraph, gt: &BinaryMask, radius: BifurcationRadius) -> Result<BinaryMask> {
    radius.validate()?;
    gt.geometry().ensure_matches(graph.geometry(), "graph vs ground truth")?;
    let mut out = vec![0u8; gt.data().len()];
    for j in graph.bifurcations() {
        let r = radius.radius_for(j);
        for &v in &j.voxels {
            stamp_ball(&mut out, gt, v, r);
        }
    }
    BinaryMask::new(*gt.geometry(), out)
}

/// Classifies, builds class masks and the bifurcation mask.
pub fn partition(
    graph: &VesselGraph,
    gt: &BinaryMask,
    intervals: &SizeIntervals,
    bif_radius: BifurcationRadius,
) -> Result<PartitionMasks> {
    intervals.validate()?;
    let classes = classify_branches(graph, intervals);
    let masks = build_class_masks(graph, &classes, gt, intervals)?;
    let m_bif = bifurcation_mask(graph, gt, bif_radius)?;
    Ok(PartitionMasks { intervals: intervals.clone(), classes: masks, m_bif, bif_radius })
}
