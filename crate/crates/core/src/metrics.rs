//! Overlap and topology metrics, PSNR, and per-case / aggregate reports.
//!
//! Conventions for degenerate inputs:
//!
//! * `dice` of two empty masks is 1.
//! * `cl_dice` is 1 when both skeletons are empty and 0 when exactly one is.
//! * A masked metric is absent (`None`) when the region leaves both prediction
//!   and ground truth empty.
//!
//! PSNR is `10 log10(peak^2 / mse)` with the volume min-max normalized to
//! `[0, 1]`, `peak` the foreground mean minus the background mean and `mse` the
//! mean squared deviation of background voxels from the background mean. A
//! noise-free background gives `+inf`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::skeletonize;
use crate::volume::{BinaryMask, Volume};
use crate::Real;

/// Version of the JSON and CSV report layouts.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Region names in report order.
pub const REGIONS: [&str; 5] = ["global", "large", "medium", "small", "bifurcations"];

/// Human-readable PSNR definition stored in every report.
pub const PSNR_DEFINITION: &str = "10*log10(peak^2/mse) after min-max normalization to [0,1]; \
peak = mean(foreground) - mean(background); mse = mean((background - mean(background))^2)";

/// `2|P∩G| / (|P|+|G|)`; two empty masks score 1.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    pred.geometry().ensure_matches(gt.geometry(), "prediction vs ground truth")?;
    let denom = pred.count() + gt.count();
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * pred.intersection_count(gt) as f64 / denom as f64)
}

/// Skeleton of `mask`, or an empty mask when `mask` is empty.
pub fn skeleton_or_empty(mask: &BinaryMask) -> Result<BinaryMask> {
    if mask.is_empty() {
        return Ok(BinaryMask::empty(*mask.geometry()));
    }
    skeletonize(mask)
}

/// Topology precision and sensitivity behind a clDice score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClDiceParts {
    pub tprec: f64,
    pub tsens: f64,
    pub cl_dice: f64,
}

/// clDice from precomputed skeletons.
pub fn cl_dice_from_skeletons(
    pred: &BinaryMask,
    gt: &BinaryMask,
    skel_pred: &BinaryMask,
    skel_gt: &BinaryMask,
) -> Result<ClDiceParts> {
    let g = pred.geometry();
    for (m, what) in [(gt, "ground truth"), (skel_pred, "prediction skeleton"), (skel_gt, "ground-truth skeleton")] {
        g.ensure_matches(m.geometry(), what)?;
    }
    let (sp, sg) = (skel_pred.count(), skel_gt.count());
    if sp == 0 && sg == 0 {
        return Ok(ClDiceParts { tprec: 1.0, tsens: 1.0, cl_dice: 1.0 });
    }
    if sp == 0 || sg == 0 {
        return Ok(ClDiceParts { tprec: 0.0, tsens: 0.0, cl_dice: 0.0 });
    }
    let tprec = skel_pred.intersection_count(gt) as f64 / sp as f64;
    let tsens = skel_gt.intersection_count(pred) as f64 / sg as f64;
    let cl_dice = if tprec + tsens == 0.0 { 0.0 } else { 2.0 * tprec * tsens / (tprec + tsens) };
    Ok(ClDiceParts { tprec, tsens, cl_dice })
}

/// clDice with its precision and sensitivity terms.
pub fn cl_dice_parts(pred: &BinaryMask, gt: &BinaryMask) -> Result<ClDiceParts> {
    pred.geometry().ensure_matches(gt.geometry(), "prediction vs ground truth")?;
    let (sp, sg) = rayon::join(|| skeleton_or_empty(pred), || skeleton_or_empty(gt));
    cl_dice_from_skeletons(pred, gt, &sp?, &sg?)
}

/// Centerline Dice.
pub fn cl_dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    cl_dice_parts(pred, gt).map(|p| p.cl_dice)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Dice,
    ClDice,
}

/// `which` on `pred ∩ region` against `gt ∩ region`; `None` when both are empty.
pub fn masked_metric(pred: &BinaryMask, gt: &BinaryMask, region: &BinaryMask, which: Metric) -> Result<Option<f64>> {
    pred.geometry().ensure_matches(gt.geometry(), "prediction vs ground truth")?;
    pred.geometry().ensure_matches(region.geometry(), "region mask")?;
    let (p, g) = (pred.and(region), gt.and(region));
    if p.is_empty() && g.is_empty() {
        return Ok(None);
    }
    match which {
        Metric::Dice => dice(&p, &g).map(Some),
        Metric::ClDice => cl_dice(&p, &g).map(Some),
    }
}

/// PSNR of `vol` with `gt` as signal region and its complement as background.
pub fn psnr<T: Real>(vol: &Volume<T>, gt: &BinaryMask) -> Result<f64> {
    vol.geometry().ensure_matches(gt.geometry(), "intensity volume vs ground truth")?;
    let n_fg = gt.count();
    let n_bg = gt.data().len() - n_fg;
    if n_fg == 0 {
        return Err(Error::Empty("PSNR needs a nonempty foreground".into()));
    }
    if n_bg == 0 {
        return Err(Error::Empty("PSNR needs a nonempty background".into()));
    }
    let (lo, hi) = vol.min_max();
    let (lo, range) = (lo.as_f64(), (hi - lo).as_f64());
    if !(range > 0.0) {
        return Err(Error::InvalidParameter("PSNR of a constant volume is undefined".into()));
    }
    let norm = |v: T| (v.as_f64() - lo) / range;
    let (mut sum_fg, mut sum_bg) = (0.0, 0.0);
    for (&v, &m) in vol.data().iter().zip(gt.data()) {
        if m == 1 {
            sum_fg += norm(v);
        } else {
            sum_bg += norm(v);
        }
    }
    let (mean_fg, mean_bg) = (sum_fg / n_fg as f64, sum_bg / n_bg as f64);
    let mse = vol
        .data()
        .iter()
        .zip(gt.data())
        .filter(|(_, &m)| m == 0)
        .map(|(&v, _)| (norm(v) - mean_bg).powi(2))
        .sum::<f64>()
        / n_bg as f64;
    let peak = mean_fg - mean_bg;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// A dB value that may be `+inf`; serialized as a number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decibels(pub f64);

impl Serialize for Decibels {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        }
    }
}

impl<'de> Deserialize<'de> for Decibels {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Decibels(v)),
            Repr::Text(t) if t == "inf" => Ok(Decibels(f64::INFINITY)),
            Repr::Text(t) if t == "-inf" => Ok(Decibels(f64::NEG_INFINITY)),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid dB value {t:?}"))),
        }
    }
}

impl std::fmt::Display for Decibels {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_finite() {
            write!(f, "{}", self.0)
        } else {
            f.write_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        }
    }
}

/// Scores for one evaluation region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionScores {
    pub region: String,
    /// False when the region is missing or leaves both masks empty.
    pub present: bool,
    pub dice: Option<f64>,
    pub cl_dice: Option<f64>,
    pub region_voxels: usize,
    pub pred_voxels: usize,
    pub gt_voxels: usize,
}

impl RegionScores {
    fn absent(region: &str, region_voxels: usize) -> Self {
        RegionScores {
            region: region.into(),
            present: false,
            dice: None,
            cl_dice: None,
            region_voxels,
            pred_voxels: 0,
            gt_voxels: 0,
        }
    }
}

/// PSNR entries of a case: one per named volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsnrReport {
    pub definition: String,
    pub values: BTreeMap<String, Decibels>,
}

/// Per-case evaluation result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub case: String,
    pub regions: Vec<RegionScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psnr: Option<PsnrReport>,
    /// Free-form provenance: input hashes, intervals, config hash.
    #[serde(default)]
    pub provenance: BTreeMap<String, serde_json::Value>,
}

impl MetricsReport {
    pub fn region(&self, name: &str) -> Option<&RegionScores> {
        self.regions.iter().find(|r| r.region == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows `case,region,metric,value`; absent regions get an empty value.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_csv_rows(std::slice::from_ref(self), out)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("CSV output failed: {e}"))
}

/// Writes all cases of `reports` as one CSV table.
pub fn write_csv_rows(reports: &[MetricsReport], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["case", "region", "metric", "value"]).map_err(csv_err)?;
    for r in reports {
        for s in &r.regions {
            for (metric, v) in [("dice", s.dice), ("cl_dice", s.cl_dice)] {
                let value = v.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([r.case.as_str(), s.region.as_str(), metric, value.as_str()]).map_err(csv_err)?;
            }
        }
        if let Some(p) = &r.psnr {
            for (name, v) in &p.values {
                let metric = format!("psnr_db:{name}");
                w.write_record([r.case.as_str(), "global", metric.as_str(), v.to_string().as_str()])
                    .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Scores `pred` against `gt` globally and inside each named region.
///
/// `regions` maps the non-global names of [`REGIONS`] to their masks; a missing
/// entry is reported absent.
pub fn evaluate_case(
    case: &str,
    pred: &BinaryMask,
    gt: &BinaryMask,
    regions: &BTreeMap<String, BinaryMask>,
) -> Result<MetricsReport> {
    pred.geometry().ensure_matches(gt.geometry(), "prediction vs ground truth")?;
    for (name, m) in regions {
        if !REGIONS.contains(&name.as_str()) || name == "global" {
            return Err(Error::InvalidParameter(format!("unknown region {name:?}")));
        }
        pred.geometry().ensure_matches(m.geometry(), &format!("region {name}"))?;
    }
    let score = |name: &str, p: BinaryMask, g: BinaryMask, region_voxels: usize| -> Result<RegionScores> {
        if p.is_empty() && g.is_empty() {
            return Ok(RegionScores::absent(name, region_voxels));
        }
        Ok(RegionScores {
            region: name.into(),
            present: true,
            dice: Some(dice(&p, &g)?),
            cl_dice: Some(cl_dice(&p, &g)?),
            region_voxels,
            pred_voxels: p.count(),
            gt_voxels: g.count(),
        })
    };
    let mut out = Vec::with_capacity(REGIONS.len());
    for name in REGIONS {
        let s = if name == "global" {
            score(name, pred.clone(), gt.clone(), gt.data().len())?
        } else {
            match regions.get(name) {
                Some(r) => score(name, pred.and(r), gt.and(r), r.count())?,
                None => RegionScores::absent(name, 0),
            }
        };
        out.push(s);
    }
    Ok(MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        case: case.into(),
        regions: out,
        psnr: None,
        provenance: BTreeMap::new(),
    })
}

/// Mean and sample standard deviation over `n` cases.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// `None` for an empty sample; one value has standard deviation 0.
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Summary { n, mean, std })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub region: String,
    pub dice: Option<Summary>,
    pub cl_dice: Option<Summary>,
}

/// Mean and standard deviation per region across cases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub cases: Vec<String>,
    pub regions: Vec<RegionSummary>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub psnr: BTreeMap<String, Summary>,
}

impl AggregateReport {
    pub fn region(&self, name: &str) -> Option<&RegionSummary> {
        self.regions.iter().find(|r| r.region == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows `region,metric,n,mean,std`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["region", "metric", "n", "mean", "std"]).map_err(csv_err)?;
        let mut row = |region: &str, metric: &str, s: &Summary| {
            w.write_record([region, metric, &s.n.to_string(), &s.mean.to_string(), &s.std.to_string()])
        };
        for r in &self.regions {
            for (metric, s) in [("dice", &r.dice), ("cl_dice", &r.cl_dice)] {
                if let Some(s) = s {
                    row(&r.region, metric, s).map_err(csv_err)?;
                }
            }
        }
        for (name, s) in &self.psnr {
            row("global", &format!("psnr_db:{name}"), s).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Per-region mean and sample standard deviation; absent regions and
/// infinite PSNR values are left out of the sample.
pub fn aggregate_report(per_case: &[MetricsReport]) -> Result<AggregateReport> {
    if per_case.is_empty() {
        return Err(Error::Empty("aggregate of zero cases".into()));
    }
    let mut names: Vec<String> = REGIONS.iter().map(|s| s.to_string()).collect();
    for r in per_case.iter().flat_map(|c| &c.regions) {
        if !names.contains(&r.region) {
            names.push(r.region.clone());
        }
    }
    let regions = names
        .into_iter()
        .map(|name| {
            let present: Vec<&RegionScores> =
                per_case.iter().filter_map(|c| c.region(&name)).filter(|r| r.present).collect();
            let collect = |f: fn(&RegionScores) -> Option<f64>| -> Vec<f64> { present.iter().filter_map(|r| f(r)).collect() };
            RegionSummary {
                dice: Summary::of(&collect(|r| r.dice)),
                cl_dice: Summary::of(&collect(|r| r.cl_dice)),
                region: name,
            }
        })
        .collect();
    let mut psnr_values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for p in per_case.iter().filter_map(|c| c.psnr.as_ref()) {
        for (k, v) in &p.values {
            if v.0.is_finite() {
                psnr_values.entry(k.clone()).or_default().push(v.0);
            }
        }
    }
    Ok(AggregateReport {
        schema_version: REPORT_SCHEMA_VERSION,
        cases: per_case.iter().map(|c| c.case.clone()).collect(),
        regions,
        psnr: psnr_values.into_iter().filter_map(|(k, v)| Summary::of(&v).map(|s| (k, s))).collect(),
    })
}

/// Writes `report` as pretty JSON to `path`.
pub fn write_json<S: Serialize>(value: &S, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
