//! The seven-channel fusion input: the scan followed by six normalized filter
//! responses, always in the order of [`CHANNEL_NAMES`].
//!
//! Channel 0 is z-scored over its nonzero voxels; the statistics are kept in
//! [`HyperVolume::standardization`] and in the JSON sidecar.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{psnr, Decibels};
use crate::vesselness::{hessian_filter_bank, normalize_response, rorpo::rorpo_response, FilterKind, FilterParams};
use crate::volume::{BinaryMask, HyperVolume, Standardization, Volume};
use crate::Real;

pub const CHANNEL_NAMES: [&str; 7] = ["Original", "Frangi", "Jerman", "Sato", "Zhang", "Meijering", "RORPO"];

const HESSIAN_CHANNELS: [FilterKind; 5] =
    [FilterKind::Frangi, FilterKind::Jerman, FilterKind::Sato, FilterKind::Zhang, FilterKind::Meijering];

/// Z-score of `vol` using the mean and standard deviation of its nonzero
/// voxels (all voxels when none is nonzero). A zero deviation is taken as 1.
pub fn standardize<T: Real>(vol: &Volume<T>) -> (Volume<T>, Standardization) {
    let nonzero: Vec<f64> = vol.data().iter().map(|v| v.as_f64()).filter(|&v| v != 0.0).collect();
    let (region, sample): (&str, Vec<f64>) = if nonzero.is_empty() {
        ("all", vol.data().iter().map(|v| v.as_f64()).collect())
    } else {
        ("nonzero", nonzero)
    };
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    let out = vol.map(|v| T::lit((v.as_f64() - mean) / std));
    (out, Standardization { region: region.into(), mean, std })
}

/// Builds the hyper-volume of `original` with filter parameters `p`.
pub fn build_hypervolume<T: Real>(original: &Volume<T>, p: &FilterParams) -> Result<HyperVolume<T>> {
    p.validate()?;
    if !original.geometry().is_isotropic() {
        warn!("building a hyper-volume on anisotropic spacing {:?}; resample first", original.spacing());
    }
    let timed = |name: &str, t: std::time::Instant| info!("{name} took {:.2} s", t.elapsed().as_secs_f64());
    let (bank, rorpo) = rayon::join(
        || {
            let t = std::time::Instant::now();
            let r = hessian_filter_bank(original, &HESSIAN_CHANNELS, p);
            timed("Frangi/Jerman/Sato/Zhang/Meijering", t);
            r
        },
        || {
            let t = std::time::Instant::now();
            let r = rorpo_response(original, p);
            timed("RORPO", t);
            r
        },
    );
    let bank = bank.map_err(|e| Error::Filter { filter: "Frangi/Jerman/Sato/Zhang/Meijering", source: Box::new(e) })?;
    let rorpo = rorpo.map_err(|e| Error::Filter { filter: FilterKind::Rorpo.name(), source: Box::new(e) })?;

    let (scan, stats) = standardize(original);
    let mut channels = Vec::with_capacity(CHANNEL_NAMES.len());
    channels.push(scan);
    channels.extend(bank.iter().map(normalize_response));
    channels.push(normalize_response(&rorpo));
    let mut hv = HyperVolume::new(channels, CHANNEL_NAMES.iter().map(|s| s.to_string()).collect())?;
    hv.standardization = Some(stats);
    Ok(hv)
}

/// Checks that `hv` follows the fixed channel order.
pub fn ensure_channel_contract<T: Real>(hv: &HyperVolume<T>) -> Result<()> {
    if hv.channel_names() != CHANNEL_NAMES {
        return Err(Error::InvalidParameter(format!(
            "expected channels {CHANNEL_NAMES:?}, got {:?}",
            hv.channel_names()
        )));
    }
    Ok(())
}

/// Voxelwise maximum of the six filter channels.
pub fn enhanced_channel<T: Real>(hv: &HyperVolume<T>) -> Result<Volume<T>> {
    ensure_channel_contract(hv)?;
    let ch = hv.channels();
    let mut data = ch[1].data().to_vec();
    for c in &ch[2..] {
        data.iter_mut().zip(c.data()).for_each(|(a, &b)| *a = a.max(b));
    }
    Volume::new(*hv.geometry(), data)
}

/// PSNR before and after enhancement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsnrGain {
    pub before: Decibels,
    pub after: Decibels,
}

impl PsnrGain {
    pub fn gain_db(&self) -> f64 {
        self.after.0 - self.before.0
    }
}

pub fn psnr_gain_report<T: Real>(original: &Volume<T>, enhanced: &Volume<T>, gt: &BinaryMask) -> Result<PsnrGain> {
    original.geometry().ensure_matches(enhanced.geometry(), "enhanced channel")?;
    Ok(PsnrGain { before: Decibels(psnr(original, gt)?), after: Decibels(psnr(enhanced, gt)?) })
}

/// JSON written next to a hyper-volume file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperVolumeSidecar {
    pub channels: Vec<String>,
    pub standardization: Option<Standardization>,
}

impl HyperVolumeSidecar {
    pub fn of<T: Real>(hv: &HyperVolume<T>) -> Self {
        HyperVolumeSidecar { channels: hv.channel_names().to_vec(), standardization: hv.standardization.clone() }
    }

    /// Restores channel 0 of `hv` to the original intensity scale.
    pub fn destandardize<T: Real>(&self, channel0: &Volume<T>) -> Volume<T> {
        match &self.standardization {
            Some(s) => channel0.map(|v| T::lit(v.as_f64() * s.std + s.mean)),
            None => channel0.clone(),
        }
    }
}
