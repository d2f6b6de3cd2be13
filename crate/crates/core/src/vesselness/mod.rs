//! Vesselness filters: five Hessian measures and RORPO, multi-scale.
//!
//! Hessian filters are evaluated per scale on scale-normalized eigenvalues and
//! combined by voxelwise maximum; RORPO is combined over path lengths the same
//! way. [`multiscale`] then min-max normalizes to `[0, 1]`.
//!
//! The Zhang channel is `J(-l2, rho) * (1 - |l1| / |l2|)`: the Jerman ratio
//! (with the same `tau` regularization) damped by the axial-to-radial
//! eigenvalue ratio, so it is 1 on ideal tubes and 0 on isotropic blobs.

pub mod pointwise;
pub mod rorpo;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::EigenTriple;
use crate::error::{Error, Result};
use crate::scale_space::hessian_at_scale;
use crate::volume::{Geometry, Volume};
use crate::Real;

pub use pointwise::{frangi, jerman, meijering, sato, zhang, ScaleContext};
pub use rorpo::{path_opening, rorpo_response, Orientation, ORIENTATIONS};

/// One of the six enhancement filters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Frangi,
    Jerman,
    Sato,
    Zhang,
    Meijering,
    Rorpo,
}

impl FilterKind {
    /// Channel order of the fused hyper-volume (after the original scan).
    pub const ALL: [FilterKind; 6] = [
        FilterKind::Frangi,
        FilterKind::Jerman,
        FilterKind::Sato,
        FilterKind::Zhang,
        FilterKind::Meijering,
        FilterKind::Rorpo,
    ];

    /// Display name used for channel labels.
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Frangi => "Frangi",
            FilterKind::Jerman => "Jerman",
            FilterKind::Sato => "Sato",
            FilterKind::Zhang => "Zhang",
            FilterKind::Meijering => "Meijering",
            FilterKind::Rorpo => "RORPO",
        }
    }

    pub fn is_hessian(self) -> bool {
        self != FilterKind::Rorpo
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown filter '{s}'")))
    }
}

/// Which intensity the vessels have relative to their surroundings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    #[default]
    BrightOnDark,
    DarkOnBright,
}

/// Frangi structureness constant: fixed, or half the largest Hessian norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrangiCRepr", into = "FrangiCRepr")]
pub enum FrangiC {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FrangiCRepr {
    Value(f64),
    Keyword(String),
}

impl TryFrom<FrangiCRepr> for FrangiC {
    type Error = String;

    fn try_from(r: FrangiCRepr) -> std::result::Result<Self, String> {
        match r {
            FrangiCRepr::Value(v) => Ok(FrangiC::Fixed(v)),
            FrangiCRepr::Keyword(s) if s == "auto" => Ok(FrangiC::Auto),
            FrangiCRepr::Keyword(s) => Err(format!("frangi_c must be a number or \"auto\", got \"{s}\"")),
        }
    }
}

impl From<FrangiC> for FrangiCRepr {
    fn from(c: FrangiC) -> Self {
        match c {
            FrangiC::Auto => FrangiCRepr::Keyword("auto".into()),
            FrangiC::Fixed(v) => FrangiCRepr::Value(v),
        }
    }
}

/// Filter configuration shared by all six channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    /// Gaussian scales in mm, strictly increasing.
    pub scales: Vec<f64>,
    pub polarity: Polarity,
    pub frangi_alpha: f64,
    pub frangi_beta: f64,
    pub frangi_c: FrangiC,
    pub jerman_tau: f64,
    pub sato_alpha1: f64,
    pub sato_alpha2: f64,
    pub meijering_alpha: f64,
    /// Path lengths in voxels, strictly increasing.
    pub rorpo_lengths: Vec<usize>,
    /// Ball radius in voxels for the dilation applied before path openings.
    pub rorpo_dilation: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            scales: log_spaced_scales(0.6, 3.0, 5),
            polarity: Polarity::BrightOnDark,
            frangi_alpha: 0.5,
            frangi_beta: 0.5,
            frangi_c: FrangiC::Auto,
            jerman_tau: 0.5,
            sato_alpha1: 0.5,
            sato_alpha2: 2.0,
            meijering_alpha: -1.0 / 3.0,
            rorpo_lengths: vec![7, 11, 15],
            rorpo_dilation: 0,
        }
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced_scales(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

impl FilterParams {
    /// Defaults with scales spanning `0.6 * min_spacing` to `radius_bound_mm`.
    pub fn for_geometry(geom: &Geometry, radius_bound_mm: f64) -> Self {
        FilterParams {
            scales: log_spaced_scales(0.6 * geom.min_spacing(), radius_bound_mm, 5),
            ..FilterParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.scales.is_empty() {
            return bad("scale list is empty".into());
        }
        if self.scales.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return bad(format!("scales must be finite and > 0: {:?}", self.scales));
        }
        if self.scales.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("scales must be strictly increasing: {:?}", self.scales));
        }
        let unit = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be in (0, 1], got {v}")))
            }
        };
        unit("frangi_alpha", self.frangi_alpha)?;
        unit("frangi_beta", self.frangi_beta)?;
        unit("jerman_tau", self.jerman_tau)?;
        if let FrangiC::Fixed(c) = self.frangi_c {
            if !(c.is_finite() && c > 0.0) {
                return bad(format!("frangi_c must be > 0, got {c}"));
            }
        }
        for (name, v) in [("sato_alpha1", self.sato_alpha1), ("sato_alpha2", self.sato_alpha2)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !self.meijering_alpha.is_finite() {
            return bad("meijering_alpha must be finite".into());
        }
        if self.rorpo_lengths.is_empty() {
            return bad("rorpo_lengths is empty".into());
        }
        if self.rorpo_lengths[0] < 2 || self.rorpo_lengths.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("rorpo_lengths must be strictly increasing and >= 2: {:?}", self.rorpo_lengths));
        }
        Ok(())
    }
}

/// Min-max normalization to `[0, 1]`; a constant volume maps to zeros.
pub fn normalize_response<T: Real>(vol: &Volume<T>) -> Volume<T> {
    let (lo, hi) = vol.min_max();
    let range = hi - lo;
    if !(range > T::zero()) {
        return Volume::zeros(*vol.geometry());
    }
    vol.map(|v| ((v - lo) / range).max(T::zero()).min(T::one()))
}

pub(crate) fn apply_polarity<T: Real>(vol: &Volume<T>, polarity: Polarity) -> Volume<T> {
    match polarity {
        Polarity::BrightOnDark => vol.clone(),
        Polarity::DarkOnBright => vol.map(|v| -v),
    }
}

fn scale_context<T: Real>(eig: &[EigenTriple<T>], p: &FilterParams, frangi_c: T) -> ScaleContext<T> {
    let alpha = T::lit(p.meijering_alpha);
    let (max_l3, min_m) = eig
        .par_iter()
        .map(|e| {
            let m = if e.l2 < T::zero() && e.l3 < T::zero() {
                pointwise::meijering_modified_min(e, alpha)
            } else {
                T::zero()
            };
            (e.l3.abs(), m)
        })
        .reduce(|| (T::zero(), T::zero()), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    ScaleContext { frangi_c, lambda_rho_floor: T::lit(p.jerman_tau) * max_l3, meijering_min: min_m }
}

fn evaluate<T: Real>(kind: FilterKind, e: &EigenTriple<T>, p: &FilterParams, ctx: &ScaleContext<T>) -> T {
    match kind {
        FilterKind::Frangi => frangi(e, T::lit(p.frangi_alpha), T::lit(p.frangi_beta), ctx.frangi_c),
        FilterKind::Jerman => jerman(e, ctx.lambda_rho_floor),
        FilterKind::Sato => sato(e, T::lit(p.sato_alpha1), T::lit(p.sato_alpha2)),
        FilterKind::Zhang => zhang(e, ctx.lambda_rho_floor),
        FilterKind::Meijering => meijering(e, T::lit(p.meijering_alpha), ctx.meijering_min),
        FilterKind::Rorpo => unreachable!("RORPO is not a Hessian filter"),
    }
}

fn resolve_frangi_c<T: Real>(vol: &Volume<T>, kinds: &[FilterKind], p: &FilterParams) -> Result<T> {
    match p.frangi_c {
        FrangiC::Fixed(c) => Ok(T::lit(c)),
        FrangiC::Auto if !kinds.contains(&FilterKind::Frangi) => Ok(T::one()),
        FrangiC::Auto => {
            let mut max = T::zero();
            for &s in &p.scales {
                max = max.max(hessian_at_scale(vol, s)?.max_norm());
            }
            Ok(max / T::lit(2.0))
        }
    }
}

/// Runs the Hessian filters in `kinds` over every scale, calling `sink` with
/// the scale index and one response buffer per kind.
fn sweep<T: Real>(
    vol: &Volume<T>,
    kinds: &[FilterKind],
    p: &FilterParams,
    mut sink: impl FnMut(usize, Vec<Vec<T>>),
) -> Result<()> {
    p.validate()?;
    if let Some(k) = kinds.iter().find(|k| !k.is_hessian()) {
        return Err(Error::InvalidParameter(format!("{k} is not a Hessian filter")));
    }
    let vol = apply_polarity(vol, p.polarity);
    let c = resolve_frangi_c(&vol, kinds, p)?;
    for (i, &s) in p.scales.iter().enumerate() {
        let eig = hessian_at_scale(&vol, s)?.eigenvalues();
        let ctx = scale_context(&eig, p, c);
        let out = kinds
            .iter()
            .map(|&k| eig.par_iter().map(|e| evaluate(k, e, p, &ctx)).collect())
            .collect();
        sink(i, out);
    }
    Ok(())
}

/// Unnormalized response of one Hessian filter at each scale.
pub fn per_scale_responses<T: Real>(vol: &Volume<T>, kind: FilterKind, p: &FilterParams) -> Result<Vec<Volume<T>>> {
    let geom = *vol.geometry();
    let mut out = Vec::with_capacity(p.scales.len());
    sweep(vol, &[kind], p, |_, mut r| out.push(Volume::from_parts_unchecked(geom, r.remove(0))))?;
    Ok(out)
}

/// Voxelwise maximum over scales of each Hessian filter, before normalization.
pub fn hessian_filter_bank<T: Real>(vol: &Volume<T>, kinds: &[FilterKind], p: &FilterParams) -> Result<Vec<Volume<T>>> {
    let geom = *vol.geometry();
    let mut acc: Vec<Vec<T>> = vec![vec![T::zero(); geom.len()]; kinds.len()];
    sweep(vol, kinds, p, |_, responses| {
        for (a, r) in acc.iter_mut().zip(responses) {
            a.par_iter_mut().zip(r.par_iter()).for_each(|(a, &r)| *a = a.max(r));
        }
    })?;
    Ok(acc.into_iter().map(|d| Volume::from_parts_unchecked(geom, d)).collect())
}

/// Multi-scale (or multi-length) response before normalization.
pub fn multiscale_max<T: Real>(vol: &Volume<T>, kind: FilterKind, p: &FilterParams) -> Result<Volume<T>> {
    let wrap = |e: Error| Error::Filter { filter: kind.name(), source: Box::new(e) };
    if kind == FilterKind::Rorpo {
        return rorpo_response(vol, p).map_err(wrap);
    }
    hessian_filter_bank(vol, &[kind], p).map(|mut v| v.remove(0)).map_err(wrap)
}

/// Multi-scale response normalized to `[0, 1]`.
pub fn multiscale<T: Real>(vol: &Volume<T>, kind: FilterKind, p: &FilterParams) -> Result<Volume<T>> {
    multiscale_max(vol, kind, p).map(|v| normalize_response(&v))
}
