//! Exact anisotropic Euclidean distance transform.
//!
//! Separable lower-envelope-of-parabolas algorithm (one pass per axis).
//! Distances are measured center to center, in mm, from each foreground voxel
//! to the nearest background voxel. The outside of the volume counts as
//! background, so a lone foreground voxel at spacing 1 has distance 1.

use crate::error::{Error, Result};
use crate::resample::for_each_line;
use crate::volume::{BinaryMask, Geometry};

/// Per-voxel distance in mm to the nearest background voxel; 0 on background.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    geom: Geometry,
    data: Vec<f64>,
}

impl DistanceField {
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.data[idx]
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.geom.index(x, y, z)]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// 1D squared distance transform of `f` with sample pitch `w`, in place.
///
/// Virtual zero-valued sites at `-1` and `n` model the background outside.
fn edt_line(f: &mut [f64], w: f64) {
    let n = f.len();
    let w2 = w * w;
    let mut sites: Vec<(f64, f64)> = Vec::with_capacity(n + 2);
    sites.push((-1.0, 0.0));
    sites.extend(f.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(i, &v)| (i as f64, v)));
    sites.push((n as f64, 0.0));

    let meet = |a: (f64, f64), b: (f64, f64)| ((b.1 + w2 * b.0 * b.0) - (a.1 + w2 * a.0 * a.0)) / (2.0 * w2 * (b.0 - a.0));
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(sites.len());
    let mut bounds: Vec<f64> = Vec::with_capacity(sites.len());
    for &s in &sites {
        while let Some(&last) = hull.last() {
            let x = meet(last, s);
            if hull.len() > 1 && x <= bounds[hull.len() - 1] {
                hull.pop();
                bounds.pop();
            } else {
                bounds.push(x);
                hull.push(s);
                break;
            }
        }
        if hull.is_empty() {
            hull.push(s);
            bounds.push(f64::NEG_INFINITY);
        }
    }
    let mut k = 0;
    for (i, out) in f.iter_mut().enumerate() {
        let x = i as f64;
        while k + 1 < hull.len() && bounds[k + 1] < x {
            k += 1;
        }
        let (q, v) = hull[k];
        *out = w2 * (x - q) * (x - q) + v;
    }
}

/// Exact Euclidean distance transform of `mask` in mm.
pub fn distance_transform(mask: &BinaryMask) -> Result<DistanceField> {
    if mask.is_empty() {
        return Err(Error::Empty("distance transform of an empty mask".into()));
    }
    let geom = *mask.geometry();
    let mut data: Vec<f64> = mask.data().iter().map(|&b| if b == 1 { f64::INFINITY } else { 0.0 }).collect();
    for axis in 0..3 {
        let w = geom.spacing[axis];
        for_each_line(&mut data, geom.dims, axis, |line| edt_line(line, w));
    }
    data.iter_mut().for_each(|v| *v = v.sqrt());
    Ok(DistanceField { geom, data })
}
