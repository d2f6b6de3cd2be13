//! Isotropic resampling with cubic B-spline interpolation.
//!
//! Interpolation coefficients come from the recursive (causal + anti-causal)
//! prefilter with pole `sqrt(3) - 2`, using whole-sample mirror extension
//! (`... c b | a b c ... | b a ...`) both for prefiltering and evaluation.
//! The output grid starts at the input origin and keeps
//! `floor((n - 1) * s / t) + 1` samples per axis, so every output voxel
//! center lies inside the source extent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Geometry, Volume};
use crate::Real;

/// Cubic B-spline coefficients on the source grid.
#[derive(Clone, Debug)]
pub struct BSplineCoeffField<T> {
    geom: Geometry,
    data: Vec<T>,
}

/// Interpolator choice for a resampling run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    /// Cubic B-spline; for intensity volumes.
    Bspline,
    /// Nearest neighbour; for label masks.
    Nn,
}

/// Finest spacing replicated on all three axes.
pub fn finest_isotropic_spacing(geom: &Geometry) -> [f64; 3] {
    [geom.min_spacing(); 3]
}

fn pole<T: Real>() -> T {
    T::lit(3f64.sqrt() - 2.0)
}

/// Whole-sample mirror folding with period `2n - 2`.
#[inline]
fn mirror(k: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * n as isize - 2;
    let m = k.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

fn prefilter_line<T: Real>(c: &mut [T]) {
    let n = c.len();
    if n < 2 {
        return;
    }
    let z = pole::<T>();
    let gain = (T::one() - z) * (T::one() - z.recip());
    c.iter_mut().for_each(|v| *v *= gain);

    // Causal initialization, exact for mirror boundaries.
    let iz = z.recip();
    let mut zn = z;
    let mut z2n = z.powi(n as i32 - 1);
    let mut sum = c[0] + z2n * c[n - 1];
    z2n = z2n * z2n * iz;
    for v in &c[1..n - 1] {
        sum += (zn + z2n) * *v;
        zn *= z;
        z2n *= iz;
    }
    c[0] = sum / (T::one() - zn * zn);
    for i in 1..n {
        let prev = c[i - 1];
        c[i] += z * prev;
    }
    c[n - 1] = (z / (z * z - T::one())) * (z * c[n - 2] + c[n - 1]);
    for i in (0..n - 1).rev() {
        c[i] = z * (c[i + 1] - c[i]);
    }
}

/// Applies `f` to every line along `axis`, in place.
pub(crate) fn for_each_line<T: Real>(data: &mut [T], dims: [usize; 3], axis: usize, f: impl Fn(&mut [T]) + Sync + Send) {
    let [nx, ny, nz] = dims;
    match axis {
        0 => data.par_chunks_mut(nx).for_each(&f),
        1 => data.par_chunks_mut(nx * ny).for_each(|slab| {
            let mut line = vec![T::zero(); ny];
            for x in 0..nx {
                for y in 0..ny {
                    line[y] = slab[x + nx * y];
                }
                f(&mut line);
                for y in 0..ny {
                    slab[x + nx * y] = line[y];
                }
            }
        }),
        _ => {
            let slab = nx * ny;
            let lines: Vec<Vec<T>> = (0..slab)
                .into_par_iter()
                .map(|xy| {
                    let mut line: Vec<T> = (0..nz).map(|z| data[xy + slab * z]).collect();
                    f(&mut line);
                    line
                })
                .collect();
            for (xy, line) in lines.into_iter().enumerate() {
                for (z, v) in line.into_iter().enumerate() {
                    data[xy + slab * z] = v;
                }
            }
        }
    }
}

/// Computes interpolation coefficients; every axis needs at least 4 samples.
pub fn prefilter<T: Real>(vol: &Volume<T>) -> Result<BSplineCoeffField<T>> {
    let geom = *vol.geometry();
    if geom.dims.iter().any(|&d| d < 4) {
        return Err(Error::TooSmall(format!(
            "cubic B-spline needs >= 4 samples per axis, dims are {:?}",
            geom.dims
        )));
    }
    let mut data = vol.data().to_vec();
    for axis in 0..3 {
        for_each_line(&mut data, geom.dims, axis, prefilter_line);
    }
    Ok(BSplineCoeffField { geom, data })
}

/// Cubic B-spline weights for samples `floor(x) - 1 ..= floor(x) + 2`.
#[inline]
fn weights<T: Real>(t: T) -> [T; 4] {
    let sixth = T::lit(1.0 / 6.0);
    let one = T::one();
    let u = one - t;
    let t2 = t * t;
    let t3 = t2 * t;
    [
        u * u * u * sixth,
        (T::lit(3.0) * t3 - T::lit(6.0) * t2 + T::lit(4.0)) * sixth,
        (T::lit(-3.0) * t3 + T::lit(3.0) * t2 + T::lit(3.0) * t + one) * sixth,
        t3 * sixth,
    ]
}

#[derive(Clone, Copy)]
struct Tap<T> {
    idx: [usize; 4],
    w: [T; 4],
}

fn taps<T: Real>(pos: f64, n: usize) -> Tap<T> {
    let base = pos.floor();
    let t = T::lit(pos - base);
    let b = base as isize;
    Tap {
        idx: [mirror(b - 1, n), mirror(b, n), mirror(b + 1, n), mirror(b + 2, n)],
        w: weights(t),
    }
}

impl<T: Real> BSplineCoeffField<T> {
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn coefficients(&self) -> &[T] {
        &self.data
    }

    /// Spline value at continuous voxel coordinates.
    pub fn evaluate(&self, p: [f64; 3]) -> T {
        let [nx, ny, nz] = self.geom.dims;
        let tx = taps::<T>(p[0], nx);
        let ty = taps::<T>(p[1], ny);
        let tz = taps::<T>(p[2], nz);
        let mut acc = T::zero();
        for k in 0..4 {
            for j in 0..4 {
                let wjk = ty.w[j] * tz.w[k];
                let row = nx * (ty.idx[j] + ny * tz.idx[k]);
                for i in 0..4 {
                    acc += tx.w[i] * wjk * self.data[tx.idx[i] + row];
                }
            }
        }
        acc
    }

    /// Evaluates the spline on the tensor grid `xs x ys x zs` (voxel coordinates).
    pub fn evaluate_grid(&self, positions: [&[f64]; 3]) -> Vec<T> {
        let mut dims = self.geom.dims;
        let mut data = self.data.clone();
        for axis in 0..3 {
            let (d, nd) = interp_axis(&data, dims, axis, positions[axis]);
            data = d;
            dims = nd;
        }
        data
    }
}

/// Replaces `axis` with samples at `pos` (source voxel coordinates).
fn interp_axis<T: Real>(data: &[T], dims: [usize; 3], axis: usize, pos: &[f64]) -> (Vec<T>, [usize; 3]) {
    let n = dims[axis];
    let tap: Vec<Tap<T>> = pos.iter().map(|&p| taps(p, n)).collect();
    let mut out_dims = dims;
    out_dims[axis] = pos.len();
    let [ox, oy, oz] = out_dims;
    let [ix, iy, _] = dims;
    let mut out = vec![T::zero(); ox * oy * oz];
    out.par_chunks_mut(ox * oy).enumerate().for_each(|(z, slab)| {
        for y in 0..oy {
            for x in 0..ox {
                let (t, c) = match axis {
                    0 => (&tap[x], [0usize, y, z]),
                    1 => (&tap[y], [x, 0, z]),
                    _ => (&tap[z], [x, y, 0]),
                };
                let mut acc = T::zero();
                for k in 0..4 {
                    let mut s = c;
                    s[axis] = t.idx[k];
                    acc += t.w[k] * data[s[0] + ix * (s[1] + iy * s[2])];
                }
                slab[x + ox * y] = acc;
            }
        }
    });
    (out, out_dims)
}

/// Output grid for resampling `geom` to `target` spacing.
pub fn target_geometry(geom: &Geometry, target: [f64; 3]) -> Result<Geometry> {
    if target.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
        return Err(Error::InvalidParameter(format!("target spacing {target:?} must be > 0")));
    }
    let mut dims = [0usize; 3];
    for a in 0..3 {
        let extent = (geom.dims[a] - 1) as f64 * geom.spacing[a];
        dims[a] = (extent / target[a] + 1e-9).floor() as usize + 1;
    }
    Geometry::new(dims, target, geom.origin)
}

fn source_positions(src: &Geometry, dst: &Geometry) -> [Vec<f64>; 3] {
    let pos = |a: usize| -> Vec<f64> {
        let r = dst.spacing[a] / src.spacing[a];
        let max = (src.dims[a] - 1) as f64;
        (0..dst.dims[a]).map(|i| (i as f64 * r).min(max)).collect()
    };
    [pos(0), pos(1), pos(2)]
}

/// Cubic B-spline resampling onto `target` spacing.
pub fn resample_isotropic<T: Real>(vol: &Volume<T>, target: [f64; 3]) -> Result<Volume<T>> {
    let dst = target_geometry(vol.geometry(), target)?;
    let coeffs = prefilter(vol)?;
    let [px, py, pz] = source_positions(vol.geometry(), &dst);
    let data = coeffs.evaluate_grid([&px, &py, &pz]);
    Volume::new(dst, data)
}

/// Nearest-neighbour resampling of an intensity volume.
pub fn resample_nearest<T: Real>(vol: &Volume<T>, target: [f64; 3]) -> Result<Volume<T>> {
    let src = *vol.geometry();
    let dst = target_geometry(&src, target)?;
    let [px, py, pz] = source_positions(&src, &dst);
    let near = |p: &f64| p.round() as usize;
    Ok(Volume::from_fn(dst, |x, y, z| vol.get(near(&px[x]), near(&py[y]), near(&pz[z]))))
}

/// Nearest-neighbour resampling of a mask; output stays binary.
pub fn resample_mask(mask: &BinaryMask, target: [f64; 3]) -> Result<BinaryMask> {
    let src = *mask.geometry();
    let dst = target_geometry(&src, target)?;
    let [px, py, pz] = source_positions(&src, &dst);
    let near = |p: &f64| p.round() as usize;
    Ok(BinaryMask::from_fn(dst, |x, y, z| mask.get(near(&px[x]), near(&py[y]), near(&pz[z]))))
}
