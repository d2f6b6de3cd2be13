//! Gaussian scale space and scale-normalized Hessians.
//!
//! Smoothing is a separable convolution with a sampled Gaussian truncated at
//! five standard deviations and renormalized to unit sum. Borders use
//! half-sample symmetric extension (`... b a | a b c ... | c b ...`), which
//! preserves the total intensity exactly. Second derivatives are central
//! differences of the smoothed volume, in physical units, multiplied by
//! `sigma^2`.

use rayon::prelude::*;

use crate::eigen::{eig_sym3, EigenTriple, SymMat3};
use crate::error::{Error, Result};
use crate::volume::{Geometry, Volume};
use crate::Real;

/// Scales below this fraction of the finest spacing are clamped up to it.
pub const MIN_SIGMA_FRACTION: f64 = 0.5;

/// Per-voxel Hessians at one scale.
#[derive(Clone, Debug)]
pub struct SymMat3Field<T> {
    geom: Geometry,
    scale: f64,
    data: Vec<SymMat3<T>>,
}

impl<T: Real> SymMat3Field<T> {
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    /// Scale (mm) actually used, after clamping.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn data(&self) -> &[SymMat3<T>] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> SymMat3<T> {
        self.data[self.geom.index(x, y, z)]
    }

    /// Eigenvalues at every voxel.
    pub fn eigenvalues(&self) -> Vec<EigenTriple<T>> {
        self.data.par_iter().map(eig_sym3).collect()
    }

    /// Largest Frobenius norm over the field.
    pub fn max_norm(&self) -> T {
        self.data.par_iter().map(|m| m.norm()).reduce(T::zero, |a, b| a.max(b))
    }
}

/// Half-sample symmetric index folding with period `2n`.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - 1 - m) as usize
    } else {
        m as usize
    }
}

/// Unit-sum sampled Gaussian, radius `ceil(5 sigma)` samples.
pub fn gaussian_kernel(sigma_vox: f64) -> Vec<f64> {
    let radius = (5.0 * sigma_vox).ceil().max(1.0) as isize;
    let denom = 2.0 * sigma_vox * sigma_vox;
    let mut k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / denom).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Convolves along `axis` with a symmetric odd-length kernel.
pub(crate) fn convolve_axis<T: Real>(data: &[T], dims: [usize; 3], axis: usize, kernel: &[f64]) -> Vec<T> {
    let [nx, ny, nz] = dims;
    let radius = (kernel.len() / 2) as isize;
    let taps: Vec<T> = kernel.iter().map(|&w| T::lit(w)).collect();
    let slab = nx * ny;
    let mut out = vec![T::zero(); data.len()];
    out.par_chunks_mut(slab).enumerate().for_each(|(z, out_slab)| match axis {
        0 => {
            for y in 0..ny {
                let row = &data[slab * z + nx * y..slab * z + nx * (y + 1)];
                let orow = &mut out_slab[nx * y..nx * (y + 1)];
                for (x, o) in orow.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for (k, &w) in taps.iter().enumerate() {
                        acc += w * row[reflect(x as isize + k as isize - radius, nx)];
                    }
                    *o = acc;
                }
            }
        }
        1 => {
            let src = &data[slab * z..slab * (z + 1)];
            for y in 0..ny {
                let orow = &mut out_slab[nx * y..nx * (y + 1)];
                for (k, &w) in taps.iter().enumerate() {
                    let yy = reflect(y as isize + k as isize - radius, ny);
                    let irow = &src[nx * yy..nx * (yy + 1)];
                    for (o, &v) in orow.iter_mut().zip(irow) {
                        *o += w * v;
                    }
                }
            }
        }
        _ => {
            for (k, &w) in taps.iter().enumerate() {
                let zz = reflect(z as isize + k as isize - radius, nz);
                let src = &data[slab * zz..slab * (zz + 1)];
                for (o, &v) in out_slab.iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
    });
    out
}

/// Per-axis Gaussian standard deviations in voxels for a physical `sigma`.
pub fn voxel_sigmas(geom: &Geometry, sigma: f64) -> [f64; 3] {
    [sigma / geom.spacing[0], sigma / geom.spacing[1], sigma / geom.spacing[2]]
}

/// Separable Gaussian smoothing with standard deviation `sigma` in mm.
pub fn gaussian_smooth<T: Real>(vol: &Volume<T>, sigma: f64) -> Result<Volume<T>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    let geom = *vol.geometry();
    let sig = voxel_sigmas(&geom, sigma);
    let mut data = vol.data().to_vec();
    for axis in 0..3 {
        if geom.dims[axis] > 1 {
            data = convolve_axis(&data, geom.dims, axis, &gaussian_kernel(sig[axis]));
        }
    }
    Ok(Volume::from_parts_unchecked(geom, data))
}

/// Clamps a requested scale to the finest resolvable one, warning when it does.
pub fn effective_sigma(geom: &Geometry, sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    let floor = MIN_SIGMA_FRACTION * geom.min_spacing();
    if sigma < floor {
        log::warn!("scale {sigma} mm is below the resolvable {floor} mm; clamped");
        Ok(floor)
    } else {
        Ok(sigma)
    }
}

/// Scale-normalized Hessian (`sigma^2` times second derivatives) at `sigma` mm.
pub fn hessian_at_scale<T: Real>(vol: &Volume<T>, sigma: f64) -> Result<SymMat3Field<T>> {
    let geom = *vol.geometry();
    let sigma = effective_sigma(&geom, sigma)?;
    let smooth = gaussian_smooth(vol, sigma)?;
    let norm = T::lit(sigma * sigma);
    Ok(SymMat3Field { geom, scale: sigma, data: hessian_of(&smooth, norm) })
}

/// Central-difference Hessian of `f`, multiplied by `norm`.
pub(crate) fn hessian_of<T: Real>(f: &Volume<T>, norm: T) -> Vec<SymMat3<T>> {
    let geom = *f.geometry();
    let [nx, ny, nz] = geom.dims;
    let h = geom.spacing;
    let d = f.data();
    let inv2 = [T::lit(1.0 / (h[0] * h[0])), T::lit(1.0 / (h[1] * h[1])), T::lit(1.0 / (h[2] * h[2]))];
    let inv_mixed = |a: usize, b: usize| T::lit(1.0 / (4.0 * h[a] * h[b]));
    let (ixy, ixz, iyz) = (inv_mixed(0, 1), inv_mixed(0, 2), inv_mixed(1, 2));
    let two = T::lit(2.0);
    let slab = nx * ny;
    let mut out = vec![SymMat3::default(); geom.len()];
    out.par_chunks_mut(slab).enumerate().for_each(|(z, o)| {
        let zs = [reflect(z as isize - 1, nz), z, reflect(z as isize + 1, nz)];
        for y in 0..ny {
            let ys = [reflect(y as isize - 1, ny), y, reflect(y as isize + 1, ny)];
            for x in 0..nx {
                let xs = [reflect(x as isize - 1, nx), x, reflect(x as isize + 1, nx)];
                let at = |i: usize, j: usize, k: usize| d[xs[i] + nx * (ys[j] + ny * zs[k])];
                let c = at(1, 1, 1);
                let hxx = (at(2, 1, 1) - two * c + at(0, 1, 1)) * inv2[0];
                let hyy = (at(1, 2, 1) - two * c + at(1, 0, 1)) * inv2[1];
                let hzz = (at(1, 1, 2) - two * c + at(1, 1, 0)) * inv2[2];
                let hxy = mixed(|a, b| at(a, b, 1)) * ixy;
                let hxz = mixed(|a, b| at(a, 1, b)) * ixz;
                let hyz = mixed(|a, b| at(1, a, b)) * iyz;
                o[x + nx * y] = SymMat3::new(hxx, hyy, hzz, hxy, hxz, hyz).scale(norm);
            }
        }
    });
    out
}

/// Four-point mixed difference over a 3x3 neighbourhood indexed `(first, second)`.
#[inline]
fn mixed<T: Real>(at: impl Fn(usize, usize) -> T) -> T {
    (at(2, 2) - at(2, 0)) - (at(0, 2) - at(0, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(n: usize, spacing: [f64; 3]) -> Geometry {
        Geometry::new([n; 3], spacing, [0.0; 3]).unwrap()
    }

    #[test]
    fn reflect_folds() {
        let v: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(v, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(-1, 1), 0);
        assert_eq!(reflect(5, 1), 0);
    }

    #[test]
    fn impulse_matches_closed_form_gaussian() {
        let n = 33;
        let c = n / 2;
        let g = geom(n, [1.0; 3]);
        let v = Volume::<f64>::from_fn(g, |x, y, z| (x == c && y == c && z == c) as u8 as f64);
        let s = gaussian_smooth(&v, 2.0).unwrap();
        let sigma = 2.0f64;
        let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-1.5);
        for z in c - 6..=c + 6 {
            for y in c - 6..=c + 6 {
                for x in c - 6..=c + 6 {
                    let r2 = [x, y, z].iter().map(|&a| (a as f64 - c as f64).powi(2)).sum::<f64>();
                    let expect = norm * (-r2 / (2.0 * sigma * sigma)).exp();
                    let got = s.get(x, y, z);
                    assert!((got - expect).abs() <= 1e-4 * expect, "{x},{y},{z}: {got} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn constant_volume_unchanged_and_mean_preserved() {
        let g = geom(9, [1.0, 1.0, 2.0]);
        let v = Volume::<f64>::filled(g, 3.5);
        let s = gaussian_smooth(&v, 2.0).unwrap();
        assert!(s.data().iter().all(|&x| (x - 3.5).abs() < 1e-12));

        let w = Volume::<f64>::from_fn(g, |x, y, z| ((x * 7 + y * 3 + z * 11) % 13) as f64);
        let sw = gaussian_smooth(&w, 3.0).unwrap();
        assert!((sw.mean() - w.mean()).abs() <= 1e-4 * w.mean());
    }

    #[test]
    fn anisotropic_voxel_sigmas() {
        let g = geom(4, [1.0, 1.0, 2.0]);
        assert_eq!(voxel_sigmas(&g, 2.0), [2.0, 2.0, 1.0]);
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let v = Volume::<f64>::zeros(geom(4, [1.0; 3]));
        assert!(gaussian_smooth(&v, 0.0).is_err());
        assert!(hessian_at_scale(&v, -1.0).is_err());
    }

    #[test]
    fn below_resolution_sigma_is_clamped() {
        let g = geom(4, [1.0; 3]);
        assert_eq!(effective_sigma(&g, 0.2).unwrap(), 0.5);
        assert_eq!(effective_sigma(&g, 1.5).unwrap(), 1.5);
    }

    #[test]
    fn quadratic_field_hxx() {
        let n = 41;
        let g = geom(n, [1.0; 3]);
        let c = (n / 2) as f64;
        let v = Volume::<f64>::from_fn(g, |x, _, _| (x as f64 - c).powi(2));
        let sigma = 2.0;
        let h = hessian_at_scale(&v, sigma).unwrap();
        let m = h.get(n / 2, n / 2, n / 2);
        let expect = 2.0 * sigma * sigma;
        assert!((m.xx - expect).abs() <= 1e-3 * expect, "{}", m.xx);
        for off in [m.yy, m.zz, m.xy, m.xz, m.yz] {
            assert!(off.abs() <= 1e-3 * expect);
        }
    }

    #[test]
    fn bilinear_field_hxy() {
        let n = 41;
        let g = geom(n, [1.0; 3]);
        let c = (n / 2) as f64;
        let v = Volume::<f64>::from_fn(g, |x, y, _| (x as f64 - c) * (y as f64 - c));
        let sigma = 1.5;
        let h = hessian_at_scale(&v, sigma).unwrap();
        let m = h.get(n / 2, n / 2, n / 2);
        let expect = sigma * sigma;
        assert!((m.xy - expect).abs() <= 1e-3 * expect, "{}", m.xy);
        for diag in [m.xx, m.yy, m.zz, m.xz, m.yz] {
            assert!(diag.abs() <= 1e-3 * expect);
        }
    }

    #[test]
    fn anisotropic_quadratic_in_physical_units() {
        let g = Geometry::new([21, 21, 31], [1.0, 1.0, 0.5], [0.0; 3]).unwrap();
        // f = z_mm^2
        let v = Volume::<f64>::from_fn(g, |_, _, z| (z as f64 * 0.5 - 7.5).powi(2));
        let h = hessian_at_scale(&v, 1.0).unwrap();
        let m = h.get(10, 10, 15);
        assert!((m.zz - 2.0).abs() < 1e-3, "{}", m.zz);
    }

    #[test]
    fn constant_field_zero_tensor() {
        let v = Volume::<f32>::filled(geom(8, [1.0; 3]), 7.0);
        let h = hessian_at_scale(&v, 1.0).unwrap();
        assert!(h.data().iter().all(|m| m.norm() < 1e-4));
    }

    #[test]
    fn mixed_derivative_order_independent() {
        let g = geom(12, [1.0, 0.7, 1.3]);
        let v = Volume::<f64>::from_fn(g, |x, y, z| ((x * 31 + y * 17 + z * 7) % 11) as f64 * 0.37);
        let h = hessian_of(&v, 1.0);
        let d = v.data();
        let (nx, ny) = (12usize, 12usize);
        for z in 1..11 {
            for y in 1..11 {
                for x in 1..11 {
                    let at = |x: usize, y: usize| d[x + nx * (y + ny * z)];
                    // d/dy of d/dx, evaluated the other way round.
                    let dx_at = |yy: usize| (at(x + 1, yy) - at(x - 1, yy)) / (2.0 * 1.0);
                    let yx = (dx_at(y + 1) - dx_at(y - 1)) / (2.0 * 0.7);
                    assert!((h[g.index(x, y, z)].xy - yx).abs() <= 1e-10);
                }
            }
        }
    }
}
