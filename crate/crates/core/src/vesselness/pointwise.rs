//! Per-voxel Hessian vesselness measures.
//!
//! All measures assume bright vessels on a dark background; the caller inverts
//! the volume for the opposite polarity. Eigenvalues are ordered by magnitude
//! (`|l1| <= |l2| <= |l3|`), so for a bright tube `l1 ~ 0` runs along the axis
//! and `l2, l3 < 0` describe the cross-section.

use crate::eigen::EigenTriple;
use crate::Real;

/// Volume-wide quantities some measures need at a given scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleContext<T> {
    /// Frangi structureness threshold `c`.
    pub frangi_c: T,
    /// Jerman/Zhang lower bound for the regularized `l3`: `tau * max |l3|`.
    pub lambda_rho_floor: T,
    /// Most negative modified eigenvalue over the volume (Meijering).
    pub meijering_min: T,
}

/// Frangi vesselness.
///
/// `V = (1 - exp(-Ra^2 / 2a^2)) exp(-Rb^2 / 2b^2) (1 - exp(-S^2 / 2c^2))` with
/// `Ra = |l2|/|l3|`, `Rb = |l1| / sqrt(|l2 l3|)` and `S` the Frobenius norm.
pub fn frangi<T: Real>(e: &EigenTriple<T>, alpha: T, beta: T, c: T) -> T {
    let zero = T::zero();
    if e.l2 >= zero || e.l3 >= zero {
        return zero;
    }
    let (a1, a2, a3) = (e.l1.abs(), e.l2.abs(), e.l3.abs());
    let two = T::lit(2.0);
    let ra = a2 / a3;
    let rb = a1 / (a2 * a3).sqrt();
    let s2 = e.l1 * e.l1 + e.l2 * e.l2 + e.l3 * e.l3;
    let plate = T::one() - (-(ra * ra) / (two * alpha * alpha)).exp();
    let blob = (-(rb * rb) / (two * beta * beta)).exp();
    let structure = if c > zero { T::one() - (-s2 / (two * c * c)).exp() } else { zero };
    let v = plate * blob * structure;
    if v.is_finite() {
        v.max(zero).min(T::one())
    } else {
        zero
    }
}

/// Sato line measure with the asymmetric `l1` penalty.
///
/// With `lc = |l2|`: `lc exp(-l1^2 / 2(a1 lc)^2)` for `l1 <= 0`,
/// `lc exp(-l1^2 / 2(a2 lc)^2)` for `0 < l1 < lc / a2`, zero otherwise.
pub fn sato<T: Real>(e: &EigenTriple<T>, alpha1: T, alpha2: T) -> T {
    let zero = T::zero();
    if e.l2 >= zero || e.l3 >= zero {
        return zero;
    }
    let lc = e.l2.abs().min(e.l3.abs());
    let two = T::lit(2.0);
    let l1 = e.l1;
    if l1 <= zero {
        let d = alpha1 * lc;
        lc * (-(l1 * l1) / (two * d * d)).exp()
    } else if l1 < lc / alpha2 {
        let d = alpha2 * lc;
        lc * (-(l1 * l1) / (two * d * d)).exp()
    } else {
        zero
    }
}

/// Regularized cross-sectional eigenvalue magnitude, `max(-l3, floor)`.
#[inline]
pub fn lambda_rho<T: Real>(e: &EigenTriple<T>, floor: T) -> T {
    let l3 = -e.l3;
    if l3 <= T::zero() {
        T::zero()
    } else {
        l3.max(floor)
    }
}

/// Jerman's ratio measure on magnitudes `m2 = -l2` and `rho`.
#[inline]
fn jerman_core<T: Real>(m2: T, rho: T) -> T {
    let zero = T::zero();
    if m2 <= zero || rho <= zero {
        return zero;
    }
    if m2 >= rho / T::lit(2.0) {
        return T::one();
    }
    let k = T::lit(3.0) / (m2 + rho);
    (m2 * m2 * (rho - m2) * k * k * k).max(zero).min(T::one())
}

/// Jerman vesselness.
///
/// `V = m2^2 (rho - m2) (3 / (m2 + rho))^3` with `m2 = -l2` and `rho` the
/// regularized `-l3`, saturating to 1 once `m2 >= rho / 2`.
pub fn jerman<T: Real>(e: &EigenTriple<T>, floor: T) -> T {
    if e.l2 >= T::zero() || e.l3 >= T::zero() {
        return T::zero();
    }
    jerman_core(-e.l2, lambda_rho(e, floor))
}

/// Zhang vesselness: the Jerman ratio damped by axial isotropy.
///
/// `V = J(m2, rho) * (1 - |l1| / |l2|)`. The second factor vanishes for blobs
/// (`|l1| = |l2|`) and is 1 for ideal tubes (`l1 = 0`).
pub fn zhang<T: Real>(e: &EigenTriple<T>, floor: T) -> T {
    let zero = T::zero();
    if e.l2 >= zero || e.l3 >= zero {
        return zero;
    }
    let anisotropy = T::one() - e.l1.abs() / e.l2.abs();
    (jerman_core(-e.l2, lambda_rho(e, floor)) * anisotropy).max(zero).min(T::one())
}

/// Smallest modified eigenvalue `l'_i = l_i + alpha * sum_{j != i} l_j`.
pub fn meijering_modified_min<T: Real>(e: &EigenTriple<T>, alpha: T) -> T {
    let s = e.sum();
    let m = |l: T| l + alpha * (s - l);
    m(e.l1).min(m(e.l2)).min(m(e.l3))
}

/// Meijering neuriteness, `l'_min / l'_min(global)` where `l'_min < 0`.
///
/// Gated on `l2, l3 < 0` like the other measures: with `alpha = -1/3` the
/// modified eigenvalues go negative on purely convex voxels too.
pub fn meijering<T: Real>(e: &EigenTriple<T>, alpha: T, global_min: T) -> T {
    let zero = T::zero();
    if e.l2 >= zero || e.l3 >= zero {
        return zero;
    }
    let m = meijering_modified_min(e, alpha);
    if m < zero && global_min < zero {
        (m / global_min).min(T::one())
    } else {
        zero
    }
}
