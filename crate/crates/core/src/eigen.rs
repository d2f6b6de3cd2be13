//! Closed-form eigenvalues of symmetric 3x3 matrices.
//!
//! The trigonometric solution of the characteristic cubic is used in the hot
//! loop. When the matrix sits at an umbilic point (two or three eigenvalues
//! coinciding within round-off) the `acos` argument saturates and cyclic Jacobi
//! rotations take over.

use crate::Real;

/// Symmetric 3x3 matrix stored as its six unique components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymMat3<T> {
    pub xx: T,
    pub yy: T,
    pub zz: T,
    pub xy: T,
    pub xz: T,
    pub yz: T,
}

impl<T: Real> SymMat3<T> {
    pub fn new(xx: T, yy: T, zz: T, xy: T, xz: T, yz: T) -> Self {
        SymMat3 { xx, yy, zz, xy, xz, yz }
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let z = T::zero();
        SymMat3::new(a, b, c, z, z, z)
    }

    pub fn trace(&self) -> T {
        self.xx + self.yy + self.zz
    }

    pub fn det(&self) -> T {
        self.xx * (self.yy * self.zz - self.yz * self.yz)
            - self.xy * (self.xy * self.zz - self.yz * self.xz)
            + self.xz * (self.xy * self.yz - self.yy * self.xz)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        let off = self.xy * self.xy + self.xz * self.xz + self.yz * self.yz;
        (self.xx * self.xx + self.yy * self.yy + self.zz * self.zz + off + off).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        SymMat3::new(self.xx * s, self.yy * s, self.zz * s, self.xy * s, self.xz * s, self.yz * s)
    }

    pub fn is_finite(&self) -> bool {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz].iter().all(|v| v.is_finite())
    }

    fn to_array(self) -> [[T; 3]; 3] {
        [[self.xx, self.xy, self.xz], [self.xy, self.yy, self.yz], [self.xz, self.yz, self.zz]]
    }
}

/// Eigenvalues ordered by increasing magnitude, `|l1| <= |l2| <= |l3|`.
///
/// Equal magnitudes are ordered by signed value, so `(2, -2)` becomes `(-2, 2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EigenTriple<T> {
    pub l1: T,
    pub l2: T,
    pub l3: T,
}

impl<T: Real> EigenTriple<T> {
    /// Orders three eigenvalues by magnitude.
    pub fn from_unordered(mut v: [T; 3]) -> Self {
        v.sort_by(|a, b| {
            a.abs()
                .partial_cmp(&b.abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
        });
        EigenTriple { l1: v[0], l2: v[1], l3: v[2] }
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.l1, self.l2, self.l3]
    }

    pub fn sum(&self) -> T {
        self.l1 + self.l2 + self.l3
    }

    /// sqrt(l1^2 + l2^2 + l3^2), the Frobenius norm of the source matrix.
    pub fn norm(&self) -> T {
        (self.l1 * self.l1 + self.l2 * self.l2 + self.l3 * self.l3).sqrt()
    }
}

fn degeneracy_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(8.0))
}

/// Eigenvalues of a symmetric 3x3 matrix, sorted by magnitude.
pub fn eig_sym3<T: Real>(m: &SymMat3<T>) -> EigenTriple<T> {
    let off = m.xy * m.xy + m.xz * m.xz + m.yz * m.yz;
    if off == T::zero() {
        return EigenTriple::from_unordered([m.xx, m.yy, m.zz]);
    }
    let three = T::lit(3.0);
    let q = m.trace() / three;
    let (dx, dy, dz) = (m.xx - q, m.yy - q, m.zz - q);
    let p2 = dx * dx + dy * dy + dz * dz + (off + off);
    let p = (p2 / T::lit(6.0)).sqrt();
    if !(p > T::zero()) {
        return EigenTriple::from_unordered([q, q, q]);
    }
    let inv = p.recip();
    let b = SymMat3::new(dx * inv, dy * inv, dz * inv, m.xy * inv, m.xz * inv, m.yz * inv);
    let r = b.det() / T::lit(2.0);
    if T::one() - r.abs() < degeneracy_tol() {
        return EigenTriple::from_unordered(jacobi_eigenvalues(m));
    }
    let phi = r.max(-T::one()).min(T::one()).acos() / three;
    let two_p = p + p;
    let third = T::lit(2.0) * T::PI() / three;
    let e1 = q + two_p * phi.cos();
    let e3 = q + two_p * (phi + third).cos();
    let e2 = q + q + q - e1 - e3;
    EigenTriple::from_unordered([e1, e2, e3])
}

/// Cyclic Jacobi sweeps; robust for repeated eigenvalues.
pub fn jacobi_eigenvalues<T: Real>(m: &SymMat3<T>) -> [T; 3] {
    let mut a = m.to_array();
    let scale = m.norm();
    if scale == T::zero() {
        return [T::zero(); 3];
    }
    let tol = T::epsilon() * scale * T::lit(0.5);
    for _sweep in 0..64 {
        let off = (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]).sqrt();
        if off <= tol {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q] == T::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = (t * t + T::one()).sqrt().recip();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    [a[0][0], a[1][1], a[2][2]]
}
