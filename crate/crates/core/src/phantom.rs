//! Synthetic vessel phantoms with exact ground truth.
//!
//! Phantoms are unions of straight segments of given radius, rasterized in
//! physical coordinates: a voxel belongs to the mask when at least half of it is
//! covered. Intensity is `contrast` inside and 0 outside, plus optional seeded
//! Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Geometry, Volume};
use crate::Real;

/// Straight vessel piece from `a` to `b` (mm).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub radius: f64,
    /// Hemispherical end caps (capsule) instead of flat ends (cylinder).
    pub capped: bool,
}

fn sub(p: [f64; 3], q: [f64; 3]) -> [f64; 3] {
    [p[0] - q[0], p[1] - q[1], p[2] - q[2]]
}

fn dot(p: [f64; 3], q: [f64; 3]) -> f64 {
    p[0] * q[0] + p[1] * q[1] + p[2] * q[2]
}

impl Segment {
    pub fn cylinder(a: [f64; 3], b: [f64; 3], radius: f64) -> Self {
        Segment { a, b, radius, capped: false }
    }

    pub fn capsule(a: [f64; 3], b: [f64; 3], radius: f64) -> Self {
        Segment { a, b, radius, capped: true }
    }

    pub fn length(&self) -> f64 {
        dot(sub(self.b, self.a), sub(self.b, self.a)).sqrt()
    }

    /// Distance from `p` to the axis and the axial parameter `t` (0 at `a`, 1 at `b`).
    pub fn axial(&self, p: [f64; 3]) -> (f64, f64) {
        let d = sub(self.b, self.a);
        let dd = dot(d, d);
        let t = if dd > 0.0 { dot(sub(p, self.a), d) / dd } else { 0.0 };
        let c = [self.a[0] + t * d[0], self.a[1] + t * d[1], self.a[2] + t * d[2]];
        let r = sub(p, c);
        (dot(r, r).sqrt(), t)
    }

    /// Signed distance to the surface in mm, negative inside.
    pub fn signed_distance(&self, p: [f64; 3]) -> f64 {
        let (dist, t) = self.axial(p);
        let len = self.length();
        if self.capped {
            let tc = t.clamp(0.0, 1.0);
            let c = [
                self.a[0] + tc * (self.b[0] - self.a[0]),
                self.a[1] + tc * (self.b[1] - self.a[1]),
                self.a[2] + tc * (self.b[2] - self.a[2]),
            ];
            let r = sub(p, c);
            return dot(r, r).sqrt() - self.radius;
        }
        let radial = dist - self.radius;
        let axial = ((t - 0.5).abs() - 0.5) * len;
        if radial <= 0.0 && axial <= 0.0 {
            radial.max(axial)
        } else {
            (radial.max(0.0).powi(2) + axial.max(0.0).powi(2)).sqrt()
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.signed_distance(p) <= 0.0
    }
}

/// Analytic description written next to generated volumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomMeta {
    pub kind: String,
    pub geometry: Geometry,
    pub contrast: f64,
    pub noise_sigma: f64,
    pub seed: Option<u64>,
    /// Centerline segments with their radii, in mm.
    pub segments: Vec<Segment>,
    /// Junction points in mm.
    pub junctions: Vec<[f64; 3]>,
}

/// Intensity volume, exact mask and metadata.
#[derive(Clone, Debug)]
pub struct Phantom<T> {
    pub volume: Volume<T>,
    pub gt: BinaryMask,
    pub meta: PhantomMeta,
}

const SUBSAMPLES: usize = 4;

/// Mask of voxels at least half covered by the union of `segments`.
///
/// Coverage is estimated on a 4x4x4 sub-grid, only for voxels whose center
/// lies within half a voxel diagonal of the surface.
pub fn rasterize(geom: Geometry, segments: &[Segment]) -> BinaryMask {
    let sd = |p: [f64; 3]| segments.iter().map(|s| s.signed_distance(p)).fold(f64::INFINITY, f64::min);
    let h = geom.spacing;
    let half_diag = 0.5 * dot(h, h).sqrt();
    let n = SUBSAMPLES;
    let offs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64 - 0.5).collect();
    BinaryMask::from_fn(geom, |x, y, z| {
        let p = geom.position_mm([x, y, z]);
        let d = sd(p);
        if d <= -half_diag {
            return true;
        }
        if d >= half_diag {
            return false;
        }
        let mut inside = 0;
        for &oz in &offs {
            for &oy in &offs {
                for &ox in &offs {
                    if sd([p[0] + ox * h[0], p[1] + oy * h[1], p[2] + oz * h[2]]) <= 0.0 {
                        inside += 1;
                    }
                }
            }
        }
        2 * inside >= n * n * n
    })
}

fn check(geom: &Geometry, segments: &[Segment]) -> Result<()> {
    geom.validate()?;
    for s in segments {
        if !(s.radius.is_finite() && s.radius > 0.0) {
            return Err(Error::InvalidParameter(format!("segment radius must be > 0, got {}", s.radius)));
        }
    }
    Ok(())
}

/// Assembles a noiseless phantom from segments.
pub fn from_segments<T: Real>(
    kind: &str,
    geom: Geometry,
    segments: Vec<Segment>,
    junctions: Vec<[f64; 3]>,
    contrast: f64,
) -> Result<Phantom<T>> {
    check(&geom, &segments)?;
    let gt = rasterize(geom, &segments);
    if gt.is_empty() {
        return Err(Error::Empty(format!("{kind} phantom does not intersect the volume")));
    }
    let c = T::lit(contrast);
    let volume = Volume::from_parts_unchecked(geom, gt.data().iter().map(|&b| if b == 1 { c } else { T::zero() }).collect());
    let meta = PhantomMeta { kind: kind.into(), geometry: geom, contrast, noise_sigma: 0.0, seed: None, segments, junctions };
    Ok(Phantom { volume, gt, meta })
}

impl<T: Real> Phantom<T> {
    /// Adds i.i.d. Gaussian noise of standard deviation `sigma`, seeded.
    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {sigma}")));
        }
        if sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, sigma).expect("validated sigma");
            let data = self.volume.data().iter().map(|&v| v + T::lit(normal.sample(&mut rng))).collect();
            self.volume = Volume::from_parts_unchecked(*self.volume.geometry(), data);
        }
        self.meta.noise_sigma = sigma;
        self.meta.seed = Some(seed);
        Ok(self)
    }
}

/// Center of the volume in mm.
pub fn center_mm(geom: &Geometry) -> [f64; 3] {
    let mut c = [0.0; 3];
    for a in 0..3 {
        c[a] = geom.origin[a] + 0.5 * (geom.dims[a] - 1) as f64 * geom.spacing[a];
    }
    c
}

/// Flat-ended cylinder along z through the volume center, `margin` mm from both ends.
pub fn tube<T: Real>(geom: Geometry, radius: f64, margin: f64, contrast: f64) -> Result<Phantom<T>> {
    let c = center_mm(&geom);
    let z0 = geom.origin[2] + margin;
    let z1 = geom.origin[2] + (geom.dims[2] - 1) as f64 * geom.spacing[2] - margin;
    if z1 <= z0 {
        return Err(Error::InvalidParameter(format!("margin {margin} mm leaves no tube length")));
    }
    let seg = Segment::cylinder([c[0], c[1], z0], [c[0], c[1], z1], radius);
    from_segments("tube", geom, vec![seg], vec![], contrast)
}

/// Noisy tube with seeded Gaussian noise.
pub fn noisy_tube<T: Real>(geom: Geometry, radius: f64, margin: f64, contrast: f64, sigma: f64, seed: u64) -> Result<Phantom<T>> {
    let mut p = tube::<T>(geom, radius, margin, contrast)?.with_noise(sigma, seed)?;
    p.meta.kind = "noisy-tube".into();
    Ok(p)
}

/// Two parallel z-tubes of radii `r1` and `r2` placed side by side along x.
pub fn two_tubes<T: Real>(geom: Geometry, r1: f64, r2: f64, margin: f64, contrast: f64) -> Result<Phantom<T>> {
    let c = center_mm(&geom);
    let width = (geom.dims[0] - 1) as f64 * geom.spacing[0];
    let gap = (width - 2.0 * (r1 + r2)) / 3.0;
    if gap <= 0.0 {
        return Err(Error::InvalidParameter("volume too narrow for both tubes".into()));
    }
    let x1 = geom.origin[0] + gap + r1;
    let x2 = x1 + r1 + gap + r2;
    let z0 = geom.origin[2] + margin;
    let z1 = geom.origin[2] + (geom.dims[2] - 1) as f64 * geom.spacing[2] - margin;
    let segs = vec![
        Segment::cylinder([x1, c[1], z0], [x1, c[1], z1], r1),
        Segment::cylinder([x2, c[1], z0], [x2, c[1], z1], r2),
    ];
    from_segments("two-tubes", geom, segs, vec![], contrast)
}

/// Y-junction geometry in mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YParams {
    pub trunk_radius: f64,
    pub twig_radius: f64,
    /// Length of the trunk below the junction.
    pub trunk_length: f64,
    /// Length of each twig from the junction.
    pub twig_length: f64,
    /// Angle of each twig away from the trunk axis, degrees.
    pub half_angle_deg: f64,
}

impl Default for YParams {
    fn default() -> Self {
        YParams { trunk_radius: 4.0, twig_radius: 1.0, trunk_length: 30.0, twig_length: 28.0, half_angle_deg: 40.0 }
    }
}

/// Y phantom: a capsule trunk along z splitting into two capsule twigs in the xz-plane.
///
/// The junction sits at the volume center shifted down so the whole Y fits.
pub fn y_junction<T: Real>(geom: Geometry, y: YParams, contrast: f64) -> Result<Phantom<T>> {
    let c = center_mm(&geom);
    let ang = y.half_angle_deg.to_radians();
    let rise = y.twig_length * ang.cos();
    let j = [c[0], c[1], c[2] - 0.5 * (rise - y.trunk_length)];
    let base = [j[0], j[1], j[2] - y.trunk_length];
    let dx = y.twig_length * ang.sin();
    let left = [j[0] - dx, j[1], j[2] + rise];
    let right = [j[0] + dx, j[1], j[2] + rise];
    let segs = vec![
        Segment::capsule(base, j, y.trunk_radius),
        Segment::capsule(j, left, y.twig_radius),
        Segment::capsule(j, right, y.twig_radius),
    ];
    for s in &segs {
        for p in [s.a, s.b] {
            for a in 0..3 {
                let lo = geom.origin[a] + s.radius;
                let hi = geom.origin[a] + (geom.dims[a] - 1) as f64 * geom.spacing[a] - s.radius;
                if p[a] < lo || p[a] > hi {
                    return Err(Error::InvalidParameter(format!("Y phantom does not fit in {:?}", geom.dims)));
                }
            }
        }
    }
    from_segments("y", geom, segs, vec![j], contrast)
}

/// Solid ball of `radius` mm at the volume center.
pub fn blob<T: Real>(geom: Geometry, radius: f64, contrast: f64) -> Result<Phantom<T>> {
    let c = center_mm(&geom);
    from_segments("blob", geom, vec![Segment::capsule(c, c, radius)], vec![], contrast)
}

/// Slab of thickness `2 * half_thickness` mm normal to z through the volume center.
pub fn plate<T: Real>(geom: Geometry, half_thickness: f64, contrast: f64) -> Result<Phantom<T>> {
    geom.validate()?;
    let c = center_mm(&geom);
    let gt = BinaryMask::from_fn(geom, |x, y, z| (geom.position_mm([x, y, z])[2] - c[2]).abs() <= half_thickness);
    if gt.is_empty() {
        return Err(Error::Empty("plate does not intersect the volume".into()));
    }
    let k = T::lit(contrast);
    let volume = Volume::from_parts_unchecked(geom, gt.data().iter().map(|&b| if b == 1 { k } else { T::zero() }).collect());
    let meta = PhantomMeta {
        kind: "plate".into(),
        geometry: geom,
        contrast,
        noise_sigma: 0.0,
        seed: None,
        segments: vec![],
        junctions: vec![],
    };
    Ok(Phantom { volume, gt, meta })
}
