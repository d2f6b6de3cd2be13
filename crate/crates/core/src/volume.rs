//! Volume carriers: scalar fields, binary masks and multi-channel stacks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Grid shape and placement shared by every volume kind.
///
/// Spacing and origin are in millimetres. The x axis varies fastest in memory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let g = Geometry { dims, spacing, origin };
        g.validate()?;
        Ok(g)
    }

    /// Unit spacing, zero origin.
    pub fn with_dims(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3], [0.0; 3])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidGeometry(format!("dims {:?} must all be >= 1", self.dims)));
        }
        if self.spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "spacing {:?} must be finite and > 0",
                self.spacing
            )));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGeometry(format!("origin {:?} must be finite", self.origin)));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Index of `(x, y, z)` shifted by `offset`, or `None` when it leaves the grid.
    #[inline]
    pub fn offset_index(&self, c: [usize; 3], offset: [isize; 3]) -> Option<usize> {
        let x = c[0] as isize + offset[0];
        let y = c[1] as isize + offset[1];
        let z = c[2] as isize + offset[2];
        if x < 0
            || y < 0
            || z < 0
            || x >= self.dims[0] as isize
            || y >= self.dims[1] as isize
            || z >= self.dims[2] as isize
        {
            None
        } else {
            Some(self.index(x as usize, y as usize, z as usize))
        }
    }

    /// World position (mm) of a voxel center.
    pub fn position_mm(&self, c: [usize; 3]) -> [f64; 3] {
        [
            self.origin[0] + c[0] as f64 * self.spacing[0],
            self.origin[1] + c[1] as f64 * self.spacing[1],
            self.origin[2] + c[2] as f64 * self.spacing[2],
        ]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_isotropic(&self) -> bool {
        let s = self.spacing[0];
        self.spacing.iter().all(|&v| (v - s).abs() <= 1e-6 * s)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Same grid within 1e-6 mm on spacing and origin.
    pub fn matches(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self.spacing.iter().zip(&other.spacing).all(|(a, b)| (a - b).abs() <= 1e-6)
            && self.origin.iter().zip(&other.origin).all(|(a, b)| (a - b).abs() <= 1e-6)
    }

    pub fn ensure_matches(&self, other: &Geometry, what: &str) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: {:?}/{:?} vs {:?}/{:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

/// Scalar 3D field with physical voxel spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    geom: Geometry,
    data: Vec<T>,
}

impl<T: Real> Volume<T> {
    /// Builds a volume, rejecting wrong lengths and non-finite intensities.
    pub fn new(geom: Geometry, data: Vec<T>) -> Result<Self> {
        geom.validate()?;
        if data.len() != geom.len() {
            return Err(Error::InvalidGeometry(format!(
                "data length {} does not match dims {:?}",
                data.len(),
                geom.dims
            )));
        }
        let bad = data.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            return Err(Error::NonFinite { count: bad });
        }
        Ok(Volume { geom, data })
    }

    pub(crate) fn from_parts_unchecked(geom: Geometry, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), geom.len());
        Volume { geom, data }
    }

    pub fn filled(geom: Geometry, value: T) -> Self {
        Volume { data: vec![value; geom.len()], geom }
    }

    pub fn zeros(geom: Geometry) -> Self {
        Self::filled(geom, T::zero())
    }

    /// Evaluates `f(x, y, z)` at every voxel.
    pub fn from_fn(geom: Geometry, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(geom.len());
        for z in 0..geom.dims[2] {
            for y in 0..geom.dims[1] {
                for x in 0..geom.dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Volume { geom, data }
    }

    #[inline]
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    #[inline]
    pub fn spacing(&self) -> [f64; 3] {
        self.geom.spacing
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.geom.index(x, y, z)]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Volume<U> {
        Volume { geom: self.geom, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Real>(&self) -> Volume<U> {
        self.map(|v| U::from_f64(v.as_f64()).unwrap_or_else(U::zero))
    }

    pub fn with_geometry(mut self, geom: Geometry) -> Result<Self> {
        geom.validate()?;
        if geom.len() != self.data.len() {
            return Err(Error::InvalidGeometry("new geometry has a different voxel count".into()));
        }
        self.geom = geom;
        Ok(self)
    }

    /// `(min, max)` over all voxels.
    pub fn min_max(&self) -> (T, T) {
        self.data.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }

    /// Mean intensity, accumulated in `f64`.
    pub fn mean(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64()).sum::<f64>() / self.data.len() as f64
    }
}

/// Binary volume; every value is exactly 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryMask {
    geom: Geometry,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(geom: Geometry, data: Vec<u8>) -> Result<Self> {
        geom.validate()?;
        if data.len() != geom.len() {
            return Err(Error::InvalidGeometry(format!(
                "mask length {} does not match dims {:?}",
                data.len(),
                geom.dims
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidParameter(format!("mask value {v} is not binary")));
        }
        Ok(BinaryMask { geom, data })
    }

    pub fn empty(geom: Geometry) -> Self {
        BinaryMask { data: vec![0; geom.len()], geom }
    }

    pub fn from_fn(geom: Geometry, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(geom.len());
        for z in 0..geom.dims[2] {
            for y in 0..geom.dims[1] {
                for x in 0..geom.dims[0] {
                    data.push(f(x, y, z) as u8);
                }
            }
        }
        BinaryMask { geom, data }
    }

    /// Builds a mask from a set of voxel indices.
    pub fn from_indices(geom: Geometry, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::empty(geom);
        for i in indices {
            m.data[i] = 1;
        }
        m
    }

    /// Foreground wherever `v > threshold`.
    pub fn threshold<T: Real>(vol: &Volume<T>, threshold: T) -> Self {
        BinaryMask {
            geom: *vol.geometry(),
            data: vol.data().iter().map(|&v| (v > threshold) as u8).collect(),
        }
    }

    #[inline]
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.geom.dims
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn is_set(&self, idx: usize) -> bool {
        self.data[idx] != 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.geom.index(x, y, z)] != 0
    }

    #[inline]
    pub fn set(&mut self, idx: usize, value: bool) {
        self.data[idx] = value as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Indices of foreground voxels in increasing order.
    pub fn foreground(&self) -> impl Iterator<Item = usize> + '_ {
        self.data.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i)
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &BinaryMask) -> BinaryMask {
        self.zip_with(other, |a, b| a | b)
    }

    /// `self AND NOT other`.
    pub fn minus(&self, other: &BinaryMask) -> BinaryMask {
        self.zip_with(other, |a, b| a & (1 - b))
    }

    pub fn not(&self) -> BinaryMask {
        BinaryMask { geom: self.geom, data: self.data.iter().map(|&v| 1 - v).collect() }
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(u8, u8) -> u8) -> BinaryMask {
        debug_assert_eq!(self.geom.dims, other.geom.dims);
        BinaryMask {
            geom: self.geom,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> usize {
        self.data.iter().zip(&other.data).filter(|(&a, &b)| a != 0 && b != 0).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }

    pub fn to_volume<T: Real>(&self) -> Volume<T> {
        Volume::from_parts_unchecked(
            self.geom,
            self.data.iter().map(|&v| if v != 0 { T::one() } else { T::zero() }).collect(),
        )
    }
}

/// How channel 0 of a hyper-volume was standardized, so evaluation can invert it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    /// Region the statistics were computed over.
    pub region: String,
    pub mean: f64,
    pub std: f64,
}

/// Ordered stack of co-registered channels.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperVolume<T> {
    channels: Vec<Volume<T>>,
    names: Vec<String>,
    pub standardization: Option<Standardization>,
}

impl<T: Real> HyperVolume<T> {
    pub fn new(channels: Vec<Volume<T>>, names: Vec<String>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Empty("hyper-volume needs at least one channel".into()));
        }
        if channels.len() != names.len() {
            return Err(Error::InvalidParameter(format!(
                "{} channels but {} names",
                channels.len(),
                names.len()
            )));
        }
        let g0 = *channels[0].geometry();
        for (c, name) in channels.iter().zip(&names).skip(1) {
            g0.ensure_matches(c.geometry(), &format!("channel {name}"))?;
        }
        Ok(HyperVolume { channels, names, standardization: None })
    }

    /// One-channel stack.
    pub fn from_volume(vol: Volume<T>, name: impl Into<String>) -> Self {
        HyperVolume { channels: vec![vol], names: vec![name.into()], standardization: None }
    }

    pub fn geometry(&self) -> &Geometry {
        self.channels[0].geometry()
    }

    pub fn channels(&self) -> &[Volume<T>] {
        &self.channels
    }

    pub fn channel_names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, name: &str) -> Option<&Volume<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.channels[i])
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn into_channels(self) -> Vec<Volume<T>> {
        self.channels
    }
}
