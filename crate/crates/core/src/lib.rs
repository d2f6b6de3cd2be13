//! Vessel-enhancement fusion and topology-aware evaluation for 3D angiography.
//!
//! The crate covers two halves of a vessel segmentation study:
//!
//! * **Input preparation**: isotropic cubic B-spline resampling, a bank of six
//!   vesselness filters (Frangi, Jerman, Sato, Zhang, Meijering, RORPO) and the
//!   seven-channel hyper-volume that stacks their normalized responses on top of
//!   the original scan.
//! * **Evaluation**: distance transform, topology-preserving skeletonization, a
//!   vessel graph with per-branch sizes, size-partitioned region masks and the
//!   Dice / clDice / PSNR metrics computed on them.
//!
//! All numeric kernels are generic over [`Real`] (`f32` or `f64`). Volumes are
//! stored with the x axis varying fastest: voxel `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`, which is also the on-disk NIfTI order.

pub mod eigen;
pub mod error;
pub mod hypervolume;
pub mod io;
pub mod metrics;
pub mod partition;
pub mod phantom;
pub mod resample;
pub mod scale_space;
pub mod skeleton;
pub mod vesselness;
pub mod volume;

mod real;

pub use error::{Error, Result};
pub use real::Real;
pub use volume::{BinaryMask, Geometry, HyperVolume, Volume};

/// Double precision scalar volume, the default carrier for scans and responses.
pub type Volume3D = Volume<f64>;
/// Single precision scalar volume.
pub type Volume3F = Volume<f32>;
/// Double precision hyper-volume.
pub type HyperVolume3D = HyperVolume<f64>;
/// Single precision hyper-volume.
pub type HyperVolume3F = HyperVolume<f32>;
/// Double precision Hessian field.
pub type SymMat3Field3D = scale_space::SymMat3Field<f64>;
