//! Ranking the orientation responses of path openings (RORPO).
//!
//! A path opening of length `L` keeps, at each voxel, the largest `t` such that
//! the voxel lies on a path of `L` voxels with intensity `>= t`, where each step
//! of the path is drawn from an orientation cone. It is computed exactly with
//! two dynamic programs: `F_k(p)`, the best path of `k` voxels ending at `p`,
//! and `B_k(p)`, the best one starting there. The opening is
//! `max_k min(F_k(p), B_{L+1-k}(p))`.

use rayon::prelude::*;

use super::{apply_polarity, FilterParams};
use crate::error::{Error, Result};
use crate::volume::Volume;
use crate::Real;

/// One of the seven path orientation cones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Orientation {
    pub name: &'static str,
    /// Allowed single-voxel steps along the path.
    pub steps: &'static [[isize; 3]],
}

/// Three axis cones and four body-diagonal cones.
pub const ORIENTATIONS: [Orientation; 7] = [
    Orientation { name: "x", steps: &[[1, 0, 0], [1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1]] },
    Orientation { name: "y", steps: &[[0, 1, 0], [1, 1, 0], [-1, 1, 0], [0, 1, 1], [0, 1, -1]] },
    Orientation { name: "z", steps: &[[0, 0, 1], [1, 0, 1], [-1, 0, 1], [0, 1, 1], [0, -1, 1]] },
    Orientation { name: "+x+y+z", steps: &[[1, 1, 1], [0, 1, 1], [1, 0, 1], [1, 1, 0]] },
    Orientation { name: "+x+y-z", steps: &[[1, 1, -1], [0, 1, -1], [1, 0, -1], [1, 1, 0]] },
    Orientation { name: "+x-y+z", steps: &[[1, -1, 1], [0, -1, 1], [1, 0, 1], [1, -1, 0]] },
    Orientation { name: "-x+y+z", steps: &[[-1, 1, 1], [0, 1, 1], [-1, 0, 1], [-1, 1, 0]] },
];

/// One DP layer: `out(p) = min(f(p), max over p + sign * step of prev)`.
fn layer<T: Real>(f: &[T], prev: &[T], dims: [usize; 3], steps: &[[isize; 3]], sign: isize) -> Vec<T> {
    let [nx, ny, nz] = dims;
    let mut out = vec![T::neg_infinity(); f.len()];
    out.par_chunks_mut(nx * ny).enumerate().for_each(|(z, slab)| {
        for y in 0..ny {
            for x in 0..nx {
                let mut best = T::neg_infinity();
                for s in steps {
                    let qx = x as isize + sign * s[0];
                    let qy = y as isize + sign * s[1];
                    let qz = z as isize + sign * s[2];
                    if qx < 0 || qy < 0 || qz < 0 || qx >= nx as isize || qy >= ny as isize || qz >= nz as isize {
                        continue;
                    }
                    best = best.max(prev[qx as usize + nx * (qy as usize + ny * qz as usize)]);
                }
                let i = x + nx * y;
                slab[i] = f[i + nx * ny * z].min(best);
            }
        }
    });
    out
}

/// Exact grayscale path opening of length `len` voxels.
///
/// Voxels that no path of `len` voxels passes through take the volume minimum.
pub fn path_opening<T: Real>(vol: &Volume<T>, orientation: &Orientation, len: usize) -> Volume<T> {
    let f = vol.data();
    let dims = vol.dims();
    let (lo, _) = vol.min_max();
    let len = len.max(1);
    let mut forward = Vec::with_capacity(len);
    forward.push(f.to_vec());
    for k in 1..len {
        let next = layer(f, &forward[k - 1], dims, orientation.steps, -1);
        forward.push(next);
    }
    let mut out: Vec<T> = forward[len - 1].clone();
    let mut backward = f.to_vec();
    for k in 1..len {
        backward = layer(f, &backward, dims, orientation.steps, 1);
        let fw = &forward[len - 1 - k];
        out.par_iter_mut()
            .zip(fw.par_iter().zip(backward.par_iter()))
            .for_each(|(o, (&a, &b))| *o = o.max(a.min(b)));
    }
    out.iter_mut().for_each(|v| {
        if *v == T::neg_infinity() {
            *v = lo;
        }
    });
    Volume::from_parts_unchecked(*vol.geometry(), out)
}

/// Grayscale dilation by a Euclidean ball of `radius` voxels.
pub fn dilate_ball<T: Real>(vol: &Volume<T>, radius: usize) -> Volume<T> {
    if radius == 0 {
        return vol.clone();
    }
    let r = radius as isize;
    let mut offsets = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy + dz * dz <= r * r {
                    offsets.push([dx, dy, dz]);
                }
            }
        }
    }
    let geom = *vol.geometry();
    let [nx, ny, _] = geom.dims;
    let f = vol.data();
    let mut out = vec![T::zero(); f.len()];
    out.par_chunks_mut(nx * ny).enumerate().for_each(|(z, slab)| {
        for y in 0..ny {
            for x in 0..nx {
                let mut best = T::neg_infinity();
                for &o in &offsets {
                    if let Some(q) = geom.offset_index([x, y, z], o) {
                        best = best.max(f[q]);
                    }
                }
                slab[x + nx * y] = best;
            }
        }
    });
    Volume::from_parts_unchecked(geom, out)
}

/// Top orientation response minus the 4th-ranked one, at a single length.
fn rank_difference<T: Real>(openings: &[Volume<T>]) -> Vec<T> {
    let n = openings[0].len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut v = [T::zero(); 7];
            for (slot, o) in v.iter_mut().zip(openings) {
                *slot = o.data()[i];
            }
            v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            (v[0] - v[3]).max(T::zero())
        })
        .collect()
}

/// RORPO response, combined over `p.rorpo_lengths` by maximum (unnormalized).
pub fn rorpo_response<T: Real>(vol: &Volume<T>, p: &FilterParams) -> Result<Volume<T>> {
    p.validate()?;
    let longest = *p.rorpo_lengths.last().expect("validated non-empty");
    let dims = vol.dims();
    if dims.iter().all(|&d| d < longest) {
        return Err(Error::TooSmall(format!("volume {dims:?} is shorter than path length {longest}")));
    }
    let f = apply_polarity(vol, p.polarity);
    let source = dilate_ball(&f, p.rorpo_dilation);
    let mut acc = vec![T::zero(); f.len()];
    for &len in &p.rorpo_lengths {
        let openings: Vec<Volume<T>> = ORIENTATIONS
            .par_iter()
            .map(|o| {
                let op = path_opening(&source, o, len);
                if p.rorpo_dilation == 0 {
                    op
                } else {
                    let d: Vec<T> = op.data().iter().zip(f.data()).map(|(&a, &b)| a.min(b)).collect();
                    Volume::from_parts_unchecked(*f.geometry(), d)
                }
            })
            .collect();
        let r = rank_difference(&openings);
        acc.par_iter_mut().zip(r.par_iter()).for_each(|(a, &r)| *a = a.max(r));
    }
    Ok(Volume::from_parts_unchecked(*f.geometry(), acc))
}
