//! Topology-preserving 3D thinning.
//!
//! Foreground uses 26-connectivity and background 6-connectivity. Each pass
//! visits the six border directions in turn; within a direction, border voxels
//! are removed one at a time in order of increasing distance-transform value,
//! re-checking simplicity against the current image, so every deletion keeps
//! the topology. Curve ends stay: voxels with a single 26-neighbour, or with
//! two mutually adjacent ones.

use crate::error::{Error, Result};
use crate::skeleton::distance::{distance_transform, DistanceField};
use crate::volume::{BinaryMask, Geometry};

const DIRECTIONS: [[isize; 3]; 6] = [[0, 0, -1], [0, 0, 1], [0, -1, 0], [0, 1, 0], [-1, 0, 0], [1, 0, 0]];

/// 3x3x3 neighbourhood as 27 flags, index `dx+1 + 3(dy+1) + 9(dz+1)`.
pub(crate) fn neighbourhood(mask: &[u8], geom: &Geometry, c: [usize; 3]) -> [bool; 27] {
    let mut n = [false; 27];
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if let Some(q) = geom.offset_index(c, [dx, dy, dz]) {
                    n[(dx + 1 + 3 * (dy + 1) + 9 * (dz + 1)) as usize] = mask[q] == 1;
                }
            }
        }
    }
    n
}

fn cube_coords(i: usize) -> [isize; 3] {
    [(i % 3) as isize - 1, ((i / 3) % 3) as isize - 1, (i / 9) as isize - 1]
}

/// Number of 26-components of foreground in the punctured neighbourhood.
fn foreground_components(n: &[bool; 27]) -> usize {
    let mut seen = [false; 27];
    let mut count = 0;
    for start in 0..27 {
        if start == 13 || !n[start] || seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let a = cube_coords(i);
            for j in 0..27 {
                if j == 13 || !n[j] || seen[j] {
                    continue;
                }
                let b = cube_coords(j);
                if (a[0] - b[0]).abs() <= 1 && (a[1] - b[1]).abs() <= 1 && (a[2] - b[2]).abs() <= 1 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// Number of 6-components of background in the 18-neighbourhood that touch a
/// face neighbour of the center.
fn background_components(n: &[bool; 27]) -> usize {
    let in18 = |i: usize| {
        let c = cube_coords(i);
        i != 13 && c.iter().filter(|v| **v != 0).count() <= 2
    };
    let face = |i: usize| cube_coords(i).iter().filter(|v| **v != 0).count() == 1;
    let mut seen = [false; 27];
    let mut count = 0;
    for start in 0..27 {
        if !face(start) || n[start] || seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let a = cube_coords(i);
            for j in 0..27 {
                if !in18(j) || n[j] || seen[j] {
                    continue;
                }
                let b = cube_coords(j);
                let d = (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs();
                if d == 1 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// Whether deleting the center voxel preserves (26, 6) topology.
pub fn is_simple(n: &[bool; 27]) -> bool {
    foreground_components(n) == 1 && background_components(n) == 1
}

/// Number of foreground 26-neighbours of the center.
pub(crate) fn neighbour_count(n: &[bool; 27]) -> usize {
    n.iter().enumerate().filter(|&(i, &b)| i != 13 && b).count()
}

/// Curve end: one neighbour, or two neighbours adjacent to each other (the
/// end of a two-voxel-wide strip).
fn is_end(n: &[bool; 27]) -> bool {
    let nb: Vec<[isize; 3]> = (0..27).filter(|&i| i != 13 && n[i]).map(cube_coords).collect();
    match nb.len() {
        1 => true,
        2 => (0..3).all(|a| (nb[0][a] - nb[1][a]).abs() <= 1),
        _ => false,
    }
}

/// Skeleton of `mask`; computes its own distance transform for ordering.
pub fn skeletonize(mask: &BinaryMask) -> Result<BinaryMask> {
    let dt = distance_transform(mask)?;
    skeletonize_with(mask, &dt)
}

/// Skeleton of `mask` using `dt` as the removal priority.
pub fn skeletonize_with(mask: &BinaryMask, dt: &DistanceField) -> Result<BinaryMask> {
    if mask.is_empty() {
        return Err(Error::Empty("skeleton of an empty mask".into()));
    }
    let geom = *mask.geometry();
    geom.ensure_matches(dt.geometry(), "distance field")?;
    let mut img = mask.data().to_vec();
    let mut live: Vec<usize> = mask.foreground().collect();
    loop {
        let mut removed = 0usize;
        for dir in DIRECTIONS {
            let mut border: Vec<usize> = live
                .iter()
                .copied()
                .filter(|&i| {
                    let c = geom.coords(i);
                    geom.offset_index(c, dir).map_or(true, |q| img[q] == 0)
                })
                .collect();
            border.sort_by(|&a, &b| dt.at(a).total_cmp(&dt.at(b)).then(a.cmp(&b)));
            for i in border {
                let n = neighbourhood(&img, &geom, geom.coords(i));
                if !is_end(&n) && is_simple(&n) {
                    img[i] = 0;
                    removed += 1;
                }
            }
            live.retain(|&i| img[i] == 1);
        }
        if removed == 0 {
            break;
        }
    }
    trim_strip_ends(&mut img, &geom, &mut live);
    prune_spurs(&mut img, &geom, dt, &mut live);
    BinaryMask::new(geom, img)
}

/// Reduces two-neighbour ends left by the strip rule to single-neighbour ends.
fn trim_strip_ends(img: &mut [u8], geom: &Geometry, live: &mut Vec<usize>) {
    loop {
        let mut removed = 0;
        for &i in live.iter() {
            let n = neighbourhood(img, geom, geom.coords(i));
            if neighbour_count(&n) == 2 && is_end(&n) && is_simple(&n) {
                img[i] = 0;
                removed += 1;
            }
        }
        live.retain(|&i| img[i] == 1);
        if removed == 0 {
            break;
        }
    }
}

fn neighbours_of(img: &[u8], geom: &Geometry, i: usize) -> Vec<usize> {
    let c = geom.coords(i);
    let mut out = Vec::with_capacity(26);
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if (dx, dy, dz) == (0, 0, 0) {
                    continue;
                }
                if let Some(q) = geom.offset_index(c, [dx, dy, dz]) {
                    if img[q] == 1 {
                        out.push(q);
                    }
                }
            }
        }
    }
    out
}

/// Removes terminal chains no longer than the inscribed radius of the voxel
/// they attach to, plus one voxel.
fn prune_spurs(img: &mut [u8], geom: &Geometry, dt: &DistanceField, live: &mut Vec<usize>) {
    let pitch = geom.spacing.iter().copied().fold(f64::INFINITY, f64::min);
    loop {
        let ends: Vec<usize> = live.iter().copied().filter(|&i| neighbours_of(img, geom, i).len() == 1).collect();
        let mut changed = false;
        for e in ends {
            if img[e] == 0 {
                continue;
            }
            let mut chain = vec![e];
            let mut prev = usize::MAX;
            let mut cur = e;
            let attach = loop {
                let nb: Vec<usize> = neighbours_of(img, geom, cur).into_iter().filter(|&q| q != prev).collect();
                if nb.len() != 1 {
                    break None;
                }
                let next = nb[0];
                if neighbours_of(img, geom, next).len() >= 3 {
                    break Some(next);
                }
                chain.push(next);
                prev = cur;
                cur = next;
            };
            let Some(j) = attach else { continue };
            let limit = (dt.at(j) / pitch).ceil() as usize + 1;
            if chain.len() <= limit {
                chain.iter().for_each(|&q| img[q] = 0);
                changed = true;
            }
        }
        live.retain(|&i| img[i] == 1);
        if !changed {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_from(bits: &[usize]) -> [bool; 27] {
        let mut n = [false; 27];
        for &b in bits {
            n[b] = true;
        }
        n
    }

    #[test]
    fn simple_point_cases() {
        // End of a line: one neighbour.
        assert!(is_simple(&cube_from(&[13, 14])));
        // Middle of a line: removing splits it.
        assert!(!is_simple(&cube_from(&[12, 13, 14])));
        // Isolated point.
        assert!(!is_simple(&cube_from(&[13])));
        // Interior point: removal creates a cavity.
        let full: Vec<usize> = (0..27).collect();
        assert!(!is_simple(&cube_from(&full)));
        // Flat face of a half-space.
        let half: Vec<usize> = (0..27).filter(|&i| i / 9 <= 1).collect();
        assert!(is_simple(&cube_from(&half)));
    }

    #[test]
    fn plate_center_is_not_simple() {
        // A full z=0 layer separates the background above from below.
        let ring: Vec<usize> = (9..18).collect();
        assert!(!is_simple(&cube_from(&ring)));
    }

    #[test]
    fn single_voxel_kept() {
        let g = Geometry::new([3; 3], [1.0; 3], [0.0; 3]).unwrap();
        let m = BinaryMask::from_fn(g, |x, y, z| (x, y, z) == (1, 1, 1));
        assert_eq!(skeletonize(&m).unwrap(), m);
    }

    #[test]
    fn solid_box_reduces_to_thin_set() {
        let g = Geometry::new([9, 9, 20], [1.0; 3], [0.0; 3]).unwrap();
        let m = BinaryMask::from_fn(g, |x, y, z| (2..7).contains(&x) && (2..7).contains(&y) && (2..18).contains(&z));
        let s = skeletonize(&m).unwrap();
        assert!(s.is_subset_of(&m));
        assert!(s.count() < 40 && s.count() > 5, "{}", s.count());
    }

    #[test]
    fn tube_thins_to_full_length_path() {
        let g = Geometry::new([20, 20, 30], [1.0; 3], [0.0; 3]).unwrap();
        let m = BinaryMask::from_fn(g, |x, y, z| {
            (x as f64 - 9.5).powi(2) + (y as f64 - 9.5).powi(2) <= 4.0 && (5..25).contains(&z)
        });
        let s = skeletonize(&m).unwrap();
        let mut ends = 0;
        for i in s.foreground() {
            let n = neighbour_count(&neighbourhood(s.data(), &g, g.coords(i)));
            assert!((1..=2).contains(&n), "branching skeleton");
            ends += usize::from(n == 1);
        }
        assert_eq!(ends, 2);
        let zs: Vec<usize> = s.foreground().map(|i| g.coords(i)[2]).collect();
        let span = zs.iter().max().unwrap() - zs.iter().min().unwrap() + 1;
        assert!(span + 4 >= 20, "span {span}");
    }

    #[test]
    fn empty_rejected() {
        let g = Geometry::new([3; 3], [1.0; 3], [0.0; 3]).unwrap();
        assert!(skeletonize(&BinaryMask::empty(g)).is_err());
    }
}
