//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use vesselfuse::{BinaryMask, Geometry};

pub fn iso(dims: [usize; 3], s: f64) -> Geometry {
    Geometry::new(dims, [s; 3], [0.0; 3]).unwrap()
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a] = b;
        }
    }
}

fn get(m: &BinaryMask, x: isize, y: isize, z: isize) -> bool {
    let [nx, ny, nz] = m.dims();
    x >= 0 && y >= 0 && z >= 0 && (x as usize) < nx && (y as usize) < ny && (z as usize) < nz && m.get(x as usize, y as usize, z as usize)
}

/// Number of connected components of voxels with value `fg`, using 26- or
/// 6-adjacency, over the volume padded by one background layer.
fn components(m: &BinaryMask, fg: bool, full: bool) -> usize {
    let [nx, ny, nz] = m.dims().map(|d| d as isize + 2);
    let idx = |x: isize, y: isize, z: isize| (x + nx * (y + ny * z)) as usize;
    let val = |x: isize, y: isize, z: isize| get(m, x - 1, y - 1, z - 1);
    let mut dsu = Dsu((0..(nx * ny * nz) as usize).collect());
    let mut members = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if val(x, y, z) != fg {
                    continue;
                }
                members.push(idx(x, y, z));
                for (dx, dy, dz) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                    let (a, b, c) = (x + dx, y + dy, z + dz);
                    if a < nx && b < ny && c < nz && val(a, b, c) == fg {
                        dsu.union(idx(x, y, z), idx(a, b, c));
                    }
                }
                if full {
                    for dz in -1..=1isize {
                        for dy in -1..=1isize {
                            for dx in -1..=1isize {
                                let (a, b, c) = (x + dx, y + dy, z + dz);
                                if (dx, dy, dz) != (0, 0, 0)
                                    && (0..nx).contains(&a)
                                    && (0..ny).contains(&b)
                                    && (0..nz).contains(&c)
                                    && val(a, b, c) == fg
                                {
                                    dsu.union(idx(x, y, z), idx(a, b, c));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let mut roots: Vec<usize> = members.iter().map(|&i| dsu.find(i)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

/// 26-connected foreground components.
pub fn beta0(m: &BinaryMask) -> usize {
    components(m, true, true)
}

/// Cavities: 6-connected background components other than the outside.
pub fn beta2(m: &BinaryMask) -> usize {
    components(m, false, false) - 1
}

/// Euler characteristic of the union of closed unit cubes at the foreground voxels.
pub fn euler(m: &BinaryMask) -> i64 {
    let [nx, ny, nz] = m.dims().map(|d| d as isize);
    // A k-cell of the lattice is present when any voxel sharing it is set. Cells
    // are indexed by doubled coordinates; odd components span a voxel.
    let mut chi = 0i64;
    for z in -1..=2 * nz {
        for y in -1..=2 * ny {
            for x in -1..=2 * nx {
                let c = [x, y, z];
                let dim = c.iter().filter(|v| *v % 2 != 0).count();
                // Voxels sharing the cell: odd coordinate -> fixed voxel, even -> two choices.
                let choices: Vec<Vec<isize>> = c
                    .iter()
                    .map(|&v| if v % 2 != 0 { vec![(v - 1) / 2] } else { vec![v / 2 - 1, v / 2] })
                    .collect();
                let mut present = false;
                for &a in &choices[0] {
                    for &b in &choices[1] {
                        for &d in &choices[2] {
                            present |= get(m, a, b, d);
                        }
                    }
                }
                if present {
                    chi += if dim % 2 == 0 { 1 } else { -1 };
                }
            }
        }
    }
    chi
}

/// `(β0, β1, β2)` of the foreground.
pub fn betti(m: &BinaryMask) -> (usize, i64, usize) {
    let (b0, b2) = (beta0(m), beta2(m));
    (b0, b0 as i64 + b2 as i64 - euler(m), b2)
}
