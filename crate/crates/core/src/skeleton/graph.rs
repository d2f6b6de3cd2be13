//! Vascular graph on a voxel skeleton.
//!
//! Skeleton voxels with three or more 26-neighbours are junction voxels;
//! mutually adjacent ones form a single junction cluster. The remaining voxels
//! split into 26-connected branches, labelled `1..=B` in order of their lowest
//! voxel index. A cluster touching three or more branches is a bifurcation.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::skeleton::distance::DistanceField;
use crate::volume::{BinaryMask, Geometry};

/// A labelled run of non-junction skeleton voxels.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub label: u32,
    /// Voxel indices, ascending.
    pub voxels: Vec<usize>,
    /// Largest vessel diameter along the branch, mm.
    pub size_mm: f64,
    /// Indices into [`VesselGraph::junctions`] this branch touches.
    pub junctions: Vec<usize>,
}

/// A merged cluster of adjacent junction voxels.
#[derive(Clone, Debug, PartialEq)]
pub struct Junction {
    /// Voxel indices, ascending.
    pub voxels: Vec<usize>,
    /// Cluster voxel with the largest distance value.
    pub center: usize,
    /// Distance value at `center`: the inscribed radius, mm.
    pub radius_mm: f64,
    /// Labels of the branches incident to the cluster.
    pub branches: Vec<u32>,
}

impl Junction {
    pub fn is_bifurcation(&self) -> bool {
        self.branches.len() >= 3
    }
}

#[derive(Clone, Debug)]
pub struct VesselGraph {
    geom: Geometry,
    /// Skeleton voxel indices, ascending.
    pub skeleton: Vec<usize>,
    /// 26-neighbour count per skeleton voxel (same order as `skeleton`).
    pub degree: Vec<u8>,
    /// Branch label per skeleton voxel; 0 for junction voxels.
    pub branch_label: Vec<u32>,
    pub branches: Vec<Branch>,
    pub junctions: Vec<Junction>,
    /// Skeleton voxels with at most one neighbour.
    pub endpoints: Vec<usize>,
    dist: Vec<f64>,
}

fn neighbours(geom: &Geometry, idx: usize, member: &HashMap<usize, usize>) -> Vec<usize> {
    let c = geom.coords(idx);
    let mut out = Vec::with_capacity(26);
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if (dx, dy, dz) == (0, 0, 0) {
                    continue;
                }
                if let Some(q) = geom.offset_index(c, [dx, dy, dz]) {
                    if let Some(&k) = member.get(&q) {
                        out.push(k);
                    }
                }
            }
        }
    }
    out
}

/// Connected components of `nodes` (positions into the skeleton list) under
/// `adj`, each sorted, ordered by their smallest member.
fn components(nodes: &[usize], adj: &[Vec<usize>], keep: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    let mut out = Vec::new();
    for &start in nodes {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if keep[j] && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn dist_mm(geom: &Geometry, a: usize, b: usize) -> f64 {
    let (p, q) = (geom.position_mm(geom.coords(a)), geom.position_mm(geom.coords(b)));
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// Builds the graph of `skeleton` with vessel sizes from `dist`.
///
/// A branch's size is twice the largest distance value over its voxels,
/// ignoring voxels inside the inscribed ball of an adjacent junction (they
/// measure the parent vessel). Branches lying entirely inside such balls fall
/// back to all their voxels.
pub fn build_graph(skeleton: &BinaryMask, dist: &DistanceField) -> Result<VesselGraph> {
    let geom = *skeleton.geometry();
    geom.ensure_matches(dist.geometry(), "distance field")?;
    let vox: Vec<usize> = skeleton.foreground().collect();
    let member: HashMap<usize, usize> = vox.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let adj: Vec<Vec<usize>> = vox.iter().map(|&v| neighbours(&geom, v, &member)).collect();
    let degree: Vec<u8> = adj.iter().map(|a| a.len() as u8).collect();
    let is_junction: Vec<bool> = degree.iter().map(|&d| d >= 3).collect();
    let not_junction: Vec<bool> = is_junction.iter().map(|j| !j).collect();

    let all: Vec<usize> = (0..vox.len()).collect();
    let jnodes: Vec<usize> = all.iter().copied().filter(|&k| is_junction[k]).collect();
    let bnodes: Vec<usize> = all.iter().copied().filter(|&k| !is_junction[k]).collect();
    let clusters = components(&jnodes, &adj, &is_junction);
    let runs = components(&bnodes, &adj, &not_junction);

    let mut cluster_of = vec![usize::MAX; vox.len()];
    for (c, members) in clusters.iter().enumerate() {
        for &k in members {
            cluster_of[k] = c;
        }
    }
    let mut branch_label = vec![0u32; vox.len()];
    for (b, members) in runs.iter().enumerate() {
        for &k in members {
            branch_label[k] = b as u32 + 1;
        }
    }

    let mut junctions: Vec<Junction> = clusters
        .iter()
        .map(|members| {
            let center = members
                .iter()
                .copied()
                .max_by(|&a, &b| dist.at(vox[a]).total_cmp(&dist.at(vox[b])).then(b.cmp(&a)))
                .expect("non-empty cluster");
            Junction {
                voxels: members.iter().map(|&k| vox[k]).collect(),
                center: vox[center],
                radius_mm: dist.at(vox[center]),
                branches: Vec::new(),
            }
        })
        .collect();

    let mut branches = Vec::with_capacity(runs.len());
    for (b, members) in runs.iter().enumerate() {
        let label = b as u32 + 1;
        let touching: BTreeSet<usize> = members
            .iter()
            .flat_map(|&k| adj[k].iter().filter(|&&j| is_junction[j]).map(|&j| cluster_of[j]))
            .collect();
        for &c in &touching {
            junctions[c].branches.push(label);
        }
        let outside: Vec<usize> = members
            .iter()
            .map(|&k| vox[k])
            .filter(|&v| touching.iter().all(|&c| dist_mm(&geom, v, junctions[c].center) > junctions[c].radius_mm))
            .collect();
        let measured: Vec<usize> = if outside.is_empty() { members.iter().map(|&k| vox[k]).collect() } else { outside };
        let size_mm = 2.0 * measured.iter().map(|&v| dist.at(v)).fold(0.0, f64::max);
        branches.push(Branch {
            label,
            voxels: members.iter().map(|&k| vox[k]).collect(),
            size_mm,
            junctions: touching.into_iter().collect(),
        });
    }

    let endpoints = vox.iter().zip(&degree).filter(|(_, &d)| d <= 1).map(|(&v, _)| v).collect();
    Ok(VesselGraph {
        geom,
        skeleton: vox,
        degree,
        branch_label,
        branches,
        junctions,
        endpoints,
        dist: dist.data().to_vec(),
    })
}

impl VesselGraph {
    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn bifurcations(&self) -> impl Iterator<Item = &Junction> + '_ {
        self.junctions.iter().filter(|j| j.is_bifurcation())
    }

    pub fn bifurcation_count(&self) -> usize {
        self.bifurcations().count()
    }

    pub fn branch(&self, label: u32) -> Option<&Branch> {
        label.checked_sub(1).and_then(|i| self.branches.get(i as usize))
    }

    /// Distance value at a voxel of the source mask, mm.
    pub fn distance_at(&self, idx: usize) -> f64 {
        self.dist[idx]
    }

    pub fn skeleton_mask(&self) -> BinaryMask {
        BinaryMask::from_indices(self.geom, self.skeleton.iter().copied())
    }

    /// Serializable view: nodes, branches and bifurcations.
    pub fn export(&self) -> GraphExport {
        let coords = |v: usize| self.geom.coords(v);
        let pos = |v: usize| self.geom.position_mm(self.geom.coords(v));
        GraphExport {
            schema_version: 1,
            geometry: self.geom,
            nodes: self
                .skeleton
                .iter()
                .zip(&self.degree)
                .map(|(&v, &d)| NodeExport { voxel: coords(v), position_mm: pos(v), degree: d as usize })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchExport {
                    label: b.label,
                    size_mm: b.size_mm,
                    voxels: b.voxels.iter().map(|&v| coords(v)).collect(),
                })
                .collect(),
            bifurcations: self
                .bifurcations()
                .map(|j| BifurcationExport {
                    voxel: coords(j.center),
                    position_mm: pos(j.center),
                    radius_mm: j.radius_mm,
                    cluster_size: j.voxels.len(),
                    branches: j.branches.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeExport {
    pub voxel: [usize; 3],
    pub position_mm: [f64; 3],
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchExport {
    pub label: u32,
    pub size_mm: f64,
    pub voxels: Vec<[usize; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationExport {
    pub voxel: [usize; 3],
    pub position_mm: [f64; 3],
    pub radius_mm: f64,
    pub cluster_size: usize,
    pub branches: Vec<u32>,
}

/// JSON form of a [`VesselGraph`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub schema_version: u32,
    pub geometry: Geometry,
    pub nodes: Vec<NodeExport>,
    pub branches: Vec<BranchExport>,
    pub bifurcations: Vec<BifurcationExport>,
}

/// Sparse symmetric adjacency over graph nodes, junction clusters collapsed.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    /// Voxels making up each node; singletons except for junction clusters.
    pub nodes: Vec<Vec<usize>>,
    /// Sorted neighbour node ids per node.
    pub rows: Vec<Vec<usize>>,
}

impl AdjacencyMatrix {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&j).is_ok()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    /// Number of true entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Node adjacency of `graph` with each junction cluster as one node.
pub fn adjacency_matrix(graph: &VesselGraph) -> AdjacencyMatrix {
    let mut node_of: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = graph.junctions.iter().map(|j| j.voxels.clone()).collect();
    for (v, &d) in graph.skeleton.iter().zip(&graph.degree) {
        if d < 3 {
            groups.push(vec![*v]);
        }
    }
    groups.sort_by_key(|g| g[0]);
    for (n, g) in groups.iter().enumerate() {
        for &v in g {
            node_of.insert(v, n);
        }
    }
    let geom = &graph.geom;
    let rows = groups
        .iter()
        .enumerate()
        .map(|(n, g)| {
            let set: BTreeSet<usize> = g
                .iter()
                .flat_map(|&v| neighbours(geom, v, &node_of))
                .filter(|&m| m != n)
                .collect();
            set.into_iter().collect()
        })
        .collect();
    AdjacencyMatrix { nodes: groups, rows }
}
