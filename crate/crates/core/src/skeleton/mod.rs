//! Distance transform, skeletonization and the vascular graph.

pub mod distance;
pub mod graph;
pub mod thinning;

pub use distance::{distance_transform, DistanceField};
pub use graph::{adjacency_matrix, build_graph, AdjacencyMatrix, Branch, GraphExport, Junction, VesselGraph};
pub use thinning::{is_simple, skeletonize, skeletonize_with};
