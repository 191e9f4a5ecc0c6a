//! Isosurfaces, mesh processing and sphere proximity queries.

mod edit;
mod marching;
mod mesh;
mod octree;
mod scale;
mod smooth;

pub use edit::{clean_mesh, decimate_mesh, decimation_factor, GeometryError, MAX_ASPECT_RATIO, MIN_ANGLE_DEG};
pub use marching::{cube_step, extract_isosurface};
pub use mesh::TriangleMesh;
pub use octree::{Octree, OctreeError, OctreeItem};
pub use scale::ScaleParams;
pub use smooth::{smooth_mesh, smoothing_iterations, RELAXATION};
