//! Deterministic cryo-EM micrograph synthesis.
//!
//! The crate turns atomic coordinate models into annotated synthetic
//! micrographs and provides the metrics used to evaluate pickers and pose
//! estimators trained on them. The generation chain is
//!
//! 1. [`formats`]: coordinate files, pick tables, MRC containers, scene configs
//! 2. [`density`]: atomic model to voxel density, conformational variants
//! 3. [`geometry`]: isosurfaces, mesh processing, octree proximity queries
//! 4. [`scene`]: scale-adaptive placement and orientation sampling
//! 5. [`ice`]: vitreous ice slab with thickness topography and density noise
//! 6. [`imaging`]: potential assembly, projection, CTF, masks, baseline noise
//! 7. [`pipeline`]: end-to-end orchestration with a reproducibility manifest
//!
//! [`metrics`] is independent of the chain and implements FSC, pick
//! precision/recall, angular error and pose loss.
//!
//! Every stochastic step takes an explicit RNG; [`rng::stream`] derives
//! independent ChaCha streams from one root seed so results do not depend on
//! scheduling.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod filter;
pub mod formats;
pub mod geometry;
pub mod ice;
pub mod imaging;
pub mod metrics;
pub mod perlin;
pub mod pipeline;
pub mod rng;
pub mod scene;

pub use density::DensityVolume;
pub use geometry::{ScaleParams, TriangleMesh};
pub use imaging::{CtfParams, Micrograph};
pub use scene::{Placement, Quaternion, Scene};

/// 3-vector in Ångström unless stated otherwise.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 rotation matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
