//! Particle placement, orientation sampling and subcellular context.

mod blend;
mod context;
mod orientation;
mod placement;
mod quaternion;

pub use blend::{blend_placements, BlendError};
pub use context::{embed_context, labels_in, ContextMesh, ContextParams};
pub use orientation::{sample_orientation, sample_vmf, OrientationMode, DEFAULT_KAPPA, DEFAULT_THETA_MAX};
pub use placement::{
    collision_floor, find_collisions, grid_spacing, place_particles, ClassRule, Extents, PlacementError,
    PlacementRequest, PlacementStrategy, Placer, CLUSTER_PRIMARY_WEIGHT,
};
pub use quaternion::{euler_to_quaternion, Quaternion};

use serde::{Deserialize, Serialize};

use crate::formats::PickRecord;
use crate::geometry::{ScaleParams, TriangleMesh};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Experimental,
    Synthetic,
}

/// One particle instance in a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub structure_id: String,
    /// Center in Å.
    pub translation: Vec3,
    pub rotation: Quaternion,
    /// Bounding-sphere radius in Å.
    pub radius: f64,
    pub source: Source,
    pub confidence: f64,
    /// Name of the class rule that placed it.
    pub class: String,
}

/// A generated scene: particles, optional context meshes and the scale
/// regime they were placed under.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub extents: Extents,
    pub placements: Vec<Placement>,
    pub meshes: Vec<TriangleMesh>,
    pub scale: ScaleParams,
    pub seed: u64,
}

/// Serialized ground-truth annotation for a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub seed: u64,
    pub extents: Extents,
    pub scale: ScaleParams,
    pub placements: Vec<Placement>,
}

impl Scene {
    pub fn manifest(&self) -> SceneManifest {
        SceneManifest { seed: self.seed, extents: self.extents, scale: self.scale, placements: self.placements.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest()).expect("scene manifest serializes")
    }

    pub fn from_manifest(m: SceneManifest) -> Self {
        Self { extents: m.extents, placements: m.placements, meshes: Vec::new(), scale: m.scale, seed: m.seed }
    }
}

/// Size class of a particle diameter in Å.
pub fn size_scale(particle_size: f64) -> f64 {
    if particle_size < 10.0 {
        1.0
    } else if particle_size <= 50.0 {
        0.8
    } else if particle_size <= 200.0 {
        0.6
    } else if particle_size <= 1000.0 {
        0.4
    } else {
        0.2
    }
}

/// Crowding term `min(1, size^3 / (volume_size / 1000))`.
pub fn density_scale(particle_size: f64, volume_size: f64) -> f64 {
    (particle_size.powi(3) / (volume_size / 1000.0)).min(1.0)
}

/// Composite `s = 0.7 s_size + 0.3 s_density` and the derived knobs.
pub fn derive_scale_params(particle_size: f64, volume_size: f64) -> ScaleParams {
    ScaleParams::from_scale(composite_scale(size_scale(particle_size), density_scale(particle_size, volume_size)))
}

pub fn composite_scale(s_size: f64, s_density: f64) -> f64 {
    0.7 * s_size + 0.3 * s_density
}

/// Lifts 2D picks into the volume: `T = (x p, y p, z) + origin`.
pub fn import_experimental_poses(
    picks: &[PickRecord],
    structure_id: &str,
    radius: f64,
    pixel_size: f64,
    volume_origin: Vec3,
    default_z: f64,
) -> Vec<Placement> {
    picks
        .iter()
        .map(|p| Placement {
            structure_id: structure_id.to_string(),
            translation: Vec3::new(p.x * pixel_size, p.y * pixel_size, default_z) + volume_origin,
            rotation: p.euler.map_or(Quaternion::IDENTITY, |[a, b, c]| euler_to_quaternion(a, b, c)),
            radius,
            source: Source::Experimental,
            confidence: p.confidence,
            class: "experimental".into(),
        })
        .collect()
}
