//! Context meshes from segmented label volumes.

use std::collections::BTreeSet;

use rand::Rng;

use crate::density::{smooth_and_threshold, DensityVolume};
use crate::geometry::{extract_isosurface, smooth_mesh, ScaleParams, TriangleMesh};
use crate::perlin::Perlin;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextParams {
    /// Peak normal displacement in Å.
    pub perturb_amplitude: f64,
    /// Spatial period of the displacement noise in Å.
    pub perturb_wavelength: f64,
    pub scale: ScaleParams,
}

impl Default for ContextParams {
    fn default() -> Self {
        Self { perturb_amplitude: 2.0, perturb_wavelength: 50.0, scale: ScaleParams::default() }
    }
}

/// A context surface with the label it was extracted from.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextMesh {
    pub label: u32,
    pub mesh: TriangleMesh,
}

/// Distinct non-zero labels present in a volume, ascending.
pub fn labels_in(vol: &DensityVolume) -> Vec<u32> {
    let set: BTreeSet<u32> = vol.data.iter().map(|v| v.round().max(0.0) as u32).filter(|&l| l > 0).collect();
    set.into_iter().collect()
}

/// One perturbed surface per requested label, in the order given.
///
/// `labels` defaults to every label present. Each label is binarized,
/// smoothed with a one-voxel Gaussian, thresholded, extracted at 0.5 and
/// Laplacian-smoothed; vertices are then pushed along their normals by
/// Perlin noise scaled to `perturb_amplitude`.
pub fn embed_context<R: Rng + ?Sized>(
    labeled: &DensityVolume,
    labels: Option<&[u32]>,
    params: &ContextParams,
    rng: &mut R,
) -> Vec<ContextMesh> {
    let present = labels_in(labeled);
    let wanted: Vec<u32> = labels.map_or_else(|| present.clone(), <[u32]>::to_vec);
    let mut out = Vec::new();
    for label in wanted {
        // One noise table per label keeps meshes independent of label order.
        let perlin = Perlin::new(rng);
        if !present.contains(&label) {
            log::warn!("label {label} absent from context volume, skipped");
            continue;
        }
        let mut mask = labeled.clone();
        for v in mask.data.iter_mut() {
            *v = if v.round() as i64 == label as i64 { 1.0 } else { 0.0 };
        }
        // resolution = 2 voxels gives a smoothing sigma of one voxel
        let smoothed = smooth_and_threshold(&mask, 2.0 * labeled.voxel_size);
        let peak = smoothed.max();
        if !(peak > 0.5) {
            log::warn!("label {label} too thin to extract a surface, skipped");
            continue;
        }
        let surface = extract_isosurface(&smoothed, 0.5, &params.scale);
        if surface.is_empty() {
            continue;
        }
        let mut mesh = smooth_mesh(&surface, &params.scale);
        if params.perturb_amplitude != 0.0 {
            let k = 1.0 / params.perturb_wavelength;
            for (v, n) in mesh.vertices.iter_mut().zip(&mesh.normals) {
                let d = perlin.noise3(v.x * k, v.y * k, v.z * k).clamp(-1.0, 1.0);
                *v += n * (params.perturb_amplitude * d);
            }
            mesh.recompute_normals();
        }
        out.push(ContextMesh { label, mesh });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::Vec3;

    fn ball(radius: f64, voxel: f64, n: usize, label: f64) -> DensityVolume {
        let mut vol = DensityVolume::zeros([n; 3], voxel, Vec3::repeat(-(n as f64 - 1.0) * voxel / 2.0));
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    if vol.position(i, j, k).norm() <= radius {
                        let idx = vol.index(i, j, k);
                        vol.data[idx] = label;
                    }
                }
            }
        }
        vol
    }

    #[test]
    fn background_only() {
        let vol = DensityVolume::zeros([8; 3], 1.0, Vec3::zeros());
        assert!(embed_context(&vol, None, &ContextParams::default(), &mut stream(0, "c", 0)).is_empty());
    }

    #[test]
    fn sphere_within_displacement_bound() {
        let vol = ball(50.0, 2.0, 64, 1.0);
        let meshes = embed_context(&vol, None, &ContextParams::default(), &mut stream(1, "c", 0));
        assert_eq!(meshes.len(), 1);
        let m = &meshes[0].mesh;
        assert!(m.is_closed());
        for v in &m.vertices {
            let r = v.norm();
            assert!((46.0..=54.0).contains(&r), "{r}");
        }
    }

    #[test]
    fn zero_amplitude_matches_plain_pipeline() {
        let vol = ball(12.0, 1.0, 32, 3.0);
        let params = ContextParams { perturb_amplitude: 0.0, ..Default::default() };
        let meshes = embed_context(&vol, Some(&[3, 7]), &params, &mut stream(2, "c", 0));
        assert_eq!(meshes.len(), 1);
        let mut mask = vol.clone();
        mask.data.iter_mut().for_each(|v| *v = if *v == 3.0 { 1.0 } else { 0.0 });
        let plain = smooth_mesh(&extract_isosurface(&smooth_and_threshold(&mask, 2.0), 0.5, &params.scale), &params.scale);
        assert_eq!(meshes[0].mesh, plain);
    }

    #[test]
    fn perturbation_keeps_topology() {
        let vol = ball(12.0, 1.0, 32, 1.0);
        let flat = embed_context(&vol, None, &ContextParams { perturb_amplitude: 0.0, ..Default::default() }, &mut stream(3, "c", 0));
        let bent = embed_context(&vol, None, &ContextParams::default(), &mut stream(3, "c", 0));
        assert_eq!(flat[0].mesh.faces, bent[0].mesh.faces);
        assert_ne!(flat[0].mesh.vertices, bent[0].mesh.vertices);
    }
}
