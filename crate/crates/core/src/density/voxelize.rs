use thiserror::Error;

use super::DensityVolume;
use crate::filter::{gaussian_blur_3d, Boundary};
use crate::formats::AtomicModel;
use crate::Vec3;

/// Atom kernels are cut off at this many standard deviations.
pub const KERNEL_TRUNCATION_SIGMAS: f64 = 4.0;
/// Samples below this fraction of the maximum are zeroed after smoothing.
pub const THRESHOLD_FRACTION: f64 = 0.005;
/// Fraction of atoms whose kernels may poke out of the box before it grows.
const MAX_VIOLATION_FRACTION: f64 = 0.10;

#[derive(Debug, Error, PartialEq)]
pub enum VoxelizeError {
    #[error("resolution must be positive and finite, got {0}")]
    Resolution(f64),
    #[error("atom {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("{violations} of {atoms} atoms still exceed the box after expansion")]
    BoundaryViolation { violations: usize, atoms: usize },
}

/// How the sampling box is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoxPolicy {
    /// Atom bounding box padded by `max(3 r_max, 2 resolution)` on each side.
    Auto,
    /// Box with the given lower corner and edge lengths in Å.
    Fixed { origin: Vec3, size: Vec3 },
}

/// Voxel spacing for a target resolution.
pub fn voxel_spacing(resolution: f64) -> f64 {
    resolution / 2.0
}

/// Box margin in Å.
pub fn box_margin(r_max: f64, resolution: f64) -> f64 {
    (3.0 * r_max).max(2.0 * resolution)
}

/// Kernel width in voxels for an atom of radius `r_vdw`.
pub fn kernel_sigma(r_vdw: f64, spacing: f64) -> f64 {
    r_vdw / (2.0 * spacing)
}

/// Smoothing width in voxels.
pub fn smoothing_sigma(resolution: f64, spacing: f64) -> f64 {
    resolution / (2.0 * spacing)
}

/// Voxelizes with an automatically sized box. See [`voxelize_with`].
pub fn voxelize(model: &AtomicModel, resolution: f64) -> Result<DensityVolume, VoxelizeError> {
    voxelize_with(model, resolution, BoxPolicy::Auto)
}

/// Sums a unit-amplitude isotropic Gaussian per atom on a grid of spacing
/// `resolution / 2`.
///
/// An atom violates the box when its truncated kernel reaches past an edge.
/// If more than 10% of atoms violate, the box grows by `4 r_max` on every side
/// and voxelization restarts; a second overflow is an error.
pub fn voxelize_with(model: &AtomicModel, resolution: f64, policy: BoxPolicy) -> Result<DensityVolume, VoxelizeError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(VoxelizeError::Resolution(resolution));
    }
    if let Some(i) = model.atoms.iter().position(|a| !(a.position.iter().all(|c| c.is_finite()))) {
        return Err(VoxelizeError::NonFinite(i));
    }
    let spacing = voxel_spacing(resolution);
    let (mut lo, mut hi) = match policy {
        BoxPolicy::Auto => {
            let (lo, hi) = model.bounds();
            let m = box_margin(model.r_max(), resolution);
            (lo - Vec3::repeat(m), hi + Vec3::repeat(m))
        }
        BoxPolicy::Fixed { origin, size } => (origin, origin + size),
    };
    for attempt in 0..2 {
        let vol = empty_grid(lo, hi, spacing);
        let violations = count_violations(model, &vol);
        if violations as f64 <= MAX_VIOLATION_FRACTION * model.len() as f64 {
            return Ok(deposit(model, vol));
        }
        if attempt == 1 {
            return Err(VoxelizeError::BoundaryViolation { violations, atoms: model.len() });
        }
        log::warn!(
            "{}: {violations}/{} atoms exceed the box, expanding by 4 r_max",
            model.id,
            model.len()
        );
        let grow = Vec3::repeat(4.0 * model.r_max());
        lo -= grow;
        hi += grow;
    }
    unreachable!()
}

fn empty_grid(lo: Vec3, hi: Vec3, spacing: f64) -> DensityVolume {
    let n = |a: usize| (((hi[a] - lo[a]) / spacing).ceil().max(0.0) as usize) + 1;
    DensityVolume::zeros([n(0), n(1), n(2)], spacing, lo)
}

fn count_violations(model: &AtomicModel, vol: &DensityVolume) -> usize {
    let far = vol.origin + vol.span();
    model
        .atoms
        .iter()
        .filter(|a| {
            let support = KERNEL_TRUNCATION_SIGMAS * kernel_sigma(a.vdw_radius, vol.voxel_size) * vol.voxel_size;
            (0..3).any(|k| a.position[k] - support < vol.origin[k] || a.position[k] + support > far[k])
        })
        .count()
}

fn deposit(model: &AtomicModel, mut vol: DensityVolume) -> DensityVolume {
    let spacing = vol.voxel_size;
    let [nx, ny, nz] = vol.dims;
    for atom in &model.atoms {
        let sigma = kernel_sigma(atom.vdw_radius, spacing);
        let cutoff = KERNEL_TRUNCATION_SIGMAS * sigma;
        let cutoff2 = cutoff * cutoff;
        let inv = 1.0 / (2.0 * sigma * sigma);
        let g = (atom.position - vol.origin) / spacing;
        let range = |c: f64, n: usize| {
            let lo = (c - cutoff).ceil().max(0.0) as usize;
            let hi = ((c + cutoff).floor().min(n as f64 - 1.0)).max(-1.0);
            (lo, hi as isize)
        };
        let (i0, i1) = range(g.x, nx);
        let (j0, j1) = range(g.y, ny);
        let (k0, k1) = range(g.z, nz);
        for k in k0 as isize..=k1 {
            let dz2 = (k as f64 - g.z).powi(2);
            for j in j0 as isize..=j1 {
                let dyz2 = dz2 + (j as f64 - g.y).powi(2);
                if dyz2 > cutoff2 {
                    continue;
                }
                let row = vol.index(0, j as usize, k as usize);
                for i in i0 as isize..=i1 {
                    let d2 = dyz2 + (i as f64 - g.x).powi(2);
                    if d2 <= cutoff2 {
                        vol.data[row + i as usize] += (-d2 * inv).exp();
                    }
                }
            }
        }
    }
    vol
}

/// Gaussian blur with `sigma = resolution / (2 spacing)` voxels followed by
/// zeroing every sample below `0.005 * max`.
pub fn smooth_and_threshold(vol: &DensityVolume, resolution: f64) -> DensityVolume {
    let mut out = vol.clone();
    let sigma = smoothing_sigma(resolution, vol.voxel_size);
    gaussian_blur_3d(&mut out.data, out.dims, sigma, Boundary::Zero);
    let max = out.max();
    if max > 0.0 {
        let floor = THRESHOLD_FRACTION * max;
        for v in out.data.iter_mut() {
            if *v < floor {
                *v = 0.0;
            }
        }
    } else {
        out.data.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    out
}
