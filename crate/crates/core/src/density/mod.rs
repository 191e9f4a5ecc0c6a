//! Atomic models to voxel densities, plus confidence-stratified conformers.

mod conformer;
mod voxelize;

pub use conformer::{perturb_conformer, ConformerParams, Domain};
pub(crate) use conformer::random_unit_vector;
pub use voxelize::{
    smooth_and_threshold, smoothing_sigma, voxelize, voxelize_with, voxel_spacing, BoxPolicy,
    VoxelizeError, KERNEL_TRUNCATION_SIGMAS, THRESHOLD_FRACTION,
};

use crate::formats::{read_volume, write_volume, MrcError, VolumeHeader};
use crate::Vec3;

/// Regular 3D scalar grid, x fastest, isotropic voxels.
///
/// Sample `(i, j, k)` sits at `origin + voxel_size * (i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVolume {
    pub dims: [usize; 3],
    pub voxel_size: f64,
    pub origin: Vec3,
    pub data: Vec<f64>,
}

impl DensityVolume {
    pub fn zeros(dims: [usize; 3], voxel_size: f64, origin: Vec3) -> Self {
        Self { dims, voxel_size, origin, data: vec![0.0; dims[0] * dims[1] * dims[2]] }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Mode-2 MRC bytes; samples are narrowed to `f32`.
    pub fn to_mrc(&self) -> Result<Vec<u8>, MrcError> {
        let o = self.origin;
        let header = VolumeHeader::new(self.dims, self.voxel_size as f32, [o.x as f32, o.y as f32, o.z as f32]);
        let grid: Vec<f32> = self.data.iter().map(|&v| v as f32).collect();
        write_volume(&header, &grid)
    }

    /// Reads an MRC volume; anisotropic voxels use the x spacing.
    pub fn from_mrc(bytes: &[u8]) -> Result<Self, MrcError> {
        let (h, grid) = read_volume(bytes)?;
        if h.voxel_size.iter().any(|&v| v != h.voxel_size[0]) {
            log::warn!("anisotropic voxels {:?}; using x spacing", h.voxel_size);
        }
        Ok(Self {
            dims: [h.nx, h.ny, h.nz],
            voxel_size: f64::from(h.voxel_size[0]),
            origin: Vec3::new(h.origin[0].into(), h.origin[1].into(), h.origin[2].into()),
            data: grid.into_iter().map(f64::from).collect(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Position of voxel `(i, j, k)` in Å.
    pub fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.voxel_size
    }

    /// Physical size of the sampled box, `(n - 1) * voxel_size` per axis.
    pub fn span(&self) -> Vec3 {
        Vec3::new(
            (self.dims[0] - 1) as f64,
            (self.dims[1] - 1) as f64,
            (self.dims[2] - 1) as f64,
        ) * self.voxel_size
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Trilinear interpolation at a point in Å. Points outside the sampled
    /// box return 0.
    pub fn sample(&self, p: &Vec3) -> f64 {
        let g = (p - self.origin) / self.voxel_size;
        self.sample_voxel(g.x, g.y, g.z)
    }

    /// Trilinear interpolation at fractional voxel coordinates.
    pub fn sample_voxel(&self, x: f64, y: f64, z: f64) -> f64 {
        let [nx, ny, nz] = self.dims;
        let max = |n: usize| (n - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && z >= 0.0 && x <= max(nx) && y <= max(ny) && z <= max(nz)) {
            return 0.0;
        }
        let (i0, fx) = split(x, nx);
        let (j0, fy) = split(y, ny);
        let (k0, fz) = split(z, nz);
        let i1 = (i0 + 1).min(nx - 1);
        let j1 = (j0 + 1).min(ny - 1);
        let k1 = (k0 + 1).min(nz - 1);
        let c00 = lerp(self.get(i0, j0, k0), self.get(i1, j0, k0), fx);
        let c10 = lerp(self.get(i0, j1, k0), self.get(i1, j1, k0), fx);
        let c01 = lerp(self.get(i0, j0, k1), self.get(i1, j0, k1), fx);
        let c11 = lerp(self.get(i0, j1, k1), self.get(i1, j1, k1), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }
}

#[inline]
fn split(x: f64, n: usize) -> (usize, f64) {
    let i = (x.floor() as usize).min(n - 1);
    (i, x - i as f64)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}
