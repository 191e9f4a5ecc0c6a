//! Scene potential assembly and line-integral projection.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImagingError, Micrograph, Provenance};
use crate::density::DensityVolume;
use crate::ice::IceSlab;
use crate::scene::{Extents, Placement};
use crate::{Mat3, Vec3};

/// Ice potential relative to unit protein density.
pub const DEFAULT_ICE_CONTRAST: f64 = 0.1;

/// Regular sampling grid for a scene: `width x height` pixels by `depth`
/// planes, node `(i, j, k)` at `origin + (i, j, k) * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub width: usize,
    pub height: usize,
    pub depth: usize,
    pub spacing: f64,
    pub origin: Vec3,
}

impl ImageGrid {
    /// Grid with `round(size / spacing)` nodes per axis starting at `lo`.
    pub fn from_extents(extents: &Extents, spacing: f64) -> Self {
        let n = |a: usize| ((extents.size()[a] / spacing).round() as usize).max(1);
        Self { width: n(0), height: n(1), depth: n(2), spacing, origin: extents.lo }
    }

    pub fn z(&self, k: usize) -> f64 {
        self.origin.z + k as f64 * self.spacing
    }

    /// Midplane of the grid in z, where the ice slab is centered.
    pub fn z_center(&self) -> f64 {
        self.origin.z + (self.depth as f64 - 1.0) * self.spacing / 2.0
    }

    fn empty_image(&self) -> Micrograph {
        Micrograph::zeros(self.width, self.height, self.spacing, [self.origin.x, self.origin.y], Provenance::Clean)
    }
}

/// Inverse rotation and the radius that encloses the whole source box.
fn pose(p: &Placement, src: &DensityVolume) -> (Mat3, f64) {
    let span = src.span();
    let mut reach = 0.0f64;
    for c in 0..8 {
        let corner = src.origin + Vec3::new(
            if c & 1 == 0 { 0.0 } else { span.x },
            if c & 2 == 0 { 0.0 } else { span.y },
            if c & 4 == 0 { 0.0 } else { span.z },
        );
        reach = reach.max(corner.norm());
    }
    (p.rotation.to_matrix().transpose(), reach)
}

/// Inclusive node range along one axis covering `[c - r, c + r]`.
fn node_range(c: f64, r: f64, origin: f64, spacing: f64, n: usize) -> Option<(usize, usize)> {
    let lo = ((c - r - origin) / spacing).ceil().max(0.0);
    let hi = ((c + r - origin) / spacing).floor().min(n as f64 - 1.0);
    (hi >= lo).then_some((lo as usize, hi as usize))
}

fn lookup<'a>(structures: &'a HashMap<String, DensityVolume>, id: &str) -> Result<&'a DensityVolume, ImagingError> {
    structures.get(id).ok_or_else(|| ImagingError::UnknownStructure(id.to_string()))
}

fn check_ice(ice: &IceSlab, grid: &ImageGrid) -> Result<(), ImagingError> {
    if ice.nx != grid.width || ice.ny != grid.height {
        return Err(ImagingError::IceFootprint { ice: [ice.nx, ice.ny], image: [grid.width, grid.height] });
    }
    Ok(())
}

/// Samples `Σ_i ρ_i(R(q_i)^-1 (r - T_i))` plus scaled ice density on `grid`.
pub fn assemble_potential(
    placements: &[Placement],
    structures: &HashMap<String, DensityVolume>,
    ice: Option<(&IceSlab, f64)>,
    grid: &ImageGrid,
) -> Result<DensityVolume, ImagingError> {
    let mut vol = DensityVolume::zeros([grid.width, grid.height, grid.depth], grid.spacing, grid.origin);
    for p in placements {
        let src = lookup(structures, &p.structure_id)?;
        let (rinv, reach) = pose(p, src);
        let t = p.translation;
        let ranges = (
            node_range(t.x, reach, grid.origin.x, grid.spacing, grid.width),
            node_range(t.y, reach, grid.origin.y, grid.spacing, grid.height),
            node_range(t.z, reach, grid.origin.z, grid.spacing, grid.depth),
        );
        let (Some((i0, i1)), Some((j0, j1)), Some((k0, k1))) = ranges else { continue };
        for k in k0..=k1 {
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let r = vol.position(i, j, k);
                    let v = src.sample(&(rinv * (r - t)));
                    if v != 0.0 {
                        let idx = vol.index(i, j, k);
                        vol.data[idx] += v;
                    }
                }
            }
        }
    }
    if let Some((slab, contrast)) = ice {
        check_ice(slab, grid)?;
        let zc = grid.z_center();
        for j in 0..grid.height {
            for i in 0..grid.width {
                let t = slab.thickness_at(i, j) * 10.0;
                let bottom = zc - t / 2.0;
                for k in 0..grid.depth {
                    let u = (grid.z(k) - bottom) / t;
                    if (0.0..1.0).contains(&u) {
                        let layer = ((u * slab.layers as f64) as usize).min(slab.layers - 1);
                        let idx = vol.index(i, j, k);
                        vol.data[idx] += contrast * slab.density_at(i, j, layer);
                    }
                }
            }
        }
    }
    Ok(vol)
}

/// Midpoint-rule integral over the planes with `z_lo <= z <= z_hi`.
pub fn project(vol: &DensityVolume, z_lo: f64, z_hi: f64) -> Result<Micrograph, ImagingError> {
    let [nx, ny, nz] = vol.dims;
    let planes: Vec<usize> = (0..nz)
        .filter(|&k| {
            let z = vol.origin.z + k as f64 * vol.voxel_size;
            z >= z_lo && z <= z_hi
        })
        .collect();
    if planes.is_empty() {
        return Err(ImagingError::EmptySlab(z_lo, z_hi));
    }
    let mut m = Micrograph::zeros(nx, ny, vol.voxel_size, [vol.origin.x, vol.origin.y], Provenance::Clean);
    for j in 0..ny {
        for i in 0..nx {
            m.data[j * nx + i] = planes.iter().map(|&k| vol.get(i, j, k)).sum::<f64>() * vol.voxel_size;
        }
    }
    Ok(m)
}

/// Pose and node ranges of one placement on a grid.
struct Footprint<'a> {
    src: &'a DensityVolume,
    rinv: Mat3,
    t: Vec3,
    reach: f64,
    i: (usize, usize),
    j: (usize, usize),
    k: (usize, usize),
}

impl<'a> Footprint<'a> {
    fn new(grid: &ImageGrid, p: &Placement, src: &'a DensityVolume) -> Option<Self> {
        let (rinv, reach) = pose(p, src);
        let t = p.translation;
        Some(Self {
            src,
            rinv,
            t,
            reach,
            i: node_range(t.x, reach, grid.origin.x, grid.spacing, grid.width)?,
            j: node_range(t.y, reach, grid.origin.y, grid.spacing, grid.height)?,
            k: node_range(t.z, reach, grid.origin.z, grid.spacing, grid.depth)?,
        })
    }

    /// Adds the line integrals for image row `j`. Only nodes inside the
    /// bounding sphere are visited; the source is zero outside it.
    fn add_row(&self, row: &mut [f64], j: usize, grid: &ImageGrid) {
        if j < self.j.0 || j > self.j.1 {
            return;
        }
        let y = grid.origin.y + j as f64 * grid.spacing;
        let step = self.rinv * Vec3::new(0.0, 0.0, grid.spacing);
        for i in self.i.0..=self.i.1 {
            let x = grid.origin.x + i as f64 * grid.spacing;
            let d2 = (x - self.t.x).powi(2) + (y - self.t.y).powi(2);
            if d2 > self.reach * self.reach {
                continue;
            }
            let half = (self.reach * self.reach - d2).sqrt();
            let Some((k0, k1)) = node_range(self.t.z, half, grid.origin.z, grid.spacing, grid.depth) else { continue };
            let (k0, k1) = (k0.max(self.k.0), k1.min(self.k.1));
            let mut local = self.rinv * (Vec3::new(x, y, grid.z(k0)) - self.t);
            let mut sum = 0.0;
            for _ in k0..=k1 {
                sum += self.src.sample(&local);
                local += step;
            }
            row[i] += sum * grid.spacing;
        }
    }
}

/// Adds one particle's projection over all grid planes to `m`.
///
/// Samples the same nodes as [`assemble_potential`] followed by [`project`]
/// over the full depth, without materializing the volume.
pub fn project_placement(m: &mut Micrograph, grid: &ImageGrid, p: &Placement, src: &DensityVolume) {
    if let Some(f) = Footprint::new(grid, p, src) {
        for (j, row) in m.data.chunks_exact_mut(grid.width).enumerate() {
            f.add_row(row, j, grid);
        }
    }
}

/// Exact depth integral of the layered ice over the grid's slab
/// `[z_0 - h/2, z_last + h/2]`, scaled by `contrast`.
pub fn project_ice(slab: &IceSlab, contrast: f64, grid: &ImageGrid) -> Result<Micrograph, ImagingError> {
    check_ice(slab, grid)?;
    let mut m = grid.empty_image();
    let half = grid.spacing / 2.0;
    let (w_lo, w_hi) = (grid.z(0) - half, grid.z(grid.depth - 1) + half);
    let zc = grid.z_center();
    for j in 0..grid.height {
        for i in 0..grid.width {
            let t = slab.thickness_at(i, j) * 10.0;
            let dz = t / slab.layers as f64;
            let bottom = zc - t / 2.0;
            let mut sum = 0.0;
            for l in 0..slab.layers {
                let (a, b) = (bottom + l as f64 * dz, bottom + (l + 1) as f64 * dz);
                let overlap = (b.min(w_hi) - a.max(w_lo)).max(0.0);
                sum += slab.density_at(i, j, l) * overlap;
            }
            m.data[j * grid.width + i] = contrast * sum;
        }
    }
    Ok(m)
}

/// Clean projection of a whole scene, particle by particle.
pub fn project_scene(
    placements: &[Placement],
    structures: &HashMap<String, DensityVolume>,
    ice: Option<(&IceSlab, f64)>,
    grid: &ImageGrid,
) -> Result<Micrograph, ImagingError> {
    let mut m = match ice {
        Some((slab, contrast)) => project_ice(slab, contrast, grid)?,
        None => grid.empty_image(),
    };
    let mut footprints = Vec::with_capacity(placements.len());
    for p in placements {
        footprints.extend(Footprint::new(grid, p, lookup(structures, &p.structure_id)?));
    }
    // Rows are independent and each pixel accumulates placements in list
    // order, so the thread count never changes the result.
    m.data.par_chunks_exact_mut(grid.width).enumerate().for_each(|(j, row)| {
        for f in &footprints {
            f.add_row(row, j, grid);
        }
    });
    Ok(m)
}
