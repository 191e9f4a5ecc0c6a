//! Weak-phase image formation: potential assembly, projection, CTF,
//! occupancy masks and baseline noise.

mod ctf;
mod fft;
mod mask;
mod noise;
mod potential;

pub use ctf::{apply_radial_filter, ctf_filter, electron_wavelength, CtfParams};
pub use fft::{fft2, frequency, ifft2};
pub use mask::render_mask;
pub use noise::{apply_noise, measured_snr, NoiseModel, NoiseSpec};
pub use potential::{
    assemble_potential, project, project_ice, project_placement, project_scene, ImageGrid, DEFAULT_ICE_CONTRAST,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{read_volume, write_volume, MrcError, VolumeHeader};

#[derive(Debug, Error, PartialEq)]
pub enum ImagingError {
    #[error("structure `{0}` is not in the library")]
    UnknownStructure(String),
    #[error("projection slab [{0}, {1}] contains no grid planes")]
    EmptySlab(f64, f64),
    #[error("image contains non-finite values")]
    NonFinite,
    #[error("signal has zero variance; use target_snr = 0 for pure noise")]
    DegenerateSignal,
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("ice footprint {ice:?} does not match image {image:?}")]
    IceFootprint { ice: [usize; 2], image: [usize; 2] },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Clean,
    Ctf,
    Noisy,
    Mask,
}

/// 2D real image, x fastest. Pixel `(i, j)` is centered at
/// `origin + (i, j) * pixel_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Micrograph {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    pub origin: [f64; 2],
    pub data: Vec<f64>,
    pub provenance: Provenance,
}

impl Micrograph {
    pub fn zeros(width: usize, height: usize, pixel_size: f64, origin: [f64; 2], provenance: Provenance) -> Self {
        Self { width, height, pixel_size, origin, data: vec![0.0; width * height], provenance }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.width + i]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        variance(&self.data)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// MRC mode-2 container with `nz = 1`.
    pub fn to_mrc(&self) -> Result<Vec<u8>, MrcError> {
        let header = VolumeHeader::new(
            [self.width, self.height, 1],
            self.pixel_size as f32,
            [self.origin[0] as f32, self.origin[1] as f32, 0.0],
        );
        let grid: Vec<f32> = self.data.iter().map(|&v| v as f32).collect();
        write_volume(&header, &grid)
    }

    /// Reads a single-section MRC image.
    pub fn from_mrc(bytes: &[u8], provenance: Provenance) -> Result<Self, MrcError> {
        let (h, grid) = read_volume(bytes)?;
        if h.nz != 1 {
            return Err(MrcError::Container(format!("expected a 2D image, got nz = {}", h.nz)));
        }
        Ok(Self {
            width: h.nx,
            height: h.ny,
            pixel_size: f64::from(h.voxel_size[0]),
            origin: [h.origin[0].into(), h.origin[1].into()],
            data: grid.into_iter().map(f64::from).collect(),
            provenance,
        })
    }

    /// 16-bit grayscale PNG with linear min-max scaling.
    pub fn to_png16(&self) -> Vec<u8> {
        let (lo, hi) = self.min_max();
        let range = if hi > lo { hi - lo } else { 1.0 };
        let mut pixels = Vec::with_capacity(self.data.len() * 2);
        for &v in &self.data {
            let q = (((v - lo) / range) * 65535.0).round().clamp(0.0, 65535.0) as u16;
            pixels.extend_from_slice(&q.to_be_bytes());
        }
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Sixteen);
            let mut writer = enc.write_header().expect("in-memory png header");
            writer.write_image_data(&pixels).expect("in-memory png data");
        }
        out
    }
}

pub(crate) fn variance(data: &[f64]) -> f64 {
    let n = data.len().max(1) as f64;
    let mean = data.iter().sum::<f64>() / n;
    data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}
