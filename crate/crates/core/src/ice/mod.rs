//! Vitreous ice slab: log-normal base thickness, Perlin topography and a
//! correlated density field.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::filter::{gaussian_blur_3d, gaussian_kernel, noise_gain, Boundary};
use crate::perlin::Perlin;

/// Bulk density of amorphous ice in g/cm³.
pub const ICE_DENSITY: f64 = 0.92;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IceParams {
    /// Log-normal location of the base thickness, `ln(nm)`.
    pub thickness_mu: f64,
    pub thickness_sigma: f64,
    pub octaves: usize,
    /// Topography amplitude of octave 0 in nm; octave `i` gets `A_0 / 2^i`.
    pub base_amplitude: f64,
    /// Wavelength of octave 0 in pixels; octave `i` uses `L 2^i`.
    pub base_wavelength: f64,
    pub min_thickness: f64,
    pub max_thickness: f64,
    pub density: f64,
    /// Density fluctuation as a fraction of `density`.
    pub density_sigma_fraction: f64,
    /// Gaussian correlation length of the density noise, in voxels.
    pub correlation_length: f64,
    /// Number of depth layers in the density field.
    pub layers: usize,
}

impl Default for IceParams {
    fn default() -> Self {
        Self {
            thickness_mu: 100f64.ln(),
            thickness_sigma: 0.2,
            octaves: 4,
            base_amplitude: 5.0,
            base_wavelength: 10.0,
            min_thickness: 30.0,
            max_thickness: 300.0,
            density: ICE_DENSITY,
            density_sigma_fraction: 0.05,
            correlation_length: 2.0,
            layers: 8,
        }
    }
}

impl IceParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("thickness_sigma", self.thickness_sigma),
            ("base_wavelength", self.base_wavelength),
            ("min_thickness", self.min_thickness),
            ("density", self.density),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("ice {name} must be positive, got {v}"));
            }
        }
        if !(self.max_thickness >= self.min_thickness) {
            return Err("ice max_thickness below min_thickness".into());
        }
        if !(self.base_amplitude >= 0.0 && self.density_sigma_fraction >= 0.0 && self.correlation_length >= 0.0) {
            return Err("ice amplitudes must be non-negative".into());
        }
        if self.layers == 0 {
            return Err("ice needs at least one layer".into());
        }
        Ok(())
    }
}

/// Ice over a micrograph footprint. Depth is discretized in `layers` equal
/// fractions of the local thickness.
#[derive(Debug, Clone, PartialEq)]
pub struct IceSlab {
    pub nx: usize,
    pub ny: usize,
    pub layers: usize,
    pub pixel_size: f64,
    /// Base thickness in nm.
    pub base_thickness: f64,
    /// Local thickness in nm, x fastest.
    pub thickness: Vec<f64>,
    /// Density in g/cm³, index `(l * ny + j) * nx + i`.
    pub density: Vec<f64>,
}

impl IceSlab {
    pub fn thickness_at(&self, i: usize, j: usize) -> f64 {
        self.thickness[j * self.nx + i]
    }

    pub fn density_at(&self, i: usize, j: usize, layer: usize) -> f64 {
        self.density[(layer * self.ny + j) * self.nx + i]
    }

    /// Mean density through the depth at pixel `(i, j)`.
    pub fn column_density(&self, i: usize, j: usize) -> f64 {
        (0..self.layers).map(|l| self.density_at(i, j, l)).sum::<f64>() / self.layers as f64
    }
}

/// `A_i = A_0 / 2^i` for each octave.
pub fn octave_amplitudes(params: &IceParams) -> Vec<f64> {
    (0..params.octaves).map(|i| params.base_amplitude / f64::powi(2.0, i as i32)).collect()
}

pub fn octave_wavelengths(params: &IceParams) -> Vec<f64> {
    (0..params.octaves).map(|i| params.base_wavelength * f64::powi(2.0, i as i32)).collect()
}

pub fn sample_base_thickness<R: Rng + ?Sized>(params: &IceParams, rng: &mut R) -> f64 {
    LogNormal::new(params.thickness_mu, params.thickness_sigma).expect("validated sigma").sample(rng)
}

/// Sum of Perlin octaves in nm at every footprint pixel.
pub fn topography<R: Rng + ?Sized>(nx: usize, ny: usize, params: &IceParams, rng: &mut R) -> Vec<f64> {
    let octaves: Vec<(Perlin, f64, f64, f64)> = octave_amplitudes(params)
        .into_iter()
        .zip(octave_wavelengths(params))
        .map(|(a, l)| {
            let p = Perlin::new(rng);
            // Sub-cell lattice offset so the footprint corner is not pinned to a zero.
            let shift = rng.random::<f64>();
            (p, a, l, shift)
        })
        .collect();
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            out[j * nx + i] = octaves
                .iter()
                .map(|(p, a, l, o)| a * p.noise2(i as f64 / l + o, j as f64 / l + o))
                .sum();
        }
    }
    out
}

/// Zero-mean Gaussian field with standard deviation `sigma` and Gaussian
/// correlation of `corr` voxels.
fn correlated_noise<R: Rng + ?Sized>(dims: [usize; 3], sigma: f64, corr: f64, rng: &mut R) -> Vec<f64> {
    let mut field: Vec<f64> = (0..dims.iter().product()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    if corr > 0.0 {
        gaussian_blur_3d(&mut field, dims, corr, Boundary::Reflect);
        // Divide out the exact per-voxel gain so the marginal std is `sigma`
        // everywhere, including near reflected edges and on thin axes.
        let taps = gaussian_kernel(corr);
        let gains: Vec<Vec<f64>> = dims
            .iter()
            .map(|&n| if n > 1 { noise_gain(n, &taps, Boundary::Reflect) } else { vec![1.0] })
            .collect();
        let [nx, ny, _] = dims;
        for (idx, v) in field.iter_mut().enumerate() {
            let (i, j, k) = (idx % nx, (idx / nx) % ny, idx / (nx * ny));
            *v /= gains[0][i] * gains[1][j] * gains[2][k];
        }
    }
    field.iter_mut().for_each(|v| *v *= sigma);
    field
}

pub fn generate_ice<R: Rng + ?Sized>(nx: usize, ny: usize, pixel_size: f64, params: &IceParams, rng: &mut R) -> IceSlab {
    let base = sample_base_thickness(params, rng);
    let thickness = topography(nx, ny, params, rng)
        .into_iter()
        .map(|h| (base + h).clamp(params.min_thickness, params.max_thickness))
        .collect();
    let dims = [nx, ny, params.layers];
    let sigma = params.density * params.density_sigma_fraction;
    let density = correlated_noise(dims, sigma, params.correlation_length, rng)
        .into_iter()
        .map(|v| (params.density + v).max(0.0))
        .collect();
    IceSlab { nx, ny, layers: params.layers, pixel_size, base_thickness: base, thickness, density }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn amplitudes_halve() {
        assert_eq!(octave_amplitudes(&IceParams::default()), vec![5.0, 2.5, 1.25, 0.625]);
        assert_eq!(octave_wavelengths(&IceParams::default()), vec![10.0, 20.0, 40.0, 80.0]);
    }

    #[test]
    fn thickness_clamped_and_positive() {
        let params = IceParams { base_amplitude: 400.0, ..Default::default() };
        let slab = generate_ice(64, 48, 2.0, &params, &mut stream(1, "ice", 0));
        assert!(slab.thickness.iter().all(|&t| (30.0..=300.0).contains(&t)));
        assert!(slab.thickness.contains(&30.0) && slab.thickness.contains(&300.0));
        assert!(slab.density.iter().all(|&d| d >= 0.0));
        assert_eq!(slab.density.len(), 64 * 48 * 8);
    }

    #[test]
    fn topography_smooth_and_centered() {
        let params = IceParams::default();
        let (nx, ny) = (256, 256);
        let h = topography(nx, ny, &params, &mut stream(2, "ice", 0));
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        assert!(mean.abs() < 0.05 * 5.0, "{mean}");
        let bound = 4.0 * octave_amplitudes(&params).iter().sum::<f64>() / params.base_wavelength;
        for j in 0..ny {
            for i in 1..nx {
                assert!((h[j * nx + i] - h[j * nx + i - 1]).abs() <= bound);
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_ice(32, 32, 1.0, &IceParams::default(), &mut stream(3, "ice", 0));
        let b = generate_ice(32, 32, 1.0, &IceParams::default(), &mut stream(3, "ice", 0));
        assert_eq!(a, b);
    }
}
