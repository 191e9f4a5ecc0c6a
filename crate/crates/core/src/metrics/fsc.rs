use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::density::DensityVolume;

/// Shells whose energy is below this fraction of the total are flagged.
const ZERO_ENERGY_FRACTION: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FscShell {
    /// Integer shell radius in frequency voxels.
    pub radius: usize,
    /// Spatial frequency in 1/Å.
    pub frequency: f64,
    pub correlation: f64,
    pub count: usize,
    pub zero_energy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FscCurve {
    pub shells: Vec<FscShell>,
    /// Grid edge length in voxels.
    pub n: usize,
    pub voxel_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Interpolated crossing in shell units.
    pub shell: f64,
    /// Same crossing in 1/Å.
    pub frequency: f64,
    /// False when the curve never drops below the threshold.
    pub crossed: bool,
}

/// In-place unitary 3D DFT, x fastest.
pub fn fft3(data: &mut [Complex64], dims: [usize; 3]) {
    let mut planner = FftPlanner::new();
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut line = Vec::new();
    for axis in 0..3 {
        let n = dims[axis];
        let fft = planner.plan_fft_forward(n);
        line.resize(n, Complex64::default());
        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
        for b in 0..dims[others[1]] {
            for a in 0..dims[others[0]] {
                let base = a * strides[others[0]] + b * strides[others[1]];
                for (t, v) in line.iter_mut().enumerate() {
                    *v = data[base + t * strides[axis]];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    data[base + t * strides[axis]] = *v;
                }
            }
        }
    }
    let norm = 1.0 / (data.len() as f64).sqrt();
    data.iter_mut().for_each(|v| *v *= norm);
}

fn spectrum(v: &DensityVolume) -> Vec<Complex64> {
    let mut d: Vec<Complex64> = v.data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft3(&mut d, v.dims);
    d
}

fn signed(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Shell-wise `Re Σ F1 F2* / sqrt(Σ|F1|² Σ|F2|²)` for integer radii
/// `0..=n/2`.
pub fn fsc(v1: &DensityVolume, v2: &DensityVolume) -> Result<FscCurve, MetricsError> {
    if v1.dims != v2.dims {
        return Err(MetricsError::DimensionMismatch(v1.dims, v2.dims));
    }
    let [nx, ny, nz] = v1.dims;
    if nx != ny || ny != nz {
        return Err(MetricsError::NotCubic(v1.dims));
    }
    let n = nx;
    let (f1, f2) = (spectrum(v1), spectrum(v2));
    let shells = n / 2 + 1;
    let mut cross = vec![0.0; shells];
    let mut e1 = vec![0.0; shells];
    let mut e2 = vec![0.0; shells];
    let mut count = vec![0usize; shells];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let r = (signed(i, n).powi(2) + signed(j, n).powi(2) + signed(k, n).powi(2)).sqrt().round() as usize;
                if r >= shells {
                    continue;
                }
                let idx = (k * n + j) * n + i;
                let (a, b) = (f1[idx], f2[idx]);
                cross[r] += (a * b.conj()).re;
                e1[r] += a.norm_sqr();
                e2[r] += b.norm_sqr();
                count[r] += 1;
            }
        }
    }
    let (t1, t2): (f64, f64) = (e1.iter().sum(), e2.iter().sum());
    let shells = (0..shells)
        .map(|r| {
            let zero = e1[r] <= ZERO_ENERGY_FRACTION * t1 || e2[r] <= ZERO_ENERGY_FRACTION * t2;
            FscShell {
                radius: r,
                frequency: r as f64 / (n as f64 * v1.voxel_size),
                correlation: if zero { 0.0 } else { cross[r] / (e1[r] * e2[r]).sqrt() },
                count: count[r],
                zero_energy: zero,
            }
        })
        .collect();
    Ok(FscCurve { shells, n, voxel_size: v1.voxel_size })
}

/// First downward crossing of `threshold`, linearly interpolated between
/// neighbouring shells. Zero-energy shells are skipped.
pub fn resolution_at(curve: &FscCurve, threshold: f64) -> Resolution {
    let scale = 1.0 / (curve.n as f64 * curve.voxel_size);
    let valid: Vec<&FscShell> = curve.shells.iter().filter(|s| !s.zero_energy).collect();
    for (idx, s) in valid.iter().enumerate() {
        if s.correlation < threshold {
            let shell = match idx.checked_sub(1).map(|p| valid[p]) {
                Some(prev) => {
                    let t = (prev.correlation - threshold) / (prev.correlation - s.correlation);
                    prev.radius as f64 + t * (s.radius - prev.radius) as f64
                }
                None => s.radius as f64,
            };
            return Resolution { shell, frequency: shell * scale, crossed: true };
        }
    }
    let nyquist = curve.shells.last().map_or(0, |s| s.radius) as f64;
    Resolution { shell: nyquist, frequency: nyquist * scale, crossed: false }
}
