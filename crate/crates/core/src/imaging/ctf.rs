//! Contrast transfer function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::{fft2, frequency, ifft2};
use super::{ImagingError, Micrograph, Provenance};

/// Relativistic electron wavelength in Å for an accelerating voltage in kV.
pub fn electron_wavelength(voltage_kv: f64) -> f64 {
    let v = voltage_kv * 1e3;
    12.2643247 / (v * (1.0 + 0.978466e-6 * v)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtfParams {
    pub voltage_kv: f64,
    /// Å, positive is underfocus.
    pub defocus: f64,
    pub cs_mm: f64,
    pub amplitude_contrast: f64,
    /// Å².
    pub b_factor: f64,
    /// Radians.
    pub phase_shift: f64,
}

impl Default for CtfParams {
    fn default() -> Self {
        Self { voltage_kv: 300.0, defocus: 15_000.0, cs_mm: 2.7, amplitude_contrast: 0.07, b_factor: 0.0, phase_shift: 0.0 }
    }
}

impl CtfParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.voltage_kv > 0.0) {
            return Err(format!("voltage must be positive, got {}", self.voltage_kv));
        }
        if !(0.0..=1.0).contains(&self.amplitude_contrast) {
            return Err(format!("amplitude contrast must lie in [0, 1], got {}", self.amplitude_contrast));
        }
        if !(self.b_factor >= 0.0) {
            return Err(format!("B-factor must be non-negative, got {}", self.b_factor));
        }
        if ![self.defocus, self.cs_mm, self.phase_shift].iter().all(|v| v.is_finite()) {
            return Err("CTF parameters must be finite".into());
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        electron_wavelength(self.voltage_kv)
    }

    /// Phase aberration at spatial frequency `s` (1/Å).
    pub fn gamma(&self, s: f64) -> f64 {
        let lambda = self.wavelength();
        let cs = self.cs_mm * 1e7;
        let s2 = s * s;
        std::f64::consts::FRAC_PI_2 * (2.0 * lambda * self.defocus * s2 + lambda.powi(3) * cs * s2 * s2)
            - self.phase_shift
    }

    /// `H(s)`; the azimuth does not enter because astigmatism is not modeled.
    pub fn transfer(&self, s: f64) -> f64 {
        let w = self.amplitude_contrast;
        let g = self.gamma(s);
        -((1.0 - w * w).sqrt() * g.sin() - w * g.cos()) * (-self.b_factor * s * s / 4.0).exp()
    }
}

/// Multiplies the spectrum of `m` by a real filter `f(s, a)` where `s` is
/// the radial frequency in 1/Å and `a = atan2(k_y, k_x)`.
///
/// The filter must be even in `(k_x, k_y)` for the result to be real; an
/// imaginary residue above `1e-6 max|out|` is reported as an invariant
/// violation.
pub fn apply_radial_filter<F: Fn(f64, f64) -> f64>(m: &Micrograph, f: F) -> Result<Micrograph, ImagingError> {
    if !m.is_finite() {
        return Err(ImagingError::NonFinite);
    }
    let (w, h) = (m.width, m.height);
    let mut spec: Vec<Complex64> = m.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut spec, w, h);
    for j in 0..h {
        let ky = frequency(j, h, m.pixel_size);
        for i in 0..w {
            let kx = frequency(i, w, m.pixel_size);
            spec[j * w + i] *= f((kx * kx + ky * ky).sqrt(), ky.atan2(kx));
        }
    }
    ifft2(&mut spec, w, h);
    let max_re = spec.iter().fold(0.0f64, |a, c| a.max(c.re.abs()));
    let max_im = spec.iter().fold(0.0f64, |a, c| a.max(c.im.abs()));
    if max_im > 1e-6 * max_re && max_im > 1e-12 {
        return Err(ImagingError::Invariant(format!("imaginary residue {max_im:e} after filtering")));
    }
    Ok(Micrograph { data: spec.iter().map(|c| c.re).collect(), ..m.clone() })
}

pub fn ctf_filter(m: &Micrograph, ctf: &CtfParams) -> Result<Micrograph, ImagingError> {
    ctf.validate().map_err(ImagingError::Invalid)?;
    let mut out = apply_radial_filter(m, |s, _| ctf.transfer(s))?;
    out.provenance = Provenance::Ctf;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelengths() {
        assert!((electron_wavelength(300.0) - 0.01969).abs() < 5e-6);
        assert!((electron_wavelength(200.0) - 0.02508).abs() < 5e-6);
        assert!((electron_wavelength(100.0) - 0.03701).abs() < 5e-6);
    }

    #[test]
    fn dc_equals_amplitude_contrast() {
        let ctf = CtfParams::default();
        assert!((ctf.transfer(0.0) - 0.07).abs() < 1e-15);
    }

    #[test]
    fn even_filter_identity() {
        let mut m = Micrograph::zeros(16, 12, 1.0, [0.0, 0.0], Provenance::Clean);
        m.data.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64 * 0.37).cos());
        let out = apply_radial_filter(&m, |_, _| 1.0).unwrap();
        for (a, b) in out.data.iter().zip(&m.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = Micrograph::zeros(4, 4, 1.0, [0.0, 0.0], Provenance::Clean);
        m.data[3] = f64::NAN;
        assert_eq!(ctf_filter(&m, &CtfParams::default()), Err(ImagingError::NonFinite));
    }
}
