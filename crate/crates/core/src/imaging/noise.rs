//! Baseline detector noise at a target signal-to-noise ratio.
//!
//! SNR is the variance ratio `var(signal) / var(noise)`.

use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{variance, ImagingError, Micrograph, Provenance};
use crate::rng::{stream, SimRng};

const MAX_BISECTION_STEPS: usize = 32;
/// Dose calibration stops once the measured SNR is this close to target.
const CALIBRATION_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian,
    Poisson,
    PoissonGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    /// `0` selects pure-noise mode, where `sigma` (Gaussian) or `dose`
    /// (Poisson) is used directly.
    pub target_snr: f64,
    /// Electrons per pixel at full scale. Fixed when given, otherwise
    /// calibrated to hit `target_snr`.
    pub dose: Option<f64>,
    /// Noise standard deviation in pure-noise mode.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { model: NoiseModel::Gaussian, target_snr: 0.1, dose: None, sigma: 1.0, seed: 0 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.target_snr >= 0.0) || !self.target_snr.is_finite() {
            return Err(format!("target_snr must be non-negative, got {}", self.target_snr));
        }
        if let Some(d) = self.dose {
            if !(d > 0.0) || !d.is_finite() {
                return Err(format!("dose must be positive, got {d}"));
            }
        }
        if !(self.sigma >= 0.0) {
            return Err(format!("sigma must be non-negative, got {}", self.sigma));
        }
        Ok(())
    }
}

/// `var(signal) / var(noisy - signal)`.
pub fn measured_snr(signal: &[f64], noisy: &[f64]) -> f64 {
    let residual: Vec<f64> = noisy.iter().zip(signal).map(|(n, s)| n - s).collect();
    variance(signal) / variance(&residual)
}

fn add_gaussian(data: &mut [f64], sigma: f64, rng: &mut SimRng) {
    if sigma > 0.0 {
        let n = Normal::new(0.0, sigma).expect("finite sigma");
        data.iter_mut().for_each(|v| *v += n.sample(rng));
    }
}

/// Counting noise on the min-max normalized image, mapped back to the
/// original units.
fn poisson_stage(data: &[f64], dose: f64, rng: &mut SimRng) -> Vec<f64> {
    let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    data.iter()
        .map(|&v| {
            let lambda = dose * (v - lo) / range;
            let counts = if lambda > 0.0 { Poisson::new(lambda).expect("positive rate").sample(rng) } else { 0.0 };
            lo + range * counts / dose
        })
        .collect()
}

/// Dose such that Poisson noise alone gives `snr`, refined by log-bisection
/// with common random numbers.
fn calibrate_dose(data: &[f64], snr: f64, seed: u64) -> f64 {
    let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let norm: Vec<f64> = data.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let mean = norm.iter().sum::<f64>() / norm.len() as f64;
    // Expected noise variance in normalized units is mean / dose.
    let analytic = snr * mean / variance(&norm);
    let measure = |dose: f64| measured_snr(data, &poisson_stage(data, dose, &mut stream(seed, "noise-poisson", 0)));
    let close = |m: f64| ((m - snr) / snr).abs() <= CALIBRATION_TOLERANCE;
    if close(measure(analytic)) {
        return analytic;
    }
    let (mut a, mut b) = (analytic.ln() - 2.0, analytic.ln() + 2.0);
    let mut best = analytic;
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (a + b);
        best = mid.exp();
        let m = measure(best);
        if close(m) {
            break;
        }
        if m < snr {
            a = mid;
        } else {
            b = mid;
        }
    }
    best
}

pub fn apply_noise(m: &Micrograph, spec: &NoiseSpec) -> Result<Micrograph, ImagingError> {
    spec.validate().map_err(ImagingError::Invalid)?;
    if !m.is_finite() {
        return Err(ImagingError::NonFinite);
    }
    let var = m.variance();
    let pure = spec.target_snr == 0.0;
    if !pure && !(var > 0.0) {
        return Err(ImagingError::DegenerateSignal);
    }
    let mut gauss = stream(spec.seed, "noise-gaussian", 0);
    let data = match spec.model {
        NoiseModel::Gaussian => {
            let sigma = if pure { spec.sigma } else { (var / spec.target_snr).sqrt() };
            let mut d = m.data.clone();
            add_gaussian(&mut d, sigma, &mut gauss);
            d
        }
        NoiseModel::Poisson | NoiseModel::PoissonGaussian => {
            let split = spec.model == NoiseModel::PoissonGaussian;
            // Each stage of the mixed model carries half the noise variance.
            let stage_snr = if split { 2.0 * spec.target_snr } else { spec.target_snr };
            let dose = match spec.dose {
                Some(d) => d,
                None if pure => return Err(ImagingError::Invalid("pure-noise Poisson mode needs a dose".into())),
                None => calibrate_dose(&m.data, stage_snr, spec.seed),
            };
            let mut d = poisson_stage(&m.data, dose, &mut stream(spec.seed, "noise-poisson", 0));
            if split {
                let sigma = if pure { spec.sigma } else { (var / stage_snr).sqrt() };
                add_gaussian(&mut d, sigma, &mut gauss);
            }
            d
        }
    };
    Ok(Micrograph { data, provenance: Provenance::Noisy, ..m.clone() })
}

/// Uniform test image with unit variance.
#[cfg(test)]
pub(crate) fn unit_variance_image(n: usize, seed: u64) -> Micrograph {
    use rand::Rng;
    let mut rng = stream(seed, "test-image", 0);
    let mut m = Micrograph::zeros(n, n, 1.0, [0.0, 0.0], Provenance::Clean);
    m.data.iter_mut().for_each(|v| *v = rng.random::<f64>() * 12f64.sqrt());
    m
}
