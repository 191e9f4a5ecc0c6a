//! Unitary 2D FFT on row-major complex buffers.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

fn transform(data: &mut [Complex64], width: usize, height: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let row = planner.plan_fft(width, direction);
    for chunk in data.chunks_exact_mut(width) {
        row.process(chunk);
    }
    let col = planner.plan_fft(height, direction);
    let mut column = vec![Complex64::default(); height];
    for i in 0..width {
        for j in 0..height {
            column[j] = data[j * width + i];
        }
        col.process(&mut column);
        for j in 0..height {
            data[j * width + i] = column[j];
        }
    }
    let norm = 1.0 / ((width * height) as f64).sqrt();
    data.iter_mut().for_each(|v| *v *= norm);
}

pub fn fft2(data: &mut [Complex64], width: usize, height: usize) {
    transform(data, width, height, FftDirection::Forward);
}

pub fn ifft2(data: &mut [Complex64], width: usize, height: usize) {
    transform(data, width, height, FftDirection::Inverse);
}

/// Signed frequency of FFT bin `k` of `n` for sample spacing `d`.
pub fn frequency(k: usize, n: usize, d: f64) -> f64 {
    let signed = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    signed / (n as f64 * d)
}
