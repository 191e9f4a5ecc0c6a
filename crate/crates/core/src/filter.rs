//! Separable Gaussian filtering on dense row-major grids.

/// How samples beyond the grid edge are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Samples outside the grid are zero.
    Zero,
    /// Mirror about the edge sample (`-1 -> 1`).
    Reflect,
}

/// Normalized Gaussian taps truncated at `4 sigma` (at least one tap each side).
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil().max(1.0) as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

fn reflect(i: isize, n: usize) -> Option<usize> {
    let n = n as isize;
    if n == 1 {
        return Some(0);
    }
    let period = 2 * (n - 1);
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - j;
    }
    Some(j as usize)
}

fn sample_index(i: isize, n: usize, boundary: Boundary) -> Option<usize> {
    if (0..n as isize).contains(&i) {
        return Some(i as usize);
    }
    match boundary {
        Boundary::Zero => None,
        Boundary::Reflect => reflect(i, n),
    }
}

/// Convolves one axis of a grid with dims `dims` (x fastest) in place.
pub fn convolve_axis(data: &mut [f64], dims: [usize; 3], axis: usize, taps: &[f64], boundary: Boundary) {
    if taps.len() == 1 {
        return;
    }
    let [nx, ny, nz] = dims;
    let len = dims[axis];
    let stride = match axis {
        0 => 1,
        1 => nx,
        _ => nx * ny,
    };
    let radius = (taps.len() / 2) as isize;
    let mut line = vec![0.0; len];
    let mut out = vec![0.0; len];
    // Enumerate the start offset of every line along `axis`.
    let starts: Vec<usize> = match axis {
        0 => (0..nz).flat_map(|z| (0..ny).map(move |y| (z * ny + y) * nx)).collect(),
        1 => (0..nz).flat_map(|z| (0..nx).map(move |x| z * nx * ny + x)).collect(),
        _ => (0..ny).flat_map(|y| (0..nx).map(move |x| y * nx + x)).collect(),
    };
    for start in starts {
        for (i, v) in line.iter_mut().enumerate() {
            *v = data[start + i * stride];
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let j = i as isize + k as isize - radius;
                if let Some(j) = sample_index(j, len, boundary) {
                    acc += t * line[j];
                }
            }
            *o = acc;
        }
        for (i, o) in out.iter().enumerate() {
            data[start + i * stride] = *o;
        }
    }
}

/// Root-sum-square of the effective weights each output sample of a 1D
/// convolution places on the input. Reflected taps that land on the same
/// input add before squaring, so this is the exact standard deviation gain
/// for white noise at every position.
pub fn noise_gain(len: usize, taps: &[f64], boundary: Boundary) -> Vec<f64> {
    let radius = (taps.len() / 2) as isize;
    let mut weights = vec![0.0; len];
    (0..len)
        .map(|i| {
            let mut touched = Vec::with_capacity(taps.len());
            for (k, t) in taps.iter().enumerate() {
                if let Some(j) = sample_index(i as isize + k as isize - radius, len, boundary) {
                    weights[j] += t;
                    touched.push(j);
                }
            }
            let mut sq = 0.0;
            for j in touched {
                sq += weights[j] * weights[j];
                weights[j] = 0.0;
            }
            sq.sqrt()
        })
        .collect()
}

/// Isotropic Gaussian blur of a 3D grid; `sigma` in voxels.
pub fn gaussian_blur_3d(data: &mut [f64], dims: [usize; 3], sigma: f64, boundary: Boundary) {
    let taps = gaussian_kernel(sigma);
    for axis in 0..3 {
        if dims[axis] > 1 {
            convolve_axis(data, dims, axis, &taps, boundary);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.3);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let n = k.len();
        for i in 0..n / 2 {
            assert_eq!(k[i], k[n - 1 - i]);
        }
        assert_eq!(gaussian_kernel(0.0), vec![1.0]);
    }

    #[test]
    fn blur_conserves_interior_mass() {
        let dims = [21, 21, 21];
        let mut g = vec![0.0; 21 * 21 * 21];
        g[10 + 21 * (10 + 21 * 10)] = 1.0;
        gaussian_blur_3d(&mut g, dims, 1.0, Boundary::Zero);
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g[10 + 21 * (10 + 21 * 10)] < 1.0);
    }

    #[test]
    fn noise_gain_interior_matches_kernel_norm() {
        let taps = gaussian_kernel(2.0);
        let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
        let g = noise_gain(64, &taps, Boundary::Reflect);
        assert!((g[32] - norm).abs() < 1e-15);
        // Folded taps stack up on short axes.
        assert!(noise_gain(8, &taps, Boundary::Reflect)[0] > norm);
        assert_eq!(noise_gain(5, &[1.0], Boundary::Zero), vec![1.0; 5]);
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), Some(1));
        assert_eq!(reflect(5, 5), Some(3));
        assert_eq!(reflect(-2, 1), Some(0));
    }
}
