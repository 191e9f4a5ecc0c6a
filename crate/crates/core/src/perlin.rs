//! Improved Perlin gradient noise in two and three dimensions.

use rand::seq::SliceRandom;
use rand::Rng;

/// Seeded permutation table. Noise is zero on integer lattice points and
/// roughly within `[-1, 1]` elsewhere.
#[derive(Debug, Clone)]
pub struct Perlin {
    perm: [u8; 512],
}

impl Perlin {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut p: Vec<u8> = (0..=255).collect();
        p.shuffle(rng);
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = p[i & 255];
        }
        Self { perm }
    }

    #[inline]
    fn hash(&self, i: usize) -> usize {
        self.perm[i & 511] as usize
    }

    pub fn noise2(&self, x: f64, y: f64) -> f64 {
        let (xf, yf) = (x.floor(), y.floor());
        let (xi, yi) = ((xf as i64 & 255) as usize, (yf as i64 & 255) as usize);
        let (x, y) = (x - xf, y - yf);
        let (u, v) = (fade(x), fade(y));
        let aa = self.hash(self.hash(xi) + yi);
        let ab = self.hash(self.hash(xi) + yi + 1);
        let ba = self.hash(self.hash(xi + 1) + yi);
        let bb = self.hash(self.hash(xi + 1) + yi + 1);
        let x1 = lerp(grad2(aa, x, y), grad2(ba, x - 1.0, y), u);
        let x2 = lerp(grad2(ab, x, y - 1.0), grad2(bb, x - 1.0, y - 1.0), u);
        lerp(x1, x2, v)
    }

    pub fn noise3(&self, x: f64, y: f64, z: f64) -> f64 {
        let (xf, yf, zf) = (x.floor(), y.floor(), z.floor());
        let xi = (xf as i64 & 255) as usize;
        let yi = (yf as i64 & 255) as usize;
        let zi = (zf as i64 & 255) as usize;
        let (x, y, z) = (x - xf, y - yf, z - zf);
        let (u, v, w) = (fade(x), fade(y), fade(z));
        let a = self.hash(xi) + yi;
        let aa = self.hash(a) + zi;
        let ab = self.hash(a + 1) + zi;
        let b = self.hash(xi + 1) + yi;
        let ba = self.hash(b) + zi;
        let bb = self.hash(b + 1) + zi;
        lerp(
            lerp(
                lerp(grad3(self.hash(aa), x, y, z), grad3(self.hash(ba), x - 1.0, y, z), u),
                lerp(grad3(self.hash(ab), x, y - 1.0, z), grad3(self.hash(bb), x - 1.0, y - 1.0, z), u),
                v,
            ),
            lerp(
                lerp(grad3(self.hash(aa + 1), x, y, z - 1.0), grad3(self.hash(ba + 1), x - 1.0, y, z - 1.0), u),
                lerp(
                    grad3(self.hash(ab + 1), x, y - 1.0, z - 1.0),
                    grad3(self.hash(bb + 1), x - 1.0, y - 1.0, z - 1.0),
                    u,
                ),
                v,
            ),
            w,
        )
    }
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

#[inline]
fn grad2(hash: usize, x: f64, y: f64) -> f64 {
    // Eight unit-ish directions.
    match hash & 7 {
        0 => x + y,
        1 => -x + y,
        2 => x - y,
        3 => -x - y,
        4 => x,
        5 => -x,
        6 => y,
        _ => -y,
    }
}

#[inline]
fn grad3(hash: usize, x: f64, y: f64, z: f64) -> f64 {
    let h = hash & 15;
    let u = if h < 8 { x } else { y };
    let v = if h < 4 {
        y
    } else if h == 12 || h == 14 {
        x
    } else {
        z
    };
    (if h & 1 == 0 { u } else { -u }) + (if h & 2 == 0 { v } else { -v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_on_lattice_and_bounded() {
        let p = Perlin::new(&mut stream(1, "perlin", 0));
        assert_eq!(p.noise2(3.0, 7.0), 0.0);
        assert_eq!(p.noise3(3.0, 7.0, -2.0), 0.0);
        let mut max2: f64 = 0.0;
        let mut max3: f64 = 0.0;
        for i in 0..20_000 {
            let t = i as f64 * 0.1371;
            max2 = max2.max(p.noise2(t, t * 0.61 + 3.3).abs());
            max3 = max3.max(p.noise3(t, t * 0.37, t * 0.73 - 1.1).abs());
        }
        assert!(max2 <= 1.5 && max2 > 0.2, "{max2}");
        assert!(max3 <= 1.5 && max3 > 0.2, "{max3}");
    }

    #[test]
    fn seeded() {
        let a = Perlin::new(&mut stream(5, "perlin", 0));
        let b = Perlin::new(&mut stream(5, "perlin", 0));
        assert_eq!(a.noise3(0.3, 0.4, 0.5), b.noise3(0.3, 0.4, 0.5));
    }
}
