use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Real;

/// Weight initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// Zero-mean gaussian with the given standard deviation.
    Normal(f64),
    /// Zero-mean gaussian with std `sqrt(2 / ((1 + slope^2) * fan_in))`,
    /// `slope` being the negative slope of the following (leaky) ReLU.
    He { slope: f64 },
    /// Bilinear interpolation kernel on matching input/output channels,
    /// zero elsewhere. Only meaningful for transposed convolutions.
    Bilinear,
}

impl Init {
    /// Fills a `[a, b, k, k]` weight. `fan_in` is used by `He`;
    /// `Bilinear` places the kernel on the diagonal of the first two axes.
    pub fn weights<T: Real, R: Rng + ?Sized>(
        self,
        shape: [usize; 4],
        fan_in: usize,
        rng: &mut R,
    ) -> Vec<T> {
        let len = shape.iter().product();
        match self {
            Init::Zeros => vec![T::zero(); len],
            Init::Normal(std) => gaussian(len, std, rng),
            Init::He { slope } => {
                let std = (2.0 / ((1.0 + slope * slope) * fan_in.max(1) as f64)).sqrt();
                gaussian(len, std, rng)
            }
            Init::Bilinear => {
                let [a, b, k, k2] = shape;
                assert_eq!(k, k2, "bilinear kernel must be square");
                let kernel = bilinear_kernel(k);
                let mut w = vec![T::zero(); len];
                for i in 0..a.min(b) {
                    let base = (i * b + i) * k * k;
                    for (dst, &v) in w[base..base + k * k].iter_mut().zip(&kernel) {
                        *dst = T::of(v);
                    }
                }
                w
            }
        }
    }
}

fn gaussian<T: Real, R: Rng + ?Sized>(len: usize, std: f64, rng: &mut R) -> Vec<T> {
    if std == 0.0 {
        return vec![T::zero(); len];
    }
    let normal = Normal::new(0.0, std).expect("std is finite and positive");
    (0..len).map(|_| T::of(normal.sample(rng))).collect()
}

/// `k x k` separable bilinear upsampling filter (row-major).
pub(crate) fn bilinear_kernel(k: usize) -> Vec<f64> {
    let factor = k.div_ceil(2) as f64;
    let center = if k % 2 == 1 {
        factor - 1.0
    } else {
        factor - 0.5
    };
    let tap = |i: usize| 1.0 - (i as f64 - center).abs() / factor;
    let mut out = Vec::with_capacity(k * k);
    for y in 0..k {
        for x in 0..k {
            out.push(tap(y) * tap(x));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_kernel_of_size_four() {
        let k = bilinear_kernel(4);
        let taps = [0.25, 0.75, 0.75, 0.25];
        for y in 0..4 {
            for x in 0..4 {
                assert!((k[y * 4 + x] - taps[y] * taps[x]).abs() < 1e-12);
            }
        }
    }
}
