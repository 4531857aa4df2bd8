//! n-dimensional FFT on the periodic box, with a spectrum normalization
//! chosen so the discrete transform approximates the continuous Fourier
//! transform: `spec[k] = h^d sum_j f[j] exp(-2 pi i k.j / n)` and the
//! frequency of index `k` is `wrap(k) / side` per axis.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::grid::{DomainBox, GridFunction};

/// Spectrum of a grid function, indexed like the grid (row-major, axis 0
/// slowest); entry `k` carries frequency [`frequency`].
#[derive(Debug, Clone)]
pub struct Spectrum {
    domain: DomainBox,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn domain(&self) -> DomainBox {
        self.domain
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Physical frequency vector of flat index `k` (signed wrap, cycles
    /// per unit length).
    pub fn frequency(&self, flat: usize) -> Vec<f64> {
        let n = self.domain.samples_per_axis() as i64;
        self.domain
            .multi_index(flat)
            .iter()
            .map(|&i| {
                let s = if (i as i64) < n - n / 2 { i as i64 } else { i as i64 - n };
                s as f64 / self.domain.side()
            })
            .collect()
    }

    /// Euclidean length of [`frequency`](Self::frequency).
    pub fn frequency_norm(&self, flat: usize) -> f64 {
        self.frequency(flat).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest frequency norm on the lattice (attained at the corner).
    pub fn max_frequency_norm(&self) -> f64 {
        let n = self.domain.samples_per_axis() as f64;
        let per_axis = n / 2.0 / self.domain.side();
        per_axis * (self.domain.dim() as f64).sqrt()
    }

    /// Nyquist frequency per axis, `n / (2 side)`.
    pub fn nyquist(&self) -> f64 {
        self.domain.samples_per_axis() as f64 / (2.0 * self.domain.side())
    }
}

fn transform_axes(data: &mut [Complex64], domain: DomainBox, inverse: bool) {
    let n = domain.samples_per_axis();
    let d = domain.dim();
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let lines = data.len() / n;
        for li in 0..lines {
            let outer = li / stride;
            let inner = li % stride;
            let base = outer * stride * n + inner;
            for (i, l) in line.iter_mut().enumerate() {
                *l = data[base + i * stride];
            }
            fft.process(&mut line);
            for (i, l) in line.iter().enumerate() {
                data[base + i * stride] = *l;
            }
        }
    }
}

/// Forward transform: `spec[k] = h^d sum_j f[j] e^{-2 pi i k.j/n}`.
pub fn forward(f: &GridFunction) -> Spectrum {
    let domain = f.domain();
    let mut coeffs = f.values().to_vec();
    transform_axes(&mut coeffs, domain, false);
    let hd = domain.cell_volume();
    for c in &mut coeffs {
        *c *= hd;
    }
    Spectrum { domain, coeffs }
}

/// Inverse of [`forward`]: `f[j] = side^{-d} sum_k spec[k] e^{+2 pi i k.j/n}`.
pub fn inverse(spec: &Spectrum) -> GridFunction {
    let domain = spec.domain;
    let mut values = spec.coeffs.clone();
    transform_axes(&mut values, domain, true);
    let scale = 1.0 / domain.volume();
    for v in &mut values {
        *v *= scale;
    }
    GridFunction::new(domain, values).expect("inverse FFT produced non-finite values")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainBox;

    #[test]
    fn roundtrip_identity() {
        let domain = DomainBox::new(2, 2.0, 8).unwrap();
        let f = GridFunction::from_fn_real(domain, |x| (x[0] - 0.3).sin() + x[1].cos());
        let g = inverse(&forward(&f));
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn mode_lands_on_single_coefficient() {
        let domain = DomainBox::new(2, 1.0, 8).unwrap();
        let k = [3i64, -2];
        let f = GridFunction::fourier_mode(domain, &k, Complex64::new(1.0, 0.0));
        let spec = forward(&f);
        // expected coefficient: amplitude * side^d at index (3, 6)
        let idx = domain.flat_index(&[3, 6]);
        for (flat, c) in spec.coeffs().iter().enumerate() {
            let expect = if flat == idx { domain.volume() } else { 0.0 };
            assert!(
                (c - Complex64::new(expect, 0.0)).norm() < 1e-12,
                "flat {flat}: {c}"
            );
        }
        assert!((spec.frequency_norm(idx) - (13.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn parseval_matches_l2_norm() {
        let domain = DomainBox::new(1, 4.0, 32).unwrap();
        let f = GridFunction::from_fn_real(domain, |x| (2.0 * x[0]).sin() + 0.5 * x[0].cos());
        let spec = forward(&f);
        let freq_l2: f64 = spec.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() / domain.volume();
        let grid_l2 = crate::grid::lp_norm(&f, 2.0).unwrap().powi(2);
        assert!((freq_l2 - grid_l2).abs() < 1e-12 * (1.0 + grid_l2));
    }
}
