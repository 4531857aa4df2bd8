//! Off-grid evaluation of grid functions: separable periodic cubic
//! (Catmull-Rom) interpolation, and band-limited upsampling by spectrum
//! zero-padding for validation paths.

use num_complex::Complex64;

use crate::fft;
use crate::grid::{DomainBox, GridFunction};
use crate::{Error, Result};

/// Catmull-Rom weights for fractional offset `t` in `[0,1)` relative to
/// the second of four consecutive samples.
#[inline]
fn catmull_rom_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Per-axis stencil (four wrapped indices and weights) for one coordinate.
#[inline]
fn axis_stencil(coord: f64, h: f64, n: usize) -> ([usize; 4], [f64; 4]) {
    let u = coord / h;
    let i0 = u.floor();
    let t = u - i0;
    let base = i0 as i64;
    let n_i = n as i64;
    let idx = [
        (base - 1).rem_euclid(n_i) as usize,
        base.rem_euclid(n_i) as usize,
        (base + 1).rem_euclid(n_i) as usize,
        (base + 2).rem_euclid(n_i) as usize,
    ];
    (idx, catmull_rom_weights(t))
}

/// Evaluate `f` at an arbitrary physical point by separable periodic
/// cubic interpolation (4^d taps).
pub fn cubic_eval(f: &GridFunction, point: &[f64]) -> Complex64 {
    let domain = f.domain();
    let d = domain.dim();
    debug_assert_eq!(point.len(), d);
    let h = domain.spacing();
    let n = domain.samples_per_axis();

    let mut stencils = Vec::with_capacity(d);
    for &c in point {
        stencils.push(axis_stencil(c, h, n));
    }

    // iterate over the 4^d tap combinations with an odometer
    let taps = 1usize << (2 * d);
    let mut acc = Complex64::new(0.0, 0.0);
    for tap in 0..taps {
        let mut flat = 0usize;
        let mut w = 1.0f64;
        let mut rem = tap;
        for (idx, weights) in &stencils {
            let pick = rem & 3;
            rem >>= 2;
            flat = flat * n + idx[pick];
            w *= weights[pick];
        }
        acc += f.values()[flat] * w;
    }
    acc
}

/// Band-limited upsample by an integer factor via spectrum zero-padding.
/// Exact on the trigonometric interpolant of the samples; used by
/// validation oracles.
pub fn upsample(f: &GridFunction, factor: usize) -> Result<GridFunction> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "upsample factor must be a positive power of two, got {factor}"
        )));
    }
    let domain = f.domain();
    let n = domain.samples_per_axis();
    let fine = DomainBox::new(domain.dim(), domain.side(), n * factor)?;
    let spec = fft::forward(f);
    let mut padded = vec![Complex64::new(0.0, 0.0); fine.cells()];
    let nf = fine.samples_per_axis();
    for (flat, c) in spec.coeffs().iter().enumerate() {
        let idx = domain.multi_index(flat);
        // map signed frequency index into the fine lattice; split the
        // Nyquist row evenly to keep real inputs real
        let mut targets: Vec<Vec<(usize, f64)>> = Vec::with_capacity(idx.len());
        for &i in &idx {
            let signed = if (i as i64) < (n as i64 - n as i64 / 2) {
                i as i64
            } else {
                i as i64 - n as i64
            };
            if signed == -(n as i64) / 2 {
                targets.push(vec![
                    (signed.rem_euclid(nf as i64) as usize, 0.5),
                    ((-signed).rem_euclid(nf as i64) as usize, 0.5),
                ]);
            } else {
                targets.push(vec![(signed.rem_euclid(nf as i64) as usize, 1.0)]);
            }
        }
        // expand the per-axis splits
        let mut combos: Vec<(usize, f64)> = vec![(0, 1.0)];
        for axis_targets in &targets {
            let mut next = Vec::with_capacity(combos.len() * axis_targets.len());
            for &(flat_acc, w_acc) in &combos {
                for &(i, w) in axis_targets {
                    next.push((flat_acc * nf + i, w_acc * w));
                }
            }
            combos = next;
        }
        for (tflat, w) in combos {
            padded[tflat] += c * w;
        }
    }
    let spec_fine = {
        let mut s = fft::forward(&GridFunction::zero(fine));
        s.coeffs_mut().copy_from_slice(&padded);
        s
    };
    Ok(fft::inverse(&spec_fine))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_reproduces_samples() {
        let domain = DomainBox::new(2, 1.0, 16).unwrap();
        let f = GridFunction::from_fn_real(domain, |x| {
            (2.0 * std::f64::consts::PI * x[0]).sin() + x[1]
        });
        let h = domain.spacing();
        for flat in [0usize, 5, 100, 255] {
            let idx = domain.multi_index(flat);
            let p: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
            let v = cubic_eval(&f, &p);
            assert!((v - f.values()[flat]).norm() < 1e-13);
        }
    }

    #[test]
    fn cubic_accurate_on_smooth_function() {
        let domain = DomainBox::new(1, 1.0, 64).unwrap();
        let f = GridFunction::from_fn_real(domain, |x| {
            (2.0 * std::f64::consts::PI * x[0]).cos()
        });
        let v = cubic_eval(&f, &[0.51234]);
        let expect = (2.0 * std::f64::consts::PI * 0.51234).cos();
        assert!((v.re - expect).abs() < 1e-5);
    }

    #[test]
    fn upsample_preserves_modes() {
        let domain = DomainBox::new(1, 1.0, 16).unwrap();
        let f = GridFunction::fourier_mode(domain, &[3], Complex64::new(1.0, 0.5));
        let g = upsample(&f, 4).unwrap();
        let fine = g.domain();
        let h = fine.spacing();
        for flat in 0..fine.cells() {
            let x = flat as f64 * h;
            let phase = 2.0 * std::f64::consts::PI * 3.0 * x;
            let expect = Complex64::new(1.0, 0.5) * Complex64::new(phase.cos(), phase.sin());
            assert!((g.values()[flat] - expect).norm() < 1e-11);
        }
    }

    #[test]
    fn upsample_keeps_real_data_real() {
        let domain = DomainBox::new(2, 1.0, 8).unwrap();
        let f = GridFunction::from_fn_real(domain, |x| {
            (2.0 * std::f64::consts::PI * 4.0 * x[0]).cos() * x[1]
        });
        let g = upsample(&f, 2).unwrap();
        for v in g.values() {
            assert!(v.im.abs() < 1e-11);
        }
    }
}
