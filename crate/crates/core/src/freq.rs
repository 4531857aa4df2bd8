//! Dyadic frequency projections and the norms built from them.
//!
//! The radial low-pass profile `phi_hat` is 1 on `t <= 1`, 0 on `t >= 2`,
//! with a polynomial smoothstep transition; the band profile is
//! `psi_hat(t) = phi_hat(t) - phi_hat(2t)`, supported in `1/2 < t < 2`
//! and equal to 1 exactly at `t = 1`.
//!
//! Index convention: `project_band(f, l)` uses the multiplier
//! `psi_hat(|xi| / 2^l)` (unit response at `|xi| = 2^l`), and
//! `project_below(f, l)` keeps frequencies strictly below `2^l`
//! (multiplier `phi_hat(|xi| / 2^(l-1))`). With these choices the
//! telescoping identity
//! `P_{<l} + sum_{n=0..N} P_{l+n} = P_{<l+N+1}`
//! holds exactly at every lattice frequency.

use crate::fft;
use crate::grid::{DomainBox, GridFunction};
use crate::{Error, Result};

/// Low-pass/band profile pair evaluated radially on the frequency lattice.
#[derive(Debug, Clone, Copy)]
pub struct MollifierPair {
    order: u32,
}

/// Build a profile pair whose transition is the polynomial smoothstep with
/// `order` vanishing derivatives at both ends (so the glued profile is
/// C^order). Orders below 2 are rejected.
pub fn build_mollifiers(order: u32) -> Result<MollifierPair> {
    if order < 2 {
        return Err(Error::InvalidInput(format!(
            "smoothness order must be at least 2, got {order}"
        )));
    }
    if order > 12 {
        return Err(Error::InvalidInput(format!(
            "smoothness order {order} too large; coefficients lose accuracy beyond 12"
        )));
    }
    Ok(MollifierPair { order })
}

impl Default for MollifierPair {
    fn default() -> Self {
        MollifierPair { order: 4 }
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Smoothstep of order `n`: maps [0,1] to [0,1] with n vanishing
/// derivatives at both endpoints.
pub(crate) fn smoothstep_profile(n: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let n = n as u64;
    let mut acc = 0.0;
    for k in 0..=n {
        let c = binomial(n + k, k) * binomial(2 * n + 1, n - k);
        acc += c * (-x).powi(k as i32);
    }
    acc * x.powi(n as i32 + 1)
}

impl MollifierPair {
    pub fn order(&self) -> u32 {
        self.order
    }

    /// Radial low-pass profile: 1 on `t <= 1`, 0 on `t >= 2`.
    pub fn phi_hat(&self, t: f64) -> f64 {
        let t = t.abs();
        if t <= 1.0 {
            1.0
        } else if t >= 2.0 {
            0.0
        } else {
            smoothstep_profile(self.order, 2.0 - t)
        }
    }

    /// Band profile `phi_hat(t) - phi_hat(2t)`, supported in `1/2 < t < 2`.
    pub fn psi_hat(&self, t: f64) -> f64 {
        self.phi_hat(t) - self.phi_hat(2.0 * t)
    }

    /// Multiplier of `P_{<l}` at radial frequency `r`.
    pub fn below_multiplier(&self, l: i64, r: f64) -> f64 {
        self.phi_hat(r * exp2_i(-(l - 1)))
    }

    /// Multiplier of `P_l` at radial frequency `r`.
    pub fn band_multiplier(&self, l: i64, r: f64) -> f64 {
        self.psi_hat(r * exp2_i(-l))
    }
}

#[inline]
pub(crate) fn exp2_i(l: i64) -> f64 {
    (l as f64).exp2()
}

/// How much of the dyadic band `l` the frequency lattice covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandCoverage {
    /// The support annulus lies inside the axis Nyquist box.
    Full,
    /// Part of the annulus sticks out past the Nyquist box.
    Truncated,
    /// No lattice frequency lies in the support annulus.
    Empty,
}

/// Coverage of band `l` (support `2^(l-1) < |xi| < 2^(l+1)`) by the grid.
pub fn band_coverage(domain: &DomainBox, l: i64) -> BandCoverage {
    let nyquist = domain.samples_per_axis() as f64 / (2.0 * domain.side());
    let corner = nyquist * (domain.dim() as f64).sqrt();
    let lo = exp2_i(l - 1);
    let hi = exp2_i(l + 1);
    if lo >= corner {
        BandCoverage::Empty
    } else if hi <= nyquist {
        BandCoverage::Full
    } else {
        BandCoverage::Truncated
    }
}

/// Largest band index with any lattice support.
pub fn max_band(domain: &DomainBox) -> i64 {
    let nyquist = domain.samples_per_axis() as f64 / (2.0 * domain.side());
    let corner = nyquist * (domain.dim() as f64).sqrt();
    // smallest l with 2^(l-1) >= corner, minus one
    (corner.log2().ceil() as i64 + 1) - 1
}

fn apply_radial_multiplier(f: &GridFunction, mult: impl Fn(f64) -> f64) -> GridFunction {
    let mut spec = fft::forward(f);
    for flat in 0..spec.coeffs().len() {
        let r = spec.frequency_norm(flat);
        let m = mult(r);
        spec.coeffs_mut()[flat] *= m;
    }
    fft::inverse(&spec)
}

/// Low-pass projection `P_{<l}`. The boolean is a saturation flag: true
/// when the multiplier is identically 1 on the lattice, in which case the
/// input is returned unchanged.
pub fn project_below(
    f: &GridFunction,
    m: &MollifierPair,
    l: i64,
) -> Result<(GridFunction, bool)> {
    f.check_finite()?;
    let spec_probe = fft::forward(&GridFunction::zero(f.domain()));
    let corner = spec_probe.max_frequency_norm();
    // multiplier is 1 wherever |xi| <= 2^(l-1); saturated if that covers the corner
    if corner <= exp2_i(l - 1) {
        return Ok((f.clone(), true));
    }
    Ok((
        apply_radial_multiplier(f, |r| m.below_multiplier(l, r)),
        false,
    ))
}

/// Band projection `P_l`. The boolean flags an empty band (output is the
/// zero function because the support annulus misses the lattice).
pub fn project_band(f: &GridFunction, m: &MollifierPair, l: i64) -> Result<(GridFunction, bool)> {
    f.check_finite()?;
    let empty = band_coverage(&f.domain(), l) == BandCoverage::Empty;
    if empty {
        return Ok((GridFunction::zero(f.domain()), true));
    }
    Ok((apply_radial_multiplier(f, |r| m.band_multiplier(l, r)), false))
}

/// Besov norm value together with the band at which the dyadic sum was
/// truncated by the grid resolution.
#[derive(Debug, Clone, Copy)]
pub struct BesovNorm {
    pub value: f64,
    /// Largest band index included in the sum.
    pub truncation_band: i64,
}

/// `||P_{<1} f||_p + (sum_{l>=1} 2^{lsq} ||P_l f||_p^q)^{1/q}`, truncated
/// at the last band the lattice supports; `q = inf` takes the sup.
pub fn besov_norm(f: &GridFunction, m: &MollifierPair, s: f64, p: f64, q: f64) -> Result<BesovNorm> {
    if !(q > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Besov fine index must be positive or infinity, got {q}"
        )));
    }
    let lmax = max_band(&f.domain()).max(1);
    let (low, _) = project_below(f, m, 1)?;
    let mut value = crate::grid::lp_norm(&low, p)?;
    if q == f64::INFINITY {
        let mut sup = 0.0f64;
        for l in 1..=lmax {
            let (band, _) = project_band(f, m, l)?;
            sup = sup.max(exp2_i(l).powf(s) * crate::grid::lp_norm(&band, p)?);
        }
        value += sup;
    } else {
        let mut acc = 0.0f64;
        for l in 1..=lmax {
            let (band, _) = project_band(f, m, l)?;
            let term = exp2_i(l).powf(s) * crate::grid::lp_norm(&band, p)?;
            acc += term.powf(q);
        }
        value += acc.powf(1.0 / q);
    }
    Ok(BesovNorm {
        value,
        truncation_band: lmax,
    })
}

/// Bessel-potential norm on the frequency lattice,
/// `(sum_k (1+|xi_k|^2)^s |fhat_k|^2 / side^d)^(1/2)`; only `p = 2` is
/// supported (the Hilbert case is the one the smoothing estimates need).
pub fn sobolev_norm(f: &GridFunction, s: f64, p: f64) -> Result<f64> {
    if p != 2.0 {
        return Err(Error::Unsupported(format!(
            "Bessel potential norm implemented for p = 2 only, got p = {p}"
        )));
    }
    f.check_finite()?;
    let spec = fft::forward(f);
    let vol = f.domain().volume();
    let mut acc = 0.0f64;
    for (flat, c) in spec.coeffs().iter().enumerate() {
        let r2 = {
            let fr = spec.frequency(flat);
            fr.iter().map(|x| x * x).sum::<f64>()
        };
        acc += (1.0 + r2).powf(s) * c.norm_sqr();
    }
    Ok((acc / vol).sqrt())
}
