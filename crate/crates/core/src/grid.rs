//! Sampled complex-valued functions on a periodic box, with Lebesgue and
//! weak-Lebesgue norms, level-set measures, and the discrete
//! Hardy-Littlewood maximal function.
//!
//! Samples live at the lattice points `x_j = j * h`, `h = side / n`, in
//! row-major axis order (axis 0 slowest). Cell `j` is the half-open cube
//! of side `h` around its lattice point, so integrals are plain cell sums
//! scaled by `h^d`.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::{Error, Result};

/// Periodic box: dimension, physical side length, samples per axis.
///
/// `n` must be a power of two so that dyadic cubes align with cells and
/// the radix-2 FFT applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBox {
    dim: usize,
    side: f64,
    n: usize,
}

impl DomainBox {
    pub fn new(dim: usize, side: f64, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::InvalidInput(format!(
                "side length must be a positive finite real, got {side}"
            )));
        }
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "samples per axis must be a positive power of two, got {n}"
            )));
        }
        Ok(DomainBox { dim, side, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn samples_per_axis(&self) -> usize {
        self.n
    }

    /// Grid spacing `h = side / n`.
    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    /// Total cell count `n^d`.
    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Box volume `side^d`.
    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Row-major flat index of a multi-index (axis 0 slowest).
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        let mut flat = 0;
        for &i in idx {
            debug_assert!(i < self.n);
            flat = flat * self.n + i;
        }
        flat
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    /// Physical coordinates of the lattice point of cell `idx`.
    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        let h = self.spacing();
        idx.iter().map(|&i| i as f64 * h).collect()
    }
}

/// Complex samples on a [`DomainBox`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: DomainBox,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(domain: DomainBox, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.cells() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                domain.cells(),
                values.len()
            )));
        }
        let f = GridFunction { domain, values };
        f.check_finite()?;
        Ok(f)
    }

    pub fn zero(domain: DomainBox) -> Self {
        GridFunction {
            domain,
            values: vec![Complex64::new(0.0, 0.0); domain.cells()],
        }
    }

    pub fn constant(domain: DomainBox, c: Complex64) -> Self {
        GridFunction {
            domain,
            values: vec![c; domain.cells()],
        }
    }

    /// Sample a real function of the lattice coordinates.
    pub fn from_fn_real(domain: DomainBox, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(domain.cells());
        for flat in 0..domain.cells() {
            let x = domain.point(&domain.multi_index(flat));
            values.push(Complex64::new(f(&x), 0.0));
        }
        GridFunction { domain, values }
    }

    /// Pure Fourier mode `exp(2 pi i k.x / side)` for integer wave vector `k`.
    pub fn fourier_mode(domain: DomainBox, k: &[i64], amplitude: Complex64) -> Self {
        assert_eq!(k.len(), domain.dim());
        let n = domain.samples_per_axis() as i64;
        let mut values = Vec::with_capacity(domain.cells());
        for flat in 0..domain.cells() {
            let idx = domain.multi_index(flat);
            let mut phase_num = 0i64;
            for (a, &i) in idx.iter().enumerate() {
                phase_num += (k[a].rem_euclid(n)) * i as i64;
            }
            let phase = 2.0 * std::f64::consts::PI * (phase_num % n) as f64 / n as f64;
            values.push(amplitude * Complex64::new(phase.cos(), phase.sin()));
        }
        GridFunction { domain, values }
    }

    pub fn domain(&self) -> DomainBox {
        self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite(i));
            }
        }
        Ok(())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        GridFunction {
            domain: self.domain,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::InvalidInput("domain mismatch".into()));
        }
        Ok(GridFunction {
            domain: self.domain,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Pointwise modulus as a real-valued grid function.
    pub fn abs(&self) -> Self {
        GridFunction {
            domain: self.domain,
            values: self
                .values
                .iter()
                .map(|v| Complex64::new(v.norm(), 0.0))
                .collect(),
        }
    }

    /// Translate by a whole-cell vector (periodic index shift):
    /// output(x) = input(x - shift*h).
    pub fn translate_cells(&self, shift: &[i64]) -> Self {
        assert_eq!(shift.len(), self.domain.dim());
        let n = self.domain.samples_per_axis() as i64;
        let mut values = vec![Complex64::new(0.0, 0.0); self.values.len()];
        for flat in 0..self.values.len() {
            let idx = self.domain.multi_index(flat);
            let src: Vec<usize> = idx
                .iter()
                .zip(shift)
                .map(|(&i, &s)| (i as i64 - s).rem_euclid(n) as usize)
                .collect();
            values[flat] = self.values[self.domain.flat_index(&src)];
        }
        GridFunction {
            domain: self.domain,
            values,
        }
    }
}

/// `L^p` norm by midpoint quadrature: `(sum |f|^p h^d)^(1/p)`; `p = inf`
/// gives the max of `|f|`. Pass `f64::INFINITY` for the sup norm.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    f.check_finite()?;
    if p == f64::INFINITY {
        return Ok(f.values().iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidInput(format!(
            "Lebesgue exponent must be positive or infinity, got {p}"
        )));
    }
    let hd = f.domain().cell_volume();
    let mut sum = 0.0;
    for v in f.values() {
        sum += v.norm().powf(p);
    }
    Ok((sum * hd).powf(1.0 / p))
}

/// Weak-`L^p` quasinorm `sup_l l * meas{|f| > l}^(1/p)`, computed exactly
/// by sorting sample magnitudes: the sup is attained as the level
/// approaches a sample value from below.
pub fn weak_lp_quasinorm(f: &GridFunction, p: f64) -> Result<f64> {
    f.check_finite()?;
    if !(p > 0.0) {
        return Err(Error::InvalidInput(format!(
            "weak-Lp exponent must be positive, got {p}"
        )));
    }
    let hd = f.domain().cell_volume();
    let mut mags: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut best = 0.0f64;
    for (k, m) in mags.iter().enumerate() {
        // Level just below mags[k]: the super-level set holds k+1 cells.
        let candidate = m * (((k + 1) as f64) * hd).powf(1.0 / p);
        best = best.max(candidate);
    }
    Ok(best)
}

/// Measure of the strict super-level set `{ |f| > level }`.
pub fn level_set_measure(f: &GridFunction, level: f64) -> f64 {
    let hd = f.domain().cell_volume();
    let count = f.values().iter().filter(|v| v.norm() > level).count();
    count as f64 * hd
}

/// Discrete window half-width in cells for a physical radius: cells whose
/// lattice offset satisfies `|o| * h < r` strictly, so that radius `h`
/// means the cell itself.
fn window_halfwidth(r: f64, h: f64) -> usize {
    let w = (r / h).ceil() - 1.0;
    if w < 0.0 {
        0
    } else {
        w as usize
    }
}

/// Hardy-Littlewood maximal function restricted to the given radii:
/// pointwise sup over radii of averages of `|f|` over periodic cubes.
pub fn hl_maximal(f: &GridFunction, radii: &[f64]) -> Result<GridFunction> {
    f.check_finite()?;
    let domain = f.domain();
    if radii.is_empty() {
        return Err(Error::InvalidInput("radii list must be nonempty".into()));
    }
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::InvalidInput(format!("radius must be positive, got {r}")));
        }
        if r > domain.side() / 2.0 {
            return Err(Error::InvalidInput(format!(
                "radius {r} exceeds half the box side {}; periodic wraparound would double-count",
                domain.side() / 2.0
            )));
        }
    }
    let h = domain.spacing();
    let n = domain.samples_per_axis();
    let d = domain.dim();
    let mags: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();

    // One periodic prefix-sum pass per axis turns window sums into O(1)
    // lookups per cell; rebuild per radius is cheap next to the lookups.
    let mut out = vec![0.0f64; mags.len()];
    let mut widths: Vec<usize> = radii.iter().map(|&r| window_halfwidth(r, h)).collect();
    widths.sort_unstable();
    widths.dedup();
    for &w in &widths {
        let window_cells = (2 * w + 1).pow(d as u32) as f64;
        let sums = periodic_window_sums(&mags, n, d, w);
        for (o, s) in out.iter_mut().zip(&sums) {
            *o = o.max(s / window_cells);
        }
    }
    Ok(GridFunction {
        domain,
        values: out.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    })
}

/// Sum of a real field over the periodic cube window of half-width `w`
/// cells around each cell, via separable sliding sums axis by axis.
fn periodic_window_sums(vals: &[f64], n: usize, d: usize, w: usize) -> Vec<f64> {
    let mut cur = vals.to_vec();
    let mut line = vec![0.0f64; n];
    for axis in 0..d {
        // stride of this axis in the row-major layout
        let stride = n.pow((d - 1 - axis) as u32);
        let lines = cur.len() / n;
        let mut next = vec![0.0f64; cur.len()];
        for li in 0..lines {
            // base flat index of the line: decompose li over remaining axes
            let outer = li / stride;
            let inner = li % stride;
            let base = outer * stride * n + inner;
            for (i, l) in line.iter_mut().enumerate() {
                *l = cur[base + i * stride];
            }
            for i in 0..n {
                let mut s = 0.0;
                for o in -(w as i64)..=(w as i64) {
                    s += line[(i as i64 + o).rem_euclid(n as i64) as usize];
                }
                next[base + i * stride] = s;
            }
        }
        cur = next;
    }
    cur
}

const MAGIC_HEADER_LEN: usize = 16;

/// Binary layout: 16-byte header (`d: u32 LE`, `n: u32 LE`, `side: f64 LE`)
/// followed by `n^d` little-endian `(re, im)` f64 pairs in row-major order.
pub fn write_binary<W: Write>(f: &GridFunction, mut w: W) -> Result<()> {
    let domain = f.domain();
    w.write_all(&(domain.dim() as u32).to_le_bytes())?;
    w.write_all(&(domain.samples_per_axis() as u32).to_le_bytes())?;
    w.write_all(&domain.side().to_le_bytes())?;
    for v in f.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<GridFunction> {
    let mut header = [0u8; MAGIC_HEADER_LEN];
    r.read_exact(&mut header)?;
    let dim = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let side = f64::from_le_bytes(header[8..16].try_into().unwrap());
    let domain = DomainBox::new(dim, side, n)?;
    let mut buf = vec![0u8; domain.cells() * 16];
    r.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    GridFunction::new(domain, values)
}

/// CSV export (index coordinates, re, im per row), intended for small grids.
pub fn write_csv<W: Write>(f: &GridFunction, mut w: W) -> Result<()> {
    let domain = f.domain();
    let mut header: Vec<String> = (0..domain.dim()).map(|a| format!("i{a}")).collect();
    header.push("re".into());
    header.push("im".into());
    writeln!(w, "{}", header.join(","))?;
    for (flat, v) in f.values().iter().enumerate() {
        let idx = domain.multi_index(flat);
        let mut row: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        row.push(format!("{:.17e}", v.re));
        row.push(format!("{:.17e}", v.im));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
