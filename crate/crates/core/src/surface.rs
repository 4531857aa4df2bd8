//! Quadrature discretizations of normalized surface measures (circles,
//! spheres, graph patches, product-embedded spheres), their Fourier
//! transforms and decay diagnostics, and rotation families with the
//! simplex-type transversality check.

use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::exact::{RatMat, Subspace};
use crate::util::{linear_fit, CompensatedSum, CompensatedSumC};
use crate::{Error, Result};

/// What kind of surface a quadrature discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceLabel {
    Sphere,
    Graph,
    /// Sphere in R^(m*d) whose nodes split into `factors` blocks of
    /// dimension `block_dim`.
    ProductSphere { factors: usize, block_dim: usize },
}

/// Weighted node set discretizing a normalized surface measure.
///
/// Invariant: weights are positive and sum to 1.
#[derive(Debug, Clone)]
pub struct SurfaceQuadrature {
    ambient: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    curvature_rank: usize,
    label: SurfaceLabel,
}

impl SurfaceQuadrature {
    fn new(
        ambient: usize,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        curvature_rank: usize,
        label: SurfaceLabel,
    ) -> Result<Self> {
        if nodes.len() != weights.len() * ambient {
            return Err(Error::InvalidInput("node/weight count mismatch".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("weights must be positive".into()));
        }
        let mut total = CompensatedSum::new();
        for &w in &weights {
            total.add(w);
        }
        if (total.value() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {}, expected 1 (normalized measure)",
                total.value()
            )));
        }
        if curvature_rank == 0 || curvature_rank > ambient.saturating_sub(1) {
            return Err(Error::InvalidInput(format!(
                "curvature rank {curvature_rank} outside 1..={}",
                ambient - 1
            )));
        }
        Ok(SurfaceQuadrature {
            ambient,
            nodes,
            weights,
            curvature_rank,
            label,
        })
    }

    /// Assemble a quadrature from raw parts (validates the invariants).
    pub(crate) fn from_raw_parts(
        ambient: usize,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        curvature_rank: usize,
        label: SurfaceLabel,
    ) -> Result<Self> {
        SurfaceQuadrature::new(ambient, nodes, weights, curvature_rank, label)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.ambient..(i + 1) * self.ambient]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn curvature_rank(&self) -> usize {
        self.curvature_rank
    }

    pub fn label(&self) -> SurfaceLabel {
        self.label
    }

    /// Surface diameter used by box-size guards: exact for unit spheres,
    /// bounding-box diagonal (conservative) for graph patches.
    pub fn diameter(&self) -> f64 {
        match self.label {
            SurfaceLabel::Sphere | SurfaceLabel::ProductSphere { .. } => 2.0,
            SurfaceLabel::Graph => self.bbox_diagonal(),
        }
    }

    fn bbox_diagonal(&self) -> f64 {
        let mut lo = vec![f64::INFINITY; self.ambient];
        let mut hi = vec![f64::NEG_INFINITY; self.ambient];
        for i in 0..self.len() {
            for (a, &x) in self.node(i).iter().enumerate() {
                lo[a] = lo[a].min(x);
                hi[a] = hi[a].max(x);
            }
        }
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Weighted centroid (should be near zero for centered surfaces).
    pub fn centroid(&self) -> Vec<f64> {
        let mut acc = vec![CompensatedSum::new(); self.ambient];
        for i in 0..self.len() {
            let w = self.weights[i];
            for (a, &x) in self.node(i).iter().enumerate() {
                acc[a].add(w * x);
            }
        }
        acc.iter().map(|s| s.value()).collect()
    }

    /// Largest dependable `|xi|` for this quadrature's `surface_ft`;
    /// beyond it node spacing under-resolves the oscillation.
    pub fn max_reliable_radius(&self) -> f64 {
        let m = self.len() as f64;
        let intrinsic_dim = match self.label {
            SurfaceLabel::Sphere | SurfaceLabel::ProductSphere { .. } => self.ambient - 1,
            SurfaceLabel::Graph => self.curvature_rank.max(1),
        };
        // ~1/spacing with an 8x safety margin; spacing ~ m^(-1/dim)
        m.powf(1.0 / intrinsic_dim as f64) / 8.0
    }
}

const GOLDEN_ANGLE: f64 = 2.399963229728653; // pi * (3 - sqrt 5)

fn circle_nodes(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(2 * m);
    for i in 0..m {
        let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
        nodes.push(th.cos());
        nodes.push(th.sin());
    }
    (nodes, vec![1.0 / m as f64; m])
}

/// Deterministic spiral placement on S^2 with equal weights.
fn spiral_sphere_nodes(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(3 * m);
    for i in 0..m {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = GOLDEN_ANGLE * i as f64;
        nodes.push(r * phi.cos());
        nodes.push(r * phi.sin());
        nodes.push(z);
    }
    (nodes, vec![1.0 / m as f64; m])
}

/// Radical-inverse (van der Corput) value of index `i` in the given base.
fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut x = 0.0;
    while i > 0 {
        x += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    x
}

/// Low-discrepancy placement on S^3 via Hopf coordinates and a Halton
/// sequence, symmetrized so every node's antipode is also a node.
fn hopf_s3_nodes(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if m % 2 != 0 {
        return Err(Error::InvalidInput(
            "S^3 node count must be even (antipodally symmetrized)".into(),
        ));
    }
    let half = m / 2;
    let mut nodes = Vec::with_capacity(4 * m);
    for i in 0..half {
        let u = radical_inverse(i + 1, 2);
        let v = radical_inverse(i + 1, 3);
        let w = radical_inverse(i + 1, 5);
        let eta = u.sqrt().asin();
        let xi1 = 2.0 * std::f64::consts::PI * v;
        let xi2 = 2.0 * std::f64::consts::PI * w;
        let p = [
            eta.cos() * xi1.cos(),
            eta.cos() * xi1.sin(),
            eta.sin() * xi2.cos(),
            eta.sin() * xi2.sin(),
        ];
        nodes.extend_from_slice(&p);
        nodes.extend(p.iter().map(|x| -x));
    }
    Ok((nodes, vec![1.0 / m as f64; m]))
}

/// Quadrature for the normalized measure on the unit sphere S^(d-1).
///
/// d = 2 uses uniform angles; d = 3 a deterministic spiral; both with
/// equal weights 1/M.
pub fn sphere_quadrature(d: usize, m: usize) -> Result<SurfaceQuadrature> {
    if m < 16 {
        return Err(Error::InvalidInput(format!(
            "node count {m} too small; need at least 16"
        )));
    }
    let (nodes, weights) = match d {
        2 => circle_nodes(m),
        3 => spiral_sphere_nodes(m),
        _ => {
            return Err(Error::Unsupported(format!(
                "sphere quadrature implemented for ambient d in {{2, 3}}, got {d}"
            )))
        }
    };
    SurfaceQuadrature::new(d, nodes, weights, d - 1, SurfaceLabel::Sphere)
}

/// Quadrature on S^(m*d-1) in R^(m*d), nodes partitioned into `m` blocks
/// of dimension `d`. Antipodally symmetric by construction.
pub fn product_sphere_quadrature(m: usize, d: usize, nodes: usize) -> Result<SurfaceQuadrature> {
    let md = m
        .checked_mul(d)
        .ok_or_else(|| Error::InvalidInput("m*d overflow".into()))?;
    if nodes < 16 {
        return Err(Error::InvalidInput(format!(
            "node count {nodes} too small; need at least 16"
        )));
    }
    if nodes % 2 != 0 {
        return Err(Error::InvalidInput(
            "node count must be even for antipodal symmetry".into(),
        ));
    }
    let (pts, weights) = match md {
        2 => circle_nodes(nodes),
        3 => {
            // symmetrize the spiral: half the nodes plus their antipodes
            let (half_nodes, _) = spiral_sphere_nodes(nodes / 2);
            let mut out = Vec::with_capacity(3 * nodes);
            for p in half_nodes.chunks_exact(3) {
                out.extend_from_slice(p);
                out.extend(p.iter().map(|x| -x));
            }
            (out, vec![1.0 / nodes as f64; nodes])
        }
        4 => hopf_s3_nodes(nodes)?,
        _ => {
            return Err(Error::Unsupported(format!(
                "product sphere quadrature implemented for m*d in {{2, 3, 4}}, got {md}"
            )))
        }
    };
    SurfaceQuadrature::new(
        md,
        pts,
        weights,
        md - 1,
        SurfaceLabel::ProductSphere {
            factors: m,
            block_dim: d,
        },
    )
}

/// Graph map of a quadratic patch: component c is `y^T A_c y / 2`.
/// Covers the shipped surfaces (flat patch, paraboloid of selectable
/// rank, cylinder) and exposes exact Hessians at the origin.
#[derive(Debug, Clone)]
pub struct QuadraticGraph {
    param_dim: usize,
    /// One symmetric param_dim x param_dim matrix per output component.
    forms: Vec<Vec<f64>>,
}

impl QuadraticGraph {
    pub fn new(param_dim: usize, forms: Vec<Vec<f64>>) -> Result<Self> {
        for f in &forms {
            if f.len() != param_dim * param_dim {
                return Err(Error::InvalidInput("Hessian block size mismatch".into()));
            }
        }
        Ok(QuadraticGraph { param_dim, forms })
    }

    /// Flat patch: zero map into codimension `codim`.
    pub fn flat(param_dim: usize, codim: usize) -> Self {
        QuadraticGraph {
            param_dim,
            forms: vec![vec![0.0; param_dim * param_dim]; codim],
        }
    }

    /// Hypersurface paraboloid `|y_1..y_rank|^2 / 2`; `rank = param_dim`
    /// is the full paraboloid cap, `rank < param_dim` a cylinder with
    /// flat directions.
    pub fn paraboloid(param_dim: usize, rank: usize) -> Result<Self> {
        if rank > param_dim {
            return Err(Error::InvalidInput(format!(
                "curvature rank {rank} exceeds parameter dimension {param_dim}"
            )));
        }
        let mut form = vec![0.0; param_dim * param_dim];
        for i in 0..rank {
            form[i * param_dim + i] = 1.0;
        }
        Ok(QuadraticGraph {
            param_dim,
            forms: vec![form],
        })
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn codim(&self) -> usize {
        self.forms.len()
    }

    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.forms
            .iter()
            .map(|a| {
                let mut acc = 0.0;
                for r in 0..self.param_dim {
                    for c in 0..self.param_dim {
                        acc += a[r * self.param_dim + c] * y[r] * y[c];
                    }
                }
                acc / 2.0
            })
            .collect()
    }

    pub fn hessian_at_origin(&self, component: usize) -> &[f64] {
        &self.forms[component]
    }
}

/// Graph patch `(y, Phi(y))` with a smooth radial cutoff supported in the
/// unit parameter ball.
#[derive(Debug, Clone)]
pub struct GraphSurfaceSpec {
    pub map: QuadraticGraph,
    /// Declared curvature rank of the patch.
    pub curvature_rank: usize,
    /// Smoothstep order of the cutoff transition.
    pub cutoff_order: u32,
}

impl GraphSurfaceSpec {
    pub fn new(map: QuadraticGraph, curvature_rank: usize) -> Self {
        GraphSurfaceSpec {
            map,
            curvature_rank,
            cutoff_order: 4,
        }
    }

    /// Radial cutoff: 1 on |y| <= 1/2, 0 on |y| >= 1, smooth between.
    pub fn cutoff(&self, y: &[f64]) -> f64 {
        let r = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r <= 0.5 {
            1.0
        } else if r >= 1.0 {
            0.0
        } else {
            crate::freq::smoothstep_profile(self.cutoff_order, 2.0 * (1.0 - r))
        }
    }

    /// Rank of the first Hessian block at the parameter origin, with a
    /// pivot threshold; spot check against the declared rank.
    pub fn hessian_rank_at_origin(&self, tol: f64) -> usize {
        let k = self.map.param_dim();
        if self.map.codim() == 0 {
            return 0;
        }
        let mut a: Vec<Vec<f64>> = (0..k)
            .map(|r| self.map.hessian_at_origin(0)[r * k..(r + 1) * k].to_vec())
            .collect();
        let mut rank = 0;
        for col in 0..k {
            let piv = (rank..k).max_by(|&i, &j| {
                a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
            });
            let Some(piv) = piv else { break };
            if a[piv][col].abs() <= tol {
                continue;
            }
            a.swap(rank, piv);
            for r in rank + 1..k {
                let f = a[r][col] / a[rank][col];
                for c in col..k {
                    a[r][c] -= f * a[rank][c];
                }
            }
            rank += 1;
            if rank == k {
                break;
            }
        }
        rank
    }
}

/// Quadrature for the cutoff graph measure `chi(y) dy` lifted to the
/// patch `(y, Phi(y))`, renormalized to unit mass.
pub fn graph_quadrature(spec: &GraphSurfaceSpec, grid_per_axis: usize) -> Result<SurfaceQuadrature> {
    let k = spec.map.param_dim();
    if grid_per_axis < 8 {
        return Err(Error::InvalidInput(format!(
            "parameter grid {grid_per_axis} too coarse; need at least 8 cells per axis"
        )));
    }
    let ambient = k + spec.map.codim();
    let step = 2.0 / grid_per_axis as f64;
    let cells = grid_per_axis.pow(k as u32);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for flat in 0..cells {
        let mut idx = flat;
        let mut y = vec![0.0f64; k];
        for a in (0..k).rev() {
            y[a] = -1.0 + (idx % grid_per_axis) as f64 * step + step / 2.0;
            idx /= grid_per_axis;
        }
        let w = spec.cutoff(&y);
        if w > 0.0 {
            let z = spec.map.eval(&y);
            nodes.extend_from_slice(&y);
            nodes.extend_from_slice(&z);
            weights.push(w);
        }
    }
    if weights.is_empty() {
        return Err(Error::InvalidInput(
            "cutoff vanishes on the whole parameter grid".into(),
        ));
    }
    let mut total = CompensatedSum::new();
    for &w in &weights {
        total.add(w);
    }
    let t = total.value();
    for w in &mut weights {
        *w /= t;
    }
    SurfaceQuadrature::new(ambient, nodes, weights, spec.curvature_rank, SurfaceLabel::Graph)
}

/// Fourier transform of the quadrature measure at frequency `xi`:
/// `sum_i w_i exp(-2 pi i xi . y_i)`.
pub fn surface_ft(q: &SurfaceQuadrature, xi: &[f64]) -> Complex64 {
    debug_assert_eq!(xi.len(), q.ambient_dim());
    let mut acc = CompensatedSumC::new();
    for i in 0..q.len() {
        let dot: f64 = q.node(i).iter().zip(xi).map(|(a, b)| a * b).sum();
        let phase = -2.0 * std::f64::consts::PI * dot;
        acc.add(Complex64::new(phase.cos(), phase.sin()) * q.weight(i));
    }
    acc.value()
}

/// Configuration of the radial decay fit.
#[derive(Debug, Clone)]
pub struct DecayFitConfig {
    pub r_min: f64,
    pub r_max: f64,
    /// Radii sampled per octave (envelope resolution across oscillation).
    pub samples_per_octave: usize,
    /// Number of quasi-uniform directions to sup over.
    pub directions: usize,
}

impl Default for DecayFitConfig {
    fn default() -> Self {
        DecayFitConfig {
            r_min: 4.0,
            r_max: 64.0,
            samples_per_octave: 8,
            directions: 32,
        }
    }
}

/// Result of [`decay_fit`]: fitted exponent `rho` in `|sigma_hat| ~ r^-rho`.
#[derive(Debug, Clone)]
pub struct DecayFit {
    pub rho: f64,
    pub residual: f64,
    /// Per-octave envelope points: (radius at the max, sup over directions).
    pub envelope: Vec<(f64, f64)>,
}

/// Deterministic quasi-uniform directions on S^(n-1).
pub fn sample_directions(ambient: usize, count: usize) -> Vec<Vec<f64>> {
    match ambient {
        1 => (0..count).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..count)
            .map(|i| {
                // golden offset keeps directions off the axes
                let th = 2.0 * std::f64::consts::PI * i as f64 / count as f64 + 0.5;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            let (nodes, _) = spiral_sphere_nodes(count);
            nodes.chunks_exact(3).map(|c| c.to_vec()).collect()
        }
        4 => {
            let (nodes, _) = hopf_s3_nodes(count + count % 2).expect("even count");
            nodes.chunks_exact(4).map(|c| c.to_vec()).take(count).collect()
        }
        _ => panic!("directions implemented for ambient <= 4"),
    }
}

/// Fit the radial decay exponent of `|surface_ft|` over `[r_min, r_max]`:
/// sup over directions at each radius, max within each octave (the
/// Fourier transform oscillates; the decay bound is an upper envelope),
/// then a least-squares slope of log max against log r.
pub fn decay_fit(q: &SurfaceQuadrature, cfg: &DecayFitConfig) -> Result<DecayFit> {
    if cfg.r_min <= 0.0 || cfg.r_max <= cfg.r_min {
        return Err(Error::InvalidInput("bad radius range".into()));
    }
    let octaves = (cfg.r_max / cfg.r_min).log2();
    let total = (octaves * cfg.samples_per_octave as f64).ceil() as usize + 1;
    if total < 4 {
        return Err(Error::DegenerateFit(format!(
            "only {total} radii in range; need at least 4"
        )));
    }
    let guard = q.max_reliable_radius();
    if cfg.r_max > guard {
        return Err(Error::InvalidInput(format!(
            "max radius {} exceeds quadrature resolution guard {guard:.2}; increase node count",
            cfg.r_max
        )));
    }
    let dirs = sample_directions(q.ambient_dim(), cfg.directions);
    let radii: Vec<f64> = (0..total)
        .map(|i| cfg.r_min * 2f64.powf(i as f64 / cfg.samples_per_octave as f64))
        .filter(|&r| r <= cfg.r_max * (1.0 + 1e-12))
        .collect();

    let sups: Vec<f64> = radii
        .par_iter()
        .map(|&r| {
            dirs.iter()
                .map(|dir| {
                    let xi: Vec<f64> = dir.iter().map(|&c| c * r).collect();
                    surface_ft(q, &xi).norm()
                })
                .fold(0.0f64, f64::max)
        })
        .collect();

    // per-octave envelope; a trailing partial bucket merges into the last
    // full one so no fit point rests on a lone (possibly near-zero) sample
    let buckets = (radii.len() / cfg.samples_per_octave).max(1);
    let mut envelope = Vec::new();
    for b in 0..buckets {
        let start = b * cfg.samples_per_octave;
        let end = if b + 1 == buckets {
            radii.len()
        } else {
            start + cfg.samples_per_octave
        };
        let (best_i, best_v) = (start..end)
            .map(|i| (i, sups[i]))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        envelope.push((radii[best_i], best_v));
    }
    if envelope.len() < 2 {
        return Err(Error::DegenerateFit("fewer than two octaves".into()));
    }
    let xs: Vec<f64> = envelope.iter().map(|(r, _)| r.ln()).collect();
    let ys: Vec<f64> = envelope.iter().map(|(_, v)| v.max(1e-300).ln()).collect();
    let (slope, _, residual) = linear_fit(&xs, &ys);
    Ok(DecayFit {
        rho: -slope,
        residual,
        envelope,
    })
}

/// Family of rotation matrices, validated orthogonal and linearly
/// independent as vectors in matrix space.
#[derive(Debug, Clone)]
pub struct RotationFamily {
    dim: usize,
    mats: Vec<Vec<f64>>,
}

const RATIONALIZE_TOL: f64 = 1e-12;

impl RotationFamily {
    pub fn new(dim: usize, mats: Vec<Vec<f64>>) -> Result<Self> {
        let fam = Self::new_allow_dependent(dim, mats)?;
        // linear independence as d*d-vectors, checked exactly
        let flat = RatMat::from_f64_rows(&fam.mats, RATIONALIZE_TOL);
        if flat.rank() != fam.mats.len() {
            return Err(Error::InvalidInput(
                "rotation matrices are linearly dependent in matrix space".into(),
            ));
        }
        Ok(fam)
    }

    /// Skips the linear-independence invariant; for deliberately
    /// degenerate families used to exercise failure witnesses.
    pub fn new_allow_dependent(dim: usize, mats: Vec<Vec<f64>>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::InvalidInput("empty rotation family".into()));
        }
        for (j, m) in mats.iter().enumerate() {
            if m.len() != dim * dim {
                return Err(Error::InvalidInput(format!(
                    "matrix {j} has {} entries, expected {}",
                    m.len(),
                    dim * dim
                )));
            }
            // orthogonality to 1e-12
            for r in 0..dim {
                for c in 0..dim {
                    let mut dot = 0.0;
                    for t in 0..dim {
                        dot += m[t * dim + r] * m[t * dim + c];
                    }
                    let expect = if r == c { 1.0 } else { 0.0 };
                    if (dot - expect).abs() > 1e-12 {
                        return Err(Error::InvalidInput(format!(
                            "matrix {j} is not orthogonal: (Q^T Q)[{r},{c}] = {dot}"
                        )));
                    }
                }
            }
        }
        Ok(RotationFamily { dim, mats })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn matrix(&self, j: usize) -> &[f64] {
        &self.mats[j]
    }

    /// Apply matrix j to a vector.
    pub fn apply(&self, j: usize, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let m = &self.mats[j];
        (0..d)
            .map(|r| (0..d).map(|c| m[r * d + c] * v[c]).sum())
            .collect()
    }

    /// Exact rationalized copy of matrix j.
    pub fn rational_matrix(&self, j: usize) -> RatMat {
        let d = self.dim;
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|r| self.mats[j][r * d..(r + 1) * d].to_vec())
            .collect();
        RatMat::from_f64_rows(&rows, RATIONALIZE_TOL)
    }

    /// Exact rationalized first-k-columns block of matrix j.
    pub fn rational_block(&self, j: usize, k: usize) -> RatMat {
        let d = self.dim;
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|r| self.mats[j][r * d..r * d + k].to_vec())
            .collect();
        RatMat::from_f64_rows(&rows, RATIONALIZE_TOL)
    }
}

/// Outcome of the simplex-type transversality check.
#[derive(Debug, Clone)]
pub struct SimplexCheck {
    pub pass: bool,
    /// On failure: the violating subset and the intersection dimension found.
    pub witness: Option<(Vec<usize>, usize)>,
}

/// For every subset {j_1..j_l} with 2 <= l <= k+1, verify that the images
/// of the coordinate k-plane under the rotations intersect in dimension
/// at most k+1-l. Ranks are computed exactly over rationalized entries.
pub fn simplex_condition(family: &RotationFamily, k: usize) -> Result<SimplexCheck> {
    let m = family.len();
    let d = family.dim();
    if k == 0 || k + 1 > m || k > d {
        return Err(Error::InvalidInput(format!(
            "need 2 <= k+1 <= m and k <= d; got k = {k}, m = {m}, d = {d}"
        )));
    }
    let images: Vec<Subspace> = (0..m)
        .map(|j| Subspace::span(&family.rational_block(j, k)))
        .collect();
    // enumerate subsets of size 2..=k+1
    for size in 2..=(k + 1) {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            let mut inter = images[subset[0]].clone();
            for &j in &subset[1..] {
                inter = inter.intersect(&images[j]);
            }
            if inter.dim() > k + 1 - size {
                return Ok(SimplexCheck {
                    pass: false,
                    witness: Some((subset.clone(), inter.dim())),
                });
            }
            // next subset in lexicographic order
            let mut i = size;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if subset[i] != i + m - size {
                    subset[i] += 1;
                    for t in i + 1..size {
                        subset[t] = subset[t - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    subset.clear();
                    break;
                }
            }
            if subset.is_empty() {
                break;
            }
        }
    }
    Ok(SimplexCheck {
        pass: true,
        witness: None,
    })
}

/// CSV export: one row per node, columns (coords..., weight).
pub fn write_quadrature_csv<W: Write>(q: &SurfaceQuadrature, mut w: W) -> Result<()> {
    let mut header: Vec<String> = (0..q.ambient_dim()).map(|a| format!("y{a}")).collect();
    header.push("weight".into());
    writeln!(w, "{}", header.join(","))?;
    for i in 0..q.len() {
        let mut row: Vec<String> = q.node(i).iter().map(|v| format!("{v:.17e}")).collect();
        row.push(format!("{:.17e}", q.weight(i)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// CSV import; validates the unit-mass invariant.
pub fn read_quadrature_csv<R: Read>(
    r: R,
    curvature_rank: usize,
    label: SurfaceLabel,
) -> Result<SurfaceQuadrature> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty quadrature CSV".into()))??;
    let ambient = header.split(',').count() - 1;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != ambient + 1 {
            return Err(Error::InvalidInput(format!(
                "row has {} fields, expected {}",
                fields.len(),
                ambient + 1
            )));
        }
        for f in &fields[..ambient] {
            nodes.push(f.trim().parse::<f64>().map_err(|e| {
                Error::InvalidInput(format!("bad node coordinate '{f}': {e}"))
            })?);
        }
        weights.push(fields[ambient].trim().parse::<f64>().map_err(|e| {
            Error::InvalidInput(format!("bad weight '{}': {e}", fields[ambient]))
        })?);
    }
    SurfaceQuadrature::new(ambient, nodes, weights, curvature_rank, label)
}
