//! Multilinear averaging operators over surface quadratures at dyadic
//! scales, their lacunary maximal operators, and the frequency-localized
//! pieces the decomposition arguments use.
//!
//! Scale convention: scale `l` means dilate `t = 2^l`. A band-localized
//! piece at scale `l` with band offset `n_j` projects slot `j` onto the
//! dyadic band `n_j - l` (frequency ~ `2^(n_j) / t`), and the low-pass
//! slots of a mixed piece are cut at `2^(-l)`; the two scale-sign
//! conventions in use for lacunary averages are reindexings of each other
//! under `l -> -l`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::fft;
use crate::freq::{self, MollifierPair};
use crate::grid::{DomainBox, GridFunction};
use crate::surface::{RotationFamily, SurfaceQuadrature};
use crate::util::{linear_fit, CompensatedSumC};
use crate::{Error, Result};

/// Off-grid evaluation strategy for the averaging loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpMode {
    /// Separable periodic cubic interpolation (default; fast).
    Cubic,
    /// Band-limited translation by FFT phase shifts; exact for the
    /// trigonometric interpolant, used to anchor accuracy claims.
    Exact,
}

#[derive(Debug, Clone)]
enum AvgVariant {
    /// `sum_i w_i prod_j f_j(x - t Theta_j y_i)` on a surface in R^d.
    Theta {
        quad: SurfaceQuadrature,
        rotations: RotationFamily,
    },
    /// `sum_i w_i prod_j f_j(x - t y_{i,j})` with nodes in R^(m*d) split
    /// into m blocks of dimension d.
    Sigma {
        quad: SurfaceQuadrature,
        block_dim: usize,
    },
}

/// An averaging operator: surface data plus the admissible dyadic scale
/// range and the evaluation mode.
#[derive(Debug, Clone)]
pub struct AvgSpec {
    variant: AvgVariant,
    pub scale_range: (i32, i32),
    pub interpolation: InterpMode,
}

impl AvgSpec {
    pub fn theta(
        quad: SurfaceQuadrature,
        rotations: RotationFamily,
        scale_range: (i32, i32),
    ) -> Result<Self> {
        if quad.ambient_dim() != rotations.dim() {
            return Err(Error::InvalidInput(format!(
                "surface ambient dim {} does not match rotation dim {}",
                quad.ambient_dim(),
                rotations.dim()
            )));
        }
        if scale_range.0 > scale_range.1 {
            return Err(Error::InvalidInput("empty scale range".into()));
        }
        Ok(AvgSpec {
            variant: AvgVariant::Theta { quad, rotations },
            scale_range,
            interpolation: InterpMode::Cubic,
        })
    }

    pub fn sigma(
        quad: SurfaceQuadrature,
        block_dim: usize,
        scale_range: (i32, i32),
    ) -> Result<Self> {
        if block_dim == 0 || quad.ambient_dim() % block_dim != 0 {
            return Err(Error::InvalidInput(format!(
                "ambient dim {} is not a multiple of block dim {block_dim}",
                quad.ambient_dim()
            )));
        }
        if scale_range.0 > scale_range.1 {
            return Err(Error::InvalidInput("empty scale range".into()));
        }
        Ok(AvgSpec {
            variant: AvgVariant::Sigma { quad, block_dim },
            scale_range,
            interpolation: InterpMode::Cubic,
        })
    }

    pub fn with_interpolation(mut self, mode: InterpMode) -> Self {
        self.interpolation = mode;
        self
    }

    /// Number of function slots.
    pub fn arity(&self) -> usize {
        match &self.variant {
            AvgVariant::Theta { rotations, .. } => rotations.len(),
            AvgVariant::Sigma { quad, block_dim } => quad.ambient_dim() / block_dim,
        }
    }

    /// Dimension of the grid the input functions live on.
    pub fn grid_dim(&self) -> usize {
        match &self.variant {
            AvgVariant::Theta { quad, .. } => quad.ambient_dim(),
            AvgVariant::Sigma { block_dim, .. } => *block_dim,
        }
    }

    pub fn quadrature(&self) -> &SurfaceQuadrature {
        match &self.variant {
            AvgVariant::Theta { quad, .. } | AvgVariant::Sigma { quad, .. } => quad,
        }
    }

    /// Undilated offset of slot `j` at node `i`.
    fn offset(&self, j: usize, i: usize) -> Vec<f64> {
        match &self.variant {
            AvgVariant::Theta { quad, rotations } => rotations.apply(j, quad.node(i)),
            AvgVariant::Sigma { quad, block_dim } => {
                quad.node(i)[j * block_dim..(j + 1) * block_dim].to_vec()
            }
        }
    }

    /// Surface diameter used by the dilate guard.
    pub fn diameter(&self) -> f64 {
        self.quadrature().diameter()
    }

    /// Reject scales whose dilated surface outgrows a quarter box.
    pub fn check_scale(&self, domain: &DomainBox, l: i32) -> Result<()> {
        let reach = (l as f64).exp2() * self.diameter();
        if reach > domain.side() / 4.0 {
            return Err(Error::DilateTooLarge {
                scale: l,
                reach,
                required: 4.0 * reach,
            });
        }
        Ok(())
    }

    /// Largest scale in `range` admissible for the given box (none if all
    /// dilates are too large).
    pub fn admissible_scales(&self, domain: &DomainBox) -> Vec<i32> {
        (self.scale_range.0..=self.scale_range.1)
            .filter(|&l| self.check_scale(domain, l).is_ok())
            .collect()
    }
}

/// Bank of per-slot node offsets at a fixed scale.
struct OffsetBank {
    /// offsets[j][i] is the dilated offset of slot j at node i.
    offsets: Vec<Vec<Vec<f64>>>,
}

impl OffsetBank {
    fn build(spec: &AvgSpec, l: i32) -> Self {
        let t = (l as f64).exp2();
        let m = spec.arity();
        let nodes = spec.quadrature().len();
        let offsets = (0..m)
            .map(|j| {
                (0..nodes)
                    .map(|i| spec.offset(j, i).iter().map(|&c| c * t).collect())
                    .collect()
            })
            .collect();
        OffsetBank { offsets }
    }
}

fn validate_inputs(inputs: &[GridFunction], spec: &AvgSpec) -> Result<DomainBox> {
    if inputs.len() != spec.arity() {
        return Err(Error::InvalidInput(format!(
            "expected {} input functions, got {}",
            spec.arity(),
            inputs.len()
        )));
    }
    let domain = inputs[0].domain();
    if domain.dim() != spec.grid_dim() {
        return Err(Error::InvalidInput(format!(
            "grid dimension {} does not match operator data dimension {}",
            domain.dim(),
            spec.grid_dim()
        )));
    }
    for f in inputs {
        if f.domain() != domain {
            return Err(Error::InvalidInput(
                "all input functions must share one domain box".into(),
            ));
        }
        f.check_finite()?;
    }
    Ok(domain)
}

/// Per-axis interpolation stencil shared by every output cell: sampling
/// `f(x_j - o)` over the lattice keeps one fractional offset per axis, so
/// the Catmull-Rom weights depend on the node only. This also makes the
/// output covariant under whole-cell translations by plain index shifts.
struct NodeStencil {
    /// per axis: (integer shift, four tap weights)
    axes: Vec<(i64, [f64; 4])>,
}

impl NodeStencil {
    fn build(offset: &[f64], h: f64) -> Self {
        let axes = offset
            .iter()
            .map(|&o| {
                let t = -o / h;
                let base = t.floor();
                let frac = t - base;
                (base as i64, catmull_rom_weights(frac))
            })
            .collect();
        NodeStencil { axes }
    }

    /// Evaluate `f(x_j - o)` at the cell with multi-index `idx`.
    fn eval(&self, f: &GridFunction, idx: &[usize], n: i64) -> Complex64 {
        let d = self.axes.len();
        let taps = 1usize << (2 * d);
        let mut acc = Complex64::new(0.0, 0.0);
        for tap in 0..taps {
            let mut flat = 0usize;
            let mut w = 1.0f64;
            let mut rem = tap;
            for (a, (shift, weights)) in self.axes.iter().enumerate() {
                let pick = rem & 3;
                rem >>= 2;
                let i = (idx[a] as i64 + shift - 1 + pick as i64).rem_euclid(n) as usize;
                flat = flat * n as usize + i;
                w *= weights[pick];
            }
            acc += f.values()[flat] * w;
        }
        acc
    }
}

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

fn average_cubic(inputs: &[GridFunction], bank: &OffsetBank, quad: &SurfaceQuadrature, domain: DomainBox) -> GridFunction {
    let cells = domain.cells();
    let m = inputs.len();
    let h = domain.spacing();
    let n = domain.samples_per_axis() as i64;
    let stencils: Vec<Vec<NodeStencil>> = (0..m)
        .map(|j| {
            (0..quad.len())
                .map(|i| NodeStencil::build(&bank.offsets[j][i], h))
                .collect()
        })
        .collect();
    let values: Vec<Complex64> = (0..cells)
        .into_par_iter()
        .map(|flat| {
            let idx = domain.multi_index(flat);
            let mut acc = CompensatedSumC::new();
            for i in 0..quad.len() {
                let mut prod = Complex64::new(quad.weight(i), 0.0);
                for (j, input) in inputs.iter().enumerate() {
                    prod *= stencils[j][i].eval(input, &idx, n);
                }
                acc.add(prod);
            }
            acc.value()
        })
        .collect();
    GridFunction::new(domain, values).expect("averaging produced non-finite values")
}

const EXACT_PATH_NODE_BATCH: usize = 16;

fn average_exact(inputs: &[GridFunction], bank: &OffsetBank, quad: &SurfaceQuadrature, domain: DomainBox) -> GridFunction {
    let cells = domain.cells();
    let m = inputs.len();
    let spectra: Vec<fft::Spectrum> = inputs.iter().map(fft::forward).collect();
    let side = domain.side();

    let mut acc = vec![CompensatedSumC::new(); cells];
    let node_count = quad.len();
    let mut batch_start = 0usize;
    while batch_start < node_count {
        let batch_end = (batch_start + EXACT_PATH_NODE_BATCH).min(node_count);
        // translated copies of every slot for this node batch, in parallel
        let translated: Vec<Vec<GridFunction>> = (batch_start..batch_end)
            .into_par_iter()
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let off = &bank.offsets[j][i];
                        let mut spec = spectra[j].clone();
                        for flat in 0..cells {
                            let xi = spec.frequency(flat);
                            let dot: f64 = xi.iter().zip(off).map(|(a, b)| a * b).sum();
                            let phase = -2.0 * std::f64::consts::PI * dot;
                            spec.coeffs_mut()[flat] *= Complex64::new(phase.cos(), phase.sin());
                        }
                        let _ = side;
                        fft::inverse(&spec)
                    })
                    .collect()
            })
            .collect();
        // fold in fixed node order for reproducibility
        for (bi, i) in (batch_start..batch_end).enumerate() {
            let w = quad.weight(i);
            let slots = &translated[bi];
            for (c, a) in acc.iter_mut().enumerate() {
                let mut prod = Complex64::new(w, 0.0);
                for g in slots {
                    prod *= g.values()[c];
                }
                a.add(prod);
            }
        }
        batch_start = batch_end;
    }
    let values: Vec<Complex64> = acc.iter().map(|a| a.value()).collect();
    GridFunction::new(domain, values).expect("averaging produced non-finite values")
}

fn average_with(inputs: &[GridFunction], spec: &AvgSpec, bank: &OffsetBank, domain: DomainBox) -> GridFunction {
    match spec.interpolation {
        InterpMode::Cubic => average_cubic(inputs, bank, spec.quadrature(), domain),
        InterpMode::Exact => average_exact(inputs, bank, spec.quadrature(), domain),
    }
}

/// Rotation-family average at scale `l`:
/// `out(x) = sum_i w_i prod_j f_j(x - 2^l Theta_j y_i)`.
pub fn avg_theta(inputs: &[GridFunction], spec: &AvgSpec, l: i32) -> Result<GridFunction> {
    if !matches!(spec.variant, AvgVariant::Theta { .. }) {
        return Err(Error::InvalidInput("avg_theta requires a theta-variant spec".into()));
    }
    avg(inputs, spec, l)
}

/// Block-split average at scale `l`:
/// `out(x) = sum_i w_i prod_j f_j(x - 2^l y_{i,j})`.
pub fn avg_sigma(inputs: &[GridFunction], spec: &AvgSpec, l: i32) -> Result<GridFunction> {
    if !matches!(spec.variant, AvgVariant::Sigma { .. }) {
        return Err(Error::InvalidInput("avg_sigma requires a sigma-variant spec".into()));
    }
    avg(inputs, spec, l)
}

/// Variant-agnostic average at scale `l`.
pub fn avg(inputs: &[GridFunction], spec: &AvgSpec, l: i32) -> Result<GridFunction> {
    let domain = validate_inputs(inputs, spec)?;
    spec.check_scale(&domain, l)?;
    let bank = OffsetBank::build(spec, l);
    Ok(average_with(inputs, spec, &bank, domain))
}

/// Lacunary maximal function: pointwise max of `|avg|` over the spec's
/// scale range. Every scale in the range must be admissible.
pub fn lacunary_max(inputs: &[GridFunction], spec: &AvgSpec) -> Result<GridFunction> {
    let domain = validate_inputs(inputs, spec)?;
    let mut out = vec![0.0f64; domain.cells()];
    for l in spec.scale_range.0..=spec.scale_range.1 {
        spec.check_scale(&domain, l)?;
        let bank = OffsetBank::build(spec, l);
        let piece = average_with(inputs, spec, &bank, domain);
        for (o, v) in out.iter_mut().zip(piece.values()) {
            *o = o.max(v.norm());
        }
    }
    GridFunction::new(
        domain,
        out.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    )
}

/// Which frequency localization to apply to each slot of an average.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BandPattern {
    /// Low-pass the first `alpha` slots at the scale-matched cutoff;
    /// leave the remaining slots untouched.
    LowFirst(usize),
    /// Project slot `j` onto the scale-matched dyadic band `n_j`
    /// (band index `n_j - l` at scale `l`).
    Bands(Vec<i64>),
}

/// Average at scale `l` with each slot replaced by the requested
/// frequency localization. Bands that miss the frequency lattice project
/// to zero, so the output is then the zero function.
pub fn band_localized_avg(
    inputs: &[GridFunction],
    spec: &AvgSpec,
    moll: &MollifierPair,
    l: i32,
    pattern: &BandPattern,
) -> Result<GridFunction> {
    let domain = validate_inputs(inputs, spec)?;
    spec.check_scale(&domain, l)?;
    let m = spec.arity();
    let projected: Vec<GridFunction> = match pattern {
        BandPattern::LowFirst(alpha) => {
            if *alpha > m {
                return Err(Error::InvalidInput(format!(
                    "low-pass slot count {alpha} exceeds arity {m}"
                )));
            }
            let cutoff = -(l as i64);
            inputs
                .iter()
                .enumerate()
                .map(|(j, f)| {
                    if j < *alpha {
                        freq::project_below(f, moll, cutoff).map(|(g, _)| g)
                    } else {
                        Ok(f.clone())
                    }
                })
                .collect::<Result<_>>()?
        }
        BandPattern::Bands(offsets) => {
            if offsets.len() != m {
                return Err(Error::InvalidInput(format!(
                    "band pattern has {} entries for arity {m}",
                    offsets.len()
                )));
            }
            inputs
                .iter()
                .zip(offsets)
                .map(|(f, &n)| {
                    let band = n - l as i64;
                    freq::project_band(f, moll, band).map(|(g, _)| g)
                })
                .collect::<Result<_>>()?
        }
    };
    let bank = OffsetBank::build(spec, l);
    Ok(average_with(&projected, spec, &bank, domain))
}

/// Pointwise max over the scale range of the band-localized piece.
pub fn band_max(
    inputs: &[GridFunction],
    spec: &AvgSpec,
    moll: &MollifierPair,
    bands: &[i64],
) -> Result<GridFunction> {
    fold_band_pieces(inputs, spec, moll, bands, |acc, v| acc.max(v))
}

/// Pointwise sum over the scale range of `|band-localized piece|`.
pub fn band_sum(
    inputs: &[GridFunction],
    spec: &AvgSpec,
    moll: &MollifierPair,
    bands: &[i64],
) -> Result<GridFunction> {
    fold_band_pieces(inputs, spec, moll, bands, |acc, v| acc + v)
}

fn fold_band_pieces(
    inputs: &[GridFunction],
    spec: &AvgSpec,
    moll: &MollifierPair,
    bands: &[i64],
    fold: impl Fn(f64, f64) -> f64,
) -> Result<GridFunction> {
    let domain = validate_inputs(inputs, spec)?;
    let mut out = vec![0.0f64; domain.cells()];
    let pattern = BandPattern::Bands(bands.to_vec());
    for l in spec.scale_range.0..=spec.scale_range.1 {
        let piece = band_localized_avg(inputs, spec, moll, l, &pattern)?;
        for (o, v) in out.iter_mut().zip(piece.values()) {
            *o = fold(*o, v.norm());
        }
    }
    GridFunction::new(
        domain,
        out.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    )
}

/// Report of the pointwise domination of the mixed low-pass piece by the
/// product of maximal functions.
#[derive(Debug, Clone)]
pub struct DominationReport {
    /// (scale, max over cells of LHS / (RHS + eps)).
    pub per_scale: Vec<(i32, f64)>,
    /// Largest ratio over all scales and cells (the constant needed).
    pub max_ratio: f64,
    /// Fitted slope of log2(ratio) against |scale|.
    pub trend_slope: f64,
}

/// Check `A_l^1(f_1, f_2) <= C * M_HL(f_1) * M_S(f_2)` over the scale
/// range: computes both sides pointwise and reports the constant needed
/// and its trend in the scale.
pub fn domination_check(
    f1: &GridFunction,
    f2: &GridFunction,
    spec: &AvgSpec,
    moll: &MollifierPair,
) -> Result<DominationReport> {
    if spec.arity() != 2 {
        return Err(Error::InvalidInput("domination check requires arity 2".into()));
    }
    for f in [f1, f2] {
        f.check_finite()?;
        for v in f.values() {
            if v.re < 0.0 || v.im != 0.0 {
                return Err(Error::InvalidInput(
                    "domination lemma applies to nonnegative real inputs".into(),
                ));
            }
        }
    }
    let domain = f1.domain();
    let inputs = [f1.clone(), f2.clone()];

    // RHS part 1: Hardy-Littlewood maximal of f1 over a full dyadic
    // ladder of radii (the rapidly decaying low-pass kernel is majorized
    // by averages over all window sizes, not just the dilate's own). On
    // the torus the window family saturates at the full-box mean, which
    // the half-side radius guard cannot reach, so it joins explicitly.
    let mut radii = Vec::new();
    let mut r = domain.spacing();
    while r <= domain.side() / 2.0 {
        radii.push(r);
        r *= 2.0;
    }
    let mut mhl = crate::grid::hl_maximal(f1, &radii)?;
    let mean_abs =
        f1.values().iter().map(|v| v.norm()).sum::<f64>() / domain.cells() as f64;
    for v in mhl.values_mut() {
        v.re = v.re.max(mean_abs);
    }

    // RHS part 2: lacunary maximal of the slot-2 single average.
    let single_spec = restrict_to_slot(spec, 1)?;
    let msurf = lacunary_max(&[f2.clone()], &single_spec)?;

    let eps = f64::EPSILON;
    let mut per_scale = Vec::new();
    let mut max_ratio = 0.0f64;
    for l in spec.scale_range.0..=spec.scale_range.1 {
        spec.check_scale(&domain, l)?;
        let lhs = band_localized_avg(&inputs, spec, moll, l, &BandPattern::LowFirst(1))?;
        let mut worst = 0.0f64;
        for ((lv, mv), sv) in lhs.values().iter().zip(mhl.values()).zip(msurf.values()) {
            let ratio = lv.norm() / (mv.re * sv.re + eps);
            worst = worst.max(ratio);
        }
        per_scale.push((l, worst));
        max_ratio = max_ratio.max(worst);
    }
    let xs: Vec<f64> = per_scale.iter().map(|(l, _)| (*l as f64).abs()).collect();
    let ys: Vec<f64> = per_scale
        .iter()
        .map(|(_, r)| r.max(1e-300).log2())
        .collect();
    let trend_slope = if per_scale.len() >= 2 {
        linear_fit(&xs, &ys).0
    } else {
        0.0
    };
    Ok(DominationReport {
        per_scale,
        max_ratio,
        trend_slope,
    })
}

/// Single-slot sub-operator: keeps slot `j`'s geometry, drops the rest.
fn restrict_to_slot(spec: &AvgSpec, j: usize) -> Result<AvgSpec> {
    match &spec.variant {
        AvgVariant::Theta { quad, rotations } => {
            let fam = RotationFamily::new_allow_dependent(
                rotations.dim(),
                vec![rotations.matrix(j).to_vec()],
            )?;
            AvgSpec::theta(quad.clone(), fam, spec.scale_range)
                .map(|s| s.with_interpolation(spec.interpolation))
        }
        AvgVariant::Sigma { quad, block_dim } => {
            // collapse the node cloud onto block j
            let m = quad.ambient_dim() / block_dim;
            let rows: Vec<f64> = (0..quad.len())
                .flat_map(|i| {
                    quad.node(i)[j * block_dim..(j + 1) * block_dim].to_vec()
                })
                .collect();
            let _ = m;
            let weights: Vec<f64> = (0..quad.len()).map(|i| q_weight(quad, i)).collect();
            let collapsed = crate::surface::SurfaceQuadrature::from_raw_parts(
                *block_dim,
                rows,
                weights,
                quad.curvature_rank().min(block_dim.saturating_sub(1)).max(1),
                crate::surface::SurfaceLabel::Graph,
            )?;
            let fam = RotationFamily::new_allow_dependent(
                *block_dim,
                vec![identity_matrix(*block_dim)],
            )?;
            AvgSpec::theta(collapsed, fam, spec.scale_range)
                .map(|s| s.with_interpolation(spec.interpolation))
        }
    }
}

fn q_weight(q: &SurfaceQuadrature, i: usize) -> f64 {
    q.weight(i)
}

fn identity_matrix(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}
