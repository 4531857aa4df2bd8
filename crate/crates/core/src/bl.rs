//! Brascamp-Lieb datum construction and finiteness verification: the
//! scaling and transversality conditions, necessary conditions, critical
//! subspace splitting, structured data built from rotation families, and
//! the exact exponent-region predicates. Everything runs in exact
//! rational arithmetic; verdicts carry signed margins.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::exact::{
    coordinates_in_basis, rat, rat_from_string, rat_i, rat_to_f64, rat_to_string, RatMat,
    Subspace,
};
use crate::surface::RotationFamily;
use crate::{Error, Result};

type Rat = BigRational;

/// Ambient space, exact linear surjections, and exponents in [0, 1].
#[derive(Debug, Clone)]
pub struct BLDatum {
    ambient: usize,
    maps: Vec<RatMat>,
    exponents: Vec<Rat>,
    /// Ambient split (d, k) when the datum has the block form
    /// `[I_d | B_j]` plus a projection; drives coordinate-block seeds.
    block_split: Option<(usize, usize)>,
    /// Extra structured seeds for the subspace lattice.
    extra_seeds: Vec<Subspace>,
}

impl BLDatum {
    pub fn new(ambient: usize, maps: Vec<RatMat>, exponents: Vec<Rat>) -> Result<Self> {
        if maps.len() != exponents.len() || maps.is_empty() {
            return Err(Error::InvalidInput(
                "need one exponent per map and at least one map".into(),
            ));
        }
        for (j, map) in maps.iter().enumerate() {
            if map.cols() != ambient {
                return Err(Error::InvalidInput(format!(
                    "map {j} has {} columns, ambient is {ambient}",
                    map.cols()
                )));
            }
            if map.rank() != map.rows() {
                return Err(Error::InvalidInput(format!(
                    "map {j} is not surjective (rank {} < {})",
                    map.rank(),
                    map.rows()
                )));
            }
        }
        for (j, c) in exponents.iter().enumerate() {
            if c < &Rat::zero() || c > &Rat::one() {
                return Err(Error::InvalidInput(format!(
                    "exponent {j} = {} outside [0, 1]",
                    rat_to_string(c)
                )));
            }
        }
        Ok(BLDatum {
            ambient,
            maps,
            exponents,
            block_split: None,
            extra_seeds: Vec::new(),
        })
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn maps(&self) -> &[RatMat] {
        &self.maps
    }

    pub fn exponents(&self) -> &[Rat] {
        &self.exponents
    }

    pub fn block_split(&self) -> Option<(usize, usize)> {
        self.block_split
    }

    /// Same datum with the maps (and exponents) permuted.
    pub fn permuted(&self, order: &[usize]) -> BLDatum {
        BLDatum {
            ambient: self.ambient,
            maps: order.iter().map(|&j| self.maps[j].clone()).collect(),
            exponents: order.iter().map(|&j| self.exponents[j].clone()).collect(),
            block_split: self.block_split,
            extra_seeds: self.extra_seeds.clone(),
        }
    }

    /// Same datum with every map entry scaled by a nonzero rational
    /// (ranks, hence all verdicts, are unchanged).
    pub fn rescaled(&self, factor: &Rat) -> BLDatum {
        assert!(!factor.is_zero());
        let maps = self
            .maps
            .iter()
            .map(|m| {
                let mut s = m.clone();
                for r in 0..s.rows() {
                    for c in 0..s.cols() {
                        let v = s.at(r, c) * factor;
                        *s.at_mut(r, c) = v;
                    }
                }
                s
            })
            .collect();
        BLDatum {
            ambient: self.ambient,
            maps,
            exponents: self.exponents.clone(),
            block_split: self.block_split,
            extra_seeds: self.extra_seeds.clone(),
        }
    }
}

/// Exact test of `ambient = sum c_j d_j`.
#[derive(Debug, Clone)]
pub struct ScalingCheck {
    pub pass: bool,
    pub lhs: Rat,
    pub rhs: Rat,
}

pub fn scaling_check(datum: &BLDatum) -> ScalingCheck {
    let lhs = rat_i(datum.ambient as i64);
    let rhs = datum
        .maps
        .iter()
        .zip(&datum.exponents)
        .fold(Rat::zero(), |acc, (m, c)| acc + c * rat_i(m.rows() as i64));
    ScalingCheck {
        pass: lhs == rhs,
        lhs,
        rhs,
    }
}

/// Necessary conditions: trivial common kernel, `sum c_j >= 1`,
/// `c_j <= 1`.
#[derive(Debug, Clone)]
pub struct NecessaryCheck {
    pub pass: bool,
    pub kernel_intersection_dim: usize,
    pub exponent_sum: Rat,
    /// A nonzero common kernel vector when one exists.
    pub kernel_witness: Option<Vec<Rat>>,
}

pub fn necessary_check(datum: &BLDatum) -> NecessaryCheck {
    // stack all maps; the common kernel is the kernel of the stack
    let total_rows: usize = datum.maps.iter().map(|m| m.rows()).sum();
    let mut stacked = RatMat::zeros(total_rows, datum.ambient);
    let mut row = 0;
    for m in &datum.maps {
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                *stacked.at_mut(row, c) = m.at(r, c).clone();
            }
            row += 1;
        }
    }
    let kernel = stacked.kernel();
    let kdim = kernel.cols();
    let kernel_witness = if kdim > 0 { Some(kernel.column(0)) } else { None };
    let exponent_sum = datum.exponents.iter().fold(Rat::zero(), |a, c| a + c);
    let exps_ok = datum.exponents.iter().all(|c| c <= &Rat::one());
    NecessaryCheck {
        pass: kdim == 0 && exponent_sum >= Rat::one() && exps_ok,
        kernel_intersection_dim: kdim,
        exponent_sum,
        kernel_witness,
    }
}

/// Transversality over a family of subspaces: for each V the slack
/// `sum c_j dim(L_j V) - dim V` must be nonnegative.
#[derive(Debug, Clone)]
pub struct TransversalityCheck {
    pub pass: bool,
    /// Smallest slack over the family.
    pub min_slack: Rat,
    /// Subspace attaining the smallest slack.
    pub worst: Option<Subspace>,
    /// Subspaces with exactly zero slack (critical).
    pub critical: Vec<Subspace>,
}

pub fn subspace_slack(datum: &BLDatum, v: &Subspace) -> Rat {
    let dim_v = rat_i(v.dim() as i64);
    let mut acc = Rat::zero();
    for (m, c) in datum.maps.iter().zip(&datum.exponents) {
        let image_dim = v.image(m).dim();
        acc += c * rat_i(image_dim as i64);
    }
    acc - dim_v
}

pub fn transversality_check(datum: &BLDatum, family: &[Subspace]) -> Result<TransversalityCheck> {
    if family.is_empty() {
        return Err(Error::InvalidInput("empty subspace family".into()));
    }
    let mut min_slack: Option<Rat> = None;
    let mut worst = None;
    let mut critical = Vec::new();
    for v in family {
        if v.ambient() != datum.ambient {
            return Err(Error::InvalidInput(
                "subspace ambient dimension does not match datum".into(),
            ));
        }
        let slack = subspace_slack(datum, v);
        if slack.is_zero() && v.dim() > 0 && v.dim() < datum.ambient {
            critical.push(v.clone());
        }
        if min_slack.as_ref().is_none_or(|m| &slack < m) {
            min_slack = Some(slack.clone());
            worst = Some(v.clone());
        }
    }
    let min_slack = min_slack.unwrap();
    Ok(TransversalityCheck {
        pass: !min_slack.is_negative(),
        min_slack,
        worst,
        critical,
    })
}

/// Lattice of test subspaces generated from the datum's structure.
#[derive(Debug, Clone)]
pub struct SubspaceLattice {
    pub family: Vec<Subspace>,
    /// True when the closure was cut off by the size cap.
    pub truncated: bool,
}

const LATTICE_CAP: usize = 512;
const LATTICE_RANDOM_BATCH: usize = 8;

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn push_unique(family: &mut Vec<Subspace>, s: Subspace) -> bool {
    if family.iter().any(|t| t.eq_space(&s)) {
        false
    } else {
        family.push(s);
        true
    }
}

/// Closure, up to `depth` rounds, of the structured seeds (kernels,
/// coordinate blocks, extra seeds) under intersection and sum, plus a
/// seeded batch of random rational subspaces.
pub fn generate_subspace_lattice(datum: &BLDatum, depth: usize, seed: u64) -> Result<SubspaceLattice> {
    if depth == 0 {
        return Err(Error::InvalidInput("lattice depth must be at least 1".into()));
    }
    let n = datum.ambient;
    let mut family = vec![Subspace::zero(n), Subspace::full(n)];
    for m in &datum.maps {
        push_unique(&mut family, Subspace::span(&m.kernel()));
        // row space (orthocomplement of the kernel): the natural embedded
        // copy of the target
        push_unique(&mut family, Subspace::span(&m.transpose()));
    }
    if let Some((d, k)) = datum.block_split {
        let mut first = RatMat::zeros(n, d);
        for i in 0..d {
            *first.at_mut(i, i) = Rat::one();
        }
        let mut second = RatMat::zeros(n, k);
        for i in 0..k {
            *second.at_mut(d + i, i) = Rat::one();
        }
        push_unique(&mut family, Subspace::span(&first));
        push_unique(&mut family, Subspace::span(&second));
    }
    for s in &datum.extra_seeds {
        push_unique(&mut family, s.clone());
    }
    // seeded random rational subspaces
    let mut state = seed ^ 0x5eed_0ff5_eed0_ff5e;
    for _ in 0..LATTICE_RANDOM_BATCH {
        let dim = 1 + (splitmix(&mut state) as usize) % n.max(2).saturating_sub(1);
        let mut m = RatMat::zeros(n, dim);
        for c in 0..dim {
            for r in 0..n {
                let v = (splitmix(&mut state) % 7) as i64 - 3;
                *m.at_mut(r, c) = rat_i(v);
            }
        }
        let s = Subspace::span(&m);
        if s.dim() > 0 {
            push_unique(&mut family, s);
        }
    }

    let mut truncated = false;
    'rounds: for _ in 0..depth {
        let snapshot = family.clone();
        let mut grew = false;
        for a in 0..snapshot.len() {
            for b in (a + 1)..snapshot.len() {
                for candidate in [
                    snapshot[a].intersect(&snapshot[b]),
                    snapshot[a].sum(&snapshot[b]),
                ] {
                    if family.len() >= LATTICE_CAP {
                        truncated = true;
                        break 'rounds;
                    }
                    grew |= push_unique(&mut family, candidate);
                }
            }
        }
        if !grew {
            break;
        }
    }
    Ok(SubspaceLattice { family, truncated })
}

/// Restricted and quotient data at a critical subspace.
pub fn critical_split(datum: &BLDatum, v_c: &Subspace) -> Result<(BLDatum, BLDatum)> {
    if v_c.ambient() != datum.ambient {
        return Err(Error::InvalidInput("subspace ambient mismatch".into()));
    }
    let slack = subspace_slack(datum, v_c);
    if !slack.is_zero() {
        return Err(Error::InvalidInput(format!(
            "subspace is not critical: slack = {}",
            rat_to_string(&slack)
        )));
    }
    let b_c = v_c.basis().clone();
    let r = v_c.dim();

    // restricted: V_c -> L_j V_c in chosen bases
    let mut restricted_maps = Vec::new();
    for m in &datum.maps {
        let image_vecs = m.mul(&b_c);
        let image = Subspace::span(&image_vecs);
        let coords = coordinates_in_basis(image.basis(), &image_vecs)
            .expect("image vectors lie in their own span");
        debug_assert_eq!(coords.rows(), image.dim());
        debug_assert_eq!(coords.cols(), r);
        restricted_maps.push(coords);
    }
    let restricted = BLDatum::new(r, restricted_maps, datum.exponents.clone())?;

    // quotient: V_c^perp -> (L_j V_c)^perp via orthogonal projection
    let perp = v_c.orthogonal_complement();
    let b_perp = perp.basis().clone();
    let s = perp.dim();
    let mut quotient_maps = Vec::new();
    for m in &datum.maps {
        let image = Subspace::span(&m.mul(&b_c));
        let target = image_complement(m.rows(), &image);
        let projected = target_projection(&target).mul(&m.mul(&b_perp));
        let coords = if target.dim() == 0 {
            RatMat::zeros(0, s)
        } else {
            coordinates_in_basis(target.basis(), &projected)
                .expect("projection lands in the complement")
        };
        quotient_maps.push(coords);
    }
    let quotient = BLDatum::new(s, quotient_maps, datum.exponents.clone())?;
    Ok((restricted, quotient))
}

fn image_complement(target_dim: usize, image: &Subspace) -> Subspace {
    if image.dim() == 0 {
        Subspace::full(target_dim)
    } else {
        image.orthogonal_complement()
    }
}

fn target_projection(target: &Subspace) -> RatMat {
    if target.dim() == 0 {
        RatMat::zeros(target.ambient(), target.ambient())
    } else {
        target.projector()
    }
}

/// The (m+1)-map datum on R^(d+k) built from a rotation family:
/// `L_j = [I_d | Theta_j^1]` for the first m maps and the coordinate
/// projection `[I_d | 0]` last, with exponents `(1/m, ..., 1/m, k/d)`
/// unless supplied.
pub fn build_structured_datum(
    rotations: &RotationFamily,
    d: usize,
    k: usize,
    exponents: Option<Vec<Rat>>,
) -> Result<BLDatum> {
    if rotations.dim() != d {
        return Err(Error::InvalidInput(format!(
            "rotation dimension {} does not match d = {d}",
            rotations.dim()
        )));
    }
    if k == 0 || k >= d + 1 {
        return Err(Error::InvalidInput(format!(
            "need 1 <= k <= d, got k = {k}, d = {d}"
        )));
    }
    let m = rotations.len();
    let n = d + k;
    let mut maps = Vec::with_capacity(m + 1);
    for j in 0..m {
        let block = rotations.rational_block(j, k); // d x k
        let mut map = RatMat::zeros(d, n);
        for r in 0..d {
            *map.at_mut(r, r) = Rat::one();
            for c in 0..k {
                *map.at_mut(r, d + c) = block.at(r, c).clone();
            }
        }
        maps.push(map);
    }
    let mut proj = RatMat::zeros(d, n);
    for r in 0..d {
        *proj.at_mut(r, r) = Rat::one();
    }
    maps.push(proj);
    let exponents = match exponents {
        Some(e) => {
            if e.len() != m + 1 {
                return Err(Error::InvalidInput(format!(
                    "need {} exponents, got {}",
                    m + 1,
                    e.len()
                )));
            }
            e
        }
        None => {
            let mut e = vec![rat(1, m as i64); m];
            e.push(rat(k as i64, d as i64));
            e
        }
    };
    let mut datum = BLDatum::new(n, maps, exponents)?;
    datum.block_split = Some((d, k));
    // K_mu = { (Theta_mu^1 y, 0) }: the lift of L_mu(ker pi) into the
    // first block
    for j in 0..m {
        let block = rotations.rational_block(j, k);
        let mut lift = RatMat::zeros(n, k);
        for r in 0..d {
            for c in 0..k {
                *lift.at_mut(r, c) = block.at(r, c).clone();
            }
        }
        datum.extra_seeds.push(Subspace::span(&lift));
    }
    Ok(datum)
}

/// Exponent tuple carried as exact reciprocals; infinity is reciprocal 0.
#[derive(Debug, Clone)]
pub struct ExponentTuple {
    /// 1/p_j per slot.
    pub inv_inputs: Vec<Rat>,
    /// 1/p of the output norm.
    pub inv_output: Rat,
    /// (d, k) context when the predicate needs it.
    pub context: Option<(usize, usize)>,
}

impl ExponentTuple {
    pub fn new(inv_inputs: Vec<Rat>, inv_output: Rat) -> Self {
        ExponentTuple {
            inv_inputs,
            inv_output,
            context: None,
        }
    }

    /// From integer p's; `None` means infinity.
    pub fn from_lebesgue(ps: &[Option<i64>], p_out: Option<i64>) -> Self {
        let inv = |p: &Option<i64>| match p {
            Some(v) => rat(1, *v),
            None => Rat::zero(),
        };
        ExponentTuple::new(ps.iter().map(inv).collect(), inv(&p_out))
    }

    pub fn with_context(mut self, d: usize, k: usize) -> Self {
        self.context = Some((d, k));
        self
    }

    pub fn arity(&self) -> usize {
        self.inv_inputs.len()
    }

    /// Whether `1/p = sum 1/p_j` holds exactly.
    pub fn is_holder(&self) -> bool {
        self.inv_inputs.iter().fold(Rat::zero(), |a, b| a + b) == self.inv_output
    }
}

/// The amount by which a multilinear estimate beats Holder scaling:
/// `sum 1/p_j - 1/p`, exact.
pub fn holder_defect(t: &ExponentTuple) -> Rat {
    t.inv_inputs.iter().fold(Rat::zero(), |a, b| a + b) - t.inv_output.clone()
}

/// Which exponent region to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateId {
    /// `(1/p_1..1/p_m)` in the convex hull of the two-coordinate
    /// vertices at (k+1)/(k+2); needs `k`.
    ConvVk,
    /// ConvVk plus the quasi-Banach output `1/p = sum 1/p_j = 2(k+1)/(k+2)`.
    ThetaQuasiBanach,
    /// L1-improving range for the block-split average:
    /// `(m+1)/2 <= sum 1/p_j < (2d+k)/(2d)`, `1 <= p_j <= 2`.
    SigmaImproving,
    /// SigmaImproving plus the Holder relation on the output.
    SigmaQuasiBanach,
    /// Smoothing range: `p_j >= 2`, `sum 1/p_j = 1/2`.
    SigmaSmoothing,
    /// The structured-datum condition family
    /// `(m-l-1)/m >= ((d-k)/d)(k-l)` for `0 <= l <= k-1`.
    BlStrongType,
    /// Lacunary maximal range over the rotation average: ConvVk
    /// membership and `1/p < 2(k+1)/(k+2)` strictly.
    LacunaryTheta,
    /// Lacunary maximal range over the block-split average:
    /// SigmaQuasiBanach plus `k > (m-1) d`.
    LacunarySigma,
    /// The bilinear product-sphere range: `m = 2`, `p_1, p_2 > 1`,
    /// `1/p = 1/p_1 + 1/p_2`.
    BilinearSphere,
}

/// Exact verdict with a signed margin: the distance to the nearest
/// constraint (negative when violated; equality constraints contribute 0
/// when satisfied and minus their violation otherwise).
#[derive(Debug, Clone)]
pub struct RegionVerdict {
    pub pass: bool,
    pub margin: Rat,
}

impl RegionVerdict {
    pub fn margin_f64(&self) -> f64 {
        rat_to_f64(&self.margin)
    }
}

/// One constraint's contribution: satisfied equalities gate the verdict
/// without capping the margin (the regions are flat, so the meaningful
/// margin is the relative-interior distance from the inequality walls).
struct Part {
    pass: bool,
    margin: Option<Rat>,
}

fn verdict_all(parts: Vec<Part>) -> RegionVerdict {
    let pass = parts.iter().all(|p| p.pass);
    let margin = parts
        .into_iter()
        .filter_map(|p| p.margin)
        .min()
        .unwrap_or_else(Rat::zero);
    RegionVerdict { pass, margin }
}

fn ineq(slack: Rat, strict: bool) -> Part {
    let pass = if strict {
        slack.is_positive()
    } else {
        !slack.is_negative()
    };
    Part {
        pass,
        margin: Some(slack),
    }
}

fn equality(diff: Rat) -> Part {
    if diff.is_zero() {
        Part {
            pass: true,
            margin: None,
        }
    } else {
        Part {
            pass: false,
            margin: Some(-diff.abs()),
        }
    }
}

fn nested(v: RegionVerdict) -> Part {
    Part {
        pass: v.pass,
        margin: Some(v.margin),
    }
}

fn require_context(t: &ExponentTuple) -> Result<(usize, usize)> {
    t.context.ok_or_else(|| {
        Error::InvalidInput("this predicate needs the (d, k) context on the tuple".into())
    })
}

fn conv_vk_margin(t: &ExponentTuple, k: usize) -> RegionVerdict {
    // conv of the vertices with two coordinates (k+1)/(k+2) and the rest
    // zero equals { z in [0, v]^m : sum z = 2v }, v = (k+1)/(k+2)
    let v = rat(k as i64 + 1, k as i64 + 2);
    let sum: Rat = t.inv_inputs.iter().fold(Rat::zero(), |a, b| a + b);
    let mut parts = vec![equality(sum - rat_i(2) * &v)];
    for z in &t.inv_inputs {
        parts.push(ineq(z.clone(), false));
        parts.push(ineq(&v - z, false));
    }
    verdict_all(parts)
}

pub fn region_predicates(t: &ExponentTuple, which: PredicateId) -> Result<RegionVerdict> {
    let m = t.arity();
    if m == 0 {
        return Err(Error::InvalidInput("empty exponent tuple".into()));
    }
    let sum: Rat = t.inv_inputs.iter().fold(Rat::zero(), |a, b| a + b);
    match which {
        PredicateId::ConvVk => {
            let (_, k) = require_context(t)?;
            Ok(conv_vk_margin(t, k))
        }
        PredicateId::ThetaQuasiBanach => {
            let (_, k) = require_context(t)?;
            let target = rat(2 * (k as i64 + 1), k as i64 + 2);
            Ok(verdict_all(vec![
                nested(conv_vk_margin(t, k)),
                equality(t.inv_output.clone() - &target),
                equality(sum - target),
            ]))
        }
        PredicateId::SigmaImproving => {
            let (d, k) = require_context(t)?;
            let mut parts = vec![
                ineq(sum.clone() - rat(m as i64 + 1, 2), false),
                ineq(
                    rat(2 * d as i64 + k as i64, 2 * d as i64) - &sum,
                    true,
                ),
            ];
            for z in &t.inv_inputs {
                parts.push(ineq(rat_i(1) - z, false)); // p_j >= 1
                parts.push(ineq(z - rat(1, 2), false)); // p_j <= 2
            }
            Ok(verdict_all(parts))
        }
        PredicateId::SigmaQuasiBanach => {
            let base = region_predicates(t, PredicateId::SigmaImproving)?;
            Ok(verdict_all(vec![
                nested(base),
                equality(t.inv_output.clone() - sum),
            ]))
        }
        PredicateId::SigmaSmoothing => {
            let mut parts = vec![equality(sum - rat(1, 2))];
            for z in &t.inv_inputs {
                parts.push(ineq(rat(1, 2) - z, false)); // p_j >= 2
            }
            Ok(verdict_all(parts))
        }
        PredicateId::BlStrongType => {
            let (d, k) = require_context(t)?;
            if k == 0 || k >= d + 1 {
                return Err(Error::InvalidInput("need 1 <= k <= d".into()));
            }
            let mut parts = Vec::new();
            for l in 0..k as i64 {
                let lhs = rat(m as i64 - l - 1, m as i64);
                let rhs = rat((d - k) as i64, d as i64) * rat_i(k as i64 - l);
                parts.push(ineq(lhs - rhs, false));
            }
            Ok(verdict_all(parts))
        }
        PredicateId::LacunaryTheta => {
            let (_, k) = require_context(t)?;
            let threshold = rat(2 * (k as i64 + 1), k as i64 + 2);
            Ok(verdict_all(vec![
                nested(conv_vk_margin(t, k)),
                ineq(threshold - &t.inv_output, true),
            ]))
        }
        PredicateId::LacunarySigma => {
            let (d, k) = require_context(t)?;
            let base = region_predicates(t, PredicateId::SigmaQuasiBanach)?;
            let curvature = ineq(
                rat_i(k as i64) - rat_i((m as i64 - 1) * d as i64),
                true,
            );
            Ok(verdict_all(vec![nested(base), curvature]))
        }
        PredicateId::BilinearSphere => {
            if m != 2 {
                return Err(Error::InvalidInput("bilinear predicate needs m = 2".into()));
            }
            let mut parts = vec![equality(t.inv_output.clone() - sum)];
            for z in &t.inv_inputs {
                parts.push(ineq(rat_i(1) - z, true)); // p_j > 1
                parts.push(ineq(z.clone(), false)); // p_j <= infinity
            }
            Ok(verdict_all(parts))
        }
    }
}

/// JSON rendering of a datum with "num/den" rational entries.
pub fn datum_to_json(datum: &BLDatum) -> serde_json::Value {
    use serde_json::{json, Value};
    let maps: Vec<Value> = datum
        .maps
        .iter()
        .map(|m| {
            let rows: Vec<Value> = (0..m.rows())
                .map(|r| {
                    Value::Array(
                        (0..m.cols())
                            .map(|c| Value::String(rat_to_string(m.at(r, c))))
                            .collect(),
                    )
                })
                .collect();
            Value::Array(rows)
        })
        .collect();
    let exps: Vec<Value> = datum
        .exponents
        .iter()
        .map(|c| Value::String(rat_to_string(c)))
        .collect();
    let mut obj = json!({
        "ambient": datum.ambient,
        "maps": maps,
        "exponents": exps,
    });
    if let Some((d, k)) = datum.block_split {
        obj["block_split"] = json!([d, k]);
    }
    obj
}

pub fn datum_from_json(value: &serde_json::Value) -> Result<BLDatum> {
    let ambient = value
        .get("ambient")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::InvalidInput("datum JSON needs an integer 'ambient'".into()))?
        as usize;
    let parse_rat = |v: &serde_json::Value, pos: String| -> Result<Rat> {
        match v {
            serde_json::Value::String(s) => rat_from_string(s).ok_or(Error::MalformedRational {
                text: s.clone(),
                position: pos,
            }),
            serde_json::Value::Number(n) if n.is_i64() => {
                Ok(Rat::from_integer(BigInt::from(n.as_i64().unwrap())))
            }
            other => Err(Error::MalformedRational {
                text: other.to_string(),
                position: pos,
            }),
        }
    };
    let maps_json = value
        .get("maps")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::InvalidInput("datum JSON needs a 'maps' array".into()))?;
    let mut maps = Vec::new();
    for (mj, mv) in maps_json.iter().enumerate() {
        let rows_json = mv
            .as_array()
            .ok_or_else(|| Error::InvalidInput(format!("map {mj} is not an array")))?;
        let mut rows = Vec::new();
        for (rj, rv) in rows_json.iter().enumerate() {
            let cells = rv
                .as_array()
                .ok_or_else(|| Error::InvalidInput(format!("map {mj} row {rj} is not an array")))?;
            let mut row = Vec::new();
            for (cj, cv) in cells.iter().enumerate() {
                row.push(parse_rat(cv, format!("maps[{mj}][{rj}][{cj}]"))?);
            }
            rows.push(row);
        }
        maps.push(RatMat::from_rows(rows));
    }
    let exps_json = value
        .get("exponents")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::InvalidInput("datum JSON needs an 'exponents' array".into()))?;
    let mut exponents = Vec::new();
    for (j, ev) in exps_json.iter().enumerate() {
        exponents.push(parse_rat(ev, format!("exponents[{j}]"))?);
    }
    let mut datum = BLDatum::new(ambient, maps, exponents)?;
    if let Some(bs) = value.get("block_split").and_then(|v| v.as_array()) {
        if let (Some(d), Some(k)) = (
            bs.first().and_then(|v| v.as_u64()),
            bs.get(1).and_then(|v| v.as_u64()),
        ) {
            datum.block_split = Some((d as usize, k as usize));
        }
    }
    Ok(datum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat_i;

    fn quarter_turn_pair() -> RotationFamily {
        RotationFamily::new(
            2,
            vec![vec![1.0, 0.0, 0.0, 1.0], vec![0.0, -1.0, 1.0, 0.0]],
        )
        .unwrap()
    }

    fn axes_family_3d() -> RotationFamily {
        // first columns e1, e2, e3: three pairwise non-collinear lines
        RotationFamily::new(
            3,
            vec![
                vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                vec![0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
            ],
        )
        .unwrap()
    }

    fn planes_family_3d() -> RotationFamily {
        // first-two-column planes (e1,e2), (e3,e2), (e1,e3): pairwise
        // intersections are lines, the triple intersection is trivial
        RotationFamily::new(
            3,
            vec![
                vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                vec![0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0],
            ],
        )
        .unwrap()
    }

    fn identity_datum(n: usize) -> BLDatum {
        BLDatum::new(n, vec![RatMat::identity(n)], vec![rat_i(1)]).unwrap()
    }

    #[test]
    fn scaling_identity_and_structured() {
        let id = identity_datum(3);
        assert!(scaling_check(&id).pass);

        // ambient R^(d+k), m maps to R^d with c = 1/m, plus the
        // projection with c = k/d: sum = d + k
        let datum = build_structured_datum(&quarter_turn_pair(), 2, 1, None).unwrap();
        let sc = scaling_check(&datum);
        assert!(sc.pass);
        assert_eq!(sc.lhs, rat_i(3));
        assert_eq!(sc.rhs, rat_i(3));
    }

    #[test]
    fn necessary_checks() {
        assert!(necessary_check(&identity_datum(2)).pass);

        // two identical maps with c = (1/4, 1/4): exponent sum below 1
        let m = RatMat::identity(2);
        let datum = BLDatum::new(2, vec![m.clone(), m], vec![rat(1, 4), rat(1, 4)]).unwrap();
        let nc = necessary_check(&datum);
        assert!(!nc.pass);
        assert!(nc.exponent_sum < Rat::one());

        let structured = build_structured_datum(&quarter_turn_pair(), 2, 1, None).unwrap();
        let nc = necessary_check(&structured);
        assert!(nc.pass, "{nc:?}");
        assert_eq!(nc.kernel_intersection_dim, 0);
    }

    #[test]
    fn k_pi_is_critical_for_structured_datum() {
        let datum = build_structured_datum(&quarter_turn_pair(), 2, 1, None).unwrap();
        // K_pi = ker of the projection = {(0, 0, y)}
        let k_pi = Subspace::span(&RatMat::from_i64_rows(&[&[0], &[0], &[1]]));
        let slack = subspace_slack(&datum, &k_pi);
        assert!(slack.is_zero(), "slack = {}", rat_to_string(&slack));
        // zero subspace: slack 0, never a violation
        assert!(subspace_slack(&datum, &Subspace::zero(3)).is_zero());
    }

    #[test]
    fn lattice_contains_the_structured_subspaces() {
        let datum = build_structured_datum(&quarter_turn_pair(), 2, 1, None).unwrap();
        let lattice = generate_subspace_lattice(&datum, 1, 0).unwrap();
        assert!(!lattice.truncated);
        let k_pi = Subspace::span(&RatMat::from_i64_rows(&[&[0], &[0], &[1]]));
        let k_pi_perp = Subspace::span(&RatMat::from_i64_rows(&[&[1, 0], &[0, 1], &[0, 0]]));
        // K_mu = span((Theta_mu^1, 0)): first columns e1 and e2
        let k_1 = Subspace::span(&RatMat::from_i64_rows(&[&[1], &[0], &[0]]));
        let k_2 = Subspace::span(&RatMat::from_i64_rows(&[&[0], &[1], &[0]]));
        for target in [&k_pi, &k_pi_perp, &k_1, &k_2] {
            assert!(
                lattice.family.iter().any(|s| s.eq_space(target)),
                "lattice misses a structured subspace"
            );
        }
        // zero and full present
        assert!(lattice.family.iter().any(|s| s.dim() == 0));
        assert!(lattice.family.iter().any(|s| s.dim() == 3));
    }

    #[test]
    fn lattice_closure_idempotent() {
        let datum = build_structured_datum(&quarter_turn_pair(), 2, 1, None).unwrap();
        let a = generate_subspace_lattice(&datum, 3, 0).unwrap();
        let b = generate_subspace_lattice(&datum, 4, 0).unwrap();
        assert_eq!(a.family.len(), b.family.len());
        for s in &a.family {
            assert!(b.family.iter().any(|t| t.eq_space(s)));
        }
    }

    #[test]
    fn structured_data_pass_lattice_transversality() {
        // (d, k, m) presets whose condition family holds
        let cases: Vec<BLDatum> = vec![
            build_structured_datum(&quarter_turn_pair(), 2, 1, None).unwrap(),
            build_structured_datum(&axes_family_3d(), 3, 1, None).unwrap(),
            build_structured_datum(&planes_family_3d(), 3, 2, None).unwrap(),
        ];
        for datum in &cases {
            assert!(scaling_check(datum).pass);
            assert!(necessary_check(datum).pass);
            let lattice = generate_subspace_lattice(datum, 2, 7).unwrap();
            let tv = transversality_check(datum, &lattice.family).unwrap();
            assert!(
                tv.pass,
                "ambient {} min slack {}",
                datum.ambient(),
                rat_to_string(&tv.min_slack)
            );
            // K_pi shows up among the critical subspaces
            let (d, k) = datum.block_split().unwrap();
            let mut k_pi_basis = RatMat::zeros(d + k, k);
            for i in 0..k {
                *k_pi_basis.at_mut(d + i, i) = Rat::one();
            }
            let k_pi = Subspace::span(&k_pi_basis);
            assert!(tv.critical.iter().any(|s| s.eq_space(&k_pi)));
        }
    }

    #[test]
    fn degenerate_family_fails_with_witness() {
        // Theta_1 = Theta_2: the common kernel of the two block maps
        // violates transversality
        let id = vec![1.0, 0.0, 0.0, 1.0];
        let fam = RotationFamily::new_allow_dependent(2, vec![id.clone(), id]).unwrap();
        let datum = build_structured_datum(&fam, 2, 1, None).unwrap();
        let lattice = generate_subspace_lattice(&datum, 2, 0).unwrap();
        let tv = transversality_check(&datum, &lattice.family).unwrap();
        assert!(!tv.pass);
        assert!(tv.min_slack.is_negative());
        let worst = tv.worst.unwrap();
        assert!(worst.dim() > 0);
        assert!(subspace_slack(&datum, &worst).is_negative());
    }

    #[test]
    fn small_m_fails_both_predicate_and_transversality() {
        // d = 3, k = 2, m = 2: (m-1)/m = 1/2 < 2/3 = (d-k)k/d
        let fam = RotationFamily::new(
            3,
            vec![
                vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0],
            ],
        )
        .unwrap();
        let t = ExponentTuple::from_lebesgue(&[Some(2), Some(2)], Some(3)).with_context(3, 2);
        let verdict = region_predicates(&t, PredicateId::BlStrongType).unwrap();
        assert!(!verdict.pass);
        assert!(verdict.margin.is_negative());

        let datum = build_structured_datum(&fam, 3, 2, None).unwrap();
        let lattice = generate_subspace_lattice(&datum, 2, 0).unwrap();
        let tv = transversality_check(&datum, &lattice.family).unwrap();
        assert!(!tv.pass, "min slack {}", rat_to_string(&tv.min_slack));
    }

    #[test]
    fn equality_case_of_the_condition_family() {
        // d = 3, k = 2, m = 3: 2/3 = 2/3 holds with equality
        let t = ExponentTuple::from_lebesgue(&[Some(3); 3], Some(3)).with_context(3, 2);
        let verdict = region_predicates(&t, PredicateId::BlStrongType).unwrap();
        assert!(verdict.pass);
        assert!(verdict.margin.is_zero());
    }

    #[test]
    fn critical_split_of_structured_datum() {
        let datum = build_structured_datum(&quarter_turn_pair(), 2, 1, None).unwrap();
        let k_pi = Subspace::span(&RatMat::from_i64_rows(&[&[0], &[0], &[1]]));
        let (restricted, quotient) = critical_split(&datum, &k_pi).unwrap();
        // restricted ambient k, quotient ambient d; both rescale exactly
        assert_eq!(restricted.ambient(), 1);
        assert_eq!(quotient.ambient(), 2);
        assert!(scaling_check(&restricted).pass);
        assert!(scaling_check(&quotient).pass);
        // both parts pass transversality over their own lattices
        for part in [&restricted, &quotient] {
            let lattice = generate_subspace_lattice(part, 2, 3).unwrap();
            let tv = transversality_check(part, &lattice.family).unwrap();
            assert!(tv.pass, "min slack {}", rat_to_string(&tv.min_slack));
        }
    }

    #[test]
    fn critical_split_rejects_noncritical_and_handles_full() {
        let datum = build_structured_datum(&quarter_turn_pair(), 2, 1, None).unwrap();
        // K_1 has positive slack: not critical
        let k_1 = Subspace::span(&RatMat::from_i64_rows(&[&[1], &[0], &[0]]));
        assert!(subspace_slack(&datum, &k_1).is_positive());
        assert!(critical_split(&datum, &k_1).is_err());

        // the full space is critical by scaling; its quotient is trivial
        let full = Subspace::full(3);
        assert!(subspace_slack(&datum, &full).is_zero());
        let (restricted, quotient) = critical_split(&datum, &full).unwrap();
        assert_eq!(restricted.ambient(), 3);
        assert_eq!(quotient.ambient(), 0);
    }

    #[test]
    fn verdicts_invariant_under_permutation_and_rescaling() {
        let datum = build_structured_datum(&axes_family_3d(), 3, 1, None).unwrap();
        let lattice = generate_subspace_lattice(&datum, 2, 1).unwrap();
        let base = transversality_check(&datum, &lattice.family).unwrap();

        let permuted = datum.permuted(&[2, 0, 3, 1]);
        let tv = transversality_check(&permuted, &lattice.family).unwrap();
        assert_eq!(base.pass, tv.pass);
        assert_eq!(base.min_slack, tv.min_slack);

        let rescaled = datum.rescaled(&rat(7, 3));
        let tv = transversality_check(&rescaled, &lattice.family).unwrap();
        assert_eq!(base.pass, tv.pass);
        assert_eq!(base.min_slack, tv.min_slack);
        assert_eq!(scaling_check(&rescaled).pass, scaling_check(&datum).pass);
    }

    #[test]
    fn conv_vk_vertex_has_zero_margin() {
        // vertex with two coordinates (k+1)/(k+2), rest 0
        let k = 1usize;
        let v = rat(2, 3);
        let t = ExponentTuple::new(vec![v.clone(), v, Rat::zero()], rat(4, 3)).with_context(2, k);
        let verdict = region_predicates(&t, PredicateId::ConvVk).unwrap();
        assert!(verdict.pass);
        assert!(verdict.margin.is_zero());
        // interior point: positive margin
        let t2 = ExponentTuple::new(vec![rat(1, 2), rat(1, 2), rat(1, 3)], rat(4, 3))
            .with_context(2, k);
        let v2 = region_predicates(&t2, PredicateId::ConvVk).unwrap();
        assert!(v2.pass && v2.margin.is_positive());
        // outside: sum off the hyperplane
        let t3 =
            ExponentTuple::new(vec![rat(1, 2), rat(1, 2), rat(1, 2)], rat(4, 3)).with_context(2, k);
        let v3 = region_predicates(&t3, PredicateId::ConvVk).unwrap();
        assert!(!v3.pass && v3.margin.is_negative());
    }

    #[test]
    fn lacunary_theta_threshold_is_sharp() {
        // m = 2, k = d - 1 = 1: threshold 1/p = 2d/(d+1) = 4/3
        let v = rat(2, 3);
        let inside = ExponentTuple::new(vec![v.clone(), v.clone()], rat(5, 4)).with_context(2, 1);
        assert!(region_predicates(&inside, PredicateId::LacunaryTheta)
            .unwrap()
            .pass);
        let boundary = ExponentTuple::new(vec![v.clone(), v.clone()], rat(4, 3)).with_context(2, 1);
        let verdict = region_predicates(&boundary, PredicateId::LacunaryTheta).unwrap();
        assert!(!verdict.pass, "strict threshold");
        assert!(verdict.margin.is_zero());
        let outside = ExponentTuple::new(vec![v.clone(), v], rat(3, 2)).with_context(2, 1);
        assert!(!region_predicates(&outside, PredicateId::LacunaryTheta)
            .unwrap()
            .pass);
    }

    #[test]
    fn holder_defect_displayed_values() {
        // D(m,...,m; m) = (m-1)/m
        for m in 2..=4i64 {
            let t = ExponentTuple::from_lebesgue(&vec![Some(m); m as usize], Some(m));
            assert_eq!(holder_defect(&t), rat(m - 1, m));
        }
        // D(m,...,m; d) = (d-1)/d
        let (m, d) = (3i64, 2i64);
        let t = ExponentTuple::from_lebesgue(&vec![Some(m); m as usize], Some(d));
        assert_eq!(holder_defect(&t), rat(d - 1, d));
        // D(m(d+1)/d, ...; d+1) = (d-1)/(d+1): inputs are rational exponents
        let inv_in = rat(d, m * (d + 1));
        let t = ExponentTuple::new(vec![inv_in; m as usize], rat(1, d + 1));
        assert_eq!(holder_defect(&t), rat(d - 1, d + 1));
        // one slot, equal p: defect 0
        let t = ExponentTuple::from_lebesgue(&[Some(5)], Some(5));
        assert!(holder_defect(&t).is_zero());
        // permutation invariance
        let a = ExponentTuple::new(vec![rat(1, 2), rat(1, 3), rat(1, 7)], rat(1, 2));
        let b = ExponentTuple::new(vec![rat(1, 7), rat(1, 2), rat(1, 3)], rat(1, 2));
        assert_eq!(holder_defect(&a), holder_defect(&b));
    }

    #[test]
    fn sigma_ranges() {
        // m = 2, d = 2, k = 3 (S^3 in R^4): 3/2 <= sum < 7/4
        let t = ExponentTuple::new(vec![rat(3, 4), rat(3, 4)], rat(3, 2)).with_context(2, 3);
        assert!(region_predicates(&t, PredicateId::SigmaQuasiBanach).unwrap().pass);
        assert!(region_predicates(&t, PredicateId::LacunarySigma).unwrap().pass);
        // for d = 1, k = 1 (bilinear circle) the window [3/2, 3/2) is
        // empty, matching the paper's d >= 2 hypothesis
        let t1 = ExponentTuple::new(vec![rat(3, 4), rat(3, 4)], rat(3, 2)).with_context(1, 1);
        assert!(!region_predicates(&t1, PredicateId::SigmaQuasiBanach).unwrap().pass);
        // sum too large
        let t2 = ExponentTuple::new(vec![rat_i(1), rat_i(1)], rat_i(2)).with_context(2, 3);
        assert!(!region_predicates(&t2, PredicateId::SigmaImproving).unwrap().pass);
        // smoothing: p_j >= 2 with sum 1/2
        let t3 = ExponentTuple::new(vec![rat(1, 4), rat(1, 4)], rat(1, 2));
        assert!(region_predicates(&t3, PredicateId::SigmaSmoothing).unwrap().pass);
        // bilinear sphere: p_j > 1 strictly
        let t4 = ExponentTuple::new(vec![rat(1, 2), rat(1, 2)], rat_i(1));
        assert!(region_predicates(&t4, PredicateId::BilinearSphere).unwrap().pass);
        let t5 = ExponentTuple::new(vec![rat_i(1), rat(1, 2)], rat(3, 2));
        assert!(!region_predicates(&t5, PredicateId::BilinearSphere).unwrap().pass);
    }

    #[test]
    fn datum_json_roundtrip_and_rejects_malformed() {
        let datum = build_structured_datum(&quarter_turn_pair(), 2, 1, None).unwrap();
        let json = datum_to_json(&datum);
        let back = datum_from_json(&json).unwrap();
        assert_eq!(back.ambient(), datum.ambient());
        assert_eq!(back.exponents(), datum.exponents());
        assert_eq!(back.maps().len(), datum.maps().len());
        for (a, b) in back.maps().iter().zip(datum.maps()) {
            assert_eq!(a, b);
        }

        let bad = serde_json::json!({
            "ambient": 2,
            "maps": [[["1", "x/3"]]],
            "exponents": ["1"],
        });
        match datum_from_json(&bad) {
            Err(Error::MalformedRational { position, .. }) => {
                assert_eq!(position, "maps[0][0][1]");
            }
            other => panic!("expected malformed rational, got {other:?}"),
        }
    }
}
