//! JSON experiment configurations. Exponents are exact rationals written
//! as "num/den" strings (reciprocals; infinity is "0").

use avelab_core::exact::{rat_from_string, rat_to_string};
use avelab_core::grid::DomainBox;
use avelab_core::mlavg::{AvgSpec, InterpMode};
use avelab_core::surface::{
    graph_quadrature, product_sphere_quadrature, sphere_quadrature, GraphSurfaceSpec,
    QuadraticGraph, RotationFamily, SurfaceQuadrature,
};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::{LabError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub dim: usize,
    pub side: f64,
    pub samples: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<DomainBox> {
        Ok(DomainBox::new(self.dim, self.side, self.samples)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum SurfaceConfig {
    /// Unit sphere S^(d-1) in R^d.
    Sphere { d: usize, nodes: usize },
    /// Product-embedded sphere S^(m*d-1) in R^(m*d).
    ProductSphere { m: usize, d: usize, nodes: usize },
    /// Quadratic graph patch with a smooth cutoff.
    Paraboloid { k: usize, rank: usize, grid: usize },
    FlatPatch { k: usize, grid: usize },
}

impl SurfaceConfig {
    pub fn build(&self) -> Result<SurfaceQuadrature> {
        Ok(match self {
            SurfaceConfig::Sphere { d, nodes } => sphere_quadrature(*d, *nodes)?,
            SurfaceConfig::ProductSphere { m, d, nodes } => {
                product_sphere_quadrature(*m, *d, *nodes)?
            }
            SurfaceConfig::Paraboloid { k, rank, grid } => {
                let spec = GraphSurfaceSpec::new(QuadraticGraph::paraboloid(*k, *rank)?, (*rank).max(1));
                graph_quadrature(&spec, *grid)?
            }
            SurfaceConfig::FlatPatch { k, grid } => {
                let spec = GraphSurfaceSpec::new(QuadraticGraph::flat(*k, 1), 1);
                graph_quadrature(&spec, *grid)?
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum RotationConfig {
    /// Identity and the quarter rotation in the plane.
    QuarterTurnPair,
    /// Three rotations in R^3 sending e1 to e1, e2, e3.
    Axes3,
    /// Three rotations in R^3 whose leading 2-column planes meet pairwise
    /// in lines and triply in the origin.
    Planes3,
    /// Two equal matrices (violates independence and the simplex
    /// condition); for failure-witness runs.
    DegeneratePair { d: usize },
    /// Explicit row-major matrices.
    Explicit { dim: usize, matrices: Vec<Vec<f64>> },
}

impl RotationConfig {
    pub fn build(&self) -> Result<RotationFamily> {
        Ok(match self {
            RotationConfig::QuarterTurnPair => RotationFamily::new(
                2,
                vec![vec![1.0, 0.0, 0.0, 1.0], vec![0.0, -1.0, 1.0, 0.0]],
            )?,
            RotationConfig::Axes3 => RotationFamily::new(
                3,
                vec![
                    vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                    vec![0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                    vec![0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
                ],
            )?,
            RotationConfig::Planes3 => RotationFamily::new(
                3,
                vec![
                    vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                    vec![0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
                    vec![1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0],
                ],
            )?,
            RotationConfig::DegeneratePair { d } => {
                let mut id = vec![0.0; d * d];
                for i in 0..*d {
                    id[i * d + i] = 1.0;
                }
                RotationFamily::new_allow_dependent(*d, vec![id.clone(), id])?
            }
            RotationConfig::Explicit { dim, matrices } => {
                RotationFamily::new(*dim, matrices.clone())?
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    Cubic,
    Exact,
}

impl Interpolation {
    pub fn mode(&self) -> InterpMode {
        match self {
            Interpolation::Cubic => InterpMode::Cubic,
            Interpolation::Exact => InterpMode::Exact,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub surface: SurfaceConfig,
    /// Present for the rotation-family variant; absent for the
    /// block-split variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotations: Option<RotationConfig>,
    pub scale_min: i32,
    pub scale_max: i32,
    pub interpolation: Interpolation,
}

impl OperatorConfig {
    pub fn build(&self) -> Result<AvgSpec> {
        let quad = self.surface.build()?;
        let spec = match (&self.rotations, &self.surface) {
            (Some(rc), _) => {
                AvgSpec::theta(quad, rc.build()?, (self.scale_min, self.scale_max))?
            }
            (None, SurfaceConfig::ProductSphere { d, .. }) => {
                AvgSpec::sigma(quad, *d, (self.scale_min, self.scale_max))?
            }
            (None, _) => {
                return Err(LabError::Config(
                    "non-product surface needs a rotation family".into(),
                ))
            }
        };
        Ok(spec.with_interpolation(self.interpolation.mode()))
    }

    /// Scale range clipped to the dilates the box admits.
    pub fn admissible_spec(&self, domain: &DomainBox) -> Result<(AvgSpec, bool)> {
        let spec = self.build()?;
        let admissible = spec.admissible_scales(domain);
        if admissible.is_empty() {
            return Err(LabError::Config(
                "no admissible dyadic scale for this box".into(),
            ));
        }
        let clipped = admissible.len() != (self.scale_max - self.scale_min + 1) as usize;
        let mut spec = spec;
        spec.scale_range = (admissible[0], *admissible.last().unwrap());
        Ok((spec, clipped))
    }
}

/// Exponent tuple in config form: reciprocals as rational strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentsConfig {
    pub inv_inputs: Vec<String>,
    pub inv_output: String,
}

impl ExponentsConfig {
    pub fn parse(&self) -> Result<avelab_core::bl::ExponentTuple> {
        let parse = |s: &String| -> Result<BigRational> {
            rat_from_string(s)
                .ok_or_else(|| LabError::Config(format!("bad rational '{s}' in exponents")))
        };
        let inv_inputs = self.inv_inputs.iter().map(parse).collect::<Result<Vec<_>>>()?;
        let inv_output = parse(&self.inv_output)?;
        Ok(avelab_core::bl::ExponentTuple::new(inv_inputs, inv_output))
    }

    pub fn from_tuple(t: &avelab_core::bl::ExponentTuple) -> Self {
        ExponentsConfig {
            inv_inputs: t.inv_inputs.iter().map(rat_to_string).collect(),
            inv_output: rat_to_string(&t.inv_output),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    BallIndicators,
    KnappCaps,
    GaussianBumps,
    Modes,
}

/// How the per-slot supports relate: aligned places slot j's bump at
/// `x0 - (slot j offset of the base node)` so a single-scale average
/// activates; concentric stacks every slot at the box center, the
/// extremal setup for lacunary maximal sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyAlignment {
    Aligned,
    Concentric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    pub alignment: FamilyAlignment,
    /// Eccentricity exponents t; the family parameter is 2^-t.
    pub eccentricities: Vec<u32>,
    /// Base radius multiplying the eccentricity.
    pub base_radius: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            kind: FamilyKind::BallIndicators,
            alignment: FamilyAlignment::Aligned,
            eccentricities: vec![1, 2, 3, 4, 5, 6],
            base_radius: 1.0,
        }
    }
}

fn default_trials() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormSweepConfig {
    pub grid: GridConfig,
    pub operator: OperatorConfig,
    pub exponents: ExponentsConfig,
    /// (d, k) context for the region predicate.
    pub context: (usize, usize),
    pub predicate: String,
    pub family: FamilyConfig,
    /// Scale used for the single-scale sweep.
    pub scale: i32,
    /// |slope| threshold asserted when the tuple is inside the region.
    pub flat_slope_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecaySweepConfig {
    pub grid: GridConfig,
    pub operator: OperatorConfig,
    /// Band offsets n = 1..=max_band_offset, applied as (n, ..., n).
    pub max_band_offset: i64,
    /// Curvature rank k fixing the weak norm exponent (k+2)/(2(k+1)).
    pub curvature_rank: usize,
    /// Gaussian bump count per input.
    #[serde(default = "default_trials")]
    pub bumps: usize,
    /// Fitted log2 slope of the band sums must be at most this.
    pub decay_slope_max: f64,
    /// Allowed log-log growth exponent of the weak norms (m + 0.5).
    pub growth_slope_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionScanConfig {
    /// Exact tuples to tabulate.
    pub tuples: Vec<ExponentsConfig>,
    pub context: (usize, usize),
    pub predicate: String,
    /// Optional empirical column driven by a small norm sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<Box<NormSweepConfig>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlCheckConfig {
    /// Structured preset: rotations plus the (d, k) split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotations: Option<RotationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<(usize, usize)>,
    /// Explicit datum (overrides the preset) in the rational JSON form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datum: Option<serde_json::Value>,
    pub lattice_depth: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CzVerifyConfig {
    pub grid: GridConfig,
    /// Inverse input exponents p_j (rational strings).
    pub inv_inputs: Vec<String>,
    /// Inverse of the weak-type target p.
    pub inv_output: String,
    /// log2 of the level grid: levels 2^lo ..= 2^hi.
    pub level_log2_range: (i32, i32),
    /// Height prefactor C < 1/2.
    pub height_prefactor: f64,
    /// Exceptional-set dilation factor.
    pub dilation: f64,
    #[serde(default = "default_trials")]
    pub bumps: usize,
    /// Also run one dyadic grid refinement and compare constants.
    pub refine: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BilinearSphereConfig {
    pub grid: GridConfig,
    pub d: usize,
    pub nodes: usize,
    pub exponents: ExponentsConfig,
    pub scale_min: i32,
    pub scale_max: i32,
    pub family: FamilyConfig,
    pub flat_slope_tol: f64,
    /// Tolerance when comparing a growing slope against the derived
    /// indicator scaling exponent.
    pub scaling_match_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    NormSweep(NormSweepConfig),
    DecaySweep(DecaySweepConfig),
    RegionScan(RegionScanConfig),
    BlCheck(BlCheckConfig),
    CzVerify(CzVerifyConfig),
    BilinearSphere(BilinearSphereConfig),
}

pub fn parse_predicate(name: &str) -> Result<avelab_core::bl::PredicateId> {
    use avelab_core::bl::PredicateId::*;
    Ok(match name {
        "conv-vk" => ConvVk,
        "theta-quasibanach" => ThetaQuasiBanach,
        "sigma-improving" => SigmaImproving,
        "sigma-quasibanach" => SigmaQuasiBanach,
        "sigma-smoothing" => SigmaSmoothing,
        "bl-strongtype" => BlStrongType,
        "lacunary-theta" => LacunaryTheta,
        "lacunary-sigma" => LacunarySigma,
        "bilinear-sphere" => BilinearSphere,
        other => {
            return Err(LabError::Config(format!(
                "unknown predicate '{other}'; expected one of conv-vk, theta-quasibanach, \
                 sigma-improving, sigma-quasibanach, sigma-smoothing, bl-strongtype, \
                 lacunary-theta, lacunary-sigma, bilinear-sphere"
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip() {
        let cfg = ExperimentConfig::NormSweep(NormSweepConfig {
            grid: GridConfig {
                dim: 2,
                side: 16.0,
                samples: 64,
            },
            operator: OperatorConfig {
                surface: SurfaceConfig::Sphere { d: 2, nodes: 64 },
                rotations: Some(RotationConfig::QuarterTurnPair),
                scale_min: 0,
                scale_max: 0,
                interpolation: Interpolation::Exact,
            },
            exponents: ExponentsConfig {
                inv_inputs: vec!["1/2".into(), "1/2".into()],
                inv_output: "1/2".into(),
            },
            context: (2, 1),
            predicate: "bl-strongtype".into(),
            family: FamilyConfig::default(),
            scale: 0,
            flat_slope_tol: 0.1,
        });
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        let text2 = serde_json::to_string_pretty(&back).unwrap();
        assert_eq!(text, text2);
    }

    #[test]
    fn bad_predicate_name_rejected() {
        assert!(parse_predicate("no-such").is_err());
    }
}
