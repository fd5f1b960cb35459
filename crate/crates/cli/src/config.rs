//! Strict JSON experiment configs, one shape per subcommand.

use std::f64::consts::SQRT_2;

use centralizer_core::actions::ActionSpec;
use centralizer_core::field::ScalarField;
use centralizer_core::linalg::Matrix;
use centralizer_core::probe::Notion;
use centralizer_core::suspension::{BaseAction, ChainResolution, SuspensionPoint, TransferOptions};
use centralizer_core::VectorFieldSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::Format;

/// `system` entries are either a catalog name or an inline definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemRef<T> {
    Named(String),
    Inline(T),
}

pub trait Catalog: Sized {
    const KIND: &'static str;
    fn named(name: &str) -> Option<Self>;
    fn names() -> &'static [&'static str];
}

impl<T: Catalog + Clone> SystemRef<T> {
    pub fn resolve(&self) -> CliResult<T> {
        match self {
            SystemRef::Inline(t) => Ok(t.clone()),
            SystemRef::Named(n) => T::named(n).ok_or_else(|| {
                CliError::validation(format!("unknown {} '{n}' (known: {})", T::KIND, T::names().join(", ")))
            }),
        }
    }
}

impl Catalog for VectorFieldSpec {
    const KIND: &'static str = "vector field";

    fn named(name: &str) -> Option<Self> {
        Some(match name {
            "lorenz" => VectorFieldSpec::lorenz_classic(),
            "identity_flow" => VectorFieldSpec::Constant { vector: vec![0.0, 0.0] },
            "torus_irrational" => VectorFieldSpec::TorusTranslation { alpha: vec![1.0, SQRT_2] },
            "torus_rational" => VectorFieldSpec::TorusTranslation { alpha: vec![2.0, 1.0] },
            "damped_torus" => VectorFieldSpec::DampedTorus { alpha: [1.0, SQRT_2], center: [0.5, 0.5], sharpness: 4.0 },
            "linear_saddle" => VectorFieldSpec::Linear { matrix: Matrix::diag(&[-1.0, 3f64.sqrt()]) },
            "resonant_sink" => VectorFieldSpec::Linear { matrix: Matrix::diag(&[-1.0, -2.0]) },
            "torus_orbit_invariant" => VectorFieldSpec::Scaled {
                factor: ScalarField::Trig { offset: 2.0, amplitude: 1.0, wave: vec![1.0, -2.0], phase: 0.0 },
                base: Box::new(VectorFieldSpec::TorusTranslation { alpha: vec![2.0, 1.0] }),
            },
            _ => return None,
        })
    }

    fn names() -> &'static [&'static str] {
        &[
            "lorenz",
            "identity_flow",
            "torus_irrational",
            "torus_rational",
            "damped_torus",
            "linear_saddle",
            "resonant_sink",
            "torus_orbit_invariant",
        ]
    }
}

fn translations(gens: &[[f64; 2]]) -> ActionSpec {
    ActionSpec { generators: gens.iter().map(|a| VectorFieldSpec::TorusTranslation { alpha: a.to_vec() }).collect() }
}

impl Catalog for ActionSpec {
    const KIND: &'static str = "action";

    fn named(name: &str) -> Option<Self> {
        Some(match name {
            "torus_rotations" => translations(&[[1.0, 0.0], [0.0, 1.0]]),
            "parallel_rotations" => translations(&[[1.0, SQRT_2], [SQRT_2, 2.0]]),
            "trivial_plane" => ActionSpec {
                generators: vec![VectorFieldSpec::Constant { vector: vec![0.0, 0.0] }; 2],
            },
            _ => return None,
        })
    }

    fn names() -> &'static [&'static str] {
        &["torus_rotations", "parallel_rotations", "trivial_plane"]
    }
}

impl Catalog for BaseAction {
    const KIND: &'static str = "base action";

    fn named(name: &str) -> Option<Self> {
        match name {
            "identity" => BaseAction::identity(1, 1).ok(),
            "identity_z2" => BaseAction::identity(2, 2).ok(),
            "rotation" => BaseAction::rotation(SQRT_2 - 1.0).ok(),
            "two_rotations" => BaseAction::rotations(&[SQRT_2 - 1.0, 0.5 * (5f64.sqrt() - 1.0)]).ok(),
            "cat_map" => BaseAction::cat_map().ok(),
            "cat_pair" => BaseAction::cat_pair().ok(),
            _ => None,
        }
    }

    fn names() -> &'static [&'static str] {
        &["identity", "identity_z2", "rotation", "two_rotations", "cat_map", "cat_pair"]
    }
}

/// Where the report goes; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<String>,
    pub format: Option<Format>,
}

/// Fields shared by every config.
pub trait Envelope {
    fn subcommand(&self) -> Option<&str>;
    fn seed(&self) -> Option<u64>;
    fn output(&self) -> Option<&OutputSpec>;
}

macro_rules! envelope {
    ($t:ty) => {
        impl Envelope for $t {
            fn subcommand(&self) -> Option<&str> {
                self.subcommand.as_deref()
            }
            fn seed(&self) -> Option<u64> {
                self.seed
            }
            fn output(&self) -> Option<&OutputSpec> {
                self.output.as_ref()
            }
        }
    };
}

/// Cell-centred grid on the box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
}

impl GridSpec {
    pub fn points(&self) -> CliResult<Vec<Vec<f64>>> {
        let d = self.lo.len();
        if self.hi.len() != d || self.n.len() != d || self.n.contains(&0) {
            return Err(CliError::validation("grid needs matching lo, hi and positive n"));
        }
        let total: usize = self.n.iter().product();
        Ok((0..total)
            .map(|mut idx| {
                (0..d)
                    .map(|i| {
                        let k = idx % self.n[i];
                        idx /= self.n[i];
                        self.lo[i] + (k as f64 + 0.5) * (self.hi[i] - self.lo[i]) / self.n[i] as f64
                    })
                    .collect()
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraTolerances {
    #[serde(default = "default_tol_hyp")]
    pub tol_hyp: f64,
    #[serde(default = "default_tol_res")]
    pub tol_res: f64,
}

fn default_tol_hyp() -> f64 {
    centralizer_core::spectra::DEFAULT_TOL_HYP
}

fn default_tol_res() -> f64 {
    centralizer_core::spectra::DEFAULT_TOL_RES
}

impl Default for SpectraTolerances {
    fn default() -> Self {
        SpectraTolerances { tol_hyp: default_tol_hyp(), tol_res: default_tol_res() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraConfig {
    pub subcommand: Option<String>,
    pub system: SystemRef<VectorFieldSpec>,
    /// Newton seeds; optional for linear and Lorenz fields.
    pub seeds: Option<Vec<Vec<f64>>>,
    pub bounds: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub tolerances: SpectraTolerances,
    pub seed: Option<u64>,
    pub output: Option<OutputSpec>,
}
envelope!(SpectraConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub x0: Vec<f64>,
    pub duration: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorenzDemoConfig {
    pub subcommand: Option<String>,
    pub system: SystemRef<VectorFieldSpec>,
    #[serde(default)]
    pub tolerances: SpectraTolerances,
    /// Orbit written by the CSV report.
    pub trajectory: Option<TrajectorySpec>,
    pub seed: Option<u64>,
    pub output: Option<OutputSpec>,
}
envelope!(LorenzDemoConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMatrices {
    pub count: usize,
    pub max_dim: usize,
    #[serde(default = "default_entry_range")]
    pub entry_range: f64,
}

fn default_entry_range() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum MatrixSystem {
    Matrix(Matrix),
    Random(RandomMatrices),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutantTolerances {
    #[serde(default = "default_tol_commutant")]
    pub tol: f64,
}

fn default_tol_commutant() -> f64 {
    1e-9
}

impl Default for CommutantTolerances {
    fn default() -> Self {
        CommutantTolerances { tol: default_tol_commutant() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutantConfig {
    pub subcommand: Option<String>,
    pub system: MatrixSystem,
    #[serde(default)]
    pub tolerances: CommutantTolerances,
    /// `(t, s)` at which `exp(tB)` and `exp(sC)` are compared.
    #[serde(default = "default_exp_times")]
    pub exp_times: Vec<(f64, f64)>,
    pub seed: Option<u64>,
    pub output: Option<OutputSpec>,
}
envelope!(CommutantConfig);

fn default_exp_times() -> Vec<(f64, f64)> {
    vec![(1.0, 1.0), (0.5, -1.5), (-2.0, 0.7)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowPair {
    pub phi: SystemRef<VectorFieldSpec>,
    pub psi: SystemRef<VectorFieldSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReparamTolerances {
    #[serde(default = "default_tol_match")]
    pub tol_match: f64,
    #[serde(default = "default_tol_a")]
    pub tol_a: f64,
    #[serde(default = "default_tol_residual")]
    pub tol_invariance: f64,
    #[serde(default = "default_tol_residual")]
    pub tol_linearity: f64,
    #[serde(default = "default_integrator_tol")]
    pub integrator: f64,
}

fn default_tol_match() -> f64 {
    centralizer_core::reparam::DEFAULT_TOL_MATCH
}

fn default_tol_a() -> f64 {
    centralizer_core::reparam::DEFAULT_TOL_A
}

fn default_tol_residual() -> f64 {
    1e-4
}

fn default_integrator_tol() -> f64 {
    1e-12
}

impl Default for ReparamTolerances {
    fn default() -> Self {
        ReparamTolerances {
            tol_match: default_tol_match(),
            tol_a: default_tol_a(),
            tol_invariance: default_tol_residual(),
            tol_linearity: default_tol_residual(),
            integrator: default_integrator_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodSpec {
    pub t_max: f64,
    #[serde(default = "default_tol_close")]
    pub tol_close: f64,
}

fn default_tol_close() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReparamConfig {
    pub subcommand: Option<String>,
    pub system: FlowPair,
    #[serde(default)]
    pub samples: Vec<Vec<f64>>,
    pub grid: Option<GridSpec>,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_t_checks")]
    pub t_checks: Vec<f64>,
    /// Known bound on the minimal period; otherwise probed when `period` is given.
    pub eps0: Option<f64>,
    pub period: Option<PeriodSpec>,
    pub eps_cap: Option<f64>,
    pub mu: Option<f64>,
    /// Time used for the dyadic refinement check.
    #[serde(default = "default_t_ext")]
    pub t_ext: f64,
    /// Samples on which the cocycle and refinement checks run.
    #[serde(default = "default_check_points")]
    pub check_points: usize,
    #[serde(default)]
    pub stable_manifold_dense: bool,
    #[serde(default)]
    pub tolerances: ReparamTolerances,
    pub seed: Option<u64>,
    pub output: Option<OutputSpec>,
}
envelope!(ReparamConfig);

fn default_t_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_t_checks() -> Vec<f64> {
    vec![0.3]
}

fn default_t_ext() -> f64 {
    1.3
}

fn default_check_points() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionPair {
    pub phi: SystemRef<ActionSpec>,
    pub psi: Option<SystemRef<ActionSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionTolerances {
    #[serde(default = "default_tol_comm")]
    pub tol_comm: f64,
    #[serde(default = "default_tol_rank")]
    pub tol_rank: f64,
    #[serde(default = "default_integrator_tol")]
    pub integrator: f64,
}

fn default_tol_comm() -> f64 {
    centralizer_core::actions::DEFAULT_TOL_COMM
}

fn default_tol_rank() -> f64 {
    centralizer_core::actions::DEFAULT_TOL_RANK
}

impl Default for ActionTolerances {
    fn default() -> Self {
        ActionTolerances { tol_comm: default_tol_comm(), tol_rank: default_tol_rank(), integrator: default_integrator_tol() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionPeriodSpec {
    pub radius: f64,
    #[serde(default = "default_period_cells")]
    pub cells: usize,
    #[serde(default = "default_tol_close")]
    pub tol_close: f64,
}

fn default_period_cells() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionConfig {
    pub subcommand: Option<String>,
    pub system: ActionPair,
    pub samples: Vec<Vec<f64>>,
    #[serde(default)]
    pub v_checks: Vec<Vec<f64>>,
    pub period: Option<ActionPeriodSpec>,
    #[serde(default)]
    pub tolerances: ActionTolerances,
    pub seed: Option<u64>,
    pub output: Option<OutputSpec>,
}
envelope!(ActionConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub resolution: ChainResolution,
    #[serde(default = "default_max_nodes")]
    pub max_nodes: usize,
    pub pairs: Vec<(SuspensionPoint, SuspensionPoint)>,
}

fn default_max_nodes() -> usize {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuspendConfig {
    pub subcommand: Option<String>,
    pub system: SystemRef<BaseAction>,
    /// Expansiveness transfer test; skipped when absent.
    pub transfer: Option<TransferOptions>,
    pub chain: Option<ChainSpec>,
    /// Points `(x, a)` to normalize.
    #[serde(default)]
    pub normalize: Vec<(Vec<f64>, Vec<f64>)>,
    pub seed: Option<u64>,
    pub output: Option<OutputSpec>,
}
envelope!(SuspendConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbeTarget {
    Action(ActionSpec),
    Flow(VectorFieldSpec),
}

impl Catalog for ProbeTarget {
    const KIND: &'static str = "flow or action";

    fn named(name: &str) -> Option<Self> {
        VectorFieldSpec::named(name).map(ProbeTarget::Flow).or_else(|| ActionSpec::named(name).map(ProbeTarget::Action))
    }

    fn names() -> &'static [&'static str] {
        &[
            "lorenz",
            "identity_flow",
            "torus_irrational",
            "torus_rational",
            "damped_torus",
            "linear_saddle",
            "resonant_sink",
            "torus_orbit_invariant",
            "torus_rotations",
            "parallel_rotations",
            "trivial_plane",
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    pub epsilon: f64,
    pub delta: f64,
    pub horizon: f64,
    pub back: Option<f64>,
    #[serde(default = "default_probe_dt")]
    pub dt: f64,
    pub margin: Option<f64>,
    #[serde(default = "default_tol_sep")]
    pub tol_sep: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_revalidation")]
    pub revalidation_factor: f64,
    #[serde(default = "default_probe_integrator")]
    pub integrator: f64,
}

fn default_probe_dt() -> f64 {
    0.05
}

fn default_tol_sep() -> f64 {
    1e-6
}

fn default_grid_points() -> usize {
    41
}

fn default_revalidation() -> f64 {
    10.0
}

fn default_probe_integrator() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSampling {
    pub count: usize,
    /// Box for the first point of each pair.
    pub bounds: Vec<(f64, f64)>,
    /// Distance of the second point, drawn from `[min_offset, max_offset)`.
    pub min_offset: f64,
    pub max_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub subcommand: Option<String>,
    pub system: SystemRef<ProbeTarget>,
    pub notion: Notion,
    pub options: ProbeSettings,
    #[serde(default)]
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub sample: Option<PairSampling>,
    pub seed: Option<u64>,
    pub output: Option<OutputSpec>,
}
envelope!(ProbeConfig);

/// Parses a config, refusing unknown fields and a mismatched `subcommand`.
pub fn parse<T: DeserializeOwned + Envelope>(text: &str, subcommand: &str) -> CliResult<T> {
    let cfg: T = serde_json::from_str(text)?;
    if let Some(s) = cfg.subcommand() {
        if s != subcommand {
            return Err(CliError::validation(format!("config is for '{s}', not '{subcommand}'")));
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"system": "lorenz", "colour": 3}"#;
        assert!(matches!(parse::<SpectraConfig>(text, "spectra"), Err(CliError::Validation(_))));
        let nested = r#"{"system": "lorenz", "tolerances": {"tol_hyp": 1e-9, "extra": 1}}"#;
        assert!(parse::<SpectraConfig>(nested, "spectra").is_err());
    }

    #[test]
    fn missing_system_is_rejected() {
        assert!(matches!(parse::<ProbeConfig>("{}", "probe"), Err(CliError::Validation(_))));
    }

    #[test]
    fn subcommand_must_match() {
        let text = r#"{"subcommand": "probe", "system": "lorenz"}"#;
        assert!(parse::<SpectraConfig>(text, "spectra").is_err());
    }

    #[test]
    fn named_and_inline_systems() {
        let c: SpectraConfig = parse(r#"{"system": "lorenz"}"#, "spectra").unwrap();
        assert_eq!(c.system.resolve().unwrap(), VectorFieldSpec::lorenz_classic());
        let c: SpectraConfig =
            parse(r#"{"system": {"kind": "linear", "matrix": [[-1, 0], [0, -2]]}}"#, "spectra").unwrap();
        assert!(matches!(c.system.resolve().unwrap(), VectorFieldSpec::Linear { .. }));
        let bad: SpectraConfig = parse(r#"{"system": "nope"}"#, "spectra").unwrap();
        assert!(bad.system.resolve().is_err());
        let p: ProbeConfig = parse(
            r#"{"system": {"generators": [{"kind": "constant", "vector": [0, 0]}]}, "notion": "action",
                "options": {"epsilon": 0.1, "delta": 0.1, "horizon": 1}}"#,
            "probe",
        )
        .unwrap();
        assert!(matches!(p.system.resolve().unwrap(), ProbeTarget::Action(_)));
    }

    #[test]
    fn grid_points_are_cell_centred() {
        let g = GridSpec { lo: vec![0.0, 0.0], hi: vec![1.0, 2.0], n: vec![2, 1] };
        assert_eq!(g.points().unwrap(), vec![vec![0.25, 1.0], vec![0.75, 1.0]]);
    }
}
