//! One runner per subcommand; each returns a report in JSON and tabular form.

use centralizer_core::actions::{
    action_min_period, action_reparam_field, check_homogeneous, verify_commuting, ActionPeriod, ActionPeriodOptions,
    ActionReparamMatrix, ActionSpec, Homogeneity,
};
use centralizer_core::flow::{min_period_probe, trajectory, IntegratorOptions, PeriodProbeOptions};
use centralizer_core::linalg::{commutant_basis, eigs, mat_exp, Matrix};
use centralizer_core::probe::{
    self, Action, Counterexample, FieldFlow, Notion, ProbeOptions, ProbeReport, Revalidation, SpecAction,
};
use centralizer_core::reparam::{reparam_field, LocalReparam, ReparamField, ReparamOptions, VerdictOptions};
use centralizer_core::sampling;
use centralizer_core::spectra::{find_singularities, full_report, ReportOptions, SingularityReport};
use centralizer_core::suspension::{chain_metric, transfer_test, BaseAction, ChainMetric, SuspensionPoint, TransferReport};
use centralizer_core::VectorFieldSpec;
use num_complex::Complex64;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::output::{coordinate_names, Cell, Report, Table};

fn integrator(tol: f64) -> CliResult<IntegratorOptions> {
    if !(tol > 0.0) {
        return Err(CliError::validation("integrator tolerance must be positive"));
    }
    Ok(IntegratorOptions::with_tol(tol))
}

#[derive(Debug, Serialize)]
pub struct SingularitySummary {
    pub location: Vec<f64>,
    pub eigenvalues: Vec<Complex64>,
    pub hyperbolic: bool,
    pub index: Option<usize>,
    pub nonresonant: bool,
    pub nonresonant_stable: Option<bool>,
    pub nonresonant_unstable: Option<bool>,
    pub kopell_stable: Option<u32>,
    pub kopell_unstable: Option<u32>,
    pub kopell_m: Option<u32>,
    pub report: SingularityReport,
}

impl SingularitySummary {
    fn new(report: SingularityReport) -> Self {
        SingularitySummary {
            location: report.location.clone(),
            eigenvalues: report.spectrum.eigenvalues.clone(),
            hyperbolic: report.hyperbolic,
            index: report.index,
            nonresonant: report.is_nonresonant(),
            nonresonant_stable: report.nonresonant_stable.as_ref().map(|r| r.nonresonant),
            nonresonant_unstable: report.nonresonant_unstable.as_ref().map(|r| r.nonresonant),
            kopell_stable: report.kopell_stable,
            kopell_unstable: report.kopell_unstable,
            kopell_m: report.kopell_m,
            report,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SpectraReport {
    pub system: VectorFieldSpec,
    pub singularities: Vec<SingularitySummary>,
    pub dropped_seeds: usize,
}

fn lorenz_seeds(b: f64, r: f64) -> Vec<Vec<f64>> {
    let mut seeds = vec![vec![0.1, -0.1, 0.1]];
    if r > 1.0 {
        let c = (b * (r - 1.0)).sqrt();
        seeds.push(vec![c + 0.3, c - 0.2, r - 1.0 + 0.5]);
        seeds.push(vec![-c - 0.3, -c + 0.2, r - 1.0 - 0.5]);
    }
    seeds
}

fn default_seeds(field: &VectorFieldSpec) -> CliResult<Vec<Vec<f64>>> {
    match field {
        VectorFieldSpec::Lorenz { b, r, .. } => Ok(lorenz_seeds(*b, *r)),
        VectorFieldSpec::Linear { .. } => Ok(vec![vec![0.0; field.dim()]]),
        _ => Err(CliError::validation("this system needs explicit 'seeds'")),
    }
}

fn spectra_report(field: VectorFieldSpec, seeds: &[Vec<f64>], bounds: Option<&[(f64, f64)]>, tol: &SpectraTolerances) -> CliResult<SpectraReport> {
    field.validate()?;
    let sing = find_singularities(&field, bounds, seeds)?;
    let opts = ReportOptions { tol_hyp: tol.tol_hyp, tol_res: tol.tol_res };
    let singularities = sing
        .points
        .iter()
        .map(|p| full_report(&field, p, &opts).map(SingularitySummary::new))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpectraReport { system: field, singularities, dropped_seeds: sing.dropped.len() })
}

fn spectra_table(r: &SpectraReport) -> Table {
    let n = r.system.dim();
    let mut header = vec!["singularity".to_string()];
    header.extend(coordinate_names("x", n));
    header.extend(["eigenvalue_re", "eigenvalue_im", "hyperbolic", "nonresonant", "kopell_stable"].map(String::from));
    let mut t = Table::new(header);
    for (k, s) in r.singularities.iter().enumerate() {
        for z in &s.eigenvalues {
            let mut row = vec![Cell::from(k)];
            row.extend(s.location.iter().map(|&v| Cell::from(v)));
            row.extend([
                Cell::from(z.re),
                Cell::from(z.im),
                Cell::from(s.hyperbolic),
                Cell::from(s.nonresonant),
                Cell::Text(s.kopell_stable.map(|m| m.to_string()).unwrap_or_default()),
            ]);
            t.push(row);
        }
    }
    t
}

pub fn spectra(cfg: &SpectraConfig) -> CliResult<Report> {
    let field = cfg.system.resolve()?;
    let seeds = match &cfg.seeds {
        Some(s) => s.clone(),
        None => default_seeds(&field)?,
    };
    let r = spectra_report(field, &seeds, cfg.bounds.as_deref(), &cfg.tolerances)?;
    let table = spectra_table(&r);
    Report::new(&r, table)
}

#[derive(Debug, Serialize)]
pub struct LorenzDemo {
    #[serde(flatten)]
    pub spectra: SpectraReport,
    pub all_nonresonant: bool,
    /// Kopell order of the stable bundle of the singularity at the origin.
    pub origin_kopell_stable: Option<u32>,
}

pub fn lorenz_demo(cfg: &LorenzDemoConfig) -> CliResult<Report> {
    let field = cfg.system.resolve()?;
    let VectorFieldSpec::Lorenz { b, r, .. } = field else {
        return Err(CliError::validation("lorenz-demo needs a Lorenz system"));
    };
    let rep = spectra_report(field.clone(), &lorenz_seeds(b, r), None, &cfg.tolerances)?;
    let origin = rep.singularities.iter().find(|s| s.location.iter().all(|v| v.abs() < 1e-9));
    let demo = LorenzDemo {
        all_nonresonant: rep.singularities.iter().all(|s| s.nonresonant),
        origin_kopell_stable: origin.and_then(|s| s.kopell_stable),
        spectra: rep,
    };
    let spec = cfg.trajectory.clone().unwrap_or(TrajectorySpec { x0: vec![1.0, 1.0, 20.0], duration: 10.0, dt: 0.01 });
    if !(spec.duration > 0.0 && spec.dt > 0.0) || spec.x0.len() != 3 {
        return Err(CliError::validation("trajectory needs x0 in R^3 and positive duration and dt"));
    }
    let tr = trajectory(&field, &spec.x0, 0.0, spec.duration, spec.dt, &IntegratorOptions::default())?;
    let mut header = vec!["t".to_string()];
    header.extend(coordinate_names("x", 3));
    let mut table = Table::new(header);
    for (t, x) in tr.grid(spec.dt)? {
        let mut row = vec![Cell::from(t)];
        row.extend(x.into_iter().map(Cell::from));
        table.push(row);
    }
    Report::new(&demo, table)
}

#[derive(Debug, Serialize)]
pub struct CommutantEntry {
    pub matrix: Matrix,
    pub dimension: usize,
    pub basis: Vec<Matrix>,
    pub max_commutator: f64,
    /// `max |exp(tB) exp(sC) - exp(sC) exp(tB)|_F` over the basis and `(t, s)`.
    pub max_exp_commutator: f64,
}

#[derive(Debug, Serialize)]
pub struct CommutantReport {
    pub tol: f64,
    pub entries: Vec<CommutantEntry>,
}

fn commutant_entry(b: Matrix, tol: f64, times: &[(f64, f64)]) -> CliResult<CommutantEntry> {
    let basis = commutant_basis(&b, tol)?;
    let mut max_commutator: f64 = 0.0;
    let mut max_exp: f64 = 0.0;
    for c in &basis.basis {
        max_commutator = max_commutator.max(b.commutator(c)?.frobenius_norm());
        for &(t, s) in times {
            let eb = mat_exp(&b, t)?;
            let ec = mat_exp(c, s)?;
            max_exp = max_exp.max(eb.commutator(&ec)?.frobenius_norm());
        }
    }
    Ok(CommutantEntry { dimension: basis.dimension(), basis: basis.basis, matrix: b, max_commutator, max_exp_commutator: max_exp })
}

fn distinct_eigenvalues(m: &Matrix) -> CliResult<bool> {
    let ev = eigs(m)?.eigenvalues;
    Ok((0..ev.len()).all(|i| (i + 1..ev.len()).all(|j| (ev[i] - ev[j]).norm() > 1e-3)))
}

/// Seeded matrices with entries uniform in `(-range, range)` and distinct eigenvalues.
pub fn random_matrices(rng: &mut ChaCha8Rng, spec: &RandomMatrices) -> CliResult<Vec<Matrix>> {
    if spec.max_dim == 0 || spec.max_dim > centralizer_core::linalg::MAX_DIM || !(spec.entry_range > 0.0) {
        return Err(CliError::validation("random matrices need 1 <= max_dim <= 16 and a positive range"));
    }
    let mut out = Vec::with_capacity(spec.count);
    while out.len() < spec.count {
        let n = rng.random_range(1..=spec.max_dim);
        let data = (0..n * n).map(|_| rng.random_range(-spec.entry_range..spec.entry_range)).collect();
        let m = Matrix::from_row_major(n, n, data)?;
        if distinct_eigenvalues(&m)? {
            out.push(m);
        }
    }
    Ok(out)
}

pub fn commutant(cfg: &CommutantConfig, seed: u64) -> CliResult<Report> {
    let tol = cfg.tolerances.tol;
    let matrices = match &cfg.system {
        MatrixSystem::Matrix(m) => vec![m.clone()],
        MatrixSystem::Random(spec) => random_matrices(&mut sampling::rng(seed), spec)?,
    };
    let entries = matrices
        .into_iter()
        .map(|m| commutant_entry(m, tol, &cfg.exp_times))
        .collect::<CliResult<Vec<_>>>()?;
    let mut table = Table::new(["index", "n", "dimension", "max_commutator", "max_exp_commutator"]);
    for (k, e) in entries.iter().enumerate() {
        table.push(vec![
            Cell::from(k),
            Cell::from(e.matrix.rows()),
            Cell::from(e.dimension),
            Cell::from(e.max_commutator),
            Cell::from(e.max_exp_commutator),
        ]);
    }
    Report::new(&CommutantReport { tol, entries }, table)
}

#[derive(Debug, Serialize)]
pub struct ReparamChecks {
    pub mu: f64,
    pub eps_cap: f64,
    pub eps0: f64,
    pub max_cocycle_residual: f64,
    /// `max |p_N(t_ext, x) - p_{N+2}(t_ext, x)|`.
    pub max_dyadic_disagreement: f64,
    /// `max d(psi_t x, phi_{p(t, x)} x)` at `t_ext`.
    pub max_extension_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct ReparamReport {
    pub field: ReparamField,
    pub checks: ReparamChecks,
}

pub fn reparam(cfg: &ReparamConfig) -> CliResult<Report> {
    let phi = cfg.system.phi.resolve()?;
    let psi = cfg.system.psi.resolve()?;
    let mut samples = cfg.samples.clone();
    if let Some(g) = &cfg.grid {
        samples.extend(g.points()?);
    }
    if samples.is_empty() {
        return Err(CliError::validation("reparam needs 'samples' or a 'grid'"));
    }
    let tol = &cfg.tolerances;
    let integ = integrator(tol.integrator)?;
    let eps0 = match (cfg.eps0, &cfg.period) {
        (Some(e), _) => e,
        (None, Some(p)) => {
            let popts = PeriodProbeOptions { integrator: integ, ..PeriodProbeOptions::new(p.t_max, p.tol_close) };
            min_period_probe(&phi, &samples, &popts)?.eps0_upper
        }
        (None, None) => f64::INFINITY,
    };
    let opts = ReparamOptions {
        tol_match: tol.tol_match,
        eps0,
        eps_cap: cfg.eps_cap,
        mu: cfg.mu,
        integrator: integ,
        ..ReparamOptions::default()
    };
    let calibration: Vec<Vec<f64>> = samples.iter().take(cfg.check_points.max(1)).cloned().collect();
    let local = LocalReparam::new(&phi, &psi, &calibration, &opts)?;
    let vopts = VerdictOptions {
        tol_a: tol.tol_a,
        tol_invariance: tol.tol_invariance,
        tol_linearity: tol.tol_linearity,
        stable_manifold_dense: cfg.stable_manifold_dense,
    };
    let field = reparam_field(&local, &samples, &cfg.t_grid, &cfg.t_checks, &vopts)?;
    let mu = local.mu();
    let mut checks = ReparamChecks {
        mu,
        eps_cap: local.eps_cap(),
        eps0,
        max_cocycle_residual: 0.0,
        max_dyadic_disagreement: 0.0,
        max_extension_residual: 0.0,
    };
    for x in &calibration {
        for (t, s) in [(0.4 * mu, 0.5 * mu), (-0.3 * mu, 0.6 * mu), (0.7 * mu, -0.9 * mu)] {
            checks.max_cocycle_residual = checks.max_cocycle_residual.max(local.cocycle_residual(t, s, x)?.abs());
        }
        let p0 = local.extend(x, cfg.t_ext, 0)?;
        let p2 = local.extend(x, cfg.t_ext, 2)?;
        checks.max_dyadic_disagreement = checks.max_dyadic_disagreement.max((p0 - p2).abs());
        checks.max_extension_residual = checks.max_extension_residual.max(local.extension_residual(x, cfg.t_ext, p0)?);
    }
    let n = phi.dim();
    let mut header = coordinate_names("x", n);
    header.extend(["A", "inv_residual", "lin_residual"].map(String::from));
    let mut table = Table::new(header);
    for (i, x) in field.points.iter().enumerate() {
        let mut row: Vec<Cell> = x.iter().map(|&v| Cell::from(v)).collect();
        row.extend([Cell::from(field.a[i]), Cell::from(field.invariance[i]), Cell::from(field.linearity[i])]);
        table.push(row);
    }
    Report::new(&ReparamReport { field, checks }, table)
}

#[derive(Debug, Serialize)]
pub struct ActionReport {
    pub rank: usize,
    pub dim: usize,
    pub commutator_residual: f64,
    pub homogeneity: Homogeneity,
    pub period: Option<ActionPeriod>,
    pub reparam: Option<ActionReparamMatrix>,
}

pub fn action(cfg: &ActionConfig) -> CliResult<Report> {
    let tol = &cfg.tolerances;
    let integ = integrator(tol.integrator)?;
    let phi_gens = cfg.system.phi.resolve()?;
    let phi = ActionSpec::new(phi_gens.generators, &cfg.samples, tol.tol_comm, &integ)?;
    let comm = verify_commuting(&phi.generators, &cfg.samples, tol.tol_comm, &integ)?;
    let homogeneity = check_homogeneous(&phi, &cfg.samples, tol.tol_rank)?;
    let period = match &cfg.period {
        Some(p) => Some(action_min_period(
            &phi,
            &cfg.samples,
            &ActionPeriodOptions { radius: p.radius, cells: p.cells, tol_close: p.tol_close, integrator: integ },
        )?),
        None => None,
    };
    let reparam = match &cfg.system.psi {
        Some(psi) => {
            let psi = ActionSpec::unchecked(psi.resolve()?.generators)?;
            Some(action_reparam_field(&phi, &psi, &cfg.samples, &cfg.v_checks, tol.tol_comm, &integ)?)
        }
        None => None,
    };
    let (n, d) = (phi.dim(), phi.rank());
    let mut header = coordinate_names("x", n);
    header.push("sigma_min".into());
    if reparam.is_some() {
        header.extend((1..=d).flat_map(|i| (1..=d).map(move |j| format!("a_{i}_{j}"))));
    }
    let mut table = Table::new(header);
    for (k, x) in cfg.samples.iter().enumerate() {
        let mut row: Vec<Cell> = x.iter().map(|&v| Cell::from(v)).collect();
        let sigma = centralizer_core::linalg::svd(&phi.frame(x))?.sigma.last().copied().unwrap_or(0.0);
        row.push(Cell::from(sigma));
        if let Some(r) = &reparam {
            row.extend(r.matrices[k].as_slice().iter().map(|&v| Cell::from(v)));
        }
        table.push(row);
    }
    let report = ActionReport {
        rank: d,
        dim: n,
        commutator_residual: comm.bracket.max(comm.flows),
        homogeneity,
        period,
        reparam,
    };
    Report::new(&report, table)
}

#[derive(Debug, Serialize)]
pub struct ChainEntry {
    pub p: SuspensionPoint,
    pub q: SuspensionPoint,
    pub two_link: f64,
    pub chain: ChainMetric,
}

#[derive(Debug, Serialize)]
pub struct SuspendReport {
    pub base: BaseAction,
    pub lipschitz_bound: f64,
    pub normalized: Vec<SuspensionPoint>,
    pub transfer: Option<TransferReport>,
    pub chains: Vec<ChainEntry>,
}

pub fn suspend(cfg: &SuspendConfig, seed: u64) -> CliResult<Report> {
    let base = cfg.system.resolve()?;
    let normalized = cfg.normalize.iter().map(|(x, a)| base.normalize(x, a)).collect::<Result<Vec<_>, _>>()?;
    let transfer = match &cfg.transfer {
        Some(t) => Some(transfer_test(&base, t, &mut sampling::rng(seed))?),
        None => None,
    };
    let mut chains = Vec::new();
    if let Some(c) = &cfg.chain {
        for (p, q) in &c.pairs {
            let p = base.normalize(&p.base, &p.heights)?;
            let q = base.normalize(&q.base, &q.heights)?;
            let chain = chain_metric(&base, &p, &q, c.resolution, c.max_nodes)?;
            chains.push(ChainEntry { two_link: base.two_link_distance(&p, &q), p, q, chain });
        }
    }
    let mut table = Table::new(["pair", "chain_distance", "two_link_distance", "links", "graph_nodes"]);
    for (k, c) in chains.iter().enumerate() {
        table.push(vec![
            Cell::from(k),
            Cell::from(c.chain.distance),
            Cell::from(c.two_link),
            Cell::from(c.chain.path.links.len()),
            Cell::from(c.chain.graph_nodes),
        ]);
    }
    let report = SuspendReport { lipschitz_bound: base.lipschitz_bound(), base, normalized, transfer, chains };
    Report::new(&report, table)
}

#[derive(Debug, Serialize)]
pub struct ProbeOutput {
    pub notion: Notion,
    pub report: ProbeReport<Vec<f64>>,
    pub revalidation: Option<Revalidation>,
    /// Set when no violation was found.
    pub resolution: Option<String>,
}

fn probe_pairs(cfg: &ProbeConfig, dim: usize, seed: u64) -> CliResult<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut pairs = cfg.pairs.clone();
    if let Some(s) = &cfg.sample {
        if s.bounds.len() != dim || !(0.0 <= s.min_offset && s.min_offset < s.max_offset) {
            return Err(CliError::validation("sample needs one bound per coordinate and 0 <= min_offset < max_offset"));
        }
        let mut rng = sampling::rng(seed);
        let centers: Vec<Vec<f64>> = (0..s.count).map(|_| sampling::uniform_box(&mut rng, &s.bounds)).collect();
        pairs.extend(sampling::nearby_pairs(&mut rng, &centers, s.min_offset, s.max_offset));
    }
    if pairs.is_empty() {
        return Err(CliError::validation("probe needs 'pairs' or 'sample'"));
    }
    if pairs.iter().any(|(x, y)| x.len() != dim || y.len() != dim) {
        return Err(CliError::validation(format!("probe points must have dimension {dim}")));
    }
    Ok(pairs)
}

fn run_probe<A: Action<Point = Vec<f64>>>(
    action: &A,
    notion: Notion,
    pairs: &[(Vec<f64>, Vec<f64>)],
    opts: &ProbeOptions,
) -> CliResult<ProbeOutput> {
    let report = probe::violation_search(action, notion, pairs, opts)?;
    let revalidation = match &report.counterexample {
        Some(cx) => Some(probe::revalidate(action, cx, opts)?),
        None => None,
    };
    let resolution = (!report.found()).then(|| opts.resolution_label());
    Ok(ProbeOutput { notion, report, revalidation, resolution })
}

fn counterexample_orbit<A: Action<Point = Vec<f64>>>(
    action: &A,
    cx: &Counterexample<Vec<f64>>,
    opts: &ProbeOptions,
) -> CliResult<Vec<(f64, Vec<f64>)>> {
    let back = opts.back.unwrap_or(opts.horizon);
    let n = ((back + opts.horizon) / opts.dt).round() as usize;
    let mut u = vec![0.0; action.rank()];
    u[0] = 1.0;
    let pts = action.line_orbit(&cx.x, &u, -back, opts.dt, n)?;
    Ok(pts.into_iter().enumerate().map(|(k, p)| (-back + k as f64 * opts.dt, p)).collect())
}

pub fn probe_cmd(cfg: &ProbeConfig, seed: u64) -> CliResult<Report> {
    let target = cfg.system.resolve()?;
    let s = &cfg.options;
    let opts = ProbeOptions {
        epsilon: s.epsilon,
        delta: s.delta,
        horizon: s.horizon,
        back: s.back,
        dt: s.dt,
        margin: s.margin,
        tol_sep: s.tol_sep,
        grid_points: s.grid_points,
        revalidation_factor: s.revalidation_factor,
    };
    let integ = integrator(s.integrator)?;
    let (out, orbit, dim) = match &target {
        ProbeTarget::Flow(field) => {
            field.validate()?;
            if cfg.notion == Notion::Action {
                return Err(CliError::validation("notion 'action' needs an action system"));
            }
            let flow = FieldFlow { field, integrator: integ };
            let pairs = probe_pairs(cfg, field.dim(), seed)?;
            let out = run_probe(&flow, cfg.notion, &pairs, &opts)?;
            let orbit = match &out.report.counterexample {
                Some(cx) => counterexample_orbit(&flow, cx, &opts)?,
                None => Vec::new(),
            };
            (out, orbit, field.dim())
        }
        ProbeTarget::Action(spec) => {
            let spec = ActionSpec::unchecked(spec.generators.clone())?;
            if cfg.notion != Notion::Action && spec.rank() != 1 {
                return Err(CliError::validation("flow notions need a rank-one action"));
            }
            let act = SpecAction { action: &spec, integrator: integ };
            let pairs = probe_pairs(cfg, spec.dim(), seed)?;
            let out = run_probe(&act, cfg.notion, &pairs, &opts)?;
            let orbit = match &out.report.counterexample {
                Some(cx) => counterexample_orbit(&act, cx, &opts)?,
                None => Vec::new(),
            };
            (out, orbit, spec.dim())
        }
    };
    let mut header = vec!["t".to_string()];
    header.extend(coordinate_names("x", dim));
    let mut table = Table::new(header);
    for (t, x) in orbit {
        let mut row = vec![Cell::from(t)];
        row.extend(x.into_iter().map(Cell::from));
        table.push(row);
    }
    Report::new(&out, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CliError;

    #[test]
    fn random_matrices_are_seeded_and_distinct() {
        let spec = RandomMatrices { count: 12, max_dim: 4, entry_range: 2.0 };
        let a = random_matrices(&mut sampling::rng(3), &spec).unwrap();
        let b = random_matrices(&mut sampling::rng(3), &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|m| m.rows() <= 4 && distinct_eigenvalues(m).unwrap()));
        let bad = RandomMatrices { count: 1, max_dim: 0, entry_range: 2.0 };
        assert!(matches!(random_matrices(&mut sampling::rng(0), &bad), Err(CliError::Validation(_))));
    }

    #[test]
    fn suspend_normalizes_and_tabulates_chains() {
        let cfg: SuspendConfig = parse(
            r#"{ "system": "rotation", "normalize": [[[0.3], [2.5]]],
                 "chain": { "resolution": { "base_cells": 8, "height_cells": 8, "radius": 0.1875 },
                            "pairs": [[{ "base": [0.3], "heights": [0.9] }, { "base": [0.35], "heights": [0.9] }]] } }"#,
            "suspend",
        )
        .unwrap();
        let report = suspend(&cfg, 0).unwrap();
        assert_eq!(report.json["normalized"][0]["heights"][0].as_f64(), Some(0.5));
        assert_eq!(report.table.rows.len(), 1);
        let chain = report.json["chains"][0]["chain"]["distance"].as_f64().unwrap();
        let two_link = report.json["chains"][0]["two_link"].as_f64().unwrap();
        assert!(chain <= two_link + 1e-12);
    }

    #[test]
    fn probe_rejects_action_notion_on_a_flow() {
        let cfg: ProbeConfig = parse(
            r#"{ "system": "identity_flow", "notion": "action",
                 "options": { "epsilon": 0.1, "delta": 0.05, "horizon": 1.0 },
                 "pairs": [[[0.0, 0.0], [0.01, 0.0]]] }"#,
            "probe",
        )
        .unwrap();
        assert!(matches!(probe_cmd(&cfg, 0), Err(CliError::Validation(_))));
    }

    #[test]
    fn lorenz_demo_needs_a_lorenz_system() {
        let cfg: LorenzDemoConfig = parse(r#"{ "system": "linear_saddle" }"#, "lorenz-demo").unwrap();
        assert!(matches!(lorenz_demo(&cfg), Err(CliError::Validation(_))));
    }
}
