use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use centralizer_core::actions::{action_reparam_field, change_of_basis_a, ActionSpec};
use centralizer_core::flow::IntegratorOptions;
use centralizer_core::linalg::{mat_exp, Matrix};
use centralizer_core::probe::{
    monotone_match, revalidate, violation_search, Action, FieldFlow, MatchMode, Notion, ProbeOptions, SampledOrbit,
    SpecAction,
};
use centralizer_core::sampling;
use centralizer_core::spectra::{check_nonresonant, kopell_order};
use centralizer_core::suspension::{
    chain_metric, transfer_test, weight_sum, weights, BaseAction, ChainResolution, SuspensionAction, SuspensionPoint,
    TransferOptions,
};
use centralizer_core::{ScalarField, VectorFieldSpec};
use num_complex::Complex64;
use rand::RngExt;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_centralizer");

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_config(subcommand: &str, config: &Path) -> Value {
    let out = run(&[subcommand, "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{subcommand} {config:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn run_inline(name: &str, config: &Value) -> Value {
    let path = scratch(name);
    std::fs::write(&path, serde_json::to_vec_pretty(config).unwrap()).unwrap();
    run_config(config["subcommand"].as_str().unwrap(), &path)
}

/// Writes the verdict line straight to stdout, past the harness capture.
fn verdict(n: u32, ok: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let within = elapsed <= budget;
    let tag = if ok && within { "PASS" } else { "FAIL" };
    let line = format!(
        "{tag} criterion {n}: {detail} [{:.2} s, budget {} s]\n",
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
    assert!(ok, "criterion {n} failed: {detail}");
    assert!(within, "criterion {n} over budget: {:.2} s", elapsed.as_secs_f64());
}

fn complex(v: &Value) -> Complex64 {
    Complex64::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

fn lorenz_demo() -> Value {
    run_config("lorenz-demo", &configs_dir().join("lorenz_demo.json"))
}

fn is_origin(s: &Value) -> bool {
    s["location"].as_array().unwrap().iter().all(|v| v.as_f64().unwrap().abs() < 1e-9)
}

#[test]
fn criterion_01_lorenz_spectra() {
    let start = Instant::now();
    let demo = lorenz_demo();
    let sings = demo["singularities"].as_array().unwrap();
    let mut ok = sings.len() == 3;
    let root = 1201f64.sqrt();
    let want0 = [-8.0 / 3.0, (-11.0 - root) / 2.0, (-11.0 + root) / 2.0];
    let mut worst0: f64 = 0.0;
    let mut worst_pm: f64 = 0.0;
    for s in sings {
        let mut ev: Vec<Complex64> = s["eigenvalues"].as_array().unwrap().iter().map(complex).collect();
        if is_origin(s) {
            ev.sort_by(|a, b| a.re.total_cmp(&b.re));
            let mut w = want0;
            w.sort_by(f64::total_cmp);
            for (z, w) in ev.iter().zip(w) {
                worst0 = worst0.max((z - w).norm());
            }
        } else {
            let real = ev.iter().find(|z| z.im.abs() < 1e-12).copied();
            let upper = ev.iter().find(|z| z.im > 1e-6).copied();
            let lower = ev.iter().find(|z| z.im < -1e-6).copied();
            match (real, upper, lower) {
                (Some(r), Some(u), Some(l)) => {
                    worst_pm = worst_pm
                        .max((r.re + 13.85).abs())
                        .max((u - Complex64::new(0.09, 10.19)).norm())
                        .max((l - Complex64::new(0.09, -10.19)).norm());
                }
                _ => ok = false,
            }
        }
    }
    ok &= worst0 <= 1e-9 && worst_pm <= 0.01;
    let detail = format!("origin eigenvalue error {worst0:.1e}, saddle-focus error {worst_pm:.1e}");
    verdict(1, ok, start.elapsed(), Duration::from_secs(5), &detail);
}

#[test]
fn criterion_02_resonance() {
    let start = Instant::now();
    let demo = lorenz_demo();
    let all = demo["all_nonresonant"].as_bool().unwrap();
    let each = demo["singularities"].as_array().unwrap().iter().all(|s| s["nonresonant"].as_bool() == Some(true));
    let bundle = [Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)];
    let r = check_nonresonant(&bundle, 1e-9).unwrap();
    let witness = r.witness.as_ref().map(|w| (w.i, w.coefficients.clone()));
    let resonant = !r.nonresonant && witness == Some((1, vec![2, 0]));
    let cli = run_config("spectra", &configs_dir().join("spectra_resonant.json"));
    let cli_resonant = cli["singularities"][0]["nonresonant"].as_bool() == Some(false);
    let ok = all && each && resonant && cli_resonant;
    let detail = format!("lorenz non-resonant {each}, diag(-1,-2) witness {witness:?}");
    verdict(2, ok, start.elapsed(), Duration::from_secs(1), &detail);
}

#[test]
fn criterion_03_kopell_order() {
    let start = Instant::now();
    let k = |a: f64, b: f64| kopell_order(&[Complex64::new(a, 0.0), Complex64::new(b, 0.0)]).unwrap();
    let (k13, k23) = (k(-1.0, -3.0), k(-2.0, -3.0));
    let demo = lorenz_demo();
    let origin = demo["origin_kopell_stable"].as_u64();
    let ok = k13 == 4 && k23 == 2 && origin == Some(9);
    let detail = format!("{{-1,-3}} -> {k13}, {{-2,-3}} -> {k23}, origin stable bundle -> {origin:?}");
    verdict(3, ok, start.elapsed(), Duration::from_secs(1), &detail);
}

/// Nullity of the assembled Sylvester operator by Gaussian elimination.
fn commutant_dimension_oracle(b: &[Vec<f64>], tol: f64) -> usize {
    let n = b.len();
    let cols = n * n;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for i in 0..n {
        for j in 0..n {
            let mut r = vec![0.0; cols];
            for k in 0..n {
                r[k * n + j] += b[i][k];
                r[i * n + k] -= b[k][j];
            }
            rows.push(r);
        }
    }
    let scale = rows.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut rank = 0;
    let mut used = vec![false; cols];
    while rank < cols {
        let mut best = (0.0, 0, 0);
        for (ri, r) in rows.iter().enumerate().skip(rank) {
            for c in (0..cols).filter(|&c| !used[c]) {
                if r[c].abs() > best.0 {
                    best = (r[c].abs(), ri, c);
                }
            }
        }
        if best.0 <= tol * scale {
            break;
        }
        rows.swap(rank, best.1);
        used[best.2] = true;
        let pivot = rows[rank].clone();
        for r in rows.iter_mut().skip(rank + 1) {
            let f = r[best.2] / pivot[best.2];
            r.iter_mut().zip(&pivot).for_each(|(x, p)| *x -= f * p);
        }
        rank += 1;
    }
    cols - rank
}

fn matrix(v: &Value) -> Matrix {
    serde_json::from_value(v.clone()).unwrap()
}

#[test]
fn criterion_04_commutants() {
    let start = Instant::now();
    let report = run_config("commutant", &configs_dir().join("commutant_random.json"));
    let entries = report["entries"].as_array().unwrap();
    let mut ok = entries.len() == 100;
    let mut worst_exp: f64 = 0.0;
    let mut mismatches = 0;
    for e in entries {
        let m = matrix(&e["matrix"]);
        let n = m.rows();
        ok &= n <= 5;
        let dim = e["dimension"].as_u64().unwrap() as usize;
        if dim != n || commutant_dimension_oracle(&m.to_rows(), 1e-9) != n {
            mismatches += 1;
        }
        for c in e["basis"].as_array().unwrap().iter().map(matrix) {
            for (t, s) in [(1.0, 1.0), (0.5, -1.5), (-2.0, 0.7)] {
                let eb = mat_exp(&m, t).unwrap();
                let ec = mat_exp(&c, s).unwrap();
                worst_exp = worst_exp.max(eb.commutator(&ec).unwrap().frobenius_norm());
            }
        }
    }
    ok &= mismatches == 0 && worst_exp <= 1e-8;
    let detail = format!("{} matrices, {mismatches} dimension mismatches, max exp commutator {worst_exp:.1e}", entries.len());
    verdict(4, ok, start.elapsed(), Duration::from_secs(30), &detail);
}

fn scaled(c: f64, base: Value) -> Value {
    serde_json::json!({ "kind": "scaled", "factor": { "kind": "constant", "value": c }, "base": base })
}

#[test]
fn criterion_05_reparameterization() {
    let start = Instant::now();
    let torus = serde_json::json!({ "kind": "torus_translation", "alpha": [1.0, std::f64::consts::SQRT_2] });
    let lorenz = serde_json::json!({ "kind": "lorenz", "a": 10.0, "b": 8.0 / 3.0, "r": 28.0 });
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, base, samples, t_ext) in [
        ("torus", &torus, serde_json::json!([[0.2, 0.7], [0.55, 0.1], [0.9, 0.45]]), 2.0),
        ("lorenz", &lorenz, serde_json::json!([[1.0, 3.0, 20.0], [-5.0, -4.0, 25.0]]), 0.5),
    ] {
        for c in [-1.0, 0.5, 3.0] {
            let cfg = serde_json::json!({
                "subcommand": "reparam",
                "system": { "phi": base, "psi": scaled(c, base.clone()) },
                "samples": samples,
                "t_grid": [0.25, 0.5],
                "t_checks": [0.3],
                "t_ext": t_ext,
                "check_points": 3,
            });
            let r = run_inline(&format!("reparam_{name}_{c}.json"), &cfg);
            let a_err = r["field"]["a"].as_array().unwrap().iter().map(|a| (a.as_f64().unwrap() - c).abs()).fold(0.0, f64::max);
            let checks = &r["checks"];
            let cocycle = checks["max_cocycle_residual"].as_f64().unwrap();
            let dyadic = checks["max_dyadic_disagreement"].as_f64().unwrap();
            let inv = r["field"]["orbit_invariance_residual"].as_f64().unwrap();
            let good = a_err <= 1e-6 && cocycle <= 1e-7 && inv <= 1e-6 && dyadic <= 1e-7;
            ok &= good;
            lines.push(format!("{name} c={c}: |A-c| {a_err:.1e} cocycle {cocycle:.1e} inv {inv:.1e} dyadic {dyadic:.1e}"));
        }
    }
    let r = run_config("reparam", &configs_dir().join("reparam_orbit_invariant.json"));
    let h = ScalarField::Trig { offset: 2.0, amplitude: 1.0, wave: vec![1.0, -2.0], phase: 0.0 };
    let field = &r["field"];
    let points = field["points"].as_array().unwrap();
    let h_err = points
        .iter()
        .zip(field["a"].as_array().unwrap())
        .map(|(x, a)| {
            let x: Vec<f64> = serde_json::from_value(x.clone()).unwrap();
            (a.as_f64().unwrap() - h.value(&x)).abs()
        })
        .fold(0.0, f64::max);
    let quasi = field["verdict"]["verdict"].as_str() == Some("quasi_trivial");
    ok &= points.len() == 400 && h_err <= 1e-4 && quasi;
    lines.push(format!("h*X on {} points: |A-h| {h_err:.1e}, quasi-trivial {quasi}", points.len()));
    for l in &lines {
        std::io::stdout().lock().write_all(format!("    {l}\n").as_bytes()).unwrap();
    }
    verdict(5, ok, start.elapsed(), Duration::from_secs(60), "time changes of torus and Lorenz flows");
}

fn translations(alphas: &[[f64; 2]]) -> Vec<VectorFieldSpec> {
    alphas.iter().map(|a| VectorFieldSpec::TorusTranslation { alpha: a.to_vec() }).collect()
}

/// Generators `Y_j = sum_i a_ij X_i` of translations.
fn combine(xs: &[[f64; 2]], a: &[[f64; 2]; 2]) -> Vec<[f64; 2]> {
    (0..2).map(|j| [0, 1].map(|k| (0..2).map(|i| a[i][j] * xs[i][k]).sum())).collect()
}

#[test]
fn criterion_06_action_time_changes() {
    let start = Instant::now();
    let a = [[2.0, 1.0], [0.0, 1.0]];
    let am = Matrix::from_rows(&a).unwrap();
    let xs = [[1.0, std::f64::consts::SQRT_2], [3f64.sqrt(), 0.5]];
    let ys = combine(&xs, &a);
    let samples = vec![vec![0.1, 0.2], vec![0.6, 0.35], vec![0.85, 0.9]];
    let mut round_trip: f64 = 0.0;
    for x in &samples {
        let cb = change_of_basis_a(&translations(&xs), &translations(&ys), x, 1e-10).unwrap();
        round_trip = round_trip.max(cb.a.sub(&am).unwrap().max_abs());
    }
    let p = [[1.0, 2.0], [0.5, -1.0]];
    let xp = combine(&xs, &p);
    let want = Matrix::from_rows(&p).unwrap().inverse().unwrap().mul(&am).unwrap();
    let mut equivariance: f64 = 0.0;
    for x in &samples {
        let cb = change_of_basis_a(&translations(&xp), &translations(&ys), x, 1e-10).unwrap();
        equivariance = equivariance.max(cb.a.sub(&want).unwrap().max_abs());
    }
    let integ = IntegratorOptions::default();
    let phi = ActionSpec::new(translations(&xs), &samples, 1e-8, &integ).unwrap();
    let psi = ActionSpec::unchecked(translations(&ys)).unwrap();
    let mut vs = Vec::new();
    for i in -4..=4 {
        for j in -4..=4 {
            let v = vec![0.5 * i as f64, 0.5 * j as f64];
            if v[0].hypot(v[1]) <= 2.0 {
                vs.push(v);
            }
        }
    }
    let field = action_reparam_field(&phi, &psi, &samples, &vs, 1e-8, &integ).unwrap();
    let cert = field.certification_residual;
    let cli = run_config("action", &configs_dir().join("action_change_of_basis.json"));
    let cli_a: Vec<Matrix> = serde_json::from_value(cli["reparam"]["matrices"].clone()).unwrap();
    let cli_err = cli_a.iter().map(|m| m.sub(&am).unwrap().max_abs()).fold(0.0, f64::max);
    let ok = round_trip <= 1e-10 && equivariance <= 1e-10 && cert <= 1e-6 && cli_err <= 1e-10 && !cli_a.is_empty();
    let detail = format!(
        "round trip {round_trip:.1e}, P^-1 A {equivariance:.1e}, Psi_v = Phi(Av) {cert:.1e} on {} v, cli {cli_err:.1e}",
        vs.len()
    );
    verdict(6, ok, start.elapsed(), Duration::from_secs(20), &detail);
}

#[test]
fn criterion_07_suspension_metric() {
    let start = Instant::now();
    let mut rng = sampling::rng(7);
    let mut worst_sum: f64 = 0.0;
    for d in 1..=6 {
        for _ in 0..2000 {
            let t: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            worst_sum = worst_sum.max((weight_sum(&t) - 1.0).abs());
        }
    }
    let rot = BaseAction::rotation(std::f64::consts::SQRT_2 - 1.0).unwrap();
    let mut reduction_exact = true;
    for _ in 0..2000 {
        let (x, y, t) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let w = weights(&[t]);
        reduction_exact &= w == vec![1.0 - t, t];
        let p = SuspensionPoint { base: vec![x], heights: vec![t] };
        let q = SuspensionPoint { base: vec![y], heights: vec![t] };
        let two_term = (1.0 - t) * rot.rho(&[x], &[y]) + t * rot.rho(&rot.iterate(0, &[x], 1), &rot.iterate(0, &[y], 1));
        reduction_exact &= rot.rho_h(&p, &q).unwrap() == two_term;
    }
    let coarse = ChainResolution::new(8);
    let fine = coarse.refined();
    let mut worst_refine: f64 = 0.0;
    let mut monotone = true;
    for (p, q) in [((0.3, 0.95), (0.34, 0.95)), ((0.1, 0.2), (0.7, 0.6)), ((0.55, 0.05), (0.2, 0.8))] {
        let p = rot.normalize(&[p.0], &[p.1]).unwrap();
        let q = rot.normalize(&[q.0], &[q.1]).unwrap();
        let dc = chain_metric(&rot, &p, &q, coarse, 1 << 20).unwrap().distance;
        let df = chain_metric(&rot, &p, &q, fine, 1 << 20).unwrap().distance;
        worst_refine = worst_refine.max((dc - df).abs());
        monotone &= df <= dc + 1e-12;
    }
    let mut group_exact = true;
    let dyadic_rot = BaseAction::rotation(0.25).unwrap();
    let cat = BaseAction::cat_pair().unwrap();
    let steps = [-2.75, -1.0, -0.5, 0.125, 0.875, 1.5, 3.25];
    for &u in &steps {
        for &v in &steps {
            let p = SuspensionPoint { base: vec![0.125], heights: vec![0.5] };
            let lhs = dyadic_rot.act(&[u], &dyadic_rot.act(&[v], &p).unwrap()).unwrap();
            group_exact &= lhs == dyadic_rot.act(&[u + v], &p).unwrap();
            let p = SuspensionPoint { base: vec![0.125, 0.375], heights: vec![0.25, 0.5] };
            let lhs = cat.act(&[u, v], &cat.act(&[v, u], &p).unwrap()).unwrap();
            group_exact &= lhs == cat.act(&[u + v, v + u], &p).unwrap();
        }
    }
    let ok = worst_sum <= 1e-15 && reduction_exact && worst_refine <= 2.0 * coarse.step() && monotone && group_exact;
    let detail = format!(
        "weight sum error {worst_sum:.1e}, d=1 exact {reduction_exact}, refinement gap {worst_refine:.3} (2 step {}), group law exact {group_exact}",
        2.0 * coarse.step()
    );
    verdict(7, ok, start.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_08_transfer() {
    let start = Instant::now();
    let identity = BaseAction::identity(1, 1).unwrap();
    let few = TransferOptions { pairs: 200, ..TransferOptions::default() };
    let id = transfer_test(&identity, &few, &mut sampling::rng(0)).unwrap();
    let identity_ok = id.base_violation && id.suspension_violation;
    let cat = transfer_test(&BaseAction::cat_map().unwrap(), &TransferOptions::default(), &mut sampling::rng(0)).unwrap();
    let cat_ok = !cat.base_violation && !cat.suspension_violation;
    let catalog = [
        ("identity", BaseAction::identity(2, 2).unwrap()),
        ("rotation", BaseAction::rotation(std::f64::consts::SQRT_2 - 1.0).unwrap()),
        ("two_rotations", BaseAction::rotations(&[std::f64::consts::SQRT_2 - 1.0, 3f64.sqrt() - 1.0]).unwrap()),
        ("cat_pair", BaseAction::cat_pair().unwrap()),
    ];
    let mut disagreements = Vec::new();
    for (name, base) in &catalog {
        let r = transfer_test(base, &few, &mut sampling::rng(1)).unwrap();
        if !r.agree {
            disagreements.push(*name);
        }
    }
    let ok = identity_ok && cat_ok && cat.agree && disagreements.is_empty();
    let detail = format!(
        "identity counterexamples {identity_ok}, cat map clean on {} pairs {cat_ok}, disagreements {disagreements:?}",
        cat.base.pairs_tested
    );
    verdict(8, ok, start.elapsed(), Duration::from_secs(120), &detail);
}

fn sampled(flow: &FieldFlow, x: &[f64], half: f64, dt: f64) -> SampledOrbit<Vec<f64>> {
    let n = (2.0 * half / dt).round() as usize;
    SampledOrbit { start: -half, dt, points: flow.line_orbit(&x.to_vec(), &[1.0], -half, dt, n).unwrap() }
}

#[test]
fn criterion_09_probe_soundness() {
    let start = Instant::now();
    let still = VectorFieldSpec::Constant { vector: vec![0.0, 0.0] };
    let flow = FieldFlow::new(&still);
    let opts = ProbeOptions::new(0.1, 0.05, 5.0);
    let pairs = vec![(vec![0.0, 0.0], vec![0.005, 0.0]), (vec![1.0, -1.0], vec![1.0, -0.98])];
    let mut found = 0;
    let mut revalidated = 0;
    for notion in [Notion::Komuro, Notion::Kinematic, Notion::C] {
        let r = violation_search(&flow, notion, &pairs, &opts).unwrap();
        if let Some(cx) = &r.counterexample {
            found += 1;
            revalidated += revalidate(&flow, cx, &opts).unwrap().holds as usize;
        }
    }
    let trivial = ActionSpec::unchecked(vec![still.clone(), still.clone()]).unwrap();
    let act = SpecAction::new(&trivial);
    let r = violation_search(&act, Notion::Action, &pairs, &opts).unwrap();
    if let Some(cx) = &r.counterexample {
        found += 1;
        revalidated += revalidate(&act, cx, &opts).unwrap().holds as usize;
    }
    let identity = BaseAction::identity(1, 1).unwrap();
    let susp = SuspensionAction { base: &identity };
    let sp = vec![(
        SuspensionPoint { base: vec![0.3], heights: vec![0.5] },
        SuspensionPoint { base: vec![0.31], heights: vec![0.5] },
    )];
    let r = violation_search(&susp, Notion::Action, &sp, &opts).unwrap();
    if let Some(cx) = &r.counterexample {
        found += 1;
        revalidated += revalidate(&susp, cx, &opts).unwrap().holds as usize;
    }
    let cli = run_config("probe", &configs_dir().join("probe_identity.json"));
    let cli_holds = cli["revalidation"]["holds"].as_bool() == Some(true);

    let field = VectorFieldSpec::DampedTorus { alpha: [1.0, std::f64::consts::SQRT_2], center: [0.5, 0.5], sharpness: 4.0 };
    let damped = FieldFlow::new(&field);
    let mut rng = sampling::rng(9);
    let centers: Vec<Vec<f64>> = (0..1000).map(|_| sampling::uniform_box(&mut rng, &[(0.0, 1.0), (0.0, 1.0)])).collect();
    let mut ordered = 0;
    for (x, y) in sampling::nearby_pairs(&mut rng, &centers, 0.001, 0.05) {
        let (ox, oy) = (sampled(&damped, &x, 2.0, 0.05), sampled(&damped, &y, 2.0, 0.05));
        let dist = |a: &Vec<f64>, b: &Vec<f64>| damped.distance(a, b);
        let free = monotone_match(&ox, &oy, MatchMode::MonotoneFree, dist).unwrap().cost;
        let fix0 = monotone_match(&ox, &oy, MatchMode::MonotoneFix0, dist).unwrap().cost;
        let id = monotone_match(&ox, &oy, MatchMode::Identity, dist).unwrap().cost;
        ordered += (free <= fix0 && fix0 <= id) as usize;
    }
    let ok = found == 5 && revalidated == found && cli_holds && ordered == 1000 && opts.revalidation_factor == 10.0;
    let detail = format!("{revalidated}/{found} counterexamples revalidate at 10x, free <= fix0 <= identity on {ordered}/1000 pairs");
    verdict(9, ok, start.elapsed(), Duration::from_secs(60), &detail);
}

fn shipped_configs() -> Vec<(String, PathBuf)> {
    let mut out: Vec<(String, PathBuf)> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .map(|p| {
            let v: Value = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
            (v["subcommand"].as_str().unwrap().to_string(), p)
        })
        .collect();
    out.sort_by(|a, b| a.1.cmp(&b.1));
    out
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let mut differing = Vec::new();
    let configs = shipped_configs();
    for (sub, path) in &configs {
        for format in ["json", "csv"] {
            let cfg = path.to_str().unwrap();
            let a = run(&[sub, "--config", cfg, "--format", format]);
            let b = run(&[sub, "--config", cfg, "--format", format]);
            if !a.status.success() || a.stdout != b.stdout || a.stdout.is_empty() {
                differing.push(format!("{}:{format}", path.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    let ok = differing.is_empty() && configs.len() >= 10;
    let detail = format!("{} configs rerun in json and csv, differing {differing:?}", configs.len());
    verdict(10, ok, start.elapsed(), Duration::from_secs(120), &detail);
}

#[test]
fn malformed_config_exits_two_without_output() {
    let cfg = scratch("no_system.json");
    std::fs::write(&cfg, r#"{ "subcommand": "spectra" }"#).unwrap();
    let out_path = scratch("no_system_out.json");
    let _ = std::fs::remove_file(&out_path);
    let out = run(&["spectra", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
}

#[test]
fn probe_on_the_identity_flow_reports_a_counterexample() {
    let out = run(&["probe", "--config", configs_dir().join("probe_identity.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["report"]["counterexample"].is_object());
}

#[test]
fn empty_report_gives_header_only_csv() {
    let cfg = scratch("far_pair.json");
    let probe = serde_json::json!({
        "subcommand": "probe",
        "system": "identity_flow",
        "notion": "kinematic",
        "options": { "epsilon": 0.1, "delta": 0.05, "horizon": 5.0 },
        "pairs": [[[0.0, 0.0], [0.3, 0.0]]],
    });
    std::fs::write(&cfg, serde_json::to_vec(&probe).unwrap()).unwrap();
    let path = scratch("far_pair.csv");
    let out = run(&["probe", "--config", cfg.to_str().unwrap(), "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
    assert!(text.starts_with("t,x_1,x_2"));
}

#[test]
fn csv_uses_seventeen_significant_digits() {
    let out = run(&["lorenz-demo", "--config", configs_dir().join("lorenz_demo.json").to_str().unwrap(), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(2).unwrap();
    for cell in row.split(',') {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{cell}");
        let v: f64 = cell.parse().unwrap();
        assert_eq!(format!("{v:.16e}"), cell);
    }
}

#[test]
fn seed_flag_overrides_and_changes_sampling() {
    let cfg = configs_dir().join("commutant_random.json");
    let a = run(&["commutant", "--config", cfg.to_str().unwrap(), "--seed", "0"]);
    let b = run(&["commutant", "--config", cfg.to_str().unwrap()]);
    let c = run(&["commutant", "--config", cfg.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}
