//! The acceptance suite: one PASS/FAIL verdict per criterion.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use sdelab_core::adaptive::{
    final_time_rms_error, fixed_grid_euler_l1_error, global_l1_error, mean_cost, AdaptiveMethod, ConditionalExpectationOracle,
    Decision, LargestIncrementBisection, LazyPath, ObservedData, OutputPath, UniformMethod, UniformScheme,
};
use sdelab_core::couplings::global_coupling_distance;
use sdelab_core::estimation::{fit_rate, RatePoint};
use sdelab_core::transforms::{
    invert_transform, lamperti_transform, lipschitz_certificate, transformed_coefficients, Transform, TransformedModel,
};
use sdelab_core::{
    Coefficient, CouplingExperimentConfig, Dynamics, Grid, PathLattice, Polynomial, Purpose, SdeModel, SeedTree, Side,
    TransformG,
};
use serde_json::json;

use crate::catalog::builtin;
use crate::experiments::{self, Outcome, Row};
use crate::output::verdict;
use crate::spec::{ExperimentKind, ResolvedSpec};

/// Monte Carlo budgets of a suite run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Small budgets for smoke and determinism runs; verdicts are not meaningful.
    pub quick: bool,
}

impl Budget {
    pub const FULL: Budget = Budget { quick: false };
    pub const QUICK: Budget = Budget { quick: true };

    fn r(&self, full: usize) -> usize {
        if self.quick {
            (full / 50).max(50)
        } else {
            full
        }
    }

    fn ns(&self, full: &[usize]) -> Vec<usize> {
        if self.quick {
            full[..full.len().min(3)].to_vec()
        } else {
            full.to_vec()
        }
    }
}

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub rows: Vec<Row>,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {}: {} ({:.1} s)",
            verdict(self.pass),
            self.id,
            self.title,
            self.detail,
            self.seconds
        )
    }
}

pub const TITLES: [&str; 12] = [
    "final-time rate",
    "global L1 rate",
    "closed-form oracles",
    "conditional-variance identity",
    "coupling lower bound over the method catalog",
    "recursion identity and local-global equivalence",
    "occupation-time bound",
    "transform suite",
    "localization coincidence",
    "density gate",
    "adaptive harness",
    "determinism",
];

/// Wall-clock limits on an 8-worker machine, scaled to the workers available.
fn runtime_limit(id: u8) -> Option<f64> {
    let minutes = match id {
        1 | 2 => 10.0,
        3 => 2.0,
        4 => 5.0,
        8 => 1.0,
        _ => return None,
    };
    let workers = rayon::current_num_threads() as f64;
    Some(60.0 * minutes * (8.0 / workers).max(1.0))
}

struct Partial {
    pass: bool,
    detail: String,
    rows: Vec<Row>,
}

fn spec(kind: ExperimentKind, model: &str, id: &str, seed: u64) -> ResolvedSpec {
    let mut s = ResolvedSpec::builtin(kind, model);
    s.id = id.to_string();
    s.seed = seed;
    s
}

fn plain_row(id: &str, model: &str, n: usize, m: usize, p: f64, estimate: f64, std_error: f64, extra: serde_json::Value, seed: u64) -> Row {
    Row {
        experiment_id: id.to_string(),
        model_id: model.to_string(),
        n,
        m,
        p,
        estimate,
        std_error,
        extra,
        seed,
    }
}

fn slope(o: &Outcome) -> f64 {
    o.fit.as_ref().map_or(f64::NAN, |f| f.slope)
}

fn criterion_1(b: Budget, seed: u64) -> anyhow::Result<Partial> {
    let mut base = spec(ExperimentKind::FinalTimeRate, "indicator-drift", "c01-m64", seed);
    base.replications = b.r(10_000);
    base.n = b.ns(&base.n);
    let a = experiments::run(&base)?;
    let mut fine = base.clone();
    fine.id = "c01-m128".into();
    fine.m = 128;
    let f = experiments::run(&fine)?;
    let shift = (slope(&a) - slope(&f)).abs();
    let pass = a.pass && shift < 0.05;
    let detail = format!(
        "slope {:.4} at m = 64 (band [-0.90, -0.60]), {:.4} at m = 128, shift {shift:.4} (limit 0.05)",
        slope(&a),
        slope(&f)
    );
    Ok(Partial { pass, detail, rows: [a.rows, f.rows].concat() })
}

fn criterion_2(b: Budget, seed: u64) -> anyhow::Result<Partial> {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut rows = Vec::new();
    for model in ["ou", "indicator-drift"] {
        let mut s = spec(ExperimentKind::GlobalL1Rate, model, &format!("c02-{model}"), seed);
        s.replications = b.r(10_000);
        s.m = 16;
        s.n = b.ns(&s.n);
        let o = experiments::run(&s)?;
        pass &= o.pass;
        parts.push(format!("{model} slope {:.4}", slope(&o)));
        rows.extend(o.rows);
    }
    Ok(Partial { pass, detail: format!("{} (band [-0.60, -0.40])", parts.join(", ")), rows })
}

/// `2 (∫_0^1 e^{2(s-1)} ds - (∫_0^1 e^{s-1} ds)^2)` in closed form.
fn ou_one_interval_oracle() -> f64 {
    let e1 = (-1.0f64).exp();
    let e2 = (-2.0f64).exp();
    2.0 * ((1.0 - e2) / 2.0 - (1.0 - e1).powi(2))
}

/// Stops after querying `T` and outputs the zero path.
struct ZeroPath;

impl AdaptiveMethod for ZeroPath {
    fn name(&self) -> &str {
        "zero-path"
    }
    fn next_point(&self, data: &ObservedData) -> f64 {
        data.horizon
    }
    fn stop(&self, _: &ObservedData) -> Decision {
        Decision::Stop
    }
    fn output(&self, data: &ObservedData) -> sdelab_core::Result<OutputPath> {
        OutputPath::new(vec![0.0], vec![0.0], data.horizon)
    }
}

fn criterion_3(b: Budget, seed: u64) -> anyhow::Result<Partial> {
    let mut s = spec(ExperimentKind::BridgeMoments, "brownian", "c03a-bridge-moment", seed);
    s.m = 1024;
    s.replications = b.r(10_000);
    let a = experiments::run(&s)?;
    let moment = a.rows[0].estimate;

    let cfg = CouplingExperimentConfig::new(builtin("ou").unwrap(), Grid::Uniform(1))?
        .with_m(1024)
        .with_replications(b.r(10_000))
        .with_seed(seed);
    let d = global_coupling_distance(&cfg)?;
    let target_b = ou_one_interval_oracle();
    let pass_b = (d.moment - target_b).abs() <= 3.0 * d.moment_se;

    let cfg = CouplingExperimentConfig::new(builtin("brownian").unwrap(), Grid::Uniform(1))?
        .with_m(1024)
        .with_replications(b.r(10_000))
        .with_seed(seed);
    let z = global_l1_error(&ZeroPath, &cfg)?;
    let target_c = 2.0 / 3.0 * (2.0 / std::f64::consts::PI).sqrt();
    let pass_c = (z.estimate - target_c).abs() <= 3.0 * z.se;

    let mut rows = a.rows;
    rows.push(plain_row("c03b-ou-one-interval", "ou", 1, 1024, 2.0, d.moment, d.moment_se, json!({"target": target_b}), seed));
    rows.push(plain_row("c03c-zero-path", "brownian", 1, 1024, 1.0, z.estimate, z.se, json!({"target": target_c}), seed));
    let detail = format!(
        "(a) {moment:.5} vs 0.31333 ± 0.01; (b) {:.5} ± {:.5} vs {target_b:.5} ± 3 SE; (c) {:.5} ± {:.5} vs {target_c:.5} ± 3 SE",
        d.moment, d.moment_se, z.estimate, z.se
    );
    Ok(Partial { pass: a.pass && pass_b && pass_c, detail, rows })
}

fn criterion_4(b: Budget, seed: u64) -> anyhow::Result<Partial> {
    let mut pass = true;
    let mut rows = Vec::new();
    let mut parts = Vec::new();
    for (model, ns) in [("ou", vec![1, 4]), ("indicator-drift", vec![8, 32])] {
        let mut s = spec(ExperimentKind::OracleIdentity, model, &format!("c04-{model}"), seed);
        s.n = ns;
        s.replications = b.r(10_000);
        let o = experiments::run(&s)?;
        pass &= o.pass;
        parts.extend(o.rows.iter().map(|r| format!("{model} n = {}: {:.4}", r.n, r.estimate)));
        rows.extend(o.rows);
    }
    Ok(Partial { pass, detail: format!("ratios {} (band 1 ± 0.1)", parts.join(", ")), rows })
}

fn criterion_5(b: Budget, seed: u64) -> anyhow::Result<Partial> {
    let n = 32;
    let model = builtin("indicator-drift").unwrap();
    let cfg = CouplingExperimentConfig::new(model.clone(), Grid::Uniform(n))?
        .with_m(16)
        .with_replications(b.r(4_000))
        .with_seed(seed);
    let coupling = global_coupling_distance(&cfg)?;
    let methods: Vec<Box<dyn AdaptiveMethod>> = vec![
        Box::new(UniformMethod::new(n, model.clone(), UniformScheme::Euler)?),
        Box::new(UniformMethod::new(n, model.clone(), UniformScheme::Milstein)?),
        Box::new(UniformMethod::new(n, model.clone(), UniformScheme::TransformedMilstein)?),
        Box::new(ConditionalExpectationOracle {
            n,
            m: cfg.m,
            inner: 16,
            model: model.clone(),
            transform: cfg.transform.clone(),
            seed,
        }),
        Box::new(LargestIncrementBisection { budget: n, tolerance: None, model: model.clone() }),
    ];
    let mut pass = true;
    let mut rows = vec![plain_row(
        "c05-coupling",
        "indicator-drift",
        n,
        cfg.m,
        2.0,
        coupling.estimate,
        coupling.se,
        json!({}),
        seed,
    )];
    let mut worst = f64::INFINITY;
    for method in &methods {
        let (rms, cost) = final_time_rms_error(method.as_ref(), &cfg)?;
        let slack = 3.0 * (rms.se.powi(2) + (0.5 * coupling.se).powi(2)).sqrt();
        let margin = rms.estimate - (0.5 * coupling.estimate - slack);
        pass &= margin >= 0.0 && cost.within_budget(n);
        worst = worst.min(rms.estimate / coupling.estimate);
        rows.push(plain_row(
            &format!("c05-{}", method.name()),
            "indicator-drift",
            n,
            cfg.m,
            2.0,
            rms.estimate,
            rms.se,
            json!({"mean_cost": cost.mean, "margin": margin}),
            seed,
        ));
    }
    let detail = format!(
        "{} methods, coupling distance {:.5}, smallest rms / distance {worst:.4} (floor 0.5 - 3 SE)",
        methods.len(),
        coupling.estimate
    );
    Ok(Partial { pass, detail, rows })
}

fn criterion_6(b: Budget, seed: u64) -> anyhow::Result<Partial> {
    let mut pass = true;
    let mut rows = Vec::new();
    let mut parts = Vec::new();
    for model in ["ou", "indicator-drift"] {
        let mut s = spec(ExperimentKind::RecursionCheck, model, &format!("c06-{model}"), seed);
        s.replications = b.r(10_000);
        s.m = 16;
        s.n = b.ns(&s.n);
        let o = experiments::run(&s)?;
        pass &= o.pass;
        let (lo, hi) = o.rows.iter().fold((f64::INFINITY, 0.0f64), |(a, c), r| (a.min(r.estimate), c.max(r.estimate)));
        parts.push(format!("{model} ratio in [{lo:.3}, {hi:.3}]"));
        if !o.pass {
            parts.push(o.notes.join("; "));
        }
        rows.extend(o.rows);
    }
    Ok(Partial { pass, detail: format!("identity within 5 SE; {} (spread limit 16)", parts.join(", ")), rows })
}

fn criterion_7(b: Budget, seed: u64) -> anyhow::Result<Partial> {
    let mut s = spec(ExperimentKind::OccupationCheck, "indicator-drift", "c07-occupation", seed);
    s.replications = b.r(10_000);
    s.m = 16;
    let o = experiments::run(&s)?;
    let cs: Vec<String> = o.rows.iter().map(|r| format!("n = {}: {:.4e}", r.n, r.estimate)).collect();
    Ok(Partial { pass: o.pass, detail: format!("c_hat {} ({})", cs.join(", "), o.notes.join("; ")), rows: o.rows })
}

fn two_jump_model() -> anyhow::Result<SdeModel> {
    let drift = Coefficient::new(
        vec![-0.5, 0.5],
        vec![Polynomial::constant(1.0), Polynomial::affine(-1.0, 0.0), Polynomial::constant(2.0)],
        vec![None, None],
    )?;
    let diffusion = Coefficient::polynomial(Polynomial::new(vec![1.5, 0.2, 0.1]));
    Ok(SdeModel::new(drift, diffusion, 0.0, 1.0)?)
}

fn criterion_8(_: Budget, seed: u64) -> anyhow::Result<Partial> {
    let indicator = builtin("indicator-drift").unwrap();
    let two = two_jump_model()?;

    // Jump removal.
    let mut worst_jump = 0.0f64;
    for model in [&indicator, &two] {
        let g = TransformG::build(model)?;
        let t = transformed_coefficients(&g, model);
        for &xi in model.drift.breakpoints() {
            let y = g.value(xi);
            worst_jump = worst_jump.max((t.local(y, Side::Right).drift - t.local(y, Side::Left).drift).abs());
        }
    }
    let (l, r) = indicator.drift.limits(0);
    let raw_jump = (r - l).abs();
    let jumps_ok = worst_jump <= 1e-8 && raw_jump == 1.0;

    // Lamperti normalization on a 10^3 grid.
    let curved = SdeModel::new(
        Coefficient::step(0.0, 0.0, 1.0),
        Coefficient::polynomial(Polynomial::new(vec![1.0, 0.5, 0.25])),
        0.0,
        1.0,
    )?;
    let h = lamperti_transform(&curved, 0.1, 0.5)?;
    let th = TransformedModel::new(h.clone(), curved.clone(), curved.x0, curved.horizon);
    let (lo, hi) = (h.value(-0.4), h.value(0.6));
    let lamperti = (0..1000)
        .map(|k| (th.at(lo + (hi - lo) * k as f64 / 999.0).diffusion - 1.0).abs())
        .fold(0.0, f64::max);

    // Round trips on pseudo-random points.
    let mut rng = SeedTree::new(seed).stream(Purpose::Auxiliary, &[8]);
    let points: Vec<f64> = (0..1000).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
    let mut round_trip = 0.0f64;
    for model in [&indicator, &two] {
        let g = TransformG::build(model)?;
        for &x in &points {
            round_trip = round_trip.max((invert_transform(&g, g.value(x))? - x).abs());
        }
    }
    for &x in &points[..200] {
        let x = x / 3.0 * 0.35;
        round_trip = round_trip.max((invert_transform(&h, h.value(x))? - x).abs());
    }

    // Lipschitz certificates, finite and stable under grid doubling.
    let mut certificates_ok = true;
    let mut worst_growth = 0.0f64;
    for model in [&indicator, &two] {
        let g = TransformG::build(model)?;
        let t = transformed_coefficients(&g, model);
        let drift = |y: f64| t.at(y).drift;
        let diffusion = |y: f64| t.at(y).diffusion;
        for f in [&drift as &dyn Fn(f64) -> f64, &diffusion] {
            let coarse = lipschitz_certificate(f, (-1.0, 1.0), 10_000)?;
            let fine = lipschitz_certificate(f, (-1.0, 1.0), 20_000)?;
            let growth = fine / coarse.max(1e-12);
            worst_growth = worst_growth.max(growth);
            certificates_ok &= coarse.is_finite() && fine.is_finite() && growth < 2.0;
        }
    }

    let pass = jumps_ok && lamperti <= 1e-8 && round_trip <= 1e-9 && certificates_ok;
    let detail = format!(
        "transformed jump {worst_jump:.2e} (raw {raw_jump}), |sigma^H - 1| {lamperti:.2e}, round trip {round_trip:.2e}, certificate growth {worst_growth:.3}"
    );
    let rows = vec![
        plain_row("c08-jump-removal", "indicator-drift", 1, 0, 2.0, worst_jump, 0.0, json!({"limit": 1e-8}), seed),
        plain_row("c08-lamperti", "curved", 1, 0, 2.0, lamperti, 0.0, json!({"limit": 1e-8}), seed),
        plain_row("c08-round-trip", "indicator-drift", 1, 0, 2.0, round_trip, 0.0, json!({"limit": 1e-9}), seed),
        plain_row("c08-lipschitz", "indicator-drift", 1, 0, 2.0, worst_growth, 0.0, json!({"limit": 2.0}), seed),
    ];
    Ok(Partial { pass, detail, rows })
}

fn criterion_9(b: Budget, seed: u64) -> anyhow::Result<Partial> {
    let mut s = spec(ExperimentKind::LocalizationCheck, "indicator-drift", "c09-localization", seed);
    s.replications = b.r(1_000);
    s.m = 1024;
    let o = experiments::run(&s)?;
    Ok(Partial { pass: o.pass, detail: o.notes.join("; "), rows: o.rows })
}

fn criterion_10(b: Budget, seed: u64) -> anyhow::Result<Partial> {
    let mut s = spec(ExperimentKind::DensityGate, "indicator-drift", "c10-indicator", seed);
    s.replications = b.r(10_000);
    s.resamples = 200;
    let jump = experiments::run(&s)?;
    let mut g = spec(ExperimentKind::DensityGate, "brownian", "c10-gaussian", seed);
    g.replications = b.r(10_000);
    g.m = 16;
    g.resamples = 200;
    let gauss = experiments::run(&g)?;
    let target = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let est = gauss.rows[0].estimate;
    let gauss_ok = (est - target).abs() <= 0.02;
    let detail = format!("{}; Gaussian case {est:.5} vs {target:.5} ± 0.02", jump.notes.join("; "));
    Ok(Partial { pass: jump.pass && gauss_ok, detail, rows: [jump.rows, gauss.rows].concat() })
}

fn criterion_11(b: Budget, seed: u64) -> anyhow::Result<Partial> {
    let ou = builtin("ou").unwrap();
    let mut rows = Vec::new();

    // Cost of the uniform method.
    let mut cost_ok = true;
    for n in [1usize, 16, 64] {
        let method = UniformMethod::new(n, ou.clone(), UniformScheme::Euler)?;
        let c = mean_cost(&method, &ou, b.r(1_000), seed)?;
        cost_ok &= c.mean == n as f64 && c.se == 0.0 && c.max == n;
    }

    // Two code paths for a fixed grid.
    let n = 16;
    let cfg = CouplingExperimentConfig::new(ou.clone(), Grid::Uniform(n))?
        .with_m(16)
        .with_replications(b.r(2_000))
        .with_seed(seed);
    let adaptive = global_l1_error(&UniformMethod::new(n, ou.clone(), UniformScheme::Euler)?, &cfg)?;
    let direct = fixed_grid_euler_l1_error(n, &cfg)?;
    let embedding = (adaptive.estimate - direct.estimate).abs();

    // Re-querying returns identical values.
    let base = PathLattice::new(vec![0.0], vec![0.0])?;
    let mut path = LazyPath::new(&base, SeedTree::new(seed).stream(Purpose::Query, &[11]));
    let mut rng = SeedTree::new(seed).stream(Purpose::Auxiliary, &[11]);
    let times: Vec<f64> = (0..200).map(|_| rand::Rng::random_range(&mut rng, 0.0..1.5)).collect();
    let first: Vec<f64> = times.iter().map(|&t| path.query(t)).collect::<sdelab_core::Result<_>>()?;
    let again: Vec<f64> = times.iter().rev().map(|&t| path.query(t)).collect::<sdelab_core::Result<_>>()?;
    let consistent = first.iter().zip(again.iter().rev()).all(|(a, b)| a.to_bits() == b.to_bits());

    // Euler through the adaptive interface.
    let mut points = Vec::new();
    for n in b.ns(&[8, 16, 32, 64, 128, 256, 512]) {
        let cfg = CouplingExperimentConfig::new(ou.clone(), Grid::Uniform(n))?
            .with_m(16)
            .with_replications(b.r(2_000))
            .with_seed(seed);
        let e = global_l1_error(&UniformMethod::new(n, ou.clone(), UniformScheme::Euler)?, &cfg)?;
        points.push(RatePoint { n: n as f64, error: e.estimate, se: e.se });
        rows.push(plain_row("c11-euler-l1", "ou", n, 16, 1.0, e.estimate, e.se, json!({}), seed));
    }
    let fit = fit_rate(&points)?;
    let slope_ok = (-0.6..=-0.4).contains(&fit.slope);

    rows.push(plain_row("c11-embedding", "ou", n, 16, 1.0, embedding, 0.0, json!({"adaptive": adaptive.estimate, "direct": direct.estimate}), seed));
    let pass = cost_ok && embedding <= 1e-12 && consistent && slope_ok;
    let detail = format!(
        "uniform cost exact: {cost_ok}; embedding gap {embedding:.2e}; queries consistent: {consistent}; Euler L1 slope {:.4} (band [-0.6, -0.4])",
        fit.slope
    );
    Ok(Partial { pass, detail, rows })
}

/// Runs criterion `id` (1 to 11).
pub fn run_criterion(id: u8, budget: Budget, seed: u64) -> CriterionResult {
    let start = Instant::now();
    let outcome = match id {
        1 => criterion_1(budget, seed),
        2 => criterion_2(budget, seed),
        3 => criterion_3(budget, seed),
        4 => criterion_4(budget, seed),
        5 => criterion_5(budget, seed),
        6 => criterion_6(budget, seed),
        7 => criterion_7(budget, seed),
        8 => criterion_8(budget, seed),
        9 => criterion_9(budget, seed),
        10 => criterion_10(budget, seed),
        11 => criterion_11(budget, seed),
        _ => Err(anyhow::anyhow!("criterion {id} is not part of the in-process suite")),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut pass, mut detail, rows) = match outcome {
        Ok(p) => (p.pass, p.detail, p.rows),
        Err(e) => (false, format!("error: {e:#}"), Vec::new()),
    };
    if let Some(limit) = runtime_limit(id).filter(|_| !budget.quick) {
        if seconds > limit {
            pass = false;
            detail.push_str(&format!("; runtime {seconds:.0} s over the {limit:.0} s limit"));
        }
    }
    CriterionResult { id, title: TITLES[id as usize - 1], pass, detail, rows, seconds }
}

/// Criteria 1 to 11, reporting each result as it completes.
pub fn run_suite(budget: Budget, seed: u64, mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    (1..=11)
        .map(|id| {
            let r = run_criterion(id, budget, seed);
            report(&r);
            r
        })
        .collect()
}

/// Runs `sdelab verify --quick` twice per worker count and compares the CSVs byte for byte.
pub fn determinism(binary: &Path, scratch: &Path, seed: u64) -> CriterionResult {
    let start = Instant::now();
    let run = |threads: usize, k: usize| -> anyhow::Result<Vec<u8>> {
        let out = scratch.join(format!("threads-{threads}-run-{k}"));
        let status = Command::new(binary)
            .args(["verify", "--quick", "--seed", &seed.to_string(), "--out"])
            .arg(&out)
            .env("SDELAB_THREADS", threads.to_string())
            .output()?;
        // Exit status 3 only reports failed verdicts, which are expected at quick budgets.
        if !matches!(status.status.code(), Some(0) | Some(3)) {
            anyhow::bail!("verify exited with {:?}: {}", status.status, String::from_utf8_lossy(&status.stderr));
        }
        Ok(std::fs::read(out.join("verify.csv"))?)
    };
    let result = (|| -> anyhow::Result<(bool, String)> {
        let runs = [run(1, 0)?, run(1, 1)?, run(8, 0)?, run(8, 1)?];
        let same = runs.iter().all(|r| r == &runs[0]);
        let rows = runs[0].split(|&b| b == b'\n').filter(|l| !l.is_empty() && l[0] != b'#').count();
        Ok((same && rows > 1, format!("4 runs (1 and 8 workers, twice each), {rows} CSV lines, identical: {same}")))
    })();
    let (pass, detail) = result.unwrap_or_else(|e| (false, format!("error: {e:#}")));
    CriterionResult { id: 12, title: TITLES[11], pass, detail, rows: Vec::new(), seconds: start.elapsed().as_secs_f64() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_constant() {
        assert!((ou_one_interval_oracle() - 0.0655).abs() < 5e-5);
    }

    #[test]
    fn quick_budgets_shrink() {
        assert_eq!(Budget::QUICK.r(10_000), 200);
        assert_eq!(Budget::QUICK.ns(&[8, 16, 32, 64]), vec![8, 16, 32]);
        assert_eq!(Budget::FULL.r(10_000), 10_000);
    }
}
