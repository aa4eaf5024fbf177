use sdelab_core::adaptive::{
    fixed_grid_euler_l1_error, global_l1_error, mean_cost, run_adaptive, AdaptiveMethod, Decision, LargestIncrementBisection,
    LazyPath, ObservedData, OutputPath, UniformMethod, UniformScheme, DEFAULT_CAP,
};
use sdelab_core::estimation::{fit_rate, RatePoint};
use sdelab_core::error::Result;
use sdelab_core::{Coefficient, CouplingExperimentConfig, Grid, PathLattice, Polynomial, Purpose, SdeModel, SeedTree};

fn bm() -> SdeModel {
    SdeModel::new(Coefficient::constant(0.0), Coefficient::constant(1.0), 0.0, 1.0).unwrap()
}

fn ou() -> SdeModel {
    SdeModel::new(Coefficient::polynomial(Polynomial::affine(-1.0, 0.0)), Coefficient::constant(1.0), 0.0, 1.0).unwrap()
}

fn fresh(seed: u64) -> LazyPath {
    let base = PathLattice::new(vec![0.0], vec![0.0]).unwrap();
    LazyPath::new(&base, SeedTree::new(seed).stream(Purpose::Query, &[0]))
}

/// Queries `T`, then stops at once if `W_T > 0` and after a second query otherwise.
struct CoinStop;

impl AdaptiveMethod for CoinStop {
    fn name(&self) -> &str {
        "coin-stop"
    }
    fn next_point(&self, data: &ObservedData) -> f64 {
        data.horizon / (data.k() + 1) as f64
    }
    fn stop(&self, data: &ObservedData) -> Decision {
        if data.k() >= 2 || data.values[0] > 0.0 {
            Decision::Stop
        } else {
            Decision::Go
        }
    }
    fn output(&self, data: &ObservedData) -> Result<OutputPath> {
        OutputPath::new(vec![0.0], vec![data.x0], data.horizon)
    }
}

/// Outputs the zero path after one query.
struct Zero;

impl AdaptiveMethod for Zero {
    fn name(&self) -> &str {
        "zero"
    }
    fn next_point(&self, data: &ObservedData) -> f64 {
        data.horizon
    }
    fn stop(&self, _: &ObservedData) -> Decision {
        Decision::Stop
    }
    fn output(&self, data: &ObservedData) -> Result<OutputPath> {
        OutputPath::new(vec![0.0], vec![0.0], data.horizon)
    }
}

/// Queries every time of a fixed lattice and outputs Brownian motion itself.
struct WhiteBox {
    times: Vec<f64>,
}

impl AdaptiveMethod for WhiteBox {
    fn name(&self) -> &str {
        "white-box"
    }
    fn next_point(&self, data: &ObservedData) -> f64 {
        self.times[data.k() + 1]
    }
    fn stop(&self, data: &ObservedData) -> Decision {
        if data.k() + 1 >= self.times.len() {
            Decision::Stop
        } else {
            Decision::Go
        }
    }
    fn output(&self, data: &ObservedData) -> Result<OutputPath> {
        let (t, w) = data.sorted();
        OutputPath::new(t, w.iter().map(|v| data.x0 + v).collect(), data.horizon)
    }
}

#[test]
fn randomized_cost_is_one_and_a_half() {
    let c = mean_cost(&CoinStop, &bm(), 10_000, 1).unwrap();
    assert!((c.mean - 1.5).abs() <= 3.0 * c.se, "{c:?}");
    assert_eq!(c.max, 2);
}

#[test]
fn bisection_cost_is_exactly_the_budget() {
    let n = 16;
    let m = LargestIncrementBisection { budget: 2 * n, tolerance: None, model: bm() };
    for seed in 0..20 {
        let run = run_adaptive(&m, 0.0, 1.0, &mut fresh(seed), DEFAULT_CAP).unwrap();
        assert_eq!(run.cost, 2 * n);
        let mut t = run.query_times.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        assert_eq!(t.len(), 2 * n);
    }
    let c = mean_cost(&m, &bm(), 200, 2).unwrap();
    assert_eq!(c.mean, (2 * n) as f64);
}

#[test]
fn queries_are_consistent() {
    let mut p = fresh(3);
    let times = [0.5, 0.25, 0.75, 0.125, 1.5, 0.9];
    let first: Vec<f64> = times.iter().map(|&t| p.query(t).unwrap()).collect();
    for _ in 0..3 {
        let again: Vec<f64> = times.iter().rev().map(|&t| p.query(t).unwrap()).collect();
        assert!(again.iter().rev().zip(&first).all(|(a, b)| a == b));
    }
}

#[test]
fn zero_path_error_against_brownian_motion() {
    let cfg = CouplingExperimentConfig::new(bm(), Grid::Uniform(1)).unwrap().with_m(256).with_replications(10_000).with_seed(4);
    let e = global_l1_error(&Zero, &cfg).unwrap();
    let target = 2.0 / 3.0 * (2.0 / std::f64::consts::PI).sqrt();
    assert!((e.estimate - target).abs() <= 3.0 * e.se + 1e-3 * target, "{} vs {target}", e.estimate);
}

#[test]
fn white_box_output_has_no_error() {
    let cfg = CouplingExperimentConfig::new(bm(), Grid::Uniform(4)).unwrap().with_m(8).with_replications(50);
    let method = WhiteBox { times: cfg.lattice().unwrap().times };
    let e = global_l1_error(&method, &cfg).unwrap();
    assert!(e.estimate <= 1e-12, "{}", e.estimate);
}

#[test]
fn fixed_grid_embedding_matches_direct_evaluation() {
    for n in [4, 16] {
        let cfg = CouplingExperimentConfig::new(ou(), Grid::Uniform(n)).unwrap().with_m(16).with_replications(500).with_seed(5);
        let method = UniformMethod::new(n, ou(), UniformScheme::Euler).unwrap();
        let adaptive = global_l1_error(&method, &cfg).unwrap();
        let direct = fixed_grid_euler_l1_error(n, &cfg).unwrap();
        assert!((adaptive.estimate - direct.estimate).abs() <= 1e-12, "{} vs {}", adaptive.estimate, direct.estimate);
        let cost = mean_cost(&method, &ou(), 10, 0).unwrap();
        assert_eq!((cost.mean, cost.se), (n as f64, 0.0));
    }
}

#[test]
fn uniform_euler_global_rate() {
    let points: Vec<RatePoint> = [8usize, 16, 32, 64, 128]
        .iter()
        .map(|&n| {
            let cfg = CouplingExperimentConfig::new(ou(), Grid::Uniform(n)).unwrap().with_m(16).with_replications(1_000).with_seed(6);
            let method = UniformMethod::new(n, ou(), UniformScheme::Euler).unwrap();
            let e = global_l1_error(&method, &cfg).unwrap();
            RatePoint { n: n as f64, error: e.estimate, se: e.se }
        })
        .collect();
    let fit = fit_rate(&points).unwrap();
    assert!(fit.slope >= -0.6 && fit.slope <= -0.4, "{}", fit.slope);
}
