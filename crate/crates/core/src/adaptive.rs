//! Adaptive evaluation of the driving path: methods choose each query time
//! from what they have seen so far, pay one unit per query, and output a
//! piecewise-constant path.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coefficients::SdeModel;
use crate::couplings::{conditional_samples, CouplingExperimentConfig, DistanceEstimate, Lattice, Reference};
use crate::error::{Error, Result};
use crate::estimation::{pth_root, Summary};
use crate::noise::{bridge_conditional, sample_driver, PathLattice};
use crate::parallel::replicate;
use crate::rng::{mix64, Purpose, SeedTree, Stream};
use crate::solvers::{step, TransformedStepper};
use crate::transforms::TransformG;

/// Default query cap per path.
pub const DEFAULT_CAP: usize = 1_000_000;

/// `D_k = (x0, y_1, ..., y_k)` with the query times that produced it.
#[derive(Clone, Copy, Debug)]
pub struct ObservedData<'a> {
    pub x0: f64,
    pub horizon: f64,
    /// Query times in the order they were asked.
    pub times: &'a [f64],
    pub values: &'a [f64],
}

impl ObservedData<'_> {
    pub fn k(&self) -> usize {
        self.times.len()
    }

    /// Observations sorted by time, with `(0, 0)` prepended unless time 0 was queried.
    pub fn sorted(&self) -> (Vec<f64>, Vec<f64>) {
        let mut pairs: Vec<(f64, f64)> = self.times.iter().copied().zip(self.values.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.dedup_by(|a, b| a.0 == b.0);
        if pairs.first().is_none_or(|p| p.0 > 0.0) {
            pairs.insert(0, (0.0, 0.0));
        }
        pairs.into_iter().unzip()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Stop,
    Go,
}

/// A piecewise-constant path on `[0, T]`, left-continuous knots held to the right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub horizon: f64,
}

impl OutputPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, horizon: f64) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() || times[0] != 0.0 {
            return Err(Error::Validation("output path needs matching knots starting at 0".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) || *times.last().unwrap() > horizon {
            return Err(Error::Validation("output knots must increase inside [0, T]".into()));
        }
        Ok(Self { times, values, horizon })
    }

    /// Value held since the last knot at or before `t`.
    pub fn value(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        self.values[k.saturating_sub(1)]
    }

    pub fn terminal(&self) -> f64 {
        self.value(self.horizon)
    }
}

/// An adaptive method: query policy `psi`, stopping rule `chi`, output map `phi`.
///
/// Methods see only the observed data, so they are pure by construction.
pub trait AdaptiveMethod: Sync {
    fn name(&self) -> &str;
    /// Time of query `k + 1` given `D_k`.
    fn next_point(&self, data: &ObservedData) -> f64;
    /// Whether to stop after `D_k`, `k >= 1`.
    fn stop(&self, data: &ObservedData) -> Decision;
    fn output(&self, data: &ObservedData) -> Result<OutputPath>;
}

/// A Brownian path known on a lattice and refined on demand.
///
/// Unknown times inside the lattice are drawn from the bridge law between
/// their neighbours; times past the end extend the path forward. Every
/// answer is remembered, so repeated queries agree.
#[derive(Clone, Debug)]
pub struct LazyPath {
    times: Vec<f64>,
    values: Vec<f64>,
    rng: Stream,
}

impl LazyPath {
    pub fn new(base: &PathLattice, rng: Stream) -> Self {
        Self {
            times: base.times().to_vec(),
            values: base.values().to_vec(),
            rng,
        }
    }

    pub fn query(&mut self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < self.times[0] {
            return Err(Error::Range(t));
        }
        let i = self.times.partition_point(|&s| s < t);
        if i < self.times.len() && self.times[i] == t {
            return Ok(self.values[i]);
        }
        let z: f64 = self.rng.sample(StandardNormal);
        let v = if i == self.times.len() {
            let (a, va) = (self.times[i - 1], self.values[i - 1]);
            va + (t - a).sqrt() * z
        } else {
            let (mean, var) = bridge_conditional(self.times[i - 1], self.values[i - 1], self.times[i], self.values[i], t);
            mean + var.sqrt() * z
        };
        self.times.insert(i, t);
        self.values.insert(i, v);
        Ok(v)
    }

    pub fn known(&self) -> (&[f64], &[f64]) {
        (&self.times, &self.values)
    }
}

/// Output of [`run_adaptive`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveRun {
    pub output: OutputPath,
    pub cost: usize,
    pub query_times: Vec<f64>,
    pub query_values: Vec<f64>,
}

/// Queries `path` until the method stops; fails past `cap` queries.
pub fn run_adaptive<M: AdaptiveMethod + ?Sized>(method: &M, x0: f64, horizon: f64, path: &mut LazyPath, cap: usize) -> Result<AdaptiveRun> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    loop {
        if times.len() >= cap {
            return Err(Error::NonTermination { method: method.name().to_string(), cap });
        }
        let data = ObservedData { x0, horizon, times: &times, values: &values };
        let t = method.next_point(&data);
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::Range(t));
        }
        let y = path.query(t)?;
        times.push(t);
        values.push(y);
        let data = ObservedData { x0, horizon, times: &times, values: &values };
        if method.stop(&data) == Decision::Stop {
            let output = method.output(&data)?;
            return Ok(AdaptiveRun { output, cost: times.len(), query_times: times, query_values: values });
        }
    }
}

/// A pathwise scheme run on observed Brownian values, held piecewise constant.
pub fn scheme_output(model: &SdeModel, g: Option<&TransformG>, milstein: bool, x0: f64, horizon: f64, times: &[f64], w: &[f64]) -> Result<OutputPath> {
    let mut xs = Vec::with_capacity(times.len());
    match g {
        Some(g) => {
            TransformedStepper { model, g }.run(x0, times, w, |_, _, x| xs.push(x))?;
        }
        None => crate::solvers::integrate_into(model, milstein, x0, times, w, &mut xs)?,
    }
    OutputPath::new(times.to_vec(), xs, horizon)
}

/// Which scheme a uniform method runs on its observations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniformScheme {
    Euler,
    Milstein,
    TransformedMilstein,
}

/// Queries `kT/n`, `k = 1..n`, and runs a scheme on those values.
#[derive(Clone, Debug)]
pub struct UniformMethod {
    pub n: usize,
    pub model: SdeModel,
    pub scheme: UniformScheme,
    pub transform: Option<TransformG>,
    name: String,
}

impl UniformMethod {
    pub fn new(n: usize, model: SdeModel, scheme: UniformScheme) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("uniform methods need n >= 1".into()));
        }
        let transform = match scheme {
            UniformScheme::TransformedMilstein => Some(TransformG::build(&model)?),
            _ => None,
        };
        let name = match scheme {
            UniformScheme::Euler => "uniform-euler",
            UniformScheme::Milstein => "uniform-milstein",
            UniformScheme::TransformedMilstein => "uniform-transformed-milstein",
        }
        .to_string();
        Ok(Self { n, model, scheme, transform, name })
    }

    fn grid_time(&self, k: usize, horizon: f64) -> f64 {
        horizon * k as f64 / self.n as f64
    }
}

impl AdaptiveMethod for UniformMethod {
    fn name(&self) -> &str {
        &self.name
    }

    fn next_point(&self, data: &ObservedData) -> f64 {
        self.grid_time(data.k() + 1, data.horizon)
    }

    fn stop(&self, data: &ObservedData) -> Decision {
        if data.k() >= self.n {
            Decision::Stop
        } else {
            Decision::Go
        }
    }

    fn output(&self, data: &ObservedData) -> Result<OutputPath> {
        let (t, w) = data.sorted();
        scheme_output(
            &self.model,
            self.transform.as_ref(),
            self.scheme == UniformScheme::Milstein,
            data.x0,
            data.horizon,
            &t,
            &w,
        )
    }
}

/// Queries `T` first, then bisects the subinterval with the largest
/// `|increment|` until `budget` queries or every increment is below `tolerance`.
#[derive(Clone, Debug)]
pub struct LargestIncrementBisection {
    pub budget: usize,
    pub tolerance: Option<f64>,
    pub model: SdeModel,
}

impl LargestIncrementBisection {
    fn widest(&self, data: &ObservedData) -> Option<(f64, f64, f64)> {
        let (t, w) = data.sorted();
        t.windows(2)
            .zip(w.windows(2))
            .map(|(tt, ww)| (tt[0], tt[1], (ww[1] - ww[0]).abs()))
            .fold(None, |best: Option<(f64, f64, f64)>, c| match best {
                Some(b) if b.2 >= c.2 => Some(b),
                _ => Some(c),
            })
    }
}

impl AdaptiveMethod for LargestIncrementBisection {
    fn name(&self) -> &str {
        "largest-increment-bisection"
    }

    fn next_point(&self, data: &ObservedData) -> f64 {
        match self.widest(data) {
            _ if data.k() == 0 => data.horizon,
            Some((a, b, _)) => 0.5 * (a + b),
            None => data.horizon,
        }
    }

    fn stop(&self, data: &ObservedData) -> Decision {
        let small = self
            .tolerance
            .is_some_and(|tol| self.widest(data).is_none_or(|(_, _, inc)| inc < tol));
        if data.k() >= self.budget || small {
            Decision::Stop
        } else {
            Decision::Go
        }
    }

    fn output(&self, data: &ObservedData) -> Result<OutputPath> {
        let (t, w) = data.sorted();
        scheme_output(&self.model, None, false, data.x0, data.horizon, &t, &w)
    }
}

/// Final-time conditional expectation given the values at `kT/n`,
/// estimated from `inner` bridge fillings on an `m`-substep lattice.
///
/// Inner randomness is keyed by a hash of the observed data, so the output
/// is a function of the data alone.
#[derive(Clone, Debug)]
pub struct ConditionalExpectationOracle {
    pub n: usize,
    pub m: usize,
    pub inner: usize,
    pub model: SdeModel,
    pub transform: Option<TransformG>,
    pub seed: u64,
}

impl ConditionalExpectationOracle {
    fn config(&self) -> Result<CouplingExperimentConfig> {
        let mut cfg = CouplingExperimentConfig::new(self.model.clone(), crate::couplings::Grid::Uniform(self.n))?
            .with_m(self.m)
            .with_seed(self.seed);
        if self.transform.is_some() {
            cfg.transform = self.transform.clone();
        }
        Ok(cfg)
    }
}

impl AdaptiveMethod for ConditionalExpectationOracle {
    fn name(&self) -> &str {
        "conditional-expectation-oracle"
    }

    fn next_point(&self, data: &ObservedData) -> f64 {
        data.horizon * (data.k() + 1) as f64 / self.n as f64
    }

    fn stop(&self, data: &ObservedData) -> Decision {
        if data.k() >= self.n {
            Decision::Stop
        } else {
            Decision::Go
        }
    }

    fn output(&self, data: &ObservedData) -> Result<OutputPath> {
        let cfg = self.config()?;
        let lat = cfg.lattice()?;
        let key = data.values.iter().fold(mix64(self.seed), |h, v| mix64(h ^ v.to_bits()));
        let tree = SeedTree::new(key);
        let (_, w) = data.sorted();
        let reference = Reference::new(&cfg);
        let stepper = reference.stepper();
        let mut values = vec![0.0; lat.times.len()];
        let mut total = 0.0;
        for k in 0..self.inner as u64 {
            for (i, &c) in lat.coarse.iter().enumerate() {
                values[c] = w[i];
            }
            crate::noise::fill_intervals(&tree, Purpose::Inner, &[k], &lat.times, &lat.coarse, &mut values);
            total += stepper.run(data.x0, &lat.times, &values, |_, _, _| {})?.1;
        }
        let estimate = total / self.inner as f64;
        OutputPath::new(vec![0.0, data.horizon], vec![data.x0, estimate], data.horizon)
    }
}

/// Mean cost with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub se: f64,
    pub max: usize,
}

impl CostEstimate {
    pub fn within_budget(&self, n: usize) -> bool {
        self.mean <= n as f64
    }
}

/// Monte Carlo mean of the number of queries on fresh Brownian paths.
pub fn mean_cost<M: AdaptiveMethod + ?Sized>(method: &M, model: &SdeModel, replications: usize, seed: u64) -> Result<CostEstimate> {
    if replications == 0 {
        return Err(Error::Validation("mean cost needs at least one replication".into()));
    }
    let tree = SeedTree::new(seed);
    let costs = replicate(replications, |r| {
        let base = PathLattice::from_parts_unchecked(vec![0.0], vec![0.0]);
        let mut path = LazyPath::new(&base, tree.stream(Purpose::Query, &[r]));
        Ok(run_adaptive(method, model.x0, model.horizon, &mut path, DEFAULT_CAP)?.cost)
    })?;
    let as_f: Vec<f64> = costs.iter().map(|&c| c as f64).collect();
    let s = Summary::of(&as_f);
    Ok(CostEstimate { mean: s.mean, se: s.se, max: costs.into_iter().max().unwrap_or(0) })
}

/// Trapezoid `∫ |x(t) - out(t)| dt` over the lattice times.
pub fn l1_distance(times: &[f64], reference: &[f64], output: &OutputPath) -> f64 {
    let mut total = 0.0;
    let mut prev = (reference[0] - output.value(times[0])).abs();
    for j in 1..times.len() {
        let cur = (reference[j] - output.value(times[j])).abs();
        total += 0.5 * (times[j] - times[j - 1]) * (prev + cur);
        prev = cur;
    }
    total
}

fn reference_path(stepper: &TransformedStepper, x0: f64, lat: &Lattice, w: &[f64]) -> Result<Vec<f64>> {
    let mut xs = Vec::with_capacity(lat.times.len());
    stepper.run(x0, &lat.times, w, |_, _, x| xs.push(x))?;
    Ok(xs)
}

/// Per-replication results of running a method against experiment drivers.
struct MethodRun {
    l1: f64,
    terminal_error: f64,
    cost: usize,
}

fn run_against_reference<M: AdaptiveMethod + ?Sized>(method: &M, cfg: &CouplingExperimentConfig) -> Result<Vec<MethodRun>> {
    let lat = cfg.lattice()?;
    let tree = cfg.tree();
    let reference = Reference::new(cfg);
    let stepper = reference.stepper();
    replicate(cfg.replications, |r| {
        let driver = sample_driver(&tree, r, &lat.times, &lat.coarse);
        let xs = reference_path(&stepper, cfg.model.x0, &lat, driver.values())?;
        let mut path = LazyPath::new(&driver, tree.stream(Purpose::Query, &[r]));
        let run = run_adaptive(method, cfg.model.x0, cfg.model.horizon, &mut path, DEFAULT_CAP)?;
        Ok(MethodRun {
            l1: l1_distance(&lat.times, &xs, &run.output),
            terminal_error: xs.last().unwrap() - run.output.terminal(),
            cost: run.cost,
        })
    })
}

/// `E ∫ |X - Xhat| dt` against the reference solution on the experiment's fine lattice.
pub fn global_l1_error<M: AdaptiveMethod + ?Sized>(method: &M, cfg: &CouplingExperimentConfig) -> Result<DistanceEstimate> {
    let runs = run_against_reference(method, cfg)?;
    let l1: Vec<f64> = runs.iter().map(|r| r.l1).collect();
    let s = Summary::of(&l1);
    Ok(DistanceEstimate {
        estimate: s.mean,
        se: s.se,
        replications: s.count,
        per_interval: Vec::new(),
        per_interval_se: Vec::new(),
        moment: s.mean,
        moment_se: s.se,
    })
}

/// `(E|X_T - Xhat_T|^2)^{1/2}` with the mean cost of the method.
pub fn final_time_rms_error<M: AdaptiveMethod + ?Sized>(method: &M, cfg: &CouplingExperimentConfig) -> Result<(DistanceEstimate, CostEstimate)> {
    let runs = run_against_reference(method, cfg)?;
    let sq: Vec<f64> = runs.iter().map(|r| r.terminal_error * r.terminal_error).collect();
    let s = Summary::of(&sq);
    let (estimate, se) = pth_root(s.mean, s.se, 2.0);
    let costs: Vec<f64> = runs.iter().map(|r| r.cost as f64).collect();
    let c = Summary::of(&costs);
    Ok((
        DistanceEstimate {
            estimate,
            se,
            replications: s.count,
            per_interval: Vec::new(),
            per_interval_se: Vec::new(),
            moment: s.mean,
            moment_se: s.se,
        },
        CostEstimate { mean: c.mean, se: c.se, max: runs.iter().map(|r| r.cost).max().unwrap_or(0) },
    ))
}

/// [`global_l1_error`] of a uniform Euler method computed directly on the
/// coarse values, without the adaptive machinery.
pub fn fixed_grid_euler_l1_error(n: usize, cfg: &CouplingExperimentConfig) -> Result<DistanceEstimate> {
    let lat = cfg.lattice()?;
    let tree = cfg.tree();
    let reference = Reference::new(cfg);
    let stepper = reference.stepper();
    let horizon = cfg.model.horizon;
    let l1 = replicate(cfg.replications, |r| {
        let driver = sample_driver(&tree, r, &lat.times, &lat.coarse);
        let xs = reference_path(&stepper, cfg.model.x0, &lat, driver.values())?;
        let mut times = vec![0.0];
        let mut w = vec![0.0];
        for k in 1..=n {
            let t = horizon * k as f64 / n as f64;
            let j = driver
                .index_of(t)
                .ok_or_else(|| Error::Precondition(format!("grid time {t} is not on the driver lattice")))?;
            times.push(t);
            w.push(driver.values()[j]);
        }
        let mut x = vec![cfg.model.x0];
        for k in 1..times.len() {
            let prev = *x.last().unwrap();
            x.push(step(&cfg.model, false, prev, times[k] - times[k - 1], w[k] - w[k - 1]));
        }
        Ok(l1_distance(&lat.times, &xs, &OutputPath::new(times, x, horizon)?))
    })?;
    let s = Summary::of(&l1);
    Ok(DistanceEstimate {
        estimate: s.mean,
        se: s.se,
        replications: s.count,
        per_interval: Vec::new(),
        per_interval_se: Vec::new(),
        moment: s.mean,
        moment_se: s.se,
    })
}

/// Oracle error through [`conditional_samples`], exposed for cross-checks.
pub fn oracle_conditional_variance(cfg: &CouplingExperimentConfig, r: u64, inner: usize) -> Result<Vec<f64>> {
    let lat = cfg.lattice()?;
    let reference = Reference::new(cfg);
    conditional_samples(&reference.stepper(), cfg.model.x0, &lat, &cfg.tree(), r, inner)
}
