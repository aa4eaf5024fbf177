//! Coupling distances, the local/global recursion, the occupation bound,
//! the negation gap and the conditional expectation oracle.

use serde::{Deserialize, Serialize};

use crate::coefficients::{Dynamics, SdeModel};
use crate::error::{Error, Result};
use crate::estimation::{bootstrap, pth_root, quantile, Summary};
use crate::noise::{
    bridge_decompose, fill_intervals, sample_driver, sample_resampled_bridge, sample_skeleton, CouplingKind, PathLattice,
};
use crate::parallel::replicate;
use crate::rng::{Purpose, SeedTree};
use crate::solvers::TransformedStepper;
use crate::transforms::TransformG;

/// Coarse grid of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grid {
    /// `t_i = T i / n`.
    Uniform(usize),
    /// Explicit `0 = t_0 < ... < t_n = T`.
    Explicit(Vec<f64>),
}

/// Fine lattice of an experiment: `m` equal substeps per coarse interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub times: Vec<f64>,
    pub coarse: Vec<usize>,
}

impl Lattice {
    pub fn n(&self) -> usize {
        self.coarse.len() - 1
    }

    pub fn interval(&self, i: usize) -> (usize, usize) {
        (self.coarse[i], self.coarse[i + 1])
    }

    pub fn width(&self, i: usize) -> f64 {
        let (a, b) = self.interval(i);
        self.times[b] - self.times[a]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingExperimentConfig {
    pub model: SdeModel,
    /// Required when the drift jumps; `None` runs plain Milstein.
    pub transform: Option<TransformG>,
    pub grid: Grid,
    /// Fine substeps per coarse interval.
    pub m: usize,
    pub replications: usize,
    pub p: f64,
    pub seed: u64,
    /// Let the resampled path play the role of `W`.
    #[serde(default)]
    pub swap_roles: bool,
}

impl CouplingExperimentConfig {
    /// Defaults: `m = 64`, `R = 10^4`, `p = 2`, seed 0, and `G` built when the drift jumps.
    pub fn new(model: SdeModel, grid: Grid) -> Result<Self> {
        let jumps = (0..model.drift.breakpoints().len()).any(|i| {
            let (l, r) = model.drift.limits(i);
            l != r
        });
        let transform = if jumps { Some(TransformG::build(&model)?) } else { None };
        Ok(Self {
            model,
            transform,
            grid,
            m: 64,
            replications: 10_000,
            p: 2.0,
            seed: 0,
            swap_roles: false,
        })
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_replications(mut self, r: usize) -> Self {
        self.replications = r;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_swapped_roles(mut self, swap: bool) -> Self {
        self.swap_roles = swap;
        self
    }

    pub fn coarse_times(&self) -> Vec<f64> {
        match &self.grid {
            Grid::Uniform(n) => (0..=*n).map(|i| self.model.horizon * i as f64 / *n as f64).collect(),
            Grid::Explicit(t) => t.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let horizon = self.model.horizon;
        if self.m == 0 {
            return Err(Error::Validation("m must be at least 1".into()));
        }
        if self.replications < 2 {
            return Err(Error::Validation("at least 2 replications are needed".into()));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Validation(format!("p = {} must be at least 1", self.p)));
        }
        match &self.grid {
            Grid::Uniform(0) => return Err(Error::Validation("n must be at least 1".into())),
            Grid::Uniform(_) => {}
            Grid::Explicit(t) => {
                let n = t.len().saturating_sub(1);
                if n == 0 || t[0] != 0.0 || t[n] != horizon {
                    return Err(Error::Validation(format!("explicit grid must run from 0 to {horizon}")));
                }
                if t.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Validation("explicit grid must increase strictly".into()));
                }
                let limit = 2.0 * horizon / n as f64;
                if let Some(w) = t.windows(2).find(|w| w[1] - w[0] > limit * (1.0 + 1e-12)) {
                    return Err(Error::Validation(format!(
                        "grid gap [{}, {}] exceeds 2T/n = {limit}",
                        w[0], w[1]
                    )));
                }
            }
        }
        let jumps = (0..self.model.drift.breakpoints().len()).any(|i| {
            let (l, r) = self.model.drift.limits(i);
            l != r
        });
        if jumps && self.transform.is_none() {
            return Err(Error::Validation("the drift jumps, so a transform is required".into()));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        self.validate()?;
        let coarse_times = self.coarse_times();
        let n = coarse_times.len() - 1;
        let times: Vec<f64> = match &self.grid {
            Grid::Uniform(n) => {
                let total = (n * self.m) as f64;
                (0..=n * self.m).map(|j| self.model.horizon * j as f64 / total).collect()
            }
            Grid::Explicit(t) => {
                let mut out = Vec::with_capacity(n * self.m + 1);
                for w in t.windows(2) {
                    let h = (w[1] - w[0]) / self.m as f64;
                    out.extend((0..self.m).map(|k| if k == 0 { w[0] } else { w[0] + h * k as f64 }));
                }
                out.push(t[n]);
                out
            }
        };
        Ok(Lattice {
            times,
            coarse: (0..=n).map(|i| i * self.m).collect(),
        })
    }

    pub(crate) fn tree(&self) -> SeedTree {
        SeedTree::new(self.seed)
    }
}

/// The reference solver of an experiment: Milstein, in `G` coordinates when a transform is set.
pub(crate) struct Reference<'a> {
    identity: Option<TransformG>,
    model: &'a SdeModel,
    g: Option<&'a TransformG>,
}

impl<'a> Reference<'a> {
    pub(crate) fn new(cfg: &'a CouplingExperimentConfig) -> Self {
        Self {
            identity: cfg.transform.is_none().then(TransformG::identity),
            model: &cfg.model,
            g: cfg.transform.as_ref(),
        }
    }

    pub(crate) fn stepper(&self) -> TransformedStepper<'_> {
        TransformedStepper {
            model: self.model,
            g: self.g.unwrap_or_else(|| self.identity.as_ref().unwrap()),
        }
    }
}

/// `W` and its coupled `Wtilde` on the fine lattice.
pub(crate) fn coupled_pair(cfg: &CouplingExperimentConfig, lat: &Lattice, tree: &SeedTree, r: u64, kind: CouplingKind) -> (Vec<f64>, Vec<f64>) {
    let w = sample_driver(tree, r, &lat.times, &lat.coarse);
    let decomp = bridge_decompose(&w, &lat.coarse).expect("coarse indices span the lattice");
    let btilde = match kind {
        CouplingKind::IndependentResample => sample_resampled_bridge(tree, r, &lat.times, &lat.coarse),
        CouplingKind::Negation => decomp.bridge().iter().map(|b| -b).collect(),
    };
    let wt = decomp.recombine(&btilde);
    let (_, w) = w.into_parts();
    let (_, wt) = wt.into_parts();
    if cfg.swap_roles {
        (wt, w)
    } else {
        (w, wt)
    }
}

/// A Monte Carlo distance with its uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// `(E|.|^p)^{1/p}`, or the sum of per-interval means for local distances.
    pub estimate: f64,
    pub se: f64,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_interval: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_interval_se: Vec<f64>,
    /// `E|.|^p` and its standard error.
    pub moment: f64,
    pub moment_se: f64,
}

impl DistanceEstimate {
    fn from_moments(samples: &[f64], p: f64) -> Self {
        let s = Summary::of(samples);
        let (estimate, se) = pth_root(s.mean, s.se, p);
        Self {
            estimate,
            se,
            replications: s.count,
            per_interval: Vec::new(),
            per_interval_se: Vec::new(),
            moment: s.mean,
            moment_se: s.se,
        }
    }
}

/// `(E|X_T - Xtilde_T|^p)^{1/p}` with independently resampled bridges.
pub fn global_coupling_distance(cfg: &CouplingExperimentConfig) -> Result<DistanceEstimate> {
    let lat = cfg.lattice()?;
    let tree = cfg.tree();
    let reference = Reference::new(cfg);
    let stepper = reference.stepper();
    let x0 = cfg.model.x0;
    let samples = replicate(cfg.replications, |r| {
        let (w, wt) = coupled_pair(cfg, &lat, &tree, r, CouplingKind::IndependentResample);
        let x = stepper.run(x0, &lat.times, &w, |_, _, _| {})?.1;
        let xt = stepper.run(x0, &lat.times, &wt, |_, _, _| {})?.1;
        Ok((x - xt).abs().powf(cfg.p))
    })?;
    Ok(DistanceEstimate::from_moments(&samples, cfg.p))
}

/// Per replication: transformed states `(Y, X)` at coarse times under `w`.
fn coarse_states(stepper: &TransformedStepper, x0: f64, lat: &Lattice, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ys = Vec::with_capacity(lat.coarse.len());
    let mut xs = Vec::with_capacity(lat.coarse.len());
    let mut next = 0;
    stepper.run(x0, &lat.times, w, |j, y, x| {
        if next < lat.coarse.len() && lat.coarse[next] == j {
            ys.push(y);
            xs.push(x);
            next += 1;
        }
    })?;
    Ok((ys, xs))
}

/// `|Y_{t_i} - Ytilde^{(i)}|^2`: restarts from `Y_{t_{i-1}}` under the coupled increments.
fn local_terms(stepper: &TransformedStepper, lat: &Lattice, ys: &[f64], xs: &[f64], wt: &[f64]) -> Result<Vec<f64>> {
    (0..lat.n())
        .map(|i| {
            let (a, b) = lat.interval(i);
            let (yt, _) = stepper.run_from(ys[i], xs[i], &lat.times[a..=b], &wt[a..=b])?;
            Ok((ys[i + 1] - yt).powi(2))
        })
        .collect()
}

fn require_p2(cfg: &CouplingExperimentConfig) -> Result<()> {
    if cfg.p != 2.0 {
        return Err(Error::Precondition(format!("this estimator needs p = 2, got {}", cfg.p)));
    }
    Ok(())
}

fn column_summaries(rows: &[Vec<f64>], width: usize) -> Vec<Summary> {
    (0..width)
        .map(|i| Summary::of(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect()
}

/// Per-interval local coupling distances `E|Y_{t_i} - Ytilde^{(i)}|^2` and their sum.
pub fn local_coupling_distances(cfg: &CouplingExperimentConfig) -> Result<DistanceEstimate> {
    require_p2(cfg)?;
    let lat = cfg.lattice()?;
    let tree = cfg.tree();
    let reference = Reference::new(cfg);
    let stepper = reference.stepper();
    let rows = replicate(cfg.replications, |r| {
        let (w, wt) = coupled_pair(cfg, &lat, &tree, r, CouplingKind::IndependentResample);
        let (ys, xs) = coarse_states(&stepper, cfg.model.x0, &lat, &w)?;
        local_terms(&stepper, &lat, &ys, &xs, &wt)
    })?;
    let cols = column_summaries(&rows, lat.n());
    let sums: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let total = Summary::of(&sums);
    Ok(DistanceEstimate {
        estimate: cols.iter().map(|c| c.mean).sum(),
        se: total.se,
        replications: total.count,
        per_interval: cols.iter().map(|c| c.mean).collect(),
        per_interval_se: cols.iter().map(|c| c.se).collect(),
        moment: total.mean,
        moment_se: total.se,
    })
}

/// Result of [`check_recursion_bounds`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionReport {
    /// `D_i = E|Y_{t_i} - Ytilde_{t_i}|^2`, `i = 1..n`.
    pub global: Vec<Summary>,
    /// `m_i = E[(Y - Ytilde)_{t_{i-1}} ((Y - Ytilde)_{t_i} - (Y - Ytilde)_{t_{i-1}})]`.
    pub cross: Vec<Summary>,
    /// `d_i = E|(Y - Ytilde)_{t_i} - (Y - Ytilde)_{t_{i-1}}|^2`.
    pub increment: Vec<Summary>,
    /// Local distances `L_i`.
    pub local: Vec<Summary>,
    /// `D_i - D_{i-1} - 2 m_i - d_i`.
    pub identity_residual: Vec<f64>,
    /// Combined standard error of each residual.
    pub identity_se: Vec<f64>,
    /// `c1` used in the lower recursion constant.
    pub c1: f64,
    /// `min_i (D_i - (1 - c1/n) D_{i-1}) / L_i` over intervals with `L_i > 10 se`.
    pub c2_hat: Option<f64>,
    pub c2_intervals: usize,
    /// `D_n / sum_i L_i` with a 95% bootstrap percentile interval.
    pub ratio: f64,
    pub ratio_ci: (f64, f64),
}

impl RecursionReport {
    /// Whether every residual is within `k` combined standard errors.
    pub fn identity_holds(&self, k: f64) -> bool {
        self.identity_residual
            .iter()
            .zip(&self.identity_se)
            .zip(&self.global)
            .all(|((r, se), d)| r.abs() <= k * se + 1e-12 * d.mean.abs().max(1e-300))
    }
}

/// Estimates the terms of the local/global recursion on every interval.
pub fn check_recursion_bounds(cfg: &CouplingExperimentConfig, c1: f64, resamples: usize) -> Result<RecursionReport> {
    require_p2(cfg)?;
    let lat = cfg.lattice()?;
    let n = lat.n();
    let tree = cfg.tree();
    let reference = Reference::new(cfg);
    let stepper = reference.stepper();
    // Row layout: [D_1..D_n, m_1..m_n, d_1..d_n, L_1..L_n].
    let rows = replicate(cfg.replications, |r| {
        let (w, wt) = coupled_pair(cfg, &lat, &tree, r, CouplingKind::IndependentResample);
        let (ys, xs) = coarse_states(&stepper, cfg.model.x0, &lat, &w)?;
        let (yts, _) = coarse_states(&stepper, cfg.model.x0, &lat, &wt)?;
        let locals = local_terms(&stepper, &lat, &ys, &xs, &wt)?;
        let mut row = vec![0.0; 4 * n];
        for i in 0..n {
            let prev = ys[i] - yts[i];
            let next = ys[i + 1] - yts[i + 1];
            let delta = next - prev;
            row[i] = next * next;
            row[n + i] = prev * delta;
            row[2 * n + i] = delta * delta;
            row[3 * n + i] = locals[i];
        }
        Ok(row)
    })?;
    let cols = column_summaries(&rows, 4 * n);
    let (global, rest) = cols.split_at(n);
    let (cross, rest) = rest.split_at(n);
    let (increment, local) = rest.split_at(n);
    let zero = Summary { mean: 0.0, se: 0.0, count: 0 };
    let mut identity_residual = Vec::with_capacity(n);
    let mut identity_se = Vec::with_capacity(n);
    let mut c2: Option<f64> = None;
    let mut c2_intervals = 0;
    for i in 0..n {
        let before = if i == 0 { zero } else { global[i - 1] };
        identity_residual.push(global[i].mean - before.mean - 2.0 * cross[i].mean - increment[i].mean);
        identity_se.push(
            (global[i].se.powi(2) + before.se.powi(2) + 4.0 * cross[i].se.powi(2) + increment[i].se.powi(2)).sqrt(),
        );
        if local[i].mean > 10.0 * local[i].se && local[i].mean > 0.0 {
            let v = (global[i].mean - (1.0 - c1 / n as f64) * before.mean) / local[i].mean;
            c2 = Some(c2.map_or(v, |c: f64| c.min(v)));
            c2_intervals += 1;
        }
    }
    let sum_local: f64 = local.iter().map(|s| s.mean).sum();
    let ratio = global[n - 1].mean / sum_local;
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r[n - 1], r[3 * n..].iter().sum())).collect();
    let boot = bootstrap(pairs.len(), resamples, &mut tree.stream(Purpose::Bootstrap, &[1]), |idx| {
        let (a, b) = idx.iter().fold((0.0, 0.0), |(a, b), &k| (a + pairs[k].0, b + pairs[k].1));
        a / b
    });
    let ratio_ci = if resamples >= 2 { (quantile(&boot, 0.025), quantile(&boot, 0.975)) } else { (ratio, ratio) };
    Ok(RecursionReport {
        global: global.to_vec(),
        cross: cross.to_vec(),
        increment: increment.to_vec(),
        local: local.to_vec(),
        identity_residual,
        identity_se,
        c1,
        c2_hat: c2,
        c2_intervals,
        ratio,
        ratio_ci,
    })
}

/// Result of [`occupation_lower_bound_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationReport {
    pub local: Vec<Summary>,
    /// `q_i = dt_i^2 P(|X_{t_{i-1}} - xi| <= sqrt(dt_i))`.
    pub occupation: Vec<Summary>,
    /// Intervals with `q_i > 10 se`.
    pub used: Vec<usize>,
    /// `min L_i / q_i` over the used intervals.
    pub c_hat: Option<f64>,
    /// 5% bootstrap quantile of `c_hat` (one-sided 95% lower bound).
    pub c_lower_95: Option<f64>,
    pub inconclusive: bool,
}

impl OccupationReport {
    pub fn positive_95(&self) -> bool {
        !self.inconclusive && self.c_lower_95.is_some_and(|c| c > 0.0)
    }
}

/// Compares local distances with the occupation weights near the jump `xi`.
pub fn occupation_lower_bound_check(cfg: &CouplingExperimentConfig, xi: f64, resamples: usize) -> Result<OccupationReport> {
    require_p2(cfg)?;
    let lat = cfg.lattice()?;
    let n = lat.n();
    let tree = cfg.tree();
    let reference = Reference::new(cfg);
    let stepper = reference.stepper();
    // Row layout: [L_1..L_n, 1{near}_1..1{near}_n].
    let rows = replicate(cfg.replications, |r| {
        let (w, wt) = coupled_pair(cfg, &lat, &tree, r, CouplingKind::IndependentResample);
        let (ys, xs) = coarse_states(&stepper, cfg.model.x0, &lat, &w)?;
        let mut row = local_terms(&stepper, &lat, &ys, &xs, &wt)?;
        row.extend((0..n).map(|i| if (xs[i] - xi).abs() <= lat.width(i).sqrt() { 1.0 } else { 0.0 }));
        Ok(row)
    })?;
    let cols = column_summaries(&rows, 2 * n);
    let local = cols[..n].to_vec();
    let occupation: Vec<Summary> = (0..n)
        .map(|i| {
            let w2 = lat.width(i).powi(2);
            Summary { mean: w2 * cols[n + i].mean, se: w2 * cols[n + i].se, count: cols[n + i].count }
        })
        .collect();
    let used: Vec<usize> = (0..n).filter(|&i| occupation[i].mean > 10.0 * occupation[i].se).collect();
    if used.is_empty() {
        return Ok(OccupationReport { local, occupation, used, c_hat: None, c_lower_95: None, inconclusive: true });
    }
    let ratio_min = |l: &dyn Fn(usize) -> f64, q: &dyn Fn(usize) -> f64| used.iter().map(|&i| l(i) / q(i)).fold(f64::INFINITY, f64::min);
    let c_hat = ratio_min(&|i| local[i].mean, &|i| occupation[i].mean);
    let widths: Vec<f64> = (0..n).map(|i| lat.width(i).powi(2)).collect();
    let boot = bootstrap(rows.len(), resamples, &mut tree.stream(Purpose::Bootstrap, &[2]), |idx| {
        let mut sums = vec![0.0; 2 * n];
        for &k in idx {
            for &i in &used {
                sums[i] += rows[k][i];
                sums[n + i] += rows[k][n + i];
            }
        }
        ratio_min(&|i| sums[i], &|i| widths[i] * sums[n + i])
    });
    let c_lower_95 = if resamples >= 2 { Some(quantile(&boot, 0.05)) } else { Some(c_hat) };
    Ok(OccupationReport { local, occupation, used, c_hat: Some(c_hat), c_lower_95, inconclusive: false })
}

/// Negation-coupling gap with the smallest `|sigma(X_{t_{i-1}})|` seen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub distance: DistanceEstimate,
    pub min_abs_sigma: f64,
}

/// `sum_i E ∫ |frozen step under W - frozen step under Wtilde|` with `Btilde = -B`.
pub fn global_l1_coupling_gap(cfg: &CouplingExperimentConfig) -> Result<GapEstimate> {
    if cfg.p != 1.0 {
        return Err(Error::Precondition(format!("the L1 gap needs p = 1, got {}", cfg.p)));
    }
    let lat = cfg.lattice()?;
    let tree = cfg.tree();
    let reference = Reference::new(cfg);
    let stepper = reference.stepper();
    let rows = replicate(cfg.replications, |r| {
        let (w, wt) = coupled_pair(cfg, &lat, &tree, r, CouplingKind::Negation);
        let (_, xs) = coarse_states(&stepper, cfg.model.x0, &lat, &w)?;
        let mut total = 0.0;
        let mut min_sigma = f64::INFINITY;
        for i in 0..lat.n() {
            let (a, b) = lat.interval(i);
            let sigma = cfg.model.at(xs[i]).diffusion;
            min_sigma = min_sigma.min(sigma.abs());
            let gap = |j: usize| (sigma * ((w[j] - w[a]) - (wt[j] - wt[a]))).abs();
            let mut prev = gap(a);
            for j in a + 1..=b {
                let cur = gap(j);
                total += 0.5 * (lat.times[j] - lat.times[j - 1]) * (prev + cur);
                prev = cur;
            }
        }
        Ok((total, min_sigma))
    })?;
    let values: Vec<f64> = rows.iter().map(|r| r.0).collect();
    Ok(GapEstimate {
        distance: DistanceEstimate::from_moments(&values, 1.0),
        min_abs_sigma: rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
    })
}

/// Result of [`conditional_expectation_oracle`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub inner: usize,
    /// `E[Var(X_T | coarse values)]` from within-group variances.
    pub error_squared: Summary,
    /// Global squared coupling distance `E|X_T - Xtilde_T|^2`.
    pub coupling: DistanceEstimate,
    /// `2 error^2 / E|X_T - Xtilde_T|^2`, ideally 1.
    pub ratio: f64,
    pub ratio_se: f64,
}

/// Within-group variance of `inner` terminal values sharing the coarse values of replication `r`.
pub(crate) fn conditional_samples(
    stepper: &TransformedStepper,
    x0: f64,
    lat: &Lattice,
    tree: &SeedTree,
    r: u64,
    inner: usize,
) -> Result<Vec<f64>> {
    let mut values = vec![0.0; lat.times.len()];
    sample_skeleton(tree, r, &lat.times, &lat.coarse, &mut values);
    (0..inner as u64)
        .map(|k| {
            fill_intervals(tree, Purpose::Inner, &[r, k], &lat.times, &lat.coarse, &mut values);
            Ok(stepper.run(x0, &lat.times, &values, |_, _, _| {})?.1)
        })
        .collect()
}

/// Nested Monte Carlo estimate of the best grid-based mean-square error.
pub fn conditional_expectation_oracle(cfg: &CouplingExperimentConfig, inner: usize) -> Result<OracleReport> {
    require_p2(cfg)?;
    if inner < 2 {
        return Err(Error::Precondition("the oracle needs at least 2 inner samples".into()));
    }
    let lat = cfg.lattice()?;
    let tree = cfg.tree();
    let reference = Reference::new(cfg);
    let stepper = reference.stepper();
    let variances = replicate(cfg.replications, |r| {
        let xs = conditional_samples(&stepper, cfg.model.x0, &lat, &tree, r, inner)?;
        let mean = xs.iter().sum::<f64>() / inner as f64;
        Ok(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (inner - 1) as f64)
    })?;
    let error_squared = Summary::of(&variances);
    let coupling = global_coupling_distance(cfg)?;
    let (ratio, ratio_se) = if coupling.moment > 0.0 {
        let ratio = 2.0 * error_squared.mean / coupling.moment;
        let rel_a = if error_squared.mean > 0.0 { error_squared.se / error_squared.mean } else { 0.0 };
        let rel_b = coupling.moment_se / coupling.moment;
        (ratio, ratio * (rel_a * rel_a + rel_b * rel_b).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(OracleReport { inner, error_squared, coupling, ratio, ratio_se })
}

/// Driver lattice of replication `r` for an experiment.
pub fn experiment_driver(cfg: &CouplingExperimentConfig, r: u64) -> Result<PathLattice> {
    let lat = cfg.lattice()?;
    Ok(sample_driver(&cfg.tree(), r, &lat.times, &lat.coarse))
}

/// `2 (∫_s^t e^{2(u-t)} du - (∫_s^t e^{u-t} du)^2 / (t - s))` for the
/// Ornstein–Uhlenbeck equation `dX = -X dt + dW`: the squared coupling
/// distance contributed by one interval with a resampled bridge.
pub fn ou_bridge_oracle(s: f64, t: f64) -> f64 {
    let h = t - s;
    let a = 0.5 * (1.0 - (-2.0 * h).exp());
    let b = 1.0 - (-h).exp();
    2.0 * (a - b * b / h)
}
