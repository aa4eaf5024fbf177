//! Monte Carlo summaries, rate regression, kernel densities and bootstrap helpers.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::coefficients::SdeModel;
use crate::error::{Error, Result};
use crate::noise::{sample_driver, UniformLayout};
use crate::parallel::replicate;
use crate::rng::{Purpose, SeedTree, Stream};
use crate::solvers::TransformedStepper;
use crate::transforms::TransformG;

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Mean, standard error (`sd / sqrt(n)`) and count of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Summary {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let se = if n < 2 {
            0.0
        } else {
            let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        };
        Summary { mean, se, count: n }
    }
}

/// Sample mean and normal-approximation half width at `level`.
pub fn mc_mean_ci(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Insufficient(format!("{} samples, need at least 2", samples.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Precondition(format!("confidence level {level} is not in (0, 1)")));
    }
    let s = Summary::of(samples);
    Ok((s.mean, normal_quantile(0.5 + 0.5 * level) * s.se))
}

/// `m^{1/p}` with its delta-method standard error.
pub fn pth_root(mean: f64, se: f64, p: f64) -> (f64, f64) {
    let root = mean.max(0.0).powf(1.0 / p);
    if root == 0.0 {
        return (0.0, if mean == 0.0 && se == 0.0 { 0.0 } else { se.powf(1.0 / p) });
    }
    (root, se * root / (p * mean))
}

/// One point of a rate study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: f64,
    pub error: f64,
    pub se: f64,
}

/// Least-squares fit of `log error` against `log n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Half width of the 95% t-interval for the slope.
    pub slope_ci_half_width: f64,
    pub count: usize,
    /// `n` values dropped because their error was below three standard errors.
    pub excluded: Vec<f64>,
    /// Whether the errors of the fitted points decrease with `n`.
    pub monotone: bool,
}

impl RateEstimate {
    pub fn slope_interval(&self) -> (f64, f64) {
        (self.slope - self.slope_ci_half_width, self.slope + self.slope_ci_half_width)
    }
}

/// Points with `error < 3 se` are excluded before fitting.
pub fn fit_rate(points: &[RatePoint]) -> Result<RateEstimate> {
    if let Some(p) = points.iter().find(|p| !(p.error > 0.0) || !p.n.is_finite() || p.n <= 0.0) {
        return Err(Error::Precondition(format!("rate points need n > 0 and error > 0, got {p:?}")));
    }
    let (used, dropped): (Vec<&RatePoint>, Vec<&RatePoint>) = points.iter().partition(|p| p.error >= 3.0 * p.se);
    let k = used.len();
    if k < 3 {
        return Err(Error::Insufficient(format!("{k} usable rate points, need at least 3")));
    }
    let xs: Vec<f64> = used.iter().map(|p| p.n.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.error.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k as f64;
    let my = ys.iter().sum::<f64>() / k as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Insufficient("all rate points share one n".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let sst: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if sst == 0.0 { 1.0 } else { 1.0 - ssr / sst };
    let dof = (k - 2) as f64;
    let t = StudentsT::new(0.0, 1.0, dof).expect("positive dof").inverse_cdf(0.975);
    let slope_ci_half_width = t * (ssr / dof / sxx).sqrt();
    let mut by_n = used.clone();
    by_n.sort_by(|a, b| a.n.total_cmp(&b.n));
    let monotone = by_n.windows(2).all(|w| w[1].error <= w[0].error);
    Ok(RateEstimate {
        slope,
        intercept,
        r_squared,
        slope_ci_half_width,
        count: k,
        excluded: dropped.iter().map(|p| p.n).collect(),
        monotone,
    })
}

/// Gaussian kernel estimate at `at` with bandwidth `h`.
pub fn gaussian_kde(samples: &[f64], at: f64, h: f64) -> f64 {
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * samples.len() as f64);
    samples.iter().map(|x| (-0.5 * ((at - x) / h).powi(2)).exp()).sum::<f64>() * norm
}

/// `R^{-1/5}` times the sample standard deviation.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let s = Summary::of(samples);
    s.se * n.sqrt() * n.powf(-0.2)
}

/// Kernel density at one point, or the diagnosis that the sample has no spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensityEstimate {
    Density {
        estimate: f64,
        se: f64,
        bandwidth: f64,
        /// One-sided 99% lower bound `estimate - z_0.99 se`.
        lower_99: f64,
        samples: usize,
    },
    PointMass {
        at: f64,
    },
}

impl DensityEstimate {
    pub fn is_positive_99(&self) -> bool {
        matches!(self, DensityEstimate::Density { lower_99, .. } if *lower_99 > 0.0)
    }
}

/// Kernel estimate with a bootstrap standard error.
pub fn density_from_samples(samples: &[f64], at: f64, resamples: usize, rng: &mut Stream) -> Result<DensityEstimate> {
    if samples.len() < 2 {
        return Err(Error::Insufficient("density needs at least 2 samples".into()));
    }
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let h = silverman_bandwidth(samples);
    if hi - lo <= 1e-12 * hi.abs().max(1.0) || !(h > 0.0) {
        return Ok(DensityEstimate::PointMass { at: samples[0] });
    }
    let estimate = gaussian_kde(samples, at, h);
    let mut buf = vec![0.0; samples.len()];
    let boot: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..samples.len())];
            }
            let hb = silverman_bandwidth(&buf);
            if hb > 0.0 {
                gaussian_kde(&buf, at, hb)
            } else {
                0.0
            }
        })
        .collect();
    let se = if resamples >= 2 { Summary::of(&boot).se * (resamples as f64).sqrt() } else { 0.0 };
    Ok(DensityEstimate::Density {
        estimate,
        se,
        bandwidth: h,
        lower_99: estimate - normal_quantile(0.99) * se,
        samples: samples.len(),
    })
}

/// Settings for [`kernel_density_at`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityConfig {
    pub replications: usize,
    /// Time steps to `t_star`.
    pub steps: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            replications: 10_000,
            steps: 256,
            bootstrap: 200,
            seed: 0,
        }
    }
}

/// Density of `X_{t_star}` at `xi`, simulated with the (transformed) Milstein scheme.
pub fn kernel_density_at(model: &SdeModel, g: Option<&TransformG>, t_star: f64, xi: f64, cfg: &DensityConfig) -> Result<DensityEstimate> {
    if !(t_star > 0.0 && t_star <= model.horizon) {
        return Err(Error::Precondition(format!("t* = {t_star} is not in (0, {}]", model.horizon)));
    }
    let layout = UniformLayout::new(1, cfg.steps)?;
    let times = layout.fine_times(t_star);
    let coarse = layout.coarse_indices();
    let identity = TransformG::identity();
    let stepper = TransformedStepper { model, g: g.unwrap_or(&identity) };
    let tree = SeedTree::new(cfg.seed);
    let samples = replicate(cfg.replications, |r| {
        let w = sample_driver(&tree, r, &times, &coarse);
        Ok(stepper.run(model.x0, &times, w.values(), |_, _, _| {})?.1)
    })?;
    density_from_samples(&samples, xi, cfg.bootstrap, &mut tree.stream(Purpose::Bootstrap, &[0]))
}

/// `resamples` bootstrap replicates of a statistic of resampled indices.
pub fn bootstrap<F>(count: usize, resamples: usize, rng: &mut Stream, mut statistic: F) -> Vec<f64>
where
    F: FnMut(&[usize]) -> f64,
{
    let mut idx = vec![0usize; count];
    (0..resamples)
        .map(|_| {
            for i in idx.iter_mut() {
                *i = rng.random_range(0..count);
            }
            statistic(&idx)
        })
        .collect()
}

/// Empirical quantile (linear interpolation) of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic critical value of [`ks_statistic`] at significance `alpha`.
pub fn ks_critical(na: usize, nb: usize, alpha: f64) -> f64 {
    let c = (-(0.5 * alpha).ln() / 2.0).sqrt();
    c * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::Coefficient;
    use rand::SeedableRng;
    use rand_distr::StandardNormal;

    #[test]
    fn mean_ci_examples() {
        assert_eq!(mc_mean_ci(&[2.5; 10], 0.95).unwrap(), (2.5, 0.0));
        let (m, h) = mc_mean_ci(&[0.0, 2.0], 0.682_689_492_137_086).unwrap();
        assert_eq!(m, 1.0);
        assert!((h - 1.0).abs() < 1e-9);
        assert!(matches!(mc_mean_ci(&[1.0], 0.9), Err(Error::Insufficient(_))));
    }

    #[test]
    fn normal_mean_is_near_zero() {
        let mut rng = Stream::seed_from_u64(4);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let (m, h) = mc_mean_ci(&xs, 0.99).unwrap();
        assert!(m.abs() < 0.01 && h < 0.01);
    }

    #[test]
    fn exact_power_laws() {
        let pts: Vec<RatePoint> = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]
            .iter()
            .map(|&n: &f64| RatePoint { n, error: n.powf(-0.75), se: 0.0 })
            .collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope + 0.75).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.monotone);

        let pts: Vec<RatePoint> = [4.0, 9.0, 25.0].iter().map(|&n: &f64| RatePoint { n, error: 5.0 / n.sqrt(), se: 0.0 }).collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn noisy_points_are_excluded() {
        let mut pts: Vec<RatePoint> = [8.0, 16.0, 32.0, 64.0].iter().map(|&n: &f64| RatePoint { n, error: 1.0 / n, se: 0.01 / n }).collect();
        pts.push(RatePoint { n: 128.0, error: 0.001, se: 0.01 });
        let fit = fit_rate(&pts).unwrap();
        assert_eq!(fit.excluded, vec![128.0]);
        assert_eq!(fit.count, 4);
        pts.truncate(2);
        assert!(matches!(fit_rate(&pts), Err(Error::Insufficient(_))));
        assert!(fit_rate(&[RatePoint { n: 1.0, error: 0.0, se: 0.0 }]).is_err());
    }

    #[test]
    fn non_monotone_is_flagged() {
        let pts = [(8.0, 1.0), (16.0, 0.5), (32.0, 0.6), (64.0, 0.2)].map(|(n, error)| RatePoint { n, error, se: 0.0 });
        assert!(!fit_rate(&pts).unwrap().monotone);
    }

    #[test]
    fn root_delta_method() {
        let (r, se) = pth_root(4.0, 0.4, 2.0);
        assert_eq!(r, 2.0);
        assert!((se - 0.1).abs() < 1e-15);
        assert_eq!(pth_root(0.0, 0.0, 2.0), (0.0, 0.0));
    }

    #[test]
    fn point_mass_diagnostic() {
        let still = SdeModel::new(Coefficient::constant(0.0), Coefficient::constant(0.0), 0.3, 1.0).unwrap();
        let cfg = DensityConfig { replications: 50, steps: 8, bootstrap: 10, seed: 1 };
        assert_eq!(kernel_density_at(&still, None, 1.0, 0.0, &cfg).unwrap(), DensityEstimate::PointMass { at: 0.3 });
        assert!(kernel_density_at(&still, None, 2.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn ks_basics() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_statistic(&a, &a), 0.0);
        let b: Vec<f64> = (0..100).map(|i| i as f64 + 1000.0).collect();
        assert_eq!(ks_statistic(&a, &b), 1.0);
        assert!((ks_critical(100_000, 100_000, 0.01) - 1.6276 * (2.0f64 / 100_000.0).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.125), 1.5);
    }
}
