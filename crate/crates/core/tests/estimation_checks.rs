use rand::Rng;
use rand_distr::StandardNormal;
use sdelab_core::estimation::{
    density_from_samples, fit_rate, gaussian_kde, kernel_density_at, mc_mean_ci, silverman_bandwidth, DensityConfig,
    DensityEstimate, RatePoint,
};
use sdelab_core::{Coefficient, Purpose, SdeModel, SeedTree, TransformG};

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = SeedTree::new(seed).stream(Purpose::Auxiliary, &[]);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn mean_of_many_normals() {
    let (mean, half) = mc_mean_ci(&normals(1, 100_000), 0.99).unwrap();
    assert!(mean.abs() < 0.01);
    assert!(half < 0.01);
}

#[test]
fn mean_ci_coverage() {
    let trials = 10_000;
    let covered = (0..trials)
        .filter(|&t| {
            let (mean, half) = mc_mean_ci(&normals(1000 + t, 200), 0.95).unwrap();
            mean.abs() <= half
        })
        .count();
    let rate = covered as f64 / trials as f64;
    assert!((rate - 0.95).abs() <= 0.01, "{rate}");
}

#[test]
fn rate_ci_calibration() {
    let ns = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0];
    let trials = 1000;
    let mut rng = SeedTree::new(2).stream(Purpose::Auxiliary, &[]);
    let mut hits = 0;
    for _ in 0..trials {
        let points: Vec<RatePoint> = ns
            .iter()
            .map(|&n| {
                let eps: f64 = rng.sample::<f64, _>(StandardNormal) * 0.05;
                RatePoint { n, error: n.powf(-0.75) * eps.exp(), se: 0.0 }
            })
            .collect();
        let (lo, hi) = fit_rate(&points).unwrap().slope_interval();
        if lo <= -0.75 && -0.75 <= hi {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.9 * trials as f64, "{hits}");
}

#[test]
fn exact_power_laws() {
    let ns = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0];
    let pts: Vec<RatePoint> = ns.iter().map(|&n| RatePoint { n, error: 5.0 * n.powf(-0.5), se: 0.0 }).collect();
    let fit = fit_rate(&pts).unwrap();
    assert!((fit.slope + 0.5).abs() < 1e-12);
    assert!((fit.intercept - 5f64.ln()).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert!(fit.monotone);
}

#[test]
fn kde_integrates_to_one() {
    let samples = normals(3, 5000);
    let h = silverman_bandwidth(&samples);
    let step = 0.01;
    let total: f64 = (-1000..=1000).map(|k| gaussian_kde(&samples, k as f64 * step, h) * step).sum();
    assert!((total - 1.0).abs() <= 0.02, "{total}");
}

#[test]
fn standard_normal_density_at_zero() {
    let bm = SdeModel::new(Coefficient::constant(0.0), Coefficient::constant(1.0), 0.0, 1.0).unwrap();
    let cfg = DensityConfig { replications: 10_000, steps: 16, bootstrap: 100, seed: 4 };
    match kernel_density_at(&bm, None, 1.0, 0.0, &cfg).unwrap() {
        DensityEstimate::Density { estimate, se, .. } => {
            assert!((estimate - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() <= 0.02, "{estimate}");
            assert!(se > 0.0 && se < 0.02);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn indicator_density_at_the_jump_is_positive() {
    let m = SdeModel::new(Coefficient::step(0.0, 0.0, 1.0), Coefficient::constant(1.0), 0.0, 1.0).unwrap();
    let g = TransformG::build(&m).unwrap();
    let cfg = DensityConfig { replications: 4_000, steps: 64, bootstrap: 100, seed: 5 };
    let d = kernel_density_at(&m, Some(&g), 1.0, 0.0, &cfg).unwrap();
    assert!(d.is_positive_99(), "{d:?}");
}

#[test]
fn density_needs_two_samples() {
    let mut rng = SeedTree::new(0).stream(Purpose::Bootstrap, &[]);
    assert!(density_from_samples(&[1.0], 0.0, 10, &mut rng).is_err());
}
