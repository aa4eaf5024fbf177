use proptest::prelude::*;
use sdelab_core::noise::{bridge_decompose, sample_brownian_lattice};
use sdelab_core::solvers::solve_with;
use sdelab_core::transforms::lipschitz_certificate;
use sdelab_core::{
    fit_rate, localize_model, validate_assumptions, Coefficient, LocalizationRadii, Polynomial, Purpose, Scheme, SdeModel,
    SeedTree, Side, TransformG,
};
use sdelab_core::estimation::RatePoint;

fn piecewise() -> impl Strategy<Value = Coefficient> {
    (
        prop::collection::btree_set(-40i32..40, 1..4),
        prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 1..4), 4),
    )
        .prop_map(|(bps, coeffs)| {
            let bps: Vec<f64> = bps.into_iter().map(|b| b as f64 / 20.0).collect();
            let pieces = coeffs[..=bps.len()].iter().map(|c| Polynomial::new(c.clone())).collect();
            let at = vec![None; bps.len()];
            Coefficient::new(bps, pieces, at).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_sided_limits_match_nearby_values(c in piecewise()) {
        for (i, &b) in c.breakpoints().iter().enumerate() {
            let (l, r) = c.limits(i);
            prop_assert_eq!(c.eval_one_sided(b, Side::Left).unwrap(), l);
            prop_assert_eq!(c.eval_one_sided(b, Side::Right).unwrap(), r);
            prop_assert!((c.value(b - 1e-9) - l).abs() <= 1e-6 * (1.0 + l.abs()));
            prop_assert!((c.value(b + 1e-9) - r).abs() <= 1e-6 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn validation_is_pure(drift in piecewise(), s0 in 0.5f64..2.0, s1 in -0.3f64..0.3, delta in 0.05f64..1.0) {
        let m = SdeModel::new(drift, Coefficient::polynomial(Polynomial::affine(s1, s0)), 0.0, 1.0).unwrap();
        let before = m.clone();
        let a = validate_assumptions(&m, (0.0, delta)).unwrap();
        let b = validate_assumptions(&m, (0.0, delta)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&m, &before);
        let pieces = m.drift.pieces();
        let outer_affine = pieces[0].degree() <= 1 && pieces[pieces.len() - 1].degree() <= 1;
        prop_assert_eq!(a.a1, outer_affine);
    }

    #[test]
    fn localization_keeps_diffusion_away_from_zero(
        left in -3.0f64..3.0,
        right in -3.0f64..3.0,
        s0 in 0.5f64..2.0,
        s1 in -2.0f64..2.0,
        outer in 0.1f64..0.4,
    ) {
        prop_assume!(s1.abs() * outer < 0.9 * s0);
        let diffusion = Coefficient::polynomial(Polynomial::affine(s1, s0));
        let m = SdeModel::new(Coefficient::step(0.0, left, right), diffusion.clone(), 0.0, 1.0).unwrap();
        let radii = LocalizationRadii::uniform(outer).unwrap();
        let local = localize_model(&m, 0.0, &radii).unwrap();
        let floor = diffusion.inf_abs_on(-outer, outer).min(1.0);
        let inf = local.diffusion.inf_abs_on(-100.0, 100.0);
        prop_assert!(inf >= 0.5 * floor - 1e-12, "{inf} vs {floor}");
        let sigma = |x: f64| local.diffusion.value(x);
        let lip = lipschitz_certificate(sigma, (-2.0, 2.0), 10_000).unwrap();
        prop_assert!(lip.is_finite());
        for k in 0..=100 {
            let x = -radii.r0 + 2.0 * radii.r0 * k as f64 / 100.0;
            prop_assert!((local.diffusion.value(x) - diffusion.value(x)).abs() <= 1e-10);
            if x != 0.0 {
                prop_assert!((local.drift.value(x) - m.drift.value(x)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn bridge_decomposition_is_exact(seed in 0u64..1000, n in 1usize..6, m in 1usize..6) {
        let times: Vec<f64> = (0..=n * m).map(|j| j as f64 / (n * m) as f64).collect();
        let mut rng = SeedTree::new(seed).stream(Purpose::Auxiliary, &[]);
        let w = sample_brownian_lattice(&mut rng, &times).unwrap();
        let coarse: Vec<usize> = (0..=n).map(|i| i * m).collect();
        let d = bridge_decompose(&w, &coarse).unwrap();
        for (j, v) in w.values().iter().enumerate() {
            prop_assert!((d.wbar()[j] + d.bridge()[j] - v).abs() <= 1e-12);
        }
        for &c in &coarse {
            prop_assert!(d.bridge()[c].abs() <= 1e-12);
        }
        let back = d.recombine(d.bridge());
        for (a, b) in back.values().iter().zip(w.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn rate_fit_is_affine_equivariant(
        errors in prop::collection::vec(0.01f64..1.0, 5),
        scale in 0.1f64..10.0,
        power in -2.0f64..2.0,
    ) {
        let ns = [8.0, 16.0, 32.0, 64.0, 128.0];
        let base: Vec<RatePoint> = ns.iter().zip(&errors).map(|(&n, &e)| RatePoint { n, error: e, se: 0.0 }).collect();
        let moved: Vec<RatePoint> = base
            .iter()
            .map(|p| RatePoint { n: p.n, error: scale * p.error * p.n.powf(power), se: 0.0 })
            .collect();
        let a = fit_rate(&base).unwrap();
        let b = fit_rate(&moved).unwrap();
        prop_assert!((b.slope - a.slope - power).abs() <= 1e-9);
        prop_assert!((b.intercept - a.intercept - scale.ln()).abs() <= 1e-9);
    }

    #[test]
    fn solvers_are_deterministic(seed in 0u64..1000, height in -2.0f64..2.0) {
        prop_assume!(height.abs() > 1e-3);
        let m = SdeModel::new(Coefficient::step(0.0, 0.0, height), Coefficient::constant(1.0), 0.0, 1.0).unwrap();
        let g = TransformG::build(&m).unwrap();
        let times: Vec<f64> = (0..=64).map(|j| j as f64 / 64.0).collect();
        let w1 = sample_brownian_lattice(&mut SeedTree::new(seed).stream(Purpose::Auxiliary, &[1]), &times).unwrap();
        let w2 = sample_brownian_lattice(&mut SeedTree::new(seed).stream(Purpose::Auxiliary, &[1]), &times).unwrap();
        prop_assert_eq!(&w1, &w2);
        for scheme in [Scheme::EulerMaruyama, Scheme::Milstein, Scheme::TransformedMilstein] {
            let a = solve_with(&m, Some(&g), scheme, 0.0, &w1).unwrap();
            let b = solve_with(&m, Some(&g), scheme, 0.0, &w2).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
