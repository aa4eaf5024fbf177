use proptest::prelude::*;
use sdelab_core::coefficients::{Dynamics, Side};
use sdelab_core::transforms::{
    invert_transform, lamperti_transform, lipschitz_certificate, transformed_coefficients, BumpProfile, ComposedWithInverse,
    Transform, TransformedModel,
};
use sdelab_core::{Coefficient, Polynomial, SdeModel, TransformG, TransformH};

fn jump_model(height: f64, sigma: f64) -> SdeModel {
    SdeModel::new(Coefficient::step(0.0, 0.0, height), Coefficient::constant(sigma), 0.0, 1.0).unwrap()
}

fn two_jump_model() -> SdeModel {
    let drift = Coefficient::new(
        vec![-0.5, 0.5],
        vec![Polynomial::constant(1.0), Polynomial::affine(-1.0, 0.0), Polynomial::constant(2.0)],
        vec![None, None],
    )
    .unwrap();
    let diffusion = Coefficient::polynomial(Polynomial::new(vec![1.5, 0.2, 0.1]));
    SdeModel::new(drift, diffusion, 0.0, 1.0).unwrap()
}

/// `|mu~(G(xi)+) - mu~(G(xi)-)|` computed from the one-sided coefficients.
fn transformed_jump(model: &SdeModel, g: &TransformG, xi: f64) -> f64 {
    let t = transformed_coefficients(g, model);
    let y = g.value(xi);
    (t.local(y, Side::Right).drift - t.local(y, Side::Left).drift).abs()
}

#[test]
fn indicator_jump_is_removed() {
    let m = jump_model(1.0, 1.0);
    let g = TransformG::build(&m).unwrap();
    assert_eq!(g.strengths(), &[-0.5]);
    let (l, r) = m.drift.limits(0);
    assert_eq!((r - l).abs(), 1.0);
    assert!(transformed_jump(&m, &g, 0.0) <= 1e-8);
    let t = transformed_coefficients(&g, &m);
    assert!((t.local(0.0, Side::At).diffusion - 1.0).abs() < 1e-15);
}

#[test]
fn two_jumps_with_curved_diffusion_are_removed() {
    let m = two_jump_model();
    let g = TransformG::build(&m).unwrap();
    assert_eq!(g.breakpoints().len(), 2);
    assert!(g.g_min() > 0.0);
    for &xi in &[-0.5, 0.5] {
        let jump = transformed_jump(&m, &g, xi);
        assert!(jump <= 1e-8, "{xi}: {jump}");
    }
}

#[test]
fn transformed_coefficients_have_stable_lipschitz_certificates() {
    let m = jump_model(1.0, 1.0);
    let g = TransformG::build(&m).unwrap();
    let t = transformed_coefficients(&g, &m);
    let drift = |y: f64| t.at(y).drift;
    let diffusion = |y: f64| t.at(y).diffusion;
    for f in [&drift as &dyn Fn(f64) -> f64, &diffusion] {
        let coarse = lipschitz_certificate(f, (-1.0, 1.0), 10_000).unwrap();
        let fine = lipschitz_certificate(f, (-1.0, 1.0), 20_000).unwrap();
        assert!(coarse.is_finite() && fine.is_finite());
        assert!(fine < 2.0 * coarse.max(1e-12), "{coarse} -> {fine}");
    }
    let raw = lipschitz_certificate(|x| m.drift.value(x), (-1.0, 1.0), 1001).unwrap();
    assert!(raw >= 500.0);
    let g_lip = lipschitz_certificate(|x| g.value(x), (-2.0, 2.0), 10_000).unwrap();
    assert!(g_lip.is_finite());
}

#[test]
fn lamperti_normalizes_the_window() {
    let diffusion = Coefficient::polynomial(Polynomial::new(vec![1.0, 0.5, 0.25]));
    let m = SdeModel::new(Coefficient::step(0.0, 0.0, 1.0), diffusion, 0.0, 1.0).unwrap();
    let h = lamperti_transform(&m, 0.1, 0.5).unwrap();
    let t = TransformedModel::new(h.clone(), m.clone(), m.x0, m.horizon);
    let (lo, hi) = (h.value(-0.4), h.value(0.6));
    for k in 0..1000 {
        let y = lo + (hi - lo) * k as f64 / 999.0;
        let s = t.at(y).diffusion;
        assert!((s - 1.0).abs() <= 1e-8, "{y}: {s}");
    }
    assert_eq!(h.value(0.0), 0.0);
}

#[test]
fn lamperti_closed_form() {
    let m = SdeModel::new(
        Coefficient::constant(0.0),
        Coefficient::polynomial(Polynomial::affine(1.0, 1.0)),
        0.0,
        1.0,
    )
    .unwrap();
    let h = lamperti_transform(&m, 0.0, 0.5).unwrap();
    assert!((h.value(0.5) - 1.5f64.ln()).abs() < 1e-12);
    assert!((h.value(-0.3) - 0.7f64.ln()).abs() < 1e-12);
    // Constant continuation past the window.
    assert!((h.value(1.5) - (1.5f64.ln() + 1.0 / 1.5)).abs() < 1e-12);
}

#[test]
fn negative_diffusion_gives_decreasing_lamperti() {
    let m = SdeModel::new(Coefficient::constant(0.0), Coefficient::constant(-2.0), 0.0, 1.0).unwrap();
    let h = lamperti_transform(&m, 0.0, 1.0).unwrap();
    assert!(!h.increasing());
    assert!((h.value(1.0) + 0.5).abs() < 1e-14);
    assert!((invert_transform(&h, -0.25).unwrap() - 0.5).abs() < 1e-12);
}

/// `G^Z = G ∘ H^{-1}` computed by composing the two transformed models
/// against the direct formula for `D^2 G^Z`.
#[test]
fn composition_consistency() {
    let diffusion = Coefficient::polynomial(Polynomial::affine(0.3, 1.0));
    let m = SdeModel::new(Coefficient::step(0.0, -0.5, 1.0), diffusion, 0.0, 1.0).unwrap();
    let h = lamperti_transform(&m, 0.0, 0.6).unwrap();
    let g = TransformG::new(vec![0.0], vec![-0.4], vec![0.3], BumpProfile::default()).unwrap();
    let gz = ComposedWithInverse { outer: &g, inner: &h };

    // Route one: X -> Z = H(X), then Z -> G^Z(Z).
    let z_model = TransformedModel::new(&h, m.clone(), m.x0, m.horizon);
    let two_step = TransformedModel::new(gz, z_model, h.value(m.x0), m.horizon);
    // Route two: X -> G(X) directly.
    let direct = TransformedModel::new(&g, m.clone(), m.x0, m.horizon);

    for k in 0..=400 {
        let x = -0.55 + 1.1 * k as f64 / 400.0;
        if x.abs() < 1e-9 {
            continue;
        }
        let y = g.value(x);
        let a = two_step.at(y);
        let b = direct.at(y);
        assert!((a.drift - b.drift).abs() <= 1e-8, "drift at {x}: {} vs {}", a.drift, b.drift);
        assert!((a.diffusion - b.diffusion).abs() <= 1e-8, "diffusion at {x}");
    }

    // The defining formula, checked independently by finite differences of G^Z'.
    for k in 1..40 {
        let z = -0.5 + k as f64 / 40.0;
        if (invert_transform(&h, z).unwrap()).abs() < 0.01 {
            continue;
        }
        let e = 1e-5;
        let fd = (gz.d1(z + e) - gz.d1(z - e)) / (2.0 * e);
        assert!((fd - gz.d2(z, Side::At)).abs() < 1e-5, "{z}");
    }
}

#[test]
fn invert_examples() {
    let g = TransformG::new(vec![0.0], vec![-0.5], vec![1.0], BumpProfile::default()).unwrap();
    assert!((invert_transform(&g, g.value(0.3)).unwrap() - 0.3).abs() <= 1e-10);
    let h = TransformH::new(&Coefficient::constant(2.0), 0.0, 1.0).unwrap();
    assert!((invert_transform(&h, 1.0).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(invert_transform(&TransformG::identity(), 3.7).unwrap(), 3.7);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_inversion(
        height in -3.0f64..3.0,
        sigma in 0.3f64..3.0,
        xs in prop::collection::vec(-3.0f64..3.0, 1000),
    ) {
        prop_assume!(height.abs() > 1e-3);
        let m = jump_model(height, sigma);
        let g = TransformG::build(&m).unwrap();
        for x in xs {
            let back = invert_transform(&g, g.value(x)).unwrap();
            prop_assert!((back - x).abs() <= 1e-9, "{x} -> {back}");
        }
    }

    #[test]
    fn jump_removal_for_random_models(
        left in -3.0f64..3.0,
        right in -3.0f64..3.0,
        c0 in 0.5f64..2.0,
        c1 in -0.5f64..0.5,
    ) {
        prop_assume!((left - right).abs() > 1e-3);
        let drift = Coefficient::step(0.0, left, right);
        let diffusion = Coefficient::polynomial(Polynomial::affine(c1, c0));
        let m = SdeModel::new(drift, diffusion, 0.0, 1.0).unwrap();
        let g = TransformG::build(&m).unwrap();
        prop_assert!(g.g_min() > 0.0);
        prop_assert!(transformed_jump(&m, &g, 0.0) <= 1e-8);
        let lip = lipschitz_certificate(|x| g.value(x), (-2.0, 2.0), 10_000).unwrap();
        prop_assert!(lip.is_finite());
    }

    #[test]
    fn lamperti_round_trip(
        c0 in 0.5f64..2.0,
        c1 in -0.4f64..0.4,
        xs in prop::collection::vec(-2.0f64..2.0, 200),
    ) {
        let d = Coefficient::polynomial(Polynomial::affine(c1, c0));
        let h = TransformH::new(&d, 0.0, 1.0).unwrap();
        for x in xs {
            let back = invert_transform(&h, h.value(x)).unwrap();
            prop_assert!((back - x).abs() <= 1e-9);
        }
    }
}
