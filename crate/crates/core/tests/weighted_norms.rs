use emden_glue::error::Error;
use emden_glue::weighted_norms::*;
use proptest::prelude::*;

#[path = "support/mod.rs"]
mod support;

fn log_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

fn box_field(n: usize, sigma: f64, f: impl Fn(&[f64; 3], f64) -> f64, gamma: f64) -> GridField {
    // Cell-centred grid on [-1, 1]^3 with the singular point at the origin.
    let w = WeightFunction::new(vec![vec![0.0; 3]], sigma).unwrap();
    let h = 2.0 / n as f64;
    let mut nodes = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                nodes.push([-1.0 + (i as f64 + 0.5) * h, -1.0 + (j as f64 + 0.5) * h, -1.0 + (k as f64 + 0.5) * h]);
            }
        }
    }
    let rho: Vec<f64> = nodes.iter().map(|x| w.eval(x)).collect();
    let values = nodes.iter().zip(&rho).map(|(x, r)| f(x, *r)).collect();
    GridField { layout: Layout::Block { dims: [n; 3] }, nodes, rho, values, gamma }
}

#[test]
fn sup_of_the_weight_itself_is_one() {
    let radii = log_radii(1e-4, 1.0, 200);
    for gamma in [-1.75, 0.0, 0.5] {
        let f = GridField::radial(&radii, radii.iter().map(|r| r.powf(gamma)).collect(), gamma).unwrap();
        assert!((weighted_sup(&f, gamma).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_field_has_zero_norm() {
    let radii = log_radii(1e-4, 1.0, 50);
    let f = GridField::radial(&radii, vec![0.0; 50], 0.0).unwrap();
    let rep = weighted_norm(&f, -1.0, 0.5, 1000).unwrap();
    assert_eq!(rep.total(), 0.0);
}

#[test]
fn node_on_singular_set_is_rejected() {
    let f = GridField::radial(&[0.0, 1.0], vec![1.0, 1.0], 0.0).unwrap();
    assert!(matches!(weighted_sup(&f, 0.0), Err(Error::NodeOnSingularSet)));
}

#[test]
fn singular_profile_sup_sits_at_the_plateau() {
    let prof = support::profile(5, 2.0);
    let c = prof.constants;
    let eps = 0.1;
    let radii = log_radii(1e-9, 1e-6, 400);
    let vals = radii.iter().map(|r| prof.u_of_r(eps, *r)).collect();
    let f = GridField::radial(&radii, vals, -c.a).unwrap();
    let s = weighted_sup(&f, -c.a).unwrap();
    let top = prof.sup_between(f64::NEG_INFINITY, f64::INFINITY);
    assert!(s >= c.v_inf * (1.0 - 1e-3) && s <= top * (1.0 + 1e-9), "{s}");
}

#[test]
fn holder_of_a_constant_vanishes() {
    let radii = log_radii(1e-3, 1.0, 100);
    let f = GridField::radial(&radii, vec![3.0; 100], 0.0).unwrap();
    assert_eq!(weighted_holder(&f, 0.0, 0.5, DEFAULT_PAIRS).unwrap(), 0.0);
    let b = box_field(8, 0.3, |_, _| 3.0, 0.0);
    assert_eq!(weighted_holder(&b, 0.0, 0.5, DEFAULT_PAIRS).unwrap(), 0.0);
}

#[test]
fn holder_is_stable_under_refinement() {
    let gamma = -1.0;
    let w = |r: f64| r.powf(gamma) * (2.0 + (r.ln()).sin());
    let norm = |n: usize| {
        let radii = log_radii(1e-4, 1.0, n);
        let f = GridField::radial(&radii, radii.iter().map(|r| w(*r)).collect(), gamma).unwrap();
        weighted_holder(&f, gamma, 0.5, DEFAULT_PAIRS).unwrap()
    };
    let (coarse, fine) = (norm(400), norm(800));
    assert!(coarse.is_finite() && coarse > 0.0);
    assert!((fine / coarse - 1.0).abs() < 0.2, "{coarse} vs {fine}");

    let b1 = box_field(16, 0.3, |_, r| r.powf(gamma), gamma);
    let b2 = box_field(32, 0.3, |_, r| r.powf(gamma), gamma);
    let h1 = weighted_holder(&b1, gamma, 0.5, DEFAULT_PAIRS).unwrap();
    let h2 = weighted_holder(&b2, gamma, 0.5, DEFAULT_PAIRS).unwrap();
    assert!(h1.is_finite() && h2.is_finite());
}

#[test]
fn holder_is_deterministic_for_a_seed() {
    let b = box_field(16, 0.3, |x, r| r.powf(-0.5) * (1.0 + x[0]), -0.5);
    let a1 = weighted_holder_seeded(&b, -0.5, 0.5, 2000, 7).unwrap();
    let a2 = weighted_holder_seeded(&b, -0.5, 0.5, 2000, 7).unwrap();
    assert_eq!(a1, a2);
}

#[test]
fn holder_rejects_bad_alpha() {
    let f = GridField::radial(&[1.0, 2.0], vec![1.0, 2.0], 0.0).unwrap();
    assert!(weighted_holder(&f, 0.0, 1.0, 10).is_err());
    assert!(weighted_holder(&f, 0.0, 0.0, 10).is_err());
}

#[test]
fn power_norm_examples() {
    let radii = log_radii(1e-4, 1.0, 200);
    let (p, gamma) = (2.0, -1.5);
    let zero = GridField::radial(&radii, vec![0.0; 200], gamma).unwrap();
    assert!(power_norm_check(&zero, gamma, p, 0.1).unwrap().ok);

    let theta = 1e-3;
    let f = GridField::radial(&radii, radii.iter().map(|r| theta * r.powf(gamma)).collect(), gamma).unwrap();
    let rep = power_norm_check(&f, gamma, p, 0.1).unwrap();
    assert!(rep.applicable && rep.ok);
    // lhs = θ^p sup ρ^(2 + (p-1)γ) = θ² at ρ = 1.
    assert!((rep.lhs - theta * theta).abs() < 1e-15);

    let edge = -2.0 / (p - 1.0);
    assert!(matches!(power_norm_check(&f, edge, p, 0.1), Err(Error::ExponentOrdering(_))));
}

#[test]
fn product_estimate_holds_for_smooth_fields() {
    let radii = log_radii(1e-4, 1.0, 600);
    for (k, (g1, g2)) in [(-1.0, 0.5), (-0.5, -0.5), (0.3, -1.2)].into_iter().enumerate() {
        let w: Vec<f64> = radii.iter().map(|r| r.powf(g1) * (1.5 + (k as f64 + r.ln()).cos())).collect();
        let v: Vec<f64> = radii.iter().map(|r| r.powf(g2) * (2.0 + (0.5 * r.ln()).sin())).collect();
        let wv: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a * b).collect();
        let nw = weighted_norm(&GridField::radial(&radii, w, g1).unwrap(), g1, 0.5, DEFAULT_PAIRS).unwrap();
        let nv = weighted_norm(&GridField::radial(&radii, v, g2).unwrap(), g2, 0.5, DEFAULT_PAIRS).unwrap();
        let nwv =
            weighted_norm(&GridField::radial(&radii, wv, g1 + g2).unwrap(), g1 + g2, 0.5, DEFAULT_PAIRS).unwrap();
        assert!(nwv.total() <= 4.0 * nw.total() * nv.total() * 1.1);
    }
}

#[test]
fn weight_function_shape() {
    let sigma = 0.2;
    let w = WeightFunction::new(vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]], sigma).unwrap();
    for d in [1e-6, 0.05, 0.1999] {
        assert!((w.eval(&[d, 0.0, 0.0]) - d).abs() < 1e-12);
        assert!((w.eval(&[1.0, 0.0, d]) - d).abs() < 1e-12);
    }
    for d in [0.2, 0.25, 0.3, 0.4, 0.5] {
        assert!(w.eval(&[0.0, d, 0.0]) >= sigma / 2.0);
    }
    assert!((w.of_distance(2.0 * sigma) - 1.5 * sigma).abs() < 1e-15);
    assert!((w.of_distance(5.0) - 1.5 * sigma).abs() < 1e-15);
    assert!(WeightFunction::new(vec![], 0.1).is_err());
    assert!(WeightFunction::new(vec![vec![0.0]], 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sup_is_submultiplicative(
        g1 in -2.0f64..1.0,
        g2 in -2.0f64..1.0,
        a in proptest::collection::vec(-2.0f64..2.0, 40),
        b in proptest::collection::vec(-2.0f64..2.0, 40),
    ) {
        let radii = log_radii(1e-3, 1.0, 40);
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let fa = GridField::radial(&radii, a, g1).unwrap();
        let fb = GridField::radial(&radii, b, g2).unwrap();
        let fab = GridField::radial(&radii, ab, g1 + g2).unwrap();
        let lhs = weighted_sup(&fab, g1 + g2).unwrap();
        let rhs = weighted_sup(&fa, g1).unwrap() * weighted_sup(&fb, g2).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn refinement_never_lowers_the_sup(gamma in -2.0f64..1.0, freq in 0.1f64..5.0, n in 5usize..60) {
        let w = |r: f64| r.powf(gamma) * (freq * r.ln()).sin();
        let coarse = log_radii(1e-3, 1.0, n);
        let fine = log_radii(1e-3, 1.0, 2 * n - 1);
        let fc = GridField::radial(&coarse, coarse.iter().map(|r| w(*r)).collect(), gamma).unwrap();
        let ff = GridField::radial(&fine, fine.iter().map(|r| w(*r)).collect(), gamma).unwrap();
        prop_assert!(weighted_sup(&ff, gamma).unwrap() >= weighted_sup(&fc, gamma).unwrap() * (1.0 - 1e-12));
    }

    #[test]
    fn weight_is_continuous_and_bounded_below(sigma in 0.01f64..1.0, d in 0.0f64..10.0) {
        let w = WeightFunction::new(vec![vec![0.0, 0.0]], sigma).unwrap();
        let r = w.of_distance(d);
        if d < sigma {
            prop_assert!((r - d).abs() < 1e-12);
        } else {
            prop_assert!(r >= sigma / 2.0);
        }
        let step = 1e-9 * sigma;
        prop_assert!((w.of_distance(d + step) - r).abs() < 10.0 * step);
    }
}
