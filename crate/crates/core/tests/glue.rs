use emden_glue::error::Error;
use emden_glue::glue::*;
use emden_glue::params::{select_weights, WeightStrategy};

#[path = "support/mod.rs"]
mod support;

fn two_points(eps: f64) -> SingularSpec {
    SingularSpec {
        points: vec![vec![-0.5, 0.0, 0.0], vec![0.5, 0.0, 0.0]],
        epsilons: vec![eps, eps],
        r_cut: 0.2,
        cone_a: 0.5,
        domain: Domain::Box { lo: vec![-1.5; 3], hi: vec![1.5; 3] },
    }
}

#[test]
fn cutoff_values_and_smoothness() {
    use cutoff::*;
    for k in 0..=400 {
        let s = 0.5 + 2.0 * k as f64 / 400.0;
        let c = chi(s);
        assert!((0.0..=1.0).contains(&c));
        if s <= 1.0 {
            assert_eq!(c, 1.0);
        }
        if s >= 2.0 {
            assert_eq!(c, 0.0);
        }
        let h = 1e-5;
        assert!(((chi(s + h) - chi(s - h)) / (2.0 * h) - dchi(s)).abs() < 1e-6, "s = {s}");
        assert!(((dchi(s + h) - dchi(s - h)) / (2.0 * h) - d2chi(s)).abs() < 1e-3, "s = {s}");
    }
    // C² matching at both ends.
    for s in [1.0, 2.0] {
        assert!(dchi(s).abs() < 1e-15 && d2chi(s).abs() < 1e-15);
        assert!(d2chi(s + 1e-9).abs() < 1e-6 && d2chi(s - 1e-9).abs() < 1e-6);
    }
}

#[test]
fn cutoff_laplacian_matches_finite_differences() {
    let (n, rc) = (5.0, 0.3);
    for r in [0.32, 0.4, 0.45, 0.5, 0.58] {
        let h = 1e-4;
        let f = |r: f64| cutoff::chi(r / rc);
        let fd = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h) + (n - 1.0) / r * (f(r + h) - f(r - h)) / (2.0 * h);
        assert!((fd - cutoff::laplacian(n, rc, r)).abs() < 1e-4 * (1.0 + fd.abs()), "r = {r}");
    }
}

#[test]
fn value_inside_and_outside_the_cutoff() {
    let prof = support::profile(3, 4.0);
    let spec = two_points(0.05);
    let u = approx_solution(&spec, &prof).unwrap();
    for r in [1e-4, 0.05, 0.1, 0.2] {
        let x = [-0.5 + r, 0.0, 0.0];
        assert_eq!(u(&x), prof.u_of_r(0.05, spec.nearest(&x).1));
    }
    for x in [[0.0, 0.0, 0.0], [-0.5, 0.41, 0.0], [1.2, 1.2, 1.2]] {
        assert_eq!(u(&x), 0.0);
    }
}

#[test]
fn swap_symmetry() {
    let prof = support::profile(3, 4.0);
    let spec = two_points(0.05);
    let u = approx_solution(&spec, &prof).unwrap();
    let f = residual(&spec, &prof).unwrap();
    for x in [[-0.4, 0.1, 0.05], [-0.8, -0.1, 0.2], [-0.55, 0.0, 0.3], [-0.2, 0.0, 0.0]] {
        let y = [-x[0], x[1], x[2]];
        assert!((u(&x) - u(&y)).abs() <= 1e-12 * u(&x).abs().max(1.0));
        assert!((f(&x) - f(&y)).abs() <= 1e-12 * f(&x).abs().max(1.0));
    }
}

#[test]
fn residual_support_is_the_annuli() {
    let prof = support::profile(5, 2.0);
    let spec = SingularSpec::centered_ball(5, 0.05, 0.3, 1.0).unwrap();
    let g = Glued::new(&spec, &prof).unwrap();
    let mut inside_annulus = 0.0f64;
    for k in 0..=2000 {
        let r = 1e-3 + 0.9 * k as f64 / 2000.0;
        let f = g.radial_residual(0, r);
        if r <= spec.r_cut || r >= 2.0 * spec.r_cut {
            assert_eq!(f, 0.0, "r = {r}");
        } else {
            inside_annulus = inside_annulus.max(f.abs());
        }
    }
    assert!(inside_annulus > 0.0);
}

#[test]
fn positivity() {
    let prof = support::profile(3, 4.0);
    let spec = two_points(0.05);
    let g = Glued::new(&spec, &prof).unwrap();
    for k in 0..3000 {
        let x = [-1.4 + 2.8 * (k as f64 * 0.618).fract(), 0.3 * (k as f64 * 0.414).fract(), 0.0];
        let (_, d) = spec.nearest(&x);
        let u = g.value(&x);
        assert!(u >= 0.0);
        assert_eq!(u > 0.0, d < 2.0 * spec.r_cut, "x = {x:?}");
    }
}

/// 7-point Laplacian plus `ū^p`, minus the analytic residual.
fn fd_defect(g: &Glued, x: [f64; 3], h: f64) -> f64 {
    let p = g.profile.constants.p();
    let u0 = g.value(&x);
    let mut lap = -6.0 * u0;
    for c in 0..3 {
        for s in [-1.0, 1.0] {
            let mut y = x;
            y[c] += s * h;
            lap += g.value(&y);
        }
    }
    lap / (h * h) + u0.powf(p) - g.residual(&x)
}

#[test]
fn residual_agrees_with_finite_differences_at_second_order() {
    let prof = support::profile(3, 4.0);
    let spec = SingularSpec::centered_ball(3, 0.05, 0.3, 1.0).unwrap();
    let g = Glued::new(&spec, &prof).unwrap();
    let x = [0.25, 0.2, 0.15];
    let hs = [0.02, 0.01, 0.005];
    let e: Vec<f64> = hs.iter().map(|h| fd_defect(&g, x, *h).abs()).collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "errors {e:?}");
    }
}

#[test]
fn residual_scales_with_the_expected_exponent() {
    for (n, p) in [(5, 2.0), (3, 4.0)] {
        let prof = support::profile(n, p);
        let nu = select_weights(&prof.constants, WeightStrategy::Default).unwrap().nu;
        let spec = SingularSpec::centered_ball(n, 0.05, 0.3, 1.0).unwrap();
        let fit = scaling_study(&spec, &prof, &[0.05, 0.025, 0.0125], nu).unwrap();
        let want = prof.constants.mu_plus;
        assert!((fit.slope / want - 1.0).abs() < 0.1, "({n}, {p}): {} vs {want}", fit.slope);
    }
}

#[test]
fn doubling_the_cutoff_keeps_the_slope() {
    let prof = support::profile(5, 2.0);
    let nu = select_weights(&prof.constants, WeightStrategy::Default).unwrap().nu;
    let eps = [0.05, 0.025, 0.0125];
    let a = scaling_study(&SingularSpec::centered_ball(5, 0.05, 0.15, 1.0).unwrap(), &prof, &eps, nu).unwrap();
    let b = scaling_study(&SingularSpec::centered_ball(5, 0.05, 0.3, 1.0).unwrap(), &prof, &eps, nu).unwrap();
    assert!((a.slope / b.slope - 1.0).abs() < 0.1, "{} vs {}", a.slope, b.slope);
    assert!((a.intercept - b.intercept).abs() > 1e-3);
}

#[test]
fn sandwich_bounds_near_the_point() {
    for (n, p) in support::CASES {
        let prof = support::profile(n, p);
        let eps = 0.05;
        let spec = SingularSpec::centered_ball(n, eps, 0.3, 1.0).unwrap();
        let g = Glued::new(&spec, &prof).unwrap();
        let (c1, c2) = sandwich_constants(&prof, spec.r_cut);
        assert!(c1 > 0.0 && c1 <= c2);
        let a = prof.constants.a;
        for k in 0..500 {
            let r = spec.r_cut * eps * 10f64.powf(-8.0 * k as f64 / 499.0);
            let mut x = vec![0.0; n];
            x[0] = r;
            let s = r.powf(a) * g.value(&x);
            assert!(s >= c1 * (1.0 - 1e-9) && s <= c2 * (1.0 + 1e-9), "({n}, {p}) r = {r}: {s} not in [{c1}, {c2}]");
        }
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let prof = support::profile(3, 4.0);
    let mut s = two_points(0.05);
    s.points.clear();
    s.epsilons.clear();
    assert!(matches!(s.validate(), Err(Error::SpecInvalid(_))));

    let mut s = two_points(0.05);
    s.r_cut = 0.6;
    assert!(s.validate().is_err());

    let mut s = two_points(0.05);
    s.epsilons = vec![0.05, 0.01];
    assert!(s.validate().is_err());

    let mut s = two_points(0.05);
    s.epsilons = vec![0.3, 0.3];
    assert!(s.validate().is_err());

    let mut s = two_points(0.05);
    s.points[0] = vec![-1.2, 0.0, 0.0];
    assert!(s.validate().is_err());

    let s = SingularSpec::centered_ball(5, 0.05, 0.3, 1.0).unwrap();
    assert!(matches!(Glued::new(&s, &prof), Err(Error::SpecInvalid(_))));
    assert!(scaling_study(&s, &support::profile(5, 2.0), &[0.05, 0.025], -1.75).is_err());
}
