use emden_glue::error::Error;
use emden_glue::glue::{Domain, SingularSpec};
use emden_glue::linear_solve::*;
use emden_glue::params::{select_weights, WeightSelection, WeightStrategy};
use emden_glue::radial_profile::{normalize_profile, RadialProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "support/mod.rs"]
mod support;

struct Radial {
    prof: RadialProfile,
    spec: SingularSpec,
    disc: Discretization,
    w: WeightSelection,
}

fn radial(n: usize, p: f64, eps: f64, h: f64) -> Radial {
    let prof = support::profile(n, p);
    let spec = SingularSpec::centered_ball(n, eps, 0.3, 1.0).unwrap();
    let disc = Discretization::radial1d(n, 1e-10 * eps, 1.0, h).unwrap();
    let w = select_weights(&prof.constants, WeightStrategy::Default).unwrap();
    Radial { prof, spec, disc, w }
}

fn two_point_box() -> SingularSpec {
    SingularSpec {
        points: vec![vec![-0.5, 0.0, 0.0], vec![0.5, 0.0, 0.0]],
        epsilons: vec![0.05, 0.05],
        r_cut: 0.2,
        cone_a: 0.5,
        domain: Domain::Box { lo: vec![-1.0; 3], hi: vec![1.0; 3] },
    }
}

fn random_rhs(op: &LinearOperator, disc: &Discretization, rng: &mut ChaCha8Rng) -> Vec<f64> {
    op.rows.iter().map(|k| disc.rho[*k].powf(op.weights.nu - 2.0) * rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn radial_laplacian_annihilates_the_fundamental_solution() {
    for n in [3usize, 5] {
        let disc = Discretization::radial1d(n, 1e-6, 1.0, 0.05).unwrap();
        let lap = disc.laplacian();
        let w: Vec<f64> = disc.nodes.iter().map(|x| x[0].powf(2.0 - n as f64) - 1.0).collect();
        let lw = lap.matvec(&w);
        for (a, k) in disc.rows.iter().enumerate() {
            let r = disc.nodes[*k][0];
            // Scale by the size of a single stencil term.
            let scale = r.powf(-(n as f64)) / (0.05 * 0.05);
            assert!(lw[a].abs() <= 1e-9 * scale, "N = {n}, r = {r}: {}", lw[a]);
        }
    }
}

#[test]
fn radial_laplacian_is_second_order() {
    let n = 3.0;
    let w = |r: f64| r.cos() - 1f64.cos();
    let lap_w = |r: f64| -r.cos() - (n - 1.0) * r.sin() / r;
    let err = |h: f64| {
        let disc = Discretization::radial1d(3, 1e-3, 1.0, h).unwrap();
        let vals: Vec<f64> = disc.nodes.iter().map(|x| w(x[0])).collect();
        let lw = disc.laplacian().matvec(&vals);
        disc.rows.iter().zip(lw).map(|(k, l)| (l - lap_w(disc.nodes[*k][0])).abs()).fold(0.0, f64::max)
    };
    let e: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|h| err(*h)).collect();
    for pair in e.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!((order - 2.0).abs() <= 0.2, "errors {e:?}");
    }
}

fn pairing_defect(disc: &Discretization, op: &LinearOperator, rng: &mut ChaCha8Rng) -> f64 {
    let mut draw = || {
        let mut v: Vec<f64> = (0..disc.unknowns()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for j in &disc.free {
            v[*j] = 0.0;
        }
        v
    };
    let (w, v) = (draw(), draw());
    let (lw, lv) = (op.apply(&w), op.apply(&v));
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut scale = 0.0;
    for (a, &k) in disc.rows.iter().enumerate() {
        let q = disc.quadrature[k];
        lhs += q * lw[a] * v[k];
        rhs += q * w[k] * lv[a];
        scale += q * (lw[a] * v[k]).abs();
    }
    (lhs - rhs).abs() / scale
}

#[test]
fn operator_is_self_adjoint_under_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = radial(3, 4.0, 0.05, 0.02);
    let op = assemble(&r.disc, &r.spec, &r.prof, &r.w).unwrap();
    for _ in 0..5 {
        assert!(pairing_defect(&r.disc, &op, &mut rng) <= 1e-10);
    }
    let spec = two_point_box();
    let disc = Discretization::box3d(&spec, 17).unwrap();
    let op = assemble(&disc, &spec, &r.prof, &r.w).unwrap();
    for _ in 0..5 {
        assert!(pairing_defect(&disc, &op, &mut rng) <= 1e-10);
    }
}

#[test]
fn direct_right_inverse_on_random_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r = radial(3, 4.0, 0.05, 0.02);
    let op = assemble(&r.disc, &r.spec, &r.prof, &r.w).unwrap();
    let g = RightInverse::new(&op, SolveMethod::Direct).unwrap();
    for _ in 0..20 {
        let f = random_rhs(&op, &r.disc, &mut rng);
        let (_, stats) = g.solve_with_stats(&f).unwrap();
        assert!(stats.relative_residual <= 1e-10, "{}", stats.relative_residual);
    }
}

#[test]
fn right_inverse_lands_in_the_adjoint_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = radial(5, 2.0, 0.05, 0.05);
    let op = assemble(&r.disc, &r.spec, &r.prof, &r.w).unwrap();
    let g = RightInverse::new(&op, SolveMethod::Direct).unwrap();
    let f = random_rhs(&op, &r.disc, &mut rng);
    let w = g.solve(&f).unwrap();
    // w = D Lᵀ z is orthogonal to ker L in the D⁻¹ pairing.
    for k in kernel_basis(&r.disc, &g).unwrap() {
        let ip: f64 = w.iter().zip(&k).zip(&op.d).map(|((a, b), d)| a * b / d).sum();
        let scale: f64 = w.iter().zip(&k).zip(&op.d).map(|((a, b), d)| (a * b / d).abs()).sum();
        assert!(ip.abs() <= 1e-8 * scale, "{ip} vs {scale}");
        assert!(op.row_norm(&op.apply(&k)) <= 1e-8 * op.row_norm(&op.apply(&w)).max(1.0));
    }
}

#[test]
fn zero_data_gives_zero() {
    let r = radial(3, 4.0, 0.05, 0.05);
    let op = assemble(&r.disc, &r.spec, &r.prof, &r.w).unwrap();
    let f = vec![0.0; op.rows.len()];
    for m in [SolveMethod::Direct, SolveMethod::Cg { tol: 1e-10, max_iter: 100 }] {
        let w = RightInverse::new(&op, m).unwrap().solve(&f).unwrap();
        assert!(w.iter().all(|x| *x == 0.0));
    }
    assert!(RightInverse::new(&op, SolveMethod::Direct).unwrap().solve(&f[1..]).is_err());
}

#[test]
fn box_right_inverse_on_random_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let prof = support::profile(3, 4.0);
    let w = select_weights(&prof.constants, WeightStrategy::Default).unwrap();
    let spec = two_point_box();
    let disc = Discretization::box3d(&spec, 33).unwrap();
    let op = assemble(&disc, &spec, &prof, &w).unwrap();
    let g = RightInverse::new(&op, SolveMethod::default_for(&disc)).unwrap();
    for _ in 0..3 {
        let f = random_rhs(&op, &disc, &mut rng);
        let (_, stats) = g.solve_with_stats(&f).unwrap();
        assert!(stats.relative_residual <= 1e-6, "{}", stats.relative_residual);
    }
}

#[test]
fn maximum_principle_margin_examples() {
    let c = support::consts(5, 2.0);
    assert!((max_principle_margin(0.3, 3, &c).unwrap() - 1.8).abs() < 1e-12);
    assert!(max_principle_margin(0.375, 3, &c).unwrap().abs() < 1e-12);
    assert!((max_principle_margin(1e-12, 1, &c).unwrap() - 9.0).abs() < 1e-9);
    assert!(max_principle_margin(0.0, 1, &c).is_err());
    assert!(max_principle_margin(0.3, 0, &c).is_err());
}

#[test]
fn barrier_without_potential_is_the_power_law() {
    let r = radial(5, 2.0, 0.05, 0.02);
    let zero = vec![0.0; r.disc.unknowns()];
    let op = assemble_about(&r.disc, zero, 2.0, &r.w).unwrap();
    for gamma in [-2.5, -1.75, -0.5] {
        let cert = barrier_check(&r.disc, &op, &r.spec, 0.3, gamma).unwrap();
        let exact = (gamma * (3.0 + gamma)).abs();
        assert!(cert.c >= exact * (1.0 - 1e-9), "gamma = {gamma}: {} < {exact}", cert.c);
        assert!(cert.nodes_checked > 10);
    }
    assert!(barrier_check(&r.disc, &op, &r.spec, 0.3, 0.0).is_err());
    assert!(barrier_check(&r.disc, &op, &r.spec, 0.3, -3.0).is_err());
}

#[test]
fn barrier_holds_for_the_normalized_profile() {
    let mut r = radial(5, 2.0, 0.05, 0.02);
    r.prof = normalize_profile(&r.prof, 0.3).unwrap();
    let op = assemble(&r.disc, &r.spec, &r.prof, &r.w).unwrap();
    let cert = barrier_check(&r.disc, &op, &r.spec, r.spec.r_cut, -1.75).unwrap();
    assert!(cert.c > 0.0);
}

#[test]
fn barrier_fails_with_a_large_potential() {
    let r = radial(5, 2.0, 0.05, 0.02);
    let big: Vec<f64> = r.disc.rho.iter().map(|x| 10.0 / (x * x)).collect();
    let op = assemble_about(&r.disc, big, 2.0, &r.w).unwrap();
    assert!(matches!(
        barrier_check(&r.disc, &op, &r.spec, 0.3, -1.75),
        Err(Error::BarrierFailure { .. })
    ));
}

#[test]
fn dilation_mode_is_nearly_annihilated_inside_the_cutoff() {
    for (n, p) in support::CASES {
        let r = radial(n, p, 0.05, 0.01);
        let op = assemble(&r.disc, &r.spec, &r.prof, &r.w).unwrap();
        let mode = dilation_mode(&r.disc, &r.spec, &r.prof);
        let lm = op.apply(&mode);
        let nu = r.w.nu;
        let size = r.disc.rho.iter().zip(&mode).map(|(x, m)| x.powf(-nu) * m.abs()).fold(0.0, f64::max);
        let defect = r
            .disc
            .rows
            .iter()
            .zip(&lm)
            .filter(|(k, _)| r.disc.rho[**k] < r.spec.r_cut && **k > 1)
            .map(|(k, l)| r.disc.rho[*k].powf(2.0 - nu) * l.abs())
            .fold(0.0, f64::max);
        assert!(defect <= 1e-3 * size, "({n}, {p}): {defect} vs {size}");
    }
}

#[test]
fn kernel_is_the_dilation_mode() {
    let r = radial(3, 4.0, 0.01, 0.02);
    let op = assemble(&r.disc, &r.spec, &r.prof, &r.w).unwrap();
    let g = RightInverse::new(&op, SolveMethod::Direct).unwrap();
    let mode = dilation_mode(&r.disc, &r.spec, &r.prof);
    let corr = kernel_correlation(&r.disc, &g, &mode, r.w.nu).unwrap();
    assert!(corr > 0.99, "{corr}");
}

#[test]
fn coordinate_export() {
    let r = radial(3, 4.0, 0.05, 0.1);
    let op = assemble(&r.disc, &r.spec, &r.prof, &r.w).unwrap();
    let mut buf = Vec::new();
    op.write_coo(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut count = 0;
    for line in text.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let (i, c, v): (usize, usize, f64) = (parts[0].parse().unwrap(), parts[1].parse().unwrap(), parts[2].parse().unwrap());
        let stored = op.matrix.row(i).find(|e| e.0 == c).unwrap().1;
        assert_eq!(v, stored);
        count += 1;
    }
    let nnz: usize = (0..op.matrix.nrows).map(|i| op.matrix.row(i).count()).sum();
    assert_eq!(count, nnz);
}

#[test]
fn incompatible_grids_are_rejected() {
    let prof = support::profile(3, 4.0);
    let w = select_weights(&prof.constants, WeightStrategy::Default).unwrap();
    let ball = SingularSpec::centered_ball(3, 0.05, 0.3, 1.0).unwrap();
    let boxed = two_point_box();

    assert!(matches!(Discretization::box3d(&ball, 17), Err(Error::IncompatibleDomain(_))));
    // Points at ±0.5 are not nodes of a 16-node grid on [-1, 1].
    assert!(matches!(Discretization::box3d(&boxed, 16), Err(Error::IncompatibleDomain(_))));

    let coarse_inner = Discretization::radial1d(3, 1e-3, 1.0, 0.05).unwrap();
    assert!(matches!(assemble(&coarse_inner, &ball, &prof, &w), Err(Error::IncompatibleDomain(_))));

    let wrong_radius = Discretization::radial1d(3, 1e-12, 2.0, 0.05).unwrap();
    assert!(matches!(assemble(&wrong_radius, &ball, &prof, &w), Err(Error::IncompatibleDomain(_))));

    let radial = Discretization::radial1d(3, 1e-12, 1.0, 0.05).unwrap();
    assert!(matches!(assemble(&radial, &boxed, &prof, &w), Err(Error::IncompatibleDomain(_))));

    let five = SingularSpec::centered_ball(5, 0.05, 0.3, 1.0).unwrap();
    assert!(matches!(assemble(&radial, &five, &prof, &w), Err(Error::IncompatibleDomain(_))));

    assert!(matches!(Discretization::radial1d(2, 1e-3, 1.0, 0.1), Err(Error::DimensionTooSmall(2))));
}

#[test]
fn g_norm_is_finite_on_a_small_grid() {
    let r = radial(3, 4.0, 0.05, 0.1);
    let op = assemble(&r.disc, &r.spec, &r.prof, &r.w).unwrap();
    let g = RightInverse::new(&op, SolveMethod::Direct).unwrap();
    let norm = g_norm(&r.disc, &g, r.w.nu).unwrap();
    assert!(norm.is_finite() && norm > 0.0);
}
