use emden_glue::integrate::*;

#[test]
fn harmonic_oscillator_forward_and_back() {
    let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
    let out = integrate(f, 0.0, [1.0, 0.0], 10.0, Options::with_tol(1e-12), |_| true).unwrap();
    assert!((out.y[0] - 10f64.cos()).abs() < 1e-9);
    let back = integrate(f, 10.0, out.y, 0.0, Options::with_tol(1e-12), |_| true).unwrap();
    assert!((back.y[0] - 1.0).abs() < 1e-9);
}

#[test]
fn dense_output_is_accurate() {
    let f = |_t: f64, y: &[f64; 1]| [y[0]];
    let mut worst: f64 = 0.0;
    let opts = Options { h_max: 0.05, ..Options::with_tol(1e-11) };
    integrate(f, 0.0, [1.0], 2.0, opts, |s| {
        for k in 0..=10 {
            let t = s.t0 + (s.t1 - s.t0) * k as f64 / 10.0;
            worst = worst.max((s.eval(t)[0] - t.exp()).abs());
        }
        true
    })
    .unwrap();
    assert!(worst < 1e-10, "dense output error {worst}");
}

#[test]
fn callback_can_stop() {
    let f = |_t: f64, _y: &[f64; 1]| [1.0];
    let out = integrate(f, 0.0, [0.0], 100.0, Options::with_tol(1e-8), |s| s.t1 < 5.0).unwrap();
    assert!(out.stopped && out.t >= 5.0 && out.t < 100.0);
}
