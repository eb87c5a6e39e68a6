//! Test-side oracles, written independently of the library code.
#![allow(dead_code)]

use emden_glue::params::{derive_constants, DerivedConstants, ProblemParams};
use emden_glue::radial_profile::{compute_profile_with, ProfileOptions, RadialProfile};

pub fn consts(n: usize, p: f64) -> DerivedConstants {
    derive_constants(&ProblemParams::new(n, p).unwrap()).unwrap()
}

pub fn profile(n: usize, p: f64) -> RadialProfile {
    compute_profile_with(&consts(n, p), &ProfileOptions::default()).unwrap()
}

/// The three parameter pairs used throughout the suite.
pub const CASES: [(usize, f64); 3] = [(5, 2.0), (3, 4.0), (4, 2.5)];

/// `K_ν(x) = ∫_0^∞ exp(-x cosh t) cosh(ν t) dt`, by the trapezoid rule.
///
/// The integrand is smooth and decays double-exponentially, so the
/// trapezoid rule converges geometrically in the step.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let h = 0.005;
    let mut sum = 0.5 * (-x).exp();
    let mut t: f64 = h;
    loop {
        let term = (-x * t.cosh()).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-300 || term < 1e-18 * sum {
            break;
        }
        t += h;
    }
    sum * h
}

/// `∫_0^∞ r^k e^(-2r) dr = k! / 2^(k+1)`.
pub fn gamma_moment(k: u32) -> f64 {
    (1..=k).map(f64::from).product::<f64>() / 2f64.powi(k as i32 + 1)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
