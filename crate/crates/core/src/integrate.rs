//! Dormand-Prince 5(4) integrator with continuous extension.
//!
//! Works forwards or backwards in time. Each accepted step is handed to a
//! callback as a [`DenseStep`], which can be evaluated anywhere inside the
//! step with fourth-order accuracy.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Step-size control settings.
#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step magnitude; `f64::INFINITY` for no cap.
    pub h_max: f64,
    /// Initial step magnitude; `0.0` picks one automatically.
    pub h_init: f64,
}

impl Options {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, h_max: f64::INFINITY, h_init: 0.0 }
    }
}

/// One accepted step together with its interpolation data.
#[derive(Debug, Clone)]
pub struct DenseStep<const D: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; D],
    pub y1: [f64; D],
    rcont: [[f64; D]; 5],
}

impl<const D: usize> DenseStep<D> {
    /// Continuous extension at `t` inside `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; D] {
        let theta = (t - self.t0) / (self.t1 - self.t0);
        let theta1 = 1.0 - theta;
        let r = &self.rcont;
        let mut out = [0.0; D];
        for i in 0..D {
            out[i] = r[0][i]
                + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])));
        }
        out
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.t0 <= self.t1 { (self.t0, self.t1) } else { (self.t1, self.t0) };
        t >= lo && t <= hi
    }
}

/// Result of an integration run.
#[derive(Debug, Clone, Copy)]
pub struct Outcome<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    /// Suggested magnitude of the next step, for restarting.
    pub h_next: f64,
    pub steps: usize,
    /// True if the callback asked to stop before `t_end`.
    pub stopped: bool,
}

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
///
/// `on_step` sees every accepted step and returns `false` to stop early.
pub fn integrate<const D: usize, F, C>(
    mut f: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    opts: Options,
    mut on_step: C,
) -> Result<Outcome<D>>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
    C: FnMut(&DenseStep<D>) -> bool,
{
    let span = t_end - t0;
    if span == 0.0 {
        return Ok(Outcome { t: t0, y: y0, h_next: opts.h_init, steps: 0, stopped: false });
    }
    let dir = span.signum();
    let h_max = opts.h_max.min(span.abs());
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);

    let scale = |y: &[f64; D], i: usize| opts.atol + opts.rtol * y[i].abs();
    let mut h = if opts.h_init > 0.0 {
        opts.h_init.min(h_max)
    } else {
        // Hairer's starting-step heuristic.
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..D {
            let s = scale(&y, i);
            d0 += (y[i] / s).powi(2);
            d1 += (k1[i] / s).powi(2);
        }
        let (d0, d1) = ((d0 / D as f64).sqrt(), (d1 / D as f64).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(h_max)
    };

    let mut steps = 0usize;
    let mut last_err = 1e-4f64;
    let mut reject = false;
    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        // Swallow slivers left by rounding instead of taking a tiny last step.
        let last = h * 1.01 >= remaining;
        let h_nominal = h;
        if last {
            h = remaining;
        }
        let hs = h * dir;
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::ToleranceUnreachable { t });
        }

        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + hs,
            &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y1 = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + hs, &y1);

        let mut err = 0.0;
        let mut finite = true;
        for i in 0..D {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let s = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            err += (e / s).powi(2);
            finite &= y1[i].is_finite();
        }
        let err = if finite { (err / D as f64).sqrt() } else { f64::INFINITY };

        if err <= 1.0 {
            let mut rcont = [[0.0; D]; 5];
            for i in 0..D {
                let dy = y1[i] - y[i];
                let bspl = hs * k1[i] - dy;
                rcont[0][i] = y[i];
                rcont[1][i] = dy;
                rcont[2][i] = bspl;
                rcont[3][i] = dy - hs * k7[i] - bspl;
                rcont[4][i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let step = DenseStep { t0: t, t1: t + hs, y0: y, y1, rcont };
            steps += 1;
            t = if last { t_end } else { t + hs };
            y = y1;
            k1 = k7;
            // PI controller (Gustafsson) as in Hairer's DOPRI5.
            let fac = (0.9 * err.max(1e-10).powf(-0.17) * last_err.powf(0.04)).clamp(0.2, 10.0);
            let fac = if reject { fac.min(1.0) } else { fac };
            last_err = err.max(1e-4);
            reject = false;
            h = (h.max(if last { h_nominal } else { h }) * fac).min(h_max);
            if !on_step(&step) {
                return Ok(Outcome { t, y, h_next: h, steps, stopped: true });
            }
        } else {
            reject = true;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.1 };
            h *= fac;
        }
    }
    Ok(Outcome { t, y, h_next: h, steps, stopped: false })
}
