//! Radial eigencomponents of the linearized operator.
//!
//! For a spherical eigenvalue `λ` and Fourier parameter `E ≥ 0` the channel
//! operator is
//!
//! ```text
//! w'' + (N-1)/r w' + ((V(r) - λ)/r² - E) w
//! ```
//!
//! with `V(r) = r² p u₁(r)^(p-1)` (full mode) or the constant `A_p` (frozen
//! mode, the model Bessel operator). Everything is discretized on grids that
//! are uniform in `s = log r`, where the operator reads
//! `r^(-2) (w_ss + (N-2) w_s + (V - λ - E r²) w)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{self, Options};
use crate::linalg;
use crate::params::{derive_constants, indicial_roots, IndicialRoots, ProblemParams};
use crate::radial_profile::{compute_profile_with, ProfileOptions, RadialProfile};

/// Where the potential `V` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialMode {
    /// `V = r² p u₁^(p-1)` from the profile.
    Full,
    /// `V ≡ A_p`.
    Frozen,
}

/// One member of the operator family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeChannel {
    pub lambda: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub mode: PotentialMode,
}

impl OdeChannel {
    pub fn new(lambda: f64, e: f64, mode: PotentialMode) -> Result<Self> {
        if !(e >= 0.0) || !e.is_finite() {
            return Err(Error::InvalidInput(format!("E = {e} must be finite and non-negative")));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda = {lambda} must be non-negative")));
        }
        Ok(Self { lambda, e, mode })
    }

    /// `V(r)` for this channel.
    pub fn potential(&self, profile: &RadialProfile, r: f64) -> f64 {
        match self.mode {
            PotentialMode::Full => profile.potential(r),
            PotentialMode::Frozen => profile.constants.a_p,
        }
    }
}

/// Grid `r_k = exp(s0 + k h)`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub s0: f64,
    pub h: f64,
    pub len: usize,
}

impl LogGrid {
    /// Grid aligned so that `r = 1` is a node whenever it is in range.
    pub fn covering(r_min: f64, r_max: f64, h: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && h > 0.0) {
            return Err(Error::InvalidInput("need 0 < r_min < r_max and h > 0".into()));
        }
        let k0 = (r_min.ln() / h).floor() as i64;
        let k1 = (r_max.ln() / h).ceil() as i64;
        let len = (k1 - k0 + 1) as usize;
        if len < 5 {
            return Err(Error::GridTooCoarse(len));
        }
        Ok(Self { s0: k0 as f64 * h, h, len })
    }

    pub fn s(&self, k: usize) -> f64 {
        self.s0 + k as f64 * self.h
    }

    pub fn r(&self, k: usize) -> f64 {
        self.s(k).exp()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.r(k)).collect()
    }

    /// Index of the node closest to `r`.
    pub fn nearest(&self, r: f64) -> usize {
        let k = ((r.ln() - self.s0) / self.h).round();
        k.clamp(0.0, (self.len - 1) as f64) as usize
    }
}

/// Fourth-order first and second derivatives in `s` of uniformly spaced samples.
pub fn log_derivatives(w: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = w.len();
    if n < 5 {
        return Err(Error::GridTooCoarse(n));
    }
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let c1 = 1.0 / (12.0 * h);
    let c2 = 1.0 / (12.0 * h * h);
    for i in 2..n - 2 {
        d1[i] = c1 * (-w[i + 2] + 8.0 * w[i + 1] - 8.0 * w[i - 1] + w[i - 2]);
        d2[i] = c2 * (-w[i + 2] + 16.0 * w[i + 1] - 30.0 * w[i] + 16.0 * w[i - 1] - w[i - 2]);
    }
    let edge = |x: &dyn Fn(usize) -> f64, sign: f64| -> [(f64, f64); 2] {
        let first = [
            c1 * (-25.0 * x(0) + 48.0 * x(1) - 36.0 * x(2) + 16.0 * x(3) - 3.0 * x(4)),
            c1 * (-3.0 * x(0) - 10.0 * x(1) + 18.0 * x(2) - 6.0 * x(3) + x(4)),
        ];
        let second = if n >= 6 {
            [
                c2 * (45.0 * x(0) - 154.0 * x(1) + 214.0 * x(2) - 156.0 * x(3) + 61.0 * x(4)
                    - 10.0 * x(5)),
                c2 * (10.0 * x(0) - 15.0 * x(1) - 4.0 * x(2) + 14.0 * x(3) - 6.0 * x(4) + x(5)),
            ]
        } else {
            [
                c2 * (35.0 * x(0) - 104.0 * x(1) + 114.0 * x(2) - 56.0 * x(3) + 11.0 * x(4)),
                c2 * (11.0 * x(0) - 20.0 * x(1) + 6.0 * x(2) + 4.0 * x(3) - x(4)),
            ]
        };
        [(sign * first[0], second[0]), (sign * first[1], second[1])]
    };
    let left = edge(&|j| w[j], 1.0);
    let right = edge(&|j| w[n - 1 - j], -1.0);
    for i in 0..2 {
        d1[i] = left[i].0;
        d2[i] = left[i].1;
        d1[n - 1 - i] = right[i].0;
        d2[n - 1 - i] = right[i].1;
    }
    Ok((d1, d2))
}

/// `w'' + (N-1)/r w' + ((V - λ)/r² - E) w` at every node, by fourth-order
/// differences in `log r`.
pub fn apply_channel(
    channel: &OdeChannel,
    profile: &RadialProfile,
    grid: &LogGrid,
    w: &[f64],
) -> Result<Vec<f64>> {
    Ok(channel_terms(channel, profile, grid, w)?.into_iter().map(|t| t.0).collect())
}

/// Residual and the sum of absolute term sizes at each node.
fn channel_terms(
    channel: &OdeChannel,
    profile: &RadialProfile,
    grid: &LogGrid,
    w: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if w.len() != grid.len {
        return Err(Error::InvalidInput("sample count does not match grid".into()));
    }
    let (ws, wss) = log_derivatives(w, grid.h)?;
    let n = profile.constants.n();
    Ok((0..grid.len)
        .map(|k| {
            let r = grid.r(k);
            let q = channel.potential(profile, r) - channel.lambda - channel.e * r * r;
            let r2 = r * r;
            let res = (wss[k] + (n - 2.0) * ws[k] + q * w[k]) / r2;
            let scale = (wss[k].abs() + (n - 2.0) * ws[k].abs() + q.abs() * w[k].abs()) / r2;
            (res, scale)
        })
        .collect())
}

/// Largest node-wise ratio of the residual to the size of the operator terms.
pub fn relative_channel_residual(
    channel: &OdeChannel,
    profile: &RadialProfile,
    grid: &LogGrid,
    w: &[f64],
) -> Result<f64> {
    Ok(channel_terms(channel, profile, grid, w)?
        .into_iter()
        .map(|(res, scale)| if scale > 0.0 { res.abs() / scale } else { res.abs() })
        .fold(0.0, f64::max))
}

/// Samples of a channel solution on a log grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSolution {
    pub grid: LogGrid,
    pub w: Vec<f64>,
    /// `r w'(r)`, taken from the integrator state.
    pub r_dw: Vec<f64>,
}

/// State `(w, w_s)` of the channel ODE in `s = log r`.
fn channel_rhs<'a>(
    channel: &OdeChannel,
    profile: &'a RadialProfile,
) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] + 'a {
    let ch = *channel;
    let n = profile.constants.n();
    move |s: f64, y: &[f64; 2]| {
        let r = s.exp();
        let q = ch.potential(profile, r) - ch.lambda - ch.e * r * r;
        [y[1], -(n - 2.0) * y[1] - q * y[0]]
    }
}

/// The solution that decays at infinity, normalized by `w(1) = 1`.
///
/// Integrates inward from `r_max`, starting from the leading asymptotics at
/// infinity; the decaying solution dominates in that direction.
pub fn decaying_solution(
    channel: &OdeChannel,
    profile: &RadialProfile,
    r_min: f64,
    r_max: f64,
) -> Result<ChannelSolution> {
    decaying_solution_on(channel, profile, r_min, r_max, 0.01)
}

/// [`decaying_solution`] with an explicit log-grid spacing.
pub fn decaying_solution_on(
    channel: &OdeChannel,
    profile: &RadialProfile,
    r_min: f64,
    r_max: f64,
    h: f64,
) -> Result<ChannelSolution> {
    let far = if channel.e > 0.0 { 50f64.max(30.0 / channel.e.sqrt()) } else { 50.0 };
    if r_min > 0.01 || r_max < far {
        return Err(Error::InvalidInput(format!(
            "need r_min <= 0.01 and r_max >= {far}, got [{r_min}, {r_max}]"
        )));
    }
    let grid = LogGrid::covering(r_min, r_max, h)?;
    let n = profile.constants.n();
    let top = grid.len - 1;
    let r_top = grid.r(top);

    // Seed in renormalized form: state / exp(log_scale).
    let (mut y, mut log_scale) = if channel.e > 0.0 {
        let k = channel.e.sqrt();
        ([1.0, -k * r_top - 0.5 * (n - 1.0)], -k * r_top - 0.5 * (n - 1.0) * r_top.ln())
    } else {
        let g = indicial_roots(&profile.constants, channel.lambda).tilde_gamma_minus;
        ([1.0, g], g * r_top.ln())
    };

    let rhs = channel_rhs(channel, profile);
    let mut w = vec![0.0; grid.len];
    let mut r_dw = vec![0.0; grid.len];
    let mut logs = vec![0.0; grid.len];
    w[top] = y[0];
    r_dw[top] = y[1];
    logs[top] = log_scale;
    let mut opts = Options::with_tol(1e-12);
    for k in (0..top).rev() {
        let out = integrate::integrate(&rhs, grid.s(k + 1), y, grid.s(k), opts, |_| true)?;
        opts.h_init = out.h_next;
        y = out.y;
        let m = y[0].abs().max(y[1].abs());
        if !m.is_finite() || m == 0.0 {
            return Err(Error::IntegrationOverflow { r: grid.r(k) });
        }
        y = [y[0] / m, y[1] / m];
        log_scale += m.ln();
        w[k] = y[0];
        r_dw[k] = y[1];
        logs[k] = log_scale;
    }

    let one = grid.nearest(1.0);
    if w[one].abs() < 1e-300 {
        return Err(Error::NormalizationFailure);
    }
    let (w1, l1) = (w[one], logs[one]);
    for k in 0..grid.len {
        let f = (logs[k] - l1).exp() / w1;
        w[k] *= f;
        r_dw[k] *= f;
    }
    Ok(ChannelSolution { grid, w, r_dw })
}

/// Outward growth of the solution that is regular at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularGrowth {
    /// `log |w(r_max)| - log |w(1)|`.
    pub log_growth: f64,
    /// True if `w` stayed positive on `[r0, r_max]`.
    pub positive: bool,
}

/// Integrates the solution with pure `r^(γ⁺)` behaviour at `r0` out to `r_max`.
pub fn regular_solution_growth(
    channel: &OdeChannel,
    profile: &RadialProfile,
    r0: f64,
    r_max: f64,
) -> Result<RegularGrowth> {
    let roots = indicial_roots(&profile.constants, channel.lambda);
    if !roots.is_real() {
        return Err(Error::ComplexRoots);
    }
    let g = roots.gamma_plus.re;
    let rhs = channel_rhs(channel, profile);
    let mut y = [1.0, g];
    let mut log_scale = 0.0;
    let mut log_at_one = None;
    let mut positive = true;
    let grid = LogGrid::covering(r0, r_max, 0.05)?;
    let mut opts = Options::with_tol(1e-11);
    for k in 0..grid.len - 1 {
        let out = integrate::integrate(&rhs, grid.s(k), y, grid.s(k + 1), opts, |_| true)?;
        opts.h_init = out.h_next;
        let m = out.y[0].abs().max(out.y[1].abs());
        if !m.is_finite() {
            return Err(Error::IntegrationOverflow { r: grid.r(k + 1) });
        }
        y = [out.y[0] / m, out.y[1] / m];
        log_scale += m.ln();
        positive &= y[0] > 0.0;
        if log_at_one.is_none() && grid.s(k + 1) >= 0.0 {
            log_at_one = Some(log_scale + y[0].abs().ln());
        }
    }
    let end = log_scale + y[0].abs().ln();
    Ok(RegularGrowth { log_growth: end - log_at_one.unwrap_or(0.0), positive })
}

/// Two-point boundary value version of [`decaying_solution`] on `[1, r_far]`
/// with `w(1) = 1`, `w(r_far) = 0`, second-order differences in `log r`.
pub fn decaying_solution_bvp(
    channel: &OdeChannel,
    profile: &RadialProfile,
    r_far: f64,
    h: f64,
) -> Result<ChannelSolution> {
    let grid = LogGrid::covering(1.0, r_far, h)?;
    let n = profile.constants.n();
    let m = grid.len - 2;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        let k = i + 1;
        let r = grid.r(k);
        let q = channel.potential(profile, r) - channel.lambda - channel.e * r * r;
        lower[i] = 1.0 / (h * h) - 0.5 * (n - 2.0) / h;
        upper[i] = 1.0 / (h * h) + 0.5 * (n - 2.0) / h;
        diag[i] = -2.0 / (h * h) + q;
    }
    rhs[0] = -lower[0];
    let inner = linalg::solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut w = vec![0.0; grid.len];
    w[0] = 1.0;
    w[1..=m].copy_from_slice(&inner);
    let (ws, _) = log_derivatives(&w, h)?;
    Ok(ChannelSolution { grid, w, r_dw: ws })
}

/// Leading Frobenius coefficients `w ≈ a0 r^(γ⁻) + b0 r^(γ⁺)` near `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusFit {
    pub a0: f64,
    pub b0: f64,
    pub window: (f64, f64),
    /// Largest fit error over the window divided by the window sup of `|w|`.
    pub fit_residual: f64,
}

/// Functions standing in for the singular Frobenius branch.
#[derive(Debug, Clone, Copy)]
pub enum LeadingBasis<'a> {
    /// Pure powers `r^(γ⁻)`, `r^(γ⁺)` (plus `r^(γ⁻+2)` when `E > 0`).
    Powers,
    /// `u₁'(r) / (-a v_inf)` in place of `r^(γ⁻)`.
    ///
    /// Only for full-potential channels with `λ = N-1`, where `u₁'` is an
    /// exact kernel element with leading term `r^(γ⁻)`. It carries the slowly
    /// decaying corrections from `V - A_p`, so a short fit window suffices.
    KernelMode(&'a RadialProfile),
}

/// Fits the two leading coefficients over a window `[r_lo, r_hi]`, halving
/// `r_hi` (starting at 0.1) until the relative fit residual drops below `1e-6`.
pub fn frobenius_coefficients(
    channel: &OdeChannel,
    solution: &ChannelSolution,
    roots: &IndicialRoots,
    basis: LeadingBasis<'_>,
) -> Result<FrobeniusFit> {
    if !roots.is_real() {
        return Err(Error::ComplexRoots);
    }
    let (gm, gp) = (roots.gamma_minus.re, roots.gamma_plus.re);
    let gap = gp - gm;
    if gap < 0.1 {
        return Err(Error::RootsTooClose { gap });
    }
    let with_r2 = channel.e > 0.0;
    if with_r2 && (gap - 2.0).abs() < 0.1 {
        return Err(Error::RootsTooClose { gap: (gap - 2.0).abs() });
    }
    let leading: Box<dyn Fn(f64) -> f64 + '_> = match basis {
        LeadingBasis::Powers => Box::new(move |r: f64| r.powf(gm)),
        LeadingBasis::KernelMode(profile) => {
            let c = &profile.constants;
            if channel.mode != PotentialMode::Full || (channel.lambda - (c.n() - 1.0)).abs() > 1e-12 {
                return Err(Error::InvalidInput(
                    "kernel-mode basis needs a full-potential channel with lambda = N-1".into(),
                ));
            }
            let scale = -c.a * c.v_inf;
            Box::new(move |r: f64| profile.du_dr(1.0, r) / scale)
        }
    };

    let grid = &solution.grid;
    let r_lo = grid.r(0);
    let mut r_hi = 0.1f64;
    let mut best = f64::INFINITY;
    let min_nodes = 12;
    loop {
        let idx: Vec<usize> = (0..grid.len).filter(|&k| grid.r(k) <= r_hi * (1.0 + 1e-12)).collect();
        if idx.len() < min_nodes {
            return Err(Error::FitUnreliable { residual: best });
        }
        // Rows scaled by the leading function, so the fit is relative.
        let phi: Vec<f64> = idx.iter().map(|&k| leading(grid.r(k))).collect();
        let mut cols = vec![
            vec![1.0; idx.len()],
            idx.iter().zip(&phi).map(|(&k, f)| grid.r(k).powf(gp) / f).collect::<Vec<_>>(),
        ];
        if with_r2 {
            cols.push(idx.iter().map(|&k| grid.r(k).powi(2)).collect());
        }
        let y: Vec<f64> = idx.iter().zip(&phi).map(|(&k, f)| solution.w[k] / f).collect();
        let coef = linalg::least_squares(&cols, &y)?;
        let mut worst: f64 = 0.0;
        let mut sup: f64 = 0.0;
        for (row, &k) in idx.iter().enumerate() {
            let model: f64 = cols.iter().zip(&coef).map(|(c, a)| c[row] * a).sum::<f64>() * phi[row];
            worst = worst.max((solution.w[k] - model).abs());
            sup = sup.max(solution.w[k].abs());
        }
        let residual = if sup > 0.0 { worst / sup } else { worst };
        best = best.min(residual);
        if residual < 1e-6 {
            return Ok(FrobeniusFit {
                a0: coef[0],
                b0: coef[1],
                window: (r_lo, grid.r(*idx.last().unwrap())),
                fit_residual: residual,
            });
        }
        r_hi *= 0.5;
    }
}

/// Settings for [`a0_map`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A0MapOptions {
    pub profile: ProfileOptions,
    pub r_min: f64,
    /// Log-grid spacing of the shooting output.
    pub h: f64,
}

impl Default for A0MapOptions {
    fn default() -> Self {
        Self { profile: ProfileOptions::default(), r_min: 1e-6, h: 0.01 }
    }
}

/// One `(p, E)` cell of the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A0Cell {
    pub p: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub a0: Option<f64>,
    pub fit_residual: Option<f64>,
    /// `"ok"` or the error that invalidated the cell.
    pub status: String,
}

/// Leading singular coefficient of the decaying solution over a `(p, E)` grid.
///
/// Cells that fail are reported with their error instead of aborting the map.
pub fn a0_map(
    n: usize,
    lambda: f64,
    p_grid: &[f64],
    e_grid: &[f64],
    opts: &A0MapOptions,
) -> Result<Vec<A0Cell>> {
    let mut profiles = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let c = derive_constants(&ProblemParams::new(n, p)?)?;
        profiles.push(compute_profile_with(&c, &opts.profile));
    }
    let jobs: Vec<(usize, f64)> =
        (0..p_grid.len()).flat_map(|i| e_grid.iter().map(move |&e| (i, e))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, e)| {
            let p = p_grid[i];
            let fail = |err: &Error| A0Cell {
                p,
                e,
                a0: None,
                fit_residual: None,
                status: err.to_string(),
            };
            let profile = match &profiles[i] {
                Ok(pr) => pr,
                Err(err) => return fail(err),
            };
            match a0_cell(profile, lambda, e, opts) {
                Ok(fit) => A0Cell {
                    p,
                    e,
                    a0: Some(fit.a0),
                    fit_residual: Some(fit.fit_residual),
                    status: "ok".into(),
                },
                Err(err) => fail(&err),
            }
        })
        .collect();
    Ok(cells)
}

/// Shoots and fits one cell.
pub fn a0_cell(profile: &RadialProfile, lambda: f64, e: f64, opts: &A0MapOptions) -> Result<FrobeniusFit> {
    let channel = OdeChannel::new(lambda, e, PotentialMode::Full)?;
    let r_max = if e > 0.0 { 50f64.max(30.0 / e.sqrt()) } else { 200.0 };
    let sol = decaying_solution_on(&channel, profile, opts.r_min, r_max, opts.h)?;
    let roots = indicial_roots(&profile.constants, lambda);
    let kernel = (lambda - (profile.constants.n() - 1.0)).abs() < 1e-12;
    let basis = if kernel { LeadingBasis::KernelMode(profile) } else { LeadingBasis::Powers };
    frobenius_coefficients(&channel, &sol, &roots, basis)
}

/// Hardy inequality `∫ r^(N-3) w² dr ≤ 4/(N-2)² ∫ r^(N-1) w'² dr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Evaluates both sides by the trapezoid rule in `log r`.
pub fn hardy_check(grid: &LogGrid, w: &[f64], n: usize) -> Result<HardyReport> {
    if n < 3 {
        return Err(Error::DimensionTooSmall(n));
    }
    if w.len() != grid.len {
        return Err(Error::InvalidInput("sample count does not match grid".into()));
    }
    let (ws, _) = log_derivatives(w, grid.h)?;
    let nf = n as f64;
    // r^(N-3) w² dr = r^(N-2) w² ds and r^(N-1) w'² dr = r^(N-2) w_s² ds.
    let f: Vec<f64> = (0..grid.len).map(|k| grid.r(k).powf(nf - 2.0) * w[k] * w[k]).collect();
    let g: Vec<f64> = (0..grid.len).map(|k| grid.r(k).powf(nf - 2.0) * ws[k] * ws[k]).collect();
    let trap = |y: &[f64]| {
        grid.h * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[y.len() - 1]))
    };
    let lhs = trap(&f);
    let rhs = 4.0 / (nf - 2.0).powi(2) * trap(&g);
    let last = grid.len - 1;
    let tail = f[0].max(f[last]).max(g[0]).max(g[last]);
    if tail > 1e-10 * lhs.max(rhs) && tail > 0.0 {
        return Err(Error::TailNotDecayed);
    }
    Ok(HardyReport { lhs, rhs, ok: lhs <= rhs * (1.0 + 1e-6) })
}
