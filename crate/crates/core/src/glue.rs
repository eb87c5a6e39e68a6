//! Approximate solutions built from cut-off singular profiles.
//!
//! `ū(x) = Σ χ_R(x - x_i) u_{ε_i}(x - x_i)` with a quintic smoothstep cutoff.
//! The cutoff supports are disjoint, so the residual
//! `f = Δū + ū^p` is a sum of radial pieces supported on the annuli
//! `R ≤ |x - x_i| ≤ 2R`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial_profile::RadialProfile;
use crate::weighted_norms::WeightFunction;

/// Computational domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Domain {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Ball { center, .. } => center.len(),
            Domain::Box { lo, .. } => lo.len(),
        }
    }

    /// Distance from `x` to the complement; negative outside.
    pub fn depth(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Ball { center, radius } => {
                radius - center.iter().zip(x).map(|(c, y)| (c - y) * (c - y)).sum::<f64>().sqrt()
            }
            Domain::Box { lo, hi } => (0..lo.len())
                .map(|k| (x[k] - lo[k]).min(hi[k] - x[k]))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Singular points, their scales and the cutoff radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpec {
    pub points: Vec<Vec<f64>>,
    pub epsilons: Vec<f64>,
    #[serde(rename = "R")]
    pub r_cut: f64,
    /// Lower ratio `a` in `a max ε ≤ ε_i ≤ max ε`.
    pub cone_a: f64,
    pub domain: Domain,
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl SingularSpec {
    /// One point at the center of the ball of radius `radius`.
    pub fn centered_ball(n: usize, epsilon: f64, r_cut: f64, radius: f64) -> Result<Self> {
        let spec = Self {
            points: vec![vec![0.0; n]],
            epsilons: vec![epsilon],
            r_cut,
            cone_a: 0.5,
            domain: Domain::Ball { center: vec![0.0; n], radius },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn max_epsilon(&self) -> f64 {
        self.epsilons.iter().cloned().fold(0.0, f64::max)
    }

    /// Half the smallest distance between two points; infinite for one point.
    pub fn separation_radius(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                best = best.min(0.5 * dist(&self.points[i], &self.points[j]));
            }
        }
        best
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecInvalid(m));
        if self.points.is_empty() {
            return bad("at least one singular point is required".into());
        }
        if self.points.len() != self.epsilons.len() {
            return bad(format!("{} points but {} epsilons", self.points.len(), self.epsilons.len()));
        }
        let n = self.domain.dim();
        if self.points.iter().any(|x| x.len() != n) {
            return bad(format!("every point needs {n} coordinates"));
        }
        if let Domain::Box { lo, hi } = &self.domain {
            if hi.len() != n || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                return bad("box needs lo < hi in every coordinate".into());
            }
        }
        if !(self.r_cut > 0.0) {
            return bad(format!("R = {} must be positive", self.r_cut));
        }
        if !(self.cone_a > 0.0 && self.cone_a < 1.0) {
            return bad(format!("cone constant {} must lie in (0, 1)", self.cone_a));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return bad("epsilons must be positive".into());
        }
        let r0 = self.separation_radius();
        if self.r_cut >= r0 {
            return bad(format!("R = {} must be below half the point separation {r0}", self.r_cut));
        }
        for (i, x) in self.points.iter().enumerate() {
            if self.domain.depth(x) <= 2.0 * self.r_cut {
                return bad(format!("ball of radius 2R around point {i} leaves the domain"));
            }
        }
        let emax = self.max_epsilon();
        for (i, e) in self.epsilons.iter().enumerate() {
            if *e < self.cone_a * emax {
                return bad(format!("epsilon {i} = {e} is below a max(epsilon) = {}", self.cone_a * emax));
            }
            if *e >= self.r_cut {
                return bad(format!("epsilon {i} = {e} is not below R"));
            }
        }
        Ok(())
    }

    /// Weight function centred on the points with smoothing radius `R`.
    pub fn weight(&self) -> Result<WeightFunction> {
        WeightFunction::new(self.points.clone(), self.r_cut)
    }

    /// Index of the nearest point and the distance to it.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        self.points
            .iter()
            .enumerate()
            .map(|(i, c)| (i, dist(c, x)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }
}

/// Cutoff `χ(s) = 1 - S(s - 1)` with the quintic smoothstep `S`.
pub mod cutoff {
    /// `χ(s)`.
    pub fn chi(s: f64) -> f64 {
        if s <= 1.0 {
            1.0
        } else if s >= 2.0 {
            0.0
        } else {
            let x = s - 1.0;
            1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
        }
    }

    /// `χ'(s)`.
    pub fn dchi(s: f64) -> f64 {
        if s <= 1.0 || s >= 2.0 {
            0.0
        } else {
            let x = s - 1.0;
            -30.0 * x * x * (1.0 - x) * (1.0 - x)
        }
    }

    /// `χ''(s)`.
    pub fn d2chi(s: f64) -> f64 {
        if s <= 1.0 || s >= 2.0 {
            0.0
        } else {
            let x = s - 1.0;
            -60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
        }
    }

    /// `Δ χ(|x|/R)` in dimension `n` at radius `r`.
    pub fn laplacian(n: f64, r_cut: f64, r: f64) -> f64 {
        let s = r / r_cut;
        d2chi(s) / (r_cut * r_cut) + (n - 1.0) / r * dchi(s) / r_cut
    }
}

/// Evaluators for `ū` and its residual.
#[derive(Debug, Clone, Copy)]
pub struct Glued<'a> {
    pub spec: &'a SingularSpec,
    pub profile: &'a RadialProfile,
}

impl<'a> Glued<'a> {
    pub fn new(spec: &'a SingularSpec, profile: &'a RadialProfile) -> Result<Self> {
        spec.validate()?;
        if spec.domain.dim() != profile.constants.params.n {
            return Err(Error::SpecInvalid(format!(
                "domain has dimension {} but N = {}",
                spec.domain.dim(),
                profile.constants.params.n
            )));
        }
        Ok(Self { spec, profile })
    }

    /// Contribution of point `i` at distance `r` from it.
    pub fn radial_value(&self, i: usize, r: f64) -> f64 {
        let chi = cutoff::chi(r / self.spec.r_cut);
        if chi == 0.0 {
            return 0.0;
        }
        chi * self.profile.u_of_r(self.spec.epsilons[i], r)
    }

    /// Residual piece of point `i` at distance `r`.
    pub fn radial_residual(&self, i: usize, r: f64) -> f64 {
        let rc = self.spec.r_cut;
        let s = r / rc;
        if s <= 1.0 || s >= 2.0 {
            return 0.0;
        }
        let eps = self.spec.epsilons[i];
        let n = self.profile.constants.n();
        let p = self.profile.constants.p();
        let u = self.profile.u_of_r(eps, r);
        let du = self.profile.du_dr(eps, r);
        let chi = cutoff::chi(s);
        u * cutoff::laplacian(n, rc, r) + 2.0 * du * cutoff::dchi(s) / rc + (chi.powf(p) - chi) * u.powf(p)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (i, r) = self.spec.nearest(x);
        self.radial_value(i, r)
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        let (i, r) = self.spec.nearest(x);
        self.radial_residual(i, r)
    }
}

/// `x ↦ ū(x)`.
pub fn approx_solution<'a>(
    spec: &'a SingularSpec,
    profile: &'a RadialProfile,
) -> Result<impl Fn(&[f64]) -> f64 + 'a> {
    let g = Glued::new(spec, profile)?;
    Ok(move |x: &[f64]| g.value(x))
}

/// `x ↦ f(x) = Δū(x) + ū(x)^p`.
pub fn residual<'a>(
    spec: &'a SingularSpec,
    profile: &'a RadialProfile,
) -> Result<impl Fn(&[f64]) -> f64 + 'a> {
    let g = Glued::new(spec, profile)?;
    Ok(move |x: &[f64]| g.residual(x))
}

/// Bounds `c₁ ≤ ρ^(2/(p-1)) ū ≤ c₂` on `ρ ≤ R ε` around one point.
pub fn sandwich_constants(profile: &RadialProfile, r_cut: f64) -> (f64, f64) {
    let t0 = -r_cut.ln();
    // Scan the interpolant, which can overshoot the node values slightly.
    let (mut lo, mut hi) = (profile.constants.v_inf, profile.constants.v_inf);
    let step = profile.spacing() / 32.0;
    let mut t = t0;
    while t < profile.t_last() + step {
        let v = profile.eval(t).0;
        lo = lo.min(v);
        hi = hi.max(v);
        t += step;
    }
    (lo, hi)
}

/// Log-log fit of residual norms against `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub epsilons: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    /// Half-width of the 95% interval on the slope; zero for an exact fit.
    pub slope_ci: f64,
    pub intercept: f64,
}

/// Samples per annulus used by [`scaling_study`].
const ANNULUS_SAMPLES: usize = 4001;

/// Weighted sup norm `max ρ^(2-γ)|f|` of the residual of `spec`.
pub fn residual_norm(spec: &SingularSpec, profile: &RadialProfile, gamma: f64) -> Result<f64> {
    let g = Glued::new(spec, profile)?;
    let weight = spec.weight()?;
    let rc = spec.r_cut;
    let mut best: f64 = 0.0;
    for i in 0..spec.k() {
        for k in 0..ANNULUS_SAMPLES {
            let r = rc * (1.0 + k as f64 / (ANNULUS_SAMPLES - 1) as f64);
            let rho = weight.of_distance(r);
            best = best.max(rho.powf(2.0 - gamma) * g.radial_residual(i, r).abs());
        }
    }
    Ok(best)
}

/// Residual norms for each `ε` (all points share it) and the fitted slope.
pub fn scaling_study(
    template: &SingularSpec,
    profile: &RadialProfile,
    eps_list: &[f64],
    gamma: f64,
) -> Result<ScalingFit> {
    if eps_list.len() < 3 {
        return Err(Error::InvalidInput("scaling study needs at least three epsilons".into()));
    }
    let mut norms = Vec::with_capacity(eps_list.len());
    for &e in eps_list {
        let mut spec = template.clone();
        spec.epsilons = vec![e; spec.k()];
        norms.push(residual_norm(&spec, profile, gamma)?);
    }
    if norms.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::InvalidInput("residual norm vanished; cannot fit a slope".into()));
    }
    let x: Vec<f64> = eps_list.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|f| f.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = m - 2.0;
    // Two-sided 95% Student t quantiles for small sample counts.
    let tq = match dof as usize {
        1 => 12.706,
        2 => 4.303,
        3 => 3.182,
        4 => 2.776,
        5 => 2.571,
        _ => 2.0,
    };
    let slope_ci = tq * (sse / dof / sxx).sqrt();
    Ok(ScalingFit { epsilons: eps_list.to_vec(), norms, slope, slope_ci, intercept })
}
