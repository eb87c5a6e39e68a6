//! Problem parameters and the closed-form constants attached to them.
//!
//! Everything here is algebra on `(N, p)`: the plateau value `v_inf`, the
//! linearized potential constant `A_p`, indicial roots of the radial
//! eigencomponents and the weight exponents used by the solver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension and exponent of `Δu + u^p = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub p: f64,
}

impl ProblemParams {
    /// Builds validated parameters.
    pub fn new(n: usize, p: f64) -> Result<Self> {
        let params = Self { n, p };
        validate(&params)?;
        Ok(params)
    }

    /// Open interval of admissible exponents, `(N/(N-2), (N+2)/(N-2))`.
    pub fn p_range(n: usize) -> (f64, f64) {
        let nf = n as f64;
        (nf / (nf - 2.0), (nf + 2.0) / (nf - 2.0))
    }
}

/// Checks `N >= 3` and `N/(N-2) < p < (N+2)/(N-2)`.
pub fn validate(params: &ProblemParams) -> Result<()> {
    if params.n < 3 {
        return Err(Error::DimensionTooSmall(params.n));
    }
    if !params.p.is_finite() {
        return Err(Error::InvalidInput(format!("p = {} is not finite", params.p)));
    }
    let (lo, hi) = ProblemParams::p_range(params.n);
    if params.p >= hi {
        return Err(Error::SupercriticalExponent { p: params.p, bound: hi });
    }
    if params.p <= lo {
        return Err(Error::SubthresholdExponent { p: params.p, bound: lo });
    }
    Ok(())
}

/// Closed-form constants of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub params: ProblemParams,
    /// `2/(p-1)`, the blow-up rate of singular solutions.
    pub a: f64,
    pub v_inf: f64,
    /// `p * v_inf^(p-1)`, the limit of `r^2 p u^(p-1)` at the singularity.
    pub a_p: f64,
    /// `N - 2p/(p-1)`, the decay rate of the profile tail.
    pub mu_plus: f64,
    /// True when the `j = 0` indicial roots are complex.
    pub critical_flag: bool,
}

impl DerivedConstants {
    pub fn n(&self) -> f64 {
        self.params.n as f64
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    /// `v_inf^(p-1)`, the linear coefficient of the profile ODE.
    pub fn c_lin(&self) -> f64 {
        self.a * self.mu_plus
    }

    /// Drift coefficient `N - 2 - 4/(p-1)` of the profile ODE (negative in range).
    pub fn drift(&self) -> f64 {
        self.n() - 2.0 - 2.0 * self.a
    }

    /// Strict upper bound `((p+1)/2) v_inf^(p-1)` for `v^(p-1)` along the orbit.
    pub fn sup_bound(&self) -> f64 {
        0.5 * (self.p() + 1.0) * self.c_lin()
    }
}

/// Evaluates all constants for validated parameters.
pub fn derive_constants(params: &ProblemParams) -> Result<DerivedConstants> {
    validate(params)?;
    let n = params.n as f64;
    let p = params.p;
    let a = 2.0 / (p - 1.0);
    let mu_plus = n - 2.0 * p / (p - 1.0);
    let c = a * mu_plus;
    let v_inf = c.powf(1.0 / (p - 1.0));
    let a_p = p * c;
    let half = 0.5 * (n - 2.0);
    Ok(DerivedConstants {
        params: *params,
        a,
        v_inf,
        a_p,
        mu_plus,
        critical_flag: half * half - a_p < 0.0,
    })
}

/// Eigenvalue `l(l+N-2)` of the Laplacian on the unit sphere `S^(N-1)`.
pub fn sphere_eigenvalue(l: usize, n: usize) -> f64 {
    let l = l as f64;
    l * (l + n as f64 - 2.0)
}

/// Indicial roots of one spherical eigencomponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicialRoots {
    pub lambda: f64,
    pub gamma_minus: Complex64,
    pub gamma_plus: Complex64,
    pub tilde_gamma_minus: f64,
    pub tilde_gamma_plus: f64,
}

impl IndicialRoots {
    pub fn is_real(&self) -> bool {
        self.gamma_minus.im == 0.0
    }
}

/// Roots of `γ(γ + N - 2) + A_p - λ = 0` (at the singularity) and of
/// `γ(γ + N - 2) - λ = 0` (at infinity).
pub fn indicial_roots(constants: &DerivedConstants, lambda: f64) -> IndicialRoots {
    let half = 0.5 * (constants.n() - 2.0);
    let disc = Complex64::new(half * half + lambda - constants.a_p, 0.0).sqrt();
    let centre = Complex64::new(-half, 0.0);
    let tilde = (half * half + lambda).sqrt();
    IndicialRoots {
        lambda,
        gamma_minus: centre - disc,
        gamma_plus: centre + disc,
        tilde_gamma_minus: -half - tilde,
        tilde_gamma_plus: -half + tilde,
    }
}

/// Exponent `p*` where the `j = 0` indicial roots turn complex.
///
/// Root of `((N-2)/2)^2 = A_p`, located by bisection to `1e-12`.
pub fn critical_exponent(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::DimensionTooSmall(n));
    }
    let (mut lo, mut hi) = ProblemParams::p_range(n);
    let target = (0.5 * (n as f64 - 2.0)).powi(2);
    let a_p = |p: f64| {
        let s = 2.0 * p / (p - 1.0);
        s * (n as f64 - s)
    };
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if a_p(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Weight exponents `ν`, `μ = 2 - N - ν` and the `L²` shift `δ_ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSelection {
    pub nu: f64,
    pub mu: f64,
    pub delta_nu: f64,
}

/// How to pick `ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightStrategy {
    Default,
    Explicit(f64),
}

/// Admissible open interval `(-2/(p-1), Re γ₀⁻)` for `ν`.
pub fn nu_interval(constants: &DerivedConstants) -> (f64, f64) {
    let roots = indicial_roots(constants, 0.0);
    (-constants.a, roots.gamma_minus.re)
}

/// Chooses the weights; `δ_ν` is always the midpoint of its interval.
pub fn select_weights(
    constants: &DerivedConstants,
    strategy: WeightStrategy,
) -> Result<WeightSelection> {
    let (lo, hi) = nu_interval(constants);
    let nu = match strategy {
        WeightStrategy::Default => 0.5 * (lo + hi),
        WeightStrategy::Explicit(nu) => {
            if !(nu > lo && nu < hi) {
                return Err(Error::WeightOutOfRange { nu, lo, hi });
            }
            nu
        }
    };
    let n = constants.n();
    let half = 0.5 * (n - 2.0);
    // -a + (N-2)/2 < -δ < ν + (N-2)/2
    let delta_lo = -nu - half;
    let delta_hi = constants.a - half;
    Ok(WeightSelection {
        nu,
        mu: 2.0 - n - nu,
        delta_nu: 0.5 * (delta_lo + delta_hi),
    })
}

/// Scaling exponent of the ball radius `β ε^q` used by the fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularKind {
    /// Isolated points: `q = N - 2p/(p-1)`.
    Isolated,
    /// Positive-dimensional singular set: `q = (p-3)/(p-1) - ν`.
    General,
}

pub fn ball_exponent(constants: &DerivedConstants, nu: f64, kind: SingularKind) -> f64 {
    match kind {
        SingularKind::Isolated => constants.mu_plus,
        SingularKind::General => (constants.p() - 3.0) / (constants.p() - 1.0) - nu,
    }
}
