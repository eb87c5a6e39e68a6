//! Discrete weighted sup and Hölder norms.
//!
//! A field `w` has weighted sup norm `max ρ^(-γ)|w|` and a Hölder part given
//! by the scaled difference quotient of `w̄ = ρ^(-γ) w`, sampled over node
//! pairs at dyadic index separations. The Cartesian quotient
//! `(ρ + ρ̃)^α |w̄ - w̄'| / |z - z̃|^α` replaces the polar one; the two agree
//! up to constants that are not tracked.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of sampled pairs for the Hölder estimator.
pub const DEFAULT_PAIRS: usize = 10_000;
/// Default sampling seed.
pub const DEFAULT_SEED: u64 = 0x5eed;

fn smoothstep5(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// The regularized distance `ρ` to a finite set of points.
///
/// `ρ = d` for `d ≤ σ`, where `d` is the distance to the nearest point, and
/// `ρ = 3σ/2` for `d ≥ 2σ`, with a quintic blend in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub points: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl WeightFunction {
    pub fn new(points: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("weight function needs at least one point".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidInput(format!("sigma = {sigma} must be positive")));
        }
        Ok(Self { points, sigma })
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|c| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min)
    }

    /// `ρ` as a function of the distance to the nearest point.
    pub fn of_distance(&self, d: f64) -> f64 {
        let s = self.sigma;
        if d <= s {
            d
        } else {
            d + (1.5 * s - d) * smoothstep5((d - s) / s)
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.of_distance(self.distance(x))
    }
}

/// Node arrangement, used to pick pairs for the Hölder estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Nodes ordered along a line (radial grids).
    Line,
    /// Full Cartesian block in row-major order, `dims[2]` fastest.
    Block { dims: [usize; 3] },
}

/// Samples of a scalar field at grid nodes together with `ρ` there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub layout: Layout,
    /// Node positions; radial grids store `[r, 0, 0]`.
    pub nodes: Vec<[f64; 3]>,
    pub rho: Vec<f64>,
    pub values: Vec<f64>,
    /// Weight exponent the field is meant to be measured with.
    pub gamma: f64,
}

impl GridField {
    /// Field on a radial grid with `ρ = r`.
    pub fn radial(radii: &[f64], values: Vec<f64>, gamma: f64) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::InvalidInput("radii and values differ in length".into()));
        }
        Ok(Self {
            layout: Layout::Line,
            nodes: radii.iter().map(|r| [*r, 0.0, 0.0]).collect(),
            rho: radii.to_vec(),
            values,
            gamma,
        })
    }

    /// Same nodes and weight, new values.
    pub fn with_values(&self, values: Vec<f64>, gamma: f64) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidInput("value count does not match nodes".into()));
        }
        Ok(Self { values, gamma, ..self.clone() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.rho.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::NodeOnSingularSet);
        }
        Ok(())
    }
}

/// `max ρ^(-γ)|w|` over the nodes.
pub fn weighted_sup(field: &GridField, gamma: f64) -> Result<f64> {
    field.check()?;
    Ok(field
        .rho
        .iter()
        .zip(&field.values)
        .map(|(r, w)| r.powf(-gamma) * w.abs())
        .fold(0.0, f64::max))
}

fn sample_pairs(field: &GridField, budget: usize, seed: u64) -> Vec<(usize, usize)> {
    let n = field.len();
    if n < 2 || budget == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(budget);
    match field.layout {
        Layout::Line => {
            let levels = (usize::BITS - (n - 1).leading_zeros()) as usize;
            for k in 0..budget {
                let step = 1usize << (k % levels);
                if step >= n {
                    continue;
                }
                let i = rng.gen_range(0..n - step);
                pairs.push((i, i + step));
            }
        }
        Layout::Block { dims } => {
            let longest = *dims.iter().max().unwrap();
            let levels = (usize::BITS - longest.max(2).saturating_sub(1).leading_zeros()) as usize;
            for k in 0..budget {
                let step = 1i64 << (k % levels);
                let dir: [i64; 3] = loop {
                    let d = [rng.gen_range(-1..=1), rng.gen_range(-1..=1), rng.gen_range(-1..=1)];
                    if d != [0, 0, 0] {
                        break d;
                    }
                };
                let a: [i64; 3] = [0, 1, 2].map(|c| rng.gen_range(0..dims[c] as i64));
                let b: [i64; 3] = [0, 1, 2].map(|c| a[c] + dir[c] * step);
                if (0..3).any(|c| b[c] < 0 || b[c] >= dims[c] as i64) {
                    continue;
                }
                let idx = |x: [i64; 3]| ((x[0] as usize * dims[1]) + x[1] as usize) * dims[2] + x[2] as usize;
                pairs.push((idx(a), idx(b)));
            }
        }
    }
    pairs
}

/// Sampled Hölder part of the `C^{0,α}_γ` norm, with the default seed.
pub fn weighted_holder(field: &GridField, gamma: f64, alpha: f64, pair_budget: usize) -> Result<f64> {
    weighted_holder_seeded(field, gamma, alpha, pair_budget, DEFAULT_SEED)
}

pub fn weighted_holder_seeded(
    field: &GridField,
    gamma: f64,
    alpha: f64,
    pair_budget: usize,
    seed: u64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    field.check()?;
    if let Layout::Block { dims } = field.layout {
        if dims.iter().product::<usize>() != field.len() {
            return Err(Error::InvalidInput("block dimensions do not match node count".into()));
        }
    }
    let wbar = |i: usize| field.rho[i].powf(-gamma) * field.values[i];
    let mut best: f64 = 0.0;
    for (i, j) in sample_pairs(field, pair_budget, seed) {
        let dist = (0..3).map(|c| (field.nodes[i][c] - field.nodes[j][c]).powi(2)).sum::<f64>().sqrt();
        if dist == 0.0 {
            continue;
        }
        let q = ((field.rho[i] + field.rho[j]) / dist).powf(alpha) * (wbar(i) - wbar(j)).abs();
        best = best.max(q);
    }
    Ok(best)
}

/// Both parts of the `C^{0,α}_γ` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormReport {
    pub sup_part: f64,
    pub holder_part: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl WeightedNormReport {
    pub fn total(&self) -> f64 {
        self.sup_part + self.holder_part
    }
}

pub fn weighted_norm(
    field: &GridField,
    gamma: f64,
    alpha: f64,
    pair_budget: usize,
) -> Result<WeightedNormReport> {
    Ok(WeightedNormReport {
        sup_part: weighted_sup(field, gamma)?,
        holder_part: weighted_holder(field, gamma, alpha, pair_budget)?,
        gamma,
        alpha,
    })
}

/// Outcome of the `w^p` estimate check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerNormReport {
    /// `sup ρ^(2-γ)|w|^p`.
    pub lhs: f64,
    /// `η sup ρ^(-γ)|w|`.
    pub rhs: f64,
    /// Smallness threshold on `sup ρ^(-γ)|w|` below which the bound is claimed.
    pub threshold: f64,
    /// True if the field is below the threshold.
    pub applicable: bool,
    /// `rhs - lhs`.
    pub margin: f64,
    /// False only if the bound was claimed and failed.
    pub ok: bool,
}

/// Checks `‖w^p‖_{γ-2} ≤ η ‖w‖_γ` for small `w` in the sup part.
///
/// Needs `γ > -2/(p-1)`, so that `ρ^(2+(p-1)γ)` is bounded by its value at the
/// largest node weight; the threshold is computed from that bound.
pub fn power_norm_check(field: &GridField, gamma: f64, p: f64, eta: f64) -> Result<PowerNormReport> {
    if !(p > 1.0) {
        return Err(Error::InvalidInput(format!("p = {p} must exceed 1")));
    }
    if !(gamma > -2.0 / (p - 1.0)) {
        return Err(Error::ExponentOrdering(format!(
            "gamma = {gamma} must exceed -2/(p-1) = {}",
            -2.0 / (p - 1.0)
        )));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(format!("eta = {eta} must be positive")));
    }
    field.check()?;
    let norm = weighted_sup(field, gamma)?;
    let lhs = field
        .rho
        .iter()
        .zip(&field.values)
        .map(|(r, w)| r.powf(2.0 - gamma) * w.abs().powf(p))
        .fold(0.0, f64::max);
    let rho_max = field.rho.iter().cloned().fold(0.0, f64::max);
    let threshold = (eta / rho_max.powf(2.0 + (p - 1.0) * gamma)).powf(1.0 / (p - 1.0));
    let rhs = eta * norm;
    let applicable = norm <= threshold;
    Ok(PowerNormReport { lhs, rhs, threshold, applicable, margin: rhs - lhs, ok: !applicable || lhs <= rhs })
}
