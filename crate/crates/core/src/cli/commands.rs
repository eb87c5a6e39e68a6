//! Subcommand bodies. Each writes its artifacts and returns whether its checks passed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::fixed_point::{
    picard_solve_traced, verify_solution, Check, IterationTrace, SolutionField, SolutionReport,
    VerifyTolerances,
};
use crate::glue::{scaling_study, Glued, ScalingFit};
use crate::linear_solve::{Discretization, Geometry, SolveMethod};
use crate::ode_family::{a0_map, A0Cell, A0MapOptions};
use crate::params::{
    critical_exponent, indicial_roots, nu_interval, sphere_eigenvalue, DerivedConstants, WeightSelection,
};
use crate::radial_profile::{compute_profile_with, normalize_profile, RadialProfile};
use crate::weighted_norms::{weighted_holder_seeded, weighted_sup, GridField, Layout, WeightedNormReport};

/// Version string baked in at build time.
pub const VERSION: &str = env!("EMDEN_GLUE_VERSION");

/// Tolerances echoed into every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub profile_tol: f64,
    pub picard_stop_tol: f64,
    pub linear_solver: Option<SolveMethod>,
    pub verify: VerifyTolerances,
}

/// Common wrapper of every JSON report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub command: String,
    /// `"ok"`, `"checks_failed"` or `"failed"`.
    pub status: String,
    pub error: Option<String>,
    pub version: String,
    pub config: RunConfig,
    pub tolerances: Tolerances,
    pub checks: Vec<Check>,
    pub result: Option<T>,
}

/// What a command reports back to the dispatcher.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub written: Vec<PathBuf>,
    pub failed_checks: Vec<String>,
}

fn check(name: &str, value: f64, threshold: f64, below: bool) -> Check {
    let passed = value.is_finite() && if below { value <= threshold } else { value >= threshold };
    Check { name: name.into(), value, threshold, passed }
}

struct Sink<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl<'a> Sink<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        let dir = cfg.output_dir();
        fs::create_dir_all(&dir)?;
        Ok(Self { cfg, dir, written: Vec::new() })
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
        if !self.cfg.wants(Format::Csv) {
            return Ok(());
        }
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Io(e.to_string()))?;
        for row in rows {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.cfg.wants(Format::Json) {
            return Ok(());
        }
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        self.written.push(path);
        Ok(())
    }

    fn report<T: Serialize>(
        &mut self,
        name: &str,
        command: &str,
        tolerances: Tolerances,
        checks: Vec<Check>,
        result: Option<T>,
        error: Option<&Error>,
    ) -> Result<Outcome> {
        let passed = error.is_none() && checks.iter().all(|c| c.passed);
        let failed_checks = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        let status = match (error, passed) {
            (Some(_), _) => "failed",
            (None, true) => "ok",
            (None, false) => "checks_failed",
        };
        let env = Envelope {
            command: command.into(),
            status: status.into(),
            error: error.map(|e| e.to_string()),
            version: VERSION.into(),
            config: self.cfg.clone(),
            tolerances,
            checks,
            result,
        };
        self.json(name, &env)?;
        Ok(Outcome { passed, written: std::mem::take(&mut self.written), failed_checks })
    }
}

fn tolerances(cfg: &RunConfig, method: Option<SolveMethod>) -> Tolerances {
    Tolerances {
        profile_tol: cfg.profile.tol,
        picard_stop_tol: cfg.picard.stop_tol,
        linear_solver: method,
        verify: cfg.verify,
    }
}

/// Builds the profile, translated if `normalize_alpha` is set.
pub fn profile_for(cfg: &RunConfig) -> Result<RadialProfile> {
    let constants = cfg.constants()?;
    let profile = compute_profile_with(&constants, &cfg.profile.options())?;
    match cfg.profile.normalize_alpha {
        Some(alpha) => normalize_profile(&profile, alpha),
        None => Ok(profile),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub v_inf: f64,
    #[serde(rename = "A_p")]
    pub a_p: f64,
    pub mu_plus: f64,
    pub sup_bound_margin: f64,
    pub tail_slope: f64,
    pub far_coefficient: f64,
    pub plateau_error: f64,
    pub max_ode_residual: f64,
    pub max_energy_increase: f64,
    pub t_first: f64,
    pub t_last: f64,
}

#[derive(Serialize)]
struct ProfileRow {
    t: f64,
    v: f64,
    v_prime: f64,
}

#[derive(Serialize)]
struct U1Row {
    r: f64,
    u1: f64,
    u1_prime: f64,
}

pub fn radial(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate(false)?;
    let mut sink = Sink::new(cfg)?;
    let profile = profile_for(cfg)?;
    let c = profile.constants;
    let last = profile.v.len() - 1;
    let summary = ProfileSummary {
        v_inf: c.v_inf,
        a_p: c.a_p,
        mu_plus: c.mu_plus,
        sup_bound_margin: profile.sup_bound_margin(),
        tail_slope: profile.tail_slope(),
        far_coefficient: profile.far_coefficient,
        plateau_error: (profile.v[last] - c.v_inf).abs(),
        max_ode_residual: profile.ode_residual().iter().cloned().fold(0.0, f64::max),
        max_energy_increase: profile.max_energy_increase(),
        t_first: profile.t_first(),
        t_last: profile.t_last(),
    };
    sink.csv(
        "profile.csv",
        profile.t_grid.iter().zip(&profile.v).zip(&profile.v_prime).map(|((t, v), vp)| ProfileRow {
            t: *t,
            v: *v,
            v_prime: *vp,
        }),
    )?;
    sink.csv(
        "u1.csv",
        profile.t_grid.iter().rev().map(|t| {
            let r = (-t).exp();
            U1Row { r, u1: profile.u_of_r(1.0, r), u1_prime: profile.du_dr(1.0, r) }
        }),
    )?;
    let checks = vec![
        check("plateau", summary.plateau_error, 1e-6, true),
        check("ode_residual", summary.max_ode_residual, 1e-7, true),
        check("sup_bound_margin", summary.sup_bound_margin, 0.01, false),
        check("tail_slope", (summary.tail_slope / c.mu_plus - 1.0).abs(), 0.01, true),
    ];
    sink.report("profile_report.json", "radial", tolerances(cfg, None), checks, Some(summary), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndicialRow {
    j: usize,
    lambda: f64,
    gamma_minus_re: f64,
    gamma_minus_im: f64,
    gamma_plus_re: f64,
    gamma_plus_im: f64,
    tilde_gamma_minus: f64,
    tilde_gamma_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicialSummary {
    pub constants: DerivedConstants,
    pub p_star: f64,
    pub nu_interval: (f64, f64),
    pub weights: WeightSelection,
}

pub fn indicial(cfg: &RunConfig, j_max: usize) -> Result<Outcome> {
    cfg.validate(false)?;
    let mut sink = Sink::new(cfg)?;
    let c = cfg.constants()?;
    let n = cfg.problem.n;
    let rows: Vec<IndicialRow> = (0..=j_max)
        .map(|j| {
            let lambda = sphere_eigenvalue(j, n);
            let r = indicial_roots(&c, lambda);
            IndicialRow {
                j,
                lambda,
                gamma_minus_re: r.gamma_minus.re,
                gamma_minus_im: r.gamma_minus.im,
                gamma_plus_re: r.gamma_plus.re,
                gamma_plus_im: r.gamma_plus.im,
                tilde_gamma_minus: r.tilde_gamma_minus,
                tilde_gamma_plus: r.tilde_gamma_plus,
            }
        })
        .collect();
    let nf = n as f64;
    let mut checks = vec![
        check("A_p_positive", c.a_p, 0.0, false),
        check("A_p_below_bound", c.a_p, (nf * nf - 4.0) / 4.0, true),
    ];
    if let Some(row) = rows.get(1) {
        checks.push(check("gamma_1_minus", (row.gamma_minus_re + c.a + 1.0).abs(), 1e-10, true));
    }
    sink.csv("indicial.csv", rows)?;
    let summary = IndicialSummary {
        constants: c,
        p_star: critical_exponent(n)?,
        nu_interval: nu_interval(&c),
        weights: cfg.weights()?,
    };
    sink.report("indicial_report.json", "indicial", tolerances(cfg, None), checks, Some(summary), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A0Summary {
    pub lambda: f64,
    pub cells: usize,
    pub positive: usize,
    pub failed: usize,
    pub min_a0: Option<f64>,
}

pub fn a0map(cfg: &RunConfig, lambda: f64, p_grid: &[f64], e_grid: &[f64]) -> Result<Outcome> {
    if p_grid.is_empty() || e_grid.is_empty() {
        return Err(Error::Config("p and E grids must not be empty".into()));
    }
    if e_grid.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::Config("E values must be non-negative".into()));
    }
    for &p in p_grid {
        crate::params::ProblemParams::new(cfg.problem.n, p)?;
    }
    let mut sink = Sink::new(cfg)?;
    let opts = A0MapOptions { profile: cfg.profile.options(), ..Default::default() };
    let cells: Vec<A0Cell> = a0_map(cfg.problem.n, lambda, p_grid, e_grid, &opts)?;
    let values: Vec<f64> = cells.iter().filter_map(|c| c.a0).collect();
    let summary = A0Summary {
        lambda,
        cells: cells.len(),
        positive: values.iter().filter(|a| **a > 0.0).count(),
        failed: cells.iter().filter(|c| c.a0.is_none()).count(),
        min_a0: values.iter().cloned().reduce(f64::min),
    };
    let checks = vec![
        check("cells_failed", summary.failed as f64, 0.0, true),
        check("min_a0", summary.min_a0.unwrap_or(f64::NAN), 0.0, false),
    ];
    sink.csv("a0map.csv", cells)?;
    sink.report("a0map_report.json", "a0map", tolerances(cfg, None), checks, Some(summary), None)
}

#[derive(Serialize)]
struct ApproxRow {
    r: f64,
    rho: f64,
    ubar: f64,
    residual: f64,
}

#[derive(Serialize)]
struct ScalingRow {
    epsilon: f64,
    norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxSummary {
    pub fit: ScalingFit,
    pub expected_slope: f64,
    pub nu: f64,
}

pub fn approx(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate(false)?;
    let mut sink = Sink::new(cfg)?;
    let profile = profile_for(cfg)?;
    let spec = cfg.singular_spec()?;
    let weights = cfg.weights()?;
    let glued = Glued::new(&spec, &profile)?;
    let weight = spec.weight()?;
    let r_lo = 1e-3 * spec.epsilons[0];
    let r_hi = (2.5 * spec.r_cut).min(spec.domain.depth(&spec.points[0]));
    let m = cfg.approx.samples;
    let rows = (0..m).map(|k| {
        let r = r_lo * (r_hi / r_lo).powf(k as f64 / (m - 1) as f64);
        ApproxRow { r, rho: weight.of_distance(r), ubar: glued.radial_value(0, r), residual: glued.radial_residual(0, r) }
    });
    sink.csv("approx.csv", rows)?;
    let fit = scaling_study(&spec, &profile, &cfg.approx.epsilons, weights.nu)?;
    sink.csv(
        "scaling.csv",
        fit.epsilons.iter().zip(&fit.norms).map(|(e, f)| ScalingRow { epsilon: *e, norm: *f }),
    )?;
    let expected = profile.constants.mu_plus;
    let checks = vec![check("slope", (fit.slope / expected - 1.0).abs(), 0.1, true)];
    let summary = ApproxSummary { fit, expected_slope: expected, nu: weights.nu };
    sink.report("approx_report.json", "approx", tolerances(cfg, None), checks, Some(summary), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceRow {
    iteration: usize,
    v_norm: f64,
    step_norm: f64,
    ratio: Option<f64>,
    residual: f64,
}

/// One row of `solution.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub radius: f64,
    pub owner: usize,
    pub ubar: f64,
    pub v: f64,
    pub u: f64,
}

/// Body of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub converged: bool,
    pub report: Option<SolutionReport>,
    pub beta: f64,
    pub q: f64,
    pub ball_radius: f64,
    pub iterations: usize,
    /// Largest contraction ratio from the third iteration on.
    pub max_ratio_from_3: f64,
    /// `C^{0,α}_ν` norm of `v`.
    pub v_holder: Option<WeightedNormReport>,
}

fn field_grid(disc: &Discretization, values: Vec<f64>, gamma: f64) -> Result<GridField> {
    let layout = match disc.geometry {
        Geometry::Radial1d { .. } => Layout::Line,
        Geometry::Box3d { n, .. } => Layout::Block { dims: [n - 2; 3] },
    };
    Ok(GridField { layout, nodes: disc.nodes.clone(), rho: disc.rho.clone(), values, gamma })
}

fn holder_norm(cfg: &RunConfig, disc: &Discretization, v: &[f64], nu: f64) -> Result<WeightedNormReport> {
    let field = field_grid(disc, v.to_vec(), nu)?;
    let w = &cfg.weights;
    Ok(WeightedNormReport {
        sup_part: weighted_sup(&field, nu)?,
        holder_part: weighted_holder_seeded(&field, nu, w.alpha, w.pairs, w.seed)?,
        gamma: nu,
        alpha: w.alpha,
    })
}

fn trace_rows(trace: &IterationTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            iteration: r.iteration,
            v_norm: r.v_norm,
            step_norm: r.step_norm,
            ratio: r.ratio,
            residual: r.residual,
        })
        .collect()
}

fn solution_rows(disc: &Discretization, field: &SolutionField) -> Vec<SolutionRow> {
    (0..disc.unknowns())
        .map(|k| SolutionRow {
            index: k,
            x: disc.nodes[k][0],
            y: disc.nodes[k][1],
            z: disc.nodes[k][2],
            radius: field.radius[k],
            owner: field.owner[k],
            ubar: field.ubar[k],
            v: field.v[k],
            u: field.ubar[k] + field.v[k],
        })
        .collect()
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate(true)?;
    let mut sink = Sink::new(cfg)?;
    let profile = profile_for(cfg)?;
    let spec = cfg.singular_spec()?;
    let weights = cfg.weights()?;
    let disc = cfg.discretization()?;
    let opts = cfg.picard.options();
    let method = opts.method.unwrap_or_else(|| SolveMethod::default_for(&disc));
    let tol = tolerances(cfg, Some(method));
    let (trace, result) = picard_solve_traced(&spec, &profile, &weights, &disc, &opts);
    sink.csv("trace.csv", trace_rows(&trace))?;
    let mut output = SolveOutput {
        converged: trace.converged,
        report: None,
        beta: trace.beta,
        q: trace.q,
        ball_radius: trace.ball_radius,
        iterations: trace.records.len(),
        max_ratio_from_3: trace.max_ratio_from(3),
        v_holder: None,
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            sink.report("report.json", "solve", tol, Vec::new(), Some(output), Some(&e))?;
            return Err(e);
        }
    };
    sink.csv("solution.csv", solution_rows(&disc, &report.field))?;
    let ledger = verify_solution(&report, &disc, &profile, &spec, &cfg.verify)?;
    output.v_holder = Some(holder_norm(cfg, &disc, &report.field.v, weights.nu)?);
    let checks = ledger.checks;
    output.report = Some(report);
    sink.report("report.json", "solve", tol, checks, Some(output), None)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Re-checks a solve from its report and `solution.csv`.
pub fn verify(report_path: &Path, solution_path: Option<&Path>, out: Option<&Path>) -> Result<Outcome> {
    let env: Envelope<SolveOutput> = read_json(report_path)?;
    let mut cfg = env.config.clone();
    cfg.output.directory = Some(match out {
        Some(o) => o.to_path_buf(),
        None => report_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    });
    let mut report = env
        .result
        .and_then(|r| r.report)
        .ok_or_else(|| Error::Config(format!("{} holds no converged solution", report_path.display())))?;
    let solution_path = match solution_path {
        Some(p) => p.to_path_buf(),
        None => report_path.with_file_name("solution.csv"),
    };
    let mut reader = csv::Reader::from_path(&solution_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", solution_path.display())))?;
    let rows: Vec<SolutionRow> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("{}: {e}", solution_path.display())))?;

    let profile = profile_for(&cfg)?;
    let spec = cfg.singular_spec()?;
    let disc = cfg.discretization()?;
    if rows.len() != disc.unknowns() {
        return Err(Error::Config(format!(
            "{} has {} rows, the grid has {} unknowns",
            solution_path.display(),
            rows.len(),
            disc.unknowns()
        )));
    }
    let ubar = disc.sample_ubar(&spec, &profile)?;
    let u: Vec<f64> = rows.iter().map(|r| r.u).collect();
    let mut field_err: f64 = 0.0;
    for (row, ub) in rows.iter().zip(&ubar) {
        let scale = ub.abs().max(1e-300);
        field_err = field_err.max((row.ubar - ub).abs() / scale);
        field_err = field_err.max((row.ubar + row.v - row.u).abs() / row.u.abs().max(scale));
    }
    report.field = SolutionField {
        radius: disc.radius(&spec),
        owner: disc.owner.clone(),
        v: u.iter().zip(&ubar).map(|(a, b)| a - b).collect(),
        ubar,
    };
    let ledger = verify_solution(&report, &disc, &profile, &spec, &cfg.verify)?;
    let mut checks = vec![check("field_consistency", field_err, 1e-9, true)];
    checks.extend(ledger.checks.iter().cloned());
    let mut sink = Sink::new(&cfg)?;
    let method = cfg.picard.method.unwrap_or_else(|| SolveMethod::default_for(&disc));
    sink.report("verify_report.json", "verify", tolerances(&cfg, Some(method)), checks, Some(ledger), None)
}
