//! JSON run configuration.
//!
//! Every section has defaults, so `{"problem": {"N": 3, "p": 4}}` is a full
//! config. [`RunConfig::validate`] checks everything that can be checked
//! without running a solver.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_point::{BetaChoice, PicardOptions, VerifyTolerances};
use crate::glue::{Domain, SingularSpec};
use crate::linear_solve::{Discretization, SolveMethod};
use crate::params::{derive_constants, select_weights, DerivedConstants, ProblemParams, WeightSelection, WeightStrategy};
use crate::radial_profile::ProfileOptions;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "EMDEN_GLUE_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemParams,
    #[serde(default)]
    pub profile: ProfileSection,
    /// Singular set; `None` means one point at the center of the unit ball.
    #[serde(default)]
    pub spec: Option<SingularSpec>,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub disc: DiscSection,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub approx: ApproxSection,
    #[serde(default)]
    pub verify: VerifyTolerances,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub tol: f64,
    pub t_min: Option<f64>,
    pub t_max: f64,
    pub spacing: f64,
    /// Shift the orbit so that `sup_{t ≤ 0} v₁ ≤ alpha`.
    pub normalize_alpha: Option<f64>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        let d = ProfileOptions::default();
        Self { tol: d.tol, t_min: d.t_min, t_max: d.t_max, spacing: d.spacing, normalize_alpha: None }
    }
}

impl ProfileSection {
    pub fn options(&self) -> ProfileOptions {
        ProfileOptions { tol: self.tol, t_min: self.t_min, t_max: self.t_max, spacing: self.spacing, ..Default::default() }
    }
}

/// `"default"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NuChoice {
    Named(NamedNu),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedNu {
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    pub nu: NuChoice,
    /// Hölder exponent for reported `C^{0,α}` norms.
    pub alpha: f64,
    pub pairs: usize,
    pub seed: u64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self {
            nu: NuChoice::Named(NamedNu::Default),
            alpha: 0.5,
            pairs: crate::weighted_norms::DEFAULT_PAIRS,
            seed: crate::weighted_norms::DEFAULT_SEED,
        }
    }
}

impl WeightsSection {
    pub fn strategy(&self) -> WeightStrategy {
        match self.nu {
            NuChoice::Named(NamedNu::Default) => WeightStrategy::Default,
            NuChoice::Value(v) => WeightStrategy::Explicit(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscMode {
    Radial1d,
    Box3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscSection {
    /// `None` follows the domain: ball gives radial1d, box gives box3d.
    pub mode: Option<DiscMode>,
    /// Innermost radius of radial grids in units of `ε`.
    pub r_min_factor: f64,
    /// Outer radius of radial grids; defaults to the ball radius.
    pub r_out: Option<f64>,
    /// Log spacing of radial grids.
    pub h: f64,
    /// Nodes per side of box grids.
    pub grid_n: usize,
}

impl Default for DiscSection {
    fn default() -> Self {
        Self { mode: None, r_min_factor: 1e-10, r_out: None, h: 0.02, grid_n: 65 }
    }
}

/// `"auto"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaConfig {
    Named(NamedBeta),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedBeta {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSection {
    pub stop_tol: f64,
    pub max_iter: usize,
    pub beta: BetaConfig,
    /// Right-inverse solver; `None` picks the grid default.
    pub method: Option<SolveMethod>,
}

impl Default for PicardSection {
    fn default() -> Self {
        let d = PicardOptions::default();
        Self { stop_tol: d.stop_tol, max_iter: d.max_iter, beta: BetaConfig::Named(NamedBeta::Auto), method: None }
    }
}

impl PicardSection {
    pub fn options(&self) -> PicardOptions {
        PicardOptions {
            stop_tol: self.stop_tol,
            max_iter: self.max_iter,
            beta: match self.beta {
                BetaConfig::Named(NamedBeta::Auto) => BetaChoice::Auto,
                BetaConfig::Value(b) => BetaChoice::Fixed(b),
            },
            method: self.method,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApproxSection {
    /// Scales for the residual scaling study.
    pub epsilons: Vec<f64>,
    /// Radial samples written to `approx.csv`.
    pub samples: usize,
}

impl Default for ApproxSection {
    fn default() -> Self {
        Self { epsilons: vec![0.05, 0.025, 0.0125], samples: 2001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Falls back to `$EMDEN_GLUE_OUT`, then `out`.
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: None, formats: vec![Format::Csv, Format::Json] }
    }
}

impl RunConfig {
    /// Config with defaults everywhere except the problem.
    pub fn for_problem(n: usize, p: f64) -> Self {
        Self {
            problem: ProblemParams { n, p },
            profile: Default::default(),
            spec: None,
            weights: Default::default(),
            disc: Default::default(),
            picard: Default::default(),
            approx: Default::default(),
            verify: Default::default(),
            output: Default::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn constants(&self) -> Result<DerivedConstants> {
        derive_constants(&ProblemParams::new(self.problem.n, self.problem.p)?)
    }

    pub fn weights(&self) -> Result<WeightSelection> {
        select_weights(&self.constants()?, self.weights.strategy())
    }

    /// The configured singular set, or one point at the center of the unit ball.
    pub fn singular_spec(&self) -> Result<SingularSpec> {
        match &self.spec {
            Some(s) => Ok(s.clone()),
            None => SingularSpec::centered_ball(self.problem.n, 0.05, 0.4, 1.0),
        }
    }

    pub fn disc_mode(&self) -> Result<DiscMode> {
        let spec = self.singular_spec()?;
        let natural = match spec.domain {
            Domain::Ball { .. } => DiscMode::Radial1d,
            Domain::Box { .. } => DiscMode::Box3d,
        };
        Ok(self.disc.mode.unwrap_or(natural))
    }

    pub fn discretization(&self) -> Result<Discretization> {
        let spec = self.singular_spec()?;
        let disc = match self.disc_mode()? {
            DiscMode::Radial1d => {
                let radius = match spec.domain {
                    Domain::Ball { radius, .. } => radius,
                    Domain::Box { .. } => {
                        return Err(Error::Config("radial1d needs a ball domain".into()));
                    }
                };
                let r_out = self.disc.r_out.unwrap_or(radius);
                Discretization::radial1d(self.problem.n, self.disc.r_min_factor * spec.max_epsilon(), r_out, self.disc.h)?
            }
            DiscMode::Box3d => Discretization::box3d(&spec, self.disc.grid_n)?,
        };
        disc.check_compatible(&spec)?;
        Ok(disc)
    }

    /// Output directory: config, then `$EMDEN_GLUE_OUT`, then `out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .directory
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }

    /// Checks that need no solver run. `full` also builds the grid.
    pub fn validate(&self, full: bool) -> Result<()> {
        let constants = self.constants()?;
        let p = &self.profile;
        if !(p.tol > 0.0 && p.spacing > 0.0 && p.t_max.is_finite()) {
            return Err(Error::Config("profile needs positive tol and spacing and a finite t_max".into()));
        }
        if let Some(a) = p.normalize_alpha {
            if !(a > 0.0) {
                return Err(Error::Config(format!("normalize_alpha = {a} must be positive")));
            }
        }
        select_weights(&constants, self.weights.strategy())?;
        if !(self.weights.alpha > 0.0 && self.weights.alpha < 1.0) {
            return Err(Error::Config(format!("Hölder alpha = {} must lie in (0, 1)", self.weights.alpha)));
        }
        let spec = self.singular_spec()?;
        spec.validate()?;
        if spec.domain.dim() != self.problem.n {
            return Err(Error::Config(format!(
                "spec domain has dimension {} but N = {}",
                spec.domain.dim(),
                self.problem.n
            )));
        }
        let d = &self.disc;
        if !(d.r_min_factor > 0.0 && d.r_min_factor <= 1e-3) {
            return Err(Error::Config(format!("r_min_factor = {} must lie in (0, 1e-3]", d.r_min_factor)));
        }
        if !(d.h > 0.0) {
            return Err(Error::Config(format!("h = {} must be positive", d.h)));
        }
        let mode = self.disc_mode()?;
        if mode == DiscMode::Box3d && self.problem.n != 3 {
            return Err(Error::Config("box3d needs N = 3".into()));
        }
        let pc = &self.picard;
        if !(pc.stop_tol > 0.0) || pc.max_iter == 0 {
            return Err(Error::Config("picard needs stop_tol > 0 and max_iter > 0".into()));
        }
        if let BetaConfig::Value(b) = pc.beta {
            if !(b > 0.0) {
                return Err(Error::Config(format!("beta = {b} must be positive")));
            }
        }
        if self.approx.epsilons.len() < 3 || self.approx.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("approx needs at least three positive epsilons".into()));
        }
        if self.approx.samples < 2 {
            return Err(Error::Config("approx needs at least two samples".into()));
        }
        if full {
            self.discretization()?;
        }
        Ok(())
    }
}
