//! Experiment configuration: a flat TOML document, CLI overrides, and
//! protocol defaults per problem.
//!
//! Keys (all optional unless noted):
//!
//! ```toml
//! kind = "converge"          # required: converge | efficiency | energy | stability | verify
//! problem = "duffing"        # required for converge, efficiency, energy
//! methods = ["SERKN2s3", "RKN2s3"]
//! h = [0.005, 0.0025]        # explicit schedule, strictly decreasing
//! h_base = 200               # or generated: h_i = 1 / (h_base * g(i)), i = 1..=h_count
//! h_growth = "linear"        # g(i) = i ("linear") or 2^i ("doubling")
//! h_count = 4
//! t_end = 10.0               # converge, efficiency
//! t_ends = [1.0, 10.0]       # energy
//! out_dir = "out"
//! n = 32                     # sine-gordon size
//! spacing = "1/N"            # or "2/N"
//! k = 0.03                   # duffing
//! a = 2.0                    # stellar
//! b = 1.0
//! eps = 1e-3
//! stage_tol = 1e-14
//! max_iters = 50
//! timing = true
//! reference_refinement = 20  # reference step h_min / reference_refinement
//! v_min = 0.5                # stability window
//! v_max = 50.0
//! z_min = -50.0
//! z_max = 50.0
//! nv = 400
//! nz = 401
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use erkn_core::problems::{ProblemParams, Spacing, PROBLEM_NAMES};
use erkn_core::{MethodTableau, SolveSettings, METHOD_NAMES};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Converge,
    Efficiency,
    Energy,
    Stability,
    Verify,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Converge => "converge",
            Kind::Efficiency => "efficiency",
            Kind::Energy => "energy",
            Kind::Stability => "stability",
            Kind::Verify => "verify",
        }
    }

    fn needs_problem(self) -> bool {
        matches!(self, Kind::Converge | Kind::Efficiency | Kind::Energy)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Growth {
    Linear,
    Doubling,
}

/// The document as written, every key optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub kind: Option<Kind>,
    pub problem: Option<String>,
    pub methods: Option<Vec<String>>,
    pub h: Option<Vec<f64>>,
    pub h_base: Option<f64>,
    pub h_growth: Option<Growth>,
    pub h_count: Option<usize>,
    pub t_end: Option<f64>,
    pub t_ends: Option<Vec<f64>>,
    pub out_dir: Option<PathBuf>,
    pub n: Option<usize>,
    pub spacing: Option<String>,
    pub k: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub eps: Option<f64>,
    pub stage_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub timing: Option<bool>,
    pub reference_refinement: Option<usize>,
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    pub nv: Option<usize>,
    pub nz: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl RawConfig {
    /// Keys set in `top` replace those in `self`.
    pub fn overlay(mut self, top: RawConfig) -> RawConfig {
        overlay!(self, top; kind, problem, methods, h, h_base, h_growth, h_count, t_end, t_ends,
            out_dir, n, spacing, k, a, b, eps, stage_tol, max_iters, timing, reference_refinement,
            v_min, v_max, z_min, z_max, nv, nz);
        self
    }
}

pub fn parse_config(text: &str) -> Result<RawConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("parse error: {e}")))
}

/// Read and parse a config file. An empty document is rejected with the list
/// of required keys.
pub fn load_config(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let raw = parse_config(&text)?;
    if raw == RawConfig::default() {
        return Err(CliError::Config(required_keys_message()));
    }
    Ok(raw)
}

fn required_keys_message() -> String {
    "config is empty; required keys: `kind` (converge | efficiency | energy | stability | verify), \
     `problem` (sine-gordon | duffing | stellar) for converge, efficiency and energy"
        .into()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSettings {
    pub n: usize,
    pub spacing: String,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
}

impl ProblemSettings {
    pub fn params(&self) -> ProblemParams {
        ProblemParams {
            n: self.n,
            spacing: if self.spacing == "2/N" { Spacing::TwoOverN } else { Spacing::OverN },
            k: self.k,
            a: self.a,
            b: self.b,
            eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityWindow {
    pub v_min: f64,
    pub v_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nv: usize,
    pub nz: usize,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub problem: Option<String>,
    pub methods: Vec<String>,
    pub h: Vec<f64>,
    pub t_end: f64,
    pub t_ends: Vec<f64>,
    pub out_dir: PathBuf,
    pub problem_settings: ProblemSettings,
    pub stage_tol: f64,
    pub max_iters: usize,
    pub timing: bool,
    pub reference_refinement: usize,
    pub stability: StabilityWindow,
}

/// `1 / (base * g(i))` for `i = 1..=count`.
pub fn generated_schedule(base: f64, growth: Growth, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|i| {
            let g = match growth {
                Growth::Linear => i as f64,
                Growth::Doubling => 2f64.powi(i as i32),
            };
            1.0 / (base * g)
        })
        .collect()
}

/// Step-size protocol of each experiment: `(base, growth)` for the
/// generated schedules, the fixed step for energy runs.
fn default_schedule(kind: Kind, problem: &str) -> Vec<f64> {
    let (base, growth) = match (kind, problem) {
        (Kind::Energy, "sine-gordon") => return vec![1.0 / 40.0],
        (Kind::Energy, "duffing") => return vec![1.0 / 50.0],
        (Kind::Energy, _) => return vec![1.0 / 10.0],
        (Kind::Efficiency, "sine-gordon") => (100.0, Growth::Doubling),
        (Kind::Efficiency, _) => (40.0, Growth::Linear),
        (_, "sine-gordon") => (20.0, Growth::Doubling),
        (_, "duffing") => (200.0, Growth::Linear),
        _ => (8.0, Growth::Linear),
    };
    generated_schedule(base, growth, 4)
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(format!("`{name}` must be positive and finite, got {x}")))
    }
}

impl ExperimentConfig {
    /// Fill defaults and validate.
    pub fn resolve(raw: RawConfig) -> Result<ExperimentConfig, CliError> {
        let kind = raw.kind.ok_or_else(|| invalid(required_keys_message()))?;
        let problem = match (&raw.problem, kind.needs_problem()) {
            (Some(p), _) => {
                if !PROBLEM_NAMES.contains(&p.as_str()) {
                    return Err(invalid(format!("unknown problem `{p}`; expected one of {PROBLEM_NAMES:?}")));
                }
                Some(p.clone())
            }
            (None, true) => return Err(invalid(format!("`problem` is required for {kind}"))),
            (None, false) => None,
        };

        let methods = raw.methods.clone().unwrap_or_else(|| METHOD_NAMES.iter().map(|s| s.to_string()).collect());
        if methods.is_empty() {
            return Err(invalid("`methods` is empty"));
        }
        for m in &methods {
            MethodTableau::by_name(m).map_err(|_| invalid(format!("unknown method `{m}`")))?;
        }

        let h = match (&raw.h, raw.h_base) {
            (Some(_), Some(_)) => return Err(invalid("give either `h` or `h_base`, not both")),
            (Some(list), None) => list.clone(),
            (None, Some(base)) => generated_schedule(
                positive("h_base", base)?,
                raw.h_growth.unwrap_or(Growth::Linear),
                raw.h_count.unwrap_or(4),
            ),
            (None, None) => problem.as_deref().map(|p| default_schedule(kind, p)).unwrap_or_default(),
        };
        for x in &h {
            positive("h", *x)?;
        }
        if h.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid(format!("h schedule must be strictly decreasing, got {h:?}")));
        }
        if kind.needs_problem() && h.is_empty() {
            return Err(invalid("h schedule is empty"));
        }
        if kind == Kind::Energy && h.len() != 1 {
            return Err(invalid("energy runs take a single step size `h`"));
        }

        let t_end = positive("t_end", raw.t_end.unwrap_or(10.0))?;
        let t_ends = raw.t_ends.clone().unwrap_or_else(|| vec![1.0, 10.0, 100.0, 1000.0]);
        for t in &t_ends {
            positive("t_ends", *t)?;
        }
        if t_ends.is_empty() || t_ends.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid(format!("`t_ends` must be non-empty and strictly increasing, got {t_ends:?}")));
        }

        let defaults = ProblemParams::default();
        let spacing = raw.spacing.clone().unwrap_or_else(|| defaults.spacing.label().to_string());
        if spacing != "1/N" && spacing != "2/N" {
            return Err(invalid(format!("`spacing` must be \"1/N\" or \"2/N\", got `{spacing}`")));
        }
        let problem_settings = ProblemSettings {
            n: raw.n.unwrap_or(defaults.n),
            spacing,
            k: raw.k.unwrap_or(defaults.k),
            a: raw.a.unwrap_or(defaults.a),
            b: raw.b.unwrap_or(defaults.b),
            eps: raw.eps.unwrap_or(defaults.eps),
        };
        if problem_settings.n < 2 {
            return Err(invalid("`n` must be at least 2"));
        }
        if !(0.0..10.0).contains(&problem_settings.k) {
            return Err(invalid(format!("`k` must lie in [0, 10), got {}", problem_settings.k)));
        }
        positive("a", problem_settings.a)?;
        positive("b", problem_settings.b)?;

        let stability = StabilityWindow {
            v_min: raw.v_min.unwrap_or(0.5),
            v_max: raw.v_max.unwrap_or(50.0),
            z_min: raw.z_min.unwrap_or(-50.0),
            z_max: raw.z_max.unwrap_or(50.0),
            nv: raw.nv.unwrap_or(400),
            nz: raw.nz.unwrap_or(401),
        };
        positive("v_min", stability.v_min)?;
        if !(stability.v_max > stability.v_min) || !(stability.z_max > stability.z_min) {
            return Err(invalid("stability window must have v_min < v_max and z_min < z_max"));
        }
        if stability.nv < 2 || stability.nz < 2 {
            return Err(invalid("`nv` and `nz` must be at least 2"));
        }

        let refinement = raw.reference_refinement.unwrap_or(20);
        if refinement < 2 {
            return Err(invalid("`reference_refinement` must be at least 2"));
        }

        Ok(ExperimentConfig {
            kind,
            problem,
            methods,
            h,
            t_end,
            t_ends,
            out_dir: raw.out_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            problem_settings,
            stage_tol: positive("stage_tol", raw.stage_tol.unwrap_or(SolveSettings::DEFAULT_STAGE_TOL))?,
            max_iters: raw.max_iters.unwrap_or(SolveSettings::DEFAULT_MAX_ITERS).max(1),
            timing: raw.timing.unwrap_or(true),
            reference_refinement: refinement,
            stability,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::resolve(parse_config(text)?)
    }

    #[test]
    fn duffing_defaults() {
        let cfg = resolve("kind = \"converge\"\nproblem = \"duffing\"\nmethods = [\"SERKN2s3\"]").unwrap();
        let want = [1.0 / 200.0, 1.0 / 400.0, 1.0 / 600.0, 1.0 / 800.0];
        assert_eq!(cfg.h, want);
        assert_eq!(cfg.t_end, 10.0);
        assert_eq!(cfg.methods, vec!["SERKN2s3"]);
    }

    #[test]
    fn protocol_presets() {
        let e = resolve("kind = \"efficiency\"\nproblem = \"sine-gordon\"").unwrap();
        assert_eq!(e.h[0], 1.0 / 200.0);
        assert_eq!(e.h[3], 1.0 / 1600.0);
        let c = resolve("kind = \"converge\"\nproblem = \"sine-gordon\"").unwrap();
        assert_eq!(c.h, generated_schedule(20.0, Growth::Doubling, 4));
        let s = resolve("kind = \"converge\"\nproblem = \"stellar\"").unwrap();
        assert_eq!(s.h[0], 1.0 / 8.0);
        let g = resolve("kind = \"energy\"\nproblem = \"stellar\"").unwrap();
        assert_eq!((g.h.clone(), g.t_ends.clone()), (vec![0.1], vec![1.0, 10.0, 100.0, 1000.0]));
        assert_eq!(s.methods.len(), METHOD_NAMES.len());
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(resolve(""), Err(CliError::Config(m)) if m.contains("kind")));
        assert!(resolve("kind = \"converge\"").is_err());
        assert!(resolve("kind = \"converge\"\nproblem = \"duffing\"\nh = [0.01, 0.02]").is_err());
        assert!(resolve("kind = \"converge\"\nproblem = \"kepler\"").is_err());
        assert!(resolve("kind = \"verify\"\nmethods = [\"RK4\"]").is_err());
        assert!(resolve("kind = \"verify\"\ncolour = 1").is_err());
        assert!(resolve("kind = \"energy\"\nproblem = \"duffing\"\nh = [0.1, 0.05]").is_err());
        let err = resolve("kind = \"verify\"\nn = ").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn overlay_prefers_top() {
        let base = parse_config("kind = \"converge\"\nproblem = \"duffing\"\nk = 0.5").unwrap();
        let top = RawConfig { k: Some(1.0), ..Default::default() };
        let cfg = ExperimentConfig::resolve(base.overlay(top)).unwrap();
        assert_eq!(cfg.problem_settings.k, 1.0);
        assert_eq!(cfg.problem.as_deref(), Some("duffing"));
    }
}
