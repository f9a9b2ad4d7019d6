//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [problem]
//! horizon = 0.5
//! start_time = 0.0
//! start_state = [0.0]
//! u_actions = [-1.0, 1.0]
//! v_actions = [-1.0, 1.0]
//!
//! [problem.coefficients]
//! family = "bilinear"        # constant | affine | bilinear | bilinear_vol
//! kappa = 4.0
//! vol = 1.4142135623730951
//! dim = 1
//! noise_dim = 1
//!
//! [problem.payoff]
//! family = "cos"             # constant | cos | truncated_quadratic | tanh
//! amplitude = 1.0
//! frequency = 1.0
//! phase = 0.0
//!
//! [problem.priority]
//! family = "constant"        # constant | linear_time | logistic
//! value = 0.5
//!
//! [discretization]
//! intervals = 50             # partition size for single-level commands
//! block = 5                  # optional; defaults to round(sqrt(n))
//! quad_points = 5            # 3, 5 or 7
//! window = [-2.0, 2.0]       # compact window for gap reports
//! grid = { lower = -6.0, upper = 6.0, dx = 0.01 }
//! reference = { lower = -8.0, upper = 8.0, dx = 0.005 }
//! dt = { policy = "cfl", fraction = 1.0 }   # or { policy = "fixed", dt = 1e-4 }
//!
//! [run]
//! mode = "both"              # random | deterministic | both
//! seed = 7
//! paths = 10000
//! substeps = 4
//! keep_paths = 10
//! challengers = 0
//! samples = 100
//! levels = [25, 50, 100]
//! # epsilon = 0.2            # optional; defaults to the forced value
//!
//! [output]
//! dir = "out"                # optional; --out overrides
//! ```

use std::path::{Path, PathBuf};

use isaacs_core::pde::SpatialGrid;
use isaacs_core::ProblemSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub discretization: Discretization,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lower: f64,
    pub upper: f64,
    pub dx: f64,
}

impl GridSection {
    pub fn build(&self) -> CliResult<SpatialGrid> {
        Ok(SpatialGrid::with_spacing(self.lower, self.upper, self.dx)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum DtPolicy {
    /// A fraction of the largest stable explicit step.
    Cfl {
        fraction: f64,
    },
    Fixed {
        dt: f64,
    },
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Cfl { fraction: 1.0 }
    }
}

impl DtPolicy {
    pub fn resolve(&self, spec: &ProblemSpec, grid: &SpatialGrid) -> CliResult<f64> {
        match *self {
            DtPolicy::Cfl { fraction } => Ok(fraction * isaacs_core::cfl_max_dt(spec, grid)?),
            DtPolicy::Fixed { dt } => Ok(dt),
        }
    }
}

fn default_quad_points() -> usize {
    5
}

fn default_window() -> [f64; 2] {
    [-2.0, 2.0]
}

fn default_reference() -> GridSection {
    GridSection {
        lower: -8.0,
        upper: 8.0,
        dx: 0.005,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub intervals: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    pub grid: GridSection,
    #[serde(default = "default_reference")]
    pub reference: GridSection,
    #[serde(default)]
    pub dt: DtPolicy,
}

impl Discretization {
    /// Sub-grid block length for `n` intervals.
    pub fn block_for(&self, n: usize) -> usize {
        self.block
            .unwrap_or_else(|| ((n as f64).sqrt().round() as usize).max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Random,
    Deterministic,
    Both,
}

impl Mode {
    pub fn random(self) -> bool {
        matches!(self, Mode::Random | Mode::Both)
    }

    pub fn deterministic(self) -> bool {
        matches!(self, Mode::Deterministic | Mode::Both)
    }
}

fn default_paths() -> usize {
    10_000
}

fn default_substeps() -> usize {
    4
}

fn default_keep() -> usize {
    10
}

fn default_samples() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: Mode,
    pub seed: u64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_keep")]
    pub keep_paths: usize,
    #[serde(default)]
    pub challengers: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub levels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.problem.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.problem.dim() != 1 {
            return bad(format!(
                "only scalar states are supported, got dimension {}",
                self.problem.dim()
            ));
        }
        let d = &self.discretization;
        if d.intervals == 0 {
            return bad("discretization.intervals must be at least 1".into());
        }
        if d.block == Some(0) {
            return bad("discretization.block must be at least 1".into());
        }
        if ![3, 5, 7].contains(&d.quad_points) {
            return bad(format!(
                "discretization.quad_points must be 3, 5 or 7, got {}",
                d.quad_points
            ));
        }
        if !(d.window[0] <= d.window[1]) {
            return bad(format!("discretization.window {:?} is empty", d.window));
        }
        for (name, g) in [("grid", &d.grid), ("reference", &d.reference)] {
            g.build()
                .map_err(|e| CliError::Config(format!("discretization.{name}: {e}")))?;
        }
        match d.dt {
            DtPolicy::Cfl { fraction } if !(fraction > 0.0 && fraction <= 1.0) => {
                return bad(format!("cfl fraction must lie in (0, 1], got {fraction}"));
            }
            DtPolicy::Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => {
                return bad(format!("fixed dt must be positive, got {dt}"));
            }
            _ => {}
        }
        let r = &self.run;
        if r.seed > i64::MAX as u64 {
            return bad(format!("run.seed must not exceed {}", i64::MAX));
        }
        if r.paths == 0 || r.substeps == 0 || r.samples == 0 {
            return bad("run.paths, run.substeps and run.samples must be at least 1".into());
        }
        if r.levels.contains(&0) {
            return bad("refinement levels must be at least 1".into());
        }
        if let Some(eps) = r.epsilon {
            if !(eps > 0.0) {
                return bad(format!("run.epsilon must be positive, got {eps}"));
            }
        }
        if r.mode.deterministic() && !self.problem.priority.time_only() {
            return bad("deterministic marks need a time-only priority".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[problem]
horizon = 0.5
start_time = 0.0
start_state = [0.0]
u_actions = [-1.0, 1.0]
v_actions = [-1.0, 1.0]

[problem.coefficients]
family = "bilinear"
kappa = 4
vol = 1.4142135623730951
dim = 1
noise_dim = 1

[problem.payoff]
family = "cos"
amplitude = 1.0
frequency = 1.0
phase = 0.0

[problem.priority]
family = "linear_time"
intercept = 0.3
slope = 0.4

[discretization]
intervals = 10
grid = { lower = -6.0, upper = 6.0, dx = 0.05 }
dt = { policy = "fixed", dt = 1e-4 }

[run]
mode = "both"
seed = 3
levels = [5, 10]
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(
            c.problem,
            ProblemSpec::bilinear_benchmark(isaacs_core::PrioritySpec::LinearTime {
                intercept: 0.3,
                slope: 0.4
            })
        );
        assert_eq!(c.discretization.quad_points, 5);
        assert_eq!(c.discretization.window, [-2.0, 2.0]);
        assert_eq!(c.discretization.dt, DtPolicy::Fixed { dt: 1e-4 });
        assert_eq!(c.discretization.block_for(100), 10);
        assert_eq!(c.discretization.block_for(50), 7);
        assert_eq!(c.run.paths, 10_000);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_unknown_family_and_missing_seed() {
        let bad = SAMPLE.replace("\"bilinear\"", "\"quartic\"");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(CliError::Config(_))));
        let bad = SAMPLE.replace("seed = 3\n", "");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_state_dependent_priority_for_marks() {
        let bad = SAMPLE.replace(
            "family = \"linear_time\"\nintercept = 0.3\nslope = 0.4",
            "family = \"logistic\"\nlow = 0.2\nhigh = 0.8\nslope = 1.0\ncenter = 0.0",
        );
        let err = ExperimentConfig::from_toml(&bad).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn rejects_bad_quadrature() {
        let bad = SAMPLE.replace("intervals = 10", "intervals = 10\nquad_points = 4");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }
}
