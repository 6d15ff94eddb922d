//! JSON task configuration and flag overrides.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use optask::solvers::SolverOptions;
use optask::urdf::parse_urdf;
use optask::RobotModel;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Model name given to the robot inside every formulation.
pub const ROBOT: &str = "robot";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    /// Path to a URDF file or `builtin:<name>`.
    pub urdf: String,
    /// Root link of the chain; the URDF root when absent.
    pub base: Option<String>,
    pub tip: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub dt: f64,
    pub optimize_time: bool,
    pub goal: GoalConfig,
    pub obstacles: Vec<Obstacle>,
    /// Seed for end-pose solves and initial configuration for plans; zero
    /// when absent.
    pub start: Option<Vec<f64>>,
    /// Nominal configuration of the regularizer; `start` when absent.
    pub nominal: Option<Vec<f64>>,
    /// Weight of `||q - nominal||^2` in end-pose problems. Zero by default:
    /// weights far below the goal cost only add a slow drift along the
    /// self-motion of redundant arms and delay convergence.
    pub regularization: f64,
    /// Weight of the joint-velocity cost in plans.
    pub effort: f64,
    /// Weight of the total duration in plans with free time steps; the
    /// effort cost alone shrinks without bound as the steps grow.
    pub time_weight: f64,
    /// Largest end-effector position error counted as reaching the goal.
    pub goal_tolerance: f64,
    /// Largest final tip error of a plan counted as reaching the goal.
    pub plan_tolerance: f64,
    /// Deterministic random restarts after a failed end-pose solve.
    pub restarts: usize,
    pub seed: u64,
    pub solver: String,
    pub options: OptionsConfig,
    pub track: TrackConfig,
    pub dims: DimsConfig,
    pub out: Option<PathBuf>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            urdf: "builtin:planar_2r".into(),
            base: None,
            tip: "ee".into(),
            horizon: 1,
            dt: 0.1,
            optimize_time: false,
            goal: GoalConfig::default(),
            obstacles: Vec::new(),
            start: None,
            nominal: None,
            regularization: 0.0,
            effort: 1e-4,
            time_weight: 1e-2,
            goal_tolerance: 1e-6,
            plan_tolerance: 1e-2,
            restarts: 8,
            seed: 0,
            solver: "sqp".into(),
            options: OptionsConfig::default(),
            track: TrackConfig::default(),
            dims: DimsConfig::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GoalConfig {
    pub position: [f64; 3],
    /// Extrinsic roll, pitch, yaw of the tip frame.
    pub rpy: Option<[f64; 3]>,
}

impl Default for GoalConfig {
    fn default() -> Self {
        GoalConfig { position: [2.0, 0.0, 0.0], rpy: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: [f64; 3],
    pub radius: f64,
}

/// Overrides of [`SolverOptions`]; absent fields keep the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptionsConfig {
    pub max_iter: Option<usize>,
    pub step_tol: Option<f64>,
    pub kkt_tol: Option<f64>,
    pub armijo: Option<f64>,
    pub backtrack: Option<f64>,
    pub max_backtracks: Option<usize>,
    pub qp_rho: Option<f64>,
    pub qp_sigma: Option<f64>,
    pub qp_alpha: Option<f64>,
    pub qp_max_iter: Option<usize>,
    pub qp_eps_abs: Option<f64>,
    pub qp_eps_rel: Option<f64>,
}

impl OptionsConfig {
    /// Apply the overrides on top of `base`.
    pub fn apply(&self, base: SolverOptions) -> SolverOptions {
        let mut o = base;
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src { o.$($dst).+ = v; })*
            };
        }
        set!(
            max_iter => max_iter,
            step_tol => step_tol,
            kkt_tol => kkt_tol,
            armijo => armijo,
            backtrack => backtrack,
            max_backtracks => max_backtracks,
            qp_rho => qp.rho,
            qp_sigma => qp.sigma,
            qp_alpha => qp.alpha,
            qp_max_iter => qp.max_iter,
            qp_eps_abs => qp.eps_abs,
            qp_eps_rel => qp.eps_rel,
        );
        o
    }
}

/// Figure-of-eight path `center + (a sin(2 pi s), b sin(4 pi s), 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackConfig {
    pub center: [f64; 3],
    pub a: f64,
    pub b: f64,
    pub waypoints: usize,
    /// Weight of the manipulability reward; zero disables it.
    pub manipulability_weight: f64,
    /// Seed every waypoint from `start` instead of the previous solution.
    pub cold_start: bool,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            center: [1.2, 0.0, 0.0],
            a: 0.3,
            b: 0.15,
            waypoints: 100,
            manipulability_weight: 0.0,
            cold_start: false,
        }
    }
}

/// Reach sweep: goals at `origin + fraction * reach * direction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimsConfig {
    pub origin: [f64; 3],
    pub direction: [f64; 3],
    pub reach: f64,
    pub fractions: Vec<f64>,
    /// Tip orientation demanded by the full-pose mode.
    pub rpy: [f64; 3],
    /// Largest orientation error (Frobenius norm) counted as reached.
    pub orientation_tolerance: f64,
}

impl Default for DimsConfig {
    fn default() -> Self {
        DimsConfig {
            origin: [0.0, 0.0, 0.3],
            direction: [1.0, 0.0, 0.0],
            reach: 0.85,
            fractions: vec![0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 1.05],
            rpy: [0.0, std::f64::consts::FRAC_PI_2, 0.0],
            orientation_tolerance: 1e-6,
        }
    }
}

/// Flag values that take precedence over the JSON document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub urdf: Option<String>,
    pub tip: Option<String>,
    pub base: Option<String>,
    pub horizon: Option<usize>,
    pub dt: Option<f64>,
    pub solver: Option<String>,
    pub out: Option<PathBuf>,
}

impl TaskConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.urdf {
            self.urdf = v.clone();
        }
        if let Some(v) = &o.tip {
            self.tip = v.clone();
        }
        if let Some(v) = &o.base {
            self.base = Some(v.clone());
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(v) = o.dt {
            self.dt = v;
        }
        if let Some(v) = &o.solver {
            self.solver = v.clone();
        }
        if let Some(v) = &o.out {
            self.out = Some(v.clone());
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Input(m.to_string()));
        if self.horizon < 1 {
            return bad("T must be at least 1");
        }
        if !self.optimize_time && !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.obstacles.iter().any(|o| !(o.radius > 0.0)) {
            return bad("obstacle radius must be positive");
        }
        if !(self.regularization >= 0.0) || !(self.effort >= 0.0) || !(self.time_weight >= 0.0) {
            return bad("cost weights must be non-negative");
        }
        if self.optimize_time && !(self.time_weight > 0.0) {
            return bad("optimize_time needs a positive time_weight");
        }
        if !(self.goal_tolerance > 0.0) || !(self.plan_tolerance > 0.0) {
            return bad("goal tolerances must be positive");
        }
        self.solver_options().validate().map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn solver_options(&self) -> SolverOptions {
        self.options.apply(SolverOptions::default())
    }

    pub fn urdf_document(&self) -> Result<String, CliError> {
        if let Some(doc) = optask::fixtures::builtin(&self.urdf) {
            return Ok(doc.to_string());
        }
        std::fs::read_to_string(&self.urdf).map_err(|e| CliError::Input(format!("cannot read {}: {e}", self.urdf)))
    }

    /// Robot with the state orders in `orders`, rooted at `base` when given.
    pub fn robot(&self, orders: &[usize]) -> Result<RobotModel, CliError> {
        let urdf = parse_urdf(&self.urdf_document()?).map_err(|e| CliError::Input(format!("{}: {e}", self.urdf)))?;
        let robot = match &self.base {
            Some(base) => RobotModel::with_base(ROBOT, urdf, base, orders),
            None => RobotModel::new(ROBOT, urdf, orders),
        }
        .map_err(|e| CliError::Input(e.to_string()))?;
        if !robot.has_link(&self.tip) {
            return Err(CliError::Input(format!("unknown tip link `{}`", self.tip)));
        }
        Ok(robot)
    }

    /// `values` as a configuration of `n` joints, zero when absent.
    pub fn joint_vector(&self, values: Option<&Vec<f64>>, n: usize, what: &str) -> Result<DVector<f64>, CliError> {
        match values {
            None => Ok(DVector::zeros(n)),
            Some(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
            Some(v) => Err(CliError::Input(format!("{what} has {} entries, robot has {n} joints", v.len()))),
        }
    }
}
