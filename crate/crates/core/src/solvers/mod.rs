//! Solver lifecycle over built problems.
//!
//! A [`SolverSession`] owns a shared [`Problem`], the current initial seed
//! and parameter values, and an adapter chosen by tag. Adapters implement
//! three behaviors (setup with options, solve returning `X*`, statistics)
//! and declare which problem classes they accept. Built-in tags:
//!
//! * `"bfgs"`: damped quasi-Newton with Armijo backtracking, unconstrained
//!   problems only.
//! * `"qp"`: operator-splitting QP, quadratic cost with linear constraints.
//! * `"sqp"`: sequential quadratic programming, any class.

pub mod bfgs;
pub mod linalg;
pub mod qp;
pub mod sqp;

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::container::ContainerError;
use crate::expr::NamedValues;
use crate::problem::{FeasibilityReport, Problem, ProblemClass, ProblemError};

pub use bfgs::BfgsAdapter;
pub use qp::{QpAdapter, QpSettings};
pub use sqp::SqpAdapter;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("unknown solver `{0}`")]
    UnknownSolver(String),
    #[error("solver `{solver}` does not accept {class} problems")]
    Incompatible { solver: String, class: ProblemClass },
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("setup has not been called")]
    NotSetUp,
    #[error("no solve has run yet")]
    NeverSolved,
    #[error("interpolation: {0}")]
    Interpolation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Convergence tolerance on the step infinity-norm.
    pub step_tol: f64,
    /// KKT and feasibility tolerance.
    pub kkt_tol: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub qp: QpSettings,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 100,
            step_tol: 1e-8,
            kkt_tol: 1e-6,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
            qp: QpSettings::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidOption(m.to_string()));
        let positive = [
            ("step_tol", self.step_tol),
            ("kkt_tol", self.kkt_tol),
            ("armijo", self.armijo),
            ("qp.rho", self.qp.rho),
            ("qp.sigma", self.qp.sigma),
            ("qp.eps_abs", self.qp.eps_abs),
            ("qp.eps_rel", self.qp.eps_rel),
            ("qp.eps_infeasible", self.qp.eps_infeasible),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad(&format!("backtrack must lie in (0, 1), got {}", self.backtrack));
        }
        if self.armijo >= 1.0 {
            return bad("armijo must be below 1");
        }
        if !(self.qp.alpha > 0.0 && self.qp.alpha < 2.0) {
            return bad(&format!("qp.alpha must lie in (0, 2), got {}", self.qp.alpha));
        }
        if self.max_iter == 0 || self.qp.max_iter == 0 || self.qp.check_every == 0 {
            return bad("iteration limits must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed,
    NonFinite,
    Infeasible,
    Unbounded,
    Other(String),
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Converged => f.write_str("converged"),
            Termination::MaxIterations => f.write_str("maximum iterations reached"),
            Termination::LineSearchFailed => f.write_str("line search failed"),
            Termination::NonFinite => f.write_str("non-finite value in evaluation"),
            Termination::Infeasible => f.write_str("infeasible"),
            Termination::Unbounded => f.write_str("unbounded"),
            Termination::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    pub iterations: usize,
    pub objective_history: Vec<f64>,
    pub step_history: Vec<f64>,
    pub duration: Duration,
}

/// What an adapter hands back from a solve.
#[derive(Debug, Clone)]
pub struct AdapterOutput {
    pub x: DVector<f64>,
    pub converged: bool,
    pub reason: Termination,
    pub iterations: usize,
}

pub trait SolverAdapter: Send {
    fn name(&self) -> &str;
    fn accepts(&self, class: ProblemClass) -> bool;
    fn setup(&mut self, problem: &Problem, options: &SolverOptions) -> Result<(), SolverError>;
    fn solve(&mut self, problem: &Problem, x0: &DVector<f64>, p: &DVector<f64>) -> Result<AdapterOutput, SolverError>;
    /// Statistics of the last solve, if the adapter keeps any.
    fn stats(&self) -> Option<Stats> {
        None
    }
}

pub type AdapterFactory = Arc<dyn Fn() -> Box<dyn SolverAdapter> + Send + Sync>;

/// Tag to adapter factory.
#[derive(Clone)]
pub struct SolverRegistry {
    factories: IndexMap<String, AdapterFactory>,
}

impl Default for SolverRegistry {
    fn default() -> Self {
        let mut r = SolverRegistry { factories: IndexMap::new() };
        r.register("bfgs", Arc::new(|| Box::new(BfgsAdapter::default())));
        r.register("qp", Arc::new(|| Box::new(QpAdapter::default())));
        r.register("sqp", Arc::new(|| Box::new(SqpAdapter::default())));
        r
    }
}

impl fmt::Debug for SolverRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry { factories: IndexMap::new() }
    }

    pub fn register(&mut self, tag: &str, factory: AdapterFactory) {
        self.factories.insert(tag.to_string(), factory);
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, tag: &str) -> Result<Box<dyn SolverAdapter>, SolverError> {
        self.factories.get(tag).map(|f| f()).ok_or_else(|| SolverError::UnknownSolver(tag.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Converged and feasible to the KKT tolerance.
    pub success: bool,
    pub x: NamedValues,
    pub x_flat: DVector<f64>,
    pub objective: f64,
    pub feasibility: FeasibilityReport,
    pub iterations: usize,
    pub duration: Duration,
    pub reason: Termination,
}

impl Solution {
    pub fn block(&self, name: &str) -> Option<&DMatrix<f64>> {
        self.x.get(name)
    }
}

pub struct SolverSession {
    problem: Arc<Problem>,
    registry: SolverRegistry,
    adapter: Option<Box<dyn SolverAdapter>>,
    options: SolverOptions,
    seed: DVector<f64>,
    params: DVector<f64>,
    last_stats: Option<Stats>,
}

impl SolverSession {
    pub fn new(problem: Arc<Problem>) -> Self {
        Self::with_registry(problem, SolverRegistry::default())
    }

    pub fn with_registry(problem: Arc<Problem>, registry: SolverRegistry) -> Self {
        let (nx, np) = (problem.n_x(), problem.n_p());
        SolverSession {
            problem,
            registry,
            adapter: None,
            options: SolverOptions::default(),
            seed: DVector::zeros(nx),
            params: DVector::zeros(np),
            last_stats: None,
        }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    /// Select the adapter by tag and prepare it.
    pub fn setup(&mut self, tag: &str, options: SolverOptions) -> Result<(), SolverError> {
        options.validate()?;
        let mut adapter = self.registry.create(tag)?;
        let class = self.problem.classification();
        if !adapter.accepts(class) {
            return Err(SolverError::Incompatible { solver: tag.to_string(), class });
        }
        adapter.setup(&self.problem, &options)?;
        self.adapter = Some(adapter);
        self.options = options;
        self.last_stats = None;
        Ok(())
    }

    /// Replace the seed; blocks not named are zero.
    pub fn reset_initial_seed(&mut self, values: &NamedValues) -> Result<(), SolverError> {
        self.seed = self.problem.decision().vectorize(values)?;
        Ok(())
    }

    pub fn reset_initial_seed_flat(&mut self, x: DVector<f64>) -> Result<(), SolverError> {
        if x.len() != self.problem.n_x() {
            return Err(ContainerError::LengthMismatch { expected: self.problem.n_x(), got: x.len() }.into());
        }
        self.seed = x;
        Ok(())
    }

    /// Replace all parameters; blocks not named are zero.
    pub fn reset_parameters(&mut self, values: &NamedValues) -> Result<(), SolverError> {
        self.params = self.problem.parameters().vectorize(values)?;
        Ok(())
    }

    pub fn seed(&self) -> &DVector<f64> {
        &self.seed
    }

    pub fn parameters(&self) -> &DVector<f64> {
        &self.params
    }

    pub fn solve(&mut self) -> Result<Solution, SolverError> {
        let adapter = self.adapter.as_mut().ok_or(SolverError::NotSetUp)?;
        let start = Instant::now();
        let out = adapter.solve(&self.problem, &self.seed, &self.params)?;
        let duration = start.elapsed();

        let mut stats = adapter.stats().unwrap_or_default();
        stats.duration = duration;
        self.last_stats = Some(stats);

        let tol = self.options.kkt_tol;
        let (objective, feasibility) = match (
            self.problem.objective(&out.x, &self.params),
            self.problem.feasibility(&out.x, &self.params, tol),
        ) {
            (Ok(f), Ok(r)) => (f, r),
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        };
        let finite = objective.is_finite() && out.x.iter().all(|v| v.is_finite());
        let success = out.converged && finite && feasibility.is_feasible();
        let reason = if !finite { Termination::NonFinite } else { out.reason };
        Ok(Solution {
            success,
            x: self.problem.decision().devectorize(&out.x)?,
            x_flat: out.x,
            objective,
            feasibility,
            iterations: out.iterations,
            duration,
            reason,
        })
    }

    pub fn stats(&self) -> Result<Stats, SolverError> {
        self.last_stats.clone().ok_or(SolverError::NeverSolved)
    }
}

/// Piecewise-linear resampling of the columns of `block` (one column per
/// entry of `grid`, strictly increasing) at `query` times.
pub fn interpolate_columns(block: &DMatrix<f64>, grid: &[f64], query: &[f64]) -> Result<DMatrix<f64>, SolverError> {
    let err = |m: String| Err(SolverError::Interpolation(m));
    if grid.len() != block.ncols() {
        return err(format!("grid has {} points for {} columns", grid.len(), block.ncols()));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return err("grid must be non-empty and strictly increasing".into());
    }
    let (t0, t1) = (grid[0], grid[grid.len() - 1]);
    let mut out = DMatrix::zeros(block.nrows(), query.len());
    for (j, &t) in query.iter().enumerate() {
        if !(t >= t0 && t <= t1) {
            return err(format!("query time {t} outside [{t0}, {t1}]"));
        }
        let k = grid.partition_point(|&g| g <= t);
        let col = if k == 0 {
            block.column(0).into_owned()
        } else if grid[k - 1] == t || k == grid.len() {
            block.column(k - 1).into_owned()
        } else {
            let w = (t - grid[k - 1]) / (grid[k] - grid[k - 1]);
            block.column(k - 1) * (1.0 - w) + block.column(k) * w
        };
        out.set_column(j, &col);
    }
    Ok(out)
}

/// [`interpolate_columns`] on the named block of a solution.
pub fn interpolate(sol: &Solution, block: &str, grid: &[f64], query: &[f64]) -> Result<DMatrix<f64>, SolverError> {
    let m = sol.block(block).ok_or_else(|| SolverError::Interpolation(format!("no block `{block}`")))?;
    interpolate_columns(m, grid, query)
}

/// Evenly spaced grid `0, dt, 2 dt, ...` with `n` points.
pub fn uniform_grid(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * dt).collect()
}
