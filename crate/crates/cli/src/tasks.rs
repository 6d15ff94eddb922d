//! Example formulations: end-pose IK, obstacle-avoiding plans, path tracking
//! and the reach sweep.

use std::sync::Arc;
use std::time::Duration;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use optask::expr::{leaf_block, named_values, Function, LeafKind};
use optask::kinematics::spatial::rpy_to_matrix;
use optask::solvers::{Solution, SolverOptions, SolverSession};
use optask::{Expr, OptimizationBuilder, Problem, RobotModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{TaskConfig, ROBOT};
use crate::CliError;

const Q: &str = "robot/q";
const DQ: &str = "robot/dq";

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

/// Numeric forward kinematics of one tip link.
pub struct TipKinematics {
    f: Function,
    jac: Function,
    n: usize,
}

impl TipKinematics {
    pub fn new(robot: &RobotModel, tip: &str) -> Result<Self, CliError> {
        let n = robot.ndof();
        let q = leaf_block("q", LeafKind::Variable, n, 1);
        let t = robot.global_link_transform(tip, &q).map_err(internal)?;
        let j = robot.geometric_jacobian(tip, &q).map_err(internal)?;
        Ok(TipKinematics {
            f: Function::new(&[&q], &[&t]).map_err(internal)?,
            jac: Function::new(&[&q], &[&j]).map_err(internal)?,
            n,
        })
    }

    pub fn ndof(&self) -> usize {
        self.n
    }

    /// Position and rotation of the tip.
    pub fn pose(&self, q: &DVector<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        let t = &self.f.eval(q.as_slice()).expect("input length matches ndof")[0];
        (t.fixed_view::<3, 1>(0, 3).into_owned(), t.fixed_view::<3, 3>(0, 0).into_owned())
    }

    pub fn position(&self, q: &DVector<f64>) -> Vector3<f64> {
        self.pose(q).0
    }

    /// Geometric Jacobian, linear rows first.
    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.jac.eval(q.as_slice()).expect("input length matches ndof").remove(0)
    }

    /// `sqrt(det(J J'))` over the selected Jacobian rows.
    pub fn manipulability(&self, q: &DVector<f64>, rows: &[usize]) -> f64 {
        let j = self.jacobian(q).select_rows(rows);
        (&j * j.transpose()).determinant().max(0.0).sqrt()
    }

    /// Linear Jacobian rows that are not identically zero, probed at
    /// deterministic configurations.
    pub fn active_position_rows(&self) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let probes: Vec<DMatrix<f64>> = (0..4)
            .map(|_| self.jacobian(&DVector::from_fn(self.n, |_, _| rng.gen_range(-1.0..1.0))))
            .collect();
        (0..3).filter(|&r| probes.iter().any(|j| j.row(r).amax() > 1e-9)).collect()
    }
}

/// Finite joint limits, usable as a sampling box.
fn sampling_box(robot: &RobotModel) -> (DVector<f64>, DVector<f64>) {
    let (lo, hi) = robot.finite_limits();
    let lo = lo.map(|v| v.max(-std::f64::consts::PI));
    let hi = hi.map(|v| v.min(std::f64::consts::PI));
    (lo, hi)
}

/// What the end-pose problem asks of the tip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseMode {
    Position,
    Pose,
}

/// End-pose problem: `||p(q) - goal||^2`, optionally `||R(q) - R*||_F^2`,
/// plus `scale ||q - nominal||^2` and an optional manipulability reward,
/// subject to joint limits.
pub struct EndPose {
    session: SolverSession,
    kin: TipKinematics,
    robot: RobotModel,
    mode: PoseMode,
    tolerance: f64,
    orientation_tolerance: f64,
}

/// Result of an end-pose solve, possibly after restarts.
#[derive(Debug, Clone)]
pub struct EndPoseOutcome {
    pub q: DVector<f64>,
    /// Solver success and goal reached within tolerance.
    pub reached: bool,
    pub solver_success: bool,
    pub position_error: f64,
    pub orientation_error: f64,
    pub objective: f64,
    /// Iterations of the last attempt.
    pub iterations: usize,
    /// Iterations summed over all attempts.
    pub total_iterations: usize,
    pub attempts: usize,
    pub duration: Duration,
    pub reason: String,
}

impl EndPose {
    pub fn new(
        cfg: &TaskConfig,
        mode: PoseMode,
        manipulability_weight: f64,
        options: SolverOptions,
    ) -> Result<Self, CliError> {
        let robot = cfg.robot(&[0])?;
        let kin = TipKinematics::new(&robot, &cfg.tip)?;
        let n = robot.ndof();
        let mut b = OptimizationBuilder::new(1, &[robot.clone()], &[], true, false).map_err(internal)?;
        let q = b.get_model_state(ROBOT, 0, 0).map_err(internal)?;
        let goal = b.add_parameter("goal", 3, 1).map_err(internal)?;
        let nominal = b.add_parameter("nominal", n, 1).map_err(internal)?;
        let scale = b.add_parameter("scale", 1, 1).map_err(internal)?;
        let p = robot.global_link_position(&cfg.tip, &q).map_err(internal)?;
        b.add_cost_term("position", &(&p - &goal).sumsqr()).map_err(internal)?;
        if mode == PoseMode::Pose {
            let target = b.add_parameter("rotation", 3, 3).map_err(internal)?;
            let r = robot.global_link_rotation(&cfg.tip, &q).map_err(internal)?;
            b.add_cost_term("orientation", &(&r - &target).sumsqr()).map_err(internal)?;
        }
        b.add_cost_term("regularizer", &(&scale * &(&q - &nominal).sumsqr())).map_err(internal)?;
        if manipulability_weight > 0.0 {
            let rows = kin.active_position_rows();
            let m = robot.manipulability(&cfg.tip, &q, &rows).map_err(internal)?;
            b.add_cost_term("manipulability", &m.scale(-manipulability_weight)).map_err(internal)?;
        }
        b.enforce_model_limits(ROBOT).map_err(internal)?;
        let problem = b.build().map_err(internal)?;
        let mut session = SolverSession::new(Arc::new(problem));
        session.setup(&cfg.solver, options).map_err(|e| CliError::Input(e.to_string()))?;
        Ok(EndPose {
            session,
            kin,
            robot,
            mode,
            tolerance: cfg.goal_tolerance,
            orientation_tolerance: cfg.dims.orientation_tolerance,
        })
    }

    pub fn problem(&self) -> &Problem {
        self.session.problem()
    }

    pub fn kinematics(&self) -> &TipKinematics {
        &self.kin
    }

    pub fn robot(&self) -> &RobotModel {
        &self.robot
    }

    /// One solve from `seed`.
    pub fn solve_once(
        &mut self,
        goal: &Vector3<f64>,
        rotation: Option<&Matrix3<f64>>,
        nominal: &DVector<f64>,
        scale: f64,
        seed: &DVector<f64>,
    ) -> Result<(Solution, EndPoseOutcome), CliError> {
        let n = self.kin.ndof();
        let mut params = named_values([
            ("goal", DMatrix::from_column_slice(3, 1, goal.as_slice())),
            ("nominal", DMatrix::from_column_slice(n, 1, nominal.as_slice())),
            ("scale", DMatrix::from_element(1, 1, scale)),
        ]);
        if self.mode == PoseMode::Pose {
            let r = rotation.ok_or_else(|| CliError::Input("full-pose mode needs an orientation".into()))?;
            params.insert("rotation".into(), DMatrix::from_column_slice(3, 3, r.as_slice()));
        }
        let solver = |e: optask::solvers::SolverError| CliError::Solver(e.to_string());
        self.session.reset_parameters(&params).map_err(solver)?;
        self.session
            .reset_initial_seed(&named_values([(Q, DMatrix::from_column_slice(n, 1, seed.as_slice()))]))
            .map_err(solver)?;
        let sol = self.session.solve().map_err(solver)?;
        let q = sol.block(Q).expect("state block exists").column(0).into_owned();
        let (p, r) = self.kin.pose(&q);
        let position_error = (p - goal).norm();
        let orientation_error = rotation.map_or(0.0, |target| (r - target).norm());
        let reached = sol.success
            && position_error <= self.tolerance
            && (self.mode == PoseMode::Position || orientation_error <= self.orientation_tolerance);
        let outcome = EndPoseOutcome {
            q,
            reached,
            solver_success: sol.success,
            position_error,
            orientation_error,
            objective: sol.objective,
            iterations: sol.iterations,
            total_iterations: sol.iterations,
            attempts: 1,
            duration: sol.duration,
            reason: sol.reason.to_string(),
        };
        Ok((sol, outcome))
    }

    /// Solve from `seed`, then from up to `restarts` random configurations
    /// drawn from `rng` until the goal is reached. Returns the reached
    /// attempt, or else the converged attempt with the lowest objective.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &mut self,
        goal: &Vector3<f64>,
        rotation: Option<&Matrix3<f64>>,
        nominal: &DVector<f64>,
        scale: f64,
        seed: &DVector<f64>,
        restarts: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<EndPoseOutcome, CliError> {
        let (lo, hi) = sampling_box(&self.robot);
        let mut best: Option<EndPoseOutcome> = None;
        let mut total = 0;
        let mut duration = Duration::ZERO;
        for attempt in 0..=restarts {
            let start = if attempt == 0 {
                seed.clone()
            } else {
                DVector::from_fn(seed.len(), |i, _| rng.gen_range(lo[i]..=hi[i]))
            };
            let (_, out) = self.solve_once(goal, rotation, nominal, scale, &start)?;
            total += out.iterations;
            duration += out.duration;
            let better = match &best {
                None => true,
                Some(b) => out.rank() < b.rank(),
            };
            if better {
                best = Some(EndPoseOutcome { attempts: attempt + 1, ..out });
            }
            if best.as_ref().is_some_and(|b| b.reached) {
                break;
            }
        }
        let mut best = best.expect("at least one attempt");
        best.total_iterations = total;
        best.duration = duration;
        Ok(best)
    }
}

impl EndPoseOutcome {
    fn rank(&self) -> (bool, bool, f64) {
        (!self.reached, !self.solver_success, self.objective)
    }
}

pub fn goal_rotation(cfg: &TaskConfig) -> Option<Matrix3<f64>> {
    cfg.goal.rpy.map(rpy_matrix)
}

pub fn rpy_matrix(rpy: [f64; 3]) -> Matrix3<f64> {
    let e = rpy_to_matrix(&Expr::column(&rpy)).expect("3-vector").to_matrix().expect("constant");
    Matrix3::from_fn(|r, c| e[(r, c)])
}

/// End-pose solve of `cfg.goal` with restarts.
pub fn inverse_kinematics(cfg: &TaskConfig) -> Result<EndPoseOutcome, CliError> {
    cfg.validate()?;
    if cfg.horizon != 1 {
        return Err(CliError::Input(format!("ik needs T = 1, got {}", cfg.horizon)));
    }
    let rotation = goal_rotation(cfg);
    let mode = if rotation.is_some() { PoseMode::Pose } else { PoseMode::Position };
    let mut task = EndPose::new(cfg, mode, 0.0, end_pose_options(cfg))?;
    let n = task.kinematics().ndof();
    let seed = cfg.joint_vector(cfg.start.as_ref(), n, "start")?;
    let nominal = cfg.joint_vector(cfg.nominal.as_ref().or(cfg.start.as_ref()), n, "nominal")?;
    let goal = Vector3::from(cfg.goal.position);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    task.solve(&goal, rotation.as_ref(), &nominal, cfg.regularization, &seed, cfg.restarts, &mut rng)
}

/// Solver options for end-pose problems: KKT tolerance `1e-10` so
/// near-singular goals still converge to `1e-6` in position, and a step
/// tolerance below it so the step test does not stop Gauss-Newton early.
/// Solver options for plans: a larger iteration budget, config overrides on top.
pub fn plan_options(cfg: &TaskConfig) -> SolverOptions {
    cfg.options.apply(SolverOptions { max_iter: 300, ..SolverOptions::default() })
}

pub fn end_pose_options(cfg: &TaskConfig) -> SolverOptions {
    cfg.options.apply(SolverOptions { kkt_tol: 1e-10, step_tol: 1e-14, ..SolverOptions::default() })
}

/// Post-solve audit of a plan against its constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanAudit {
    /// Largest violation over all constraint blocks.
    pub max_violation: f64,
    /// Largest `|q_{t+1} - q_t - dt_t dq_t|`.
    pub dynamics_residual: f64,
    /// Smallest `||p_t - c|| - r` over steps and obstacles.
    pub clearance: f64,
    pub limit_violation: f64,
    pub initial_error: f64,
    pub final_error: f64,
}

#[derive(Debug, Clone)]
pub struct PlanReport {
    /// Solver converged and the final tip error is within `plan_tolerance`.
    pub success: bool,
    pub solver_success: bool,
    pub reason: String,
    pub times: Vec<f64>,
    pub q: DMatrix<f64>,
    pub dq: DMatrix<f64>,
    pub iterations: usize,
    pub audit: PlanAudit,
}

/// Collision-free plan over `cfg.horizon` steps: final-pose cost, effort
/// cost, initial configuration, joint limits, Euler dynamics and spherical
/// clearance of the tip at every step.
pub fn plan(cfg: &TaskConfig) -> Result<PlanReport, CliError> {
    cfg.validate()?;
    let t = cfg.horizon;
    if t < 2 {
        return Err(CliError::Input(format!("plan needs T >= 2, got {t}")));
    }
    let robot = cfg.robot(&[0, 1])?;
    let n = robot.ndof();
    let kin = TipKinematics::new(&robot, &cfg.tip)?;
    let start = cfg.joint_vector(cfg.start.as_ref(), n, "start")?;

    let mut b = OptimizationBuilder::new(t, &[robot.clone()], &[], false, cfg.optimize_time).map_err(internal)?;
    let q = b.get_model_states(ROBOT, 0).map_err(internal)?;
    let dq = b.get_model_states(ROBOT, 1).map_err(internal)?;
    let q0 = b.add_parameter("initial", n, 1).map_err(internal)?;
    let goal = b.add_parameter("goal", 3, 1).map_err(internal)?;
    let tip = |i: usize| robot.global_link_position(&cfg.tip, &q.column_at(i)).map_err(internal);
    b.add_cost_term("goal", &(&tip(t - 1)? - &goal).sumsqr()).map_err(internal)?;
    let dt_expr = match b.get_dt() {
        Some(dt) => dt,
        None => Expr::constant(cfg.dt),
    };
    let effort = if cfg.optimize_time {
        let mut acc = Expr::constant(0.0);
        for c in 0..t - 1 {
            let step = dq.column_at(c).sumsqr().try_elem_mul(&dt_expr.elem(c)).map_err(internal)?;
            acc = &acc + &step;
        }
        acc.scale(cfg.effort)
    } else {
        dq.sumsqr().scale(cfg.effort * cfg.dt)
    };
    b.add_cost_term("effort", &effort).map_err(internal)?;
    if cfg.optimize_time {
        b.add_cost_term("duration", &dt_expr.sum().scale(cfg.time_weight)).map_err(internal)?;
    }
    b.add_equality_constraint("initial", q.column_at(0), &q0).map_err(internal)?;
    b.enforce_model_limits(ROBOT).map_err(internal)?;
    b.integrate_model_states(ROBOT, 1, dt_expr).map_err(internal)?;
    for (k, o) in cfg.obstacles.iter().enumerate() {
        let c = Expr::column(&o.center);
        for i in 0..t {
            let d = (&tip(i)? - &c).sumsqr();
            b.add_geq_inequality_constraint(&format!("obstacle{k}/{i}"), d, o.radius * o.radius)
                .map_err(internal)?;
        }
    }
    let problem = b.build().map_err(internal)?;
    let mut session = SolverSession::new(Arc::new(problem));
    session.setup(&cfg.solver, plan_options(cfg)).map_err(|e| CliError::Input(e.to_string()))?;
    let solver = |e: optask::solvers::SolverError| CliError::Solver(e.to_string());
    let goal_v = Vector3::from(cfg.goal.position);
    session
        .reset_parameters(&named_values([
            ("initial", DMatrix::from_column_slice(n, 1, start.as_slice())),
            ("goal", DMatrix::from_column_slice(3, 1, goal_v.as_slice())),
        ]))
        .map_err(solver)?;
    let audit_ctx = PlanContext { cfg, robot: &robot, kin: &kin, start: &start, goal: goal_v };
    let mut run = |target: &DVector<f64>| -> Result<PlanReport, CliError> {
        let span = ((t - 1) as f64 * cfg.dt).max(f64::MIN_POSITIVE);
        let mut seed = named_values([
            (Q, DMatrix::from_fn(n, t, |r, c| start[r] + (target[r] - start[r]) * c as f64 / (t - 1) as f64)),
            (DQ, DMatrix::from_fn(n, t - 1, |r, _| (target[r] - start[r]) / span)),
        ]);
        if cfg.optimize_time {
            seed.insert(optask::builder::DT_BLOCK.into(), DMatrix::from_element(1, t - 1, cfg.dt));
        }
        session.reset_initial_seed(&seed).map_err(solver)?;
        let sol = session.solve().map_err(solver)?;
        Ok(audit_ctx.report(&sol))
    };
    let mut best = run(&start)?;
    if best.success || !best.solver_success || cfg.restarts == 0 {
        return Ok(best);
    }
    // Converged away from the goal: reseed toward distinct
    // inverse-kinematics solutions of it.
    let ik_cfg = TaskConfig { horizon: 1, ..cfg.clone() };
    let mut ik = EndPose::new(&ik_cfg, PoseMode::Position, 0.0, end_pose_options(&ik_cfg))?;
    let (lo, hi) = sampling_box(&robot);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut targets: Vec<DVector<f64>> = Vec::new();
    for attempt in 0..cfg.restarts {
        let ik_seed = if attempt == 0 { start.clone() } else { DVector::from_fn(n, |i, _| rng.gen_range(lo[i]..=hi[i])) };
        let (_, out) = ik.solve_once(&goal_v, None, &start, cfg.regularization, &ik_seed)?;
        if !out.reached || targets.iter().any(|q| (q - &out.q).amax() < 1e-3) {
            continue;
        }
        let report = run(&out.q)?;
        targets.push(out.q);
        let better = (report.success && !best.success)
            || (report.success == best.success && report.audit.final_error < best.audit.final_error);
        if better {
            best = report;
        }
        if best.success {
            break;
        }
    }
    Ok(best)
}

struct PlanContext<'a> {
    cfg: &'a TaskConfig,
    robot: &'a RobotModel,
    kin: &'a TipKinematics,
    start: &'a DVector<f64>,
    goal: Vector3<f64>,
}

impl PlanContext<'_> {
    fn report(&self, sol: &Solution) -> PlanReport {
        let (cfg, robot, kin, start, goal_v) = (self.cfg, self.robot, self.kin, self.start, self.goal);
        let (n, t) = (robot.ndof(), cfg.horizon);
        let qm = sol.block(Q).expect("state block").clone();
        let dqm = sol.block(DQ).expect("velocity block").clone();
        let steps: Vec<f64> = match sol.block(optask::builder::DT_BLOCK) {
            Some(d) => d.iter().copied().collect(),
            None => vec![cfg.dt; t - 1],
        };
        let mut times = vec![0.0];
        for s in &steps {
            times.push(times.last().unwrap() + s);
        }

        let mut dynamics_residual = 0.0f64;
        for i in 0..t - 1 {
            let r = qm.column(i + 1) - qm.column(i) - dqm.column(i) * steps[i];
            dynamics_residual = dynamics_residual.max(r.amax());
        }
        let mut clearance = f64::INFINITY;
        for i in 0..t {
            let p = kin.position(&qm.column(i).into_owned());
            for o in &cfg.obstacles {
                clearance = clearance.min((p - Vector3::from(o.center)).norm() - o.radius);
            }
        }
        let (lo, hi) = (robot.lower_limits(), robot.upper_limits());
        let vel = robot.velocity_limits();
        let mut limit_violation = 0.0f64;
        for i in 0..t {
            for r in 0..n {
                limit_violation = limit_violation.max(lo[r] - qm[(r, i)]).max(qm[(r, i)] - hi[r]);
                if i < t - 1 {
                    limit_violation = limit_violation.max(dqm[(r, i)].abs() - vel[r]);
                }
            }
        }
        let final_error = (kin.position(&qm.column(t - 1).into_owned()) - goal_v).norm();
        let audit = PlanAudit {
            max_violation: sol.feasibility.max_violation(),
            dynamics_residual,
            clearance,
            limit_violation,
            initial_error: (qm.column(0) - start).amax(),
            final_error,
        };
        let success = sol.success && final_error <= cfg.plan_tolerance;
        let reason = if sol.success && !success {
            format!("goal missed by {final_error:.3e}")
        } else {
            sol.reason.to_string()
        };
        PlanReport { success, solver_success: sol.success, reason, times, q: qm, dq: dqm, iterations: sol.iterations, audit }
    }
}

/// Figure-of-eight waypoint at phase `s` in `[0, 1]`.
pub fn figure_eight(center: [f64; 3], a: f64, b: f64, s: f64) -> Vector3<f64> {
    let tau = std::f64::consts::TAU;
    Vector3::new(center[0] + a * (tau * s).sin(), center[1] + b * (2.0 * tau * s).sin(), center[2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRow {
    pub waypoint: usize,
    pub position_error: f64,
    pub solve_ms: f64,
    pub iterations: usize,
    pub manipulability: f64,
}

#[derive(Debug, Clone)]
pub struct TrackReport {
    pub rows: Vec<TrackRow>,
    /// Set when a waypoint failed; rows hold the waypoints before it.
    pub failure: Option<String>,
}

impl TrackReport {
    pub fn mean_error(&self) -> f64 {
        self.rows.iter().map(|r| r.position_error).sum::<f64>() / self.rows.len().max(1) as f64
    }

    pub fn mean_manipulability(&self) -> f64 {
        self.rows.iter().map(|r| r.manipulability).sum::<f64>() / self.rows.len().max(1) as f64
    }
}

/// Receding sequence of end-pose solves along the figure-of-eight. Each
/// solve is regularized toward, and unless `cold_start` seeded from, the
/// previous solution.
pub fn track(cfg: &TaskConfig) -> Result<TrackReport, CliError> {
    cfg.validate()?;
    let tc = &cfg.track;
    if tc.waypoints < 2 {
        return Err(CliError::Input("track needs at least 2 waypoints".into()));
    }
    let mut task = EndPose::new(cfg, PoseMode::Position, tc.manipulability_weight, cfg.solver_options())?;
    let n = task.kinematics().ndof();
    let rows_m = task.kinematics().active_position_rows();
    let start = cfg.joint_vector(cfg.start.as_ref(), n, "start")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut previous = start.clone();
    let mut rows = Vec::with_capacity(tc.waypoints);
    for w in 0..tc.waypoints {
        let s = w as f64 / (tc.waypoints - 1) as f64;
        let goal = figure_eight(tc.center, tc.a, tc.b, s);
        let seed = if tc.cold_start { start.clone() } else { previous.clone() };
        let out = task.solve(&goal, None, &previous, cfg.regularization, &seed, cfg.restarts, &mut rng)?;
        if !out.solver_success {
            return Ok(TrackReport { rows, failure: Some(format!("waypoint {w}: {}", out.reason)) });
        }
        rows.push(TrackRow {
            waypoint: w,
            position_error: out.position_error,
            solve_ms: out.duration.as_secs_f64() * 1e3,
            iterations: out.total_iterations,
            manipulability: task.kinematics().manipulability(&out.q, &rows_m),
        });
        previous = out.q;
    }
    Ok(TrackReport { rows, failure: None })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimsRow {
    pub fraction: f64,
    pub distance: f64,
    pub position_reached: bool,
    pub position_error: f64,
    pub pose_reached: bool,
    pub pose_position_error: f64,
    pub pose_orientation_error: f64,
}

/// Reach sweep comparing position-only goals with full-pose goals of fixed
/// orientation.
pub fn dims(cfg: &TaskConfig) -> Result<Vec<DimsRow>, CliError> {
    cfg.validate()?;
    let dc = &cfg.dims;
    let dir = Vector3::from(dc.direction);
    if !(dir.norm() > 0.0) || !(dc.reach > 0.0) {
        return Err(CliError::Input("dims needs a non-zero direction and positive reach".into()));
    }
    let dir = dir.normalize();
    let rotation = rpy_matrix(dc.rpy);
    let options = end_pose_options(cfg);
    let mut position = EndPose::new(cfg, PoseMode::Position, 0.0, options.clone())?;
    let mut pose = EndPose::new(cfg, PoseMode::Pose, 0.0, options)?;
    let n = position.kinematics().ndof();
    let seed = cfg.joint_vector(cfg.start.as_ref(), n, "start")?;
    let nominal = cfg.joint_vector(cfg.nominal.as_ref().or(cfg.start.as_ref()), n, "nominal")?;
    let mut rows = Vec::new();
    for (i, &fraction) in dc.fractions.iter().enumerate() {
        let distance = fraction * dc.reach;
        let goal = Vector3::from(dc.origin) + dir * distance;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
        let a = position.solve(&goal, None, &nominal, cfg.regularization, &seed, cfg.restarts, &mut rng)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
        let b = pose.solve(&goal, Some(&rotation), &nominal, cfg.regularization, &seed, cfg.restarts, &mut rng)?;
        rows.push(DimsRow {
            fraction,
            distance,
            position_reached: a.reached,
            position_error: a.position_error,
            pose_reached: b.reached,
            pose_position_error: b.position_error,
            pose_orientation_error: b.orientation_error,
        });
    }
    Ok(rows)
}
