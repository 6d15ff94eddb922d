//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always print; exits non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector3};
use optask::expr::{self, leaf_block, Expr, Function, LeafKind};
use optask::fixtures::PLANAR_2R_URDF;
use optask::problem::{ConstraintKind, ProblemClass};
use optask::solvers::qp::{self, QpProblem, QpSettings, QpStatus};
use optask::solvers::{SolverOptions, SolverSession};
use optask::{OptimizationBuilder, RobotModel};
use optask_cli::config::{Obstacle, TaskConfig};
use optask_cli::tasks::{self, end_pose_options, EndPose, PoseMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    let d = (a - b).abs();
    d <= abs || d <= rel * a.abs().max(b.abs())
}

/// Central differences of a column-valued function.
fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let m = f(x).len();
    let mut j = DMatrix::zeros(m, x.len());
    for k in 0..x.len() {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[k] += h;
        xm[k] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        for i in 0..m {
            j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    j
}

fn eval_flat(f: &Function, x: &[f64]) -> Vec<f64> {
    f.eval(x).unwrap().remove(0).as_slice().to_vec()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale))
}

fn ac1_kinematics() -> Outcome {
    let t0 = Instant::now();
    let robot = RobotModel::from_urdf_str("r", PLANAR_2R_URDF, &[0]).unwrap();
    let q = leaf_block("q", LeafKind::Variable, 2, 1);
    let p = robot.global_link_position("ee", &q).unwrap();
    let jg = robot.geometric_jacobian("ee", &q).unwrap().block(0, 0, 3, 2);
    let jad = expr::jacobian(&p, &q).unwrap();
    let f = Function::new(&[&q], &[&p, &jg, &jad]).unwrap();
    let fk = Function::new(&[&q], &[&p]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut fk_err, mut jac_err) = (0.0f64, 0.0f64);
    let mut jac_ok = true;
    for _ in 0..1000 {
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let out = f.eval(&x).unwrap();
        let want = [x[0].cos() + (x[0] + x[1]).cos(), x[0].sin() + (x[0] + x[1]).sin(), 0.0];
        fk_err = out[0].iter().zip(want).fold(fk_err, |m, (a, b)| m.max((a - b).abs()));
        let fd = fd_jacobian(&|y| eval_flat(&fk, y), &x, 1e-7);
        for ((g, a), n) in out[1].iter().zip(out[2].iter()).zip(fd.iter()) {
            jac_ok &= close(*g, *a, 1e-6, 1e-12) && close(*g, *n, 1e-6, 1e-8);
            jac_err = jac_err.max((g - n).abs());
        }
    }
    let elapsed = t0.elapsed();
    check(
        fk_err <= 1e-12 && jac_ok && elapsed < Duration::from_secs(5),
        format!("fk max error {fk_err:.1e}, jacobian vs fd {jac_err:.1e}, {elapsed:.2?}"),
    )
}

/// Random smooth scalar over the elements of `x`, domain-restricted
/// operations fed positive arguments.
fn random_expr(rng: &mut ChaCha8Rng, x: &Expr, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.8) { x.elem(rng.gen_range(0..x.len())) } else { Expr::constant(rng.gen_range(-2.0..2.0)) };
    }
    let a = random_expr(rng, x, depth - 1);
    match rng.gen_range(0..10) {
        0 => &a + &random_expr(rng, x, depth - 1),
        1 => &a * &random_expr(rng, x, depth - 1),
        2 => &a / &(random_expr(rng, x, depth - 1).sumsqr() + 2.0),
        3 => a.sin(),
        4 => a.cos(),
        5 => (a.sumsqr() + 1.0).sqrt(),
        6 => (&a * 0.5).cos().exp(),
        7 => (a.sumsqr() + 1.0).ln(),
        8 => (&a * 0.4).tan(),
        _ => a.try_atan2(&(random_expr(rng, x, depth - 1).sumsqr() + 1.0)).unwrap(),
    }
}

fn ac2_derivatives() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let (mut worst, mut failures) = (0.0f64, 0);
    for _ in 0..25 {
        let n = rng.gen_range(2..=4);
        let x = leaf_block("x", LeafKind::Variable, n, 1);
        let outs: Vec<Expr> = (0..3).map(|_| random_expr(&mut rng, &x, 4)).collect();
        let v = Expr::vcat(&outs.iter().collect::<Vec<_>>()).unwrap();
        let s = &outs[0];
        let g = expr::gradient(s, &x).unwrap();
        let h = expr::hessian(s, &x).unwrap();
        let j = expr::jacobian(&v, &x).unwrap();
        let fs = Function::new(&[&x], &[s]).unwrap();
        let fv = Function::new(&[&x], &[&v]).unwrap();
        let fg = Function::new(&[&x], &[&g]).unwrap();
        let fd = Function::new(&[&x], &[&g, &h, &j]).unwrap();
        let pt: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ad = fd.eval(&pt).unwrap();
        let pairs = [
            (ad[0].clone(), fd_jacobian(&|y| eval_flat(&fs, y), &pt, 1e-6).transpose()),
            (ad[1].clone(), fd_jacobian(&|y| eval_flat(&fg, y), &pt, 1e-6)),
            (ad[2].clone(), fd_jacobian(&|y| eval_flat(&fv, y), &pt, 1e-6)),
        ];
        let mut ok = true;
        for (a, b) in &pairs {
            for (x, y) in a.iter().zip(b.iter()) {
                ok &= close(*x, *y, 1e-6, 1e-8);
                worst = worst.max((x - y).abs() / x.abs().max(1.0));
            }
        }
        failures += usize::from(!ok);
    }
    check(failures == 0, format!("25 fixtures, {failures} mismatched, worst scaled error {worst:.1e}"))
}

/// Obstacle plan on the planar arm, optionally with free time steps so that
/// every constraint kind appears.
fn obstacle_plan(t: usize, optimize_time: bool) -> OptimizationBuilder {
    let robot = RobotModel::from_urdf_str("arm", PLANAR_2R_URDF, &[0, 1]).unwrap();
    let mut b = OptimizationBuilder::new(t, &[robot.clone()], &[], false, optimize_time).unwrap();
    let q = b.get_model_states("arm", 0).unwrap();
    let dq = b.get_model_states("arm", 1).unwrap();
    let q0 = b.add_parameter("q_init", 2, 1).unwrap();
    let goal = b.add_parameter("goal", 3, 1).unwrap();
    let centre = b.add_parameter("obstacle", 3, 1).unwrap();
    let radius = b.add_parameter("radius", 1, 1).unwrap();
    let p_end = robot.global_link_position("ee", &q.column_at(t - 1)).unwrap();
    b.add_cost_term("goal", &(&p_end - &goal).sumsqr()).unwrap();
    b.add_cost_term("effort", &dq.sumsqr().scale(0.01)).unwrap();
    b.add_equality_constraint("init", q.column_at(0), &q0).unwrap();
    b.enforce_model_limits("arm").unwrap();
    let dt = b.get_dt().unwrap_or_else(|| Expr::constant(0.1));
    b.integrate_model_states("arm", 1, dt).unwrap();
    for i in 0..t {
        let p = robot.global_link_position("ee", &q.column_at(i)).unwrap();
        b.add_geq_inequality_constraint(&format!("clear/{i}"), (&p - &centre).sumsqr(), &radius * &radius).unwrap();
    }
    b
}

fn ac3_transcription() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst, mut curvature) = (0.0f64, 0.0f64);
    let mut kinds = std::collections::BTreeSet::new();
    for optimize_time in [false, true] {
        let b = obstacle_plan(5, optimize_time);
        let problem = b.build().unwrap();
        let s = problem.symbolic();
        let costs: Vec<&Expr> = b.costs().values().collect();
        let cost_fn = Function::new(&[&s.x, &s.p], &costs).unwrap();
        let cons: Vec<&Expr> = b.constraints().values().map(|c| &c.expr).collect();
        let con_fn = Function::new(&[&s.x, &s.p], &cons).unwrap();
        let info = |name: &str| problem.constraint_index().iter().find(|i| i.name == name).unwrap().clone();
        for _ in 0..100 {
            let x = random_vec(&mut rng, problem.n_x(), 2.0);
            let p = random_vec(&mut rng, problem.n_p(), 2.0);
            let inp: Vec<f64> = x.iter().chain(p.iter()).copied().collect();
            let want: f64 = cost_fn.eval(&inp).unwrap().iter().map(|m| m[(0, 0)]).sum();
            worst = worst.max((want - problem.objective(&x, &p).unwrap()).abs() / want.abs().max(1.0));
            let values = problem.constraints(&x, &p).unwrap();
            for ((name, _), user) in b.constraints().iter().zip(con_fn.eval(&inp).unwrap()) {
                let i = info(name);
                kinds.insert(format!("{:?}", i.kind));
                let part = match i.kind {
                    ConstraintKind::LinearInequality => &values.k,
                    ConstraintKind::LinearEquality => &values.a,
                    ConstraintKind::NonlinearInequality => &values.g,
                    ConstraintKind::NonlinearEquality => &values.h,
                };
                for (g, w) in part.rows(i.rows.start, i.rows.len()).iter().zip(user.iter()) {
                    worst = worst.max((g - w).abs() / w.abs().max(1.0));
                }
            }
        }
        // Linear rows: exact zero Hessian and zero second differences.
        let linear: Vec<&Expr> = b
            .constraints()
            .iter()
            .filter(|(n, _)| matches!(info(n).kind, ConstraintKind::LinearInequality | ConstraintKind::LinearEquality))
            .map(|(_, c)| &c.expr)
            .collect();
        let stacked = Expr::vcat(&linear).unwrap();
        let hess: Vec<Expr> = (0..stacked.rows()).map(|r| expr::hessian(&stacked.elem(r), &s.x).unwrap()).collect();
        let hess_fn = Function::new(&[&s.x, &s.p], &hess.iter().collect::<Vec<_>>()).unwrap();
        for _ in 0..5 {
            let x = random_vec(&mut rng, problem.n_x(), 2.0);
            let p = random_vec(&mut rng, problem.n_p(), 2.0);
            let inp: Vec<f64> = x.iter().chain(p.iter()).copied().collect();
            for h in hess_fn.eval(&inp).unwrap() {
                curvature = curvature.max(h.amax());
            }
            let v = random_vec(&mut rng, problem.n_x(), 1.0);
            let at = |y: &DVector<f64>| {
                let c = problem.constraints(y, &p).unwrap();
                (c.k, c.a)
            };
            let step = 1e-3;
            let (kp, ap) = at(&(&x + &v * step));
            let (k0, a0) = at(&x);
            let (km, am) = at(&(&x - &v * step));
            curvature = curvature.max((kp - k0 * 2.0 + km).amax()).max((ap - a0 * 2.0 + am).amax());
        }
    }
    check(
        worst <= 1e-12 && curvature <= 1e-9 && kinds.len() == 4,
        format!("200 probes, max scaled error {worst:.1e}, linear-row curvature {curvature:.1e}, {} row kinds", kinds.len()),
    )
}

fn ac4_classification() -> Outcome {
    use ProblemClass::*;
    let robot = RobotModel::from_urdf_str("arm", PLANAR_2R_URDF, &[0]).unwrap();
    let mut got = Vec::new();

    let mut b = OptimizationBuilder::new(1, &[], &[], true, false).unwrap();
    let x = b.add_decision_variables("x", 3, 1).unwrap();
    let p = b.add_parameter("p", 3, 1).unwrap();
    b.add_cost_term("c", &(&x - &p).sumsqr()).unwrap();
    got.push((UnconstrainedQp, b.build().unwrap().classification()));

    let mut b = OptimizationBuilder::new(1, &[robot.clone()], &[], true, false).unwrap();
    let q = b.get_model_state("arm", 0, 0).unwrap();
    let qhat = b.add_parameter("qhat", 2, 1).unwrap();
    let w = b.add_parameter("W", 2, 2).unwrap();
    let e = &q - &qhat;
    b.add_cost_term("track", &(&(&e.transpose() * &w) * &e)).unwrap();
    b.enforce_model_limits("arm").unwrap();
    got.push((LinearConstrainedQp, b.build().unwrap().classification()));

    let mut b = OptimizationBuilder::new(1, &[], &[], true, false).unwrap();
    let x = b.add_decision_variables("x", 2, 1).unwrap();
    b.add_cost_term("c", &x.sumsqr()).unwrap();
    b.add_equality_constraint("circle", x.sumsqr(), 1.0).unwrap();
    got.push((NonlinearConstrainedQp, b.build().unwrap().classification()));

    // End pose without limits, with limits, and the obstacle plan.
    let mut b = OptimizationBuilder::new(1, &[robot.clone()], &[], true, false).unwrap();
    let q = b.get_model_state("arm", 0, 0).unwrap();
    let goal = b.add_parameter("goal", 3, 1).unwrap();
    b.add_cost_term("goal", &(&robot.global_link_position("ee", &q).unwrap() - &goal).sumsqr()).unwrap();
    got.push((UnconstrainedNlp, b.build().unwrap().classification()));

    let cfg = TaskConfig::default();
    let end_pose = EndPose::new(&cfg, PoseMode::Position, 0.0, end_pose_options(&cfg)).unwrap();
    got.push((LinearConstrainedNlp, end_pose.problem().classification()));
    got.push((NonlinearCostAndConstraints, obstacle_plan(4, false).build().unwrap().classification()));

    let wrong: Vec<_> = got.iter().filter(|(w, g)| w != g).collect();
    check(wrong.is_empty(), format!("{} of 6 fixtures classified as expected {wrong:?}", 6 - wrong.len()))
}

/// Minimizer of `x'Hx/2 + c'x` subject to `Gx <= h` by enumerating active
/// sets and keeping the KKT point (feasible, non-negative multipliers).
fn brute_force_qp(hm: &DMatrix<f64>, c: &DVector<f64>, g: &DMatrix<f64>, h: &DVector<f64>) -> Option<DVector<f64>> {
    let (n, m) = (c.len(), h.len());
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if active.len() > n {
            continue;
        }
        let k = active.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(hm);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&-c);
        for (j, &i) in active.iter().enumerate() {
            for col in 0..n {
                kkt[(n + j, col)] = g[(i, col)];
                kkt[(col, n + j)] = g[(i, col)];
            }
            rhs[n + j] = h[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x = sol.rows(0, n).into_owned();
        let feasible = (g * &x - h).iter().all(|v| *v <= 1e-9);
        let dual_ok = sol.rows(n, k).iter().all(|v| *v >= -1e-9);
        if feasible && dual_ok {
            let f = 0.5 * x.dot(&(hm * &x)) + c.dot(&x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

fn ac5_qp() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut kkt_worst, mut x_worst, mut failures) = (0.0f64, 0.0f64, 0);
    for _ in 0..20 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=8);
        let r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let hm = &r * r.transpose() + DMatrix::identity(n, n) * 0.2;
        let c = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
        let g = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let interior = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
        let h = &g * &interior + DVector::from_fn(m, |_, _| rng.gen_range(0.05..1.0));
        let oracle = brute_force_qp(&hm, &c, &g, &h).expect("feasible by construction");

        // Direct solve, KKT residual in the solver's own form.
        let l = DVector::from_element(m, f64::NEG_INFINITY);
        let p = QpProblem { h: &hm, q: &c, a: &g, l: &l, u: &h };
        let sol = qp::solve(&p, &QpSettings::default(), None);
        let gx = &g * &sol.x;
        let complementarity = (0..m).fold(0.0f64, |acc, i| acc.max((sol.y[i].max(0.0) * (h[i] - gx[i])).abs()));
        let dual_sign = sol.y.iter().fold(0.0f64, |acc, y| acc.max(-y));
        let kkt = p.stationarity(&sol.x, &sol.y).max(p.primal_violation(&sol.x)).max(complementarity).max(dual_sign);

        // Same problem through the builder and the session.
        let mut b = OptimizationBuilder::new(1, &[], &[], true, false).unwrap();
        let x = b.add_decision_variables("x", n, 1).unwrap();
        let quad = &(&x.transpose() * &Expr::from_matrix(&hm)) * &x;
        b.add_cost_term("c", &(&quad.scale(0.5) + &(&Expr::column(c.as_slice()).transpose() * &x))).unwrap();
        b.add_leq_inequality_constraint("rows", &Expr::from_matrix(&g) * &x, Expr::column(h.as_slice()))
            .unwrap();
        let problem = b.build().unwrap();
        let class_ok = problem.classification() == ProblemClass::LinearConstrainedQp;
        let mut session = SolverSession::new(std::sync::Arc::new(problem));
        session.setup("qp", SolverOptions::default()).unwrap();
        let via = session.solve().unwrap();

        let dx = (&sol.x - &oracle).amax().max((&via.x_flat - &oracle).amax());
        kkt_worst = kkt_worst.max(kkt);
        x_worst = x_worst.max(dx);
        failures += usize::from(!(sol.status == QpStatus::Solved && via.success && class_ok && kkt <= 1e-5 && dx <= 1e-5));
    }
    let elapsed = t0.elapsed();
    check(
        failures == 0 && elapsed < Duration::from_secs(30),
        format!("20 problems, {failures} failed, kkt {kkt_worst:.1e}, distance to oracle {x_worst:.1e}, {elapsed:.2?}"),
    )
}

fn ac6_ik() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (urdf, start) in [
        ("builtin:planar_2r", vec![0.3, 1.2]),
        ("builtin:arm6", vec![0.0, -0.6, 1.4, 0.0, 0.8, 0.0]),
    ] {
        let cfg = TaskConfig { urdf: urdf.into(), start: Some(start.clone()), ..TaskConfig::default() };
        let mut task = EndPose::new(&cfg, PoseMode::Position, 0.0, end_pose_options(&cfg)).unwrap();
        let robot = task.robot().clone();
        let (lo, hi) = robot.finite_limits();
        let kin = tasks::TipKinematics::new(&robot, "ee").unwrap();
        let seed = DVector::from_vec(start);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut worst, mut limit, mut reached) = (0.0f64, 0.0f64, 0);
        for _ in 0..50 {
            let q_goal = DVector::from_fn(robot.ndof(), |i, _| rng.gen_range(lo[i]..hi[i]));
            let goal = kin.position(&q_goal);
            let out = task.solve(&goal, None, &seed, cfg.regularization, &seed, cfg.restarts, &mut rng).unwrap();
            worst = worst.max(out.position_error);
            for i in 0..robot.ndof() {
                limit = limit.max(lo[i] - out.q[i]).max(out.q[i] - hi[i]);
            }
            reached += usize::from(out.reached);
        }
        ok &= reached == 50 && worst <= 1e-6 && limit <= 1e-8;
        lines.push(format!("{urdf}: {reached}/50 reached, max error {worst:.1e}, limit excess {limit:.1e}"));
    }
    check(ok, lines.join("; "))
}

fn plan_config() -> TaskConfig {
    TaskConfig {
        horizon: 20,
        dt: 0.1,
        start: Some(vec![0.0, 0.5]),
        goal: optask_cli::config::GoalConfig { position: [0.6, 1.6, 0.0], rpy: None },
        obstacles: vec![Obstacle { center: [1.6, 1.0, 0.0], radius: 0.3 }],
        ..TaskConfig::default()
    }
}

fn ac7_plan() -> Outcome {
    let mut cfg = plan_config();
    let start_tip = Vector3::new(1.0 + 0.5f64.cos(), 0.5f64.sin(), 0.0);
    let goal = Vector3::from(cfg.goal.position);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut passed = 0;
    let mut worst = [f64::INFINITY, 0.0, 0.0, 0.0];
    for _ in 0..10 {
        let f = rng.gen_range(0.3..0.7);
        let off = rng.gen_range(-0.1..0.1);
        let radius = rng.gen_range(0.15..0.3);
        let c = start_tip + (goal - start_tip) * f + Vector3::new(off, off, 0.0);
        cfg.obstacles = vec![Obstacle { center: c.into(), radius }];
        let r = tasks::plan(&cfg).unwrap();
        let a = &r.audit;
        worst = [
            worst[0].min(a.clearance),
            worst[1].max(a.limit_violation),
            worst[2].max(a.initial_error),
            worst[3].max(a.dynamics_residual),
        ];
        passed += usize::from(
            r.success
                && a.clearance >= -1e-6
                && a.limit_violation <= 1e-6
                && a.initial_error <= 1e-8
                && a.dynamics_residual <= 1e-8,
        );
    }
    // Obstacles swallowing the start or the goal admit no valid plan.
    let mut rejected = 0;
    for centre in [start_tip, goal] {
        cfg.obstacles = vec![Obstacle { center: centre.into(), radius: 0.2 }];
        rejected += usize::from(!tasks::plan(&cfg).unwrap().success);
    }
    check(
        passed == 10 && rejected == 2,
        format!(
            "{passed}/10 audited plans, min clearance {:.1e}, limits {:.1e}, initial {:.1e}, dynamics {:.1e}; {rejected}/2 infeasible placements reported as failures",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn ac8_track() -> Outcome {
    let cfg = TaskConfig {
        urdf: "builtin:arm6".into(),
        start: Some(vec![0.0, -0.6, 1.4, 0.0, 0.8, 0.0]),
        ..TaskConfig::default()
    };
    let cfg = TaskConfig { track: optask_cli::config::TrackConfig { center: [0.45, 0.0, 0.45], ..cfg.track.clone() }, ..cfg };
    let warm = tasks::track(&cfg).unwrap();
    let mut cold_cfg = cfg.clone();
    cold_cfg.track.cold_start = true;
    let cold = tasks::track(&cold_cfg).unwrap();
    let mut manip_cfg = cfg.clone();
    manip_cfg.track.manipulability_weight = 1e-2;
    let manip = tasks::track(&manip_cfg).unwrap();

    let n = warm.rows.len();
    let not_worse = warm.rows.iter().zip(&cold.rows).filter(|(w, c)| w.iterations <= c.iterations).count();
    let (plain_m, aug_m) = (warm.mean_manipulability(), manip.mean_manipulability());
    check(
        n == 100
            && warm.failure.is_none()
            && warm.mean_error() <= 1e-3
            && not_worse * 100 >= 95 * n
            && aug_m > plain_m,
        format!(
            "{n} waypoints, mean error {:.1e}, warm <= cold at {not_worse}/{n}, manipulability {plain_m:.5} -> {aug_m:.5}",
            warm.mean_error()
        ),
    )
}

fn ac9_dims() -> Outcome {
    let cfg = TaskConfig {
        urdf: "builtin:arm6".into(),
        start: Some(vec![0.0, -0.6, 1.4, 0.0, 0.8, 0.0]),
        ..TaskConfig::default()
    };
    let rows = tasks::dims(&cfg).unwrap();
    let only_position: Vec<f64> = rows.iter().filter(|r| r.position_reached && !r.pose_reached).map(|r| r.fraction).collect();
    let only_pose: Vec<f64> = rows.iter().filter(|r| r.pose_reached && !r.position_reached).map(|r| r.fraction).collect();
    check(
        !only_position.is_empty() && only_pose.is_empty(),
        format!("position-only wins at fractions {only_position:?}, full-pose-only at {only_pose:?}"),
    )
}

fn ac10_determinism() -> Outcome {
    let cfg = plan_config();
    let a = optask_cli::cmd_plan(&cfg).unwrap();
    let b = optask_cli::cmd_plan(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("plan.json");
    std::fs::write(&config, serde_json::to_string(&cfg).unwrap()).unwrap();
    let mut files = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_optask"))
            .args(["plan", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "plan exited with {status}");
        files.push(std::fs::read(&out).unwrap());
    }
    check(
        a.success && a.text == b.text && files[0] == files[1] && files[0] == a.text.as_bytes(),
        format!("{} CSV bytes, library and binary runs identical", a.text.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("kinematics oracle", ac1_kinematics),
        ("derivative fixtures", ac2_derivatives),
        ("transcription fidelity", ac3_transcription),
        ("classification", ac4_classification),
        ("qp against active-set oracle", ac5_qp),
        ("end-pose ik", ac6_ik),
        ("obstacle plan audit", ac7_plan),
        ("figure-of-eight tracking", ac8_track),
        ("reach sweep", ac9_dims),
        ("plan determinism", ac10_determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("AC{:<2} {tag} {name} ({:.2?}): {detail}", k + 1, t0.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
