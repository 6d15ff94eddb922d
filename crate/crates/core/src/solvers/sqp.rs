//! Sequential quadratic programming for the full canonical form.
//!
//! Each iteration solves
//!
//! ```text
//! min 1/2 d'Bd + grad f'd   s.t.   c_I + J_I d >= 0,   c_E + J_E d = 0
//! ```
//!
//! with the operator-splitting QP solver, where `c_I = [k; g]` and
//! `c_E = [a; h]`. Without nonlinear constraints `B` is the Gauss-Newton
//! matrix when the cost is a recognized sum of squares, and the exact cost
//! Hessian made positive definite otherwise. With nonlinear constraints `B`
//! is a damped BFGS approximation of the Lagrangian Hessian, seeded with
//! that matrix and reset to the identity after two consecutive curvature
//! failures.
//!
//! Globalization uses the l1 merit `f + mu * theta` with Armijo backtracking
//! and a second-order correction when the full step is rejected. An
//! infeasible subproblem is replaced by its elastic relaxation.
//!
//! Multipliers follow `grad f - J' lambda = 0` with `lambda_I >= 0`. The
//! iteration stops once the KKT residual of the current point, with the
//! subproblem multipliers, is within tolerance; the last subproblem step is
//! kept when it lowers the cost without adding infeasibility.

use nalgebra::{DMatrix, DVector};

use super::linalg::{damped_bfgs_update, inf_norm, make_positive_definite};
use super::qp::{self, QpProblem, QpSettings, QpStatus};
use super::{AdapterOutput, SolverAdapter, SolverError, SolverOptions, Stats, Termination};
use crate::problem::{Problem, ProblemClass};

const PD_FLOOR: f64 = 1e-8;
const GN_FLOOR: f64 = 1e-8;
const ELASTIC_WEIGHT: f64 = 1e3;

#[derive(Debug, Default)]
pub struct SqpAdapter {
    options: SolverOptions,
    stats: Option<Stats>,
    lambda: Option<DVector<f64>>,
}

impl SqpAdapter {
    /// Multipliers at the last iterate, in `[k; g; a; h]` row order.
    pub fn multipliers(&self) -> Option<&DVector<f64>> {
        self.lambda.as_ref()
    }
}

/// Values and derivatives at one point.
struct Point {
    x: DVector<f64>,
    f: f64,
    grad: DVector<f64>,
    ci: DVector<f64>,
    ce: DVector<f64>,
    ji: DMatrix<f64>,
    je: DMatrix<f64>,
}

struct Evaluator<'a> {
    problem: &'a Problem,
    p: &'a DVector<f64>,
    m: DMatrix<f64>,
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(problem: &'a Problem, p: &'a DVector<f64>) -> Result<Self, SolverError> {
        let lin = problem.linear_parts(p)?;
        Ok(Evaluator { problem, p, m: lin.m, c: lin.c, a: lin.a, b: lin.b })
    }

    fn values(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>, DVector<f64>), SolverError> {
        let f = self.problem.objective(x, self.p)?;
        let k = &self.m * x + &self.c;
        let g = self.problem.g_values(x, self.p)?;
        let a = &self.a * x + &self.b;
        let h = self.problem.h_values(x, self.p)?;
        Ok((f, stack(&k, &g), stack(&a, &h)))
    }

    fn point(&self, x: DVector<f64>) -> Result<Point, SolverError> {
        let (f, ci, ce) = self.values(&x)?;
        let grad = self.problem.gradient(&x, self.p)?;
        let ji = stack_rows(&self.m, &self.problem.g_jacobian(&x, self.p)?);
        let je = stack_rows(&self.a, &self.problem.h_jacobian(&x, self.p)?);
        Ok(Point { x, f, grad, ci, ce, ji, je })
    }

    /// Gauss-Newton matrix for least-squares costs, otherwise the exact
    /// Hessian made positive definite.
    fn hessian_seed(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, SolverError> {
        if let Some(mut gn) = self.problem.gauss_newton_hessian(x, self.p)? {
            if gn.iter().all(|v| v.is_finite()) {
                let top = gn.diagonal().iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for i in 0..gn.nrows() {
                    gn[(i, i)] += GN_FLOOR * top;
                }
                return Ok(gn);
            }
        }
        Ok(make_positive_definite(&self.problem.hessian(x, self.p)?, PD_FLOOR))
    }
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols().max(b.ncols());
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), n);
    if a.nrows() > 0 {
        out.rows_mut(0, a.nrows()).copy_from(a);
    }
    if b.nrows() > 0 {
        out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    }
    out
}

/// l1 infeasibility.
fn theta(ci: &DVector<f64>, ce: &DVector<f64>) -> f64 {
    ci.iter().map(|v| (-v).max(0.0)).sum::<f64>() + ce.iter().map(|v| v.abs()).sum::<f64>()
}

fn max_violation(ci: &DVector<f64>, ce: &DVector<f64>) -> f64 {
    let vi = ci.iter().fold(0.0f64, |m, v| m.max(-v));
    let ve = ce.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    vi.max(ve)
}

/// First-order optimality measure of `(x, lambda)`.
fn kkt_error(pt: &Point, lambda: &DVector<f64>) -> f64 {
    let mi = pt.ci.len();
    let li = lambda.rows(0, mi);
    let le = lambda.rows(mi, pt.ce.len());
    let stat = &pt.grad - pt.ji.transpose() * li - pt.je.transpose() * le;
    let comp = (0..mi).fold(0.0f64, |m, i| m.max((li[i] * pt.ci[i]).abs()));
    let sign = li.iter().fold(0.0f64, |m, v| m.max(-v));
    inf_norm(&stat).max(max_violation(&pt.ci, &pt.ce)).max(comp).max(sign)
}

struct Subproblem {
    d: DVector<f64>,
    lambda: DVector<f64>,
    ok: bool,
}

/// Solve the QP for bounds `l_i = -ci`, `l_e = u_e = -ce` on `[J_I; J_E] d`.
#[allow(clippy::too_many_arguments)]
fn solve_subproblem(
    b: &DMatrix<f64>,
    grad: &DVector<f64>,
    ji: &DMatrix<f64>,
    je: &DMatrix<f64>,
    ci: &DVector<f64>,
    ce: &DVector<f64>,
    settings: &QpSettings,
    mu: f64,
    tol: f64,
    warm: Option<&DVector<f64>>,
) -> Subproblem {
    let (mi, me) = (ci.len(), ce.len());
    let a = stack_rows(ji, je);
    let l = -stack(ci, ce);
    let u = DVector::from_iterator(mi + me, (0..mi).map(|_| f64::INFINITY).chain(ce.iter().map(|v| -v)));
    let qp_problem = QpProblem { h: b, q: grad, a: &a, l: &l, u: &u };
    let warm_y = warm.filter(|w| w.len() == mi + me).map(|w| -w);
    let zero = DVector::zeros(grad.len());
    let sol = qp::solve(&qp_problem, settings, warm_y.as_ref().map(|y| (&zero, y)));
    let usable = match sol.status {
        QpStatus::Solved => true,
        QpStatus::MaxIterations => qp_problem.primal_violation(&sol.x) <= tol,
        _ => false,
    };
    if usable {
        return Subproblem { d: sol.x, lambda: -sol.y, ok: true };
    }
    if mi + me == 0 {
        return Subproblem { d: sol.x, lambda: DVector::zeros(0), ok: false };
    }
    elastic(b, grad, ji, je, ci, ce, settings, ELASTIC_WEIGHT * mu.max(1.0))
}

/// Relaxation with nonnegative slacks `s_I`, `s+`, `s-` penalized by `w`:
/// `c_I + J_I d + s_I >= 0` and `c_E + J_E d + s+ - s- = 0`.
#[allow(clippy::too_many_arguments)]
fn elastic(
    b: &DMatrix<f64>,
    grad: &DVector<f64>,
    ji: &DMatrix<f64>,
    je: &DMatrix<f64>,
    ci: &DVector<f64>,
    ce: &DVector<f64>,
    settings: &QpSettings,
    w: f64,
) -> Subproblem {
    let n = grad.len();
    let (mi, me) = (ci.len(), ce.len());
    let ns = mi + 2 * me;
    let nt = n + ns;
    let mut h = DMatrix::zeros(nt, nt);
    h.view_mut((0, 0), (n, n)).copy_from(b);
    let q = DVector::from_iterator(nt, grad.iter().copied().chain((0..ns).map(|_| w)));

    let rows = mi + me + ns;
    let mut a = DMatrix::zeros(rows, nt);
    let mut l = DVector::zeros(rows);
    let mut u = DVector::from_element(rows, f64::INFINITY);
    if mi > 0 {
        a.view_mut((0, 0), (mi, n)).copy_from(ji);
    }
    if me > 0 {
        a.view_mut((mi, 0), (me, n)).copy_from(je);
    }
    for i in 0..mi {
        a[(i, n + i)] = 1.0;
        l[i] = -ci[i];
    }
    for i in 0..me {
        a[(mi + i, n + mi + i)] = 1.0;
        a[(mi + i, n + mi + me + i)] = -1.0;
        l[mi + i] = -ce[i];
        u[mi + i] = -ce[i];
    }
    for j in 0..ns {
        a[(mi + me + j, n + j)] = 1.0;
    }
    let sol = qp::solve(&QpProblem { h: &h, q: &q, a: &a, l: &l, u: &u }, settings, None);
    let ok = matches!(sol.status, QpStatus::Solved | QpStatus::MaxIterations) && sol.x.iter().all(|v| v.is_finite());
    Subproblem { d: sol.x.rows(0, n).into_owned(), lambda: -sol.y.rows(0, mi + me).into_owned(), ok }
}

impl SolverAdapter for SqpAdapter {
    fn name(&self) -> &str {
        "sqp"
    }

    fn accepts(&self, _class: ProblemClass) -> bool {
        true
    }

    fn setup(&mut self, _problem: &Problem, options: &SolverOptions) -> Result<(), SolverError> {
        self.options = options.clone();
        self.options.qp.record_history = false;
        self.stats = None;
        self.lambda = None;
        Ok(())
    }

    fn solve(&mut self, problem: &Problem, x0: &DVector<f64>, p: &DVector<f64>) -> Result<AdapterOutput, SolverError> {
        let o = self.options.clone();
        let ev = Evaluator::new(problem, p)?;
        let quasi_newton = problem.classification().has_nonlinear_constraints();

        let mut pt = ev.point(x0.clone())?;
        let mut b = ev.hessian_seed(&pt.x)?;
        let mut lambda = DVector::zeros(pt.ci.len() + pt.ce.len());
        let mut mu = 1.0f64;
        let mut curvature_failures = 0;
        let mut reset_at_point = false;
        let mut objective_history = vec![pt.f];
        let mut step_history = vec![0.0];

        // Every pass appends one history entry, so histories hold
        // `iterations + 1` values.
        let mut iterations = 0;
        let reason = loop {
            if iterations == o.max_iter {
                break Termination::MaxIterations;
            }
            iterations += 1;
            if !pt.f.is_finite() || pt.grad.iter().any(|v| !v.is_finite()) {
                objective_history.push(pt.f);
                step_history.push(0.0);
                break Termination::NonFinite;
            }
            if !quasi_newton && iterations > 1 {
                b = ev.hessian_seed(&pt.x)?;
            }

            let sub = solve_subproblem(&b, &pt.grad, &pt.ji, &pt.je, &pt.ci, &pt.ce, &o.qp, mu, o.kkt_tol, Some(&lambda));
            let d = sub.d;
            if sub.ok {
                lambda = sub.lambda;
            }
            let step = inf_norm(&d);
            let kkt = kkt_error(&pt, &lambda);
            let violation = max_violation(&pt.ci, &pt.ce);

            if !d.iter().all(|v| v.is_finite()) {
                objective_history.push(pt.f);
                step_history.push(0.0);
                break Termination::NonFinite;
            }
            if kkt <= o.kkt_tol {
                // Keep the last subproblem step when it does not hurt.
                let full = &pt.x + &d;
                let (f, ci, ce) = ev.values(&full)?;
                let v = max_violation(&ci, &ce);
                if f.is_finite() && f <= pt.f && v <= violation.max(o.kkt_tol) && sub.ok {
                    pt = ev.point(full)?;
                    objective_history.push(pt.f);
                    step_history.push(step);
                } else {
                    objective_history.push(pt.f);
                    step_history.push(0.0);
                }
                break Termination::Converged;
            }
            if step <= o.step_tol {
                objective_history.push(pt.f);
                step_history.push(step);
                break if violation > o.kkt_tol {
                    Termination::Infeasible
                } else {
                    Termination::Other("step below tolerance before stationarity".into())
                };
            }

            let lam_inf = inf_norm(&lambda);
            if mu < 1.1 * lam_inf {
                mu = 1.5 * lam_inf;
            }
            let theta0 = theta(&pt.ci, &pt.ce);
            let ci_lin = &pt.ci + &pt.ji * &d;
            let ce_lin = &pt.ce + &pt.je * &d;
            let dphi = (pt.grad.dot(&d) + mu * (theta(&ci_lin, &ce_lin) - theta0)).min(0.0);
            let phi0 = pt.f + mu * theta0;
            let merit = |x: &DVector<f64>| -> Result<f64, SolverError> {
                let (f, ci, ce) = ev.values(x)?;
                let v = f + mu * theta(&ci, &ce);
                Ok(if v.is_finite() { v } else { f64::INFINITY })
            };

            let mut accepted: Option<DVector<f64>> = None;
            let full = &pt.x + &d;
            if merit(&full)? <= phi0 + o.armijo * dphi {
                accepted = Some(full);
            } else if quasi_newton {
                // Second-order correction of the full step.
                let (_, ci_t, ce_t) = ev.values(&full)?;
                let ci_c = &ci_t - &pt.ji * &d;
                let ce_c = &ce_t - &pt.je * &d;
                let soc = solve_subproblem(&b, &pt.grad, &pt.ji, &pt.je, &ci_c, &ce_c, &o.qp, mu, o.kkt_tol, Some(&lambda));
                if soc.ok {
                    let xc = &pt.x + &soc.d;
                    if merit(&xc)? <= phi0 + o.armijo * dphi {
                        accepted = Some(xc);
                    }
                }
            }
            if accepted.is_none() {
                let mut t = o.backtrack;
                for _ in 0..o.max_backtracks {
                    let xt = &pt.x + &d * t;
                    if merit(&xt)? <= phi0 + o.armijo * t * dphi {
                        accepted = Some(xt);
                        break;
                    }
                    t *= o.backtrack;
                }
            }
            let Some(xn) = accepted else {
                objective_history.push(pt.f);
                step_history.push(0.0);
                if quasi_newton && !reset_at_point {
                    // A stale curvature model can yield a non-descent step.
                    b = ev.hessian_seed(&pt.x)?;
                    curvature_failures = 0;
                    reset_at_point = true;
                    continue;
                }
                break Termination::LineSearchFailed;
            };
            reset_at_point = false;

            let next = ev.point(xn)?;
            if quasi_newton {
                let grad_l = |q: &Point| &q.grad - q.ji.transpose() * lambda.rows(0, q.ci.len()) - q.je.transpose() * lambda.rows(q.ci.len(), q.ce.len());
                let s = &next.x - &pt.x;
                let y = grad_l(&next) - grad_l(&pt);
                if damped_bfgs_update(&mut b, &s, &y) {
                    curvature_failures = 0;
                } else {
                    curvature_failures += 1;
                    if curvature_failures >= 2 {
                        b = DMatrix::identity(b.nrows(), b.ncols());
                        curvature_failures = 0;
                    }
                }
            }
            objective_history.push(next.f);
            step_history.push(inf_norm(&(&next.x - &pt.x)));
            pt = next;
        };

        self.lambda = Some(lambda);
        self.stats = Some(Stats { iterations, objective_history, step_history, duration: Default::default() });
        Ok(AdapterOutput { converged: reason == Termination::Converged, x: pt.x, reason, iterations })
    }

    fn stats(&self) -> Option<Stats> {
        self.stats.clone()
    }
}
