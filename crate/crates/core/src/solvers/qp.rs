//! Dense operator-splitting (ADMM) solver for
//!
//! ```text
//! min 1/2 x'Hx + q'x   s.t.   l <= Ax <= u
//! ```
//!
//! with `H` positive semidefinite. Equality rows (`l == u`) get a stiffer
//! penalty, free rows a tiny one. The penalty adapts to the ratio of primal
//! and dual residuals. On convergence the active set is guessed from the
//! multipliers and the reduced KKT system is solved directly (polishing),
//! which lifts accuracy to machine level when the guess is right.
//!
//! Multipliers follow the convention `Hx + q + A'y = 0`, with `y_i > 0`
//! on active upper bounds and `y_i < 0` on active lower bounds.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::linalg::inf_norm;
use super::{AdapterOutput, SolverAdapter, SolverError, SolverOptions, Stats, Termination};
use crate::problem::{Problem, ProblemClass};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation in (0, 2).
    pub alpha: f64,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Tolerance of the infeasibility certificates.
    pub eps_infeasible: f64,
    pub adaptive_rho: bool,
    pub polish: bool,
    /// Residuals are checked every this many iterations.
    pub check_every: usize,
    /// Record objective and step histories per iteration.
    pub record_history: bool,
    /// Ruiz equilibration passes applied before iterating; zero disables.
    pub scaling: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            max_iter: 4000,
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            eps_infeasible: 1e-6,
            adaptive_rho: true,
            polish: true,
            check_every: 5,
            record_history: false,
            scaling: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    PrimalInfeasible,
    DualInfeasible,
    /// `H` is not positive semidefinite (factorization failed).
    NonConvex,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub polished: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective_history: Vec<f64>,
    pub step_history: Vec<f64>,
}

/// Problem data, borrowed.
#[derive(Debug, Clone, Copy)]
pub struct QpProblem<'a> {
    pub h: &'a DMatrix<f64>,
    pub q: &'a DVector<f64>,
    pub a: &'a DMatrix<f64>,
    pub l: &'a DVector<f64>,
    pub u: &'a DVector<f64>,
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_SCALE: f64 = 1e3;
const ADAPT_EVERY: usize = 25;
const EARLY_POLISH_AT: usize = 25;
const POLISH_REPAIRS: usize = 8;

impl QpProblem<'_> {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(self.h * x)) + self.q.dot(x)
    }

    /// Largest bound violation of `Ax`.
    pub fn primal_violation(&self, x: &DVector<f64>) -> f64 {
        let ax = self.a * x;
        (0..self.m()).fold(0.0f64, |m, i| m.max(self.l[i] - ax[i]).max(ax[i] - self.u[i]))
    }

    /// `||Hx + q + A'y||_inf`.
    pub fn stationarity(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        inf_norm(&(self.h * x + self.q + self.a.transpose() * y))
    }

    fn check(&self) {
        let (n, m) = (self.n(), self.m());
        assert_eq!(self.h.shape(), (n, n), "H shape");
        assert_eq!(self.a.shape(), (m, n), "A shape");
        assert_eq!(self.u.len(), m, "u length");
    }
}

fn row_rho(l: f64, u: f64, rho: f64) -> f64 {
    if l == u {
        (rho * RHO_EQ_SCALE).min(RHO_MAX)
    } else if l == f64::NEG_INFINITY && u == f64::INFINITY {
        RHO_MIN
    } else {
        rho
    }
}

fn factor(p: &QpProblem, sigma: f64, rho: &DVector<f64>) -> Option<Cholesky<f64, Dyn>> {
    let mut k = p.h + DMatrix::identity(p.n(), p.n()) * sigma;
    if p.m() > 0 {
        let mut ar = p.a.clone();
        for (i, mut row) in ar.row_iter_mut().enumerate() {
            row *= rho[i];
        }
        k += p.a.transpose() * ar;
    }
    Cholesky::new(k)
}

fn clamp(v: &DVector<f64>, l: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), (0..v.len()).map(|i| v[i].max(l[i]).min(u[i])))
}

/// Support-function test for `y` certifying `{l <= Ax <= u}` is empty.
fn primal_certificate(p: &QpProblem, dy: &DVector<f64>, eps: f64) -> bool {
    let norm = inf_norm(dy);
    if norm <= 1e-30 || !norm.is_finite() {
        return false;
    }
    let atdy = p.a.transpose() * dy;
    if inf_norm(&atdy) > eps * norm {
        return false;
    }
    let mut support = 0.0;
    for i in 0..p.m() {
        let d = dy[i];
        if d.abs() <= eps * norm {
            continue;
        }
        let bound = if d > 0.0 { p.u[i] } else { p.l[i] };
        if !bound.is_finite() {
            return false;
        }
        support += bound * d;
    }
    support < -eps * norm
}

/// Recession direction `dx` along which the objective decreases forever.
fn dual_certificate(p: &QpProblem, dx: &DVector<f64>, eps: f64) -> bool {
    let norm = inf_norm(dx);
    if norm <= 1e-30 || !norm.is_finite() {
        return false;
    }
    if inf_norm(&(p.h * dx)) > eps * norm || p.q.dot(dx) > -eps * norm {
        return false;
    }
    let adx = p.a * dx;
    (0..p.m()).all(|i| {
        let lo_ok = p.l[i] == f64::NEG_INFINITY || adx[i] >= -eps * norm;
        let hi_ok = p.u[i] == f64::INFINITY || adx[i] <= eps * norm;
        lo_ok && hi_ok
    })
}

struct Residuals {
    primal: f64,
    dual: f64,
    eps_primal: f64,
    eps_dual: f64,
    primal_scale: f64,
    dual_scale: f64,
}

fn residuals(p: &QpProblem, s: &QpSettings, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> Residuals {
    let ax = p.a * x;
    let hx = p.h * x;
    let aty = p.a.transpose() * y;
    let primal = if p.m() > 0 { inf_norm(&(&ax - z)) } else { 0.0 };
    let dual = inf_norm(&(&hx + p.q + &aty));
    let primal_scale = inf_norm(&ax).max(inf_norm(z));
    let dual_scale = inf_norm(&hx).max(inf_norm(&aty)).max(inf_norm(p.q));
    Residuals {
        primal,
        dual,
        eps_primal: s.eps_abs + s.eps_rel * primal_scale,
        eps_dual: s.eps_abs + s.eps_rel * dual_scale,
        primal_scale,
        dual_scale,
    }
}

/// Solve the reduced KKT system on the active set `active` (row, bound).
fn solve_active(p: &QpProblem, active: &[(usize, f64)]) -> Option<(DVector<f64>, DVector<f64>)> {
    let (n, m) = (p.n(), p.m());
    let na = active.len();
    let dim = n + na;
    let mut k0 = DMatrix::zeros(dim, dim);
    k0.view_mut((0, 0), (n, n)).copy_from(p.h);
    for (r, &(i, _)) in active.iter().enumerate() {
        for j in 0..n {
            k0[(n + r, j)] = p.a[(i, j)];
            k0[(j, n + r)] = p.a[(i, j)];
        }
    }
    let delta = 1e-9;
    let mut kreg = k0.clone();
    for d in 0..dim {
        kreg[(d, d)] += if d < n { delta } else { -delta };
    }
    let lu = kreg.lu();
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, n).copy_from(&(-p.q));
    for (r, &(_, b)) in active.iter().enumerate() {
        rhs[n + r] = b;
    }
    let mut w = lu.solve(&rhs)?;
    for _ in 0..5 {
        let corr = lu.solve(&(&rhs - &k0 * &w))?;
        w += corr;
    }
    if w.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let x = w.rows(0, n).into_owned();
    let mut y = DVector::zeros(m);
    for (r, &(i, _)) in active.iter().enumerate() {
        y[i] = w[n + r];
    }
    Some((x, y))
}

/// Guess the active set from `(z, y)`, solve the reduced KKT system, and
/// repair the guess a few times: rows with multipliers of the wrong sign
/// leave, violated rows enter. Returns `None` when no consistent set is
/// found.
fn polish(p: &QpProblem, z: &DVector<f64>, y: &DVector<f64>, tol: f64) -> Option<(DVector<f64>, DVector<f64>)> {
    let m = p.m();
    let mut active: Vec<(usize, f64)> = Vec::new();
    for i in 0..m {
        if p.l[i] == p.u[i] {
            active.push((i, p.l[i]));
        } else if p.l[i].is_finite() && z[i] - p.l[i] < -y[i] {
            active.push((i, p.l[i]));
        } else if p.u[i].is_finite() && p.u[i] - z[i] < y[i] {
            active.push((i, p.u[i]));
        }
    }
    for _ in 0..POLISH_REPAIRS {
        let (x, yp) = solve_active(p, &active)?;
        // multipliers of one-sided rows must point outward
        let before = active.len();
        active.retain(|&(i, b)| {
            p.l[i] == p.u[i] || if b == p.l[i] { yp[i] <= tol } else { yp[i] >= -tol }
        });
        let dropped = active.len() != before;
        let ax = p.a * &x;
        let mut added = false;
        for i in 0..m {
            if active.iter().any(|&(j, _)| j == i) {
                continue;
            }
            if ax[i] < p.l[i] - tol {
                active.push((i, p.l[i]));
                added = true;
            } else if ax[i] > p.u[i] + tol {
                active.push((i, p.u[i]));
                added = true;
            }
        }
        if !dropped && !added {
            return Some((x, yp));
        }
    }
    None
}

/// Diagonal equilibration `H~ = c D H D`, `q~ = c D q`, `A~ = E A D`,
/// `l~ = E l`, `u~ = E u`.
struct Scaling {
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

impl Scaling {
    fn identity(n: usize, m: usize) -> Self {
        Scaling { d: DVector::from_element(n, 1.0), e: DVector::from_element(m, 1.0), c: 1.0 }
    }

    /// Ruiz passes on the KKT matrix `[H A'; A 0]`, then a cost factor.
    fn ruiz(p: &QpProblem, passes: usize) -> Self {
        let (n, m) = (p.n(), p.m());
        let mut sc = Scaling::identity(n, m);
        let mut h = p.h.clone();
        let mut a = p.a.clone();
        let limit = |v: f64| if v < 1e-4 { 1.0 } else { v.min(1e4) };
        for _ in 0..passes {
            let dx = DVector::from_fn(n, |j, _| {
                let col = h.column(j).amax().max(if m > 0 { a.column(j).amax() } else { 0.0 });
                1.0 / limit(col).sqrt()
            });
            let dy = DVector::from_fn(m, |i, _| 1.0 / limit(a.row(i).amax()).sqrt());
            for j in 0..n {
                for i in 0..n {
                    h[(i, j)] *= dx[i] * dx[j];
                }
                for i in 0..m {
                    a[(i, j)] *= dy[i] * dx[j];
                }
            }
            sc.d.component_mul_assign(&dx);
            sc.e.component_mul_assign(&dy);
        }
        let mean_col = if n > 0 { (0..n).map(|j| h.column(j).amax()).sum::<f64>() / n as f64 } else { 0.0 };
        let q_norm = inf_norm(&p.q.component_mul(&sc.d));
        sc.c = 1.0 / limit(mean_col.max(q_norm));
        sc
    }

    fn apply(&self, p: &QpProblem) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let (n, m) = (p.n(), p.m());
        let h = DMatrix::from_fn(n, n, |i, j| self.c * self.d[i] * p.h[(i, j)] * self.d[j]);
        let q = p.q.component_mul(&self.d) * self.c;
        let a = DMatrix::from_fn(m, n, |i, j| self.e[i] * p.a[(i, j)] * self.d[j]);
        let l = p.l.component_mul(&self.e);
        let u = p.u.component_mul(&self.e);
        (h, q, a, l, u)
    }
}

/// Run the ADMM iteration, optionally warm-started from `(x, y)`.
pub fn solve(p: &QpProblem, s: &QpSettings, warm: Option<(&DVector<f64>, &DVector<f64>)>) -> QpSolution {
    p.check();
    let sc = if s.scaling > 0 { Scaling::ruiz(p, s.scaling) } else { Scaling::identity(p.n(), p.m()) };
    let (h, q, a, l, u) = sc.apply(p);
    let scaled = QpProblem { h: &h, q: &q, a: &a, l: &l, u: &u };
    let warm_scaled = warm.map(|(x, y)| (x.component_div(&sc.d), y.component_div(&sc.e) * sc.c));
    let mut out = iterate(&scaled, s, warm_scaled.as_ref().map(|(x, y)| (x, y)), &sc);
    out.x.component_mul_assign(&sc.d);
    out.y = out.y.component_mul(&sc.e) / sc.c;
    if out.status == QpStatus::Solved || out.status == QpStatus::MaxIterations {
        out.primal_residual = p.primal_violation(&out.x);
        out.dual_residual = p.stationarity(&out.x, &out.y);
    }
    if s.polish && !out.polished && matches!(out.status, QpStatus::Solved | QpStatus::MaxIterations) {
        let tol = (s.eps_abs * 10.0).max(1e-9);
        let z = p.a * &out.x;
        if let Some((xp, yp)) = polish(p, &z, &out.y, tol) {
            let prim = p.primal_violation(&xp);
            let dual = p.stationarity(&xp, &yp);
            if prim <= out.primal_residual.max(tol) && dual <= out.dual_residual.max(tol) {
                out.x = xp;
                out.y = yp;
                out.polished = true;
                out.primal_residual = prim;
                out.dual_residual = dual;
                if prim <= tol && dual <= tol {
                    out.status = QpStatus::Solved;
                }
            }
        }
    }
    out
}

fn iterate(p: &QpProblem, s: &QpSettings, warm: Option<(&DVector<f64>, &DVector<f64>)>, sc: &Scaling) -> QpSolution {
    let (n, m) = (p.n(), p.m());
    let mut rho_base = s.rho;
    let mut rho = DVector::from_iterator(m, (0..m).map(|i| row_rho(p.l[i], p.u[i], rho_base)));
    let mut x = warm.map(|w| w.0.clone()).unwrap_or_else(|| DVector::zeros(n));
    let mut y = warm.map(|w| w.1.clone()).unwrap_or_else(|| DVector::zeros(m));
    let mut z = clamp(&(p.a * &x), p.l, p.u);

    let mut objective_history = Vec::new();
    let mut step_history = Vec::new();
    if s.record_history {
        objective_history.push(p.objective(&x) / sc.c);
        step_history.push(0.0);
    }

    let finish = |x: DVector<f64>, y: DVector<f64>, status, iterations, res: Option<&Residuals>, oh, sh| QpSolution {
        x,
        y,
        status,
        iterations,
        polished: false,
        primal_residual: res.map_or(f64::NAN, |r| r.primal),
        dual_residual: res.map_or(f64::NAN, |r| r.dual),
        objective_history: oh,
        step_history: sh,
    };

    let Some(mut chol) = factor(p, s.sigma, &rho) else {
        return finish(x, y, QpStatus::NonConvex, 0, None, objective_history, step_history);
    };

    let mut status = QpStatus::MaxIterations;
    let mut last: Option<Residuals> = None;
    let mut next_polish = EARLY_POLISH_AT;
    let mut iterations = 0;
    for k in 1..=s.max_iter {
        iterations = k;
        let rhs = &x * s.sigma - p.q + p.a.transpose() * (rho.component_mul(&z) - &y);
        let xt = chol.solve(&rhs);
        let zt = p.a * &xt;
        let x_new = &xt * s.alpha + &x * (1.0 - s.alpha);
        let zr = &zt * s.alpha + &z * (1.0 - s.alpha);
        let z_new = clamp(&(&zr + y.component_div(&rho)), p.l, p.u);
        let y_new = &y + rho.component_mul(&(&zr - &z_new));
        let dx = &x_new - &x;
        let dy = &y_new - &y;
        x = x_new;
        z = z_new;
        y = y_new;
        if s.record_history {
            objective_history.push(p.objective(&x) / sc.c);
            step_history.push(inf_norm(&dx.component_mul(&sc.d)));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            status = QpStatus::NonFinite;
            break;
        }
        if k % s.check_every != 0 && k != s.max_iter {
            continue;
        }
        let r = residuals(p, s, &x, &z, &y);
        if r.primal <= r.eps_primal && r.dual <= r.eps_dual {
            last = Some(r);
            status = QpStatus::Solved;
            break;
        }
        if s.polish && k == next_polish {
            next_polish *= 2;
            // A consistent active-set guess certifies optimality on its own.
            if let Some((xp, yp)) = polish(p, &z, &y, r.eps_primal) {
                if p.stationarity(&xp, &yp) <= r.eps_dual {
                    let mut out = finish(xp, yp, QpStatus::Solved, k, Some(&r), objective_history, step_history);
                    out.polished = true;
                    out.primal_residual = p.primal_violation(&out.x);
                    out.dual_residual = p.stationarity(&out.x, &out.y);
                    return out;
                }
            }
        }
        if primal_certificate(p, &dy, s.eps_infeasible) {
            last = Some(r);
            status = QpStatus::PrimalInfeasible;
            break;
        }
        if dual_certificate(p, &dx, s.eps_infeasible) {
            last = Some(r);
            status = QpStatus::DualInfeasible;
            break;
        }
        if s.adaptive_rho && m > 0 && k % ADAPT_EVERY == 0 {
            let num = r.primal / r.primal_scale.max(1e-30);
            let den = r.dual / r.dual_scale.max(1e-30);
            let ratio = (num / den.max(1e-30)).sqrt();
            let new = (rho_base * ratio).clamp(RHO_MIN, RHO_MAX);
            if ratio.is_finite() && !(0.2..=5.0).contains(&(new / rho_base)) {
                rho_base = new;
                rho = DVector::from_iterator(m, (0..m).map(|i| row_rho(p.l[i], p.u[i], rho_base)));
                match factor(p, s.sigma, &rho) {
                    Some(c) => chol = c,
                    None => {
                        status = QpStatus::NonConvex;
                        last = Some(r);
                        break;
                    }
                }
            }
        }
        last = Some(r);
    }

    finish(x, y, status, iterations, last.as_ref(), objective_history, step_history)
}

/// Adapter for problems with a quadratic cost and linear constraints.
/// The multipliers of the last solve warm-start the next one.
#[derive(Debug, Default)]
pub struct QpAdapter {
    settings: QpSettings,
    last_y: Option<DVector<f64>>,
    stats: Option<Stats>,
}

impl QpAdapter {
    /// Multipliers of the last solve, in `[k; a]` row order.
    pub fn multipliers(&self) -> Option<&DVector<f64>> {
        self.last_y.as_ref()
    }
}

impl SolverAdapter for QpAdapter {
    fn name(&self) -> &str {
        "qp"
    }

    fn accepts(&self, class: ProblemClass) -> bool {
        matches!(class, ProblemClass::UnconstrainedQp | ProblemClass::LinearConstrainedQp)
    }

    fn setup(&mut self, _problem: &Problem, options: &SolverOptions) -> Result<(), SolverError> {
        self.settings = options.qp.clone();
        self.settings.record_history = true;
        self.last_y = None;
        self.stats = None;
        Ok(())
    }

    fn solve(&mut self, problem: &Problem, x0: &DVector<f64>, p: &DVector<f64>) -> Result<AdapterOutput, SolverError> {
        let n = problem.n_x();
        let h = problem.hessian(x0, p)?;
        let q = problem.gradient(&DVector::zeros(n), p)?;
        let lin = problem.linear_parts(p)?;
        let (nk, na) = (lin.c.len(), lin.b.len());
        let mut a = DMatrix::zeros(nk + na, n);
        a.rows_mut(0, nk).copy_from(&lin.m);
        a.rows_mut(nk, na).copy_from(&lin.a);
        let l = DVector::from_iterator(nk + na, lin.c.iter().chain(lin.b.iter()).map(|v| -v));
        let u = DVector::from_iterator(nk + na, (0..nk).map(|_| f64::INFINITY).chain(lin.b.iter().map(|v| -v)));
        let qp = QpProblem { h: &h, q: &q, a: &a, l: &l, u: &u };

        let y0 = self.last_y.take().filter(|y| y.len() == nk + na).unwrap_or_else(|| DVector::zeros(nk + na));
        let sol = solve(&qp, &self.settings, Some((x0, &y0)));
        let reason = match sol.status {
            QpStatus::Solved => Termination::Converged,
            QpStatus::MaxIterations => Termination::MaxIterations,
            QpStatus::PrimalInfeasible => Termination::Infeasible,
            QpStatus::DualInfeasible => Termination::Unbounded,
            QpStatus::NonConvex => Termination::Other("cost Hessian is not positive semidefinite".into()),
            QpStatus::NonFinite => Termination::NonFinite,
        };
        self.stats = Some(Stats {
            iterations: sol.iterations,
            objective_history: sol.objective_history.clone(),
            step_history: sol.step_history.clone(),
            duration: Default::default(),
        });
        if sol.status == QpStatus::Solved {
            self.last_y = Some(sol.y.clone());
        }
        Ok(AdapterOutput { x: sol.x, converged: sol.status == QpStatus::Solved, reason, iterations: sol.iterations })
    }

    fn stats(&self) -> Option<Stats> {
        self.stats.clone()
    }
}
