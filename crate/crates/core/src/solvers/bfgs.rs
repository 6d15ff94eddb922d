//! Quasi-Newton descent for unconstrained problems.
//!
//! Keeps a dense Hessian approximation starting from the identity, rescaled
//! after the first step by `y's / y'y`. Steps solve `B d = -grad` and are
//! accepted by Armijo backtracking. Updates are Powell-damped so `B` stays
//! positive definite.

use nalgebra::{DMatrix, DVector};

use super::linalg::{damped_bfgs_update, inf_norm};
use super::{AdapterOutput, SolverAdapter, SolverError, SolverOptions, Stats, Termination};
use crate::problem::{Problem, ProblemClass};

#[derive(Debug, Default)]
pub struct BfgsAdapter {
    options: SolverOptions,
    stats: Option<Stats>,
}

impl SolverAdapter for BfgsAdapter {
    fn name(&self) -> &str {
        "bfgs"
    }

    fn accepts(&self, class: ProblemClass) -> bool {
        class.is_unconstrained()
    }

    fn setup(&mut self, _problem: &Problem, options: &SolverOptions) -> Result<(), SolverError> {
        self.options = options.clone();
        self.stats = None;
        Ok(())
    }

    fn solve(&mut self, problem: &Problem, x0: &DVector<f64>, p: &DVector<f64>) -> Result<AdapterOutput, SolverError> {
        let o = &self.options;
        let n = x0.len();
        let mut x = x0.clone();
        let mut f = problem.objective(&x, p)?;
        let mut g = problem.gradient(&x, p)?;
        let mut b = DMatrix::<f64>::identity(n, n);
        let mut objective_history = vec![f];
        let mut step_history = vec![0.0];
        let mut first = true;

        // Every pass appends one history entry, so histories hold
        // `iterations + 1` values.
        let mut iterations = 0;
        let reason = loop {
            if iterations == o.max_iter {
                break Termination::MaxIterations;
            }
            iterations += 1;
            if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
                objective_history.push(f);
                step_history.push(0.0);
                break Termination::NonFinite;
            }
            if inf_norm(&g) <= o.kkt_tol {
                objective_history.push(f);
                step_history.push(0.0);
                break Termination::Converged;
            }
            let mut d = match b.clone().cholesky() {
                Some(c) => -c.solve(&g),
                None => -g.clone(),
            };
            if g.dot(&d) >= 0.0 {
                b = DMatrix::identity(n, n);
                d = -g.clone();
            }
            let slope = g.dot(&d);

            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=o.max_backtracks {
                let xt = &x + &d * t;
                let ft = problem.objective(&xt, p)?;
                if ft.is_finite() && ft <= f + o.armijo * t * slope {
                    accepted = Some((xt, ft));
                    break;
                }
                t *= o.backtrack;
            }
            let Some((xn, fnew)) = accepted else {
                objective_history.push(f);
                step_history.push(0.0);
                break Termination::LineSearchFailed;
            };
            let s = &xn - &x;
            let gn = problem.gradient(&xn, p)?;
            let yv = &gn - &g;
            if first {
                let yy = yv.dot(&yv);
                let sy = s.dot(&yv);
                if sy > 0.0 && yy > 0.0 {
                    b *= yy / sy;
                }
                first = false;
            }
            damped_bfgs_update(&mut b, &s, &yv);
            let step = inf_norm(&s);
            x = xn;
            f = fnew;
            g = gn;
            objective_history.push(f);
            step_history.push(step);
            if step <= o.step_tol {
                break if inf_norm(&g) <= o.kkt_tol.sqrt() {
                    Termination::Converged
                } else {
                    Termination::Other("step below tolerance before stationarity".into())
                };
            }
        };

        self.stats = Some(Stats { iterations, objective_history, step_history, duration: Default::default() });
        Ok(AdapterOutput { converged: reason == Termination::Converged, x, reason, iterations })
    }

    fn stats(&self) -> Option<Stats> {
        self.stats.clone()
    }
}
