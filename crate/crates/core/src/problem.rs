//! Canonical constrained program over decision vector `X` and parameters `P`:
//!
//! ```text
//! min f(X; P)
//! s.t. k = M(P) X + c(P) >= 0
//!      a = A(P) X + b(P)  = 0
//!      g(X; P)           >= 0
//!      h(X; P)            = 0
//! ```
//!
//! Every evaluator is compiled once at build time and takes `[X; P]`.
//! Matrices are dense.

use std::collections::HashSet;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::container::{ContainerError, VariableContainer};
use crate::expr::{self, Expr, ExprError, Function, StructureClass};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("{what} has length {got}, expected {expected}")]
    Length { what: &'static str, expected: usize, got: usize },
}

/// The six problem types, by cost structure and constraint structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemClass {
    UnconstrainedQp,
    LinearConstrainedQp,
    NonlinearConstrainedQp,
    UnconstrainedNlp,
    LinearConstrainedNlp,
    NonlinearCostAndConstraints,
}

impl ProblemClass {
    pub const ALL: [ProblemClass; 6] = [
        ProblemClass::UnconstrainedQp,
        ProblemClass::LinearConstrainedQp,
        ProblemClass::NonlinearConstrainedQp,
        ProblemClass::UnconstrainedNlp,
        ProblemClass::LinearConstrainedNlp,
        ProblemClass::NonlinearCostAndConstraints,
    ];

    pub fn from_structure(quadratic_cost: bool, linear_constraints: bool, nonlinear_constraints: bool) -> Self {
        match (quadratic_cost, nonlinear_constraints, linear_constraints) {
            (true, true, _) => ProblemClass::NonlinearConstrainedQp,
            (true, false, true) => ProblemClass::LinearConstrainedQp,
            (true, false, false) => ProblemClass::UnconstrainedQp,
            (false, true, _) => ProblemClass::NonlinearCostAndConstraints,
            (false, false, true) => ProblemClass::LinearConstrainedNlp,
            (false, false, false) => ProblemClass::UnconstrainedNlp,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemClass::UnconstrainedQp => "unconstrained-qp",
            ProblemClass::LinearConstrainedQp => "linear-constrained-qp",
            ProblemClass::NonlinearConstrainedQp => "nonlinear-constrained-qp",
            ProblemClass::UnconstrainedNlp => "unconstrained-nlp",
            ProblemClass::LinearConstrainedNlp => "linear-constrained-nlp",
            ProblemClass::NonlinearCostAndConstraints => "nonlinear-cost-and-constraints",
        }
    }

    pub fn has_quadratic_cost(self) -> bool {
        matches!(
            self,
            ProblemClass::UnconstrainedQp | ProblemClass::LinearConstrainedQp | ProblemClass::NonlinearConstrainedQp
        )
    }

    pub fn has_nonlinear_constraints(self) -> bool {
        matches!(self, ProblemClass::NonlinearConstrainedQp | ProblemClass::NonlinearCostAndConstraints)
    }

    pub fn is_unconstrained(self) -> bool {
        matches!(self, ProblemClass::UnconstrainedQp | ProblemClass::UnconstrainedNlp)
    }
}

impl std::fmt::Display for ProblemClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which canonical partition a constraint block landed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// Rows of `k >= 0`.
    LinearInequality,
    /// Rows of `a = 0`.
    LinearEquality,
    /// Rows of `g >= 0`.
    NonlinearInequality,
    /// Rows of `h = 0`.
    NonlinearEquality,
}

impl ConstraintKind {
    pub fn is_equality(self) -> bool {
        matches!(self, ConstraintKind::LinearEquality | ConstraintKind::NonlinearEquality)
    }
}

/// Row range of a named constraint block inside its partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintInfo {
    pub name: String,
    pub kind: ConstraintKind,
    pub rows: Range<usize>,
}

/// Symbolic pieces of the canonical form.
#[derive(Debug, Clone)]
pub struct Symbolic {
    pub x: Expr,
    pub p: Expr,
    pub f: Expr,
    pub m: Expr,
    pub c: Expr,
    pub a_mat: Expr,
    pub b: Expr,
    pub g: Expr,
    pub h: Expr,
}

/// Linear partitions at fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParts {
    pub m: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Constraint values at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintValues {
    pub k: DVector<f64>,
    pub a: DVector<f64>,
    pub g: DVector<f64>,
    pub h: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Largest `|a_i|`, `|h_i|`.
    pub max_equality_residual: f64,
    /// Largest negative part of `k_i`, `g_i`.
    pub max_inequality_violation: f64,
    /// Block with the largest violation, if any row is violated at all.
    pub worst_constraint: Option<String>,
    /// Largest violation per block, in block order.
    pub per_constraint: Vec<(String, f64)>,
    pub tol: f64,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.max_equality_residual.max(self.max_inequality_violation)
    }

    pub fn is_feasible(&self) -> bool {
        self.max_violation() <= self.tol
    }
}

#[derive(Debug)]
struct Evaluators {
    f: Function,
    grad: Function,
    hess: Function,
    linear: Function,
    g: Function,
    jg: Function,
    h: Function,
    jh: Function,
    /// Jacobian of the least-squares residuals of `f`, when detected.
    jr: Option<Function>,
}

#[derive(Debug)]
pub struct Problem {
    decision: VariableContainer,
    parameters: VariableContainer,
    class: ProblemClass,
    cost_class: StructureClass,
    index: Vec<ConstraintInfo>,
    sym: Symbolic,
    eval: Evaluators,
    n_x: usize,
    n_p: usize,
}

impl Problem {
    /// Compile a canonical problem. `index` must describe the rows of
    /// `m`/`a_mat`/`g`/`h` in `sym`.
    pub(crate) fn assemble(
        decision: VariableContainer,
        parameters: VariableContainer,
        sym: Symbolic,
        index: Vec<ConstraintInfo>,
    ) -> Result<Problem, ProblemError> {
        let xset: HashSet<u64> = expr::free_leaf_ids(&sym.x);
        let cost_class = expr::classify_in(&sym.f, &xset)?;
        let class = ProblemClass::from_structure(
            cost_class <= StructureClass::Quadratic,
            sym.m.rows() + sym.a_mat.rows() > 0,
            sym.g.rows() + sym.h.rows() > 0,
        );

        let grad = expr::gradient(&sym.f, &sym.x)?;
        let hess = expr::hessian(&sym.f, &sym.x)?;
        let jg = expr::jacobian(&sym.g, &sym.x)?;
        let jh = expr::jacobian(&sym.h, &sym.x)?;
        let residuals = match sym.f.elements() {
            [f] => expr::least_squares_residuals(f, &xset).filter(|r| !r.is_empty()),
            _ => None,
        };
        let jr = match residuals {
            Some(r) => Some(expr::jacobian(&Expr::vector(r), &sym.x)?),
            None => None,
        };

        let jobs: Vec<Vec<&Expr>> = vec![
            vec![&sym.f],
            vec![&grad],
            vec![&hess],
            vec![&sym.m, &sym.c, &sym.a_mat, &sym.b],
            vec![&sym.g],
            vec![&jg],
            vec![&sym.h],
            vec![&jh],
        ];
        let jobs: Vec<Vec<&Expr>> = jobs.into_iter().chain(jr.iter().map(|j| vec![j])).collect();
        let inputs = [&sym.x, &sym.p];
        let mut compiled = par::map(&jobs, |outs| Function::new(&inputs, outs))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?
            .into_iter();
        let mut next = || compiled.next().expect("one function per job");
        let eval = Evaluators {
            f: next(),
            grad: next(),
            hess: next(),
            linear: next(),
            g: next(),
            jg: next(),
            h: next(),
            jh: next(),
            jr: jr.as_ref().map(|_| next()),
        };
        let (n_x, n_p) = (sym.x.len(), sym.p.len());
        Ok(Problem { decision, parameters, class, cost_class, index, sym, eval, n_x, n_p })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn n_k(&self) -> usize {
        self.sym.m.rows()
    }

    pub fn n_a(&self) -> usize {
        self.sym.a_mat.rows()
    }

    pub fn n_g(&self) -> usize {
        self.sym.g.rows()
    }

    pub fn n_h(&self) -> usize {
        self.sym.h.rows()
    }

    pub fn decision(&self) -> &VariableContainer {
        &self.decision
    }

    pub fn parameters(&self) -> &VariableContainer {
        &self.parameters
    }

    pub fn classification(&self) -> ProblemClass {
        self.class
    }

    /// Structure of `f` in `X`.
    pub fn cost_structure(&self) -> StructureClass {
        self.cost_class
    }

    pub fn constraint_index(&self) -> &[ConstraintInfo] {
        &self.index
    }

    pub fn symbolic(&self) -> &Symbolic {
        &self.sym
    }

    fn input(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<Vec<f64>, ProblemError> {
        if x.len() != self.n_x {
            return Err(ProblemError::Length { what: "X", expected: self.n_x, got: x.len() });
        }
        if p.len() != self.n_p {
            return Err(ProblemError::Length { what: "P", expected: self.n_p, got: p.len() });
        }
        let mut v = Vec::with_capacity(self.n_x + self.n_p);
        v.extend_from_slice(x.as_slice());
        v.extend_from_slice(p.as_slice());
        Ok(v)
    }

    fn run(&self, f: &Function, x: &DVector<f64>, p: &DVector<f64>) -> Result<Vec<DMatrix<f64>>, ProblemError> {
        Ok(f.eval(&self.input(x, p)?)?)
    }

    pub fn objective(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<f64, ProblemError> {
        Ok(self.run(&self.eval.f, x, p)?[0][0])
    }

    /// Whether `f` was recognized as a weighted sum of squares.
    pub fn is_least_squares(&self) -> bool {
        self.eval.jr.is_some()
    }

    /// `2 J_r' J_r` for least-squares costs `f = sum r_i^2 + const`.
    pub fn gauss_newton_hessian(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<Option<DMatrix<f64>>, ProblemError> {
        let Some(jr) = &self.eval.jr else {
            return Ok(None);
        };
        let j = self.run(jr, x, p)?.remove(0);
        Ok(Some(j.transpose() * &j * 2.0))
    }

    pub fn gradient(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        let g = self.run(&self.eval.grad, x, p)?.remove(0);
        Ok(DVector::from_column_slice(g.as_slice()))
    }

    /// Exact Hessian of `f`; symmetric by construction.
    pub fn hessian(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>, ProblemError> {
        Ok(self.run(&self.eval.hess, x, p)?.remove(0))
    }

    /// `(M, c, A, b)` at parameters `p`.
    pub fn linear_parts(&self, p: &DVector<f64>) -> Result<LinearParts, ProblemError> {
        let mut out = self.run(&self.eval.linear, &DVector::zeros(self.n_x), p)?.into_iter();
        let mut next = || out.next().expect("four outputs");
        let m = next();
        let c = DVector::from_column_slice(next().as_slice());
        let a = next();
        let b = DVector::from_column_slice(next().as_slice());
        Ok(LinearParts { m, c, a, b })
    }

    pub fn g_values(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        Ok(DVector::from_column_slice(self.run(&self.eval.g, x, p)?[0].as_slice()))
    }

    pub fn h_values(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        Ok(DVector::from_column_slice(self.run(&self.eval.h, x, p)?[0].as_slice()))
    }

    pub fn g_jacobian(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>, ProblemError> {
        Ok(self.run(&self.eval.jg, x, p)?.remove(0))
    }

    pub fn h_jacobian(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>, ProblemError> {
        Ok(self.run(&self.eval.jh, x, p)?.remove(0))
    }

    pub fn constraints(&self, x: &DVector<f64>, p: &DVector<f64>) -> Result<ConstraintValues, ProblemError> {
        let lin = self.linear_parts(p)?;
        Ok(ConstraintValues {
            k: &lin.m * x + &lin.c,
            a: &lin.a * x + &lin.b,
            g: self.g_values(x, p)?,
            h: self.h_values(x, p)?,
        })
    }

    /// Residuals of every constraint block at `(x, p)`.
    pub fn feasibility(&self, x: &DVector<f64>, p: &DVector<f64>, tol: f64) -> Result<FeasibilityReport, ProblemError> {
        Ok(self.report(&self.constraints(x, p)?, tol))
    }

    pub fn report(&self, v: &ConstraintValues, tol: f64) -> FeasibilityReport {
        let mut eq = 0.0f64;
        let mut ineq = 0.0f64;
        let mut worst: Option<(String, f64)> = None;
        let mut per = Vec::with_capacity(self.index.len());
        for info in &self.index {
            let vals = match info.kind {
                ConstraintKind::LinearInequality => &v.k,
                ConstraintKind::LinearEquality => &v.a,
                ConstraintKind::NonlinearInequality => &v.g,
                ConstraintKind::NonlinearEquality => &v.h,
            };
            let rows = vals.rows(info.rows.start, info.rows.len());
            let viol = if info.kind.is_equality() {
                rows.iter().fold(0.0f64, |m, r| m.max(if r.is_nan() { f64::INFINITY } else { r.abs() }))
            } else {
                rows.iter().fold(0.0f64, |m, r| m.max(if r.is_nan() { f64::INFINITY } else { (-r).max(0.0) }))
            };
            if info.kind.is_equality() {
                eq = eq.max(viol);
            } else {
                ineq = ineq.max(viol);
            }
            if viol > 0.0 && worst.as_ref().is_none_or(|(_, w)| viol > *w) {
                worst = Some((info.name.clone(), viol));
            }
            per.push((info.name.clone(), viol));
        }
        FeasibilityReport {
            max_equality_residual: eq,
            max_inequality_violation: ineq,
            worst_constraint: worst.map(|(n, _)| n),
            per_constraint: per,
            tol,
        }
    }
}
