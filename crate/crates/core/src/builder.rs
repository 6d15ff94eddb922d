//! Assembles a time-horizon optimization task and transcribes it into a
//! canonical [`Problem`].
//!
//! State blocks are registered per model and derivative order as
//! `<model>/q`, `<model>/dq`, ... (robots) or `<model>/y`, `<model>/dy`, ...
//! (task models). With `derivs_align` every block has `T` columns; without
//! it, order `d` has `T - d` columns. With `optimize_time` a `dt` block of
//! `T - 1` time increments is added.
//!
//! Constraints are stored canonically: equalities as `expr == 0`,
//! inequalities as `expr >= 0`, both flattened to columns.

use std::collections::HashSet;

use indexmap::IndexMap;
use thiserror::Error;

use crate::container::{ContainerError, VariableContainer};
use crate::expr::{self, Expr, ExprError, LeafRegistry, StructureClass};
use crate::kinematics::RobotModel;
use crate::problem::{ConstraintInfo, ConstraintKind, Problem, ProblemError, Symbolic};
use crate::taskmodel::{state_name, StateModel, TaskModel};

/// Smallest admissible time increment when time is optimized.
pub const MIN_TIME_STEP: f64 = 1e-4;

/// Name of the time-increment block.
pub const DT_BLOCK: &str = "dt";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuilderError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("model name `{0}` is used twice")]
    DuplicateModel(String),
    #[error("model `{model}`: order {order} leaves no columns with T = {horizon}")]
    HorizonTooShort { model: String, order: usize, horizon: usize },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("model `{0}` is not a robot")]
    NotARobot(String),
    #[error("model `{model}` has no derivative order {order}")]
    UnknownOrder { model: String, order: usize },
    #[error("time index {t} out of range for {cols} columns")]
    TimeIndex { t: isize, cols: usize },
    #[error("`{0}` is already used")]
    DuplicateName(String),
    #[error("cost term `{name}` must be 1x1, got {rows}x{cols}")]
    NonScalarCost { name: String, rows: usize, cols: usize },
    #[error("time step has shape {0:?}, expected 1x1 or 1x{1}")]
    TimeStepShape((usize, usize), usize),
    #[error("constant constraint `{name}` row {row} is violated (value {value})")]
    ViolatedConstant { name: String, row: usize, value: f64 },
    #[error("nothing to optimize: no cost terms and no constraints")]
    EmptyProblem,
}

/// Canonical sense of a stored constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `expr == 0`
    Equality,
    /// `expr >= 0`
    Inequality,
}

#[derive(Debug, Clone)]
pub struct UserConstraint {
    pub sense: Sense,
    /// Column vector.
    pub expr: Expr,
}

#[derive(Debug, Clone)]
enum Model {
    Robot(RobotModel),
    Task(TaskModel),
}

impl Model {
    fn state(&self) -> &dyn StateModel {
        match self {
            Model::Robot(r) => r,
            Model::Task(t) => t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationBuilder {
    horizon: usize,
    derivs_align: bool,
    optimize_time: bool,
    models: IndexMap<String, Model>,
    registry: LeafRegistry,
    decision: VariableContainer,
    parameters: VariableContainer,
    costs: IndexMap<String, Expr>,
    constraints: IndexMap<String, UserConstraint>,
}

impl OptimizationBuilder {
    pub fn new(
        horizon: usize,
        robots: &[RobotModel],
        tasks: &[TaskModel],
        derivs_align: bool,
        optimize_time: bool,
    ) -> Result<Self, BuilderError> {
        if horizon == 0 {
            return Err(BuilderError::ZeroHorizon);
        }
        let mut b = OptimizationBuilder {
            horizon,
            derivs_align,
            optimize_time,
            models: IndexMap::new(),
            registry: LeafRegistry::new(),
            decision: VariableContainer::new(),
            parameters: VariableContainer::new(),
            costs: IndexMap::new(),
            constraints: IndexMap::new(),
        };
        let models = robots.iter().cloned().map(Model::Robot).chain(tasks.iter().cloned().map(Model::Task));
        for m in models {
            let name = m.state().name().to_string();
            if b.models.contains_key(&name) {
                return Err(BuilderError::DuplicateModel(name));
            }
            let (dim, symbol) = (m.state().dim(), m.state().symbol());
            for &d in m.state().time_deriv() {
                let cols = if derivs_align { horizon } else { horizon.saturating_sub(d) };
                if cols == 0 {
                    return Err(BuilderError::HorizonTooShort { model: name, order: d, horizon });
                }
                b.add_decision_variables(&state_name(&name, symbol, d), dim, cols)?;
            }
            b.models.insert(name, m);
        }
        if optimize_time {
            b.add_decision_variables(DT_BLOCK, 1, horizon - 1)?;
        }
        Ok(b)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn derivs_align(&self) -> bool {
        self.derivs_align
    }

    pub fn optimize_time(&self) -> bool {
        self.optimize_time
    }

    pub fn robot(&self, name: &str) -> Option<&RobotModel> {
        match self.models.get(name) {
            Some(Model::Robot(r)) => Some(r),
            _ => None,
        }
    }

    pub fn task(&self, name: &str) -> Option<&TaskModel> {
        match self.models.get(name) {
            Some(Model::Task(t)) => Some(t),
            _ => None,
        }
    }

    pub fn decision(&self) -> &VariableContainer {
        &self.decision
    }

    pub fn parameters(&self) -> &VariableContainer {
        &self.parameters
    }

    pub fn costs(&self) -> &IndexMap<String, Expr> {
        &self.costs
    }

    pub fn constraints(&self) -> &IndexMap<String, UserConstraint> {
        &self.constraints
    }

    fn state_block_name(&self, model: &str, order: usize) -> Result<String, BuilderError> {
        let m = self.models.get(model).ok_or_else(|| BuilderError::UnknownModel(model.to_string()))?;
        if !m.state().time_deriv().contains(&order) {
            return Err(BuilderError::UnknownOrder { model: model.to_string(), order });
        }
        Ok(state_name(model, m.state().symbol(), order))
    }

    /// Whole state block of `model` at derivative order `order`.
    pub fn get_model_states(&self, model: &str, order: usize) -> Result<Expr, BuilderError> {
        let name = self.state_block_name(model, order)?;
        Ok(self.decision.get(&name).expect("registered at construction").expr.clone())
    }

    /// Column `t` of a state block; negative `t` counts from the end.
    pub fn get_model_state(&self, model: &str, t: isize, order: usize) -> Result<Expr, BuilderError> {
        let block = self.get_model_states(model, order)?;
        let cols = block.cols();
        let idx = if t < 0 { cols as isize + t } else { t };
        if idx < 0 || idx as usize >= cols {
            return Err(BuilderError::TimeIndex { t, cols });
        }
        Ok(block.column_at(idx as usize))
    }

    /// The `1 x (T-1)` time-increment block when time is optimized.
    pub fn get_dt(&self) -> Option<Expr> {
        self.optimize_time.then(|| self.decision.get(DT_BLOCK).expect("registered").expr.clone())
    }

    pub fn add_decision_variables(&mut self, name: &str, rows: usize, cols: usize) -> Result<Expr, BuilderError> {
        if self.decision.contains(name) {
            return Err(BuilderError::DuplicateName(name.to_string()));
        }
        let e = self.registry.make_variable(name, rows, cols)?;
        self.decision.register(name, e.clone())?;
        Ok(e)
    }

    pub fn add_parameter(&mut self, name: &str, rows: usize, cols: usize) -> Result<Expr, BuilderError> {
        if self.parameters.contains(name) {
            return Err(BuilderError::DuplicateName(name.to_string()));
        }
        let e = self.registry.make_parameter(name, rows, cols)?;
        self.parameters.register(name, e.clone())?;
        Ok(e)
    }

    pub fn add_cost_term(&mut self, name: &str, term: &Expr) -> Result<(), BuilderError> {
        if !term.is_scalar() {
            return Err(BuilderError::NonScalarCost { name: name.to_string(), rows: term.rows(), cols: term.cols() });
        }
        if self.costs.contains_key(name) {
            return Err(BuilderError::DuplicateName(name.to_string()));
        }
        self.costs.insert(name.to_string(), term.clone());
        Ok(())
    }

    fn add_constraint(&mut self, name: &str, sense: Sense, e: Expr) -> Result<(), BuilderError> {
        if self.constraints.contains_key(name) {
            return Err(BuilderError::DuplicateName(name.to_string()));
        }
        self.constraints.insert(name.to_string(), UserConstraint { sense, expr: e.vec() });
        Ok(())
    }

    /// `lhs == rhs`; a 1x1 side broadcasts.
    pub fn add_equality_constraint(
        &mut self,
        name: &str,
        lhs: impl Into<Expr>,
        rhs: impl Into<Expr>,
    ) -> Result<(), BuilderError> {
        let e = lhs.into().try_sub(&rhs.into())?;
        self.add_constraint(name, Sense::Equality, e)
    }

    /// `lhs <= rhs`, stored as `rhs - lhs >= 0`.
    pub fn add_leq_inequality_constraint(
        &mut self,
        name: &str,
        lhs: impl Into<Expr>,
        rhs: impl Into<Expr>,
    ) -> Result<(), BuilderError> {
        let e = rhs.into().try_sub(&lhs.into())?;
        self.add_constraint(name, Sense::Inequality, e)
    }

    /// `lhs >= rhs`, stored as `lhs - rhs >= 0`.
    pub fn add_geq_inequality_constraint(
        &mut self,
        name: &str,
        lhs: impl Into<Expr>,
        rhs: impl Into<Expr>,
    ) -> Result<(), BuilderError> {
        let e = lhs.into().try_sub(&rhs.into())?;
        self.add_constraint(name, Sense::Inequality, e)
    }

    /// Position limits (order 0) and velocity limits (order 1, if
    /// registered) at every time index. Infinite bounds produce no rows.
    pub fn enforce_model_limits(&mut self, model: &str) -> Result<(), BuilderError> {
        let robot = match self.models.get(model) {
            Some(Model::Robot(r)) => r.clone(),
            Some(Model::Task(_)) => return Err(BuilderError::NotARobot(model.to_string())),
            None => return Err(BuilderError::UnknownModel(model.to_string())),
        };
        let lo = robot.lower_limits();
        let hi = robot.upper_limits();
        let vel = robot.velocity_limits();
        let mut sides: Vec<(usize, &str, Vec<f64>, bool)> = vec![
            (0, "lower", lo.iter().copied().collect(), true),
            (0, "upper", hi.iter().copied().collect(), false),
        ];
        if robot.time_deriv().contains(&1) {
            sides.push((1, "lower", vel.iter().map(|v| -v).collect(), true));
            sides.push((1, "upper", vel.iter().copied().collect(), false));
        }
        for (order, side, bound, is_lower) in sides {
            let rows: Vec<usize> = (0..bound.len()).filter(|&i| bound[i].is_finite()).collect();
            if rows.is_empty() {
                continue;
            }
            let states = self.get_model_states(model, order)?.select_rows(&rows);
            let limit = Expr::from_fn(rows.len(), states.cols(), |r, _| expr::Scalar::constant(bound[rows[r]]));
            let name = format!("{}/{side}", self.state_block_name(model, order)?);
            if is_lower {
                self.add_geq_inequality_constraint(&name, &states, &limit)?;
            } else {
                self.add_leq_inequality_constraint(&name, &states, &limit)?;
            }
        }
        Ok(())
    }

    /// Explicit Euler: `s[d-1][t+1] = s[d-1][t] + dt[t] * s[d][t]` over the
    /// available columns. `dt` is 1x1 or one entry per step; it is ignored
    /// when time is optimized (the `dt` block is used instead).
    pub fn integrate_model_states(&mut self, model: &str, order: usize, dt: impl Into<Expr>) -> Result<(), BuilderError> {
        if order == 0 {
            return Err(BuilderError::UnknownOrder { model: model.to_string(), order });
        }
        let prev = self.get_model_states(model, order - 1)?;
        let cur = self.get_model_states(model, order)?;
        let n = (prev.cols() - 1).min(cur.cols());
        let dt = match self.get_dt() {
            Some(block) => block,
            None => dt.into(),
        };
        let uniform = dt.is_scalar();
        if !uniform && (dt.rows() != 1 || dt.cols() < n) {
            return Err(BuilderError::TimeStepShape(dt.shape(), n));
        }
        let step = |t: usize| if uniform { dt.at(0, 0) } else { dt.at(0, t) };
        let residual = Expr::from_fn(prev.rows(), n, |r, t| {
            prev.at(r, t + 1).sub(prev.at(r, t)).sub(&step(t).mul(cur.at(r, t)))
        });
        let name = format!("{}/integration", self.state_block_name(model, order)?);
        self.add_equality_constraint(&name, residual, 0.0)?;
        self.ensure_dt_bounds()
    }

    fn ensure_dt_bounds(&mut self) -> Result<(), BuilderError> {
        let name = format!("{DT_BLOCK}/lower");
        match self.get_dt() {
            Some(dt) if !dt.is_empty() && !self.constraints.contains_key(&name) => {
                self.add_geq_inequality_constraint(&name, dt, MIN_TIME_STEP)
            }
            _ => Ok(()),
        }
    }

    /// Transcribe into the canonical form. Rows that are numeric constants
    /// are dropped (with a warning) when satisfied and rejected otherwise.
    pub fn build(&self) -> Result<Problem, BuilderError> {
        if self.costs.is_empty() && self.constraints.is_empty() {
            return Err(BuilderError::EmptyProblem);
        }
        let mut this = self.clone();
        this.ensure_dt_bounds()?;

        let x = this.decision.flat_expr();
        let p = this.parameters.flat_expr();
        let xset: HashSet<u64> = expr::free_leaf_ids(&x);
        let terms: Vec<expr::Scalar> = this.costs.values().map(|c| c.at(0, 0).clone()).collect();
        let f = Expr::scalar(terms.iter().skip(1).fold(
            terms.first().cloned().unwrap_or_else(|| expr::Scalar::constant(0.0)),
            |acc, t| acc.add(t),
        ));

        let mut parts: [(Vec<Expr>, Vec<Expr>, usize); 4] = Default::default();
        let mut index = Vec::new();
        for (name, uc) in &this.constraints {
            let keep: Vec<usize> = (0..uc.expr.rows())
                .filter(|&r| match uc.expr.at(r, 0).as_const() {
                    None => true,
                    Some(v) => {
                        let ok = match uc.sense {
                            Sense::Equality => v == 0.0,
                            Sense::Inequality => v >= 0.0,
                        };
                        if ok {
                            log::warn!("constraint `{name}` row {r} is constant and satisfied; dropped");
                        }
                        !ok
                    }
                })
                .collect();
            if let Some(&r) = keep.iter().find(|&&r| uc.expr.at(r, 0).is_const()) {
                let value = uc.expr.at(r, 0).as_const().expect("constant");
                return Err(BuilderError::ViolatedConstant { name: name.clone(), row: r, value });
            }
            if keep.is_empty() {
                continue;
            }
            let e = uc.expr.select_rows(&keep);
            let linear = expr::classify_in(&e, &xset)? <= StructureClass::Linear;
            let kind = match (uc.sense, linear) {
                (Sense::Inequality, true) => ConstraintKind::LinearInequality,
                (Sense::Equality, true) => ConstraintKind::LinearEquality,
                (Sense::Inequality, false) => ConstraintKind::NonlinearInequality,
                (Sense::Equality, false) => ConstraintKind::NonlinearEquality,
            };
            let slot = &mut parts[kind as usize];
            let start = slot.2;
            if linear {
                let m = expr::jacobian(&e, &x)?;
                let c = expr::substitute(&e, &[(&x, &Expr::zeros(x.rows(), 1))])?;
                slot.0.push(m);
                slot.1.push(c);
            } else {
                slot.0.push(e.clone());
            }
            slot.2 += e.rows();
            index.push(ConstraintInfo { name: name.clone(), kind, rows: start..slot.2 });
        }

        let n = x.len();
        let stack = |v: &[Expr], cols: usize| -> Result<Expr, ExprError> {
            if v.is_empty() {
                return Ok(Expr::zeros(0, cols));
            }
            Expr::vcat(&v.iter().collect::<Vec<_>>())
        };
        let [k, a, g, h] = parts;
        let sym = Symbolic {
            m: stack(&k.0, n)?,
            c: stack(&k.1, 1)?,
            a_mat: stack(&a.0, n)?,
            b: stack(&a.1, 1)?,
            g: stack(&g.0, 1)?,
            h: stack(&h.0, 1)?,
            x,
            p,
            f,
        };
        Ok(Problem::assemble(this.decision, this.parameters, sym, index)?)
    }
}
