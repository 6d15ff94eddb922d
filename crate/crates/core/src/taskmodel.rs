//! Task-space trajectory models: named state blocks of arbitrary dimension
//! without kinematics. Coupling to a robot is up to the user, typically via
//! equality constraints.

use thiserror::Error;

use crate::kinematics::{check_orders, RobotModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskModelError {
    #[error("task model `{0}` must have dimension >= 1")]
    ZeroDimension(String),
    #[error("derivative orders must be distinct and include 0, got {0:?}")]
    BadOrders(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskModel {
    name: String,
    dim: usize,
    time_deriv: Vec<usize>,
}

impl TaskModel {
    pub fn new(name: &str, dim: usize, time_deriv: &[usize]) -> Result<Self, TaskModelError> {
        if dim == 0 {
            return Err(TaskModelError::ZeroDimension(name.to_string()));
        }
        let time_deriv = check_orders(time_deriv).ok_or_else(|| TaskModelError::BadOrders(time_deriv.to_vec()))?;
        Ok(TaskModel { name: name.to_string(), dim, time_deriv })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time_deriv(&self) -> &[usize] {
        &self.time_deriv
    }
}

/// Anything the builder can lay out as a state trajectory.
pub trait StateModel {
    fn name(&self) -> &str;
    /// Rows of each state block.
    fn dim(&self) -> usize;
    fn time_deriv(&self) -> &[usize];
    /// Base symbol of the state blocks (`q` for robots, `y` for tasks).
    fn symbol(&self) -> &'static str;
}

impl StateModel for TaskModel {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn time_deriv(&self) -> &[usize] {
        &self.time_deriv
    }
    fn symbol(&self) -> &'static str {
        "y"
    }
}

impl StateModel for RobotModel {
    fn name(&self) -> &str {
        RobotModel::name(self)
    }
    fn dim(&self) -> usize {
        self.ndof()
    }
    fn time_deriv(&self) -> &[usize] {
        RobotModel::time_deriv(self)
    }
    fn symbol(&self) -> &'static str {
        "q"
    }
}

/// Block name of derivative order `d`: `<model>/q`, `<model>/dq`,
/// `<model>/ddq`, `<model>/d3q`, ...
pub fn state_name(model: &str, symbol: &str, d: usize) -> String {
    match d {
        0..=2 => format!("{model}/{}{symbol}", "d".repeat(d)),
        _ => format!("{model}/d{d}{symbol}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_examples() {
        let t = TaskModel::new("eff_path", 3, &[0, 1]).unwrap();
        assert_eq!((t.dim(), t.time_deriv()), (3, &[0, 1][..]));
        let a = TaskModel::new("angle", 1, &[0]).unwrap();
        assert_eq!(a.symbol(), "y");
        assert_eq!(TaskModel::new("z", 0, &[0]), Err(TaskModelError::ZeroDimension("z".into())));
        assert!(matches!(TaskModel::new("z", 2, &[0, 1, 1]), Err(TaskModelError::BadOrders(_))));
        assert!(matches!(TaskModel::new("z", 2, &[1]), Err(TaskModelError::BadOrders(_))));
    }

    #[test]
    fn orders_sorted() {
        assert_eq!(TaskModel::new("p", 2, &[1, 0]).unwrap().time_deriv(), &[0, 1]);
    }

    #[test]
    fn state_names() {
        assert_eq!(state_name("r", "q", 0), "r/q");
        assert_eq!(state_name("r", "q", 1), "r/dq");
        assert_eq!(state_name("r", "q", 2), "r/ddq");
        assert_eq!(state_name("p", "y", 3), "p/d3y");
    }
}
