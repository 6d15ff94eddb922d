//! Task specification for robot inverse kinematics, trajectory optimization
//! and receding-horizon control.
//!
//! A task is declared symbolically (robots loaded from URDF, decision
//! variables, parameters, cost terms, constraints), transcribed into a
//! canonical constrained nonlinear program, classified, and solved by native
//! solvers that support warm starts and online parameter updates.

pub mod builder;
pub mod container;
pub mod expr;
pub mod fixtures;
pub mod kinematics;
pub mod par;
pub mod problem;
pub mod solvers;
pub mod taskmodel;
pub mod urdf;

pub use builder::OptimizationBuilder;
pub use container::VariableContainer;
pub use expr::{Expr, NamedValues};
pub use kinematics::RobotModel;
pub use problem::{Problem, ProblemClass};
pub use taskmodel::TaskModel;
