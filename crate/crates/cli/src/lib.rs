//! Command-line harness for the bundled example formulations.
//!
//! Each command reads a JSON [`config::TaskConfig`] (plus flag overrides),
//! runs one formulation from [`tasks`] and writes CSV. Exit codes: 0 on
//! success, 2 on bad input, 3 on solver failure.

pub mod config;
pub mod csv;
pub mod tasks;

use std::io::Write;

use thiserror::Error;

use config::TaskConfig;
use optask::urdf::{parse_urdf, JointType, CONTINUOUS_LIMIT};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

/// What a command produced: CSV text and whether the task succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub success: bool,
    /// Why the task failed, when it did.
    pub message: Option<String>,
}

impl Output {
    pub fn exit_code(&self) -> i32 {
        if self.success {
            0
        } else {
            3
        }
    }

    /// Write to `cfg.out`, or to `sink` when unset.
    pub fn emit(&self, cfg: &TaskConfig, sink: &mut dyn Write) -> Result<(), CliError> {
        match &cfg.out {
            Some(path) => std::fs::write(path, &self.text)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
            None => sink.write_all(self.text.as_bytes()).map_err(|e| CliError::Input(e.to_string())),
        }
    }
}

/// Summary of a robot description.
pub fn cmd_info(cfg: &TaskConfig) -> Result<String, CliError> {
    let doc = cfg.urdf_document()?;
    let urdf = parse_urdf(&doc).map_err(|e| CliError::Input(format!("{}: {e}", cfg.urdf)))?;
    let robot = cfg.robot(&[0])?;
    let mut s = String::new();
    s += &format!("robot: {}\n", urdf.name);
    s += &format!("base: {}\n", robot.base_link());
    s += &format!("ndof: {}\n", robot.ndof());
    let fixed = urdf.joints.iter().filter(|j| j.joint_type == JointType::Fixed).count();
    s += &format!("fixed joints: {fixed}\n");
    s += "joints:\n";
    for j in robot.actuated_joints() {
        let limits = if j.lower <= -CONTINUOUS_LIMIT && j.upper >= CONTINUOUS_LIMIT {
            "unbounded".to_string()
        } else {
            format!("[{}, {}]", csv::fmt_f64(j.lower), csv::fmt_f64(j.upper))
        };
        s += &format!("  {} {} {}\n", j.name, j.joint_type.as_str(), limits);
    }
    s += &format!("links: {}\n", robot.links().join(" "));
    Ok(s)
}

pub fn cmd_ik(cfg: &TaskConfig) -> Result<Output, CliError> {
    let out = tasks::inverse_kinematics(cfg)?;
    let n = out.q.len();
    let mut header: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    header.extend(["position_error", "orientation_error", "iterations", "attempts", "success"].map(String::from));
    let mut row: Vec<String> = out.q.iter().map(|v| csv::fmt_f64(*v)).collect();
    row.push(csv::fmt_f64(out.position_error));
    row.push(csv::fmt_f64(out.orientation_error));
    row.push(out.total_iterations.to_string());
    row.push(out.attempts.to_string());
    row.push(u8::from(out.reached).to_string());
    let message = (!out.reached).then(|| {
        format!("goal not reached: position error {:.3e} ({})", out.position_error, out.reason)
    });
    Ok(Output { text: csv::table(&header, &[row]), success: out.reached, message })
}

pub fn cmd_plan(cfg: &TaskConfig) -> Result<Output, CliError> {
    let report = tasks::plan(cfg)?;
    let n = report.q.nrows();
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("q{i}")));
    let rows: Vec<Vec<String>> = (0..report.q.ncols())
        .map(|c| {
            let mut r = vec![csv::fmt_f64(report.times[c])];
            r.extend(report.q.column(c).iter().map(|v| csv::fmt_f64(*v)));
            r
        })
        .collect();
    let message = (!report.success).then(|| format!("plan failed: {}", report.reason));
    Ok(Output { text: csv::table(&header, &rows), success: report.success, message })
}

pub fn cmd_track(cfg: &TaskConfig) -> Result<Output, CliError> {
    let report = tasks::track(cfg)?;
    let header = ["waypoint", "position_error", "solve_ms", "iterations", "manipulability"].map(String::from);
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.waypoint.to_string(),
                csv::fmt_f64(r.position_error),
                csv::fmt_f64(r.solve_ms),
                r.iterations.to_string(),
                csv::fmt_f64(r.manipulability),
            ]
        })
        .collect();
    Ok(Output { text: csv::table(&header, &rows), success: report.failure.is_none(), message: report.failure })
}

pub fn cmd_dims(cfg: &TaskConfig) -> Result<Output, CliError> {
    let rows = tasks::dims(cfg)?;
    let header = [
        "fraction",
        "distance",
        "position_success",
        "position_error",
        "pose_success",
        "pose_position_error",
        "pose_orientation_error",
    ]
    .map(String::from);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                csv::fmt_f64(r.fraction),
                csv::fmt_f64(r.distance),
                u8::from(r.position_reached).to_string(),
                csv::fmt_f64(r.position_error),
                u8::from(r.pose_reached).to_string(),
                csv::fmt_f64(r.pose_position_error),
                csv::fmt_f64(r.pose_orientation_error),
            ]
        })
        .collect();
    Ok(Output { text: csv::table(&header, &body), success: true, message: None })
}
