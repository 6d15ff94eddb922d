use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optask_cli::config::{Overrides, TaskConfig};
use optask_cli::{cmd_dims, cmd_ik, cmd_info, cmd_plan, cmd_track, CliError, Output};

#[derive(Parser)]
#[command(name = "optask", version, about = "Run task-space optimization examples and write CSV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print degrees of freedom, joints and limits of a URDF.
    Info {
        /// URDF path or builtin:<name> (planar_2r, arm6, slider).
        urdf: String,
        #[arg(long)]
        base: Option<String>,
    },
    /// End-pose inverse kinematics.
    Ik(Common),
    /// Collision-free trajectory plan.
    Plan(Common),
    /// Figure-of-eight tracking with warm-started end-pose solves.
    Track(Common),
    /// Reach sweep: position-only versus full-pose goals.
    Dims(Common),
}

#[derive(Args)]
struct Common {
    /// JSON task configuration; defaults apply when absent.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    urdf: Option<String>,
    #[arg(long)]
    tip: Option<String>,
    #[arg(long)]
    base: Option<String>,
    /// Horizon length.
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Solver tag: sqp, qp or bfgs.
    #[arg(long)]
    solver: Option<String>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<TaskConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => TaskConfig::load(p)?,
            None => TaskConfig::default(),
        };
        cfg.apply(&Overrides {
            urdf: self.urdf.clone(),
            tip: self.tip.clone(),
            base: self.base.clone(),
            horizon: self.horizon,
            dt: self.dt,
            solver: self.solver.clone(),
            out: self.out.clone(),
        });
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let (common, cmd): (&Common, fn(&TaskConfig) -> Result<Output, CliError>) = match &cli.command {
        Command::Info { urdf, base } => {
            let cfg = TaskConfig { urdf: urdf.clone(), base: base.clone(), ..TaskConfig::default() };
            let cfg = TaskConfig { tip: cfg.robot(&[0])?.base_link().to_string(), ..cfg };
            print!("{}", cmd_info(&cfg)?);
            return Ok(0);
        }
        Command::Ik(c) => (c, cmd_ik),
        Command::Plan(c) => (c, cmd_plan),
        Command::Track(c) => (c, cmd_track),
        Command::Dims(c) => (c, cmd_dims),
    };
    let cfg = common.load()?;
    let out = cmd(&cfg)?;
    out.emit(&cfg, &mut std::io::stdout().lock())?;
    if let Some(m) = &out.message {
        eprintln!("{m}");
    }
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
