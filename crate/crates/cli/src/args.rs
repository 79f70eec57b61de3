use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "teleop",
    version,
    about = "Multi-slave bilateral teleoperation under Round-Robin and Try-Once-Discard scheduling",
    args_override_self = true
)]
pub struct Cli {
    /// Flat key=value file ('#' comments); keys are the long flag names of
    /// the subcommand. Flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a closed-loop scenario and write its CSV trace.
    Simulate(SimulateArgs),
    /// Maximum MATI for one gain set, delay bound and protocol.
    Analyze(AnalyzeArgs),
    /// Recompute the MATI and delay-horizon tables.
    Tables(TablesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    /// No external forces, reference initial poses.
    Free,
    /// Bounded operator force 25 + 10 sin t on the master.
    Force,
    /// Rectangular operator force, slaves against a stiff wall.
    Contact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Rr,
    Tod,
}

#[derive(Debug, Args)]
pub struct GainArgs {
    /// Proportional gain: one value for all slaves, a comma list per slave,
    /// or per-joint diagonals joined by ':' (e.g. "10,20,30" or "20:25").
    #[arg(long, default_value = "20")]
    pub kp: String,
    /// Damping gain, same syntax as --kp.
    #[arg(long, default_value = "20")]
    pub kd: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ScenarioArg::Free)]
    pub scenario: ScenarioArg,
    #[arg(long, value_enum, default_value_t = ProtocolArg::Rr)]
    pub protocol: ProtocolArg,
    #[arg(long, default_value_t = 3)]
    pub slaves: usize,
    #[command(flatten)]
    pub gains: GainArgs,
    /// Maximum allowable transmission interval (s).
    #[arg(long, default_value_t = 0.14)]
    pub mati: f64,
    /// Maximum allowable delay (s).
    #[arg(long, default_value_t = 0.1)]
    pub mad: f64,
    /// Sampling interval (s); defaults to the MATI.
    #[arg(long)]
    pub sampling_interval: Option<f64>,
    /// Delay T_k = base + amplitude·|sin s_k| (s).
    #[arg(long, default_value_t = 0.04)]
    pub delay_base: f64,
    #[arg(long, default_value_t = 0.06)]
    pub delay_amplitude: f64,
    /// Simulated time (s).
    #[arg(long, default_value_t = 20.0)]
    pub duration: f64,
    /// RK4 step (s); 1e-4 for contact, 1e-3 otherwise.
    #[arg(long)]
    pub step: Option<f64>,
    /// Log every n-th step; defaults to one row per 10 ms.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Solve the stability certificate and log the Lyapunov functional.
    #[arg(long)]
    pub certificate: bool,
    /// Fraction of the trace used for the steady-state summary.
    #[arg(long, default_value_t = 0.1)]
    pub tail: f64,
    /// Contact operator force amplitude (N) and on/off times (s).
    #[arg(long, default_value_t = 25.0)]
    pub pulse_amplitude: f64,
    #[arg(long, default_value_t = 0.5)]
    pub pulse_on: f64,
    #[arg(long, default_value_t = 8.0)]
    pub pulse_off: f64,
    /// Wall height (m) and penalty stiffness (N/m).
    #[arg(long, default_value_t = 0.3)]
    pub wall_height: f64,
    #[arg(long, default_value_t = 10_000.0)]
    pub wall_stiffness: f64,
    /// Trace path; relative paths resolve under TELEOP_OUT_DIR when set.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum, default_value_t = ProtocolArg::Rr)]
    pub protocol: ProtocolArg,
    #[arg(long, default_value_t = 2)]
    pub slaves: usize,
    #[arg(long, default_value_t = 0.0)]
    pub mad: f64,
    #[command(flatten)]
    pub gains: GainArgs,
    /// Bisection tolerance (s); 1e-4 for RR, 5e-3 for TOD.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub rr_tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tod_tol: f64,
    /// Directory for tables.txt and tables.csv; defaults to TELEOP_OUT_DIR or '.'.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
