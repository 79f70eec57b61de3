use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use teleop_core::network::DelayModel;
use teleop_core::simulator::{steady_state_metrics, RectanglePulse, Wall};
use teleop_core::stability::tables::{reproduce_tables, TableOptions};
use teleop_core::stability::{Witness, DEFAULT_RR_TOL, DEFAULT_TOD_TOL};
use teleop_core::{
    delay_horizons, feasible_rr, feasible_tod, max_mati, run_simulation, Error, FormationGeometry,
    GainSet, JointVector, ManipulatorParams, Matrix, Protocol, ProtocolKind, SamplingSchedule, Scenario,
    ScenarioKind, SimConfig, StabilityQuery, TodWeights,
};

use crate::args::{AnalyzeArgs, Command, GainArgs, ProtocolArg, ScenarioArg, SimulateArgs, TablesArgs};

/// Optional directory against which relative output paths are resolved.
pub const OUT_DIR_ENV: &str = "TELEOP_OUT_DIR";

const JOINTS: usize = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or inputs the model rejects; exit code 2.
    Usage(String),
    /// Divergence, solver failure or I/O; exit code 1.
    Failure(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::UnsupportedGains(_)
            | Error::IndexOutOfRange { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("I/O error: {e}"))
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Tables(a) => tables(&a),
    }
}

fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn protocol_kind(p: ProtocolArg) -> ProtocolKind {
    match p {
        ProtocolArg::Rr => ProtocolKind::RoundRobin,
        ProtocolArg::Tod => ProtocolKind::TryOnceDiscard,
    }
}

/// One gain matrix per slave from "k", "k1,k2,..", or ':'-joined diagonals.
fn parse_gain(spec: &str, slaves: usize, name: &str) -> Result<Vec<Matrix>> {
    let entries: Vec<&str> = spec.split(',').map(str::trim).collect();
    let entries = match entries.len() {
        1 => vec![entries[0]; slaves],
        n if n == slaves => entries,
        n => {
            return Err(CliError::Usage(format!(
                "--{name} lists {n} values for {slaves} slaves"
            )))
        }
    };
    entries
        .into_iter()
        .map(|e| {
            let diag: Vec<f64> = e
                .split(':')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| CliError::Usage(format!("--{name}: cannot parse '{e}'")))?;
            let diag = match diag.len() {
                1 => vec![diag[0]; JOINTS],
                JOINTS => diag,
                n => {
                    return Err(CliError::Usage(format!(
                        "--{name}: '{e}' has {n} joint entries, expected 1 or {JOINTS}"
                    )))
                }
            };
            Ok(Matrix::from_diagonal(&JointVector::from_vec(diag)))
        })
        .collect()
}

fn gains(args: &GainArgs, slaves: usize) -> Result<GainSet> {
    if slaves < 2 {
        return Err(CliError::Usage(format!("at least two slaves required, got {slaves}")));
    }
    Ok(GainSet::new(
        parse_gain(&args.kp, slaves, "kp")?,
        parse_gain(&args.kd, slaves, "kd")?,
    )?)
}

fn check_finite(values: &[(&str, f64)]) -> Result<()> {
    for (name, v) in values {
        if !v.is_finite() {
            return Err(CliError::Usage(format!("--{name} must be finite, got {v}")));
        }
    }
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    check_finite(&[
        ("mati", a.mati),
        ("mad", a.mad),
        ("duration", a.duration),
        ("tail", a.tail),
        ("pulse-amplitude", a.pulse_amplitude),
        ("pulse-on", a.pulse_on),
        ("pulse-off", a.pulse_off),
        ("wall-height", a.wall_height),
        ("wall-stiffness", a.wall_stiffness),
    ])?;
    if !(a.tail > 0.0 && a.tail <= 1.0) {
        return Err(CliError::Usage(format!("--tail must lie in (0, 1], got {}", a.tail)));
    }
    let slaves = a.slaves;
    let gains = gains(&a.gains, slaves)?;
    let kind = match a.scenario {
        ScenarioArg::Free => ScenarioKind::FreeMotion,
        ScenarioArg::Force => ScenarioKind::BoundedForce,
        ScenarioArg::Contact => ScenarioKind::Contact,
    };
    let protocol = protocol_kind(a.protocol);
    let step = a.step.unwrap_or(kind.default_step());
    let stride = a.stride.unwrap_or(((0.01 / step).round() as usize).max(1));

    let mut config = SimConfig {
        params: vec![ManipulatorParams::default(); slaves + 1],
        gains,
        formation: FormationGeometry::default_for(slaves),
        schedule: SamplingSchedule::new(
            a.sampling_interval.unwrap_or(a.mati),
            DelayModel::AbsSine {
                base: a.delay_base,
                amplitude: a.delay_amplitude,
            },
            a.mati,
            a.mad,
        )?,
        protocol: match protocol {
            ProtocolKind::RoundRobin => Protocol::RoundRobin,
            ProtocolKind::TryOnceDiscard => {
                Protocol::TryOnceDiscard(TodWeights::identity(slaves, JOINTS))
            }
        },
        step,
        trace_stride: stride,
        certificate: None,
    };
    config.validate()?;
    if a.certificate && !config.attach_certificate()? {
        log::warn!(
            "no {protocol} certificate at MATI {} and MAD {}; Lyapunov column left empty",
            a.mati,
            a.mad
        );
    }
    let mut scenario = Scenario::reference(kind, a.duration, slaves);
    scenario.pulse = RectanglePulse {
        amplitude: a.pulse_amplitude,
        t_on: a.pulse_on,
        t_off: a.pulse_off,
    };
    scenario.wall = Wall {
        height: a.wall_height,
        stiffness: a.wall_stiffness,
    };

    let trace = run_simulation(&config, &scenario)?;
    let scenario_name = format!("{:?}", a.scenario).to_lowercase();
    let default_name = format!("trace_{scenario_name}_{}.csv", protocol.to_string().to_lowercase());
    let out = resolve(a.out.as_deref().unwrap_or(Path::new(&default_name)));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    trace.save_csv(&out)?;

    let m = steady_state_metrics(&trace, &config.formation, a.tail)?;
    let last = trace.last()?;
    println!("scenario {scenario_name}, protocol {protocol}, {slaves} slaves, t = {:.3} s", last.t);
    println!("trace: {} rows, {} decisions -> {}", trace.rows.len(), trace.decisions.len(), out.display());
    println!("steady state over the final {:.0}% ({} rows):", a.tail * 100.0, m.samples);
    for (i, e) in m.mean_position_error.iter().enumerate() {
        println!("  slave {} mean |q_m - q_s| = {e:.3e} rad", i + 1);
    }
    println!("  max |q_m - q_s| = {:.3e} rad", m.max_position_error);
    println!("  max joint speed = {:.3e} rad/s", m.max_velocity);
    println!("  mean |f_m + mean f_s| = {:.3e} N·m", m.mean_force_mismatch);
    if m.force_magnitude_per_joint.iter().any(|f| *f > 1e-9) {
        let ratio = m.force_reflection_ratio(1e-9);
        println!(
            "  force reflection ratio per joint = [{}]",
            ratio.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ")
        );
    }
    let values: Vec<f64> = trace.rows.iter().filter_map(|r| r.lyapunov).collect();
    if let (Some(first), Some(last)) = (values.first(), values.last()) {
        println!("  Lyapunov functional: {} values, first {first:.6e}, last {last:.6e}", values.len());
    }
    Ok(())
}

fn scalar(m: &Matrix) -> f64 {
    m[(0, 0)]
}

fn list(ms: &[Matrix]) -> String {
    ms.iter().map(|m| format!("{:.6e}", scalar(m))).collect::<Vec<_>>().join(", ")
}

fn analyze(a: &AnalyzeArgs) -> Result<()> {
    check_finite(&[("mad", a.mad)])?;
    let protocol = protocol_kind(a.protocol);
    let query = StabilityQuery::new(gains(&a.gains, a.slaves)?, a.mad, protocol)?;
    let tol = a.tol.unwrap_or(match protocol {
        ProtocolKind::RoundRobin => DEFAULT_RR_TOL,
        ProtocolKind::TryOnceDiscard => DEFAULT_TOD_TOL,
    });
    let search = max_mati(&query, tol)?;
    println!("protocol {protocol}, {} slaves, MAD {} s, tolerance {tol}", a.slaves, a.mad);
    let Some(mati) = search.mati else {
        println!("infeasible: no certificate at any tested MATI");
        println!("evaluations {}, undecided {}", search.evaluations, search.undecided);
        return Ok(());
    };
    let h = delay_horizons(a.slaves, mati, a.mad, protocol);
    println!("max MATI {mati:.6} s");
    if let Some(hi) = search.infeasible_above {
        println!("infeasible at {hi:.6} s");
    }
    println!("h_M {:.6} s", h.h_m);
    println!("h_S {:.6} s", h.h_s);
    let witness = match protocol {
        ProtocolKind::RoundRobin => feasible_rr(&query, mati)?.witness.map(Witness::RoundRobin),
        ProtocolKind::TryOnceDiscard => feasible_tod(&query, mati)?.witness.map(Witness::TryOnceDiscard),
    };
    match witness {
        Some(Witness::RoundRobin(w)) => {
            println!("witness (scaled identities):");
            println!("  R_m  = {:.6e}", scalar(&w.r_m));
            println!("  R_s  = [{}]", list(&w.r_s));
        }
        Some(Witness::TryOnceDiscard(w)) => {
            println!("witness (scaled identities):");
            println!("  R_m  = {:.6e}", scalar(&w.r_m));
            println!("  R_s  = [{}]", list(&w.r_s));
            println!("  Q    = [{}]", list(&w.q));
            println!("  U    = [{}]", list(&w.u));
            println!("  G    = [{}]", list(&w.g));
        }
        None => {
            return Err(CliError::Failure(format!(
                "no witness recovered at the reported MATI {mati}"
            )))
        }
    }
    println!("evaluations {}, undecided {}", search.evaluations, search.undecided);
    Ok(())
}

fn tables(a: &TablesArgs) -> Result<()> {
    for (name, tol) in [("rr-tol", a.rr_tol), ("tod-tol", a.tod_tol)] {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Usage(format!("--{name} must be positive, got {tol}")));
        }
    }
    let set = reproduce_tables(&TableOptions {
        rr_tol: a.rr_tol,
        tod_tol: a.tod_tol,
    })?;
    let dir = match &a.out_dir {
        Some(d) => resolve(d),
        None => std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from),
    };
    fs::create_dir_all(&dir)?;
    let text = set.to_text();
    fs::write(dir.join("tables.txt"), &text)?;
    fs::write(dir.join("tables.csv"), set.to_csv())?;
    print!("{text}");
    println!("wrote {} and {}", dir.join("tables.txt").display(), dir.join("tables.csv").display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_syntax() {
        let g = parse_gain("20", 3, "kp").unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g[2], Matrix::identity(2, 2) * 20.0);
        let g = parse_gain("10, 20,30", 3, "kp").unwrap();
        assert_eq!(scalar(&g[0]), 10.0);
        let g = parse_gain("20:25", 2, "kp").unwrap();
        assert_eq!(g[1][(1, 1)], 25.0);
        assert!(parse_gain("1,2", 3, "kp").is_err());
        assert!(parse_gain("x", 2, "kp").is_err());
        assert!(parse_gain("1:2:3", 2, "kp").is_err());
    }

    #[test]
    fn core_errors_map_to_exit_classes() {
        assert!(matches!(CliError::from(Error::InvalidParameter("x".into())), CliError::Usage(_)));
        assert!(matches!(CliError::from(Error::UnsupportedGains("x".into())), CliError::Usage(_)));
        assert!(matches!(
            CliError::from(Error::Divergence { time: 1.0, reason: "x".into() }),
            CliError::Failure(_)
        ));
    }
}
