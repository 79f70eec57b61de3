use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::error::{Error, Result};
use crate::manipulator::{JointVector, ManipulatorState};
use crate::network::Decision;

/// One logged instant of the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub master: ManipulatorState,
    pub slaves: Vec<ManipulatorState>,
    /// Slave scheduled at the latest sampling instant, if any.
    pub scheduled: Option<usize>,
    /// `|ηᵢ|` as held by the master.
    pub eta_norms: Vec<f64>,
    pub f_m: JointVector,
    pub f_s: Vec<JointVector>,
    pub tau_m: JointVector,
    pub tau_s: Vec<JointVector>,
    /// `V` (Round-Robin) or `V_e` (Try-Once-Discard) when a certificate is attached.
    pub lyapunov: Option<f64>,
    pub ee_m: [f64; 2],
    pub ee_s: Vec<[f64; 2]>,
}

/// `V_e` just before and just after an arrival instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub t: f64,
    pub before: f64,
    pub after: f64,
}

/// Everything recorded by one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimTrace {
    pub slaves: usize,
    pub joints: usize,
    pub rows: Vec<TraceRow>,
    /// Every scheduling decision, in order.
    pub decisions: Vec<Decision>,
    /// `(s_k, V(s_k))` at every sampling instant where the functional is defined.
    pub lyapunov_at_samples: Vec<(f64, f64)>,
    /// Try-Once-Discard only: `V_e` across each arrival.
    pub jumps: Vec<JumpRecord>,
    /// `t_k` of every delivered packet.
    pub arrivals: Vec<f64>,
}

impl SimTrace {
    pub fn last(&self) -> Result<&TraceRow> {
        self.rows.last().ok_or(Error::EmptyTrace)
    }

    pub fn header(&self) -> Vec<String> {
        let (n, j) = (self.slaves, self.joints);
        let mut h = vec!["t".to_string()];
        let per_joint = |h: &mut Vec<String>, prefix: &str| {
            for a in 0..j {
                h.push(format!("{prefix}{a}"));
            }
        };
        per_joint(&mut h, "qm");
        per_joint(&mut h, "dqm");
        for i in 1..=n {
            per_joint(&mut h, &format!("qs{i}_"));
            per_joint(&mut h, &format!("dqs{i}_"));
        }
        h.push("sched".into());
        for i in 1..=n {
            h.push(format!("eta{i}"));
        }
        h.push("V".into());
        per_joint(&mut h, "fm");
        for i in 1..=n {
            per_joint(&mut h, &format!("fs{i}_"));
        }
        per_joint(&mut h, "taum");
        for i in 1..=n {
            per_joint(&mut h, &format!("taus{i}_"));
        }
        h.push("xm".into());
        h.push("ym".into());
        for i in 1..=n {
            h.push(format!("xs{i}"));
            h.push(format!("ys{i}"));
        }
        h
    }

    /// CSV with one header line; slave numbers and `sched` are 1-based,
    /// floats carry 17 significant digits and missing values are empty.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.header().join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            let floats = |line: &mut String, values: &mut dyn Iterator<Item = f64>| {
                for v in values {
                    let _ = write!(line, "{v:.16e},");
                }
            };
            let optional = |line: &mut String, v: Option<String>| {
                line.push_str(&v.unwrap_or_default());
                line.push(',');
            };
            floats(&mut line, &mut std::iter::once(row.t));
            floats(&mut line, &mut row.master.q.iter().chain(row.master.dq.iter()).copied());
            for s in &row.slaves {
                floats(&mut line, &mut s.q.iter().chain(s.dq.iter()).copied());
            }
            optional(&mut line, row.scheduled.map(|i| (i + 1).to_string()));
            floats(&mut line, &mut row.eta_norms.iter().copied());
            optional(&mut line, row.lyapunov.map(|v| format!("{v:.16e}")));
            floats(&mut line, &mut row.f_m.iter().copied());
            floats(&mut line, &mut row.f_s.iter().flat_map(|f| f.iter()).copied());
            floats(&mut line, &mut row.tau_m.iter().copied());
            floats(&mut line, &mut row.tau_s.iter().flat_map(|f| f.iter()).copied());
            floats(&mut line, &mut row.ee_m.iter().copied());
            floats(&mut line, &mut row.ee_s.iter().flatten().copied());
            line.pop();
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(io::BufWriter::new(file))
    }
}
