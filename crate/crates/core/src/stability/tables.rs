//! Maximum-MATI and delay-horizon tables over the reference grid.
//!
//! Four tables are produced: MATI and horizons for uniform gains
//! (`k_p = k_d = 20`, `N ∈ {2, 3}`), and MATI and horizons for the
//! heterogeneous set (`k_p = 10, 20, 30`, `k_d = 20`, `N = 3`). Each cell
//! carries the published reference value and a flag when the two disagree.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::{max_mati, MatiSearch, StabilityQuery};
use crate::controller::GainSet;
use crate::error::Result;
use crate::network::{delay_horizons, ProtocolKind};

/// Largest difference to a published value that is not flagged.
pub const DISCREPANCY_TOL: f64 = 0.005;

pub const MAD_GRID: [f64; 3] = [0.0, 0.2, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainProfile {
    /// `k_p = k_d = 20` for every slave.
    Uniform,
    /// `k_p = 10, 20, 30`, `k_d = 20`, three slaves.
    Heterogeneous,
}

impl GainProfile {
    fn gains(self, slaves: usize) -> Result<GainSet> {
        match self {
            Self::Uniform => GainSet::uniform(slaves, 20.0, 20.0, 2),
            Self::Heterogeneous => GainSet::scaled_identity(&[10.0, 20.0, 30.0], &[20.0; 3], 2),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Heterogeneous => "heterogeneous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    pub rr_tol: f64,
    pub tod_tol: f64,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            rr_tol: 1e-4,
            tod_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableCell {
    pub profile: GainProfile,
    pub slaves: usize,
    pub mad: f64,
    pub protocol: ProtocolKind,
    pub search: MatiSearch,
    /// `h_S` for Round-Robin, `h_M` for Try-Once-Discard, at the found MATI.
    pub horizon: Option<f64>,
    /// Published MATI; `None` where the reference marks the cell infeasible.
    pub reference_mati: Option<f64>,
    pub reference_horizon: Option<f64>,
    pub mati_flagged: bool,
    pub horizon_flagged: bool,
}

impl TableCell {
    pub fn mati(&self) -> Option<f64> {
        self.search.mati
    }

    pub fn flagged(&self) -> bool {
        self.mati_flagged || self.horizon_flagged
    }
}

fn disagrees(computed: Option<f64>, reference: Option<f64>) -> bool {
    match (computed, reference) {
        (Some(c), Some(r)) => (c - r).abs() > DISCREPANCY_TOL,
        (None, None) => false,
        _ => true,
    }
}

/// Published values: (MATI, horizon) per grid point.
fn reference(
    profile: GainProfile,
    slaves: usize,
    mad_index: usize,
    protocol: ProtocolKind,
) -> (Option<f64>, Option<f64>) {
    use ProtocolKind::*;
    let pick = |m: [Option<f64>; 3], h: [Option<f64>; 3]| (m[mad_index], h[mad_index]);
    match (profile, slaves, protocol) {
        (GainProfile::Uniform, 2, RoundRobin) => pick(
            [Some(0.6666), Some(0.5333), Some(0.3333)],
            [Some(1.3332), Some(1.2666), Some(1.6666)],
        ),
        (GainProfile::Uniform, 2, TryOnceDiscard) => pick(
            [Some(0.4531), Some(0.2431), None],
            [Some(0.4531), Some(0.4531), None],
        ),
        (GainProfile::Uniform, 3, RoundRobin) => pick(
            [Some(0.5), Some(0.4), Some(0.25)],
            [Some(1.5), Some(1.4), Some(1.25)],
        ),
        (GainProfile::Uniform, 3, TryOnceDiscard) => pick(
            [Some(0.2411), Some(0.0411), None],
            [Some(0.2411), Some(0.2411), None],
        ),
        (GainProfile::Heterogeneous, 3, RoundRobin) => pick(
            [Some(0.3333), Some(0.2333), Some(0.1)],
            [Some(1.0), Some(0.8999), Some(0.8)],
        ),
        (GainProfile::Heterogeneous, 3, TryOnceDiscard) => pick(
            [Some(0.2066), Some(0.0066), None],
            [Some(0.2066), Some(0.2066), None],
        ),
        _ => (None, None),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSet {
    pub cells: Vec<TableCell>,
}

fn grid() -> Vec<(GainProfile, usize, usize, ProtocolKind)> {
    let protocols = [ProtocolKind::RoundRobin, ProtocolKind::TryOnceDiscard];
    let mut out = Vec::new();
    for (profile, slaves) in [
        (GainProfile::Uniform, 2),
        (GainProfile::Uniform, 3),
        (GainProfile::Heterogeneous, 3),
    ] {
        for protocol in protocols {
            for mad_index in 0..MAD_GRID.len() {
                out.push((profile, slaves, mad_index, protocol));
            }
        }
    }
    out
}

/// Runs [`max_mati`] over the full grid in parallel.
pub fn reproduce_tables(options: &TableOptions) -> Result<TableSet> {
    let cells = grid()
        .into_par_iter()
        .map(|(profile, slaves, mad_index, protocol)| {
            let mad = MAD_GRID[mad_index];
            let query = StabilityQuery::new(profile.gains(slaves)?, mad, protocol)?;
            let tol = match protocol {
                ProtocolKind::RoundRobin => options.rr_tol,
                ProtocolKind::TryOnceDiscard => options.tod_tol,
            };
            let search = max_mati(&query, tol)?;
            let horizon = search.mati.map(|m| {
                let h = delay_horizons(slaves, m, mad, protocol);
                match protocol {
                    ProtocolKind::RoundRobin => h.h_s,
                    ProtocolKind::TryOnceDiscard => h.h_m,
                }
            });
            let (reference_mati, reference_horizon) = reference(profile, slaves, mad_index, protocol);
            Ok(TableCell {
                profile,
                slaves,
                mad,
                protocol,
                mati_flagged: disagrees(search.mati, reference_mati),
                horizon_flagged: disagrees(horizon, reference_horizon),
                search,
                horizon,
                reference_mati,
                reference_horizon,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TableSet { cells })
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl TableSet {
    pub fn cell(
        &self,
        profile: GainProfile,
        slaves: usize,
        mad: f64,
        protocol: ProtocolKind,
    ) -> Option<&TableCell> {
        self.cells.iter().find(|c| {
            c.profile == profile && c.slaves == slaves && c.protocol == protocol && c.mad == mad
        })
    }

    pub fn flagged(&self) -> impl Iterator<Item = &TableCell> {
        self.cells.iter().filter(|c| c.flagged())
    }

    /// Aligned plain-text rendering; flagged values carry a trailing `*`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let sections = [
            ("Max. allowable MATI (s), uniform gains kp = kd = 20", GainProfile::Uniform, &[2, 3][..], false),
            ("Max. delay horizon (s), uniform gains kp = kd = 20", GainProfile::Uniform, &[2, 3][..], true),
            ("Max. allowable MATI (s), heterogeneous gains kp = 10/20/30, kd = 20", GainProfile::Heterogeneous, &[3][..], false),
            ("Max. delay horizon (s), heterogeneous gains kp = 10/20/30, kd = 20", GainProfile::Heterogeneous, &[3][..], true),
        ];
        for (title, profile, slave_counts, horizons) in sections {
            let _ = writeln!(out, "{title}");
            let mut header = format!("{:<14}", "");
            for &n in slave_counts {
                for mad in MAD_GRID {
                    header += &format!("{:>16}", format!("N={n} MAD={mad}"));
                }
            }
            let _ = writeln!(out, "{header}");
            for protocol in [ProtocolKind::RoundRobin, ProtocolKind::TryOnceDiscard] {
                let name = match (horizons, protocol) {
                    (false, p) => p.to_string(),
                    (true, ProtocolKind::RoundRobin) => "RR h_S".into(),
                    (true, ProtocolKind::TryOnceDiscard) => "TOD h_M".into(),
                };
                let mut computed = format!("{name:<14}");
                let mut published = format!("{:<14}", "  reference");
                for &n in slave_counts {
                    for mad in MAD_GRID {
                        let Some(c) = self.cell(profile, n, mad, protocol) else { continue };
                        let (value, reference, flag) = if horizons {
                            (c.horizon, c.reference_horizon, c.horizon_flagged)
                        } else {
                            (c.mati(), c.reference_mati, c.mati_flagged)
                        };
                        let mark = if flag { "*" } else { " " };
                        computed += &format!("{:>15}{mark}", fmt_value(value));
                        published += &format!("{:>15} ", fmt_value(reference));
                    }
                }
                let _ = writeln!(out, "{computed}");
                let _ = writeln!(out, "{published}");
            }
            let _ = writeln!(out);
        }
        let flagged: Vec<_> = self.flagged().collect();
        if !flagged.is_empty() {
            let _ = writeln!(out, "* differs from the reference by more than {DISCREPANCY_TOL}:");
            for c in flagged {
                let _ = writeln!(
                    out,
                    "  {} {} N={} MAD={}: MATI {} (ref {}), horizon {} (ref {})",
                    c.profile.label(),
                    c.protocol,
                    c.slaves,
                    c.mad,
                    fmt_value(c.mati()),
                    fmt_value(c.reference_mati),
                    fmt_value(c.horizon),
                    fmt_value(c.reference_horizon),
                );
            }
        }
        out
    }

    /// One row per grid point.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
        let mut out = String::from(
            "gains,protocol,slaves,mad,feasible,mati,horizon,reference_mati,reference_horizon,mati_flag,horizon_flag,evaluations,undecided\n",
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                c.profile.label(),
                c.protocol,
                c.slaves,
                c.mad,
                c.mati().is_some(),
                opt(c.mati()),
                opt(c.horizon),
                opt(c.reference_mati),
                opt(c.reference_horizon),
                c.mati_flagged,
                c.horizon_flagged,
                c.search.evaluations,
                c.search.undecided,
            );
        }
        out
    }
}
