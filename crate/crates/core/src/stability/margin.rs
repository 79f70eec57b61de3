use super::{feasible_rr, feasible_tod, SolveStatus, StabilityQuery};
use crate::error::{Error, Result};
use crate::network::ProtocolKind;

/// Default bisection tolerance for Round-Robin.
pub const DEFAULT_RR_TOL: f64 = 1e-4;
/// Default bisection tolerance for Try-Once-Discard.
pub const DEFAULT_TOD_TOL: f64 = 5e-3;

/// Smallest MATI tried; a query infeasible here reports no MATI. Below this
/// the witness entries grow like `1/h²` and the scale-relative margin of the
/// definiteness test swamps the certificate.
const PROBE: f64 = 1e-3;
const FIRST_UPPER: f64 = 0.1;
const UPPER_CAP: f64 = 1e4;
const SCAN_POINTS: usize = 10;

/// Result of the maximum-MATI search.
#[derive(Debug, Clone, PartialEq)]
pub struct MatiSearch {
    /// Largest MATI known feasible, `None` when even the smallest probe fails.
    pub mati: Option<f64>,
    /// Smallest MATI known infeasible.
    pub infeasible_above: Option<f64>,
    pub evaluations: usize,
    /// Evaluations that hit the solver cap and were counted as infeasible.
    pub undecided: usize,
}

struct Oracle<'a> {
    query: &'a StabilityQuery,
    evaluations: usize,
    undecided: usize,
}

impl Oracle<'_> {
    fn feasible(&mut self, mati: f64) -> Result<bool> {
        self.evaluations += 1;
        let (feasible, status) = match self.query.protocol {
            ProtocolKind::RoundRobin => {
                let r = feasible_rr(self.query, mati)?;
                (r.feasible, r.status)
            }
            ProtocolKind::TryOnceDiscard => {
                let r = feasible_tod(self.query, mati)?;
                (r.feasible, r.status)
            }
        };
        if status == SolveStatus::Undecided {
            self.undecided += 1;
            log::warn!("undecided feasibility at MATI {mati}; counted as infeasible");
        }
        Ok(feasible)
    }
}

/// Largest MATI for which the protocol's certificate is feasible, to within `tol`.
///
/// Feasibility is assumed monotone in the MATI; a coarse scan of the final
/// bracket checks this and reports [`Error::NonMonotone`] otherwise.
pub fn max_mati(query: &StabilityQuery, tol: f64) -> Result<MatiSearch> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let mut oracle = Oracle {
        query,
        evaluations: 0,
        undecided: 0,
    };
    if !oracle.feasible(PROBE)? {
        return Ok(MatiSearch {
            mati: None,
            infeasible_above: Some(PROBE),
            evaluations: oracle.evaluations,
            undecided: oracle.undecided,
        });
    }

    let (mut lo, mut hi) = (PROBE, FIRST_UPPER);
    while oracle.feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > UPPER_CAP {
            return Err(Error::InvalidParameter(format!(
                "certificate still feasible at MATI {lo}; search is unbounded"
            )));
        }
    }

    let step = (hi - lo) / (SCAN_POINTS + 1) as f64;
    let scan: Vec<(f64, bool)> = (1..=SCAN_POINTS)
        .map(|j| {
            let h = lo + step * j as f64;
            oracle.feasible(h).map(|f| (h, f))
        })
        .collect::<Result<_>>()?;
    if let Some(w) = scan.windows(2).find(|w| !w[0].1 && w[1].1) {
        return Err(Error::NonMonotone(w[1].0));
    }
    if let Some(&(h, _)) = scan.iter().rev().find(|(_, f)| *f) {
        lo = h;
    }
    if let Some(&(h, _)) = scan.iter().find(|(_, f)| !*f) {
        hi = h;
    }

    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if oracle.feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MatiSearch {
        mati: Some(lo),
        infeasible_above: Some(hi),
        evaluations: oracle.evaluations,
        undecided: oracle.undecided,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::GainSet;

    #[test]
    fn rr_search_matches_closed_form() {
        let q = StabilityQuery::new(
            GainSet::uniform(2, 20.0, 20.0, 2).unwrap(),
            0.2,
            ProtocolKind::RoundRobin,
        )
        .unwrap();
        let s = max_mati(&q, 1e-6).unwrap();
        // (2 − 0.4) / 3
        let m = s.mati.unwrap();
        assert!(m <= 1.6 / 3.0 && m > 1.6 / 3.0 - 1e-6);
        assert!(s.infeasible_above.unwrap() >= 1.6 / 3.0);
    }

    #[test]
    fn no_mati_when_delay_dominates() {
        let q = StabilityQuery::new(
            GainSet::uniform(2, 20.0, 20.0, 2).unwrap(),
            1.5,
            ProtocolKind::RoundRobin,
        )
        .unwrap();
        assert_eq!(max_mati(&q, 1e-4).unwrap().mati, None);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let q = StabilityQuery::new(
            GainSet::uniform(2, 20.0, 20.0, 2).unwrap(),
            0.0,
            ProtocolKind::RoundRobin,
        )
        .unwrap();
        assert!(max_mati(&q, 0.0).is_err());
    }
}
