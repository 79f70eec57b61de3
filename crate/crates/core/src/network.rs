//! Sampled, delayed and scheduled communication between the master and the
//! slaves.
//!
//! At every sampling instant `s_k` the master broadcasts `qₘ(s_k)` to all
//! slaves, while exactly one slave, chosen by the scheduling protocol, sends
//! its formation-corrected position back. Both samples reach the remote
//! zero-order holds at `t_k = s_k + T_k`.
//!
//! Slave indices are zero-based throughout the library.

use std::collections::VecDeque;

use crate::error::{check_len, Error, Result};
use crate::manipulator::JointVector;
use crate::Matrix;

/// Transmission delay `T_k` as a function of the sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayModel {
    Constant(f64),
    /// `T_k = base + amplitude·|sin(s_k)|`.
    AbsSine { base: f64, amplitude: f64 },
}

impl DelayModel {
    /// Delay profile of the reference scenarios, `0.04 + 0.06|sin s_k|`.
    pub fn reference() -> Self {
        DelayModel::AbsSine {
            base: 0.04,
            amplitude: 0.06,
        }
    }

    pub fn delay(&self, sample_time: f64) -> f64 {
        match *self {
            DelayModel::Constant(d) => d,
            DelayModel::AbsSine { base, amplitude } => base + amplitude * sample_time.sin().abs(),
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            DelayModel::Constant(d) => (d, d),
            DelayModel::AbsSine { base, amplitude } => {
                (base.min(base + amplitude), base.max(base + amplitude))
            }
        }
    }
}

/// Uniform sampling with bounded delays.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSchedule {
    /// Constant `s_{k+1} − s_k` (s).
    pub sampling_interval: f64,
    pub delay: DelayModel,
    /// Maximum allowable transmission interval (s).
    pub mati: f64,
    /// Maximum allowable delay (s).
    pub mad: f64,
}

impl SamplingSchedule {
    pub fn new(sampling_interval: f64, delay: DelayModel, mati: f64, mad: f64) -> Result<Self> {
        let schedule = Self {
            sampling_interval,
            delay,
            mati,
            mad,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Sampling every 0.14 s with `T_k = 0.04 + 0.06|sin s_k|`, MAD = 0.1 s.
    pub fn reference() -> Self {
        Self {
            sampling_interval: 0.14,
            delay: DelayModel::reference(),
            mati: 0.14,
            mad: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_interval > 0.0 && self.sampling_interval.is_finite()) {
            return Err(Error::InvalidParameter(
                "sampling interval must be positive".into(),
            ));
        }
        if self.sampling_interval > self.mati * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "sampling interval {} exceeds MATI {}",
                self.sampling_interval, self.mati
            )));
        }
        if !(self.mad >= 0.0 && self.mad.is_finite()) {
            return Err(Error::InvalidParameter("MAD must be non-negative".into()));
        }
        let (lo, hi) = self.delay.bounds();
        if lo < 0.0 || hi > self.mad * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "delays in [{lo}, {hi}] violate 0 <= T_k <= MAD = {}",
                self.mad
            )));
        }
        Ok(())
    }

    /// `s_k`.
    pub fn sample_time(&self, k: usize) -> f64 {
        k as f64 * self.sampling_interval
    }

    /// `T_k`.
    pub fn delay_at(&self, k: usize) -> f64 {
        self.delay.delay(self.sample_time(k))
    }

    /// `t_k = s_k + T_k`.
    pub fn arrival_time(&self, k: usize) -> f64 {
        self.sample_time(k) + self.delay_at(k)
    }
}

/// Weighting matrices `Qᵢ` of the Try-Once-Discard rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TodWeights {
    pub q: Vec<Matrix>,
}

impl TodWeights {
    pub fn identity(slaves: usize, joints: usize) -> Self {
        Self {
            q: vec![Matrix::identity(joints, joints); slaves],
        }
    }

    pub fn scaled_identity(scales: &[f64], joints: usize) -> Self {
        Self {
            q: scales
                .iter()
                .map(|&s| Matrix::identity(joints, joints) * s)
                .collect(),
        }
    }

    /// `ηᵢᵀ Qᵢ ηᵢ`.
    pub fn weighted_error(&self, i: usize, eta: &JointVector) -> f64 {
        eta.dot(&(&self.q[i] * eta))
    }
}

/// Scheduling rule for the slave-to-master channel.
#[derive(Debug, Clone, PartialEq)]
pub enum Protocol {
    RoundRobin,
    TryOnceDiscard(TodWeights),
}

impl Protocol {
    pub fn kind(&self) -> ProtocolKind {
        match self {
            Protocol::RoundRobin => ProtocolKind::RoundRobin,
            Protocol::TryOnceDiscard(_) => ProtocolKind::TryOnceDiscard,
        }
    }
}

/// Protocol family without its weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    RoundRobin,
    TryOnceDiscard,
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProtocolKind::RoundRobin => "RR",
            ProtocolKind::TryOnceDiscard => "TOD",
        })
    }
}

/// Round-Robin: slave `k mod N` transmits at `s_k`.
pub fn rr_next_index(k: usize, slaves: usize) -> usize {
    k % slaves
}

/// Try-Once-Discard: the slave with the largest `ηᵢᵀQᵢηᵢ`, smallest index on ties.
pub fn tod_next_index(eta: &[JointVector], weights: &TodWeights) -> Result<usize> {
    check_len(weights.q.len(), eta.len(), "TOD weights vs slaves")?;
    if eta.is_empty() {
        return Err(Error::InvalidParameter("no slaves to schedule".into()));
    }
    let mut best = 0;
    let mut best_value = weights.weighted_error(0, &eta[0]);
    for (i, e) in eta.iter().enumerate().skip(1) {
        let value = weights.weighted_error(i, e);
        if value > best_value {
            best = i;
            best_value = value;
        }
    }
    Ok(best)
}

/// Worst-case delay horizons of the time-delay reformulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayHorizons {
    /// Bound on the age of master data at the slaves.
    pub h_m: f64,
    /// Bound on the age of slave data at the master.
    pub h_s: f64,
}

/// `h_M = MATI + MAD`; `h_S = N·MATI + MAD` under RR and `h_M` under TOD.
pub fn delay_horizons(slaves: usize, mati: f64, mad: f64, protocol: ProtocolKind) -> DelayHorizons {
    let h_m = mati + mad;
    let h_s = match protocol {
        ProtocolKind::RoundRobin => slaves as f64 * mati + mad,
        ProtocolKind::TryOnceDiscard => h_m,
    };
    DelayHorizons { h_m, h_s }
}

/// One packet pair in flight: the master broadcast and the scheduled slave sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub k: usize,
    pub sample_time: f64,
    pub arrival_time: f64,
    pub master_sample: JointVector,
    pub slave_index: usize,
    pub slave_sample: JointVector,
    /// Scheduling errors `η(t_k)` the decision was based on.
    pub eta: Vec<JointVector>,
}

/// Record of one scheduling decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub k: usize,
    pub sample_time: f64,
    pub arrival_time: f64,
    pub index: usize,
    /// `ηᵢᵀQᵢηᵢ` for every slave (identity weights under RR).
    pub weighted_errors: Vec<f64>,
}

/// Zero-order-hold registers, TOD errors and in-flight packets.
#[derive(Debug, Clone)]
pub struct NetworkState {
    master_register: JointVector,
    slave_registers: Vec<JointVector>,
    eta: Vec<JointVector>,
    previous: Option<(usize, Vec<JointVector>)>,
    pending: VecDeque<Transmission>,
    last_enqueued_arrival: f64,
    active: Option<Transmission>,
}

impl NetworkState {
    /// Registers start at the initial configuration; `ηᵢ(0) = −qᵢ(0)`.
    pub fn new(
        master_position: &JointVector,
        slave_corrected: &[JointVector],
        slave_raw: &[JointVector],
    ) -> Result<Self> {
        check_len(slave_raw.len(), slave_corrected.len(), "raw vs corrected slave positions")?;
        if slave_corrected.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "at least two slaves required, got {}",
                slave_corrected.len()
            )));
        }
        Ok(Self {
            master_register: master_position.clone(),
            slave_registers: slave_corrected.to_vec(),
            eta: slave_raw.iter().map(|q| -q).collect(),
            previous: None,
            pending: VecDeque::new(),
            last_enqueued_arrival: f64::NEG_INFINITY,
            active: None,
        })
    }

    /// `q̂ₘ` as held at the slaves.
    pub fn master_register(&self) -> &JointVector {
        &self.master_register
    }

    /// `q̂ᵢ` as held at the master.
    pub fn slave_registers(&self) -> &[JointVector] {
        &self.slave_registers
    }

    /// Scheduling errors as of the latest sampling instant.
    pub fn eta(&self) -> &[JointVector] {
        &self.eta
    }

    /// The most recently delivered transmission, which defines the current
    /// inter-arrival interval `[t_k, t_{k+1})`.
    pub fn active(&self) -> Option<&Transmission> {
        self.active.as_ref()
    }

    pub fn next_arrival(&self) -> Option<f64> {
        self.pending.front().map(|p| p.arrival_time)
    }

    pub fn pending(&self) -> impl Iterator<Item = &Transmission> {
        self.pending.iter()
    }

    /// Samples at `s_k`, picks the transmitting slave and queues the packets.
    ///
    /// `slave_corrected` holds `q̌ᵢ(s_k)`. Before the decision, `η` is advanced
    /// by the reset law using the previous decision and samples.
    pub fn sample_and_transmit(
        &mut self,
        schedule: &SamplingSchedule,
        protocol: &Protocol,
        k: usize,
        master_position: &JointVector,
        slave_corrected: &[JointVector],
    ) -> Result<Decision> {
        let slaves = self.slave_registers.len();
        check_len(slave_corrected.len(), slaves, "slave samples")?;

        if let Some((last_index, last_samples)) = &self.previous {
            for (j, eta) in self.eta.iter_mut().enumerate() {
                let step = &last_samples[j] - &slave_corrected[j];
                *eta = if j == *last_index { step } else { &*eta + step };
            }
        }

        let (index, weighted_errors) = match protocol {
            Protocol::RoundRobin => (
                rr_next_index(k, slaves),
                self.eta.iter().map(|e| e.norm_squared()).collect(),
            ),
            Protocol::TryOnceDiscard(weights) => (
                tod_next_index(&self.eta, weights)?,
                (0..slaves)
                    .map(|i| weights.weighted_error(i, &self.eta[i]))
                    .collect(),
            ),
        };

        let sample_time = schedule.sample_time(k);
        let delay = schedule.delay_at(k);
        if !(0.0..=schedule.mad * (1.0 + 1e-12)).contains(&delay) {
            return Err(Error::InvalidParameter(format!(
                "delay {delay} at s_{k} outside [0, MAD = {}]",
                schedule.mad
            )));
        }
        let arrival_time = sample_time + delay;
        if arrival_time < self.last_enqueued_arrival {
            return Err(Error::EventOrdering {
                k,
                arrival: arrival_time,
                previous: self.last_enqueued_arrival,
            });
        }
        self.last_enqueued_arrival = arrival_time;

        self.pending.push_back(Transmission {
            k,
            sample_time,
            arrival_time,
            master_sample: master_position.clone(),
            slave_index: index,
            slave_sample: slave_corrected[index].clone(),
            eta: self.eta.clone(),
        });
        self.previous = Some((index, slave_corrected.to_vec()));

        Ok(Decision {
            k,
            sample_time,
            arrival_time,
            index,
            weighted_errors,
        })
    }

    /// Applies every packet with arrival time `<= t` to the holds, returning them.
    pub fn deliver_until(&mut self, t: f64) -> Vec<Transmission> {
        let mut delivered = Vec::new();
        while self.pending.front().is_some_and(|p| p.arrival_time <= t) {
            let packet = self.pending.pop_front().expect("front checked");
            self.master_register = packet.master_sample.clone();
            self.slave_registers[packet.slave_index] = packet.slave_sample.clone();
            self.active = Some(packet.clone());
            delivered.push(packet);
        }
        delivered
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn jv(x: &[f64]) -> JointVector {
        JointVector::from_column_slice(x)
    }

    #[test]
    fn round_robin_cycles() {
        let seq: Vec<_> = (0..4).map(|k| rr_next_index(k, 3)).collect();
        assert_eq!(seq, vec![0, 1, 2, 0]);
        let seq: Vec<_> = (0..4).map(|k| rr_next_index(k, 2)).collect();
        assert_eq!(seq, vec![0, 1, 0, 1]);
    }

    #[test]
    fn tod_argmax_and_ties() {
        let w = TodWeights::identity(3, 2);
        let eta = [jv(&[0.2, 0.0]), jv(&[0.1, 0.0]), jv(&[0.0, 0.0])];
        assert_eq!(tod_next_index(&eta, &w).unwrap(), 0);
        let same = [jv(&[0.3, 0.1]), jv(&[0.3, 0.1]), jv(&[0.3, 0.1])];
        assert_eq!(tod_next_index(&same, &w).unwrap(), 0);
        let eta = [jv(&[0.0, 0.0]), jv(&[0.1, 0.0]), jv(&[0.0, 0.1])];
        assert_eq!(tod_next_index(&eta, &w).unwrap(), 1);
    }

    #[test]
    fn tod_uses_weights() {
        let w = TodWeights::scaled_identity(&[100.0, 1.0], 2);
        let eta = [jv(&[0.1, 0.0]), jv(&[0.5, 0.0])];
        assert_eq!(tod_next_index(&eta, &w).unwrap(), 0);
    }

    #[test]
    fn reference_delay_starts_at_base() {
        let s = SamplingSchedule::reference();
        assert_abs_diff_eq!(s.delay_at(0), 0.04, epsilon = 1e-15);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn horizons() {
        let h = delay_horizons(3, 0.14, 0.1, ProtocolKind::RoundRobin);
        assert_abs_diff_eq!(h.h_m, 0.24, epsilon = 1e-12);
        assert_abs_diff_eq!(h.h_s, 0.52, epsilon = 1e-12);
        let h = delay_horizons(2, 0.6666, 0.0, ProtocolKind::RoundRobin);
        assert_abs_diff_eq!(h.h_s, 1.3332, epsilon = 1e-12);
        let h = delay_horizons(5, 0.4531, 0.0, ProtocolKind::TryOnceDiscard);
        assert_eq!((h.h_m, h.h_s), (0.4531, 0.4531));
    }

    #[test]
    fn schedule_validation() {
        assert!(SamplingSchedule::new(0.2, DelayModel::Constant(0.0), 0.1, 0.0).is_err());
        assert!(SamplingSchedule::new(0.1, DelayModel::Constant(0.2), 0.1, 0.1).is_err());
        assert!(SamplingSchedule::new(0.0, DelayModel::Constant(0.0), 0.1, 0.0).is_err());
        assert!(SamplingSchedule::new(0.1, DelayModel::Constant(0.05), 0.1, 0.1).is_ok());
    }

    fn state3() -> NetworkState {
        let p = [jv(&[0.1, 0.2]), jv(&[0.3, -0.1]), jv(&[-0.2, 0.4])];
        NetworkState::new(&jv(&[0.0, 0.0]), &p, &p).unwrap()
    }

    #[test]
    fn initial_eta_is_negated_position() {
        let raw = [jv(&[0.1, 0.2]), jv(&[0.3, -0.1])];
        let corrected = [jv(&[0.0, 0.5]), jv(&[0.2, -0.4])];
        let net = NetworkState::new(&jv(&[0.0, 0.0]), &corrected, &raw).unwrap();
        assert_eq!(net.eta()[1], jv(&[-0.3, 0.1]));
        assert_eq!(net.slave_registers()[0], corrected[0]);
    }

    #[test]
    fn constant_positions_zero_scheduled_eta() {
        let schedule = SamplingSchedule::reference();
        let mut net = state3();
        let p = [jv(&[0.1, 0.2]), jv(&[0.3, -0.1]), jv(&[-0.2, 0.4])];
        let protocol = Protocol::TryOnceDiscard(TodWeights::identity(3, 2));
        let first = net
            .sample_and_transmit(&schedule, &protocol, 0, &jv(&[0.0, 0.0]), &p)
            .unwrap();
        let before = net.eta().to_vec();
        net.sample_and_transmit(&schedule, &protocol, 1, &jv(&[0.0, 0.0]), &p)
            .unwrap();
        for (i, (now, was)) in net.eta().iter().zip(&before).enumerate() {
            if i == first.index {
                assert_eq!(now.norm(), 0.0);
            } else {
                assert_eq!(now, was);
            }
        }
    }

    #[test]
    fn registers_update_only_on_arrival() {
        let schedule = SamplingSchedule::new(0.1, DelayModel::Constant(0.05), 0.1, 0.05).unwrap();
        let mut net = state3();
        let samples = [jv(&[1.0, 1.0]), jv(&[2.0, 2.0]), jv(&[3.0, 3.0])];
        let d = net
            .sample_and_transmit(&schedule, &Protocol::RoundRobin, 0, &jv(&[9.0, 9.0]), &samples)
            .unwrap();
        assert_eq!(d.index, 0);
        assert!(net.deliver_until(0.049).is_empty());
        assert_eq!(net.master_register(), &jv(&[0.0, 0.0]));
        let got = net.deliver_until(0.05);
        assert_eq!(got.len(), 1);
        assert_eq!(net.master_register(), &jv(&[9.0, 9.0]));
        assert_eq!(net.slave_registers()[0], samples[0]);
        assert_eq!(net.slave_registers()[1], jv(&[0.3, -0.1]));
    }

    #[test]
    fn rr_refreshes_every_register_in_one_cycle() {
        let schedule = SamplingSchedule::reference();
        let mut net = state3();
        let samples: Vec<_> = (0..3).map(|i| jv(&[10.0 + i as f64, 0.0])).collect();
        for k in 0..3 {
            net.sample_and_transmit(&schedule, &Protocol::RoundRobin, k, &jv(&[0.0, 0.0]), &samples)
                .unwrap();
        }
        net.deliver_until(1.0);
        assert_eq!(net.slave_registers(), samples.as_slice());
    }

    #[test]
    fn rejects_overtaking_samples() {
        // t = s + 2|sin s| decreases for s in (2π/3, π).
        let schedule = SamplingSchedule {
            sampling_interval: 0.01,
            delay: DelayModel::AbsSine {
                base: 0.0,
                amplitude: 2.0,
            },
            mati: 0.01,
            mad: 2.0,
        };
        let mut net = state3();
        let p = [jv(&[0.0, 0.0]), jv(&[0.0, 0.0]), jv(&[0.0, 0.0])];
        let mut failed = false;
        for k in 0..400 {
            if net
                .sample_and_transmit(&schedule, &Protocol::RoundRobin, k, &p[0], &p)
                .is_err()
            {
                failed = true;
                break;
            }
        }
        assert!(failed);
    }
}
