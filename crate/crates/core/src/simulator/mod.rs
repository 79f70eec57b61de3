//! Closed-loop simulation of one master and `N` slaves over the scheduled
//! network.
//!
//! Integration is fixed-step RK4, shortened where needed so that every
//! sampling instant `s_k` and arrival instant `t_k` falls on a step boundary.
//! Remote data are held constant between events; at an instant carrying
//! both a sample and an arrival, the sample is taken first.

mod forces;
mod lyapunov;
mod metrics;
mod trace;

pub use forces::{
    bounded_force_profile, human_force_scenario2, rectangle_force_scenario3, wall_contact_force,
    RectanglePulse, Wall,
};
pub use lyapunov::{
    lyapunov_v_rr, lyapunov_ve_tod, FunctionalContext, QuadratureHistory, ResetInterval,
    VelocityHistory,
};
pub use metrics::{steady_state_metrics, SteadyStateMetrics};
pub use trace::{JumpRecord, SimTrace, TraceRow};

use std::f64::consts::PI;

use crate::controller::{master_control, slave_control, FormationGeometry, GainSet};
use crate::error::{check_len, Error, Result};
use crate::manipulator::{JointVector, ManipulatorParams, ManipulatorState, JOINTS};
use crate::network::{
    delay_horizons, NetworkState, Protocol, ProtocolKind, SamplingSchedule, TodWeights,
    Transmission,
};
use crate::stability::{feasible_rr, feasible_tod, StabilityQuery, Witness};

/// Events closer than this are treated as simultaneous.
const EVENT_SNAP: f64 = 1e-12;
/// Joint speed (rad/s) beyond which a run is declared divergent.
const DIVERGENCE_SPEED: f64 = 1e6;

/// Everything about the closed loop except the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Master first, then one entry per slave.
    pub params: Vec<ManipulatorParams>,
    pub gains: GainSet,
    pub formation: FormationGeometry,
    pub schedule: SamplingSchedule,
    pub protocol: Protocol,
    /// Integration step (s).
    pub step: f64,
    /// Log every `trace_stride`-th integration step.
    pub trace_stride: usize,
    /// Certificate used to evaluate `V` or `V_e` along the run.
    pub certificate: Option<Witness>,
}

impl SimConfig {
    /// Three slaves, `k_p = k_d = 20`, the reference formation and schedule,
    /// identity TOD weights, 1 ms steps.
    pub fn reference(protocol: ProtocolKind) -> Self {
        let slaves = 3;
        Self {
            params: vec![ManipulatorParams::default(); slaves + 1],
            gains: GainSet::uniform(slaves, 20.0, 20.0, JOINTS).expect("positive gains"),
            formation: FormationGeometry::reference(),
            schedule: SamplingSchedule::reference(),
            protocol: match protocol {
                ProtocolKind::RoundRobin => Protocol::RoundRobin,
                ProtocolKind::TryOnceDiscard => {
                    Protocol::TryOnceDiscard(TodWeights::identity(slaves, JOINTS))
                }
            },
            step: 1e-3,
            trace_stride: 10,
            certificate: None,
        }
    }

    pub fn slaves(&self) -> usize {
        self.gains.slaves()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.slaves();
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "at least two slaves required, got {n}"
            )));
        }
        check_len(self.gains.joints(), JOINTS, "gain size vs joints")?;
        check_len(self.params.len(), n + 1, "arm parameters (master + slaves)")?;
        for p in &self.params {
            p.validate()?;
        }
        self.gains.validate()?;
        self.formation.validate()?;
        check_len(self.formation.slaves(), n, "formation offsets")?;
        self.schedule.validate()?;
        if let Protocol::TryOnceDiscard(w) = &self.protocol {
            check_len(w.q.len(), n, "TOD weights")?;
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter("step must be positive".into()));
        }
        if self.step > self.schedule.sampling_interval / 10.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "step {} exceeds a tenth of the sampling interval {}",
                self.step, self.schedule.sampling_interval
            )));
        }
        if self.trace_stride == 0 {
            return Err(Error::InvalidParameter("trace stride must be at least 1".into()));
        }
        match (&self.certificate, self.protocol.kind()) {
            (None, _)
            | (Some(Witness::RoundRobin(_)), ProtocolKind::RoundRobin)
            | (Some(Witness::TryOnceDiscard(_)), ProtocolKind::TryOnceDiscard) => Ok(()),
            _ => Err(Error::InvalidParameter(
                "certificate does not match the protocol".into(),
            )),
        }
    }

    /// Solves the protocol's LMIs at the schedule's (MATI, MAD) and attaches
    /// the witness. Under TOD the scheduler weights become the witness `Qᵢ`,
    /// which the jump argument for `V_e` requires. Returns whether a
    /// certificate was found.
    pub fn attach_certificate(&mut self) -> Result<bool> {
        let kind = self.protocol.kind();
        let query = StabilityQuery::new(self.gains.clone(), self.schedule.mad, kind)?;
        let mati = self.schedule.mati;
        self.certificate = match kind {
            ProtocolKind::RoundRobin => feasible_rr(&query, mati)?.witness.map(Witness::RoundRobin),
            ProtocolKind::TryOnceDiscard => {
                let witness = feasible_tod(&query, mati)?.witness;
                if let Some(w) = &witness {
                    self.protocol = Protocol::TryOnceDiscard(TodWeights { q: w.q.clone() });
                }
                witness.map(Witness::TryOnceDiscard)
            }
        };
        Ok(self.certificate.is_some())
    }

    fn context(&self) -> FunctionalContext<'_> {
        FunctionalContext {
            params: &self.params,
            gains: &self.gains,
            formation: &self.formation,
        }
    }
}

/// The three reference experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// No external forces.
    FreeMotion,
    /// `F₁(t) = 25 + 10 sin t` on the master end effector; slaves free.
    BoundedForce,
    /// Rectangular `F₂(t)` on the master; slaves meet a stiff wall.
    Contact,
}

impl ScenarioKind {
    /// 0.1 ms for the stiff contact, 1 ms otherwise.
    pub fn default_step(self) -> f64 {
        match self {
            ScenarioKind::Contact => 1e-4,
            _ => 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Simulated time (s).
    pub duration: f64,
    /// Master first, then one state per slave.
    pub initial_states: Vec<ManipulatorState>,
    pub pulse: RectanglePulse,
    pub wall: Wall,
}

impl Scenario {
    /// Free motion from the reference initial configuration; slave `i` takes
    /// the `(i mod 3)`-th reference pose.
    pub fn free_motion(duration: f64, slaves: usize) -> Self {
        let poses = [[PI / 8.0, -PI / 4.0], [-PI / 4.0, PI / 8.0], [PI / 8.0, PI / 8.0]];
        let mut initial_states = vec![ManipulatorState::at_rest(&[PI / 4.0, PI / 6.0])];
        initial_states.extend((0..slaves).map(|i| ManipulatorState::at_rest(&poses[i % 3])));
        Self {
            kind: ScenarioKind::FreeMotion,
            duration,
            initial_states,
            pulse: RectanglePulse::default(),
            wall: Wall::default(),
        }
    }

    /// Every arm at rest in the stretched configuration `q = 0`.
    pub fn from_rest(kind: ScenarioKind, duration: f64, slaves: usize) -> Self {
        Self {
            kind,
            duration,
            initial_states: vec![ManipulatorState::at_rest(&[0.0; JOINTS]); slaves + 1],
            pulse: RectanglePulse::default(),
            wall: Wall::default(),
        }
    }

    /// The reference initial conditions of `kind`.
    pub fn reference(kind: ScenarioKind, duration: f64, slaves: usize) -> Self {
        match kind {
            ScenarioKind::FreeMotion => Self::free_motion(duration, slaves),
            _ => Self::from_rest(kind, duration, slaves),
        }
    }

    fn validate(&self, slaves: usize) -> Result<()> {
        check_len(self.initial_states.len(), slaves + 1, "initial states (master + slaves)")?;
        for s in &self.initial_states {
            check_len(s.joints(), JOINTS, "initial state joints")?;
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter("duration must be positive".into()));
        }
        Ok(())
    }

    /// Operator torque on the master and environment torques on the slaves.
    fn external(
        &self,
        params: &[ManipulatorParams],
        t: f64,
        master: &JointVector,
        slaves: &[ManipulatorState],
    ) -> Result<(JointVector, Vec<JointVector>)> {
        let zero = || JointVector::zeros(JOINTS);
        Ok(match self.kind {
            ScenarioKind::FreeMotion => (zero(), vec![zero(); slaves.len()]),
            ScenarioKind::BoundedForce => (
                human_force_scenario2(&params[0], t, master)?,
                vec![zero(); slaves.len()],
            ),
            ScenarioKind::Contact => (
                params[0].cartesian_to_joint(master, [0.0, self.pulse.value(t)])?,
                slaves
                    .iter()
                    .enumerate()
                    .map(|(i, s)| self.wall.contact_torque(&params[i + 1], &s.q))
                    .collect::<Result<_>>()?,
            ),
        })
    }
}

/// Inputs and outputs of the closed loop at one instant.
struct Evaluation {
    f_m: JointVector,
    f_s: Vec<JointVector>,
    tau_m: JointVector,
    tau_s: Vec<JointVector>,
    acc_m: JointVector,
    acc_s: Vec<JointVector>,
}

struct Plant<'a> {
    config: &'a SimConfig,
    scenario: &'a Scenario,
}

impl Plant<'_> {
    fn evaluate(
        &self,
        t: f64,
        master: &ManipulatorState,
        slaves: &[ManipulatorState],
        network: &NetworkState,
    ) -> Result<Evaluation> {
        let cfg = self.config;
        let (f_m, f_s) = self.scenario.external(&cfg.params, t, &master.q, slaves)?;
        let g_m = cfg.params[0].gravity_vector(&master.q)?;
        let tau_m = master_control(&cfg.gains, &master.q, &master.dq, network.slave_registers(), &g_m)?;
        let acc_m = cfg.params[0].forward_dynamics(master, &tau_m, &f_m)?;
        let mut tau_s = Vec::with_capacity(slaves.len());
        let mut acc_s = Vec::with_capacity(slaves.len());
        for (i, s) in slaves.iter().enumerate() {
            let p = &cfg.params[i + 1];
            let g = p.gravity_vector(&s.q)?;
            let tau = slave_control(
                &cfg.gains,
                &cfg.formation,
                i,
                &s.q,
                &s.dq,
                network.master_register(),
                &g,
            )?;
            acc_s.push(p.forward_dynamics(s, &tau, &f_s[i])?);
            tau_s.push(tau);
        }
        Ok(Evaluation {
            f_m,
            f_s,
            tau_m,
            tau_s,
            acc_m,
            acc_s,
        })
    }

    /// One classical RK4 step of length `dt` with the network holds frozen.
    fn rk4(
        &self,
        t: f64,
        dt: f64,
        arms: &[ManipulatorState],
        network: &NetworkState,
    ) -> Result<Vec<ManipulatorState>> {
        let derivative = |tt: f64, x: &[ManipulatorState]| -> Result<Vec<(JointVector, JointVector)>> {
            let e = self.evaluate(tt, &x[0], &x[1..], network)?;
            let mut d = vec![(x[0].dq.clone(), e.acc_m)];
            d.extend(x[1..].iter().zip(e.acc_s).map(|(s, a)| (s.dq.clone(), a)));
            Ok(d)
        };
        let shift = |x: &[ManipulatorState], d: &[(JointVector, JointVector)], h: f64| -> Vec<ManipulatorState> {
            x.iter()
                .zip(d)
                .map(|(s, (dq, ddq))| ManipulatorState {
                    q: &s.q + dq * h,
                    dq: &s.dq + ddq * h,
                })
                .collect()
        };
        let k1 = derivative(t, arms)?;
        let k2 = derivative(t + 0.5 * dt, &shift(arms, &k1, 0.5 * dt))?;
        let k3 = derivative(t + 0.5 * dt, &shift(arms, &k2, 0.5 * dt))?;
        let k4 = derivative(t + dt, &shift(arms, &k3, dt))?;
        Ok(arms
            .iter()
            .enumerate()
            .map(|(a, s)| ManipulatorState {
                q: &s.q + (&k1[a].0 + &k2[a].0 * 2.0 + &k3[a].0 * 2.0 + &k4[a].0) * (dt / 6.0),
                dq: &s.dq + (&k1[a].1 + &k2[a].1 * 2.0 + &k3[a].1 * 2.0 + &k4[a].1) * (dt / 6.0),
            })
            .collect())
    }
}

/// Lyapunov bookkeeping for an attached certificate.
enum Monitor {
    Off,
    RoundRobin {
        history: VelocityHistory,
        h_m: f64,
        h_s: f64,
    },
    TryOnceDiscard {
        vars: crate::stability::LmiVariablesTOD,
        history: VelocityHistory,
        h_m: f64,
    },
}

impl Monitor {
    fn new(config: &SimConfig, arms: &[ManipulatorState]) -> Result<Self> {
        let n = config.slaves();
        let (mati, mad) = (config.schedule.mati, config.schedule.mad);
        Ok(match &config.certificate {
            None => Monitor::Off,
            Some(Witness::RoundRobin(vars)) => {
                let h = delay_horizons(n, mati, mad, ProtocolKind::RoundRobin);
                Monitor::RoundRobin {
                    history: VelocityHistory::for_rr(vars, &arms[0], &arms[1..])?,
                    h_m: h.h_m,
                    h_s: h.h_s,
                }
            }
            Some(Witness::TryOnceDiscard(vars)) => Monitor::TryOnceDiscard {
                history: VelocityHistory::for_tod(vars, &arms[0], &arms[1..])?,
                vars: vars.clone(),
                h_m: delay_horizons(n, mati, mad, ProtocolKind::TryOnceDiscard).h_m,
            },
        })
    }

    fn record(&mut self, t: f64, arms: &[ManipulatorState]) {
        match self {
            Monitor::Off => {}
            Monitor::RoundRobin { history, .. } | Monitor::TryOnceDiscard { history, .. } => {
                history.record(t, &arms[0], &arms[1..])
            }
        }
    }

    /// `V` or `V_e` at `t`; `V_e` needs the inter-arrival interval of `active`.
    fn value(
        &self,
        config: &SimConfig,
        t: f64,
        arms: &[ManipulatorState],
        active: Option<&Transmission>,
    ) -> Result<Option<f64>> {
        match self {
            Monitor::Off => Ok(None),
            Monitor::RoundRobin { history, h_m, h_s } => {
                lyapunov_v_rr(config.context(), history, *h_m, *h_s, t, &arms[0], &arms[1..]).map(Some)
            }
            Monitor::TryOnceDiscard { vars, history, h_m } => {
                let Some(packet) = active else { return Ok(None) };
                let interval = ResetInterval {
                    sample_time: packet.sample_time,
                    arrival_time: packet.arrival_time,
                    next_arrival_time: config.schedule.arrival_time(packet.k + 1),
                    scheduled: packet.slave_index,
                    eta: packet.eta.clone(),
                };
                lyapunov_ve_tod(config.context(), vars, history, *h_m, &interval, t, &arms[0], &arms[1..])
                    .map(Some)
            }
        }
    }
}

fn check_finite(t: f64, arms: &[ManipulatorState]) -> Result<()> {
    for (a, s) in arms.iter().enumerate() {
        let finite = s.q.iter().chain(s.dq.iter()).all(|v| v.is_finite());
        if !finite || s.dq.amax() > DIVERGENCE_SPEED {
            let arm = if a == 0 { "master".to_string() } else { format!("slave {a}") };
            return Err(Error::Divergence {
                time: t,
                reason: format!("{arm} state left the finite/bounded range: q = {:?}, dq = {:?}", s.q.as_slice(), s.dq.as_slice()),
            });
        }
    }
    Ok(())
}

/// Integrates the closed loop over `scenario.duration`.
pub fn run_simulation(config: &SimConfig, scenario: &Scenario) -> Result<SimTrace> {
    config.validate()?;
    let n = config.slaves();
    scenario.validate(n)?;

    let plant = Plant { config, scenario };
    let mut arms = scenario.initial_states.clone();
    let raw: Vec<JointVector> = arms[1..].iter().map(|s| s.q.clone()).collect();
    let corrected = |arms: &[ManipulatorState]| -> Result<Vec<JointVector>> {
        arms[1..]
            .iter()
            .enumerate()
            .map(|(i, s)| config.formation.corrected(i, &s.q))
            .collect()
    };
    let mut network = NetworkState::new(&arms[0].q, &corrected(&arms)?, &raw)?;
    let mut monitor = Monitor::new(config, &arms)?;

    let mut trace = SimTrace {
        slaves: n,
        joints: JOINTS,
        ..SimTrace::default()
    };
    let schedule = &config.schedule;
    let mut t = 0.0;
    let mut next_sample = 0usize;
    let mut steps = 0usize;

    let log_row = |trace: &mut SimTrace, t: f64, arms: &[ManipulatorState], network: &NetworkState, monitor: &Monitor| -> Result<()> {
        let e = plant.evaluate(t, &arms[0], &arms[1..], network)?;
        let eta = network.active().map_or(network.eta(), |p| p.eta.as_slice());
        trace.rows.push(TraceRow {
            t,
            master: arms[0].clone(),
            slaves: arms[1..].to_vec(),
            scheduled: trace.decisions.last().map(|d| d.index),
            eta_norms: eta.iter().map(|e| e.norm()).collect(),
            lyapunov: monitor.value(config, t, arms, network.active())?,
            ee_m: config.params[0].end_effector(&arms[0].q)?,
            ee_s: arms[1..]
                .iter()
                .enumerate()
                .map(|(i, s)| config.params[i + 1].end_effector(&s.q))
                .collect::<Result<_>>()?,
            f_m: e.f_m,
            f_s: e.f_s,
            tau_m: e.tau_m,
            tau_s: e.tau_s,
        });
        Ok(())
    };

    loop {
        // Events at the current instant: sampling first, then arrivals.
        if (schedule.sample_time(next_sample) - t).abs() <= EVENT_SNAP {
            let decision = network.sample_and_transmit(
                schedule,
                &config.protocol,
                next_sample,
                &arms[0].q,
                &corrected(&arms)?,
            )?;
            trace.decisions.push(decision);
            if let Some(v) = monitor.value(config, t, &arms, network.active())? {
                trace.lyapunov_at_samples.push((t, v));
            }
            next_sample += 1;
        }
        if network.next_arrival().is_some_and(|a| a <= t + EVENT_SNAP) {
            let before = match &monitor {
                Monitor::TryOnceDiscard { .. } => monitor.value(config, t, &arms, network.active())?,
                _ => None,
            };
            for packet in network.deliver_until(t + EVENT_SNAP) {
                trace.arrivals.push(packet.arrival_time);
            }
            if let Some(before) = before {
                if let Some(after) = monitor.value(config, t, &arms, network.active())? {
                    trace.jumps.push(JumpRecord { t, before, after });
                }
            }
        }

        let done = t >= scenario.duration - EVENT_SNAP;
        if steps.is_multiple_of(config.trace_stride) || done {
            log_row(&mut trace, t, &arms, &network, &monitor)?;
        }
        if done {
            break;
        }

        let mut next_event = schedule.sample_time(next_sample).min(scenario.duration);
        if let Some(a) = network.next_arrival() {
            next_event = next_event.min(a);
        }
        let (dt, t_next) = if next_event - t <= config.step + EVENT_SNAP {
            (next_event - t, next_event)
        } else {
            (config.step, t + config.step)
        };
        arms = plant.rk4(t, dt, &arms, &network)?;
        t = t_next;
        steps += 1;
        check_finite(t, &arms)?;
        monitor.record(t, &arms);
    }
    Ok(trace)
}
