//! Simulation and stability analysis for single-master / multi-slave
//! bilateral teleoperation over a scheduled, bandwidth-limited network.
//!
//! The crate is organised bottom-up:
//!
//! * [`manipulator`] — 2-DOF planar arm dynamics and kinematics.
//! * [`controller`] — P+d master and slave laws with gravity compensation.
//! * [`network`] — sampling, delays, zero-order holds and the Round-Robin /
//!   Try-Once-Discard schedulers.
//! * [`simulator`] — event-aligned RK4 integration of the closed loop, the
//!   force models, Lyapunov-Krasovskii functionals and CSV traces.
//! * [`stability`] — LMI block assembly, feasibility tests and the
//!   maximum-allowable-transmission-interval search.

pub mod controller;
pub mod error;
pub mod manipulator;
pub mod network;
pub mod simulator;
pub mod stability;

pub use controller::{master_control, slave_control, FormationGeometry, GainSet};
pub use error::{Error, Result};
pub use manipulator::{JointVector, ManipulatorParams, ManipulatorState};
pub use network::{
    delay_horizons, rr_next_index, tod_next_index, DelayHorizons, NetworkState, Protocol,
    SamplingSchedule, TodWeights,
};
pub use simulator::{run_simulation, Scenario, ScenarioKind, SimConfig, SimTrace};
pub use stability::{
    feasible_rr, feasible_tod, max_mati, rr_analytic_max_mati, FeasibilityResult, MatiSearch,
    ProtocolKind, StabilityQuery,
};

/// Dense real matrix used for gains, LMI blocks and dynamics.
pub type Matrix = nalgebra::DMatrix<f64>;
