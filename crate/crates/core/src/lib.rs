//! Simulation and analytic tools for adiabatic passage of a four-level atom
//! through two delayed laser pulses and a quantized cavity mode.
//!
//! The atom has three ground states coupled to a common excited state: laser 1
//! drives 1 ↔ 2, laser 2 drives 3 ↔ 2, and the cavity mode drives 4 ↔ 2 with
//! a photon-number-dependent strength. Within a fixed photon manifold the
//! dynamics reduces to a driven complex 4-vector, which this crate propagates
//! both exactly (adaptive Runge–Kutta) and in the adiabatic dark/bright-state
//! frame (closed-form rotation + quadratures). A counterintuitively ordered
//! pulse sequence rotates the system between the two degenerate dark states,
//! leaving the cavity in a superposition of Fock states whose weights are set
//! by a single angle; running one atom through the sequence and a second atom
//! through the reversed sequence entangles the pair.
//!
//! Modules:
//! - [`pulses`]: Gaussian envelopes, pulse schedules, pulse area, ordering checks
//! - [`model`]: per-manifold coupling matrix and mixing angles
//! - [`adiabatic`]: dark/bright eigenbasis, rotation angle, evolution operator
//! - [`integrator`]: adaptive Runge–Kutta propagation and adiabaticity audits
//! - [`entangle`]: the sequential two-atom protocol and entanglement measures
//! - [`cli`]: command implementations behind the `cavity-passage` binary

pub mod adiabatic;
pub mod cli;
pub mod entangle;
pub mod integrator;
pub mod model;
pub mod pulses;
mod quad;

pub use adiabatic::{
    adiabatic_basis, adiabatic_solution, asymptotic_state, dynamical_phase, evolution_operator,
    mixing_angle_gamma, transform_matrix, AdiabaticFrame, AdiabaticSolution,
};
pub use entangle::{fidelity, run_protocol, schmidt_entropy, Bipartition, JointState};
pub use integrator::{
    adiabaticity_report, integrate_in_adiabatic_frame, integrate_schrodinger, AmplitudeBlock,
    Trajectory,
};
pub use model::{coupling_matrix, mixing_angles, CouplingMatrix, MixingAngles};
pub use pulses::{
    effective_pulse_area, schedule_ordering_check, PulseEnvelope, PulseSchedule, ScheduleConfig,
};
pub use quad::QuadError;
