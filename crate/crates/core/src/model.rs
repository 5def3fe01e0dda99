//! Per-manifold coupling matrix and instantaneous mixing angles.
//!
//! Within photon manifold `n` the four coupled states are
//! `{|1,n⟩, |2,n⟩, |3,n⟩, |4,n+1⟩}` and the drive matrix in that basis is
//!
//! ```text
//!         ⎛ 0      W₁     0     0        ⎞
//!  W(t) = ⎜ W₁     0      W₂    √(n+1)β  ⎟
//!         ⎜ 0      W₂     0     0        ⎟
//!         ⎝ 0      √(n+1)β 0    0        ⎠
//! ```
//!
//! with eigenvalues {0, 0, +Ω, −Ω}. The angles ϑ and φ parameterize its
//! eigenbasis through `tan ϑ = W₁/(√(n+1)β)` and
//! `tan φ = W₂/√(W₁² + (n+1)β²)`.

use nalgebra::Matrix4;

use crate::pulses::{PulseSchedule, RATIO_DENOM_FLOOR};

/// The 4×4 real symmetric drive matrix at a fixed time, tagged with its
/// photon manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub entries: Matrix4<f64>,
    pub n: u32,
}

impl CouplingMatrix {
    /// Builds the matrix from raw coupling values. `beta` is the bare cavity
    /// coupling; the stored entry is `√(n+1)·beta`.
    pub fn from_values(w1: f64, w2: f64, beta: f64, n: u32) -> Self {
        let be = ((n as f64) + 1.0).sqrt() * beta;
        let entries = Matrix4::new(
            0.0, w1, 0.0, 0.0, //
            w1, 0.0, w2, be, //
            0.0, w2, 0.0, 0.0, //
            0.0, be, 0.0, 0.0,
        );
        Self { entries, n }
    }

    /// Root-mean-square Rabi frequency of this matrix.
    pub fn omega(&self) -> f64 {
        let w1 = self.entries[(0, 1)];
        let w2 = self.entries[(1, 2)];
        let be = self.entries[(1, 3)];
        (w1 * w1 + w2 * w2 + be * be).sqrt()
    }
}

/// Instantaneous mixing angles and rms Rabi frequency.
///
/// Both angles live in [0, π/2]: the envelopes are non-negative, so a fixed
/// branch keeps the dark-state rotation angle deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingAngles {
    pub theta: f64,
    pub phi: f64,
    pub omega: f64,
}

impl MixingAngles {
    /// Angles from raw coupling values; `beta_eff` already carries the
    /// `√(n+1)` manifold factor. Denominators are floored at 1e-300 so the
    /// angle limits survive underflowed envelope tails.
    pub fn from_couplings(w1: f64, w2: f64, beta_eff: f64) -> Self {
        let theta = w1.atan2(beta_eff.max(RATIO_DENOM_FLOOR));
        let h = (w1 * w1 + beta_eff * beta_eff).sqrt();
        let phi = w2.atan2(h.max(RATIO_DENOM_FLOOR));
        let omega = (w1 * w1 + w2 * w2 + beta_eff * beta_eff).sqrt();
        Self { theta, phi, omega }
    }
}

/// Time derivatives of the mixing angles, from closed-form Gaussian envelope
/// derivatives (no finite differences).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRates {
    pub theta_dot: f64,
    pub phi_dot: f64,
}

/// Drive matrix of schedule `s` at time `t`.
pub fn coupling_matrix(s: &PulseSchedule, t: f64) -> CouplingMatrix {
    CouplingMatrix::from_values(s.w1.value(t), s.w2.value(t), s.beta.value(t), s.n)
}

/// Mixing angles of schedule `s` at time `t`.
pub fn mixing_angles(s: &PulseSchedule, t: f64) -> MixingAngles {
    MixingAngles::from_couplings(s.w1.value(t), s.w2.value(t), s.beta_eff(t))
}

/// Angle rates of schedule `s` at time `t`.
///
/// `ϑ̇ = (Ẇ₁ β̃ − W₁ β̃̇)/(W₁² + β̃²)` and
/// `φ̇ = (Ẇ₂ h − W₂ ḣ)/Ω²` with `h = √(W₁² + β̃²)`. Where a denominator has
/// underflowed the corresponding angle is pinned at its limit and the rate
/// is zero.
pub fn angle_rates(s: &PulseSchedule, t: f64) -> AngleRates {
    let w1 = s.w1.value(t);
    let w2 = s.w2.value(t);
    let be = s.beta_eff(t);
    let dw1 = s.w1.derivative(t);
    let dw2 = s.w2.derivative(t);
    let dbe = s.beta_eff_derivative(t);

    let h2 = w1 * w1 + be * be;
    let theta_dot = if h2 < RATIO_DENOM_FLOOR {
        0.0
    } else {
        (dw1 * be - w1 * dbe) / h2
    };

    let h = h2.sqrt();
    let omega2 = h2 + w2 * w2;
    let phi_dot = if h < RATIO_DENOM_FLOOR || omega2 < RATIO_DENOM_FLOOR {
        0.0
    } else {
        let dh = (w1 * dw1 + be * dbe) / h;
        (dw2 * h - w2 * dh) / omega2
    };

    AngleRates { theta_dot, phi_dot }
}
