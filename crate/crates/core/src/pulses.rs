//! Pulse envelopes and schedules.
//!
//! All quantities are dimensionless (ħ = 1); amplitudes are Rabi frequencies
//! and widths are 1/e half-widths of Gaussian envelopes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{self, QuadError};

/// Relative floor below which an envelope counts as "off" at a window edge.
pub const BOUNDARY_FLOOR_REL: f64 = 1e-6;
/// Half-width multiple used when no explicit window is given.
pub const DEFAULT_WINDOW_WIDTHS: f64 = 6.0;
/// Tolerance (rad) for the boundary-angle conditions of the ordering check.
pub const ORDERING_ANGLE_TOL: f64 = 1e-3;
/// Absolute tolerance for pulse-area quadrature.
pub const AREA_QUAD_TOL: f64 = 1e-9;
/// Floor applied to atan2 denominators so angle limits stay defined when all
/// envelopes have decayed to zero.
pub(crate) const RATIO_DENOM_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, PartialEq)]
pub enum PulseError {
    #[error("envelope width must be positive and finite, got {0}")]
    NonPositiveWidth(f64),
    #[error("envelope amplitude must be non-negative and finite, got {0}")]
    InvalidAmplitude(f64),
    #[error("window must satisfy t_start < t_end, got [{t_start}, {t_end}]")]
    WindowOrder { t_start: f64, t_end: f64 },
    #[error(
        "envelope `{name}` is not off at t = {t}: value {value:.3e} exceeds boundary floor {floor:.3e}"
    )]
    EnvelopeOnAtBoundary {
        name: &'static str,
        t: f64,
        value: f64,
        floor: f64,
    },
}

/// Gaussian pulse envelope `amplitude · exp(−((t − center)/width)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl PulseEnvelope {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Result<Self, PulseError> {
        if !width.is_finite() || width <= 0.0 {
            return Err(PulseError::NonPositiveWidth(width));
        }
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(PulseError::InvalidAmplitude(amplitude));
        }
        Ok(Self {
            amplitude,
            center,
            width,
        })
    }

    /// Envelope value at time `t`.
    pub fn value(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.width;
        self.amplitude * (-x * x).exp()
    }

    /// Time derivative of the envelope at `t` (closed form).
    pub fn derivative(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.width;
        self.value(t) * (-2.0 * x / self.width)
    }
}

/// A triple of envelopes (laser 1, laser 2, cavity coupling) together with the
/// photon-manifold index `n` and the time window over which they act.
///
/// Within manifold `n` the effective cavity coupling is `√(n+1)·β(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub w1: PulseEnvelope,
    pub w2: PulseEnvelope,
    pub beta: PulseEnvelope,
    pub n: u32,
    pub t_start: f64,
    pub t_end: f64,
}

impl PulseSchedule {
    /// Builds a schedule over an explicit window, checking that the window is
    /// ordered and that every envelope is effectively off at both edges.
    pub fn new(
        w1: PulseEnvelope,
        w2: PulseEnvelope,
        beta: PulseEnvelope,
        n: u32,
        t_start: f64,
        t_end: f64,
    ) -> Result<Self, PulseError> {
        if t_start.partial_cmp(&t_end) != Some(std::cmp::Ordering::Less) {
            return Err(PulseError::WindowOrder { t_start, t_end });
        }
        let max_amp = w1.amplitude.max(w2.amplitude).max(beta.amplitude);
        let floor = BOUNDARY_FLOOR_REL * max_amp;
        for (name, env) in [("w1", &w1), ("w2", &w2), ("beta", &beta)] {
            for t in [t_start, t_end] {
                let value = env.value(t);
                if value > floor {
                    return Err(PulseError::EnvelopeOnAtBoundary {
                        name,
                        t,
                        value,
                        floor,
                    });
                }
            }
        }
        Ok(Self {
            w1,
            w2,
            beta,
            n,
            t_start,
            t_end,
        })
    }

    /// Builds a schedule with the default window
    /// `[min center − 6·max width, max center + 6·max width]`.
    pub fn with_default_window(
        w1: PulseEnvelope,
        w2: PulseEnvelope,
        beta: PulseEnvelope,
        n: u32,
    ) -> Result<Self, PulseError> {
        let cs = [w1.center, w2.center, beta.center];
        let ws = [w1.width, w2.width, beta.width];
        let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        let cmax = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let wmax = ws.iter().cloned().fold(0.0, f64::max);
        Self::new(
            w1,
            w2,
            beta,
            n,
            cmin - DEFAULT_WINDOW_WIDTHS * wmax,
            cmax + DEFAULT_WINDOW_WIDTHS * wmax,
        )
    }

    /// Same envelopes and window, different photon manifold.
    pub fn with_manifold(&self, n: u32) -> Self {
        Self { n, ..*self }
    }

    /// Effective cavity coupling `√(n+1)·β(t)` in this schedule's manifold.
    pub fn beta_eff(&self, t: f64) -> f64 {
        ((self.n as f64) + 1.0).sqrt() * self.beta.value(t)
    }

    pub(crate) fn beta_eff_derivative(&self, t: f64) -> f64 {
        ((self.n as f64) + 1.0).sqrt() * self.beta.derivative(t)
    }

    /// Root-mean-square Rabi frequency `Ω(t) = √(W₁² + W₂² + (n+1)β²)`,
    /// the bright-state splitting.
    pub fn omega(&self, t: f64) -> f64 {
        let w1 = self.w1.value(t);
        let w2 = self.w2.value(t);
        let be = self.beta_eff(t);
        (w1 * w1 + w2 * w2 + be * be).sqrt()
    }

    /// Window length `t_end − t_start`.
    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Effective pulse area `S′ = ∫ Ω(τ) dτ` over the schedule window.
///
/// Adiabatic following requires `S′ ≫ 1`.
pub fn effective_pulse_area(s: &PulseSchedule) -> Result<f64, QuadError> {
    quad::integrate(|t| s.omega(t), s.t_start, s.t_end, AREA_QUAD_TOL)
}

/// Boundary angles achieved by a schedule and the pass/fail status of the
/// counterintuitive ordering conditions (cavity on before laser 1, cavity off
/// after laser 1 ceases, laser 2 off last).
///
/// The conditions are expressed through the mixing-angle limits at the window
/// edges: the target ordering must reach ϑ → 0 at both edges and φ → π/2 at
/// the end of the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingReport {
    pub theta_start: f64,
    pub theta_end: f64,
    pub phi_start: f64,
    pub phi_end: f64,
    /// ϑ(t_start) ≈ 0: the cavity field dominates laser 1 as the window opens.
    pub cavity_on_first: bool,
    /// ϑ(t_end) ≈ 0: the cavity field still dominates laser 1's tail at close.
    pub cavity_off_after_w1: bool,
    /// φ(t_end) ≈ π/2: laser 2 is the last field standing.
    pub w2_off_last: bool,
    pub tolerance: f64,
}

impl OrderingReport {
    pub fn passed(&self) -> bool {
        self.cavity_on_first && self.cavity_off_after_w1 && self.w2_off_last
    }
}

/// Checks the counterintuitive pulse ordering with the default angle tolerance.
pub fn schedule_ordering_check(s: &PulseSchedule) -> OrderingReport {
    schedule_ordering_check_with_tol(s, ORDERING_ANGLE_TOL)
}

/// Checks the counterintuitive pulse ordering against boundary angles achieved
/// at the window edges, within `tol` radians.
pub fn schedule_ordering_check_with_tol(s: &PulseSchedule, tol: f64) -> OrderingReport {
    let (theta_start, phi_start) = boundary_angles(s, s.t_start);
    let (theta_end, phi_end) = boundary_angles(s, s.t_end);
    OrderingReport {
        theta_start,
        theta_end,
        phi_start,
        phi_end,
        cavity_on_first: theta_start <= tol,
        cavity_off_after_w1: theta_end <= tol,
        w2_off_last: std::f64::consts::FRAC_PI_2 - phi_end <= tol,
        tolerance: tol,
    }
}

/// (ϑ, φ) from envelope ratios at `t`, with floored denominators so the limits
/// survive underflow of the raw envelope values.
fn boundary_angles(s: &PulseSchedule, t: f64) -> (f64, f64) {
    let w1 = s.w1.value(t);
    let w2 = s.w2.value(t);
    let be = s.beta_eff(t);
    let theta = w1.atan2(be.max(RATIO_DENOM_FLOOR));
    let h = (w1 * w1 + be * be).sqrt();
    let phi = w2.atan2(h.max(RATIO_DENOM_FLOOR));
    (theta, phi)
}

/// One envelope of a schedule configuration document.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl EnvelopeConfig {
    fn build(&self) -> Result<PulseEnvelope, PulseError> {
        PulseEnvelope::new(self.amplitude, self.center, self.width)
    }
}

impl From<PulseEnvelope> for EnvelopeConfig {
    fn from(e: PulseEnvelope) -> Self {
        Self {
            amplitude: e.amplitude,
            center: e.center,
            width: e.width,
        }
    }
}

/// JSON-facing schedule description. `t_start`/`t_end` may be omitted, in
/// which case the default window is used.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub w1: EnvelopeConfig,
    pub w2: EnvelopeConfig,
    pub beta: EnvelopeConfig,
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<PulseSchedule, PulseError> {
        let w1 = self.w1.build()?;
        let w2 = self.w2.build()?;
        let beta = self.beta.build()?;
        match (self.t_start, self.t_end) {
            (Some(a), Some(b)) => PulseSchedule::new(w1, w2, beta, self.n, a, b),
            (None, None) => PulseSchedule::with_default_window(w1, w2, beta, self.n),
            // A single explicit edge: fill the other from the default window.
            _ => {
                let d = PulseSchedule::with_default_window(w1, w2, beta, self.n)?;
                PulseSchedule::new(
                    w1,
                    w2,
                    beta,
                    self.n,
                    self.t_start.unwrap_or(d.t_start),
                    self.t_end.unwrap_or(d.t_end),
                )
            }
        }
    }

    /// Builds with laser 2 recentered to `w1.center + delay`. When the window
    /// was not pinned explicitly it is re-derived for the shifted envelope.
    pub fn build_with_delay(&self, delay: f64) -> Result<PulseSchedule, PulseError> {
        let mut cfg = *self;
        cfg.w2.center = cfg.w1.center + delay;
        cfg.build()
    }
}

impl From<&PulseSchedule> for ScheduleConfig {
    fn from(s: &PulseSchedule) -> Self {
        Self {
            w1: s.w1.into(),
            w2: s.w2.into(),
            beta: s.beta.into(),
            n: s.n,
            t_start: Some(s.t_start),
            t_end: Some(s.t_end),
        }
    }
}
