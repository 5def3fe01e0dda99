//! Shared fixtures and independent oracles for the integration suites.
//!
//! Everything here is deliberately written on a different numerical route
//! than the library internals: fixed-step Simpson quadrature instead of
//! adaptive Gauss–Kronrod, central finite differences instead of closed-form
//! derivatives.

#![allow(dead_code)]

use cavity_passage::pulses::{PulseEnvelope, PulseSchedule};

/// Reference passage: A₁ = A₂ = 20, A_β = 4, T₁ = 10, T₂ = T_β = 20,
/// laser delay 20, vacuum manifold.
pub fn reference_schedule() -> PulseSchedule {
    reference_schedule_with_delay(20.0)
}

/// Reference passage with laser 2 recentered to `delay`.
pub fn reference_schedule_with_delay(delay: f64) -> PulseSchedule {
    PulseSchedule::with_default_window(
        PulseEnvelope::new(20.0, 0.0, 10.0).unwrap(),
        PulseEnvelope::new(20.0, delay, 20.0).unwrap(),
        PulseEnvelope::new(4.0, 0.0, 20.0).unwrap(),
        0,
    )
    .unwrap()
}

/// Equal-laser protocol stage with strongly adiabatic parameters; the cavity
/// pulse leads when `reverse` is false and trails when it is true.
pub fn protocol_stage(reverse: bool) -> PulseSchedule {
    let (c_laser, c_cavity) = if reverse {
        (-15.0, 15.0)
    } else {
        (15.0, -15.0)
    };
    PulseSchedule::with_default_window(
        PulseEnvelope::new(30.0, c_laser, 25.0).unwrap(),
        PulseEnvelope::new(30.0, c_laser, 25.0).unwrap(),
        PulseEnvelope::new(30.0, c_cavity, 25.0).unwrap(),
        0,
    )
    .unwrap()
}

/// Fixed-step composite Simpson rule (independent quadrature oracle).
/// `n` must be even.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * k as f64);
    }
    acc * h / 3.0
}

/// Central finite difference (independent derivative oracle).
pub fn central_diff<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> f64 {
    (f(t + h) - f(t - h)) / (2.0 * h)
}
