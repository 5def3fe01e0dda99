//! Analytic adiabatic solution: dark/bright eigenbasis, the diagonalizing
//! transform, the effective dark-state dynamics, and asymptotic states.
//!
//! The drive matrix has two degenerate null eigenvectors (dark states, no
//! excited-state component) and a ±Ω bright pair. In the adiabatic frame the
//! only surviving coupling is between the two dark states, with strength
//! ϑ̇ sin φ; its time integral γ is the net dark-state rotation angle, and the
//! bright pair just accumulates the dynamical phase S = ∫ Ω dτ.
//!
//! Sign convention: with both mixing angles on the [0, π/2] branch, the
//! counterintuitive ordering (cavity bracketing laser 1, laser 2 off last)
//! drives ϑ up and back down while sin φ grows, so γ comes out negative; the
//! populations pick up only |γ| through (cos²γ, sin²γ). [`mixing_angle_gamma`]
//! returns the signed angle, which is what the asymptotic state needs.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::integrator::AmplitudeBlock;
use crate::model::{angle_rates, mixing_angles, MixingAngles};
use crate::pulses::PulseSchedule;
use crate::quad::{self, QuadError};

/// Absolute tolerance for the γ and S quadratures.
pub const PHASE_QUAD_TOL: f64 = 1e-9;
/// Pointwise non-adiabaticity ratio above which a warning is attached.
pub const ADIABATICITY_WARN_THRESHOLD: f64 = 0.1;

/// The four instantaneous eigenvectors, columns ordered (dark₁, dark₂,
/// bright₊, bright₋), each unit-norm.
pub fn adiabatic_basis(a: &MixingAngles) -> [Vector4<f64>; 4] {
    let (st, ct) = a.theta.sin_cos();
    let (sp, cp) = a.phi.sin_cos();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [
        Vector4::new(ct, 0.0, 0.0, -st),
        Vector4::new(sp * st, 0.0, -cp, sp * ct),
        Vector4::new(r * cp * st, r, r * sp, r * cp * ct),
        Vector4::new(r * cp * st, -r, r * sp, r * cp * ct),
    ]
}

/// Real orthogonal transform whose columns are the adiabatic basis vectors;
/// `Uᵀ W U = diag(0, 0, Ω, −Ω)`.
pub fn transform_matrix(a: &MixingAngles) -> Matrix4<f64> {
    let b = adiabatic_basis(a);
    Matrix4::from_columns(&b)
}

/// Snapshot of the adiabatic frame at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticFrame {
    pub angles: MixingAngles,
    pub u: Matrix4<f64>,
    pub eigenvalues: [f64; 4],
}

/// Adiabatic frame of schedule `s` at time `t`.
pub fn adiabatic_frame(s: &PulseSchedule, t: f64) -> AdiabaticFrame {
    let angles = mixing_angles(s, t);
    AdiabaticFrame {
        u: transform_matrix(&angles),
        eigenvalues: [0.0, 0.0, angles.omega, -angles.omega],
        angles,
    }
}

/// Attached when the pointwise non-adiabaticity ratio exceeds the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticityWarning {
    pub t: f64,
    pub ratio: f64,
    pub threshold: f64,
}

/// Drive matrix in the adiabatic frame, keeping only the dark–dark coupling:
/// off-diagonal ∓i ϑ̇ sin φ in the dark block, ±Ω on the bright diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveCoupling {
    pub matrix: Matrix4<Complex64>,
    pub warning: Option<AdiabaticityWarning>,
}

/// Effective adiabatic-frame coupling of schedule `s` at time `t`, with ϑ̇
/// from closed-form envelope derivatives.
pub fn effective_coupling(s: &PulseSchedule, t: f64) -> EffectiveCoupling {
    let a = mixing_angles(s, t);
    let rates = angle_rates(s, t);
    let g = rates.theta_dot * a.phi.sin();
    let mut m = Matrix4::zeros();
    m[(0, 1)] = Complex64::new(0.0, -g);
    m[(1, 0)] = Complex64::new(0.0, g);
    m[(2, 2)] = Complex64::new(a.omega, 0.0);
    m[(3, 3)] = Complex64::new(-a.omega, 0.0);
    let rate = rates.theta_dot.abs().max(rates.phi_dot.abs());
    let ratio = if rate == 0.0 { 0.0 } else { rate / a.omega };
    let warning = (ratio > ADIABATICITY_WARN_THRESHOLD).then_some(AdiabaticityWarning {
        t,
        ratio,
        threshold: ADIABATICITY_WARN_THRESHOLD,
    });
    EffectiveCoupling { matrix: m, warning }
}

/// Dark-state rotation angle accumulated over `[a, b]`: `∫ ϑ̇ sin φ dt`.
pub fn rotation_angle_over(s: &PulseSchedule, a: f64, b: f64) -> Result<f64, QuadError> {
    quad::integrate(
        |t| angle_rates(s, t).theta_dot * mixing_angles(s, t).phi.sin(),
        a,
        b,
        PHASE_QUAD_TOL,
    )
}

/// Net dark-state rotation angle γ over the schedule window, reported in
/// [−π, π]. The final superposition weights are (cos γ, sin γ).
pub fn mixing_angle_gamma(s: &PulseSchedule) -> Result<f64, QuadError> {
    let g = rotation_angle_over(s, s.t_start, s.t_end)?;
    Ok(wrap_angle(g))
}

fn wrap_angle(g: f64) -> f64 {
    use std::f64::consts::PI;
    if (-PI..=PI).contains(&g) {
        g
    } else {
        (g + PI).rem_euclid(2.0 * PI) - PI
    }
}

/// Dynamical phase `S(t) = ∫ Ω dτ` accumulated from the window start to `t`.
pub fn dynamical_phase(s: &PulseSchedule, t: f64) -> Result<f64, QuadError> {
    quad::integrate(|tau| s.omega(tau), s.t_start, t, PHASE_QUAD_TOL)
}

/// Adiabatic-frame evolution operator: a rotation by `gamma` in the dark
/// block and `diag(e^{−iS}, e^{+iS})` in the bright block.
pub fn evolution_operator(gamma: f64, s_phase: f64) -> Matrix4<Complex64> {
    let (sg, cg) = gamma.sin_cos();
    let mut m = Matrix4::zeros();
    m[(0, 0)] = Complex64::new(cg, 0.0);
    m[(0, 1)] = Complex64::new(-sg, 0.0);
    m[(1, 0)] = Complex64::new(sg, 0.0);
    m[(1, 1)] = Complex64::new(cg, 0.0);
    m[(2, 2)] = Complex64::from_polar(1.0, -s_phase);
    m[(3, 3)] = Complex64::from_polar(1.0, s_phase);
    m
}

/// Final lab-frame amplitudes `(cos γ, 0, 0, sin γ)` reached from state 1
/// under the counterintuitive ordering; for an initially empty cavity this is
/// the vacuum/one-photon superposition with weights (cos²γ, sin²γ).
pub fn asymptotic_state(gamma: f64) -> AmplitudeBlock {
    let (sg, cg) = gamma.sin_cos();
    AmplitudeBlock::new(
        Vector4::new(
            Complex64::new(cg, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(sg, 0.0),
        ),
        0,
    )
}

/// Closed-form solution of one passage: rotation angle, accumulated dynamical
/// phase, and the asymptotic amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticSolution {
    pub gamma: f64,
    pub dynamical_phase: f64,
    pub final_amplitudes: AmplitudeBlock,
}

/// Solves the passage analytically for schedule `s`.
pub fn adiabatic_solution(s: &PulseSchedule) -> Result<AdiabaticSolution, QuadError> {
    let gamma = mixing_angle_gamma(s)?;
    let phase = dynamical_phase(s, s.t_end)?;
    let mut final_amplitudes = asymptotic_state(gamma);
    final_amplitudes.n = s.n;
    Ok(AdiabaticSolution {
        gamma,
        dynamical_phase: phase,
        final_amplitudes,
    })
}
