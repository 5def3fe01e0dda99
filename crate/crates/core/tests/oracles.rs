//! Cross-checks between independent computation routes: adaptive quadrature
//! vs fixed-step Simpson, closed-form angle rates vs finite differences, and
//! the analytic passage solution vs exact integration.

mod common;

use cavity_passage::adiabatic::{
    self, adiabatic_solution, dynamical_phase, effective_coupling, mixing_angle_gamma,
    transform_matrix,
};
use cavity_passage::integrator::{
    integrate_in_adiabatic_frame, integrate_schrodinger, AmplitudeBlock,
};
use cavity_passage::model::{angle_rates, coupling_matrix, mixing_angles};
use cavity_passage::pulses::effective_pulse_area;
use common::{central_diff, protocol_stage, reference_schedule, simpson};
use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

#[test]
fn pulse_area_matches_simpson_oracle_at_half_step() {
    let s = reference_schedule();
    let adaptive = effective_pulse_area(&s).unwrap();
    let coarse = simpson(|t| s.omega(t), s.t_start, s.t_end, 20_000);
    let fine = simpson(|t| s.omega(t), s.t_start, s.t_end, 40_000);
    // the oracle has converged when halving its step changes nothing
    assert!((coarse - fine).abs() < 1e-8, "Simpson not converged");
    assert!(
        (adaptive - fine).abs() < 1e-6,
        "adaptive {adaptive} vs Simpson {fine}"
    );
    assert!(adaptive > 100.0);
}

#[test]
fn gamma_matches_simpson_oracle() {
    let s = reference_schedule();
    let g = mixing_angle_gamma(&s).unwrap();
    let integrand = |t: f64| angle_rates(&s, t).theta_dot * mixing_angles(&s, t).phi.sin();
    let oracle = simpson(integrand, s.t_start, s.t_end, 40_000);
    assert!((g - oracle).abs() < 1e-7, "gamma {g} vs Simpson {oracle}");
}

#[test]
fn theta_rate_matches_finite_difference_oracle() {
    let s = reference_schedule();
    for t in [-20.0, -10.0, -3.0, 0.0, 4.0, 9.0, 15.0, 22.0, 35.0] {
        let analytic = angle_rates(&s, t).theta_dot;
        let fd = central_diff(|x| mixing_angles(&s, x).theta, t, 1e-6);
        assert!(
            (analytic - fd).abs() <= 1e-6 * analytic.abs().max(1.0),
            "t = {t}: analytic {analytic} vs fd {fd}"
        );
    }
}

#[test]
fn effective_coupling_dark_element_matches_finite_difference_oracle() {
    // at pulse overlap, the dark-block magnitude equals |theta_dot sin(phi)|
    let s = reference_schedule();
    for t in [-5.0, 0.0, 5.0, 10.0, 15.0] {
        let ec = effective_coupling(&s, t);
        let got = ec.matrix[(0, 1)].norm();
        let fd =
            central_diff(|x| mixing_angles(&s, x).theta, t, 1e-6) * mixing_angles(&s, t).phi.sin();
        assert!(
            (got - fd.abs()).abs() < 1e-6,
            "t = {t}: dark element {got} vs fd oracle {}",
            fd.abs()
        );
    }
}

#[test]
fn exact_frame_coupling_dark_bright_blocks_are_rate_bounded() {
    // the full adiabatic-frame generator is UᵀWU + (dUᵀ/dt)U; its dark–bright
    // corners must be bounded by the worst angle rate
    let s = reference_schedule();
    let h = 1e-6;
    for t in [-10.0, 0.0, 8.0, 20.0, 30.0] {
        let u = transform_matrix(&mixing_angles(&s, t));
        let du = (transform_matrix(&mixing_angles(&s, t + h))
            - transform_matrix(&mixing_angles(&s, t - h)))
            / (2.0 * h);
        let w = coupling_matrix(&s, t).entries;
        let exact: Matrix4<f64> = u.transpose() * w * u + du.transpose() * u;
        let rates = angle_rates(&s, t);
        let bound = rates.theta_dot.abs().max(rates.phi_dot.abs()) + 1e-6;
        for dark in 0..2 {
            for bright in 2..4 {
                assert!(
                    exact[(dark, bright)].abs() <= bound,
                    "t = {t}: |W~[{dark},{bright}]| = {} > {bound}",
                    exact[(dark, bright)].abs()
                );
            }
        }
    }
}

#[test]
fn ode_populations_agree_with_gamma_quadrature() {
    let s = reference_schedule();
    let g = mixing_angle_gamma(&s).unwrap();
    assert!(g < 0.0, "reference ordering should give a negative angle");
    let tr = integrate_schrodinger(&s, &AmplitudeBlock::basis_state(0, 0), 1e-10).unwrap();
    let bf = tr.final_state();
    let gamma_pop = bf[3].norm().atan2(bf[0].norm());
    assert!(
        (g.abs() - gamma_pop).abs() <= 1e-2,
        "|gamma| = {} vs population angle {gamma_pop}",
        g.abs()
    );
    // the signed asymptotic state is the one the dynamics actually reaches
    let sol = adiabatic_solution(&s).unwrap();
    let overlap: Complex64 = sol
        .final_amplitudes
        .b
        .iter()
        .zip(bf.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    assert!(
        overlap.norm_sqr() >= 0.999,
        "fidelity {} to the analytic asymptotic state",
        overlap.norm_sqr()
    );
}

#[test]
fn adiabatic_frame_integration_reproduces_lab_frame() {
    let s = reference_schedule();
    let e1 = Vector4::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    );
    let frame = integrate_in_adiabatic_frame(&s, e1, 1e-10).unwrap();
    let lab = integrate_schrodinger(&s, &AmplitudeBlock::basis_state(0, 0), 1e-10).unwrap();

    // mapping the reduced solution back through U tracks the exact one
    let mut max_dev = 0.0f64;
    for (k, t) in frame.times.iter().enumerate() {
        let u = transform_matrix(&mixing_angles(&s, *t));
        let mut mapped = Vector4::zeros();
        for col in 0..4 {
            for row in 0..4 {
                mapped[row] += Complex64::new(u[(row, col)], 0.0) * frame.states[k][col];
            }
        }
        max_dev = max_dev.max((mapped - lab.states[k]).norm());
    }
    assert!(max_dev < 0.1, "max lab-frame deviation {max_dev}");

    let overlap: Complex64 = {
        let u = transform_matrix(&mixing_angles(&s, s.t_end));
        let mut mapped = Vector4::zeros();
        for col in 0..4 {
            for row in 0..4 {
                mapped[row] += Complex64::new(u[(row, col)], 0.0) * frame.final_state()[col];
            }
        }
        mapped
            .iter()
            .zip(lab.final_state().iter())
            .map(|(a, b): (&Complex64, &Complex64)| a.conj() * b)
            .sum()
    };
    assert!(
        overlap.norm_sqr() > 0.999,
        "final fidelity {}",
        overlap.norm_sqr()
    );
}

#[test]
fn reduced_dynamics_dark_rotation_matches_gamma() {
    let s = reference_schedule();
    let e1 = Vector4::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    );
    let frame = integrate_in_adiabatic_frame(&s, e1, 1e-11).unwrap();
    let cf = frame.final_state();
    let rotation = cf[1].re.atan2(cf[0].re);
    let g = mixing_angle_gamma(&s).unwrap();
    assert!(
        (rotation - g).abs() <= 1e-3,
        "dark rotation {rotation} vs gamma {g}"
    );
    // bright amplitudes never get populated in the reduced dynamics
    for b in &frame.states {
        assert!(b[2].norm_sqr() + b[3].norm_sqr() < 1e-20);
    }
}

#[test]
fn lab_frame_bright_leakage_is_small_for_reference_schedule() {
    // project the exact trajectory onto the instantaneous frame: bright
    // occupation stays at the non-adiabatic leakage level
    let s = reference_schedule();
    let lab = integrate_schrodinger(&s, &AmplitudeBlock::basis_state(0, 0), 1e-10).unwrap();
    let mut max_bright = 0.0f64;
    for (k, t) in lab.times.iter().enumerate() {
        let u = transform_matrix(&mixing_angles(&s, *t));
        let mut bright = 0.0;
        for col in 2..4 {
            let mut amp = Complex64::new(0.0, 0.0);
            for row in 0..4 {
                amp += Complex64::new(u[(row, col)], 0.0) * lab.states[k][row];
            }
            bright += amp.norm_sqr();
        }
        max_bright = max_bright.max(bright);
    }
    assert!(
        max_bright <= 1e-2,
        "bright occupation peaked at {max_bright}"
    );
}

#[test]
fn dynamical_phase_interior_point_matches_simpson() {
    let s = reference_schedule();
    for t in [-50.0, 0.0, 30.0, 100.0] {
        let v = dynamical_phase(&s, t).unwrap();
        let oracle = simpson(|x| s.omega(x), s.t_start, t, 40_000);
        assert!((v - oracle).abs() < 1e-6, "t = {t}: {v} vs {oracle}");
    }
}

#[test]
fn equal_laser_stage_splits_the_dark_pair_evenly() {
    // the cavity-first equal-laser stage rotates the dark pair by exactly an
    // eighth turn in the adiabatic limit
    let s1 = protocol_stage(false);
    let g1 = mixing_angle_gamma(&s1).unwrap();
    assert!(
        (g1 - std::f64::consts::FRAC_PI_4).abs() < 1e-6,
        "stage rotation {g1}"
    );
    // and the reversed stage undoes that rotation
    let s2 = protocol_stage(true);
    let g2 = mixing_angle_gamma(&s2).unwrap();
    assert!(
        (g2 + std::f64::consts::FRAC_PI_4).abs() < 1e-6,
        "reverse rotation {g2}"
    );
}

#[test]
fn reversed_stage_maps_one_photon_state_to_symmetric_ground_pair() {
    // exact propagation of |4, 1⟩ through the reversed stage: the population
    // returns to the 1/3 ground pair with equal weights and the photon leaves
    let s2 = protocol_stage(true);
    let tr = integrate_schrodinger(&s2, &AmplitudeBlock::basis_state(3, 0), 1e-10).unwrap();
    let bf = tr.final_state();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    assert!((bf[0].norm() - r).abs() < 1e-2, "|b1| = {}", bf[0].norm());
    assert!((bf[2].norm() - r).abs() < 1e-2, "|b3| = {}", bf[2].norm());
    assert!(
        bf[3].norm_sqr() < 1e-4,
        "photon branch kept {}",
        bf[3].norm_sqr()
    );
    // both ground amplitudes come out with the same sign
    let rel = (bf[0] * bf[2].conj()).re;
    assert!(rel > 0.4, "relative sign/phase broke: {rel}");
}

#[test]
fn adiabaticity_warning_threshold_matches_report() {
    let s = reference_schedule();
    let report = cavity_passage::integrator::adiabaticity_report(&s).unwrap();
    assert!(!report.flagged);
    assert!(report.s_prime > 900.0 && report.s_prime < 1000.0);
    assert!(report.max_theta_rate_ratio < 0.06);
    assert!(report.max_phi_rate_ratio < 0.1);
    // pointwise warnings agree with the scan where the scan found no flag
    for t in [-10.0, 0.0, 10.0, 25.0] {
        assert!(adiabatic::effective_coupling(&s, t).warning.is_none());
    }
}
