use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use holoqd::holonomy::predicted_ry;
use holoqd::model::{Configuration, ModelParams};
use holoqd::pulses::make_y_pulseset;
use holoqd::qcore::{basis, cr, embed_qubit, DensityMatrix, StateVector};
use holoqd::quadrature::QuadratureSpec;
use holoqd::scenarios::{
    dark_space_excursion, evolve_state, run_initialization, simulate_gate, sweep_beta, sweep_gamma_f, z_phase_overlap,
    Amplitudes, GateParams, GateVariant, Polarization, QubitProcess, Schedule, SphereSpec, Tolerances, LEAKAGE_WARNING,
};

fn wide_splitting() -> GateParams {
    GateParams {
        z_delay: 9.0,
        model: ModelParams {
            delta: 0.5,
            ..ModelParams::default()
        },
        ..GateParams::default()
    }
}

#[test]
fn pump_off_stirap_transfers_to_ancilla() {
    let mp = ModelParams::default().without_decoherence();
    let p = make_y_pulseset(0.0, 0.5, 0.5, 70.0, 100.0).unwrap();
    let sched = Schedule::single(Configuration::Y, p);
    let (psi, _) = evolve_state(&sched, &mp, &StateVector::basis(basis::ONE), &Tolerances::default()).unwrap();
    assert!(psi.populations()[basis::ANC] > 0.999);
}

#[test]
fn y_forward_pass_stays_dark() {
    let mp = ModelParams::default().without_decoherence();
    let sched = Schedule::single(Configuration::Y, make_y_pulseset(0.5, 0.5, 0.5, 150.0, 100.0).unwrap());
    for k in [basis::ZERO, basis::ONE] {
        let e = dark_space_excursion(&sched, &mp, &StateVector::basis(k), 1.0, &Tolerances::default()).unwrap();
        assert!(e < 1e-3, "input {k}: excursion {e}");
    }
}

#[test]
fn y_gates_follow_holonomy() {
    let p = GateParams::default();
    for v in [GateVariant::YSinglePass, GateVariant::YClosedLoop] {
        let (_, r) = simulate_gate(v, &p, false, &SphereSpec::default()).unwrap();
        assert!(r.holonomy_deviation < 1e-2, "{v:?}: {}", r.holonomy_deviation);
        assert!(r.warnings.is_empty());
    }
}

#[test]
fn closed_loop_reaches_quarter_turn_target() {
    let p = GateParams {
        y_delay: 2.0,
        ..GateParams::default()
    };
    let (process, r) = simulate_gate(GateVariant::YClosedLoop, &p, false, &SphereSpec::default()).unwrap();
    assert!((r.holonomy_angle - FRAC_PI_2).abs() < 5e-3);
    let dev = process.deviation(&QubitProcess::from_unitary(&predicted_ry(FRAC_PI_2)));
    assert!(dev < 1e-2, "deviation {dev}");
}

#[test]
fn fidelity_monotone_in_decoherence_for_y_gates() {
    let p = GateParams::default();
    for v in [GateVariant::YSinglePass, GateVariant::YClosedLoop] {
        let (_, clean) = simulate_gate(v, &p, false, &SphereSpec::default()).unwrap();
        let (_, noisy) = simulate_gate(v, &p, true, &SphereSpec::default()).unwrap();
        assert!(noisy.fidelity <= clean.fidelity + 1e-6, "{v:?}");
        assert!(noisy.fidelity <= 1.0 + 1e-9);
    }
}

#[test]
fn z_gate_at_default_splitting_is_flagged_and_refilled_by_decay() {
    let p = GateParams::default();
    let (_, clean) = simulate_gate(GateVariant::ZFractional, &p, false, &SphereSpec::default()).unwrap();
    let (_, noisy) = simulate_gate(GateVariant::ZFractional, &p, true, &SphereSpec::default()).unwrap();
    assert!(clean.leakage_final > LEAKAGE_WARNING);
    assert!(!clean.warnings.is_empty());
    // recombination returns leaked population to the qubit
    assert!(noisy.fidelity > clean.fidelity);
    assert!(noisy.leakage_final < clean.leakage_final);
}

#[test]
fn z_overlap_recovers_at_wide_splitting() {
    let base = wide_splitting();
    for phase in [0.0, FRAC_PI_4, FRAC_PI_2, PI] {
        let ov = z_phase_overlap(&GateParams { phase, ..base }).unwrap();
        assert!(ov >= 0.999, "phase {phase}: {ov}");
    }
}

#[test]
fn z_spectator_untouched() {
    let (_, r) = simulate_gate(
        GateVariant::ZFractional,
        &wide_splitting(),
        false,
        &SphereSpec::default(),
    )
    .unwrap();
    assert!(r.spectator_population.unwrap() >= 1.0 - 1e-6);
}

#[test]
fn uniform_stokes_phase_leaves_qubit_block_unchanged() {
    let tol = Tolerances::default();
    let plus = embed_qubit(cr(FRAC_1_SQRT_2), cr(FRAC_1_SQRT_2)).unwrap();
    let run = |phase: f64| {
        let p = GateParams {
            phase,
            ..wide_splitting()
        };
        let mp = p.model.without_decoherence();
        evolve_state(&p.z_protocol().unwrap(), &mp, &plus, &tol).unwrap().0
    };
    let (a, b) = (run(0.0), run(FRAC_PI_2));
    for k in [basis::ZERO, basis::ONE] {
        assert!((a.amplitude(k) - b.amplitude(k)).norm() < 1e-6);
    }
}

#[test]
fn initialization_holds_prepared_state() {
    let mp = ModelParams::default();
    let rho0 = DensityMatrix::diagonal([0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
    let run = run_initialization(Polarization::SigmaMinus, &rho0, mp.gamma, 8_000.0, 20.0, &mp).unwrap();
    let worst = run
        .trajectory
        .states
        .iter()
        .map(|r| r.population(basis::ONE))
        .fold(1.0, f64::min);
    assert!(worst >= 0.9995, "rho_11 dipped to {worst}");
}

#[test]
fn initialization_fidelity_rises_after_first_decay_time() {
    let mp = ModelParams::default();
    let mixed = DensityMatrix::diagonal([0.5, 0.5, 0.0, 0.0, 0.0]).unwrap();
    let settle = 1.0 / (2.0 * mp.gamma);
    for pol in [Polarization::SigmaMinus, Polarization::SigmaPlus] {
        let run = run_initialization(pol, &mixed, mp.gamma, 20_000.0, 20.0, &mp).unwrap();
        let late: Vec<f64> = run
            .trajectory
            .times
            .iter()
            .zip(&run.fidelity)
            .filter(|(t, _)| **t >= settle)
            .map(|(_, f)| *f)
            .collect();
        assert!(late.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{pol:?}");
    }
}

#[test]
fn undriven_populations_drift_only_by_spin_flips() {
    let mp = ModelParams::default();
    let rho0 = DensityMatrix::diagonal([0.3, 0.7, 0.0, 0.0, 0.0]).unwrap();
    let run = run_initialization(Polarization::SigmaMinus, &rho0, 0.0, 10_000.0, 500.0, &mp).unwrap();
    for r in &run.trajectory.states {
        assert!((r.population(basis::ZERO) - 0.3).abs() <= 1e-5);
        assert!((r.population(basis::ONE) - 0.7).abs() <= 1e-5);
    }
}

#[test]
fn sweeps_are_bit_reproducible() {
    let ratios: Vec<f64> = (0..=16).map(|k| k as f64 * 0.5).collect();
    let amps = Amplitudes::default();
    let quad = QuadratureSpec::default();
    let mp = ModelParams::default();
    assert_eq!(
        sweep_gamma_f(&ratios, &amps, 100.0, &mp, &quad).unwrap(),
        sweep_gamma_f(&ratios, &amps, 100.0, &mp, &quad).unwrap()
    );
    assert_eq!(
        sweep_beta(&ratios, &amps, 100.0, &quad).unwrap(),
        sweep_beta(&ratios, &amps, 100.0, &quad).unwrap()
    );
}
