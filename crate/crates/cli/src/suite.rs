//! Invariant suite behind the `validate` scenario.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use holoqd::darkspace::{
    connection_richardson, connection_y, connection_z, dark_pair_at, dark_states_y, dark_states_z, darkness_residual,
    darkness_threshold, phi_y_at, phi_z_at, theta_at,
};
use holoqd::holonomy::{beta_integral, gamma_f_integral};
use holoqd::model::{build_h, Configuration, ModelParams};
use holoqd::propagate::{overlap_deficit, POSITIVITY_FLOOR};
use holoqd::pulses::{make_y_pulseset, make_z_pulseset};
use holoqd::qcore::{basis, cr, embed_qubit, max_abs, StateVector};
use holoqd::scenarios::{
    evolve_state, evolve_state_oracle, qubit_density, run_readout, simulate_gate, sweep_beta, GateVariant,
};
use holoqd::Result;

use crate::{Check, RunConfig, MAX_TRACE_DRIFT};

const GRID: usize = 200;

fn grid(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    // cell midpoints avoid the window edges
    (0..n).map(move |k| a + (b - a) * (k as f64 + 0.5) / n as f64)
}

fn darkness(cfg: &RunConfig) -> Result<Check> {
    let mp = cfg.model();
    let a = cfg.amplitudes();
    let y = make_y_pulseset(a.pump, a.stokes, a.driving, cfg.y_delay * cfg.tau, cfg.tau)?;
    let z = make_z_pulseset(a.stokes, a.driving, cfg.z_delay * cfg.tau, cfg.tau, cfg.phase)?;
    let mut worst: f64 = 0.0;
    for (config, p) in [(Configuration::Y, &y), (Configuration::Z, &z)] {
        let (lo, hi) = p.window();
        for t in grid(lo, hi, GRID) {
            let h = build_h(config, t, p, &mp)?;
            let (r1, r2) = darkness_residual(&h, &dark_pair_at(config, t, p, &mp));
            worst = worst.max(r1.max(r2) / darkness_threshold(&h));
        }
    }
    Ok(Check::below(
        "dark-state nullity (residual / threshold)",
        worst,
        1.0 + f64::EPSILON,
    ))
}

fn connection(cfg: &RunConfig) -> Result<Check> {
    let mp = cfg.model();
    let a = cfg.amplitudes();
    let y = make_y_pulseset(a.pump, a.stokes, a.driving, cfg.y_delay * cfg.tau, cfg.tau)?;
    let z = make_z_pulseset(a.stokes, a.driving, cfg.z_delay * cfg.tau, cfg.tau, cfg.phase)?;
    let mut worst: f64 = 0.0;
    let (lo, hi) = y.window();
    for t in grid(lo, hi, 50) {
        let (theta, phi) = (theta_at(t, &y), phi_y_at(t, &y));
        let num = connection_richardson(|th| dark_states_y(th, phi), theta, 1e-3);
        worst = worst.max(max_abs(&(num - connection_y(phi))));
    }
    let (lo, hi) = z.window();
    for t in grid(lo, hi, 50) {
        let (theta, phi) = (theta_at(t, &z), phi_z_at(t, &z, mp.delta));
        let num = connection_richardson(|th| dark_states_z(th, phi, z.stokes_phase), theta, 1e-3);
        worst = worst.max(max_abs(&(num - connection_z(phi))));
    }
    Ok(Check::below("connection: analytic vs finite difference", worst, 1e-8))
}

fn holonomy_angles(cfg: &RunConfig, out: &mut Vec<Check>) -> Result<()> {
    let quad = cfg.quadrature();
    let amps = cfg.amplitudes();
    let ratios: Vec<f64> = (0..=24).map(|k| k as f64 * 0.25).collect();
    let table = sweep_beta(&ratios, &amps, cfg.tau, &quad)?;
    out.push(Check::below("beta(0)", table.rows[0].angle.abs(), 1e-12));
    let drop = table
        .rows
        .windows(2)
        .map(|w| w[0].angle - w[1].angle)
        .fold(0.0, f64::max);
    out.push(Check::below("beta non-decreasing (largest drop)", drop, 1e-9));
    let plateau = table
        .rows
        .iter()
        .filter(|r| r.tau0_over_tau >= 3.0)
        .map(|r| (r.angle - FRAC_PI_2).abs())
        .fold(0.0, f64::max);
    out.push(Check::below(
        "beta plateau |beta - pi/2| for delay >= 3 tau",
        plateau,
        1e-3,
    ));

    let mp = cfg.model();
    let z = make_z_pulseset(amps.stokes, amps.driving, cfg.z_delay * cfg.tau, cfg.tau, 0.0)?;
    let g = gamma_f_integral(&z, &mp, &quad)?;
    out.push(Check::below(
        "gamma_f relative gap to pi/4 at the z delay",
        (g.angle - FRAC_PI_4).abs() / FRAC_PI_4,
        0.01,
    ));

    let (mut db, mut dg): (f64, f64) = (0.0, 0.0);
    let y = make_y_pulseset(amps.pump, amps.stokes, amps.driving, cfg.y_delay * cfg.tau, cfg.tau)?;
    let b0 = beta_integral(&y, &quad)?.angle;
    for k in [0.25, 0.5, 2.0, 4.0] {
        db = db.max((beta_integral(&y.scaled(k), &quad)?.angle - b0).abs());
        let scaled = ModelParams {
            delta: k * mp.delta,
            ..mp
        };
        dg = dg.max((gamma_f_integral(&z.scaled(k), &scaled, &quad)?.signed_angle - g.signed_angle).abs());
    }
    out.push(Check::below("beta invariant under amplitude scaling", db, 1e-9));
    out.push(Check::below(
        "gamma_f invariant under joint amplitude/splitting scaling",
        dg,
        1e-9,
    ));
    Ok(())
}

fn oracle(cfg: &RunConfig) -> Result<Check> {
    let params = cfg.gate_params();
    let mp = params.model.without_decoherence();
    let tol = cfg.tolerances();
    let plus = embed_qubit(cr(FRAC_1_SQRT_2), cr(FRAC_1_SQRT_2))?;
    let mut worst: f64 = 0.0;
    for schedule in [params.y_closed_loop(params.y_delay)?, params.z_protocol()?] {
        for psi0 in [StateVector::basis(basis::ONE), plus] {
            let (adaptive, _) = evolve_state(&schedule, &mp, &psi0, &tol)?;
            let reference = evolve_state_oracle(&schedule, &mp, &psi0, params.tau / 2000.0)?;
            worst = worst.max(overlap_deficit(&adaptive, &reference));
        }
    }
    Ok(Check::below(
        "adaptive vs matrix-exponential oracle deficit",
        worst,
        1e-6,
    ))
}

fn gates(cfg: &RunConfig, out: &mut Vec<Check>) -> Result<()> {
    let params = cfg.gate_params();
    let sphere = cfg.sphere();
    for v in [
        GateVariant::YSinglePass,
        GateVariant::YClosedLoop,
        GateVariant::ZFractional,
        GateVariant::XComposite,
    ] {
        let (_, clean) = simulate_gate(v, &params, false, &sphere)?;
        let (_, noisy) = simulate_gate(v, &params, true, &sphere)?;
        let name = serde_json::to_value(v)
            .ok()
            .and_then(|x| x.as_str().map(str::to_string))
            .unwrap_or_default();
        out.push(Check::below(
            format!("{name}: holonomy vs dynamics deficit"),
            clean.holonomy_deviation,
            1e-2,
        ));
        out.push(Check::below(
            format!("{name}: decoherence does not raise fidelity"),
            noisy.fidelity - clean.fidelity,
            1e-6,
        ));
        for r in [&clean, &noisy] {
            out.push(Check::below(
                format!("{name}: trace drift (decoherence {})", r.with_decoherence),
                r.diagnostics.max_norm_drift,
                MAX_TRACE_DRIFT,
            ));
            out.push(Check::above(
                format!("{name}: min eigenvalue (decoherence {})", r.with_decoherence),
                r.diagnostics.min_eigenvalue,
                POSITIVITY_FLOOR,
            ));
        }
    }
    Ok(())
}

fn readout(cfg: &RunConfig, out: &mut Vec<Check>) -> Result<()> {
    let mp = cfg.model();
    let rabi = cfg.readout_rabi.unwrap_or(cfg.gamma);
    let one = run_readout(&qubit_density(0.0, 1.0, cr(0.0)), rabi, cfg.readout_duration, &mp)?;
    let zero = run_readout(&qubit_density(1.0, 0.0, cr(0.0)), rabi, cfg.readout_duration, &mp)?;
    let mix = run_readout(&qubit_density(0.5, 0.5, cr(0.0)), rabi, cfg.readout_duration, &mp)?;
    out.push(Check::below(
        "readout |1>: |photons - 2|",
        (one.expected_photons - 2.0).abs(),
        0.1,
    ));
    out.push(Check::below("readout |0>: photons", zero.expected_photons, 1e-3));
    out.push(Check::below(
        "readout mixture: |photons - 1|",
        (mix.expected_photons - 1.0).abs(),
        0.05,
    ));
    Ok(())
}

pub(crate) fn run(cfg: &RunConfig) -> Result<Vec<Check>> {
    let mut out = vec![darkness(cfg)?, connection(cfg)?];
    holonomy_angles(cfg, &mut out)?;
    out.push(oracle(cfg)?);
    gates(cfg, &mut out)?;
    readout(cfg, &mut out)?;
    Ok(out)
}
