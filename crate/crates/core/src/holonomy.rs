//! Geometric-phase integrals, path-ordered exponentials and the gates they
//! predict.
//!
//! Dark-space coefficients in the `(d1, d2)` basis evolve as `exp(-int A)`.
//! Since the dark pair starts as `(|1>, |0>)`, the physical qubit gate is the
//! reordered adjoint of the path-ordered exponential; for the y-connection this
//! is exactly [`predicted_ry`].

use std::f64::consts::FRAC_PI_4;

use serde::Serialize;

use crate::darkspace::{phi_y_at, phi_z_at, theta_rate};
use crate::error::{invalid, Result};
use crate::model::ModelParams;
use crate::pulses::PulseSet;
use crate::qcore::{basis, cr, expm, pauli_x, Op2, QubitGate, StateVector, C64};
use crate::quadrature::{integrate, QuadratureSpec};

/// Accepted results never carry a larger error estimate than this.
pub const MAX_QUADRATURE_ERROR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolonomyResult {
    /// Reported angle: `beta` itself, or `|gamma_f|`.
    pub angle: f64,
    /// Integral value before taking any magnitude.
    pub signed_angle: f64,
    #[serde(skip)]
    pub predicted_gate: QubitGate,
    pub grid_points: usize,
    pub estimated_quadrature_error: f64,
}

fn breakpoints(p: &PulseSet) -> Vec<f64> {
    let (lo, hi) = p.window();
    let mut pts = vec![lo, hi];
    for env in [&p.pump, &p.stokes, &p.driving] {
        pts.extend(env.terms().iter().map(|g| g.center));
    }
    pts
}

fn accept(r: crate::quadrature::QuadResult, angle: f64, gate: QubitGate) -> Result<HolonomyResult> {
    if r.error_estimate >= MAX_QUADRATURE_ERROR {
        return Err(crate::Error::Quadrature {
            estimate: r.error_estimate,
            tolerance: MAX_QUADRATURE_ERROR,
        });
    }
    Ok(HolonomyResult {
        angle,
        signed_angle: r.value,
        predicted_gate: gate,
        grid_points: r.evaluations,
        estimated_quadrature_error: r.error_estimate,
    })
}

/// `beta = int sin(phi_y) dtheta` over the truncation window.
pub fn beta_integral(p: &PulseSet, quad: &QuadratureSpec) -> Result<HolonomyResult> {
    if p.pump.is_zero() && p.stokes.is_zero() && p.driving.is_zero() {
        return Err(invalid("pulses", "all envelopes are zero"));
    }
    let r = integrate(|t| phi_y_at(t, p).sin() * theta_rate(t, p), &breakpoints(p), quad)?;
    accept(r, r.value, predicted_ry(r.value))
}

/// `gamma_f = -int sin(phi_z) dtheta`; the reported angle is its magnitude.
pub fn gamma_f_integral(p: &PulseSet, mp: &ModelParams, quad: &QuadratureSpec) -> Result<HolonomyResult> {
    if !p.pump.is_zero() {
        return Err(invalid("pump", "z-protocol requires the pump to be off"));
    }
    mp.validate()?;
    let r = integrate(
        |t| -phi_z_at(t, p, mp.delta).sin() * theta_rate(t, p),
        &breakpoints(p),
        quad,
    )?;
    accept(r, r.value.abs(), predicted_rz(p.stokes_phase))
}

/// The gamma_f integrand written directly in the fields:
/// `(D/2)/(S^2+W^2) * (W S' - S W') / sqrt(2 (S^2+W^2) + (D/2)^2)` with
/// `S` the driving and `W` the Stokes envelope.
pub fn gamma_f_integrand_fields(t: f64, p: &PulseSet, mp: &ModelParams) -> f64 {
    let (s, w) = (p.driving.value(t), p.stokes.value(t));
    let (ds, dw) = (p.driving.derivative(t), p.stokes.derivative(t));
    let r2 = s * s + w * w;
    if r2 == 0.0 {
        return 0.0;
    }
    let half = 0.5 * mp.delta;
    half / r2 * (w * ds - s * dw) / (2.0 * r2 + half * half).sqrt()
}

/// Path-ordered product of `exp(A_k s_k)`, later segments acting on the left.
pub fn path_ordered_exponential(samples: &[(Op2, f64)]) -> Result<QubitGate> {
    let mut u = Op2::identity();
    for (a, step) in samples {
        u = expm(a, *step)? * u;
    }
    Ok(QubitGate::from_matrix_unchecked(u))
}

/// Reversed order with negated steps.
pub fn reverse_path(samples: &[(Op2, f64)]) -> Vec<(Op2, f64)> {
    samples.iter().rev().map(|(a, s)| (*a, -s)).collect()
}

/// Midpoint samples of the y-connection per unit theta, `n` uniform time
/// panels across the window; steps are the theta increments.
pub fn connection_samples_y(p: &PulseSet, n: usize) -> Vec<(Op2, f64)> {
    let (lo, hi) = p.window();
    let h = (hi - lo) / n as f64;
    let theta = |t: f64| crate::darkspace::theta_at(t, p);
    (0..n)
        .map(|k| {
            let a = lo + h * k as f64;
            let b = a + h;
            let phi = phi_y_at(0.5 * (a + b), p);
            (crate::darkspace::connection_y(phi), theta(b) - theta(a))
        })
        .collect()
}

/// Physical qubit gate in `(|0>, |1>)` from a dark-basis holonomy `P exp(int A)`.
pub fn dark_holonomy_to_qubit(u: &QubitGate) -> QubitGate {
    let x = pauli_x();
    QubitGate::from_matrix_unchecked(x * u.matrix().adjoint() * x)
}

/// `[[cos b, -sin b], [sin b, cos b]]`
pub fn predicted_ry(beta: f64) -> QubitGate {
    let (s, co) = beta.sin_cos();
    QubitGate::from_matrix_unchecked(Op2::new(cr(co), cr(-s), cr(s), cr(co)))
}

/// `diag(1, e^{i phase})`
pub fn predicted_rz(phase: f64) -> QubitGate {
    QubitGate::from_matrix_unchecked(Op2::new(cr(1.0), cr(0.0), cr(0.0), C64::from_polar(1.0, phase)))
}

/// Final state from `|1>` after the fractional protocol.
pub fn predicted_final_state_z(gamma_f: f64, phase: f64) -> StateVector {
    let (s, co) = gamma_f.sin_cos();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = [cr(0.0); 5];
    amps[basis::ONE] = C64::from_polar(h * (s + co), phase);
    amps[basis::ANC] = cr(h * (s - co));
    StateVector::from_amplitudes(amps)
}

/// Quarter-turn y rotation used by [`compose_rx`]: maps the z axis of the Bloch
/// sphere onto the x axis.
pub fn quarter_turn_y() -> QubitGate {
    predicted_ry(FRAC_PI_4)
}

/// `R_y^dagger R_z(phi) R_y` with quarter-turn y legs.
pub fn compose_rx(phi: f64) -> QubitGate {
    let ry = quarter_turn_y();
    ry.adjoint().then_after(&predicted_rz(phi)).then_after(&ry)
}
