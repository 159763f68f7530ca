//! Mixing angles, degenerate dark states and their gauge connection.
//!
//! Protocol-time angles are evaluated in the log domain so that they stay
//! well defined far in the Gaussian tails, where the raw envelopes underflow.

use std::f64::consts::FRAC_PI_2;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Configuration, ModelParams};
use crate::pulses::PulseSet;
use crate::qcore::{basis, c, cr, max_abs, Ket5, Op2, Op5, StateVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingAngles {
    pub theta: f64,
    pub phi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DarkPair {
    pub d1: StateVector,
    pub d2: StateVector,
}

impl DarkPair {
    /// Max deviation of the Gram matrix from the identity.
    pub fn orthonormality_deviation(&self) -> f64 {
        let g = [
            self.d1.inner(&self.d1) - 1.0,
            self.d1.inner(&self.d2),
            self.d2.inner(&self.d2) - 1.0,
        ];
        g.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Population of `psi` inside span{d1, d2}.
    pub fn captured_population(&self, psi: &StateVector) -> f64 {
        self.d1.overlap(psi) + self.d2.overlap(psi)
    }

    pub fn projector(&self) -> Op5 {
        let (a, b) = (self.d1.ket(), self.d2.ket());
        a * a.adjoint() + b * b.adjoint()
    }
}

/// `atan(exp(l))`, accurate for large `|l|`.
fn atan_exp(l: f64) -> f64 {
    if l > 0.0 {
        FRAC_PI_2 - (-l).exp().atan()
    } else {
        l.exp().atan()
    }
}

/// `atan2(omega_s, omega_d)`; undefined when both vanish.
pub fn mixing_theta(omega_s: f64, omega_d: f64) -> Result<f64> {
    if omega_s == 0.0 && omega_d == 0.0 {
        return Err(Error::VanishingFields);
    }
    Ok(omega_s.atan2(omega_d))
}

/// As [`mixing_theta`] but falls back to the protocol's limit angle.
pub fn mixing_theta_or(omega_s: f64, omega_d: f64, limit: f64) -> f64 {
    mixing_theta(omega_s, omega_d).unwrap_or(limit)
}

/// `tan(phi) = omega_p / sqrt(omega_s^2 + omega_d^2)`
pub fn mixing_phi_y(omega_p: f64, omega_s: f64, omega_d: f64) -> Result<f64> {
    if omega_p == 0.0 && omega_s == 0.0 && omega_d == 0.0 {
        return Err(Error::VanishingFields);
    }
    Ok(omega_p.atan2(omega_s.hypot(omega_d)))
}

/// `tan(phi) = (delta/2) / sqrt(2 (omega_s^2 + omega_d^2))`; pi/2 when the
/// fields vanish.
pub fn mixing_phi_z(delta: f64, omega_s: f64, omega_d: f64) -> f64 {
    (0.5 * delta).atan2((2.0 * (omega_s * omega_s + omega_d * omega_d)).sqrt())
}

pub fn dark_states_y(theta: f64, phi: f64) -> DarkPair {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let z = cr(0.0);
    DarkPair {
        d1: StateVector::from_amplitudes([z, cr(ct), cr(-st), z, z]),
        d2: StateVector::from_amplitudes([cr(cp), cr(-sp * st), cr(-sp * ct), z, z]),
    }
}

/// `phi` is the z mixing angle, `stokes_phase` the relative field phase.
pub fn dark_states_z(theta: f64, phi: f64, stokes_phase: f64) -> DarkPair {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let e = c(0.0, stokes_phase).exp();
    let z = cr(0.0);
    let r = std::f64::consts::FRAC_1_SQRT_2 * cp;
    DarkPair {
        d1: StateVector::from_amplitudes([z, e * ct, cr(-st), z, z]),
        d2: StateVector::from_amplitudes([z, e * (sp * st), cr(sp * ct), cr(r), cr(-r)]),
    }
}

/// Analytic connection per unit theta in the (d1, d2) basis: `-i sin(phi) sigma_y`.
pub fn connection_y(phi: f64) -> Op2 {
    let s = phi.sin();
    Op2::new(cr(0.0), cr(-s), cr(s), cr(0.0))
}

/// Analytic connection per unit theta for the z configuration: `+i sin(phi) sigma_y`.
/// The Stokes phase drops out.
pub fn connection_z(phi: f64) -> Op2 {
    -connection_y(phi)
}

/// Central-difference connection `A^{ab} = <a(theta)| d/dtheta |b(theta)>`,
/// anti-Hermitian part.
pub fn connection_numeric<F>(basis_at: F, theta: f64, h: f64) -> Op2
where
    F: Fn(f64) -> DarkPair,
{
    let here = basis_at(theta);
    let plus = basis_at(theta + h);
    let minus = basis_at(theta - h);
    let bra = [here.d1, here.d2];
    let dk = [
        (plus.d1.ket() - minus.d1.ket()) / cr(2.0 * h),
        (plus.d2.ket() - minus.d2.ket()) / cr(2.0 * h),
    ];
    let mut a = Op2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            a[(i, j)] = bra[i].ket().dotc(&dk[j]);
        }
    }
    (a - a.adjoint()) * cr(0.5)
}

/// One Richardson step on [`connection_numeric`], O(h^4).
pub fn connection_richardson<F>(basis_at: F, theta: f64, h: f64) -> Op2
where
    F: Fn(f64) -> DarkPair,
{
    let coarse = connection_numeric(&basis_at, theta, h);
    let fine = connection_numeric(&basis_at, theta, 0.5 * h);
    (fine * cr(4.0) - coarse) / cr(3.0)
}

/// `(|H d1|, |H d2|)`
pub fn darkness_residual(h: &Op5, pair: &DarkPair) -> (f64, f64) {
    ((h * pair.d1.ket()).norm(), (h * pair.d2.ket()).norm())
}

/// Acceptance threshold for [`darkness_residual`].
pub fn darkness_threshold(h: &Op5) -> f64 {
    1e-10 * (1.0 + max_abs(h))
}

fn ln_hypot(la: f64, lb: f64) -> f64 {
    // ln sqrt(e^{2 la} + e^{2 lb})
    let m = la.max(lb);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + 0.5 * ((2.0 * (la - m)).exp() + (2.0 * (lb - m)).exp()).ln()
}

/// Limit of theta when both Stokes and driving vanish identically.
fn theta_limit(p: &PulseSet) -> f64 {
    match (p.stokes.is_zero(), p.driving.is_zero()) {
        (false, true) => FRAC_PI_2,
        _ => 0.0,
    }
}

/// theta at time `t` from the Stokes/driving log ratio.
pub fn theta_at(t: f64, p: &PulseSet) -> f64 {
    let (ls, ld) = (p.stokes.ln_value(t), p.driving.ln_value(t));
    if ls == f64::NEG_INFINITY && ld == f64::NEG_INFINITY {
        return theta_limit(p);
    }
    atan_exp(ls - ld)
}

/// `d theta / dt`, from the analytic log-derivatives of the envelopes.
pub fn theta_rate(t: f64, p: &PulseSet) -> f64 {
    let (ls, ld) = (p.stokes.ln_value(t), p.driving.ln_value(t));
    if ls == f64::NEG_INFINITY || ld == f64::NEG_INFINITY {
        return 0.0;
    }
    // sin(theta) cos(theta) = 1 / (2 cosh(ls - ld))
    let l = ls - ld;
    let sc = if l.abs() > 700.0 { 0.0 } else { 0.5 / l.cosh() };
    sc * (p.stokes.dln_dt(t) - p.driving.dln_dt(t))
}

/// y-configuration phi at time `t`.
pub fn phi_y_at(t: f64, p: &PulseSet) -> f64 {
    let lp = p.pump.ln_value(t);
    if lp == f64::NEG_INFINITY {
        return 0.0;
    }
    let lsd = ln_hypot(p.stokes.ln_value(t), p.driving.ln_value(t));
    atan_exp(lp - lsd)
}

/// z-configuration phi at time `t`.
pub fn phi_z_at(t: f64, p: &PulseSet, delta: f64) -> f64 {
    let lsd = ln_hypot(p.stokes.ln_value(t), p.driving.ln_value(t));
    if lsd == f64::NEG_INFINITY {
        return FRAC_PI_2;
    }
    atan_exp((0.5 * delta).ln() - 0.5 * std::f64::consts::LN_2 - lsd)
}

/// Weighted log-derivative of `sqrt(sum of squares)` of the given envelopes.
fn dln_rms(t: f64, envs: &[&crate::pulses::Envelope]) -> f64 {
    let logs: Vec<f64> = envs.iter().map(|e| e.ln_value(t)).collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (e, l) in envs.iter().zip(&logs) {
        let w = (2.0 * (l - m)).exp();
        num += w * e.dln_dt(t);
        den += w;
    }
    num / den
}

/// `d phi / dt` for either configuration.
pub fn phi_rate(config: Configuration, t: f64, p: &PulseSet, mp: &ModelParams) -> f64 {
    match config {
        Configuration::Y => {
            let phi = phi_y_at(t, p);
            if p.pump.is_zero() {
                return 0.0;
            }
            let rate = p.pump.dln_dt(t) - dln_rms(t, &[&p.stokes, &p.driving]);
            phi.sin() * phi.cos() * rate
        }
        Configuration::Z => {
            let phi = phi_z_at(t, p, mp.delta);
            -phi.sin() * phi.cos() * dln_rms(t, &[&p.stokes, &p.driving])
        }
    }
}

pub fn angles_at(config: Configuration, t: f64, p: &PulseSet, mp: &ModelParams) -> MixingAngles {
    let theta = theta_at(t, p);
    let phi = match config {
        Configuration::Y => phi_y_at(t, p),
        Configuration::Z => phi_z_at(t, p, mp.delta),
    };
    MixingAngles { theta, phi }
}

pub fn dark_pair_at(config: Configuration, t: f64, p: &PulseSet, mp: &ModelParams) -> DarkPair {
    let a = angles_at(config, t, p, mp);
    match config {
        Configuration::Y => dark_states_y(a.theta, a.phi),
        Configuration::Z => dark_states_z(a.theta, a.phi, p.stokes_phase),
    }
}

/// `2 sqrt(2 (omega_s^2 + omega_d^2) + (delta/2)^2)`
pub fn bright_splitting_z(delta: f64, omega_s: f64, omega_d: f64) -> f64 {
    2.0 * (2.0 * (omega_s * omega_s + omega_d * omega_d) + 0.25 * delta * delta).sqrt()
}

/// Eigenvalues of `h` on the bright subspace: the orthogonal complement of the
/// dark pair and, in the z-configuration, of the decoupled spectator `|0>`.
pub fn bright_eigenvalues(config: Configuration, h: &Op5, pair: &DarkPair) -> Vec<f64> {
    let mut spanned: Vec<Ket5> = vec![*pair.d1.ket(), *pair.d2.ket()];
    if config == Configuration::Z {
        spanned.push(*StateVector::basis(basis::ZERO).ket());
    }
    let fixed = spanned.len();
    for i in 0..5 {
        let mut v = *StateVector::basis(i).ket();
        for u in &spanned {
            let proj = u.dotc(&v);
            v -= u * proj;
        }
        let n = v.norm();
        if n > 1e-6 {
            spanned.push(v / cr(n));
        }
    }
    let bright = &spanned[fixed..];
    let k = bright.len();
    let m = nalgebra::DMatrix::<C64>::from_fn(k, k, |i, j| bright[i].dotc(&(h * bright[j])));
    let m = (&m + m.adjoint()) * cr(0.5);
    let mut out: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Non-adiabatic leakage rates out of the dark space: `|theta' cos(phi)|` for
/// d1 and `|phi'|` for d2 (same structure in both configurations).
pub fn dark_bright_coupling(config: Configuration, t: f64, p: &PulseSet, mp: &ModelParams) -> f64 {
    let a = angles_at(config, t, p, mp);
    let from_d1 = (theta_rate(t, p) * a.phi.cos()).abs();
    let from_d2 = phi_rate(config, t, p, mp).abs();
    from_d1.max(from_d2)
}

/// Dark/bright coupling over the bright splitting, taken as twice the smallest
/// bright eigenvalue magnitude (equal to [`bright_splitting_z`] at the midpoint).
pub fn adiabaticity_ratio(config: Configuration, t: f64, h: &Op5, p: &PulseSet, mp: &ModelParams) -> f64 {
    let pair = dark_pair_at(config, t, p, mp);
    let gap = bright_eigenvalues(config, h, &pair)
        .iter()
        .fold(f64::INFINITY, |acc, e| acc.min(e.abs()));
    dark_bright_coupling(config, t, p, mp) / (2.0 * gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_h_y, build_h_z, build_h_z_detuned};
    use crate::pulses::{make_y_pulseset, make_z_pulseset};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn theta_examples() {
        assert!((mixing_theta(0.3, 0.3).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(mixing_theta(0.0, 0.5).unwrap(), 0.0);
        assert!((mixing_theta(0.5, 0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(mixing_theta(0.0, 0.0), Err(Error::VanishingFields));
        assert_eq!(mixing_theta_or(0.0, 0.0, FRAC_PI_2), FRAC_PI_2);
    }

    #[test]
    fn phi_y_examples() {
        assert_eq!(mixing_phi_y(0.0, 0.2, 0.3).unwrap(), 0.0);
        assert!((mixing_phi_y(0.5, 0.3, 0.4).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!((mixing_phi_y(0.5, 0.0, 0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(mixing_phi_y(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn phi_z_examples() {
        assert!((mixing_phi_z(1e-3, 0.0, 0.0) - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(mixing_phi_z(0.0, 0.3, 0.2), 0.0);
        // delta/2 = sqrt(2) * sqrt(s^2 + d^2) with s = 0.3, d = 0.4
        let delta = 2.0 * 2f64.sqrt() * 0.5;
        assert!((mixing_phi_z(delta, 0.3, 0.4) - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn dark_y_examples() {
        let p = dark_states_y(0.0, 0.0);
        assert_eq!(p.d1, StateVector::basis(basis::ONE));
        assert_eq!(p.d2, StateVector::basis(basis::ZERO));
        let p = dark_states_y(FRAC_PI_2, 0.0);
        assert!((p.d1.amplitude(basis::ANC) + 1.0).norm() < 1e-15);
        assert!(p.d1.amplitude(basis::ONE).norm() < 1e-15);
        assert_eq!(p.d2, StateVector::basis(basis::ZERO));
    }

    #[test]
    fn dark_z_examples() {
        let ph = 0.7;
        let p = dark_states_z(0.0, FRAC_PI_2, ph);
        assert!((p.d1.amplitude(basis::ONE) - c(0.0, ph).exp()).norm() < 1e-15);
        assert!((p.d2.amplitude(basis::ANC) - 1.0).norm() < 1e-15);
        assert!(p.d2.amplitude(basis::E1).norm() < 1e-16);

        let p = dark_states_z(FRAC_PI_4, FRAC_PI_2, 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((p.d2.amplitude(basis::ONE) - h).norm() < 1e-15);
        assert!((p.d2.amplitude(basis::ANC) - h).norm() < 1e-15);
    }

    #[test]
    fn connection_y_examples() {
        assert_eq!(connection_y(0.0), Op2::zeros());
        let a = connection_y(FRAC_PI_2);
        let want = crate::qcore::pauli_y() * c(0.0, -1.0);
        assert!(max_abs(&(a - want)) < 1e-15);
    }

    #[test]
    fn numeric_connection_constant_basis() {
        let a = connection_numeric(|_| dark_states_y(0.3, 0.4), 1.0, 1e-3);
        assert_eq!(a, Op2::zeros());
    }

    #[test]
    fn numeric_connection_y_converges_second_order() {
        let phi = 0.9f64;
        let th = 0.37;
        let exact = -phi.sin();
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| (connection_numeric(|t| dark_states_y(t, phi), th, h)[(0, 1)].re - exact).abs())
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1] - 4.0).abs() < 0.05, "{errs:?}");
        }
    }

    #[test]
    fn numeric_connection_z_magnitude() {
        let (phi, ph) = (0.6f64, 1.1);
        let a = connection_richardson(|t| dark_states_z(t, phi, ph), 0.4, 1e-3);
        // <d2| d/dtheta |d1> = -sin(phi)
        assert!((a[(1, 0)] + phi.sin()).norm() < 1e-10);
        assert!((a[(0, 1)].norm() - phi.sin()).abs() < 1e-10);
        assert!(max_abs(&(a - connection_z(phi))) < 1e-9);
    }

    #[test]
    fn darkness_y_protocol() {
        let p = make_y_pulseset(0.5, 0.5, 0.5, 150.0, 100.0).unwrap();
        let mp = ModelParams::default();
        for i in -50..=50 {
            let t = i as f64 * 17.3;
            let h = build_h_y(t, &p, &mp).unwrap();
            let pair = dark_pair_at(Configuration::Y, t, &p, &mp);
            let (r1, r2) = darkness_residual(&h, &pair);
            let tol = darkness_threshold(&h);
            assert!(r1 <= tol && r2 <= tol, "t={t} {r1:e} {r2:e}");
            for i in [basis::E1, basis::E2] {
                assert_eq!(pair.d1.amplitude(i), cr(0.0));
                assert_eq!(pair.d2.amplitude(i), cr(0.0));
            }
        }
    }

    #[test]
    fn darkness_z_protocol_and_negative_control() {
        let p = make_z_pulseset(0.5, 0.5, 650.0, 100.0, 0.9).unwrap();
        let mp = ModelParams::default();
        for i in -50..=50 {
            let t = i as f64 * 23.1;
            let h = build_h_z(t, &p, &mp).unwrap();
            let pair = dark_pair_at(Configuration::Z, t, &p, &mp);
            let (r1, r2) = darkness_residual(&h, &pair);
            let tol = darkness_threshold(&h);
            assert!(r1 <= tol && r2 <= tol, "t={t} {r1:e} {r2:e}");
        }
        // off-midpoint tuning: second dark state is no longer dark
        let t = -250.0;
        let h = build_h_z_detuned(t, &p, &mp, 0.0).unwrap();
        let pair = dark_pair_at(Configuration::Z, t, &p, &mp);
        let (_, r2) = darkness_residual(&h, &pair);
        assert!(r2 > 1e-3 * max_abs(&h), "{r2:e}");
    }

    #[test]
    fn theta_rate_matches_finite_difference() {
        let p = make_z_pulseset(0.5, 0.5, 400.0, 100.0, 0.0).unwrap();
        for &t in &[-500.0, -200.0, -10.0, 120.0] {
            let h = 1e-3;
            let fd = (theta_at(t + h, &p) - theta_at(t - h, &p)) / (2.0 * h);
            assert!((theta_rate(t, &p) - fd).abs() < 1e-8, "{t}");
        }
    }

    #[test]
    fn phi_rate_matches_finite_difference() {
        let mp = ModelParams::default();
        let y = make_y_pulseset(0.5, 0.5, 0.5, 150.0, 100.0).unwrap();
        let z = make_z_pulseset(0.5, 0.5, 650.0, 100.0, 0.0).unwrap();
        for &t in &[-400.0, -120.0, 0.0, 75.0, 300.0] {
            let h = 1e-3;
            let fy = (phi_y_at(t + h, &y) - phi_y_at(t - h, &y)) / (2.0 * h);
            assert!((phi_rate(Configuration::Y, t, &y, &mp) - fy).abs() < 1e-8);
            let fz = (phi_z_at(t + h, &z, mp.delta) - phi_z_at(t - h, &z, mp.delta)) / (2.0 * h);
            assert!((phi_rate(Configuration::Z, t, &z, &mp) - fz).abs() < 1e-8);
        }
    }

    #[test]
    fn protocol_limits() {
        let y = make_y_pulseset(0.5, 0.5, 0.5, 300.0, 100.0).unwrap();
        assert!(theta_at(-1100.0, &y) < 1e-12);
        assert!((theta_at(1100.0, &y) - FRAC_PI_2).abs() < 1e-12);
        let z = make_z_pulseset(0.3, 0.5, 650.0, 100.0, 0.0).unwrap();
        assert!(theta_at(-1450.0, &z) < 1e-12);
        assert!((theta_at(1450.0, &z) - 0.3f64.atan2(0.5)).abs() < 1e-12);
        // log-domain evaluation far beyond the window
        assert!((theta_at(5000.0, &y) - FRAC_PI_2).abs() < 1e-15);
        assert!((phi_z_at(5000.0, &z, 1e-3) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn bright_gap_matches_midpoint_formula() {
        let p = make_z_pulseset(0.5, 0.5, 650.0, 100.0, 0.4).unwrap();
        let mp = ModelParams::default();
        for &t in &[-600.0, -300.0, 0.0, 150.0] {
            let h = build_h_z(t, &p, &mp).unwrap();
            let pair = dark_pair_at(Configuration::Z, t, &p, &mp);
            let ev = bright_eigenvalues(Configuration::Z, &h, &pair);
            assert_eq!(ev.len(), 2);
            let f = p.fields(t);
            let split = bright_splitting_z(mp.delta, f.stokes, f.driving);
            let gap = ev.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
            assert!((2.0 * gap - split).abs() < 1e-9 * split, "t={t}");
            assert!((ev[1] - ev[0] - split).abs() < 1e-9 * split);
        }
    }

    #[test]
    fn coupling_matches_projected_derivative() {
        let mp = ModelParams::default();
        let y = make_y_pulseset(0.5, 0.5, 0.5, 150.0, 100.0).unwrap();
        for &t in &[-80.0, -20.0, 10.0, 60.0] {
            let h = 1e-4;
            let pair = dark_pair_at(Configuration::Y, t, &y, &mp);
            let q = Op5::identity() - pair.projector();
            let plus = dark_pair_at(Configuration::Y, t + h, &y, &mp);
            let minus = dark_pair_at(Configuration::Y, t - h, &y, &mp);
            let d1 = (q * (plus.d1.ket() - minus.d1.ket())).norm() / (2.0 * h);
            let d2 = (q * (plus.d2.ket() - minus.d2.ket())).norm() / (2.0 * h);
            let want = dark_bright_coupling(Configuration::Y, t, &y, &mp);
            assert!((d1.max(d2) - want).abs() < 1e-6 * (1.0 + want), "t={t}");
        }
    }

    proptest! {
        #[test]
        fn dark_y_orthonormal(theta in 0.0..FRAC_PI_2, phi in 0.0..FRAC_PI_2) {
            let p = dark_states_y(theta, phi);
            prop_assert!(p.orthonormality_deviation() < 1e-12);
            prop_assert!(p.d1.inner(&p.d2).norm() < 1e-15);
        }

        #[test]
        fn dark_z_orthonormal(theta in 0.0..FRAC_PI_2, phi in 0.0..FRAC_PI_2, ph in -PI..PI) {
            let p = dark_states_z(theta, phi, ph);
            prop_assert!(p.orthonormality_deviation() < 1e-12);
        }

        #[test]
        fn analytic_connection_matches_numeric(theta in 0.05..1.5f64, phi in 0.0..FRAC_PI_2) {
            let a = connection_richardson(|t| dark_states_y(t, phi), theta, 1e-3);
            prop_assert!(max_abs(&(a - connection_y(phi))) < 1e-8);
        }
    }
}
