//! RWA Hamiltonians of the double-tripod dot and its dissipation channels.
//!
//! Both branch couplings of every field are equal (`Omega_j1 = Omega_j2`).
//! Time in ps, angular frequencies in rad/ps, hbar = 1.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pulses::{Fields, PulseSet};
use crate::qcore::{basis, c, cr, ket_bra, Op5};

pub const BOHR_MAGNETON: f64 = 9.2740e-24; // J/T
pub const HBAR: f64 = 1.0546e-34; // J s

/// Electron Zeeman splitting `|g| mu_B B / hbar` in rad/ps for a field
/// magnitude in tesla.
pub fn zeeman_from_field(b_field: f64, g_factor: f64) -> f64 {
    g_factor.abs() * BOHR_MAGNETON * b_field / HBAR * 1e-12
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Electron Zeeman splitting (rad/ps).
    pub delta: f64,
    /// Shared single-photon detuning of the y-configuration (rad/ps).
    pub detuning_common: f64,
    /// Recombination rate per channel (1/ps).
    pub gamma: f64,
    /// Hole spin-flip rate (1/ps).
    pub gamma_hh: f64,
    /// Electron spin-flip rate (1/ps).
    pub gamma_ee: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            delta: 1.016e-3,
            detuning_common: 0.0,
            gamma: 1.0 / (2.0 * 800.0),
            gamma_hh: 1e-9,
            gamma_ee: 1e-9,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid("delta", format!("must be > 0, got {}", self.delta)));
        }
        if !self.detuning_common.is_finite() {
            return Err(invalid("detuning_common", "must be finite"));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("gamma_hh", self.gamma_hh),
            ("gamma_ee", self.gamma_ee),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Copy with every dissipative rate set to zero.
    pub fn without_decoherence(&self) -> Self {
        Self {
            gamma: 0.0,
            gamma_hh: 0.0,
            gamma_ee: 0.0,
            ..*self
        }
    }
}

/// Which Hamiltonian a pulse segment drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    /// Three-photon resonance off the Zeeman midpoint; all three fields.
    Y,
    /// Midpoint tuning, pump off, Stokes carries the relative phase.
    Z,
}

fn add_coupling(h: &mut Op5, ground: usize, omega: num_complex::Complex64) {
    // -omega (|e1><g| + |e2><g|) + h.c.
    for e in [basis::E1, basis::E2] {
        h[(e, ground)] -= omega;
        h[(ground, e)] -= omega.conj();
    }
}

/// y-configuration Hamiltonian at time `t`.
pub fn build_h_y(t: f64, p: &PulseSet, mp: &ModelParams) -> Result<Op5> {
    h_y_from_fields(&p.fields(t), mp)
}

/// y-configuration Hamiltonian for given instantaneous field values.
pub fn h_y_from_fields(f: &Fields, mp: &ModelParams) -> Result<Op5> {
    let d0 = mp.detuning_common;
    if (d0 + 0.5 * mp.delta).abs() <= 1e-12 * mp.delta.abs().max(d0.abs()) {
        return Err(Error::MidpointTuning);
    }
    let mut h = Op5::zeros();
    h[(basis::E1, basis::E1)] = cr(-d0);
    h[(basis::E2, basis::E2)] = cr(-(d0 + mp.delta));
    add_coupling(&mut h, basis::ZERO, cr(f.pump));
    add_coupling(&mut h, basis::ONE, cr(f.stokes));
    add_coupling(&mut h, basis::ANC, cr(f.driving));
    Ok(h)
}

/// z-configuration Hamiltonian at the Zeeman midpoint.
pub fn build_h_z(t: f64, p: &PulseSet, mp: &ModelParams) -> Result<Op5> {
    build_h_z_detuned(t, p, mp, -0.5 * mp.delta)
}

/// z-configuration Hamiltonian with an explicit two-photon-resonant detuning
/// `Delta_s = Delta_d`.
pub fn build_h_z_detuned(t: f64, p: &PulseSet, mp: &ModelParams, detuning_s: f64) -> Result<Op5> {
    let f = p.fields(t);
    if f.pump != 0.0 {
        return Err(Error::PumpNotZero { t, value: f.pump });
    }
    let mut h = Op5::zeros();
    h[(basis::E1, basis::E1)] = cr(-detuning_s);
    h[(basis::E2, basis::E2)] = cr(-(detuning_s + mp.delta));
    add_coupling(&mut h, basis::ANC, cr(f.driving));
    let phase = c(0.0, -p.stokes_phase).exp();
    add_coupling(&mut h, basis::ONE, phase * f.stokes);
    Ok(h)
}

pub fn build_h(config: Configuration, t: f64, p: &PulseSet, mp: &ModelParams) -> Result<Op5> {
    match config {
        Configuration::Y => build_h_y(t, p, mp),
        Configuration::Z => build_h_z(t, p, mp),
    }
}

/// Rank-one jump operator `sqrt(rate) |to><from|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LindbladChannel {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
    pub label: &'static str,
}

impl LindbladChannel {
    pub fn operator(&self) -> Op5 {
        ket_bra(self.to, self.from) * cr(self.rate.sqrt())
    }

    pub fn is_recombination(&self) -> bool {
        matches!(self.from, basis::E1 | basis::E2) && matches!(self.to, basis::ZERO | basis::ONE)
    }
}

/// Four recombination channels, two hole spin flips, two electron spin flips.
pub fn lindblad_channels(mp: &ModelParams) -> Vec<LindbladChannel> {
    use basis::*;
    let ch = |from, to, rate, label| LindbladChannel { from, to, rate, label };
    vec![
        ch(E1, ZERO, mp.gamma, "e1->0"),
        ch(E1, ONE, mp.gamma, "e1->1"),
        ch(E2, ZERO, mp.gamma, "e2->0"),
        ch(E2, ONE, mp.gamma, "e2->1"),
        ch(ONE, ZERO, mp.gamma_hh, "hh 1->0"),
        ch(ZERO, ONE, mp.gamma_hh, "hh 0->1"),
        ch(E2, E1, mp.gamma_ee, "ee e2->e1"),
        ch(E1, E2, mp.gamma_ee, "ee e1->e2"),
    ]
}
