//! End-to-end runs: optical spin initialization, holonomy sweeps, gate
//! simulation with fidelity estimation, and photon-counting readout.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::darkspace::dark_pair_at;
use crate::error::{invalid, Error, Result};
use crate::holonomy::{
    beta_integral, compose_rx, gamma_f_integral, predicted_final_state_z, predicted_ry, predicted_rz,
};
use crate::model::{build_h, h_y_from_fields, lindblad_channels, Configuration, LindbladChannel, ModelParams};
use crate::propagate::{
    lindblad_propagate, oracle_propagate, schrodinger_propagate, Diagnostics, PropagationSpec, Trajectory,
};
use crate::pulses::{make_y_pulseset, make_z_pulseset, Fields, PulseSet};
use crate::qcore::{basis, c, cr, DensityMatrix, Ket2, Op2, QubitGate, StateVector, C64};
use crate::quadrature::QuadratureSpec;

/// Leakage above this marks a gate run as non-adiabatic.
pub const LEAKAGE_WARNING: f64 = 0.05;
/// Allowed gap between the two fidelity estimators.
pub const CHANNEL_AVERAGE_TOL: f64 = 1e-4;
pub const MIN_SPHERE_POINTS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    /// Drives `|1>`, prepares `|0>`.
    SigmaPlus,
    /// Drives `|0>`, prepares `|1>`.
    SigmaMinus,
}

impl Polarization {
    fn fields(self, rabi: f64) -> Fields {
        let mut f = Fields {
            pump: 0.0,
            stokes: 0.0,
            driving: 0.0,
        };
        match self {
            Polarization::SigmaMinus => f.pump = rabi,
            Polarization::SigmaPlus => f.stokes = rabi,
        }
        f
    }

    /// Signed preparation fidelity of the targeted spin state.
    pub fn fidelity(self, rho: &DensityMatrix) -> f64 {
        let (p0, p1) = (rho.population(basis::ZERO), rho.population(basis::ONE));
        let total = p0 + p1;
        if total <= 0.0 {
            return 0.0;
        }
        match self {
            Polarization::SigmaMinus => (p1 - p0) / total,
            Polarization::SigmaPlus => (p0 - p1) / total,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InitializationRun {
    pub trajectory: Trajectory<DensityMatrix>,
    pub fidelity: Vec<f64>,
}

/// Continuous single-polarization illumination with all dissipation channels.
pub fn run_initialization(
    polarization: Polarization,
    rho0: &DensityMatrix,
    rabi: f64,
    duration: f64,
    record_stride: f64,
    mp: &ModelParams,
) -> Result<InitializationRun> {
    if !(rabi >= 0.0 && rabi.is_finite()) {
        return Err(invalid("rabi", format!("must be >= 0, got {rabi}")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(invalid("duration", format!("must be > 0, got {duration}")));
    }
    mp.validate()?;
    let h = h_y_from_fields(&polarization.fields(rabi), mp)?;
    let spec = PropagationSpec::new(0.0, duration)?
        .with_max_step(50.0)?
        .with_record_stride(record_stride)?;
    let trajectory = lindblad_propagate(|_| Ok(h), &lindblad_channels(mp), rho0, &spec)?;
    let fidelity = trajectory.states.iter().map(|r| polarization.fidelity(r)).collect();
    Ok(InitializationRun { trajectory, fidelity })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Amplitudes {
    pub pump: f64,
    pub stokes: f64,
    pub driving: f64,
}

impl Default for Amplitudes {
    fn default() -> Self {
        Self {
            pump: 0.5,
            stokes: 0.5,
            driving: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau0_over_tau: f64,
    pub angle: f64,
    pub signed_angle: f64,
    pub quadrature_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

fn check_ratios(ratios: &[f64]) -> Result<()> {
    if ratios.is_empty() {
        return Err(invalid("tau0_over_tau", "list is empty"));
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(invalid("tau0_over_tau", "entries must be finite and >= 0"));
    }
    if ratios.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("tau0_over_tau", "entries must be strictly increasing"));
    }
    Ok(())
}

fn sweep<F>(ratios: &[f64], run: F) -> Result<SweepTable>
where
    F: Fn(f64) -> Result<crate::holonomy::HolonomyResult> + Sync,
{
    check_ratios(ratios)?;
    let rows = ratios
        .par_iter()
        .map(|&r| {
            run(r).map(|h| SweepRow {
                tau0_over_tau: r,
                angle: h.angle,
                signed_angle: h.signed_angle,
                quadrature_error: h.estimated_quadrature_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

/// beta for each delay ratio of the y-protocol.
pub fn sweep_beta(ratios: &[f64], amps: &Amplitudes, tau: f64, quad: &QuadratureSpec) -> Result<SweepTable> {
    sweep(ratios, |r| {
        let p = make_y_pulseset(amps.pump, amps.stokes, amps.driving, r * tau, tau)?;
        beta_integral(&p, quad)
    })
}

/// |gamma_f| for each delay ratio of the fractional protocol.
pub fn sweep_gamma_f(
    ratios: &[f64],
    amps: &Amplitudes,
    tau: f64,
    mp: &ModelParams,
    quad: &QuadratureSpec,
) -> Result<SweepTable> {
    sweep(ratios, |r| {
        let p = make_z_pulseset(amps.stokes, amps.driving, r * tau, tau, 0.0)?;
        gamma_f_integral(&p, mp, quad)
    })
}

/// Delay ratio in `[0, 4]` at which beta reaches `target`, by bisection.
pub fn delay_for_beta(target: f64, amps: &Amplitudes, tau: f64, quad: &QuadratureSpec) -> Result<f64> {
    let beta = |r: f64| -> Result<f64> {
        let p = make_y_pulseset(amps.pump, amps.stokes, amps.driving, r * tau, tau)?;
        Ok(beta_integral(&p, quad)?.angle)
    };
    let (mut lo, mut hi) = (0.0, 4.0);
    if !(target > 0.0 && beta(hi)? >= target) {
        return Err(invalid("target", format!("beta = {target} not reachable")));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if beta(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One pulse segment over `[start, end]`, envelopes in absolute time.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub config: Configuration,
    pub pulses: PulseSet,
    pub start: f64,
    pub end: f64,
}

/// Back-to-back segments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schedule {
    pub segments: Vec<Segment>,
}

impl Schedule {
    /// A single segment spanning the truncation window of `pulses`.
    pub fn single(config: Configuration, pulses: PulseSet) -> Self {
        let (start, end) = pulses.window();
        Self {
            segments: vec![Segment {
                config,
                pulses,
                start,
                end,
            }],
        }
    }

    pub fn start(&self) -> f64 {
        self.segments.first().map_or(0.0, |s| s.start)
    }

    pub fn end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    /// Appends `next`, shifted to begin where `self` ends.
    pub fn then(mut self, next: Schedule) -> Self {
        if self.segments.is_empty() {
            return next;
        }
        let dt = self.end() - next.start();
        self.segments.extend(next.segments.into_iter().map(|s| Segment {
            pulses: s.pulses.shifted(dt),
            start: s.start + dt,
            end: s.end + dt,
            ..s
        }));
        self
    }

    /// Same fields played backwards in time.
    pub fn time_reversed(&self) -> Self {
        let axis = 0.5 * (self.start() + self.end());
        Self {
            segments: self
                .segments
                .iter()
                .rev()
                .map(|s| Segment {
                    config: s.config,
                    pulses: s.pulses.mirrored(axis),
                    start: 2.0 * axis - s.end,
                    end: 2.0 * axis - s.start,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
        }
    }
}

fn segment_spec(seg: &Segment, tol: &Tolerances) -> Result<PropagationSpec> {
    PropagationSpec::new(seg.start, seg.end)?
        .with_tolerances(tol.rel_tol, tol.abs_tol)?
        .with_max_step(seg.pulses.width / 50.0)
}

fn merge(acc: &mut Diagnostics, d: &Diagnostics) {
    acc.accepted_steps += d.accepted_steps;
    acc.rejected_steps += d.rejected_steps;
    acc.max_norm_drift = acc.max_norm_drift.max(d.max_norm_drift);
    acc.min_eigenvalue = acc.min_eigenvalue.min(d.min_eigenvalue);
    acc.max_hermiticity_deviation = acc.max_hermiticity_deviation.max(d.max_hermiticity_deviation);
}

/// Lindblad evolution through every segment in turn.
pub fn evolve_density(
    schedule: &Schedule,
    mp: &ModelParams,
    channels: &[LindbladChannel],
    rho0: &DensityMatrix,
    tol: &Tolerances,
) -> Result<(DensityMatrix, Diagnostics)> {
    let mut rho = *rho0;
    let mut diag = Diagnostics::default();
    for seg in &schedule.segments {
        let tr = lindblad_propagate(
            |t| build_h(seg.config, t, &seg.pulses, mp),
            channels,
            &rho,
            &segment_spec(seg, tol)?,
        )?;
        merge(&mut diag, &tr.diagnostics);
        rho = *tr.last();
    }
    Ok((rho, diag))
}

/// Schrodinger evolution through every segment in turn.
pub fn evolve_state(
    schedule: &Schedule,
    mp: &ModelParams,
    psi0: &StateVector,
    tol: &Tolerances,
) -> Result<(StateVector, Diagnostics)> {
    let mut psi = *psi0;
    let mut diag = Diagnostics::default();
    for seg in &schedule.segments {
        let tr = schrodinger_propagate(
            |t| build_h(seg.config, t, &seg.pulses, mp),
            &psi,
            &segment_spec(seg, tol)?,
        )?;
        merge(&mut diag, &tr.diagnostics);
        psi = *tr.last();
    }
    Ok((psi, diag))
}

/// Midpoint matrix-exponential evolution with steps no longer than `dt`.
pub fn evolve_state_oracle(schedule: &Schedule, mp: &ModelParams, psi0: &StateVector, dt: f64) -> Result<StateVector> {
    let mut psi = *psi0;
    for seg in &schedule.segments {
        psi = oracle_propagate(
            |t| build_h(seg.config, t, &seg.pulses, mp),
            &psi,
            dt,
            seg.start,
            seg.end,
        )?;
    }
    Ok(psi)
}

/// Largest population outside the instantaneous dark pair, sampled every
/// `stride` ps along a pure-state run.
pub fn dark_space_excursion(
    schedule: &Schedule,
    mp: &ModelParams,
    psi0: &StateVector,
    stride: f64,
    tol: &Tolerances,
) -> Result<f64> {
    let mut psi = *psi0;
    let mut worst: f64 = 0.0;
    for seg in &schedule.segments {
        let spec = segment_spec(seg, tol)?.with_record_stride(stride)?;
        let tr = schrodinger_propagate(|t| build_h(seg.config, t, &seg.pulses, mp), &psi, &spec)?;
        for (t, s) in tr.iter() {
            let pair = dark_pair_at(seg.config, t, &seg.pulses, mp);
            worst = worst.max(1.0 - pair.captured_population(s) / s.norm().powi(2));
        }
        psi = *tr.last();
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateVariant {
    YSinglePass,
    YClosedLoop,
    ZFractional,
    XComposite,
}

/// Parameters shared by all gate variants. Delays are in units of `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub amps: Amplitudes,
    pub tau: f64,
    /// Forward y pass.
    pub y_delay: f64,
    /// Pump-off return pass closing the y loop.
    pub return_delay: f64,
    /// Target beta of the y gate.
    pub y_target: f64,
    pub z_delay: f64,
    /// y legs of the composite x gate; solved for beta = pi/4 when absent.
    pub x_leg_delay: Option<f64>,
    /// Relative Stokes phase of the z step.
    pub phase: f64,
    pub model: ModelParams,
    pub tolerances: Tolerances,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            amps: Amplitudes::default(),
            tau: 100.0,
            y_delay: 1.5,
            return_delay: 0.7,
            y_target: FRAC_PI_2,
            z_delay: 6.5,
            x_leg_delay: None,
            phase: FRAC_PI_2,
            model: ModelParams::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl GateParams {
    fn forward_y(&self, ratio: f64) -> Result<PulseSet> {
        let a = &self.amps;
        make_y_pulseset(a.pump, a.stokes, a.driving, ratio * self.tau, self.tau)
    }

    /// Forward y pass followed by the pump-off, Stokes-first return pass.
    pub fn y_closed_loop(&self, ratio: f64) -> Result<Schedule> {
        let a = &self.amps;
        let back = make_y_pulseset(0.0, a.stokes, a.driving, self.return_delay * self.tau, self.tau)?.mirrored(0.0);
        Ok(Schedule::single(Configuration::Y, self.forward_y(ratio)?).then(Schedule::single(Configuration::Y, back)))
    }

    pub fn z_protocol(&self) -> Result<Schedule> {
        let a = &self.amps;
        let p = make_z_pulseset(a.stokes, a.driving, self.z_delay * self.tau, self.tau, self.phase)?;
        Ok(Schedule::single(Configuration::Z, p))
    }

    pub fn x_leg_ratio(&self) -> Result<f64> {
        match self.x_leg_delay {
            Some(r) => Ok(r),
            None => delay_for_beta(FRAC_PI_4, &self.amps, self.tau, &QuadratureSpec::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        for (name, v) in [
            ("tau", self.tau),
            ("amp_stokes", self.amps.stokes),
            ("amp_driving", self.amps.driving),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.amps.pump >= 0.0 && self.amps.pump.is_finite()) {
            return Err(invalid("amp_pump", "must be >= 0"));
        }
        for (name, v) in [
            ("y_delay", self.y_delay),
            ("return_delay", self.return_delay),
            ("z_delay", self.z_delay),
            ("x_leg_delay", self.x_leg_delay.unwrap_or(0.0)),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        if !self.phase.is_finite() || !self.y_target.is_finite() {
            return Err(invalid("phase", "must be finite"));
        }
        Ok(())
    }
}

/// Qubit channel stored through its action on the matrix units `|i><j|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitProcess {
    pub units: [[Op2; 2]; 2],
}

impl QubitProcess {
    /// From the images of `|0><0|`, `|1><1|`, `|+><+|`, `|+i><+i|`.
    pub fn from_basis_outputs(e0: &Op2, e1: &Op2, e_plus: &Op2, e_plus_i: &Op2) -> Self {
        let x = e_plus * cr(2.0) - e0 - e1;
        let y = e_plus_i * cr(2.0) - e0 - e1;
        let e01 = (x + y * c(0.0, 1.0)) * cr(0.5);
        let e10 = (x - y * c(0.0, 1.0)) * cr(0.5);
        Self {
            units: [[*e0, e01], [e10, *e1]],
        }
    }

    pub fn from_unitary(u: &QubitGate) -> Self {
        let m = u.matrix();
        let unit = |i: usize, j: usize| m.column(i) * m.column(j).adjoint();
        Self {
            units: [[unit(0, 0), unit(0, 1)], [unit(1, 0), unit(1, 1)]],
        }
    }

    pub fn apply(&self, rho: &Op2) -> Op2 {
        let mut out = Op2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                out += self.units[i][j] * rho[(i, j)];
            }
        }
        out
    }

    /// Largest entry difference between the images of the matrix units.
    pub fn deviation(&self, other: &QubitProcess) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                d = d.max(crate::qcore::max_abs(&(self.units[i][j] - other.units[i][j])));
            }
        }
        d
    }
}

fn qubit_inputs() -> [Ket2; 4] {
    let h = FRAC_1_SQRT_2;
    [
        Ket2::new(cr(1.0), cr(0.0)),
        Ket2::new(cr(0.0), cr(1.0)),
        Ket2::new(cr(h), cr(h)),
        Ket2::new(cr(h), c(0.0, h)),
    ]
}

fn embed(k: &Ket2, b0: &StateVector, b1: &StateVector) -> StateVector {
    StateVector::from_ket(b0.ket() * k[0] + b1.ket() * k[1])
}

fn block_in(rho: &DensityMatrix, b: &[StateVector; 2]) -> Op2 {
    Op2::from_fn(|i, j| b[i].ket().dotc(&(rho.matrix() * b[j].ket())))
}

/// Uniform average fidelity over the qubit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub points: usize,
    /// Rotates the point set; `None` keeps the fixed lattice.
    pub seed: Option<u64>,
}

impl Default for SphereSpec {
    fn default() -> Self {
        Self {
            points: 1000,
            seed: None,
        }
    }
}

/// Antipodal pairs of a Fibonacci lattice, optionally rotated.
pub fn sphere_points(spec: &SphereSpec) -> Result<Vec<[f64; 3]>> {
    if spec.points < MIN_SPHERE_POINTS {
        return Err(invalid("points", format!("need at least {MIN_SPHERE_POINTS}")));
    }
    let half = spec.points / 2;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let rot = spec.seed.map(random_rotation);
    let mut out = Vec::with_capacity(2 * half);
    for i in 0..half {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / half as f64;
        let r = (1.0 - z * z).sqrt();
        let (s, co) = (golden * i as f64).sin_cos();
        let mut p = [r * co, r * s, z];
        if let Some(m) = &rot {
            p = std::array::from_fn(|a| (0..3).map(|b| m[a][b] * p[b]).sum());
        }
        out.push(p);
        out.push([-p[0], -p[1], -p[2]]);
    }
    Ok(out)
}

/// Uniform random rotation from a seeded unit quaternion.
fn random_rotation(seed: u64) -> [[f64; 3]; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (w, x, y, z) = (
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
        b * (tau * u3).cos(),
    );
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
        ],
        [
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
        ],
        [
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

fn bloch_ket(n: &[f64; 3]) -> Ket2 {
    let theta = n[2].clamp(-1.0, 1.0).acos();
    let phi = n[1].atan2(n[0]);
    Ket2::new(cr((0.5 * theta).cos()), C64::from_polar((0.5 * theta).sin(), phi))
}

fn state_fidelity(process: &QubitProcess, target: &QubitGate, psi: &Ket2) -> f64 {
    let out = process.apply(&(psi * psi.adjoint()));
    let ideal = target.apply(psi);
    ideal.dotc(&(out * ideal)).re
}

/// Six-axial-state average and sphere-quadrature average.
pub fn fidelity_estimates(process: &QubitProcess, target: &QubitGate, sphere: &SphereSpec) -> Result<(f64, f64)> {
    let axes = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let six = axes
        .iter()
        .map(|n| state_fidelity(process, target, &bloch_ket(n)))
        .sum::<f64>()
        / 6.0;
    let pts = sphere_points(sphere)?;
    let avg = pts
        .iter()
        .map(|n| state_fidelity(process, target, &bloch_ket(n)))
        .sum::<f64>()
        / pts.len() as f64;
    Ok((six, avg))
}

/// Average gate fidelity (six-state value) after cross-checking it against
/// the sphere quadrature.
pub fn gate_fidelity(process: &QubitProcess, target: &QubitGate, sphere: &SphereSpec) -> Result<f64> {
    let (six, avg) = fidelity_estimates(process, target, sphere)?;
    if (six - avg).abs() > CHANNEL_AVERAGE_TOL {
        return Err(Error::ChannelAverage {
            six_state: six,
            sphere: avg,
        });
    }
    Ok(six)
}

/// Row-major `(re, im)` entries.
pub fn gate_entries(m: &Op2) -> [[f64; 2]; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]].map(|z| [z.re, z.im])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateReport {
    pub variant: GateVariant,
    pub target: [[f64; 2]; 4],
    pub fidelity: f64,
    pub fidelity_sphere: f64,
    /// Largest population outside the qubit over the four inputs.
    pub leakage_final: f64,
    /// beta, |gamma_f|, or the beta of the composite legs.
    pub holonomy_angle: f64,
    /// Largest overlap deficit between propagated outputs and the holonomy
    /// prediction.
    pub holonomy_deviation: f64,
    /// Overlap of the output from `|1>` with the fractional-protocol
    /// prediction (z only).
    pub final_state_overlap: Option<f64>,
    /// Population left in `|0>` from input `|0>` (z only).
    pub spectator_population: Option<f64>,
    pub with_decoherence: bool,
    pub loop_closure: &'static str,
    pub warnings: Vec<String>,
    pub diagnostics: Diagnostics,
    pub params: GateParams,
}

struct GatePlan {
    schedule: Schedule,
    readout: [StateVector; 2],
    target: QubitGate,
    angle: f64,
    predict: Box<dyn Fn(&Ket2) -> StateVector + Sync>,
    closure: &'static str,
}

fn plan(variant: GateVariant, p: &GateParams) -> Result<GatePlan> {
    let quad = QuadratureSpec::default();
    let bare = [StateVector::basis(basis::ZERO), StateVector::basis(basis::ONE)];
    let embed_gate = |u: QubitGate, b: [StateVector; 2]| move |k: &Ket2| embed(&u.apply(k), &b[0], &b[1]);
    Ok(match variant {
        GateVariant::YSinglePass => {
            let fwd = p.forward_y(p.y_delay)?;
            let beta = beta_integral(&fwd, &quad)?.angle;
            let (_, end) = fwd.window();
            let pair = dark_pair_at(Configuration::Y, end, &fwd, &p.model);
            let readout = [pair.d2, pair.d1];
            GatePlan {
                schedule: Schedule::single(Configuration::Y, fwd),
                readout,
                target: predicted_ry(p.y_target),
                angle: beta,
                predict: Box::new(embed_gate(predicted_ry(beta), readout)),
                closure: "single pass, read out in the final dark basis",
            }
        }
        GateVariant::YClosedLoop => {
            let beta = beta_integral(&p.forward_y(p.y_delay)?, &quad)?.angle;
            GatePlan {
                schedule: p.y_closed_loop(p.y_delay)?,
                readout: bare,
                target: predicted_ry(p.y_target),
                angle: beta,
                predict: Box::new(embed_gate(predicted_ry(beta), bare)),
                closure: "closed loop: pump-off return pass, Stokes first",
            }
        }
        GateVariant::ZFractional => {
            let sched = p.z_protocol()?;
            let gamma = gamma_f_integral(&sched.segments[0].pulses, &p.model, &quad)?.angle;
            let from_one = predicted_final_state_z(gamma, p.phase);
            GatePlan {
                schedule: sched,
                readout: bare,
                target: predicted_rz(p.phase),
                angle: gamma,
                predict: Box::new(move |k: &Ket2| {
                    StateVector::from_ket(StateVector::basis(basis::ZERO).ket() * k[0] + from_one.ket() * k[1])
                }),
                closure: "fractional protocol, open path",
            }
        }
        GateVariant::XComposite => {
            let leg = p.x_leg_ratio()?;
            let beta = beta_integral(&p.forward_y(leg)?, &quad)?.angle;
            let y_loop = p.y_closed_loop(leg)?;
            let schedule = y_loop.clone().then(p.z_protocol()?).then(y_loop.time_reversed());
            let ry = predicted_ry(beta);
            let u = ry.adjoint().then_after(&predicted_rz(p.phase)).then_after(&ry);
            GatePlan {
                schedule,
                readout: bare,
                target: compose_rx(p.phase),
                angle: beta,
                predict: Box::new(embed_gate(u, bare)),
                closure: "closed y loops; inverse leg is the time-reversed loop",
            }
        }
    })
}

/// Runs the four qubit basis inputs through the five-level dynamics and
/// assembles the induced qubit channel and its report.
pub fn simulate_gate(
    variant: GateVariant,
    params: &GateParams,
    with_decoherence: bool,
    sphere: &SphereSpec,
) -> Result<(QubitProcess, GateReport)> {
    params.validate()?;
    let plan = plan(variant, params)?;
    let mp = if with_decoherence {
        params.model
    } else {
        params.model.without_decoherence()
    };
    let channels = lindblad_channels(&mp);
    let inputs = qubit_inputs();
    let outputs = inputs
        .par_iter()
        .map(|k| {
            let psi = embed(k, &StateVector::basis(basis::ZERO), &StateVector::basis(basis::ONE));
            evolve_density(&plan.schedule, &mp, &channels, &psi.to_density(), &params.tolerances)
        })
        .collect::<Result<Vec<_>>>()?;

    let blocks: Vec<Op2> = outputs.iter().map(|(r, _)| block_in(r, &plan.readout)).collect();
    let process = QubitProcess::from_basis_outputs(&blocks[0], &blocks[1], &blocks[2], &blocks[3]);
    let (fidelity, fidelity_sphere) = fidelity_estimates(&process, &plan.target, sphere)?;
    if (fidelity - fidelity_sphere).abs() > CHANNEL_AVERAGE_TOL {
        return Err(Error::ChannelAverage {
            six_state: fidelity,
            sphere: fidelity_sphere,
        });
    }

    let mut diagnostics = Diagnostics::default();
    for (_, d) in &outputs {
        merge(&mut diagnostics, d);
    }
    let leakage_final = blocks.iter().map(|b| 1.0 - b.trace().re).fold(0.0, f64::max);
    let holonomy_deviation = inputs
        .iter()
        .zip(&outputs)
        .map(|(k, (rho, _))| {
            let want = (plan.predict)(k);
            1.0 - rho.expectation(&want) / want.norm().powi(2)
        })
        .fold(0.0, f64::max);

    let (final_state_overlap, spectator_population) = if variant == GateVariant::ZFractional {
        let from_one = (plan.predict)(&inputs[1]);
        (
            Some(outputs[1].0.expectation(&from_one)),
            Some(outputs[0].0.population(basis::ZERO)),
        )
    } else {
        (None, None)
    };

    let mut warnings = Vec::new();
    if leakage_final > LEAKAGE_WARNING {
        let msg = format!("leakage {leakage_final:.4} exceeds {LEAKAGE_WARNING}: protocol not adiabatic");
        warn!("{variant:?}: {msg}");
        warnings.push(msg);
    }

    let report = GateReport {
        variant,
        target: gate_entries(plan.target.matrix()),
        fidelity,
        fidelity_sphere,
        leakage_final,
        holonomy_angle: plan.angle,
        holonomy_deviation,
        final_state_overlap,
        spectator_population,
        with_decoherence,
        loop_closure: plan.closure,
        warnings,
        diagnostics,
        params: *params,
    };
    Ok((process, report))
}

/// Pure-state output of the z protocol from `|1>` against `e^{i phase}|1>`.
pub fn z_phase_overlap(params: &GateParams) -> Result<f64> {
    params.validate()?;
    let sched = params.z_protocol()?;
    let mp = params.model.without_decoherence();
    let (psi, _) = evolve_state(&sched, &mp, &StateVector::basis(basis::ONE), &params.tolerances)?;
    let mut amps = [cr(0.0); 5];
    amps[basis::ONE] = C64::from_polar(1.0, params.phase);
    Ok(psi.overlap(&StateVector::from_amplitudes(amps)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReadoutResult {
    pub expected_photons: f64,
    /// Emissions ending in `|0>` and in `|1>`.
    pub photons_to_zero: f64,
    pub photons_to_one: f64,
    /// Population left in `{|1>, |e1>, |e2>}` at the end.
    pub driven_population: f64,
    pub shelving_complete: bool,
    pub final_populations: [f64; 5],
    pub diagnostics: Diagnostics,
}

/// Population threshold below which shelving counts as complete.
pub const SHELVING_THRESHOLD: f64 = 1e-3;

/// Continuous sigma+ drive of `|1>`; emissions counted from every
/// recombination channel.
pub fn run_readout(spin: &Op2, rabi: f64, duration: f64, mp: &ModelParams) -> Result<ReadoutResult> {
    if !(rabi >= 0.0 && rabi.is_finite()) {
        return Err(invalid("rabi", "must be >= 0"));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(invalid("duration", "must be > 0"));
    }
    mp.validate()?;
    let rho0 = DensityMatrix::from_qubit_block(spin)?;
    let h = h_y_from_fields(&Polarization::SigmaPlus.fields(rabi), mp)?;
    let channels = lindblad_channels(mp);
    let stride = duration / 4000.0;
    let spec = PropagationSpec::new(0.0, duration)?
        .with_max_step(50.0f64.min(stride))?
        .with_record_stride(stride)?;
    let tr = lindblad_propagate(|_| Ok(h), &channels, &rho0, &spec)?;
    let rate_into = |dest: usize, rho: &DensityMatrix| -> f64 {
        channels
            .iter()
            .filter(|ch| ch.is_recombination() && ch.to == dest)
            .map(|ch| ch.rate * rho.population(ch.from))
            .sum()
    };
    let trapezoid = |dest: usize| -> f64 {
        tr.times
            .windows(2)
            .zip(tr.states.windows(2))
            .map(|(t, r)| 0.5 * (t[1] - t[0]) * (rate_into(dest, &r[0]) + rate_into(dest, &r[1])))
            .sum()
    };
    let (to_zero, to_one) = (trapezoid(basis::ZERO), trapezoid(basis::ONE));
    let last = tr.last();
    let driven = last.population(basis::ONE) + last.population(basis::E1) + last.population(basis::E2);
    Ok(ReadoutResult {
        expected_photons: to_zero + to_one,
        photons_to_zero: to_zero,
        photons_to_one: to_one,
        driven_population: driven,
        shelving_complete: driven < SHELVING_THRESHOLD,
        final_populations: last.populations(),
        diagnostics: tr.diagnostics,
    })
}

/// Qubit density block from populations and the `|0><1|` coherence.
pub fn qubit_density(p0: f64, p1: f64, coherence: C64) -> Op2 {
    Op2::new(cr(p0), coherence, coherence.conj(), cr(p1))
}
