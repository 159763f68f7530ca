//! Time propagation of pure states and density matrices.
//!
//! The adaptive engine is a Dormand-Prince 5(4) pair with PI step control,
//! written once over fixed-size complex matrices so kets (5x1) and density
//! matrices (5x5) share it.

use log::debug;
use nalgebra::SMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::LindbladChannel;
use crate::qcore::{c, cr, dense_expm, hermitian_eigenvalues, max_abs, DensityMatrix, Ket5, Op5, StateVector, C64};

/// Eigenvalues below this abort a Lindblad run.
pub const POSITIVITY_FLOOR: f64 = -1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PropagationSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Spacing of recorded snapshots; 0 records the endpoints only.
    pub record_stride: f64,
}

impl PropagationSpec {
    /// Tolerances `1e-10`/`1e-12`, `max_step` 2 ps, endpoints only.
    pub fn new(t_start: f64, t_end: f64) -> Result<Self> {
        let s = Self {
            t_start,
            t_end,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 2.0,
            record_stride: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Result<Self> {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_step(mut self, max_step: f64) -> Result<Self> {
        self.max_step = max_step;
        self.validate()?;
        Ok(self)
    }

    pub fn with_record_stride(mut self, stride: f64) -> Result<Self> {
        self.record_stride = stride;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_end > self.t_start) {
            return Err(invalid("t_end", "must exceed t_start"));
        }
        for (name, tol) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(tol > 0.0 && tol <= 1e-2) {
                return Err(invalid(name, format!("must lie in (0, 1e-2], got {tol}")));
            }
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return Err(invalid("max_step", "must be positive"));
        }
        if !(self.record_stride >= 0.0 && self.record_stride.is_finite()) {
            return Err(invalid("record_stride", "must be >= 0"));
        }
        Ok(())
    }

    fn record_times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if self.record_stride > 0.0 {
            let n = ((self.t_end - self.t_start) / self.record_stride).floor() as usize;
            for k in 1..=n {
                let t = self.t_start + self.record_stride * k as f64;
                if t < self.t_end - 1e-9 * self.record_stride {
                    out.push(t);
                }
            }
        }
        out.push(self.t_end);
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest `|norm - 1|` (kets) or `|trace - 1|` (density matrices).
    pub max_norm_drift: f64,
    /// Smallest density-matrix eigenvalue seen; 0 for kets.
    pub min_eigenvalue: f64,
    /// Largest anti-Hermitian residue removed by symmetrization.
    pub max_hermiticity_deviation: f64,
}

/// Recorded snapshots with strictly increasing times.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub diagnostics: Diagnostics,
}

impl<S> Trajectory<S> {
    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &S)> {
        self.times.iter().copied().zip(self.states.iter())
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const PI_ALPHA: f64 = 0.7 / 5.0;
const PI_BETA: f64 = 0.4 / 5.0;

type Mat<const R: usize, const C: usize> = SMatrix<C64, R, C>;

fn scaled_error<const R: usize, const C: usize>(
    err: &Mat<R, C>,
    y0: &Mat<R, C>,
    y1: &Mat<R, C>,
    spec: &PropagationSpec,
) -> f64 {
    let mut sum = 0.0;
    for i in 0..R * C {
        let sc = spec.abs_tol + spec.rel_tol * y0[i].norm().max(y1[i].norm());
        sum += (err[i].norm() / sc).powi(2);
    }
    (sum / (R * C) as f64).sqrt()
}

/// Generic adaptive integration of `dy/dt = f(t, y)`. `after_step` may adjust
/// the accepted state (symmetrization, monitoring) and can abort the run.
fn dopri<const R: usize, const C: usize, F, G>(
    f: F,
    y0: Mat<R, C>,
    spec: &PropagationSpec,
    mut after_step: G,
) -> Result<Trajectory<Mat<R, C>>>
where
    F: Fn(f64, &Mat<R, C>) -> Result<Mat<R, C>>,
    G: FnMut(f64, &mut Mat<R, C>, &mut Diagnostics) -> Result<()>,
{
    spec.validate()?;
    let mut diag = Diagnostics::default();
    let mut t = spec.t_start;
    let mut y = y0;
    let mut times = vec![t];
    let mut states = vec![y];
    let span = spec.t_end - spec.t_start;

    let k1 = f(t, &y)?;
    let (d0, d1) = (max_abs(&y), max_abs(&k1));
    let mut h = if d0 > 0.0 && d1 > 0.0 {
        (1e-2 * d0 / d1).min(spec.max_step)
    } else {
        spec.max_step.min(1e-3 * span)
    };
    let mut err_prev = 1e-4f64;

    for target in spec.record_times() {
        while t < target {
            let mut step = h.min(spec.max_step);
            let landing = t + step >= target - 1e-12 * target.abs().max(1.0);
            if landing {
                step = target - t;
            }
            let min_step = 1e-12 * t.abs().max(1.0);
            if step < min_step && !landing {
                return Err(Error::StepUnderflow { t, h: step });
            }
            let k1 = f(t, &y)?;
            let k2 = f(t + step / 5.0, &(y + (k1 * cr(A21)) * cr(step)))?;
            let k3 = f(t + 0.3 * step, &(y + (k1 * cr(A31) + k2 * cr(A32)) * cr(step)))?;
            let k4 = f(
                t + 0.8 * step,
                &(y + (k1 * cr(A41) + k2 * cr(A42) + k3 * cr(A43)) * cr(step)),
            )?;
            let k5 = f(
                t + 8.0 / 9.0 * step,
                &(y + (k1 * cr(A51) + k2 * cr(A52) + k3 * cr(A53) + k4 * cr(A54)) * cr(step)),
            )?;
            let k6 = f(
                t + step,
                &(y + (k1 * cr(A61) + k2 * cr(A62) + k3 * cr(A63) + k4 * cr(A64) + k5 * cr(A65)) * cr(step)),
            )?;
            let y_new = y + (k1 * cr(B1) + k3 * cr(B3) + k4 * cr(B4) + k5 * cr(B5) + k6 * cr(B6)) * cr(step);
            let k7 = f(t + step, &y_new)?;
            let err_vec =
                (k1 * cr(E1) + k3 * cr(E3) + k4 * cr(E4) + k5 * cr(E5) + k6 * cr(E6) + k7 * cr(E7)) * cr(step);
            let err = scaled_error(&err_vec, &y, &y_new, spec);
            if !err.is_finite() {
                return Err(Error::NonFinite);
            }
            if err <= 1.0 {
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-PI_ALPHA) * err_prev.powf(PI_BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                err_prev = err.max(1e-4);
                t = if landing { target } else { t + step };
                y = y_new;
                after_step(t, &mut y, &mut diag)?;
                diag.accepted_steps += 1;
                // a shortened landing step says nothing about the natural step size
                if !landing || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                diag.rejected_steps += 1;
                let factor = (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
                h = step * factor;
                if h < min_step {
                    return Err(Error::StepUnderflow { t, h });
                }
            }
        }
        times.push(t);
        states.push(y);
    }
    Ok(Trajectory {
        times,
        states,
        diagnostics: diag,
    })
}

fn minus_i() -> C64 {
    c(0.0, -1.0)
}

/// Integrates `d psi/dt = -i H(t) psi`. States are stored unnormalized.
pub fn schrodinger_propagate<H>(
    h_of_t: H,
    psi0: &StateVector,
    spec: &PropagationSpec,
) -> Result<Trajectory<StateVector>>
where
    H: Fn(f64) -> Result<Op5>,
{
    let n = psi0.norm();
    if (n - 1.0).abs() > crate::qcore::NORM_TOL {
        return Err(Error::NotNormalized { norm_sq: n * n });
    }
    let tr = dopri(
        |t, y: &Ket5| Ok(h_of_t(t)? * y * minus_i()),
        *psi0.ket(),
        spec,
        |_, y, d| {
            d.max_norm_drift = d.max_norm_drift.max((y.norm() - 1.0).abs());
            Ok(())
        },
    )?;
    Ok(Trajectory {
        times: tr.times,
        states: tr.states.into_iter().map(StateVector::from_ket).collect(),
        diagnostics: tr.diagnostics,
    })
}

/// Precomputed dissipator for rank-one jump operators `sqrt(r) |to><from|`.
struct Dissipator {
    jumps: Vec<(usize, usize, f64)>,
    /// `-(1/2) sum_k r_k |from_k><from_k|`
    damping: Op5,
}

impl Dissipator {
    fn new(channels: &[LindbladChannel]) -> Result<Self> {
        let mut damping = Op5::zeros();
        let mut jumps = Vec::with_capacity(channels.len());
        for ch in channels {
            if !(ch.rate >= 0.0 && ch.rate.is_finite()) {
                return Err(invalid("rate", format!("channel {} has rate {}", ch.label, ch.rate)));
            }
            if ch.rate == 0.0 {
                continue;
            }
            damping[(ch.from, ch.from)] -= cr(0.5 * ch.rate);
            jumps.push((ch.from, ch.to, ch.rate));
        }
        Ok(Self { jumps, damping })
    }

    /// `-i [H, rho] + D[rho]` via the effective non-Hermitian Hamiltonian.
    fn rhs(&self, h: &Op5, rho: &Op5) -> Op5 {
        let g = h * minus_i() + self.damping;
        let mut out = g * rho + rho * g.adjoint();
        for &(from, to, rate) in &self.jumps {
            out[(to, to)] += rho[(from, from)] * rate;
        }
        out
    }
}

/// Integrates the Lindblad master equation. Each accepted state is
/// symmetrized; eigenvalues below [`POSITIVITY_FLOOR`] abort the run.
pub fn lindblad_propagate<H>(
    h_of_t: H,
    channels: &[LindbladChannel],
    rho0: &DensityMatrix,
    spec: &PropagationSpec,
) -> Result<Trajectory<DensityMatrix>>
where
    H: Fn(f64) -> Result<Op5>,
{
    let diss = Dissipator::new(channels)?;
    let m = rho0.matrix();
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    // chained runs hand over states that already carry integration error, so
    // the run-level bounds apply here rather than the strict constructor ones
    let mut min_eig = rho0.min_eigenvalue();
    if min_eig < POSITIVITY_FLOOR || rho0.hermiticity_deviation() > 1e-10 || (rho0.trace() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidDensity(format!(
            "initial state: min eigenvalue {min_eig:e}, trace {}",
            rho0.trace()
        )));
    }
    let tr = dopri(
        |t, rho: &Op5| Ok(diss.rhs(&h_of_t(t)?, rho)),
        *rho0.matrix(),
        spec,
        |t, rho, d| {
            let dev = crate::qcore::hermiticity_deviation(rho);
            if dev > d.max_hermiticity_deviation {
                debug!("hermiticity deviation {dev:e} at t = {t}");
            }
            d.max_hermiticity_deviation = d.max_hermiticity_deviation.max(dev);
            *rho = (*rho + rho.adjoint()) * cr(0.5);
            d.max_norm_drift = d.max_norm_drift.max((rho.trace().re - 1.0).abs());
            let e = hermitian_eigenvalues(rho)[0];
            min_eig = min_eig.min(e);
            d.min_eigenvalue = min_eig;
            if e < POSITIVITY_FLOOR {
                return Err(Error::Positivity { t, min_eigenvalue: e });
            }
            Ok(())
        },
    )?;
    let mut diagnostics = tr.diagnostics;
    diagnostics.min_eigenvalue = min_eig;
    Ok(Trajectory {
        times: tr.times,
        states: tr
            .states
            .into_iter()
            .map(DensityMatrix::from_matrix_unchecked)
            .collect(),
        diagnostics,
    })
}

/// Midpoint piecewise-constant propagation with dense matrix exponentials over
/// uniform steps no longer than `dt`.
pub fn oracle_propagate<H>(h_of_t: H, psi0: &StateVector, dt: f64, t_start: f64, t_end: f64) -> Result<StateVector>
where
    H: Fn(f64) -> Result<Op5>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", "must be positive"));
    }
    if t_end.is_nan() || t_start.is_nan() || t_end < t_start {
        return Err(invalid("t_end", "must not precede t_start"));
    }
    let n = ((t_end - t_start) / dt).ceil() as usize;
    if n == 0 {
        return Ok(*psi0);
    }
    let h = (t_end - t_start) / n as f64;
    let mut psi = *psi0.ket();
    for k in 0..n {
        let mid = t_start + (k as f64 + 0.5) * h;
        psi = dense_expm(&(h_of_t(mid)? * minus_i()), h)? * psi;
    }
    Ok(StateVector::from_ket(psi))
}

/// `1 - |<a|b>|^2` for normalized copies of the two states.
pub fn overlap_deficit(a: &StateVector, b: &StateVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    1.0 - a.overlap(b) / (na * na * nb * nb)
}
