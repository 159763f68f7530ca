//! Laser-field envelopes (half Rabi frequencies, rad/ps) and pulse sets.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Gaussian tails are cut at this many widths beyond the outermost center.
pub const TRUNCATION_WIDTHS: f64 = 8.0;

/// `amp * exp(-(t - center)^2 / width^2)`
pub fn gaussian(t: f64, amp: f64, center: f64, width: f64) -> Result<f64> {
    check_width(width)?;
    if amp < 0.0 || !amp.is_finite() {
        return Err(invalid("amp", format!("must be finite and >= 0, got {amp}")));
    }
    let x = (t - center) / width;
    Ok(amp * (-x * x).exp())
}

fn check_width(width: f64) -> Result<()> {
    if width > 0.0 && width.is_finite() {
        Ok(())
    } else {
        Err(invalid("width", format!("must be > 0, got {width}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub amp: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianTerm {
    fn value(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.width;
        self.amp * (-x * x).exp()
    }

    fn ln_value(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.width;
        self.amp.ln() - x * x
    }

    fn dln_dt(&self, t: f64) -> f64 {
        -2.0 * (t - self.center) / (self.width * self.width)
    }
}

/// Sum of Gaussian terms; the empty sum is the zero envelope.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    terms: Vec<GaussianTerm>,
}

impl Envelope {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn gaussian(amp: f64, center: f64, width: f64) -> Result<Self> {
        Self::sum(&[GaussianTerm { amp, center, width }])
    }

    pub fn sum(terms: &[GaussianTerm]) -> Result<Self> {
        for term in terms {
            check_width(term.width)?;
            if term.amp < 0.0 || !term.amp.is_finite() {
                return Err(invalid("amp", format!("must be finite and >= 0, got {}", term.amp)));
            }
        }
        Ok(Self {
            terms: terms.iter().copied().filter(|g| g.amp > 0.0).collect(),
        })
    }

    pub fn terms(&self) -> &[GaussianTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn value(&self, t: f64) -> f64 {
        self.terms.iter().map(|g| g.value(t)).sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.terms.iter().map(|g| g.value(t) * g.dln_dt(t)).sum()
    }

    /// Natural log of the envelope, `-inf` for the zero envelope. Does not
    /// underflow far out in the tails.
    pub fn ln_value(&self, t: f64) -> f64 {
        let max = self
            .terms
            .iter()
            .map(|g| g.ln_value(t))
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        let s: f64 = self.terms.iter().map(|g| (g.ln_value(t) - max).exp()).sum();
        max + s.ln()
    }

    /// Logarithmic derivative; 0 for the zero envelope.
    pub fn dln_dt(&self, t: f64) -> f64 {
        match self.terms.as_slice() {
            [] => 0.0,
            [g] => g.dln_dt(t),
            terms => {
                let logs: Vec<f64> = terms.iter().map(|g| g.ln_value(t)).collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (mut num, mut den) = (0.0, 0.0);
                for (g, l) in terms.iter().zip(&logs) {
                    let w = (l - max).exp();
                    num += w * g.dln_dt(t);
                    den += w;
                }
                num / den
            }
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|g| GaussianTerm { amp: g.amp * k, ..*g })
                .filter(|g| g.amp > 0.0)
                .collect(),
        }
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|g| GaussianTerm {
                    center: g.center + dt,
                    ..*g
                })
                .collect(),
        }
    }

    /// Time reflection `t -> axis - t`.
    pub fn mirrored(&self, axis: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|g| GaussianTerm {
                    center: axis - g.center,
                    ..*g
                })
                .collect(),
        }
    }

    /// Range of term centers, if any.
    pub fn center_range(&self) -> Option<(f64, f64)> {
        self.terms.iter().fold(None, |acc, g| match acc {
            None => Some((g.center, g.center)),
            Some((lo, hi)) => Some((lo.min(g.center), hi.max(g.center))),
        })
    }
}

/// Instantaneous field values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fields {
    pub pump: f64,
    pub stokes: f64,
    pub driving: f64,
}

/// Pump, Stokes and driving envelopes plus the Stokes phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSet {
    pub pump: Envelope,
    pub stokes: Envelope,
    pub driving: Envelope,
    /// Relative phase of the Stokes field (rad).
    pub stokes_phase: f64,
    /// Delay tau0 (ps).
    pub delay: f64,
    /// Width tau (ps).
    pub width: f64,
}

impl PulseSet {
    pub fn fields(&self, t: f64) -> Fields {
        Fields {
            pump: self.pump.value(t),
            stokes: self.stokes.value(t),
            driving: self.driving.value(t),
        }
    }

    /// Integration window `[lo - 8 tau, hi + 8 tau]` around the pulse centers.
    pub fn window(&self) -> (f64, f64) {
        let (lo, hi) = [&self.pump, &self.stokes, &self.driving]
            .iter()
            .filter_map(|e| e.center_range())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                (lo.min(a), hi.max(b))
            });
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
        let pad = TRUNCATION_WIDTHS * self.width;
        (lo - pad, hi + pad)
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            pump: self.pump.shifted(dt),
            stokes: self.stokes.shifted(dt),
            driving: self.driving.shifted(dt),
            ..self.clone()
        }
    }

    pub fn mirrored(&self, axis: f64) -> Self {
        Self {
            pump: self.pump.mirrored(axis),
            stokes: self.stokes.mirrored(axis),
            driving: self.driving.mirrored(axis),
            ..self.clone()
        }
    }

    /// All three amplitudes multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            pump: self.pump.scaled(k),
            stokes: self.stokes.scaled(k),
            driving: self.driving.scaled(k),
            ..self.clone()
        }
    }

    pub fn with_stokes_phase(&self, phase: f64) -> Self {
        Self {
            stokes_phase: phase,
            ..self.clone()
        }
    }
}

fn check_delay(tau0: f64) -> Result<()> {
    if tau0 >= 0.0 && tau0.is_finite() {
        Ok(())
    } else {
        Err(invalid("tau0", format!("must be >= 0, got {tau0}")))
    }
}

/// y-rotation pulses: driving at `-tau0`, pump at 0, Stokes at `+tau0`.
pub fn make_y_pulseset(amp_p: f64, amp_s: f64, amp_d: f64, tau0: f64, tau: f64) -> Result<PulseSet> {
    check_width(tau)?;
    check_delay(tau0)?;
    Ok(PulseSet {
        pump: Envelope::gaussian(amp_p, 0.0, tau)?,
        stokes: Envelope::gaussian(amp_s, tau0, tau)?,
        driving: Envelope::gaussian(amp_d, -tau0, tau)?,
        stokes_phase: 0.0,
        delay: tau0,
        width: tau,
    })
}

/// Fractional-STIRAP pulses: Stokes at 0, driving at `-tau0` plus a copy at 0,
/// pump off.
pub fn make_z_pulseset(amp_s: f64, amp_d: f64, tau0: f64, tau: f64, phi: f64) -> Result<PulseSet> {
    check_width(tau)?;
    check_delay(tau0)?;
    if !phi.is_finite() {
        return Err(invalid("phi", "must be finite"));
    }
    Ok(PulseSet {
        pump: Envelope::zero(),
        stokes: Envelope::gaussian(amp_s, 0.0, tau)?,
        driving: Envelope::sum(&[
            GaussianTerm {
                amp: amp_d,
                center: -tau0,
                width: tau,
            },
            GaussianTerm {
                amp: amp_d,
                center: 0.0,
                width: tau,
            },
        ])?,
        stokes_phase: phi,
        delay: tau0,
        width: tau,
    })
}
