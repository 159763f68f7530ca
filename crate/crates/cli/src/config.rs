//! Flat TOML run configuration.

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use holoqd::model::ModelParams;
use holoqd::quadrature::QuadratureSpec;
use holoqd::scenarios::{Amplitudes, GateParams, GateVariant, Polarization, SphereSpec, Tolerances, MIN_SPHERE_POINTS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Init,
    SweepBeta,
    SweepGamma,
    Gate,
    Readout,
    Validate,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Init => "init",
            Scenario::SweepBeta => "sweep-beta",
            Scenario::SweepGamma => "sweep-gamma",
            Scenario::Gate => "gate",
            Scenario::Readout => "readout",
            Scenario::Validate => "validate",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Malformed(String),
    #[error("config key `{key}`{}: {reason}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Range {
        key: &'static str,
        line: Option<usize>,
        reason: String,
    },
    #[error("no scenario given (set `scenario` or pass one on the command line)")]
    MissingScenario,
}

/// Every key is optional; absent keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<Scenario>,
    pub out_dir: PathBuf,

    /// Excited-state Zeeman splitting, rad/ps.
    pub delta: f64,
    pub detuning_common: f64,
    /// Recombination rate per channel, 1/ps.
    pub gamma: f64,
    pub gamma_hh: f64,
    pub gamma_ee: f64,

    pub amp_pump: f64,
    pub amp_stokes: f64,
    pub amp_driving: f64,
    /// Gaussian width, ps.
    pub tau: f64,

    /// Delay grid for the sweeps, in units of `tau`.
    pub tau0_over_tau: Vec<f64>,

    pub gate: GateVariant,
    pub y_delay: f64,
    pub return_delay: f64,
    pub y_target: f64,
    pub z_delay: f64,
    pub x_leg_delay: Option<f64>,
    pub phase: f64,
    pub decoherence: bool,
    pub sphere_points: usize,

    pub polarization: Polarization,
    /// Initial qubit populations for `init`.
    pub init_p0: f64,
    pub init_p1: f64,
    /// Drive Rabi frequency; defaults to `gamma`.
    pub init_rabi: Option<f64>,
    pub init_duration: f64,
    pub init_stride: f64,

    pub readout_p0: f64,
    pub readout_p1: f64,
    pub readout_rabi: Option<f64>,
    pub readout_duration: f64,

    pub rel_tol: f64,
    pub abs_tol: f64,
    pub quad_abs_tol: f64,

    /// Rotates the sphere quadrature point set.
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mp = ModelParams::default();
        let tol = Tolerances::default();
        Self {
            scenario: None,
            out_dir: PathBuf::from("out"),
            delta: mp.delta,
            detuning_common: mp.detuning_common,
            gamma: mp.gamma,
            gamma_hh: mp.gamma_hh,
            gamma_ee: mp.gamma_ee,
            amp_pump: 0.5,
            amp_stokes: 0.5,
            amp_driving: 0.5,
            tau: 100.0,
            tau0_over_tau: (0..=20).map(|k| k as f64 * 0.5).collect(),
            gate: GateVariant::YClosedLoop,
            y_delay: 1.5,
            return_delay: 0.7,
            y_target: FRAC_PI_2,
            z_delay: 6.5,
            x_leg_delay: None,
            phase: FRAC_PI_2,
            decoherence: true,
            sphere_points: 1000,
            polarization: Polarization::SigmaMinus,
            init_p0: 0.5,
            init_p1: 0.5,
            init_rabi: None,
            init_duration: 40_000.0,
            init_stride: 20.0,
            readout_p0: 0.5,
            readout_p1: 0.5,
            readout_rabi: None,
            readout_duration: 100_000.0,
            rel_tol: tol.rel_tol,
            abs_tol: tol.abs_tol,
            quad_abs_tol: QuadratureSpec::default().abs_tol,
            seed: None,
            threads: None,
        }
    }
}

/// Where each default value comes from.
pub const DEFAULT_SOURCES: &[(&str, &str)] = &[
    ("delta", "|g_x^e| mu_B B_x / hbar with g_x^e = -0.21, B_x = 55 mT"),
    ("gamma", "exciton lifetime 1/(2 gamma) = 800 ps"),
    ("gamma_hh", "hole spin-flip time 1 ms"),
    ("gamma_ee", "excited-state spin-flip time 1 ms"),
    ("amp_pump", "peak Rabi frequency 0.5 rad/ps (Omega^0 tau = 50)"),
    ("amp_stokes", "peak Rabi frequency 0.5 rad/ps (Omega^0 tau = 50)"),
    ("amp_driving", "peak Rabi frequency 0.5 rad/ps (Omega^0 tau = 50)"),
    ("tau", "pulse width 100 ps"),
    ("y_delay", "R_y(pi/2) delay 1.5 tau"),
    ("z_delay", "R_z(pi/2) delay 6.5 tau"),
    (
        "return_delay",
        "pump-off return pass 0.7 tau, chosen for negligible leakage",
    ),
    ("init_rabi", "drive at 1.0 gamma"),
    ("readout_rabi", "drive at 1.0 gamma"),
];

fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

/// Parses and range-checks a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
    cfg.check().map_err(|e| match e {
        ConfigError::Range { key, reason, .. } => ConfigError::Range {
            key,
            line: line_of(text, key),
            reason,
        },
        other => other,
    })?;
    Ok(cfg)
}

fn range(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key,
        line: None,
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), ConfigError> {
        let positive = [
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("amp_stokes", self.amp_stokes),
            ("amp_driving", self.amp_driving),
            ("tau", self.tau),
            ("init_duration", self.init_duration),
            ("readout_duration", self.readout_duration),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("quad_abs_tol", self.quad_abs_tol),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(range(key, format!("must be a finite value > 0, got {v}")));
            }
        }
        let non_negative = [
            ("gamma_hh", self.gamma_hh),
            ("gamma_ee", self.gamma_ee),
            ("amp_pump", self.amp_pump),
            ("y_delay", self.y_delay),
            ("return_delay", self.return_delay),
            ("z_delay", self.z_delay),
            ("x_leg_delay", self.x_leg_delay.unwrap_or(0.0)),
            ("init_stride", self.init_stride),
            ("init_rabi", self.init_rabi.unwrap_or(0.0)),
            ("readout_rabi", self.readout_rabi.unwrap_or(0.0)),
        ];
        for (key, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(range(key, format!("must be a finite value >= 0, got {v}")));
            }
        }
        for (key, v) in [
            ("detuning_common", self.detuning_common),
            ("phase", self.phase),
            ("y_target", self.y_target),
        ] {
            if !v.is_finite() {
                return Err(range(key, "must be finite"));
            }
        }
        for (key, v) in [
            ("init_p0", self.init_p0),
            ("init_p1", self.init_p1),
            ("readout_p0", self.readout_p0),
            ("readout_p1", self.readout_p1),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(range(key, format!("must lie in [0, 1], got {v}")));
            }
        }
        if ((self.init_p0 + self.init_p1) - 1.0).abs() > 1e-9 {
            return Err(range("init_p1", "init_p0 + init_p1 must equal 1"));
        }
        if ((self.readout_p0 + self.readout_p1) - 1.0).abs() > 1e-9 {
            return Err(range("readout_p1", "readout_p0 + readout_p1 must equal 1"));
        }
        if self.tau0_over_tau.is_empty() {
            return Err(range("tau0_over_tau", "list is empty"));
        }
        if self.tau0_over_tau.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(range("tau0_over_tau", "entries must be finite and >= 0"));
        }
        if self.tau0_over_tau.windows(2).any(|w| w[1] <= w[0]) {
            return Err(range("tau0_over_tau", "entries must be strictly increasing"));
        }
        if self.sphere_points < MIN_SPHERE_POINTS {
            return Err(range(
                "sphere_points",
                format!("need at least {MIN_SPHERE_POINTS}, got {}", self.sphere_points),
            ));
        }
        if self.threads == Some(0) {
            return Err(range("threads", "must be >= 1"));
        }
        Ok(())
    }

    pub fn model(&self) -> ModelParams {
        ModelParams {
            delta: self.delta,
            detuning_common: self.detuning_common,
            gamma: self.gamma,
            gamma_hh: self.gamma_hh,
            gamma_ee: self.gamma_ee,
        }
    }

    pub fn amplitudes(&self) -> Amplitudes {
        Amplitudes {
            pump: self.amp_pump,
            stokes: self.amp_stokes,
            driving: self.amp_driving,
        }
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
        }
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            abs_tol: self.quad_abs_tol,
            ..QuadratureSpec::default()
        }
    }

    pub fn sphere(&self) -> SphereSpec {
        SphereSpec {
            points: self.sphere_points,
            seed: self.seed,
        }
    }

    pub fn gate_params(&self) -> GateParams {
        GateParams {
            amps: self.amplitudes(),
            tau: self.tau,
            y_delay: self.y_delay,
            return_delay: self.return_delay,
            y_target: self.y_target,
            z_delay: self.z_delay,
            x_leg_delay: self.x_leg_delay,
            phase: self.phase,
            model: self.model(),
            tolerances: self.tolerances(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("scenario = \"sweep-gamma\"\n").unwrap();
        assert_eq!(cfg.scenario, Some(Scenario::SweepGamma));
        assert_eq!(cfg.amp_stokes, 0.5);
        assert_eq!(cfg.tau, 100.0);
        assert_eq!(cfg.delta, 1.016e-3);
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn negative_delta_names_key_and_line() {
        let err = parse_config("tau = 100.0\ndelta = -1.0\n").unwrap_err();
        match &err {
            ConfigError::Range { key, line, .. } => {
                assert_eq!(*key, "delta");
                assert_eq!(*line, Some(2));
            }
            other => panic!("{other:?}"),
        }
        assert!(err.to_string().contains("delta"));
    }

    #[test]
    fn unknown_key_rejected_by_name() {
        let err = parse_config("foo = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Malformed(_)));
        assert!(err.to_string().contains("foo"));
    }

    #[test]
    fn malformed_document_reports_line() {
        let err = parse_config("tau = 100.0\ngamma = = 2\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn sweep_grid_must_increase() {
        let err = parse_config("tau0_over_tau = [0.0, 2.0, 1.0]").unwrap_err();
        assert!(matches!(
            err,
            ConfigError::Range {
                key: "tau0_over_tau",
                ..
            }
        ));
    }

    #[test]
    fn snake_case_variant_names() {
        let cfg = parse_config("gate = \"x_composite\"\npolarization = \"sigma_plus\"").unwrap();
        assert_eq!(cfg.gate, GateVariant::XComposite);
        assert_eq!(cfg.polarization, Polarization::SigmaPlus);
    }
}
