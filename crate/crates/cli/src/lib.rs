//! Batch front end: config parsing, scenario dispatch, CSV output and the
//! run manifest.

pub mod config;
mod suite;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use holoqd::propagate::{Diagnostics, POSITIVITY_FLOOR};
use holoqd::qcore::{basis, cr, DensityMatrix};
use holoqd::scenarios::{
    qubit_density, run_initialization, run_readout, simulate_gate, sweep_beta, sweep_gamma_f, GateReport, SweepTable,
};
use log::{error, info};
use serde::Serialize;

pub use config::{parse_config, ConfigError, RunConfig, Scenario, DEFAULT_SOURCES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PHYSICS: i32 = 2;

pub const MANIFEST_FILE: &str = "manifest.json";
const MAX_TRACE_DRIFT: f64 = 1e-9;

const GAMMA_SIGN_NOTE: &str = "gamma_f_rad is the magnitude of the z-holonomy angle; \
the signed integral is negative (-pi/4 at large delay) and is not tabulated";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < limit,
            value,
            limit,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value > limit,
            value,
            limit,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct Emitted {
    outputs: Vec<String>,
    checks: Vec<Check>,
    notes: Vec<String>,
}

impl Emitted {
    fn write(&mut self, dir: &Path, name: &str, body: &str) -> std::io::Result<()> {
        fs::write(dir.join(name), body)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn lindblad(&mut self, label: &str, d: &Diagnostics) {
        self.checks.push(Check::below(
            format!("{label}: trace drift"),
            d.max_norm_drift,
            MAX_TRACE_DRIFT,
        ));
        self.checks.push(Check::above(
            format!("{label}: min eigenvalue"),
            d.min_eigenvalue,
            POSITIVITY_FLOOR,
        ));
    }
}

#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] holoqd::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl RunError {
    fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Model(holoqd::Error::InvalidParameter { .. } | holoqd::Error::NotNormalized { .. }) => {
                EXIT_CONFIG
            }
            RunError::Io(_) | RunError::Pool(_) => EXIT_CONFIG,
            RunError::Model(_) => EXIT_PHYSICS,
        }
    }
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub artifact: &'static str,
    pub version: &'static str,
    pub scenario: Option<&'static str>,
    pub status: &'static str,
    pub exit_code: i32,
    pub error: Option<String>,
    pub wall_clock_seconds: f64,
    pub config: Option<&'a RunConfig>,
    pub default_sources: Vec<(&'static str, &'static str)>,
    pub checks: Vec<Check>,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

impl<'a> Manifest<'a> {
    /// Manifest for a run that never got a usable config.
    pub fn config_failure(error: &str, seconds: f64) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            scenario: None,
            status: "config_error",
            exit_code: EXIT_CONFIG,
            error: Some(error.to_string()),
            wall_clock_seconds: seconds,
            config: None,
            default_sources: DEFAULT_SOURCES.to_vec(),
            checks: Vec::new(),
            outputs: vec![MANIFEST_FILE.to_string()],
            notes: Vec::new(),
        }
    }
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// CSV number format: 12 significant digits, scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn sweep_csv(header: &str, table: &SweepTable) -> String {
    let mut s = format!("{header}\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            num(r.tau0_over_tau),
            num(r.angle),
            num(r.angle / std::f64::consts::PI),
            num(r.quadrature_error)
        );
    }
    s
}

fn run_init(cfg: &RunConfig, dir: &Path, em: &mut Emitted) -> Result<(), RunError> {
    let mp = cfg.model();
    let rho0 = DensityMatrix::diagonal([cfg.init_p0, cfg.init_p1, 0.0, 0.0, 0.0])?;
    let rabi = cfg.init_rabi.unwrap_or(cfg.gamma);
    let run = run_initialization(cfg.polarization, &rho0, rabi, cfg.init_duration, cfg.init_stride, &mp)?;
    let mut s = String::from("t_ps,rho00,rho11,rho_aa,rho_e1e1,rho_e2e2,fidelity\n");
    for ((t, rho), f) in run.trajectory.iter().zip(&run.fidelity) {
        let p = rho.populations();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(t),
            num(p[basis::ZERO]),
            num(p[basis::ONE]),
            num(p[basis::ANC]),
            num(p[basis::E1]),
            num(p[basis::E2]),
            num(*f)
        );
    }
    em.write(dir, "init.csv", &s)?;
    em.lindblad("init", &run.trajectory.diagnostics);
    Ok(())
}

fn run_sweep_beta(cfg: &RunConfig, dir: &Path, em: &mut Emitted) -> Result<(), RunError> {
    let table = sweep_beta(&cfg.tau0_over_tau, &cfg.amplitudes(), cfg.tau, &cfg.quadrature())?;
    em.write(
        dir,
        "sweep_beta.csv",
        &sweep_csv("tau0_over_tau,beta_rad,beta_over_pi,quad_err", &table),
    )?;
    let drop = table
        .rows
        .windows(2)
        .map(|w| w[0].angle - w[1].angle)
        .fold(0.0, f64::max);
    em.checks
        .push(Check::below("beta non-decreasing (largest drop)", drop, 1e-9));
    Ok(())
}

fn run_sweep_gamma(cfg: &RunConfig, dir: &Path, em: &mut Emitted) -> Result<(), RunError> {
    let table = sweep_gamma_f(
        &cfg.tau0_over_tau,
        &cfg.amplitudes(),
        cfg.tau,
        &cfg.model(),
        &cfg.quadrature(),
    )?;
    em.write(
        dir,
        "sweep_gamma.csv",
        &sweep_csv("tau0_over_tau,gamma_f_rad,gamma_f_over_pi,quad_err", &table),
    )?;
    em.notes.push(GAMMA_SIGN_NOTE.to_string());
    Ok(())
}

fn gate_row(r: &GateReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{}\n",
        serde_json::to_value(r.variant)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        r.with_decoherence,
        num(r.fidelity),
        num(r.fidelity_sphere),
        num(r.leakage_final),
        num(r.holonomy_angle),
        num(r.holonomy_deviation),
        r.final_state_overlap.map(num).unwrap_or_default()
    )
}

fn run_gate(cfg: &RunConfig, dir: &Path, em: &mut Emitted) -> Result<(), RunError> {
    let params = cfg.gate_params();
    let sphere = cfg.sphere();
    let (clean_process, clean) = simulate_gate(cfg.gate, &params, false, &sphere)?;
    let noisy = if cfg.decoherence {
        Some(simulate_gate(cfg.gate, &params, true, &sphere)?)
    } else {
        None
    };

    let mut s = String::from(
        "variant,with_decoherence,fidelity,fidelity_sphere,leakage_final,holonomy_angle_rad,holonomy_deviation,final_state_overlap\n",
    );
    s += &gate_row(&clean);
    if let Some((_, r)) = &noisy {
        s += &gate_row(r);
    }
    em.write(dir, "gate.csv", &s)?;

    let (process, report) = noisy.as_ref().map_or((&clean_process, &clean), |(p, r)| (p, r));
    let mut s = String::from("input_row,input_col,output_row,output_col,re,im\n");
    for i in 0..2 {
        for j in 0..2 {
            let m = process.units[i][j];
            for a in 0..2 {
                for b in 0..2 {
                    let _ = writeln!(s, "{i},{j},{a},{b},{},{}", num(m[(a, b)].re), num(m[(a, b)].im));
                }
            }
        }
    }
    em.write(dir, "gate_process.csv", &s)?;
    let mut json = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    json.push('\n');
    em.write(dir, "gate_report.json", &json)?;

    for r in std::iter::once(&clean).chain(noisy.as_ref().map(|(_, r)| r)) {
        let label = if r.with_decoherence {
            "decoherence on"
        } else {
            "decoherence off"
        };
        em.checks
            .push(Check::below(format!("{label}: fidelity <= 1"), r.fidelity, 1.0 + 1e-9));
        em.lindblad(label, &r.diagnostics);
        em.notes.extend(r.warnings.iter().map(|w| format!("{label}: {w}")));
    }
    if let Some((_, r)) = &noisy {
        em.checks.push(Check::below(
            "decoherence does not raise fidelity",
            r.fidelity - clean.fidelity,
            1e-6,
        ));
    }
    em.notes.push(format!("loop closure: {}", clean.loop_closure));
    Ok(())
}

fn run_readout_scenario(cfg: &RunConfig, dir: &Path, em: &mut Emitted) -> Result<(), RunError> {
    let mp = cfg.model();
    let spin = qubit_density(cfg.readout_p0, cfg.readout_p1, cr(0.0));
    let rabi = cfg.readout_rabi.unwrap_or(cfg.gamma);
    let r = run_readout(&spin, rabi, cfg.readout_duration, &mp)?;
    let s = format!(
        "p0,p1,expected_photons,photons_to_zero,photons_to_one,driven_population,shelving_complete\n{},{},{},{},{},{},{}\n",
        num(cfg.readout_p0),
        num(cfg.readout_p1),
        num(r.expected_photons),
        num(r.photons_to_zero),
        num(r.photons_to_one),
        num(r.driven_population),
        r.shelving_complete
    );
    em.write(dir, "readout.csv", &s)?;
    em.lindblad("readout", &r.diagnostics);
    em.checks.push(Check::below(
        "shelving complete (driven population)",
        r.driven_population,
        holoqd::scenarios::SHELVING_THRESHOLD,
    ));
    em.notes
        .push("photons are counted from both recombination channels".to_string());
    Ok(())
}

fn run_validate(cfg: &RunConfig, dir: &Path, em: &mut Emitted) -> Result<(), RunError> {
    let checks = suite::run(cfg)?;
    let mut s = String::from("check,passed,value,limit\n");
    for c in &checks {
        let _ = writeln!(s, "{},{},{},{}", c.name, c.passed, num(c.value), num(c.limit));
    }
    em.write(dir, "validate.csv", &s)?;
    em.checks.extend(checks);
    Ok(())
}

fn dispatch(scenario: Scenario, cfg: &RunConfig, em: &mut Emitted) -> Result<(), RunError> {
    cfg.check()?;
    let dir = cfg.out_dir.as_path();
    fs::create_dir_all(dir)?;
    let mut body = || match scenario {
        Scenario::Init => run_init(cfg, dir, em),
        Scenario::SweepBeta => run_sweep_beta(cfg, dir, em),
        Scenario::SweepGamma => run_sweep_gamma(cfg, dir, em),
        Scenario::Gate => run_gate(cfg, dir, em),
        Scenario::Readout => run_readout_scenario(cfg, dir, em),
        Scenario::Validate => run_validate(cfg, dir, em),
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(body),
        None => body(),
    }
}

/// Runs the configured scenario, writes its outputs and the manifest, and
/// returns the process exit status.
pub fn run(cfg: &RunConfig) -> i32 {
    let clock = Instant::now();
    let mut em = Emitted::default();
    let result = match cfg.scenario {
        Some(s) => dispatch(s, cfg, &mut em),
        None => Err(ConfigError::MissingScenario.into()),
    };
    let failed_checks: Vec<&Check> = em.checks.iter().filter(|c| !c.passed).collect();
    let (status, exit_code, err) = match &result {
        Err(e) => {
            let code = e.exit_code();
            let status = if code == EXIT_CONFIG {
                "config_error"
            } else {
                "physics_error"
            };
            (status, code, Some(e.to_string()))
        }
        Ok(()) if !failed_checks.is_empty() => ("check_failed", EXIT_PHYSICS, None),
        Ok(()) => ("ok", EXIT_OK, None),
    };
    for c in &failed_checks {
        error!("check failed: {} (value {:e}, limit {:e})", c.name, c.value, c.limit);
    }
    if let Some(e) = &err {
        error!("{e}");
    }
    em.outputs.push(MANIFEST_FILE.to_string());
    let manifest = Manifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.scenario.map(Scenario::name),
        status,
        exit_code,
        error: err,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        config: Some(cfg),
        default_sources: DEFAULT_SOURCES.to_vec(),
        checks: em.checks,
        outputs: em.outputs,
        notes: em.notes,
    };
    match write_manifest(&cfg.out_dir, &manifest) {
        Ok(path) => info!("manifest written to {}", path.display()),
        Err(e) => {
            error!("could not write manifest: {e}");
            return exit_code.max(EXIT_CONFIG);
        }
    }
    exit_code
}
