//! Experiment configuration files.
//!
//! A config is a TOML document with a top-level `schema_version = 1` and the
//! flat sections `[plant]`, `[warp]`, `[forcing]`, `[controller]`,
//! `[certificate]`, `[sim]`, `[checks]` and `[output]`. Unknown keys are
//! rejected. See `configs/example_sec5.toml` for every key.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use ptstab_core::controller::Safeguards;
use ptstab_core::plant::{uniform_grid, Sample};
use ptstab_core::{
    example_certificate, ControllerConfig, ForcingConfig, GainBasis, GateShape, KnownStructure, LyapunovCertificate,
    PlantDynamics, TimeWarp, Warp,
};
use ptstab_plant::{ExamplePlant, GroundTruth, IntegratorChain};
use ptstab_sim::SimConfig;
use serde::Deserialize;
use thiserror::Error;

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: i64,
    plant: RawPlant,
    warp: RawWarp,
    forcing: RawForcing,
    controller: RawController,
    certificate: RawCertificate,
    sim: RawSim,
    #[serde(default)]
    checks: RawChecks,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    kind: String,
    theta_a: Option<f64>,
    theta_b: Option<f64>,
    theta_c: Option<f64>,
    theta_d: Option<f64>,
    c_beta: Option<f64>,
    sigma: Option<f64>,
    order: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWarp {
    t_prescribed: f64,
    t_effective: f64,
    a0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForcing {
    c_gamma1: f64,
    c_tilde_gamma1: f64,
    c_gamma2: f64,
    c_tilde_gamma2: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    zeta0: f64,
    zeta_floor: f64,
    c_theta: f64,
    c_theta1: f64,
    epsilon_r: f64,
    #[serde(default)]
    sign_smoothing: f64,
    #[serde(default)]
    gate: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    source: String,
    a_tilde_c: Option<f64>,
    file: Option<String>,
    p: Option<Vec<Vec<f64>>>,
    gains: Option<Vec<f64>>,
    basis: Option<String>,
    nu: Option<f64>,
    nu_lower: Option<f64>,
    nu_upper: Option<f64>,
}

impl RawCertificate {
    fn explicit(&self) -> RawExplicitCert {
        RawExplicitCert {
            p: self.p.clone(),
            gains: self.gains.clone(),
            basis: self.basis.clone(),
            nu: self.nu,
            nu_lower: self.nu_lower,
            nu_upper: self.nu_upper,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExplicitCert {
    p: Option<Vec<Vec<f64>>>,
    gains: Option<Vec<f64>>,
    basis: Option<String>,
    nu: Option<f64>,
    nu_lower: Option<f64>,
    nu_upper: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    d_tau: Option<f64>,
    tau_max: Option<f64>,
    x0: Vec<f64>,
    z0: Vec<f64>,
    r0: Option<f64>,
    theta_hat0: Option<f64>,
    theta1_hat0: Option<f64>,
    dead_zone: Option<f64>,
    r_cap: Option<f64>,
    record_stride: Option<usize>,
    check_time: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChecks {
    grid_lo: f64,
    grid_hi: f64,
    grid_points: usize,
}

impl Default for RawChecks {
    fn default() -> Self {
        Self {
            grid_lo: -5.0,
            grid_hi: 5.0,
            grid_points: 21,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

/// A plant that can be simulated and whose true constants are known to the monitors.
pub trait SimPlant: PlantDynamics + GroundTruth {}
impl<T: PlantDynamics + GroundTruth> SimPlant for T {}

#[derive(Debug, Clone, PartialEq)]
pub enum PlantChoice {
    Example(ExamplePlant),
    Chain(IntegratorChain),
}

impl PlantChoice {
    pub fn as_sim(&self) -> &dyn SimPlant {
        match self {
            PlantChoice::Example(p) => p,
            PlantChoice::Chain(p) => p,
        }
    }
}

/// Sampling box used by `check-assumptions` and certificate verification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn samples(&self, dim: usize) -> Vec<Sample> {
        uniform_grid(self.lo, self.hi, self.points, dim, 0.0)
    }
}

/// A fully validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub plant: PlantChoice,
    pub ctrl: ControllerConfig,
    pub sim: SimConfig,
    pub grid: GridSpec,
    pub output_dir: PathBuf,
    /// The parsed document, kept so sweeps can apply overrides.
    pub raw: toml::Table,
    /// Directory of the config file; relative paths resolve against it.
    pub base_dir: PathBuf,
}

pub fn load_config(path: &Path) -> Result<Experiment, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&text, &base)
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<Experiment, ConfigError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    build(table, base_dir)
}

/// Validates a parsed document and constructs every component.
pub fn build(table: toml::Table, base_dir: &Path) -> Result<Experiment, ConfigError> {
    let raw: RawConfig = table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let mut errs = Vec::new();

    if raw.schema_version != SCHEMA_VERSION {
        errs.push(format!(
            "schema_version: expected {SCHEMA_VERSION}, got {}",
            raw.schema_version
        ));
    }

    let plant = build_plant(&raw.plant, &mut errs);

    let warp = TimeWarp::new(raw.warp.t_prescribed, raw.warp.t_effective, raw.warp.a0);
    if let Err(e) = &warp {
        errs.push(format!("warp: {e}"));
    }

    let f = &raw.forcing;
    let forcing = ForcingConfig {
        c_gamma1: f.c_gamma1,
        c_tilde_gamma1: f.c_tilde_gamma1,
        c_gamma2: f.c_gamma2,
        c_tilde_gamma2: f.c_tilde_gamma2,
    };

    let gate = match raw.controller.gate.as_deref() {
        None | Some("linear") => GateShape::LinearRamp,
        Some("smoothstep") => GateShape::Smoothstep,
        Some(other) => {
            errs.push(format!("controller.gate: expected \"linear\" or \"smoothstep\", got {other:?}"));
            GateShape::LinearRamp
        }
    };

    let cert = build_certificate(&raw.certificate, base_dir, &mut errs);

    let (plant, warp, cert) = match (plant, warp, cert) {
        (Some(p), Ok(w), Some(c)) => (p, w, c),
        _ => {
            // the remaining checks need these; report what we have so far
            // together with the constant-level problems
            let c = &raw.controller;
            for v in forcing.violations() {
                errs.push(format!("forcing: {v}"));
            }
            for (name, v) in [
                ("zeta0", c.zeta0),
                ("zeta_floor", c.zeta_floor),
                ("c_theta", c.c_theta),
                ("c_theta1", c.c_theta1),
                ("epsilon_r", c.epsilon_r),
            ] {
                if !(v.is_finite() && v > 0.0) {
                    errs.push(format!("controller: {name} must be positive, got {v}"));
                }
            }
            return Err(ConfigError::Invalid(errs));
        }
    };

    let ctrl = ControllerConfig {
        cert,
        warp,
        forcing,
        zeta0: raw.controller.zeta0,
        zeta_floor: raw.controller.zeta_floor,
        c_theta: raw.controller.c_theta,
        c_theta1: raw.controller.c_theta1,
        epsilon_r: raw.controller.epsilon_r,
        sign_smoothing: raw.controller.sign_smoothing,
        gate,
    };
    for v in ctrl.violations() {
        let section = if v.starts_with("c_gamma") || v.starts_with("c_tilde") {
            "forcing"
        } else {
            "controller"
        };
        errs.push(format!("{section}: {v}"));
    }
    let known = plant.as_sim();
    if ctrl.cert.order() != known.order() {
        errs.push(format!(
            "certificate: order {} does not match plant order {}",
            ctrl.cert.order(),
            known.order()
        ));
    }

    let s = &raw.sim;
    let default_tau_max = warp.warp(warp.t_prescribed() * (1.0 - 1e-6)).unwrap_or(0.0);
    let sim = SimConfig {
        d_tau: s.d_tau.unwrap_or(1e-4),
        tau_max: s.tau_max.unwrap_or(default_tau_max),
        x0: s.x0.clone(),
        z0: s.z0.clone(),
        r0: s.r0.unwrap_or(1.0),
        theta_hat0: s.theta_hat0.unwrap_or(1.0),
        theta1_hat0: s.theta1_hat0.unwrap_or(0.0),
        guard: Safeguards {
            dead_zone: s.dead_zone.unwrap_or(0.0),
            r_cap: s.r_cap,
        },
        record_stride: s.record_stride.unwrap_or(1),
        force_zero_input: false,
        check_time: s.check_time.unwrap_or(0.975 * warp.t_prescribed()),
    };
    for v in sim.violations(&warp, known.order(), known.appended_order()) {
        errs.push(format!("sim: {v}"));
    }
    if !(sim.check_time >= 0.0 && sim.check_time < warp.terminal_time()) {
        errs.push(format!(
            "sim: check_time must lie in [0, {}), got {}",
            warp.terminal_time(),
            sim.check_time
        ));
    }

    let c = &raw.checks;
    if !(c.grid_lo.is_finite() && c.grid_hi.is_finite() && c.grid_lo <= c.grid_hi) {
        errs.push(format!("checks: need grid_lo <= grid_hi, got {} and {}", c.grid_lo, c.grid_hi));
    }
    if c.grid_points == 0 {
        errs.push("checks: grid_points must be >= 1".to_string());
    }

    if !errs.is_empty() {
        return Err(ConfigError::Invalid(errs));
    }
    Ok(Experiment {
        plant,
        ctrl,
        sim,
        grid: GridSpec {
            lo: c.grid_lo,
            hi: c.grid_hi,
            points: c.grid_points,
        },
        output_dir: PathBuf::from(raw.output.dir.unwrap_or_else(|| "out".to_string())),
        raw: table,
        base_dir: base_dir.to_path_buf(),
    })
}

fn build_plant(p: &RawPlant, errs: &mut Vec<String>) -> Option<PlantChoice> {
    match p.kind.as_str() {
        "example" => {
            if p.order.is_some() {
                errs.push("plant: order is fixed at 3 for the example plant".to_string());
            }
            let d = ExamplePlant::default();
            let plant = ExamplePlant {
                theta_a: p.theta_a.unwrap_or(d.theta_a),
                theta_b: p.theta_b.unwrap_or(d.theta_b),
                theta_c: p.theta_c.unwrap_or(d.theta_c),
                theta_d: p.theta_d.unwrap_or(d.theta_d),
                c_beta: p.c_beta.unwrap_or(d.c_beta),
                sigma: p.sigma.unwrap_or(d.sigma),
            };
            let before = errs.len();
            for (name, v) in [
                ("theta_a", plant.theta_a),
                ("theta_b", plant.theta_b),
                ("theta_c", plant.theta_c),
                ("theta_d", plant.theta_d),
            ] {
                if !v.is_finite() {
                    errs.push(format!("plant: {name} must be finite, got {v}"));
                }
            }
            if !(plant.c_beta.is_finite() && plant.c_beta > 0.0) {
                errs.push(format!("plant: c_beta must be positive, got {}", plant.c_beta));
            }
            if !(plant.sigma.is_finite() && plant.sigma > 0.0) {
                errs.push(format!("plant: sigma must be positive, got {}", plant.sigma));
            }
            (errs.len() == before).then_some(PlantChoice::Example(plant))
        }
        "chain" => {
            let extra = [p.theta_a, p.theta_b, p.theta_c, p.theta_d, p.c_beta, p.sigma];
            if extra.iter().any(Option::is_some) {
                errs.push("plant: the chain plant takes only `order`".to_string());
            }
            match p.order {
                Some(n) if n >= 2 => Some(PlantChoice::Chain(IntegratorChain::new(n))),
                Some(n) => {
                    errs.push(format!("plant: chain order must be >= 2, got {n}"));
                    None
                }
                None => {
                    errs.push("plant: chain requires `order`".to_string());
                    None
                }
            }
        }
        other => {
            errs.push(format!("plant: kind must be \"example\" or \"chain\", got {other:?}"));
            None
        }
    }
}

fn build_certificate(c: &RawCertificate, base_dir: &Path, errs: &mut Vec<String>) -> Option<LyapunovCertificate> {
    match c.source.as_str() {
        "example" => {
            let Some(a) = c.a_tilde_c else {
                errs.push("certificate: source \"example\" requires a_tilde_c".to_string());
                return None;
            };
            example_certificate(a).map_err(|e| errs.push(format!("certificate: {e}"))).ok()
        }
        "inline" => explicit_certificate(&c.explicit(), errs),
        "file" => {
            let Some(rel) = &c.file else {
                errs.push("certificate: source \"file\" requires file".to_string());
                return None;
            };
            let path = base_dir.join(rel);
            let text = match fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    errs.push(format!("certificate: cannot read {}: {e}", path.display()));
                    return None;
                }
            };
            match toml::from_str::<RawExplicitCert>(&text) {
                Ok(raw) => explicit_certificate(&raw, errs),
                Err(e) => {
                    errs.push(format!("certificate file {}: {e}", path.display()));
                    None
                }
            }
        }
        other => {
            errs.push(format!(
                "certificate: source must be \"example\", \"inline\" or \"file\", got {other:?}"
            ));
            None
        }
    }
}

fn explicit_certificate(c: &RawExplicitCert, errs: &mut Vec<String>) -> Option<LyapunovCertificate> {
    let before = errs.len();
    let mut need = |name: &str, present: bool| {
        if !present {
            errs.push(format!("certificate: missing {name}"));
        }
    };
    need("p", c.p.is_some());
    need("gains", c.gains.is_some());
    need("nu", c.nu.is_some());
    need("nu_lower", c.nu_lower.is_some());
    need("nu_upper", c.nu_upper.is_some());
    let basis = match c.basis.as_deref() {
        None | Some("phi23") => GainBasis::Phi23,
        Some("constant") => GainBasis::Constant,
        Some(other) => {
            errs.push(format!("certificate: basis must be \"phi23\" or \"constant\", got {other:?}"));
            GainBasis::Phi23
        }
    };
    if errs.len() != before {
        return None;
    }
    let rows = c.p.as_ref()?;
    let p = match matrix_from_rows(rows) {
        Ok(p) => p,
        Err(e) => {
            errs.push(format!("certificate: {e}"));
            return None;
        }
    };
    LyapunovCertificate::new(
        rows.len() + 1,
        p,
        c.gains.clone()?,
        basis,
        c.nu?,
        c.nu_lower?,
        c.nu_upper?,
    )
    .map_err(|e| errs.push(format!("certificate: {e}")))
    .ok()
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let m = rows.len();
    if m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err("p must be a non-empty square matrix".to_string());
    }
    Ok(DMatrix::from_row_slice(m, m, &rows.concat()))
}

/// Sets a dotted key such as `sim.x0` in a parsed document.
pub fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for s in sections {
        let entry = cur
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(ConfigError::Parse(format!("override {key}: {s} is not a section"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Splits `v1,v2,...` at top-level commas (commas inside `[...]` stay) and
/// parses each item as a TOML value; bare words become strings.
pub fn parse_values(s: &str) -> Result<Vec<toml::Value>, ConfigError> {
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                items.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(&s[start..]);
    items
        .into_iter()
        .map(|item| {
            let item = item.trim();
            if item.is_empty() {
                return Err(ConfigError::Parse(format!("empty value in {s:?}")));
            }
            let doc = format!("v = {item}");
            match toml::from_str::<toml::Table>(&doc) {
                Ok(mut t) => Ok(t.remove("v").expect("key present")),
                Err(_) => Ok(toml::Value::String(item.to_string())),
            }
        })
        .collect()
}

/// Every combination of the overrides, in row-major order.
pub fn cartesian(overrides: &[(String, Vec<toml::Value>)]) -> Vec<Vec<(String, toml::Value)>> {
    let mut out: Vec<Vec<(String, toml::Value)>> = vec![vec![]];
    for (key, values) in overrides {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for combo in &out {
            for v in values {
                let mut c = combo.clone();
                c.push((key.clone(), v.clone()));
                next.push(c);
            }
        }
        out = next;
    }
    out
}

impl Experiment {
    pub fn with_overrides(&self, overrides: &[(String, toml::Value)]) -> Result<Experiment, ConfigError> {
        let mut table = self.raw.clone();
        for (k, v) in overrides {
            apply_override(&mut table, k, v.clone())?;
        }
        build(table, &self.base_dir)
    }

    pub fn known(&self) -> &dyn KnownStructure {
        self.plant.as_sim()
    }
}
