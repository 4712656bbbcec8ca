//! Scenario configuration: JSON schema, semantic validation and sweeps.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use squeezelab_core::SqueezeParams;

/// Largest displacement the Fock oracle accepts.
pub const ENVELOPE_ALPHA: f64 = 2.0;
/// Largest squeeze factor the Fock oracle accepts.
pub const ENVELOPE_R: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    SingleArm,
    TwoArm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    Homodyne,
    Su11Readout,
    DoubleHomodyne,
    DoubleDirect,
    Su11TwoArmReadout,
    BoundOnly,
}

impl Detection {
    pub fn name(self) -> &'static str {
        match self {
            Detection::Homodyne => "homodyne",
            Detection::Su11Readout => "su11_readout",
            Detection::DoubleHomodyne => "double_homodyne",
            Detection::DoubleDirect => "double_direct",
            Detection::Su11TwoArmReadout => "su11_two_arm_readout",
            Detection::BoundOnly => "bound_only",
        }
    }

    fn topology(self) -> Option<Topology> {
        match self {
            Detection::Homodyne | Detection::Su11Readout => Some(Topology::SingleArm),
            Detection::DoubleHomodyne | Detection::DoubleDirect | Detection::Su11TwoArmReadout => Some(Topology::TwoArm),
            Detection::BoundOnly => None,
        }
    }
}

/// Squeezer given by `r` or by `r_db` (decibels); `theta` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl SqueezeSpec {
    /// Signed squeeze factor. Call only on validated specs.
    pub fn factor(&self) -> f64 {
        match (self.r, self.r_db) {
            (Some(r), _) => r,
            (None, Some(db)) => squeezelab_core::gaussian::db_to_r(db),
            (None, None) => 0.0,
        }
    }

    pub fn params(&self, default_theta: f64) -> squeezelab_core::Result<SqueezeParams> {
        SqueezeParams::new(self.factor(), self.theta.unwrap_or(default_theta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preparation {
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sq1: Option<SqueezeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sq2: Option<SqueezeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub su11_prep: Option<SqueezeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionParams {
    #[serde(default, rename = "alphaR", skip_serializing_if = "Option::is_none")]
    pub alpha_r: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub big_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vartheta: Option<f64>,
    #[serde(default, rename = "phiOffset", skip_serializing_if = "Option::is_none")]
    pub phi_offset: Option<f64>,
}

impl DetectionParams {
    fn is_empty(&self) -> bool {
        *self == DetectionParams::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// Dotted path of the swept number, e.g. `preparation.sq2.r`.
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub steps: u64,
    #[serde(default)]
    pub scale: Scale,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps.max(1) as usize;
        if n == 1 {
            return vec![self.from];
        }
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == n - 1 {
                    return self.to;
                }
                match self.scale {
                    Scale::Linear => self.from + (self.to - self.from) * t,
                    Scale::Log => (self.from.ln() + (self.to.ln() - self.from.ln()) * t).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: Topology,
    pub preparation: Preparation,
    pub detection: Detection,
    #[serde(default, rename = "detectionParams", skip_serializing_if = "DetectionParams::is_empty")]
    pub detection_params: DetectionParams,
    pub sweep: Sweep,
    #[serde(default)]
    pub oracle: OracleConfig,
}

/// One problem found in a configuration, located by its JSON path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config is not valid JSON: {0}")]
    Json(serde_json::Error),
    #[error("config does not match the schema at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid config:\n{}", list(.0))]
    Invalid(Vec<Violation>),
    #[error("scenario outside the oracle envelope:\n{}", list(.0))]
    Envelope(Vec<Violation>),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

/// Numeric leaves a sweep may drive.
pub const SWEEP_PATHS: &[&str] = &[
    "preparation.alpha",
    "preparation.zeta",
    "preparation.sq1.r",
    "preparation.sq1.r_db",
    "preparation.sq1.theta",
    "preparation.sq2.r",
    "preparation.sq2.r_db",
    "preparation.sq2.theta",
    "preparation.su11_prep.r",
    "preparation.su11_prep.r_db",
    "preparation.su11_prep.theta",
    "detectionParams.alphaR",
    "detectionParams.R",
    "detectionParams.vartheta",
    "detectionParams.phiOffset",
];

/// A parsed configuration with one fully resolved scenario per sweep point.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub points: Vec<(f64, ScenarioConfig)>,
}

fn typed(value: Value) -> Result<ScenarioConfig, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn set_path(value: &mut Value, path: &str, x: f64) {
    let mut cur = value;
    for key in path.split('.') {
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        cur = cur.as_object_mut().expect("object").entry(key).or_insert(Value::Null);
    }
    *cur = Value::from(x);
}

/// Parses, validates and expands a configuration.
pub fn load(bytes: &[u8]) -> Result<LoadedConfig, ConfigError> {
    let raw: Value = serde_json::from_slice(bytes).map_err(ConfigError::Json)?;
    let config = typed(raw.clone())?;
    let mut violations = validate_sweep(&config.sweep);
    let sweep_ok = violations.is_empty();
    violations.extend(validate_point(&config));
    let mut points = Vec::new();
    if sweep_ok {
        for x in config.sweep.values() {
            let mut v = raw.clone();
            set_path(&mut v, &config.sweep.parameter, x);
            let point = typed(v)?;
            for found in validate_point(&point) {
                if !violations.contains(&found) {
                    violations.push(found);
                }
            }
            points.push((x, point));
        }
    }
    if !violations.is_empty() {
        return Err(ConfigError::Invalid(violations));
    }
    Ok(LoadedConfig { config, points })
}

fn push(v: &mut Vec<Violation>, path: &str, message: impl Into<String>) {
    v.push(Violation {
        path: path.to_string(),
        message: message.into(),
    });
}

fn validate_sweep(s: &Sweep) -> Vec<Violation> {
    let mut v = Vec::new();
    if !SWEEP_PATHS.contains(&s.parameter.as_str()) {
        push(&mut v, "sweep.parameter", format!("`{}` is not a sweepable parameter (one of {})", s.parameter, SWEEP_PATHS.join(", ")));
    }
    if s.steps < 1 {
        push(&mut v, "sweep.steps", "must be at least 1");
    }
    if !s.from.is_finite() || !s.to.is_finite() {
        push(&mut v, "sweep", "from and to must be finite");
    } else if s.from > s.to {
        push(&mut v, "sweep", format!("from ({}) must not exceed to ({})", s.from, s.to));
    } else if s.scale == Scale::Log && s.from <= 0.0 {
        push(&mut v, "sweep.from", "log sweeps need from > 0");
    }
    v
}

fn check_squeezer(v: &mut Vec<Violation>, path: &str, s: &SqueezeSpec) {
    match (s.r, s.r_db) {
        (Some(_), Some(_)) => push(v, path, "give r or r_db, not both"),
        (None, None) => push(v, path, "needs r or r_db"),
        (Some(x), None) | (None, Some(x)) if !x.is_finite() => push(v, path, "squeeze factor must be finite"),
        _ => {}
    }
    if matches!(s.theta, Some(t) if !t.is_finite()) {
        push(v, &format!("{path}.theta"), "must be finite");
    }
}

fn forbid<T>(v: &mut Vec<Violation>, path: &str, field: &Option<T>, why: &str) {
    if field.is_some() {
        push(v, path, why.to_string());
    }
}

/// Semantic checks of one resolved scenario.
pub fn validate_point(c: &ScenarioConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let p = &c.preparation;
    if !(p.alpha.is_finite() && p.alpha >= 0.0) {
        push(&mut v, "preparation.alpha", "must be finite and non-negative");
    }
    if matches!(p.zeta, Some(z) if !z.is_finite()) {
        push(&mut v, "preparation.zeta", "must be finite");
    }
    for (name, s) in [("sq1", &p.sq1), ("sq2", &p.sq2), ("su11_prep", &p.su11_prep)] {
        if let Some(s) = s {
            check_squeezer(&mut v, &format!("preparation.{name}"), s);
        }
    }
    match c.topology {
        Topology::SingleArm => {
            forbid(&mut v, "preparation.zeta", &p.zeta, "only two_arm preparations have a splitting angle");
            forbid(&mut v, "preparation.sq2", &p.sq2, "single_arm has one squeezer (sq1)");
            forbid(&mut v, "preparation.su11_prep", &p.su11_prep, "su11_prep needs topology two_arm");
        }
        Topology::TwoArm => {
            if p.su11_prep.is_some() {
                forbid(&mut v, "preparation.sq1", &p.sq1, "su11_prep replaces sq1 and sq2");
                forbid(&mut v, "preparation.sq2", &p.sq2, "su11_prep replaces sq1 and sq2");
            }
        }
    }

    let d = c.detection;
    if let Some(t) = d.topology() {
        if t != c.topology {
            let need = if t == Topology::TwoArm { "two_arm" } else { "single_arm" };
            push(&mut v, "detection", format!("{} requires topology {need}", d.name()));
        }
    }
    let dp = &c.detection_params;
    let unused = |field: &str| format!("{field} is not used by detection {}", d.name());
    match d {
        Detection::Homodyne => match dp.alpha_r {
            Some(a) if a.is_finite() && a > 0.0 => {}
            Some(_) => push(&mut v, "detectionParams.alphaR", "must be positive and finite"),
            None => push(&mut v, "detectionParams.alphaR", "required by homodyne"),
        },
        _ => forbid(&mut v, "detectionParams.alphaR", &dp.alpha_r, &unused("alphaR")),
    }
    match d {
        Detection::Su11Readout | Detection::Su11TwoArmReadout => match dp.big_r {
            Some(r) if r.is_finite() && r >= 0.0 => {}
            Some(_) => push(&mut v, "detectionParams.R", "must be finite and non-negative"),
            None => push(&mut v, "detectionParams.R", format!("required by {}", d.name())),
        },
        _ => forbid(&mut v, "detectionParams.R", &dp.big_r, &unused("R")),
    }
    match d {
        Detection::Su11TwoArmReadout => {
            if matches!(dp.vartheta, Some(x) if !x.is_finite()) {
                push(&mut v, "detectionParams.vartheta", "must be finite");
            }
        }
        _ => forbid(&mut v, "detectionParams.vartheta", &dp.vartheta, &unused("vartheta")),
    }
    match d {
        Detection::DoubleDirect | Detection::Su11TwoArmReadout => {
            if matches!(dp.phi_offset, Some(x) if !x.is_finite()) {
                push(&mut v, "detectionParams.phiOffset", "must be finite");
            }
        }
        _ => forbid(&mut v, "detectionParams.phiOffset", &dp.phi_offset, &unused("phiOffset")),
    }
    if matches!(c.oracle.cutoff, Some(n) if n < 2) {
        push(&mut v, "oracle.cutoff", "must be at least 2");
    }
    v.sort();
    v
}

/// Parameters outside the oracle envelope (`α ≤ 2`, `|r| ≤ 0.6`).
pub fn envelope_violations(c: &ScenarioConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let p = &c.preparation;
    if p.alpha > ENVELOPE_ALPHA {
        push(&mut v, "preparation.alpha", format!("{} exceeds the oracle limit {ENVELOPE_ALPHA}", p.alpha));
    }
    for (name, s) in [("sq1", &p.sq1), ("sq2", &p.sq2), ("su11_prep", &p.su11_prep)] {
        if let Some(s) = s {
            let r = s.factor().abs();
            if r > ENVELOPE_R {
                push(&mut v, &format!("preparation.{name}"), format!("|r| = {r} exceeds the oracle limit {ENVELOPE_R}"));
            }
        }
    }
    v
}

/// Envelope check over every sweep point.
pub fn check_envelope(loaded: &LoadedConfig) -> Result<(), ConfigError> {
    let mut all: Vec<Violation> = Vec::new();
    for (x, point) in &loaded.points {
        for mut found in envelope_violations(point) {
            found.message = format!("{} (sweep value {x})", found.message);
            all.push(found);
        }
    }
    if all.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::Envelope(all))
    }
}
