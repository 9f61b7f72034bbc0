//! Geometric parameters, joint limits and the JSON configuration file.
//!
//! Lengths are millimetres and angles radians everywhere except in the
//! configuration document itself, where angular limits are given in degrees.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ConfigError;

/// The shipped default configuration. Every default geometry value lives here.
pub const DEFAULT_CONFIG_JSON: &str = include_str!("../config/default.json");

/// Sign applied to `l0` in the ATHENA-2 intermediates (`Xp + l0` or `Xp - l0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum L0Sign {
    #[default]
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParams {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub l2min: f64,
    pub l2max: f64,
    /// Total active-instrument length.
    pub l_tool: f64,
    pub l01: f64,
    pub l02: f64,
    pub l03: f64,
    pub l0: f64,
    pub l0_sign: L0Sign,
}

impl GeometryParams {
    /// `Xp + l0` (or `Xp - l0` under [`L0Sign::Minus`]).
    #[inline]
    pub fn shifted_x(&self, xp: f64) -> f64 {
        match self.l0_sign {
            L0Sign::Plus => xp + self.l0,
            L0Sign::Minus => xp - self.l0,
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    #[inline]
    pub fn contains_open(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    /// `[0, l1]`, mm.
    pub q1: Interval,
    /// `[0, 2 l1]`, mm.
    pub q2: Interval,
    /// ATHENA-1 stroke, checked as the open interval `(l2min, l2max)`, mm.
    pub q3_a1: Interval,
    /// ATHENA-2 crank angle, rad.
    pub q3_a2: Interval,
    /// Principal range of the tip-roll drive, rad.
    pub q4: Interval,
    /// Insertion must satisfy `0 <= l_ins < lins_max`, mm.
    pub lins_max: f64,
}

/// Per-joint stiffness defaults for the lumped tip-stiffness estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StiffnessSection {
    #[serde(default = "default_stiffness_label")]
    pub label: String,
    pub prismatic_n_per_mm: f64,
    pub revolute_nmm_per_rad: f64,
}

fn default_stiffness_label() -> String {
    "illustrative".to_string()
}

impl Default for StiffnessSection {
    fn default() -> Self {
        StiffnessSection {
            label: default_stiffness_label(),
            prismatic_n_per_mm: 2000.0,
            revolute_nmm_per_rad: 5.0e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub l2min: f64,
    pub l2max: f64,
    pub l_tool: f64,
    pub l01: f64,
    pub l02: f64,
    pub l03: f64,
    /// Falls back to `l01` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l0: Option<f64>,
    #[serde(default)]
    pub l0_sign: L0Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    #[serde(default = "default_q4_deg")]
    pub q4_range_deg: [f64; 2],
    #[serde(default = "default_lins_max")]
    pub lins_max_mm: f64,
    #[serde(default = "default_q3a2_deg")]
    pub q3a2_range_deg: [f64; 2],
}

fn default_q4_deg() -> [f64; 2] {
    [-90.0, 90.0]
}
fn default_lins_max() -> f64 {
    250.0
}
fn default_q3a2_deg() -> [f64; 2] {
    [-45.0, 45.0]
}

impl Default for LimitsSection {
    fn default() -> Self {
        LimitsSection {
            q4_range_deg: default_q4_deg(),
            lins_max_mm: default_lins_max(),
            q3a2_range_deg: default_q3a2_deg(),
        }
    }
}

/// The on-disk document, kept verbatim so that it serializes back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub geometry: GeometrySection,
    #[serde(default)]
    pub limits: LimitsSection,
    #[serde(default)]
    pub stiffness: StiffnessSection,
}

const TOP_KEYS: &[&str] = &["geometry", "limits", "stiffness"];
const GEOMETRY_KEYS: &[&str] = &[
    "l1", "l2", "l3", "l4", "l5", "l2min", "l2max", "l_tool", "l01", "l02", "l03", "l0", "l0_sign",
];
const LIMITS_KEYS: &[&str] = &["q4_range_deg", "lins_max_mm", "q3a2_range_deg"];
const STIFFNESS_KEYS: &[&str] = &["label", "prismatic_n_per_mm", "revolute_nmm_per_rad"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Unknown keys are rejected.
    #[default]
    Strict,
    /// Unknown keys are dropped before parsing.
    Lenient,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub geometry: GeometryParams,
    pub limits: JointLimits,
    pub stiffness: StiffnessSection,
    pub document: ConfigDocument,
}

impl Config {
    pub fn from_document(document: ConfigDocument) -> Result<Self, ConfigError> {
        let g = &document.geometry;
        let geometry = GeometryParams {
            l1: g.l1,
            l2: g.l2,
            l3: g.l3,
            l4: g.l4,
            l5: g.l5,
            l2min: g.l2min,
            l2max: g.l2max,
            l_tool: g.l_tool,
            l01: g.l01,
            l02: g.l02,
            l03: g.l03,
            l0: g.l0.unwrap_or(g.l01),
            l0_sign: g.l0_sign,
        };
        let l = &document.limits;
        let limits = JointLimits {
            q1: Interval::new(0.0, geometry.l1),
            q2: Interval::new(0.0, 2.0 * geometry.l1),
            q3_a1: Interval::new(geometry.l2min, geometry.l2max),
            q3_a2: Interval::new(
                l.q3a2_range_deg[0].to_radians(),
                l.q3a2_range_deg[1].to_radians(),
            ),
            q4: Interval::new(
                l.q4_range_deg[0].to_radians(),
                l.q4_range_deg[1].to_radians(),
            ),
            lins_max: l.lins_max_mm,
        };
        validate(&geometry, &limits)?;
        validate_stiffness(&document.stiffness)?;
        Ok(Config {
            geometry,
            limits,
            stiffness: document.stiffness.clone(),
            document,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.document).expect("config document serializes")
    }
}

/// Parses and validates a configuration document.
pub fn load_config(source: &str, strictness: Strictness) -> Result<Config, ConfigError> {
    let document: ConfigDocument = match strictness {
        Strictness::Strict => serde_json::from_str(source)?,
        Strictness::Lenient => {
            let mut value: Value = serde_json::from_str(source)?;
            prune_unknown(&mut value);
            serde_json::from_value(value)?
        }
    };
    Config::from_document(document)
}

pub fn load_config_file(path: &Path, strictness: Strictness) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_config(&text, strictness)
}

/// The repository default parameter set.
pub fn default_geometry() -> Config {
    load_config(DEFAULT_CONFIG_JSON, Strictness::Strict).expect("shipped default config is valid")
}

fn prune_unknown(value: &mut Value) {
    let Some(top) = value.as_object_mut() else {
        return;
    };
    top.retain(|k, _| TOP_KEYS.contains(&k.as_str()));
    for (section, keys) in [
        ("geometry", GEOMETRY_KEYS),
        ("limits", LIMITS_KEYS),
        ("stiffness", STIFFNESS_KEYS),
    ] {
        if let Some(obj) = top.get_mut(section).and_then(Value::as_object_mut) {
            obj.retain(|k, _| keys.contains(&k.as_str()));
        }
    }
}

/// Checks every parameter invariant, reporting the first offending field.
pub fn validate(g: &GeometryParams, limits: &JointLimits) -> Result<(), ConfigError> {
    let all = [
        ("l1", g.l1),
        ("l2", g.l2),
        ("l3", g.l3),
        ("l4", g.l4),
        ("l5", g.l5),
        ("l2min", g.l2min),
        ("l2max", g.l2max),
        ("l_tool", g.l_tool),
        ("l01", g.l01),
        ("l02", g.l02),
        ("l03", g.l03),
        ("l0", g.l0),
    ];
    for (name, v) in all {
        if !v.is_finite() {
            return Err(ConfigError::validation(name, "finite"));
        }
    }
    for (name, v) in &all[..8] {
        if *v <= 0.0 {
            return Err(ConfigError::validation(name, &format!("{name} > 0")));
        }
    }
    if g.l2min >= g.l2max {
        return Err(ConfigError::validation("l2min", "l2min < l2max"));
    }
    if !(limits.lins_max.is_finite() && limits.lins_max > 0.0) {
        return Err(ConfigError::validation("lins_max_mm", "lins_max_mm > 0"));
    }
    if g.l_tool <= limits.lins_max {
        return Err(ConfigError::validation("l_tool", "l_tool > lins_max_mm"));
    }
    for (name, iv) in [
        ("q1_range", limits.q1),
        ("q2_range", limits.q2),
        ("q3_range_a1", limits.q3_a1),
        ("q3a2_range_deg", limits.q3_a2),
        ("q4_range_deg", limits.q4),
    ] {
        if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
            return Err(ConfigError::validation(name, "lower bound < upper bound"));
        }
    }
    if limits.q1.lo != 0.0 || limits.q2.lo != 0.0 {
        return Err(ConfigError::validation(
            "q1_range",
            "q1 and q2 lower bounds are 0",
        ));
    }
    Ok(())
}

fn validate_stiffness(s: &StiffnessSection) -> Result<(), ConfigError> {
    if !(s.prismatic_n_per_mm.is_finite() && s.prismatic_n_per_mm > 0.0) {
        return Err(ConfigError::validation(
            "prismatic_n_per_mm",
            "prismatic_n_per_mm > 0",
        ));
    }
    if !(s.revolute_nmm_per_rad.is_finite() && s.revolute_nmm_per_rad > 0.0) {
        return Err(ConfigError::validation(
            "revolute_nmm_per_rad",
            "revolute_nmm_per_rad > 0",
        ));
    }
    Ok(())
}
