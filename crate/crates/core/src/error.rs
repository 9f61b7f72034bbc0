use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kinematics::LimitViolation;

/// Machine-readable classification of why a tip point or pose is rejected.
///
/// The declaration order is the classification precedence used by the
/// workspace engine: a point failing several constraints reports the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasonCode {
    Ok,
    DegenerateTip,
    InsertionLimit,
    NoRealSolution,
    Q1Limit,
    Q2Limit,
    Q3Limit,
    Q4Limit,
}

impl ReasonCode {
    pub const ALL: [ReasonCode; 8] = [
        ReasonCode::Ok,
        ReasonCode::DegenerateTip,
        ReasonCode::InsertionLimit,
        ReasonCode::NoRealSolution,
        ReasonCode::Q1Limit,
        ReasonCode::Q2Limit,
        ReasonCode::Q3Limit,
        ReasonCode::Q4Limit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReasonCode::Ok => "OK",
            ReasonCode::DegenerateTip => "DEGENERATE_TIP",
            ReasonCode::InsertionLimit => "INSERTION_LIMIT",
            ReasonCode::NoRealSolution => "NO_REAL_SOLUTION",
            ReasonCode::Q1Limit => "Q1_LIMIT",
            ReasonCode::Q2Limit => "Q2_LIMIT",
            ReasonCode::Q3Limit => "Q3_LIMIT",
            ReasonCode::Q4Limit => "Q4_LIMIT",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ReasonCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReasonCode::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown reason code `{s}`"))
    }
}

/// Errors raised while loading or validating a configuration document.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed configuration document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid value for `{field}`: constraint `{constraint}` violated")]
    Validation { field: String, constraint: String },
    #[error("cannot read configuration `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub(crate) fn validation(field: &str, constraint: &str) -> Self {
        ConfigError::Validation {
            field: field.to_string(),
            constraint: constraint.to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    /// A square-root argument went negative while evaluating a printed formula.
    #[error("domain error: radicand of `{term}` is negative ({value:e})")]
    Domain { term: &'static str, value: f64 },

    #[error("tip coincides with the remote center of motion")]
    DegenerateTip,

    #[error("insertion length {l_ins:.6} mm outside [0, {lins_max}) mm")]
    InsertionOutOfRange { l_ins: f64, lins_max: f64 },

    #[error("pose unreachable: `{term}` has no real solution")]
    Unreachable { term: &'static str },

    #[error("q3 has real roots but none inside the actuator range")]
    NoRootInRange { roots: Vec<f64> },

    #[error("joint limits violated: {}", fmt_violations(.violations))]
    JointLimit { violations: Vec<LimitViolation> },

    #[error("analytic q3 root {analytic} disagrees with bracketed numeric root {numeric}")]
    RootVerification { analytic: f64, numeric: f64 },

    #[error(
        "forward kinematics did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("jacobian is singular (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },

    #[error("grid specifications differ between the compared results")]
    GridMismatch,

    #[error("deflection must be positive, got {0}")]
    NonPositiveDeflection(f64),

    #[error("force must be non-negative, got {0}")]
    NegativeForce(f64),

    #[error("joint stiffness values must be positive")]
    NonPositiveStiffness,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_violations(v: &[LimitViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    /// Reason code for errors that describe an infeasible pose.
    pub fn reason(&self) -> Option<ReasonCode> {
        match self {
            Error::DegenerateTip => Some(ReasonCode::DegenerateTip),
            Error::InsertionOutOfRange { .. } => Some(ReasonCode::InsertionLimit),
            Error::Unreachable { .. } | Error::Domain { .. } => Some(ReasonCode::NoRealSolution),
            Error::NoRootInRange { .. } => Some(ReasonCode::Q3Limit),
            Error::JointLimit { violations } => violations.first().map(|v| v.reason()),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
