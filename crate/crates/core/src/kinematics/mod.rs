//! Input-output equations, inverse and forward kinematics of both architectures.
//!
//! Both robots share the first, second and fourth equations (the `q1`/`q2`
//! chain and the directly driven tip roll); they differ in the third, which
//! couples `q3` to the tip: a prismatic stroke on ATHENA-1, a revolute crank
//! on ATHENA-2.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{GeometryParams, Interval, JointLimits};
use crate::error::{Error, ReasonCode, Result};
use crate::rcm::{pose_to_tip, TaskPose, TipPoint};

pub mod athena1;
pub mod athena2;
pub mod newton;

pub use athena1::{ik_a1, residuals_a1, Intermediates1};
pub use athena2::{ik_a2, intermediates_a2, residuals_a2, Intermediates2};
pub use newton::{fk, fk_a1, fk_a2, fk_solutions, FkSettings, FkSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Athena1,
    Athena2,
}

impl Arch {
    pub const BOTH: [Arch; 2] = [Arch::Athena1, Arch::Athena2];

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Athena1 => "athena1",
            Arch::Athena2 => "athena2",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Arch::Athena1 => "ATHENA-1",
            Arch::Athena2 => "ATHENA-2",
        }
    }

    /// Whether `q3` is an angle on this architecture.
    pub fn q3_is_angle(self) -> bool {
        matches!(self, Arch::Athena2)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "athena1" | "a1" => Ok(Arch::Athena1),
            "athena2" | "a2" => Ok(Arch::Athena2),
            _ => Err(format!("unknown architecture `{s}`")),
        }
    }
}

/// How the `q1`/`q2` chain coordinate enters the shared equations.
///
/// `Literal` uses `q1 + q2/2` and `q2 - q1/2` exactly as printed for the
/// first two equations; `Symmetrized` uses the midpoint `(q1 + q2)/2` and
/// the half-difference `(q2 - q1)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainVariant {
    #[default]
    Literal,
    Symmetrized,
}

impl ChainVariant {
    /// Coordinate entering the `Yp` equation.
    #[inline]
    pub fn sum_term(self, q1: f64, q2: f64) -> f64 {
        match self {
            ChainVariant::Literal => q1 + q2 / 2.0,
            ChainVariant::Symmetrized => (q1 + q2) / 2.0,
        }
    }

    /// Coordinate `d` under the square roots `sqrt(l1^2 - d^2)`, `sqrt(l3^2 - d^2)`.
    #[inline]
    pub fn diff_term(self, q1: f64, q2: f64) -> f64 {
        match self {
            ChainVariant::Literal => q2 - q1 / 2.0,
            ChainVariant::Symmetrized => (q2 - q1) / 2.0,
        }
    }

    /// Inverts `(sum_term, diff_term) -> (q1, q2)`.
    #[inline]
    pub fn solve(self, sum: f64, diff: f64) -> (f64, f64) {
        match self {
            ChainVariant::Literal => {
                let q1 = (4.0 * sum - 2.0 * diff) / 5.0;
                (q1, diff + q1 / 2.0)
            }
            ChainVariant::Symmetrized => (sum - diff, sum + diff),
        }
    }
}

impl FromStr for ChainVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "literal" => Ok(ChainVariant::Literal),
            "symmetrized" => Ok(ChainVariant::Symmetrized),
            _ => Err(format!("unknown variant `{s}`")),
        }
    }
}

/// Sign of the chain coordinate `d` in the inverse solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Branch {
    #[default]
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

impl FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "+" | "plus" => Ok(Branch::Plus),
            "-" | "minus" => Ok(Branch::Minus),
            _ => Err(format!("unknown branch `{s}` (expected + or -)")),
        }
    }
}

/// Which in-range ATHENA-2 `q3` root to return when two qualify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootChoice {
    #[default]
    MinAbs,
    Other,
}

impl FromStr for RootChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "min-abs" => Ok(RootChoice::MinAbs),
            "other" => Ok(RootChoice::Other),
            _ => Err(format!("unknown root choice `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolveOptions {
    pub variant: ChainVariant,
    pub branch: Branch,
    pub root: RootChoice,
    /// Turn joint-limit violations into errors instead of reporting them.
    pub check_limits: bool,
}

impl SolveOptions {
    pub fn checked() -> Self {
        SolveOptions {
            check_limits: true,
            ..Default::default()
        }
    }
}

/// Actuated coordinates. `q1`, `q2` in mm, `q4` in rad; `q3` is mm on
/// ATHENA-1 and rad on ATHENA-2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointVector {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
    pub arch: Arch,
}

impl JointVector {
    pub fn new(arch: Arch, q1: f64, q2: f64, q3: f64, q4: f64) -> Self {
        JointVector {
            q1,
            q2,
            q3,
            q4,
            arch,
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.q1, self.q2, self.q3, self.q4]
    }

    pub fn with_array(&self, a: [f64; 4]) -> Self {
        JointVector::new(self.arch, a[0], a[1], a[2], a[3])
    }
}

/// Values of the four input-output equations at a (joints, pose) pair.
///
/// `scales[i]` is `max(1, |largest term of f_i|)`; a pair is consistent when
/// every `|values[i]| / scales[i]` is at round-off level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub values: [f64; 4],
    pub scales: [f64; 4],
}

impl Residuals {
    pub fn f1(&self) -> f64 {
        self.values[0]
    }
    pub fn f2(&self) -> f64 {
        self.values[1]
    }
    pub fn f3(&self) -> f64 {
        self.values[2]
    }
    pub fn f4(&self) -> f64 {
        self.values[3]
    }

    pub fn scaled(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.values[i] / self.scales[i])
    }

    pub fn max_scaled(&self) -> f64 {
        self.scaled().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub(crate) fn scale_of(terms: &[f64]) -> f64 {
    terms.iter().fold(1.0f64, |m, t| m.max(t.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Joint {
    Q1,
    Q2,
    Q3,
    Q4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    pub joint: Joint,
    pub value: f64,
    pub range: Interval,
}

impl LimitViolation {
    pub fn reason(&self) -> ReasonCode {
        match self.joint {
            Joint::Q1 => ReasonCode::Q1Limit,
            Joint::Q2 => ReasonCode::Q2Limit,
            Joint::Q3 => ReasonCode::Q3Limit,
            Joint::Q4 => ReasonCode::Q4Limit,
        }
    }
}

impl fmt::Display for LimitViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?}={} outside [{}, {}]",
            self.joint, self.value, self.range.lo, self.range.hi
        )
    }
}

/// Joint-limit check in index order. ATHENA-1's stroke is an open interval.
pub fn limit_violations(q: &JointVector, limits: &JointLimits) -> Vec<LimitViolation> {
    let mut out = Vec::new();
    let mut check = |joint, value: f64, range: Interval, ok: bool| {
        if !ok {
            out.push(LimitViolation {
                joint,
                value,
                range,
            });
        }
    };
    check(Joint::Q1, q.q1, limits.q1, limits.q1.contains(q.q1));
    check(Joint::Q2, q.q2, limits.q2, limits.q2.contains(q.q2));
    match q.arch {
        Arch::Athena1 => check(
            Joint::Q3,
            q.q3,
            limits.q3_a1,
            limits.q3_a1.contains_open(q.q3),
        ),
        Arch::Athena2 => check(Joint::Q3, q.q3, limits.q3_a2, limits.q3_a2.contains(q.q3)),
    }
    check(Joint::Q4, q.q4, limits.q4, limits.q4.contains(q.q4));
    out
}

/// An inverse-kinematics result with its intermediate quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution<I> {
    pub joints: JointVector,
    pub intermediates: I,
    /// Joint-limit violations, in joint index order. Empty when within limits.
    pub violations: Vec<LimitViolation>,
}

impl<I> IkSolution<I> {
    pub fn within_limits(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Closed-form solution of the two shared equations for `q1`, `q2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedChain {
    pub q1: f64,
    pub q2: f64,
    /// Chain coordinate `d` (see [`ChainVariant::diff_term`]).
    pub d: f64,
    /// Planar distance `sqrt((Zp - l03)^2 + (Xp - l01)^2)`.
    pub rho: f64,
    /// `atan2(Zp - l03, Xp - l01)`.
    pub lambda: f64,
}

/// Solves the `Yp` and `rho` equations, which both architectures share.
///
/// From the second equation `l4 + sqrt(l1^2 - d^2) = rho`, so
/// `d = ±sqrt(l1^2 - (rho - l4)^2)` with `rho >= l4`; the first equation
/// then fixes the chain sum, and the pair inverts linearly to `q1`, `q2`.
pub fn solve_shared(
    tip: &TipPoint,
    geom: &GeometryParams,
    opts: &SolveOptions,
) -> Result<SharedChain> {
    let dx = tip.x - geom.l01;
    let dz = tip.z - geom.l03;
    let rho = dx.hypot(dz);
    let a = rho - geom.l4;
    if a < 0.0 {
        return Err(Error::Unreachable { term: "rho - l4" });
    }
    let rad = geom.l1 * geom.l1 - a * a;
    if rad < 0.0 {
        return Err(Error::Unreachable {
            term: "l1^2 - (rho - l4)^2",
        });
    }
    let d = opts.branch.sign() * rad.sqrt();
    let sum = tip.y - geom.l02;
    let (q1, q2) = opts.variant.solve(sum, d);
    Ok(SharedChain {
        q1,
        q2,
        d,
        rho,
        lambda: dz.atan2(dx),
    })
}

/// Tip roll drive: principal value of `sin q4 = sin phi`, in `[-pi/2, pi/2]`.
///
/// Returns `phi` unchanged when it already lies in the principal range.
pub fn solve_q4(phi: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI, TAU};
    if phi.abs() <= FRAC_PI_2 {
        return phi;
    }
    let mut w = phi.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    if w > FRAC_PI_2 {
        PI - w
    } else if w < -FRAC_PI_2 {
        -PI - w
    } else {
        w
    }
}

/// `f1` and `f2`, common to both architectures.
pub(crate) fn shared_residuals(
    q: &JointVector,
    tip: &TipPoint,
    geom: &GeometryParams,
    variant: ChainVariant,
) -> Result<([f64; 2], [f64; 2])> {
    let s = variant.sum_term(q.q1, q.q2);
    let f1 = geom.l02 + s - tip.y;
    let s1 = scale_of(&[geom.l02, s, tip.y]);

    let d = variant.diff_term(q.q1, q.q2);
    let rad = geom.l1 * geom.l1 - d * d;
    if rad < 0.0 {
        return Err(Error::Domain {
            term: "l1^2 - d^2",
            value: rad,
        });
    }
    let lead = (geom.l4 + rad.sqrt()).powi(2);
    let tz = (tip.z - geom.l03).powi(2);
    let tx = (tip.x - geom.l01).powi(2);
    let f2 = lead - tz - tx;
    Ok(([f1, f2], [s1, scale_of(&[lead, tz, tx])]))
}

pub(crate) fn roll_residual(q4: f64, phi: f64) -> (f64, f64) {
    let a = q4.sin();
    let b = phi.sin();
    (a - b, scale_of(&[a, b]))
}

/// Dispatches to the residual system of `q.arch`.
pub fn residuals(
    q: &JointVector,
    pose: &TaskPose,
    geom: &GeometryParams,
    variant: ChainVariant,
) -> Result<Residuals> {
    match q.arch {
        Arch::Athena1 => residuals_a1(q, pose, geom, variant),
        Arch::Athena2 => residuals_a2(q, pose, geom, variant),
    }
}

/// Architecture-independent inverse kinematics returning only joints and violations.
pub fn ik(
    arch: Arch,
    pose: &TaskPose,
    geom: &GeometryParams,
    limits: &JointLimits,
    opts: &SolveOptions,
) -> Result<IkSolution<()>> {
    fn strip<I>(s: IkSolution<I>) -> IkSolution<()> {
        IkSolution {
            joints: s.joints,
            intermediates: (),
            violations: s.violations,
        }
    }
    match arch {
        Arch::Athena1 => ik_a1(pose, geom, limits, opts).map(strip),
        Arch::Athena2 => ik_a2(pose, geom, limits, opts).map(strip),
    }
}

pub(crate) fn tip_of(pose: &TaskPose, geom: &GeometryParams) -> TipPoint {
    pose_to_tip(pose, geom)
}
