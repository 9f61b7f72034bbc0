//! Finite-difference Jacobians of the residual systems and singularity metrics.
//!
//! `Jq = ∂f/∂(q1..q4)` and `Jx = ∂f/∂(psi, theta, phi, l_ins)`, both 4x4 and
//! evaluated at a consistent (pose, joints) pair.

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::GeometryParams;
use crate::error::Result;
use crate::kinematics::{residuals, Arch, ChainVariant, JointVector};
use crate::rcm::{tip_to_pose_unchecked, TaskPose, TipPoint};
use crate::workspace::WorkspaceResult;

/// Default flagging threshold on the row-normalized `|det Jq|`.
pub const DEFAULT_SINGULARITY_THRESHOLD: f64 = 1e-8;

const MAX_STEP_SHRINKS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianPair {
    pub jq: Matrix4<f64>,
    pub jx: Matrix4<f64>,
    pub pose: TaskPose,
    pub joints: JointVector,
}

/// Step used for coordinate value `x`: `max(1e-6, 1e-8 |x|)`.
#[inline]
pub fn fd_step(x: f64) -> f64 {
    1e-6f64.max(1e-8 * x.abs())
}

/// Central-difference Jacobian of `f` at `x`.
///
/// When a probe leaves the real domain the step for that coordinate is
/// divided by ten, at most three times.
pub fn central_jacobian<F>(f: F, x: [f64; 4]) -> Result<Matrix4<f64>>
where
    F: Fn([f64; 4]) -> Result<[f64; 4]>,
{
    let mut jac = Matrix4::zeros();
    for i in 0..4 {
        let mut h = fd_step(x[i]);
        let mut attempt = 0;
        let col = loop {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            match (f(xp), f(xm)) {
                (Ok(fp), Ok(fm)) => {
                    // use the realized step to cancel representation error in x ± h
                    let span = xp[i] - xm[i];
                    break Vector4::from_fn(|r, _| (fp[r] - fm[r]) / span);
                }
                (Err(e), _) | (_, Err(e)) => {
                    if attempt == MAX_STEP_SHRINKS {
                        return Err(e);
                    }
                    attempt += 1;
                    h /= 10.0;
                }
            }
        };
        jac.set_column(i, &col);
    }
    Ok(jac)
}

fn residual_values(
    q: &JointVector,
    pose: &TaskPose,
    geom: &GeometryParams,
    variant: ChainVariant,
) -> Result<[f64; 4]> {
    residuals(q, pose, geom, variant).map(|r| r.values)
}

/// `∂f/∂(psi, theta, phi, l_ins)` at fixed joints.
pub fn task_jacobian(
    q: &JointVector,
    pose: &TaskPose,
    geom: &GeometryParams,
    variant: ChainVariant,
) -> Result<Matrix4<f64>> {
    central_jacobian(
        |x| residual_values(q, &TaskPose::from_array(x), geom, variant),
        pose.to_array(),
    )
}

/// `∂f/∂(q1..q4)` at a fixed pose.
pub fn joint_jacobian(
    q: &JointVector,
    pose: &TaskPose,
    geom: &GeometryParams,
    variant: ChainVariant,
) -> Result<Matrix4<f64>> {
    central_jacobian(
        |x| residual_values(&q.with_array(x), pose, geom, variant),
        q.to_array(),
    )
}

pub fn numeric_jacobians(
    pose: &TaskPose,
    q: &JointVector,
    geom: &GeometryParams,
    variant: ChainVariant,
) -> Result<JacobianPair> {
    Ok(JacobianPair {
        jq: joint_jacobian(q, pose, geom, variant)?,
        jx: task_jacobian(q, pose, geom, variant)?,
        pose: *pose,
        joints: *q,
    })
}

/// `|det m|` divided by the product of its row norms; zero if a row vanishes.
///
/// Lies in `[0, 1]` by Hadamard's inequality and is invariant to row scaling.
pub fn normalized_abs_det(m: &Matrix4<f64>) -> f64 {
    let mut norms = 1.0;
    for r in 0..4 {
        let n = m.row(r).norm();
        if n == 0.0 {
            return 0.0;
        }
        norms *= n;
    }
    m.determinant().abs() / norms
}

/// Two-norm condition number `sigma_max / sigma_min` (infinite when rank deficient).
pub fn condition_number(m: &Matrix4<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityMetrics {
    pub abs_det_q: f64,
    pub abs_det_x: f64,
    pub normalized_det_q: f64,
    pub normalized_det_x: f64,
    pub cond_q: f64,
    pub cond_x: f64,
    /// `sqrt(det(Jq Jq^T))`.
    pub manipulability: f64,
    pub pose: TaskPose,
    pub joints: JointVector,
}

impl SingularityMetrics {
    pub fn is_singular(&self, threshold: f64) -> bool {
        !(self.normalized_det_q >= threshold)
    }
}

pub fn singularity_metrics(jp: &JacobianPair) -> SingularityMetrics {
    let gram = jp.jq * jp.jq.transpose();
    SingularityMetrics {
        abs_det_q: jp.jq.determinant().abs(),
        abs_det_x: jp.jx.determinant().abs(),
        normalized_det_q: normalized_abs_det(&jp.jq),
        normalized_det_x: normalized_abs_det(&jp.jx),
        cond_q: condition_number(&jp.jq),
        cond_x: condition_number(&jp.jx),
        manipulability: gram.determinant().max(0.0).sqrt(),
        pose: jp.pose,
        joints: jp.joints,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub threshold: f64,
    /// Evaluate every `stride`-th stored valid point.
    pub stride: usize,
    pub variant: ChainVariant,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            threshold: DEFAULT_SINGULARITY_THRESHOLD,
            stride: 1,
            variant: ChainVariant::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub arch: Arch,
    pub threshold: f64,
    pub stride: usize,
    pub evaluated_count: usize,
    pub flagged_count: usize,
    /// Points whose Jacobian could not be evaluated (probe left the domain).
    pub failed_count: usize,
    /// Minimum row-normalized `|det Jq|`; `null` when nothing was evaluated.
    pub min_abs_det_q: Option<f64>,
    pub argmin_point: Option<TipPoint>,
    pub min_raw_abs_det_q: Option<f64>,
    pub min_normalized_det_x: Option<f64>,
    pub argmin_x_point: Option<TipPoint>,
}

#[derive(Clone, Copy)]
struct Partial {
    evaluated: usize,
    flagged: usize,
    failed: usize,
    min_q: Option<(f64, usize)>,
    min_raw: Option<f64>,
    min_x: Option<(f64, usize)>,
}

impl Partial {
    const EMPTY: Partial = Partial {
        evaluated: 0,
        flagged: 0,
        failed: 0,
        min_q: None,
        min_raw: None,
        min_x: None,
    };

    fn merge(self, o: Partial) -> Partial {
        fn pick(a: Option<(f64, usize)>, b: Option<(f64, usize)>) -> Option<(f64, usize)> {
            match (a, b) {
                (Some(x), Some(y)) => Some(if (y.0, y.1) < (x.0, x.1) { y } else { x }),
                (x, None) => x,
                (None, y) => y,
            }
        }
        Partial {
            evaluated: self.evaluated + o.evaluated,
            flagged: self.flagged + o.flagged,
            failed: self.failed + o.failed,
            min_q: pick(self.min_q, o.min_q),
            min_raw: match (self.min_raw, o.min_raw) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
            min_x: pick(self.min_x, o.min_x),
        }
    }
}

/// Evaluates [`singularity_metrics`] on the stored valid points of `result`.
///
/// The reduction is a commutative minimum with index tie-breaking, so the
/// report does not depend on the number of worker threads.
pub fn singularity_scan(
    result: &WorkspaceResult,
    geom: &GeometryParams,
    opts: &ScanOptions,
) -> ScanReport {
    let stride = opts.stride.max(1);
    let points: Vec<_> = result
        .records
        .iter()
        .filter(|r| r.valid)
        .filter_map(|r| r.joints.map(|j| (r.tip, j)))
        .collect();

    let total = (0..points.len())
        .into_par_iter()
        .step_by(stride)
        .map(|i| {
            let (tip, q) = points[i];
            let metrics = tip_to_pose_unchecked(&tip, q.q4, geom)
                .and_then(|p| numeric_jacobians(&p.pose, &q, geom, opts.variant))
                .map(|jp| singularity_metrics(&jp));
            match metrics {
                Ok(m) => Partial {
                    evaluated: 1,
                    flagged: usize::from(m.is_singular(opts.threshold)),
                    failed: 0,
                    min_q: Some((m.normalized_det_q, i)),
                    min_raw: Some(m.abs_det_q),
                    min_x: Some((m.normalized_det_x, i)),
                },
                Err(_) => Partial {
                    failed: 1,
                    ..Partial::EMPTY
                },
            }
        })
        .reduce(|| Partial::EMPTY, Partial::merge);

    ScanReport {
        arch: result.arch,
        threshold: opts.threshold,
        stride,
        evaluated_count: total.evaluated,
        flagged_count: total.flagged,
        failed_count: total.failed,
        min_abs_det_q: total.min_q.map(|m| m.0),
        argmin_point: total.min_q.map(|m| points[m.1].0),
        min_raw_abs_det_q: total.min_raw,
        min_normalized_det_x: total.min_x.map(|m| m.0),
        argmin_x_point: total.min_x.map(|m| points[m.1].0),
    }
}
