//! ATHENA-1: three prismatic actuators plus the tip-roll drive.

use serde::{Deserialize, Serialize};

use super::{
    limit_violations, roll_residual, scale_of, shared_residuals, solve_q4, solve_shared, tip_of,
    Arch, ChainVariant, IkSolution, JointVector, Residuals, SolveOptions,
};
use crate::config::{GeometryParams, JointLimits};
use crate::error::{Error, Result};
use crate::rcm::TaskPose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intermediates1 {
    /// `atan2(Zp - l03, Xp - l01)`, rad.
    pub lambda: f64,
    /// Chain coordinate under the square roots, mm.
    pub d: f64,
    /// `sqrt((Zp - l03)^2 + (Xp - l01)^2)`, mm.
    pub rho: f64,
}

/// Evaluates the ATHENA-1 residual system as written, tip from the RCM model.
pub fn residuals_a1(
    q: &JointVector,
    pose: &TaskPose,
    geom: &GeometryParams,
    variant: ChainVariant,
) -> Result<Residuals> {
    let tip = tip_of(pose, geom);
    let ([f1, f2], [s1, s2]) = shared_residuals(q, &tip, geom, variant)?;

    let d = variant.diff_term(q.q1, q.q2);
    let rad3 = geom.l3 * geom.l3 - d * d;
    if rad3 < 0.0 {
        return Err(Error::Domain {
            term: "l3^2 - d^2",
            value: rad3,
        });
    }
    let lambda = (tip.z - geom.l03).atan2(tip.x - geom.l01);
    let (sl, cl) = lambda.sin_cos();
    let stroke = (q.q3 + geom.l2min + geom.l5).powi(2);
    let ax = (tip.x - geom.l01 - geom.l4 * cl + rad3.sqrt()).powi(2);
    let az = (tip.z - geom.l4 * sl - geom.l03).powi(2);
    let f3 = stroke - ax - az;

    let (f4, s4) = roll_residual(q.q4, pose.phi);
    Ok(Residuals {
        values: [f1, f2, f3, f4],
        scales: [s1, s2, scale_of(&[stroke, ax, az]), s4],
    })
}

/// Closed-form inverse kinematics of ATHENA-1.
///
/// `q3` takes the positive root of the stroke equation; with
/// `opts.check_limits` any violation becomes [`Error::JointLimit`],
/// otherwise violations are listed on the returned solution.
pub fn ik_a1(
    pose: &TaskPose,
    geom: &GeometryParams,
    limits: &JointLimits,
    opts: &SolveOptions,
) -> Result<IkSolution<Intermediates1>> {
    let tip = tip_of(pose, geom);
    let chain = solve_shared(&tip, geom, opts)?;
    let rad3 = geom.l3 * geom.l3 - chain.d * chain.d;
    if rad3 < 0.0 {
        return Err(Error::Unreachable { term: "l3^2 - d^2" });
    }
    let (sl, cl) = chain.lambda.sin_cos();
    let ax = tip.x - geom.l01 - geom.l4 * cl + rad3.sqrt();
    let az = tip.z - geom.l4 * sl - geom.l03;
    let q3 = ax.hypot(az) - geom.l2min - geom.l5;

    let joints = JointVector::new(Arch::Athena1, chain.q1, chain.q2, q3, solve_q4(pose.phi));
    let violations = limit_violations(&joints, limits);
    if opts.check_limits && !violations.is_empty() {
        return Err(Error::JointLimit { violations });
    }
    Ok(IkSolution {
        joints,
        intermediates: Intermediates1 {
            lambda: chain.lambda,
            d: chain.d,
            rho: chain.rho,
        },
        violations,
    })
}
