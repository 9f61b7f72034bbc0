//! ATHENA-2: the third prismatic actuator is replaced by a revolute crank `q3`.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use super::{
    limit_violations, roll_residual, scale_of, shared_residuals, solve_q4, solve_shared, tip_of,
    Arch, ChainVariant, IkSolution, Joint, JointVector, Residuals, RootChoice, SolveOptions,
};
use crate::config::{GeometryParams, JointLimits};
use crate::error::{Error, Result};
use crate::rcm::{TaskPose, TipPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intermediates2 {
    /// `sqrt((Xp + l0)^2 + Zp^2 - l4^2)`, mm.
    pub t1: f64,
    /// `sqrt(l3^2 - ((q2 - q1)/2)^2) - l2 cos q3`, mm.
    pub t2: f64,
    /// Angle of `(Xp + l0, Zp)` measured from the `Zp` axis, rad.
    pub t3: f64,
}

/// Half-difference `(q2 - q1)/2` used by the crank chain, independent of
/// the [`ChainVariant`] governing the shared equations.
#[inline]
pub fn half_difference(q1: f64, q2: f64) -> f64 {
    (q2 - q1) / 2.0
}

/// Tip-only part of the intermediates: `(t1, t3)`.
fn tip_terms(tip: &TipPoint, geom: &GeometryParams) -> Result<(f64, f64)> {
    let sx = geom.shifted_x(tip.x);
    let rad1 = sx * sx + tip.z * tip.z - geom.l4 * geom.l4;
    if rad1 < 0.0 {
        return Err(Error::Domain {
            term: "t1",
            value: rad1,
        });
    }
    // Printed as atan2(((Xp + l0)·((Xp + l0)² + Zp²))^(-1/2), Zp·((Xp + l0)² + Zp²)^(-1/2)).
    // Both arguments are read as normalized by the same positive factor, which
    // atan2 ignores.
    let t3 = sx.atan2(tip.z);
    Ok((rad1.sqrt(), t3))
}

fn crank_root_term(q1: f64, q2: f64, geom: &GeometryParams) -> Result<f64> {
    let h = half_difference(q1, q2);
    let rad2 = geom.l3 * geom.l3 - h * h;
    if rad2 < 0.0 {
        return Err(Error::Domain {
            term: "t2",
            value: rad2,
        });
    }
    Ok(rad2.sqrt())
}

pub fn intermediates_a2(
    pose: &TaskPose,
    q: &JointVector,
    geom: &GeometryParams,
) -> Result<Intermediates2> {
    let tip = tip_of(pose, geom);
    let (t1, t3) = tip_terms(&tip, geom)?;
    let t2 = crank_root_term(q.q1, q.q2, geom)? - geom.l2 * q.q3.cos();
    Ok(Intermediates2 { t1, t2, t3 })
}

/// Bracketed expression of the crank equation, squared against `l2^2`.
#[inline]
fn crank_expr(t: &Intermediates2, q3: f64, geom: &GeometryParams) -> f64 {
    let lever = t.t1 - geom.l4;
    lever * t.t3.sin() + t.t2 + lever * t.t3.cos() - geom.l2 * q3.sin()
}

pub fn residuals_a2(
    q: &JointVector,
    pose: &TaskPose,
    geom: &GeometryParams,
    variant: ChainVariant,
) -> Result<Residuals> {
    let tip = tip_of(pose, geom);
    let ([f1, f2], [s1, s2]) = shared_residuals(q, &tip, geom, variant)?;
    let t = intermediates_a2(pose, q, geom)?;
    let e = crank_expr(&t, q.q3, geom);
    let sq = e * e;
    let l2sq = geom.l2 * geom.l2;
    let (f4, s4) = roll_residual(q.q4, pose.phi);
    Ok(Residuals {
        values: [f1, f2, sq - l2sq, f4],
        scales: [s1, s2, scale_of(&[sq, l2sq]), s4],
    })
}

/// One analytic root of the crank equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrankRoot {
    pub q3: f64,
    /// `+1` when the bracketed expression equals `+l2`, `-1` for `-l2`.
    pub side: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// All real roots of `A - l2 (cos q3 + sin q3) = ±l2` in `(-pi, pi]`.
///
/// Uses `cos q3 + sin q3 = sqrt(2) sin(q3 + pi/4)`.
pub fn crank_roots(a: f64, l2: f64) -> Vec<CrankRoot> {
    let mut out: Vec<CrankRoot> = Vec::with_capacity(4);
    for side in [1.0, -1.0] {
        let k = (a - side * l2) / l2 / SQRT_2;
        if !(-1.0..=1.0).contains(&k) {
            continue;
        }
        let u = k.asin();
        for q3 in [wrap_angle(u - FRAC_PI_4), wrap_angle(3.0 * FRAC_PI_4 - u)] {
            if !out
                .iter()
                .any(|r| r.side == side && (r.q3 - q3).abs() <= 1e-12)
            {
                out.push(CrankRoot { q3, side });
            }
        }
    }
    out
}

/// Refines a root of `g(q3) = crank_expr - side * l2` by bisection on a
/// small bracket around `guess`, using the printed `t2` expression.
pub fn bracketed_crank_root(
    t_tip: (f64, f64),
    root_term: f64,
    guess: f64,
    side: f64,
    geom: &GeometryParams,
) -> Option<f64> {
    let g = |q3: f64| {
        let t = Intermediates2 {
            t1: t_tip.0,
            t2: root_term - geom.l2 * q3.cos(),
            t3: t_tip.1,
        };
        crank_expr(&t, q3, geom) - side * geom.l2
    };
    let half = 1e-6;
    let (mut lo, mut hi) = (guess - half, guess + half);
    let (mut glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Some(lo);
    }
    if ghi == 0.0 {
        return Some(hi);
    }
    if glo.signum() == ghi.signum() {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Inverse kinematics of ATHENA-2.
///
/// `q1`, `q2`, `q4` come from the closed form shared with ATHENA-1. The crank
/// equation is solved in phase form; the in-range root closest to zero is
/// returned (or the other one under [`RootChoice::Other`]). Every analytic
/// root is checked against a bracketed numeric solve of the printed equation.
pub fn ik_a2(
    pose: &TaskPose,
    geom: &GeometryParams,
    limits: &JointLimits,
    opts: &SolveOptions,
) -> Result<IkSolution<Intermediates2>> {
    let tip = tip_of(pose, geom);
    let chain = solve_shared(&tip, geom, opts)?;
    let q4 = solve_q4(pose.phi);

    let (t1, t3) = tip_terms(&tip, geom).map_err(|_| Error::Unreachable { term: "t1" })?;
    let root_term = crank_root_term(chain.q1, chain.q2, geom).map_err(|_| Error::Unreachable {
        term: "l3^2 - ((q2 - q1)/2)^2",
    })?;
    let a = (t1 - geom.l4) * (t3.sin() + t3.cos()) + root_term;
    let roots = crank_roots(a, geom.l2);
    if roots.is_empty() {
        return Err(Error::Unreachable { term: "q3" });
    }

    let mut in_range: Vec<CrankRoot> = roots
        .iter()
        .copied()
        .filter(|r| limits.q3_a2.contains(r.q3))
        .collect();
    in_range.sort_by(|x, y| x.q3.abs().total_cmp(&y.q3.abs()));
    let chosen = match (in_range.first(), in_range.last(), opts.root) {
        (Some(first), _, RootChoice::MinAbs) => *first,
        (Some(_), Some(last), RootChoice::Other) => *last,
        _ => *roots
            .iter()
            .min_by(|x, y| x.q3.abs().total_cmp(&y.q3.abs()))
            .expect("roots is non-empty"),
    };

    verify_root(chosen, (t1, t3), root_term, geom)?;

    let joints = JointVector::new(Arch::Athena2, chain.q1, chain.q2, chosen.q3, q4);
    let violations = limit_violations(&joints, limits);
    if opts.check_limits && !violations.is_empty() {
        if in_range.is_empty() && violations.iter().all(|v| matches!(v.joint, Joint::Q3)) {
            return Err(Error::NoRootInRange {
                roots: roots.iter().map(|r| r.q3).collect(),
            });
        }
        return Err(Error::JointLimit { violations });
    }
    let t2 = root_term - geom.l2 * chosen.q3.cos();
    Ok(IkSolution {
        joints,
        intermediates: Intermediates2 { t1, t2, t3 },
        violations,
    })
}

fn verify_root(
    root: CrankRoot,
    t_tip: (f64, f64),
    root_term: f64,
    geom: &GeometryParams,
) -> Result<()> {
    // g'(q3) = l2 (sin q3 - cos q3); near its zero the root is ill-conditioned
    // and the admissible disagreement grows with 1/|g'|.
    let slope = geom.l2 * (root.q3.sin() - root.q3.cos());
    let magnitude = (t_tip.0 - geom.l4).abs() * 2.0 + root_term.abs() + 2.0 * geom.l2;
    let tol = 1e-12 + 16.0 * f64::EPSILON * magnitude / slope.abs().max(f64::MIN_POSITIVE);
    match bracketed_crank_root(t_tip, root_term, root.q3, root.side, geom) {
        Some(numeric) if (numeric - root.q3).abs() <= tol => Ok(()),
        Some(numeric) => Err(Error::RootVerification {
            analytic: root.q3,
            numeric,
        }),
        // tangential root: no sign change, accept when the residual vanishes
        None => {
            let t = Intermediates2 {
                t1: t_tip.0,
                t2: root_term - geom.l2 * root.q3.cos(),
                t3: t_tip.1,
            };
            let g = crank_expr(&t, root.q3, geom) - root.side * geom.l2;
            if g.abs() <= 1e-9 * geom.l2 {
                Ok(())
            } else {
                Err(Error::RootVerification {
                    analytic: root.q3,
                    numeric: f64::NAN,
                })
            }
        }
    }
}
