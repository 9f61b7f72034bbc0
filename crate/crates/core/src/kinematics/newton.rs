//! Forward kinematics by damped Newton iteration on the residual system.
//!
//! Unknowns are the task coordinates `(psi, theta, phi, l_ins)`; joints are
//! held fixed. The task Jacobian is taken by central differences.
//!
//! The residual system can have several solutions for one joint vector.
//! [`fk_solutions`] enumerates them: the first two equations pin `Yp` and put
//! the tip on a circle in the XZ plane, and the third is bracketed along
//! that circle.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use nalgebra::{Matrix4, Vector4};

use super::{
    ik, residuals, solve_q4, Arch, Branch, ChainVariant, JointVector, Residuals, RootChoice,
    SolveOptions,
};
use crate::config::{GeometryParams, JointLimits};
use crate::error::{Error, Result};
use crate::jacobian::{condition_number, task_jacobian};
use crate::rcm::{tip_to_pose_unchecked, TaskPose, TipPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkSettings {
    /// Convergence threshold on the largest scaled residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Condition estimate of the equilibrated task Jacobian treated as singular.
    pub max_condition: f64,
    pub variant: ChainVariant,
    /// Root convention the returned pose must reproduce under inverse kinematics.
    pub root: RootChoice,
}

impl Default for FkSettings {
    fn default() -> Self {
        FkSettings {
            tolerance: 1e-10,
            max_iterations: 50,
            max_condition: 1e12,
            variant: ChainVariant::Literal,
            root: RootChoice::MinAbs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkSolution {
    pub pose: TaskPose,
    pub iterations: usize,
    /// Largest scaled residual at the returned pose.
    pub residual: f64,
}

/// Mid-range starting pose: `psi = 0`, `theta = 3pi/4`, half insertion depth.
pub fn default_seed(limits: &JointLimits) -> TaskPose {
    TaskPose::new(0.0, 3.0 * FRAC_PI_4, 0.0, 0.5 * limits.lins_max)
}

/// Sum of squared scaled residuals.
fn merit(r: &Residuals) -> f64 {
    r.scaled().iter().map(|v| v * v).sum()
}

/// Brings `(psi, theta)` back to `psi ∈ (-pi, pi]`, `theta ∈ [0, pi]`
/// without moving the tip.
fn normalize(mut pose: TaskPose) -> TaskPose {
    let mut theta = pose.theta.rem_euclid(TAU);
    let mut psi = pose.psi;
    if theta > PI {
        theta = TAU - theta;
        psi += PI;
    }
    let mut w = psi.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    pose.theta = theta;
    pose.psi = w;
    pose
}

/// Plain damped Newton from `seed`, no consistency check.
pub fn newton(
    q: &JointVector,
    geom: &GeometryParams,
    seed: &TaskPose,
    settings: &FkSettings,
) -> Result<FkSolution> {
    let eval = |x: &Vector4<f64>| {
        residuals(
            q,
            &TaskPose::new(x[0], x[1], x[2], x[3]),
            geom,
            settings.variant,
        )
    };

    let mut x = Vector4::from(seed.to_array());
    let mut r = eval(&x)?;
    let mut current = merit(&r);
    // row and column equilibration for the conditioning test
    let col_scale = Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, geom.l_tool));

    let mut iterations = 0;
    let mut converged_at: Option<usize> = None;
    while iterations < settings.max_iterations {
        if r.max_scaled() <= settings.tolerance && converged_at.is_none() {
            converged_at = Some(iterations);
        }
        // a couple of polishing steps after reaching tolerance
        if let Some(k) = converged_at {
            if iterations >= k + 2 {
                break;
            }
        }

        let pose = TaskPose::new(x[0], x[1], x[2], x[3]);
        let jac = task_jacobian(q, &pose, geom, settings.variant)?;
        let row_scale = Matrix4::from_diagonal(&Vector4::from_fn(|i, _| 1.0 / r.scales[i]));
        let cond = condition_number(&(row_scale * jac * col_scale));
        if !(cond <= settings.max_condition) {
            if converged_at.is_some() {
                break;
            }
            return Err(Error::SingularJacobian { condition: cond });
        }
        let Some(step) = jac.lu().solve(&-Vector4::from(r.values)) else {
            return Err(Error::SingularJacobian {
                condition: f64::INFINITY,
            });
        };

        iterations += 1;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = x + step * alpha;
            if let Ok(rt) = eval(&trial) {
                let m = merit(&rt);
                if m < current {
                    x = trial;
                    r = rt;
                    current = m;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let residual = r.max_scaled();
    if residual > settings.tolerance {
        return Err(Error::NoConvergence {
            iterations,
            residual,
        });
    }
    let mut pose = normalize(TaskPose::new(x[0], x[1], x[2], x[3]));
    // the roll drive is direct; report its principal value exactly
    pose.phi = solve_q4(q.q4);
    Ok(FkSolution {
        pose,
        iterations,
        residual,
    })
}

fn solve_options(q: &JointVector, settings: &FkSettings) -> SolveOptions {
    let d = settings.variant.diff_term(q.q1, q.q2);
    SolveOptions {
        variant: settings.variant,
        branch: if d < 0.0 { Branch::Minus } else { Branch::Plus },
        root: settings.root,
        check_limits: false,
    }
}

/// True when inverse kinematics at `pose` gives back `q` (1e-8 relative).
pub fn reproduces(
    q: &JointVector,
    pose: &TaskPose,
    geom: &GeometryParams,
    limits: &JointLimits,
    settings: &FkSettings,
) -> bool {
    let Ok(sol) = ik(q.arch, pose, geom, limits, &solve_options(q, settings)) else {
        return false;
    };
    q.to_array()
        .iter()
        .zip(sol.joints.to_array())
        .all(|(a, b)| (a - b).abs() <= 1e-8 * a.abs().max(1.0))
}

const CIRCLE_SAMPLES: usize = 1440;

/// Every pose consistent with `q`, ordered by circle angle.
///
/// Only poses that reproduce `q` under inverse kinematics are kept, so the
/// branch and root conventions of the inverse map carry over.
pub fn fk_solutions(
    q: &JointVector,
    geom: &GeometryParams,
    limits: &JointLimits,
    settings: &FkSettings,
) -> Vec<FkSolution> {
    let d = settings.variant.diff_term(q.q1, q.q2);
    let rad = geom.l1 * geom.l1 - d * d;
    if !(rad >= 0.0) {
        return Vec::new();
    }
    let radius = geom.l4 + rad.sqrt();
    let yp = geom.l02 + settings.variant.sum_term(q.q1, q.q2);
    let phi = solve_q4(q.q4);
    let pose_at = |alpha: f64| {
        let tip = TipPoint::new(
            geom.l01 + radius * alpha.cos(),
            yp,
            geom.l03 + radius * alpha.sin(),
        );
        tip_to_pose_unchecked(&tip, phi, geom).ok().map(|r| r.pose)
    };
    let f3_at = |alpha: f64| -> Option<f64> {
        let pose = pose_at(alpha)?;
        residuals(q, &pose, geom, settings.variant)
            .ok()
            .map(|r| r.values[2])
    };

    let step = TAU / CIRCLE_SAMPLES as f64;
    let samples: Vec<(f64, Option<f64>)> = (0..=CIRCLE_SAMPLES)
        .map(|k| {
            let alpha = -PI + k as f64 * step;
            (alpha, f3_at(alpha))
        })
        .collect();

    let mut seeds: Vec<f64> = Vec::new();
    for w in samples.windows(2) {
        if let [(a0, Some(v0)), (a1, Some(v1))] = *w {
            if v0 == 0.0 || v0.signum() != v1.signum() {
                seeds.push(bisect(&f3_at, a0, a1, v0));
            }
        }
    }
    // A root next to the edge of the residuals' domain has no defined
    // neighbour on one side; test the sign just inside the edge instead.
    for w in samples.windows(2) {
        let (inside, outside, v) = match *w {
            [(a0, Some(v0)), (a1, None)] => (a0, a1, v0),
            [(a0, None), (a1, Some(v1))] => (a1, a0, v1),
            _ => continue,
        };
        let edge = domain_edge(&f3_at, inside, outside);
        let Some(ve) = f3_at(edge) else { continue };
        if ve == 0.0 || ve.signum() != v.signum() {
            seeds.push(bisect(&f3_at, edge, inside, ve));
            continue;
        }
        let s = v.signum();
        let (lo, hi) = if edge < inside {
            (edge, inside)
        } else {
            (inside, edge)
        };
        if let Some((am, vm)) = golden_min(|a| f3_at(a).map(|x| s * x), lo, hi) {
            if vm <= 0.0 {
                seeds.push(bisect(&f3_at, edge, am, ve));
                seeds.push(bisect(&f3_at, am, inside, s * vm));
            }
        }
    }
    // Two roots closer than the sample spacing leave no sign change; they
    // show up as a dip in |f3| whose extremum crosses or touches zero.
    for w in samples.windows(3) {
        if let [(a0, Some(v0)), (_, Some(v1)), (a2, Some(v2))] = *w {
            let same = v0.signum() == v1.signum() && v1.signum() == v2.signum() && v1 != 0.0;
            if !(same && v1.abs() < v0.abs() && v1.abs() <= v2.abs()) {
                continue;
            }
            let s = v1.signum();
            let Some((am, vm)) = golden_min(|a| f3_at(a).map(|v| s * v), a0, a2) else {
                continue;
            };
            if vm <= 0.0 {
                seeds.push(bisect(&f3_at, a0, am, v0));
                seeds.push(bisect(&f3_at, am, a2, v2));
            } else if vm <= 1e-6 * v0.abs().max(v2.abs()) {
                seeds.push(am);
            }
        }
    }

    seeds.sort_by(f64::total_cmp);
    let mut out: Vec<FkSolution> = Vec::new();
    for alpha in seeds {
        let Some(seed) = pose_at(alpha) else { continue };
        if let Ok(sol) = newton(q, geom, &seed, settings) {
            let dup = out
                .iter()
                .any(|o| pose_gap(&o.pose, &sol.pose, geom) < 1e-7);
            if !dup && reproduces(q, &sol.pose, geom, limits, settings) {
                out.push(sol);
            }
        }
    }
    out
}

/// Bisection on a sign change; `v_lo` is the value at `lo`.
fn bisect(f: &impl Fn(f64) -> Option<f64>, mut lo: f64, mut hi: f64, mut v_lo: f64) -> f64 {
    if v_lo == 0.0 {
        return lo;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let Some(vm) = f(mid) else { break };
        if vm == 0.0 {
            return mid;
        }
        if vm.signum() == v_lo.signum() {
            lo = mid;
            v_lo = vm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Last defined point on the way from `inside` to `outside`.
fn domain_edge(f: &impl Fn(f64) -> Option<f64>, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (inside + outside);
        if f(mid).is_some() {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Golden-section minimum of `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> Option<f64>, mut a: f64, mut b: f64) -> Option<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Some(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Max coordinate gap with angles wrapped and insertion scaled by the tool length.
fn pose_gap(a: &TaskPose, b: &TaskPose, geom: &GeometryParams) -> f64 {
    let wrap = |x: f64| {
        let w = x.rem_euclid(TAU);
        w.min(TAU - w)
    };
    wrap(a.psi - b.psi)
        .max((a.theta - b.theta).abs())
        .max(wrap(a.phi - b.phi))
        .max((a.l_ins - b.l_ins).abs() / geom.l_tool)
}

/// Forward kinematics of either architecture (dispatch on `q.arch`).
///
/// Newton from `seed` is accepted when the result has a valid insertion
/// depth and maps back to `q`. Otherwise the consistent pose closest to the
/// seed is returned, preferring valid insertion depths.
pub fn fk(
    q: &JointVector,
    geom: &GeometryParams,
    limits: &JointLimits,
    seed: &TaskPose,
    settings: &FkSettings,
) -> Result<FkSolution> {
    let valid = |p: &TaskPose| p.l_ins >= 0.0 && p.l_ins < limits.lins_max;
    let direct = newton(q, geom, seed, settings);
    if let Ok(sol) = &direct {
        if valid(&sol.pose) && reproduces(q, &sol.pose, geom, limits, settings) {
            return direct;
        }
    }
    let all = fk_solutions(q, geom, limits, settings);
    let gap = |s: &FkSolution| pose_gap(&s.pose, seed, geom);
    let pick = all
        .iter()
        .filter(|s| valid(&s.pose))
        .min_by(|a, b| gap(a).total_cmp(&gap(b)))
        .or_else(|| all.iter().min_by(|a, b| gap(a).total_cmp(&gap(b))));
    match (pick, direct) {
        (Some(s), _) => Ok(*s),
        // no pose can evaluate the residuals at all
        (None, Err(Error::Domain { .. })) => Err(Error::NoConvergence {
            iterations: 0,
            residual: f64::INFINITY,
        }),
        (None, Err(e)) => Err(e),
        (None, Ok(sol)) => Err(Error::NoConvergence {
            iterations: sol.iterations,
            residual: sol.residual,
        }),
    }
}

pub fn fk_a1(
    q: &JointVector,
    geom: &GeometryParams,
    limits: &JointLimits,
    seed: &TaskPose,
    settings: &FkSettings,
) -> Result<FkSolution> {
    debug_assert_eq!(q.arch, Arch::Athena1);
    fk(q, geom, limits, seed, settings)
}

pub fn fk_a2(
    q: &JointVector,
    geom: &GeometryParams,
    limits: &JointLimits,
    seed: &TaskPose,
    settings: &FkSettings,
) -> Result<FkSolution> {
    debug_assert_eq!(q.arch, Arch::Athena2);
    fk(q, geom, limits, seed, settings)
}
