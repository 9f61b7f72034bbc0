#![allow(dead_code)]

use athena_kin::config::{default_geometry, Config};
use athena_kin::kinematics::{ik, Arch, SolveOptions};
use athena_kin::kinematics::{residuals, ChainVariant, JointVector};
use athena_kin::rcm::{tip_to_pose_unchecked, TaskPose, TipPoint};
use athena_kin::workspace::GridSpec;
use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cfg() -> Config {
    default_geometry()
}

/// Uniform tip inside the default grid box with a random roll angle.
pub fn random_pose(rng: &mut ChaCha8Rng, cfg: &Config, with_roll: bool) -> TaskPose {
    let g = GridSpec::default();
    let tip = TipPoint::new(
        rng.random_range(g.x_range.min..=g.x_range.max),
        rng.random_range(g.y_range.min..=g.y_range.max),
        rng.random_range(g.z_range.min..=g.z_range.max),
    );
    let phi = if with_roll {
        rng.random_range(-1.5..1.5)
    } else {
        0.0
    };
    tip_to_pose_unchecked(&tip, phi, &cfg.geometry)
        .unwrap()
        .pose
}

/// `n` poses that `arch` reaches within all joint and insertion limits.
pub fn reachable_poses(arch: Arch, n: usize, seed: u64, opts: &SolveOptions) -> Vec<TaskPose> {
    let cfg = cfg();
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(n);
    let checked = SolveOptions {
        check_limits: true,
        ..*opts
    };
    while out.len() < n {
        let pose = random_pose(&mut rng, &cfg, true);
        if !(pose.l_ins >= 0.0 && pose.l_ins < cfg.limits.lins_max) {
            continue;
        }
        if ik(arch, &pose, &cfg.geometry, &cfg.limits, &checked).is_ok() {
            out.push(pose);
        }
    }
    out
}

/// Angle difference folded into (-pi, pi].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    if d > std::f64::consts::PI {
        d - std::f64::consts::TAU
    } else {
        d
    }
}

pub fn pose_distance(a: &TaskPose, b: &TaskPose) -> f64 {
    angle_diff(a.psi, b.psi)
        .abs()
        .max((a.theta - b.theta).abs())
        .max(angle_diff(a.phi, b.phi).abs())
        .max((a.l_ins - b.l_ins).abs())
}

/// One-sided differences with a sqrt(eps) step, written without the library helpers.
pub fn forward_difference(pose: &TaskPose, q: &JointVector) -> (Matrix4<f64>, Matrix4<f64>) {
    let g = default_geometry().geometry;
    let f =
        |p: &TaskPose, q: &JointVector| residuals(q, p, &g, ChainVariant::Literal).unwrap().values;
    let base = f(pose, q);
    let mut jq = Matrix4::zeros();
    let mut jx = Matrix4::zeros();
    for c in 0..4 {
        let mut a = q.to_array();
        let h = f64::EPSILON.sqrt() * a[c].abs().max(1.0);
        a[c] += h;
        let v = f(pose, &q.with_array(a));
        for r in 0..4 {
            jq[(r, c)] = (v[r] - base[r]) / h;
        }
        let mut b = pose.to_array();
        let h = f64::EPSILON.sqrt() * b[c].abs().max(1.0);
        b[c] += h;
        let v = f(&TaskPose::from_array(b), q);
        for r in 0..4 {
            jx[(r, c)] = (v[r] - base[r]) / h;
        }
    }
    (jq, jx)
}

/// Element-wise relative agreement; entries far below their row scale are compared against it.
pub fn jacobians_close(a: &Matrix4<f64>, b: &Matrix4<f64>) -> bool {
    (0..4).all(|r| {
        let row = (0..4).map(|c| a[(r, c)].abs()).fold(0.0, f64::max);
        (0..4).all(|c| {
            (a[(r, c)] - b[(r, c)]).abs() <= 1e-4 * a[(r, c)].abs().max(1e-3 * row).max(1e-12)
        })
    })
}
