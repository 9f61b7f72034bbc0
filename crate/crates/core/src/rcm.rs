//! Remote-center-of-motion model: instrument pose <-> tip coordinates.
//!
//! The tip lies on the instrument axis at distance `l_tool - l_ins` from the
//! RCM, along the direction `(cos psi sin theta, sin psi sin theta, cos theta)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::{GeometryParams, JointLimits};
use crate::error::{Error, Result};

/// Instrument orientation and insertion about the RCM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskPose {
    /// Azimuth, rad.
    pub psi: f64,
    /// Polar angle, rad.
    pub theta: f64,
    /// Tip roll, rad.
    pub phi: f64,
    /// Insertion measured from the RCM, mm.
    pub l_ins: f64,
}

impl TaskPose {
    pub const fn new(psi: f64, theta: f64, phi: f64, l_ins: f64) -> Self {
        TaskPose {
            psi,
            theta,
            phi,
            l_ins,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.psi, self.theta, self.phi, self.l_ins]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        TaskPose::new(a[0], a[1], a[2], a[3])
    }

    /// Unit vector along the instrument axis, pointing from the RCM to the tip.
    pub fn axis(&self) -> [f64; 3] {
        let (sp, cp) = self.psi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        [cp * st, sp * st, ct]
    }
}

/// Tip coordinates in the RCM-centered frame, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl TipPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        TipPoint { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Result of inverting the RCM model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredPose {
    pub pose: TaskPose,
    /// Set when the tip lies on the polar axis and `psi` was fixed to zero.
    pub azimuth_degenerate: bool,
}

pub fn pose_to_tip(pose: &TaskPose, geom: &GeometryParams) -> TipPoint {
    let r = geom.l_tool - pose.l_ins;
    let (sp, cp) = pose.psi.sin_cos();
    let (st, ct) = pose.theta.sin_cos();
    TipPoint {
        x: cp * st * r,
        y: sp * st * r,
        z: ct * r,
    }
}

/// Inverts [`pose_to_tip`] for a given roll angle.
///
/// `theta` lands in `[0, pi]` (`pi` only on the negative polar axis) and
/// `psi` in `(-pi, pi]`, with `psi = 0` on the polar axis.
pub fn tip_to_pose(
    tip: &TipPoint,
    phi: f64,
    geom: &GeometryParams,
    limits: &JointLimits,
) -> Result<RecoveredPose> {
    let recovered = tip_to_pose_unchecked(tip, phi, geom)?;
    let l_ins = recovered.pose.l_ins;
    if !(l_ins >= 0.0 && l_ins < limits.lins_max) {
        return Err(Error::InsertionOutOfRange {
            l_ins,
            lins_max: limits.lins_max,
        });
    }
    Ok(recovered)
}

/// Same as [`tip_to_pose`] without the insertion-range check.
pub fn tip_to_pose_unchecked(
    tip: &TipPoint,
    phi: f64,
    geom: &GeometryParams,
) -> Result<RecoveredPose> {
    let r = tip.norm();
    if r == 0.0 {
        return Err(Error::DegenerateTip);
    }
    let theta = (tip.z / r).clamp(-1.0, 1.0).acos();
    let degenerate = tip.x == 0.0 && tip.y == 0.0;
    let psi = if degenerate {
        0.0
    } else {
        let a = tip.y.atan2(tip.x);
        if a == -PI {
            PI
        } else {
            a
        }
    };
    Ok(RecoveredPose {
        pose: TaskPose {
            psi,
            theta,
            phi,
            l_ins: geom.l_tool - r,
        },
        azimuth_degenerate: degenerate,
    })
}
