//! Deflection-based stiffness, the published FEM comparison table, and a
//! lumped joint-compliance estimate of tip stiffness.
//!
//! The lumped estimate maps per-joint stiffness through the numeric
//! Jacobians. It is a model comparison aid and is always tagged
//! [`Provenance::LumpedModel`]; it does not reproduce the FEM values.

use std::fmt;

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::config::{GeometryParams, JointLimits, StiffnessSection};
use crate::error::{Error, Result};
use crate::jacobian::{condition_number, numeric_jacobians};
use crate::kinematics::{Arch, ChainVariant, JointVector};
use crate::rcm::{tip_to_pose, TaskPose, TipPoint};
use crate::workspace::{classify_point, enumerate_grid, ClassifyOptions, GridSpec};

/// Tip load used in the FEM study, N.
pub const REFERENCE_FORCE_N: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    PaperTable,
    LumpedModel,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::PaperTable => "PAPER_TABLE",
            Provenance::LumpedModel => "LUMPED_MODEL",
        }
    }
}

/// `K = F / delta`, N/mm.
pub fn stiffness_from_deflection(force: f64, deflection: f64) -> Result<f64> {
    if !(deflection > 0.0) {
        return Err(Error::NonPositiveDeflection(deflection));
    }
    if !(force >= 0.0) {
        return Err(Error::NegativeForce(force));
    }
    Ok(force / deflection)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessSample {
    pub force: f64,
    pub deflection: f64,
    pub stiffness: f64,
}

impl StiffnessSample {
    pub fn new(force: f64, deflection: f64) -> Result<Self> {
        Ok(StiffnessSample {
            force,
            deflection,
            stiffness: stiffness_from_deflection(force, deflection)?,
        })
    }
}

/// Published FEM results for one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedRow {
    pub label: String,
    pub sample: StiffnessSample,
    /// Stiffness as quoted alongside the displacement, N/mm.
    pub quoted_stiffness: f64,
    pub von_mises_mpa: f64,
}

/// Tip displacement under 30 N, quoted stiffness and peak von Mises stress.
pub fn published_rows() -> Vec<PublishedRow> {
    [
        ("ATHENA-1", 0.23, 130.43, 15.29),
        ("ATHENA-2", 3.96, 7.58, 197.29),
    ]
    .into_iter()
    .map(|(label, d, k, vm)| PublishedRow {
        label: label.to_string(),
        sample: StiffnessSample::new(REFERENCE_FORCE_N, d).expect("positive deflection"),
        quoted_stiffness: k,
        von_mises_mpa: vm,
    })
    .collect()
}

/// Commercial reference band: displacement, stiffness and stress ranges.
pub const COMMERCIAL_DISPLACEMENT_MM: (f64, f64) = (0.2, 0.5);
pub const COMMERCIAL_STIFFNESS_N_PER_MM: (f64, f64) = (5.0, 10.0);
pub const COMMERCIAL_VON_MISES_MPA: (f64, f64) = (30.0, 65.0);
/// Wider displacement range quoted for current systems, mm.
pub const SYSTEMS_DISPLACEMENT_RANGE_MM: (f64, f64) = (0.1, 1.4);

/// Per-joint stiffness: N/mm for prismatic joints, N·mm/rad for revolute ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointStiffness(pub [f64; 4]);

impl JointStiffness {
    /// Illustrative values from the configuration, by joint type.
    pub fn from_config(arch: Arch, s: &StiffnessSection) -> Self {
        let p = s.prismatic_n_per_mm;
        let r = s.revolute_nmm_per_rad;
        match arch {
            Arch::Athena1 => JointStiffness([p, p, p, r]),
            Arch::Athena2 => JointStiffness([p, p, r, r]),
        }
    }

    pub fn scaled(self, k: f64) -> Self {
        JointStiffness(self.0.map(|v| v * k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipStiffnessEstimate {
    pub arch: Arch,
    /// Cartesian tip stiffness, N/mm, row-major.
    pub matrix: [[f64; 3]; 3],
    /// `1 / (u^T C u)` with `u` the instrument axis and `C` the tip compliance.
    pub scalar_along_axis: f64,
    pub provenance: Provenance,
    pub pose: TaskPose,
}

impl TipStiffnessEstimate {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.matrix[i][j])
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let ev = self.matrix().symmetric_eigenvalues();
        let mut v = [ev[0], ev[1], ev[2]];
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Tip position Jacobian with respect to `(psi, theta, phi, l_ins)`.
fn tip_task_jacobian(pose: &TaskPose, geom: &GeometryParams) -> Matrix3x4<f64> {
    let r = geom.l_tool - pose.l_ins;
    let (sp, cp) = pose.psi.sin_cos();
    let (st, ct) = pose.theta.sin_cos();
    Matrix3x4::new(
        -r * sp * st,
        r * cp * ct,
        0.0,
        -cp * st,
        r * cp * st,
        r * sp * ct,
        0.0,
        -sp * st,
        0.0,
        -r * st,
        0.0,
        -ct,
    )
}

/// Lumped tip stiffness at a consistent (pose, joints) pair.
///
/// Joint displacements map to task displacements through
/// `dx = -Jx^-1 Jq dq`, and to the tip through the RCM model. The tip
/// compliance is `C = J Kq^-1 J^T`; the returned stiffness is `C^-1`.
pub fn lumped_tip_stiffness(
    pose: &TaskPose,
    q: &JointVector,
    geom: &GeometryParams,
    joint_stiffness: &JointStiffness,
    variant: ChainVariant,
) -> Result<TipStiffnessEstimate> {
    if joint_stiffness.0.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::NonPositiveStiffness);
    }
    let jp = numeric_jacobians(pose, q, geom, variant)?;
    let cond = condition_number(&jp.jx);
    let Some(jx_inv) = jp.jx.try_inverse() else {
        return Err(Error::SingularJacobian { condition: cond });
    };
    let task_from_joint: Matrix4<f64> = -(jx_inv * jp.jq);
    let jtip = tip_task_jacobian(pose, geom) * task_from_joint;
    let compliance_q =
        Matrix4::from_diagonal(&nalgebra::Vector4::from(joint_stiffness.0.map(|k| 1.0 / k)));
    let c = jtip * compliance_q * jtip.transpose();
    let c = (c + c.transpose()) * 0.5;
    // positive definiteness check; the inverse itself goes through LU so that
    // power-of-two scalings of the joint stiffness propagate exactly
    let (Some(_), Some(k)) = (c.cholesky(), c.try_inverse()) else {
        return Err(Error::SingularJacobian {
            condition: condition_number(&jp.jq),
        });
    };
    let k = (k + k.transpose()) * 0.5;
    let u = Vector3::from(pose.axis());
    let along = 1.0 / (u.transpose() * c * u)[(0, 0)];
    Ok(TipStiffnessEstimate {
        arch: q.arch,
        matrix: std::array::from_fn(|i| std::array::from_fn(|j| k[(i, j)])),
        scalar_along_axis: along,
        provenance: Provenance::LumpedModel,
        pose: *pose,
    })
}

/// A pose both architectures reach inside all limits, with both joint vectors.
///
/// Picks the 20 mm grid point valid for both robots that lies closest to the
/// centroid of the common points (lowest grid index on ties).
pub fn matched_pose(
    geom: &GeometryParams,
    limits: &JointLimits,
) -> Option<(TaskPose, JointVector, JointVector)> {
    let spec = GridSpec::default().with_increment(20.0);
    let opts = ClassifyOptions::default();
    let common: Vec<(TipPoint, JointVector, JointVector)> = enumerate_grid(&spec)
        .filter_map(|tip| {
            let a = classify_point(&tip, Arch::Athena1, geom, limits, &opts).joints?;
            let b = classify_point(&tip, Arch::Athena2, geom, limits, &opts).joints?;
            Some((tip, a, b))
        })
        .collect();
    if common.is_empty() {
        return None;
    }
    let n = common.len() as f64;
    let c = common.iter().fold([0.0; 3], |acc, (t, _, _)| {
        [acc[0] + t.x / n, acc[1] + t.y / n, acc[2] + t.z / n]
    });
    let dist = |t: &TipPoint| (t.x - c[0]).powi(2) + (t.y - c[1]).powi(2) + (t.z - c[2]).powi(2);
    let (tip, a, b) = common
        .iter()
        .min_by(|x, y| dist(&x.0).total_cmp(&dist(&y.0)))
        .copied()?;
    let pose = tip_to_pose(&tip, 0.0, geom, limits).ok()?.pose;
    Some((pose, a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Value(f64),
    Range(f64, f64),
    Missing,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Value(v) => write!(f, "{v:.2}"),
            Cell::Range(a, b) => write!(f, "{a}-{b}"),
            Cell::Missing => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub displacement_mm: Cell,
    pub stiffness_n_per_mm: Cell,
    pub von_mises_mpa: Cell,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessReport {
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

/// Table of published rows (stiffness recomputed from the displacement),
/// the commercial band, and any lumped-model estimates.
pub fn stiffness_report(
    samples: &[PublishedRow],
    estimates: &[TipStiffnessEstimate],
) -> StiffnessReport {
    let mut rows: Vec<ReportRow> = samples
        .iter()
        .map(|s| ReportRow {
            label: s.label.clone(),
            displacement_mm: Cell::Value(s.sample.deflection),
            stiffness_n_per_mm: Cell::Value(s.sample.stiffness),
            von_mises_mpa: Cell::Value(s.von_mises_mpa),
            provenance: Provenance::PaperTable,
        })
        .collect();
    rows.push(ReportRow {
        label: "Commercial robot".into(),
        displacement_mm: Cell::Range(COMMERCIAL_DISPLACEMENT_MM.0, COMMERCIAL_DISPLACEMENT_MM.1),
        stiffness_n_per_mm: Cell::Range(
            COMMERCIAL_STIFFNESS_N_PER_MM.0,
            COMMERCIAL_STIFFNESS_N_PER_MM.1,
        ),
        von_mises_mpa: Cell::Range(COMMERCIAL_VON_MISES_MPA.0, COMMERCIAL_VON_MISES_MPA.1),
        provenance: Provenance::PaperTable,
    });
    let mut notes = vec![format!(
        "PAPER_TABLE rows are FEM results under a {REFERENCE_FORCE_N} N tip load; stiffness recomputed as K = F / delta"
    )];
    notes.push(format!(
        "current surgical systems are also quoted with {}-{} mm maximum displacement",
        SYSTEMS_DISPLACEMENT_RANGE_MM.0, SYSTEMS_DISPLACEMENT_RANGE_MM.1
    ));

    if estimates.is_empty() {
        notes.push("no model estimates".into());
    }
    for e in estimates {
        rows.push(ReportRow {
            label: format!("{} (lumped)", e.arch.label()),
            displacement_mm: Cell::Value(REFERENCE_FORCE_N / e.scalar_along_axis),
            stiffness_n_per_mm: Cell::Value(e.scalar_along_axis),
            von_mises_mpa: Cell::Missing,
            provenance: Provenance::LumpedModel,
        });
    }
    let a1 = estimates.iter().find(|e| e.arch == Arch::Athena1);
    let a2 = estimates.iter().find(|e| e.arch == Arch::Athena2);
    if let (Some(a1), Some(a2)) = (a1, a2) {
        let stiffer = if a1.scalar_along_axis >= a2.scalar_along_axis {
            "ATHENA-1"
        } else {
            "ATHENA-2"
        };
        notes.push(format!(
            "lumped model: axial stiffness ratio ATHENA-1/ATHENA-2 = {:.4} ({stiffer} stiffer); FEM ranks ATHENA-1 stiffer",
            a1.scalar_along_axis / a2.scalar_along_axis
        ));
    }
    if !estimates.is_empty() {
        notes.push("LUMPED_MODEL rows use illustrative joint stiffness values and do not reproduce the FEM data".into());
    }
    StiffnessReport { rows, notes }
}

impl fmt::Display for StiffnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<22} {:>18} {:>18} {:>20} {:>14}",
            "robot", "displacement [mm]", "stiffness [N/mm]", "von Mises [MPa]", "provenance"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<22} {:>18} {:>18} {:>20} {:>14}",
                r.label,
                r.displacement_mm.to_string(),
                r.stiffness_n_per_mm.to_string(),
                r.von_mises_mpa.to_string(),
                r.provenance.as_str()
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_geometry;
    use crate::kinematics::{ik, SolveOptions};
    use crate::rcm::{tip_to_pose_unchecked, TipPoint};

    #[test]
    fn published_stiffness_values() {
        assert!((stiffness_from_deflection(30.0, 0.23).unwrap() - 130.43).abs() < 0.01);
        assert!((stiffness_from_deflection(30.0, 3.96).unwrap() - 7.58).abs() < 0.01);
        assert_eq!(stiffness_from_deflection(10.0, 1.0).unwrap(), 10.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            stiffness_from_deflection(30.0, 0.0),
            Err(Error::NonPositiveDeflection(_))
        ));
        assert!(matches!(
            stiffness_from_deflection(30.0, -1.0),
            Err(Error::NonPositiveDeflection(_))
        ));
        assert!(matches!(
            stiffness_from_deflection(-1.0, 1.0),
            Err(Error::NegativeForce(_))
        ));
    }

    #[test]
    fn quoted_values_match_recomputed() {
        for row in published_rows() {
            assert!(
                (row.sample.stiffness - row.quoted_stiffness).abs() < 0.01,
                "{}",
                row.label
            );
        }
    }

    #[test]
    fn report_without_estimates() {
        let rep = stiffness_report(&published_rows(), &[]);
        assert_eq!(rep.rows.len(), 3);
        assert!(rep
            .rows
            .iter()
            .all(|r| r.provenance == Provenance::PaperTable));
        assert!(rep.notes.iter().any(|n| n == "no model estimates"));
        let text = rep.to_string();
        assert!(text.contains("130.43"));
        assert!(text.contains("7.58"));
        assert!(text.contains("5-10"));
    }

    fn estimate(arch: Arch, scale: f64) -> TipStiffnessEstimate {
        let cfg = default_geometry();
        let tip = TipPoint::new(180.0, -60.0, -260.0);
        let pose = tip_to_pose_unchecked(&tip, 0.0, &cfg.geometry)
            .unwrap()
            .pose;
        let q = ik(
            arch,
            &pose,
            &cfg.geometry,
            &cfg.limits,
            &SolveOptions::default(),
        )
        .unwrap()
        .joints;
        let ks = JointStiffness::from_config(arch, &cfg.stiffness).scaled(scale);
        lumped_tip_stiffness(&pose, &q, &cfg.geometry, &ks, ChainVariant::Literal).unwrap()
    }

    #[test]
    fn lumped_linear_in_joint_stiffness() {
        for arch in Arch::BOTH {
            let a = estimate(arch, 1.0);
            let b = estimate(arch, 2.0);
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(b.matrix[i][j], 2.0 * a.matrix[i][j]);
                }
            }
            assert_eq!(b.scalar_along_axis, 2.0 * a.scalar_along_axis);
        }
    }

    #[test]
    fn lumped_symmetric_positive_definite() {
        for arch in Arch::BOTH {
            let e = estimate(arch, 1.0);
            let m = e.matrix();
            assert!((m - m.transpose()).abs().max() <= 1e-9 * m.abs().max());
            assert!(e.eigenvalues()[0] > 0.0);
            assert_eq!(e.provenance, Provenance::LumpedModel);
        }
    }

    #[test]
    fn mixed_report_tags_every_row() {
        let rep = stiffness_report(
            &published_rows(),
            &[estimate(Arch::Athena1, 1.0), estimate(Arch::Athena2, 1.0)],
        );
        assert_eq!(rep.rows.len(), 5);
        assert_eq!(
            rep.rows
                .iter()
                .filter(|r| r.provenance == Provenance::LumpedModel)
                .count(),
            2
        );
        assert!(rep.notes.iter().any(|n| n.contains("ratio")));
    }

    #[test]
    fn rejects_nonpositive_joint_stiffness() {
        let cfg = default_geometry();
        let pose = TaskPose::new(0.0, 2.3, 0.0, 100.0);
        let q = JointVector::new(Arch::Athena1, 0.0, 0.0, 0.0, 0.0);
        let ks = JointStiffness([1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(
            lumped_tip_stiffness(&pose, &q, &cfg.geometry, &ks, ChainVariant::Literal),
            Err(Error::NonPositiveStiffness)
        ));
    }
}
