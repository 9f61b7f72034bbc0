mod common;

use athena_kin::config::default_geometry;
use athena_kin::kinematics::{ik, Arch, ChainVariant, SolveOptions};
use athena_kin::stiffness::*;
use athena_kin::Error;
use proptest::prelude::*;

#[test]
fn published_rows_recompute() {
    let rows = published_rows();
    assert_eq!(rows.len(), 2);
    assert!((rows[0].sample.stiffness - 130.43).abs() < 0.01);
    assert!((rows[1].sample.stiffness - 7.58).abs() < 0.01);
    assert!(matches!(
        stiffness_from_deflection(30.0, 0.0),
        Err(Error::NonPositiveDeflection(_))
    ));
}

proptest! {
    #[test]
    fn stiffness_is_scale_free(f in 0.1f64..1e3, d in 1e-3f64..1e2, k in 1e-3f64..1e3) {
        let a = stiffness_from_deflection(f, d).unwrap();
        let b = stiffness_from_deflection(k * f, k * d).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}

#[test]
fn lumped_matrix_is_symmetric_positive_definite() {
    let c = default_geometry();
    for arch in Arch::BOTH {
        let ks = JointStiffness::from_config(arch, &c.stiffness);
        let mut done = 0;
        for p in common::reachable_poses(arch, 60, 200, &SolveOptions::default()) {
            let q = ik(arch, &p, &c.geometry, &c.limits, &SolveOptions::default())
                .unwrap()
                .joints;
            let Ok(e) = lumped_tip_stiffness(&p, &q, &c.geometry, &ks, ChainVariant::Literal)
            else {
                continue;
            };
            let m = e.matrix();
            let scale = m.amax();
            assert!((m - m.transpose()).amax() <= 1e-9 * scale);
            assert!(e.eigenvalues()[0] > 0.0);
            assert!(e.scalar_along_axis > 0.0);
            assert_eq!(e.provenance, Provenance::LumpedModel);

            let doubled =
                lumped_tip_stiffness(&p, &q, &c.geometry, &ks.scaled(2.0), ChainVariant::Literal)
                    .unwrap();
            assert_eq!(doubled.matrix(), m * 2.0);
            done += 1;
        }
        assert!(done >= 50, "{arch}: {done}");
    }
}

#[test]
fn matched_pose_comparison_reports_both() {
    let c = default_geometry();
    let (pose, q1, q2) = matched_pose(&c.geometry, &c.limits).unwrap();
    let est: Vec<_> = [q1, q2]
        .iter()
        .map(|q| {
            let ks = JointStiffness::from_config(q.arch, &c.stiffness);
            lumped_tip_stiffness(&pose, q, &c.geometry, &ks, ChainVariant::Literal).unwrap()
        })
        .collect();
    let rep = stiffness_report(&published_rows(), &est);
    assert_eq!(rep.rows.len(), 5);
    assert!(rep
        .notes
        .iter()
        .any(|n| n.contains("ratio ATHENA-1/ATHENA-2")));
    let text = rep.to_string();
    assert!(text.contains("LUMPED_MODEL") && text.contains("PAPER_TABLE"));
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
    for v in [
        "130.43", "7.58", "15.29", "197.29", "0.23", "3.96", "5-10", "0.2-0.5", "30-65",
    ] {
        assert!(text.contains(v), "{v} missing:\n{text}");
    }
    let json = serde_json::to_value(&rep).unwrap();
    assert_eq!(json["rows"][0]["provenance"], "PAPER_TABLE");
}
