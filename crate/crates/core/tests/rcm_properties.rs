use std::f64::consts::PI;

use athena_kin::config::default_geometry;
use athena_kin::rcm::{pose_to_tip, tip_to_pose, TaskPose};
use proptest::prelude::*;

fn valid_pose() -> impl Strategy<Value = TaskPose> {
    let lim = default_geometry().limits.lins_max;
    (-PI + 1e-9..=PI, 1e-3..PI - 1e-3, -PI..PI, 0.0..lim).prop_map(|(psi, theta, phi, l_ins)| {
        TaskPose {
            psi,
            theta,
            phi,
            l_ins,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn tip_round_trip(p in valid_pose()) {
        let cfg = default_geometry();
        let tip = pose_to_tip(&p, &cfg.geometry);
        let back = tip_to_pose(&tip, p.phi, &cfg.geometry, &cfg.limits).unwrap().pose;
        let dpsi = (back.psi - p.psi).abs().min(2.0 * PI - (back.psi - p.psi).abs());
        prop_assert!(dpsi <= 1e-9, "psi {} vs {}", back.psi, p.psi);
        prop_assert!((back.theta - p.theta).abs() <= 1e-9);
        prop_assert!((back.l_ins - p.l_ins).abs() <= 1e-9);
        prop_assert_eq!(back.phi, p.phi);
    }

    #[test]
    fn tip_norm_is_tool_minus_insertion(p in valid_pose()) {
        let g = default_geometry().geometry;
        let r = g.l_tool - p.l_ins;
        let n = pose_to_tip(&p, &g).norm();
        prop_assert!((n - r).abs() <= 4.0 * f64::EPSILON * r);
    }

    #[test]
    fn tip_lies_on_instrument_axis(p in valid_pose()) {
        let g = default_geometry().geometry;
        let t = pose_to_tip(&p, &g);
        let u = p.axis();
        let cross = [
            t.y * u[2] - t.z * u[1],
            t.z * u[0] - t.x * u[2],
            t.x * u[1] - t.y * u[0],
        ];
        let r = g.l_tool - p.l_ins;
        let dot = t.x * u[0] + t.y * u[1] + t.z * u[2];
        prop_assert!(cross.iter().map(|c| c * c).sum::<f64>().sqrt() < 1e-9 * r);
        prop_assert!(dot >= 0.0);
    }
}
