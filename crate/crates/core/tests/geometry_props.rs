use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use sixdma::geometry::{
    antenna_positions, circular_distance, rotation_matrix, rotation_penalty, BsRotation, GeometryConfig,
    SurfaceRotation,
};

fn cfg() -> GeometryConfig {
    GeometryConfig::standard(0.1)
}

fn surface() -> impl Strategy<Value = SurfaceRotation> {
    (-10.0..10.0f64, -PI / 2.0..PI / 2.0).prop_map(|(a, t)| SurfaceRotation::new(a, t))
}

proptest! {
    #[test]
    fn circular_distance_is_a_bounded_symmetric_metric(a in -20.0..20.0f64, b in -20.0..20.0f64, c in -20.0..20.0f64) {
        let ab = circular_distance(a, b);
        prop_assert!((0.0..=PI).contains(&ab));
        prop_assert_eq!(ab, circular_distance(b, a));
        prop_assert!(ab <= circular_distance(a, c) + circular_distance(c, b) + 1e-12);
        prop_assert!(circular_distance(a, a + TAU) < 1e-12);
    }

    #[test]
    fn rotation_is_orthonormal_with_unit_determinant(z in surface()) {
        let r = rotation_matrix(&z);
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn antenna_layout_is_rigid(z in surface()) {
        let c = cfg();
        let p = antenna_positions(&z, &c);
        for i in 0..p.len() {
            for j in 0..p.len() {
                let want = (c.antenna_offsets[i] - c.antenna_offsets[j]).norm();
                prop_assert!(((p[i] - p[j]).norm() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn penalty_is_zero_only_when_feasible(zs in prop::collection::vec(surface(), 1..5)) {
        let c = cfg();
        let feasible = zs.iter().all(|s| (c.tilt_min..=c.tilt_max).contains(&s.tilt))
            && (0..zs.len()).all(|i| (i + 1..zs.len()).all(|j| circular_distance(zs[i].azimuth(), zs[j].azimuth()) >= c.guard_angle));
        let p = rotation_penalty(&BsRotation::new(zs), &c);
        prop_assert!(p >= 0.0);
        prop_assert_eq!(p == 0.0, feasible);
    }

    #[test]
    fn penalty_is_continuous(zs in prop::collection::vec(surface(), 1..5), i in 0usize..4, h in -1e-6..1e-6f64) {
        let c = cfg();
        let base = BsRotation::new(zs.clone());
        let mut moved = zs;
        let i = i % moved.len();
        let a = moved[i].azimuth();
        moved[i].set_azimuth(a + h);
        moved[i].tilt += h;
        let d = (rotation_penalty(&base, &c) - rotation_penalty(&BsRotation::new(moved), &c)).abs();
        // Moving one surface shifts its pair terms and one tilt term by at most |h| each.
        prop_assert!(d <= base.len() as f64 * h.abs() + 1e-12);
    }
}

