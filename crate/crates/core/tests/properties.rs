use inbetween::dataset::{AnimationClip, FeatureLayout};
use inbetween::eval::{l2p, l2q, PositionStats, Transition};
use inbetween::motion::{
    forward_kinematics, quat_slerp, rot6d_from_quat, rot6d_to_matrix, root_space_to_local,
    to_root_space, LocalPose, Quat, Skeleton, Vec3,
};
use proptest::prelude::*;

fn unit_quat() -> impl Strategy<Value = Quat> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("away from zero", |a| a.iter().map(|v| v * v).sum::<f64>() > 0.01)
        .prop_map(|[w, x, y, z]| Quat::new(w, x, y, z).normalize())
}

fn pose(joints: usize) -> impl Strategy<Value = LocalPose> {
    (
        prop::array::uniform3(-300.0f64..300.0),
        prop::collection::vec(unit_quat(), joints),
    )
        .prop_map(|([x, y, z], local_rot)| LocalPose {
            root_world_pos: Vec3::new(x, y, z),
            local_rot,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn six_d_reconstructs_the_rotation_matrix(q in unit_quat()) {
        let m = rot6d_to_matrix(rot6d_from_quat(q).unwrap()).unwrap();
        prop_assert!(m.max_abs_diff(&q.to_matrix()) < 1e-6);
    }

    #[test]
    fn slerp_stays_on_the_unit_sphere(a in unit_quat(), b in unit_quat()) {
        for k in 0..=100 {
            let q = quat_slerp(a, b, k as f64 / 100.0).unwrap();
            prop_assert!((q.norm() - 1.0).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn kinematics_round_trip(p in pose(5)) {
        let s = Skeleton::synthetic(5).unwrap();
        let w = forward_kinematics(&s, &p).unwrap();
        let r = to_root_space(&s, &w);
        prop_assume!(r.is_ok());
        let back = root_space_to_local(&s, &r.unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&p) < 1e-6);
    }

    #[test]
    fn root_space_ignores_ground_translation_and_heading(
        p in pose(5),
        yaw in -3.1f64..3.1,
        dx in -500.0f64..500.0,
        dz in -500.0f64..500.0,
    ) {
        let s = Skeleton::synthetic(5).unwrap();
        let turn = Quat::from_yaw(yaw);
        let mut moved = p.clone();
        moved.root_world_pos = turn.rotate(p.root_world_pos) + Vec3::new(dx, 0.0, dz);
        moved.local_rot[0] = turn * p.local_rot[0];
        let a = to_root_space(&s, &forward_kinematics(&s, &p).unwrap());
        let b = to_root_space(&s, &forward_kinematics(&s, &moved).unwrap());
        prop_assume!(a.is_ok() && b.is_ok());
        let (a, b) = (a.unwrap(), b.unwrap());
        for (x, y) in a.joint_pos.iter().zip(&b.joint_pos) {
            prop_assert!(x.max_abs_diff(*y) < 1e-6);
        }
        for (x, y) in a.joint_rot.iter().zip(&b.joint_rot) {
            prop_assert!(x.max_abs_diff(*y) < 1e-6);
        }
    }

    #[test]
    fn metrics_vanish_only_on_identical_missing_frames(
        frames in prop::collection::vec(pose(4), 6),
        other in pose(4),
        which in 2usize..4,
    ) {
        let s = Skeleton::synthetic(4).unwrap();
        let gt = AnimationClip::new("gt", s, frames, 30.0).unwrap();
        let t = Transition::new(2, 2);
        prop_assume!(to_root_space(&gt.skeleton, &gt.world(1)).is_ok());
        let stats = PositionStats::fit([(&gt, 0..6, 1)]).unwrap();
        prop_assert_eq!(l2q(&gt, &gt, &t).unwrap(), 0.0);
        prop_assert_eq!(l2p(&gt, &gt, &t, &stats).unwrap(), 0.0);

        let mut pred = gt.clone();
        pred.frames[which] = other;
        let differs = pred.frames[which].max_abs_diff(&gt.frames[which]) > 1e-6;
        prop_assume!(differs);
        prop_assert!(l2q(&pred, &gt, &t).unwrap() > 0.0 || l2p(&pred, &gt, &t, &stats).unwrap() > 0.0);
    }
}

#[test]
fn feature_widths_match_the_published_layout() {
    for j in [2, 5, 8, 22] {
        assert_eq!(FeatureLayout::new(j, true).d_in(), 18 * j + 8);
        assert_eq!(FeatureLayout::new(j, false).d_in(), 9 * j + 4);
        assert_eq!(FeatureLayout::new(j, true).d_out(), 9 * j + 4);
    }
}
