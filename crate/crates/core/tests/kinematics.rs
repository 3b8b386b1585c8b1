mod common;

use common::{random_q, rng};
use forcesense_core::manipulator::{
    com_jacobian, forward_kinematics, gravity_torque, jacobian, link_transforms, potential_energy,
    JointKind, JointVector, KinematicChain, N_JOINTS,
};
use nalgebra::{Matrix3, Matrix4, Vector3};
use proptest::prelude::*;

fn rot_z(t: f64) -> Matrix4<f64> {
    let (s, c) = t.sin_cos();
    let mut m = Matrix4::identity();
    m[(0, 0)] = c;
    m[(0, 1)] = -s;
    m[(1, 0)] = s;
    m[(1, 1)] = c;
    m
}

fn rot_x(t: f64) -> Matrix4<f64> {
    let (s, c) = t.sin_cos();
    let mut m = Matrix4::identity();
    m[(1, 1)] = c;
    m[(1, 2)] = -s;
    m[(2, 1)] = s;
    m[(2, 2)] = c;
    m
}

fn trans(x: f64, y: f64, z: f64) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m[(0, 3)] = x;
    m[(1, 3)] = y;
    m[(2, 3)] = z;
    m
}

/// FK as a product of elementary transforms, one factor per DH parameter.
fn fk_elementary(chain: &KinematicChain, q: &JointVector) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    for (i, j) in chain.joints.iter().enumerate() {
        let (theta, d) = match j.kind {
            JointKind::Revolute => (q[i] + j.dh.theta_offset, j.dh.d),
            JointKind::Prismatic => (j.dh.theta_offset, j.dh.d + q[i]),
        };
        t = t * rot_z(theta) * trans(0.0, 0.0, d) * trans(j.dh.a, 0.0, 0.0) * rot_x(j.dh.alpha);
    }
    t
}

fn rotation(t: &Matrix4<f64>) -> Matrix3<f64> {
    t.fixed_view::<3, 3>(0, 0).into_owned()
}

fn position(t: &Matrix4<f64>) -> Vector3<f64> {
    t.fixed_view::<3, 1>(0, 3).into_owned()
}

#[test]
fn fk_matches_elementary_product() {
    let chain = KinematicChain::reference();
    let mut r = rng(1);
    for _ in 0..100 {
        let q = random_q(&chain, &mut r);
        let a = forward_kinematics(&chain, &q).unwrap();
        let b = fk_elementary(&chain, &q);
        assert!((a - b).amax() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let chain = KinematicChain::reference();
    let mut r = rng(2);
    let h = 1e-6;
    for _ in 0..100 {
        let q = random_q(&chain, &mut r);
        let j = jacobian(&chain, &q).unwrap();
        let r0 = rotation(&forward_kinematics(&chain, &q).unwrap());
        for c in 0..N_JOINTS {
            let mut qp = q;
            let mut qm = q;
            qp[c] += h;
            qm[c] -= h;
            let tp = forward_kinematics(&chain, &qp).unwrap();
            let tm = forward_kinematics(&chain, &qm).unwrap();
            let v = (position(&tp) - position(&tm)) / (2.0 * h);
            // skew(w) = dR/dq R^T
            let s = (rotation(&tp) - rotation(&tm)) / (2.0 * h) * r0.transpose();
            let w = Vector3::new(
                s[(2, 1)] - s[(1, 2)],
                s[(0, 2)] - s[(2, 0)],
                s[(1, 0)] - s[(0, 1)],
            ) * 0.5;
            for k in 0..3 {
                assert!((j[(k, c)] - v[k]).abs() < 1e-6, "linear row {k} col {c}");
                assert!(
                    (j[(k + 3, c)] - w[k]).abs() < 1e-6,
                    "angular row {k} col {c}"
                );
            }
        }
    }
}

#[test]
fn gravity_torque_is_energy_gradient() {
    let chain = KinematicChain::reference();
    let mut r = rng(3);
    let h = 1e-6;
    for _ in 0..100 {
        let q = random_q(&chain, &mut r);
        let tau = gravity_torque(&chain, &q).unwrap();
        for c in 0..N_JOINTS {
            let mut qp = q;
            let mut qm = q;
            qp[c] += h;
            qm[c] -= h;
            let fd = (potential_energy(&chain, &qp).unwrap()
                - potential_energy(&chain, &qm).unwrap())
                / (2.0 * h);
            assert!((tau[c] - fd).abs() < 1e-6, "joint {c}: {} vs {fd}", tau[c]);
        }
    }
}

#[test]
fn com_jacobian_ignores_distal_joints() {
    let chain = KinematicChain::reference();
    let q = chain.joint_midpoints();
    for link in 0..N_JOINTS {
        let j = com_jacobian(&chain, &q, link).unwrap();
        for c in link + 1..N_JOINTS {
            assert!(j.column(c).iter().all(|&v| v == 0.0));
        }
    }
}

proptest! {
    #[test]
    fn fk_rotation_is_orthonormal(seed in any::<u64>()) {
        let chain = KinematicChain::reference();
        let q = random_q(&chain, &mut rng(seed));
        for t in link_transforms(&chain, &q).unwrap() {
            let r = rotation(&t);
            prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-10);
            prop_assert_eq!(t[(3, 0)], 0.0);
            prop_assert_eq!(t[(3, 1)], 0.0);
            prop_assert_eq!(t[(3, 2)], 0.0);
            prop_assert_eq!(t[(3, 3)], 1.0);
        }
    }

    #[test]
    fn prismatic_column_is_unit_and_torque_free(seed in any::<u64>()) {
        let chain = KinematicChain::reference();
        let q = random_q(&chain, &mut rng(seed));
        let j = jacobian(&chain, &q).unwrap();
        let col = j.column(2);
        let lin = Vector3::new(col[0], col[1], col[2]);
        prop_assert!((lin.norm() - 1.0).abs() < 1e-12);
        prop_assert!(col[3] == 0.0 && col[4] == 0.0 && col[5] == 0.0);
    }
}
