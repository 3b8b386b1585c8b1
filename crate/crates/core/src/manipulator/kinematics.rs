use nalgebra::{Matrix4, Matrix6, Vector3, Vector4};

use super::{ensure_finite, DhParams, JointKind, JointVector, KinematicChain, N_JOINTS};
use crate::error::Result;

fn dh_transform(dh: &DhParams, theta: f64, d: f64) -> Matrix4<f64> {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = dh.alpha.sin_cos();
    Matrix4::new(
        ct,
        -st * ca,
        st * sa,
        dh.a * ct,
        st,
        ct * ca,
        -ct * sa,
        dh.a * st,
        0.0,
        sa,
        ca,
        d,
        0.0,
        0.0,
        0.0,
        1.0,
    )
}

/// Base-frame pose of every DH frame: element 0 is the base, element `i + 1`
/// the frame attached to link `i`.
pub fn link_transforms(
    chain: &KinematicChain,
    q: &JointVector,
) -> Result<[Matrix4<f64>; N_JOINTS + 1]> {
    ensure_finite(q, "q")?;
    let mut frames = [Matrix4::identity(); N_JOINTS + 1];
    for (i, joint) in chain.joints.iter().enumerate() {
        let dh = &joint.dh;
        let local = match joint.kind {
            JointKind::Revolute => dh_transform(dh, q[i] + dh.theta_offset, dh.d),
            JointKind::Prismatic => dh_transform(dh, dh.theta_offset, dh.d + q[i]),
        };
        frames[i + 1] = frames[i] * local;
    }
    Ok(frames)
}

/// Base-to-tip homogeneous transform.
pub fn forward_kinematics(chain: &KinematicChain, q: &JointVector) -> Result<Matrix4<f64>> {
    Ok(link_transforms(chain, q)?[N_JOINTS])
}

fn origin(t: &Matrix4<f64>) -> Vector3<f64> {
    t.fixed_view::<3, 1>(0, 3).into_owned()
}

fn z_axis(t: &Matrix4<f64>) -> Vector3<f64> {
    t.fixed_view::<3, 1>(0, 2).into_owned()
}

/// Geometric Jacobian columns for a point `p` rigidly attached to link
/// `last`; joints beyond `last` contribute zero columns.
fn point_jacobian(
    chain: &KinematicChain,
    frames: &[Matrix4<f64>; N_JOINTS + 1],
    p: &Vector3<f64>,
    last: usize,
) -> Matrix6<f64> {
    let mut jac = Matrix6::zeros();
    for j in 0..=last {
        // joint j moves about / along z of frame j
        let z = z_axis(&frames[j]);
        let (lin, ang) = match chain.joints[j].kind {
            JointKind::Revolute => (z.cross(&(p - origin(&frames[j]))), z),
            JointKind::Prismatic => (z, Vector3::zeros()),
        };
        jac.fixed_view_mut::<3, 1>(0, j).copy_from(&lin);
        jac.fixed_view_mut::<3, 1>(3, j).copy_from(&ang);
    }
    jac
}

/// Tool-tip geometric Jacobian in the base frame; rows are
/// `(vx, vy, vz, wx, wy, wz)`.
pub fn jacobian(chain: &KinematicChain, q: &JointVector) -> Result<Matrix6<f64>> {
    let frames = link_transforms(chain, q)?;
    let tip = origin(&frames[N_JOINTS]);
    Ok(point_jacobian(chain, &frames, &tip, N_JOINTS - 1))
}

/// Jacobian of the centre of mass of `link`. Only the linear rows are
/// needed for the gravity model but the angular rows come for free.
pub fn com_jacobian(chain: &KinematicChain, q: &JointVector, link: usize) -> Result<Matrix6<f64>> {
    let frames = link_transforms(chain, q)?;
    let com = com_position(chain, &frames, link);
    Ok(point_jacobian(chain, &frames, &com, link))
}

pub(super) fn com_position(
    chain: &KinematicChain,
    frames: &[Matrix4<f64>; N_JOINTS + 1],
    link: usize,
) -> Vector3<f64> {
    let c = chain.link_coms[link];
    (frames[link + 1] * Vector4::new(c[0], c[1], c[2], 1.0)).xyz()
}

/// 2-norm condition number `sigma_max / sigma_min`; infinite when singular.
pub fn condition_number(m: &Matrix6<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}
