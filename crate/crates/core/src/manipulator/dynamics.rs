use nalgebra::Vector3;

use super::kinematics::{com_jacobian, com_position, link_transforms};
use super::{JointState, JointVector, KinematicChain, N_JOINTS};
use crate::error::Result;

/// `U(q) = -sum_i m_i gravity . p_i(q)` with `p_i` the base-frame centre of
/// mass of link `i`.
pub fn potential_energy(chain: &KinematicChain, q: &JointVector) -> Result<f64> {
    let frames = link_transforms(chain, q)?;
    let g = chain.gravity_vector();
    Ok((0..N_JOINTS)
        .map(|i| -chain.link_masses[i] * g.dot(&com_position(chain, &frames, i)))
        .sum())
}

/// Joint torque needed to hold the arm still against gravity, `dU/dq`.
pub fn gravity_torque(chain: &KinematicChain, q: &JointVector) -> Result<JointVector> {
    let g = chain.gravity_vector();
    let mut tau = JointVector::zeros();
    for link in 0..N_JOINTS {
        let m = chain.link_masses[link];
        if m == 0.0 {
            continue;
        }
        let jac = com_jacobian(chain, q, link)?;
        let force: Vector3<f64> = -m * g;
        tau += jac.fixed_rows::<3>(0).transpose() * force;
    }
    Ok(tau)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Quasi-static free-space torque: gravity plus viscous and Coulomb friction.
/// No inertial terms.
pub fn freespace_torque(chain: &KinematicChain, state: &JointState) -> Result<JointVector> {
    super::ensure_finite(&state.qd, "qd")?;
    let mut tau = gravity_torque(chain, &state.q)?;
    for i in 0..N_JOINTS {
        let v = state.qd[i];
        tau[i] += chain.viscous[i] * v + chain.coulomb[i] * sign(v);
    }
    Ok(tau)
}
