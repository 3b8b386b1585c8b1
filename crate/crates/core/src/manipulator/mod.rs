//! Simulated six-joint surgical-style manipulator.
//!
//! The chain is described with standard Denavit-Hartenberg parameters. Joint
//! index 2 is a prismatic insertion axis and every other joint is revolute,
//! the same layout as a patient-side manipulator. Link gravity, joint friction
//! and a torque sensor with configurable bias dynamics make up the rest of the
//! plant that the estimators are benchmarked against.

mod dynamics;
mod kinematics;
mod sensor;

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dynamics::{freespace_torque, gravity_torque, potential_energy};
pub use kinematics::{
    com_jacobian, condition_number, forward_kinematics, jacobian, link_transforms,
};
pub use sensor::{measured_torque, BiasKind, SensorModel, SensorState};

pub const N_JOINTS: usize = 6;
/// Index of the prismatic insertion joint.
pub const PRISMATIC_JOINT: usize = 2;

pub type JointVector = Vector6<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

/// Standard DH parameters of one link: `Rz(theta) Tz(d) Tx(a) Rx(alpha)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhParams {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

impl DhParams {
    pub const ZERO: DhParams = DhParams {
        a: 0.0,
        alpha: 0.0,
        d: 0.0,
        theta_offset: 0.0,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub kind: JointKind,
    pub dh: DhParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicChain {
    pub joints: [JointSpec; N_JOINTS],
    /// m/s^2, base frame. The reference base is mounted with +y up, so the
    /// instrument shaft hangs roughly downward at mid-range.
    pub gravity: [f64; 3],
    /// kg.
    pub link_masses: [f64; N_JOINTS],
    /// Centre of mass of each link, expressed in that link's DH frame.
    pub link_coms: [[f64; 3]; N_JOINTS],
    pub viscous: [f64; N_JOINTS],
    pub coulomb: [f64; N_JOINTS],
    /// `[lo, hi]` per joint, rad or m.
    pub joint_limits: [[f64; 2]; N_JOINTS],
}

impl KinematicChain {
    /// Desk-scale stand-in for a patient-side manipulator: yaw and pitch
    /// shoulder joints intersecting at a remote centre, an insertion stage,
    /// and a three-joint wrist carrying a short tool.
    pub fn reference() -> Self {
        let revolute = |a: f64, alpha: f64, d: f64, theta_offset: f64| JointSpec {
            kind: JointKind::Revolute,
            dh: DhParams {
                a,
                alpha,
                d,
                theta_offset,
            },
        };
        KinematicChain {
            joints: [
                revolute(0.0, -FRAC_PI_2, 0.0, FRAC_PI_2),
                revolute(0.0, FRAC_PI_2, 0.0, -FRAC_PI_2),
                JointSpec {
                    kind: JointKind::Prismatic,
                    dh: DhParams {
                        a: 0.0,
                        alpha: 0.0,
                        d: 0.0,
                        theta_offset: 0.0,
                    },
                },
                revolute(0.0, -FRAC_PI_2, 0.0, 0.0),
                revolute(0.06, FRAC_PI_2, 0.0, 0.0),
                revolute(0.05, 0.0, 0.0, 0.0),
            ],
            gravity: [0.0, -9.81, 0.0],
            link_masses: [2.9, 2.2, 1.1, 0.2, 0.12, 0.07],
            link_coms: [
                [0.0, -0.05, 0.02],
                [0.04, 0.0, -0.03],
                [0.0, 0.02, -0.08],
                [0.0, 0.0, 0.01],
                [-0.02, 0.0, 0.0],
                [-0.02, 0.0, 0.0],
            ],
            viscous: [0.05, 0.05, 0.4, 0.004, 0.004, 0.003],
            coulomb: [0.005, 0.005, 0.02, 0.0005, 0.0005, 0.0005],
            joint_limits: [
                [-1.2, 1.2],
                [-0.8, 0.8],
                [0.08, 0.22],
                [-1.5, 1.5],
                [-1.2, 1.2],
                [-1.2, 1.2],
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, joint) in self.joints.iter().enumerate() {
            let expected = if i == PRISMATIC_JOINT {
                JointKind::Prismatic
            } else {
                JointKind::Revolute
            };
            if joint.kind != expected {
                return Err(Error::Config(format!(
                    "chain.joints[{i}] must be {expected:?}, found {:?}",
                    joint.kind
                )));
            }
            let dh = &joint.dh;
            if ![dh.a, dh.alpha, dh.d, dh.theta_offset]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(Error::Config(format!("chain.joints[{i}].dh is not finite")));
            }
        }
        for i in 0..N_JOINTS {
            if !(self.viscous[i] >= 0.0) {
                return Err(Error::Config(format!("chain.viscous[{i}] must be >= 0")));
            }
            if !(self.coulomb[i] >= 0.0) {
                return Err(Error::Config(format!("chain.coulomb[{i}] must be >= 0")));
            }
            if !(self.link_masses[i] >= 0.0) {
                return Err(Error::Config(format!(
                    "chain.link_masses[{i}] must be >= 0"
                )));
            }
            let [lo, hi] = self.joint_limits[i];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!(
                    "chain.joint_limits[{i}] must satisfy lo < hi"
                )));
            }
            if !self.link_coms[i].iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!("chain.link_coms[{i}] is not finite")));
            }
        }
        let g = self.gravity_vector();
        if !(g.iter().all(|v| v.is_finite()) && g.norm() > 0.0) {
            return Err(Error::Config(
                "chain.gravity must be finite and nonzero".into(),
            ));
        }
        Ok(())
    }

    pub fn gravity_vector(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }

    pub fn joint_midpoints(&self) -> JointVector {
        JointVector::from_fn(|i, _| 0.5 * (self.joint_limits[i][0] + self.joint_limits[i][1]))
    }

    pub fn joint_half_ranges(&self) -> JointVector {
        JointVector::from_fn(|i, _| 0.5 * (self.joint_limits[i][1] - self.joint_limits[i][0]))
    }
}

impl Default for KinematicChain {
    fn default() -> Self {
        Self::reference()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointState {
    pub t: f64,
    pub q: JointVector,
    pub qd: JointVector,
}

impl JointState {
    pub fn new(t: f64, q: JointVector, qd: JointVector) -> Self {
        JointState { t, q, qd }
    }

    /// `(q, qd)` stacked into the 12-dim feature vector used by the learned
    /// and lookup estimators.
    pub fn features(&self) -> [f64; 2 * N_JOINTS] {
        let mut out = [0.0; 2 * N_JOINTS];
        out[..N_JOINTS].copy_from_slice(self.q.as_slice());
        out[N_JOINTS..].copy_from_slice(self.qd.as_slice());
        out
    }
}

/// Cartesian force (N) and moment (N m), base frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_force(force: Vector3<f64>) -> Self {
        Wrench {
            force,
            torque: Vector3::zeros(),
        }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Wrench {
            force: v.fixed_rows::<3>(0).into_owned(),
            torque: v.fixed_rows::<3>(3).into_owned(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.force);
        v.fixed_rows_mut::<3>(3).copy_from(&self.torque);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.force
            .iter()
            .chain(self.torque.iter())
            .all(|v| v.is_finite())
    }
}

pub(crate) fn ensure_finite(q: &JointVector, what: &str) -> Result<()> {
    if q.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} contains non-finite values"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_chain_is_valid() {
        KinematicChain::reference().validate().unwrap();
    }

    #[test]
    fn validate_rejects_bad_layout() {
        let mut chain = KinematicChain::reference();
        chain.joints[0].kind = JointKind::Prismatic;
        assert!(matches!(chain.validate(), Err(Error::Config(_))));

        let mut chain = KinematicChain::reference();
        chain.viscous[3] = -0.1;
        assert!(chain.validate().is_err());

        let mut chain = KinematicChain::reference();
        chain.joint_limits[1] = [0.5, 0.5];
        assert!(chain.validate().is_err());

        let mut chain = KinematicChain::reference();
        chain.gravity = [0.0; 3];
        assert!(chain.validate().is_err());
    }

    #[test]
    fn wrench_vector_layout() {
        let w = Wrench {
            force: Vector3::new(1.0, 2.0, 3.0),
            torque: Vector3::new(4.0, 5.0, 6.0),
        };
        let v = w.to_vector();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(Wrench::from_vector(&v), w);
    }
}
