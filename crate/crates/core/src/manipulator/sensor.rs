use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    freespace_torque, jacobian, JointState, JointVector, KinematicChain, Wrench, N_JOINTS,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    /// Constant offset for the whole session.
    Static,
    /// Mean-reverting Ornstein-Uhlenbeck drift around zero.
    OuDrift,
}

/// Joint torque sensor: additive bias plus white Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    pub noise_sigma: [f64; N_JOINTS],
    pub bias_kind: BiasKind,
    pub static_bias: [f64; N_JOINTS],
    /// Mean-reversion rate, 1/s.
    pub ou_theta: f64,
    /// Diffusion per joint, torque units / sqrt(s).
    pub ou_sigma: [f64; N_JOINTS],
    pub seed: u64,
}

impl SensorModel {
    /// Noise-free, bias-free sensor.
    pub fn ideal() -> Self {
        SensorModel {
            noise_sigma: [0.0; N_JOINTS],
            bias_kind: BiasKind::Static,
            static_bias: [0.0; N_JOINTS],
            ou_theta: 1.0,
            ou_sigma: [0.0; N_JOINTS],
            seed: 0,
        }
    }

    /// Time-invariant bias, standing in for the first-generation arm.
    pub fn classic() -> Self {
        SensorModel {
            noise_sigma: [0.01, 0.01, 0.03, 0.0004, 0.0004, 0.0003],
            bias_kind: BiasKind::Static,
            static_bias: [0.12, -0.09, 0.35, 0.004, -0.003, 0.002],
            ou_theta: 1.0,
            ou_sigma: [0.0; N_JOINTS],
            seed: 11,
        }
    }

    /// Drifting bias, standing in for the newer arm.
    pub fn si() -> Self {
        SensorModel {
            noise_sigma: [0.01, 0.01, 0.03, 0.0004, 0.0004, 0.0003],
            bias_kind: BiasKind::OuDrift,
            static_bias: [0.0; N_JOINTS],
            ou_theta: 2.0,
            ou_sigma: [0.48, 0.48, 2.0, 0.016, 0.016, 0.012],
            seed: 23,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..N_JOINTS {
            if !(self.noise_sigma[i] >= 0.0 && self.noise_sigma[i].is_finite()) {
                return Err(Error::Config(format!(
                    "sensor.noise_sigma[{i}] must be >= 0"
                )));
            }
            if !(self.ou_sigma[i] >= 0.0 && self.ou_sigma[i].is_finite()) {
                return Err(Error::Config(format!("sensor.ou_sigma[{i}] must be >= 0")));
            }
            if !self.static_bias[i].is_finite() {
                return Err(Error::Config(format!(
                    "sensor.static_bias[{i}] is not finite"
                )));
            }
        }
        if self.bias_kind == BiasKind::OuDrift
            && !(self.ou_theta > 0.0 && self.ou_theta.is_finite())
        {
            return Err(Error::Config(
                "sensor.ou_theta must be > 0 for ou_drift".into(),
            ));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> SensorState {
        self.initial_state_with_seed(self.seed)
    }

    /// Bias starts at `static_bias` for a static sensor and at zero for OU drift.
    pub fn initial_state_with_seed(&self, seed: u64) -> SensorState {
        let bias = match self.bias_kind {
            BiasKind::Static => JointVector::from(self.static_bias),
            BiasKind::OuDrift => JointVector::zeros(),
        };
        SensorState {
            bias,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Mutable sensor state threaded through a recording: the current bias and
/// the noise stream.
#[derive(Clone, Debug)]
pub struct SensorState {
    pub bias: JointVector,
    rng: ChaCha8Rng,
}

impl SensorState {
    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// Simulated torque reading `tau_free + J^T F + bias + noise`. The OU bias is
/// advanced by one Euler-Maruyama step of length `dt` after the reading.
pub fn measured_torque(
    chain: &KinematicChain,
    state: &JointState,
    sensor: &SensorModel,
    contact: Option<&Wrench>,
    sensor_state: &mut SensorState,
    dt: f64,
) -> Result<JointVector> {
    let mut tau = freespace_torque(chain, state)?;
    if let Some(wrench) = contact {
        if !wrench.is_finite() {
            return Err(Error::InvalidInput("contact wrench is not finite".into()));
        }
        tau += jacobian(chain, &state.q)?.transpose() * wrench.to_vector();
    }
    tau += sensor_state.bias;
    for i in 0..N_JOINTS {
        tau[i] += sensor.noise_sigma[i] * sensor_state.normal();
    }
    if sensor.bias_kind == BiasKind::OuDrift {
        let sqrt_dt = dt.sqrt();
        for i in 0..N_JOINTS {
            let eta = sensor_state.normal();
            let b = sensor_state.bias[i];
            sensor_state.bias[i] =
                b - sensor.ou_theta * b * dt + sensor.ou_sigma[i] * sqrt_dt * eta;
        }
    }
    Ok(tau)
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;

    use super::*;

    fn state() -> JointState {
        JointState::new(
            0.0,
            JointVector::new(0.3, -0.2, 0.1, 0.5, -0.4, 0.2),
            JointVector::new(0.1, -0.2, 0.01, 0.3, 0.0, -0.1),
        )
    }

    #[test]
    fn ideal_sensor_reads_freespace_torque() {
        let chain = KinematicChain::reference();
        let sensor = SensorModel::ideal();
        let mut st = sensor.initial_state();
        let tau = measured_torque(&chain, &state(), &sensor, None, &mut st, 0.01).unwrap();
        assert_eq!(tau, freespace_torque(&chain, &state()).unwrap());
    }

    #[test]
    fn contact_enters_through_jacobian_transpose() {
        let chain = KinematicChain::reference();
        let sensor = SensorModel::ideal();
        let mut st = sensor.initial_state();
        let w = Wrench::from_force(Vector3::new(1.0, 2.0, 3.0));
        let tau = measured_torque(&chain, &state(), &sensor, Some(&w), &mut st, 0.01).unwrap();
        let expected = freespace_torque(&chain, &state()).unwrap()
            + jacobian(&chain, &state().q).unwrap().transpose() * w.to_vector();
        assert_eq!(tau, expected);
    }

    #[test]
    fn rejects_non_finite_contact() {
        let chain = KinematicChain::reference();
        let sensor = SensorModel::ideal();
        let mut st = sensor.initial_state();
        let w = Wrench::from_force(Vector3::new(f64::INFINITY, 0.0, 0.0));
        assert!(measured_torque(&chain, &state(), &sensor, Some(&w), &mut st, 0.01).is_err());
    }

    #[test]
    fn static_bias_is_added() {
        let chain = KinematicChain::reference();
        let mut sensor = SensorModel::ideal();
        sensor.static_bias = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut st = sensor.initial_state();
        let tau = measured_torque(&chain, &state(), &sensor, None, &mut st, 0.01).unwrap();
        let diff = tau - freespace_torque(&chain, &state()).unwrap();
        for i in 0..N_JOINTS {
            assert!((diff[i] - (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn ou_stationary_variance() {
        let chain = KinematicChain::reference();
        let mut sensor = SensorModel::ideal();
        sensor.bias_kind = BiasKind::OuDrift;
        sensor.ou_theta = 0.1;
        sensor.ou_sigma = [0.05; N_JOINTS];
        sensor.seed = 7;
        let mut st = sensor.initial_state();
        // dt = 1 s so that 1e4 steps span 1000 relaxation times
        let dt = 1.0;
        let n = 10_000;
        let mut samples = vec![Vec::with_capacity(n); N_JOINTS];
        for _ in 0..n {
            measured_torque(&chain, &state(), &sensor, None, &mut st, dt).unwrap();
            for i in 0..N_JOINTS {
                samples[i].push(st.bias[i]);
            }
        }
        let expected = 0.05f64.powi(2) / (2.0 * 0.1);
        for s in &samples {
            let mean = s.iter().sum::<f64>() / n as f64;
            let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(
                (var - expected).abs() < 0.2 * expected,
                "var {var} expected {expected}"
            );
        }
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let chain = KinematicChain::reference();
        let sensor = SensorModel::si();
        let run = || {
            let mut st = sensor.initial_state();
            (0..200)
                .map(|k| {
                    let mut s = state();
                    s.t = k as f64 * 0.01;
                    measured_torque(&chain, &s, &sensor, None, &mut st, 0.01).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn validate_rejects_bad_values() {
        let mut s = SensorModel::si();
        s.ou_theta = 0.0;
        assert!(s.validate().is_err());
        let mut s = SensorModel::classic();
        s.noise_sigma[2] = -1.0;
        assert!(s.validate().is_err());
        SensorModel::classic().validate().unwrap();
        SensorModel::si().validate().unwrap();
    }
}
