//! Trajectory generation, dataset assembly and the dataset CSV format.

mod csv;
mod trajectory;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manipulator::{
    freespace_torque, jacobian, measured_torque, JointState, JointVector, KinematicChain,
    SensorModel, Wrench,
};

pub use self::csv::{load_csv, save_csv, CSV_COLUMNS};
pub use trajectory::{
    generate_contact_trajectory, generate_freespace_trajectory, rest_pose, rest_pose_count,
    ContactConfig, ContactProfile, DwellConfig, TrajectoryConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Classic,
    Si,
}

impl Profile {
    pub const ALL: [Profile; 2] = [Profile::Classic, Profile::Si];

    pub fn as_str(&self) -> &'static str {
        match self {
            Profile::Classic => "classic",
            Profile::Si => "si",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" => Ok(Profile::Classic),
            "si" => Ok(Profile::Si),
            other => Err(Error::Config(format!(
                "unknown profile {other:?}, expected classic or si"
            ))),
        }
    }
}

/// One logged timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub state: JointState,
    pub tau_measured: JointVector,
    /// Simulator-only ground truth of the free-space torque.
    pub tau_free_truth: JointVector,
    pub contact_wrench_truth: Option<Wrench>,
    pub jacobian: Matrix6<f64>,
}

/// Contiguous chronological train / validation / test ranges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl Partition {
    /// 80 / 10 / 10 split in time order; each share is within one sample of
    /// its nominal size.
    pub fn chronological(n: usize) -> Self {
        let train = (0.8 * n as f64).round() as usize;
        let val = (0.1 * n as f64).round() as usize;
        let val_end = (train + val).min(n);
        Partition {
            train: 0..train,
            val: train..val_end,
            test: val_end..n,
        }
    }

    pub fn from_sizes(train: usize, val: usize, test: usize) -> Self {
        Partition {
            train: 0..train,
            val: train..train + val,
            test: train + val..train + val + test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    pub fn len(&self) -> usize {
        self.test.end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub profile: Profile,
    pub seed: u64,
    pub duration_s: f64,
    /// Fingerprint of the run configuration that generated the data.
    pub config_fingerprint: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub rate_hz: f64,
    pub partition: Partition,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn train(&self) -> &[Sample] {
        &self.samples[self.partition.train.clone()]
    }

    pub fn val(&self) -> &[Sample] {
        &self.samples[self.partition.val.clone()]
    }

    pub fn test(&self) -> &[Sample] {
        &self.samples[self.partition.test.clone()]
    }
}

/// Runs the sensor model over a trajectory, threading the bias state, and
/// applies the chronological 80/10/10 partition. `contacts`, when given, must
/// be aligned with `states`.
pub fn build_dataset(
    chain: &KinematicChain,
    sensor: &SensorModel,
    states: &[JointState],
    contacts: Option<&[Wrench]>,
    rate_hz: f64,
    meta: DatasetMeta,
) -> Result<Dataset> {
    if states.is_empty() {
        return Err(Error::InvalidInput(
            "cannot build a dataset from an empty trajectory".into(),
        ));
    }
    if let Some(c) = contacts {
        if c.len() != states.len() {
            return Err(Error::InvalidInput(format!(
                "{} contact wrenches for {} states",
                c.len(),
                states.len()
            )));
        }
    }
    if !(rate_hz > 0.0) {
        return Err(Error::Config("rate_hz must be > 0".into()));
    }
    if states.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::InvalidInput(
            "states are not in strictly increasing time order".into(),
        ));
    }
    chain.validate()?;
    sensor.validate()?;

    let dt = 1.0 / rate_hz;
    let mut sensor_state = sensor.initial_state();
    let samples = states
        .iter()
        .enumerate()
        .map(|(k, state)| {
            let contact = contacts.map(|c| c[k]);
            let tau_measured = measured_torque(
                chain,
                state,
                sensor,
                contact.as_ref(),
                &mut sensor_state,
                dt,
            )?;
            Ok(Sample {
                state: *state,
                tau_measured,
                tau_free_truth: freespace_torque(chain, state)?,
                contact_wrench_truth: contact,
                jacobian: jacobian(chain, &state.q)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        partition: Partition::chronological(samples.len()),
        samples,
        rate_hz,
        meta,
    })
}
