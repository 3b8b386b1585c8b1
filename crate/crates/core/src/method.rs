use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::Sample;
use crate::error::Error;
use crate::manipulator::JointVector;

/// Free-space torque estimators compared by the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MeasureOnly,
    Bias,
    VectorSearch,
    Nn,
}

impl Method {
    /// Column order of the benchmark table.
    pub const ALL: [Method; 4] = [
        Method::MeasureOnly,
        Method::Bias,
        Method::VectorSearch,
        Method::Nn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::MeasureOnly => "measure_only",
            Method::Bias => "bias",
            Method::VectorSearch => "vector_search",
            Method::Nn => "nn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method {s:?}, expected one of measure_only, bias, vector_search, nn"
                ))
            })
    }
}

/// Produces the predicted free-space torque for each sample of a
/// chronological series. `None` marks timesteps without a prediction (for
/// example recurrent warm-up); those are excluded downstream.
pub trait TorquePredictor: Sync {
    fn method(&self) -> Method;

    fn predict_series(&self, samples: &[Sample]) -> Vec<Option<JointVector>>;
}
