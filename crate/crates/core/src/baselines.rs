//! Baseline free-space torque estimators: measurement-only, stationary bias
//! compensation, and exact k-nearest-neighbour lookup over the training set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::Sample;
use crate::error::{Error, Result};
use crate::manipulator::{JointVector, N_JOINTS};
use crate::method::{Method, TorquePredictor};
use crate::normalize::Standardizer;

const KEY_DIM: usize = 2 * N_JOINTS;

/// Treats the whole measured torque as external: `tau_hat = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MeasurementOnly;

pub fn measurement_only(_sample: &Sample) -> JointVector {
    JointVector::zeros()
}

impl TorquePredictor for MeasurementOnly {
    fn method(&self) -> Method {
        Method::MeasureOnly
    }

    fn predict_series(&self, samples: &[Sample]) -> Vec<Option<JointVector>> {
        samples.iter().map(|s| Some(measurement_only(s))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasModel {
    pub bias: JointVector,
    pub n_samples_used: usize,
    pub velocity_eps: f64,
}

/// Mean measured torque over the samples whose largest joint speed is below
/// `velocity_eps`.
pub fn fit_bias(train: &[Sample], velocity_eps: f64) -> Result<BiasModel> {
    if !(velocity_eps > 0.0 && velocity_eps.is_finite()) {
        return Err(Error::Config(format!(
            "velocity_eps must be > 0, got {velocity_eps}"
        )));
    }
    let mut sum = JointVector::zeros();
    let mut n = 0usize;
    for s in train {
        if s.state.qd.amax() < velocity_eps {
            sum += s.tau_measured;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoStationarySamples { velocity_eps });
    }
    Ok(BiasModel {
        bias: sum / n as f64,
        n_samples_used: n,
        velocity_eps,
    })
}

impl TorquePredictor for BiasModel {
    fn method(&self) -> Method {
        Method::Bias
    }

    fn predict_series(&self, samples: &[Sample]) -> Vec<Option<JointVector>> {
        vec![Some(self.bias); samples.len()]
    }
}

/// Training set as a lookup table keyed by z-scored `(q, qd)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LookupIndex {
    /// Row-major `N x 12`.
    keys: Vec<f64>,
    values: Vec<JointVector>,
    norm: Standardizer,
    k: usize,
    degenerate: Vec<usize>,
}

impl LookupIndex {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn normalizer(&self) -> &Standardizer {
        &self.norm
    }

    pub fn key(&self, row: usize) -> &[f64] {
        &self.keys[row * KEY_DIM..(row + 1) * KEY_DIM]
    }

    pub fn value(&self, row: usize) -> &JointVector {
        &self.values[row]
    }

    /// Feature indices whose training spread was zero (std clamped to 1).
    pub fn degenerate_features(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn normalize_query(&self, sample: &Sample) -> [f64; KEY_DIM] {
        let mut out = [0.0; KEY_DIM];
        self.norm.normalize_into(&sample.state.features(), &mut out);
        out
    }

    /// Row indices of the `k` nearest keys, nearest first; equal distances
    /// are ordered by row index.
    pub fn neighbours(&self, query: &[f64]) -> Vec<usize> {
        // sorted (distance, row), at most k entries
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (row, key) in self.keys.chunks_exact(KEY_DIM).enumerate() {
            let d = squared_distance(key, query);
            if best.len() == self.k && d >= best[self.k - 1].0 {
                continue;
            }
            // insert after every entry with distance <= d: keeps lower rows first
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, row));
            best.truncate(self.k);
        }
        best.into_iter().map(|(_, r)| r).collect()
    }

    /// Unweighted mean of the `k` nearest stored torques, summed nearest
    /// first.
    pub fn lookup(&self, sample: &Sample) -> JointVector {
        let q = self.normalize_query(sample);
        let mut sum = JointVector::zeros();
        for r in self.neighbours(&q) {
            sum += self.values[r];
        }
        sum / self.k as f64
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn build_index(train: &[Sample], k: usize) -> Result<LookupIndex> {
    if k == 0 {
        return Err(Error::Config("vector search k must be >= 1".into()));
    }
    if k > train.len() {
        return Err(Error::Config(format!(
            "vector search k = {k} exceeds the {} indexed training samples (N)",
            train.len()
        )));
    }
    let raw: Vec<[f64; KEY_DIM]> = train.iter().map(|s| s.state.features()).collect();
    let (norm, degenerate) = Standardizer::fit(raw.iter().map(|r| r.as_slice()), KEY_DIM);
    if !degenerate.is_empty() {
        log::warn!("lookup index: features {degenerate:?} are constant in the training split; std clamped to 1");
    }
    let mut keys = vec![0.0; raw.len() * KEY_DIM];
    for (r, dst) in raw.iter().zip(keys.chunks_exact_mut(KEY_DIM)) {
        norm.normalize_into(r, dst);
    }
    Ok(LookupIndex {
        keys,
        values: train.iter().map(|s| s.tau_measured).collect(),
        norm,
        k,
        degenerate,
    })
}

impl TorquePredictor for LookupIndex {
    fn method(&self) -> Method {
        Method::VectorSearch
    }

    fn predict_series(&self, samples: &[Sample]) -> Vec<Option<JointVector>> {
        samples.par_iter().map(|s| Some(self.lookup(s))).collect()
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::Matrix6;

    use super::*;
    use crate::manipulator::JointState;

    fn sample(q: [f64; 6], qd: [f64; 6], tau: [f64; 6]) -> Sample {
        Sample {
            state: JointState::new(0.0, JointVector::from(q), JointVector::from(qd)),
            tau_measured: JointVector::from(tau),
            tau_free_truth: JointVector::zeros(),
            contact_wrench_truth: None,
            jacobian: Matrix6::identity(),
        }
    }

    #[test]
    fn measure_only_is_zero() {
        let s = sample([1.0; 6], [2.0; 6], [3.0; 6]);
        assert_eq!(measurement_only(&s), JointVector::zeros());
        assert_eq!(
            MeasurementOnly.predict_series(&[s]),
            vec![Some(JointVector::zeros())]
        );
    }

    #[test]
    fn bias_averages_stationary_samples_only() {
        let b = [0.5, -0.2, 1.0, 0.0, 0.1, 0.3];
        let plus: [f64; 6] = std::array::from_fn(|i| b[i] + 0.25);
        let minus: [f64; 6] = std::array::from_fn(|i| b[i] - 0.25);
        let train = vec![
            sample([0.0; 6], [0.0; 6], plus),
            sample([0.0; 6], [0.5; 6], [9.0; 6]),
            sample([0.0; 6], [0.0; 6], minus),
        ];
        let m = fit_bias(&train, 1e-3).unwrap();
        assert_eq!(m.n_samples_used, 2);
        for i in 0..6 {
            assert!((m.bias[i] - b[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn bias_without_stationary_samples_fails() {
        let train = vec![sample([0.0; 6], [0.01; 6], [1.0; 6])];
        assert!(matches!(
            fit_bias(&train, 1e-3),
            Err(Error::NoStationarySamples { .. })
        ));
    }

    #[test]
    fn single_row_index() {
        let train = vec![sample([0.1; 6], [0.2; 6], [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])];
        let idx = build_index(&train, 1).unwrap();
        assert_eq!(idx.degenerate_features().len(), 12);
        let q = sample([5.0; 6], [-3.0; 6], [0.0; 6]);
        assert_eq!(
            idx.lookup(&q),
            JointVector::from([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        );
    }

    #[test]
    fn duplicate_keys_average() {
        let train = vec![
            sample([0.0; 6], [0.0; 6], [2.0; 6]),
            sample([1.0; 6], [1.0; 6], [4.0; 6]),
            sample([1.0; 6], [1.0; 6], [8.0; 6]),
        ];
        let idx = build_index(&train, 2).unwrap();
        let q = sample([1.0; 6], [1.0; 6], [0.0; 6]);
        assert_eq!(idx.lookup(&q), JointVector::from([6.0; 6]));
    }

    #[test]
    fn ties_prefer_lower_rows() {
        let train = vec![
            sample([0.0; 6], [0.0; 6], [0.0; 6]),
            sample([2.0; 6], [2.0; 6], [2.0; 6]),
            sample([2.0; 6], [2.0; 6], [3.0; 6]),
            sample([0.0; 6], [0.0; 6], [5.0; 6]),
        ];
        let idx = build_index(&train, 1).unwrap();
        let q = idx.normalize_query(&sample([0.0; 6], [0.0; 6], [0.0; 6]));
        assert_eq!(idx.neighbours(&q), vec![0]);
        let q = idx.normalize_query(&sample([1.0; 6], [1.0; 6], [0.0; 6]));
        // all four rows are equidistant
        assert_eq!(idx.neighbours(&q), vec![0]);
    }

    #[test]
    fn k_equal_n_is_global_mean() {
        let train: Vec<Sample> = (0..5)
            .map(|i| sample([i as f64; 6], [(i * i) as f64; 6], [i as f64; 6]))
            .collect();
        let idx = build_index(&train, 5).unwrap();
        let got = idx.lookup(&sample([0.3; 6], [7.0; 6], [0.0; 6]));
        for v in got.iter() {
            assert!((v - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn k_larger_than_n_names_both() {
        let train = vec![sample([0.0; 6], [0.0; 6], [0.0; 6])];
        match build_index(&train, 3) {
            Err(Error::Config(msg)) => assert!(msg.contains("k = 3") && msg.contains("1 indexed")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
