//! Per-joint recurrent torque predictor.
//!
//! Six structurally identical LSTM networks, one per joint, each trained
//! independently with a squared-error loss to map a window of free-space
//! joint positions and velocities onto the measured torque of its joint at
//! the last step of the window.

mod adam;
mod io;
pub mod lstm;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{Dataset, Partition, Sample};
use crate::error::{Error, Result};
use crate::manipulator::{JointVector, N_JOINTS};
use crate::method::{Method, TorquePredictor};
use crate::normalize::Standardizer;
use crate::rng::mix_seed;

pub use adam::{Adam, AdamConfig};
pub use io::{load_model, save_model, ModelFile, MODEL_FORMAT_VERSION};
pub use lstm::{backward_window, batch_loss, cell_step, forward_window, loss, Gate, LstmParams};
use lstm::{backward_window_with, forward_window_with, Workspace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    /// 12 feeds every network all positions and velocities; 2 feeds joint
    /// `j` only `(q_j, qd_j)`.
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub window_len: usize,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Windows drawn (without replacement) per epoch; all when unset.
    pub windows_per_epoch: Option<usize>,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            input_dim: 12,
            hidden_dim: 16,
            window_len: 20,
            optimizer: AdamConfig {
                lr: 5e-3,
                ..AdamConfig::default()
            },
            batch_size: 64,
            max_epochs: 30,
            early_stop_patience: 5,
            windows_per_epoch: Some(2000),
            seed: 0,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim != 2 && self.input_dim != 2 * N_JOINTS {
            return Err(Error::Config(format!(
                "predictor.input_dim must be 2 or {}, got {}",
                2 * N_JOINTS,
                self.input_dim
            )));
        }
        let positive = [
            ("hidden_dim", self.hidden_dim),
            ("window_len", self.window_len),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("predictor.{name} must be >= 1")));
            }
        }
        if self.windows_per_epoch == Some(0) {
            return Err(Error::Config(
                "predictor.windows_per_epoch must be >= 1".into(),
            ));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0
            && (0.0..1.0).contains(&o.beta1)
            && (0.0..1.0).contains(&o.beta2)
            && o.eps > 0.0)
        {
            return Err(Error::Config(
                "predictor.optimizer has out-of-range values".into(),
            ));
        }
        Ok(())
    }
}

/// Input features of `joint`'s network for one sample.
fn sample_features(sample: &Sample, joint: usize, input_dim: usize, out: &mut [f64]) {
    if input_dim == 2 {
        out[0] = sample.state.q[joint];
        out[1] = sample.state.qd[joint];
    } else {
        out.copy_from_slice(&sample.state.features());
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// One trained joint network with its normalisation statistics. Losses in
/// the history are in normalised target units.
#[derive(Clone, Debug, PartialEq)]
pub struct JointModel {
    pub joint: usize,
    pub params: LstmParams,
    pub input_norm: Standardizer,
    pub target_mean: f64,
    pub target_std: f64,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl JointModel {
    fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    /// Normalised inputs for every sample, row-major `N x input_dim`.
    pub fn normalized_inputs(&self, samples: &[Sample]) -> Vec<f64> {
        let id = self.input_dim();
        let mut raw = vec![0.0; id];
        let mut out = vec![0.0; samples.len() * id];
        for (k, s) in samples.iter().enumerate() {
            sample_features(s, self.joint, id, &mut raw);
            self.input_norm
                .normalize_into(&raw, &mut out[k * id..(k + 1) * id]);
        }
        out
    }

    pub fn normalize_target(&self, tau: f64) -> f64 {
        (tau - self.target_mean) / self.target_std
    }

    pub fn denormalize_output(&self, y: f64) -> f64 {
        y * self.target_std + self.target_mean
    }

    /// Torque prediction for one already-normalised window.
    pub fn predict_window(&self, window: &[f64]) -> f64 {
        self.denormalize_output(forward_window(&self.params, window))
    }

    fn predict_series_raw(&self, samples: &[Sample], window_len: usize) -> Vec<Option<f64>> {
        let id = self.input_dim();
        let inputs = self.normalized_inputs(samples);
        let mut ws = Workspace::new(self.params.hidden_dim(), window_len);
        (0..samples.len())
            .map(|t| {
                (t + 1 >= window_len).then(|| {
                    let w = &inputs[(t + 1 - window_len) * id..(t + 1) * id];
                    self.denormalize_output(forward_window_with(&self.params, w, &mut ws))
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointModelSet {
    pub config: PredictorConfig,
    pub models: Vec<JointModel>,
}

impl JointModelSet {
    pub fn window_len(&self) -> usize {
        self.config.window_len
    }

    /// Per-timestep torque predictions. The first `window_len - 1` entries are
    /// `None`: no full window ends there.
    pub fn predict_series(&self, samples: &[Sample]) -> Vec<Option<JointVector>> {
        let per_joint: Vec<Vec<Option<f64>>> = self
            .models
            .par_iter()
            .map(|m| m.predict_series_raw(samples, self.window_len()))
            .collect();
        (0..samples.len())
            .map(|t| {
                let mut tau = JointVector::zeros();
                for (j, series) in per_joint.iter().enumerate() {
                    tau[j] = series[t]?;
                }
                Some(tau)
            })
            .collect()
    }

    /// Mean squared error in normalised units over the validation windows of
    /// `dataset`, per joint. This is the quantity recorded as `val_loss`.
    pub fn validation_loss(&self, dataset: &Dataset) -> Vec<f64> {
        let w = self.window_len();
        self.models
            .iter()
            .map(|m| {
                let inputs = m.normalized_inputs(&dataset.samples);
                let targets: Vec<f64> = dataset
                    .samples
                    .iter()
                    .map(|s| m.normalize_target(s.tau_measured[m.joint]))
                    .collect();
                let ends = window_ends(&dataset.partition.val, w);
                let mut ws = Workspace::new(m.params.hidden_dim(), w);
                mean_loss(&m.params, &inputs, &targets, &ends, w, &mut ws)
            })
            .collect()
    }
}

impl TorquePredictor for JointModelSet {
    fn method(&self) -> Method {
        Method::Nn
    }

    fn predict_series(&self, samples: &[Sample]) -> Vec<Option<JointVector>> {
        JointModelSet::predict_series(self, samples)
    }
}

fn window_ends(range: &std::ops::Range<usize>, window_len: usize) -> Vec<usize> {
    if range.len() < window_len {
        return Vec::new();
    }
    (range.start + window_len - 1..range.end).collect()
}

fn window<'a>(inputs: &'a [f64], end: usize, window_len: usize, input_dim: usize) -> &'a [f64] {
    &inputs[(end + 1 - window_len) * input_dim..(end + 1) * input_dim]
}

fn mean_loss(
    params: &LstmParams,
    inputs: &[f64],
    targets: &[f64],
    ends: &[usize],
    window_len: usize,
    ws: &mut Workspace,
) -> f64 {
    let id = params.input_dim();
    let total: f64 = ends
        .iter()
        .map(|&e| {
            lstm::loss(
                forward_window_with(params, window(inputs, e, window_len, id), ws),
                targets[e],
            )
        })
        .sum();
    total / ends.len() as f64
}

struct JointData {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    input_norm: Standardizer,
    target_mean: f64,
    target_std: f64,
}

fn prepare_joint(
    samples: &[Sample],
    partition: &Partition,
    joint: usize,
    input_dim: usize,
) -> JointData {
    let mut raw = vec![0.0; samples.len() * input_dim];
    for (k, s) in samples.iter().enumerate() {
        sample_features(
            s,
            joint,
            input_dim,
            &mut raw[k * input_dim..(k + 1) * input_dim],
        );
    }
    let train_rows =
        raw[partition.train.start * input_dim..partition.train.end * input_dim].chunks(input_dim);
    let (input_norm, degenerate) = Standardizer::fit(train_rows, input_dim);
    if !degenerate.is_empty() {
        log::warn!("joint {joint}: input features {degenerate:?} are constant in the training split; std clamped to 1");
    }
    let mut inputs = vec![0.0; raw.len()];
    for (src, dst) in raw.chunks(input_dim).zip(inputs.chunks_mut(input_dim)) {
        input_norm.normalize_into(src, dst);
    }
    let train_targets: Vec<f64> = samples[partition.train.clone()]
        .iter()
        .map(|s| s.tau_measured[joint])
        .collect();
    let (t_norm, t_degenerate) = Standardizer::fit(train_targets.chunks(1), 1);
    if !t_degenerate.is_empty() {
        log::warn!("joint {joint}: training torque is constant; target std clamped to 1");
    }
    let (target_mean, target_std) = (t_norm.mean[0], t_norm.std[0]);
    let targets = samples
        .iter()
        .map(|s| (s.tau_measured[joint] - target_mean) / target_std)
        .collect();
    JointData {
        inputs,
        targets,
        input_norm,
        target_mean,
        target_std,
    }
}

fn train_joint(
    joint: usize,
    data: JointData,
    partition: &Partition,
    cfg: &PredictorConfig,
) -> JointModel {
    let w = cfg.window_len;
    let id = cfg.input_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, joint as u64));
    let mut params = LstmParams::init(id, cfg.hidden_dim, &mut rng);
    let mut grad = LstmParams::zeros(id, cfg.hidden_dim);
    let mut adam = Adam::new(cfg.optimizer.clone(), params.as_slice().len());
    let mut ws = Workspace::new(cfg.hidden_dim, w);

    let mut train_ends = window_ends(&partition.train, w);
    let val_ends = window_ends(&partition.val, w);
    let per_epoch = cfg
        .windows_per_epoch
        .unwrap_or(train_ends.len())
        .min(train_ends.len());

    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut history = Vec::new();
    let mut since_best = 0usize;
    for epoch in 0..cfg.max_epochs {
        train_ends.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_ends[..per_epoch].chunks(cfg.batch_size) {
            grad.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &e in batch {
                epoch_loss += backward_window_with(
                    &params,
                    window(&data.inputs, e, w, id),
                    data.targets[e],
                    scale,
                    &mut grad,
                    &mut ws,
                );
            }
            adam.step(params.as_mut_slice(), grad.as_slice());
        }
        let train_loss = epoch_loss / per_epoch as f64;
        let val_loss = mean_loss(&params, &data.inputs, &data.targets, &val_ends, w, &mut ws);
        log::debug!("joint {joint} epoch {epoch}: train {train_loss:.5e} val {val_loss:.5e}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, params.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > cfg.early_stop_patience {
                break;
            }
        }
    }
    JointModel {
        joint,
        params: best.1,
        input_norm: data.input_norm,
        target_mean: data.target_mean,
        target_std: data.target_std,
        history,
        best_epoch: best.2,
    }
}

/// Trains the six joint networks on the free-space train split, selecting
/// per joint the parameters with the lowest validation loss.
pub fn train(dataset: &Dataset, cfg: &PredictorConfig) -> Result<JointModelSet> {
    cfg.validate()?;
    let p = &dataset.partition;
    if p.train.len() < cfg.window_len + 1 {
        return Err(Error::Config(format!(
            "training split has {} samples, window_len {} needs at least {}",
            p.train.len(),
            cfg.window_len,
            cfg.window_len + 1
        )));
    }
    if p.val.len() < cfg.window_len {
        return Err(Error::Config(format!(
            "validation split has {} samples, fewer than window_len {}",
            p.val.len(),
            cfg.window_len
        )));
    }
    let fit_range = p.train.start..p.val.end;
    if dataset.samples[fit_range]
        .iter()
        .any(|s| s.contact_wrench_truth.is_some())
    {
        return Err(Error::Data(
            "predictor training needs free-space data; the train/val splits contain contact samples".into(),
        ));
    }
    let models = (0..N_JOINTS)
        .into_par_iter()
        .map(|j| {
            let data = prepare_joint(&dataset.samples, p, j, cfg.input_dim);
            train_joint(j, data, p, cfg)
        })
        .collect();
    Ok(JointModelSet {
        config: cfg.clone(),
        models,
    })
}
