//! Model JSON. Gate weights are stored as row-major nested arrays, one block
//! per gate, so the file can be read without knowing the flat layout.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lstm::{Gate, LstmParams};
use super::{EpochRecord, JointModel, JointModelSet, PredictorConfig};
use crate::error::{Error, Result};
use crate::manipulator::N_JOINTS;
use crate::normalize::Standardizer;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateWeights {
    w: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Gates {
    input: GateWeights,
    forget: GateWeights,
    cell: GateWeights,
    output: GateWeights,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointModelFile {
    joint: usize,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    target_mean: f64,
    target_std: f64,
    best_epoch: usize,
    history: Vec<EpochRecord>,
    gates: Gates,
    w_out: Vec<f64>,
    b_out: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub config_fingerprint: String,
    pub predictor: PredictorConfig,
    joints: Vec<JointModelFile>,
}

fn rows(flat: &[f64], cols: usize) -> Vec<Vec<f64>> {
    flat.chunks(cols).map(<[f64]>::to_vec).collect()
}

fn gate_weights(p: &LstmParams, g: Gate) -> GateWeights {
    GateWeights {
        w: rows(p.gate_w(g), p.input_dim()),
        u: rows(p.gate_u(g), p.hidden_dim()),
        b: p.gate_b(g).to_vec(),
    }
}

impl ModelFile {
    pub fn from_models(set: &JointModelSet, config_fingerprint: &str) -> Self {
        let joints = set
            .models
            .iter()
            .map(|m| {
                let p = &m.params;
                JointModelFile {
                    joint: m.joint,
                    input_mean: m.input_norm.mean.clone(),
                    input_std: m.input_norm.std.clone(),
                    target_mean: m.target_mean,
                    target_std: m.target_std,
                    best_epoch: m.best_epoch,
                    history: m.history.clone(),
                    gates: Gates {
                        input: gate_weights(p, Gate::Input),
                        forget: gate_weights(p, Gate::Forget),
                        cell: gate_weights(p, Gate::Cell),
                        output: gate_weights(p, Gate::Output),
                    },
                    w_out: p.w_out().to_vec(),
                    b_out: p.b_out(),
                }
            })
            .collect();
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config_fingerprint: config_fingerprint.to_string(),
            predictor: set.config.clone(),
            joints,
        }
    }

    pub fn into_models(self) -> Result<JointModelSet> {
        let bad = |msg: String| Error::Data(format!("invalid model file: {msg}"));
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(bad(format!(
                "format_version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.predictor.validate()?;
        if self.joints.len() != N_JOINTS {
            return Err(bad(format!(
                "{} joint models, expected {N_JOINTS}",
                self.joints.len()
            )));
        }
        let (id, h) = (self.predictor.input_dim, self.predictor.hidden_dim);
        let mut models = Vec::with_capacity(N_JOINTS);
        for (k, jm) in self.joints.into_iter().enumerate() {
            if jm.joint != k {
                return Err(bad(format!("joint models out of order at position {k}")));
            }
            let mut p = LstmParams::zeros(id, h);
            let blocks = [
                (Gate::Input, &jm.gates.input),
                (Gate::Forget, &jm.gates.forget),
                (Gate::Cell, &jm.gates.cell),
                (Gate::Output, &jm.gates.output),
            ];
            for (g, gw) in blocks {
                let shape_ok = gw.w.len() == h
                    && gw.w.iter().all(|r| r.len() == id)
                    && gw.u.len() == h
                    && gw.u.iter().all(|r| r.len() == h)
                    && gw.b.len() == h;
                if !shape_ok {
                    return Err(bad(format!(
                        "joint {k} gate {g:?} has the wrong shape for H={h}, I={id}"
                    )));
                }
                p.gate_w_mut(g).copy_from_slice(&gw.w.concat());
                p.gate_u_mut(g).copy_from_slice(&gw.u.concat());
                p.gate_b_mut(g).copy_from_slice(&gw.b);
            }
            if jm.w_out.len() != h {
                return Err(bad(format!(
                    "joint {k} w_out has length {}, expected {h}",
                    jm.w_out.len()
                )));
            }
            p.w_out_mut().copy_from_slice(&jm.w_out);
            *p.b_out_mut() = jm.b_out;
            let input_norm = Standardizer {
                mean: jm.input_mean,
                std: jm.input_std,
            };
            if !p.is_finite() || !input_norm.is_valid() || input_norm.dim() != id {
                return Err(bad(format!(
                    "joint {k} has non-finite weights or invalid statistics"
                )));
            }
            if !(jm.target_std > 0.0 && jm.target_std.is_finite() && jm.target_mean.is_finite()) {
                return Err(bad(format!("joint {k} has invalid target statistics")));
            }
            models.push(JointModel {
                joint: k,
                params: p,
                input_norm,
                target_mean: jm.target_mean,
                target_std: jm.target_std,
                history: jm.history,
                best_epoch: jm.best_epoch,
            });
        }
        Ok(JointModelSet {
            config: self.predictor,
            models,
        })
    }
}

pub fn save_model(set: &JointModelSet, config_fingerprint: &str, path: &Path) -> Result<()> {
    let file = ModelFile::from_models(set, config_fingerprint);
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a model file, returning the models and the fingerprint of the
/// configuration they were trained under.
pub fn load_model(path: &Path) -> Result<(JointModelSet, String)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let fp = file.config_fingerprint.clone();
    Ok((file.into_models()?, fp))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn model_set() -> JointModelSet {
        let cfg = PredictorConfig {
            hidden_dim: 3,
            window_len: 4,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let models = (0..N_JOINTS)
            .map(|j| JointModel {
                joint: j,
                params: LstmParams::init(12, 3, &mut rng),
                input_norm: Standardizer {
                    mean: vec![0.1; 12],
                    std: vec![2.0; 12],
                },
                target_mean: 0.3,
                target_std: 1.5,
                history: vec![EpochRecord {
                    epoch: 0,
                    train_loss: 1.0,
                    val_loss: 2.0,
                }],
                best_epoch: 0,
            })
            .collect();
        JointModelSet {
            config: cfg,
            models,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let set = model_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&set, "abc", &path).unwrap();
        let (back, fp) = load_model(&path).unwrap();
        assert_eq!(fp, "abc");
        assert_eq!(back, set);
    }

    #[test]
    fn rejects_other_format_version() {
        let set = model_set();
        let mut file = ModelFile::from_models(&set, "x");
        file.format_version = 99;
        assert!(matches!(file.into_models(), Err(Error::Data(_))));
    }

    #[test]
    fn rejects_wrong_shape() {
        let set = model_set();
        let mut file = ModelFile::from_models(&set, "x");
        file.joints[2].gates.cell.u.pop();
        assert!(file.into_models().is_err());
    }

    #[test]
    fn gate_blocks_follow_flat_layout() {
        let set = model_set();
        let file = ModelFile::from_models(&set, "x");
        let p = &set.models[0].params;
        let h = p.hidden_dim();
        // forget gate, row 1, column 2 of the input matrix
        assert_eq!(file.joints[0].gates.forget.w[1][2], p.w()[(h + 1) * 12 + 2]);
        assert_eq!(file.joints[0].gates.output.b[2], p.b()[3 * h + 2]);
    }
}
