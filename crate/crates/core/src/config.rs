//! Run configuration: one strict JSON document holding every tunable.
//!
//! Missing keys take their defaults; unknown keys are rejected. Component
//! seeds inside sub-configs are stream labels: the seed each component
//! actually uses is `mix_seed(seed, label)`, so the global `seed` (or the
//! `FORCESENSE_SEED` environment variable) moves every stream at once.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{rest_pose, ContactConfig, Profile, TrajectoryConfig};
use crate::error::{Error, Result};
use crate::estimator::SolvePolicy;
use crate::manipulator::{KinematicChain, SensorModel};
use crate::method::Method;
use crate::predictor::PredictorConfig;
use crate::rng::mix_seed;

pub const SEED_ENV: &str = "FORCESENSE_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorProfiles {
    pub classic: SensorModel,
    pub si: SensorModel,
}

impl Default for SensorProfiles {
    fn default() -> Self {
        SensorProfiles {
            classic: SensorModel::classic(),
            si: SensorModel::si(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub velocity_eps: f64,
    pub k: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            velocity_eps: 1e-3,
            k: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub chain: KinematicChain,
    pub sensors: SensorProfiles,
    pub freespace: TrajectoryConfig,
    pub contact: ContactConfig,
    pub predictor: PredictorConfig,
    pub baselines: BaselineConfig,
    pub estimator: SolvePolicy,
    pub profiles: Vec<Profile>,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            chain: KinematicChain::reference(),
            sensors: SensorProfiles::default(),
            freespace: TrajectoryConfig::default(),
            contact: ContactConfig::default(),
            predictor: PredictorConfig::default(),
            baselines: BaselineConfig::default(),
            estimator: SolvePolicy::default(),
            profiles: Profile::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and validates a config file. `None` gives the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                Self::from_json(&text).map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
                    other => other,
                })?
            }
            None => RunConfig::default(),
        };
        cfg.apply_seed_env()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces `seed` with `FORCESENSE_SEED` when that variable is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        self.sensors.classic.validate()?;
        self.sensors.si.validate()?;
        self.freespace.validate()?;
        self.contact_trajectory()?.validate(&self.chain)?;
        self.predictor.validate()?;
        self.estimator.validate()?;
        if !(self.baselines.velocity_eps > 0.0 && self.baselines.velocity_eps.is_finite()) {
            return Err(Error::Config("baselines.velocity_eps must be > 0".into()));
        }
        if self.baselines.k == 0 {
            return Err(Error::Config("baselines.k must be >= 1".into()));
        }
        if self.profiles.is_empty() {
            return Err(Error::Config(
                "profiles must list at least one profile".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Config(
                "methods must list at least one method".into(),
            ));
        }
        for (name, dup) in [
            ("profiles", has_duplicates(&self.profiles)),
            ("methods", has_duplicates(&self.methods)),
        ] {
            if dup {
                return Err(Error::Config(format!("{name} contains duplicates")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON serialisation.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn sensor(&self, profile: Profile) -> SensorModel {
        let base = match profile {
            Profile::Classic => &self.sensors.classic,
            Profile::Si => &self.sensors.si,
        };
        SensorModel {
            seed: mix_seed(self.seed, base.seed),
            ..base.clone()
        }
    }

    /// Free-space trajectory with its effective seed. Both profiles replay the
    /// same motion.
    pub fn freespace_trajectory(&self) -> TrajectoryConfig {
        TrajectoryConfig {
            seed: mix_seed(self.seed, self.freespace.seed),
            ..self.freespace.clone()
        }
    }

    /// Contact session with its effective seed, and with the probe pose
    /// resolved when it refers to a free-space dwell pose.
    pub fn contact_trajectory(&self) -> Result<ContactConfig> {
        let mut c = ContactConfig {
            seed: mix_seed(self.seed, self.contact.seed),
            ..self.contact.clone()
        };
        if let Some(k) = c.probe_rest_pose {
            let q = rest_pose(&self.chain, &self.freespace_trajectory(), k)
                .map_err(|e| Error::Config(format!("contact.probe_rest_pose: {e}")))?;
            c.probe_q = q.into();
        }
        Ok(c)
    }

    pub fn predictor_for(&self, profile: Profile) -> PredictorConfig {
        PredictorConfig {
            seed: mix_seed(mix_seed(self.seed, self.predictor.seed), profile as u64),
            ..self.predictor.clone()
        }
    }

    /// Seeds the data streams of a profile, for provenance records.
    pub fn effective_seeds(&self, profile: Profile) -> EffectiveSeeds {
        EffectiveSeeds {
            global: self.seed,
            freespace: self.freespace_trajectory().seed,
            contact: mix_seed(self.seed, self.contact.seed),
            sensor: self.sensor(profile).seed,
            predictor: self.predictor_for(profile).seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectiveSeeds {
    pub global: u64,
    pub freespace: u64,
    pub contact: u64,
    pub sensor: u64,
    pub predictor: u64,
}

fn has_duplicates<T: PartialEq>(xs: &[T]) -> bool {
    xs.iter().enumerate().any(|(i, x)| xs[..i].contains(x))
}
