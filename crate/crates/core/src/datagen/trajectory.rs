use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manipulator::{JointState, JointVector, KinematicChain, Wrench, N_JOINTS};

/// Periodic pauses in the free-space motion. The motion clock `s` stops for
/// `hold_s` after every `every_s` of motion, with raised-cosine speed blends
/// of `blend_s` on each side so velocities stay continuous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwellConfig {
    pub every_s: f64,
    pub hold_s: f64,
    pub blend_s: f64,
}

/// Finite Fourier-series excitation. Every harmonic is an integer multiple
/// of `1 / fundamental_period_s`, so the motion repeats with that period
/// (measured on the motion clock).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub duration_s: f64,
    pub rate_hz: f64,
    pub n_harmonics: [usize; N_JOINTS],
    /// Fraction of each joint's half range available to the summed amplitudes.
    pub amplitude_fraction: [f64; N_JOINTS],
    pub max_velocity: [f64; N_JOINTS],
    pub fundamental_period_s: f64,
    /// Harmonic numbers are drawn from `1..=max_harmonic`.
    pub max_harmonic: u32,
    pub dwell: Option<DwellConfig>,
    pub seed: u64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            duration_s: 600.0,
            rate_hz: 100.0,
            n_harmonics: [4; N_JOINTS],
            amplitude_fraction: [0.9; N_JOINTS],
            max_velocity: [0.6, 0.6, 0.05, 1.2, 1.2, 1.2],
            fundamental_period_s: 60.0,
            max_harmonic: 6,
            dwell: Some(DwellConfig {
                every_s: 15.0,
                hold_s: 0.0,
                blend_s: 1.5,
            }),
            seed: 1,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config("trajectory.duration_s must be > 0".into()));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::Config("trajectory.rate_hz must be > 0".into()));
        }
        if !(self.fundamental_period_s > 0.0 && self.fundamental_period_s.is_finite()) {
            return Err(Error::Config(
                "trajectory.fundamental_period_s must be > 0".into(),
            ));
        }
        if self.max_harmonic == 0 && self.n_harmonics.iter().any(|&n| n > 0) {
            return Err(Error::Config("trajectory.max_harmonic must be >= 1".into()));
        }
        for i in 0..N_JOINTS {
            if self.n_harmonics[i] == 0 {
                continue;
            }
            let frac = self.amplitude_fraction[i];
            if !(0.0..=1.0).contains(&frac) {
                return Err(Error::Config(format!(
                    "trajectory.amplitude_fraction[{i}] = {frac}: amplitude budget infeasible, must lie in [0, 1] to stay within joint limits"
                )));
            }
            if !(self.max_velocity[i] > 0.0 && self.max_velocity[i].is_finite()) {
                return Err(Error::Config(format!(
                    "trajectory.max_velocity[{i}] must be > 0 when joint {i} has harmonics"
                )));
            }
        }
        if let Some(d) = &self.dwell {
            if !(d.blend_s >= 0.0 && d.hold_s >= 0.0 && d.every_s > d.blend_s) {
                return Err(Error::Config(
                    "trajectory.dwell requires every_s > blend_s >= 0 and hold_s >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.rate_hz).round() as usize
    }
}

/// Maps wall time onto the motion clock; returns `(s, ds/dt)`.
fn motion_clock(dwell: Option<&DwellConfig>, t: f64) -> (f64, f64) {
    let Some(d) = dwell else {
        return (t, 1.0);
    };
    let r = d.blend_s;
    let cycle = d.every_s + d.hold_s + r;
    let n = (t / cycle).floor();
    let mut u = t - n * cycle;
    let base = n * d.every_s;
    let cruise = d.every_s - r;
    if u < cruise {
        return (base + u, 1.0);
    }
    let mut s = base + cruise;
    u -= cruise;
    if u < r {
        let x = PI * u / r;
        return (s + 0.5 * (u + r / PI * x.sin()), 0.5 * (1.0 + x.cos()));
    }
    s += 0.5 * r;
    u -= r;
    if u < d.hold_s {
        return (s, 0.0);
    }
    u -= d.hold_s;
    let x = PI * u / r;
    (s + 0.5 * (u - r / PI * x.sin()), 0.5 * (1.0 - x.cos()))
}

#[derive(Clone, Copy, Debug)]
struct Harmonic {
    amplitude: f64,
    omega: f64,
    phase: f64,
}

fn draw_harmonics(chain: &KinematicChain, cfg: &TrajectoryConfig) -> Vec<Vec<Harmonic>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = chain.joint_half_ranges();
    let base_omega = TAU / cfg.fundamental_period_s;
    (0..N_JOINTS)
        .map(|i| {
            let n = cfg.n_harmonics[i];
            if n == 0 {
                return Vec::new();
            }
            let raw: Vec<(f64, f64, f64)> = (0..n)
                .map(|_| {
                    let k = rng.random_range(1..=cfg.max_harmonic) as f64;
                    let weight = rng.random_range(0.2..1.0);
                    let phase = rng.random_range(0.0..TAU);
                    (weight, k * base_omega, phase)
                })
                .collect();
            let total: f64 = raw.iter().map(|h| h.0).sum();
            let budget = cfg.amplitude_fraction[i] * half[i];
            let mut hs: Vec<Harmonic> = raw
                .iter()
                .map(|&(w, omega, phase)| Harmonic {
                    amplitude: budget * w / total,
                    omega,
                    phase,
                })
                .collect();
            let peak_velocity: f64 = hs.iter().map(|h| h.amplitude * h.omega).sum();
            if peak_velocity > cfg.max_velocity[i] {
                // shrink slightly past the bound so rounding cannot exceed it
                let scale = cfg.max_velocity[i] / peak_velocity * (1.0 - 1e-12);
                hs.iter_mut().for_each(|h| h.amplitude *= scale);
            }
            hs
        })
        .collect()
}

/// Sum-of-sinusoids free-space excitation,
/// `q_i(t) = mid_i + sum_k A_ik sin(w_ik s(t) + phi_ik)` with analytic `qd`.
pub fn generate_freespace_trajectory(
    chain: &KinematicChain,
    cfg: &TrajectoryConfig,
) -> Result<Vec<JointState>> {
    cfg.validate()?;
    let harmonics = draw_harmonics(chain, cfg);
    let mid = chain.joint_midpoints();
    let n = cfg.n_samples();
    let states = (0..n)
        .map(|k| {
            let t = k as f64 / cfg.rate_hz;
            let (s, speed) = motion_clock(cfg.dwell.as_ref(), t);
            let (q, qd) = evaluate(&harmonics, mid, s);
            JointState::new(t, q, qd * speed)
        })
        .collect();
    Ok(states)
}

/// Position and motion-clock velocity at clock value `s`.
fn evaluate(harmonics: &[Vec<Harmonic>], mid: JointVector, s: f64) -> (JointVector, JointVector) {
    let mut q = mid;
    let mut qd = JointVector::zeros();
    for (i, hs) in harmonics.iter().enumerate() {
        for h in hs {
            let (sin, cos) = (h.omega * s + h.phase).sin_cos();
            q[i] += h.amplitude * sin;
            qd[i] += h.amplitude * h.omega * cos;
        }
    }
    (q, qd)
}

/// Number of distinct dwell poses per period of the excitation, or 0 without
/// dwells. Dwells recur at the same poses only when the period is a multiple
/// of `every_s`.
pub fn rest_pose_count(cfg: &TrajectoryConfig) -> usize {
    match &cfg.dwell {
        Some(d) => {
            let n = cfg.fundamental_period_s / d.every_s;
            if (n - n.round()).abs() < 1e-9 {
                n.round() as usize
            } else {
                0
            }
        }
        None => 0,
    }
}

/// Joint configuration held during the `index`-th dwell of the free-space
/// excitation.
pub fn rest_pose(
    chain: &KinematicChain,
    cfg: &TrajectoryConfig,
    index: usize,
) -> Result<JointVector> {
    cfg.validate()?;
    let count = rest_pose_count(cfg);
    let Some(d) = cfg.dwell.as_ref().filter(|_| index < count) else {
        return Err(Error::Config(format!(
            "rest pose {index} requested but the free-space excitation has {count} distinct dwell poses"
        )));
    };
    let s = (index + 1) as f64 * d.every_s - 0.5 * d.blend_s;
    Ok(evaluate(&draw_harmonics(chain, cfg), chain.joint_midpoints(), s).0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContactProfile {
    /// Per axis in turn (X, Y, Z): linear ramp to `peak`, hold, linear ramp
    /// back to zero, rest.
    RampHoldRelease {
        peak: [f64; 3],
        ramp_s: f64,
        hold_s: f64,
        rest_s: f64,
    },
    /// Per axis in turn: `peak * sin^2(pi u / push_s)` push, then rest.
    SinusoidalPush {
        peak: [f64; 3],
        push_s: f64,
        rest_s: f64,
    },
}

impl ContactProfile {
    pub fn peaks(&self) -> [f64; 3] {
        match self {
            ContactProfile::RampHoldRelease { peak, .. }
            | ContactProfile::SinusoidalPush { peak, .. } => *peak,
        }
    }

    fn segment_s(&self) -> f64 {
        match self {
            ContactProfile::RampHoldRelease {
                ramp_s,
                hold_s,
                rest_s,
                ..
            } => 2.0 * ramp_s + hold_s + rest_s,
            ContactProfile::SinusoidalPush { push_s, rest_s, .. } => push_s + rest_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ContactProfile::RampHoldRelease {
                peak,
                ramp_s,
                hold_s,
                rest_s,
            } => {
                peak.iter().all(|p| p.is_finite())
                    && *ramp_s > 0.0
                    && *hold_s >= 0.0
                    && *rest_s >= 0.0
            }
            ContactProfile::SinusoidalPush {
                peak,
                push_s,
                rest_s,
            } => peak.iter().all(|p| p.is_finite()) && *push_s > 0.0 && *rest_s >= 0.0,
        };
        if ok && self.segment_s().is_finite() {
            Ok(())
        } else {
            Err(Error::Config(
                "contact.profile has invalid timing or peak values".into(),
            ))
        }
    }

    /// Ground-truth contact force at time `t`; the axes repeat X, Y, Z.
    pub fn wrench_at(&self, t: f64) -> Wrench {
        let seg = self.segment_s();
        let k = (t / seg).floor();
        let axis = (k as i64).rem_euclid(3) as usize;
        let u = t - k * seg;
        let peak = self.peaks()[axis];
        let level = match self {
            ContactProfile::RampHoldRelease { ramp_s, hold_s, .. } => {
                if u < *ramp_s {
                    u / ramp_s
                } else if u < ramp_s + hold_s {
                    1.0
                } else if u < 2.0 * ramp_s + hold_s {
                    (2.0 * ramp_s + hold_s - u) / ramp_s
                } else {
                    0.0
                }
            }
            ContactProfile::SinusoidalPush { push_s, .. } => {
                if u < *push_s {
                    (PI * u / push_s).sin().powi(2)
                } else {
                    0.0
                }
            }
        };
        let mut w = Wrench::zero();
        w.force[axis] = peak * level;
        w
    }
}

/// Probing session: the arm sways slowly around `probe_q` while the
/// contact profile is applied at the tool tip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactConfig {
    pub duration_s: f64,
    pub rate_hz: f64,
    pub probe_q: [f64; N_JOINTS],
    pub sway_amplitude: [f64; N_JOINTS],
    pub sway_period_s: f64,
    /// When set, `probe_q` is replaced by this dwell pose of the free-space
    /// excitation (see [`rest_pose`]).
    pub probe_rest_pose: Option<usize>,
    pub profile: ContactProfile,
    pub seed: u64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        ContactConfig {
            duration_s: 60.0,
            rate_hz: 100.0,
            probe_q: [0.3, -0.2, 0.15, 0.5, -0.4, 0.2],
            sway_amplitude: [0.01, 0.01, 0.002, 0.015, 0.015, 0.015],
            sway_period_s: 12.0,
            probe_rest_pose: Some(1),
            profile: ContactProfile::RampHoldRelease {
                peak: [35.0, 30.0, 45.0],
                ramp_s: 5.0,
                hold_s: 5.0,
                rest_s: 5.0,
            },
            seed: 2,
        }
    }
}

impl ContactConfig {
    pub fn validate(&self, chain: &KinematicChain) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Config("contact.duration_s must be > 0".into()));
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return Err(Error::Config("contact.rate_hz must be > 0".into()));
        }
        if !(self.sway_period_s > 0.0) {
            return Err(Error::Config("contact.sway_period_s must be > 0".into()));
        }
        for i in 0..N_JOINTS {
            let [lo, hi] = chain.joint_limits[i];
            let a = self.sway_amplitude[i];
            let q = self.probe_q[i];
            if !(a >= 0.0 && q - a >= lo && q + a <= hi) {
                return Err(Error::Config(format!(
                    "contact.probe_q[{i}] +/- sway_amplitude[{i}] leaves joint limits [{lo}, {hi}]"
                )));
            }
        }
        self.profile.validate()
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.rate_hz).round() as usize
    }
}

pub fn generate_contact_trajectory(
    chain: &KinematicChain,
    cfg: &ContactConfig,
) -> Result<Vec<(JointState, Wrench)>> {
    cfg.validate(chain)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phases: Vec<f64> = (0..N_JOINTS).map(|_| rng.random_range(0.0..TAU)).collect();
    let omega = TAU / cfg.sway_period_s;
    let probe = JointVector::from(cfg.probe_q);
    Ok((0..cfg.n_samples())
        .map(|k| {
            let t = k as f64 / cfg.rate_hz;
            let mut q = probe;
            let mut qd = JointVector::zeros();
            for i in 0..N_JOINTS {
                let (sin, cos) = (omega * t + phases[i]).sin_cos();
                q[i] += cfg.sway_amplitude[i] * sin;
                qd[i] = cfg.sway_amplitude[i] * omega * cos;
            }
            (JointState::new(t, q, qd), cfg.profile.wrench_at(t))
        })
        .collect())
}
