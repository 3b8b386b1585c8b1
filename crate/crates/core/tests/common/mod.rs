#![allow(dead_code)]

use forcesense_core::datagen::Sample;
use forcesense_core::manipulator::{
    condition_number, JointState, JointVector, KinematicChain, N_JOINTS,
};
use nalgebra::Matrix6;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Uniform configuration inside the joint limits.
pub fn random_q(chain: &KinematicChain, rng: &mut ChaCha8Rng) -> JointVector {
    JointVector::from_fn(|i, _| {
        let [lo, hi] = chain.joint_limits[i];
        rng.random_range(lo..hi)
    })
}

pub fn random_vector(rng: &mut ChaCha8Rng, scale: f64) -> JointVector {
    JointVector::from_fn(|_, _| scale * normal(rng))
}

/// Gaussian matrix shifted towards the identity, redrawn until its
/// condition number is below `max_cond`.
pub fn well_conditioned(rng: &mut ChaCha8Rng, max_cond: f64) -> Matrix6<f64> {
    loop {
        let m = Matrix6::from_fn(|r, c| normal(rng) + if r == c { 3.0 } else { 0.0 });
        if condition_number(&m) < max_cond {
            return m;
        }
    }
}

pub fn sample(q: JointVector, qd: JointVector, tau: JointVector) -> Sample {
    Sample {
        state: JointState::new(0.0, q, qd),
        tau_measured: tau,
        tau_free_truth: JointVector::zeros(),
        contact_wrench_truth: None,
        jacobian: Matrix6::identity(),
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub const JOINTS: usize = N_JOINTS;

/// Metric rows of a rendered report table: `(profile, axis, values)` where
/// the last value is the range column.
pub fn table_rows(table: &str) -> Vec<(String, String, Vec<f64>)> {
    let mut rows = Vec::new();
    for line in table.lines() {
        let cells: Vec<&str> = line.split_whitespace().collect();
        if cells.len() < 3 || !["Fx", "Fy", "Fz", "Ave.", "ratio"].contains(&cells[1]) {
            continue;
        }
        let values: Option<Vec<f64>> = cells[2..].iter().map(|c| c.parse().ok()).collect();
        if let Some(v) = values {
            rows.push((cells[0].to_string(), cells[1].to_string(), v));
        }
    }
    rows
}

/// Largest violation of the table's own arithmetic: every Ave. cell against
/// the mean of the three axis cells above it, and every ratio against
/// Ave. RMSE over Ave. range.
pub fn table_arithmetic_error(table: &str) -> f64 {
    let rows = table_rows(table);
    let mut worst = 0.0f64;
    let find = |p: &str, a: &str| {
        rows.iter()
            .find(|r| r.0 == p && r.1 == a)
            .map(|r| r.2.clone())
    };
    let profiles: Vec<String> = rows
        .iter()
        .filter(|r| r.1 == "Ave.")
        .map(|r| r.0.clone())
        .collect();
    assert!(!profiles.is_empty(), "no Ave. rows in table");
    for p in &profiles {
        let (fx, fy, fz) = (
            find(p, "Fx").unwrap(),
            find(p, "Fy").unwrap(),
            find(p, "Fz").unwrap(),
        );
        let ave = find(p, "Ave.").unwrap();
        let ratio = find(p, "ratio").unwrap();
        for c in 0..ave.len() {
            worst = worst.max((ave[c] - (fx[c] + fy[c] + fz[c]) / 3.0).abs());
        }
        let range = *ave.last().unwrap();
        for c in 0..ratio.len() {
            worst = worst.max((ratio[c] - ave[c] / range).abs());
        }
    }
    worst
}
