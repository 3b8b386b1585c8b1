//! Per-feature z-score statistics.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits mean and population standard deviation column-wise over
    /// `rows`. Features with zero spread get `std = 1`; their indices are
    /// returned alongside.
    pub fn fit<'a, I>(rows: I, dim: usize) -> (Self, Vec<usize>)
    where
        I: IntoIterator<Item = &'a [f64]> + Clone,
    {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        for row in rows.clone() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            n += 1;
        }
        assert!(n > 0, "cannot fit statistics on zero rows");
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut degenerate = Vec::new();
        let std = var
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let sd = (s / n as f64).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    degenerate.push(i);
                    1.0
                }
            })
            .collect();
        (Standardizer { mean, std }, degenerate)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.mean.len() {
            out[i] = (x[i] - self.mean[i]) / self.std[i];
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.normalize_into(x, &mut out);
        out
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, v)| v * self.std[i] + self.mean[i])
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        self.mean.len() == self.std.len()
            && self.mean.iter().all(|m| m.is_finite())
            && self.std.iter().all(|s| *s > 0.0 && s.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn constant_feature_is_clamped() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0]];
        let (s, degenerate) = Standardizer::fit(rows.iter().map(|r| r.as_slice()), 2);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(degenerate, vec![1]);
    }

    proptest! {
        #[test]
        fn round_trip(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..40),
            x in prop::collection::vec(-1e3f64..1e3, 4),
        ) {
            let (s, _) = Standardizer::fit(rows.iter().map(|r| r.as_slice()), 4);
            let back = s.denormalize(&s.normalize(&x));
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
