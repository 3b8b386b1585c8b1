//! External wrench from residual joint torque through the inverse-transpose
//! Jacobian, with an explicit policy for ill-conditioned poses.

use nalgebra::Matrix6;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::Sample;
use crate::error::{Error, Result};
use crate::manipulator::{condition_number, JointVector, Wrench};
use crate::method::{Method, TorquePredictor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolvePolicy {
    /// Dense LU solve of `J^T F = tau_ext`; fails above `kappa_max`.
    Exact { kappa_max: f64 },
    /// Tikhonov-regularised least squares with a fixed `lambda`.
    Damped { lambda: f64 },
    /// Exact solve, falling back to damping with `lambda = lambda_scale * |J|_F`
    /// when the condition number exceeds `kappa_max`.
    ExactWithFallback { kappa_max: f64, lambda_scale: f64 },
}

impl Default for SolvePolicy {
    fn default() -> Self {
        SolvePolicy::ExactWithFallback {
            kappa_max: 1e8,
            lambda_scale: 1e-6,
        }
    }
}

impl SolvePolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SolvePolicy::Exact { kappa_max } => kappa_max >= 1.0,
            SolvePolicy::Damped { lambda } => lambda >= 0.0 && lambda.is_finite(),
            SolvePolicy::ExactWithFallback {
                kappa_max,
                lambda_scale,
            } => kappa_max >= 1.0 && lambda_scale > 0.0 && lambda_scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid estimator policy {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveKind {
    Exact,
    Damped,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrenchEstimate {
    pub wrench: Wrench,
    /// `tau - tau_hat`, exactly as subtracted.
    pub residual_torque: JointVector,
    pub jacobian_condition: f64,
    pub method_tag: Method,
    pub solve: SolveKind,
}

fn solve_exact(j: &Matrix6<f64>, rhs: &JointVector) -> Option<JointVector> {
    let jt = j.transpose();
    let lu = jt.lu();
    let mut f = lu.solve(rhs)?;
    // one step of iterative refinement
    let r = rhs - jt * f;
    f += lu.solve(&r)?;
    Some(f)
}

fn solve_damped(j: &Matrix6<f64>, rhs: &JointVector, lambda: f64) -> Option<JointVector> {
    let a = j * j.transpose() + Matrix6::identity() * (lambda * lambda);
    a.cholesky().map(|c| c.solve(&(j * rhs)))
}

/// `F = J^{-T} (tau - tau_hat)` under `policy`.
pub fn estimate_wrench(
    j: &Matrix6<f64>,
    tau: &JointVector,
    tau_hat: &JointVector,
    policy: SolvePolicy,
    method: Method,
) -> Result<WrenchEstimate> {
    if !j.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput(
            "Jacobian has non-finite entries".into(),
        ));
    }
    let residual = tau - tau_hat;
    let cond = condition_number(j);
    let singular = || Error::Singular { condition: cond };
    let (f, solve) = match policy {
        SolvePolicy::Exact { kappa_max } => {
            if !(cond <= kappa_max) {
                return Err(singular());
            }
            (
                solve_exact(j, &residual).ok_or_else(singular)?,
                SolveKind::Exact,
            )
        }
        SolvePolicy::Damped { lambda } => (
            solve_damped(j, &residual, lambda).ok_or_else(singular)?,
            SolveKind::Damped,
        ),
        SolvePolicy::ExactWithFallback {
            kappa_max,
            lambda_scale,
        } => match (cond <= kappa_max)
            .then(|| solve_exact(j, &residual))
            .flatten()
        {
            Some(f) => (f, SolveKind::Exact),
            None => {
                let lambda = lambda_scale * j.norm();
                (
                    solve_damped(j, &residual, lambda).ok_or_else(singular)?,
                    SolveKind::Damped,
                )
            }
        },
    };
    let wrench = Wrench::from_vector(&f);
    if !wrench.is_finite() {
        return Err(singular());
    }
    Ok(WrenchEstimate {
        wrench,
        residual_torque: residual,
        jacobian_condition: cond,
        method_tag: method,
        solve,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum EstimateStatus {
    Ok(WrenchEstimate),
    /// The predictor had no output for this timestep (recurrent warm-up).
    Unavailable,
    Failed {
        condition: f64,
        message: String,
    },
}

impl EstimateStatus {
    pub fn estimate(&self) -> Option<&WrenchEstimate> {
        match self {
            EstimateStatus::Ok(e) => Some(e),
            _ => None,
        }
    }
}

/// Per-timestep wrench estimates over `samples` using the predictor's
/// `tau_hat` and the logged Jacobians. Failures are recorded per timestep.
pub fn estimate_series(
    predictor: &dyn TorquePredictor,
    samples: &[Sample],
    policy: SolvePolicy,
) -> Vec<EstimateStatus> {
    let method = predictor.method();
    let predictions = predictor.predict_series(samples);
    samples
        .par_iter()
        .zip(predictions.par_iter())
        .map(|(s, pred)| match pred {
            None => EstimateStatus::Unavailable,
            Some(tau_hat) => {
                match estimate_wrench(&s.jacobian, &s.tau_measured, tau_hat, policy, method) {
                    Ok(e) => EstimateStatus::Ok(e),
                    Err(e) => EstimateStatus::Failed {
                        condition: match e {
                            Error::Singular { condition } => condition,
                            _ => f64::NAN,
                        },
                        message: e.to_string(),
                    },
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXACT: SolvePolicy = SolvePolicy::Exact { kappa_max: 1e8 };

    #[test]
    fn identity_jacobian() {
        let tau = JointVector::from([1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
        let e = estimate_wrench(
            &Matrix6::identity(),
            &tau,
            &JointVector::zeros(),
            EXACT,
            Method::Nn,
        )
        .unwrap();
        assert_eq!(e.wrench.to_vector(), tau);
        assert_eq!(e.jacobian_condition, 1.0);
        assert_eq!(e.solve, SolveKind::Exact);
    }

    #[test]
    fn perfect_prediction_gives_zero() {
        let j = Matrix6::from_fn(|r, c| if r == c { 2.0 } else { 0.1 * (r + c) as f64 });
        let tau = JointVector::from([0.3, -1.0, 2.0, 0.1, 0.0, 5.0]);
        let e = estimate_wrench(&j, &tau, &tau, EXACT, Method::Bias).unwrap();
        assert_eq!(e.wrench.to_vector(), JointVector::zeros());
    }

    #[test]
    fn singular_exact_fails_with_condition() {
        let mut j = Matrix6::identity();
        j[(5, 5)] = 0.0;
        let tau = JointVector::from([1.0; 6]);
        match estimate_wrench(&j, &tau, &JointVector::zeros(), EXACT, Method::Nn) {
            Err(Error::Singular { condition }) => assert!(condition > 1e8),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn fallback_damps_singular_pose() {
        let mut j = Matrix6::identity();
        j[(5, 5)] = 0.0;
        let tau = JointVector::from([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let e = estimate_wrench(
            &j,
            &tau,
            &JointVector::zeros(),
            SolvePolicy::default(),
            Method::Nn,
        )
        .unwrap();
        assert_eq!(e.solve, SolveKind::Damped);
        let f = e.wrench.to_vector();
        for i in 0..5 {
            assert!((f[i] - tau[i]).abs() < 1e-9);
        }
        assert_eq!(f[5], 0.0);
    }

    #[test]
    fn residual_is_bit_exact() {
        let tau = JointVector::from([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let hat = JointVector::from([0.7, 0.05, -0.3, 1e-17, 0.5, 3.0]);
        let e = estimate_wrench(&Matrix6::identity(), &tau, &hat, EXACT, Method::Nn).unwrap();
        for i in 0..6 {
            assert_eq!(e.residual_torque[i].to_bits(), (tau[i] - hat[i]).to_bits());
        }
    }

    #[test]
    fn non_finite_jacobian_rejected() {
        let mut j = Matrix6::identity();
        j[(0, 1)] = f64::NAN;
        assert!(estimate_wrench(
            &j,
            &JointVector::zeros(),
            &JointVector::zeros(),
            EXACT,
            Method::Nn
        )
        .is_err());
    }
}
