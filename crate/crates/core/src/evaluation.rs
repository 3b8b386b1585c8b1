//! Per-axis force RMSE, force ranges, the benchmark report with its text
//! table, and force-trace export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{build_index, fit_bias, MeasurementOnly};
use crate::config::{EffectiveSeeds, RunConfig};
use crate::datagen::{
    build_dataset, generate_contact_trajectory, generate_freespace_trajectory, Dataset,
    DatasetMeta, Partition, Profile, Sample,
};
use crate::error::{Error, Result};
use crate::estimator::{estimate_series, EstimateStatus, SolvePolicy};
use crate::manipulator::Wrench;
use crate::method::{Method, TorquePredictor};
use crate::predictor::{self, JointModelSet};
use crate::rng::mix_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Fx,
    Fy,
    Fz,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Fx, Axis::Fy, Axis::Fz];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Fx => "Fx",
            Axis::Fy => "Fy",
            Axis::Fz => "Fz",
        }
    }
}

/// Root mean square difference of two equally long series.
pub fn rmse(est: &[f64], truth: &[f64]) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::Metric(format!(
            "rmse over series of different lengths ({} vs {})",
            est.len(),
            truth.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::Metric("rmse over an empty series".into()));
    }
    let sum: f64 = est.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum();
    Ok((sum / est.len() as f64).sqrt())
}

/// `max - min` of the series; 0 for an empty one.
pub fn force_range(truth: &[f64]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

fn mean3(x: [f64; 3]) -> f64 {
    (x[0] + x[1] + x[2]) / 3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisMetrics {
    pub axis: Axis,
    pub rmse: f64,
    pub range: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: Method,
    pub axes: Vec<AxisMetrics>,
    pub average_rmse: f64,
    pub average_range: f64,
    /// `average_rmse / average_range`.
    pub ratio: f64,
}

impl MethodMetrics {
    fn from_axes(method: Method, axes: Vec<AxisMetrics>) -> Self {
        let average_rmse = mean3([axes[0].rmse, axes[1].rmse, axes[2].rmse]);
        let average_range = mean3([axes[0].range, axes[1].range, axes[2].range]);
        MethodMetrics {
            method,
            axes,
            average_rmse,
            average_range,
            ratio: average_rmse / average_range,
        }
    }
}

/// Force trace of one scored session: ground truth and every method's
/// estimate. `None` marks timesteps without an estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub t: Vec<f64>,
    pub truth: Vec<Wrench>,
    pub estimates: Vec<(Method, Vec<Option<Wrench>>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub methods: Vec<MethodMetrics>,
    pub ranges: [f64; 3],
    pub n_points: usize,
    pub n_excluded: usize,
    pub trace: Trace,
}

/// Scores each predictor's wrench estimates on `samples` against the
/// ground-truth contact wrench. Only timesteps where every method produced
/// an estimate are scored.
pub fn evaluate(
    predictors: &[&dyn TorquePredictor],
    samples: &[Sample],
    policy: SolvePolicy,
) -> Result<Evaluation> {
    if predictors.is_empty() {
        return Err(Error::InvalidInput("no methods to evaluate".into()));
    }
    let truth: Vec<Wrench> = samples
        .iter()
        .enumerate()
        .map(|(k, s)| {
            s.contact_wrench_truth.ok_or_else(|| {
                Error::Data(format!("sample {k} has no ground-truth contact wrench"))
            })
        })
        .collect::<Result<_>>()?;
    let series: Vec<(Method, Vec<EstimateStatus>)> = predictors
        .iter()
        .map(|p| (p.method(), estimate_series(*p, samples, policy)))
        .collect();
    for (m, s) in &series {
        let failed = s
            .iter()
            .filter(|e| matches!(e, EstimateStatus::Failed { .. }))
            .count();
        if failed > 0 {
            log::warn!("{m}: wrench solve failed at {failed} timesteps");
        }
    }
    let mask: Vec<bool> = (0..samples.len())
        .map(|k| series.iter().all(|(_, s)| s[k].estimate().is_some()))
        .collect();
    let n_points = mask.iter().filter(|&&m| m).count();
    if n_points == 0 {
        return Err(Error::Metric(
            "no timestep has an estimate from every method".into(),
        ));
    }

    let axis_truth: Vec<Vec<f64>> = Axis::ALL
        .iter()
        .map(|a| {
            truth
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(w, _)| w.force[a.index()])
                .collect()
        })
        .collect();
    let ranges = [
        force_range(&axis_truth[0]),
        force_range(&axis_truth[1]),
        force_range(&axis_truth[2]),
    ];

    let mut methods = Vec::with_capacity(series.len());
    for (method, s) in &series {
        let mut axes = Vec::with_capacity(3);
        for a in Axis::ALL {
            let est: Vec<f64> = s
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(e, _)| e.estimate().expect("masked").wrench.force[a.index()])
                .collect();
            axes.push(AxisMetrics {
                axis: a,
                rmse: rmse(&est, &axis_truth[a.index()])?,
                range: ranges[a.index()],
                n_points,
            });
        }
        methods.push(MethodMetrics::from_axes(*method, axes));
    }

    let trace = Trace {
        t: samples.iter().map(|s| s.state.t).collect(),
        truth,
        estimates: series
            .into_iter()
            .map(|(m, s)| {
                (
                    m,
                    s.iter().map(|e| e.estimate().map(|e| e.wrench)).collect(),
                )
            })
            .collect(),
    };
    Ok(Evaluation {
        methods,
        ranges,
        n_points,
        n_excluded: samples.len() - n_points,
        trace,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub profile: Profile,
    pub config_fingerprint: String,
    pub seeds: EffectiveSeeds,
    pub n_points: usize,
    pub n_excluded: usize,
    pub range: [f64; 3],
    pub average_range: f64,
    pub methods: Vec<MethodMetrics>,
}

impl BenchmarkReport {
    pub fn method(&self, m: Method) -> Option<&MethodMetrics> {
        self.methods.iter().find(|x| x.method == m)
    }
}

/// Free-space and contact datasets of one profile.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileData {
    pub freespace: Dataset,
    /// Scored as a whole: its partition marks every sample as test.
    pub contact: Dataset,
}

pub fn generate_profile_data(cfg: &RunConfig, profile: Profile) -> Result<ProfileData> {
    let fingerprint = Some(cfg.fingerprint());
    let sensor = cfg.sensor(profile);
    let fs_cfg = cfg.freespace_trajectory();
    let states = generate_freespace_trajectory(&cfg.chain, &fs_cfg)?;
    let freespace = build_dataset(
        &cfg.chain,
        &sensor,
        &states,
        None,
        fs_cfg.rate_hz,
        DatasetMeta {
            config_fingerprint: fingerprint.clone(),
            profile,
            seed: sensor.seed,
            duration_s: fs_cfg.duration_s,
        },
    )?;

    let c_cfg = cfg.contact_trajectory()?;
    let (states, wrenches): (Vec<_>, Vec<_>) = generate_contact_trajectory(&cfg.chain, &c_cfg)?
        .into_iter()
        .unzip();
    // a separate session: fresh noise stream and bias state
    let contact_sensor = crate::manipulator::SensorModel {
        seed: mix_seed(sensor.seed, c_cfg.seed),
        ..sensor
    };
    let mut contact = build_dataset(
        &cfg.chain,
        &contact_sensor,
        &states,
        Some(&wrenches),
        c_cfg.rate_hz,
        DatasetMeta {
            config_fingerprint: fingerprint,
            profile,
            seed: contact_sensor.seed,
            duration_s: c_cfg.duration_s,
        },
    )?;
    contact.partition = Partition::from_sizes(0, 0, contact.len());
    Ok(ProfileData { freespace, contact })
}

/// Fitted estimators of one profile, in the requested method order.
pub struct FittedMethods {
    pub predictors: Vec<Box<dyn TorquePredictor>>,
    pub nn: Option<JointModelSet>,
}

pub fn fit_methods(
    cfg: &RunConfig,
    profile: Profile,
    freespace: &Dataset,
) -> Result<FittedMethods> {
    let mut nn = None;
    if cfg.methods.contains(&Method::Nn) {
        nn = Some(
            predictor::train(freespace, &cfg.predictor_for(profile))
                .map_err(|e| e.in_stage("train"))?,
        );
    }
    let mut predictors: Vec<Box<dyn TorquePredictor>> = Vec::new();
    for m in &cfg.methods {
        let p: Box<dyn TorquePredictor> = match m {
            Method::MeasureOnly => Box::new(MeasurementOnly),
            Method::Bias => Box::new(
                fit_bias(freespace.train(), cfg.baselines.velocity_eps)
                    .map_err(|e| e.in_stage("fit-baselines"))?,
            ),
            Method::VectorSearch => Box::new(
                build_index(freespace.train(), cfg.baselines.k)
                    .map_err(|e| e.in_stage("fit-baselines"))?,
            ),
            Method::Nn => Box::new(nn.clone().expect("trained above")),
        };
        predictors.push(p);
    }
    Ok(FittedMethods { predictors, nn })
}

pub struct ProfileRun {
    pub report: BenchmarkReport,
    pub trace: Trace,
    pub data: ProfileData,
    pub nn: Option<JointModelSet>,
}

/// Generate data, fit every configured method on the free-space train split,
/// and score the wrench estimates on the contact session.
pub fn run_benchmark(cfg: &RunConfig, profile: Profile) -> Result<ProfileRun> {
    cfg.validate()?;
    let data = generate_profile_data(cfg, profile).map_err(|e| e.in_stage("gen-data"))?;
    let fitted = fit_methods(cfg, profile, &data.freespace)?;
    let refs: Vec<&dyn TorquePredictor> = fitted.predictors.iter().map(|p| p.as_ref()).collect();
    let eval = evaluate(&refs, &data.contact.samples, cfg.estimator)
        .map_err(|e| e.in_stage("evaluate"))?;
    let report = BenchmarkReport {
        profile,
        config_fingerprint: cfg.fingerprint(),
        seeds: cfg.effective_seeds(profile),
        n_points: eval.n_points,
        n_excluded: eval.n_excluded,
        range: eval.ranges,
        average_range: mean3(eval.ranges),
        methods: eval.methods,
    };
    Ok(ProfileRun {
        report,
        trace: eval.trace,
        data,
        nn: fitted.nn,
    })
}

fn aligned(rows: &[Vec<String>]) -> String {
    let n_cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..n_cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(String::len)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c < 2 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Plain-text table: rows Fx/Fy/Fz/Ave. per profile, one column per method
/// plus the ground-truth range, followed by the RMSE-to-range ratios. Values
/// are printed in shortest round-trip form so the averages and ratios can be
/// recomputed exactly from the printed axis entries.
pub fn render_table(reports: &[BenchmarkReport]) -> String {
    let methods: Vec<Method> = reports
        .first()
        .map(|r| r.methods.iter().map(|m| m.method).collect())
        .unwrap_or_default();
    let mut header = vec!["profile".to_string(), "axis".to_string()];
    header.extend(methods.iter().map(|m| m.to_string()));
    header.push("range".into());

    let mut rows = vec![header.clone()];
    for r in reports {
        for a in Axis::ALL {
            let mut row = vec![r.profile.to_string(), a.as_str().to_string()];
            row.extend(
                r.methods
                    .iter()
                    .map(|m| format!("{:?}", m.axes[a.index()].rmse)),
            );
            row.push(format!("{:?}", r.range[a.index()]));
            rows.push(row);
        }
        let mut row = vec![r.profile.to_string(), "Ave.".to_string()];
        row.extend(r.methods.iter().map(|m| format!("{:?}", m.average_rmse)));
        row.push(format!("{:?}", r.average_range));
        rows.push(row);
    }

    let mut ratio_rows = vec![header[..header.len() - 1].to_vec()];
    ratio_rows[0][1] = String::new();
    for r in reports {
        let mut row = vec![r.profile.to_string(), "ratio".to_string()];
        row.extend(r.methods.iter().map(|m| format!("{:?}", m.ratio)));
        ratio_rows.push(row);
    }

    let mut out = String::new();
    out.push_str("Estimation RMSE (N) and range of contact force (N)\n\n");
    out.push_str(&aligned(&rows));
    out.push_str("\nAverage RMSE over average range\n\n");
    out.push_str(&aligned(&ratio_rows));
    if let Some(r) = reports.first() {
        writeln!(out, "\nconfig {}", r.config_fingerprint).unwrap();
    }
    out
}

/// Writes the trace as CSV: `#` provenance lines, a header, then one row per
/// timestep with the truth wrench and each method's estimate (empty cells
/// where a method has no estimate).
pub fn export_trace(
    trace: &Trace,
    profile: Profile,
    config_fingerprint: &str,
    path: &Path,
) -> Result<()> {
    const COMPONENTS: [&str; 6] = ["fx", "fy", "fz", "tx", "ty", "tz"];
    let mut out = String::new();
    writeln!(out, "# forcesense-trace v1").unwrap();
    writeln!(out, "# profile={profile}").unwrap();
    writeln!(out, "# config_fingerprint={config_fingerprint}").unwrap();
    let mut header = vec!["t".to_string()];
    header.extend(COMPONENTS.iter().map(|c| format!("truth_{c}")));
    for (m, _) in &trace.estimates {
        header.extend(COMPONENTS.iter().map(|c| format!("{m}_{c}")));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..trace.t.len() {
        write!(out, "{:?}", trace.t[k]).unwrap();
        for v in trace.truth[k].to_vector().iter() {
            write!(out, ",{v:?}").unwrap();
        }
        for (_, est) in &trace.estimates {
            match est[k] {
                Some(w) => {
                    for v in w.to_vector().iter() {
                        write!(out, ",{v:?}").unwrap();
                    }
                }
                None => out.push_str(",,,,,,"),
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[3.0, 4.0, 5.0], &[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(rmse(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 2.5f64.sqrt());
        assert!(matches!(rmse(&[], &[]), Err(Error::Metric(_))));
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn range_examples() {
        assert_eq!(force_range(&[3.0; 5]), 0.0);
        let ramp: Vec<f64> = (0..=10).map(f64::from).collect();
        assert_eq!(force_range(&ramp), 10.0);
    }

    #[test]
    fn averages_and_ratio() {
        let axes: Vec<AxisMetrics> = [3.11, 3.93, 1.25]
            .iter()
            .zip([20.0, 30.0, 40.0])
            .zip(Axis::ALL)
            .map(|((&rmse, range), axis)| AxisMetrics {
                axis,
                rmse,
                range,
                n_points: 1,
            })
            .collect();
        let m = MethodMetrics::from_axes(Method::Nn, axes);
        assert!((m.average_rmse - 2.763333333333333).abs() < 1e-12);
        assert_eq!(m.average_range, 30.0);
        assert_eq!(m.ratio, m.average_rmse / 30.0);
    }
}
