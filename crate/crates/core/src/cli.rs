//! Command-line front end. `forcesense <command> [--config PATH] [--out DIR]`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::baselines::{build_index, fit_bias, MeasurementOnly};
use crate::config::{EffectiveSeeds, RunConfig};
use crate::datagen::{load_csv, save_csv, Dataset, Profile};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate, export_trace, render_table, run_benchmark, AxisMetrics, BenchmarkReport,
};
use crate::manipulator::BiasKind;
use crate::method::{Method, TorquePredictor};
use crate::predictor::{self, load_model, save_model, JointModelSet};

#[derive(Debug, Parser)]
#[command(
    name = "forcesense",
    version,
    about = "Learned external force estimation benchmark"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate free-space and contact datasets.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Profile to generate; all configured profiles when omitted.
        #[arg(long)]
        profile: Option<Profile>,
    },
    /// Train the six per-joint networks on a free-space dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Score one method on a contact dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        method: Method,
        /// Contact dataset with ground-truth wrenches.
        #[arg(long)]
        data: PathBuf,
        /// Model file (nn only).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Free-space dataset the baseline is fitted on (bias, vector_search).
        #[arg(long)]
        train_data: Option<PathBuf>,
    },
    /// Full benchmark over the configured profiles and methods.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of methods to run.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
    },
    /// Print the effective configuration as JSON.
    PrintConfig {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
struct DatasetEntry {
    profile: Profile,
    bias_kind: BiasKind,
    seeds: EffectiveSeeds,
    freespace_file: String,
    freespace_rows: usize,
    freespace_duration_s: f64,
    partition: (usize, usize, usize),
    contact_file: String,
    contact_rows: usize,
    contact_duration_s: f64,
    rate_hz: f64,
}

#[derive(Debug, Serialize)]
struct Manifest {
    config_fingerprint: String,
    datasets: Vec<DatasetEntry>,
}

pub fn cmd_gen_data(common: &Common, profile: Option<Profile>) -> Result<()> {
    let (cfg, out) = load_config(common)?;
    prepare_out(&out)?;
    let profiles = match profile {
        Some(p) => vec![p],
        None => cfg.profiles.clone(),
    };
    let mut datasets = Vec::new();
    for p in profiles {
        let data = crate::evaluation::generate_profile_data(&cfg, p)
            .map_err(|e| e.in_stage("gen-data"))?;
        let fs_name = format!("freespace_{p}.csv");
        let c_name = format!("contact_{p}.csv");
        save_csv(&data.freespace, &out.join(&fs_name))?;
        save_csv(&data.contact, &out.join(&c_name))?;
        log::info!(
            "{p}: wrote {} free-space and {} contact rows",
            data.freespace.len(),
            data.contact.len()
        );
        datasets.push(DatasetEntry {
            profile: p,
            bias_kind: cfg.sensor(p).bias_kind,
            seeds: cfg.effective_seeds(p),
            freespace_file: fs_name,
            freespace_rows: data.freespace.len(),
            freespace_duration_s: data.freespace.meta.duration_s,
            partition: data.freespace.partition.sizes(),
            contact_file: c_name,
            contact_rows: data.contact.len(),
            contact_duration_s: data.contact.meta.duration_s,
            rate_hz: data.freespace.rate_hz,
        });
    }
    write_json(
        &Manifest {
            config_fingerprint: cfg.fingerprint(),
            datasets,
        },
        &out.join("manifest.json"),
    )
}

fn history_csv(set: &JointModelSet) -> String {
    let mut s = String::from("joint,epoch,train_loss,val_loss,best\n");
    for m in &set.models {
        for h in &m.history {
            writeln!(
                s,
                "{},{},{:?},{:?},{}",
                m.joint,
                h.epoch,
                h.train_loss,
                h.val_loss,
                u8::from(h.epoch == m.best_epoch)
            )
            .unwrap();
        }
    }
    s
}

pub fn cmd_train(common: &Common, data: &Path) -> Result<()> {
    let (cfg, out) = load_config(common)?;
    let dataset = load_csv(data)?;
    let pcfg = cfg.predictor_for(dataset.meta.profile);
    let set = predictor::train(&dataset, &pcfg).map_err(|e| e.in_stage("train"))?;
    prepare_out(&out)?;
    let fp = cfg.fingerprint();
    save_model(&set, &fp, &out.join("model.json"))?;
    let hist = out.join("history.csv");
    fs::write(
        &hist,
        format!("# config_fingerprint={fp}\n{}", history_csv(&set)),
    )
    .map_err(|e| Error::io(&hist, e))?;
    for m in &set.models {
        log::info!(
            "joint {}: {} epochs, best {} (val {:e})",
            m.joint,
            m.history.len(),
            m.best_epoch,
            m.history[m.best_epoch].val_loss
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    config_fingerprint: String,
    model_config_fingerprint: Option<String>,
    method: Method,
    profile: Profile,
    n_points: usize,
    n_excluded: usize,
    axes: Vec<AxisMetrics>,
    average_rmse: f64,
    average_range: f64,
    ratio: f64,
}

fn require_contact(d: &Dataset, path: &Path) -> Result<()> {
    if d.samples.iter().any(|s| s.contact_wrench_truth.is_none()) {
        return Err(Error::Data(format!(
            "{}: evaluation needs a contact dataset with ground-truth wrenches",
            path.display()
        )));
    }
    Ok(())
}

pub fn cmd_eval(
    common: &Common,
    method: Method,
    data: &Path,
    model: Option<&Path>,
    train_data: Option<&Path>,
) -> Result<()> {
    let (cfg, out) = load_config(common)?;
    let usage = |msg: &str| Err(Error::Config(format!("eval --method {method}: {msg}")));
    match (method, model, train_data) {
        (Method::Nn, None, _) => return usage("--model is required"),
        (Method::Nn, _, Some(_)) => {
            return usage("--train-data applies to bias and vector_search only")
        }
        (Method::Bias | Method::VectorSearch, _, None) => return usage("--train-data is required"),
        (Method::MeasureOnly | Method::Bias | Method::VectorSearch, Some(_), _) => {
            return usage("--model applies to nn only")
        }
        _ => {}
    }
    let contact = load_csv(data)?;
    require_contact(&contact, data)?;
    let mut model_fp = None;
    let predictor: Box<dyn TorquePredictor> = match method {
        Method::MeasureOnly => Box::new(MeasurementOnly),
        Method::Bias | Method::VectorSearch => {
            let path = train_data.expect("checked above");
            let train = load_csv(path)?;
            if method == Method::Bias {
                Box::new(fit_bias(train.train(), cfg.baselines.velocity_eps)?)
            } else {
                Box::new(build_index(train.train(), cfg.baselines.k)?)
            }
        }
        Method::Nn => {
            let (set, fp) = load_model(model.expect("checked above"))?;
            model_fp = Some(fp);
            Box::new(set)
        }
    };
    let eval = evaluate(&[predictor.as_ref()], &contact.samples, cfg.estimator)
        .map_err(|e| e.in_stage("evaluate"))?;
    let m = eval.methods.into_iter().next().expect("one method");
    prepare_out(&out)?;
    write_json(
        &EvalOutput {
            config_fingerprint: cfg.fingerprint(),
            model_config_fingerprint: model_fp,
            method,
            profile: contact.meta.profile,
            n_points: eval.n_points,
            n_excluded: eval.n_excluded,
            axes: m.axes,
            average_rmse: m.average_rmse,
            average_range: m.average_range,
            ratio: m.ratio,
        },
        &out.join("metrics.json"),
    )
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    config_fingerprint: String,
    reports: &'a [BenchmarkReport],
}

pub fn cmd_bench(common: &Common, methods: Option<Vec<Method>>) -> Result<()> {
    let (mut cfg, out) = load_config(common)?;
    if let Some(m) = methods {
        cfg.methods = m;
        cfg.validate()?;
    }
    prepare_out(&out)?;
    let fp = cfg.fingerprint();
    let mut reports = Vec::new();
    for &p in &cfg.profiles {
        log::info!("bench: profile {p}");
        let run = run_benchmark(&cfg, p)?;
        export_trace(&run.trace, p, &fp, &out.join(format!("trace_{p}.csv")))?;
        reports.push(run.report);
    }
    write_json(
        &ReportFile {
            config_fingerprint: fp,
            reports: &reports,
        },
        &out.join("report.json"),
    )?;
    let table = render_table(&reports);
    let path = out.join("report.txt");
    fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    print!("{table}");
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common, profile } => cmd_gen_data(&common, profile),
        Command::Train { common, data } => cmd_train(&common, &data),
        Command::Eval {
            common,
            method,
            data,
            model,
            train_data,
        } => cmd_eval(
            &common,
            method,
            &data,
            model.as_deref(),
            train_data.as_deref(),
        ),
        Command::Bench { common, methods } => cmd_bench(&common, methods),
        Command::PrintConfig { common } => {
            let (cfg, _) = load_config(&common)?;
            println!("{}", cfg.to_json_pretty());
            Ok(())
        }
    }
}
