//! Dataset CSV format.
//!
//! Lines starting with `#` carry dataset metadata as `key=value` pairs. The
//! single header row names the columns; each following row is one sample.
//! Numbers are written in Rust's shortest round-trip form, so a save/load
//! cycle reproduces every `f64` bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use nalgebra::Matrix6;

use super::{Dataset, DatasetMeta, Partition, Profile, Sample};
use crate::error::{Error, Result};
use crate::manipulator::{JointState, JointVector, Wrench, N_JOINTS};

const FORMAT_TAG: &str = "forcesense-dataset v1";

pub static CSV_COLUMNS: LazyLock<Vec<String>> = LazyLock::new(|| {
    let mut cols = vec!["t".to_string()];
    for prefix in ["q", "qd", "tau_meas", "tau_free"] {
        cols.extend((1..=N_JOINTS).map(|i| format!("{prefix}{i}")));
    }
    cols.extend(["fx", "fy", "fz", "tx", "ty", "tz"].map(String::from));
    for r in 1..=6 {
        cols.extend((1..=6).map(|c| format!("J{r}{c}")));
    }
    cols.push("has_contact".into());
    cols
});

fn push_vec(line: &mut String, v: &JointVector) {
    for x in v.iter() {
        write!(line, ",{x:?}").unwrap();
    }
}

pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(dataset.len() * 1400);
    let (tr, va, te) = dataset.partition.sizes();
    writeln!(out, "# {FORMAT_TAG}").unwrap();
    writeln!(out, "# rate_hz={:?}", dataset.rate_hz).unwrap();
    writeln!(out, "# profile={}", dataset.meta.profile).unwrap();
    writeln!(out, "# seed={}", dataset.meta.seed).unwrap();
    writeln!(out, "# duration_s={:?}", dataset.meta.duration_s).unwrap();
    writeln!(out, "# partition={tr},{va},{te}").unwrap();
    if let Some(fp) = &dataset.meta.config_fingerprint {
        writeln!(out, "# config_fingerprint={fp}").unwrap();
    }
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for s in &dataset.samples {
        write!(out, "{:?}", s.state.t).unwrap();
        push_vec(&mut out, &s.state.q);
        push_vec(&mut out, &s.state.qd);
        push_vec(&mut out, &s.tau_measured);
        push_vec(&mut out, &s.tau_free_truth);
        let w = s.contact_wrench_truth.unwrap_or_default().to_vector();
        push_vec(&mut out, &w);
        for r in 0..6 {
            for c in 0..6 {
                write!(out, ",{:?}", s.jacobian[(r, c)]).unwrap();
            }
        }
        writeln!(out, ",{}", u8::from(s.contact_wrench_truth.is_some())).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Meta {
    rate_hz: Option<f64>,
    profile: Option<Profile>,
    seed: Option<u64>,
    duration_s: Option<f64>,
    partition: Option<(usize, usize, usize)>,
    config_fingerprint: Option<String>,
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };

    let mut meta = Meta {
        rate_hz: None,
        profile: None,
        seed: None,
        duration_s: None,
        partition: None,
        config_fingerprint: None,
    };
    let mut header_seen = false;
    let mut samples = Vec::new();
    let n_cols = CSV_COLUMNS.len();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if comment == FORMAT_TAG {
                continue;
            }
            let Some((key, value)) = comment.split_once('=') else {
                continue;
            };
            let bad = |what: &str| err(lineno, 1, format!("bad {what} value {value:?}"));
            match key {
                "rate_hz" => meta.rate_hz = Some(value.parse().map_err(|_| bad("rate_hz"))?),
                "profile" => meta.profile = Some(value.parse().map_err(|_| bad("profile"))?),
                "seed" => meta.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "duration_s" => {
                    meta.duration_s = Some(value.parse().map_err(|_| bad("duration_s"))?)
                }
                "config_fingerprint" => meta.config_fingerprint = Some(value.trim().to_string()),
                "partition" => {
                    let parts: Vec<usize> = value
                        .split(',')
                        .map(|p| p.trim().parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("partition"))?;
                    if parts.len() != 3 {
                        return Err(bad("partition"));
                    }
                    meta.partition = Some((parts[0], parts[1], parts[2]));
                }
                _ => {}
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != n_cols {
                return Err(err(
                    lineno,
                    cols.len().min(n_cols) + 1,
                    format!("header has {} columns, expected {n_cols}", cols.len()),
                ));
            }
            for (i, (got, want)) in cols.iter().zip(CSV_COLUMNS.iter()).enumerate() {
                if got != want {
                    return Err(err(
                        lineno,
                        i + 1,
                        format!("expected column {want:?}, found {got:?}"),
                    ));
                }
            }
            header_seen = true;
            continue;
        }

        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(err(
                lineno,
                fields.len().min(n_cols) + 1,
                format!("row has {} fields, expected {n_cols}", fields.len()),
            ));
        }
        let mut values = [0.0f64; 68];
        for (i, f) in fields.iter().enumerate() {
            values[i] = f
                .trim()
                .parse()
                .map_err(|_| err(lineno, i + 1, format!("cannot parse {f:?} as a number")))?;
        }
        let vec_at =
            |start: usize| JointVector::from_column_slice(&values[start..start + N_JOINTS]);
        let flag = values[n_cols - 1];
        let has_contact = match () {
            _ if flag == 0.0 => false,
            _ if flag == 1.0 => true,
            _ => return Err(err(lineno, n_cols, "has_contact must be 0 or 1".into())),
        };
        let wrench = Wrench::from_vector(&vec_at(25));
        samples.push(Sample {
            state: JointState::new(values[0], vec_at(1), vec_at(7)),
            tau_measured: vec_at(13),
            tau_free_truth: vec_at(19),
            contact_wrench_truth: has_contact.then_some(wrench),
            jacobian: Matrix6::from_row_slice(&values[31..67]),
        });
    }

    let missing = |key: &str| err(1, 1, format!("missing metadata line '# {key}=...'"));
    let rate_hz = meta.rate_hz.ok_or_else(|| missing("rate_hz"))?;
    if !header_seen {
        return Err(err(
            text.lines().count().max(1),
            1,
            "missing header row".into(),
        ));
    }
    let partition = match meta.partition {
        Some((tr, va, te)) => {
            if tr + va + te != samples.len() {
                return Err(err(
                    1,
                    1,
                    format!(
                        "partition {tr},{va},{te} does not cover {} rows",
                        samples.len()
                    ),
                ));
            }
            Partition::from_sizes(tr, va, te)
        }
        None => Partition::chronological(samples.len()),
    };
    Ok(Dataset {
        samples,
        rate_hz,
        partition,
        meta: DatasetMeta {
            profile: meta.profile.ok_or_else(|| missing("profile"))?,
            seed: meta.seed.ok_or_else(|| missing("seed"))?,
            duration_s: meta.duration_s.ok_or_else(|| missing("duration_s"))?,
            config_fingerprint: meta.config_fingerprint,
        },
    })
}
