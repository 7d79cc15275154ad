//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! every value reads back bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::PhasePoint;
use crate::integrate::{Sample, TrajectoryDataset};
use crate::train::EpochLoss;

use super::{DriftPoint, MetricReport, SectionPoint};

pub const ICS_FILE: &str = "ics.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const DATASET_META_FILE: &str = "dataset.json";

/// Scalar fields of a dataset that the CSV files do not carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub d: usize,
    pub dt: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub trajectories: usize,
    pub samples: usize,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(prefix: &[&str], name: &str, n: usize) -> String {
    let mut cols: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    cols.extend((1..=n).map(|i| format!("{name}_{i}")));
    cols.join(",")
}

fn push_row(out: &mut String, lead: &[String], values: &[f64]) {
    let mut first = true;
    for s in lead {
        if !first {
            out.push(',');
        }
        out.push_str(s);
        first = false;
    }
    for v in values {
        if !first {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
        first = false;
    }
    out.push('\n');
}

pub fn ics_csv(data: &TrajectoryDataset) -> String {
    let n = 2 * data.half_dim();
    let mut out = header(&["traj_id"], "x", n) + "\n";
    for (id, x) in &data.initial_conditions {
        push_row(&mut out, &[id.to_string()], x.as_slice());
    }
    out
}

pub fn samples_csv(data: &TrajectoryDataset) -> String {
    let n = 2 * data.half_dim();
    let mut out = header(&["traj_id", "t"], "y", n) + "\n";
    for s in &data.samples {
        push_row(&mut out, &[s.traj_id.to_string(), fmt_f64(s.t)], s.y.as_slice());
    }
    out
}

pub fn write_dataset(data: &TrajectoryDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(ICS_FILE), ics_csv(data))?;
    std::fs::write(dir.join(SAMPLES_FILE), samples_csv(data))?;
    let meta = DatasetMeta {
        d: data.half_dim(),
        dt: data.dt,
        noise_std: data.noise_std,
        seed: data.seed,
        trajectories: data.initial_conditions.len(),
        samples: data.samples.len(),
    };
    std::fs::write(dir.join(DATASET_META_FILE), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Parse a CSV with a header line into rows of cells. Blank lines are skipped.
fn parse_csv<'a>(text: &'a str, file: &str, expect_header: &str) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{file}: empty file")))?;
    if head.trim() != expect_header {
        return Err(Error::Format(format!(
            "{file}: header `{}` does not match `{expect_header}`",
            head.trim()
        )));
    }
    let width = expect_header.split(',').count();
    lines
        .enumerate()
        .map(|(i, l)| {
            let cells: Vec<&str> = l.split(',').map(str::trim).collect();
            if cells.len() != width {
                return Err(Error::Format(format!(
                    "{file}: line {} has {} fields, expected {width}",
                    i + 2,
                    cells.len()
                )));
            }
            Ok(cells)
        })
        .collect()
}

fn num(file: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Format(format!("{file}: `{s}` is not a number")))
}

fn id(file: &str, s: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| Error::Format(format!("{file}: `{s}` is not a trajectory id")))
}

pub fn read_dataset(dir: &Path) -> Result<TrajectoryDataset> {
    let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(dir.join(DATASET_META_FILE))?)?;
    let n = 2 * meta.d;
    let ics_text = std::fs::read_to_string(dir.join(ICS_FILE))?;
    let initial_conditions = parse_csv(&ics_text, ICS_FILE, &header(&["traj_id"], "x", n))?
        .into_iter()
        .map(|row| {
            let x = row[1..].iter().map(|s| num(ICS_FILE, s)).collect::<Result<Vec<_>>>()?;
            Ok((id(ICS_FILE, row[0])?, PhasePoint::from_vec(x)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let samples_text = std::fs::read_to_string(dir.join(SAMPLES_FILE))?;
    let samples = parse_csv(&samples_text, SAMPLES_FILE, &header(&["traj_id", "t"], "y", n))?
        .into_iter()
        .map(|row| {
            let y = row[2..].iter().map(|s| num(SAMPLES_FILE, s)).collect::<Result<Vec<_>>>()?;
            Ok(Sample {
                traj_id: id(SAMPLES_FILE, row[0])?,
                t: num(SAMPLES_FILE, row[1])?,
                y: PhasePoint::from_vec(y)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let data = TrajectoryDataset {
        initial_conditions,
        samples,
        dt: meta.dt,
        noise_std: meta.noise_std,
        seed: meta.seed,
    };
    data.validate()?;
    Ok(data)
}

/// `t,x_1..x_{2d}`.
pub fn path_csv(path: &[(f64, PhasePoint)]) -> String {
    let n = path.first().map_or(0, |(_, x)| x.as_slice().len());
    let mut out = header(&["t"], "x", n) + "\n";
    for (t, x) in path {
        push_row(&mut out, &[fmt_f64(*t)], x.as_slice());
    }
    out
}

/// Inverse of [`path_csv`].
pub fn read_path_csv(text: &str) -> Result<Vec<(f64, PhasePoint)>> {
    let head = text.lines().next().unwrap_or_default();
    let n = head.split(',').count().saturating_sub(1);
    parse_csv(text, "path", &header(&["t"], "x", n))?
        .into_iter()
        .map(|row| {
            let x = row[1..].iter().map(|s| num("path", s)).collect::<Result<Vec<_>>>()?;
            Ok((num("path", row[0])?, PhasePoint::from_vec(x)?))
        })
        .collect()
}

pub fn drift_csv(series: &[DriftPoint]) -> String {
    let mut out = String::from("t,energy,drift,relative,per_time\n");
    for p in series {
        push_row(&mut out, &[], &[p.t, p.energy, p.drift, p.relative, p.per_time]);
    }
    out
}

pub fn loss_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,total,residual,energy,supervised\n");
    for e in history {
        push_row(&mut out, &[e.epoch.to_string()], &[e.total, e.residual, e.energy, e.supervised]);
    }
    out
}

pub fn metrics_csv(report: &MetricReport) -> String {
    let mut out = String::from("k,relative_error,relative_error_used,relative_error_skipped,energy_variation,energy_variation_used,energy_variation_skipped\n");
    for h in &report.horizons {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            h.k,
            fmt_f64(h.relative_error.mean),
            h.relative_error.used,
            h.relative_error.skipped,
            fmt_f64(h.energy_variation.mean),
            h.energy_variation.used,
            h.energy_variation.skipped
        );
    }
    out
}

pub fn section_csv(points: &[SectionPoint]) -> String {
    let mut out = String::from("t,q_y,p_y\n");
    for s in points {
        push_row(&mut out, &[], &[s.t, s.q_y, s.p_y]);
    }
    out
}
