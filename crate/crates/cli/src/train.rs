use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use photomesh::data::{load_csv, split_default, Dataset, Schema, DATASET_SEED};
use photomesh::model::{build_benchmark_model, load_checkpoint, save_checkpoint, Encoding, Model};
use photomesh::trainer::{evaluate, train_with, EpochMetrics, TrainConfig};
use photomesh::{Batch, MeshKind};
use serde::Serialize;

use crate::{usage, Failure};

/// Environment variable naming the directory that holds `<dataset>.csv` files.
pub const DATA_DIR_ENV: &str = "PHOTOMESH_DATA_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EncodingArg {
    Raw,
    L2,
    Power,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// iris, digits, mnist or olivetti.
    #[arg(long)]
    dataset: String,
    /// Read this CSV instead of `<data dir>/<dataset>.csv`.
    #[arg(long)]
    data_file: Option<PathBuf>,
    #[arg(long, default_value = "clements")]
    mesh: MeshKind,
    /// Mesh ports; features are zero-padded up to this width [default: feature count].
    #[arg(long)]
    ni: Option<usize>,
    /// Mesh depth [default: ni].
    #[arg(long)]
    nl: Option<usize>,
    /// Epochs; 0 only evaluates (useful with --load) [default: dataset preset].
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs with seeds seed, seed+1, …
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// How real features become amplitudes: as given, unit norm, or norm √ni.
    #[arg(long, value_enum, default_value = "power")]
    encoding: EncodingArg,
    /// Write the trained model (a `.runN` suffix is added when --runs > 1).
    #[arg(long)]
    save: Option<PathBuf>,
    /// Start from a checkpoint instead of a fresh model.
    #[arg(long)]
    load: Option<PathBuf>,
    /// Per-epoch metrics as JSON lines.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Per-epoch mean/min/max over runs as JSON lines.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Serialize)]
struct Header<'a> {
    dataset: &'a str,
    dataset_seed: u64,
    samples: usize,
    mesh: &'a str,
    encoding: &'a str,
    ni: usize,
    nl: usize,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    seed: u64,
    runs: usize,
}

#[derive(Serialize)]
struct RunRow<'a> {
    run: usize,
    #[serde(flatten)]
    metrics: &'a EpochMetrics,
}

#[derive(Serialize, Debug, PartialEq)]
pub struct SummaryRow {
    pub epoch: usize,
    pub train_loss_mean: f64,
    pub train_loss_min: f64,
    pub train_loss_max: f64,
    pub val_acc_mean: f64,
    pub val_acc_min: f64,
    pub val_acc_max: f64,
}

fn stats(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}

pub fn summarize(runs: &[Vec<EpochMetrics>]) -> Vec<SummaryRow> {
    let epochs = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..epochs)
        .map(|e| {
            let (lm, lmin, lmax) = stats(runs.iter().map(|r| r[e].train_loss));
            let (am, amin, amax) = stats(runs.iter().map(|r| r[e].val_acc));
            SummaryRow {
                epoch: e,
                train_loss_mean: lm,
                train_loss_min: lmin,
                train_loss_max: lmax,
                val_acc_mean: am,
                val_acc_min: amin,
                val_acc_max: amax,
            }
        })
        .collect()
}

fn data_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(d) => PathBuf::from(d),
        None => {
            let local = PathBuf::from("data");
            if local.is_dir() {
                local
            } else {
                Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
            }
        }
    }
}

fn pad(data: Dataset, ni: usize) -> Result<Dataset, Failure> {
    let w = data.width();
    if ni == w {
        return Ok(data);
    }
    if ni < w {
        return Err(usage(format!("--ni {ni} is smaller than the {w} features of {}", data.name)));
    }
    let mut flat = Vec::with_capacity(data.len() * ni);
    for row in data.features.rows() {
        flat.extend_from_slice(row);
        flat.extend(std::iter::repeat_n(0.0, ni - w));
    }
    Ok(Dataset::new(data.name, Batch::from_flat(ni, flat)?, data.labels, data.num_classes)?)
}

fn with_suffix(path: &Path, run: usize, runs: usize) -> PathBuf {
    if runs == 1 {
        return path.to_path_buf();
    }
    let mut s = path.as_os_str().to_owned();
    s.push(format!(".run{run}"));
    PathBuf::from(s)
}

pub fn run(args: TrainArgs) -> Result<(), Failure> {
    let schema = Schema::by_name(&args.dataset)
        .ok_or_else(|| usage(format!("unknown dataset '{}' (iris, digits, mnist, olivetti)", args.dataset)))?;
    let path = args.data_file.clone().unwrap_or_else(|| data_dir().join(format!("{}.csv", schema.name)));
    if !path.is_file() {
        return Err(usage(format!("dataset file {} not found (set {DATA_DIR_ENV} or --data-file)", path.display())));
    }
    if args.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    if args.load.is_some() && args.runs > 1 {
        return Err(usage("--load continues a single model; drop --runs"));
    }
    let data = load_csv(&path, &schema).map_err(usage)?;
    let ni = args.ni.unwrap_or(data.width().max(data.num_classes));
    let nl = args.nl.unwrap_or(ni);
    let data = pad(data, ni)?;

    let preset = TrainConfig::preset(&schema.name).unwrap_or_default();
    let epochs = args.epochs.unwrap_or(preset.epochs);
    let base = TrainConfig {
        learning_rate: args.lr.unwrap_or(preset.learning_rate),
        batch_size: args.batch.unwrap_or(preset.batch_size),
        epochs: epochs.max(1),
        seed: args.seed,
        ..preset
    };
    base.validate().map_err(usage)?;
    let encoding = match args.encoding {
        EncodingArg::Raw => Encoding::Raw,
        EncodingArg::L2 => Encoding::L2Normalized,
        EncodingArg::Power => Encoding::PortPower,
    };

    let mut metrics_out = match &args.metrics {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    if let Some(out) = metrics_out.as_mut() {
        let header = Header {
            dataset: &schema.name,
            dataset_seed: DATASET_SEED,
            samples: data.len(),
            mesh: args.mesh.name(),
            encoding: match encoding {
                Encoding::Raw => "raw",
                Encoding::L2Normalized => "l2",
                Encoding::PortPower => "power",
            },
            ni,
            nl,
            epochs,
            learning_rate: base.learning_rate,
            batch_size: base.batch_size,
            seed: args.seed,
            runs: args.runs,
        };
        writeln!(out, "{}", serde_json::to_string(&header).map_err(anyhow::Error::from)?)?;
    }

    let mut all_metrics = Vec::with_capacity(args.runs);
    let (mut val_accs, mut test_accs) = (Vec::new(), Vec::new());
    for r in 0..args.runs {
        let seed = args.seed.wrapping_add(r as u64);
        let splits = split_default(data.len(), seed)?;
        let model: Model = match &args.load {
            Some(p) => load_checkpoint(p).map_err(usage)?,
            None => build_benchmark_model(args.mesh, ni, nl, data.num_classes, seed).map_err(usage)?.with_encoding(encoding),
        };
        if model.input_width() != ni || model.output_width() != data.num_classes {
            return Err(usage(format!(
                "model maps {} inputs to {} classes, data has {ni} features and {} classes",
                model.input_width(),
                model.output_width(),
                data.num_classes
            )));
        }
        let (model, metrics) = if epochs == 0 {
            (model, Vec::new())
        } else {
            let cfg = TrainConfig { seed, ..base.clone() };
            let outcome = train_with(model, &data, &splits, &cfg, |m| {
                if let Some(out) = metrics_out.as_mut() {
                    let row = RunRow { run: r, metrics: m };
                    if let Ok(line) = serde_json::to_string(&row) {
                        let _ = writeln!(out, "{line}");
                    }
                }
            })?;
            (outcome.model, outcome.metrics)
        };
        let val = evaluate(&model, &data, &splits.validation)?;
        let test = evaluate(&model, &data, &splits.test)?;
        println!("run {r} seed {seed}: val_acc {val:.4} test_acc {test:.4}");
        val_accs.push(val);
        test_accs.push(test);
        if let Some(p) = &args.save {
            save_checkpoint(&model, &with_suffix(p, r, args.runs))?;
        }
        all_metrics.push(metrics);
    }
    if let Some(mut out) = metrics_out {
        out.flush()?;
    }
    if let Some(p) = &args.summary {
        let mut out = BufWriter::new(File::create(p)?);
        for row in summarize(&all_metrics) {
            writeln!(out, "{}", serde_json::to_string(&row).map_err(anyhow::Error::from)?)?;
        }
        out.flush()?;
    }
    let (vm, vmin, vmax) = stats(val_accs.iter().copied());
    let (tm, tmin, tmax) = stats(test_accs.iter().copied());
    println!("val_acc mean {vm:.4} min {vmin:.4} max {vmax:.4}");
    println!("test_acc mean {tm:.4} min {tmin:.4} max {tmax:.4}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(epoch: usize, loss: f64, acc: f64) -> EpochMetrics {
        EpochMetrics { epoch, train_loss: loss, val_acc: acc, secs: 0.0, peak_mem_bytes: 0 }
    }

    #[test]
    fn summary_statistics() {
        let runs = vec![vec![m(0, 1.0, 0.5), m(1, 0.5, 0.7)], vec![m(0, 3.0, 0.7), m(1, 0.3, 0.9)]];
        let s = summarize(&runs);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].train_loss_mean, s[0].train_loss_min, s[0].train_loss_max), (2.0, 1.0, 3.0));
        assert!((s[1].val_acc_mean - 0.8).abs() < 1e-15);
    }

    #[test]
    fn run_suffix() {
        assert_eq!(with_suffix(Path::new("m.ckpt"), 0, 1), PathBuf::from("m.ckpt"));
        assert_eq!(with_suffix(Path::new("m.ckpt"), 2, 3), PathBuf::from("m.ckpt.run2"));
    }
}
