//! CSV datasets and seeded train/validation/test splits.
//!
//! Files have a header row `label,f0,f1,…` followed by one sample per line.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::Batch;

/// How raw feature values are mapped into `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scaling {
    /// Divide every value by a fixed maximum (e.g. 16 for 4-bit pixels).
    FixedMax(f64),
    /// Divide each column by its largest value in the file.
    PerColumnMax,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub name: String,
    pub num_classes: usize,
    /// Expected feature count; `None` takes it from the header.
    pub width: Option<usize>,
    pub scaling: Scaling,
}

impl Schema {
    pub fn iris() -> Self {
        Self { name: "iris".into(), num_classes: 3, width: Some(4), scaling: Scaling::PerColumnMax }
    }

    pub fn digits() -> Self {
        Self { name: "digits".into(), num_classes: 10, width: Some(64), scaling: Scaling::FixedMax(16.0) }
    }

    pub fn mnist() -> Self {
        Self { name: "mnist".into(), num_classes: 10, width: Some(784), scaling: Scaling::FixedMax(255.0) }
    }

    pub fn olivetti() -> Self {
        Self { name: "olivetti".into(), num_classes: 40, width: Some(1024), scaling: Scaling::FixedMax(1.0) }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "iris" => Some(Self::iris()),
            "digits" => Some(Self::digits()),
            "mnist" => Some(Self::mnist()),
            "olivetti" => Some(Self::olivetti()),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Batch<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Batch<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Dataset(format!("{} feature rows for {} labels", features.len(), labels.len())));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label: l, classes: num_classes });
        }
        Ok(Self { name: name.into(), features, labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.width()
    }

    /// Features and labels of the given samples, in the given order.
    pub fn gather(&self, indices: &[usize]) -> (Batch<f64>, Vec<usize>) {
        let w = self.width();
        let mut data = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
        }
        let features = Batch::from_flat(w, data).expect("rows share the dataset width");
        (features, indices.iter().map(|&i| self.labels[i]).collect())
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, schema).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::Parse { path: path.to_path_buf(), line, msg },
        other => other,
    })
}

pub fn parse_csv(text: &str, schema: &Schema) -> Result<Dataset> {
    let err = |line: usize, msg: String| Error::Parse { path: schema.name.clone().into(), line, msg };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.first() != Some(&"label") {
        return Err(err(1, format!("header must start with 'label', got '{header}'")));
    }
    let width = columns.len() - 1;
    if let Some(expected) = schema.width {
        if width != expected {
            return Err(err(1, format!("header lists {width} features, {} expects {expected}", schema.name)));
        }
    }
    if width == 0 {
        return Err(err(1, "no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != width + 1 {
            return Err(err(lineno, format!("expected {width} features, found {}", cells.len().saturating_sub(1))));
        }
        let label: usize = cells[0].parse().map_err(|_| err(lineno, format!("label '{}' is not a class index", cells[0])))?;
        if label >= schema.num_classes {
            return Err(err(lineno, format!("unknown label {label} ({} classes)", schema.num_classes)));
        }
        for (c, cell) in cells[1..].iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(lineno, format!("column f{c}: '{cell}' is not a number")))?;
            features.push(v);
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Dataset(format!("{}: no samples", schema.name)));
    }

    match schema.scaling {
        Scaling::FixedMax(max) => features.iter_mut().for_each(|v| *v /= max),
        Scaling::PerColumnMax => {
            let mut maxes = vec![0.0f64; width];
            for row in features.chunks_exact(width) {
                maxes.iter_mut().zip(row).for_each(|(m, v)| *m = m.max(v.abs()));
            }
            for row in features.chunks_exact_mut(width) {
                for (v, m) in row.iter_mut().zip(&maxes) {
                    if *m > 0.0 {
                        *v /= m;
                    }
                }
            }
        }
        Scaling::None => {}
    }
    Dataset::new(schema.name.clone(), Batch::from_flat(width, features)?, labels, schema.num_classes)
}

/// Seed that fixes the test partition for every run.
pub const DATASET_SEED: u64 = 0x5EED_7E57;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions `0..n` into train/validation/test of sizes `floor(n·f_train)`,
/// `floor(n·f_val)` and the remainder. The test indices depend only on
/// `dataset_seed`; `run_seed` shuffles the rest between train and validation.
pub fn split(n: usize, dataset_seed: u64, run_seed: u64, fractions: (f64, f64, f64)) -> Result<Splits> {
    if n == 0 {
        return Err(Error::Dataset("cannot split an empty dataset".into()));
    }
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("split fractions {fractions:?} must be in [0,1] and sum to 1")));
    }
    // the epsilon keeps 150·0.7 = 104.999… at 105
    let floor = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
    let n_train = floor(ft);
    let n_val = floor(fv);
    let n_test = n - n_train - n_val;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(dataset_seed));
    let mut test = order.split_off(n - n_test);
    test.sort_unstable();
    order.sort_unstable();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(run_seed));
    let validation = order.split_off(n_train);
    Ok(Splits { train: order, validation, test })
}

pub fn split_default(n: usize, run_seed: u64) -> Result<Splits> {
    split(n, DATASET_SEED, run_seed, (0.7, 0.1, 0.2))
}
