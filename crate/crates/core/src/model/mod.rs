//! Trainable photonic models: meshes, photodetection and electronic
//! post-processing chained into one differentiable pipeline.

mod checkpoint;
pub mod loss;

pub use checkpoint::{load_checkpoint, parse_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use loss::{cross_entropy, softmax, LossValue};

use crate::dense::random_phases;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::numeric::{Batch, C64, ZERO};
use crate::slicing::{self, Tape};
use crate::topology::{MeshKind, MeshTopology, PhaseStore};

/// One step of the pipeline.
#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    /// Programmable unitary mesh acting on complex amplitudes.
    Mesh { topology: MeshTopology, phases: PhaseStore },
    /// Intensity detection `|x|²`; converts the signal to real values.
    Photodetector,
    /// Trainable additive offset.
    Bias(Vec<f64>),
    /// Trainable elementwise gain.
    DiagonalGain(Vec<f64>),
    /// Keeps the first `classes` entries as logits.
    Readout { classes: usize },
}

impl Stage {
    fn name(&self) -> &'static str {
        match self {
            Stage::Mesh { .. } => "mesh",
            Stage::Photodetector => "photodetector",
            Stage::Bias(_) => "bias",
            Stage::DiagonalGain(_) => "gain",
            Stage::Readout { .. } => "readout",
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Stage::Mesh { phases, .. } => phases.len(),
            Stage::Bias(v) | Stage::DiagonalGain(v) => v.len(),
            Stage::Photodetector | Stage::Readout { .. } => 0,
        }
    }

    fn params(&self) -> &[f64] {
        match self {
            Stage::Mesh { phases, .. } => phases.as_slice(),
            Stage::Bias(v) | Stage::DiagonalGain(v) => v,
            Stage::Photodetector | Stage::Readout { .. } => &[],
        }
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Stage::Mesh { phases, .. } => phases.as_mut_slice(),
            Stage::Bias(v) | Stage::DiagonalGain(v) => v,
            Stage::Photodetector | Stage::Readout { .. } => &mut [],
        }
    }
}

/// How real feature vectors become optical amplitudes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    /// Features are used as given.
    Raw,
    /// Each sample is scaled to unit L2 norm (all-zero samples are left as is).
    L2Normalized,
    /// Each sample is scaled to L2 norm `√width`, one unit of optical power
    /// per port on average.
    PortPower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Domain {
    Complex,
    Real,
}

#[derive(Clone, Debug)]
enum Signal {
    Complex(Batch<C64>),
    Real(Batch<f64>),
}

#[derive(Debug)]
enum StageCache {
    Mesh(Tape),
    Photodetector(Batch<C64>),
    Bias,
    Gain(Batch<f64>),
    Readout { width: usize },
}

/// Everything [`Model::backward`] needs from the matching forward pass.
#[derive(Debug)]
pub struct ForwardCache {
    stages: Vec<StageCache>,
    batch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    stages: Vec<Stage>,
    input_width: usize,
    output_width: usize,
    encoding: Encoding,
    seed: Option<u64>,
}

impl Model {
    /// Checks that stage widths and signal domains chain: meshes see complex
    /// signals of their port count, a photodetector converts to real, and
    /// bias, gain and readout act on real vectors. The output must be real.
    pub fn new(input_width: usize, stages: Vec<Stage>, encoding: Encoding) -> Result<Self> {
        if input_width == 0 {
            return Err(Error::InvalidModel("input width must be positive".into()));
        }
        let mut domain = match stages.first() {
            Some(Stage::Mesh { .. } | Stage::Photodetector) => Domain::Complex,
            _ => Domain::Real,
        };
        let mut width = input_width;
        for (i, stage) in stages.iter().enumerate() {
            let fail = |msg: String| Err(Error::InvalidModel(format!("stage {i} ({}): {msg}", stage.name())));
            match stage {
                Stage::Mesh { topology, phases } => {
                    if domain != Domain::Complex {
                        return fail("mesh after photodetection".into());
                    }
                    if topology.ni() != width {
                        return fail(format!("mesh has {} ports, incoming width is {width}", topology.ni()));
                    }
                    if phases.len() != topology.num_params() {
                        return fail(format!("{} phases for {} parameters", phases.len(), topology.num_params()));
                    }
                    let violations = topology.validate();
                    if !violations.is_empty() {
                        return fail(violations.join("; "));
                    }
                }
                Stage::Photodetector => {
                    if domain != Domain::Complex {
                        return fail("signal is already real".into());
                    }
                    domain = Domain::Real;
                }
                Stage::Bias(v) | Stage::DiagonalGain(v) => {
                    if domain != Domain::Real {
                        return fail("needs a real signal; add a photodetector first".into());
                    }
                    if v.len() != width {
                        return fail(format!("{} entries, incoming width is {width}", v.len()));
                    }
                }
                Stage::Readout { classes } => {
                    if domain != Domain::Real {
                        return fail("needs a real signal".into());
                    }
                    if *classes == 0 || *classes > width {
                        return fail(format!("{classes} classes from width {width}"));
                    }
                    width = *classes;
                }
            }
        }
        if domain != Domain::Real {
            return Err(Error::InvalidModel("model output is complex; end with a photodetector".into()));
        }
        Ok(Self { stages, input_width, output_width: width, encoding, seed: None })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_encoding(mut self, encoding: Encoding) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.output_width
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn input_domain(&self) -> Domain {
        match self.stages.first() {
            Some(Stage::Mesh { .. } | Stage::Photodetector) => Domain::Complex,
            _ => Domain::Real,
        }
    }

    /// Total number of trainable parameters.
    pub fn num_params(&self) -> usize {
        self.stages.iter().map(Stage::num_params).sum()
    }

    /// All trainable parameters, stage by stage in declaration order.
    pub fn params(&self) -> Vec<f64> {
        self.stages.iter().flat_map(|s| s.params().iter().copied()).collect()
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_params()
            )));
        }
        let mut rest = values;
        for stage in &mut self.stages {
            let dst = stage.params_mut();
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn encode(&self, features: &Batch<f64>) -> Result<Signal> {
        if features.width() != self.input_width {
            return Err(Error::DimensionMismatch(format!(
                "features of width {} for a model expecting {}",
                features.width(),
                self.input_width
            )));
        }
        if features.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut real = features.clone();
        let target = match self.encoding {
            Encoding::Raw => None,
            Encoding::L2Normalized => Some(1.0),
            Encoding::PortPower => Some((self.input_width as f64).sqrt()),
        };
        if let Some(target) = target {
            for row in real.rows_mut() {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|v| *v *= target / norm);
                }
            }
        }
        Ok(match self.input_domain() {
            Domain::Complex => Signal::Complex(real.map(|&v| C64::new(v, 0.0))),
            Domain::Real => Signal::Real(real),
        })
    }

    /// Encodes real features and runs every stage, returning logits.
    pub fn forward(&self, features: &Batch<f64>) -> Result<(Batch<f64>, ForwardCache)> {
        let signal = self.encode(features)?;
        self.run(signal, true).map(|(l, c)| (l, c.expect("cache requested")))
    }

    /// Runs the stages on complex amplitudes directly, bypassing the encoding.
    pub fn forward_amplitudes(&self, inputs: &Batch<C64>) -> Result<(Batch<f64>, ForwardCache)> {
        if self.input_domain() != Domain::Complex {
            return Err(Error::InvalidModel("model input is real".into()));
        }
        if inputs.width() != self.input_width {
            return Err(Error::DimensionMismatch(format!("width {} for input width {}", inputs.width(), self.input_width)));
        }
        if inputs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        self.run(Signal::Complex(inputs.clone()), true).map(|(l, c)| (l, c.expect("cache requested")))
    }

    /// Forward pass without caches, for evaluation.
    pub fn logits(&self, features: &Batch<f64>) -> Result<Batch<f64>> {
        let signal = self.encode(features)?;
        self.run(signal, false).map(|(l, _)| l)
    }

    fn run(&self, mut signal: Signal, keep: bool) -> Result<(Batch<f64>, Option<ForwardCache>)> {
        let batch = match &signal {
            Signal::Complex(b) => b.len(),
            Signal::Real(b) => b.len(),
        };
        let mut caches = Vec::with_capacity(if keep { self.stages.len() } else { 0 });
        for stage in &self.stages {
            signal = match (stage, signal) {
                (Stage::Mesh { topology, phases }, Signal::Complex(x)) => {
                    if keep {
                        let (y, tape) = slicing::forward_batch(&x, topology, phases)?;
                        caches.push(StageCache::Mesh(tape));
                        Signal::Complex(y)
                    } else {
                        Signal::Complex(slicing::propagate_batch(&x, topology, phases)?)
                    }
                }
                (Stage::Photodetector, Signal::Complex(x)) => {
                    let y = x.map(|z| z.norm_sqr());
                    if keep {
                        caches.push(StageCache::Photodetector(x));
                    }
                    Signal::Real(y)
                }
                (Stage::Bias(b), Signal::Real(mut x)) => {
                    for row in x.rows_mut() {
                        row.iter_mut().zip(b).for_each(|(v, bi)| *v += bi);
                    }
                    if keep {
                        caches.push(StageCache::Bias);
                    }
                    Signal::Real(x)
                }
                (Stage::DiagonalGain(g), Signal::Real(x)) => {
                    let mut y = x.clone();
                    for row in y.rows_mut() {
                        row.iter_mut().zip(g).for_each(|(v, gi)| *v *= gi);
                    }
                    if keep {
                        caches.push(StageCache::Gain(x));
                    }
                    Signal::Real(y)
                }
                (Stage::Readout { classes }, Signal::Real(x)) => {
                    if keep {
                        caches.push(StageCache::Readout { width: x.width() });
                    }
                    Signal::Real(x.truncate_columns(*classes))
                }
                _ => unreachable!("domains are checked in Model::new"),
            };
        }
        match signal {
            Signal::Real(logits) => Ok((logits, keep.then_some(ForwardCache { stages: caches, batch }))),
            Signal::Complex(_) => unreachable!("output domain is checked in Model::new"),
        }
    }

    /// Backpropagates logit cotangents and returns the gradient for every
    /// trainable parameter in [`Model::params`] order. Per-sample
    /// contributions are summed, so a cotangent of a mean loss yields the
    /// gradient of that mean.
    pub fn backward(&self, cache: &ForwardCache, logit_cotangent: &Batch<f64>) -> Result<Vec<f64>> {
        if cache.stages.len() != self.stages.len() {
            return Err(Error::CacheMismatch(format!(
                "{} cached stages for a {}-stage model",
                cache.stages.len(),
                self.stages.len()
            )));
        }
        if logit_cotangent.len() != cache.batch || logit_cotangent.width() != self.output_width {
            return Err(Error::CacheMismatch(format!(
                "cotangent {}x{} for batch {} and {} outputs",
                logit_cotangent.len(),
                logit_cotangent.width(),
                cache.batch,
                self.output_width
            )));
        }
        let mut grads: Vec<Vec<f64>> = vec![Vec::new(); self.stages.len()];
        let mut delta = Signal::Real(logit_cotangent.clone());
        for (i, (stage, sc)) in self.stages.iter().zip(&cache.stages).enumerate().rev() {
            delta = match (stage, sc, delta) {
                (Stage::Readout { .. }, StageCache::Readout { width }, Signal::Real(d)) => {
                    let mut padded = Batch::filled(d.len(), *width, 0.0);
                    for (dst, src) in padded.rows_mut().zip(d.rows()) {
                        dst[..src.len()].copy_from_slice(src);
                    }
                    Signal::Real(padded)
                }
                (Stage::DiagonalGain(g), StageCache::Gain(x), Signal::Real(mut d)) => {
                    let mut gg = vec![0.0; g.len()];
                    for (drow, xrow) in d.rows_mut().zip(x.rows()) {
                        for ((acc, dv), (xv, gv)) in gg.iter_mut().zip(drow.iter_mut()).zip(xrow.iter().zip(g)) {
                            *acc += *dv * xv;
                            *dv *= gv;
                        }
                    }
                    grads[i] = gg;
                    Signal::Real(d)
                }
                (Stage::Bias(b), StageCache::Bias, Signal::Real(d)) => {
                    let mut gb = vec![0.0; b.len()];
                    for row in d.rows() {
                        gb.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                    }
                    grads[i] = gb;
                    Signal::Real(d)
                }
                (Stage::Photodetector, StageCache::Photodetector(x), Signal::Real(d)) => {
                    let mut dx = Batch::filled(d.len(), d.width(), ZERO);
                    for ((out, drow), xrow) in dx.rows_mut().zip(d.rows()).zip(x.rows()) {
                        for ((o, dv), xv) in out.iter_mut().zip(drow).zip(xrow) {
                            *o = xv * (2.0 * dv);
                        }
                    }
                    Signal::Complex(dx)
                }
                (Stage::Mesh { topology, phases }, StageCache::Mesh(tape), Signal::Complex(d)) => {
                    let (dx, g) = slicing::backward_batch(tape, topology, phases, &d)?;
                    grads[i] = g.into_vec();
                    Signal::Complex(dx)
                }
                _ => {
                    return Err(Error::CacheMismatch(format!("cache entry {i} does not match stage {}", stage.name())));
                }
            };
        }
        Ok(grads.concat())
    }

    /// Mean cross-entropy on a labelled batch and its parameter gradient.
    pub fn loss_and_gradient(&self, features: &Batch<f64>, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
        let (logits, cache) = self.forward(features)?;
        let loss = cross_entropy(&logits, labels)?;
        let grads = self.backward(&cache, &loss.logit_cotangent(labels))?;
        Ok((loss.loss, grads))
    }

    /// Index of the largest logit for every sample (first one on ties).
    pub fn predict(&self, features: &Batch<f64>) -> Result<Vec<usize>> {
        Ok(self.logits(features)?.rows().map(argmax).collect())
    }
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Two meshes in series, photodetectors, bias, diagonal gain and a readout
/// of the first `classes` detector channels. Bias starts at 0, gains at 1 and
/// phases uniform in `[0, 2π)` from `seed`. Inputs use [`Encoding::PortPower`].
pub fn build_benchmark_model(kind: MeshKind, ni: usize, nl: usize, classes: usize, seed: u64) -> Result<Model> {
    build_model(kind, ni, nl, classes, seed, true)
}

/// Same as [`build_benchmark_model`] without the bias and gain stages: two
/// meshes followed by photodetectors.
pub fn build_detector_model(kind: MeshKind, ni: usize, nl: usize, classes: usize, seed: u64) -> Result<Model> {
    build_model(kind, ni, nl, classes, seed, false)
}

fn build_model(kind: MeshKind, ni: usize, nl: usize, classes: usize, seed: u64, electronics: bool) -> Result<Model> {
    if ni < classes {
        return Err(Error::InvalidModel(format!("{classes} classes need at least {classes} ports, got {ni}")));
    }
    let mut stages = Vec::with_capacity(6);
    for mesh in 0..2 {
        let topology = MeshTopology::rectangular(kind, ni, nl)?;
        let phases = random_phases(&topology, derive_seed(seed, mesh));
        stages.push(Stage::Mesh { topology, phases });
    }
    stages.push(Stage::Photodetector);
    if electronics {
        stages.push(Stage::Bias(vec![0.0; ni]));
        stages.push(Stage::DiagonalGain(vec![1.0; ni]));
    }
    stages.push(Stage::Readout { classes });
    Ok(Model::new(ni, stages, Encoding::PortPower)?.with_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ONE;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn photodetector_outputs() {
        let m = Model::new(1, vec![Stage::Photodetector], Encoding::Raw).unwrap();
        let (y, _) = m.forward_amplitudes(&Batch::from_rows(&[vec![ONE]]).unwrap()).unwrap();
        assert_eq!(y.row(0), &[1.0]);
        let z = C64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        let (y, _) = m.forward_amplitudes(&Batch::from_rows(&[vec![z]]).unwrap()).unwrap();
        assert!((y.row(0)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_mesh_readout() {
        let stages = vec![
            Stage::Mesh { topology: MeshTopology::empty(MeshKind::Fldzhyan, 4), phases: PhaseStore::zeros(0) },
            Stage::Photodetector,
            Stage::Readout { classes: 2 },
        ];
        let m = Model::new(4, stages, Encoding::L2Normalized).unwrap();
        let y = m.logits(&Batch::from_rows(&[vec![0.6, 0.8, 0.0, 0.0]]).unwrap()).unwrap();
        assert!((y.row(0)[0] - 0.36).abs() < 1e-15);
        assert!((y.row(0)[1] - 0.64).abs() < 1e-15);
    }

    #[test]
    fn width_and_domain_checks() {
        assert!(Model::new(4, vec![Stage::Photodetector, Stage::Bias(vec![0.0; 3])], Encoding::Raw).is_err());
        assert!(Model::new(4, vec![Stage::Bias(vec![0.0; 4]), Stage::Photodetector], Encoding::Raw).is_err());
        let mesh = Stage::Mesh { topology: MeshTopology::fldzhyan(4, 2).unwrap(), phases: PhaseStore::zeros(3) };
        assert!(Model::new(4, vec![mesh.clone()], Encoding::Raw).is_err(), "complex output");
        assert!(Model::new(5, vec![mesh.clone(), Stage::Photodetector], Encoding::Raw).is_err());
        assert!(Model::new(4, vec![mesh, Stage::Photodetector, Stage::Readout { classes: 5 }], Encoding::Raw).is_err());

        let m = build_benchmark_model(MeshKind::Fldzhyan, 4, 4, 3, 0).unwrap();
        assert!(m.logits(&Batch::filled(2, 5, 0.1)).is_err());
    }

    #[test]
    fn benchmark_model_census() {
        let m = build_benchmark_model(MeshKind::Fldzhyan, 4, 4, 3, 1).unwrap();
        assert_eq!(m.num_params(), 20);
        let m = build_benchmark_model(MeshKind::Clements, 4, 4, 3, 1).unwrap();
        assert_eq!(m.num_params(), 32);
        let m = build_benchmark_model(MeshKind::Fldzhyan, 64, 64, 10, 1).unwrap();
        let y = m.logits(&Batch::filled(3, 64, 0.25)).unwrap();
        assert_eq!((y.len(), y.width()), (3, 10));
        assert!(build_benchmark_model(MeshKind::Fldzhyan, 4, 4, 5, 1).is_err());
        assert_eq!(build_detector_model(MeshKind::Clements, 4, 4, 3, 1).unwrap().num_params(), 24);
    }

    #[test]
    fn meshes_get_distinct_phases() {
        let m = build_benchmark_model(MeshKind::Fldzhyan, 4, 4, 3, 1).unwrap();
        let p = m.params();
        assert_ne!(p[..6], p[6..12]);
        assert_eq!(p[12..16], [0.0; 4]);
        assert_eq!(p[16..20], [1.0; 4]);
    }

    #[test]
    fn params_round_trip() {
        let mut m = build_benchmark_model(MeshKind::Clements, 5, 3, 2, 4).unwrap();
        let mut p = m.params();
        p.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.1);
        m.set_params(&p).unwrap();
        assert_eq!(m.params(), p);
        assert!(m.set_params(&p[1..]).is_err());
    }

    #[test]
    fn bias_only_gradient_is_softmax_residual() {
        let m = Model::new(3, vec![Stage::Bias(vec![0.1, -0.2, 0.3])], Encoding::Raw).unwrap();
        let xs = Batch::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.5, 0.5, -1.0]]).unwrap();
        let labels = [0, 2];
        let (_, g) = m.loss_and_gradient(&xs, &labels).unwrap();
        let mut want = [0.0; 3];
        for (row, &label) in xs.rows().zip(&labels) {
            let logits: Vec<f64> = row.iter().zip([0.1, -0.2, 0.3]).map(|(x, b)| x + b).collect();
            let p = softmax(&logits);
            for c in 0..3 {
                want[c] += (p[c] - if c == label { 1.0 } else { 0.0 }) / 2.0;
            }
        }
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_fixed_point_has_zero_gradient() {
        // huge logit gap: softmax is numerically one-hot
        let m = Model::new(2, vec![Stage::Bias(vec![0.0, 0.0]), Stage::DiagonalGain(vec![1.0, 1.0])], Encoding::Raw).unwrap();
        let xs = Batch::from_rows(&[vec![800.0, 0.0], vec![0.0, 800.0]]).unwrap();
        let (loss, g) = m.loss_and_gradient(&xs, &[0, 1]).unwrap();
        assert!(loss < 1e-12);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-9);
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let a = build_benchmark_model(MeshKind::Fldzhyan, 4, 4, 3, 1).unwrap();
        let b = build_detector_model(MeshKind::Fldzhyan, 4, 4, 3, 1).unwrap();
        let xs = Batch::filled(2, 4, 0.5);
        let (_, cache) = b.forward(&xs).unwrap();
        assert!(matches!(a.backward(&cache, &Batch::filled(2, 3, 0.0)), Err(Error::CacheMismatch(_))));
        let (_, cache) = a.forward(&xs).unwrap();
        assert!(a.backward(&cache, &Batch::filled(3, 3, 0.0)).is_err());
    }

    #[test]
    fn global_phase_does_not_change_detection() {
        let m = build_detector_model(MeshKind::Clements, 6, 6, 6, 2).unwrap();
        let x: Vec<C64> = (0..6).map(|i| C64::new(0.1 * i as f64, 0.05)).collect();
        let (base, _) = m.forward_amplitudes(&Batch::from_rows(std::slice::from_ref(&x)).unwrap()).unwrap();
        for alpha in [std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
            let rot = C64::from_polar(1.0, alpha);
            let xr: Vec<C64> = x.iter().map(|z| z * rot).collect();
            let (y, _) = m.forward_amplitudes(&Batch::from_rows(&[xr]).unwrap()).unwrap();
            for (a, b) in y.as_slice().iter().zip(base.as_slice()) {
                assert!(*a >= 0.0);
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let mut m = build_benchmark_model(MeshKind::Fldzhyan, 8, 8, 3, 0).unwrap();
        let zeros_then_defaults: Vec<f64> = {
            let mut p = vec![0.0; m.num_params()];
            let n = p.len();
            p[n - 8..].iter_mut().for_each(|v| *v = 1.0);
            p
        };
        m.set_params(&zeros_then_defaults).unwrap();
        let xs = Batch::from_flat(8, (0..24).map(|i| (i % 5) as f64 / 4.0).collect()).unwrap();
        let a = m.logits(&xs).unwrap();
        let b = m.logits(&xs).unwrap();
        assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
