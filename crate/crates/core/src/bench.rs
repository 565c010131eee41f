//! Timing and memory probes for the two scaling scenarios.
//!
//! The benchmarked circuit is two rectangular meshes in series followed by
//! photodetection, trained against a fixed weighted-intensity loss. One pass
//! is a forward and backward sweep over a batch.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{dense_backward, dense_forward, mesh_matrix, random_phases};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::memory::ThreadMeter;
use crate::numeric::{Batch, C64};
use crate::slicing::{backward_batch, backward_from_outputs, forward_batch, propagate_batch};
use crate::topology::{MeshKind, MeshTopology, PhaseStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Fixed mesh, varying batch size, equal number of samples per run.
    Batch,
    /// Fixed batch, varying mesh size.
    Mesh,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Batch => "batch",
            Scenario::Mesh => "mesh",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    /// Window slicing with a recorded tape.
    Sliced,
    /// Window slicing that recomputes window inputs instead of taping them.
    Reversible,
    /// Full transfer matrices and reverse mode through their products.
    Dense,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Sliced => "sliced",
            Engine::Reversible => "reversible",
            Engine::Dense => "dense",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sliced" => Ok(Engine::Sliced),
            "reversible" => Ok(Engine::Reversible),
            "dense" => Ok(Engine::Dense),
            _ => Err(Error::InvalidConfig(format!("unknown engine '{s}' (sliced, reversible, dense)"))),
        }
    }
}

pub const CSV_HEADER: &str = "scenario,engine,ni,nl,batch,secs,peak_bytes";

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub scenario: Scenario,
    pub engine: Engine,
    pub ni: usize,
    pub nl: usize,
    pub batch: usize,
    pub secs: f64,
    /// Peak heap bytes held by the engine during the run (0 without the
    /// counting allocator).
    pub peak_bytes: usize,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{}",
            self.scenario.name(),
            self.engine,
            self.ni,
            self.nl,
            self.batch,
            self.secs,
            self.peak_bytes
        )
    }
}

/// A benchmark circuit with fixed random phases, inputs and loss weights.
pub struct Workload {
    meshes: [(MeshTopology, PhaseStore); 2],
    weights: Vec<f64>,
    inputs: Vec<Batch<C64>>,
}

impl Workload {
    /// `samples` inputs split into batches of `batch` (last one partial).
    pub fn new(kind: MeshKind, ni: usize, nl: usize, batch: usize, samples: usize, seed: u64) -> Result<Self> {
        if batch == 0 || samples == 0 {
            return Err(Error::InvalidConfig("batch and samples must be positive".into()));
        }
        let topology = MeshTopology::rectangular(kind, ni, nl)?;
        let meshes = [0, 1].map(|m| (topology.clone(), random_phases(&topology, derive_seed(seed, m))));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
        let weights = (0..ni).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut inputs = Vec::new();
        let mut left = samples;
        while left > 0 {
            let n = left.min(batch);
            let data = (0..n * ni).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
            inputs.push(Batch::from_flat(ni, data)?);
            left -= n;
        }
        Ok(Self { meshes, weights, inputs })
    }

    /// Cotangent of `Σ w_k·|y_k|²` with respect to the mesh output `y`.
    fn cotangent(&self, y: &Batch<C64>) -> Batch<C64> {
        let mut d = y.clone();
        for row in d.rows_mut() {
            row.iter_mut().zip(&self.weights).for_each(|(z, w)| *z *= 2.0 * w);
        }
        d
    }

    /// One forward+backward sweep over every batch; returns a checksum of
    /// the gradients so the work cannot be optimised away.
    pub fn run_pass(&self, engine: Engine) -> Result<f64> {
        let mut checksum = 0.0;
        let [(t1, p1), (t2, p2)] = &self.meshes;
        for x in &self.inputs {
            let (g1, g2) = match engine {
                Engine::Sliced => {
                    let (h, tape1) = forward_batch(x, t1, p1)?;
                    let (y, tape2) = forward_batch(&h, t2, p2)?;
                    let (dh, g2) = backward_batch(&tape2, t2, p2, &self.cotangent(&y))?;
                    let (_, g1) = backward_batch(&tape1, t1, p1, &dh)?;
                    (g1.into_vec(), g2.into_vec())
                }
                Engine::Reversible => {
                    let h = propagate_batch(x, t1, p1)?;
                    let y = propagate_batch(&h, t2, p2)?;
                    let (dh, g2) = backward_from_outputs(&y, t2, p2, &self.cotangent(&y))?;
                    drop(y);
                    let (_, g1) = backward_from_outputs(&h, t1, p1, &dh)?;
                    (g1.into_vec(), g2.into_vec())
                }
                Engine::Dense => {
                    let (h, tape1) = dense_forward(t1, p1, x)?;
                    let (y, tape2) = dense_forward(t2, p2, &h)?;
                    let (dh, g2) = dense_backward(&tape2, t2, p2, &self.cotangent(&y))?;
                    let (_, g1) = dense_backward(&tape1, t1, p1, &dh)?;
                    (g1, g2)
                }
            };
            checksum += g1.iter().chain(&g2).sum::<f64>();
        }
        Ok(checksum)
    }
}

/// Best-of-`repeats` wall time and peak engine memory of one pass.
pub fn measure_pass(workload: &Workload, engine: Engine, repeats: usize) -> Result<(f64, usize)> {
    let mut best = f64::INFINITY;
    let mut peak = 0;
    for _ in 0..repeats.max(1) {
        let meter = ThreadMeter::start();
        let started = Instant::now();
        std::hint::black_box(workload.run_pass(engine)?);
        best = best.min(started.elapsed().as_secs_f64());
        peak = peak.max(meter.peak_bytes());
    }
    Ok((best, peak))
}

#[allow(clippy::too_many_arguments)]
pub fn bench_case(
    scenario: Scenario,
    engine: Engine,
    kind: MeshKind,
    ni: usize,
    nl: usize,
    batch: usize,
    samples: usize,
    repeats: usize,
) -> Result<BenchRecord> {
    let workload = Workload::new(kind, ni, nl, batch, samples, 0)?;
    let (secs, peak_bytes) = measure_pass(&workload, engine, repeats)?;
    Ok(BenchRecord { scenario, engine, ni, nl, batch, secs, peak_bytes })
}

/// Best-of-`repeats` time to assemble one dense mesh matrix.
pub fn time_dense_assembly(kind: MeshKind, ni: usize, nl: usize, repeats: usize) -> Result<f64> {
    let topology = MeshTopology::rectangular(kind, ni, nl)?;
    let phases = random_phases(&topology, 0);
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let started = Instant::now();
        std::hint::black_box(mesh_matrix(&topology, &phases)?);
        best = best.min(started.elapsed().as_secs_f64());
    }
    Ok(best)
}
