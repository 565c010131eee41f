//! Self-check suites: sliced vs dense propagation, unitarity, finite-difference
//! gradients of full models, the 4×4 Fldzhyan cell table and buffer scaling.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{dense_backward, dense_forward, mesh_matrix, random_phases};
use crate::derive_seed;
use crate::error::Result;
use crate::model::{build_benchmark_model, cross_entropy, Model};
use crate::numeric::{max_abs_diff, Batch, DenseMatrix, C64};
use crate::slicing::{backward_batch, forward_batch, process_mesh};
use crate::topology::{Cell, MeshKind, MeshTopology, PhaseStore};

pub const ORACLE_TOL: f64 = 1e-12;
pub const UNITARITY_TOL: f64 = 1e-10;
pub const ENGINE_GRAD_TOL: f64 = 1e-10;
pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-5;
pub const FD_ABS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub kinds: Vec<MeshKind>,
    /// `(ni, nl)` pairs for the propagation and unitarity suites.
    pub grid: Vec<(usize, usize)>,
    pub seeds: Vec<u64>,
    /// `(ni, nl)` pairs for full-model gradient checks.
    pub gradient_grid: Vec<(usize, usize)>,
    pub gradient_seeds: Vec<u64>,
    /// Test hook: the sliced engine sees a perturbed copy of the phases.
    pub corrupt_phases: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        let mut grid = Vec::new();
        for ni in [2, 3, 4, 8, 16, 32, 64] {
            for nl in [1, 2, ni] {
                if !grid.contains(&(ni, nl)) {
                    grid.push((ni, nl));
                }
            }
        }
        Self {
            kinds: vec![MeshKind::Fldzhyan, MeshKind::Clements],
            grid,
            seeds: (0..20).collect(),
            gradient_grid: vec![(4, 4), (8, 8), (16, 16)],
            gradient_seeds: (0..5).collect(),
            corrupt_phases: false,
        }
    }
}

impl VerifyOptions {
    /// Exactly one mesh configuration and seed, for both kinds.
    pub fn single(ni: usize, nl: usize, seed: u64) -> Self {
        Self {
            grid: vec![(ni, nl)],
            seeds: vec![seed],
            gradient_grid: vec![(ni, nl)],
            gradient_seeds: vec![seed],
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest error seen, in the suite's own measure.
    pub worst: f64,
    pub tolerance: f64,
    pub first_failure: Option<String>,
}

impl SuiteReport {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, cases: 0, failures: 0, worst: 0.0, tolerance, first_failure: None }
    }

    fn record(&mut self, case: impl FnOnce() -> String, error: f64, ok: bool) {
        self.cases += 1;
        if error > self.worst || error.is_nan() {
            self.worst = error;
        }
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(format!("{}: error {error:.3e}", case()));
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }

    pub fn first_failure(&self) -> Option<String> {
        self.suites
            .iter()
            .find_map(|s| s.first_failure.as_ref().map(|f| format!("{}: {f}", s.name)))
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<18} {:>6} {:>6} {:>11} {:>9}  result", "suite", "cases", "fails", "worst", "tol")?;
        for s in &self.suites {
            writeln!(
                f,
                "{:<18} {:>6} {:>6} {:>11.3e} {:>9.0e}  {}",
                s.name,
                s.cases,
                s.failures,
                s.worst,
                s.tolerance,
                if s.passed() { "PASS" } else { "FAIL" }
            )?;
        }
        if let Some(first) = self.first_failure() {
            writeln!(f, "first failure: {first}")?;
        }
        Ok(())
    }
}

pub fn run(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut oracle = SuiteReport::new("oracle", ORACLE_TOL);
    let mut unitarity = SuiteReport::new("unitarity", UNITARITY_TOL);
    let mut engines = SuiteReport::new("engine-gradients", ENGINE_GRAD_TOL);
    for &kind in &opts.kinds {
        for &(ni, nl) in &opts.grid {
            let topology = MeshTopology::rectangular(kind, ni, nl)?;
            for &seed in &opts.seeds {
                let case = || format!("{kind} ni={ni} nl={nl} seed={seed}");
                let phases = random_phases(&topology, seed);
                let sliced_phases = if opts.corrupt_phases { corrupt(&phases) } else { phases.clone() };
                let u = mesh_matrix(&topology, &phases)?;
                let err = oracle_error(&topology, &sliced_phases, &u, seed)?;
                oracle.record(case, err, err <= ORACLE_TOL);
                let dev = u.hermitian_deviation()?;
                unitarity.record(case, dev, dev <= UNITARITY_TOL);
                let err = engine_gradient_error(&topology, &sliced_phases, &phases, seed)?;
                engines.record(case, err, err <= ENGINE_GRAD_TOL);
            }
        }
    }

    let mut fd = SuiteReport::new("model-fd", FD_REL_TOL);
    for &kind in &opts.kinds {
        for &(ni, nl) in &opts.gradient_grid {
            for &seed in &opts.gradient_seeds {
                let model = randomized_model(kind, ni, nl, seed)?;
                let check = model_fd_check(&model, seed)?;
                fd.record(|| format!("{kind} ni={ni} nl={nl} seed={seed} param {}", check.worst_index), check.worst_rel, check.passed());
            }
        }
    }

    let mut table = SuiteReport::new("cell-table", 0.0);
    let mismatches = table_mismatches()?;
    table.record(|| "fldzhyan 4x4".into(), mismatches as f64, mismatches == 0);

    let mut scaling = SuiteReport::new("buffer-scaling", 2.5);
    for (prev, next) in [(32, 64), (64, 128), (128, 256)] {
        let (sliced, dense) = buffer_growth(prev, next)?;
        scaling.record(|| format!("ni {prev}->{next}: sliced x{sliced:.2}, dense x{dense:.2}"), sliced, sliced <= 2.5 && dense >= 3.5);
    }

    Ok(VerifyReport { suites: vec![oracle, unitarity, engines, fd, table, scaling] })
}

fn corrupt(phases: &PhaseStore) -> PhaseStore {
    let mut p = phases.clone();
    if let Some(v) = p.as_mut_slice().first_mut() {
        *v += 0.5;
    }
    p
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Largest deviation between sliced propagation and the dense matrix, over
/// every basis vector (the columns of `u`) and one random input.
fn oracle_error(topology: &MeshTopology, sliced_phases: &PhaseStore, u: &DenseMatrix, seed: u64) -> Result<f64> {
    let ni = topology.ni();
    let mut worst = 0.0f64;
    for k in 0..ni {
        let mut e = vec![C64::new(0.0, 0.0); ni];
        e[k] = C64::new(1.0, 0.0);
        let y = process_mesh(&e, topology, sliced_phases);
        for (r, yr) in y.iter().enumerate() {
            worst = worst.max((yr - u.get(r, k)).norm());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x0AC1E));
    let x = random_vector(&mut rng, ni);
    worst = worst.max(max_abs_diff(&process_mesh(&x, topology, sliced_phases), &u.apply(&x)?));
    Ok(worst)
}

/// Phase gradients and input cotangents from the sliced backward pass
/// against reverse-mode through the dense layer products.
fn engine_gradient_error(topology: &MeshTopology, sliced_phases: &PhaseStore, phases: &PhaseStore, seed: u64) -> Result<f64> {
    let ni = topology.ni();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6AD));
    let rows: Vec<Vec<C64>> = (0..3).map(|_| random_vector(&mut rng, ni)).collect();
    let x = Batch::from_rows(&rows)?;
    let d = Batch::from_rows(&(0..3).map(|_| random_vector(&mut rng, ni)).collect::<Vec<_>>())?;
    let (_, tape) = forward_batch(&x, topology, sliced_phases)?;
    let (dx_s, g_s) = backward_batch(&tape, topology, sliced_phases, &d)?;
    let (_, dtape) = dense_forward(topology, phases, &x)?;
    let (dx_d, g_d) = dense_backward(&dtape, topology, phases, &d)?;
    let mut worst = max_abs_diff(dx_s.as_slice(), dx_d.as_slice());
    for (a, b) in g_s.as_slice().iter().zip(&g_d) {
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

/// Benchmark model with random bias and gain so no gradient is trivially zero.
pub fn randomized_model(kind: MeshKind, ni: usize, nl: usize, seed: u64) -> Result<Model> {
    let mut model = build_benchmark_model(kind, ni, nl, ni.min(3), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xB1A5));
    let mut p = model.params();
    let n = p.len();
    for v in &mut p[n - 2 * ni..n - ni] {
        *v = rng.gen_range(-0.5..0.5);
    }
    for v in &mut p[n - ni..] {
        *v = rng.gen_range(0.5..2.0);
    }
    model.set_params(&p)?;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub failures: usize,
    /// Largest relative error among components above the absolute floor.
    pub worst_rel: f64,
    pub worst_index: usize,
}

impl FdCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// A component passes when it agrees within `FD_REL_TOL` relative error or
/// within `FD_ABS_TOL` absolute error.
pub fn compare_gradients(analytic: &[f64], numeric: &[f64]) -> FdCheck {
    let mut failures = 0;
    let mut worst_rel = 0.0f64;
    let mut worst_index = 0;
    for (i, (&a, &f)) in analytic.iter().zip(numeric).enumerate() {
        let abs = (a - f).abs();
        let scale = a.abs().max(f.abs());
        let rel = if scale > 0.0 { abs / scale } else { 0.0 };
        let ok = abs <= FD_ABS_TOL || rel <= FD_REL_TOL;
        if !ok {
            failures += 1;
        }
        if abs > FD_ABS_TOL && rel > worst_rel {
            worst_rel = rel;
            worst_index = i;
        }
    }
    FdCheck { analytic: analytic.to_vec(), numeric: numeric.to_vec(), failures, worst_rel, worst_index }
}

/// Central differences of the mean cross-entropy on a small seeded batch.
pub fn model_fd_check(model: &Model, seed: u64) -> Result<FdCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xFD));
    let w = model.input_width();
    let batch = 4;
    let x = Batch::from_flat(w, (0..batch * w).map(|_| rng.gen_range(0.0..1.0)).collect())?;
    let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..model.output_width())).collect();
    let (_, analytic) = model.loss_and_gradient(&x, &labels)?;

    let base = model.params();
    let mut probe = model.clone();
    let mut loss_at = |p: &[f64]| -> Result<f64> {
        probe.set_params(p)?;
        Ok(cross_entropy(&probe.logits(&x)?, &labels)?.loss)
    };
    let mut numeric = Vec::with_capacity(base.len());
    let mut p = base.clone();
    for i in 0..base.len() {
        p[i] = base[i] + FD_STEP;
        let up = loss_at(&p)?;
        p[i] = base[i] - FD_STEP;
        let down = loss_at(&p)?;
        p[i] = base[i];
        numeric.push((up - down) / (2.0 * FD_STEP));
    }
    Ok(compare_gradients(&analytic, &numeric))
}

/// Reference cell table for the 4×4 Fldzhyan mesh: per window, each cell is
/// either a bypass or block `(layer, index)`.
pub const FLDZHYAN_4X4_TABLE: [&[Option<(usize, usize)>]; 4] = [
    &[Some((0, 0)), Some((0, 1))],
    &[None, Some((1, 0)), None],
    &[Some((2, 0)), Some((2, 1))],
    &[None, Some((3, 0)), None],
];

/// Number of windows whose cells differ from [`FLDZHYAN_4X4_TABLE`].
pub fn table_mismatches() -> Result<usize> {
    let t = MeshTopology::fldzhyan(4, 4)?;
    let mut bad = FLDZHYAN_4X4_TABLE.len().abs_diff(t.nl());
    for (window, want) in t.windows().iter().zip(FLDZHYAN_4X4_TABLE) {
        let got: Vec<Option<(usize, usize)>> = window
            .cells()
            .iter()
            .map(|c| match c {
                Cell::Bypass => None,
                Cell::Active { layer, index, .. } => Some((*layer, *index)),
            })
            .collect();
        if got != want {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Size of the sliced engine's tape and of a dense mesh matrix.
pub fn buffer_bytes(kind: MeshKind, ni: usize, nl: usize, batch: usize) -> Result<(usize, usize)> {
    let topology = MeshTopology::rectangular(kind, ni, nl)?;
    let phases = PhaseStore::zeros(topology.num_params());
    let (_, tape) = forward_batch(&Batch::filled(batch, ni, C64::new(1.0, 0.0)), &topology, &phases)?;
    Ok((tape.byte_len(), DenseMatrix::zeros(ni, ni).byte_len()))
}

/// Growth factors of sliced and dense storage when ni goes from `a` to `b`
/// at a fixed depth.
fn buffer_growth(a: usize, b: usize) -> Result<(f64, f64)> {
    const DEPTH: usize = 16;
    let (sa, da) = buffer_bytes(MeshKind::Clements, a, DEPTH, 8)?;
    let (sb, db) = buffer_bytes(MeshKind::Clements, b, DEPTH, 8)?;
    Ok((sb as f64 / sa as f64, db as f64 / da as f64))
}
