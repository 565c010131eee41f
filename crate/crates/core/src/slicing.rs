//! Window-by-window propagation and the local-gradient backward pass.
//!
//! Signals move through the mesh one window at a time. Inside a window an
//! active cell mixes its two ports with its 2×2 block and a bypass cell leaves
//! its port untouched, so one window costs `O(ni)` and a full pass costs
//! `O(ni·nl)`. The backward pass only needs the vector that entered each
//! window, which the forward pass records on a [`Tape`] or which
//! [`backward_from_outputs`] recomputes by running the windows in reverse.
//!
//! Cotangents of complex signals follow `δ = ∂L/∂Re(y) + j·∂L/∂Im(y)`. With
//! that convention a real parameter's gradient is `Σ Re(conj(δ)·∂y/∂θ)` and a
//! linear map `y = B·x` sends cotangents back through `Bᴴ`.

use crate::error::{Error, Result};
use crate::numeric::{Batch, Matrix2, C64};
use crate::topology::{BlockKind, MeshTopology, PhaseStore, Window};

/// Per-window inputs captured by [`forward_batch`], laid out
/// `[window][sample][port]`.
#[derive(Clone, Debug)]
pub struct Tape {
    ni: usize,
    nl: usize,
    batch: usize,
    inputs: Vec<C64>,
}

impl Tape {
    pub fn ni(&self) -> usize {
        self.ni
    }

    pub fn nl(&self) -> usize {
        self.nl
    }

    pub fn batch_len(&self) -> usize {
        self.batch
    }

    /// The vector that entered `window` for `sample`.
    pub fn window_input(&self, window: usize, sample: usize) -> &[C64] {
        let start = (window * self.batch + sample) * self.ni;
        &self.inputs[start..start + self.ni]
    }

    pub fn byte_len(&self) -> usize {
        std::mem::size_of_val(self.inputs.as_slice())
    }
}

/// Phase gradients, indexed like the [`PhaseStore`] they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientStore {
    values: Vec<f64>,
}

impl GradientStore {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Adds `other` entry by entry.
    pub fn accumulate(&mut self, other: &GradientStore) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

/// Applies one window to `x` via the cell walk.
pub fn process_window(x: &[C64], window: &Window, phases: &PhaseStore) -> Vec<C64> {
    let mut y = x.to_vec();
    let mut p = 0;
    for cell in window.cells() {
        match cell.block() {
            Some(block) => {
                let m = block.matrix_unchecked(phases.as_slice());
                let (y0, y1) = m.apply(x[p], x[p + 1]);
                y[p] = y0;
                y[p + 1] = y1;
                p += 2;
            }
            None => p += 1,
        }
    }
    y
}

/// Sequentially folds [`process_window`] over all windows.
pub fn process_mesh(x: &[C64], topology: &MeshTopology, phases: &PhaseStore) -> Vec<C64> {
    topology
        .windows()
        .iter()
        .fold(x.to_vec(), |y, w| process_window(&y, w, phases))
}

/// A window's active cells with their block matrices evaluated once.
struct CompiledWindow<'a> {
    cells: Vec<(usize, &'a BlockKind, Matrix2)>,
}

impl<'a> CompiledWindow<'a> {
    fn new(window: &'a Window, phases: &[f64]) -> Self {
        let cells = window
            .active_cells()
            .map(|(p, b)| (p, b, b.matrix_unchecked(phases)))
            .collect();
        Self { cells }
    }

    #[inline]
    fn apply_in_place(&self, signal: &mut [C64]) {
        for &(p, _, m) in &self.cells {
            let (y0, y1) = m.apply(signal[p], signal[p + 1]);
            signal[p] = y0;
            signal[p + 1] = y1;
        }
    }
}

fn check_inputs(topology: &MeshTopology, phases: &PhaseStore, width: usize) -> Result<()> {
    if phases.len() != topology.num_params() {
        return Err(Error::DimensionMismatch(format!(
            "{} phases for a mesh with {} parameters",
            phases.len(),
            topology.num_params()
        )));
    }
    if width != topology.ni() {
        return Err(Error::DimensionMismatch(format!(
            "samples of width {width} for a {}-port mesh",
            topology.ni()
        )));
    }
    Ok(())
}

/// Propagates a batch and records each window's input for [`backward_batch`].
pub fn forward_batch(
    inputs: &Batch<C64>,
    topology: &MeshTopology,
    phases: &PhaseStore,
) -> Result<(Batch<C64>, Tape)> {
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_inputs(topology, phases, inputs.width())?;
    let (ni, nl, batch) = (topology.ni(), topology.nl(), inputs.len());
    let mut signal = inputs.clone();
    let mut tape = Vec::with_capacity(nl * batch * ni);
    for window in topology.windows() {
        tape.extend_from_slice(signal.as_slice());
        let compiled = CompiledWindow::new(window, phases.as_slice());
        for x in signal.rows_mut() {
            compiled.apply_in_place(x);
        }
    }
    Ok((signal, Tape { ni, nl, batch, inputs: tape }))
}

/// Forward without recording a tape; `O(ni)` extra memory per sample.
pub fn propagate_batch(inputs: &Batch<C64>, topology: &MeshTopology, phases: &PhaseStore) -> Result<Batch<C64>> {
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_inputs(topology, phases, inputs.width())?;
    let mut signal = inputs.clone();
    for window in topology.windows() {
        let compiled = CompiledWindow::new(window, phases.as_slice());
        for x in signal.rows_mut() {
            compiled.apply_in_place(x);
        }
    }
    Ok(signal)
}

/// Walks the windows in reverse, turning output cotangents into input
/// cotangents and per-phase gradients summed over the batch.
pub fn backward_batch(
    tape: &Tape,
    topology: &MeshTopology,
    phases: &PhaseStore,
    cotangents: &Batch<C64>,
) -> Result<(Batch<C64>, GradientStore)> {
    check_inputs(topology, phases, cotangents.width())?;
    if tape.ni != topology.ni() || tape.nl != topology.nl() {
        return Err(Error::CacheMismatch(format!(
            "tape recorded for ni={} nl={}, mesh has ni={} nl={}",
            tape.ni,
            tape.nl,
            topology.ni(),
            topology.nl()
        )));
    }
    if tape.batch != cotangents.len() {
        return Err(Error::CacheMismatch(format!(
            "tape holds {} samples, got {} cotangents",
            tape.batch,
            cotangents.len()
        )));
    }
    let ni = tape.ni;
    let mut grads = vec![0.0; topology.num_params()];
    let mut delta = cotangents.clone();
    let params = phases.as_slice();
    for (w, window) in topology.windows().iter().enumerate().rev() {
        let cells = GradientWindow::new(window, params);
        let window_inputs = &tape.inputs[w * tape.batch * ni..(w + 1) * tape.batch * ni];
        for (d, x) in delta.rows_mut().zip(window_inputs.chunks_exact(ni)) {
            cells.backward(x, d, &mut grads);
        }
    }
    Ok((delta, GradientStore { values: grads }))
}

/// Tape-free backward pass. Windows are unitary, so each window's input is
/// recovered from its output as `Wᴴ·y` while walking backwards; extra memory
/// is `O(batch·ni)` regardless of depth, at the price of a second sweep and
/// round-off that grows with `nl`.
pub fn backward_from_outputs(
    outputs: &Batch<C64>,
    topology: &MeshTopology,
    phases: &PhaseStore,
    cotangents: &Batch<C64>,
) -> Result<(Batch<C64>, GradientStore)> {
    check_inputs(topology, phases, cotangents.width())?;
    check_inputs(topology, phases, outputs.width())?;
    if outputs.len() != cotangents.len() {
        return Err(Error::CacheMismatch(format!(
            "{} outputs for {} cotangents",
            outputs.len(),
            cotangents.len()
        )));
    }
    let mut grads = vec![0.0; topology.num_params()];
    let mut delta = cotangents.clone();
    let mut signal = outputs.clone();
    let params = phases.as_slice();
    for window in topology.windows().iter().rev() {
        let cells = GradientWindow::new(window, params);
        for (d, y) in delta.rows_mut().zip(signal.rows_mut()) {
            cells.invert_in_place(y);
            cells.backward(y, d, &mut grads);
        }
    }
    Ok((delta, GradientStore { values: grads }))
}

/// A window's active cells with block matrices and phase derivatives.
struct GradientWindow<'a> {
    cells: Vec<(usize, &'a BlockKind, Matrix2, [Matrix2; 2], usize)>,
}

impl<'a> GradientWindow<'a> {
    fn new(window: &'a Window, params: &[f64]) -> Self {
        let cells = window
            .active_cells()
            .map(|(p, b)| {
                let (derivs, n) = b.derivatives_unchecked(params);
                (p, b, b.matrix_unchecked(params), derivs, n)
            })
            .collect();
        Self { cells }
    }

    #[inline]
    fn invert_in_place(&self, y: &mut [C64]) {
        for (p, _, m, _, _) in &self.cells {
            let (u, v) = m.apply_adjoint(y[*p], y[*p + 1]);
            y[*p] = u;
            y[*p + 1] = v;
        }
    }

    /// Adds this window's phase gradients for input `x` and output cotangent
    /// `d`, then turns `d` into the input cotangent.
    #[inline]
    fn backward(&self, x: &[C64], d: &mut [C64], grads: &mut [f64]) {
        for (p, block, m, derivs, n) in &self.cells {
            let (u, v) = (x[*p], x[*p + 1]);
            let (dp, dq) = (d[*p], d[*p + 1]);
            for (dm, idx) in derivs.iter().take(*n).zip(block.param_indices()) {
                let (g0, g1) = dm.apply(u, v);
                grads[idx] += (dp.conj() * g0).re + (dq.conj() * g1).re;
            }
            let (bu, bv) = m.apply_adjoint(dp, dq);
            d[*p] = bu;
            d[*p + 1] = bv;
        }
    }
}
