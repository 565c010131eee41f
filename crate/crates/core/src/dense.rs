//! Full transfer-matrix construction.
//!
//! Every layer is materialized as an `ni × ni` matrix and the mesh matrix is
//! their product. Nothing here exploits sparsity: this is the reference the
//! slicing engine is checked against and the baseline it is benchmarked
//! against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::{Batch, DenseMatrix, C64, ZERO};
use crate::topology::{MeshTopology, PhaseStore, Window};

/// Layer matrix of one window: active blocks on the diagonal at their port
/// offsets, a `1` for every bypass port, zeros elsewhere.
pub fn layer_matrix(window: &Window, phases: &PhaseStore, ni: usize) -> Result<DenseMatrix> {
    let mut m = DenseMatrix::zeros(ni, ni);
    let mut port = 0;
    for cell in window.cells() {
        match cell.block() {
            Some(block) => {
                let b = block.matrix(phases)?;
                m.set(port, port, b.a);
                m.set(port, port + 1, b.b);
                m.set(port + 1, port, b.c);
                m.set(port + 1, port + 1, b.d);
            }
            None => m.set(port, port, C64::new(1.0, 0.0)),
        }
        port += cell.ports();
    }
    Ok(m)
}

/// `U = L_{nl−1} ··· L_1 · L_0`, so that `U·x` applies window 0 first.
pub fn mesh_matrix(topology: &MeshTopology, phases: &PhaseStore) -> Result<DenseMatrix> {
    check_phases(topology, phases)?;
    let ni = topology.ni();
    let mut u = DenseMatrix::identity(ni);
    for window in topology.windows() {
        u = layer_matrix(window, phases, ni)?.matmul(&u)?;
    }
    Ok(u)
}

/// Phases drawn uniformly from `[0, 2π)`. The sequence depends only on the
/// seed and the number of phases.
pub fn random_phases(topology: &MeshTopology, seed: u64) -> PhaseStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..topology.num_params())
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect();
    PhaseStore::from_vec(values).expect("uniform samples are finite")
}

fn check_phases(topology: &MeshTopology, phases: &PhaseStore) -> Result<()> {
    if phases.len() != topology.num_params() {
        return Err(Error::DimensionMismatch(format!(
            "{} phases for a mesh with {} parameters",
            phases.len(),
            topology.num_params()
        )));
    }
    Ok(())
}

/// Forward state of the dense engine: every partial product
/// `A_k = L_k ··· L_0` is kept for the backward pass.
pub struct DenseTape {
    layers: Vec<DenseMatrix>,
    partials: Vec<DenseMatrix>,
    inputs: Batch<C64>,
}

impl DenseTape {
    pub fn mesh_matrix(&self) -> Option<&DenseMatrix> {
        self.partials.last()
    }

    /// Bytes held by the stored matrices and inputs.
    pub fn byte_len(&self) -> usize {
        self.layers.iter().chain(&self.partials).map(DenseMatrix::byte_len).sum::<usize>()
            + std::mem::size_of_val(self.inputs.as_slice())
    }
}

/// Dense-engine forward: assembles the mesh matrix and applies it to every sample.
pub fn dense_forward(
    topology: &MeshTopology,
    phases: &PhaseStore,
    inputs: &Batch<C64>,
) -> Result<(Batch<C64>, DenseTape)> {
    check_phases(topology, phases)?;
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let ni = topology.ni();
    if inputs.width() != ni {
        return Err(Error::DimensionMismatch(format!("width {} for a {ni}-port mesh", inputs.width())));
    }
    let mut layers = Vec::with_capacity(topology.nl());
    let mut partials: Vec<DenseMatrix> = Vec::with_capacity(topology.nl());
    for window in topology.windows() {
        let l = layer_matrix(window, phases, ni)?;
        let a = match partials.last() {
            Some(prev) => l.matmul(prev)?,
            None => l.clone(),
        };
        layers.push(l);
        partials.push(a);
    }
    let mut out = Vec::with_capacity(inputs.as_slice().len());
    for x in inputs.rows() {
        match partials.last() {
            Some(u) => out.extend(u.apply(x)?),
            None => out.extend_from_slice(x),
        }
    }
    let outputs = Batch::from_flat(ni, out)?;
    Ok((outputs, DenseTape { layers, partials, inputs: inputs.clone() }))
}

/// Dense-engine backward by reverse-mode differentiation through the chain of
/// layer products. Uses the same cotangent convention as the slicing engine:
/// `δ = ∂L/∂Re(y) + j·∂L/∂Im(y)`, gradients summed over the batch.
pub fn dense_backward(
    tape: &DenseTape,
    topology: &MeshTopology,
    phases: &PhaseStore,
    cotangents: &Batch<C64>,
) -> Result<(Batch<C64>, Vec<f64>)> {
    let ni = topology.ni();
    if tape.layers.len() != topology.nl() || cotangents.len() != tape.inputs.len() || cotangents.width() != ni {
        return Err(Error::CacheMismatch("dense tape does not match topology or cotangents".into()));
    }
    let mut grads = vec![0.0; topology.num_params()];
    let Some(u) = tape.partials.last() else {
        return Ok((cotangents.clone(), grads));
    };

    // δU = Σ_b δy_b · x_bᴴ
    let mut d_a = DenseMatrix::zeros(ni, ni);
    for (dy, x) in cotangents.rows().zip(tape.inputs.rows()) {
        for r in 0..ni {
            if dy[r] == ZERO {
                continue;
            }
            for c in 0..ni {
                let v = d_a.get(r, c) + dy[r] * x[c].conj();
                d_a.set(r, c, v);
            }
        }
    }

    let identity = DenseMatrix::identity(ni);
    for (k, window) in topology.windows().iter().enumerate().rev() {
        let prev = if k == 0 { &identity } else { &tape.partials[k - 1] };
        // δL_k = δA_k · A_{k−1}ᴴ
        let d_layer = d_a.matmul(&prev.adjoint())?;
        for (port, block) in window.active_cells() {
            let (derivs, n) = block.derivatives_unchecked(phases.as_slice());
            for (d, idx) in derivs.iter().take(n).zip(block.param_indices()) {
                let pairs = [
                    (d_layer.get(port, port), d.a),
                    (d_layer.get(port, port + 1), d.b),
                    (d_layer.get(port + 1, port), d.c),
                    (d_layer.get(port + 1, port + 1), d.d),
                ];
                grads[idx] += pairs.iter().map(|(g, dm)| (g.conj() * dm).re).sum::<f64>();
            }
        }
        // δA_{k−1} = L_kᴴ · δA_k
        d_a = tape.layers[k].adjoint().matmul(&d_a)?;
    }

    let uh = u.adjoint();
    let mut back = Vec::with_capacity(cotangents.as_slice().len());
    for dy in cotangents.rows() {
        back.extend(uh.apply(dy)?);
    }
    Ok((Batch::from_flat(ni, back)?, grads))
}
