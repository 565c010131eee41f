//! Simulation and training of photonic neural networks built from
//! programmable unitary meshes.
//!
//! Meshes are decomposed into an ordered list of [`topology::Window`]s, each
//! holding active cells (a 2×2 optical block) and bypass cells (a single
//! pass-through port). The [`slicing`] engine propagates signals window by
//! window and computes phase gradients from per-window cached inputs, so it
//! never builds an `ni × ni` matrix. The [`dense`] module assembles the full
//! transfer matrix and serves as the reference oracle and the cubic-cost
//! baseline.

pub mod bench;
pub mod data;
pub mod dense;
pub mod error;
pub mod memory;
pub mod model;
pub mod numeric;
pub mod slicing;
pub mod topology;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use numeric::{Batch, DenseMatrix, Matrix2, C64};
pub use topology::{BlockKind, Cell, MeshKind, MeshTopology, PhaseStore, Window};

/// Derives an independent 64-bit seed for a numbered sub-stream (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
