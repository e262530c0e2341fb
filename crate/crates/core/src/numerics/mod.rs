//! Dense complex linear algebra and the measurement primitives shared by the
//! rest of the crate.
//!
//! Index convention: registers are laid out big-endian, so the leftmost
//! factor of a tensor product is the most significant digit of the index.

mod density;
mod haar;
mod operator;
mod rng;
mod sparse;
mod state;

pub use density::{partial_trace, psd_order_check, trace_distance, trace_norm, DensityMatrix, PsdCheck};
pub use haar::{haar_matrix, haar_unitary, random_density, random_state};
pub use operator::{operator_norm, MatrixFree, NormEstimate, Operator, DENSE_NORM_CAP};
pub use rng::{stream_rng, StreamRng};
pub use sparse::SparseColumns;
pub use state::{gram_matrix, tensor_product, StateVector, Tensor};

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

/// Upper bound on the number of complex entries a single dense object may hold.
pub const MAX_DENSE_ENTRIES: u128 = 1 << 26;

pub(crate) use operator::dense_spectral_norm;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Kronecker product of two dense matrices, left factor most significant.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Largest absolute entry of a matrix, used for entrywise residuals.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest eigenvalue-magnitude style residual `‖A − B‖` in operator norm for
/// dense matrices of equal shape.
pub fn dense_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    operator_norm(&Operator::Dense(a - b))
        .map(|e| e.value)
        .unwrap_or(f64::INFINITY)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Deviation of `m` from Hermiticity, `max |m − m†|`.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Projector `|v⟩⟨v|`.
pub fn outer(v: &[C64]) -> DMatrix<C64> {
    let n = v.len();
    DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

/// `⟨a|b⟩`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
