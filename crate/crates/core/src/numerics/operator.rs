use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{norm2, stream_rng, C64, MAX_DENSE_ENTRIES, ZERO};
use crate::error::{resource, Error, Result};

/// Dense eigensolvers are used up to this dimension; above it the matrix-free
/// power iteration takes over.
pub const DENSE_NORM_CAP: usize = 4096;

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 20_000;
const POWER_RESTARTS: u64 = 3;

type ApplyFn = Arc<dyn Fn(&[C64]) -> Vec<C64> + Send + Sync>;

/// Linear map given only through its action and the action of its adjoint.
#[derive(Clone)]
pub struct MatrixFree {
    rows: usize,
    cols: usize,
    apply: ApplyFn,
    adjoint: ApplyFn,
}

impl MatrixFree {
    pub fn new(
        rows: usize,
        cols: usize,
        apply: impl Fn(&[C64]) -> Vec<C64> + Send + Sync + 'static,
        adjoint: impl Fn(&[C64]) -> Vec<C64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            rows,
            cols,
            apply: Arc::new(apply),
            adjoint: Arc::new(adjoint),
        }
    }
}

impl fmt::Debug for MatrixFree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixFree({}x{})", self.rows, self.cols)
    }
}

/// A linear operator in one of three storage forms.
#[derive(Clone, Debug)]
pub enum Operator {
    Dense(DMatrix<C64>),
    /// Square blocks acting on disjoint index sets; everything else maps to 0.
    BlockDiagonal {
        dim: usize,
        blocks: Vec<(Vec<usize>, DMatrix<C64>)>,
    },
    MatrixFree(MatrixFree),
}

impl Operator {
    pub fn identity(dim: usize) -> Self {
        Operator::Dense(DMatrix::identity(dim, dim))
    }

    pub fn block_diagonal(dim: usize, blocks: Vec<(Vec<usize>, DMatrix<C64>)>) -> Result<Self> {
        let mut seen = vec![false; dim];
        for (idx, b) in &blocks {
            if b.nrows() != idx.len() || b.ncols() != idx.len() {
                return Err(Error::Contract("block must be square and match its index set".into()));
            }
            for &i in idx {
                if i >= dim || seen[i] {
                    return Err(Error::Contract("block index sets must be disjoint and in range".into()));
                }
                seen[i] = true;
            }
        }
        Ok(Operator::BlockDiagonal { dim, blocks })
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Operator::Dense(m) => m.shape(),
            Operator::BlockDiagonal { dim, .. } => (*dim, *dim),
            Operator::MatrixFree(mf) => (mf.rows, mf.cols),
        }
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let (rows, cols) = self.dims();
        if v.len() != cols {
            return Err(Error::Dimension {
                expected: cols,
                got: v.len(),
            });
        }
        Ok(match self {
            Operator::Dense(m) => {
                let mut out = vec![ZERO; rows];
                for (j, &x) in v.iter().enumerate() {
                    if x != ZERO {
                        for (o, a) in out.iter_mut().zip(m.column(j).iter()) {
                            *o += a * x;
                        }
                    }
                }
                out
            }
            Operator::BlockDiagonal { dim, blocks } => {
                let mut out = vec![ZERO; *dim];
                for (idx, b) in blocks {
                    for (r, &i) in idx.iter().enumerate() {
                        out[i] = idx.iter().enumerate().map(|(c, &j)| b[(r, c)] * v[j]).sum();
                    }
                }
                out
            }
            Operator::MatrixFree(mf) => (mf.apply)(v),
        })
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        let (rows, cols) = self.dims();
        if v.len() != rows {
            return Err(Error::Dimension {
                expected: rows,
                got: v.len(),
            });
        }
        Ok(match self {
            Operator::Dense(m) => (0..cols)
                .map(|j| m.column(j).iter().zip(v).map(|(a, x)| a.conj() * x).sum())
                .collect(),
            Operator::BlockDiagonal { dim, blocks } => {
                let mut out = vec![ZERO; *dim];
                for (idx, b) in blocks {
                    for (c, &j) in idx.iter().enumerate() {
                        out[j] = idx.iter().enumerate().map(|(r, &i)| b[(r, c)].conj() * v[i]).sum();
                    }
                }
                out
            }
            Operator::MatrixFree(mf) => (mf.adjoint)(v),
        })
    }

    pub fn adjoint(&self) -> Operator {
        match self {
            Operator::Dense(m) => Operator::Dense(m.adjoint()),
            Operator::BlockDiagonal { dim, blocks } => Operator::BlockDiagonal {
                dim: *dim,
                blocks: blocks.iter().map(|(i, b)| (i.clone(), b.adjoint())).collect(),
            },
            Operator::MatrixFree(mf) => Operator::MatrixFree(MatrixFree {
                rows: mf.cols,
                cols: mf.rows,
                apply: mf.adjoint.clone(),
                adjoint: mf.apply.clone(),
            }),
        }
    }

    /// Materialize the operator by applying it to every basis vector.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        let (rows, cols) = self.dims();
        let needed = rows as u128 * cols as u128;
        if needed > MAX_DENSE_ENTRIES {
            return Err(resource("dense operator", needed, MAX_DENSE_ENTRIES));
        }
        if let Operator::Dense(m) = self {
            return Ok(m.clone());
        }
        let mut m = DMatrix::from_element(rows, cols, ZERO);
        let mut e = vec![ZERO; cols];
        for j in 0..cols {
            e[j] = C64::new(1.0, 0.0);
            let col = self.apply(&e)?;
            m.set_column(j, &nalgebra::DVector::from_vec(col));
            e[j] = ZERO;
        }
        Ok(m)
    }

    /// Largest value of `|⟨u|A v⟩ − conj⟨v|A† u⟩|` over random probes.
    pub fn adjoint_defect(&self, probes: usize, seed: u64) -> Result<f64> {
        let (rows, cols) = self.dims();
        let mut rng = stream_rng(seed, 0);
        let mut worst = 0.0f64;
        for _ in 0..probes {
            let u = gaussian_vector(rows, &mut rng);
            let v = gaussian_vector(cols, &mut rng);
            let av = self.apply(&v)?;
            let adu = self.apply_adjoint(&u)?;
            let lhs: C64 = u.iter().zip(&av).map(|(a, b)| a.conj() * b).sum();
            let rhs: C64 = v.iter().zip(&adu).map(|(a, b)| a.conj() * b).sum();
            worst = worst.max((lhs - rhs.conj()).norm());
        }
        Ok(worst)
    }
}

fn gaussian_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Result of an operator-norm computation. For dense evaluation the bracket
/// collapses to a point. For power iteration `lower` is a Rayleigh quotient
/// (always a valid lower bound) and `upper` adds the eigen-residual of the
/// converged Ritz pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub dense: bool,
}

/// Largest singular value.
pub fn operator_norm(op: &Operator) -> Result<NormEstimate> {
    let (rows, cols) = op.dims();
    if rows == 0 || cols == 0 {
        return Ok(NormEstimate {
            value: 0.0,
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
            dense: true,
        });
    }
    if rows.min(cols) <= DENSE_NORM_CAP && (rows as u128 * cols as u128) <= MAX_DENSE_ENTRIES {
        let m = op.to_dense()?;
        let v = dense_spectral_norm(&m);
        return Ok(NormEstimate {
            value: v,
            lower: v,
            upper: v,
            iterations: 0,
            dense: true,
        });
    }
    power_norm(cols, |v| op.apply(v), |v| op.apply_adjoint(v))
}

/// Spectral norm via the eigenvalues of the smaller Gram matrix.
pub(crate) fn dense_spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let top = gram
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    top.max(0.0).sqrt()
}

pub(crate) fn power_norm(
    cols: usize,
    apply: impl Fn(&[C64]) -> Result<Vec<C64>>,
    adjoint: impl Fn(&[C64]) -> Result<Vec<C64>>,
) -> Result<NormEstimate> {
    let mut best: Option<NormEstimate> = None;
    let mut last_residual = f64::INFINITY;
    let mut total_iters = 0;
    for restart in 0..POWER_RESTARTS {
        let mut rng = stream_rng(0x5eed_0f_9043, restart);
        let mut v = gaussian_vector(cols, &mut rng);
        let n0 = norm2(&v);
        v.iter_mut().for_each(|z| *z /= n0);
        let mut theta = 0.0;
        let mut converged = false;
        for it in 0..POWER_MAX_ITERS {
            let w = adjoint(&apply(&v)?)?;
            let new_theta: f64 = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum();
            let residual = norm2(
                &w.iter()
                    .zip(&v)
                    .map(|(a, b)| a - b * new_theta)
                    .collect::<Vec<_>>(),
            );
            let wn = norm2(&w);
            total_iters += 1;
            last_residual = residual;
            if wn == 0.0 {
                theta = 0.0;
                converged = true;
                break;
            }
            let settled = (new_theta - theta).abs() <= POWER_TOL * new_theta.max(1e-300);
            theta = new_theta;
            if settled && it > 2 {
                converged = true;
                break;
            }
            v = w.into_iter().map(|z| z / wn).collect();
            if it + 1 == POWER_MAX_ITERS {
                break;
            }
        }
        if !converged {
            continue;
        }
        let est = NormEstimate {
            value: theta.max(0.0).sqrt(),
            lower: theta.max(0.0).sqrt(),
            upper: (theta + last_residual).max(0.0).sqrt(),
            iterations: total_iters,
            dense: false,
        };
        if best.map_or(true, |b| est.value > b.value) {
            best = Some(est);
        }
    }
    best.ok_or(Error::NonConvergence {
        iterations: total_iters,
        residual: last_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identity_and_diagonal_norms() {
        assert!((operator_norm(&Operator::identity(5)).unwrap().value - 1.0).abs() < 1e-12);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0), c(1.0)]));
        assert!((operator_norm(&Operator::Dense(d)).unwrap().value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn power_iteration_matches_dense_svd() {
        let mut rng = stream_rng(11, 0);
        let m = DMatrix::from_fn(8, 8, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let dense = dense_spectral_norm(&m);
        let mm = m.clone();
        let ma = m.adjoint();
        let est = power_norm(
            8,
            |v| Operator::Dense(mm.clone()).apply(v),
            |v| Operator::Dense(ma.clone()).apply(v),
        )
        .unwrap();
        assert!((est.value - dense).abs() < 1e-6, "{} vs {}", est.value, dense);
        assert!(est.lower <= dense + 1e-9);
    }

    #[test]
    fn matrix_free_adjoint_spot_check() {
        let mut rng = stream_rng(12, 0);
        let m = DMatrix::from_fn(6, 4, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let (a, b) = (m.clone(), m.adjoint());
        let op = Operator::MatrixFree(MatrixFree::new(
            6,
            4,
            move |v| Operator::Dense(a.clone()).apply(v).unwrap(),
            move |v| Operator::Dense(b.clone()).apply(v).unwrap(),
        ));
        assert!(op.adjoint_defect(10, 1).unwrap() < 1e-10);
        assert!((op.to_dense().unwrap() - m).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn block_diagonal_rejects_overlap() {
        let b = DMatrix::identity(1, 1);
        assert!(Operator::block_diagonal(3, vec![(vec![0], b.clone()), (vec![0], b)]).is_err());
    }

    #[test]
    fn block_diagonal_apply_and_adjoint_agree_with_dense() {
        let blk = DMatrix::from_row_slice(2, 2, &[c(0.0), C64::new(0.0, 1.0), c(2.0), c(0.0)]);
        let op = Operator::block_diagonal(3, vec![(vec![2, 0], blk)]).unwrap();
        let d = op.to_dense().unwrap();
        assert_eq!(d[(2, 0)], C64::new(0.0, 1.0));
        assert_eq!(d[(0, 2)], c(2.0));
        assert_eq!(d[(1, 1)], ZERO);
        assert!(op.adjoint_defect(5, 2).unwrap() < 1e-12);
    }
}
