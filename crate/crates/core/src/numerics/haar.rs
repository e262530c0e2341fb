use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Operator, C64};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(
            s * rng.sample::<f64, _>(StandardNormal),
            s * rng.sample::<f64, _>(StandardNormal),
        )
    })
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix, with every
/// column of Q rotated by the phase of the matching diagonal entry of R.
/// Without that fix the distribution depends on the QR sign convention.
pub fn haar_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let qr = ginibre(dim, dim, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    Operator::Dense(haar_matrix(dim, rng))
}

/// Haar-random pure state (normalized complex Gaussian vector).
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let g = ginibre(dim, 1, rng);
    let n = g.norm();
    g.iter().map(|z| z / n).collect()
}

/// Random full-rank density matrix `G G† / Tr(G G†)`.
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let g = ginibre(dim, dim, rng);
    let w = &g * g.adjoint();
    let tr = w.trace();
    w / tr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_abs, stream_rng};

    #[test]
    fn haar_is_unitary() {
        let mut rng = stream_rng(1, 0);
        for dim in [1, 2, 5, 16] {
            let u = haar_matrix(dim, &mut rng);
            let err = max_abs(&(u.adjoint() * &u - DMatrix::identity(dim, dim)));
            assert!(err < 1e-10, "dim {dim}: {err}");
        }
    }

    #[test]
    fn first_moment_vanishes() {
        // |E[U]| entrywise within 5 standard errors of 0.
        let dim = 3;
        let samples = 10_000;
        let mut rng = stream_rng(2, 0);
        let mut sum = DMatrix::<C64>::zeros(dim, dim);
        let mut sq = DMatrix::<f64>::zeros(dim, dim);
        for _ in 0..samples {
            let u = haar_matrix(dim, &mut rng);
            sum += &u;
            sq += u.map(|z| z.norm_sqr());
        }
        let k = samples as f64;
        for i in 0..dim {
            for j in 0..dim {
                let mean = sum[(i, j)] / k;
                let se = ((sq[(i, j)] / k - mean.norm_sqr()) / k).sqrt();
                assert!(mean.norm() <= 5.0 * se, "entry ({i},{j}) mean {mean} se {se}");
            }
        }
    }
}
