use nalgebra::DMatrix;
use serde::Serialize;

use super::{hermitian_eigenvalues, hermiticity_defect, Operator, C64, ZERO};
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-8;

/// Validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Contract("density matrix must be square".into()));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if hermiticity_defect(&m) > HERMITIAN_TOL * scale {
            return Err(Error::Contract("density matrix is not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Contract(format!("density matrix trace is {tr}")));
        }
        let min = hermitian_eigenvalues(&m).first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::Contract(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(Self { m })
    }

    pub fn from_pure(v: &[C64]) -> Result<Self> {
        Self::new(super::outer(v))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }
}

/// Trace norm `‖a − b‖₁` of the Hermitian difference. No factor ½: two
/// orthogonal pure states are at distance 2.
pub fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    trace_norm(&(a - b))
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(h: &DMatrix<C64>) -> Result<f64> {
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if hermiticity_defect(h) > 1e-9 * scale {
        return Err(Error::Contract("trace norm needs a Hermitian argument".into()));
    }
    Ok(hermitian_eigenvalues(h).iter().map(|e| e.abs()).sum())
}

/// Trace out every register not listed in `keep` (register order is kept).
/// An empty keep-set yields the 1×1 matrix holding the trace.
pub fn partial_trace(rho: &DMatrix<C64>, dims: &[usize], keep: &[usize]) -> Result<DMatrix<C64>> {
    let total: usize = dims.iter().product();
    if rho.nrows() != total || rho.ncols() != total {
        return Err(Error::Dimension {
            expected: total,
            got: rho.nrows(),
        });
    }
    if keep.iter().any(|&k| k >= dims.len()) || keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("keep must list distinct registers in increasing order".into()));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|r| !keep.contains(r)).collect();
    let kdim: usize = keep.iter().map(|&k| dims[k]).product();
    let tdim: usize = traced.iter().map(|&k| dims[k]).product();

    // Place-value of every register inside the full index.
    let mut stride = vec![1usize; dims.len()];
    for r in (0..dims.len().saturating_sub(1)).rev() {
        stride[r] = stride[r + 1] * dims[r + 1];
    }
    let offsets = |regs: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for &r in regs.iter().rev() {
            off += (idx % dims[r]) * stride[r];
            idx /= dims[r];
        }
        off
    };
    let kept_off: Vec<usize> = (0..kdim).map(|i| offsets(keep, i)).collect();
    let traced_off: Vec<usize> = (0..tdim).map(|i| offsets(&traced, i)).collect();

    let mut out = DMatrix::from_element(kdim, kdim, ZERO);
    for i in 0..kdim {
        for j in 0..kdim {
            out[(i, j)] = traced_off
                .iter()
                .map(|&t| rho[(kept_off[i] + t, kept_off[j] + t)])
                .sum();
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PsdCheck {
    pub holds: bool,
    pub min_eigenvalue: f64,
}

/// Tests `a ⪯ b`, i.e. `b − a` positive semidefinite up to −1e−8.
pub fn psd_order_check(a: &Operator, b: &Operator) -> Result<PsdCheck> {
    let a = a.to_dense()?;
    let b = b.to_dense()?;
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let diff = &b - &a;
    let scale = diff.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if hermiticity_defect(&diff) > 1e-9 * scale {
        return Err(Error::Contract("PSD ordering needs Hermitian operands".into()));
    }
    let min = hermitian_eigenvalues(&diff).first().copied().unwrap_or(0.0);
    Ok(PsdCheck {
        holds: min >= -PSD_TOL,
        min_eigenvalue: min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{kron, random_density, random_state, stream_rng};

    fn ket(dim: usize, i: usize) -> Vec<C64> {
        let mut v = vec![ZERO; dim];
        v[i] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn orthogonal_pure_states_are_at_distance_two() {
        let a = super::super::outer(&ket(2, 0));
        let b = super::super::outer(&ket(2, 1));
        assert!((trace_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        assert!(trace_distance(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn trace_out_product_and_bell() {
        let p = super::super::outer(&ket(4, 0));
        let r = partial_trace(&p, &[2, 2], &[0]).unwrap();
        assert_eq!(r, super::super::outer(&ket(2, 0)));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = vec![C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)];
        let r = partial_trace(&super::super::outer(&bell), &[2, 2], &[0]).unwrap();
        let half = DMatrix::<C64>::identity(2, 2) * C64::new(0.5, 0.0);
        assert!((r - half).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn trace_out_middle_register_keeps_trace() {
        let mut rng = stream_rng(3, 0);
        let psi = random_state(2 * 3 * 2, &mut rng);
        let rho = super::super::outer(&psi);
        let r = partial_trace(&rho, &[2, 3, 2], &[0, 2]).unwrap();
        assert_eq!(r.nrows(), 4);
        assert!((r.trace().re - 1.0).abs() < 1e-10);
        let full = partial_trace(&rho, &[2, 3, 2], &[]).unwrap();
        assert!((full[(0, 0)].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn partial_trace_of_kron_recovers_factor() {
        let mut rng = stream_rng(4, 0);
        let a = random_density(2, &mut rng);
        let b = random_density(3, &mut rng);
        let ab = kron(&a, &b);
        let ra = partial_trace(&ab, &[2, 3], &[0]).unwrap();
        let rb = partial_trace(&ab, &[2, 3], &[1]).unwrap();
        assert!((ra - a).iter().all(|z| z.norm() < 1e-12));
        assert!((rb - b).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn psd_examples() {
        let z = Operator::Dense(DMatrix::zeros(3, 3));
        let i = Operator::identity(3);
        assert!(psd_order_check(&z, &i).unwrap().holds);
        let bad = psd_order_check(&i, &z).unwrap();
        assert!(!bad.holds);
        assert!((bad.min_eigenvalue + 1.0).abs() < 1e-12);
    }

    #[test]
    fn equality_projector_below_identity() {
        let n = 4;
        let eq = DMatrix::from_fn(n * n, n * n, |i, j| {
            if i == j && i / n == i % n {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        });
        let c = psd_order_check(&Operator::Dense(eq), &Operator::identity(n * n)).unwrap();
        assert!(c.holds);
        assert!(c.min_eigenvalue.abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_is_a_contract_error() {
        let m = DMatrix::from_row_slice(2, 2, &[ZERO, C64::new(1.0, 0.0), ZERO, ZERO]);
        assert!(trace_norm(&m).is_err());
        assert!(DensityMatrix::new(m).is_err());
    }
}
