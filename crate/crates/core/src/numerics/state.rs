use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{inner, norm2, Operator, C64, MAX_DENSE_ENTRIES, ONE, ZERO};
use crate::error::{resource, Error, Result};

/// Dense amplitude vector together with the register dimensions it spans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amps: Vec<C64>,
    dims: Vec<usize>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>, dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total != amps.len() {
            return Err(Error::Dimension {
                expected: total,
                got: amps.len(),
            });
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("state has non-finite amplitudes".into()));
        }
        Ok(Self { amps, dims })
    }

    /// Single-register state from raw amplitudes.
    pub fn from_amplitudes(amps: Vec<C64>) -> Self {
        let d = amps.len();
        Self { amps, dims: vec![d] }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let total = dims.iter().product();
        Self {
            amps: vec![ZERO; total],
            dims: dims.to_vec(),
        }
    }

    pub fn basis(dims: &[usize], index: usize) -> Self {
        let mut s = Self::zeros(dims);
        s.amps[index] = ONE;
        s
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.amps)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|z| *z /= n);
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        inner(&self.amps, &other.amps)
    }

    pub fn projector(&self) -> DMatrix<C64> {
        super::outer(&self.amps)
    }
}

/// Things that can be combined with a Kronecker product.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Result<Self>;
}

/// Kronecker product with the left factor as the most significant index.
pub fn tensor_product<T: Tensor>(a: &T, b: &T) -> Result<T> {
    a.tensor(b)
}

impl Tensor for StateVector {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let needed = self.len() as u128 * other.len() as u128;
        if needed > MAX_DENSE_ENTRIES {
            return Err(resource("tensor product state", needed, MAX_DENSE_ENTRIES));
        }
        let mut amps = Vec::with_capacity(needed as usize);
        for a in &self.amps {
            amps.extend(other.amps.iter().map(|b| a * b));
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Ok(Self { amps, dims })
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Result<Self> {
        let (ar, ac) = self.dims();
        let (br, bc) = other.dims();
        let needed = (ar * br) as u128 * (ac * bc) as u128;
        if needed > MAX_DENSE_ENTRIES {
            return Err(resource("tensor product operator", needed, MAX_DENSE_ENTRIES));
        }
        Ok(Operator::Dense(super::kron(&self.to_dense()?, &other.to_dense()?)))
    }
}

/// `G[i][j] = ⟨v_i|v_j⟩`.
pub fn gram_matrix(vectors: &[StateVector]) -> Result<DMatrix<C64>> {
    if let Some(first) = vectors.first() {
        if let Some(bad) = vectors.iter().find(|v| v.len() != first.len()) {
            return Err(Error::Dimension {
                expected: first.len(),
                got: bad.len(),
            });
        }
    }
    let k = vectors.len();
    let mut g = DMatrix::from_element(k, k, ZERO);
    for i in 0..k {
        for j in i..k {
            let z = vectors[i].inner(&vectors[j]);
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn basis_tensor_follows_big_endian_order() {
        let zero = StateVector::basis(&[2], 0);
        let one = StateVector::basis(&[2], 1);
        let s = tensor_product(&zero, &one).unwrap();
        assert_eq!(s.dims(), &[2, 2]);
        assert_eq!(s.amplitudes()[1], c(1.0));
        assert_eq!(s.amplitudes().iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn bit_flip_on_left_factor() {
        let x = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let xi = Operator::Dense(x).tensor(&Operator::Dense(DMatrix::identity(2, 2))).unwrap();
        let out = xi.apply(StateVector::basis(&[2, 2], 0).amplitudes()).unwrap();
        // |00⟩ -> |10⟩, index 2
        assert_eq!(out[2], c(1.0));
        assert!(out.iter().enumerate().all(|(i, z)| i == 2 || z.norm() == 0.0));
    }

    #[test]
    fn identity_tensor_identity() {
        let i2 = Operator::Dense(DMatrix::identity(2, 2));
        let i4 = i2.tensor(&i2).unwrap().to_dense().unwrap();
        assert_eq!(i4, DMatrix::<C64>::identity(4, 4));
    }

    #[test]
    fn gram_of_repeated_vector_is_degenerate() {
        let v = StateVector::basis(&[3], 1);
        let g = gram_matrix(&[v.clone(), v]).unwrap();
        assert_eq!(g[(0, 1)], c(1.0));
        assert_eq!(g.row(0), g.row(1));
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(StateVector::new(vec![c(1.0); 3], vec![2, 2]).is_err());
        let a = StateVector::basis(&[2], 0);
        let b = StateVector::basis(&[3], 0);
        assert!(gram_matrix(&[a, b]).is_err());
    }
}
