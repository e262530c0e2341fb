use std::collections::HashMap;

use nalgebra::DMatrix;

use super::operator::{dense_spectral_norm, power_norm, DENSE_NORM_CAP};
use super::{C64, MAX_DENSE_ENTRIES, ZERO};
use crate::error::Result;

/// Column-major sparse matrix used for operators on the relation basis.
///
/// The spectral norm is computed per connected component of the bipartite
/// row/column graph: the matrix is block-diagonal up to permutation, so its
/// norm is the largest component norm.
#[derive(Clone, Debug, Default)]
pub struct SparseColumns {
    nrows: usize,
    cols: Vec<Vec<(usize, C64)>>,
}

impl SparseColumns {
    pub fn new(nrows: usize) -> Self {
        Self { nrows, cols: Vec::new() }
    }

    pub fn push_column(&mut self, mut entries: Vec<(usize, C64)>) {
        entries.retain(|(_, z)| *z != ZERO);
        if let Some(&(r, _)) = entries.iter().max_by_key(|(r, _)| *r) {
            self.nrows = self.nrows.max(r + 1);
        }
        self.cols.push(entries);
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn columns(&self) -> &[Vec<(usize, C64)>] {
        &self.cols
    }

    pub fn max_abs(&self) -> f64 {
        self.cols
            .iter()
            .flat_map(|c| c.iter().map(|(_, z)| z.norm()))
            .fold(0.0, f64::max)
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.nrows, self.cols.len(), ZERO);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, z) in col {
                m[(i, j)] += z;
            }
        }
        m
    }

    /// Spectral norm.
    pub fn norm(&self) -> Result<f64> {
        let ncols = self.cols.len();
        let mut parent: Vec<usize> = (0..ncols).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut owner: HashMap<usize, usize> = HashMap::new();
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, _) in col {
                match owner.get(&i) {
                    Some(&k) => {
                        let (a, b) = (find(&mut parent, j), find(&mut parent, k));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                    None => {
                        owner.insert(i, j);
                    }
                }
            }
        }
        let mut comps: HashMap<usize, Vec<usize>> = HashMap::new();
        for j in 0..ncols {
            if !self.cols[j].is_empty() {
                let r = find(&mut parent, j);
                comps.entry(r).or_default().push(j);
            }
        }
        let mut best = 0.0f64;
        for cols in comps.values() {
            best = best.max(self.component_norm(cols)?);
        }
        Ok(best)
    }

    fn component_norm(&self, cols: &[usize]) -> Result<f64> {
        if cols.len() == 1 {
            return Ok(self.cols[cols[0]].iter().map(|(_, z)| z.norm_sqr()).sum::<f64>().sqrt());
        }
        let mut rows: HashMap<usize, usize> = HashMap::new();
        for &j in cols {
            for &(i, _) in &self.cols[j] {
                let next = rows.len();
                rows.entry(i).or_insert(next);
            }
        }
        let (r, c) = (rows.len(), cols.len());
        if r.min(c) <= DENSE_NORM_CAP && (r as u128 * c as u128) <= MAX_DENSE_ENTRIES {
            let mut m = DMatrix::from_element(r, c, ZERO);
            for (k, &j) in cols.iter().enumerate() {
                for &(i, z) in &self.cols[j] {
                    m[(rows[&i], k)] += z;
                }
            }
            return Ok(dense_spectral_norm(&m));
        }
        let apply = |v: &[C64]| -> Result<Vec<C64>> {
            let mut out = vec![ZERO; r];
            for (k, &j) in cols.iter().enumerate() {
                for &(i, z) in &self.cols[j] {
                    out[rows[&i]] += z * v[k];
                }
            }
            Ok(out)
        };
        let adjoint = |v: &[C64]| -> Result<Vec<C64>> {
            Ok(cols
                .iter()
                .map(|&j| self.cols[j].iter().map(|&(i, z)| z.conj() * v[rows[&i]]).sum())
                .collect())
        };
        Ok(power_norm(c, apply, adjoint)?.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{stream_rng, Operator};
    use rand::Rng;

    #[test]
    fn component_norm_matches_dense() {
        let mut rng = stream_rng(5, 0);
        let mut s = SparseColumns::new(12);
        for _ in 0..10 {
            let col: Vec<(usize, C64)> = (0..3)
                .map(|_| (rng.gen_range(0..12), C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)))
                .collect();
            s.push_column(col);
        }
        let dense = s.to_dense();
        let want = crate::numerics::operator_norm(&Operator::Dense(dense)).unwrap().value;
        assert!((s.norm().unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn empty_matrix_has_zero_norm() {
        let mut s = SparseColumns::new(4);
        s.push_column(vec![]);
        assert_eq!(s.norm().unwrap(), 0.0);
    }
}
