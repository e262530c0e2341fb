//! The purified function-permutation oracle `HPO` at small `n`: the
//! `(f, σ)` basis, HP-relation states `|φ_{L,R}⟩`, the compression map onto
//! relation registers, and exact checks of the purification-side identities.
//!
//! A state of `A ⊗ B ⊗ H ⊗ P` is stored `(f, σ)`-major: the `A ⊗ B` slice of
//! basis element `hp = f·N! + σ` starts at `hp·N·2^m`.

mod checks;
mod projectors;

pub use checks::{
    build_compress, check_compress_scaling, check_hpo_action, check_w_hpo_closeness, compress_ratio,
    hf_block_moments, hpo_closed_form, max_hpo_action_residual, purification_equivalence, run_hpo_adversary,
    CompressKind, CompressMap, CompressScaling, HfMoments, WHpoCloseness,
};
pub use projectors::{
    build_dom_im_projectors, check_db_factorization, db_minus_domain, epr_operator, eq_operator, ffb_operator, ubound_check,
    DomImCheck, SectorLayout, Side,
};

use nalgebra::DMatrix;

use crate::error::{resource, Error, Result};
use crate::kacwalk::{suffix, AngleTables, FunctionTable, Permutation, Rotation, WalkStep};
use crate::numerics::{C64, ZERO};
use crate::relations::{factorial, Relation};

/// Default cap on `|H ⊗ P|`.
pub const DEFAULT_BASIS_CAP: u128 = 1 << 20;

/// Enumerated basis of `H ⊗ P`: all function tables times all permutations.
#[derive(Clone, Debug)]
pub struct PurifiedBasis {
    n: u32,
    d: u32,
    entry_count: usize,
    blocks: usize,
    table_count: usize,
    perms: Vec<Permutation>,
    rotations: Vec<Rotation>,
    tables: AngleTables,
}

impl PurifiedBasis {
    pub fn new(n: u32, d: u32) -> Result<Self> {
        Self::with_cap(n, d, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(n: u32, d: u32, cap: u128) -> Result<Self> {
        if !(2..=4).contains(&n) || !(1..=8).contains(&d) {
            return Err(Error::Invalid(format!("purified basis needs 2 ≤ n ≤ 4, 1 ≤ d ≤ 8 (got {n}, {d})")));
        }
        let big_n = 1usize << n;
        let blocks = big_n / 2;
        let entry_count = 1usize << (3 * d);
        let tables = (entry_count as u128).checked_pow(blocks as u32).unwrap_or(u128::MAX);
        let perms = factorial(big_n) as u128;
        let size = tables.saturating_mul(perms);
        if size > cap {
            return Err(resource("purified basis", size, cap));
        }
        let angle_tables = AngleTables::new(d);
        Ok(Self {
            n,
            d,
            entry_count,
            blocks,
            table_count: tables as usize,
            perms: (0..perms as u64).map(|r| Permutation::from_rank(big_n, r)).collect(),
            rotations: (0..entry_count as u64).map(|e| angle_tables.rotation(e)).collect(),
            tables: angle_tables,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// `|H ⊗ P|`.
    pub fn dim(&self) -> usize {
        self.table_count * self.perms.len()
    }

    pub fn table_count(&self) -> usize {
        self.table_count
    }

    pub fn perms(&self) -> &[Permutation] {
        &self.perms
    }

    /// Number of values one table entry can take, `2^{3d}`.
    pub fn entry_count(&self) -> usize {
        self.entry_count
    }

    pub fn index(&self, f: usize, sigma: usize) -> usize {
        f * self.perms.len() + sigma
    }

    pub fn function(&self, f: usize) -> FunctionTable {
        FunctionTable::from_index(self.n, self.d, f as u64)
    }

    /// `H_f P_σ` for basis element `hp`.
    pub fn step(&self, hp: usize) -> WalkStep {
        let f = self.function(hp / self.perms.len());
        let sigma = self.perms[hp % self.perms.len()].clone();
        WalkStep::with_tables(f, sigma, &self.tables)
    }

    /// `⟨y|U_e|z⟩` for a table entry `e` and two strings of the same block.
    fn element(&self, e: usize, y: usize, z: usize) -> C64 {
        let top = self.n - 1;
        self.rotations[e][y >> top][z >> top]
    }
}

/// One permutation's contribution to `|φ_{L,R}⟩`: the amplitude over tables
/// is `Π_s factors[s][f(s)]`.
#[derive(Clone, Debug)]
pub struct PhiTerm {
    pub sigma: usize,
    pub factors: Vec<Vec<C64>>,
}

impl PhiTerm {
    /// Amplitudes over all tables (suffix 0 most significant).
    pub fn dense(&self) -> Vec<C64> {
        let mut out = vec![C64::new(1.0, 0.0)];
        for f in &self.factors {
            let mut next = Vec::with_capacity(out.len() * f.len());
            for a in &out {
                next.extend(f.iter().map(|b| a * b));
            }
            out = next;
        }
        out
    }
}

/// HP-relation state `|φ_{L,R}⟩`, stored by permutation.
#[derive(Clone, Debug)]
pub struct PhiState {
    pub l: Relation,
    pub r: Relation,
    pub scale: f64,
    pub terms: Vec<PhiTerm>,
}

/// `|φ_{L,R}⟩ = (#f·(N−l−r)!)^{−1/2} Σ_{f,σ} Π_i [σ(x_i) ∈ blk(y_i)]⟨y_i|H_f|σ(x_i)⟩
/// · Π_j [σ(x'_j) ∈ blk(y'_j)]⟨σ(x'_j)|H_f†|y'_j⟩ |f⟩|σ⟩`.
pub fn build_phi(l: &Relation, r: &Relation, basis: &PurifiedBasis) -> Result<PhiState> {
    let n = basis.n;
    let big_n = 1usize << n;
    if l.n() != n || r.n() != n {
        return Err(Error::Contract("relations and basis disagree on n".into()));
    }
    if l.len() + r.len() > big_n {
        return Err(Error::Contract("l + r exceeds N".into()));
    }
    let scale = 1.0 / (basis.table_count as f64 * factorial(big_n - l.len() - r.len())).sqrt();
    let ones = vec![C64::new(1.0, 0.0); basis.entry_count];
    let mut terms = Vec::new();
    'perm: for (si, sigma) in basis.perms.iter().enumerate() {
        for (x, y) in l.iter().chain(r.iter()) {
            if suffix(sigma.apply(x), n) != suffix(y, n) {
                continue 'perm;
            }
        }
        let mut factors = vec![ones.clone(); basis.blocks];
        for (x, y) in l.iter() {
            let z = sigma.apply(x);
            for (e, v) in factors[suffix(y, n)].iter_mut().enumerate() {
                *v *= basis.element(e, y, z);
            }
        }
        for (x, y) in r.iter() {
            let z = sigma.apply(x);
            for (e, v) in factors[suffix(y, n)].iter_mut().enumerate() {
                *v *= basis.element(e, y, z).conj();
            }
        }
        terms.push(PhiTerm { sigma: si, factors });
    }
    Ok(PhiState {
        l: *l,
        r: *r,
        scale,
        terms,
    })
}

impl PhiState {
    /// `⟨self|other⟩`, using the product structure over blocks.
    pub fn inner(&self, other: &PhiState) -> C64 {
        let mut acc = ZERO;
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            let (a, b) = (&self.terms[i], &other.terms[j]);
            match a.sigma.cmp(&b.sigma) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let mut prod = C64::new(1.0, 0.0);
                    for (fa, fb) in a.factors.iter().zip(&b.factors) {
                        prod *= fa.iter().zip(fb).map(|(p, q)| p.conj() * q).sum::<C64>();
                    }
                    acc += prod;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc * self.scale * other.scale
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    /// Amplitudes over the full `H ⊗ P` basis.
    pub fn to_dense(&self, basis: &PurifiedBasis) -> Vec<C64> {
        let mut out = vec![ZERO; basis.dim()];
        for t in &self.terms {
            for (f, v) in t.dense().into_iter().enumerate() {
                out[basis.index(f, t.sigma)] = v * self.scale;
            }
        }
        out
    }
}

/// Gram matrix of a family of HP-relation states.
pub fn phi_gram(states: &[PhiState]) -> DMatrix<C64> {
    let k = states.len();
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = states[i].inner(&states[j]);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    g
}

/// Dense state on `A ⊗ B ⊗ H ⊗ P`.
#[derive(Clone, Debug)]
pub struct PurifiedState {
    n: u32,
    m: u32,
    data: Vec<C64>,
}

impl PurifiedState {
    /// `|0⟩_{AB} ⊗ |φ_{{}}⟩`.
    pub fn initial(basis: &PurifiedBasis, m: u32) -> Self {
        let slice = 1usize << (basis.n + m);
        let mut data = vec![ZERO; basis.dim() * slice];
        let amp = C64::new(1.0 / (basis.dim() as f64).sqrt(), 0.0);
        for hp in 0..basis.dim() {
            data[hp * slice] = amp;
        }
        Self { n: basis.n, m, data }
    }

    pub fn slice_len(&self) -> usize {
        1 << (self.n + self.m)
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn norm(&self) -> f64 {
        crate::numerics::norm2(&self.data)
    }

    pub fn apply_ab(&mut self, u: &DMatrix<C64>) -> Result<()> {
        let len = self.slice_len();
        if u.nrows() != len || u.ncols() != len {
            return Err(Error::Dimension {
                expected: len,
                got: u.nrows(),
            });
        }
        for chunk in self.data.chunks_mut(len) {
            let v = nalgebra::DVector::from_column_slice(chunk);
            chunk.copy_from_slice((u * v).as_slice());
        }
        Ok(())
    }

    pub fn apply_a(&mut self, g: &DMatrix<C64>) -> Result<()> {
        let big_n = 1usize << self.n;
        if g.nrows() != big_n || g.ncols() != big_n {
            return Err(Error::Dimension {
                expected: big_n,
                got: g.nrows(),
            });
        }
        let len = self.slice_len();
        let w = 1usize << self.m;
        for chunk in self.data.chunks_mut(len) {
            let out = crate::oracles::apply_on_a(g, chunk, w);
            chunk.copy_from_slice(&out);
        }
        Ok(())
    }

    /// Reduced state on `A ⊗ B` (trace over `H ⊗ P`).
    pub fn reduced_density(&self) -> DMatrix<C64> {
        let len = self.slice_len();
        let mut rho = DMatrix::zeros(len, len);
        for chunk in self.data.chunks(len) {
            let v = nalgebra::DVector::from_column_slice(chunk);
            rho += &v * v.adjoint();
        }
        rho
    }

    /// `⟨φ|_{HP}` applied to the state: a vector on `A ⊗ B`.
    pub fn project_phi(&self, phi: &PhiState, basis: &PurifiedBasis) -> Vec<C64> {
        let len = self.slice_len();
        let mut out = vec![ZERO; len];
        for t in &phi.terms {
            for (f, amp) in t.dense().into_iter().enumerate() {
                let c = amp.conj() * phi.scale;
                if c == ZERO {
                    continue;
                }
                let hp = basis.index(f, t.sigma);
                for (o, v) in out.iter_mut().zip(&self.data[hp * len..(hp + 1) * len]) {
                    *o += c * v;
                }
            }
        }
        out
    }

    pub fn distance(&self, other: &PurifiedState) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// `HPO` (or `HPO†`): `H_f P_σ` on `A` in every `(f, σ)` slice.
pub fn apply_hpo(state: &mut PurifiedState, basis: &PurifiedBasis, inverse: bool) -> Result<()> {
    let len = state.slice_len();
    if state.data.len() != len * basis.dim() || state.n != basis.n {
        return Err(Error::Dimension {
            expected: len * basis.dim(),
            got: state.data.len(),
        });
    }
    let w = 1usize << state.m;
    let mut scratch = Vec::new();
    for (hp, chunk) in state.data.chunks_mut(len).enumerate() {
        let step = basis.step(hp);
        if inverse {
            step.apply_rows_adjoint(chunk, w, &mut scratch);
        } else {
            step.apply_rows(chunk, w, &mut scratch);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
