//! Path-recording oracles on a sparse relation basis.
//!
//! States live on `A ⊗ B ⊗ L ⊗ R`: for every pair of relations `(L, R)` a
//! dense amplitude vector over `A ⊗ B` is stored (index `a·2^m + b`). The
//! oracles act on `A` and the relation registers only. Single-register
//! oracles (`PR`) use the `L` slot and leave `R` untouched.

mod adversary;
mod checks;

pub use adversary::{
    pr_closed_form, run_adversary, AdversarySpec, DenseOracle, Precomposed, QueryOracle, SpecSource,
};
pub use checks::{
    basis_domain, check_partial_isometry, check_right_invariance, check_w_restriction,
    check_wdagv_identity, invariance_residual, sparse_residual_norm, v_minus_e_norm, WRestriction,
};

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{C64, ZERO};
use crate::relations::{Relation, MAX_PAIRS};

/// Operators provided by this module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OracleKind {
    /// Single-relation oracle, fresh output blocks, amplitude `1/√(N−2|R|)`.
    Pr,
    /// Two-sided oracle `V = V^L(I − V^R V^R†) + (I − V^L V^L†)V^R†`.
    V,
    VL,
    VR,
    /// `W = W^L + W^R†`, defined on distinct-block `L ∪ R` only.
    W,
    WL,
    WR,
    EL,
    ER,
}

/// Sparse state on `A ⊗ B ⊗ L ⊗ R`.
#[derive(Clone, Debug)]
pub struct RecordedState {
    n: u32,
    m: u32,
    entries: IndexMap<(Relation, Relation), Vec<C64>>,
}

impl RecordedState {
    pub fn zero(n: u32, m: u32) -> Self {
        Self {
            n,
            m,
            entries: IndexMap::new(),
        }
    }

    /// `|0ⁿ0ᵐ⟩|{}⟩|{}⟩`.
    pub fn initial(n: u32, m: u32) -> Self {
        Self::basis(n, m, 0, Relation::empty(n), Relation::empty(n))
    }

    pub fn basis(n: u32, m: u32, ab: usize, l: Relation, r: Relation) -> Self {
        let mut s = Self::zero(n, m);
        s.add_at(l, r, ab, C64::new(1.0, 0.0));
        s
    }

    /// State with a single relation pair and the given `A ⊗ B` vector.
    pub fn from_vector(n: u32, m: u32, l: Relation, r: Relation, v: Vec<C64>) -> Result<Self> {
        let mut s = Self::zero(n, m);
        if v.len() != s.ab_dim() {
            return Err(Error::Dimension {
                expected: s.ab_dim(),
                got: v.len(),
            });
        }
        s.entries.insert((l, r), v);
        Ok(s)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn width(&self) -> usize {
        1 << self.m
    }

    pub fn ab_dim(&self) -> usize {
        1 << (self.n + self.m)
    }

    pub fn entries(&self) -> &IndexMap<(Relation, Relation), Vec<C64>> {
        &self.entries
    }

    pub(crate) fn vectors_mut(&mut self) -> impl Iterator<Item = &mut Vec<C64>> {
        self.entries.values_mut()
    }

    pub fn get(&self, l: &Relation, r: &Relation) -> Option<&[C64]> {
        self.entries.get(&(*l, *r)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn slot(&mut self, l: Relation, r: Relation) -> &mut Vec<C64> {
        let dim = self.ab_dim();
        self.entries.entry((l, r)).or_insert_with(|| vec![ZERO; dim])
    }

    pub fn add_at(&mut self, l: Relation, r: Relation, ab: usize, c: C64) {
        self.slot(l, r)[ab] += c;
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.m != other.m {
            return Err(Error::Contract("recorded states have different registers".into()));
        }
        Ok(())
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, other: &Self, c: C64) -> Result<()> {
        self.check_compatible(other)?;
        for ((l, r), v) in &other.entries {
            let dst = self.slot(*l, *r);
            for (d, s) in dst.iter_mut().zip(v) {
                *d += c * s;
            }
        }
        Ok(())
    }

    /// `self − other`.
    pub fn minus(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(other, C64::new(-1.0, 0.0))?;
        Ok(out)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|v| v.iter())
            .map(|c| c.norm_sqr())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_compatible(other)?;
        let mut acc = ZERO;
        for (k, v) in &self.entries {
            if let Some(w) = other.entries.get(k) {
                acc += v.iter().zip(w).map(|(a, b)| a.conj() * b).sum::<C64>();
            }
        }
        Ok(acc)
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.minus(other)?.norm())
    }

    /// Keeps only the components with `|L| + |R| ≤ t`.
    pub fn truncate(&self, t: usize) -> Self {
        let mut out = Self::zero(self.n, self.m);
        for ((l, r), v) in &self.entries {
            if l.len() + r.len() <= t {
                out.entries.insert((*l, *r), v.clone());
            }
        }
        out
    }

    /// Drops relation pairs whose vectors vanish.
    pub fn prune(&mut self, tol: f64) {
        self.entries.retain(|_, v| v.iter().any(|c| c.norm() > tol));
    }

    /// Applies a unitary on `A ⊗ B` to every relation component.
    pub fn apply_ab(&mut self, u: &DMatrix<C64>) -> Result<()> {
        let dim = self.ab_dim();
        if u.nrows() != dim || u.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: u.nrows(),
            });
        }
        for v in self.entries.values_mut() {
            let x = nalgebra::DVector::from_column_slice(v);
            v.copy_from_slice((u * x).as_slice());
        }
        Ok(())
    }

    /// Applies an `N × N` matrix on the `A` register.
    pub fn apply_a(&mut self, g: &DMatrix<C64>) -> Result<()> {
        let big_n = 1usize << self.n;
        if g.nrows() != big_n || g.ncols() != big_n {
            return Err(Error::Dimension {
                expected: big_n,
                got: g.nrows(),
            });
        }
        let w = self.width();
        for v in self.entries.values_mut() {
            *v = apply_on_a(g, v, w);
        }
        Ok(())
    }

    /// Reduced state on `A ⊗ B`: `Σ_{L,R} v v†`.
    pub fn reduced_density(&self) -> DMatrix<C64> {
        let dim = self.ab_dim();
        let mut rho = DMatrix::zeros(dim, dim);
        for v in self.entries.values() {
            let col = nalgebra::DVector::from_column_slice(v);
            rho += &col * col.adjoint();
        }
        rho
    }

    /// Applies a map on relation pairs, linear in the relation basis.
    pub fn map_relations<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&Relation, &Relation) -> Vec<(Relation, Relation, C64)>,
    {
        let mut out = Self::zero(self.n, self.m);
        for ((l, r), v) in &self.entries {
            for (l2, r2, c) in f(l, r) {
                let dst = out.slot(l2, r2);
                for (d, s) in dst.iter_mut().zip(v) {
                    *d += c * s;
                }
            }
        }
        out
    }
}

/// `(g ⊗ I_width) v` for a row-major `a·width + b` layout.
pub(crate) fn apply_on_a(g: &DMatrix<C64>, v: &[C64], width: usize) -> Vec<C64> {
    let big_n = g.nrows();
    let mut out = vec![ZERO; v.len()];
    for a in 0..big_n {
        for x in 0..big_n {
            let c = g[(a, x)];
            if c == ZERO {
                continue;
            }
            let src = &v[x * width..(x + 1) * width];
            let dst = &mut out[a * width..(a + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += c * s;
            }
        }
    }
    out
}

/// Direction of a primitive application.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Prim {
    Pr,
    VL,
    VR,
    WL,
    WR,
    EL,
    ER,
}

/// Images of the basis state `|a⟩|L⟩|R⟩` under a primitive or its adjoint.
/// All amplitudes are real.
fn basis_images(n: u32, prim: Prim, adjoint: bool, a: usize, l: &Relation, r: &Relation, out: &mut Vec<(usize, Relation, Relation, f64)>) {
    let big_n = 1usize << n;
    let inv_sqrt = |k: usize| 1.0 / (k as f64).sqrt();
    let room = |rel: &Relation| rel.len() < MAX_PAIRS;
    match (prim, adjoint) {
        (Prim::Pr, false) => {
            if !l.is_y_db() || !room(l) {
                return;
            }
            let c = inv_sqrt(big_n - 2 * l.len());
            for y in (0..big_n).filter(|&y| !l.in_bim(y)) {
                out.push((y, l.with_pair(a, y), *r, c));
            }
        }
        (Prim::Pr, true) => {
            let y = a;
            for ((x, py), _) in l.distinct() {
                if py as usize != y {
                    continue;
                }
                let prev = l.without_pair(x as usize, y).unwrap();
                if prev.is_y_db() && !prev.in_bim(y) {
                    out.push((x as usize, prev, *r, inv_sqrt(big_n - 2 * prev.len())));
                }
            }
        }
        (Prim::VL, false) => {
            let u = l.union(r);
            if !room(&u) {
                return;
            }
            let k = big_n - u.bim_len();
            if k == 0 {
                return;
            }
            for y in (0..big_n).filter(|&y| !u.in_bim(y)) {
                out.push((y, l.with_pair(a, y), *r, inv_sqrt(k)));
            }
        }
        (Prim::VL, true) => {
            let y = a;
            for ((x, py), _) in l.distinct() {
                if py as usize != y {
                    continue;
                }
                let prev = l.without_pair(x as usize, y).unwrap();
                let u = prev.union(r);
                if !u.in_bim(y) {
                    out.push((x as usize, prev, *r, inv_sqrt(big_n - u.bim_len())));
                }
            }
        }
        (Prim::VR, false) => {
            let y = a;
            let u = l.union(r);
            if !room(&u) {
                return;
            }
            let k = big_n - u.bdom_len();
            if k == 0 {
                return;
            }
            for x in (0..big_n).filter(|&x| !u.in_bdom(x)) {
                out.push((x, *l, r.with_pair(x, y), inv_sqrt(k)));
            }
        }
        (Prim::VR, true) => {
            let x = a;
            for ((px, y), _) in r.distinct() {
                if px as usize != x {
                    continue;
                }
                let prev = r.without_pair(x, y as usize).unwrap();
                let u = l.union(&prev);
                if !u.in_bdom(x) {
                    out.push((y as usize, *l, prev, inv_sqrt(big_n - u.bdom_len())));
                }
            }
        }
        (Prim::WL, false) => {
            let u = l.union(r);
            if !room(&u) || !u.is_db() || u.in_bdom(a) {
                return;
            }
            let c = inv_sqrt(big_n - 2 * u.len());
            for y in (0..big_n).filter(|&y| !u.in_bim(y)) {
                out.push((y, l.with_pair(a, y), *r, c));
            }
        }
        (Prim::WL, true) => {
            let y = a;
            for ((x, py), _) in l.distinct() {
                if py as usize != y {
                    continue;
                }
                let prev = l.without_pair(x as usize, y).unwrap();
                let u = prev.union(r);
                if u.is_db() && !u.in_bdom(x as usize) && !u.in_bim(y) {
                    out.push((x as usize, prev, *r, inv_sqrt(big_n - 2 * u.len())));
                }
            }
        }
        (Prim::WR, false) => {
            let y = a;
            let u = l.union(r);
            if !room(&u) || !u.is_db() || u.in_bim(y) {
                return;
            }
            let c = inv_sqrt(big_n - 2 * u.len());
            for x in (0..big_n).filter(|&x| !u.in_bdom(x)) {
                out.push((x, *l, r.with_pair(x, y), c));
            }
        }
        (Prim::WR, true) => {
            let x = a;
            for ((px, y), _) in r.distinct() {
                if px as usize != x {
                    continue;
                }
                let prev = r.without_pair(x, y as usize).unwrap();
                let u = l.union(&prev);
                if u.is_db() && !u.in_bdom(x) && !u.in_bim(y as usize) {
                    out.push((y as usize, *l, prev, inv_sqrt(big_n - 2 * u.len())));
                }
            }
        }
        (Prim::EL, false) => {
            if !room(&l.union(r)) {
                return;
            }
            for y in 0..big_n {
                let c = ((l.multiplicity(a, y) + 1) as f64 / big_n as f64).sqrt();
                out.push((y, l.with_pair(a, y), *r, c));
            }
        }
        (Prim::EL, true) => {
            let y = a;
            for ((x, py), mult) in l.distinct() {
                if py as usize == y {
                    let prev = l.without_pair(x as usize, y).unwrap();
                    out.push((x as usize, prev, *r, (mult as f64 / big_n as f64).sqrt()));
                }
            }
        }
        (Prim::ER, false) => {
            if !room(&l.union(r)) {
                return;
            }
            let y = a;
            for x in 0..big_n {
                let c = ((r.multiplicity(x, y) + 1) as f64 / big_n as f64).sqrt();
                out.push((x, *l, r.with_pair(x, y), c));
            }
        }
        (Prim::ER, true) => {
            let x = a;
            for ((px, y), mult) in r.distinct() {
                if px as usize == x {
                    let prev = r.without_pair(x, y as usize).unwrap();
                    out.push((y as usize, *l, prev, (mult as f64 / big_n as f64).sqrt()));
                }
            }
        }
    }
}

fn apply_prim(state: &RecordedState, prim: Prim, adjoint: bool) -> RecordedState {
    let big_n = 1usize << state.n;
    let w = state.width();
    let mut out = RecordedState::zero(state.n, state.m);
    let mut images = Vec::new();
    for ((l, r), v) in &state.entries {
        for a in 0..big_n {
            let src = &v[a * w..(a + 1) * w];
            if src.iter().all(|c| *c == ZERO) {
                continue;
            }
            images.clear();
            basis_images(state.n, prim, adjoint, a, l, r, &mut images);
            for &(a2, ref l2, ref r2, c) in &images {
                let dst = out.slot(*l2, *r2);
                for (d, s) in dst[a2 * w..(a2 + 1) * w].iter_mut().zip(src) {
                    *d += s * c;
                }
            }
        }
    }
    out
}

fn sub(a: &RecordedState, b: &RecordedState) -> RecordedState {
    a.minus(b).expect("states from the same oracle share registers")
}

fn add(a: &RecordedState, b: &RecordedState) -> RecordedState {
    let mut out = a.clone();
    out.add_scaled(b, C64::new(1.0, 0.0))
        .expect("states from the same oracle share registers");
    out
}

/// Untruncated action of an oracle (or its adjoint).
pub fn apply_kind(kind: OracleKind, adjoint: bool, psi: &RecordedState) -> RecordedState {
    let p = |prim, adj, s: &RecordedState| apply_prim(s, prim, adj);
    match (kind, adjoint) {
        (OracleKind::Pr, _) => p(Prim::Pr, adjoint, psi),
        (OracleKind::VL, _) => p(Prim::VL, adjoint, psi),
        (OracleKind::VR, _) => p(Prim::VR, adjoint, psi),
        (OracleKind::WL, _) => p(Prim::WL, adjoint, psi),
        (OracleKind::WR, _) => p(Prim::WR, adjoint, psi),
        (OracleKind::EL, _) => p(Prim::EL, adjoint, psi),
        (OracleKind::ER, _) => p(Prim::ER, adjoint, psi),
        (OracleKind::W, false) => add(&p(Prim::WL, false, psi), &p(Prim::WR, true, psi)),
        (OracleKind::W, true) => add(&p(Prim::WL, true, psi), &p(Prim::WR, false, psi)),
        (OracleKind::V, false) => {
            let vr_proj = p(Prim::VR, false, &p(Prim::VR, true, psi));
            let left = p(Prim::VL, false, &sub(psi, &vr_proj));
            let lowered = p(Prim::VR, true, psi);
            let vl_proj = p(Prim::VL, false, &p(Prim::VL, true, &lowered));
            add(&left, &sub(&lowered, &vl_proj))
        }
        (OracleKind::V, true) => {
            let raised = p(Prim::VL, true, psi);
            let first = sub(&raised, &p(Prim::VR, false, &p(Prim::VR, true, &raised)));
            let vl_proj = p(Prim::VL, false, &p(Prim::VL, true, psi));
            let second = p(Prim::VR, false, &sub(psi, &vl_proj));
            add(&first, &second)
        }
    }
}

/// An oracle truncated to relation sectors `|L| + |R| ≤ t_max`:
/// `apply = M·Π_{≤t_max}` and `apply_adjoint = Π_{≤t_max}·M†`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleOperator {
    pub kind: OracleKind,
    pub n: u32,
    pub t_max: usize,
}

impl OracleOperator {
    pub fn new(kind: OracleKind, n: u32, t_max: usize) -> Result<Self> {
        if !(2..=8).contains(&n) {
            return Err(Error::Invalid(format!("recording oracles support 2 ≤ n ≤ 8, got {n}")));
        }
        if t_max + 1 >= MAX_PAIRS {
            return Err(Error::Invalid(format!("t_max = {t_max} exceeds the relation capacity")));
        }
        Ok(Self { kind, n, t_max })
    }

    pub fn apply(&self, psi: &RecordedState) -> RecordedState {
        apply_kind(self.kind, false, &psi.truncate(self.t_max))
    }

    pub fn apply_adjoint(&self, psi: &RecordedState) -> RecordedState {
        apply_kind(self.kind, true, psi).truncate(self.t_max)
    }
}

pub fn build_pr(n: u32, t_max: usize) -> Result<OracleOperator> {
    OracleOperator::new(OracleKind::Pr, n, t_max)
}

pub fn build_vl_vr(n: u32, t_max: usize) -> Result<(OracleOperator, OracleOperator)> {
    Ok((OracleOperator::new(OracleKind::VL, n, t_max)?, OracleOperator::new(OracleKind::VR, n, t_max)?))
}

pub fn build_v(n: u32, t_max: usize) -> Result<OracleOperator> {
    OracleOperator::new(OracleKind::V, n, t_max)
}

/// `(W, W^L, W^R)`.
pub fn build_w(n: u32, t_max: usize) -> Result<(OracleOperator, OracleOperator, OracleOperator)> {
    Ok((
        OracleOperator::new(OracleKind::W, n, t_max)?,
        OracleOperator::new(OracleKind::WL, n, t_max)?,
        OracleOperator::new(OracleKind::WR, n, t_max)?,
    ))
}

pub fn build_el_er(n: u32, t_max: usize) -> Result<(OracleOperator, OracleOperator)> {
    Ok((OracleOperator::new(OracleKind::EL, n, t_max)?, OracleOperator::new(OracleKind::ER, n, t_max)?))
}

/// `M_X^{⊗t} ⊗ M_Y^{⊗t}` applied to a relation state, expanded in the
/// relation basis. `None` stands for the identity.
pub fn tensor_power_on_relation(
    rel: &Relation,
    mx: Option<&DMatrix<C64>>,
    my: Option<&DMatrix<C64>>,
) -> Vec<(Relation, C64)> {
    let n = rel.n();
    let big_n = 1usize << n;
    let pairs = rel.pairs();
    let t = pairs.len();
    let g0 = rel.gamma();
    // Per-position candidate lists (new value, factor).
    let column = |m: Option<&DMatrix<C64>>, v: usize| -> Vec<(usize, C64)> {
        match m {
            None => vec![(v, C64::new(1.0, 0.0))],
            Some(m) => (0..big_n).map(|i| (i, m[(i, v)])).filter(|(_, c)| *c != ZERO).collect(),
        }
    };
    let xs: Vec<Vec<(usize, C64)>> = pairs.iter().map(|p| column(mx, p.0 as usize)).collect();
    let ys: Vec<Vec<(usize, C64)>> = pairs.iter().map(|p| column(my, p.1 as usize)).collect();
    let mut acc: IndexMap<Relation, C64> = IndexMap::new();
    fn rec(
        i: usize,
        cur: Relation,
        coeff: C64,
        xs: &[Vec<(usize, C64)>],
        ys: &[Vec<(usize, C64)>],
        acc: &mut IndexMap<Relation, C64>,
    ) {
        if i == xs.len() {
            *acc.entry(cur).or_insert(ZERO) += coeff;
            return;
        }
        for &(x, cx) in &xs[i] {
            for &(y, cy) in &ys[i] {
                rec(i + 1, cur.with_pair(x, y), coeff * cx * cy, xs, ys, acc);
            }
        }
    }
    if t == 0 {
        return vec![(*rel, C64::new(1.0, 0.0))];
    }
    rec(0, Relation::empty(n), C64::new(1.0, 0.0), &xs, &ys, &mut acc);
    acc.into_iter()
        .map(|(r, c)| (r, c * (r.gamma() / g0)))
        .filter(|(_, c)| *c != ZERO)
        .collect()
}

/// `Q[C,D] = (C ⊗ Dᵀ)^{⊗*}` on `L` and `(C̄ ⊗ D†)^{⊗*}` on `R`.
pub fn apply_q(psi: &RecordedState, c: &DMatrix<C64>, d: &DMatrix<C64>) -> RecordedState {
    let dt = d.transpose();
    let cbar = c.map(|z| z.conj());
    let ddag = d.adjoint();
    psi.map_relations(|l, r| {
        let ls = tensor_power_on_relation(l, Some(c), Some(&dt));
        let rs = tensor_power_on_relation(r, Some(&cbar), Some(&ddag));
        let mut out = Vec::with_capacity(ls.len() * rs.len());
        for (l2, a) in &ls {
            for (r2, b) in &rs {
                out.push((*l2, *r2, a * b));
            }
        }
        out
    })
}
