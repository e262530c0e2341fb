//! Exact checks of the purification-side identities at `n = 2`.

use indexmap::IndexMap;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{apply_hpo, build_phi, phi_gram, PhiState, PhiTerm, PurifiedBasis, PurifiedState};
use crate::error::{Error, Result};
use crate::kacwalk::{same_block, suffix, AngleTables, WalkUnitary};
use crate::numerics::{hermitian_eigenvalues, max_abs, C64, ONE, ZERO};
use crate::oracles::{apply_kind, pr_closed_form, run_adversary, AdversarySpec, OracleKind, RecordedState};
use crate::relations::{enumerate_relations, factorial, Relation, RelationClass};

/// `A^(t)` run against `HPO·G` (forward) or `G†·HPO†` (inverse) on `|0⟩|φ_{{}}⟩`.
pub fn run_hpo_adversary(basis: &PurifiedBasis, spec: &AdversarySpec, g: Option<&DMatrix<C64>>) -> Result<PurifiedState> {
    if spec.n() != basis.n() {
        return Err(Error::Contract("adversary and basis disagree on n".into()));
    }
    let gd = g.map(|g| g.adjoint());
    let mut state = PurifiedState::initial(basis, spec.m());
    for (u, &inv) in spec.unitaries().iter().zip(spec.directions()) {
        state.apply_ab(u)?;
        if inv {
            apply_hpo(&mut state, basis, true)?;
            if let Some(gd) = &gd {
                state.apply_a(gd)?;
            }
        } else {
            if let Some(g) = g {
                state.apply_a(g)?;
            }
            apply_hpo(&mut state, basis, false)?;
        }
    }
    Ok(state)
}

/// `‖a − b‖²` for two φ-like states given as scaled term lists sorted by `σ`.
fn term_distance_sqr(a: &[PhiTerm], sa: f64, b: &[PhiTerm], sb: f64) -> f64 {
    let dense_norm = |t: &PhiTerm, s: f64| t.dense().iter().map(|v| v.norm_sqr()).sum::<f64>() * s * s;
    let mut acc = 0.0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ka = a.get(i).map_or(usize::MAX, |t| t.sigma);
        let kb = b.get(j).map_or(usize::MAX, |t| t.sigma);
        if ka < kb {
            acc += dense_norm(&a[i], sa);
            i += 1;
        } else if kb < ka {
            acc += dense_norm(&b[j], sb);
            j += 1;
        } else {
            let (da, db) = (a[i].dense(), b[j].dense());
            acc += da.iter().zip(&db).map(|(p, q)| (p * sa - q * sb).norm_sqr()).sum::<f64>();
            i += 1;
            j += 1;
        }
    }
    acc
}

/// Residual of `HPO|x⟩|φ_{L,R}⟩ = (N−l−r)^{−1/2} Σ_y |y⟩|φ_{L+(x,y),R}⟩`, or for
/// `inverse` of `HPO†|x⟩|φ_{L,R}⟩ = (N−l−r)^{−1/2} Σ_{x'} |x'⟩|φ_{L,R+(x',x)}⟩`.
pub fn check_hpo_action(l: &Relation, r: &Relation, x: usize, inverse: bool, basis: &PurifiedBasis) -> Result<f64> {
    let n = basis.n();
    let big_n = 1usize << n;
    if l.len() + r.len() + 1 > big_n || l.len() + r.len() + 1 > crate::relations::MAX_PAIRS {
        return Err(Error::Contract("relation too long for the HPO action check".into()));
    }
    let phi = build_phi(l, r, basis)?;
    let c = 1.0 / ((big_n - l.len() - r.len()) as f64).sqrt();
    let mut acc = 0.0;
    for out in 0..big_n {
        // Component `out` of the A register after the query.
        let (y, xin, target) = if inverse { (x, out, build_phi(l, &r.with_pair(out, x), basis)?) } else { (out, x, build_phi(&l.with_pair(x, out), r, basis)?) };
        let lhs: Vec<PhiTerm> = phi
            .terms
            .iter()
            .filter_map(|t| {
                let z = basis.perms()[t.sigma].apply(xin);
                if !same_block(z, y, n) {
                    return None;
                }
                let mut factors = t.factors.clone();
                for (e, v) in factors[suffix(z, n)].iter_mut().enumerate() {
                    let el = basis.element(e, y, z);
                    *v *= if inverse { el.conj() } else { el };
                }
                Some(PhiTerm { sigma: t.sigma, factors })
            })
            .collect();
        acc += term_distance_sqr(&lhs, phi.scale, &target.terms, target.scale * c);
    }
    Ok(acc.sqrt())
}

/// Largest `check_hpo_action` residual over all relations with `l + r ≤ max_len`,
/// all `x`, and both directions.
pub fn max_hpo_action_residual(basis: &PurifiedBasis, max_len: usize) -> Result<f64> {
    let n = basis.n();
    let mut cases = Vec::new();
    for total in 0..=max_len {
        for l_len in 0..=total {
            let ls = enumerate_relations(n, l_len, RelationClass::All)?;
            let rs = enumerate_relations(n, total - l_len, RelationClass::All)?;
            for l in &ls {
                for r in &rs {
                    cases.push((*l, *r));
                }
            }
        }
    }
    let big_n = 1usize << n;
    let worst = cases
        .par_iter()
        .map(|(l, r)| {
            let mut w: f64 = 0.0;
            for x in 0..big_n {
                for inv in [false, true] {
                    w = w.max(check_hpo_action(l, r, x, inv, basis)?);
                }
            }
            Ok(w)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CompressKind {
    /// `Σ_R |R⟩⟨φ_R|` over `R ∈ ℜ^DB`.
    Forward,
    /// `Σ |L⟩|R⟩⟨φ_{L,R}|` over `L ∪ R ∈ ℜ^DB`.
    TwoSided,
}

/// `Compress` as a list of relation labels and the HP-relation states they read.
#[derive(Clone, Debug)]
pub struct CompressMap {
    pub kind: CompressKind,
    pub labels: Vec<(Relation, Relation)>,
    pub phis: Vec<PhiState>,
}

/// Labels of the DB family with `l + r ≤ t_max` (forward: `r = 0`).
fn db_labels(n: u32, t_max: usize, kind: CompressKind) -> Result<Vec<(Relation, Relation)>> {
    let mut out = Vec::new();
    for total in 0..=t_max {
        let l_range: Vec<usize> = match kind {
            CompressKind::Forward => vec![total],
            CompressKind::TwoSided => (0..=total).rev().collect(),
        };
        for l_len in l_range {
            let ls = enumerate_relations(n, l_len, RelationClass::Db)?;
            let rs = enumerate_relations(n, total - l_len, RelationClass::Db)?;
            for l in &ls {
                for r in &rs {
                    if l.union(r).is_db() {
                        out.push((*l, *r));
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn build_compress(basis: &PurifiedBasis, t_max: usize, kind: CompressKind) -> Result<CompressMap> {
    let t_cap = t_max.min(1 << (basis.n() - 1));
    let labels = db_labels(basis.n(), t_cap, kind)?;
    let phis = labels
        .par_iter()
        .map(|(l, r)| build_phi(l, r, basis))
        .collect::<Result<Vec<_>>>()?;
    Ok(CompressMap { kind, labels, phis })
}

impl CompressMap {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `Compress·Compress†` in the label basis, i.e. the φ Gram matrix.
    pub fn gram(&self) -> DMatrix<C64> {
        phi_gram(&self.phis)
    }

    /// `max |G − I|`: zero iff `Compress·Compress†` is the identity on the labels.
    pub fn isometry_defect(&self) -> f64 {
        let g = self.gram();
        max_abs(&(g - DMatrix::identity(self.len(), self.len())))
    }

    /// `max |λ(λ − 1)|` over eigenvalues of the Gram matrix: zero iff
    /// `Compress†·Compress` is idempotent.
    pub fn idempotence_defect(&self) -> f64 {
        hermitian_eigenvalues(&self.gram())
            .into_iter()
            .map(|l| (l * (l - 1.0)).abs())
            .fold(0.0, f64::max)
    }

    /// Applies `Compress` to a purified state.
    pub fn apply(&self, state: &PurifiedState, basis: &PurifiedBasis) -> Result<RecordedState> {
        let n = basis.n();
        let m = state.m();
        let mut out = RecordedState::zero(n, m);
        for ((l, r), phi) in self.labels.iter().zip(&self.phis) {
            let v = state.project_phi(phi, basis);
            for (ab, c) in v.into_iter().enumerate() {
                if c != ZERO {
                    out.add_at(*l, *r, ab, c);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CompressScaling {
    pub t: usize,
    /// `‖Compress·Π̃^(t)·A^{HPO·G}‖ / ‖Π_X^(t)·A^{PR·G}‖`.
    pub ratio: f64,
    /// `ρ_t` as stated for the identity.
    pub expected: f64,
    /// Residual of the identity with `ρ_t`.
    pub residual: f64,
    /// Ratio of the two closed-form prefactors, `√(Π_{i<t} (N−2i)/(N−i))`.
    pub prefactor_ratio: f64,
    /// Residual of the identity with the prefactor ratio.
    pub prefactor_residual: f64,
}

/// `ρ_t = √(Π_{i<t} (N−i)/(N−2i))`.
pub fn compress_ratio(n: u32, t: usize) -> f64 {
    let big_n = (1usize << n) as f64;
    (0..t).map(|i| (big_n - i as f64) / (big_n - 2.0 * i as f64)).product::<f64>().sqrt()
}

/// Compares `Compress·Π̃^(t)` of the HPO run with `ρ_t·Π_X^(t)` of the PR run.
pub fn check_compress_scaling(basis: &PurifiedBasis, spec: &AdversarySpec, g: &DMatrix<C64>) -> Result<CompressScaling> {
    if !spec.is_forward_only() {
        return Err(Error::Contract("compress scaling covers forward queries only".into()));
    }
    let n = basis.n();
    let t = spec.t();
    if 2 * t > 1 << n {
        return Err(Error::Contract("t exceeds the number of blocks".into()));
    }
    let run = run_hpo_adversary(basis, spec, Some(g))?;
    let labels: Vec<(Relation, Relation)> = enumerate_relations(n, t, RelationClass::Db)?
        .into_iter()
        .map(|r| (r, Relation::empty(n)))
        .collect();
    let phis = labels
        .par_iter()
        .map(|(l, r)| build_phi(l, r, basis))
        .collect::<Result<Vec<_>>>()?;
    let cmap = CompressMap {
        kind: CompressKind::Forward,
        labels,
        phis,
    };
    let lhs = cmap.apply(&run, basis)?;
    let pr = pr_closed_form(spec, g)?;
    let filtered = pr.map_relations(|l, r| if l.is_db() { vec![(*l, *r, ONE)] } else { Vec::new() });
    let expected = compress_ratio(n, t);
    let prefactor_ratio = 1.0 / expected;
    let residual_with = |c: f64| -> Result<f64> {
        let mut scaled = RecordedState::zero(n, spec.m());
        scaled.add_scaled(&filtered, C64::new(c, 0.0))?;
        lhs.distance(&scaled)
    };
    let denom = filtered.norm();
    Ok(CompressScaling {
        t,
        ratio: if denom > 0.0 { lhs.norm() / denom } else { f64::NAN },
        expected,
        residual: residual_with(expected)?,
        prefactor_ratio,
        prefactor_residual: residual_with(prefactor_ratio)?,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WHpoCloseness {
    pub t: usize,
    /// `‖W_{≤t} − Compress·HPO·Compress†·Π^{dom W}·Π_{≤t}‖`.
    pub norm: f64,
    /// `‖W†_{≤t} − Compress·HPO†·Compress†·Π^{im W}·Π_{≤t}‖`.
    pub adjoint_norm: f64,
    pub bound: f64,
    /// Extremes of `1 − |X|/|W|` over the `W^L` entries leaving sector 1.
    pub gap_min: f64,
    pub gap_max: f64,
    /// `1 − √(1 − k/(N−k))` at `k = 1`.
    pub expected_gap: f64,
}

type Key = (usize, Relation, Relation);

/// `⟨a, φ_{S,T}| HPO |x, φ_{L,R}⟩` from the block factorization.
fn hpo_element(basis: &PurifiedBasis, row: (usize, &PhiState), col: (usize, &PhiState), adjoint: bool) -> C64 {
    let n = basis.n();
    let ((a, ps), (x, pl)) = (row, col);
    let mut acc = ZERO;
    let (mut i, mut j) = (0, 0);
    while i < ps.terms.len() && j < pl.terms.len() {
        let (ts, tl) = (&ps.terms[i], &pl.terms[j]);
        match ts.sigma.cmp(&tl.sigma) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let sigma = &basis.perms()[ts.sigma];
                // Forward: a = H_f σ(x). Adjoint: σ(a) ∈ blk(x), amplitude conj⟨x|H_f|σ(a)⟩.
                let (y, z) = if adjoint { (x, sigma.apply(a)) } else { (a, sigma.apply(x)) };
                if same_block(y, z, n) {
                    let s = suffix(z, n);
                    let mut prod = ONE;
                    for (b, (fs, fl)) in ts.factors.iter().zip(&tl.factors).enumerate() {
                        let sum: C64 = if b == s {
                            fs.iter()
                                .zip(fl)
                                .enumerate()
                                .map(|(e, (p, q))| {
                                    let el = basis.element(e, y, z);
                                    p.conj() * q * if adjoint { el.conj() } else { el }
                                })
                                .sum()
                        } else {
                            fs.iter().zip(fl).map(|(p, q)| p.conj() * q).sum()
                        };
                        prod *= sum;
                    }
                    acc += prod;
                }
                i += 1;
                j += 1;
            }
        }
    }
    acc * ps.scale * pl.scale
}

/// Dense matrix of an oracle operator over `keys`, keeping columns with `l + r ≤ t`.
fn oracle_matrix<F>(n: u32, keys: &IndexMap<Key, usize>, t: usize, f: F) -> Result<DMatrix<C64>>
where
    F: Fn(&RecordedState) -> RecordedState + Sync,
{
    let k = keys.len();
    let key_list: Vec<Key> = keys.keys().copied().collect();
    let cols: Vec<Vec<(usize, C64)>> = key_list
        .par_iter()
        .map(|(x, l, r)| {
            if l.len() + r.len() > t {
                return Ok(Vec::new());
            }
            let out = f(&RecordedState::basis(n, 0, *x, *l, *r));
            let mut col = Vec::new();
            for ((ol, or), v) in out.entries() {
                for (a, c) in v.iter().enumerate() {
                    if c.norm() > 1e-15 {
                        let idx = keys.get(&(a, *ol, *or)).ok_or_else(|| {
                            Error::Contract("oracle output leaves the enumerated DB basis".into())
                        })?;
                        col.push((*idx, *c));
                    }
                }
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(k, k);
    for (j, col) in cols.into_iter().enumerate() {
        for (i, c) in col {
            m[(i, j)] += c;
        }
    }
    Ok(m)
}

/// Measures the distance between `W` and the compressed purified oracle on
/// the DB basis states with `l + r ≤ t`.
pub fn check_w_hpo_closeness(basis: &PurifiedBasis, t: usize) -> Result<WHpoCloseness> {
    let n = basis.n();
    let big_n = 1usize << n;
    let k_max = (t + 1).min(big_n / 2);
    let labels = db_labels(n, k_max, CompressKind::TwoSided)?;
    let phis = labels
        .par_iter()
        .map(|(l, r)| build_phi(l, r, basis))
        .collect::<Result<Vec<_>>>()?;
    let mut keys: IndexMap<Key, usize> = IndexMap::new();
    let mut key_phi = Vec::new();
    for (li, (l, r)) in labels.iter().enumerate() {
        for a in 0..big_n {
            let idx = keys.len();
            keys.insert((a, *l, *r), idx);
            key_phi.push(li);
        }
    }
    let k = keys.len();
    let key_list: Vec<Key> = keys.keys().copied().collect();
    let in_t: Vec<bool> = key_list.iter().map(|(_, l, r)| l.len() + r.len() <= t).collect();

    let m_of = |adjoint: bool| -> DMatrix<C64> {
        let cols: Vec<Vec<C64>> = (0..k)
            .into_par_iter()
            .map(|j| {
                let (x, _, _) = key_list[j];
                (0..k)
                    .map(|i| {
                        let (a, _, _) = key_list[i];
                        hpo_element(basis, (a, &phis[key_phi[i]]), (x, &phis[key_phi[j]]), adjoint)
                    })
                    .collect()
            })
            .collect();
        DMatrix::from_fn(k, k, |i, j| cols[j][i])
    };
    let m_fwd = m_of(false);
    let m_adj = m_of(true);

    let w = oracle_matrix(n, &keys, t, |s| apply_kind(OracleKind::W, false, s))?;
    let wd = oracle_matrix(n, &keys, t, |s| apply_kind(OracleKind::W, true, s))?;
    let p_dom = oracle_matrix(n, &keys, t, |s| apply_kind(OracleKind::W, true, &apply_kind(OracleKind::W, false, s)))?;
    let p_im = oracle_matrix(n, &keys, t, |s| apply_kind(OracleKind::W, false, &apply_kind(OracleKind::W, true, s)))?;

    let x = &m_fwd * &p_dom;
    let y = &m_adj * &p_im;
    let norm = crate::numerics::dense_spectral_norm(&(&w - &x));
    let adjoint_norm = crate::numerics::dense_spectral_norm(&(&wd - &y));

    let (mut gap_min, mut gap_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..k {
        let (xa, l, r) = key_list[j];
        if !in_t[j] || l.len() + r.len() != 1 || l.union(&r).in_bdom(xa) {
            continue;
        }
        for i in 0..k {
            let (_, sl, sr) = key_list[i];
            if sl.len() + sr.len() == 2 && w[(i, j)].norm() > 1e-12 {
                let gap = 1.0 - x[(i, j)].norm() / w[(i, j)].norm();
                gap_min = gap_min.min(gap);
                gap_max = gap_max.max(gap);
            }
        }
    }
    let kf = 1.0;
    let nf = big_n as f64;
    Ok(WHpoCloseness {
        t,
        norm,
        adjoint_norm,
        bound: 2.0 * t as f64 / (nf - t as f64),
        gap_min: if gap_min.is_finite() { gap_min } else { f64::NAN },
        gap_max: if gap_max.is_finite() { gap_max } else { f64::NAN },
        expected_gap: 1.0 - (1.0 - kf / (nf - kf)).sqrt(),
    })
}

/// Exact averages over all `2^{3d}` values of one table entry.
#[derive(Clone, Debug, Serialize)]
pub struct HfMoments {
    pub d: u32,
    /// `E⟨x|H|x⟩`, `E⟨x|H|x̄⟩` for the first bit of `x` equal to 0 then 1.
    pub item1: Vec<C64>,
    /// `E[conj⟨x|H|x⟩·⟨x|H|x̄⟩]` for first bit 0 then 1.
    pub item2: Vec<C64>,
    /// `E[conj⟨x|H|x⟩·⟨x̄|H|x̄⟩]`, `E[conj⟨x|H|x̄⟩·⟨x̄|H|x⟩]` for first bit 0 then 1.
    pub item3: Vec<C64>,
}

impl HfMoments {
    pub fn max_abs(items: &[C64]) -> f64 {
        items.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn hf_block_moments(d: u32) -> Result<HfMoments> {
    if !(1..=10).contains(&d) {
        return Err(Error::Invalid(format!("moment table needs 1 ≤ d ≤ 10 (got {d})")));
    }
    let tables = AngleTables::new(d);
    let count = 1u64 << (3 * d);
    let mut item1 = vec![ZERO; 4];
    let mut item2 = vec![ZERO; 2];
    let mut item3 = vec![ZERO; 4];
    for e in 0..count {
        let u = tables.rotation(e);
        for b in 0..2 {
            let nb = 1 - b;
            item1[2 * b] += u[b][b];
            item1[2 * b + 1] += u[b][nb];
            item2[b] += u[b][b].conj() * u[b][nb];
            item3[2 * b] += u[b][b].conj() * u[nb][nb];
            item3[2 * b + 1] += u[b][nb].conj() * u[nb][b];
        }
    }
    let scale = 1.0 / count as f64;
    for v in item1.iter_mut().chain(item2.iter_mut()).chain(item3.iter_mut()) {
        *v *= scale;
    }
    Ok(HfMoments { d, item1, item2, item3 })
}

/// `max |E_{f,σ} |ψ_{f,σ}⟩⟨ψ_{f,σ}| − Tr_{HP} |ψ^{HPO}⟩⟨ψ^{HPO}||` for one query sequence.
pub fn purification_equivalence(basis: &PurifiedBasis, spec: &AdversarySpec) -> Result<f64> {
    let purified = run_hpo_adversary(basis, spec, None)?.reduced_density();
    let n = basis.n();
    let d = basis.d();
    let dim = purified.nrows();
    let sampled = (0..basis.dim())
        .into_par_iter()
        .map(|hp| {
            let walk = WalkUnitary::new(n, d, vec![basis.step(hp)])?;
            Ok::<_, Error>(run_adversary(&walk, spec)?.reduced_density())
        })
        .try_reduce(|| DMatrix::zeros(dim, dim), |a, b| Ok(a + b))?;
    let averaged = sampled / C64::new(basis.dim() as f64, 0.0);
    Ok(max_abs(&(averaged - purified)))
}

/// Residual between the HPO run and
/// `√((N−t)!/N!) Σ_{x⃗,y⃗} Π_i(|y_i⟩⟨x_i| A^(i))|0⟩ ⊗ |φ_{{(x_i,y_i)}}⟩`.
pub fn hpo_closed_form(basis: &PurifiedBasis, spec: &AdversarySpec) -> Result<f64> {
    if !spec.is_forward_only() {
        return Err(Error::Contract("closed form covers forward queries only".into()));
    }
    let n = basis.n();
    let big_n = 1usize << n;
    let t = spec.t();
    if t > big_n {
        return Err(Error::Contract("t exceeds N".into()));
    }
    let run = run_hpo_adversary(basis, spec, None)?;
    let len = run.slice_len();
    let w = len / big_n;
    let scale = (factorial(big_n - t) / factorial(big_n)).sqrt();

    // Branches (relation, A⊗B vector) after each query.
    let mut v0 = vec![ZERO; len];
    v0[0] = ONE;
    let mut branches = vec![(Relation::empty(n), v0)];
    for u in spec.unitaries() {
        let mut next = Vec::new();
        for (rel, v) in branches {
            let moved = u * nalgebra::DVector::from_column_slice(&v);
            for x in 0..big_n {
                let row = &moved.as_slice()[x * w..(x + 1) * w];
                if row.iter().all(|c| *c == ZERO) {
                    continue;
                }
                for y in 0..big_n {
                    let mut nv = vec![ZERO; len];
                    nv[y * w..(y + 1) * w].copy_from_slice(row);
                    next.push((rel.with_pair(x, y), nv));
                }
            }
        }
        branches = next;
    }
    let mut closed = vec![ZERO; run.data().len()];
    for (rel, v) in &branches {
        let phi = build_phi(rel, &Relation::empty(n), basis)?;
        for term in &phi.terms {
            for (f, amp) in term.dense().into_iter().enumerate() {
                let c = amp * phi.scale * scale;
                if c == ZERO {
                    continue;
                }
                let hp = basis.index(f, term.sigma);
                for (o, a) in closed[hp * len..(hp + 1) * len].iter_mut().zip(v) {
                    *o += c * a;
                }
            }
        }
    }
    Ok(closed
        .iter()
        .zip(run.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}
