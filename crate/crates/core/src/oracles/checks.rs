//! Exact operator identities for the recording oracles, evaluated column by
//! column on the enumerated relation basis (no ancilla, `m = 0`).

use indexmap::IndexSet;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    apply_kind, apply_q, build_pr, run_adversary, tensor_power_on_relation, OracleKind, OracleOperator,
    Precomposed, RecordedState,
};
use super::adversary::AdversarySpec;
use crate::error::{resource, Error, Result};
use crate::numerics::{SparseColumns, C64};
use crate::relations::{enumerate_relations, Relation, RelationClass};

/// Basis label `|a⟩|L⟩|R⟩`.
pub type BasisKey = (usize, Relation, Relation);

/// Cap on enumerated domain columns.
pub const DOMAIN_CAP: u128 = 2_000_000;

/// All basis states `|a⟩|L⟩|R⟩` with `|L| + |R| ≤ t` and `L`, `R` in `class`.
pub fn basis_domain(n: u32, t: usize, class: RelationClass) -> Result<Vec<BasisKey>> {
    let big_n = 1usize << n;
    let by_size: Vec<Vec<Relation>> = (0..=t)
        .map(|k| enumerate_relations(n, k, class))
        .collect::<Result<_>>()?;
    let mut count: u128 = 0;
    for l in 0..=t {
        for r in 0..=t - l {
            count += (by_size[l].len() * by_size[r].len() * big_n) as u128;
        }
    }
    if count > DOMAIN_CAP {
        return Err(resource("oracle domain basis", count, DOMAIN_CAP));
    }
    let mut out = Vec::with_capacity(count as usize);
    for s in 0..=t {
        for l in 0..=s {
            for lrel in &by_size[l] {
                for rrel in &by_size[s - l] {
                    for a in 0..big_n {
                        out.push((a, *lrel, *rrel));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Operator norm of the linear map `e ↦ f(e)` restricted to the span of
/// `domain`. Columns are assembled sparsely and the norm is taken per
/// connected component.
pub fn sparse_residual_norm<F>(n: u32, domain: &[BasisKey], f: F) -> Result<f64>
where
    F: Fn(&RecordedState) -> RecordedState + Sync,
{
    let images: Vec<RecordedState> = domain
        .par_iter()
        .map(|&(a, l, r)| f(&RecordedState::basis(n, 0, a, l, r)))
        .collect();
    let mut rows: IndexSet<BasisKey> = IndexSet::new();
    let mut cols = Vec::with_capacity(images.len());
    for img in &images {
        let mut col = Vec::new();
        for ((l, r), v) in img.entries() {
            for (a, c) in v.iter().enumerate() {
                if c.norm() > 0.0 {
                    let (idx, _) = rows.insert_full((a, *l, *r));
                    col.push((idx, *c));
                }
            }
        }
        cols.push(col);
    }
    let mut m = SparseColumns::new(rows.len());
    for c in cols {
        m.push_column(c);
    }
    m.norm()
}

/// `‖G G† G − G‖` on the sectors `≤ t_max` of the oracle.
pub fn check_partial_isometry(op: &OracleOperator) -> Result<f64> {
    let domain = basis_domain(op.n, op.t_max, RelationClass::All)?;
    sparse_residual_norm(op.n, &domain, |e| {
        let g = op.apply(e);
        op.apply(&op.apply_adjoint(&g)).minus(&g).expect("same registers")
    })
}

/// Residuals of `W = V·Π^{dom W}`, `W† = V†·Π^{im W}` and `(Π^{dom W})² = Π^{dom W}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WRestriction {
    pub w_vs_v: f64,
    pub wdag_vs_vdag: f64,
    pub dom_idempotent: f64,
}

pub fn check_w_restriction(n: u32, t_max: usize) -> Result<WRestriction> {
    let domain = basis_domain(n, t_max, RelationClass::All)?;
    let w = |s: &RecordedState| apply_kind(OracleKind::W, false, s);
    let wd = |s: &RecordedState| apply_kind(OracleKind::W, true, s);
    let v = |s: &RecordedState| apply_kind(OracleKind::V, false, s);
    let vd = |s: &RecordedState| apply_kind(OracleKind::V, true, s);
    let w_vs_v = sparse_residual_norm(n, &domain, |e| w(e).minus(&v(&wd(&w(e)))).unwrap())?;
    let wdag_vs_vdag = sparse_residual_norm(n, &domain, |e| wd(e).minus(&vd(&w(&wd(e)))).unwrap())?;
    let dom_idempotent = sparse_residual_norm(n, &domain, |e| {
        let p = wd(&w(e));
        wd(&w(&p)).minus(&p).unwrap()
    })?;
    Ok(WRestriction {
        w_vs_v,
        wdag_vs_vdag,
        dom_idempotent,
    })
}

/// Projector onto `L ∪ R` distinct-block.
fn project_db(s: &RecordedState) -> RecordedState {
    s.map_relations(|l, r| {
        if l.union(r).is_db() {
            vec![(*l, *r, C64::new(1.0, 0.0))]
        } else {
            Vec::new()
        }
    })
}

/// `‖W†_{≤t} V_{≤t} − (Π^{DB}_{≤t} − (Π^{DB} − Π^{dom W})_{≤t})‖` and the
/// mirrored identity `‖W_{≤t}... ‖` with `V†`, `W` and `Π^{im W}`.
pub fn check_wdagv_identity(n: u32, t: usize) -> Result<(f64, f64)> {
    let domain = basis_domain(n, t, RelationClass::All)?;
    let w = OracleOperator::new(OracleKind::W, n, t)?;
    let v = OracleOperator::new(OracleKind::V, n, t)?;
    let forward = sparse_residual_norm(n, &domain, |e| {
        let lhs = w.apply_adjoint(&v.apply(e));
        let db = project_db(e);
        let dom = apply_kind(OracleKind::W, true, &apply_kind(OracleKind::W, false, e));
        let rhs = db.minus(&db.minus(&dom).unwrap()).unwrap();
        lhs.minus(&rhs).unwrap()
    })?;
    // (W_{≤t})† replaced by its mirror: Π_{≤t} W V† Π_{≤t} against Π^{im W} restricted.
    let mirrored = sparse_residual_norm(n, &domain, |e| {
        let lhs = apply_kind(OracleKind::W, false, &apply_kind(OracleKind::V, true, e)).truncate(t);
        let im = apply_kind(OracleKind::W, false, &apply_kind(OracleKind::W, true, e));
        lhs.minus(&im).unwrap()
    })?;
    Ok((forward, mirrored))
}

/// `‖|A_t^{PR·G}⟩ − (G^{⊗t} on X)|A_t^{PR}⟩‖` for a forward-only adversary.
pub fn check_right_invariance(g: &DMatrix<C64>, spec: &AdversarySpec) -> Result<f64> {
    if !spec.is_forward_only() {
        return Err(Error::Contract("right invariance needs forward-only queries".into()));
    }
    let pr = build_pr(spec.n(), spec.t().saturating_sub(1))?;
    let composed = Precomposed::new(&pr, g.clone())?;
    let lhs = run_adversary(&composed, spec)?;
    let plain = run_adversary(&pr, spec)?;
    let rhs = plain.map_relations(|l, r| {
        tensor_power_on_relation(l, Some(g), None)
            .into_iter()
            .map(|(l2, c)| (l2, *r, c))
            .collect()
    });
    lhs.distance(&rhs)
}

/// `‖V^L_{≤t} − E^L_{≤t}‖`.
pub fn v_minus_e_norm(n: u32, t: usize) -> Result<f64> {
    let domain = basis_domain(n, t, RelationClass::All)?;
    let vl = OracleOperator::new(OracleKind::VL, n, t)?;
    let el = OracleOperator::new(OracleKind::EL, n, t)?;
    sparse_residual_norm(n, &domain, |e| vl.apply(e).minus(&el.apply(e)).unwrap())
}

/// Cap on `N^{2(t+1)} · |domain|`, the work of expanding `Q[C,D]` images.
pub const INVARIANCE_CAP: u128 = 4_000_000_000;

/// `‖D·V_{≤t}·C·Q[C,D] − Q[C,D]·V_{≤t}‖`, or with `adjoint` set
/// `‖C†·(V†)_{≤t}·D†·Q[C,D] − Q[C,D]·(V†)_{≤t}‖`.
pub fn invariance_residual(c: &DMatrix<C64>, d: &DMatrix<C64>, n: u32, t: usize, adjoint: bool) -> Result<f64> {
    let big_n = 1u128 << n;
    let domain = basis_domain(n, t, RelationClass::All)?;
    let work = big_n.pow(2 * (t as u32 + 1)) * domain.len() as u128;
    if work > INVARIANCE_CAP {
        return Err(resource("invariance check work", work, INVARIANCE_CAP));
    }
    let (left, right) = if adjoint { (c.adjoint(), d.adjoint()) } else { (d.clone(), c.clone()) };
    let oracle = |s: &RecordedState| apply_kind(OracleKind::V, adjoint, &s.truncate(t));
    sparse_residual_norm(n, &domain, |e| {
        let mut inner = apply_q(e, c, d);
        inner.apply_a(&right).unwrap();
        let mut lhs = oracle(&inner);
        lhs.apply_a(&left).unwrap();
        let rhs = apply_q(&oracle(e), c, d);
        lhs.minus(&rhs).unwrap()
    })
}
