use super::*;
use crate::numerics::{haar_matrix, max_abs, stream_rng, ONE};
use crate::oracles::AdversarySpec;
use crate::relations::{enumerate_relations, RelationClass};
use proptest::prelude::*;
use std::sync::OnceLock;

fn basis(d: u32) -> &'static PurifiedBasis {
    static B1: OnceLock<PurifiedBasis> = OnceLock::new();
    static B2: OnceLock<PurifiedBasis> = OnceLock::new();
    let cell = if d == 1 { &B1 } else { &B2 };
    cell.get_or_init(|| PurifiedBasis::new(2, d).unwrap())
}

fn rel(pairs: &[(usize, usize)]) -> Relation {
    Relation::new(2, pairs).unwrap()
}

#[test]
fn basis_sizes_and_cap() {
    assert_eq!(basis(1).dim(), 64 * 24);
    assert_eq!(basis(2).dim(), 4096 * 24);
    assert!(matches!(PurifiedBasis::new(3, 1), Err(Error::Resource { .. })));
}

#[test]
fn empty_phi_is_uniform() {
    let b = basis(2);
    let phi = build_phi(&Relation::empty(2), &Relation::empty(2), b).unwrap();
    let dense = phi.to_dense(b);
    let amp = 1.0 / (b.dim() as f64).sqrt();
    assert!(dense.iter().all(|v| (v.re - amp).abs() < 1e-15 && v.im.abs() < 1e-15));
    assert!((phi.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn two_sided_family_norms_at_d2() {
    let cm = build_compress(basis(2), 2, CompressKind::TwoSided).unwrap();
    assert_eq!(cm.len(), 161);
    let g = cm.gram();
    for i in 0..g.nrows() {
        assert!((g[(i, i)] - ONE).norm() < 1e-12);
    }
    // Off-diagonal overlaps come only from an L pair facing an R pair in one
    // block: E[cos 2θ]/(N − k + 1) with k = |L ∪ R|, largest at k = 2.
    assert!((cm.isometry_defect() - 0.25 / 2.0).abs() < 1e-12, "{}", cm.isometry_defect());
}

/// `⟨φ_{{(x,y)},{}}|φ_{{},{(x',y')}}⟩ = E[cos 2θ]/3 = 2^{−d}/3` when `y' = ȳ` and `x ≠ x'`.
#[test]
fn cross_side_overlap_closed_form() {
    let e = Relation::empty(2);
    for d in [1, 2] {
        let b = basis(d);
        let p = build_phi(&rel(&[(0, 0)]), &e, b).unwrap();
        let q = build_phi(&e, &rel(&[(1, 2)]), b).unwrap();
        let expected = 0.5f64.powi(d as i32) / 3.0;
        assert!((p.inner(&q) - C64::new(expected, 0.0)).norm() < 1e-12);
        // Same block, y' = y: item-3 moments cancel it.
        let q2 = build_phi(&e, &rel(&[(1, 0)]), b).unwrap();
        if d >= 2 {
            assert!(p.inner(&q2).norm() < 1e-12);
        }
    }
}

#[test]
fn compress_is_partial_isometry_on_forward_family() {
    let cm = build_compress(basis(2), 2, CompressKind::Forward).unwrap();
    assert!(cm.isometry_defect() < 1e-9);
    assert!(cm.idempotence_defect() < 1e-9);
}

#[test]
fn forward_family_is_orthogonal_at_d2() {
    let cm = build_compress(basis(2), 2, CompressKind::Forward).unwrap();
    let g = cm.gram();
    let off = DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| if i == j { ZERO } else { g[(i, j)] });
    assert!(max_abs(&off) < 1e-9);
}

#[test]
fn d1_gram_deviation_is_measurable() {
    let cm = build_compress(basis(1), 2, CompressKind::TwoSided).unwrap();
    let dev = cm.isometry_defect();
    assert!(dev.is_finite());
}

#[test]
fn inner_matches_dense_inner() {
    let b = basis(1);
    let p = build_phi(&rel(&[(0, 1)]), &rel(&[(2, 0)]), b).unwrap();
    let q = build_phi(&rel(&[(1, 1)]), &rel(&[(3, 2)]), b).unwrap();
    let dense = crate::numerics::inner(&p.to_dense(b), &q.to_dense(b));
    assert!((p.inner(&q) - dense).norm() < 1e-14);
}

#[test]
fn hpo_then_inverse_is_identity() {
    let b = basis(1);
    let mut rng = stream_rng(3, 0);
    let mut s = PurifiedState::initial(b, 1);
    s.apply_ab(&haar_matrix(8, &mut rng)).unwrap();
    let before = s.clone();
    apply_hpo(&mut s, b, false).unwrap();
    assert!((s.norm() - 1.0).abs() < 1e-12);
    apply_hpo(&mut s, b, true).unwrap();
    assert!(s.distance(&before) < 1e-12);
}

#[test]
fn hpo_basis_action() {
    let b = basis(1);
    let mut s = PurifiedState::initial(b, 0);
    apply_hpo(&mut s, b, false).unwrap();
    let hp = b.index(5, 7);
    let slice = &s.data()[hp * 4..hp * 4 + 4];
    let mut e = vec![ZERO; 4];
    e[0] = C64::new(1.0 / (b.dim() as f64).sqrt(), 0.0);
    let mut expected = e.clone();
    b.step(hp).apply_rows(&mut expected, 1, &mut Vec::new());
    for (x, y) in slice.iter().zip(&expected) {
        assert!((x - y).norm() < 1e-15);
    }
}

#[test]
fn hpo_action_on_empty_relations() {
    let b = basis(2);
    let e = Relation::empty(2);
    let mut s = PurifiedState::initial(b, 0);
    apply_hpo(&mut s, b, false).unwrap();
    for y in 0..4 {
        let phi = build_phi(&rel(&[(0, y)]), &e, b).unwrap();
        let amp = s.project_phi(&phi, b)[y];
        assert!((amp.re - 0.5).abs() < 1e-12 && amp.im.abs() < 1e-12);
    }
    for x in 0..4 {
        for inv in [false, true] {
            assert!(check_hpo_action(&e, &e, x, inv, b).unwrap() < 1e-12);
        }
    }
}

#[test]
fn hpo_action_amplitude_after_one_pair() {
    let b = basis(2);
    let l = rel(&[(0, 1)]);
    let e = Relation::empty(2);
    let phi = build_phi(&l, &e, b).unwrap();
    let mut s = PurifiedState::initial(b, 0);
    // Build |x = 2⟩|φ_L⟩ directly.
    let dense = phi.to_dense(b);
    let mut data = vec![ZERO; b.dim() * 4];
    for (hp, v) in dense.iter().enumerate() {
        data[hp * 4 + 2] = *v;
    }
    s.data = data;
    apply_hpo(&mut s, b, false).unwrap();
    for y in [0, 2] {
        let target = build_phi(&l.with_pair(2, y), &e, b).unwrap();
        let amp = s.project_phi(&target, b)[y];
        assert!((amp.norm() - 1.0 / 3f64.sqrt()).abs() < 1e-12, "y={y} amp={amp}");
    }
}

#[test]
fn hpo_action_holds_everywhere_at_d1() {
    assert!(max_hpo_action_residual(basis(1), 2).unwrap() < 1e-9);
}

#[test]
fn compress_maps_phi_to_label() {
    let b = basis(2);
    let cm = build_compress(b, 1, CompressKind::TwoSided).unwrap();
    let mut s = PurifiedState::initial(b, 0);
    let mut out = cm.apply(&s, b).unwrap();
    out.prune(1e-12);
    assert_eq!(out.len(), 1);
    let e = Relation::empty(2);
    assert!((out.get(&e, &e).unwrap()[0] - ONE).norm() < 1e-10);
    s.apply_ab(&haar_matrix(4, &mut stream_rng(1, 1))).unwrap();
    assert!((cm.apply(&s, b).unwrap().norm() - 1.0).abs() < 1e-10);
}

#[test]
fn compress_scaling_ratios() {
    assert_eq!(compress_ratio(2, 1), 1.0);
    assert!((compress_ratio(2, 2) - 1.5f64.sqrt()).abs() < 1e-15);
    let b = basis(2);
    for t in 1..=2 {
        let spec = AdversarySpec::forward(2, 1, t, 11).unwrap();
        let g = haar_matrix(4, &mut stream_rng(12, t as u64));
        let cs = check_compress_scaling(b, &spec, &g).unwrap();
        assert!(cs.prefactor_residual < 1e-9, "t={t} residual {}", cs.prefactor_residual);
        assert!((cs.ratio - cs.prefactor_ratio).abs() < 1e-9);
        assert!((cs.ratio * cs.expected - 1.0).abs() < 1e-9);
    }
}

#[test]
fn w_hpo_closeness_small_t() {
    let b = basis(2);
    // At t = 0 only the cross-side φ overlaps contribute.
    let c0 = check_w_hpo_closeness(b, 0).unwrap();
    assert!((c0.norm - 0.25).abs() < 1e-12, "{c0:?}");
    let c1 = check_w_hpo_closeness(b, 1).unwrap();
    assert!(c1.norm <= c1.bound && c1.adjoint_norm <= c1.bound, "{c1:?}");
    assert!((c1.gap_min - c1.expected_gap).abs() < 1e-6 && (c1.gap_max - c1.expected_gap).abs() < 1e-6);
    assert!((c1.expected_gap - 0.183503).abs() < 1e-6);
    let c2 = check_w_hpo_closeness(b, 2).unwrap();
    assert!(c2.norm <= c2.bound && c2.adjoint_norm <= c2.bound, "{c2:?}");
}

#[test]
fn moments() {
    for d in 1..=4 {
        let m = hf_block_moments(d).unwrap();
        assert!(HfMoments::max_abs(&m.item1) < 1e-12);
        assert!(HfMoments::max_abs(&m.item2) < 1e-12);
        if d >= 2 {
            assert!(HfMoments::max_abs(&m.item3) < 1e-12);
        }
    }
    assert!(HfMoments::max_abs(&hf_block_moments(1).unwrap().item3) > 0.1);
}

#[test]
fn purification_matches_sampling() {
    let b = basis(1);
    for dirs in [vec![false, false], vec![false, true]] {
        let spec = AdversarySpec::from_seed(2, 1, dirs, 21).unwrap();
        assert!(purification_equivalence(b, &spec).unwrap() < 1e-12);
    }
}

#[test]
fn closed_form_matches_run() {
    let spec = AdversarySpec::forward(2, 1, 2, 5).unwrap();
    assert!(hpo_closed_form(basis(1), &spec).unwrap() < 1e-10);
    assert!(hpo_closed_form(basis(2), &spec).unwrap() < 1e-10);
}

#[test]
fn dom_im_decomposition() {
    let check = build_dom_im_projectors(2, 2).unwrap();
    assert_eq!(check.sectors.len(), 6);
    assert!(check.max_residual() < 1e-9, "{check:?}");
}

#[test]
fn ubound_holds() {
    for (l, r) in [(1, 0), (0, 1), (1, 1)] {
        for side in [Side::Dom, Side::Im] {
            let c = ubound_check(2, l, r, side).unwrap();
            assert!(c.holds, "({l},{r}) {side:?}: {}", c.min_eigenvalue);
        }
    }
    // (1, 0) on the dom side is tight.
    assert!(ubound_check(2, 1, 0, Side::Dom).unwrap().min_eigenvalue.abs() < 1e-12);
}

#[test]
fn db_projector_factorizes() {
    assert!(check_db_factorization(2, 2).unwrap() < 1e-12);
}

#[test]
fn two_site_operators_are_projectors() {
    for m in [eq_operator(4), ffb_operator(2), epr_operator(4)] {
        assert!(max_abs(&(&m * &m - &m)) < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hpo_action_random_cases(seed in 0u64..1000, x in 0usize..4, inv: bool) {
        let rels = enumerate_relations(2, 1, RelationClass::All).unwrap();
        let l = rels[(seed % 16) as usize];
        let r = rels[((seed / 16) % 16) as usize];
        prop_assert!(check_hpo_action(&l, &r, x, inv, basis(1)).unwrap() < 1e-9);
    }

    #[test]
    fn phi_inner_is_hermitian(i in 0usize..16, j in 0usize..16) {
        let rels = enumerate_relations(2, 1, RelationClass::All).unwrap();
        let e = Relation::empty(2);
        let p = build_phi(&rels[i], &e, basis(1)).unwrap();
        let q = build_phi(&e, &rels[j], basis(1)).unwrap();
        prop_assert!((p.inner(&q) - q.inner(&p).conj()).norm() < 1e-14);
    }
}

