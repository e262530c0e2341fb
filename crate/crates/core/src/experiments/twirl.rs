//! Twirling identities: Haar twirl of `Π^eq`, permutation twirl of `Π^ffb`,
//! and the sampled twirl of `Π^DB − Π^{dom W}` (or `Π^{im W}`).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{Check, ExperimentReport};
use super::stats::{matrix_estimates, trial_rng, MatrixEstimate};
use super::{REF_HAAR_TWIRL, REF_PERMUTATION_TWIRL, REF_PSD_ORDERING, REF_SECTOR_TWIRL, REF_TWIRL_BOUND};
use crate::error::{resource, Error, Result};
use crate::kacwalk::{compose_dense, flip_first_bit, KacParams, Permutation, WalkSampler};
use crate::numerics::{haar_matrix, max_abs, norm2, StreamRng, C64, ZERO};
use crate::purified::{db_minus_domain, epr_operator, ubound_check, SectorLayout, Side};

const EPR_TAG: u32 = 0xE9;
const PERM_TAG: u32 = 0x9E;
const TWIRL_TAG: u32 = 0x7B;

/// `Π^EPR + (I − Π^EPR)/(N + 1)`.
pub fn haar_twirl_target(big_n: usize) -> DMatrix<C64> {
    let epr = epr_operator(big_n);
    let dim = big_n * big_n;
    &epr + (DMatrix::identity(dim, dim) - &epr) / C64::new((big_n + 1) as f64, 0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HaarTwirl {
    pub big_n: usize,
    pub samples: usize,
    pub seed: u64,
    /// Largest `|mean − target|` over entries.
    pub max_deviation: f64,
    /// Largest `|mean − target| − 5·stderr` (≤ 1e−12 passes).
    pub max_excess_over_5_stderr: f64,
    /// Largest per-sample `‖(U⊗Ū)†Π^EPR(U⊗Ū) − Π^EPR‖_max` over the checked samples.
    pub epr_invariance: f64,
    pub invariance_samples: usize,
}

/// Entry tolerance added to `5·stderr` for entries that vanish identically.
pub const ENTRY_FLOOR: f64 = 1e-12;

/// Sample mean of `(U⊗Ū)†Π^eq(U⊗Ū) = Σ_x w_x w_x†`, `w_x = U†|x⟩ ⊗ conj(U†|x⟩)`.
pub fn twirl_epr_estimate(big_n: usize, samples: usize, seed: u64, batches: usize) -> Result<(MatrixEstimate, HaarTwirl)> {
    if big_n > 16 {
        return Err(resource("Haar twirl dimension N", big_n as u128, 16));
    }
    let dim = big_n * big_n;
    let est = matrix_estimates(1, dim, samples, batches, seed, EPR_TAG, |rng, acc| {
        let u = haar_matrix(big_n, rng);
        let m = &mut acc[0];
        for x in 0..big_n {
            let ux: Vec<C64> = (0..big_n).map(|a| u[(x, a)].conj()).collect();
            let w: Vec<C64> = (0..dim).map(|i| ux[i / big_n] * ux[i % big_n].conj()).collect();
            for i in 0..dim {
                if w[i] == ZERO {
                    continue;
                }
                for j in 0..dim {
                    m[(i, j)] += w[i] * w[j].conj();
                }
            }
        }
        Ok(())
    })?
    .pop()
    .expect("one output");
    let target = haar_twirl_target(big_n);
    let epr = epr_operator(big_n);
    let checked = samples.min(100);
    let mut inv: f64 = 0.0;
    for s in 0..checked {
        let u = haar_matrix(big_n, &mut trial_rng(seed, EPR_TAG, s));
        let uu = crate::numerics::kron(&u, &u.map(|z| z.conj()));
        inv = inv.max(max_abs(&(uu.adjoint() * &epr * &uu - &epr)));
    }
    let summary = HaarTwirl {
        big_n,
        samples,
        seed,
        max_deviation: max_abs(&(&est.mean - &target)),
        max_excess_over_5_stderr: est.max_excess_deviation(&target, 5.0),
        epr_invariance: inv,
        invariance_samples: checked,
    };
    Ok((est, summary))
}

impl HaarTwirl {
    pub fn passed(&self) -> bool {
        self.max_excess_over_5_stderr <= ENTRY_FLOOR && self.epr_invariance <= 1e-10
    }

    pub fn checks(&self) -> Vec<Check> {
        vec![
            Check::upper(
                "entry_deviation_minus_5_stderr",
                self.max_excess_over_5_stderr,
                ENTRY_FLOOR,
                REF_HAAR_TWIRL,
                f64::INFINITY,
            ),
            Check::upper("epr_invariance_per_sample", self.epr_invariance, 1e-10, REF_HAAR_TWIRL, f64::INFINITY),
            Check::info("max_entry_deviation", self.max_deviation),
        ]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PermTwirl {
    pub big_n: usize,
    pub exact: bool,
    pub permutations: usize,
    /// Mean coefficient on `|z, y⟩⟨z, y|`, `z ≠ y`, for input `|0, 0̄⟩`.
    pub coefficient: f64,
    /// `max |twirl − (1/(N(N−1)))Σ_{z≠y}|z,y⟩⟨z,y||`.
    pub coefficient_deviation: f64,
    /// Operator norm of the twirled `Π^ffb`.
    pub ffb_norm: f64,
    /// `max |twirl(x = 0) − twirl(x = 1)|`.
    pub x_dependence: f64,
    /// `max_P |(P⊗P)†Π^eq(P⊗P) − Π^eq|`.
    pub eq_invariance: f64,
}

/// Permutation twirls, exhaustive for `N ≤ 5` and sampled above.
pub fn perm_twirl_checks(n: u32, samples: usize, seed: u64) -> Result<PermTwirl> {
    let big_n = 1usize << n;
    if big_n > 256 {
        return Err(resource("permutation twirl dimension N", big_n as u128, 256));
    }
    let exact = big_n <= 5;
    let perms: Vec<Permutation> = if exact {
        let count: u64 = (1..=big_n as u64).product();
        (0..count).map(|r| Permutation::from_rank(big_n, r)).collect()
    } else {
        (0..samples)
            .map(|s| Permutation::random(big_n, &mut trial_rng(seed, PERM_TAG, s)))
            .collect()
    };
    if perms.is_empty() {
        return Err(Error::Invalid("at least one permutation is required".into()));
    }
    let idx = |a: usize, b: usize| a * big_n + b;
    // All operators involved are diagonal in the computational basis.
    let mut twirl0 = vec![0.0; big_n * big_n];
    let mut twirl1 = vec![0.0; big_n * big_n];
    let mut ffb = vec![0.0; big_n * big_n];
    let mut eq_inv: f64 = 0.0;
    for p in &perms {
        let inv = p.inverse();
        let back = |a: usize, b: usize| idx(inv.apply(a), inv.apply(b));
        twirl0[back(0, flip_first_bit(0, n))] += 1.0;
        twirl1[back(1, flip_first_bit(1, n))] += 1.0;
        for x in 0..big_n {
            ffb[back(x, flip_first_bit(x, n))] += 1.0;
            for y in 0..big_n {
                let (a, b) = (inv.apply(x), inv.apply(y));
                if (x == y) != (a == b) {
                    eq_inv = 1.0;
                }
            }
        }
    }
    let k = perms.len() as f64;
    let coeff = 1.0 / (big_n * (big_n - 1)) as f64;
    let mut dev: f64 = 0.0;
    let mut off_sum = 0.0;
    for z in 0..big_n {
        for y in 0..big_n {
            let v = twirl0[idx(z, y)] / k;
            let want = if z != y { coeff } else { 0.0 };
            dev = dev.max((v - want).abs());
            if z != y {
                off_sum += v;
            }
        }
    }
    Ok(PermTwirl {
        big_n,
        exact,
        permutations: perms.len(),
        coefficient: off_sum / (big_n * (big_n - 1)) as f64,
        coefficient_deviation: dev,
        ffb_norm: ffb.iter().copied().fold(0.0, f64::max) / k,
        x_dependence: twirl0.iter().zip(&twirl1).map(|(a, b)| (a - b).abs() / k).fold(0.0, f64::max),
        eq_invariance: eq_inv,
    })
}

impl PermTwirl {
    pub fn checks(&self) -> Vec<Check> {
        let n = self.big_n as f64;
        let tol = if self.exact { 1e-12 } else { 5.0 / (self.permutations as f64).sqrt() };
        vec![
            Check::upper(
                "coefficient_error",
                (self.coefficient - 1.0 / (n * (n - 1.0))).abs(),
                tol,
                REF_PERMUTATION_TWIRL,
                f64::INFINITY,
            ),
            Check::upper("entry_deviation", self.coefficient_deviation, tol, REF_PERMUTATION_TWIRL, f64::INFINITY),
            Check::upper("ffb_norm_error", (self.ffb_norm - 1.0 / (n - 1.0)).abs(), tol, REF_PERMUTATION_TWIRL, f64::INFINITY),
            Check::upper("x_dependence", self.x_dependence, tol, REF_PERMUTATION_TWIRL, f64::INFINITY),
            Check::upper("eq_invariance", self.eq_invariance, 0.0, REF_PERMUTATION_TWIRL, f64::INFINITY),
        ]
    }
}

/// Distribution of the twirling pair `(C, D)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwirlDistribution {
    /// Independent Haar `C` and `D`.
    Haar,
    /// `C = P·C'` with `C'`, `D` walks (`T = 30n`, `d = 5n`) and `P` uniform.
    Walk,
}

/// Largest sector dimension handled by the sampled twirl.
pub const TWIRL_SECTOR_CAP: usize = 1024;
/// Cap on `samples × sector dimension`.
pub const TWIRL_WORK_CAP: u128 = 50_000_000;
const POWER_ITERS: usize = 500;
const POWER_TOL: f64 = 1e-7;
const CHUNK: usize = 64;
const NORM_BATCHES: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorTwirl {
    pub l: usize,
    pub r: usize,
    pub side: String,
    /// `‖E[U†(Π^DB − Π^{dom/im W})U]‖` on the sector.
    pub norm: f64,
    /// Spread of the norm over sample batches, `sd/√B`.
    pub stderr: f64,
    /// Per-sector bound from the triangle-inequality argument.
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwirlBound {
    pub n: u32,
    pub t: usize,
    pub samples: usize,
    pub seed: u64,
    pub distribution: TwirlDistribution,
    pub sectors: Vec<SectorTwirl>,
    /// Largest sector norm per side: `(dom, im)`.
    pub norm: (f64, f64),
    /// `16t·√(2t/N)`.
    pub bound: f64,
    /// Minimum eigenvalue of the PSD ordering on sector `(1, 0)`, per side.
    pub ordering_min_eigenvalue: Option<(f64, f64)>,
}

fn sector_bound(big_n: f64, l: usize, r: usize, side: Side) -> f64 {
    let (lf, rf) = (l as f64, r as f64);
    let tail = (2.0 * (lf + rf) / big_n).sqrt() * big_n / (big_n - 2.0 * (lf + rf) + 2.0);
    match side {
        Side::Dom => (4.0 * lf + rf) / (big_n - 1.0) + 7.0 * rf * tail,
        Side::Im => (lf + 4.0 * rf) / (big_n - 1.0) + 7.0 * lf * tail,
    }
}

fn sample_pair(n: u32, dist: TwirlDistribution, sampler: &Option<WalkSampler>, rng: &mut StreamRng) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let big_n = 1usize << n;
    match (dist, sampler) {
        (TwirlDistribution::Haar, _) => Ok((haar_matrix(big_n, rng), haar_matrix(big_n, rng))),
        (TwirlDistribution::Walk, Some(s)) => {
            let c_prime = compose_dense(&s.sample(rng), big_n)?;
            let d = compose_dense(&s.sample(rng), big_n)?;
            let p = Permutation::random(big_n, rng);
            let mut c = DMatrix::from_element(big_n, big_n, ZERO);
            for x in 0..big_n {
                c.set_row(p.apply(x), &c_prime.row(x));
            }
            Ok((c, d))
        }
        (TwirlDistribution::Walk, None) => Err(Error::Contract("walk sampler missing".into())),
    }
}

/// Rows of a sparse Hermitian matrix.
struct SparseRows(Vec<Vec<(usize, C64)>>);

impl SparseRows {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        Self(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).filter(|&j| m[(i, j)].norm() > 1e-15).map(|j| (j, m[(i, j)])).collect())
                .collect(),
        )
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.0.iter().map(|row| row.iter().map(|(j, z)| z * v[*j]).sum()).collect()
    }
}

/// Applies `op` to one base-`N` site of a tensor vector.
fn apply_site(v: &mut [C64], big_n: usize, sites: usize, site: usize, op: &DMatrix<C64>) {
    let stride = big_n.pow((sites - 1 - site) as u32);
    let block = stride * big_n;
    let mut buf = vec![ZERO; big_n];
    for base in (0..v.len()).step_by(block) {
        for off in 0..stride {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = v[base + off + k * stride];
            }
            for r in 0..big_n {
                v[base + off + r * stride] = (0..big_n).map(|k| op[(r, k)] * buf[k]).sum();
            }
        }
    }
}

/// Per-site operators of `C_A ⊗ Q[C,D]` (dom) or `D†_A ⊗ Q[C,D]` (im).
fn site_ops(lay: &SectorLayout, side: Side, c: &DMatrix<C64>, d: &DMatrix<C64>) -> Vec<(usize, DMatrix<C64>)> {
    let a_op = match side {
        Side::Dom => c.clone(),
        Side::Im => d.adjoint(),
    };
    let mut ops = vec![(lay.a(), a_op)];
    let (dt, cbar, ddag) = (d.transpose(), c.map(|z| z.conj()), d.adjoint());
    for i in 0..lay.l {
        ops.push((lay.lx(i), c.clone()));
        ops.push((lay.ly(i), dt.clone()));
    }
    for i in 0..lay.r {
        ops.push((lay.rx(i), cbar.clone()));
        ops.push((lay.ry(i), ddag.clone()));
    }
    ops
}

/// Largest eigenvalue of the PSD operator `v ↦ mean_s U_s† X U_s v` by power
/// iteration from a fixed start vector.
fn twirled_norm(lay: &SectorLayout, x: &SparseRows, ops: &[Vec<(usize, DMatrix<C64>)>]) -> f64 {
    let dim = lay.dim();
    let (big_n, sites) = (lay.big_n(), lay.sites());
    let apply = |v: &[C64]| -> Vec<C64> {
        let partials: Vec<Vec<C64>> = ops
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![ZERO; dim];
                for sample in chunk {
                    let mut u = v.to_vec();
                    for (site, op) in sample {
                        apply_site(&mut u, big_n, sites, *site, op);
                    }
                    let mut w = x.apply(&u);
                    for (site, op) in sample {
                        apply_site(&mut w, big_n, sites, *site, &op.adjoint());
                    }
                    acc.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
                }
                acc
            })
            .collect();
        let mut out = vec![ZERO; dim];
        for p in partials {
            out.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
        }
        let k = C64::new(ops.len() as f64, 0.0);
        out.iter_mut().for_each(|z| *z /= k);
        out
    };
    let mut v: Vec<C64> = (0..dim).map(|i| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05)).collect();
    let n0 = norm2(&v);
    v.iter_mut().for_each(|z| *z /= n0);
    let mut est = 0.0;
    for _ in 0..POWER_ITERS {
        let w = apply(&v);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let settled = (nw - est).abs() <= POWER_TOL * nw;
        est = nw;
        v = w.into_iter().map(|z| z / nw).collect();
        if settled {
            break;
        }
    }
    est
}

/// Sampled twirl of `Π^DB − Π^{dom W}` and `Π^DB − Π^{im W}`, sector by
/// sector for `l + r ≤ t`, compared with `16t·√(2t/N)` (flagged vacuous when ≥ 1).
pub fn twirl_bound_experiment(n: u32, t: usize, samples: usize, dist: TwirlDistribution, seed: u64) -> Result<TwirlBound> {
    if samples == 0 {
        return Err(Error::Invalid("at least one sample is required".into()));
    }
    let big_n = 1usize << n;
    let sampler = match dist {
        TwirlDistribution::Haar => None,
        TwirlDistribution::Walk => Some(WalkSampler::new(KacParams::new(n, 5 * n, 30 * n as usize)?)),
    };
    let pairs: Vec<(DMatrix<C64>, DMatrix<C64>)> = (0..samples)
        .into_par_iter()
        .map(|s| sample_pair(n, dist, &sampler, &mut trial_rng(seed, TWIRL_TAG, s)))
        .collect::<Result<_>>()?;
    let mut sectors = Vec::new();
    for total in 0..=t {
        for l in 0..=total {
            let lay = SectorLayout::new(n, l, total - l, true)?;
            let dim = lay.dim();
            if dim > TWIRL_SECTOR_CAP {
                return Err(resource("twirl sector dimension", dim as u128, TWIRL_SECTOR_CAP as u128));
            }
            let work = samples as u128 * dim as u128;
            if work > TWIRL_WORK_CAP {
                return Err(resource("twirl samples × sector dimension", work, TWIRL_WORK_CAP));
            }
            let sym = lay.symmetrizer();
            for side in [Side::Dom, Side::Im] {
                let x = SparseRows::from_dense(&(&sym * db_minus_domain(&lay, side) * &sym));
                let ops: Vec<Vec<(usize, DMatrix<C64>)>> =
                    pairs.iter().map(|(c, d)| site_ops(&lay, side, c, d)).collect();
                let norm = twirled_norm(&lay, &x, &ops);
                let batch = ops.len().div_ceil(NORM_BATCHES);
                let norms: Vec<f64> = if ops.len() >= 2 * NORM_BATCHES {
                    ops.chunks(batch).map(|c| twirled_norm(&lay, &x, c)).collect()
                } else {
                    Vec::new()
                };
                let stderr = if norms.len() > 1 {
                    let m = norms.iter().sum::<f64>() / norms.len() as f64;
                    let var = norms.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (norms.len() - 1) as f64;
                    (var / norms.len() as f64).sqrt()
                } else {
                    0.0
                };
                sectors.push(SectorTwirl {
                    l,
                    r: total - l,
                    side: format!("{side:?}").to_lowercase(),
                    norm,
                    stderr,
                    bound: sector_bound(big_n as f64, l, total - l, side),
                });
            }
        }
    }
    let side_max = |name: &str| sectors.iter().filter(|s| s.side == name).map(|s| s.norm).fold(0.0, f64::max);
    let ordering = if t >= 1 {
        let dom = ubound_check(n, 1, 0, Side::Dom)?;
        let im = ubound_check(n, 1, 0, Side::Im)?;
        Some((dom.min_eigenvalue, im.min_eigenvalue))
    } else {
        None
    };
    Ok(TwirlBound {
        n,
        t,
        samples,
        seed,
        distribution: dist,
        norm: (side_max("dom"), side_max("im")),
        bound: 16.0 * t as f64 * (2.0 * t as f64 / big_n as f64).sqrt(),
        sectors,
        ordering_min_eigenvalue: ordering,
    })
}

impl TwirlBound {
    pub fn checks(&self) -> Vec<Check> {
        let mut out = vec![
            Check::upper("dom_norm", self.norm.0, self.bound, REF_TWIRL_BOUND, 1.0),
            Check::upper("im_norm", self.norm.1, self.bound, REF_TWIRL_BOUND, 1.0),
        ];
        if self.t == 0 {
            out.push(Check::upper("empty_sector_norm", self.norm.0.max(self.norm.1), 1e-12, REF_TWIRL_BOUND, f64::INFINITY));
        }
        for s in &self.sectors {
            out.push(Check::upper(format!("sector_{}_{}_{}", s.l, s.r, s.side), s.norm, s.bound, REF_SECTOR_TWIRL, 1.0));
        }
        if let Some((dom, im)) = self.ordering_min_eigenvalue {
            out.push(Check::lower("ordering_1_0_dom_min_eigenvalue", dom, -1e-8, REF_PSD_ORDERING));
            out.push(Check::lower("ordering_1_0_im_min_eigenvalue", im, -1e-8, REF_PSD_ORDERING));
        }
        out
    }
}

/// Full twirl report: Haar twirl at `N = 2^n`, permutation twirl, sampled bound.
pub fn twirl_report(n: u32, samples: usize, t: usize, seed: u64, batches: usize) -> Result<ExperimentReport> {
    let config = serde_json::json!({ "n": n, "samples": samples, "t": t, "seed": seed, "batches": batches });
    let mut rep = ExperimentReport::new("twirl", Some(seed), config);
    let (_, haar) = twirl_epr_estimate(1 << n, samples, seed, batches)?;
    rep.checks.extend(haar.checks().into_iter().map(|mut c| {
        c.name = format!("haar/{}", c.name);
        c
    }));
    let perm = perm_twirl_checks(n, samples, seed)?;
    rep.checks.extend(perm.checks().into_iter().map(|mut c| {
        c.name = format!("perm/{}", c.name);
        c
    }));
    let bound_samples = samples.min(2000);
    let mut values = serde_json::json!({ "haar": haar, "perm": perm });
    match twirl_bound_experiment(n, t, bound_samples, TwirlDistribution::Haar, seed) {
        Ok(b) => {
            rep.checks.extend(b.checks().into_iter().map(|mut c| {
                c.name = format!("bound/{}", c.name);
                c
            }));
            values["bound"] = serde_json::to_value(&b)?;
        }
        Err(Error::Resource { what, needed, cap }) => {
            values["bound_skipped"] = serde_json::json!({ "what": what, "needed": needed.to_string(), "cap": cap.to_string() });
        }
        Err(e) => return Err(e),
    }
    rep.values = values;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_twirl_matches_target_at_n2() {
        let (est, s) = twirl_epr_estimate(2, 4000, 3, 40).unwrap();
        assert!(s.passed(), "{s:?}");
        assert!((est.mean.trace().re - 2.0).abs() < 1e-10);
        assert!(s.epr_invariance < 1e-12);
    }

    #[test]
    fn haar_twirl_target_has_trace_n() {
        for big_n in [2, 4, 8] {
            let t = haar_twirl_target(big_n);
            assert!((t.trace().re - big_n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_twirl_is_exact_at_n4() {
        let p = perm_twirl_checks(2, 0, 0).unwrap();
        assert!(p.exact);
        assert_eq!(p.permutations, 24);
        assert!((p.coefficient - 1.0 / 12.0).abs() < 1e-15);
        assert!((p.ffb_norm - 1.0 / 3.0).abs() < 1e-15);
        assert!(p.coefficient_deviation < 1e-15);
        assert_eq!(p.x_dependence, 0.0);
        assert_eq!(p.eq_invariance, 0.0);
    }

    #[test]
    fn sampled_permutation_twirl_is_close_at_n8() {
        let p = perm_twirl_checks(3, 20_000, 5).unwrap();
        assert!(!p.exact);
        assert!(p.checks().iter().all(|c| c.flag != super::super::report::Flag::Fail), "{p:?}");
    }

    #[test]
    fn empty_sector_twirl_vanishes() {
        let b = twirl_bound_experiment(2, 0, 10, TwirlDistribution::Haar, 1).unwrap();
        assert_eq!(b.norm, (0.0, 0.0));
    }

    #[test]
    fn single_pair_sectors_are_bounded_by_one() {
        for dist in [TwirlDistribution::Haar, TwirlDistribution::Walk] {
            let b = twirl_bound_experiment(2, 1, 64, dist, 2).unwrap();
            assert_eq!(b.sectors.len(), 6);
            for s in &b.sectors {
                assert!(s.norm >= 0.0 && s.norm <= 1.0 + 1e-9, "{s:?}");
            }
            let (dom, im) = b.ordering_min_eigenvalue.unwrap();
            assert!(dom >= -1e-8 && im >= -1e-8);
            assert!(b.checks().iter().all(|c| c.flag != super::super::report::Flag::Fail));
        }
    }

    #[test]
    fn site_application_matches_kronecker_product() {
        let mut rng = crate::numerics::stream_rng(4, 4);
        let ops: Vec<DMatrix<C64>> = (0..3).map(|_| haar_matrix(4, &mut rng)).collect();
        let full = crate::numerics::kron(&crate::numerics::kron(&ops[0], &ops[1]), &ops[2]);
        let v: Vec<C64> = (0..64).map(|i| C64::new(i as f64, -(i as f64) / 3.0)).collect();
        let mut w = v.clone();
        for (s, op) in ops.iter().enumerate() {
            apply_site(&mut w, 4, 3, s, op);
        }
        let want = &full * nalgebra::DVector::from_vec(v);
        let diff = w.iter().zip(want.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9);
    }
}
