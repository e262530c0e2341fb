//! Exact views of a forward-only adversary against `PR · G`, summed relation
//! by relation without materializing the recorded state.
//!
//! With `M_i = (G ⊗ I_B)·A^(i)` the closed form gives, for an ordered tuple
//! `((x_1, y_1), …, (x_t, y_t))` with outputs in distinct blocks, the AB vector
//! `|y_t⟩ ⊗ k_t` where `k_1 = ⟨x_1|M_1|0⟩` and `k_{i+1} = ⟨x_{i+1}|M_{i+1}|y_i⟩ k_i`
//! (blocks of size `2^m`). The coefficient of relation `|R⟩` is the sum of these
//! vectors over the orderings of `R`, scaled by `Π_i (N − 2i)^{-1/2}`.

use nalgebra::DMatrix;

use crate::error::{resource, Error, Result};
use crate::kacwalk::suffix;
use crate::numerics::{kron, C64, ZERO};
use crate::oracles::AdversarySpec;

/// Cap on the number of canonical relations visited.
pub const RELATION_VISIT_CAP: u128 = 50_000_000;

pub struct PrChain {
    n: u32,
    big_n: usize,
    w: usize,
    t: usize,
    mats: Vec<DMatrix<C64>>,
    scale_sqr: f64,
    orders: Vec<Vec<usize>>,
}

/// Coefficient of one relation: `(final y, 2^m-vector)` per distinct last output.
pub type RelationCoefficient = Vec<(usize, Vec<C64>)>;

impl PrChain {
    pub fn new(spec: &AdversarySpec, g: &DMatrix<C64>) -> Result<Self> {
        if !spec.is_forward_only() {
            return Err(Error::Contract("the exact PR view covers forward queries only".into()));
        }
        let n = spec.n();
        let big_n = 1usize << n;
        let t = spec.t();
        if t > big_n / 2 {
            return Err(Error::Invalid(format!("{t} queries exceed the {} blocks", big_n / 2)));
        }
        if g.nrows() != big_n || g.ncols() != big_n {
            return Err(Error::Dimension {
                expected: big_n,
                got: g.nrows(),
            });
        }
        let w = 1usize << spec.m();
        let lift = kron(g, &DMatrix::identity(w, w));
        let mats = spec.unitaries().iter().map(|a| &lift * a).collect();
        let scale_sqr = (0..t).map(|i| 1.0 / (big_n - 2 * i) as f64).product();
        let visits = canonical_count(big_n, t);
        if visits > RELATION_VISIT_CAP {
            return Err(resource("exact PR relations", visits, RELATION_VISIT_CAP));
        }
        Ok(Self {
            n,
            big_n,
            w,
            t,
            mats,
            scale_sqr,
            orders: orderings(t),
        })
    }

    pub fn ab_dim(&self) -> usize {
        self.big_n * self.w
    }

    /// `Π_i 1/(N − 2i)`.
    pub fn scale_sqr(&self) -> f64 {
        self.scale_sqr
    }

    /// Visits every relation with outputs in distinct blocks, as inputs
    /// `xs` paired with strictly increasing outputs `ys`, together with its
    /// unscaled coefficient. With `x_db_only` only relations whose inputs also
    /// lie in distinct blocks are visited.
    pub fn for_each_relation<F>(&self, x_db_only: bool, mut visit: F)
    where
        F: FnMut(&[usize], &[usize], &RelationCoefficient),
    {
        let mut xs = vec![0; self.t];
        let mut ys = vec![0; self.t];
        let mut coeff: RelationCoefficient = Vec::with_capacity(self.t);
        self.rec_y(0, x_db_only, &mut xs, &mut ys, &mut coeff, &mut visit);
    }

    fn rec_y<F>(
        &self,
        i: usize,
        x_db_only: bool,
        xs: &mut [usize],
        ys: &mut [usize],
        coeff: &mut RelationCoefficient,
        visit: &mut F,
    ) where
        F: FnMut(&[usize], &[usize], &RelationCoefficient),
    {
        if i == self.t {
            self.rec_x(0, x_db_only, xs, ys, coeff, visit);
            return;
        }
        let start = if i == 0 { 0 } else { ys[i - 1] + 1 };
        for y in start..self.big_n {
            let b = suffix(y, self.n);
            if ys[..i].iter().any(|&p| suffix(p, self.n) == b) {
                continue;
            }
            ys[i] = y;
            self.rec_y(i + 1, x_db_only, xs, ys, coeff, visit);
        }
    }

    fn rec_x<F>(
        &self,
        i: usize,
        x_db_only: bool,
        xs: &mut [usize],
        ys: &[usize],
        coeff: &mut RelationCoefficient,
        visit: &mut F,
    ) where
        F: FnMut(&[usize], &[usize], &RelationCoefficient),
    {
        if i == self.t {
            self.coefficient(xs, ys, coeff);
            visit(xs, ys, coeff);
            return;
        }
        for x in 0..self.big_n {
            if x_db_only && xs[..i].iter().any(|&p| suffix(p, self.n) == suffix(x, self.n)) {
                continue;
            }
            xs[i] = x;
            self.rec_x(i + 1, x_db_only, xs, ys, coeff, visit);
        }
    }

    fn coefficient(&self, xs: &[usize], ys: &[usize], out: &mut RelationCoefficient) {
        out.clear();
        let w = self.w;
        for order in &self.orders {
            let first = order[0];
            let m0 = &self.mats[0];
            let mut k: Vec<C64> = (0..w).map(|b| m0[(xs[first] * w + b, 0)]).collect();
            for (step, pair) in order.windows(2).enumerate() {
                let m = &self.mats[step + 1];
                let (row, col) = (xs[pair[1]] * w, ys[pair[0]] * w);
                k = (0..w)
                    .map(|a| (0..w).map(|b| m[(row + a, col + b)] * k[b]).sum())
                    .collect();
            }
            let last = ys[*order.last().expect("t ≥ 1")];
            match out.iter_mut().find(|(y, _)| *y == last) {
                Some((_, acc)) => acc.iter_mut().zip(&k).for_each(|(a, b)| *a += b),
                None => out.push((last, k)),
            }
        }
    }

    /// Reduced AB state `Tr_relations |ψ⟩⟨ψ|` of the final state.
    pub fn ab_density(&self) -> DMatrix<C64> {
        let w = self.w;
        let dim = self.ab_dim();
        if self.t == 0 {
            let mut m = DMatrix::from_element(dim, dim, ZERO);
            m[(0, 0)] = C64::new(1.0, 0.0);
            return m;
        }
        let mut rho = DMatrix::from_element(dim, dim, ZERO);
        self.for_each_relation(false, |_, _, coeff| {
            for (ya, ka) in coeff {
                for (yb, kb) in coeff {
                    for (i, a) in ka.iter().enumerate() {
                        for (j, b) in kb.iter().enumerate() {
                            rho[(ya * w + i, yb * w + j)] += a * b.conj();
                        }
                    }
                }
            }
        });
        rho * C64::new(self.scale_sqr, 0.0)
    }

    /// `‖Π_X ψ‖²`: weight on relations whose inputs lie in distinct blocks.
    pub fn x_db_weight(&self) -> f64 {
        if self.t == 0 {
            return 1.0;
        }
        let mut total = 0.0;
        self.for_each_relation(true, |_, _, coeff| {
            total += coeff.iter().flat_map(|(_, k)| k.iter()).map(|z| z.norm_sqr()).sum::<f64>();
        });
        total * self.scale_sqr
    }
}

/// `C(N/2, t)·2^t·N^t`: canonical output sets times input tuples.
fn canonical_count(big_n: usize, t: usize) -> u128 {
    let blocks = (big_n / 2) as u128;
    let mut c: u128 = 1;
    for i in 0..t as u128 {
        c = c * (blocks - i) / (i + 1);
    }
    c * (1u128 << t) * (big_n as u128).pow(t as u32)
}

fn orderings(t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..t).collect();
    fn rec(cur: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for j in i..cur.len() {
            cur.swap(i, j);
            rec(cur, i + 1, out);
            cur.swap(i, j);
        }
    }
    rec(&mut cur, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{haar_matrix, max_abs, stream_rng};
    use crate::oracles::pr_closed_form;

    fn setup(n: u32, m: u32, t: usize, seed: u64) -> (AdversarySpec, DMatrix<C64>) {
        let spec = AdversarySpec::forward(n, m, t, seed).unwrap();
        let g = haar_matrix(1 << n, &mut stream_rng(seed, 99));
        (spec, g)
    }

    #[test]
    fn density_matches_materialized_closed_form() {
        for (n, m, t) in [(2, 1, 1), (2, 1, 2), (3, 1, 2), (3, 0, 3)] {
            let (spec, g) = setup(n, m, t, 11 + t as u64);
            let chain = PrChain::new(&spec, &g).unwrap();
            let direct = pr_closed_form(&spec, &g).unwrap().reduced_density();
            let diff = max_abs(&(chain.ab_density() - direct));
            assert!(diff < 1e-12, "(n, m, t) = ({n}, {m}, {t}): {diff}");
        }
    }

    #[test]
    fn x_db_weight_matches_materialized_closed_form() {
        for (n, m, t) in [(2, 1, 2), (3, 1, 2), (3, 0, 3)] {
            let (spec, g) = setup(n, m, t, 5);
            let chain = PrChain::new(&spec, &g).unwrap();
            let state = pr_closed_form(&spec, &g).unwrap();
            let direct: f64 = state
                .entries()
                .iter()
                .filter(|((l, _), _)| l.is_x_db())
                .map(|(_, v)| v.iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum();
            assert!((chain.x_db_weight() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn single_query_state_has_unit_trace_and_full_weight() {
        let (spec, g) = setup(3, 1, 1, 2);
        let chain = PrChain::new(&spec, &g).unwrap();
        assert!((chain.ab_density().trace().re - 1.0).abs() < 1e-12);
        assert!((chain.x_db_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_queries_are_rejected() {
        let spec = AdversarySpec::from_seed(2, 1, vec![false, true], 1).unwrap();
        let g = DMatrix::identity(4, 4);
        assert!(PrChain::new(&spec, &g).is_err());
    }
}
