//! Sector-wise tensor-space forms of `Π^{dom W}`, `Π^{im W}` and the PSD
//! bounds on `Π^db − J`.
//!
//! Sector `(l, r)` has sites `A, X_1..X_l, Y_1..Y_l, X'_1..X'_r, Y'_1..Y'_r`,
//! each of dimension `N`, with `A` most significant.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{resource, Error, Result};
use crate::kacwalk::{flip_first_bit, suffix};
use crate::numerics::{dense_spectral_norm, psd_order_check, C64, Operator, PsdCheck, ONE, ZERO};
use crate::oracles::{apply_kind, OracleKind, RecordedState};
use crate::relations::{digits, enumerate_relations, is_distinct_blocks, Relation, RelationClass};

const SECTOR_CAP: usize = 1 << 12;

/// Which side of `W` a projector or bound refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Dom,
    Im,
}

#[derive(Clone, Copy, Debug)]
pub struct SectorLayout {
    pub n: u32,
    pub l: usize,
    pub r: usize,
    pub with_a: bool,
}

impl SectorLayout {
    pub fn new(n: u32, l: usize, r: usize, with_a: bool) -> Result<Self> {
        let s = Self { n, l, r, with_a };
        let dim = (1usize << n).checked_pow(s.sites() as u32).unwrap_or(usize::MAX);
        if dim > SECTOR_CAP {
            return Err(resource("tensor sector dimension", dim as u128, SECTOR_CAP as u128));
        }
        Ok(s)
    }

    pub fn big_n(&self) -> usize {
        1 << self.n
    }

    pub fn sites(&self) -> usize {
        usize::from(self.with_a) + 2 * self.l + 2 * self.r
    }

    pub fn dim(&self) -> usize {
        self.big_n().pow(self.sites() as u32)
    }

    fn base(&self) -> usize {
        usize::from(self.with_a)
    }

    pub fn a(&self) -> usize {
        assert!(self.with_a, "layout has no A site");
        0
    }

    pub fn lx(&self, i: usize) -> usize {
        self.base() + i
    }

    pub fn ly(&self, i: usize) -> usize {
        self.base() + self.l + i
    }

    pub fn rx(&self, i: usize) -> usize {
        self.base() + 2 * self.l + i
    }

    pub fn ry(&self, i: usize) -> usize {
        self.base() + 2 * self.l + self.r + i
    }

    fn index(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, d| acc * self.big_n() + d)
    }

    fn digits(&self, idx: usize) -> Vec<usize> {
        digits(idx, self.big_n(), self.sites())
    }

    /// Embeds a two-site operator (`N² × N²`, first site most significant) on sites `p, q`.
    pub fn two_site(&self, op: &DMatrix<C64>, p: usize, q: usize) -> DMatrix<C64> {
        let big_n = self.big_n();
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut dg = self.digits(col);
            let local = dg[p] * big_n + dg[q];
            for row_local in 0..big_n * big_n {
                let c = op[(row_local, local)];
                if c == ZERO {
                    continue;
                }
                dg[p] = row_local / big_n;
                dg[q] = row_local % big_n;
                out[(self.index(&dg), col)] += c;
            }
        }
        out
    }

    pub fn diagonal<F: Fn(&[usize]) -> bool>(&self, f: F) -> DMatrix<C64> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |i, j| if i == j && f(&self.digits(i)) { ONE } else { ZERO })
    }

    fn x_sites(&self) -> Vec<usize> {
        (0..self.l).map(|i| self.lx(i)).chain((0..self.r).map(|i| self.rx(i))).collect()
    }

    fn y_sites(&self) -> Vec<usize> {
        (0..self.l).map(|i| self.ly(i)).chain((0..self.r).map(|i| self.ry(i))).collect()
    }

    /// `Π^db`: the X entries (L then R) and the Y entries each lie in distinct blocks.
    pub fn db_diagonal(&self) -> DMatrix<C64> {
        let (xs, ys) = (self.x_sites(), self.y_sites());
        let n = self.n;
        self.diagonal(|d| {
            let xv: Vec<usize> = xs.iter().map(|&s| d[s]).collect();
            let yv: Vec<usize> = ys.iter().map(|&s| d[s]).collect();
            is_distinct_blocks(&xv, n) && is_distinct_blocks(&yv, n)
        })
    }

    /// `Π^∉Dom` (or `Π^∉Im`): the A value lies outside every X (or Y) block.
    pub fn outside_diagonal(&self, side: Side) -> DMatrix<C64> {
        let sites = match side {
            Side::Dom => self.x_sites(),
            Side::Im => self.y_sites(),
        };
        let n = self.n;
        self.diagonal(|d| sites.iter().all(|&s| suffix(d[s], n) != suffix(d[0], n)))
    }

    /// Symmetrizer over the pair positions of `L` and of `R` separately.
    pub fn symmetrizer(&self) -> DMatrix<C64> {
        let dim = self.dim();
        let lp = permutations(self.l);
        let rp = permutations(self.r);
        let w = 1.0 / (lp.len() * rp.len()) as f64;
        let mut out = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let dg = self.digits(col);
            for pl in &lp {
                for pr in &rp {
                    let mut nd = dg.clone();
                    for (i, &j) in pl.iter().enumerate() {
                        nd[self.lx(i)] = dg[self.lx(j)];
                        nd[self.ly(i)] = dg[self.ly(j)];
                    }
                    for (i, &j) in pr.iter().enumerate() {
                        nd[self.rx(i)] = dg[self.rx(j)];
                        nd[self.ry(i)] = dg[self.ry(j)];
                    }
                    out[(self.index(&nd), col)] += C64::new(w, 0.0);
                }
            }
        }
        out
    }

    /// Tensor vector of `|a⟩|L⟩|R⟩` (without `a` when the layout has no A site).
    pub fn expand(&self, a: usize, l: &Relation, r: &Relation) -> Result<Vec<C64>> {
        if l.len() != self.l || r.len() != self.r || l.n() != self.n || r.n() != self.n {
            return Err(Error::Contract("relations do not match the sector".into()));
        }
        let mut out = vec![ZERO; self.dim()];
        let wl = l.arrangement_weight();
        let wr = r.arrangement_weight();
        for al in l.arrangements() {
            for ar in r.arrangements() {
                let mut dg = vec![0; self.sites()];
                if self.with_a {
                    dg[0] = a;
                }
                for (i, &(x, y)) in al.iter().enumerate() {
                    dg[self.lx(i)] = x as usize;
                    dg[self.ly(i)] = y as usize;
                }
                for (i, &(x, y)) in ar.iter().enumerate() {
                    dg[self.rx(i)] = x as usize;
                    dg[self.ry(i)] = y as usize;
                }
                out[self.index(&dg)] += C64::new(wl * wr, 0.0);
            }
        }
        Ok(out)
    }

    /// DB relation pairs of this sector with `L ∪ R ∈ ℜ^DB`.
    pub fn db_labels(&self) -> Result<Vec<(Relation, Relation)>> {
        let ls = enumerate_relations(self.n, self.l, RelationClass::Db)?;
        let rs = enumerate_relations(self.n, self.r, RelationClass::Db)?;
        let mut out = Vec::new();
        for l in &ls {
            for r in &rs {
                if l.union(r).is_db() {
                    out.push((*l, *r));
                }
            }
        }
        Ok(out)
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
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

/// `Σ_x |x, x⟩⟨x, x|`.
pub fn eq_operator(big_n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(big_n * big_n, big_n * big_n, |i, j| {
        if i == j && i / big_n == i % big_n {
            ONE
        } else {
            ZERO
        }
    })
}

/// `Σ_x |x, x̄⟩⟨x, x̄|`.
pub fn ffb_operator(n: u32) -> DMatrix<C64> {
    let big_n = 1usize << n;
    DMatrix::from_fn(big_n * big_n, big_n * big_n, |i, j| {
        if i == j && flip_first_bit(i / big_n, n) == i % big_n {
            ONE
        } else {
            ZERO
        }
    })
}

/// `(1/N) Σ_{x,y} |x, x⟩⟨y, y|`.
pub fn epr_operator(big_n: usize) -> DMatrix<C64> {
    let c = C64::new(1.0 / big_n as f64, 0.0);
    DMatrix::from_fn(big_n * big_n, big_n * big_n, |i, j| {
        if i / big_n == i % big_n && j / big_n == j % big_n {
            c
        } else {
            ZERO
        }
    })
}

/// Coefficient `N/(N − 2l − 2r + 2)` of the EPR terms in sector `(l, r)`.
pub(crate) fn epr_coefficient(big_n: usize, l: usize, r: usize) -> f64 {
    big_n as f64 / (big_n as f64 - 2.0 * (l + r) as f64 + 2.0)
}

/// Residuals of the tensor-space decompositions of `Π^{dom W}` and `Π^{im W}`.
#[derive(Clone, Debug, Serialize)]
pub struct DomImCheck {
    /// `(l, r, dom residual, im residual)` per sector.
    pub sectors: Vec<(usize, usize, f64, f64)>,
}

impl DomImCheck {
    pub fn max_residual(&self) -> f64 {
        self.sectors.iter().map(|s| s.2.max(s.3)).fold(0.0, f64::max)
    }
}

/// Compares `W†W` and `WW†` on each DB sector with `l + r ≤ t_max` against
/// `Π^DB(Π^∉Dom + c·Σ_i Π^EPR_{A,X'_i})Π^DB` and its image-side analogue.
pub fn build_dom_im_projectors(n: u32, t_max: usize) -> Result<DomImCheck> {
    let big_n = 1usize << n;
    let epr = epr_operator(big_n);
    let mut sectors = Vec::new();
    for total in 0..=t_max.min(big_n / 2) {
        for l in 0..=total {
            let r = total - l;
            let lay = SectorLayout::new(n, l, r, true)?;
            let labels = lay.db_labels()?;
            if labels.is_empty() {
                continue;
            }
            let keys: Vec<(usize, Relation, Relation)> =
                labels.iter().flat_map(|(l, r)| (0..big_n).map(move |a| (a, *l, *r))).collect();
            let k = keys.len();
            let mut b = DMatrix::zeros(lay.dim(), k);
            for (j, (a, kl, kr)) in keys.iter().enumerate() {
                b.set_column(j, &nalgebra::DVector::from_vec(lay.expand(*a, kl, kr)?));
            }
            let c = C64::new(epr_coefficient(big_n, l, r), 0.0);
            let mut res = [0.0; 2];
            for (si, side) in [Side::Dom, Side::Im].into_iter().enumerate() {
                let mut t = lay.outside_diagonal(side);
                let sites: Vec<usize> = match side {
                    Side::Dom => (0..r).map(|i| lay.rx(i)).collect(),
                    Side::Im => (0..l).map(|i| lay.ly(i)).collect(),
                };
                for s in sites {
                    t += lay.two_site(&epr, 0, s) * c;
                }
                let decomposed = b.adjoint() * t * &b;
                let direct = projector_matrix(n, &keys, side);
                res[si] = dense_spectral_norm(&(decomposed - direct));
            }
            sectors.push((l, r, res[0], res[1]));
        }
    }
    Ok(DomImCheck { sectors })
}

/// `W†W` (dom) or `WW†` (im) in a list of basis keys closed under it.
fn projector_matrix(n: u32, keys: &[(usize, Relation, Relation)], side: Side) -> DMatrix<C64> {
    let k = keys.len();
    let mut m = DMatrix::zeros(k, k);
    let (first, second) = match side {
        Side::Dom => (false, true),
        Side::Im => (true, false),
    };
    for (j, (x, l, r)) in keys.iter().enumerate() {
        let s = RecordedState::basis(n, 0, *x, *l, *r);
        let out = apply_kind(OracleKind::W, second, &apply_kind(OracleKind::W, first, &s));
        for (i, (a, kl, kr)) in keys.iter().enumerate() {
            if let Some(v) = out.get(kl, kr) {
                m[(i, j)] = v[*a];
            }
        }
    }
    m
}

/// `Π^db − J` on one sector, where `J = Π^db(Π^∉Dom + c·Σ_i Π^EPR_{A,X'_i})Π^db`
/// (or the image-side analogue) is the tensor form of `W†W` (or `WW†`).
pub fn db_minus_domain(lay: &SectorLayout, side: Side) -> DMatrix<C64> {
    let epr = epr_operator(lay.big_n());
    let c = C64::new(epr_coefficient(lay.big_n(), lay.l, lay.r), 0.0);
    let grow: Vec<usize> = match side {
        Side::Dom => (0..lay.r).map(|i| lay.rx(i)).collect(),
        Side::Im => (0..lay.l).map(|i| lay.ly(i)).collect(),
    };
    let db = lay.db_diagonal();
    let mut inner = lay.outside_diagonal(side);
    for &s in &grow {
        inner += lay.two_site(&epr, 0, s) * c;
    }
    let j = &db * inner * &db;
    &db - j
}

/// PSD ordering `Π^db − J ⪯ RHS` on sector `(l, r)` for the given side.
pub fn ubound_check(n: u32, l: usize, r: usize, side: Side) -> Result<PsdCheck> {
    let lay = SectorLayout::new(n, l, r, true)?;
    let big_n = lay.big_n();
    let (eq, ffb, epr) = (eq_operator(big_n), ffb_operator(n), epr_operator(big_n));
    let c = C64::new(epr_coefficient(big_n, l, r), 0.0);
    let lambda = 2.0 * (2.0 * (l + r) as f64 / big_n as f64).sqrt();
    // Sites holding a pair's X (dom) or Y (im) entry: the side that grows, then the other.
    let (grow, other): (Vec<usize>, Vec<usize>) = match side {
        Side::Dom => ((0..r).map(|i| lay.rx(i)).collect(), (0..l).map(|i| lay.lx(i)).collect()),
        Side::Im => ((0..l).map(|i| lay.ly(i)).collect(), (0..r).map(|i| lay.ry(i)).collect()),
    };
    let lhs = db_minus_domain(&lay, side);
    let dim = lay.dim();
    let mut rhs = DMatrix::zeros(dim, dim);
    let eq_ffb = &eq + &ffb;
    let eq_epr = &eq - &epr;
    for &s in &other {
        rhs += lay.two_site(&eq_ffb, 0, s);
    }
    for &s in &grow {
        rhs += lay.two_site(&ffb, 0, s);
        rhs += (lay.two_site(&eq_epr, 0, s) + DMatrix::identity(dim, dim) * C64::new(lambda, 0.0)) * c;
    }
    psd_order_check(&Operator::Dense(lhs), &Operator::Dense(rhs))
}

/// `max ‖Π^DB − Π^{ℜ²}Π^db‖, ‖Π^DB − Π^db Π^{ℜ²}‖` over sectors with `l + r ≤ t_max`.
pub fn check_db_factorization(n: u32, t_max: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for total in 0..=t_max {
        for l in 0..=total {
            let lay = SectorLayout::new(n, l, total - l, false)?;
            let dim = lay.dim();
            let mut proj = DMatrix::zeros(dim, dim);
            for (kl, kr) in lay.db_labels()? {
                let v = nalgebra::DVector::from_vec(lay.expand(0, &kl, &kr)?);
                proj += &v * v.adjoint();
            }
            let sym = lay.symmetrizer();
            let db = lay.db_diagonal();
            worst = worst.max(dense_spectral_norm(&(&proj - &sym * &db)));
            worst = worst.max(dense_spectral_norm(&(&proj - &db * &sym)));
        }
    }
    Ok(worst)
}
