//! Relations (multisets of query pairs), relation states and the
//! distinct-block predicates and projectors built on them.

use std::fmt;

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{resource, Error, Result};
use crate::kacwalk::suffix;
use crate::numerics::{Operator, StateVector, C64, ZERO};

/// Capacity of a [`Relation`]. Query budgets stop at 4 and a few operators
/// look one or two pairs past the budget.
pub const MAX_PAIRS: usize = 6;

/// Cap on how many relations an enumeration may produce.
pub const ENUMERATION_CAP: u128 = 20_000_000;

pub type Pair = (u8, u8);

/// Canonical multiset of `(x, y)` pairs over n-bit strings, kept sorted.
///
/// The value is immutable; every update returns a new relation, so the
/// derived Dom/Im/BDom/BIm views can never disagree with the pairs.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relation {
    n: u8,
    len: u8,
    pairs: [Pair; MAX_PAIRS],
}

/// The four index sets of a relation, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationSets {
    pub dom: Vec<usize>,
    pub im: Vec<usize>,
    pub bdom: Vec<usize>,
    pub bim: Vec<usize>,
}

impl Relation {
    pub fn empty(n: u32) -> Self {
        assert!((2..=8).contains(&n), "relations support 2 ≤ n ≤ 8");
        Self {
            n: n as u8,
            len: 0,
            pairs: [(0, 0); MAX_PAIRS],
        }
    }

    pub fn new(n: u32, pairs: &[(usize, usize)]) -> Result<Self> {
        if !(2..=8).contains(&n) {
            return Err(Error::Invalid(format!("relations support 2 ≤ n ≤ 8, got {n}")));
        }
        if pairs.len() > MAX_PAIRS {
            return Err(resource("relation size", pairs.len() as u128, MAX_PAIRS as u128));
        }
        let dim = 1usize << n;
        let mut r = Self::empty(n);
        for &(x, y) in pairs {
            if x >= dim || y >= dim {
                return Err(Error::Invalid(format!("pair ({x}, {y}) out of range for n = {n}")));
            }
            r = r.with_pair(x, y);
        }
        Ok(r)
    }

    pub fn n(&self) -> u32 {
        u32::from(self.n)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs[..self.len as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs().iter().map(|&(x, y)| (x as usize, y as usize))
    }

    /// Relation with one more copy of `(x, y)`.
    ///
    /// # Panics
    /// When the relation already holds [`MAX_PAIRS`] pairs.
    pub fn with_pair(&self, x: usize, y: usize) -> Self {
        let len = self.len as usize;
        assert!(len < MAX_PAIRS, "relation capacity exceeded");
        let p = (x as u8, y as u8);
        let mut out = *self;
        let pos = self.pairs().partition_point(|q| *q <= p);
        out.pairs.copy_within(pos..len, pos + 1);
        out.pairs[pos] = p;
        out.len += 1;
        out
    }

    /// Relation with one copy of `(x, y)` removed, if present.
    pub fn without_pair(&self, x: usize, y: usize) -> Option<Self> {
        let p = (x as u8, y as u8);
        let pos = self.pairs().iter().position(|q| *q == p)?;
        let len = self.len as usize;
        let mut out = *self;
        out.pairs.copy_within(pos + 1..len, pos);
        out.pairs[len - 1] = (0, 0);
        out.len -= 1;
        Some(out)
    }

    /// Multiset sum of two relations.
    pub fn union(&self, other: &Self) -> Self {
        other.iter().fold(*self, |acc, (x, y)| acc.with_pair(x, y))
    }

    pub fn multiplicity(&self, x: usize, y: usize) -> usize {
        let p = (x as u8, y as u8);
        self.pairs().iter().filter(|q| **q == p).count()
    }

    /// Distinct pairs with their multiplicities, in canonical order.
    pub fn distinct(&self) -> Vec<(Pair, usize)> {
        let mut out: Vec<(Pair, usize)> = Vec::new();
        for &p in self.pairs() {
            match out.last_mut() {
                Some((q, m)) if *q == p => *m += 1,
                _ => out.push((p, 1)),
            }
        }
        out
    }

    fn block(&self, v: usize) -> usize {
        suffix(v, self.n())
    }

    /// `x ∈ BDom`, i.e. some recorded input shares the block of `x`.
    pub fn in_bdom(&self, x: usize) -> bool {
        let b = self.block(x);
        self.iter().any(|(px, _)| self.block(px) == b)
    }

    pub fn in_bim(&self, y: usize) -> bool {
        let b = self.block(y);
        self.iter().any(|(_, py)| self.block(py) == b)
    }

    fn distinct_blocks(&self, side: impl Fn(&Pair) -> u8) -> usize {
        let mut blocks: Vec<usize> = self.pairs().iter().map(|p| self.block(side(p) as usize)).collect();
        blocks.sort_unstable();
        blocks.dedup();
        blocks.len()
    }

    pub fn bdom_len(&self) -> usize {
        2 * self.distinct_blocks(|p| p.0)
    }

    pub fn bim_len(&self) -> usize {
        2 * self.distinct_blocks(|p| p.1)
    }

    /// Inputs lie in pairwise distinct blocks.
    pub fn is_x_db(&self) -> bool {
        self.distinct_blocks(|p| p.0) == self.len()
    }

    /// Outputs lie in pairwise distinct blocks.
    pub fn is_y_db(&self) -> bool {
        self.distinct_blocks(|p| p.1) == self.len()
    }

    pub fn is_db(&self) -> bool {
        self.is_x_db() && self.is_y_db()
    }

    /// `γ_R = sqrt(t! · Π mult!)`, the normalizer of the relation state.
    pub fn gamma(&self) -> f64 {
        let mut g = factorial(self.len());
        for (_, m) in self.distinct() {
            g *= factorial(m);
        }
        g.sqrt()
    }

    /// Every distinct ordering of the pairs. The relation state is the sum of
    /// `|x⃗⟩|y⃗⟩` over these orderings, each with weight
    /// [`Relation::arrangement_weight`].
    pub fn arrangements(&self) -> Vec<Vec<Pair>> {
        let mut cur = self.pairs().to_vec();
        let mut out = Vec::new();
        permute_distinct(&mut cur, 0, &mut out);
        out
    }

    /// `sqrt(Π mult! / t!)`.
    pub fn arrangement_weight(&self) -> f64 {
        let m: f64 = self.distinct().iter().map(|(_, m)| factorial(*m)).product();
        (m / factorial(self.len())).sqrt()
    }

    fn to_bits(&self, v: u8) -> String {
        format!("{:0width$b}", v, width = self.n as usize)
    }
}

fn permute_distinct(cur: &mut Vec<Pair>, k: usize, out: &mut Vec<Vec<Pair>>) {
    if k == cur.len() {
        out.push(cur.clone());
        return;
    }
    let mut used: Vec<Pair> = Vec::new();
    for i in k..cur.len() {
        if used.contains(&cur[i]) {
            continue;
        }
        used.push(cur[i]);
        cur.swap(k, i);
        permute_distinct(cur, k + 1, out);
        cur.swap(k, i);
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, &(x, y)) in self.pairs().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({},{})", self.to_bits(x), self.to_bits(y))?;
        }
        f.write_str("}")
    }
}

impl Serialize for Relation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<[String; 2]> = self
            .pairs()
            .iter()
            .map(|&(x, y)| [self.to_bits(x), self.to_bits(y)])
            .collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Relation {
    /// Bit-string pairs; `n` is read off the string length. The empty
    /// relation carries no length and deserializes with n = 2.
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<[String; 2]> = Vec::deserialize(d)?;
        let n = v.first().map(|p| p[0].len()).unwrap_or(2);
        let mut pairs = Vec::with_capacity(v.len());
        for [x, y] in &v {
            if x.len() != n || y.len() != n {
                return Err(D::Error::custom("pairs must have equal bit lengths"));
            }
            let px = usize::from_str_radix(x, 2).map_err(D::Error::custom)?;
            let py = usize::from_str_radix(y, 2).map_err(D::Error::custom)?;
            pairs.push((px, py));
        }
        Relation::new(n as u32, &pairs).map_err(D::Error::custom)
    }
}

/// Dom, Im, BDom and BIm of a relation.
pub fn relation_sets(r: &Relation) -> RelationSets {
    let n = r.n();
    let flip = 1usize << (n - 1);
    let sorted = |it: &mut dyn Iterator<Item = usize>| {
        let mut v: Vec<usize> = it.collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let dom = sorted(&mut r.iter().map(|p| p.0));
    let im = sorted(&mut r.iter().map(|p| p.1));
    let bdom = sorted(&mut dom.iter().flat_map(|&x| [x, x ^ flip]));
    let bim = sorted(&mut im.iter().flat_map(|&y| [y, y ^ flip]));
    RelationSets { dom, im, bdom, bim }
}

/// Pairwise distinct suffixes.
pub fn is_distinct_blocks(tuple: &[usize], n: u32) -> bool {
    let mut b: Vec<usize> = tuple.iter().map(|&x| suffix(x, n)).collect();
    b.sort_unstable();
    b.windows(2).all(|w| w[0] != w[1])
}

/// Relation classes `ALL ⊃ yDB ⊃ DB`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationClass {
    All,
    YDb,
    Db,
}

impl RelationClass {
    pub fn contains(&self, r: &Relation) -> bool {
        match self {
            RelationClass::All => true,
            RelationClass::YDb => r.is_y_db(),
            RelationClass::Db => r.is_db(),
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Every canonical relation of size `t` in `class`, in lexicographic order.
pub fn enumerate_relations(n: u32, t: usize, class: RelationClass) -> Result<Vec<Relation>> {
    if !(2..=8).contains(&n) {
        return Err(Error::Invalid(format!("relations support 2 ≤ n ≤ 8, got {n}")));
    }
    if t > MAX_PAIRS {
        return Err(resource("relation size", t as u128, MAX_PAIRS as u128));
    }
    let pairs = 1u128 << (2 * n);
    let needed = binomial(pairs + t as u128 - 1, t as u128);
    if needed > ENUMERATION_CAP {
        return Err(resource("relation enumeration", needed, ENUMERATION_CAP));
    }
    let mut out = Vec::new();
    grow(Relation::empty(n), 0, t, class, &mut out);
    Ok(out)
}

fn grow(r: Relation, from: usize, t: usize, class: RelationClass, out: &mut Vec<Relation>) {
    if r.len() == t {
        out.push(r);
        return;
    }
    let dim = 1usize << r.n();
    for code in from..dim * dim {
        let (x, y) = (code / dim, code % dim);
        let next = r.with_pair(x, y);
        // Every class is closed under taking sub-multisets, so prune early.
        if class.contains(&next) {
            grow(next, code, t, class, out);
        }
    }
}

/// Direct-sum layout `⊕_{t ≤ t_max} (C^N)^{⊗ k·t}` with `k = 1` for a single
/// tuple register (X or Y) and `k = 2` for a relation register (X⊗Y).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarLenLayout {
    n: u32,
    t_max: usize,
    per_sector: u32,
    offsets: Vec<usize>,
}

impl VarLenLayout {
    pub fn new(n: u32, t_max: usize, registers_per_sector: u32) -> Result<Self> {
        let dim = 1u128 << n;
        let mut offsets = vec![0usize];
        let mut total: u128 = 0;
        for t in 0..=t_max {
            total += dim.pow(registers_per_sector * t as u32);
            if total > crate::numerics::MAX_DENSE_ENTRIES {
                return Err(resource("variable-length register", total, crate::numerics::MAX_DENSE_ENTRIES));
            }
            offsets.push(total as usize);
        }
        Ok(Self {
            n,
            t_max,
            per_sector: registers_per_sector,
            offsets,
        })
    }

    /// Layout of a relation register (pairs of X and Y tuples).
    pub fn relation(n: u32, t_max: usize) -> Result<Self> {
        Self::new(n, t_max, 2)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn sector_dim(&self, t: usize) -> usize {
        self.offsets[t + 1] - self.offsets[t]
    }

    pub fn offset(&self, t: usize) -> usize {
        self.offsets[t]
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn sector_of(&self, index: usize) -> Option<usize> {
        (0..=self.t_max).find(|&t| index < self.offsets[t + 1])
    }

    pub fn registers_per_sector(&self) -> u32 {
        self.per_sector
    }
}

/// `|R⟩ = γ_R^{-1} Σ_{σ∈S_t} S_σ|x⃗⟩ ⊗ S_σ|y⃗⟩` in the sector `t = |R|`,
/// laid out as `X_1…X_t Y_1…Y_t` (X most significant).
pub fn relation_state(r: &Relation, layout: &VarLenLayout) -> Result<StateVector> {
    let t = r.len();
    if t > layout.t_max() || layout.registers_per_sector() != 2 || layout.n() != r.n() {
        return Err(Error::Contract("relation does not fit the layout".into()));
    }
    let dim = 1usize << r.n();
    let mut amps = vec![ZERO; layout.sector_dim(t)];
    let w = C64::new(r.arrangement_weight(), 0.0);
    for arr in r.arrangements() {
        let xi = arr.iter().fold(0, |acc, p| acc * dim + p.0 as usize);
        let yi = arr.iter().fold(0, |acc, p| acc * dim + p.1 as usize);
        amps[xi * dim.pow(t as u32) + yi] += w;
    }
    StateVector::new(amps, vec![dim; 2 * t])
}

/// Diagonal projector onto distinct-block tuples of length `t` on X.
pub fn db_projector_x(n: u32, t: usize) -> Result<Operator> {
    let dim = 1usize << n;
    let size = dim.checked_pow(t as u32).unwrap_or(usize::MAX);
    if size as u128 > 1 << 16 {
        return Err(resource("DB projector dimension", size as u128, 1 << 16));
    }
    let diag: Vec<C64> = (0..size)
        .map(|idx| {
            let tuple = digits(idx, dim, t);
            if is_distinct_blocks(&tuple, n) {
                C64::new(1.0, 0.0)
            } else {
                ZERO
            }
        })
        .collect();
    Ok(Operator::Dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))))
}

/// Base-`dim` digits of `idx`, most significant first.
pub fn digits(mut idx: usize, dim: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for d in out.iter_mut().rev() {
        *d = idx % dim;
        idx /= dim;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gram_matrix, max_abs};

    fn rel(n: u32, p: &[(usize, usize)]) -> Relation {
        Relation::new(n, p).unwrap()
    }

    #[test]
    fn set_examples() {
        let e = relation_sets(&Relation::empty(2));
        assert!(e.dom.is_empty() && e.im.is_empty() && e.bdom.is_empty() && e.bim.is_empty());
        let s = relation_sets(&rel(2, &[(0b00, 0b01)]));
        assert_eq!(s.dom, vec![0b00]);
        assert_eq!(s.bdom, vec![0b00, 0b10]);
        assert_eq!(s.im, vec![0b01]);
        assert_eq!(s.bim, vec![0b01, 0b11]);
    }

    #[test]
    fn db_relations_have_full_block_images() {
        for r in enumerate_relations(3, 2, RelationClass::Db).unwrap() {
            let s = relation_sets(&r);
            assert_eq!(s.bim.len(), 4);
            assert_eq!(s.bdom.len(), 4);
            assert_eq!(r.bim_len(), 4);
        }
    }

    #[test]
    fn bdom_membership_matches_definition() {
        for n in 2..=3 {
            for t in 0..=2 {
                for r in enumerate_relations(n, t, RelationClass::Db).unwrap() {
                    let s = relation_sets(&r);
                    for x in 0..1usize << n {
                        let direct = s.dom.contains(&x) || s.dom.contains(&(x ^ (1 << (n - 1))));
                        assert_eq!(r.in_bdom(x), direct);
                        assert_eq!(s.bdom.contains(&x), direct);
                    }
                }
            }
        }
    }

    #[test]
    fn distinct_block_examples() {
        assert!(is_distinct_blocks(&[5], 3));
        assert!(!is_distinct_blocks(&[1, 5], 3));
        let count = (0..64).filter(|i| is_distinct_blocks(&[i / 8, i % 8], 3)).count();
        assert_eq!(count, 48);
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(rel(2, &[(1, 2)]).gamma(), 1.0);
        assert!((rel(2, &[(1, 2), (3, 0)]).gamma() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(rel(2, &[(1, 2), (1, 2)]).gamma(), 2.0);
    }

    #[test]
    fn relation_state_examples() {
        let layout = VarLenLayout::relation(2, 2).unwrap();
        let s = relation_state(&rel(2, &[(1, 2)]), &layout).unwrap();
        assert_eq!(s.amplitudes()[4 + 2], C64::new(1.0, 0.0));

        let s = relation_state(&rel(2, &[(1, 2), (3, 0)]), &layout).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // |x1 x2⟩|y1 y2⟩ = |1 3⟩|2 0⟩ and the swapped term |3 1⟩|0 2⟩
        assert!((s.amplitudes()[(4 + 3) * 16 + 2 * 4] - h).norm() < 1e-15);
        assert!((s.amplitudes()[(3 * 4 + 1) * 16 + 2] - h).norm() < 1e-15);

        let s = relation_state(&rel(2, &[(1, 2), (1, 2)]), &layout).unwrap();
        assert_eq!(s.amplitudes()[(4 + 1) * 16 + 2 * 4 + 2], C64::new(1.0, 0.0));
    }

    #[test]
    fn relation_states_form_orthonormal_basis() {
        let layout = VarLenLayout::relation(2, 2).unwrap();
        for t in 0..=2 {
            let states: Vec<StateVector> = enumerate_relations(2, t, RelationClass::All)
                .unwrap()
                .iter()
                .map(|r| relation_state(r, &layout).unwrap())
                .collect();
            let g = gram_matrix(&states).unwrap();
            let id = DMatrix::<C64>::identity(states.len(), states.len());
            assert!(max_abs(&(g - id)) < 1e-9);
        }
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_relations(2, 0, RelationClass::All).unwrap(), vec![Relation::empty(2)]);
        assert_eq!(enumerate_relations(2, 1, RelationClass::All).unwrap().len(), 16);
        assert_eq!(enumerate_relations(2, 2, RelationClass::All).unwrap().len(), 136);
        let all = enumerate_relations(2, 2, RelationClass::All).unwrap();
        let db = enumerate_relations(2, 2, RelationClass::Db).unwrap();
        let filtered: Vec<Relation> = all.iter().copied().filter(Relation::is_db).collect();
        assert_eq!(db, filtered);
        assert_eq!(db.len(), 32);
        let ydb = enumerate_relations(2, 2, RelationClass::YDb).unwrap();
        assert!(db.iter().all(|r| ydb.contains(r)));
        assert!(matches!(enumerate_relations(8, 4, RelationClass::All), Err(Error::Resource { .. })));
    }

    #[test]
    fn db_projector_examples() {
        let p1 = db_projector_x(3, 1).unwrap().to_dense().unwrap();
        assert_eq!(p1, DMatrix::identity(8, 8));
        let p2 = db_projector_x(3, 2).unwrap().to_dense().unwrap();
        assert_eq!(&p2 * &p2, p2);
        assert_eq!(p2.trace().re as usize, 48);
    }

    #[test]
    fn json_roundtrip() {
        let r = rel(3, &[(0b001, 0b110), (0b000, 0b011)]);
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(j, r#"[["000","011"],["001","110"]]"#);
        let back: Relation = serde_json::from_str(&j).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn layout_offsets() {
        let l = VarLenLayout::relation(2, 2).unwrap();
        assert_eq!(l.total_dim(), 1 + 16 + 256);
        assert_eq!(l.offset(2), 17);
        assert_eq!(l.sector_of(16), Some(1));
        assert_eq!(l.sector_of(17), Some(2));
    }

    #[test]
    fn removal_inverts_insertion() {
        let r = rel(3, &[(1, 2), (5, 7), (1, 2)]);
        assert_eq!(r.multiplicity(1, 2), 2);
        let s = r.without_pair(1, 2).unwrap();
        assert_eq!(s, rel(3, &[(5, 7), (1, 2)]));
        assert!(s.without_pair(0, 0).is_none());
        assert_eq!(s.with_pair(1, 2), r);
    }
}
