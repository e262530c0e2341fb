//! Adversary harness: `Π_i O_i · A^(i)` applied to `|0⟩_AB`, with each `O_i`
//! a forward or inverse query.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{apply_on_a, OracleOperator, RecordedState};
use crate::error::{Error, Result};
use crate::kacwalk::WalkUnitary;
use crate::numerics::{haar_matrix, stream_rng, C64, ZERO};
use crate::relations::{is_distinct_blocks, Relation};

/// Anything that can answer forward and inverse queries on register `A`.
pub trait QueryOracle: Sync {
    fn n(&self) -> u32;

    /// Forward (`inverse = false`) or inverse query.
    fn query(&self, state: &RecordedState, inverse: bool) -> Result<RecordedState>;

    /// Largest number of queries answered exactly, if limited.
    fn query_budget(&self) -> Option<usize> {
        None
    }
}

impl QueryOracle for OracleOperator {
    fn n(&self) -> u32 {
        self.n
    }

    fn query(&self, state: &RecordedState, inverse: bool) -> Result<RecordedState> {
        if state.n() != self.n {
            return Err(Error::Contract("state and oracle disagree on n".into()));
        }
        Ok(if inverse {
            self.apply_adjoint(state)
        } else {
            self.apply(state)
        })
    }

    fn query_budget(&self) -> Option<usize> {
        Some(self.t_max + 1)
    }
}

impl QueryOracle for WalkUnitary {
    fn n(&self) -> u32 {
        WalkUnitary::n(self)
    }

    fn query(&self, state: &RecordedState, inverse: bool) -> Result<RecordedState> {
        if state.n() != WalkUnitary::n(self) {
            return Err(Error::Contract("state and walk disagree on n".into()));
        }
        let mut out = state.clone();
        let width = state.width();
        for v in out.vectors_mut() {
            if inverse {
                self.apply_rows_adjoint(v, width);
            } else {
                self.apply_rows(v, width);
            }
        }
        Ok(out)
    }
}

/// A fixed `N × N` unitary on `A`.
#[derive(Clone, Debug)]
pub struct DenseOracle {
    n: u32,
    u: DMatrix<C64>,
    u_dag: DMatrix<C64>,
}

impl DenseOracle {
    pub fn new(u: DMatrix<C64>) -> Result<Self> {
        let dim = u.nrows();
        if !dim.is_power_of_two() || dim < 2 || u.ncols() != dim {
            return Err(Error::Invalid("dense oracle must be 2ⁿ × 2ⁿ".into()));
        }
        Ok(Self {
            n: dim.trailing_zeros(),
            u_dag: u.adjoint(),
            u,
        })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.u
    }
}

impl QueryOracle for DenseOracle {
    fn n(&self) -> u32 {
        self.n
    }

    fn query(&self, state: &RecordedState, inverse: bool) -> Result<RecordedState> {
        let mut out = state.clone();
        out.apply_a(if inverse { &self.u_dag } else { &self.u })?;
        Ok(out)
    }
}

/// `O · G` on forward queries and `G† · O†` on inverse queries.
pub struct Precomposed<'a> {
    pub inner: &'a dyn QueryOracle,
    g: DMatrix<C64>,
    g_dag: DMatrix<C64>,
}

impl<'a> Precomposed<'a> {
    pub fn new(inner: &'a dyn QueryOracle, g: DMatrix<C64>) -> Result<Self> {
        let dim = 1usize << inner.n();
        if g.nrows() != dim || g.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: g.nrows(),
            });
        }
        Ok(Self {
            inner,
            g_dag: g.adjoint(),
            g,
        })
    }
}

impl QueryOracle for Precomposed<'_> {
    fn n(&self) -> u32 {
        self.inner.n()
    }

    fn query(&self, state: &RecordedState, inverse: bool) -> Result<RecordedState> {
        if inverse {
            let mut out = self.inner.query(state, true)?;
            out.apply_a(&self.g_dag)?;
            Ok(out)
        } else {
            let mut s = state.clone();
            s.apply_a(&self.g)?;
            self.inner.query(&s, false)
        }
    }

    fn query_budget(&self) -> Option<usize> {
        self.inner.query_budget()
    }
}

/// Where the interleaving unitaries came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecSource {
    /// Haar-random `A^(i)` drawn from RNG stream `i` of the seed.
    Seed(u64),
    Identity,
    /// Caller-provided matrices; not reproducible from a report.
    Custom,
}

/// A `t`-query adversary: unitaries `A^(1..t)` on `A ⊗ B` and direction bits.
#[derive(Clone, Debug)]
pub struct AdversarySpec {
    n: u32,
    m: u32,
    directions: Vec<bool>,
    unitaries: Vec<DMatrix<C64>>,
    source: SpecSource,
}

impl AdversarySpec {
    /// Haar-random interleaving unitaries; `directions[i]` marks inverse queries.
    pub fn from_seed(n: u32, m: u32, directions: Vec<bool>, seed: u64) -> Result<Self> {
        check_registers(n, m)?;
        let dim = 1usize << (n + m);
        let unitaries = (0..directions.len())
            .map(|i| haar_matrix(dim, &mut stream_rng(seed, i as u64)))
            .collect();
        Ok(Self {
            n,
            m,
            directions,
            unitaries,
            source: SpecSource::Seed(seed),
        })
    }

    pub fn forward(n: u32, m: u32, t: usize, seed: u64) -> Result<Self> {
        Self::from_seed(n, m, vec![false; t], seed)
    }

    pub fn identity(n: u32, m: u32, directions: Vec<bool>) -> Result<Self> {
        check_registers(n, m)?;
        let dim = 1usize << (n + m);
        Ok(Self {
            n,
            m,
            unitaries: vec![DMatrix::identity(dim, dim); directions.len()],
            directions,
            source: SpecSource::Identity,
        })
    }

    pub fn custom(n: u32, m: u32, directions: Vec<bool>, unitaries: Vec<DMatrix<C64>>) -> Result<Self> {
        check_registers(n, m)?;
        let dim = 1usize << (n + m);
        if unitaries.len() != directions.len() {
            return Err(Error::Invalid("one unitary per query is required".into()));
        }
        for u in &unitaries {
            if u.nrows() != dim || u.ncols() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: u.nrows(),
                });
            }
            let defect = crate::numerics::max_abs(&(u.adjoint() * u - DMatrix::identity(dim, dim)));
            if defect > 1e-10 {
                return Err(Error::Invalid(format!("A_i is not unitary (defect {defect:.2e})")));
            }
        }
        Ok(Self {
            n,
            m,
            directions,
            unitaries,
            source: SpecSource::Custom,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn t(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[bool] {
        &self.directions
    }

    pub fn unitaries(&self) -> &[DMatrix<C64>] {
        &self.unitaries
    }

    pub fn source(&self) -> &SpecSource {
        &self.source
    }

    pub fn is_forward_only(&self) -> bool {
        self.directions.iter().all(|b| !b)
    }
}

fn check_registers(n: u32, m: u32) -> Result<()> {
    if !(2..=8).contains(&n) || n + m > 12 {
        return Err(Error::Invalid(format!("unsupported register sizes n = {n}, m = {m}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SpecRecord {
    n: u32,
    m: u32,
    directions: Vec<u8>,
    source: SpecSource,
}

impl Serialize for AdversarySpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.source == SpecSource::Custom {
            return Err(serde::ser::Error::custom("custom adversary unitaries are not serializable"));
        }
        SpecRecord {
            n: self.n,
            m: self.m,
            directions: self.directions.iter().map(|&b| b as u8).collect(),
            source: self.source.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AdversarySpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = SpecRecord::deserialize(d)?;
        let dirs: Vec<bool> = rec.directions.iter().map(|&b| b != 0).collect();
        let spec = match rec.source {
            SpecSource::Seed(seed) => AdversarySpec::from_seed(rec.n, rec.m, dirs, seed),
            SpecSource::Identity => AdversarySpec::identity(rec.n, rec.m, dirs),
            SpecSource::Custom => return Err(serde::de::Error::custom("custom specs cannot be rebuilt")),
        };
        spec.map_err(serde::de::Error::custom)
    }
}

/// Final state `Π_i ((1−b_i)·O + b_i·O†)·A^(i) |0⟩_AB |{}⟩|{}⟩`.
pub fn run_adversary(oracle: &dyn QueryOracle, spec: &AdversarySpec) -> Result<RecordedState> {
    if oracle.n() != spec.n {
        return Err(Error::Contract("oracle and adversary disagree on n".into()));
    }
    if let Some(budget) = oracle.query_budget() {
        if spec.t() > budget {
            return Err(Error::Contract(format!(
                "adversary makes {} queries but the oracle is truncated after {budget}",
                spec.t()
            )));
        }
    }
    let mut state = RecordedState::initial(spec.n, spec.m);
    for (u, &inv) in spec.unitaries.iter().zip(&spec.directions) {
        state.apply_ab(u)?;
        state = oracle.query(&state, inv)?;
        state.prune(0.0);
    }
    Ok(state)
}

/// Closed-form final state of a forward-only adversary against `PR · G`:
/// `Π_i (N−2i)^{-1/2} Σ_{x⃗, y⃗ ∈ DB_t} Π_i (|y_i⟩⟨x_i| G A^(i)) |0⟩ |{(x_i, y_i)}⟩`.
pub fn pr_closed_form(spec: &AdversarySpec, g: &DMatrix<C64>) -> Result<RecordedState> {
    if !spec.is_forward_only() {
        return Err(Error::Contract("closed form covers forward queries only".into()));
    }
    let n = spec.n;
    let big_n = 1usize << n;
    let w = 1usize << spec.m;
    if g.nrows() != big_n || g.ncols() != big_n {
        return Err(Error::Dimension {
            expected: big_n,
            got: g.nrows(),
        });
    }
    let t = spec.t();
    let scale: f64 = (0..t).map(|i| 1.0 / ((big_n - 2 * i) as f64).sqrt()).product();
    let mut out = RecordedState::zero(n, spec.m);
    let mut v0 = vec![ZERO; big_n * w];
    v0[0] = C64::new(1.0, 0.0);

    struct Ctx<'a> {
        spec: &'a AdversarySpec,
        g: &'a DMatrix<C64>,
        big_n: usize,
        w: usize,
        n: u32,
        scale: f64,
    }
    fn rec(ctx: &Ctx, i: usize, v: Vec<C64>, xs: &mut Vec<usize>, ys: &mut Vec<usize>, out: &mut RecordedState) {
        if i == ctx.spec.t() {
            let mut rel = Relation::empty(ctx.n);
            for (&x, &y) in xs.iter().zip(ys.iter()) {
                rel = rel.with_pair(x, y);
            }
            let empty = Relation::empty(ctx.n);
            for (ab, c) in v.iter().enumerate() {
                if *c != ZERO {
                    out.add_at(rel, empty, ab, c * ctx.scale);
                }
            }
            return;
        }
        let dv = nalgebra::DVector::from_column_slice(&v);
        let moved = (&ctx.spec.unitaries[i] * dv).as_slice().to_vec();
        let moved = apply_on_a(ctx.g, &moved, ctx.w);
        for x in 0..ctx.big_n {
            let slice = &moved[x * ctx.w..(x + 1) * ctx.w];
            if slice.iter().all(|c| *c == ZERO) {
                continue;
            }
            for y in 0..ctx.big_n {
                ys.push(y);
                if is_distinct_blocks(ys, ctx.n) {
                    let mut next = vec![ZERO; ctx.big_n * ctx.w];
                    next[y * ctx.w..(y + 1) * ctx.w].copy_from_slice(slice);
                    xs.push(x);
                    rec(ctx, i + 1, next, xs, ys, out);
                    xs.pop();
                }
                ys.pop();
            }
        }
    }
    let ctx = Ctx {
        spec,
        g,
        big_n,
        w,
        n,
        scale,
    };
    rec(&ctx, 0, v0, &mut Vec::new(), &mut Vec::new(), &mut out);
    Ok(out)
}
