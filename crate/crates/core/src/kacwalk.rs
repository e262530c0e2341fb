//! Parallel Kac's walk: bit-string helpers, the blockwise rotation `H_f`, the
//! basis permutation `P_σ`, and samplers for walks of `T` steps.
//!
//! Basis index `x` is the big-endian reading of an n-bit string, so the first
//! bit is the most significant one. The block of `x` is its (n−1)-bit suffix
//! `x mod N/2` and `x̄ = x XOR N/2`. A step applies `P_σ` and then `H_f`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{resource, Error, Result};
use crate::numerics::{StateVector, C64, ZERO};

/// Default cap on `N` for dense compositions.
pub const DEFAULT_DENSE_CAP: usize = 256;

pub type Rotation = [[C64; 2]; 2];

/// Binary fraction `Σ 2^{−i} b_i` of a bit slice, first bit most significant.
pub fn val(bits: &[u8]) -> f64 {
    bits.iter()
        .enumerate()
        .map(|(i, &b)| f64::from(b & 1) * 0.5f64.powi(i as i32 + 1))
        .sum()
}

/// `val` of the `len`-bit big-endian string stored in `v`.
pub fn val_int(v: u64, len: u32) -> f64 {
    v as f64 / (1u64 << len) as f64
}

pub fn flip_first_bit(x: usize, n: u32) -> usize {
    x ^ (1 << (n - 1))
}

/// Block label (the (n−1)-bit suffix).
pub fn suffix(x: usize, n: u32) -> usize {
    x & ((1 << (n - 1)) - 1)
}

pub fn same_block(x: usize, z: usize, n: u32) -> bool {
    suffix(x, n) == suffix(z, n)
}

/// Parse a `3d`-bit entry as `f_α ‖ f_β ‖ f_θ` and return `(α, β, θ)`.
pub fn angles_from_f(entry: u64, d: u32) -> (f64, f64, f64) {
    let mask = (1u64 << d) - 1;
    let a = (entry >> (2 * d)) & mask;
    let b = (entry >> d) & mask;
    let t = entry & mask;
    (
        2.0 * PI * val_int(a, d),
        2.0 * PI * val_int(b, d),
        val_int(t, d).sqrt().asin(),
    )
}

/// `[[e^{iα}cosθ, −e^{iβ}sinθ], [e^{−iβ}sinθ, e^{−iα}cosθ]]`.
pub fn rotation_u(alpha: f64, beta: f64, theta: f64) -> Rotation {
    let (s, c) = theta.sin_cos();
    let ea = C64::new(alpha.cos(), alpha.sin());
    let eb = C64::new(beta.cos(), beta.sin());
    [[ea * c, -eb * s], [eb.conj() * s, ea.conj() * c]]
}

/// Lookup tables for the `2^d` possible values of each angle, so sampling a
/// step does not pay for trigonometry per entry.
#[derive(Clone, Debug)]
pub struct AngleTables {
    d: u32,
    phase: Vec<C64>,
    cos_sin: Vec<(f64, f64)>,
}

impl AngleTables {
    pub fn new(d: u32) -> Self {
        let k = 1u64 << d;
        let phase = (0..k)
            .map(|v| {
                let a = 2.0 * PI * val_int(v, d);
                C64::new(a.cos(), a.sin())
            })
            .collect();
        let cos_sin = (0..k)
            .map(|v| {
                let (s, c) = val_int(v, d).sqrt().asin().sin_cos();
                (c, s)
            })
            .collect();
        Self { d, phase, cos_sin }
    }

    pub fn rotation(&self, entry: u64) -> Rotation {
        let d = self.d;
        let mask = (1u64 << d) - 1;
        let ea = self.phase[((entry >> (2 * d)) & mask) as usize];
        let eb = self.phase[((entry >> d) & mask) as usize];
        let (c, s) = self.cos_sin[(entry & mask) as usize];
        [[ea * c, -eb * s], [eb.conj() * s, ea.conj() * c]]
    }
}

/// `f : {0,1}^{n−1} → {0,1}^{3d}`, one entry per block.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FunctionTable {
    n: u32,
    d: u32,
    entries: Vec<u64>,
}

impl FunctionTable {
    pub fn new(n: u32, d: u32, entries: Vec<u64>) -> Result<Self> {
        check_nd(n, d)?;
        if entries.len() != 1 << (n - 1) {
            return Err(Error::Dimension {
                expected: 1 << (n - 1),
                got: entries.len(),
            });
        }
        if entries.iter().any(|&e| e >> (3 * d) != 0) {
            return Err(Error::Invalid(format!("table entry wider than {} bits", 3 * d)));
        }
        Ok(Self { n, d, entries })
    }

    pub fn zero(n: u32, d: u32) -> Self {
        Self {
            n,
            d,
            entries: vec![0; 1 << (n - 1)],
        }
    }

    pub fn random<R: Rng + ?Sized>(n: u32, d: u32, rng: &mut R) -> Self {
        let k = 1u64 << (3 * d);
        Self {
            n,
            d,
            entries: (0..1usize << (n - 1)).map(|_| rng.gen_range(0..k)).collect(),
        }
    }

    /// Table number `index` in the enumeration where suffix 0 is the most
    /// significant digit in base `2^{3d}`.
    pub fn from_index(n: u32, d: u32, mut index: u64) -> Self {
        let blocks = 1usize << (n - 1);
        let base = 1u64 << (3 * d);
        let mut entries = vec![0; blocks];
        for e in entries.iter_mut().rev() {
            *e = index % base;
            index /= base;
        }
        Self { n, d, entries }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn entry(&self, suffix: usize) -> u64 {
        self.entries[suffix]
    }

    pub fn rotations(&self) -> Vec<Rotation> {
        self.entries
            .iter()
            .map(|&e| {
                let (a, b, t) = angles_from_f(e, self.d);
                rotation_u(a, b, t)
            })
            .collect()
    }

    /// `⟨x|H_f|z⟩`.
    pub fn matrix_element(&self, x: usize, z: usize) -> C64 {
        if !same_block(x, z, self.n) {
            return ZERO;
        }
        let (a, b, t) = angles_from_f(self.entries[suffix(x, self.n)], self.d);
        let u = rotation_u(a, b, t);
        let top = self.n - 1;
        u[x >> top][z >> top]
    }

    pub fn dense(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n;
        DMatrix::from_fn(dim, dim, |x, z| self.matrix_element(x, z))
    }

    pub fn to_hex(&self) -> Vec<String> {
        self.entries.iter().map(|e| format!("{e:x}")).collect()
    }

    pub fn from_hex(n: u32, d: u32, hex: &[String]) -> Result<Self> {
        let entries = hex
            .iter()
            .map(|h| u64::from_str_radix(h, 16).map_err(|e| Error::Invalid(format!("bad hex entry {h:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, d, entries)
    }
}

fn check_nd(n: u32, d: u32) -> Result<()> {
    if !(2..=16).contains(&n) {
        return Err(Error::Invalid(format!("n must be in 2..=16, got {n}")));
    }
    if !(1..=20).contains(&d) {
        return Err(Error::Invalid(format!("d must be in 1..=20, got {d}")));
    }
    Ok(())
}

/// A bijection on `{0, …, N−1}`, stored as its image array.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    image: Vec<u32>,
}

impl Permutation {
    pub fn new(image: Vec<u32>) -> Result<Self> {
        let mut seen = vec![false; image.len()];
        for &v in &image {
            let v = v as usize;
            if v >= image.len() || seen[v] {
                return Err(Error::Invalid("permutation image is not a bijection".into()));
            }
            seen[v] = true;
        }
        Ok(Self { image })
    }

    pub fn identity(len: usize) -> Self {
        Self {
            image: (0..len as u32).collect(),
        }
    }

    /// Uniform permutation by Fisher–Yates.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut image: Vec<u32> = (0..len as u32).collect();
        image.shuffle(rng);
        Self { image }
    }

    /// Permutation of lexicographic rank `rank` (Lehmer code).
    pub fn from_rank(len: usize, mut rank: u64) -> Self {
        let mut pool: Vec<u32> = (0..len as u32).collect();
        let mut fact: Vec<u64> = vec![1; len.max(1)];
        for i in 1..len {
            fact[i] = fact[i - 1] * i as u64;
        }
        let mut image = Vec::with_capacity(len);
        for i in (0..len).rev() {
            let k = (rank / fact[i]) as usize;
            rank %= fact[i];
            image.push(pool.remove(k));
        }
        Self { image }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self) -> &[u32] {
        &self.image
    }

    pub fn apply(&self, x: usize) -> usize {
        self.image[x] as usize
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.image.len()];
        for (x, &y) in self.image.iter().enumerate() {
            inv[y as usize] = x as u32;
        }
        Self { image: inv }
    }

    pub fn dense(&self) -> DMatrix<C64> {
        let n = self.image.len();
        let mut m = DMatrix::from_element(n, n, ZERO);
        for (x, &y) in self.image.iter().enumerate() {
            m[(y as usize, x)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn fixed_points(&self) -> usize {
        self.image.iter().enumerate().filter(|(x, &y)| *x == y as usize).count()
    }

    /// Sorted cycle lengths.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut seen = vec![false; self.image.len()];
        let mut out = Vec::new();
        for s in 0..self.image.len() {
            let mut len = 0;
            let mut x = s;
            while !seen[x] {
                seen[x] = true;
                x = self.image[x] as usize;
                len += 1;
            }
            if len > 0 {
                out.push(len);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Walk parameters `(n, d, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KacParams {
    pub n: u32,
    pub d: u32,
    #[serde(rename = "T")]
    pub steps: usize,
}

impl KacParams {
    pub fn new(n: u32, d: u32, steps: usize) -> Result<Self> {
        check_nd(n, d)?;
        Ok(Self { n, d, steps })
    }

    /// `T = 30n` and `d = min(5n, 8)`, the defaults used by the experiments.
    pub fn standard(n: u32) -> Result<Self> {
        Self::new(n, (5 * n).min(8), 30 * n as usize)
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }
}

/// One step `H_f · P_σ` with its rotations precomputed.
#[derive(Clone, Debug)]
pub struct WalkStep {
    f: FunctionTable,
    sigma: Permutation,
    rot: Vec<Rotation>,
}

impl WalkStep {
    pub fn new(f: FunctionTable, sigma: Permutation) -> Result<Self> {
        if sigma.len() != 1 << f.n {
            return Err(Error::Dimension {
                expected: 1 << f.n,
                got: sigma.len(),
            });
        }
        let rot = f.rotations();
        Ok(Self { f, sigma, rot })
    }

    pub(crate) fn with_tables(f: FunctionTable, sigma: Permutation, tables: &AngleTables) -> Self {
        let rot = f.entries.iter().map(|&e| tables.rotation(e)).collect();
        Self { f, sigma, rot }
    }

    pub fn f(&self) -> &FunctionTable {
        &self.f
    }

    pub fn sigma(&self) -> &Permutation {
        &self.sigma
    }

    pub fn rotations(&self) -> &[Rotation] {
        &self.rot
    }

    /// Apply to the A register of a row-major buffer with `width` columns per
    /// basis index (`width = 1` for a plain state vector).
    pub fn apply_rows(&self, data: &mut [C64], width: usize, scratch: &mut Vec<C64>) {
        permute_rows(&self.sigma, data, width, false, scratch);
        rotate_rows(&self.rot, data, width, false);
    }

    pub fn apply_rows_adjoint(&self, data: &mut [C64], width: usize, scratch: &mut Vec<C64>) {
        rotate_rows(&self.rot, data, width, true);
        permute_rows(&self.sigma, data, width, true, scratch);
    }
}

fn permute_rows(sigma: &Permutation, data: &mut [C64], width: usize, inverse: bool, scratch: &mut Vec<C64>) {
    scratch.clear();
    scratch.extend_from_slice(data);
    for (x, &y) in sigma.image.iter().enumerate() {
        let (src, dst) = if inverse { (y as usize, x) } else { (x, y as usize) };
        data[dst * width..(dst + 1) * width].copy_from_slice(&scratch[src * width..(src + 1) * width]);
    }
}

fn rotate_rows(rot: &[Rotation], data: &mut [C64], width: usize, adjoint: bool) {
    let half = rot.len();
    let (lo, hi) = data.split_at_mut(half * width);
    for (s, u) in rot.iter().enumerate() {
        let u = if adjoint {
            [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]]
        } else {
            *u
        };
        let a = &mut lo[s * width..(s + 1) * width];
        let b = &mut hi[s * width..(s + 1) * width];
        for (p, q) in a.iter_mut().zip(b.iter_mut()) {
            let (x0, x1) = (*p, *q);
            *p = u[0][0] * x0 + u[0][1] * x1;
            *q = u[1][0] * x0 + u[1][1] * x1;
        }
    }
}

/// `H_f` applied to a state on the A register, in O(N).
pub fn apply_hf(state: &StateVector, f: &FunctionTable) -> Result<StateVector> {
    let dim = 1usize << f.n;
    if state.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: state.len(),
        });
    }
    let mut out = state.clone();
    rotate_rows(&f.rotations(), out.amplitudes_mut(), 1, false);
    Ok(out)
}

/// `P_σ` (or `P_σ†`) applied to a state: amplitude at `σ(x)` becomes the
/// input amplitude at `x`.
pub fn apply_perm(state: &StateVector, sigma: &Permutation, inverse: bool) -> Result<StateVector> {
    if state.len() != sigma.len() {
        return Err(Error::Dimension {
            expected: sigma.len(),
            got: state.len(),
        });
    }
    let mut out = state.clone();
    permute_rows(sigma, out.amplitudes_mut(), 1, inverse, &mut Vec::new());
    Ok(out)
}

/// `Π_{i=1}^{T} H_{f_i} P_{σ_i}`, applied lazily step by step.
#[derive(Clone, Debug)]
pub struct WalkUnitary {
    n: u32,
    d: u32,
    steps: Vec<WalkStep>,
}

impl WalkUnitary {
    pub fn new(n: u32, d: u32, steps: Vec<WalkStep>) -> Result<Self> {
        check_nd(n, d)?;
        if steps.iter().any(|s| s.f.n != n || s.f.d != d) {
            return Err(Error::Invalid("walk step does not match (n, d)".into()));
        }
        Ok(Self { n, d, steps })
    }

    pub fn identity(n: u32, d: u32) -> Self {
        Self { n, d, steps: Vec::new() }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn steps(&self) -> &[WalkStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, step: WalkStep) {
        self.steps.push(step);
    }

    /// Walk consisting of the first `k` steps.
    pub fn prefix(&self, k: usize) -> Self {
        Self {
            n: self.n,
            d: self.d,
            steps: self.steps[..k.min(self.steps.len())].to_vec(),
        }
    }

    /// Apply to a row-major buffer whose rows are indexed by the A register.
    pub fn apply_rows(&self, data: &mut [C64], width: usize) {
        let mut scratch = Vec::with_capacity(data.len());
        for s in &self.steps {
            s.apply_rows(data, width, &mut scratch);
        }
    }

    pub fn apply_rows_adjoint(&self, data: &mut [C64], width: usize) {
        let mut scratch = Vec::with_capacity(data.len());
        for s in self.steps.iter().rev() {
            s.apply_rows_adjoint(data, width, &mut scratch);
        }
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.check_len(state.len())?;
        let mut out = state.clone();
        self.apply_rows(out.amplitudes_mut(), 1);
        Ok(out)
    }

    pub fn apply_adjoint(&self, state: &StateVector) -> Result<StateVector> {
        self.check_len(state.len())?;
        let mut out = state.clone();
        self.apply_rows_adjoint(out.amplitudes_mut(), 1);
        Ok(out)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn to_record(&self) -> WalkRecord {
        WalkRecord {
            n: self.n,
            d: self.d,
            steps_count: self.steps.len(),
            steps: self
                .steps
                .iter()
                .map(|s| StepRecord {
                    f: s.f.to_hex(),
                    sigma: s.sigma.image.clone(),
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &WalkRecord) -> Result<Self> {
        if rec.steps.len() != rec.steps_count {
            return Err(Error::Invalid("walk record step count mismatch".into()));
        }
        let steps = rec
            .steps
            .iter()
            .map(|s| WalkStep::new(FunctionTable::from_hex(rec.n, rec.d, &s.f)?, Permutation::new(s.sigma.clone())?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rec.n, rec.d, steps)
    }
}

/// JSON form `{n, d, T, steps: [{f: [hex…], sigma: [..]}]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkRecord {
    pub n: u32,
    pub d: u32,
    #[serde(rename = "T")]
    pub steps_count: usize,
    pub steps: Vec<StepRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub f: Vec<String>,
    pub sigma: Vec<u32>,
}

/// Reusable sampler for walks with fixed parameters.
#[derive(Clone, Debug)]
pub struct WalkSampler {
    params: KacParams,
    tables: AngleTables,
}

impl WalkSampler {
    pub fn new(params: KacParams) -> Self {
        Self {
            tables: AngleTables::new(params.d),
            params,
        }
    }

    pub fn params(&self) -> KacParams {
        self.params
    }

    pub fn sample_step<R: Rng + ?Sized>(&self, rng: &mut R) -> WalkStep {
        let KacParams { n, d, .. } = self.params;
        let f = FunctionTable::random(n, d, rng);
        let sigma = Permutation::random(1 << n, rng);
        WalkStep::with_tables(f, sigma, &self.tables)
    }

    /// `steps` i.i.d. steps; each step draws its table first, then σ.
    pub fn sample_len<R: Rng + ?Sized>(&self, steps: usize, rng: &mut R) -> WalkUnitary {
        WalkUnitary {
            n: self.params.n,
            d: self.params.d,
            steps: (0..steps).map(|_| self.sample_step(rng)).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WalkUnitary {
        self.sample_len(self.params.steps, rng)
    }
}

/// A walk drawn from `HPC_{n,T}`.
pub fn sample_walk<R: Rng + ?Sized>(params: KacParams, rng: &mut R) -> WalkUnitary {
    WalkSampler::new(params).sample(rng)
}

/// Dense matrix of the whole walk.
pub fn compose_dense(walk: &WalkUnitary, cap: usize) -> Result<DMatrix<C64>> {
    let dim = walk.dim();
    if dim > cap {
        return Err(resource("dense walk dimension", dim as u128, cap as u128));
    }
    let mut rows = vec![ZERO; dim * dim];
    for i in 0..dim {
        rows[i * dim + i] = C64::new(1.0, 0.0);
    }
    walk.apply_rows(&mut rows, dim);
    Ok(DMatrix::from_row_slice(dim, dim, &rows))
}
