//! Toy keyed PRF and Feistel PRP standing in for the random tables `f` and
//! permutations `σ` of the walk.
//!
//! This is a statistical toy built on SHA-256 with domain separation. It makes
//! no post-quantum or other cryptographic security claim and has no
//! side-channel hygiene.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{Check, ExperimentReport};
use crate::kacwalk::{AngleTables, FunctionTable, KacParams, Permutation, WalkStep, WalkUnitary};

/// Printed alongside every report that uses pseudorandom walks.
pub const DISCLAIMER: &str =
    "toy PRF/PRP built on SHA-256 for statistical experiments only; not a secure instantiation";

const PRF_DOMAIN: &[u8] = b"kacpru/prf/v1";
const ROUND_DOMAIN: &[u8] = b"kacpru/feistel/v1";
pub const FEISTEL_ROUNDS: u8 = 4;

/// 128-bit key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ToyKey([u8; 16]);

impl ToyKey {
    pub fn new(bytes: [u8; 16]) -> Self {
        Self(bytes)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(rng.gen())
    }

    /// Exactly 32 hex digits.
    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s.trim()).map_err(|e| Error::Invalid(format!("key is not hex: {e}")))?;
        let arr: [u8; 16] = bytes
            .try_into()
            .map_err(|_| Error::Invalid("key must be 128 bits (32 hex digits)".into()))?;
        Ok(Self(arr))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn bytes(&self) -> &[u8; 16] {
        &self.0
    }

    /// The key with bit `i` (0 = most significant bit of byte 0) flipped.
    pub fn with_bit_flipped(&self, i: usize) -> Self {
        let mut b = self.0;
        b[(i / 8) % 16] ^= 0x80 >> (i % 8);
        Self(b)
    }
}

impl TryFrom<String> for ToyKey {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::from_hex(&s)
    }
}

impl From<ToyKey> for String {
    fn from(k: ToyKey) -> String {
        k.to_hex()
    }
}

fn digest64(domain: &[u8], key: &ToyKey, fields: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(domain);
    h.update(key.0);
    for f in fields {
        h.update(f.to_le_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}

fn low_bits(v: u64, bits: u32) -> u64 {
    if bits >= 64 {
        v
    } else {
        v & ((1u64 << bits) - 1)
    }
}

/// Table entry for block `suffix` at walk step `step`: the low `3d` bits of
/// `SHA-256(tag ‖ key ‖ step ‖ suffix)`.
pub fn keyed_prf(key: &ToyKey, d: u32, suffix: u64, step: u64) -> u64 {
    low_bits(digest64(PRF_DOMAIN, key, &[step, suffix]), 3 * d)
}

fn round_fn(key: &ToyKey, step: u64, round: u8, half: u64, width: u32) -> u64 {
    low_bits(digest64(ROUND_DOMAIN, key, &[step, round as u64, half]), width)
}

/// Balanced Feistel network on `2h` bits.
fn feistel_even(key: &ToyKey, h: u32, x: u64, step: u64, inverse: bool) -> u64 {
    let mask = (1u64 << h) - 1;
    let (mut left, mut right) = (x >> h, x & mask);
    if inverse {
        for round in (0..FEISTEL_ROUNDS).rev() {
            let prev_right = left;
            let prev_left = right ^ round_fn(key, step, round, prev_right, h);
            left = prev_left;
            right = prev_right;
        }
    } else {
        for round in 0..FEISTEL_ROUNDS {
            let next = left ^ round_fn(key, step, round, right, h);
            left = right;
            right = next;
        }
    }
    (left << h) | right
}

/// Keyed permutation of `n`-bit strings for walk step `step`: a 4-round
/// balanced Feistel network, with cycle walking on `n + 1` bits when `n` is odd.
pub fn feistel_prp(key: &ToyKey, n: u32, x: u64, step: u64, inverse: bool) -> Result<u64> {
    if !(2..=62).contains(&n) {
        return Err(Error::Invalid(format!("Feistel width n = {n} outside 2..=62")));
    }
    if x >> n != 0 {
        return Err(Error::Invalid(format!("input {x} wider than {n} bits")));
    }
    let h = n.div_ceil(2);
    let mut y = feistel_even(key, h, x, step, inverse);
    while y >> n != 0 {
        y = feistel_even(key, h, y, step, inverse);
    }
    Ok(y)
}

/// `σ` of step `step` as a [`Permutation`].
pub fn prp_permutation(key: &ToyKey, n: u32, step: u64) -> Result<Permutation> {
    let image = (0..1u64 << n)
        .map(|x| feistel_prp(key, n, x, step, false).map(|y| y as u32))
        .collect::<Result<Vec<_>>>()?;
    Permutation::new(image)
}

/// `f` of step `step` as a [`FunctionTable`].
pub fn prf_table(key: &ToyKey, n: u32, d: u32, step: u64) -> Result<FunctionTable> {
    let entries = (0..1u64 << (n - 1)).map(|s| keyed_prf(key, d, s, step)).collect();
    FunctionTable::new(n, d, entries)
}

/// Walk with the same shape as a sampled one, every table and permutation
/// derived from `key`.
pub fn sample_pseudorandom_walk(params: KacParams, key: &ToyKey) -> Result<WalkUnitary> {
    let KacParams { n, d, steps } = params;
    let tables = AngleTables::new(d);
    let steps = (0..steps as u64)
        .map(|s| {
            let f = prf_table(key, n, d, s)?;
            let sigma = prp_permutation(key, n, s)?;
            Ok(WalkStep::with_tables(f, sigma, &tables))
        })
        .collect::<Result<Vec<_>>>()?;
    WalkUnitary::new(n, d, steps)
}

/// Fraction of differing output bits between two keys over `inputs` inputs.
pub fn avalanche_fraction(a: &ToyKey, b: &ToyKey, d: u32, inputs: u64) -> f64 {
    let bits = 3 * d as u64;
    let differing: u64 = (0..inputs)
        .map(|i| (keyed_prf(a, d, i, i / 7) ^ keyed_prf(b, d, i, i / 7)).count_ones() as u64)
        .sum();
    differing as f64 / (bits * inputs) as f64
}

/// Statistical sanity report for the toy PRF/PRP at walk shape `params`.
pub fn prf_report(params: KacParams, key: &ToyKey, seed: u64) -> Result<ExperimentReport> {
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    let KacParams { n, d, steps } = params;
    let config = serde_json::json!({ "n": n, "d": d, "T": steps, "seed": seed, "key": key.to_hex() });
    let mut rep = ExperimentReport::new("prf", Some(seed), config);
    rep.disclaimer = Some(DISCLAIMER.to_string());
    let tag = "toy-prf";

    let avalanche: Vec<f64> = [0, 63, 127].iter().map(|&b| avalanche_fraction(key, &key.with_bit_flipped(b), d, 2000)).collect();
    for (b, a) in [0, 63, 127].iter().zip(&avalanche) {
        rep.checks.push(Check::holds(format!("avalanche_bit{b}"), *a, (0.45..=0.55).contains(a), tag));
    }

    let bins = 64usize;
    let draws = 100_000u64;
    let mut hist = vec![0u64; bins];
    for i in 0..draws {
        hist[(keyed_prf(key, d, i % 4096, i / 4096) % bins as u64) as usize] += 1;
    }
    let expected = draws as f64 / bins as f64;
    let chi2: f64 = hist.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((bins - 1) as f64)
        .map_err(|e| Error::Invalid(format!("chi-square: {e}")))?
        .inverse_cdf(0.99);
    rep.checks.push(Check::upper("chi_square_64_bins", chi2, critical, tag, f64::INFINITY));

    let width = n.min(12);
    let mut roundtrip_failures = 0u64;
    for x in 0..1u64 << width {
        let y = feistel_prp(key, width, x, 0, false)?;
        if feistel_prp(key, width, y, 0, true)? != x {
            roundtrip_failures += 1;
        }
    }
    rep.checks.push(Check::holds("prp_inverse_round_trip", roundtrip_failures as f64, roundtrip_failures == 0, tag));

    let perms = 400u64;
    let fixed: usize = (0..perms).map(|s| prp_permutation(key, n, s).map(|p| p.fixed_points())).sum::<Result<usize>>()?;
    let mean = fixed as f64 / perms as f64;
    rep.checks.push(Check::upper("fixed_point_mean_error", (mean - 1.0).abs(), 4.0 / (perms as f64).sqrt(), tag, f64::INFINITY));

    let walk = sample_pseudorandom_walk(params, key)?;
    let again = sample_pseudorandom_walk(params, key)?;
    rep.checks.push(Check::holds("walk_reproducible", 0.0, walk.to_record() == again.to_record(), tag));
    if n <= 8 {
        let u = crate::kacwalk::compose_dense(&walk, 1 << n)?;
        let defect = crate::numerics::max_abs(&(u.adjoint() * &u - nalgebra::DMatrix::identity(1 << n, 1 << n)));
        rep.checks.push(Check::upper("walk_unitarity_defect", defect, 1e-10, tag, f64::INFINITY));
    }
    rep.values = serde_json::json!({ "avalanche": avalanche, "chi_square": chi2, "chi_square_critical": critical, "fixed_point_mean": mean });
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kacwalk::compose_dense;
    use crate::numerics::{max_abs, stream_rng, C64};
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn key(byte: u8) -> ToyKey {
        ToyKey::new([byte; 16])
    }

    #[test]
    fn hex_round_trip_and_length_check() {
        let k = ToyKey::from_hex("00112233445566778899aabbccddeeff").unwrap();
        assert_eq!(k.to_hex(), "00112233445566778899aabbccddeeff");
        assert!(ToyKey::from_hex("0011").is_err());
        assert!(ToyKey::from_hex("zz112233445566778899aabbccddeeff").is_err());
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<ToyKey>(&json).unwrap(), k);
    }

    #[test]
    fn prf_is_deterministic_and_fits_width() {
        let k = key(3);
        for d in [1, 2, 8, 20] {
            for s in 0..50 {
                let v = keyed_prf(&k, d, s, 4);
                assert_eq!(v, keyed_prf(&k, d, s, 4));
                assert_eq!(v >> (3 * d), 0);
            }
        }
    }

    #[test]
    fn single_key_bit_flip_changes_about_half_the_bits() {
        let k = key(0x5a);
        for bit in [0, 17, 127] {
            let frac = avalanche_fraction(&k, &k.with_bit_flipped(bit), 8, 1000);
            assert!(frac >= 0.45 && frac <= 0.55, "bit {bit}: {frac}");
        }
    }

    #[test]
    fn output_histogram_is_uniform_at_one_percent() {
        let k = key(9);
        let bins = 64usize;
        let draws = 100_000u64;
        let mut hist = vec![0u64; bins];
        for i in 0..draws {
            hist[keyed_prf(&k, 2, i % 4096, i / 4096) as usize] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let chi2: f64 = hist.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
        let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 {chi2} ≥ {critical}");
    }

    #[test]
    fn feistel_inverts_exhaustively_at_n4() {
        let k = key(1);
        for step in 0..5 {
            let mut seen = [false; 16];
            for x in 0..16 {
                let y = feistel_prp(&k, 4, x, step, false).unwrap();
                assert!(!seen[y as usize]);
                seen[y as usize] = true;
                assert_eq!(feistel_prp(&k, 4, y, step, true).unwrap(), x);
            }
        }
    }

    #[test]
    fn fixed_points_average_about_one_per_permutation() {
        let k = key(2);
        let perms = 400u64;
        let fixed: usize = (0..perms).map(|s| prp_permutation(&k, 5, s).unwrap().fixed_points()).sum();
        let mean = fixed as f64 / perms as f64;
        // A uniform permutation has one fixed point on average, variance 1.
        assert!((mean - 1.0).abs() < 4.0 / (perms as f64).sqrt(), "{mean}");
    }

    #[test]
    fn cycle_structure_depends_on_key() {
        let a: Vec<Vec<usize>> = (0..8).map(|s| prp_permutation(&key(4), 5, s).unwrap().cycle_type()).collect();
        let b: Vec<Vec<usize>> = (0..8).map(|s| prp_permutation(&key(5), 5, s).unwrap().cycle_type()).collect();
        assert_ne!(a, b);
    }

    #[test]
    fn walk_is_reproducible_and_unitary() {
        let params = KacParams::new(3, 4, 12).unwrap();
        let k = ToyKey::random(&mut stream_rng(8, 0));
        let w1 = sample_pseudorandom_walk(params, &k).unwrap();
        let w2 = sample_pseudorandom_walk(params, &k).unwrap();
        assert_eq!(w1.to_record(), w2.to_record());
        let u = compose_dense(&w1, 256).unwrap();
        let defect = max_abs(&(u.adjoint() * &u - DMatrix::<C64>::identity(8, 8)));
        assert!(defect < 1e-10, "{defect}");
    }

    #[test]
    fn report_passes_and_carries_the_disclaimer() {
        let rep = prf_report(KacParams::new(4, 4, 8).unwrap(), &key(7), 7).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
        assert_eq!(rep.disclaimer.as_deref(), Some(DISCLAIMER));
    }

    proptest! {
        #[test]
        fn feistel_round_trips_for_any_width(n in 2u32..=12, x in any::<u64>(), step in 0u64..100, b in any::<u8>()) {
            let x = x & ((1u64 << n) - 1);
            let k = key(b);
            let y = feistel_prp(&k, n, x, step, false).unwrap();
            prop_assert!(y >> n == 0);
            prop_assert_eq!(feistel_prp(&k, n, y, step, true).unwrap(), x);
        }
    }
}
