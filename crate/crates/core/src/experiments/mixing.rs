//! Moments of `K|0ⁿ⟩` for walk prefixes of growing length against the Haar
//! moments: `I/N` for one copy and `2Π_sym/(N(N+1))` for two.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::report::{Check, ExperimentReport, TableRow};
use super::stats::{matrix_estimates, non_increasing_test, td_estimate, Side, TdEstimate, TrendTest};
use super::REF_STATE_SCRAMBLING;
use crate::error::{resource, Error, Result};
use crate::kacwalk::{KacParams, WalkSampler};
use crate::numerics::{operator_norm, Operator, C64, ZERO};

const TAG: u32 = 0x3A;
/// Largest `N^k` handled densely.
pub const MIXING_DIM_CAP: usize = 256;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingConfig {
    pub n: u32,
    pub d: u32,
    /// Walk lengths, strictly increasing.
    pub steps: Vec<usize>,
    pub copies: u32,
    pub trials: usize,
    pub seed: u64,
    pub batches: usize,
}

impl MixingConfig {
    /// `T ∈ {0, 1, 2, 4, …, 30n}` at `d = min(5n, 8)`.
    pub fn standard(n: u32, copies: u32, trials: usize, seed: u64) -> Result<Self> {
        let last = 30 * n as usize;
        let mut steps = vec![0];
        let mut s = 1;
        while s < last {
            steps.push(s);
            s *= 2;
        }
        steps.push(last);
        Ok(Self {
            n,
            d: KacParams::standard(n)?.d,
            steps,
            copies,
            trials,
            seed,
            batches: super::stats::DEFAULT_BATCHES,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingPoint {
    #[serde(rename = "T")]
    pub steps: usize,
    pub td: TdEstimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingCurve {
    pub copies: u32,
    pub points: Vec<MixingPoint>,
    /// Trend test on `td − null_mean` along the curve.
    pub trend: TrendTest,
    /// Operator norm of the Haar target.
    pub target_norm: f64,
}

/// Haar moment `E[(|ψ⟩⟨ψ|)^{⊗k}]` for `k ∈ {1, 2}`.
pub fn haar_moment(big_n: usize, copies: u32) -> Result<DMatrix<C64>> {
    match copies {
        1 => Ok(DMatrix::identity(big_n, big_n) / C64::new(big_n as f64, 0.0)),
        2 => {
            let dim = big_n * big_n;
            let scale = C64::new(1.0 / (big_n * (big_n + 1)) as f64, 0.0);
            Ok(DMatrix::from_fn(dim, dim, |r, c| {
                let swap = (c % big_n) * big_n + c / big_n;
                let v = f64::from(u8::from(r == c)) + f64::from(u8::from(r == swap));
                C64::new(v, 0.0) * scale
            }))
        }
        k => Err(Error::Invalid(format!("copies must be 1 or 2, got {k}"))),
    }
}

pub fn mixing_experiment(cfg: &MixingConfig) -> Result<MixingCurve> {
    let big_n = 1usize << cfg.n;
    if cfg.n > 6 {
        return Err(Error::Invalid(format!("mixing supports n ≤ 6, got {}", cfg.n)));
    }
    let target = haar_moment(big_n, cfg.copies)?;
    let dim = target.nrows();
    if dim > MIXING_DIM_CAP {
        return Err(resource("mixing moment dimension", dim as u128, MIXING_DIM_CAP as u128));
    }
    if cfg.steps.is_empty() || cfg.steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("walk lengths must be non-empty and strictly increasing".into()));
    }
    let last = *cfg.steps.last().expect("non-empty");
    let sampler = WalkSampler::new(KacParams::new(cfg.n, cfg.d, last.max(1))?);
    let copies = cfg.copies;
    let ests = matrix_estimates(cfg.steps.len(), dim, cfg.trials, cfg.batches, cfg.seed, TAG, |rng, acc| {
        let walk = sampler.sample_len(last, rng);
        let mut psi = vec![ZERO; big_n];
        psi[0] = C64::new(1.0, 0.0);
        let mut scratch = Vec::with_capacity(big_n);
        let mut done = 0;
        for (slot, &t) in cfg.steps.iter().enumerate() {
            for step in &walk.steps()[done..t] {
                step.apply_rows(&mut psi, 1, &mut scratch);
            }
            done = t;
            let v: Vec<C64> = if copies == 1 {
                psi.clone()
            } else {
                (0..dim).map(|i| psi[i / big_n] * psi[i % big_n]).collect()
            };
            let m = &mut acc[slot];
            for (i, a) in v.iter().enumerate() {
                if *a == ZERO {
                    continue;
                }
                for (j, b) in v.iter().enumerate() {
                    m[(i, j)] += a * b.conj();
                }
            }
        }
        Ok(())
    })?;
    let points = ests
        .iter()
        .zip(&cfg.steps)
        .enumerate()
        .map(|(i, (e, &t))| {
            Ok(MixingPoint {
                steps: t,
                td: td_estimate(Side::Sampled(e), Side::Exact(&target), cfg.seed ^ ((i as u64 + 1) << 40))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let excess: Vec<f64> = points.iter().map(|p| p.td.excess()).collect();
    let errs: Vec<f64> = points.iter().map(|p| p.td.stderr).collect();
    Ok(MixingCurve {
        copies,
        trend: non_increasing_test(&excess, &errs, 0.05)?,
        target_norm: operator_norm(&Operator::Dense(target))?.value,
        points,
    })
}

impl MixingCurve {
    /// The last point is within three noise floors of the target.
    pub fn reaches_target(&self) -> bool {
        self.points.last().is_some_and(|p| p.td.value <= 3.0 * p.td.noise_floor)
    }

    pub fn report(&self, cfg: &MixingConfig) -> Result<ExperimentReport> {
        let mut rep = ExperimentReport::new("mixing", Some(cfg.seed), serde_json::to_value(cfg)?);
        let big_n = (1usize << cfg.n) as f64;
        rep.checks.push(Check::holds("non_increasing", self.trend.z.iter().copied().fold(f64::NEG_INFINITY, f64::max), self.trend.holds, REF_STATE_SCRAMBLING));
        if let Some(p) = self.points.last() {
            let check = Check::upper("final_td", p.td.value, 3.0 * p.td.noise_floor, REF_STATE_SCRAMBLING, f64::INFINITY);
            rep.checks.push(if self.copies == 1 { check } else { Check { flag: super::report::Flag::Informational, ..check } });
        }
        let norm_target = if self.copies == 1 { 1.0 / big_n } else { 2.0 / (big_n * (big_n + 1.0)) };
        rep.checks.push(Check::upper("target_norm_error", (self.target_norm - norm_target).abs(), 1e-12, REF_STATE_SCRAMBLING, f64::INFINITY));
        if let Some(p) = self.points.iter().find(|p| p.steps == 0) {
            let exact = if self.copies == 1 { 2.0 * (1.0 - 1.0 / big_n) } else { 2.0 * (1.0 - 2.0 / (big_n * (big_n + 1.0))) };
            rep.checks.push(Check::upper("zero_step_td_error", (p.td.value - exact).abs(), 1e-12, REF_STATE_SCRAMBLING, f64::INFINITY));
        }
        for p in &self.points {
            rep.rows.push(TableRow {
                n: cfg.n,
                d: Some(cfg.d),
                steps: Some(p.steps),
                t: None,
                family: format!("walk_k{}", self.copies),
                metric: "td_to_haar_moment".into(),
                value: p.td.value,
                stderr: Some(p.td.stderr),
                bound: Some(3.0 * p.td.noise_floor),
                bound_ref: REF_STATE_SCRAMBLING.into(),
                flag: super::report::Flag::Informational,
            });
        }
        rep.values = serde_json::to_value(self)?;
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_moments_are_states_with_known_norms() {
        for big_n in [2usize, 4, 8] {
            let one = haar_moment(big_n, 1).unwrap();
            let two = haar_moment(big_n, 2).unwrap();
            assert!((one.trace().re - 1.0).abs() < 1e-12);
            assert!((two.trace().re - 1.0).abs() < 1e-12);
            let norm = operator_norm(&Operator::Dense(two)).unwrap().value;
            assert!((norm - 2.0 / (big_n * (big_n + 1)) as f64).abs() < 1e-12);
        }
        assert!(haar_moment(4, 3).is_err());
    }

    #[test]
    fn zero_steps_give_the_pure_state_distance() {
        let cfg = MixingConfig {
            n: 3,
            d: 4,
            steps: vec![0, 1],
            copies: 1,
            trials: 50,
            seed: 1,
            batches: 10,
        };
        let c = mixing_experiment(&cfg).unwrap();
        assert!((c.points[0].td.value - 2.0 * (1.0 - 1.0 / 8.0)).abs() < 1e-12);
        assert!(c.points[1].td.value < c.points[0].td.value);
    }

    #[test]
    fn one_copy_curve_reaches_the_maximally_mixed_state() {
        let cfg = MixingConfig {
            steps: vec![0, 1, 2, 4, 8, 30],
            ..MixingConfig::standard(2, 1, 4000, 7).unwrap()
        };
        let c = mixing_experiment(&cfg).unwrap();
        assert!(c.trend.holds, "{:?}", c.trend);
        assert!(c.reaches_target(), "{:?}", c.points.last());
        assert!(c.report(&cfg).unwrap().passed());
    }

    #[test]
    fn lengths_must_increase() {
        let cfg = MixingConfig {
            steps: vec![2, 1],
            ..MixingConfig::standard(2, 1, 10, 0).unwrap()
        };
        assert!(mixing_experiment(&cfg).is_err());
    }
}
