//! Batch-means estimates, bootstrap noise floors and one-sided trend tests.
//!
//! Trials are split into at most [`DEFAULT_BATCHES`] contiguous batches. Each
//! batch is summed sequentially, batches run in parallel, and batch sums are
//! combined in batch order, so every result depends only on the seed and the
//! trial count, never on the thread count.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::numerics::{stream_rng, trace_distance, StreamRng, C64, ZERO};

pub const DEFAULT_BATCHES: usize = 100;
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Stream tag reserved for bootstrap resampling.
const BOOTSTRAP_TAG: u32 = 0xB007;

/// RNG stream of trial `trial` under role `tag`.
pub fn trial_rng(seed: u64, tag: u32, trial: usize) -> StreamRng {
    stream_rng(seed, ((tag as u64) << 32) | trial as u64)
}

/// Contiguous trial ranges, sizes differing by at most one.
pub fn batch_ranges(trials: usize, batches: usize) -> Vec<Range<usize>> {
    let b = batches.clamp(1, trials.max(1));
    let (base, extra) = (trials / b, trials % b);
    let mut start = 0;
    (0..b)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::Invalid("at least one trial is required".into()));
    }
    Ok(())
}

/// Scalar Monte-Carlo estimate; `stderr = sd(batch means)/√B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Estimate {
    /// Normal-approximation interval at the given two-sided level.
    pub fn interval(&self, level: f64) -> (f64, f64) {
        let z = standard_normal().inverse_cdf(0.5 + level / 2.0);
        (self.mean - z * self.stderr, self.mean + z * self.stderr)
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

/// Mean of `f` over `trials` independent trials.
pub fn scalar_estimate<F>(trials: usize, batches: usize, seed: u64, tag: u32, f: F) -> Result<Estimate>
where
    F: Fn(&mut StreamRng) -> Result<f64> + Sync,
{
    check_trials(trials)?;
    let ranges = batch_ranges(trials, batches);
    let sums: Vec<f64> = ranges
        .par_iter()
        .map(|r| {
            let mut s = 0.0;
            for trial in r.clone() {
                s += f(&mut trial_rng(seed, tag, trial))?;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = sums.iter().zip(&ranges).map(|(s, r)| s / r.len() as f64).collect();
    let mean = sums.iter().sum::<f64>() / trials as f64;
    let b = means.len();
    let stderr = if b > 1 {
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        mean,
        stderr,
        samples: trials,
        seed,
    })
}

/// Matrix-valued Monte-Carlo estimate with its batch means kept for bootstrap.
#[derive(Clone, Debug)]
pub struct MatrixEstimate {
    pub mean: DMatrix<C64>,
    /// Entrywise batch-means standard error `√(Σ_b |m_b − mean|² / (B(B−1)))`.
    pub stderr: DMatrix<f64>,
    pub samples: usize,
    pub seed: u64,
    batch_means: Vec<DMatrix<C64>>,
}

impl MatrixEstimate {
    fn from_batches(sums: Vec<DMatrix<C64>>, ranges: &[Range<usize>], seed: u64) -> Self {
        let trials: usize = ranges.iter().map(|r| r.len()).sum();
        let (rows, cols) = sums[0].shape();
        let mut total = DMatrix::from_element(rows, cols, ZERO);
        for s in &sums {
            total += s;
        }
        let mean = total / C64::new(trials as f64, 0.0);
        let batch_means: Vec<DMatrix<C64>> = sums
            .into_iter()
            .zip(ranges)
            .map(|(s, r)| s / C64::new(r.len() as f64, 0.0))
            .collect();
        let b = batch_means.len();
        let stderr = if b > 1 {
            let mut acc = DMatrix::<f64>::zeros(rows, cols);
            for m in &batch_means {
                acc += (m - &mean).map(|z| z.norm_sqr());
            }
            acc.map(|v| (v / (b * (b - 1)) as f64).sqrt())
        } else {
            DMatrix::zeros(rows, cols)
        };
        Self {
            mean,
            stderr,
            samples: trials,
            seed,
            batch_means,
        }
    }

    pub fn batches(&self) -> usize {
        self.batch_means.len()
    }

    /// Mean of `B` batch means drawn with replacement.
    pub fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<C64> {
        let b = self.batch_means.len();
        let mut acc = DMatrix::from_element(self.mean.nrows(), self.mean.ncols(), ZERO);
        for _ in 0..b {
            acc += &self.batch_means[rng.gen_range(0..b)];
        }
        acc / C64::new(b as f64, 0.0)
    }

    /// Largest `|mean − target| − k·stderr` over entries (≤ 0 when every entry is within `k` errors).
    pub fn max_excess_deviation(&self, target: &DMatrix<C64>, k: f64) -> f64 {
        self.mean
            .iter()
            .zip(target.iter())
            .zip(self.stderr.iter())
            .map(|((m, t), s)| (m - t).norm() - k * s)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Accumulates `outputs` matrices per trial; `f` adds trial contributions into
/// its accumulator slice and the result holds per-output means.
pub fn matrix_estimates<F>(
    outputs: usize,
    dim: usize,
    trials: usize,
    batches: usize,
    seed: u64,
    tag: u32,
    f: F,
) -> Result<Vec<MatrixEstimate>>
where
    F: Fn(&mut StreamRng, &mut [DMatrix<C64>]) -> Result<()> + Sync,
{
    check_trials(trials)?;
    let ranges = batch_ranges(trials, batches);
    let sums: Vec<Vec<DMatrix<C64>>> = ranges
        .par_iter()
        .map(|r| {
            let mut acc = vec![DMatrix::from_element(dim, dim, ZERO); outputs];
            for trial in r.clone() {
                f(&mut trial_rng(seed, tag, trial), &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut per_output: Vec<Vec<DMatrix<C64>>> = vec![Vec::with_capacity(sums.len()); outputs];
    for batch in sums {
        for (k, m) in batch.into_iter().enumerate() {
            per_output[k].push(m);
        }
    }
    Ok(per_output
        .into_iter()
        .map(|s| MatrixEstimate::from_batches(s, &ranges, seed))
        .collect())
}

/// One side of a trace-distance comparison.
#[derive(Clone, Copy, Debug)]
pub enum Side<'a> {
    Sampled(&'a MatrixEstimate),
    Exact(&'a DMatrix<C64>),
}

impl Side<'_> {
    fn point(&self) -> &DMatrix<C64> {
        match self {
            Side::Sampled(e) => &e.mean,
            Side::Exact(m) => m,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<C64> {
        match self {
            Side::Sampled(e) => e.resample(rng),
            Side::Exact(m) => (*m).clone(),
        }
    }
}

/// Trace distance between two (possibly sampled) states with bootstrap error bars.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdEstimate {
    pub value: f64,
    /// Bootstrap standard deviation of the distance.
    pub stderr: f64,
    /// Percentile bootstrap 95% interval.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Mean distance between resampled sides when both share one state.
    pub null_mean: f64,
    /// 95th percentile of that null distribution: distances below it are
    /// indistinguishable from sampling noise.
    pub noise_floor: f64,
}

impl TdEstimate {
    /// Distance above the sampling bias `null_mean`.
    pub fn excess(&self) -> f64 {
        self.value - self.null_mean
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64;
    (m, var.sqrt())
}

/// Trace distance `‖a − b‖₁` with [`BOOTSTRAP_RESAMPLES`] resamples.
///
/// The null distribution recentres each sampled side on the pooled point
/// estimate (the exact side when there is one) and resamples its noise, so it
/// describes the distances produced by noise alone.
pub fn td_estimate(a: Side, b: Side, boot_seed: u64) -> Result<TdEstimate> {
    let value = trace_distance(a.point(), b.point())?;
    let centre = match (a, b) {
        (Side::Exact(m), _) | (_, Side::Exact(m)) => m.clone(),
        (Side::Sampled(x), Side::Sampled(y)) => (&x.mean + &y.mean) * C64::new(0.5, 0.0),
    };
    let mut rng = stream_rng(boot_seed, (BOOTSTRAP_TAG as u64) << 32);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut null = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let noise = |s: &Side, rng: &mut StreamRng| -> DMatrix<C64> { s.draw(rng) - s.point() };
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let (da, db) = (a.draw(&mut rng), b.draw(&mut rng));
        boot.push(trace_distance(&da, &db)?);
        let na = &centre + noise(&a, &mut rng);
        let nb = &centre + noise(&b, &mut rng);
        null.push(trace_distance(&na, &nb)?);
    }
    let (_, stderr) = mean_sd(&boot);
    boot.sort_by(f64::total_cmp);
    let (null_mean, _) = mean_sd(&null);
    null.sort_by(f64::total_cmp);
    Ok(TdEstimate {
        value,
        stderr,
        ci_low: percentile(&boot, 0.025),
        ci_high: percentile(&boot, 0.975),
        null_mean,
        noise_floor: percentile(&null, 0.95),
    })
}

/// One-sided test of `values[i+1] ≤ values[i]` for all consecutive pairs,
/// Bonferroni-corrected over the pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    pub alpha: f64,
    /// Critical `z` after the correction.
    pub critical: f64,
    /// `(values[i+1] − values[i]) / √(s_i² + s_{i+1}²)` per pair.
    pub z: Vec<f64>,
    /// No increase is significant.
    pub holds: bool,
}

pub fn non_increasing_test(values: &[f64], stderrs: &[f64], alpha: f64) -> Result<TrendTest> {
    if values.len() != stderrs.len() {
        return Err(Error::Dimension {
            expected: values.len(),
            got: stderrs.len(),
        });
    }
    let pairs = values.len().saturating_sub(1).max(1);
    let critical = standard_normal().inverse_cdf(1.0 - alpha / pairs as f64);
    let z: Vec<f64> = values
        .windows(2)
        .zip(stderrs.windows(2))
        .map(|(v, s)| {
            let se = (s[0] * s[0] + s[1] * s[1]).sqrt();
            let diff = v[1] - v[0];
            if se > 0.0 {
                diff / se
            } else if diff > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect();
    let holds = z.iter().all(|&x| x <= critical);
    Ok(TrendTest {
        alpha,
        critical,
        z,
        holds,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Invalid("thread count must be positive".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Invalid(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
