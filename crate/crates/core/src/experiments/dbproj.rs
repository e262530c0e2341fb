//! Weight of the recorded inputs on distinct blocks after `t` forward queries
//! to `PR · G` with `G = P·K`, `K` a sampled walk and `P` a uniform permutation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::prexact::PrChain;
use super::report::{Check, ExperimentReport, Flag, TableRow};
use super::stats::{scalar_estimate, Estimate, DEFAULT_BATCHES};
use super::REF_DB_PROJECTION;
use crate::error::{Error, Result};
use crate::kacwalk::{compose_dense, KacParams, Permutation, WalkSampler};
use crate::numerics::{C64, ZERO};
use crate::oracles::AdversarySpec;

/// Tag of the trial streams.
const TAG: u32 = 0xDB;

/// Slack constant `c` in the checked bound `1 − c·t²/N`.
pub const DB_SLACK: f64 = 10.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DbProjConfig {
    pub params: KacParams,
    pub t: usize,
    pub m: u32,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_batches() -> usize {
    DEFAULT_BATCHES
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DbProjResult {
    pub estimate: Estimate,
    /// `1 − DB_SLACK·t²/N`; vacuous when ≤ 0.
    pub bound: f64,
    /// `1 − t²/N`.
    pub unit_slack_bound: f64,
}

/// Monte-Carlo mean of `‖Π_X^(t)·PR·G·…|0⟩‖²` over `G = P·K`. The adversary's
/// interleaving unitaries are fixed by the seed.
pub fn dbproj_experiment(cfg: &DbProjConfig) -> Result<DbProjResult> {
    let KacParams { n, .. } = cfg.params;
    let big_n = 1usize << n;
    let spec = AdversarySpec::forward(n, cfg.m, cfg.t, cfg.seed)?;
    let sampler = WalkSampler::new(cfg.params);
    // Validate the sizes once before the trials start.
    PrChain::new(&spec, &DMatrix::identity(big_n, big_n))?;
    let estimate = scalar_estimate(cfg.trials, cfg.batches, cfg.seed, TAG, |rng| {
        let k = compose_dense(&sampler.sample(rng), big_n)?;
        let p = permutation_matrix(&Permutation::random(big_n, rng));
        let chain = PrChain::new(&spec, &(p * k))?;
        Ok(chain.x_db_weight())
    })?;
    Ok(DbProjResult {
        estimate,
        bound: 1.0 - DB_SLACK * (cfg.t * cfg.t) as f64 / big_n as f64,
        unit_slack_bound: 1.0 - (cfg.t * cfg.t) as f64 / big_n as f64,
    })
}

/// `P|x⟩ = |σ(x)⟩`.
fn permutation_matrix(p: &Permutation) -> DMatrix<C64> {
    let len = p.len();
    let mut m = DMatrix::from_element(len, len, ZERO);
    for x in 0..len {
        m[(p.apply(x), x)] = C64::new(1.0, 0.0);
    }
    m
}

/// Negative control: with `G = I`, `m = n`, the adversary swaps its first
/// output into `B` so both queries land on input `0`. The weight is 0.
pub fn repeated_query_control(n: u32) -> Result<f64> {
    let big_n = 1usize << n;
    let dim = big_n * big_n;
    let swap = DMatrix::from_fn(dim, dim, |r, c| {
        let (a, b) = (c / big_n, c % big_n);
        if r == b * big_n + a {
            C64::new(1.0, 0.0)
        } else {
            ZERO
        }
    });
    let spec = AdversarySpec::custom(n, n, vec![false, false], vec![DMatrix::identity(dim, dim), swap])?;
    Ok(PrChain::new(&spec, &DMatrix::identity(big_n, big_n))?.x_db_weight())
}

impl DbProjResult {
    pub fn report(&self, cfg: &DbProjConfig) -> Result<ExperimentReport> {
        let config = serde_json::to_value(cfg).map_err(Error::from)?;
        let mut rep = ExperimentReport::new("dbproj", Some(cfg.seed), config);
        let lower = self.estimate.interval(0.95).0;
        let mut slack = Check::lower("distinct_block_weight_mean", self.estimate.mean, self.bound, REF_DB_PROJECTION);
        if self.bound <= 0.0 {
            slack.flag = Flag::Informational;
        }
        rep.checks.push(slack);
        rep.checks.push(Check::lower(
            "distinct_block_weight_mean_unit_slack",
            self.estimate.mean,
            self.unit_slack_bound,
            REF_DB_PROJECTION,
        ));
        rep.checks.push(Check::info("distinct_block_weight_ci95_low", lower));
        rep.values = serde_json::to_value(self)?;
        rep.rows.push(TableRow {
            n: cfg.params.n,
            d: Some(cfg.params.d),
            steps: Some(cfg.params.steps),
            t: Some(cfg.t),
            family: "pr_g".into(),
            metric: "x_db_weight".into(),
            value: self.estimate.mean,
            stderr: Some(self.estimate.stderr),
            bound: Some(self.bound),
            bound_ref: REF_DB_PROJECTION.into(),
            flag: rep.checks[0].flag,
        });
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: u32, t: usize, trials: usize) -> DbProjConfig {
        DbProjConfig {
            params: KacParams::new(n, 4, 6 * n as usize).unwrap(),
            t,
            m: 1,
            trials,
            seed: 21,
            batches: 10,
        }
    }

    #[test]
    fn single_query_weight_is_exactly_one() {
        let r = dbproj_experiment(&cfg(3, 1, 20)).unwrap();
        assert!((r.estimate.mean - 1.0).abs() < 1e-12);
        assert!(r.estimate.stderr < 1e-12);
    }

    #[test]
    fn two_queries_stay_above_the_slack_bound() {
        let c = cfg(4, 2, 200);
        let r = dbproj_experiment(&c).unwrap();
        assert!(r.estimate.mean < 1.0);
        assert!(r.estimate.mean >= r.bound, "{:?}", r.estimate);
        assert!(r.estimate.mean >= r.unit_slack_bound, "{:?}", r.estimate);
        assert_eq!(r.report(&c).unwrap().checks[0].flag, Flag::Informational);
        assert!(r.report(&c).unwrap().passed());
    }

    #[test]
    fn repeated_input_control_has_no_distinct_block_weight() {
        let w = repeated_query_control(3).unwrap();
        assert!(w.abs() < 1e-12, "{w}");
    }

    #[test]
    fn permutation_matrix_maps_basis_states() {
        let p = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        let m = permutation_matrix(&p);
        for x in 0..4 {
            assert_eq!(m[(p.apply(x), x)], C64::new(1.0, 0.0));
        }
    }
}
