//! Averaged adversary views under several oracle families and the trace
//! distances between them.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::prexact::PrChain;
use super::report::{Check, ExperimentReport, Flag, TableRow};
use super::stats::{matrix_estimates, non_increasing_test, td_estimate, MatrixEstimate, Side, TdEstimate, TrendTest, DEFAULT_BATCHES};
use super::{REF_FORWARD_SECURITY, REF_STRONG_SECURITY};
use crate::error::{resource, Error, Result};
use crate::kacwalk::{compose_dense, KacParams, WalkSampler, WalkUnitary};
use crate::numerics::{haar_matrix, hermitian_eigenvalues, outer, C64, ZERO};
use crate::oracles::{apply_on_a, build_v, run_adversary, AdversarySpec};
use crate::prf::{sample_pseudorandom_walk, ToyKey};

/// Oracle ensembles compared by the distinguishing experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Walk with `T + 1` steps.
    HpcShort,
    /// Walk with `2T + 1` steps.
    HpcLong,
    Haar,
    /// `D · (H_f P_σ) · C` with `C, D` Haar and one walk step.
    HaarSandwich,
    /// Exact path-recording view (variable-length `V` for inverse queries).
    PrExact,
    /// Walk with `T + 1` steps derived from a random toy key.
    Pseudorandom,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::HpcShort,
        Family::HpcLong,
        Family::Haar,
        Family::HaarSandwich,
        Family::PrExact,
        Family::Pseudorandom,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Family::HpcShort => "hpc_t1",
            Family::HpcLong => "hpc_2t1",
            Family::Haar => "haar",
            Family::HaarSandwich => "haar_sandwich",
            Family::PrExact => "pr_exact",
            Family::Pseudorandom => "pseudorandom",
        }
    }

    fn tag(&self) -> u32 {
        match self {
            Family::HpcShort => 1,
            Family::HpcLong => 2,
            Family::Haar => 3,
            Family::HaarSandwich => 4,
            Family::PrExact => 5,
            Family::Pseudorandom => 6,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.label() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Family::ALL.iter().map(|f| f.label()).collect();
                Error::Invalid(format!("unknown family '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// A sampled unitary answering forward and inverse queries on `A`.
enum Sampled {
    Walk(WalkUnitary),
    Dense(DMatrix<C64>),
}

impl Sampled {
    fn apply(&self, v: &mut [C64], width: usize, inverse: bool) {
        match (self, inverse) {
            (Sampled::Walk(w), false) => w.apply_rows(v, width),
            (Sampled::Walk(w), true) => w.apply_rows_adjoint(v, width),
            (Sampled::Dense(u), false) => v.copy_from_slice(&apply_on_a(u, v, width)),
            (Sampled::Dense(u), true) => v.copy_from_slice(&apply_on_a(&u.adjoint(), v, width)),
        }
    }
}

/// Final AB vector of the adversary against one fixed unitary.
fn unitary_view(spec: &AdversarySpec, u: &Sampled) -> Vec<C64> {
    let width = 1usize << spec.m();
    let dim = (1usize << spec.n()) * width;
    let mut v = DVector::from_element(dim, ZERO);
    v[0] = C64::new(1.0, 0.0);
    for (a, &inv) in spec.unitaries().iter().zip(spec.directions()) {
        v = a * v;
        u.apply(v.as_mut_slice(), width, inv);
    }
    v.as_slice().to_vec()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistinguishConfig {
    pub n: u32,
    pub d: u32,
    #[serde(rename = "T")]
    pub steps: usize,
    pub m: u32,
    /// Query directions; `true` marks an inverse query.
    pub directions: Vec<bool>,
    pub families: Vec<Family>,
    pub trials: usize,
    pub seed: u64,
    /// Seed of the interleaving unitaries; derived from `seed` when absent.
    #[serde(default)]
    pub adversary_seed: Option<u64>,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_batches() -> usize {
    DEFAULT_BATCHES
}

/// Cap on `N^{2t}·2^{n+m}` for the exact variable-length view.
pub const EXACT_VIEW_CAP: u128 = 1 << 32;

impl DistinguishConfig {
    pub fn t(&self) -> usize {
        self.directions.len()
    }

    fn spec(&self) -> Result<AdversarySpec> {
        let spec_seed = match self.adversary_seed {
            Some(s) => s,
            None => super::stats::trial_rng(self.seed, 0xAD, 0).gen(),
        };
        AdversarySpec::from_seed(self.n, self.m, self.directions.clone(), spec_seed)
    }

    fn walk_params(&self, steps: usize) -> Result<KacParams> {
        KacParams::new(self.n, self.d, steps)
    }
}

/// Averaged view of one family.
pub enum View {
    Sampled(MatrixEstimate),
    Exact(DMatrix<C64>),
}

impl View {
    pub fn mean(&self) -> &DMatrix<C64> {
        match self {
            View::Sampled(e) => &e.mean,
            View::Exact(m) => m,
        }
    }

    fn side(&self) -> Side<'_> {
        match self {
            View::Sampled(e) => Side::Sampled(e),
            View::Exact(m) => Side::Exact(m),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilySummary {
    pub family: Family,
    pub samples: usize,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairDistance {
    pub a: Family,
    pub b: Family,
    pub td: TdEstimate,
}

pub struct DistinguishResult {
    pub views: Vec<(Family, View)>,
    pub summaries: Vec<FamilySummary>,
    pub pairs: Vec<PairDistance>,
}

impl DistinguishResult {
    pub fn pair(&self, a: Family, b: Family) -> Option<&PairDistance> {
        self.pairs.iter().find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

/// Averaged AB state for every requested family and pairwise trace distances.
pub fn distinguish_experiment(cfg: &DistinguishConfig) -> Result<DistinguishResult> {
    if cfg.families.is_empty() {
        return Err(Error::Invalid("no families selected".into()));
    }
    let spec = cfg.spec()?;
    let mut views = Vec::new();
    for &family in &cfg.families {
        views.push((family, family_view(cfg, &spec, family)?));
    }
    let summaries = views
        .iter()
        .map(|(f, v)| {
            let eig = hermitian_eigenvalues(v.mean());
            FamilySummary {
                family: *f,
                samples: match v {
                    View::Sampled(e) => e.samples,
                    View::Exact(_) => 0,
                },
                trace: v.mean().trace().re,
                min_eigenvalue: eig.iter().copied().fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..views.len() {
        for j in i + 1..views.len() {
            let boot_seed = cfg.seed ^ ((i as u64) << 40) ^ ((j as u64) << 48);
            let td = td_estimate(views[i].1.side(), views[j].1.side(), boot_seed)?;
            pairs.push(PairDistance {
                a: views[i].0,
                b: views[j].0,
                td,
            });
        }
    }
    Ok(DistinguishResult {
        views,
        summaries,
        pairs,
    })
}

fn family_view(cfg: &DistinguishConfig, spec: &AdversarySpec, family: Family) -> Result<View> {
    let big_n = 1usize << cfg.n;
    let dim = big_n << cfg.m;
    let tag = family.tag() | (cfg.n << 8);
    let run = |sample: &(dyn Fn(&mut crate::numerics::StreamRng) -> Result<Sampled> + Sync)| -> Result<View> {
        let est = matrix_estimates(1, dim, cfg.trials, cfg.batches, cfg.seed, tag, |rng, acc| {
            let u = sample(rng)?;
            acc[0] += outer(&unitary_view(spec, &u));
            Ok(())
        })?;
        Ok(View::Sampled(est.into_iter().next().expect("one output")))
    };
    match family {
        Family::HpcShort | Family::HpcLong => {
            let steps = if family == Family::HpcShort { cfg.steps + 1 } else { 2 * cfg.steps + 1 };
            let sampler = WalkSampler::new(cfg.walk_params(steps)?);
            run(&|rng| Ok(Sampled::Walk(sampler.sample(rng))))
        }
        Family::Haar => run(&|rng| Ok(Sampled::Dense(haar_matrix(big_n, rng)))),
        Family::HaarSandwich => {
            let sampler = WalkSampler::new(cfg.walk_params(1)?);
            run(&|rng| {
                let c = haar_matrix(big_n, rng);
                let step = compose_dense(&sampler.sample(rng), big_n)?;
                let d = haar_matrix(big_n, rng);
                Ok(Sampled::Dense(d * step * c))
            })
        }
        Family::Pseudorandom => {
            let params = cfg.walk_params(cfg.steps + 1)?;
            run(&|rng| Ok(Sampled::Walk(sample_pseudorandom_walk(params, &ToyKey::random(rng))?)))
        }
        Family::PrExact => exact_view(cfg, spec).map(View::Exact),
    }
}

fn exact_view(cfg: &DistinguishConfig, spec: &AdversarySpec) -> Result<DMatrix<C64>> {
    let big_n = 1usize << cfg.n;
    if spec.is_forward_only() {
        return Ok(PrChain::new(spec, &DMatrix::identity(big_n, big_n))?.ab_density());
    }
    let work = (big_n as u128).pow(2 * cfg.t() as u32) << (cfg.n + cfg.m);
    if work > EXACT_VIEW_CAP {
        return Err(resource("exact V view", work, EXACT_VIEW_CAP));
    }
    let v = build_v(cfg.n, cfg.t())?;
    Ok(run_adversary(&v, spec)?.reduced_density())
}

/// Slack constant `c` in the checked bound `c·t²/N`.
pub const FORWARD_SLACK: f64 = 8.0;

impl DistinguishResult {
    /// JSON values, summaries and one CSV row per (family pair, metric).
    pub fn report(&self, cfg: &DistinguishConfig) -> Result<ExperimentReport> {
        let mut rep = ExperimentReport::new("distinguish", Some(cfg.seed), serde_json::to_value(cfg)?);
        if cfg.families.contains(&Family::Pseudorandom) {
            rep.disclaimer = Some(crate::prf::DISCLAIMER.to_string());
        }
        for s in &self.summaries {
            if s.family == Family::PrExact && !cfg.directions.iter().all(|b| !b) {
                // The variable-length view is not trace preserving in general.
                rep.checks.push(Check::info(format!("{}_trace", s.family), s.trace));
                continue;
            }
            rep.checks.push(Check::holds(
                format!("{}_unit_trace", s.family),
                (s.trace - 1.0).abs(),
                (s.trace - 1.0).abs() <= 1e-8,
                "density-matrix",
            ));
            rep.checks.push(Check::holds(
                format!("{}_psd", s.family),
                s.min_eigenvalue,
                s.min_eigenvalue >= -1e-8,
                "density-matrix",
            ));
        }
        for p in &self.pairs {
            let family = format!("{}|{}", p.a, p.b);
            for (metric, value, stderr) in [
                ("td", p.td.value, Some(p.td.stderr)),
                ("td_ci_low", p.td.ci_low, None),
                ("td_ci_high", p.td.ci_high, None),
                ("noise_floor", p.td.noise_floor, None),
            ] {
                rep.rows.push(TableRow {
                    n: cfg.n,
                    d: Some(cfg.d),
                    steps: Some(cfg.steps),
                    t: Some(cfg.t()),
                    family: family.clone(),
                    metric: metric.into(),
                    value,
                    stderr,
                    bound: None,
                    bound_ref: String::new(),
                    flag: Flag::Informational,
                });
            }
        }
        rep.values = serde_json::json!({
            "summaries": self.summaries,
            "pairs": self.pairs,
        });
        Ok(rep)
    }
}

/// Forward-query security at one size: the walk view and the Haar view are
/// each compared with the exact path-recording view against
/// `FORWARD_SLACK·t²/N + 3·noise floor`.
pub fn forward_security_experiment(n: u32, t: usize, m: u32, trials: usize, seed: u64) -> Result<ExperimentReport> {
    let params = KacParams::standard(n)?;
    let cfg = DistinguishConfig {
        n,
        d: params.d,
        steps: params.steps,
        m,
        directions: vec![false; t],
        families: vec![Family::HpcShort, Family::Haar, Family::PrExact],
        trials,
        seed,
        adversary_seed: None,
        batches: DEFAULT_BATCHES,
    };
    let res = distinguish_experiment(&cfg)?;
    let mut rep = res.report(&cfg)?;
    rep.experiment = "forward_security".into();
    let base = FORWARD_SLACK * (t * t) as f64 / (1u64 << n) as f64;
    for fam in [Family::HpcShort, Family::Haar] {
        let p = res.pair(fam, Family::PrExact).expect("pair computed");
        let bound = base + 3.0 * p.td.noise_floor;
        rep.checks
            .push(Check::upper(format!("td_{fam}_vs_pr_exact"), p.td.value, bound, REF_FORWARD_SECURITY, 2.0));
        if let Some(row) = rep.rows.iter_mut().find(|r| {
            r.metric == "td" && (r.family == format!("{fam}|pr_exact") || r.family == format!("pr_exact|{fam}"))
        }) {
            row.bound = Some(bound);
            row.bound_ref = REF_FORWARD_SECURITY.into();
            row.flag = rep.checks.last().expect("just pushed").flag;
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrendPoint {
    pub n: u32,
    pub td: TdEstimate,
    /// Bound `2t(11t+20)/N^{1/8}` recorded for reference.
    pub asymptotic_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrongTrend {
    pub points: Vec<TrendPoint>,
    /// Trend test on the distance above the sampling bias.
    pub trend: TrendTest,
}

/// Long walk versus Haar for each `n` with the given query directions. The
/// workspace is `m = total − n` qubits so every size has the same AB dimension.
pub fn strong_security_trend(ns: &[u32], directions: &[bool], ab_qubits: u32, trials: usize, seed: u64) -> Result<StrongTrend> {
    let t = directions.len();
    let mut points = Vec::new();
    for &n in ns {
        if n > ab_qubits {
            return Err(Error::Invalid(format!("n = {n} exceeds the {ab_qubits} AB qubits")));
        }
        let params = KacParams::standard(n)?;
        let cfg = DistinguishConfig {
            n,
            d: params.d,
            steps: params.steps,
            m: ab_qubits - n,
            directions: directions.to_vec(),
            families: vec![Family::HpcLong, Family::Haar],
            trials,
            seed,
            adversary_seed: None,
            batches: DEFAULT_BATCHES,
        };
        let res = distinguish_experiment(&cfg)?;
        let big_n = (1u64 << n) as f64;
        points.push(TrendPoint {
            n,
            td: res.pairs[0].td,
            asymptotic_bound: 2.0 * t as f64 * (11.0 * t as f64 + 20.0) / big_n.powf(0.125),
        });
    }
    let excess: Vec<f64> = points.iter().map(|p| p.td.excess()).collect();
    let errs: Vec<f64> = points.iter().map(|p| p.td.stderr).collect();
    let trend = non_increasing_test(&excess, &errs, 0.05)?;
    Ok(StrongTrend { points, trend })
}

impl StrongTrend {
    pub fn report(&self, seed: u64, config: serde_json::Value) -> Result<ExperimentReport> {
        let mut rep = ExperimentReport::new("strong_security_trend", Some(seed), config);
        for p in &self.points {
            rep.checks.push(Check::upper(
                format!("n{}_td_within_3_noise_floors", p.n),
                p.td.value,
                3.0 * p.td.noise_floor,
                REF_STRONG_SECURITY,
                2.0,
            ));
            rep.checks.push(Check::upper(
                format!("n{}_asymptotic_bound", p.n),
                p.td.value,
                p.asymptotic_bound,
                REF_STRONG_SECURITY,
                2.0,
            ));
            for (metric, value, bound, flag) in [
                ("td", p.td.value, Some(3.0 * p.td.noise_floor), rep.checks[rep.checks.len() - 2].flag),
                ("noise_floor", p.td.noise_floor, None, Flag::Informational),
                ("asymptotic_bound", p.asymptotic_bound, None, Flag::Informational),
            ] {
                rep.rows.push(TableRow {
                    n: p.n,
                    d: None,
                    steps: None,
                    t: None,
                    family: "hpc_2t1|haar".into(),
                    metric: metric.into(),
                    value,
                    stderr: (metric == "td").then_some(p.td.stderr),
                    bound,
                    bound_ref: if bound.is_some() { REF_STRONG_SECURITY.into() } else { String::new() },
                    flag,
                });
            }
        }
        rep.checks.push(Check::holds(
            "excess_td_non_increasing_in_n",
            self.trend.z.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            self.trend.holds,
            REF_STRONG_SECURITY,
        ));
        rep.values = serde_json::to_value(self)?;
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(families: Vec<Family>, directions: Vec<bool>, trials: usize, seed: u64) -> DistinguishConfig {
        DistinguishConfig {
            n: 3,
            d: 4,
            steps: 12,
            m: 1,
            directions,
            families,
            trials,
            seed,
            adversary_seed: Some(77),
            batches: 20,
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.label().parse::<Family>().unwrap(), f);
        }
        assert!("walk".parse::<Family>().is_err());
    }

    #[test]
    fn sampled_views_are_density_matrices() {
        let c = cfg(
            vec![Family::HpcShort, Family::Haar, Family::HaarSandwich, Family::Pseudorandom],
            vec![false, true],
            60,
            3,
        );
        let res = distinguish_experiment(&c).unwrap();
        for s in &res.summaries {
            assert!((s.trace - 1.0).abs() < 1e-10, "{s:?}");
            assert!(s.min_eigenvalue > -1e-10, "{s:?}");
        }
        assert!(res.report(&c).unwrap().passed());
        assert_eq!(res.pairs.len(), 6);
    }

    #[test]
    fn same_family_two_seeds_is_within_noise() {
        let a = distinguish_experiment(&cfg(vec![Family::Haar], vec![false, false], 400, 1)).unwrap();
        let b = distinguish_experiment(&cfg(vec![Family::Haar], vec![false, false], 400, 2)).unwrap();
        let (View::Sampled(ea), View::Sampled(eb)) = (&a.views[0].1, &b.views[0].1) else {
            panic!("Haar views are sampled");
        };
        let td = td_estimate(Side::Sampled(ea), Side::Sampled(eb), 3).unwrap();
        assert!(td.value <= td.noise_floor, "{td:?}");
        // Resampled distances are biased upward, so only the ordering is fixed.
        assert!(td.ci_low <= td.ci_high && td.null_mean <= td.noise_floor);
    }

    #[test]
    fn walk_view_matches_dense_oracle_run() {
        let c = cfg(vec![], vec![false, true, false], 1, 9);
        let spec = c.spec().unwrap();
        let walk = WalkSampler::new(KacParams::new(3, 4, 5).unwrap()).sample(&mut crate::numerics::stream_rng(1, 1));
        let direct = run_adversary(&walk, &spec).unwrap().reduced_density();
        let v = unitary_view(&spec, &Sampled::Walk(walk.clone()));
        let dense = compose_dense(&walk, 64).unwrap();
        let w = unitary_view(&spec, &Sampled::Dense(dense));
        assert!(crate::numerics::max_abs(&(outer(&v) - &direct)) < 1e-12);
        assert!(crate::numerics::max_abs(&(outer(&w) - &direct)) < 1e-12);
    }

    #[test]
    fn exact_view_with_inverse_query_uses_v() {
        let c = cfg(vec![Family::PrExact], vec![false, true], 1, 4);
        let c = DistinguishConfig { n: 2, ..c };
        let res = distinguish_experiment(&c).unwrap();
        assert!(res.summaries[0].min_eigenvalue > -1e-10);
    }
}
