//! Approximate unitary invariance of `V` and the distance between `V` and `E`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::report::{Check, ExperimentReport};
use super::stats::trial_rng;
use super::{REF_INVARIANCE, REF_V_VS_E};
use crate::error::Result;
use crate::numerics::{haar_matrix, C64};
use crate::oracles::{invariance_residual, v_minus_e_norm};

const TAG: u32 = 0x1F;
/// Trivial cap on the invariance residual (difference of two contractions).
pub const INVARIANCE_CAP_NORM: f64 = 2.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceChecks {
    pub n: u32,
    pub pairs: usize,
    /// Largest `t = 0` residual over the Haar pairs, both directions.
    pub zero_query_residual: f64,
    /// `(t, residual, adjoint residual, 32√(t(t+1)/N))` for `1 ≤ t ≤ t_max`.
    pub sampled: Vec<(usize, f64, f64, f64)>,
    /// Residuals at `C = D = I`, `t = t_max`.
    pub identity_residual: Option<(f64, f64)>,
    /// `(n, t, ‖V^L − E^L‖, √(4t(t+1)/N))`.
    pub v_vs_e: Vec<(u32, usize, f64, f64)>,
}

fn haar_pair(n: u32, seed: u64, k: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let mut rng = trial_rng(seed, TAG, k);
    (haar_matrix(1 << n, &mut rng), haar_matrix(1 << n, &mut rng))
}

/// Invariance residuals at `n` for `t ≤ t_max` and `V − E` norms at `v_e_ns`, `t = 1`.
pub fn invariance_checks(n: u32, t_max: usize, pairs: usize, v_e_ns: &[u32], seed: u64) -> Result<InvarianceChecks> {
    let mut zero: f64 = 0.0;
    for k in 0..pairs {
        let (c, d) = haar_pair(n, seed, k);
        zero = zero.max(invariance_residual(&c, &d, n, 0, false)?);
        zero = zero.max(invariance_residual(&c, &d, n, 0, true)?);
    }
    let big_n = (1usize << n) as f64;
    let mut sampled = Vec::new();
    for t in 1..=t_max {
        let (c, d) = haar_pair(n, seed, pairs + t);
        let bound = 32.0 * ((t * (t + 1)) as f64 / big_n).sqrt();
        sampled.push((t, invariance_residual(&c, &d, n, t, false)?, invariance_residual(&c, &d, n, t, true)?, bound));
    }
    let identity_residual = if t_max >= 1 {
        let id = DMatrix::identity(1 << n, 1 << n);
        Some((invariance_residual(&id, &id, n, t_max, false)?, invariance_residual(&id, &id, n, t_max, true)?))
    } else {
        None
    };
    let v_vs_e = v_e_ns
        .iter()
        .map(|&m| {
            let bound = (8.0 / (1usize << m) as f64).sqrt();
            Ok((m, 1, v_minus_e_norm(m, 1)?, bound))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InvarianceChecks {
        n,
        pairs,
        zero_query_residual: zero,
        sampled,
        identity_residual,
        v_vs_e,
    })
}

impl InvarianceChecks {
    pub fn checks(&self) -> Vec<Check> {
        let mut out = vec![Check::upper("zero_query_residual", self.zero_query_residual, 1e-10, REF_INVARIANCE, f64::INFINITY)];
        for &(t, fwd, adj, bound) in &self.sampled {
            out.push(Check::upper(format!("residual_t{t}"), fwd, bound, REF_INVARIANCE, INVARIANCE_CAP_NORM));
            out.push(Check::upper(format!("adjoint_residual_t{t}"), adj, bound, REF_INVARIANCE, INVARIANCE_CAP_NORM));
        }
        if let Some((fwd, adj)) = self.identity_residual {
            out.push(Check::info("identity_pair_residual", fwd));
            out.push(Check::info("identity_pair_adjoint_residual", adj));
        }
        for &(m, t, v, bound) in &self.v_vs_e {
            out.push(Check::upper(format!("v_minus_e_n{m}_t{t}"), v, bound, REF_V_VS_E, INVARIANCE_CAP_NORM));
        }
        out
    }

    pub fn report(&self, seed: u64) -> Result<ExperimentReport> {
        let config = serde_json::json!({ "n": self.n, "pairs": self.pairs, "seed": seed });
        let mut rep = ExperimentReport::new("invariance", Some(seed), config);
        rep.checks = self.checks();
        rep.values = serde_json::to_value(self)?;
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::report::Flag;

    #[test]
    fn zero_query_invariance_is_exact_and_bounds_are_flagged() {
        let r = invariance_checks(2, 1, 5, &[3], 4).unwrap();
        assert!(r.zero_query_residual < 1e-10, "{}", r.zero_query_residual);
        let checks = r.checks();
        // 32·√(2/4) exceeds the cap of 2.
        assert!(checks.iter().filter(|c| c.name.starts_with("residual_t")).all(|c| c.flag == Flag::Informational));
        let ve = checks.iter().find(|c| c.name == "v_minus_e_n3_t1").unwrap();
        assert_eq!(ve.flag, Flag::Pass, "{ve:?}");
        assert!(r.report(4).unwrap().passed());
    }
}
