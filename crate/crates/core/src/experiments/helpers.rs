//! Random-instance checks of the projected-trace-distance equality and the
//! gentle-measurement inequality.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::report::{Check, ExperimentReport};
use super::stats::trial_rng;
use super::{REF_GENTLE_MEASUREMENT, REF_PROJECTION_DISTANCE};
use crate::error::Result;
use crate::numerics::{haar_matrix, kron, partial_trace, random_density, random_state, trace_distance, StreamRng, C64};

const PROJDIST_TAG: u32 = 0x4D;
const GENTLE_TAG: u32 = 0x6E;

/// Random projector of rank `rank` on `C^dim`.
fn random_projector(dim: usize, rank: usize, rng: &mut StreamRng) -> DMatrix<C64> {
    let u = haar_matrix(dim, rng);
    let cols = u.columns(0, rank);
    &cols * cols.adjoint()
}

/// `|‖Tr_D ρ − Tr_D(ΠρΠ)‖₁ − (1 − Tr(Πρ))|` for `Π = I_C ⊗ Π'`.
pub fn projdist_residual(rho: &DMatrix<C64>, dc: usize, dd: usize, proj_d: &DMatrix<C64>) -> Result<f64> {
    let pi = kron(&DMatrix::identity(dc, dc), proj_d);
    let projected = &pi * rho * &pi;
    let lhs = trace_distance(&partial_trace(rho, &[dc, dd], &[0])?, &partial_trace(&projected, &[dc, dd], &[0])?)?;
    let rhs = 1.0 - (&pi * rho).trace().re;
    Ok((lhs - rhs).abs())
}

/// `(lhs, rhs)` of `‖U_t⋯U_1ψ − Π_tU_t⋯Π_1U_1ψ‖ ≤ t·√(1 − ‖Π_tU_t⋯Π_1U_1ψ‖²)`.
pub fn gentle_measurement_sides(psi: &[C64], us: &[DMatrix<C64>], projs: &[DMatrix<C64>]) -> (f64, f64) {
    let mut ideal = DVector::from_column_slice(psi);
    let mut measured = ideal.clone();
    for (u, p) in us.iter().zip(projs) {
        ideal = u * ideal;
        measured = p * (u * measured);
    }
    let lhs = (&ideal - &measured).norm();
    let rhs = us.len() as f64 * (1.0 - measured.norm_squared()).max(0.0).sqrt();
    (lhs, rhs)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HelperChecks {
    pub instances: usize,
    pub projdist_max_residual: f64,
    /// Residual with `Π = I`.
    pub projdist_identity_residual: f64,
    /// Largest `lhs − rhs` over the random instances (≤ 0 when all hold).
    pub gentle_max_violation: f64,
    pub gentle_violations: usize,
    /// Left side with `t = 1`, `Π₁ = I`.
    pub gentle_identity_lhs: f64,
}

/// Float slack on the gentle-measurement comparison.
pub const GENTLE_SLACK: f64 = 1e-12;

pub fn helper_lemma_checks(instances: usize, seed: u64) -> Result<HelperChecks> {
    let mut projdist_max: f64 = 0.0;
    let mut projdist_id: f64 = 0.0;
    for i in 0..instances {
        let mut rng = trial_rng(seed, PROJDIST_TAG, i);
        let (dc, dd) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
        let rho = random_density(dc * dd, &mut rng);
        let rank = rng.gen_range(1..dd);
        projdist_max = projdist_max.max(projdist_residual(&rho, dc, dd, &random_projector(dd, rank, &mut rng))?);
        if i < 10 {
            projdist_id = projdist_id.max(projdist_residual(&rho, dc, dd, &DMatrix::identity(dd, dd))?);
        }
    }
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut identity_lhs: f64 = 0.0;
    for i in 0..instances {
        let mut rng = trial_rng(seed, GENTLE_TAG, i);
        let dim = rng.gen_range(2..=8);
        let t = rng.gen_range(1..=5);
        let psi = random_state(dim, &mut rng);
        let us: Vec<_> = (0..t).map(|_| haar_matrix(dim, &mut rng)).collect();
        let projs: Vec<_> = (0..t)
            .map(|_| {
                let rank = rng.gen_range(1..=dim);
                random_projector(dim, rank, &mut rng)
            })
            .collect();
        let (lhs, rhs) = gentle_measurement_sides(&psi, &us, &projs);
        worst = worst.max(lhs - rhs);
        if lhs > rhs + GENTLE_SLACK {
            violations += 1;
        }
        if i < 10 {
            let (l, _) = gentle_measurement_sides(&psi, &us[..1], &[DMatrix::identity(dim, dim)]);
            identity_lhs = identity_lhs.max(l);
        }
    }
    Ok(HelperChecks {
        instances,
        projdist_max_residual: projdist_max,
        projdist_identity_residual: projdist_id,
        gentle_max_violation: worst,
        gentle_violations: violations,
        gentle_identity_lhs: identity_lhs,
    })
}

impl HelperChecks {
    pub fn passed(&self) -> bool {
        self.projdist_max_residual <= 1e-9 && self.gentle_violations == 0
    }

    pub fn report(&self, seed: u64) -> Result<ExperimentReport> {
        let config = serde_json::json!({ "instances": self.instances, "seed": seed });
        let mut rep = ExperimentReport::new("helpers", Some(seed), config);
        let inf = f64::INFINITY;
        rep.checks = vec![
            Check::upper("projdist_residual", self.projdist_max_residual, 1e-9, REF_PROJECTION_DISTANCE, inf),
            Check::upper("projdist_identity_residual", self.projdist_identity_residual, 1e-12, REF_PROJECTION_DISTANCE, inf),
            Check::holds("gentle_measurement", self.gentle_max_violation, self.gentle_violations == 0, REF_GENTLE_MEASUREMENT),
            Check::upper("gentle_identity_lhs", self.gentle_identity_lhs, 1e-12, REF_GENTLE_MEASUREMENT, inf),
        ];
        rep.values = serde_json::to_value(self)?;
        Ok(rep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::stream_rng;

    #[test]
    fn helpers_hold_on_random_instances() {
        let h = helper_lemma_checks(200, 3).unwrap();
        assert!(h.passed(), "{h:?}");
        assert!(h.projdist_identity_residual < 1e-12);
        assert!(h.gentle_identity_lhs < 1e-12);
        assert!(h.report(3).unwrap().passed());
    }

    #[test]
    fn rank_one_projector_on_pure_product_state() {
        // ρ = |0⟩⟨0| ⊗ |+⟩⟨+|, Π' = |0⟩⟨0|: both sides equal 1/2.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = [C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let rho = crate::numerics::outer(&v);
        let mut p = DMatrix::zeros(2, 2);
        p[(0, 0)] = C64::new(1.0, 0.0);
        assert!(projdist_residual(&rho, 2, 2, &p).unwrap() < 1e-15);
        let pi = kron(&DMatrix::identity(2, 2), &p);
        assert!(((&pi * &rho).trace().re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn full_projectors_leave_the_state_untouched() {
        let mut rng = stream_rng(1, 1);
        let psi = random_state(4, &mut rng);
        let us: Vec<_> = (0..3).map(|_| haar_matrix(4, &mut rng)).collect();
        let ids = vec![DMatrix::identity(4, 4); 3];
        let (lhs, rhs) = gentle_measurement_sides(&psi, &us, &ids);
        assert!(lhs < 1e-12 && rhs < 1e-6);
    }
}
