//! Monte-Carlo experiments and exact checks with JSON/CSV reporting.
//!
//! Every bound comparison carries a short reference tag naming the statement
//! it checks. Bounds at or above the trivial norm cap are reported as
//! informational, never as passes.

pub mod dbproj;
pub mod distinguish;
pub mod helpers;
pub mod invariance;
pub mod mixing;
pub mod prexact;
pub mod report;
pub mod stats;
pub mod twirl;
pub mod verify;

pub use dbproj::{dbproj_experiment, repeated_query_control, DbProjConfig, DbProjResult, DB_SLACK};
pub use distinguish::{
    distinguish_experiment, forward_security_experiment, strong_security_trend, DistinguishConfig, DistinguishResult,
    Family, StrongTrend, FORWARD_SLACK,
};
pub use helpers::{helper_lemma_checks, HelperChecks};
pub use invariance::{invariance_checks, InvarianceChecks};
pub use mixing::{haar_moment, mixing_experiment, MixingConfig, MixingCurve};
pub use prexact::PrChain;
pub use report::{write_csv, Check, ExperimentReport, Flag, TableRow};
pub use stats::{td_estimate, with_threads, Estimate, MatrixEstimate, TdEstimate, TrendTest};
pub use twirl::{perm_twirl_checks, twirl_bound_experiment, twirl_epr_estimate, twirl_report, TwirlDistribution};
pub use verify::{verify_suite, VerifyConfig};

pub const REF_DB_PROJECTION: &str = "db-projection";
pub const REF_FORWARD_SECURITY: &str = "forward-security";
pub const REF_STRONG_SECURITY: &str = "strong-security";
pub const REF_HAAR_TWIRL: &str = "haar-twirl";
pub const REF_PERMUTATION_TWIRL: &str = "permutation-twirl";
pub const REF_TWIRL_BOUND: &str = "twirl-bound";
pub const REF_SECTOR_TWIRL: &str = "sector-twirl";
pub const REF_PSD_ORDERING: &str = "psd-ordering";
pub const REF_INVARIANCE: &str = "approximate-invariance";
pub const REF_V_VS_E: &str = "v-vs-e";
pub const REF_STATE_SCRAMBLING: &str = "state-scrambling";
pub const REF_PROJECTION_DISTANCE: &str = "projection-distance";
pub const REF_GENTLE_MEASUREMENT: &str = "gentle-measurement";
pub const REF_ORTHONORMALITY: &str = "phi-orthonormality";
pub const REF_HPO_ACTION: &str = "hpo-action";
pub const REF_COMPRESS: &str = "compress-scaling";
pub const REF_W_HPO: &str = "w-hpo-closeness";
pub const REF_PARTIAL_ISOMETRY: &str = "partial-isometry";
pub const REF_W_RESTRICTION: &str = "w-restriction";
pub const REF_WDAGV: &str = "wdagv-identity";
pub const REF_RIGHT_INVARIANCE: &str = "right-invariance";
pub const REF_DOM_IM: &str = "dom-im-decomposition";
