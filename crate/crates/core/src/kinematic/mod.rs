//! Estimators for the family integral of intersection counts and the
//! normal-Jacobian identities behind them.

mod coarea;
mod fiber;
mod mc;
mod nj;
mod ratio;

pub use coarea::{coarea_check, CoareaCheck, COAREA_TOL};
pub use fiber::{fiber_integral_estimate, fiber_integral_with_check, FiberReport, DEFAULT_FIBER_EPS};
pub use mc::{
    mc_run_pairs, mc_total_intersections, mc_total_intersections_run, mc_translation_family, mc_translation_family_run,
    translation_family_oracle, translation_meshes, EstimateReport, McOptions, McRun, PinnedFamily, SampleRecord,
    TRANSLATION_SPACING, UNRELIABLE_DEGENERATE_FRACTION,
};
pub use nj::{det_j_sine_bound, graph_nj_sides, nj_ratio_direct, nj_ratio_formula, SineBound, NJ_FLOOR};
pub use ratio::{empirical_c, empirical_c_doubling, ratio_report, GeodesicPool, PairTable, RatioEntry, RatioReport};
