//! Discrete norms of adapted fields and Monte Carlo checks of the a-priori
//! estimates.

mod checks;
mod norms;

pub use checks::{
    apply_fitted, check_assumption_a, check_pathwise_ito, check_z_estimate, check_y_estimate, check_combined_estimate, conditioning_pairs,
    fit_family, ito_tanaka_constant, AssumptionA, AssumptionACheck, EstimateCheck, EstimateReport, EstimateRow, FamilyFit,
    PathwiseItoReport, CONDITIONING_BINS, NONZERO_EPS,
};

pub use norms::{class_d_detail, class_d_norm, mp_norm, mp_norm_range, sp_norm, sp_norm_range, ClassDConfig, ClassDValue, StoppingTime};
