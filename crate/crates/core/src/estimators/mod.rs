//! Kernel plug-in estimators: conditional empirical CDFs and copulas,
//! average-copula estimators, conditional Kendall's tau and the resulting
//! estimated measures of non-simplifyingness.
//!
//! Everything on the `X` side goes through ranks, so estimates are unchanged
//! by strictly increasing transforms of the margins.

mod ckt;
mod conditional;
mod kernel;
mod measure;

pub use ckt::{cond_kendall_tau, sample_kendall_tau, EPS_DENOM};
pub use conditional::{
    ave_copula_cs3, ave_copula_cs4, cond_ecdf, cond_empirical_copula, cond_quantile, conditional_pseudo_observations,
    StepCdf, LEVEL_EPS, MIN_DESIGN_WINDOW,
};
pub use kernel::{kernel_weights, Kernel, KernelSpec};
pub use measure::{
    ckt_at_design, ckt_measure, default_design, default_kernel, estimate_measure, marginal_transform_check, AveVariant,
    CopulaMeasures, EstimatorMeasure, EstimatorSpec, MeasureEstimate,
};
