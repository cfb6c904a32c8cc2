//! Measures of non-simplifyingness for conditional copulas and regular vines.
//!
//! A conditional copula `z -> C_{X|Z=z}` satisfies the *simplifying assumption*
//! when it does not depend on `z`. This crate quantifies how far a conditional
//! copula is from that assumption:
//!
//! - [`nonconstantness`]: generic measures of non-constantness of gridded
//!   functions (Kolmogorov-Smirnov, integral, averaging, derivative, conic
//!   combinations).
//! - [`copula`]: ground-truth families, conditional models and samplers.
//! - [`oracle`]: population values of the Cramer-von Mises and
//!   Kolmogorov-Smirnov type measures by quadrature and supremum search.
//! - [`estimators`]: kernel plug-in estimators (conditional empirical copula,
//!   average copula, conditional Kendall's tau) and the estimated measures.
//! - [`vines`]: regular-vine enumeration and worst/best/average-case scores.
//! - [`sim`]: the replication harness for bandwidth sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copula;
pub mod error;
pub mod estimators;
pub mod io;
pub mod nonconstantness;
pub mod numeric;
pub mod oracle;
pub mod sim;
pub mod vines;

pub use copula::{
    bvn_cdf, copula_cdf, kendall_tau, norm_cdf, norm_inv, sample, spearman_rho, BuiltinModel, ConditionalCopula,
    ConditionalCopulaModel, CopulaFamily, Correlation, Dataset,
};
pub use error::{Error, Result};
pub use estimators::{AveVariant, EstimatorMeasure, EstimatorSpec, Kernel, KernelSpec, MeasureEstimate};
pub use oracle::{MeasureValue, OracleMeasure, OracleSpec};
pub use sim::{SimConfig, SimResultRow, SummaryRow};
pub use vines::{Aggregation, VineEdge, VineScoreReport, VineStructure};
