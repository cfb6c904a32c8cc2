//! Ground-truth copula families, conditional copula models and samplers.

mod family;
mod model;
mod normal;
mod sample;

pub use family::{copula_cdf, kendall_tau, spearman_rho, CopulaFamily, Correlation};
pub use model::{BuiltinModel, ConditionalCopula, ConditionalCopulaModel, ConditionalMargins};
pub use normal::{bvn_cdf, norm_cdf, norm_inv, norm_pdf, U_CLAMP};
pub use sample::{
    sample, sample_gaussian_vector, sample_nonsimplified_trivariate, trivariate_conditional_rho, Dataset,
};
