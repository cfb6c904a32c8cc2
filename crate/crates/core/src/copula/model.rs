use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::family::CopulaFamily;
use crate::error::{Error, Result};

/// Number of points used to validate a parameter map at construction.
const VALIDATION_GRID: usize = 2001;

/// Anything that evaluates a bivariate conditional copula `C_{X|Z=z}(u)` for scalar `z`.
pub trait ConditionalCopula: Sync {
    fn z_domain(&self) -> (f64, f64);

    /// `C_{X|Z=z}(u)`. Returns NaN if the model is undefined at `z`.
    fn cdf(&self, u: [f64; 2], z: f64) -> f64;
}

/// Conditional margins of `X` given `Z = z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConditionalMargins {
    #[default]
    Uniform,
}

type ThetaMap = Arc<dyn Fn(f64) -> Result<CopulaFamily> + Send + Sync>;

/// A parametric family together with the map `z -> theta(z)` on a closed interval.
#[derive(Clone)]
pub struct ConditionalCopulaModel {
    label: String,
    z_domain: (f64, f64),
    theta_map: ThetaMap,
    margins: ConditionalMargins,
}

impl fmt::Debug for ConditionalCopulaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConditionalCopulaModel")
            .field("label", &self.label)
            .field("z_domain", &self.z_domain)
            .field("margins", &self.margins)
            .finish_non_exhaustive()
    }
}

impl ConditionalCopulaModel {
    /// Builds a model, checking `theta_map` on a dense grid of the domain.
    pub fn new<F>(label: impl Into<String>, z_lo: f64, z_hi: f64, theta_map: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<CopulaFamily> + Send + Sync + 'static,
    {
        if !(z_lo.is_finite() && z_hi.is_finite() && z_lo < z_hi) {
            return Err(Error::InvalidParameter(format!(
                "z domain must be a non-empty finite interval, got [{z_lo}, {z_hi}]"
            )));
        }
        for i in 0..VALIDATION_GRID {
            let z = z_lo + (z_hi - z_lo) * i as f64 / (VALIDATION_GRID - 1) as f64;
            theta_map(z).map_err(|e| Error::InvalidParameter(format!("parameter map invalid at z = {z}: {e}")))?;
        }
        Ok(ConditionalCopulaModel {
            label: label.into(),
            z_domain: (z_lo, z_hi),
            theta_map: Arc::new(theta_map),
            margins: ConditionalMargins::Uniform,
        })
    }

    /// A model whose copula does not depend on `z`.
    pub fn constant(label: impl Into<String>, family: CopulaFamily) -> Self {
        ConditionalCopulaModel {
            label: label.into(),
            z_domain: (0.0, 1.0),
            theta_map: Arc::new(move |_| Ok(family)),
            margins: ConditionalMargins::Uniform,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn margins(&self) -> ConditionalMargins {
        self.margins
    }

    pub fn family_at(&self, z: f64) -> Result<CopulaFamily> {
        (self.theta_map)(z)
    }

    /// Scalar parameter `theta(z)` (the Gaussian correlation; 0 for independence).
    pub fn parameter_at(&self, z: f64) -> Result<f64> {
        Ok(self.family_at(z)?.parameter())
    }
}

impl ConditionalCopula for ConditionalCopulaModel {
    fn z_domain(&self) -> (f64, f64) {
        self.z_domain
    }

    fn cdf(&self, u: [f64; 2], z: f64) -> f64 {
        match self.family_at(z) {
            Ok(fam) => fam.cdf(u[0], u[1]),
            Err(_) => f64::NAN,
        }
    }
}

/// The three data-generating processes of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BuiltinModel {
    /// Conditional independence.
    #[serde(rename = "indep")]
    Indep,
    /// Gaussian copula with constant correlation 0.5.
    #[serde(rename = "gauss_0_5")]
    Gauss05,
    /// Gaussian copula with correlation `0.8 z`.
    #[serde(rename = "gauss_0.8z")]
    Gauss08z,
}

impl BuiltinModel {
    pub const ALL: [BuiltinModel; 3] = [BuiltinModel::Indep, BuiltinModel::Gauss05, BuiltinModel::Gauss08z];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinModel::Indep => "indep",
            BuiltinModel::Gauss05 => "gauss_0_5",
            BuiltinModel::Gauss08z => "gauss_0.8z",
        }
    }

    pub fn is_simplified(self) -> bool {
        !matches!(self, BuiltinModel::Gauss08z)
    }

    pub fn model(self) -> ConditionalCopulaModel {
        match self {
            BuiltinModel::Indep => ConditionalCopulaModel::constant(self.name(), CopulaFamily::Independence),
            BuiltinModel::Gauss05 => {
                ConditionalCopulaModel::constant(self.name(), CopulaFamily::gaussian(0.5).expect("valid correlation"))
            }
            BuiltinModel::Gauss08z => {
                ConditionalCopulaModel::new(self.name(), 0.0, 1.0, |z| CopulaFamily::gaussian(0.8 * z))
                    .expect("0.8 z is a valid correlation on [0, 1]")
            }
        }
    }
}

impl fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indep" => Ok(BuiltinModel::Indep),
            "gauss_0_5" => Ok(BuiltinModel::Gauss05),
            "gauss_0.8z" => Ok(BuiltinModel::Gauss08z),
            other => Err(Error::InvalidParameter(format!(
                "unknown model '{other}' (expected indep, gauss_0_5 or gauss_0.8z)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn builtins_roundtrip_names() {
        for m in BuiltinModel::ALL {
            assert_eq!(m.name().parse::<BuiltinModel>().unwrap(), m);
            assert_eq!(m.model().label(), m.name());
        }
        assert!("gauss".parse::<BuiltinModel>().is_err());
    }

    #[test]
    fn invalid_parameter_map_is_rejected() {
        let err = ConditionalCopulaModel::new("bad", 0.0, 2.0, |z| CopulaFamily::gaussian(0.8 * z));
        assert!(err.is_err());
        assert!(ConditionalCopulaModel::new("empty", 1.0, 1.0, |_| Ok(CopulaFamily::Independence)).is_err());
    }

    #[test]
    fn gauss_08z_parameter_map() {
        let m = BuiltinModel::Gauss08z.model();
        assert_abs_diff_eq!(m.parameter_at(0.5).unwrap(), 0.4);
        assert_eq!(m.cdf([0.5, 0.5], 0.0), 0.25);
        assert!(m.cdf([0.5, 0.5], 1.5).is_nan());
    }
}
