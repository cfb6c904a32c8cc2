use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::normal::{bvn_cdf, norm_inv};
use crate::error::{Error, Result};

/// A correlation strictly inside `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Correlation(f64);

impl Correlation {
    pub fn new(rho: f64) -> Result<Self> {
        if rho.abs() < 1.0 {
            Ok(Correlation(rho))
        } else {
            Err(Error::InvalidParameter(format!(
                "correlation must lie strictly inside (-1, 1), got {rho}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Correlation {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Correlation::new(v)
    }
}

impl From<Correlation> for f64 {
    fn from(c: Correlation) -> f64 {
        c.0
    }
}

/// Bivariate copula families with closed-form dependence coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CopulaFamily {
    Independence,
    Gaussian { rho: Correlation },
}

impl CopulaFamily {
    pub fn gaussian(rho: f64) -> Result<Self> {
        Ok(CopulaFamily::Gaussian {
            rho: Correlation::new(rho)?,
        })
    }

    /// The scalar dependence parameter; independence is reported as `rho = 0`.
    pub fn parameter(&self) -> f64 {
        match self {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::Gaussian { rho } => rho.get(),
        }
    }

    pub fn cdf(&self, u1: f64, u2: f64) -> f64 {
        copula_cdf(self, [u1, u2])
    }

    pub fn kendall_tau(&self) -> f64 {
        kendall_tau(self)
    }

    pub fn spearman_rho(&self) -> f64 {
        spearman_rho(self)
    }
}

/// Copula CDF at `u`; coordinates outside `[0, 1]` are clamped.
///
/// Boundary values are exact: `C(0, v) = C(v, 0) = 0` and `C(v, 1) = C(1, v) = v`.
pub fn copula_cdf(fam: &CopulaFamily, u: [f64; 2]) -> f64 {
    let u1 = u[0].clamp(0.0, 1.0);
    let u2 = u[1].clamp(0.0, 1.0);
    if u1 == 0.0 || u2 == 0.0 {
        return 0.0;
    }
    if u1 == 1.0 {
        return u2;
    }
    if u2 == 1.0 {
        return u1;
    }
    match fam {
        CopulaFamily::Independence => u1 * u2,
        CopulaFamily::Gaussian { rho } => {
            let rho = rho.get();
            if rho == 0.0 {
                return u1 * u2;
            }
            let v = bvn_cdf(norm_inv(u1), norm_inv(u2), rho).expect("correlation validated at construction");
            // Quantile clamping near 0/1 can push the value a hair outside the
            // Frechet-Hoeffding band; project back.
            v.clamp((u1 + u2 - 1.0).max(0.0), u1.min(u2))
        }
    }
}

/// Kendall's tau: `2 asin(rho) / pi` for the Gaussian copula.
pub fn kendall_tau(fam: &CopulaFamily) -> f64 {
    match fam {
        CopulaFamily::Independence => 0.0,
        CopulaFamily::Gaussian { rho } => 2.0 * rho.get().asin() / PI,
    }
}

/// Spearman's rho: `(6 / pi) asin(rho / 2)` for the Gaussian copula.
pub fn spearman_rho(fam: &CopulaFamily) -> f64 {
    match fam {
        CopulaFamily::Independence => 0.0,
        CopulaFamily::Gaussian { rho } => 6.0 * (rho.get() / 2.0).asin() / PI,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn correlation_bounds() {
        assert!(Correlation::new(1.0).is_err());
        assert!(Correlation::new(-1.0).is_err());
        assert!(Correlation::new(f64::NAN).is_err());
        assert!(CopulaFamily::gaussian(0.999).is_ok());
    }

    #[test]
    fn cdf_examples() {
        let ind = CopulaFamily::Independence;
        let g = CopulaFamily::gaussian(0.5).unwrap();
        assert_eq!(ind.cdf(0.5, 0.5), 0.25);
        assert_abs_diff_eq!(g.cdf(0.5, 0.5), 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(g.cdf(0.3, 1.0), 0.3);
        assert_eq!(ind.cdf(0.3, 1.0), 0.3);
        assert_eq!(g.cdf(0.0, 0.7), 0.0);
    }

    #[test]
    fn dependence_coefficients() {
        let g = CopulaFamily::gaussian(0.5).unwrap();
        assert_abs_diff_eq!(g.kendall_tau(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(CopulaFamily::Independence.kendall_tau(), 0.0);
        assert_eq!(CopulaFamily::gaussian(0.0).unwrap().spearman_rho(), 0.0);
        assert_abs_diff_eq!(g.spearman_rho(), 6.0 * 0.25f64.asin() / PI, epsilon = 1e-15);
        let near_one = CopulaFamily::gaussian(1.0 - 1e-12).unwrap();
        assert!(near_one.kendall_tau() > 0.9999);
    }

    #[test]
    fn two_increasing_and_frechet_bounds() {
        let m = 64;
        let grid: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
        for rho in [-0.9, 0.0, 0.5, 0.9] {
            let fam = CopulaFamily::gaussian(rho).unwrap();
            let c: Vec<Vec<f64>> = grid
                .iter()
                .map(|&a| grid.iter().map(|&b| fam.cdf(a, b)).collect())
                .collect();
            for i in 0..=m {
                for j in 0..=m {
                    let (a, b) = (grid[i], grid[j]);
                    let lo = (a + b - 1.0).max(0.0);
                    let hi = a.min(b);
                    assert!(c[i][j] >= lo - 1e-15 && c[i][j] <= hi + 1e-15);
                    if i < m && j < m {
                        let mass = c[i + 1][j + 1] - c[i + 1][j] - c[i][j + 1] + c[i][j];
                        assert!(mass >= -1e-13, "rho={rho} cell ({i},{j}) mass {mass}");
                    }
                }
            }
        }
    }
}
