use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{ConditionalCopula, ConditionalCopulaModel};
use super::normal::norm_cdf;
use crate::error::{Error, Result};

/// `n` observations of `(X, Z)`, stored column-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    seed: Option<u64>,
}

impl Dataset {
    /// Builds a dataset from `X` columns and `Z` columns. All columns must have
    /// the same length and finite values.
    pub fn from_columns(x: Vec<Vec<f64>>, z: Vec<Vec<f64>>) -> Result<Self> {
        let n = x.first().or(z.first()).map_or(0, Vec::len);
        for (name, cols) in [("x", &x), ("z", &z)] {
            for (j, c) in cols.iter().enumerate() {
                if c.len() != n {
                    return Err(Error::Data(format!(
                        "column {name}{} has {} rows, expected {n}",
                        j + 1,
                        c.len()
                    )));
                }
                if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Data(format!(
                        "column {name}{} row {} is not a finite number",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(Dataset { x, z, seed: None })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn n(&self) -> usize {
        self.x.first().or(self.z.first()).map_or(0, Vec::len)
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }

    pub fn p(&self) -> usize {
        self.z.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn x(&self, j: usize) -> &[f64] {
        &self.x[j]
    }

    pub fn z(&self, k: usize) -> &[f64] {
        &self.z[k]
    }

    pub fn x_columns(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn z_columns(&self) -> &[Vec<f64>] {
        &self.z
    }

    pub fn z_row(&self, i: usize) -> Vec<f64> {
        self.z.iter().map(|c| c[i]).collect()
    }

    /// A new dataset whose `X` pair is `(x_a, x_b)` and whose `Z` are the
    /// listed `X` columns (0-based indices).
    pub fn conditional_view(&self, a: usize, b: usize, conditioning: &[usize]) -> Result<Dataset> {
        let d = self.d();
        if a >= d || b >= d || conditioning.iter().any(|&c| c >= d) {
            return Err(Error::InvalidParameter(format!(
                "column index out of range for dimension {d}"
            )));
        }
        Ok(Dataset {
            x: vec![self.x[a].clone(), self.x[b].clone()],
            z: conditioning.iter().map(|&c| self.x[c].clone()).collect(),
            seed: self.seed,
        })
    }

    /// Applies `g_j` to every value of `X` column `j`.
    pub fn map_x<F: Fn(usize, f64) -> f64>(&self, g: F) -> Dataset {
        let x = self
            .x
            .iter()
            .enumerate()
            .map(|(j, c)| c.iter().map(|&v| g(j, v)).collect())
            .collect();
        Dataset {
            x,
            z: self.z.clone(),
            seed: self.seed,
        }
    }

    /// Reorders the `X` columns: new column `j` is old column `perm[j]`.
    pub fn permute_x(&self, perm: &[usize]) -> Dataset {
        Dataset {
            x: perm.iter().map(|&j| self.x[j].clone()).collect(),
            z: self.z.clone(),
            seed: self.seed,
        }
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `n` i.i.d. observations from a bivariate conditional model with
/// `Z ~ Uniform(z_domain)` and uniform conditional margins.
///
/// Given `Z = z` with correlation `rho = theta(z)`, draws `N1, N2 ~ N(0, 1)` and
/// returns `(Phi(N1), Phi(rho N1 + sqrt(1 - rho^2) N2))`.
pub fn sample(model: &ConditionalCopulaModel, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let (lo, hi) = model.z_domain();
    let mut rng = rng_for(seed);
    let mut z = Vec::with_capacity(n);
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    for _ in 0..n {
        let zi = lo + (hi - lo) * rng.random::<f64>();
        let n1: f64 = rng.sample(StandardNormal);
        let n2: f64 = rng.sample(StandardNormal);
        let rho = model.parameter_at(zi)?;
        z.push(zi);
        x1.push(norm_cdf(n1));
        x2.push(norm_cdf(rho * n1 + (1.0 - rho * rho).sqrt() * n2));
    }
    Ok(Dataset::from_columns(vec![x1, x2], vec![z])?.with_seed(seed))
}

/// Draws `n` observations of a Gaussian copula with correlation matrix `corr`,
/// returned as `X` columns on the uniform scale (no `Z`).
pub fn sample_gaussian_vector(corr: &[Vec<f64>], n: usize, seed: u64) -> Result<Dataset> {
    let d = corr.len();
    if d == 0 || corr.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter(
            "correlation matrix must be square and non-empty".into(),
        ));
    }
    let m = DMatrix::from_fn(d, d, |i, j| corr[i][j]);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("correlation matrix is not positive definite".into()))?;
    let l = chol.l();
    let mut rng = rng_for(seed);
    let mut cols = vec![Vec::with_capacity(n); d];
    let mut eps = vec![0.0; d];
    for _ in 0..n {
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        for (i, col) in cols.iter_mut().enumerate() {
            let v: f64 = (0..=i).map(|j| l[(i, j)] * eps[j]).sum();
            col.push(norm_cdf(v));
        }
    }
    Ok(Dataset::from_columns(cols, Vec::new())?.with_seed(seed))
}

/// Correlation of the pair `(X2, X3)` given `X1 = x1` in [`sample_nonsimplified_trivariate`].
pub fn trivariate_conditional_rho(x1: f64) -> f64 {
    0.9 * (2.0 * x1 - 1.0)
}

/// A three-dimensional copula that violates the simplifying assumption:
/// `X1, X2` independent uniforms and, given `X1 = t`, `(X2, X3)` follows a
/// Gaussian copula with correlation `0.9 (2t - 1)`, so the sign of the
/// dependence between `X2` and `X3` flips with `X1`.
pub fn sample_nonsimplified_trivariate(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let mut rng = rng_for(seed);
    let mut cols: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n)).collect();
    for _ in 0..n {
        let x1: f64 = rng.random();
        let n2: f64 = rng.sample(StandardNormal);
        let n3: f64 = rng.sample(StandardNormal);
        let rho = trivariate_conditional_rho(x1);
        cols[0].push(x1);
        cols[1].push(norm_cdf(n2));
        cols[2].push(norm_cdf(rho * n2 + (1.0 - rho * rho).sqrt() * n3));
    }
    Ok(Dataset::from_columns(cols, Vec::new())?.with_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::family::copula_cdf;
    use crate::copula::model::BuiltinModel;

    fn sample_tau(x: &[f64], y: &[f64]) -> f64 {
        // O(n log n) would be nicer; the O(n^2) count is fine at test sizes.
        let n = x.len();
        let mut s: i64 = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (x[i] - x[j]) * (y[i] - y[j]);
                s += if v > 0.0 {
                    1
                } else if v < 0.0 {
                    -1
                } else {
                    0
                };
            }
        }
        2.0 * s as f64 / (n as f64 * (n as f64 - 1.0))
    }

    #[test]
    fn sample_is_deterministic() {
        let m = BuiltinModel::Gauss08z.model();
        assert_eq!(sample(&m, 50, 7).unwrap(), sample(&m, 50, 7).unwrap());
        assert_ne!(sample(&m, 50, 7).unwrap(), sample(&m, 50, 8).unwrap());
        assert!(sample(&m, 0, 1).is_err());
    }

    #[test]
    fn sample_kendall_tau_matches_closed_form() {
        // n = 20_000 keeps the O(n^2) check quick; the sd of tau-hat is about 0.005.
        let n = 20_000;
        let d = sample(&BuiltinModel::Indep.model(), n, 11).unwrap();
        assert!(sample_tau(d.x(0), d.x(1)).abs() < 0.02);
        let d = sample(&BuiltinModel::Gauss05.model(), n, 12).unwrap();
        assert!((sample_tau(d.x(0), d.x(1)) - 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn empirical_cdf_matches_copula() {
        let n = 40_000;
        let fam = crate::copula::CopulaFamily::gaussian(0.5).unwrap();
        let d = sample(&BuiltinModel::Gauss05.model(), n, 3).unwrap();
        let mut rng = rng_for(99);
        for _ in 0..20 {
            let u = [
                (rng.random_range(1..64) as f64) / 64.0,
                (rng.random_range(1..64) as f64) / 64.0,
            ];
            let count = (0..n).filter(|&i| d.x(0)[i] <= u[0] && d.x(1)[i] <= u[1]).count();
            let emp = count as f64 / n as f64;
            let c = copula_cdf(&fam, u);
            let tol = 3.0 * (c * (1.0 - c) / n as f64).sqrt() + 1e-9;
            assert!((emp - c).abs() <= tol.max(4.0 / n as f64), "u={u:?} emp={emp} c={c}");
        }
    }

    #[test]
    fn gaussian_vector_sampler_recovers_tau() {
        let corr = vec![vec![1.0, 0.6], vec![0.6, 1.0]];
        let d = sample_gaussian_vector(&corr, 6000, 5).unwrap();
        let want = 2.0 * 0.6f64.asin() / std::f64::consts::PI;
        assert!((sample_tau(d.x(0), d.x(1)) - want).abs() < 0.03);
        assert!(sample_gaussian_vector(&[vec![1.0, 2.0], vec![2.0, 1.0]], 10, 1).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::from_columns(vec![vec![1.0, 2.0], vec![1.0]], vec![]).is_err());
        assert!(Dataset::from_columns(vec![vec![1.0, f64::NAN]], vec![]).is_err());
        let d = Dataset::from_columns(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![vec![0.1, 0.2]]).unwrap();
        assert_eq!((d.n(), d.d(), d.p()), (2, 2, 1));
        assert_eq!(d.z_row(1), vec![0.2]);
    }
}
