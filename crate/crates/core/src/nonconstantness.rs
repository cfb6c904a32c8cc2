//! Measures of non-constantness for functions sampled on a finite grid.
//!
//! A (pseudo-)measure of non-constantness `psi` is non-negative, vanishes on
//! constant functions, and satisfies `psi(f + e) = psi(f)`,
//! `psi(f + g) <= psi(f) + psi(g)` and `psi(a f) = |a| psi(f)`. Everything
//! here works on a [`GriddedFunction`], i.e. the values `f(z_1), ..., f(z_m)`
//! taken in a space described by [`NormedValue`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two grid values closer than this are treated as equal.
pub const EPS_CONST: f64 = 1e-12;

/// A vector space element with a pseudo-norm.
pub trait NormedValue: Clone {
    fn add(&self, other: &Self) -> Self;
    fn scale(&self, a: f64) -> Self;
    fn norm(&self) -> f64;

    fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// `||self - other||`.
    fn distance(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }
}

impl NormedValue for f64 {
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn scale(&self, a: f64) -> Self {
        a * self
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
}

/// Norm used by [`GridVector`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VectorNorm {
    /// `max_k |v_k|`.
    Sup,
    /// `(mean_k |v_k|^p)^(1/p)`, `p >= 1`.
    MeanLp(f64),
}

/// A real vector (e.g. a copula evaluated on a `u`-grid) with a chosen norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVector {
    pub values: Vec<f64>,
    pub norm: VectorNorm,
}

impl GridVector {
    pub fn new(values: Vec<f64>, norm: VectorNorm) -> Self {
        GridVector { values, norm }
    }
}

impl NormedValue for GridVector {
    fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        GridVector {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            norm: self.norm,
        }
    }

    fn scale(&self, a: f64) -> Self {
        GridVector {
            values: self.values.iter().map(|v| a * v).collect(),
            norm: self.norm,
        }
    }

    fn norm(&self) -> f64 {
        match self.norm {
            VectorNorm::Sup => self.values.iter().fold(0.0, |m, v| m.max(v.abs())),
            VectorNorm::MeanLp(p) => {
                if self.values.is_empty() {
                    return 0.0;
                }
                let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
                (s / self.values.len() as f64).powf(1.0 / p)
            }
        }
    }
}

/// Values of a function at grid points `z_1, ..., z_m` of `R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedFunction<E> {
    points: Vec<Vec<f64>>,
    values: Vec<E>,
}

impl<E: NormedValue> GriddedFunction<E> {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<E>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "a gridded function needs at least one point".into(),
            ));
        }
        if points.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} grid points but {} values",
                points.len(),
                values.len()
            )));
        }
        Ok(GriddedFunction { points, values })
    }

    /// A function on scalar grid points.
    pub fn on_line(points: &[f64], values: Vec<E>) -> Result<Self> {
        Self::new(points.iter().map(|&z| vec![z]).collect(), values)
    }

    pub fn from_fn<F: Fn(f64) -> E>(points: &[f64], f: F) -> Self {
        GriddedFunction {
            points: points.iter().map(|&z| vec![z]).collect(),
            values: points.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[E] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `z -> f(z) + e`.
    pub fn translate(&self, e: &E) -> Self {
        self.map(|v| v.add(e))
    }

    /// `z -> a f(z)`.
    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| v.scale(a))
    }

    /// `z -> f(z) + g(z)`; both functions must share the grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.points != other.points {
            return Err(Error::InvalidParameter(
                "functions are defined on different grids".into(),
            ));
        }
        Ok(GriddedFunction {
            points: self.points.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a.add(b)).collect(),
        })
    }

    fn map<F: Fn(&E) -> E>(&self, f: F) -> Self {
        GriddedFunction {
            points: self.points.clone(),
            values: self.values.iter().map(f).collect(),
        }
    }
}

/// Non-negative weights normalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights must not all be zero".into()));
        }
        Ok(Weights(raw.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(m: usize) -> Self {
        Weights(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    fn check_len(&self, m: usize) -> Result<()> {
        if self.0.len() != m {
            return Err(Error::InvalidParameter(format!(
                "{} weights for a grid of {m} points",
                self.0.len()
            )));
        }
        Ok(())
    }
}

/// How the deviations `||f(z_i) - ...||` are aggregated over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateNorm {
    Sup,
    Integral,
}

/// `max_{i,j} ||f(z_i) - f(z_j)||`.
pub fn psi_ks<E: NormedValue>(f: &GriddedFunction<E>) -> f64 {
    let v = f.values();
    let mut best = 0.0f64;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            best = best.max(v[i].distance(&v[j]));
        }
    }
    best
}

/// `sum_{i,j} ||f(z_i) - f(z_j)||` over ordered pairs.
pub fn psi_sum_pairwise<E: NormedValue>(f: &GriddedFunction<E>) -> f64 {
    let v = f.values();
    let mut total = 0.0;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            total += v[i].distance(&v[j]);
        }
    }
    2.0 * total
}

/// Sup or sum of `||f(z_i) - f(z_{i+1})||` along the grid order.
pub fn psi_adjacent<E: NormedValue>(f: &GriddedFunction<E>, norm: AggregateNorm) -> f64 {
    let diffs = f.values().windows(2).map(|w| w[0].distance(&w[1]));
    match norm {
        AggregateNorm::Sup => diffs.fold(0.0, f64::max),
        AggregateNorm::Integral => diffs.sum(),
    }
}

/// `(sum_{i,j} mu_i mu_j ||f(z_i) - f(z_j)||^s)^(1/s)` for `s > 1`.
pub fn psi_integral<E: NormedValue>(f: &GriddedFunction<E>, s: f64, mu: &Weights) -> Result<f64> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "exponent s must lie in (1, inf), got {s}"
        )));
    }
    mu.check_len(f.len())?;
    let v = f.values();
    let w = mu.as_slice();
    let mut total = 0.0;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            total += w[i] * w[j] * v[i].distance(&v[j]).powf(s);
        }
    }
    Ok((2.0 * total).powf(1.0 / s))
}

/// `ave = sum_i mu_i f(z_i)`.
pub fn average<E: NormedValue>(f: &GriddedFunction<E>, mu: &Weights) -> Result<E> {
    mu.check_len(f.len())?;
    let mut it = f.values().iter().zip(mu.as_slice());
    let (v0, w0) = it.next().expect("gridded functions are non-empty");
    Ok(it.fold(v0.scale(*w0), |acc, (v, w)| acc.add(&v.scale(*w))))
}

/// Deviation from the `mu`-average: `max_i ||f(z_i) - ave||` or `sum_i mu_i ||f(z_i) - ave||`.
pub fn psi_averaging<E: NormedValue>(f: &GriddedFunction<E>, norm: AggregateNorm, mu: &Weights) -> Result<f64> {
    let ave = average(f, mu)?;
    let devs = f.values().iter().map(|v| v.distance(&ave));
    Ok(match norm {
        AggregateNorm::Sup => devs.fold(0.0, f64::max),
        AggregateNorm::Integral => devs.zip(mu.as_slice()).map(|(d, w)| w * d).sum(),
    })
}

/// `0` if all grid values agree to within [`EPS_CONST`], else `1`.
pub fn psi_discrete<E: NormedValue>(f: &GriddedFunction<E>) -> f64 {
    if psi_ks(f) <= EPS_CONST {
        0.0
    } else {
        1.0
    }
}

/// Norm of a finite-difference derivative on a strictly increasing 1-D grid.
///
/// Central differences inside, one-sided at the ends; `Sup` returns
/// `max_i ||f'(z_i)||` and `Integral` the trapezoid integral of `||f'||` over
/// `[z_1, z_m]`.
pub fn psi_derivative<E: NormedValue>(f: &GriddedFunction<E>, norm: AggregateNorm) -> Result<f64> {
    let m = f.len();
    if m < 2 {
        return Err(Error::InvalidParameter(
            "derivative needs at least two grid points".into(),
        ));
    }
    let z: Vec<f64> = f
        .points()
        .iter()
        .map(|p| {
            if p.len() == 1 {
                Ok(p[0])
            } else {
                Err(Error::InvalidParameter(
                    "derivative measures need a one-dimensional grid".into(),
                ))
            }
        })
        .collect::<Result<_>>()?;
    if z.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let v = f.values();
    let slope = |i: usize, j: usize| v[j].distance(&v[i]) / (z[j] - z[i]);
    let deriv: Vec<f64> = (0..m)
        .map(|i| match i {
            0 => slope(0, 1),
            i if i == m - 1 => slope(m - 2, m - 1),
            i => slope(i - 1, i + 1),
        })
        .collect();
    Ok(match norm {
        AggregateNorm::Sup => deriv.iter().copied().fold(0.0, f64::max),
        AggregateNorm::Integral => (1..m)
            .map(|i| 0.5 * (deriv[i] + deriv[i - 1]) * (z[i] - z[i - 1]))
            .sum(),
    })
}

/// A measure of non-constantness, possibly built as a conic combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonConstantnessMeasure {
    KolmogorovSmirnov,
    SumPairwise,
    Adjacent(AggregateNorm),
    /// `weights: None` means uniform weights on the grid.
    IntegralType {
        s: f64,
        weights: Option<Weights>,
    },
    AveragingBased {
        norm: AggregateNorm,
        weights: Option<Weights>,
    },
    Discrete,
    DerivativeBased(AggregateNorm),
    ConicCombination(Vec<(f64, NonConstantnessMeasure)>),
}

impl NonConstantnessMeasure {
    pub fn evaluate<E: NormedValue>(&self, f: &GriddedFunction<E>) -> Result<f64> {
        let weights = |w: &Option<Weights>| w.clone().unwrap_or_else(|| Weights::uniform(f.len()));
        match self {
            Self::KolmogorovSmirnov => Ok(psi_ks(f)),
            Self::SumPairwise => Ok(psi_sum_pairwise(f)),
            Self::Adjacent(norm) => Ok(psi_adjacent(f, *norm)),
            Self::IntegralType { s, weights: w } => psi_integral(f, *s, &weights(w)),
            Self::AveragingBased { norm, weights: w } => psi_averaging(f, *norm, &weights(w)),
            Self::Discrete => Ok(psi_discrete(f)),
            Self::DerivativeBased(norm) => psi_derivative(f, *norm),
            Self::ConicCombination(terms) => conic_combine(terms, f),
        }
    }

    /// Whether a conic combination identifies constants: at least one
    /// coefficient is strictly positive. Non-combinations return `true`.
    pub fn has_positive_coefficient(&self) -> bool {
        match self {
            Self::ConicCombination(terms) => terms.iter().any(|(a, _)| *a > 0.0),
            _ => true,
        }
    }
}

/// `sum_k alpha_k psi_k(f)` with all `alpha_k >= 0`.
pub fn conic_combine<E: NormedValue>(terms: &[(f64, NonConstantnessMeasure)], f: &GriddedFunction<E>) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::InvalidParameter(
            "a conic combination needs at least one term".into(),
        ));
    }
    if let Some((a, _)) = terms.iter().find(|(a, _)| !(*a >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "conic coefficients must be non-negative, got {a}"
        )));
    }
    let mut total = 0.0;
    for (alpha, psi) in terms {
        if *alpha > 0.0 {
            total += alpha * psi.evaluate(f)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn line(values: &[f64]) -> GriddedFunction<f64> {
        let pts: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        GriddedFunction::on_line(&pts, values.to_vec()).unwrap()
    }

    #[test]
    fn ks_examples() {
        assert_eq!(psi_ks(&line(&[2.0, 2.0, 2.0])), 0.0);
        assert_eq!(psi_ks(&line(&[0.0, 3.0])), 3.0);
        let f = GriddedFunction::from_fn(&[0.0, 0.5, 1.0], |z| 2.0 * (0.8 * z).asin() / std::f64::consts::PI);
        assert_abs_diff_eq!(psi_ks(&f), 2.0 * 0.8f64.asin() / std::f64::consts::PI, epsilon = 1e-15);
        assert_abs_diff_eq!(psi_ks(&f), 0.59033, epsilon = 1e-5);
    }

    #[test]
    fn integral_examples() {
        let mu = Weights::uniform(2);
        assert_eq!(psi_integral(&line(&[1.0, 1.0]), 2.0, &mu).unwrap(), 0.0);
        assert_abs_diff_eq!(
            psi_integral(&line(&[0.0, 3.0]), 2.0, &mu).unwrap(),
            4.5f64.sqrt(),
            epsilon = 1e-15
        );
        let f = line(&[0.3, -1.0, 2.5]);
        let mu3 = Weights::uniform(3);
        let base = psi_integral(&f, 2.0, &mu3).unwrap();
        assert_abs_diff_eq!(
            psi_integral(&f.scale(-2.0), 2.0, &mu3).unwrap(),
            2.0 * base,
            epsilon = 1e-14
        );
        assert!(psi_integral(&f, 1.0, &mu3).is_err());
        assert!(psi_integral(&f, 2.0, &mu).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(vec![0.0, 0.0]).is_err());
        assert!(Weights::new(vec![1.0, -0.5]).is_err());
        assert_eq!(Weights::new(vec![1.0, 3.0]).unwrap().as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn averaging_examples() {
        let mu = Weights::uniform(2);
        assert_eq!(psi_averaging(&line(&[4.0, 4.0]), AggregateNorm::Sup, &mu).unwrap(), 0.0);
        assert_abs_diff_eq!(psi_averaging(&line(&[0.0, 1.0]), AggregateNorm::Sup, &mu).unwrap(), 0.5);
        let f = line(&[0.2, 1.7, -0.4]);
        let mu3 = Weights::uniform(3);
        for norm in [AggregateNorm::Sup, AggregateNorm::Integral] {
            assert_abs_diff_eq!(
                psi_averaging(&f.translate(&10.0), norm, &mu3).unwrap(),
                psi_averaging(&f, norm, &mu3).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn discrete_examples() {
        assert_eq!(psi_discrete(&line(&[1.0, 1.0])), 0.0);
        assert_eq!(psi_discrete(&line(&[1.0, 1.001])), 1.0);
        assert_eq!(psi_discrete(&line(&[1.0, 1.0 + 5e-13])), 0.0);
    }

    #[test]
    fn derivative_examples() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let c = GriddedFunction::from_fn(&grid, |_| 3.0);
        assert_eq!(psi_derivative(&c, AggregateNorm::Sup).unwrap(), 0.0);
        let lin = GriddedFunction::from_fn(&grid, |z| -2.5 * z);
        assert_abs_diff_eq!(psi_derivative(&lin, AggregateNorm::Sup).unwrap(), 2.5, epsilon = 1e-12);
        let theta = GriddedFunction::from_fn(&grid, |z| 0.8 * z);
        assert_abs_diff_eq!(
            psi_derivative(&theta, AggregateNorm::Integral).unwrap(),
            0.8,
            epsilon = 1e-12
        );
        let bad = GriddedFunction::on_line(&[0.0, 0.5, 0.5], vec![0.0, 1.0, 2.0]).unwrap();
        assert!(psi_derivative(&bad, AggregateNorm::Sup).is_err());
    }

    #[test]
    fn conic_examples() {
        let f = line(&[0.0, 3.0]);
        let ks = NonConstantnessMeasure::KolmogorovSmirnov;
        assert_eq!(conic_combine(&[(1.0, ks.clone())], &f).unwrap(), 3.0);
        assert_eq!(
            conic_combine(&[(0.0, ks.clone()), (0.0, NonConstantnessMeasure::Discrete)], &f).unwrap(),
            0.0
        );
        assert_eq!(
            conic_combine(&[(2.0, ks.clone()), (3.0, ks.clone())], &f).unwrap(),
            15.0
        );
        assert!(conic_combine(&[(-1.0, ks.clone())], &f).is_err());
        assert!(conic_combine::<f64>(&[], &f).is_err());
        let cc = NonConstantnessMeasure::ConicCombination(vec![(0.0, ks)]);
        assert!(!cc.has_positive_coefficient());
    }

    #[test]
    fn grid_vector_values() {
        let a = GridVector::new(vec![0.1, 0.2, 0.3], VectorNorm::Sup);
        let b = GridVector::new(vec![0.1, 0.25, 0.1], VectorNorm::Sup);
        let f = GriddedFunction::on_line(&[0.0, 1.0], vec![a.clone(), b.clone()]).unwrap();
        assert_abs_diff_eq!(psi_ks(&f), 0.2, epsilon = 1e-15);
        let l2 = GridVector::new(vec![3.0, 4.0], VectorNorm::MeanLp(2.0));
        assert_abs_diff_eq!(l2.norm(), 12.5f64.sqrt(), epsilon = 1e-15);
    }

    fn grid_fn(m: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-5.0f64..5.0, m),
            prop::collection::vec(-5.0f64..5.0, m),
        )
    }

    proptest! {
        #[test]
        fn axioms_hold((fv, gv) in (2usize..12).prop_flat_map(grid_fn), e in -10.0f64..10.0, a in -3.0f64..3.0) {
            let f = line(&fv);
            let g = line(&gv);
            let mu = Weights::uniform(fv.len());
            let measures: Vec<Box<dyn Fn(&GriddedFunction<f64>) -> f64>> = vec![
                Box::new(psi_ks),
                Box::new(|f| psi_integral(f, 2.0, &mu).unwrap()),
                Box::new(|f| psi_averaging(f, AggregateNorm::Sup, &mu).unwrap()),
                Box::new(|f| psi_averaging(f, AggregateNorm::Integral, &mu).unwrap()),
            ];
            for psi in &measures {
                let pf = psi(&f);
                prop_assert!((psi(&f.translate(&e)) - pf).abs() <= 1e-12);
                prop_assert!((psi(&f.scale(a)) - a.abs() * pf).abs() <= 1e-12);
                prop_assert!(psi(&f.add(&g).unwrap()) <= pf + psi(&g) + 1e-12);
            }
        }

        #[test]
        fn ks_averaging_sandwich(fv in prop::collection::vec(-5.0f64..5.0, 1..15)) {
            let f = line(&fv);
            let mu = Weights::uniform(fv.len());
            let ks = psi_ks(&f);
            let avg = psi_averaging(&f, AggregateNorm::Sup, &mu).unwrap();
            prop_assert!(ks <= 2.0 * avg + 1e-12);
            prop_assert!(avg <= ks + 1e-12);
            prop_assert_eq!(ks == 0.0, fv.iter().all(|v| *v == fv[0]));
        }
    }
}
