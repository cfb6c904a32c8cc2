use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ckt::tau_from_weights;
use super::conditional::{cond_empirical_copula, Grid, GridEngine, Ranks};
use super::kernel::{KernelSpec, Smoother};
use super::{cond_kendall_tau, Kernel};
use crate::copula::Dataset;
use crate::error::{Error, Result};
use crate::nonconstantness::{psi_averaging, psi_ks, psi_sum_pairwise, AggregateNorm, GriddedFunction, Weights};
use crate::numeric::midpoints;

/// Estimator of the average conditional copula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveVariant {
    /// Mean of the conditional empirical copulas at every observed `Z_i`.
    #[default]
    Cs3,
    /// Empirical CDF of the conditional pseudo-observations.
    Cs4,
}

impl AveVariant {
    pub fn name(self) -> &'static str {
        match self {
            AveVariant::Cs3 => "cs3",
            AveVariant::Cs4 => "cs4",
        }
    }
}

impl fmt::Display for AveVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AveVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cs3" => Ok(AveVariant::Cs3),
            "cs4" => Ok(AveVariant::Cs4),
            _ => Err(Error::InvalidParameter(format!(
                "unknown average variant '{s}' (expected cs3 or cs4)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMeasure {
    #[default]
    Psi1Cvm,
    Psi1Ks,
    #[serde(alias = "psi0_cvm")]
    Psi0TildeCvm,
    #[serde(alias = "psi0_ks")]
    Psi0TildeKs,
    CktSupPairwise,
    CktSumPairwise,
    CktDistToAverage,
}

impl EstimatorMeasure {
    pub const ALL: [EstimatorMeasure; 7] = [
        EstimatorMeasure::Psi1Cvm,
        EstimatorMeasure::Psi1Ks,
        EstimatorMeasure::Psi0TildeCvm,
        EstimatorMeasure::Psi0TildeKs,
        EstimatorMeasure::CktSupPairwise,
        EstimatorMeasure::CktSumPairwise,
        EstimatorMeasure::CktDistToAverage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorMeasure::Psi1Cvm => "psi1_cvm",
            EstimatorMeasure::Psi1Ks => "psi1_ks",
            EstimatorMeasure::Psi0TildeCvm => "psi0_tilde_cvm",
            EstimatorMeasure::Psi0TildeKs => "psi0_tilde_ks",
            EstimatorMeasure::CktSupPairwise => "ckt_sup_pairwise",
            EstimatorMeasure::CktSumPairwise => "ckt_sum_pairwise",
            EstimatorMeasure::CktDistToAverage => "ckt_dist_to_average",
        }
    }

    pub fn is_ckt(self) -> bool {
        matches!(
            self,
            EstimatorMeasure::CktSupPairwise | EstimatorMeasure::CktSumPairwise | EstimatorMeasure::CktDistToAverage
        )
    }

    /// Whether the value depends on the average-copula estimator.
    pub fn uses_average(self) -> bool {
        matches!(self, EstimatorMeasure::Psi1Cvm | EstimatorMeasure::Psi1Ks)
    }
}

impl fmt::Display for EstimatorMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorMeasure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = match s {
            "psi0_cvm" => "psi0_tilde_cvm",
            "psi0_ks" => "psi0_tilde_ks",
            other => other,
        };
        EstimatorMeasure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown measure '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSpec {
    pub ave_variant: AveVariant,
    pub measure: EstimatorMeasure,
    /// Points per `u` axis (cell centers of an equal partition of `(0, 1)`).
    pub u_grid: usize,
    /// Design points `z_1, ..., z_n'`; `None` selects `n_design` empirical quantiles of `Z`.
    pub z_design: Option<Vec<Vec<f64>>>,
    pub n_design: usize,
    /// Kernel on rank-transformed `Z`; `None` means true for copula measures
    /// and false for conditional Kendall's tau measures.
    pub pseudo_z: Option<bool>,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        EstimatorSpec {
            ave_variant: AveVariant::Cs3,
            measure: EstimatorMeasure::Psi1Cvm,
            u_grid: 50,
            z_design: None,
            n_design: 20,
            pseudo_z: None,
        }
    }
}

impl EstimatorSpec {
    pub fn new(measure: EstimatorMeasure, ave_variant: AveVariant) -> Self {
        EstimatorSpec {
            measure,
            ave_variant,
            ..Default::default()
        }
    }

    pub fn pseudo_z(&self) -> bool {
        self.pseudo_z.unwrap_or(!self.measure.is_ckt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_grid < 3 {
            return Err(Error::InvalidParameter(format!(
                "u_grid must be at least 3, got {}",
                self.u_grid
            )));
        }
        let n_design = self.z_design.as_ref().map_or(self.n_design, Vec::len);
        if n_design < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 design points, got {n_design}"
            )));
        }
        Ok(())
    }

    /// The design points for `data`, checked against the observed range of `Z`.
    pub fn design_for(&self, data: &Dataset) -> Result<Vec<Vec<f64>>> {
        match &self.z_design {
            None => default_design(data, self.n_design),
            Some(points) => {
                check_design(data, points)?;
                Ok(points.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    /// The `EstimatorSpec` with design points and `pseudo_z` resolved.
    pub spec: EstimatorSpec,
    pub kernel: KernelSpec,
    pub h: f64,
    pub n: usize,
}

/// `n_design` observations of `Z` at levels `(i - 0.5) / n_design`.
///
/// Observations are ordered by the sum of their coordinate ranks (ties by
/// row index) and the one at position `ceil(level * n)` is taken, so for a
/// scalar `Z` this is the generalized inverse of the empirical CDF.
pub fn default_design(data: &Dataset, n_design: usize) -> Result<Vec<Vec<f64>>> {
    let n = data.n();
    if n == 0 || data.p() == 0 {
        return Err(Error::Data(
            "design points need at least one row and one conditioning column".into(),
        ));
    }
    if n_design < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 design points, got {n_design}"
        )));
    }
    let mut score = vec![0usize; n];
    for col in data.z_columns() {
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        for (s, v) in score.iter_mut().zip(col) {
            *s += sorted.partition_point(|x| x <= v);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (score[i], i));
    Ok((1..=n_design)
        .map(|i| {
            let level = (i as f64 - 0.5) / n_design as f64;
            let pos = ((level * n as f64).ceil() as usize).clamp(1, n) - 1;
            data.z_row(order[pos])
        })
        .collect())
}

fn check_design(data: &Dataset, points: &[Vec<f64>]) -> Result<()> {
    for (i, z) in points.iter().enumerate() {
        if z.len() != data.p() {
            return Err(Error::InvalidParameter(format!(
                "design point {} has {} coordinates, data has p = {}",
                i + 1,
                z.len(),
                data.p()
            )));
        }
        for (k, &v) in z.iter().enumerate() {
            let col = data.z(k);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(v >= lo && v <= hi) {
                return Err(Error::InvalidParameter(format!(
                    "design point {} coordinate z{} = {v} lies outside the observed range [{lo}, {hi}]",
                    i + 1,
                    k + 1
                )));
            }
        }
    }
    Ok(())
}

/// Runs `f` at every design point and reports all failing indices.
fn at_design<T: Send, F: Fn(&[f64]) -> Result<T> + Sync>(design: &[Vec<f64>], f: F) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = design.par_iter().map(|z| f(z)).collect();
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_err())
        .map(|(i, _)| i)
        .collect();
    if let Some(&first) = failed.first() {
        let mut results = results;
        let first = results.swap_remove(first).err().expect("failed index");
        return Err(Error::DesignPointFailures {
            failed,
            first: Box::new(first),
        });
    }
    Ok(results.into_iter().map(|r| r.expect("checked")).collect())
}

/// Conditional copula grids at the design points plus the requested average-copula grids,
/// from which all copula-based measures are read off.
pub struct CopulaMeasures {
    m: usize,
    design: Vec<Grid>,
    cs3: Option<Grid>,
    cs4: Option<Grid>,
}

impl CopulaMeasures {
    pub fn compute(
        data: &Dataset,
        kernel: &KernelSpec,
        u_grid: usize,
        design: &[Vec<f64>],
        pseudo_z: bool,
        averages: &[AveVariant],
    ) -> Result<CopulaMeasures> {
        if u_grid < 3 {
            return Err(Error::InvalidParameter(format!(
                "u_grid must be at least 3, got {u_grid}"
            )));
        }
        let engine = GridEngine::new(data, kernel, pseudo_z, midpoints(u_grid))?;
        let grids = at_design(design, |z| engine.grid_at(z))?;
        let ave = engine.averages(averages.contains(&AveVariant::Cs3), averages.contains(&AveVariant::Cs4))?;
        Ok(CopulaMeasures {
            m: u_grid,
            design: grids,
            cs3: ave.cs3,
            cs4: ave.cs4,
        })
    }

    fn average(&self, v: AveVariant) -> Result<&Grid> {
        match v {
            AveVariant::Cs3 => self.cs3.as_ref(),
            AveVariant::Cs4 => self.cs4.as_ref(),
        }
        .ok_or_else(|| Error::InvalidParameter(format!("average copula {v} was not computed")))
    }

    /// Value of a copula-based measure.
    pub fn value(&self, measure: EstimatorMeasure, ave: AveVariant) -> Result<f64> {
        let cell = 1.0 / (self.m * self.m) as f64;
        let nz = self.design.len() as f64;
        let g = &self.design;
        let v = match measure {
            EstimatorMeasure::Psi1Cvm => {
                let a = self.average(ave)?;
                let mut total = 0.0;
                for gj in g {
                    total += gj.iter().zip(a).map(|(c, m)| (c - m) * (c - m)).sum::<f64>();
                }
                (total * cell / nz).sqrt()
            }
            EstimatorMeasure::Psi1Ks => {
                let a = self.average(ave)?;
                g.iter()
                    .flat_map(|gj| gj.iter().zip(a).map(|(c, m)| (c - m).abs()))
                    .fold(0.0, f64::max)
            }
            EstimatorMeasure::Psi0TildeCvm => {
                let mut total = 0.0;
                for j in 0..g.len() {
                    for l in (j + 1)..g.len() {
                        total += g[j].iter().zip(&g[l]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                    }
                }
                (2.0 * total * cell / (nz * nz)).sqrt()
            }
            EstimatorMeasure::Psi0TildeKs => (0..self.m * self.m)
                .map(|k| {
                    let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), gj| {
                        (lo.min(gj[k]), hi.max(gj[k]))
                    });
                    hi - lo
                })
                .fold(0.0, f64::max),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "{other} is not a copula-based measure"
                )));
            }
        };
        Ok(v)
    }
}

/// Conditional Kendall's tau at each design point.
pub fn ckt_at_design(data: &Dataset, kernel: &KernelSpec, design: &[Vec<f64>], pseudo_z: bool) -> Result<Vec<f64>> {
    if data.d() != 2 {
        return Err(Error::InvalidParameter(format!(
            "conditional Kendall's tau needs d = 2, got d = {}",
            data.d()
        )));
    }
    let sm = Smoother::new(data, kernel, pseudo_z)?;
    let ranks = Ranks::new(data);
    at_design(design, |z| tau_from_weights(&ranks, &sm.weights(z)?, z))
}

/// Sup-pairwise, sum-pairwise or distance-to-average non-constantness of tau values.
pub fn ckt_measure(measure: EstimatorMeasure, taus: &[f64]) -> Result<f64> {
    let f = GriddedFunction::on_line(&(0..taus.len()).map(|i| i as f64).collect::<Vec<_>>(), taus.to_vec())?;
    match measure {
        EstimatorMeasure::CktSupPairwise => Ok(psi_ks(&f)),
        EstimatorMeasure::CktSumPairwise => Ok(psi_sum_pairwise(&f)),
        EstimatorMeasure::CktDistToAverage => psi_averaging(&f, AggregateNorm::Sup, &Weights::uniform(taus.len())),
        other => Err(Error::InvalidParameter(format!(
            "{other} is not a Kendall's tau measure"
        ))),
    }
}

/// Plug-in estimate of a measure of non-simplifyingness.
pub fn estimate_measure(data: &Dataset, spec: &EstimatorSpec, kernel: &KernelSpec) -> Result<MeasureEstimate> {
    spec.validate()?;
    kernel.validate()?;
    let design = spec.design_for(data)?;
    let pseudo_z = spec.pseudo_z();
    let value = if spec.measure.is_ckt() {
        ckt_measure(spec.measure, &ckt_at_design(data, kernel, &design, pseudo_z)?)?
    } else {
        let averages: &[AveVariant] = if spec.measure.uses_average() {
            &[spec.ave_variant]
        } else {
            &[]
        };
        CopulaMeasures::compute(data, kernel, spec.u_grid, &design, pseudo_z, averages)?
            .value(spec.measure, spec.ave_variant)?
    };
    Ok(MeasureEstimate {
        value,
        spec: EstimatorSpec {
            z_design: Some(design),
            n_design: spec.z_design.as_ref().map_or(spec.n_design, Vec::len),
            pseudo_z: Some(pseudo_z),
            ..spec.clone()
        },
        kernel: kernel.clone(),
        h: kernel.h,
        n: data.n(),
    })
}

/// Checks that conditional Kendall's tau and the conditional empirical copula
/// are unchanged (to `1e-12`) when each `X` margin `j` is mapped through
/// `g(j, .)`, which must be strictly increasing on the observed values.
pub fn marginal_transform_check<G: Fn(usize, f64) -> f64>(data: &Dataset, g: G, kernel: &KernelSpec) -> Result<bool> {
    for j in 0..data.d() {
        let mut v = data.x(j).to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let mapped: Vec<f64> = v.iter().map(|&x| g(j, x)).collect();
        if mapped.iter().any(|m| !m.is_finite()) || mapped.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "transform of margin x{} is not strictly increasing on the data",
                j + 1
            )));
        }
    }
    let transformed = data.map_x(&g);
    let design = default_design(data, 5)?;
    let levels = midpoints(9);
    for z in &design {
        for pseudo in [false, true] {
            if data.d() == 2 {
                let a = cond_kendall_tau(data, z, kernel, pseudo)?;
                let b = cond_kendall_tau(&transformed, z, kernel, pseudo)?;
                if (a - b).abs() > 1e-12 {
                    return Ok(false);
                }
            }
            for &u1 in &levels {
                for &u2 in &levels {
                    let mut u = vec![u1, u2];
                    u.resize(data.d(), 0.5);
                    let a = cond_empirical_copula(data, z, kernel, &u, pseudo)?;
                    let b = cond_empirical_copula(&transformed, z, kernel, &u, pseudo)?;
                    if (a - b).abs() > 1e-12 {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Default kernel for the estimators: Epanechnikov with bandwidth `h`.
pub fn default_kernel(h: f64) -> Result<KernelSpec> {
    KernelSpec::new(Kernel::Epanechnikov, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{sample, BuiltinModel};
    use crate::estimators::kernel::Kernel;

    #[test]
    fn default_design_is_empirical_quantile() {
        let z: Vec<f64> = (1..=10).map(|i| i as f64).rev().collect();
        let d = Dataset::from_columns(vec![vec![0.0; 10], vec![0.0; 10]], vec![z]).unwrap();
        let pts = default_design(&d, 4).unwrap();
        // Levels 1/8, 3/8, 5/8, 7/8 on n = 10: positions ceil(1.25) = 2, 4, 7, 9.
        assert_eq!(pts, vec![vec![2.0], vec![4.0], vec![7.0], vec![9.0]]);
    }

    #[test]
    fn spec_validation() {
        let d = sample(&BuiltinModel::Indep.model(), 100, 1).unwrap();
        let mut s = EstimatorSpec::default();
        s.u_grid = 2;
        assert!(s.validate().is_err());
        let s = EstimatorSpec {
            z_design: Some(vec![vec![0.5]]),
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let s = EstimatorSpec {
            z_design: Some(vec![vec![0.5], vec![1.5]]),
            ..Default::default()
        };
        assert!(s.design_for(&d).is_err());
        assert_eq!(
            "psi0_ks".parse::<EstimatorMeasure>().unwrap(),
            EstimatorMeasure::Psi0TildeKs
        );
    }

    #[test]
    fn duplicated_design_points_leave_sup_unchanged() {
        let d = sample(&BuiltinModel::Gauss08z.model(), 400, 5).unwrap();
        let k = KernelSpec::epanechnikov(0.2).unwrap();
        let base: Vec<Vec<f64>> = vec![vec![0.2], vec![0.5], vec![0.8]];
        let doubled: Vec<Vec<f64>> = base.iter().flat_map(|z| [z.clone(), z.clone()]).collect();
        let t1 = ckt_at_design(&d, &k, &base, false).unwrap();
        let t2 = ckt_at_design(&d, &k, &doubled, false).unwrap();
        assert_eq!(
            ckt_measure(EstimatorMeasure::CktSupPairwise, &t1).unwrap(),
            ckt_measure(EstimatorMeasure::CktSupPairwise, &t2).unwrap()
        );
    }

    #[test]
    fn failing_design_points_are_reported() {
        let d = sample(&BuiltinModel::Indep.model(), 200, 2).unwrap();
        let k = KernelSpec::epanechnikov(1e-6).unwrap();
        let spec = EstimatorSpec {
            measure: EstimatorMeasure::CktSupPairwise,
            ..Default::default()
        };
        match estimate_measure(&d, &spec, &k).unwrap_err() {
            Error::DesignPointFailures { failed, first } => {
                assert_eq!(failed.len(), 20);
                assert!(first.is_degenerate());
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn estimates_are_nonnegative_and_echo_the_spec() {
        let d = sample(&BuiltinModel::Gauss08z.model(), 300, 8).unwrap();
        let k = KernelSpec::epanechnikov(0.25).unwrap();
        for measure in EstimatorMeasure::ALL {
            let e = estimate_measure(&d, &EstimatorSpec::new(measure, AveVariant::Cs4), &k).unwrap();
            assert!(e.value >= 0.0, "{measure}");
            assert_eq!(e.spec.z_design.as_ref().unwrap().len(), 20);
            assert_eq!(e.spec.pseudo_z, Some(!measure.is_ckt()));
            assert_eq!((e.n, e.h), (300, 0.25));
        }
    }

    #[test]
    fn ckt_measures_are_symmetric_in_x() {
        let d = sample(&BuiltinModel::Gauss08z.model(), 300, 6).unwrap();
        let swapped = d.permute_x(&[1, 0]);
        let k = KernelSpec::new(Kernel::Gaussian, 0.15).unwrap();
        for measure in [
            EstimatorMeasure::CktSupPairwise,
            EstimatorMeasure::CktSumPairwise,
            EstimatorMeasure::CktDistToAverage,
        ] {
            let spec = EstimatorSpec::new(measure, AveVariant::Cs3);
            let a = estimate_measure(&d, &spec, &k).unwrap().value;
            let b = estimate_measure(&swapped, &spec, &k).unwrap().value;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn transform_check() {
        let d = sample(&BuiltinModel::Gauss08z.model(), 200, 1).unwrap();
        let k = KernelSpec::epanechnikov(0.3).unwrap();
        assert!(marginal_transform_check(&d, |_, x| x, &k).unwrap());
        assert!(marginal_transform_check(&d, |_, x| x.exp(), &k).unwrap());
        assert!(marginal_transform_check(&d, |_, x| -x, &k).is_err());
    }

    #[test]
    fn copula_measure_identity_on_design_grids() {
        // The pairwise CvM equals sqrt(2) times the CvM against the plain mean of the design grids.
        let d = sample(&BuiltinModel::Gauss08z.model(), 300, 3).unwrap();
        let k = KernelSpec::epanechnikov(0.3).unwrap();
        let design = default_design(&d, 6).unwrap();
        let cm = CopulaMeasures::compute(&d, &k, 10, &design, true, &[]).unwrap();
        let m2 = 100.0;
        let mut mean = vec![0.0; 100];
        for g in &cm.design {
            for (a, v) in mean.iter_mut().zip(g) {
                *a += v / 6.0;
            }
        }
        let mut s = 0.0;
        for g in &cm.design {
            s += g.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        let psi1_mean = (s / m2 / 6.0).sqrt();
        let psi0 = cm.value(EstimatorMeasure::Psi0TildeCvm, AveVariant::Cs3).unwrap();
        assert!((psi0 - 2f64.sqrt() * psi1_mean).abs() < 1e-12);
        assert!(cm.value(EstimatorMeasure::Psi1Cvm, AveVariant::Cs3).is_err());
    }
}
