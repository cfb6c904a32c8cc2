use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::structure::{enumerate_vines, VineEdge, VineStructure};
use crate::copula::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{ckt_at_design, ckt_measure, EstimatorMeasure, EstimatorSpec, KernelSpec};
use crate::numeric::{quantile_sorted, sum_compensated};

/// How edge measures are combined into a vine measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Aggregation {
    Sum,
    /// `(sum_e psi_e^q)^(1/q)`, `q >= 1`.
    Norm {
        q: f64,
    },
    /// `max_e psi_e` (the `q = inf` norm).
    Max,
}

impl Aggregation {
    pub fn validate(&self) -> Result<()> {
        match self {
            Aggregation::Norm { q } if !(*q >= 1.0 && q.is_finite()) => Err(Error::InvalidParameter(format!(
                "norm exponent must be finite and at least 1, got {q}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn combine(&self, values: &[f64]) -> f64 {
        match self {
            Aggregation::Sum => sum_compensated(values.iter().copied()),
            Aggregation::Norm { q } => sum_compensated(values.iter().map(|v| v.abs().powf(*q))).powf(1.0 / q),
            Aggregation::Max => values.iter().copied().fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregation::Sum => f.write_str("sum"),
            Aggregation::Norm { q } => write!(f, "norm:{q}"),
            Aggregation::Max => f.write_str("max"),
        }
    }
}

impl FromStr for Aggregation {
    type Err = Error;
    /// `sum`, `max`, `norm:inf` or `norm:<q>`.
    fn from_str(s: &str) -> Result<Self> {
        let agg = match s {
            "sum" => Aggregation::Sum,
            "max" | "norm:inf" => Aggregation::Max,
            _ => match s.strip_prefix("norm:").map(str::parse::<f64>) {
                Some(Ok(q)) => Aggregation::Norm { q },
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown aggregation '{s}' (expected sum, max or norm:<q>)"
                    )))
                }
            },
        };
        agg.validate()?;
        Ok(agg)
    }
}

/// Kernel for an edge conditioning on `cond_cols` (0-based `X` columns):
/// for two or more conditioning variables each coordinate's bandwidth is
/// scaled by that variable's interquartile range.
pub fn edge_kernel(data: &Dataset, cond_cols: &[usize], kernel: &KernelSpec) -> Result<KernelSpec> {
    if cond_cols.len() < 2 {
        return Ok(KernelSpec {
            scales: None,
            ..kernel.clone()
        });
    }
    let scales: Vec<f64> = cond_cols
        .iter()
        .map(|&c| {
            let mut v = data.x(c).to_vec();
            v.sort_by(f64::total_cmp);
            quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)
        })
        .collect();
    if let Some(pos) = scales.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::Data(format!(
            "column x{} has zero interquartile range",
            cond_cols[pos] + 1
        )));
    }
    KernelSpec {
        scales: None,
        ..kernel.clone()
    }
    .with_scales(scales)
}

/// Conditional Kendall's tau non-constantness of the pair `(X_a, X_b)` given `X_D`.
pub fn edge_measure(data: &Dataset, edge: &VineEdge, spec: &EstimatorSpec, kernel: &KernelSpec) -> Result<f64> {
    if edge.conditioning.is_empty() {
        return Err(Error::InvalidParameter(format!("edge {edge} has no conditioning set")));
    }
    if !spec.measure.is_ckt() {
        return Err(Error::InvalidParameter(format!(
            "vine edges use a Kendall's tau measure, got {}",
            spec.measure
        )));
    }
    let d = data.d();
    let labels = edge.conditioned.iter().chain(&edge.conditioning);
    if labels.clone().any(|&v| v == 0 || v > d) {
        return Err(Error::InvalidParameter(format!(
            "edge {edge} uses a label outside 1..={d}"
        )));
    }
    let cond: Vec<usize> = edge.conditioning.iter().map(|v| v - 1).collect();
    let view = data.conditional_view(edge.conditioned[0] - 1, edge.conditioned[1] - 1, &cond)?;
    let k = edge_kernel(data, &cond, kernel)?;
    let design = spec.design_for(&view)?;
    let taus = ckt_at_design(&view, &k, &design, spec.pseudo_z())?;
    ckt_measure(spec.measure, &taus)
}

/// Aggregated edge measures over trees `T_2, ..., T_{d-1}` (0 for `d = 2`).
pub fn vine_measure(
    data: &Dataset,
    vine: &VineStructure,
    aggregation: Aggregation,
    spec: &EstimatorSpec,
    kernel: &KernelSpec,
) -> Result<f64> {
    aggregation.validate()?;
    vine.validate()?;
    let values: Vec<f64> = vine
        .conditional_edges()
        .map(|e| edge_measure(data, e, spec, kernel))
        .collect::<Result<_>>()?;
    Ok(aggregation.combine(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineValue {
    pub vine: VineStructure,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineScoreReport {
    pub d: usize,
    pub aggregation: Aggregation,
    /// Worst case: maximum over all vines.
    pub wcns: f64,
    /// Best case: minimum over all vines.
    pub bcns: f64,
    /// Average case: mean over all labeled vines.
    pub acns: f64,
    pub per_vine: Vec<VineValue>,
}

/// Vine measure of every labeled vine on the columns of `data`, and the
/// worst-, best- and average-case scores. With `memoize`, each distinct
/// edge is estimated once and shared between vines.
pub fn vine_scores(
    data: &Dataset,
    aggregation: Aggregation,
    spec: &EstimatorSpec,
    kernel: &KernelSpec,
    memoize: bool,
) -> Result<VineScoreReport> {
    aggregation.validate()?;
    let d = data.d();
    let vines = enumerate_vines(d)?;
    let values: Vec<f64> = if memoize {
        let keys: Vec<VineEdge> = vines
            .iter()
            .flat_map(|v| v.conditional_edges().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let computed: Vec<f64> = keys
            .par_iter()
            .map(|e| edge_measure(data, e, spec, kernel))
            .collect::<Result<_>>()?;
        let cache: BTreeMap<&VineEdge, f64> = keys.iter().zip(computed).collect();
        vines
            .iter()
            .map(|v| {
                let edge_values: Vec<f64> = v.conditional_edges().map(|e| cache[e]).collect();
                aggregation.combine(&edge_values)
            })
            .collect()
    } else {
        vines
            .par_iter()
            .map(|v| vine_measure(data, v, aggregation, spec, kernel))
            .collect::<Result<_>>()?
    };
    let wcns = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bcns = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let acns = (sum_compensated(sorted) / values.len() as f64).clamp(bcns, wcns);
    Ok(VineScoreReport {
        d,
        aggregation,
        wcns,
        bcns,
        acns,
        per_vine: vines
            .into_iter()
            .zip(values)
            .map(|(vine, value)| VineValue { vine, value })
            .collect(),
    })
}

/// Estimator settings used for vine edges unless overridden: the sup-pairwise
/// conditional Kendall's tau measure with raw conditioning values.
pub fn default_edge_spec() -> EstimatorSpec {
    EstimatorSpec {
        measure: EstimatorMeasure::CktSupPairwise,
        pseudo_z: Some(false),
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{sample_gaussian_vector, sample_nonsimplified_trivariate};

    fn kernel() -> KernelSpec {
        KernelSpec::epanechnikov(0.25).unwrap()
    }

    #[test]
    fn aggregation_parsing() {
        assert_eq!("sum".parse::<Aggregation>().unwrap(), Aggregation::Sum);
        assert_eq!("norm:inf".parse::<Aggregation>().unwrap(), Aggregation::Max);
        assert_eq!("norm:2".parse::<Aggregation>().unwrap(), Aggregation::Norm { q: 2.0 });
        assert!("norm:0.5".parse::<Aggregation>().is_err());
        assert!("mean".parse::<Aggregation>().is_err());
        assert_eq!(Aggregation::Norm { q: 2.0 }.combine(&[3.0, 4.0]), 5.0);
    }

    #[test]
    fn two_dimensional_vine_has_no_conditional_edges() {
        let data = sample_gaussian_vector(&[vec![1.0, 0.5], vec![0.5, 1.0]], 100, 1).unwrap();
        let r = vine_scores(&data, Aggregation::Sum, &default_edge_spec(), &kernel(), true).unwrap();
        assert_eq!((r.wcns, r.bcns, r.acns, r.per_vine.len()), (0.0, 0.0, 0.0, 1));
    }

    #[test]
    fn three_dimensional_sum_is_the_single_edge() {
        let data = sample_nonsimplified_trivariate(600, 2).unwrap();
        let spec = default_edge_spec();
        let r = vine_scores(&data, Aggregation::Sum, &spec, &kernel(), true).unwrap();
        for vv in &r.per_vine {
            let e = &vv.vine.trees[1][0];
            assert_eq!(vv.value, edge_measure(&data, e, &spec, &kernel()).unwrap());
        }
        assert!(r.bcns <= r.acns && r.acns <= r.wcns);
        // The vine conditioning on X1 sees the sign flip.
        let flip = r
            .per_vine
            .iter()
            .find(|v| v.vine.trees[1][0].conditioning == vec![1])
            .unwrap();
        assert_eq!(flip.value, r.wcns);
        assert!(r.wcns > 0.8);
    }

    #[test]
    fn memoized_and_direct_reports_agree() {
        let corr = vec![
            vec![1.0, 0.5, 0.25, 0.1],
            vec![0.5, 1.0, 0.5, 0.25],
            vec![0.25, 0.5, 1.0, 0.5],
            vec![0.1, 0.25, 0.5, 1.0],
        ];
        let data = sample_gaussian_vector(&corr, 300, 3).unwrap();
        let spec = default_edge_spec();
        for agg in [Aggregation::Sum, Aggregation::Max, Aggregation::Norm { q: 2.0 }] {
            let a = vine_scores(&data, agg, &spec, &kernel(), true).unwrap();
            let b = vine_scores(&data, agg, &spec, &kernel(), false).unwrap();
            assert_eq!(a, b);
            for v in &a.per_vine {
                let sum = vine_measure(&data, &v.vine, Aggregation::Sum, &spec, &kernel()).unwrap();
                let max = vine_measure(&data, &v.vine, Aggregation::Max, &spec, &kernel()).unwrap();
                assert!(max <= sum);
            }
        }
    }

    #[test]
    fn edges_need_conditioning_and_tau_measures() {
        let data = sample_nonsimplified_trivariate(100, 1).unwrap();
        let e1 = VineEdge::new(1, 2, vec![]);
        assert!(edge_measure(&data, &e1, &default_edge_spec(), &kernel()).is_err());
        let e2 = VineEdge::new(2, 3, vec![1]);
        let spec = EstimatorSpec::default();
        assert!(edge_measure(&data, &e2, &spec, &kernel()).is_err());
        let e3 = VineEdge::new(2, 7, vec![1]);
        assert!(edge_measure(&data, &e3, &default_edge_spec(), &kernel()).is_err());
    }

    #[test]
    fn multivariate_conditioning_is_iqr_scaled() {
        let data =
            sample_gaussian_vector(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]], 400, 9).unwrap();
        let big = data.map_x(|j, v| if j == 2 { 10.0 * v } else { v });
        let k1 = edge_kernel(&data, &[0, 2], &kernel()).unwrap();
        let k2 = edge_kernel(&big, &[0, 2], &kernel()).unwrap();
        let (s1, s2) = (k1.scales.unwrap(), k2.scales.unwrap());
        assert!((s2[1] / s1[1] - 10.0).abs() < 1e-9);
        assert_eq!(s1[0], s2[0]);
        assert!(edge_kernel(&data, &[1], &kernel()).unwrap().scales.is_none());
    }
}
