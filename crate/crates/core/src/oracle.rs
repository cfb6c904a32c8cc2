//! Population (true) measures of non-simplifyingness for bivariate
//! conditional copula models with scalar `Z`.
//!
//! Cramer-von Mises type measures are computed by tensor quadrature over
//! `(u1, u2, z)` or `(u1, u2, z, z')`. Kolmogorov-Smirnov type measures are
//! computed by an exhaustive grid scan followed by coordinate-wise
//! golden-section passes around the best grid point. The averaging measure
//! `mu` is the law of `Z`, taken uniform on the model's `z` domain.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{ConditionalCopula, ConditionalCopulaModel};
use crate::error::{Error, Result};
use crate::numeric::{golden_max, midpoints, Rule};

/// Golden-section tolerance used during refinement.
const GOLDEN_TOL: f64 = 1e-10;

/// Error floor reported for refined suprema.
const SUP_ERR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMeasure {
    /// `( int |C_{X|Z=z}(u) - C_ave(u)|^2 du dz )^(1/2)`
    Psi1Cvm,
    /// `sup_{u,z} |C_{X|Z=z}(u) - C_ave(u)|`
    Psi1Ks,
    /// `( int |C_{X|Z=z}(u) - C_{X|Z=z'}(u)|^2 du dz dz' )^(1/2)`
    Psi0Cvm,
    /// `sup_{u,z,z'} |C_{X|Z=z}(u) - C_{X|Z=z'}(u)|`
    Psi0Ks,
    /// `sup_{z,z'} |theta(z) - theta(z')|`
    ParamSup,
    /// `sup_z |theta(z) - int theta dmu|`
    ParamAvg,
}

impl OracleMeasure {
    pub const ALL: [OracleMeasure; 6] = [
        OracleMeasure::Psi1Cvm,
        OracleMeasure::Psi1Ks,
        OracleMeasure::Psi0Cvm,
        OracleMeasure::Psi0Ks,
        OracleMeasure::ParamSup,
        OracleMeasure::ParamAvg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleMeasure::Psi1Cvm => "psi1_cvm",
            OracleMeasure::Psi1Ks => "psi1_ks",
            OracleMeasure::Psi0Cvm => "psi0_cvm",
            OracleMeasure::Psi0Ks => "psi0_ks",
            OracleMeasure::ParamSup => "param_sup",
            OracleMeasure::ParamAvg => "param_avg",
        }
    }
}

impl fmt::Display for OracleMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OracleMeasure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        OracleMeasure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .or(match s {
                "param_int" => Some(OracleMeasure::ParamAvg),
                _ => None,
            })
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown oracle measure '{s}' (expected psi1_cvm, psi1_ks, psi0_cvm, psi0_ks, param_sup or param_avg)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Quadrature {
    Trapezoid,
    /// `k` Gauss-Legendre nodes per panel; the panel count is chosen so the
    /// node count is close to the requested grid size.
    GaussLegendre {
        k: usize,
    },
}

/// Supremum refinement: `passes` rounds of coordinate-wise golden-section
/// search; the bracket half-width starts at one grid step and is multiplied
/// by `shrink` after each round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub passes: usize,
    pub shrink: f64,
}

impl Default for Refinement {
    fn default() -> Self {
        Refinement { passes: 3, shrink: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleSpec {
    pub measure: OracleMeasure,
    /// Points per `u` axis.
    pub u_grid: usize,
    /// Points along `z`.
    pub z_grid: usize,
    pub quad: Quadrature,
    pub refine: Refinement,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            measure: OracleMeasure::Psi1Cvm,
            u_grid: 101,
            z_grid: 201,
            quad: Quadrature::Trapezoid,
            refine: Refinement::default(),
        }
    }
}

impl OracleSpec {
    pub fn new(measure: OracleMeasure) -> Self {
        OracleSpec {
            measure,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_grid < 3 || self.z_grid < 3 {
            return Err(Error::InvalidParameter(format!(
                "grid counts must be at least 3 (u_grid = {}, z_grid = {})",
                self.u_grid, self.z_grid
            )));
        }
        if !(self.refine.shrink > 0.0 && self.refine.shrink <= 1.0) {
            return Err(Error::InvalidParameter(
                "refinement shrink factor must lie in (0, 1]".into(),
            ));
        }
        if let Quadrature::GaussLegendre { k } = self.quad {
            if k == 0 {
                return Err(Error::InvalidParameter("Gauss-Legendre order must be positive".into()));
            }
        }
        Ok(())
    }

    fn rule(&self, lo: f64, hi: f64, n: usize) -> Rule {
        match self.quad {
            Quadrature::Trapezoid => Rule::trapezoid(lo, hi, n),
            Quadrature::GaussLegendre { k } => Rule::gauss_legendre(lo, hi, k, n.div_ceil(k).max(1)),
        }
    }

    fn coarse(&self) -> OracleSpec {
        OracleSpec {
            u_grid: self.u_grid.div_ceil(2).max(3),
            z_grid: self.z_grid.div_ceil(2).max(3),
            ..*self
        }
    }

    /// Normalized `z` weights of the averaging measure on `[lo, hi]`.
    pub fn z_rule(&self, lo: f64, hi: f64) -> Rule {
        let r = self.rule(lo, hi, self.z_grid);
        Rule {
            weights: r.normalized_weights(),
            nodes: r.nodes,
        }
    }
}

/// A computed population measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub value: f64,
    pub abs_err_estimate: f64,
    pub evaluations: u64,
    /// Where a supremum was attained: `(u1, u2, z)` or `(u1, u2, z, z')`
    /// for copula measures, `(z)` or `(z, z')` for parametric ones.
    #[serde(skip)]
    pub location: Option<Vec<f64>>,
}

/// Computes the measure selected by `spec.measure`.
pub fn compute(model: &ConditionalCopulaModel, spec: &OracleSpec) -> Result<MeasureValue> {
    match spec.measure {
        OracleMeasure::Psi1Cvm => true_psi1_cvm(model, spec),
        OracleMeasure::Psi1Ks => true_psi1_ks(model, spec),
        OracleMeasure::Psi0Cvm => true_psi0_cvm(model, spec),
        OracleMeasure::Psi0Ks => true_psi0_ks(model, spec),
        OracleMeasure::ParamSup => true_param_measure(model, ParamVariant::SupPairwise, spec),
        OracleMeasure::ParamAvg => true_param_measure(model, ParamVariant::DistToAverage, spec),
    }
}

/// `sum_j mu_j C_{X|Z=z_j}(u)` with `mu` given by `z_rule` (weights summing to one).
pub fn average_copula(model: &dyn ConditionalCopula, u: [f64; 2], z_rule: &Rule) -> f64 {
    z_rule
        .nodes
        .iter()
        .zip(&z_rule.weights)
        .map(|(&z, &w)| w * model.cdf(u, z))
        .sum()
}

/// `C_{X|Z=z}(u)` for all `z` nodes and all `(u1, u2)` on the tensor grid,
/// stored as `[z][u1 * m + u2]`.
struct Table {
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn build(model: &dyn ConditionalCopula, z_nodes: &[f64], u_nodes: &[f64]) -> Result<Table> {
        let rows: Vec<Vec<f64>> = z_nodes
            .par_iter()
            .map(|&z| {
                let mut row = Vec::with_capacity(u_nodes.len() * u_nodes.len());
                for &u1 in u_nodes {
                    for &u2 in u_nodes {
                        row.push(model.cdf([u1, u2], z));
                    }
                }
                row
            })
            .collect();
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("conditional copula returned a non-finite value".into()));
        }
        Ok(Table { rows })
    }

    fn evaluations(&self) -> u64 {
        self.rows.iter().map(|r| r.len() as u64).sum()
    }

    /// `sum_j w_j row_j` elementwise.
    fn weighted_average(&self, weights: &[f64]) -> Vec<f64> {
        let mut ave = vec![0.0; self.rows[0].len()];
        for (row, w) in self.rows.iter().zip(weights) {
            for (a, c) in ave.iter_mut().zip(row) {
                *a += w * c;
            }
        }
        ave
    }
}

fn tensor_weights(u: &Rule) -> Vec<f64> {
    let mut w = Vec::with_capacity(u.len() * u.len());
    for a in &u.weights {
        for b in &u.weights {
            w.push(a * b);
        }
    }
    w
}

fn psi1_cvm_on(model: &dyn ConditionalCopula, spec: &OracleSpec) -> Result<(f64, u64)> {
    let (lo, hi) = model.z_domain();
    let z = spec.z_rule(lo, hi);
    let u = spec.rule(0.0, 1.0, spec.u_grid);
    let table = Table::build(model, &z.nodes, &u.nodes)?;
    let ave = table.weighted_average(&z.weights);
    let wu = tensor_weights(&u);
    let per_z: Vec<f64> = table
        .rows
        .par_iter()
        .map(|row| {
            row.iter()
                .zip(&ave)
                .zip(&wu)
                .map(|((c, a), w)| w * (c - a) * (c - a))
                .sum::<f64>()
        })
        .collect();
    let total: f64 = per_z.iter().zip(&z.weights).map(|(s, w)| w * s).sum();
    Ok((total.max(0.0).sqrt(), table.evaluations()))
}

fn psi0_cvm_on(model: &dyn ConditionalCopula, spec: &OracleSpec) -> Result<(f64, u64)> {
    let (lo, hi) = model.z_domain();
    let z = spec.z_rule(lo, hi);
    let u = spec.rule(0.0, 1.0, spec.u_grid);
    let table = Table::build(model, &z.nodes, &u.nodes)?;
    let wu = tensor_weights(&u);
    let nz = z.len();
    let per_u: Vec<f64> = (0..wu.len())
        .into_par_iter()
        .map(|k| {
            let mut s = 0.0;
            for j in 0..nz {
                let cj = table.rows[j][k];
                let mut inner = 0.0;
                for l in (j + 1)..nz {
                    let d = cj - table.rows[l][k];
                    inner += z.weights[l] * d * d;
                }
                s += z.weights[j] * inner;
            }
            2.0 * s
        })
        .collect();
    let total: f64 = per_u.iter().zip(&wu).map(|(s, w)| w * s).sum();
    Ok((total.max(0.0).sqrt(), table.evaluations()))
}

fn with_richardson(
    model: &dyn ConditionalCopula,
    spec: &OracleSpec,
    f: fn(&dyn ConditionalCopula, &OracleSpec) -> Result<(f64, u64)>,
) -> Result<MeasureValue> {
    spec.validate()?;
    let (fine, n_fine) = f(model, spec)?;
    let (coarse, n_coarse) = f(model, &spec.coarse())?;
    Ok(MeasureValue {
        value: fine,
        abs_err_estimate: (fine - coarse).abs(),
        evaluations: n_fine + n_coarse,
        location: None,
    })
}

/// Cramer-von Mises distance between the conditional copulas and their average.
pub fn true_psi1_cvm(model: &dyn ConditionalCopula, spec: &OracleSpec) -> Result<MeasureValue> {
    with_richardson(model, spec, psi1_cvm_on)
}

/// Cramer-von Mises distance between conditional copulas at pairs `(z, z')`.
pub fn true_psi0_cvm(model: &dyn ConditionalCopula, spec: &OracleSpec) -> Result<MeasureValue> {
    with_richardson(model, spec, psi0_cvm_on)
}

/// Coordinate-wise golden-section ascent of `f` from `start` inside `bounds`.
fn refine_max<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: Vec<f64>,
    steps: &[f64],
    bounds: &[(f64, f64)],
    refine: Refinement,
) -> (Vec<f64>, f64) {
    let mut x = start;
    let mut fx = f(&x);
    let mut half: Vec<f64> = steps.to_vec();
    for _ in 0..refine.passes {
        for c in 0..x.len() {
            let lo = (x[c] - half[c]).max(bounds[c].0);
            let hi = (x[c] + half[c]).min(bounds[c].1);
            let mut probe = x.clone();
            let (t, ft) = golden_max(
                |t| {
                    probe[c] = t;
                    f(&probe)
                },
                lo,
                hi,
                GOLDEN_TOL,
            );
            if ft > fx {
                x[c] = t;
                fx = ft;
            }
        }
        for h in half.iter_mut() {
            *h *= refine.shrink;
        }
    }
    (x, fx)
}

struct Counter<'a> {
    model: &'a dyn ConditionalCopula,
    count: u64,
}

impl Counter<'_> {
    fn cdf(&mut self, u: [f64; 2], z: f64) -> f64 {
        self.count += 1;
        self.model.cdf(u, z)
    }

    fn average(&mut self, u: [f64; 2], rule: &Rule) -> f64 {
        self.count += rule.len() as u64;
        average_copula(self.model, u, rule)
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values.enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, v)| if v > best.1 { (i, v) } else { best },
    )
}

/// Kolmogorov-Smirnov distance between the conditional copulas and their average.
pub fn true_psi1_ks(model: &dyn ConditionalCopula, spec: &OracleSpec) -> Result<MeasureValue> {
    spec.validate()?;
    let (lo, hi) = model.z_domain();
    let z_avg = spec.z_rule(lo, hi);
    let z_avg_coarse = spec.coarse().z_rule(lo, hi);
    let u_nodes = midpoints(spec.u_grid);
    let z_scan = Rule::trapezoid(lo, hi, spec.z_grid).nodes;

    let table = Table::build(model, &z_scan, &u_nodes)?;
    let ave_table = Table::build(model, &z_avg.nodes, &u_nodes)?;
    let ave = ave_table.weighted_average(&z_avg.weights);
    let m = u_nodes.len();
    let (best_row, best) = table
        .rows
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let (k, v) = argmax(row.iter().zip(&ave).map(|(c, a)| (c - a).abs()));
            (j, (k, v))
        })
        .fold(
            (0, (0, f64::NEG_INFINITY)),
            |acc, cur| if cur.1 .1 > acc.1 .1 { cur } else { acc },
        );
    let (best_k, scan_value) = best;
    let start = vec![u_nodes[best_k / m], u_nodes[best_k % m], z_scan[best_row]];

    let mut counter = Counter { model, count: 0 };
    let steps = [1.0 / m as f64, 1.0 / m as f64, (hi - lo) / (spec.z_grid - 1) as f64];
    let bounds = [(0.0, 1.0), (0.0, 1.0), (lo, hi)];
    let (x, value) = refine_max(
        |p| {
            let u = [p[0], p[1]];
            (counter.cdf(u, p[2]) - counter.average(u, &z_avg)).abs()
        },
        start,
        &steps,
        &bounds,
        spec.refine,
    );
    let u_star = [x[0], x[1]];
    let quad_err = (counter.average(u_star, &z_avg) - counter.average(u_star, &z_avg_coarse)).abs();
    let value = value.max(scan_value);
    Ok(MeasureValue {
        value,
        abs_err_estimate: (value - scan_value).abs() + quad_err + SUP_ERR_FLOOR,
        evaluations: table.evaluations() + ave_table.evaluations() + counter.count,
        location: Some(x),
    })
}

/// Kolmogorov-Smirnov distance between conditional copulas at pairs `(z, z')`.
///
/// The scan covers every pair of `z` grid points (through the per-`u` maximum
/// and minimum over `z`); no monotonicity of the parameter map is assumed.
pub fn true_psi0_ks(model: &dyn ConditionalCopula, spec: &OracleSpec) -> Result<MeasureValue> {
    spec.validate()?;
    let (lo, hi) = model.z_domain();
    let u_nodes = midpoints(spec.u_grid);
    let z_scan = Rule::trapezoid(lo, hi, spec.z_grid).nodes;
    let table = Table::build(model, &z_scan, &u_nodes)?;
    let m = u_nodes.len();

    let mut scan_value = f64::NEG_INFINITY;
    let mut start = vec![0.5, 0.5, lo, hi];
    for k in 0..m * m {
        let (jmax, cmax) = argmax(table.rows.iter().map(|r| r[k]));
        let (jmin, neg_cmin) = argmax(table.rows.iter().map(|r| -r[k]));
        let v = cmax + neg_cmin;
        if v > scan_value {
            scan_value = v;
            start = vec![u_nodes[k / m], u_nodes[k % m], z_scan[jmax], z_scan[jmin]];
        }
    }

    let mut counter = Counter { model, count: 0 };
    let dz = (hi - lo) / (spec.z_grid - 1) as f64;
    let steps = [1.0 / m as f64, 1.0 / m as f64, dz, dz];
    let bounds = [(0.0, 1.0), (0.0, 1.0), (lo, hi), (lo, hi)];
    let (x, value) = refine_max(
        |p| {
            let u = [p[0], p[1]];
            (counter.cdf(u, p[2]) - counter.cdf(u, p[3])).abs()
        },
        start,
        &steps,
        &bounds,
        spec.refine,
    );
    let value = value.max(scan_value);
    Ok(MeasureValue {
        value,
        abs_err_estimate: (value - scan_value).abs() + SUP_ERR_FLOOR,
        evaluations: table.evaluations() + counter.count,
        location: Some(x),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamVariant {
    SupPairwise,
    DistToAverage,
}

/// Non-constantness of the scalar parameter map `z -> theta(z)`.
pub fn true_param_measure(
    model: &ConditionalCopulaModel,
    variant: ParamVariant,
    spec: &OracleSpec,
) -> Result<MeasureValue> {
    spec.validate()?;
    let (lo, hi) = model.z_domain();
    let theta = |z: f64| model.parameter_at(z);
    let grid = Rule::trapezoid(lo, hi, spec.z_grid).nodes;
    let values: Vec<f64> = grid.iter().map(|&z| theta(z)).collect::<Result<_>>()?;
    let dz = (hi - lo) / (spec.z_grid - 1) as f64;
    let mut evaluations = values.len() as u64;
    let theta_or_nan = |z: f64| theta(z).unwrap_or(f64::NAN);

    let (x, value, scan_value) = match variant {
        ParamVariant::SupPairwise => {
            let (imax, vmax) = argmax(values.iter().copied());
            let (imin, neg_vmin) = argmax(values.iter().map(|v| -v));
            let scan = vmax + neg_vmin;
            let (x, v) = refine_max(
                |p| {
                    evaluations += 2;
                    (theta_or_nan(p[0]) - theta_or_nan(p[1])).abs()
                },
                vec![grid[imax], grid[imin]],
                &[dz, dz],
                &[(lo, hi), (lo, hi)],
                spec.refine,
            );
            (x, v, scan)
        }
        ParamVariant::DistToAverage => {
            let rule = spec.z_rule(lo, hi);
            let mut ave = 0.0;
            for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
                ave += w * theta(z)?;
            }
            evaluations += rule.len() as u64;
            let (i, scan) = argmax(values.iter().map(|v| (v - ave).abs()));
            let (x, v) = refine_max(
                |p| {
                    evaluations += 1;
                    (theta_or_nan(p[0]) - ave).abs()
                },
                vec![grid[i]],
                &[dz],
                &[(lo, hi)],
                spec.refine,
            );
            (x, v, scan)
        }
    };
    let value = value.max(scan_value);
    Ok(MeasureValue {
        value,
        abs_err_estimate: (value - scan_value).abs() + SUP_ERR_FLOOR,
        evaluations,
        location: Some(x),
    })
}

/// `C_{X|Z}` with the two `X` components exchanged.
pub struct SwapX<'a>(pub &'a dyn ConditionalCopula);

impl ConditionalCopula for SwapX<'_> {
    fn z_domain(&self) -> (f64, f64) {
        self.0.z_domain()
    }

    fn cdf(&self, u: [f64; 2], z: f64) -> f64 {
        self.0.cdf([u[1], u[0]], z)
    }
}

/// Average of `psi` over all permutations of the components of `X` (two
/// for `d = 2`) and of `Z` (one for `p = 1`).
pub fn symmetrize<F>(psi: F, model: &dyn ConditionalCopula) -> Result<f64>
where
    F: Fn(&dyn ConditionalCopula) -> Result<f64>,
{
    let swapped = SwapX(model);
    let values = [psi(model)?, psi(&swapped)?];
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
