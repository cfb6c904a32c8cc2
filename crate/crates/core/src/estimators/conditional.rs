use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{KernelSpec, Smoother};
use crate::copula::Dataset;
use crate::error::{Error, Result};

/// Slack used when comparing cumulative weights with a probability level.
pub const LEVEL_EPS: f64 = 1e-12;

/// Observations processed per task when averaging over all `Z_i`.
const CHUNK: usize = 32;

/// Fewest observations with positive weight for a design-point estimate of
/// the conditional copula; smaller windows count as degenerate.
pub const MIN_DESIGN_WINDOW: usize = 2;

/// Sort order and max-ranks (`#{j : X_j <= X_i}`) of each `X` margin.
pub(crate) struct Ranks {
    order: Vec<Vec<usize>>,
    rank: Vec<Vec<usize>>,
}

impl Ranks {
    pub(crate) fn new(data: &Dataset) -> Ranks {
        let n = data.n();
        let mut order = Vec::with_capacity(data.d());
        let mut rank = Vec::with_capacity(data.d());
        for col in data.x_columns() {
            let mut o: Vec<usize> = (0..n).collect();
            o.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut r = vec![0; n];
            let mut pos = 0;
            while pos < n {
                let mut end = pos + 1;
                while end < n && col[o[end]] == col[o[pos]] {
                    end += 1;
                }
                for &i in &o[pos..end] {
                    r[i] = end;
                }
                pos = end;
            }
            order.push(o);
            rank.push(r);
        }
        Ranks { order, rank }
    }

    pub(crate) fn rank(&self, j: usize) -> &[usize] {
        &self.rank[j]
    }

    pub(crate) fn order(&self, j: usize) -> &[usize] {
        &self.order[j]
    }

    /// `cum[pos] = sum of w over the first pos + 1 observations in margin `j` order`.
    fn cumulative(&self, j: usize, w: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        self.order[j]
            .iter()
            .map(|&i| {
                acc += w[i];
                acc
            })
            .collect()
    }

    /// Max-rank of `F^-(u)` for each level (0 for `u <= 0`, so that nothing is counted).
    fn thresholds(&self, j: usize, cum: &[f64], levels: &[f64]) -> Vec<usize> {
        let n = cum.len();
        levels
            .iter()
            .map(|&u| {
                if u <= 0.0 {
                    return 0;
                }
                let pos = cum.partition_point(|&c| c < u - LEVEL_EPS).min(n - 1);
                self.rank[j][self.order[j][pos]]
            })
            .collect()
    }
}

/// Right-continuous step CDF on the positive-weight support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCdf {
    points: Vec<f64>,
    cum: Vec<f64>,
}

impl StepCdf {
    /// Builds the weighted empirical CDF of `values` with weights `w` (summing to one).
    pub fn new(values: &[f64], w: &[f64]) -> Result<StepCdf> {
        let mut pairs: Vec<(f64, f64)> = values
            .iter()
            .zip(w)
            .filter(|(_, &wi)| wi > 0.0)
            .map(|(&x, &wi)| (x, wi))
            .collect();
        if pairs.is_empty() {
            return Err(Error::InvalidParameter(
                "step CDF needs at least one positive weight".into(),
            ));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::new();
        let mut cum: Vec<f64> = Vec::new();
        let mut acc = 0.0;
        for (x, wi) in pairs {
            acc += wi;
            if points.last() == Some(&x) {
                *cum.last_mut().expect("non-empty") = acc;
            } else {
                points.push(x);
                cum.push(acc);
            }
        }
        Ok(StepCdf { points, cum })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.points.partition_point(|&p| p <= x) {
            0 => 0.0,
            k => self.cum[k - 1].min(1.0),
        }
    }

    /// Jump points of the CDF.
    pub fn support(&self) -> &[f64] {
        &self.points
    }

    /// `inf{x : F(x) >= u}`; `u <= 0` gives the smallest support point.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.points[0];
        }
        let k = self.cum.partition_point(|&c| c < u - LEVEL_EPS);
        self.points[k.min(self.points.len() - 1)]
    }
}

/// `x -> sum_i w_i(z) 1(X_{i,j} <= x)`.
pub fn cond_ecdf(data: &Dataset, z: &[f64], kernel: &KernelSpec, j: usize, pseudo_z: bool) -> Result<StepCdf> {
    if j >= data.d() {
        return Err(Error::InvalidParameter(format!(
            "margin {j} out of range for d = {}",
            data.d()
        )));
    }
    let w = Smoother::new(data, kernel, pseudo_z)?.weights(z)?;
    StepCdf::new(data.x(j), &w)
}

/// Generalized inverse `F^-(u) = inf{x : F(x) >= u}`.
pub fn cond_quantile(f: &StepCdf, u: f64) -> f64 {
    f.quantile(u)
}

fn check_u(data: &Dataset, u: &[f64]) -> Result<()> {
    if u.len() != data.d() {
        return Err(Error::InvalidParameter(format!(
            "u has {} coordinates, data has d = {}",
            u.len(),
            data.d()
        )));
    }
    Ok(())
}

fn copula_from_weights(ranks: &Ranks, w: &[f64], u: &[f64]) -> f64 {
    let thr: Vec<usize> = (0..u.len())
        .map(|j| ranks.thresholds(j, &ranks.cumulative(j, w), &u[j..=j])[0])
        .collect();
    let mut acc = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 && (0..u.len()).all(|j| ranks.rank(j)[i] <= thr[j]) {
            acc += wi;
        }
    }
    acc.min(1.0)
}

/// `C(u | z) = F_{X|Z}(F^-_{X_1|Z}(u_1 | z), ..., F^-_{X_d|Z}(u_d | z) | z)`
/// with kernel-weighted empirical CDFs; `C(u | z) = 0` as soon as some `u_j <= 0`.
pub fn cond_empirical_copula(data: &Dataset, z: &[f64], kernel: &KernelSpec, u: &[f64], pseudo_z: bool) -> Result<f64> {
    check_u(data, u)?;
    let w = Smoother::new(data, kernel, pseudo_z)?.weights(z)?;
    Ok(copula_from_weights(&Ranks::new(data), &w, u))
}

/// `(1/n) sum_i C(u | Z_i)`, skipping observations whose kernel window is
/// empty and averaging over the rest.
pub fn ave_copula_cs3(data: &Dataset, kernel: &KernelSpec, u: &[f64], pseudo_z: bool) -> Result<f64> {
    check_u(data, u)?;
    let sm = Smoother::new(data, kernel, pseudo_z)?;
    let ranks = Ranks::new(data);
    let mut total = 0.0;
    let mut kept = 0usize;
    for i in 0..data.n() {
        if let Some(w) = sm.weights_at_obs(i) {
            total += copula_from_weights(&ranks, &w, u);
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::DegenerateNeighborhood { z: data.z_row(0) });
    }
    Ok(total / kept as f64)
}

/// Conditional pseudo-observations `U_{i,j} = F_{X_j|Z}(X_{i,j} | Z_i)`; `None` where the window at `Z_i` is empty.
pub fn conditional_pseudo_observations(
    data: &Dataset,
    kernel: &KernelSpec,
    pseudo_z: bool,
) -> Result<Vec<Option<Vec<f64>>>> {
    let sm = Smoother::new(data, kernel, pseudo_z)?;
    let ranks = Ranks::new(data);
    Ok((0..data.n())
        .map(|i| {
            sm.weights_at_obs(i).map(|w| {
                (0..data.d())
                    .map(|j| ranks.cumulative(j, &w)[ranks.rank(j)[i] - 1].min(1.0))
                    .collect()
            })
        })
        .collect())
}

/// Empirical CDF of the conditional pseudo-observations at `u`.
pub fn ave_copula_cs4(data: &Dataset, kernel: &KernelSpec, u: &[f64], pseudo_z: bool) -> Result<f64> {
    check_u(data, u)?;
    let obs: Vec<Vec<f64>> = conditional_pseudo_observations(data, kernel, pseudo_z)?
        .into_iter()
        .flatten()
        .collect();
    if obs.is_empty() {
        return Err(Error::DegenerateNeighborhood { z: data.z_row(0) });
    }
    let hits = obs.iter().filter(|o| o.iter().zip(u).all(|(a, b)| a <= b)).count();
    Ok(hits as f64 / obs.len() as f64)
}

/// Bivariate conditional copulas evaluated on a tensor grid `levels x levels`.
pub(crate) struct GridEngine<'a> {
    pub(crate) smoother: Smoother<'a>,
    ranks: Ranks,
    levels: Vec<f64>,
}

/// `m x m` values stored row-major: `[k * m + l] = C(levels[k], levels[l])`.
pub(crate) type Grid = Vec<f64>;

pub(crate) struct AverageGrids {
    pub(crate) cs3: Option<Grid>,
    pub(crate) cs4: Option<Grid>,
}

impl<'a> GridEngine<'a> {
    pub(crate) fn new(data: &Dataset, kernel: &'a KernelSpec, pseudo_z: bool, levels: Vec<f64>) -> Result<Self> {
        if data.d() != 2 {
            return Err(Error::InvalidParameter(format!(
                "conditional copula grids need d = 2, got d = {}",
                data.d()
            )));
        }
        if levels.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter("grid levels must be nondecreasing".into()));
        }
        Ok(GridEngine {
            smoother: Smoother::new(data, kernel, pseudo_z)?,
            ranks: Ranks::new(data),
            levels,
        })
    }

    fn m(&self) -> usize {
        self.levels.len()
    }

    /// Copula grid for weights `w` plus the two cumulative weight arrays.
    fn grid_with_cum(&self, w: &[f64]) -> (Grid, [Vec<f64>; 2]) {
        let m = self.m();
        let cum = [self.ranks.cumulative(0, w), self.ranks.cumulative(1, w)];
        let t1 = self.ranks.thresholds(0, &cum[0], &self.levels);
        let t2 = self.ranks.thresholds(1, &cum[1], &self.levels);
        let mut g = vec![0.0; m * m];
        for (i, &wi) in w.iter().enumerate() {
            if wi > 0.0 {
                let a = t1.partition_point(|&t| t < self.ranks.rank(0)[i]);
                let b = t2.partition_point(|&t| t < self.ranks.rank(1)[i]);
                if a < m && b < m {
                    g[a * m + b] += wi;
                }
            }
        }
        for k in 0..m {
            for l in 1..m {
                g[k * m + l] += g[k * m + l - 1];
            }
        }
        for k in 1..m {
            for l in 0..m {
                g[k * m + l] += g[(k - 1) * m + l];
            }
        }
        for v in g.iter_mut() {
            *v = v.min(1.0);
        }
        (g, cum)
    }

    pub(crate) fn grid_at(&self, z: &[f64]) -> Result<Grid> {
        let w = self.smoother.weights(z)?;
        if w.iter().filter(|&&v| v > 0.0).count() < MIN_DESIGN_WINDOW {
            return Err(Error::DegenerateNeighborhood { z: z.to_vec() });
        }
        Ok(self.grid_with_cum(&w).0)
    }

    /// Cs3 and/or Cs4 average copula on the grid.
    pub(crate) fn averages(&self, cs3: bool, cs4: bool) -> Result<AverageGrids> {
        let n = self.smoother.n();
        let m = self.m();
        let chunks: Vec<(Grid, usize, Vec<[f64; 2]>)> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut sum = if cs3 { vec![0.0; m * m] } else { Vec::new() };
                let mut kept = 0;
                let mut pseudo = Vec::new();
                for i in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
                    let Some(w) = self.smoother.weights_at_obs(i) else {
                        continue;
                    };
                    kept += 1;
                    if cs3 {
                        let (g, cum) = self.grid_with_cum(&w);
                        for (s, v) in sum.iter_mut().zip(&g) {
                            *s += v;
                        }
                        if cs4 {
                            pseudo.push(self.pseudo_obs(&cum, i));
                        }
                    } else {
                        let cum = [self.ranks.cumulative(0, &w), self.ranks.cumulative(1, &w)];
                        pseudo.push(self.pseudo_obs(&cum, i));
                    }
                }
                (sum, kept, pseudo)
            })
            .collect();
        let kept: usize = chunks.iter().map(|c| c.1).sum();
        if kept == 0 {
            return Err(Error::DegenerateNeighborhood { z: Vec::new() });
        }
        let cs3_grid = cs3.then(|| {
            let mut total = vec![0.0; m * m];
            for (sum, _, _) in &chunks {
                for (t, v) in total.iter_mut().zip(sum) {
                    *t += v;
                }
            }
            total.iter().map(|v| v / kept as f64).collect()
        });
        let cs4_grid = cs4.then(|| {
            let obs: Vec<[f64; 2]> = chunks.iter().flat_map(|c| c.2.iter().copied()).collect();
            self.pseudo_ecdf_grid(&obs)
        });
        Ok(AverageGrids {
            cs3: cs3_grid,
            cs4: cs4_grid,
        })
    }

    fn pseudo_obs(&self, cum: &[Vec<f64>; 2], i: usize) -> [f64; 2] {
        [
            cum[0][self.ranks.rank(0)[i] - 1].min(1.0),
            cum[1][self.ranks.rank(1)[i] - 1].min(1.0),
        ]
    }

    fn pseudo_ecdf_grid(&self, obs: &[[f64; 2]]) -> Grid {
        let m = self.m();
        let mut g = vec![0.0; m * m];
        for o in obs {
            let a = self.levels.partition_point(|&u| u < o[0]);
            let b = self.levels.partition_point(|&u| u < o[1]);
            if a < m && b < m {
                g[a * m + b] += 1.0;
            }
        }
        for k in 0..m {
            for l in 1..m {
                g[k * m + l] += g[k * m + l - 1];
            }
        }
        for k in 1..m {
            for l in 0..m {
                g[k * m + l] += g[(k - 1) * m + l];
            }
        }
        g.iter().map(|v| v / obs.len() as f64).collect()
    }
}
