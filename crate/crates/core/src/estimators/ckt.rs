use super::conditional::Ranks;
use super::kernel::{KernelSpec, Smoother};
use crate::copula::Dataset;
use crate::error::{Error, Result};
use crate::numeric::sum_compensated;

/// Smallest admissible `1 - sum w_i^2`.
pub const EPS_DENOM: f64 = 1e-3;

struct Fenwick(Vec<f64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick(vec![0.0; n + 1])
    }

    fn add(&mut self, mut i: usize, v: f64) {
        while i < self.0.len() {
            self.0[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over ranks `1..=i`.
    fn prefix(&self, mut i: usize) -> f64 {
        let mut s = 0.0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// `sum_{i != j} w_i w_j sign((X_i1 - X_j1)(X_i2 - X_j2))` in `O(n log n)`.
pub(crate) fn weighted_sign_sum(ranks: &Ranks, w: &[f64]) -> f64 {
    let order = ranks.order(0);
    let r1 = ranks.rank(0);
    let r2 = ranks.rank(1);
    let n = order.len();
    let mut tree = Fenwick::new(n);
    let mut inserted = 0.0;
    let mut concordant = 0.0;
    let mut discordant = 0.0;
    let mut pos = 0;
    while pos < n {
        let mut end = pos + 1;
        while end < n && r1[order[end]] == r1[order[pos]] {
            end += 1;
        }
        for &i in &order[pos..end] {
            if w[i] > 0.0 {
                let below = tree.prefix(r2[i] - 1);
                let above = inserted - tree.prefix(r2[i]);
                concordant += w[i] * below;
                discordant += w[i] * above;
            }
        }
        for &i in &order[pos..end] {
            if w[i] > 0.0 {
                tree.add(r2[i], w[i]);
                inserted += w[i];
            }
        }
        pos = end;
    }
    2.0 * (concordant - discordant)
}

pub(crate) fn tau_from_weights(ranks: &Ranks, w: &[f64], z: &[f64]) -> Result<f64> {
    let denominator = 1.0 - sum_compensated(w.iter().map(|v| v * v));
    if denominator <= EPS_DENOM {
        return Err(Error::EffectiveSampleTooSmall {
            z: z.to_vec(),
            denominator,
        });
    }
    Ok((weighted_sign_sum(ranks, w) / denominator).clamp(-1.0, 1.0))
}

/// Kernel conditional Kendall's tau of `(X_1, X_2)` given `Z = z`:
/// `sum_{i,j} w_i w_j sign((X_i1 - X_j1)(X_i2 - X_j2)) / (1 - sum_i w_i^2)`.
pub fn cond_kendall_tau(data: &Dataset, z: &[f64], kernel: &KernelSpec, pseudo_z: bool) -> Result<f64> {
    if data.d() != 2 {
        return Err(Error::InvalidParameter(format!(
            "conditional Kendall's tau needs d = 2, got d = {}",
            data.d()
        )));
    }
    let w = Smoother::new(data, kernel, pseudo_z)?.weights(z)?;
    tau_from_weights(&Ranks::new(data), &w, z)
}

/// Classical sample Kendall's tau (ties contribute zero).
pub fn sample_kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (x[i] - x[j]) * (y[i] - y[j]);
            s += (v > 0.0) as i64 - (v < 0.0) as i64;
        }
    }
    2.0 * s as f64 / (n as f64 * (n as f64 - 1.0))
}
