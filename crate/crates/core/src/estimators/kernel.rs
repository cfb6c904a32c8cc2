use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::copula::Dataset;
use crate::error::{Error, Result};
use crate::numeric::sum_compensated;

/// One-dimensional kernel shapes, each integrating to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `3/4 (1 - t^2)` on `[-1, 1]`.
    #[default]
    Epanechnikov,
    Gaussian,
    /// `1/2` on `[-1, 1]`.
    Uniform,
}

impl Kernel {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if t.abs() <= 1.0 {
                    0.75 * (1.0 - t * t)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * t * t).exp() / (2.0 * PI).sqrt(),
            Kernel::Uniform => {
                if t.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "gaussian" => Ok(Kernel::Gaussian),
            "uniform" => Ok(Kernel::Uniform),
            _ => Err(Error::InvalidParameter(format!(
                "unknown kernel '{s}' (expected epanechnikov, gaussian or uniform)"
            ))),
        }
    }
}

/// Product kernel `prod_k K((Z_k - z_k) / (h s_k))` with optional
/// per-coordinate scales `s_k` (all one by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(default)]
    pub kernel: Kernel,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
}

impl KernelSpec {
    pub fn new(kernel: Kernel, h: f64) -> Result<Self> {
        let k = KernelSpec {
            kernel,
            h,
            scales: None,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn epanechnikov(h: f64) -> Result<Self> {
        KernelSpec::new(Kernel::Epanechnikov, h)
    }

    pub fn with_scales(mut self, scales: Vec<f64>) -> Result<Self> {
        self.scales = Some(scales);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {}",
                self.h
            )));
        }
        if let Some(s) = &self.scales {
            if s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidParameter("kernel scales must be positive".into()));
            }
        }
        Ok(())
    }

    fn bandwidth(&self, k: usize) -> f64 {
        self.h * self.scales.as_ref().map_or(1.0, |s| s[k])
    }

    fn check_dim(&self, p: usize) -> Result<()> {
        if let Some(s) = &self.scales {
            if s.len() != p {
                return Err(Error::InvalidParameter(format!(
                    "{} kernel scales given for {p} conditioning variable(s)",
                    s.len()
                )));
            }
        }
        Ok(())
    }
}

/// Kernel coordinates of a dataset: raw `Z` or its marginal empirical CDF values.
pub(crate) struct Smoother<'a> {
    kernel: &'a KernelSpec,
    pseudo_z: bool,
    coords: Vec<Vec<f64>>,
    sorted_z: Vec<Vec<f64>>,
    n: usize,
}

impl<'a> Smoother<'a> {
    pub(crate) fn new(data: &Dataset, kernel: &'a KernelSpec, pseudo_z: bool) -> Result<Self> {
        kernel.validate()?;
        let n = data.n();
        if n == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if data.p() == 0 {
            return Err(Error::Data("dataset has no conditioning columns".into()));
        }
        kernel.check_dim(data.p())?;
        let sorted_z: Vec<Vec<f64>> = data
            .z_columns()
            .iter()
            .map(|c| {
                let mut s = c.clone();
                s.sort_by(f64::total_cmp);
                s
            })
            .collect();
        let mut sm = Smoother {
            kernel,
            pseudo_z,
            coords: Vec::new(),
            sorted_z,
            n,
        };
        sm.coords = if pseudo_z {
            (0..data.p())
                .map(|k| data.z(k).iter().map(|&v| sm.ecdf(k, v)).collect())
                .collect()
        } else {
            data.z_columns().to_vec()
        };
        Ok(sm)
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    fn ecdf(&self, k: usize, v: f64) -> f64 {
        self.sorted_z[k].partition_point(|&s| s <= v) as f64 / self.n as f64
    }

    pub(crate) fn to_coords(&self, z: &[f64]) -> Vec<f64> {
        if self.pseudo_z {
            z.iter().enumerate().map(|(k, &v)| self.ecdf(k, v)).collect()
        } else {
            z.to_vec()
        }
    }

    fn raw(&self, zc: &[f64]) -> Vec<f64> {
        let bw: Vec<f64> = (0..zc.len()).map(|k| self.kernel.bandwidth(k)).collect();
        (0..self.n)
            .map(|i| {
                let mut v = 1.0;
                for (k, col) in self.coords.iter().enumerate() {
                    v *= self.kernel.kernel.eval((col[i] - zc[k]) / bw[k]);
                    if v == 0.0 {
                        break;
                    }
                }
                v
            })
            .collect()
    }

    /// Normalized weights at kernel coordinates `zc`, or `None` if every raw
    /// kernel value is zero.
    pub(crate) fn weights_coords(&self, zc: &[f64]) -> Option<Vec<f64>> {
        let mut w = self.raw(zc);
        let total = sum_compensated(w.iter().copied());
        if !(total > 0.0) {
            return None;
        }
        for v in w.iter_mut() {
            *v /= total;
        }
        Some(w)
    }

    pub(crate) fn weights(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.coords.len() {
            return Err(Error::InvalidParameter(format!(
                "point has {} coordinates, data has {} conditioning variable(s)",
                z.len(),
                self.coords.len()
            )));
        }
        self.weights_coords(&self.to_coords(z))
            .ok_or_else(|| Error::DegenerateNeighborhood { z: z.to_vec() })
    }

    /// Weights at the `i`-th observation of `Z`.
    pub(crate) fn weights_at_obs(&self, i: usize) -> Option<Vec<f64>> {
        let zc: Vec<f64> = self.coords.iter().map(|c| c[i]).collect();
        self.weights_coords(&zc)
    }
}

/// `w_i(z) = K_h(Z_i - z) / sum_j K_h(Z_j - z)`.
///
/// With `pseudo_z`, each coordinate of `Z_i` and `z` is replaced by its
/// marginal empirical CDF value before the kernel is applied.
pub fn kernel_weights(data: &Dataset, z: &[f64], kernel: &KernelSpec, pseudo_z: bool) -> Result<Vec<f64>> {
    Smoother::new(data, kernel, pseudo_z)?.weights(z)
}
