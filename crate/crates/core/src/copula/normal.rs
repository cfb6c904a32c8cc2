//! Univariate and bivariate standard normal distribution functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numeric::gauss_legendre;

/// Inputs to the quantile function are clamped to `[U_CLAMP, 1 - U_CLAMP]`.
pub const U_CLAMP: f64 = 1e-12;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, `Phi(x) = erfc(-x / sqrt 2) / 2`.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal quantile.
///
/// Acklam's rational approximation followed by one Newton step on
/// `Phi(x) - p`; the step is taken on the lower tail (`p <= 1/2`) and the
/// result reflected, so that `Phi(x) - p` never suffers cancellation.
/// `p` is clamped to `[U_CLAMP, 1 - U_CLAMP]`.
pub fn norm_inv(p: f64) -> f64 {
    let p = p.clamp(U_CLAMP, 1.0 - U_CLAMP);
    if p > 0.5 {
        return -norm_inv_lower(1.0 - p);
    }
    norm_inv_lower(p)
}

fn norm_inv_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    x - (norm_cdf(x) - p) / norm_pdf(x)
}

struct BvnRules {
    // Negative half of the 6-, 12- and 20-point Gauss-Legendre rules.
    nodes: [Vec<f64>; 3],
    weights: [Vec<f64>; 3],
}

fn bvn_rules() -> &'static BvnRules {
    static RULES: OnceLock<BvnRules> = OnceLock::new();
    RULES.get_or_init(|| {
        let half = |n: usize| {
            let (x, w) = gauss_legendre(n);
            (x[..n / 2].to_vec(), w[..n / 2].to_vec())
        };
        let (x6, w6) = half(6);
        let (x12, w12) = half(12);
        let (x20, w20) = half(20);
        BvnRules {
            nodes: [x6, x12, x20],
            weights: [w6, w12, w20],
        }
    })
}

/// `P(N1 <= h, N2 <= k)` for a standard bivariate normal with correlation `rho`.
///
/// Drezner-Wesolowsky integration as refined by Genz: Gauss-Legendre on the
/// arcsine-of-correlation integral for `|rho| < 0.925`, and on the
/// asymptotic-corrected form near `|rho| = 1`. Infinite limits are accepted.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "bivariate normal correlation must lie in (-1, 1), got {rho}"
        )));
    }
    if h.is_nan() || k.is_nan() {
        return Err(Error::Domain("bivariate normal limits must not be NaN".into()));
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if h == f64::INFINITY {
        return Ok(norm_cdf(k));
    }
    if k == f64::INFINITY {
        return Ok(norm_cdf(h));
    }
    Ok(upper_orthant(-h, -k, rho).clamp(0.0, 1.0))
}

/// `P(N1 > dh, N2 > dk)`.
fn upper_orthant(dh: f64, dk: f64, r: f64) -> f64 {
    const TWO_PI: f64 = 2.0 * PI;
    let rules = bvn_rules();
    let level = if r.abs() < 0.3 {
        0
    } else if r.abs() < 0.75 {
        1
    } else {
        2
    };
    let (xs, ws) = (&rules.nodes[level], &rules.weights[level]);

    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;

    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (x, w) in xs.iter().zip(ws) {
            for sign in [1.0, -1.0] {
                let sn = (asr * (sign * x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * TWO_PI) + norm_cdf(-h) * norm_cdf(-k);
    }

    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let a_s = (1.0 - r) * (1.0 + r);
    let mut a = a_s.sqrt();
    let bs = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    bvn = a
        * (-(bs / a_s + hk) / 2.0).exp()
        * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
    if hk > -160.0 {
        let b = bs.sqrt();
        bvn -= (-hk / 2.0).exp() * TWO_PI.sqrt() * norm_cdf(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (x, w) in xs.iter().zip(ws) {
        for sign in [1.0, -1.0] {
            let xs2 = (a * (sign * x + 1.0)).powi(2);
            let rs = (1.0 - xs2).sqrt();
            let asr = -(bs / xs2 + hk) / 2.0;
            if asr > -100.0 {
                bvn += a
                    * w
                    * asr.exp()
                    * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs2 * (1.0 + d * xs2)));
            }
        }
    }
    bvn = -bvn / TWO_PI;

    if r > 0.0 {
        bvn + norm_cdf(-h.max(k))
    } else {
        let mut out = -bvn;
        if k > h {
            if h < 0.0 {
                out += norm_cdf(k) - norm_cdf(h);
            } else {
                out += norm_cdf(-h) - norm_cdf(-k);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Rule;
    use approx::assert_abs_diff_eq;

    /// Independent route: Phi(h)Phi(k) + (1/2pi) * int_0^rho exp(-(h^2 - 2rhk + k^2)/(2(1-r^2))) / sqrt(1-r^2) dr,
    /// integrated with a fine composite Gauss-Legendre rule in the substitution r = sin(t).
    fn bvn_by_quadrature(h: f64, k: f64, rho: f64) -> f64 {
        let t_end = rho.asin();
        let rule = Rule::gauss_legendre(0.0, t_end.abs(), 30, 40);
        let sign = t_end.signum();
        let integral: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(t, w)| {
                let r = sign * t.sin();
                let c2 = 1.0 - r * r;
                w * (-(h * h - 2.0 * r * h * k + k * k) / (2.0 * c2)).exp()
            })
            .sum();
        norm_cdf(h) * norm_cdf(k) + sign * integral / (2.0 * PI)
    }

    #[test]
    fn examples() {
        assert_abs_diff_eq!(bvn_cdf(0.0, 0.0, 0.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(bvn_cdf(0.0, 0.0, 0.5).unwrap(), 1.0 / 3.0, epsilon = 1e-14);
        for k in [-2.0, -0.3, 0.0, 1.7] {
            assert_eq!(bvn_cdf(f64::INFINITY, k, 0.4).unwrap(), norm_cdf(k));
            assert_eq!(bvn_cdf(k, f64::INFINITY, -0.4).unwrap(), norm_cdf(k));
        }
        assert_eq!(bvn_cdf(f64::NEG_INFINITY, 1.0, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn orthant_identity_across_rho() {
        for rho in [-0.99, -0.95, -0.9, -0.5, -0.1, 0.2, 0.6, 0.93, 0.99, 0.999] {
            let want = 0.25 + f64::asin(rho) / (2.0 * PI);
            assert_abs_diff_eq!(bvn_cdf(0.0, 0.0, rho).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_independent_quadrature() {
        let pts = [-3.0, -1.2, -0.4, 0.0, 0.7, 1.5, 2.8];
        for &rho in &[-0.97, -0.8, -0.5, -0.2, 0.1, 0.35, 0.7, 0.9, 0.95] {
            for &h in &pts {
                for &k in &pts {
                    let got = bvn_cdf(h, k, rho).unwrap();
                    let want = bvn_by_quadrature(h, k, rho);
                    assert!((got - want).abs() < 1e-10, "h={h} k={k} rho={rho}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn symmetry_and_independence() {
        for &h in &[-2.5, -0.3, 0.0, 1.1, 3.0] {
            for &k in &[-1.7, 0.2, 0.9, 2.2] {
                assert_abs_diff_eq!(
                    bvn_cdf(h, k, 0.6).unwrap(),
                    bvn_cdf(k, h, 0.6).unwrap(),
                    epsilon = 1e-12
                );
                assert_abs_diff_eq!(bvn_cdf(h, k, 0.0).unwrap(), norm_cdf(h) * norm_cdf(k), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_invalid_rho() {
        assert!(bvn_cdf(0.0, 0.0, 1.0).is_err());
        assert!(bvn_cdf(0.0, 0.0, -1.5).is_err());
        assert!(bvn_cdf(0.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn quantile_roundtrip() {
        for &p in &[1e-12, 1e-9, 1e-5, 0.001, 0.02, 0.2, 0.5, 0.77, 0.97, 0.9999] {
            let x = norm_inv(p);
            assert!(((norm_cdf(x) - p) / p).abs() < 1e-12, "p={p}");
        }
        assert_eq!(norm_inv(0.5), 0.0);
        assert_abs_diff_eq!(norm_inv(0.975), 1.959_963_984_540_054, epsilon = 1e-13);
        assert_eq!(norm_inv(0.0), norm_inv(U_CLAMP));
    }

    #[test]
    fn cdf_reference_values() {
        assert_abs_diff_eq!(norm_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-15);
        let tail = norm_cdf(-8.0);
        assert!(((tail - 6.220_960_574_271_785e-16) / tail).abs() < 1e-12);
    }
}
