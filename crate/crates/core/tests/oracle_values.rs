use std::f64::consts::PI;

use nonsimplify_core::oracle::{compute, true_psi0_ks, true_psi1_ks, OracleMeasure, OracleSpec, Quadrature};
use nonsimplify_core::BuiltinModel;

// Reference values come from an independent computation: a 2D adaptive
// cubature of the closed-form Gaussian copula over (u1, u2), then
// Gauss-Legendre in z (and z') for the integrated measures.
const PSI1_CVM: f64 = 0.0225870157;
const PSI0_CVM: f64 = 0.0319428639;
const PSI0_KS: f64 = 0.1475836177;

fn psi1_ks_reference() -> f64 {
    // Attained at u = (1/2, 1/2), z = 1: asin(0.8)/(2 pi) - int_0^1 asin(0.8 z)/(2 pi) dz.
    let a = 0.8f64.asin();
    let integral = (0.8 * a + 0.6 - 1.0) / 0.8;
    (a - integral) / (2.0 * PI)
}

#[test]
fn psi1_ks_reference_is_one_over_four_pi() {
    assert!((psi1_ks_reference() - 1.0 / (4.0 * PI)).abs() < 1e-15);
}

#[test]
fn gauss_08z_default_grids() {
    let m = BuiltinModel::Gauss08z.model();
    for (measure, want, tol) in [
        (OracleMeasure::Psi1Cvm, PSI1_CVM, 2e-6),
        (OracleMeasure::Psi0Cvm, PSI0_CVM, 2e-6),
        (OracleMeasure::Psi1Ks, psi1_ks_reference(), 5e-7),
        (OracleMeasure::Psi0Ks, PSI0_KS, 1e-9),
    ] {
        let v = compute(&m, &OracleSpec::new(measure)).unwrap();
        assert!((v.value - want).abs() < tol, "{measure}: {} vs {want}", v.value);
        assert!(v.abs_err_estimate >= 0.0 && v.evaluations > 0);
        assert!(
            (v.value - want).abs() <= v.abs_err_estimate + 1e-9,
            "{measure}: err {}",
            v.abs_err_estimate
        );
    }
}

#[test]
fn gauss_legendre_quadrature_agrees() {
    let m = BuiltinModel::Gauss08z.model();
    let spec = OracleSpec {
        measure: OracleMeasure::Psi1Cvm,
        u_grid: 60,
        z_grid: 20,
        quad: Quadrature::GaussLegendre { k: 10 },
        ..Default::default()
    };
    let v = compute(&m, &spec).unwrap();
    assert!((v.value - PSI1_CVM).abs() < 1e-6, "{}", v.value);
}

#[test]
fn triangle_inequality_between_ks_measures() {
    let m = BuiltinModel::Gauss08z.model();
    let spec = OracleSpec {
        u_grid: 41,
        z_grid: 41,
        ..Default::default()
    };
    let p1 = true_psi1_ks(&m, &spec).unwrap().value;
    let p0 = true_psi0_ks(&m, &spec).unwrap().value;
    assert!(p0 >= p1);
    assert!(p0 <= 2.0 * p1 + 1e-12);
}

#[test]
fn doubling_grids_stays_within_error_estimate() {
    let m = BuiltinModel::Gauss08z.model();
    for measure in [OracleMeasure::Psi1Cvm, OracleMeasure::Psi1Ks, OracleMeasure::Psi0Ks] {
        let base = OracleSpec {
            measure,
            u_grid: 51,
            z_grid: 101,
            ..Default::default()
        };
        let fine = OracleSpec {
            u_grid: 101,
            z_grid: 201,
            ..base
        };
        let a = compute(&m, &base).unwrap();
        let b = compute(&m, &fine).unwrap();
        assert!(
            (a.value - b.value).abs() <= a.abs_err_estimate,
            "{measure}: {} vs {} (err {})",
            a.value,
            b.value,
            a.abs_err_estimate
        );
    }
}
