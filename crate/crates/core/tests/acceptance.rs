//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! per check (run with `--nocapture` to see them). Tolerances are pinned in
//! `anisodiff::experiments`; the assertions here only require that every
//! report passed.

use anisodiff::experiments::{self, DEFAULT_SEED};
use anisodiff::verify::CheckReport;

fn assert_all(criterion: &str, reports: &[CheckReport]) {
    for r in reports {
        println!("criterion {criterion}: {}", r.summary_line());
        for (k, v) in &r.measured {
            println!("    {k} = {v:.6e}");
        }
    }
    let failed: Vec<&CheckReport> = reports.iter().filter(|r| !r.passed).collect();
    assert!(
        failed.is_empty(),
        "criterion {criterion}: {} check(s) failed: {}",
        failed.len(),
        failed
            .iter()
            .map(|r| r.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
}

#[test]
fn criterion_01_exponent_algebra() {
    let reports = experiments::criterion_1_exponent_algebra(DEFAULT_SEED).unwrap();
    assert_all("1 (exponent algebra)", &reports);
    // the pinned point values, asserted directly on top of the report
    let alpha = reports[0].measured_value("alpha").unwrap();
    let sigma1 = reports[0].measured_value("sigma1").unwrap();
    assert!((alpha - 4.0).abs() < 1e-12);
    assert!((sigma1 - 0.5).abs() < 1e-12);
}

#[test]
fn criterion_02_lambda_sanity() {
    assert_all("2 (Lambda sanity)", &experiments::criterion_2_lambda().unwrap());
}

#[test]
fn criterion_03_closed_form_correctness() {
    let reports = experiments::criterion_3_closed_forms(DEFAULT_SEED).unwrap();
    assert_all("3 (closed forms)", &reports);
    let order = reports[1].measured_value("order_fine").unwrap();
    assert!(order >= 1.8, "refinement order {order}");
}

#[test]
fn criterion_04_barrier_signs() {
    let reports = experiments::criterion_4_barrier_signs(DEFAULT_SEED).unwrap();
    assert_all("4 (barrier signs)", &reports);
    let a0 = reports[0].measured_value("a0").unwrap();
    assert!((a0 - 6.25).abs() < 1e-12, "A0 = {a0}");
}

#[test]
fn criterion_05_solver_vs_closed_form_1d() {
    assert_all(
        "5 (Barenblatt, 1d)",
        &experiments::criterion_5_barenblatt_1d().unwrap(),
    );
}

#[test]
fn criterion_05_solver_vs_closed_form_2d() {
    assert_all(
        "5 (Barenblatt, 2d)",
        &experiments::criterion_5_barenblatt_2d().unwrap(),
    );
}

#[test]
fn criterion_06_smoothing_exponent_p15() {
    assert_all(
        "6 (smoothing, p = 1.5)",
        &experiments::criterion_6_smoothing_p15().unwrap(),
    );
}

#[test]
fn criterion_06_smoothing_exponent_p18() {
    assert_all(
        "6 (smoothing, p = 1.8)",
        &experiments::criterion_6_smoothing_p18().unwrap(),
    );
}

#[test]
fn criterion_07_comparison_bundle() {
    let reports = experiments::criterion_7_comparison_bundle().unwrap();
    assert_all("7 (contraction/order/SSNI/Aleksandrov)", &reports);
    // four positive checks, one tight-equality check, three negative controls
    assert_eq!(reports.len(), 9);
}

#[test]
fn criterion_08_concentration_comparison() {
    assert_all(
        "8 (concentration)",
        &experiments::criterion_8_concentration().unwrap(),
    );
}

#[test]
fn criterion_09_anisotropic_self_similar_profile() {
    let run = experiments::criterion_9_steady_profile().unwrap();
    assert_all("9 (steady profile)", &run.reports);
}

#[test]
fn criterion_10_asymptotics() {
    assert_all("10 (asymptotics)", &experiments::criterion_10_asymptotics().unwrap());
}

#[test]
fn criterion_11_region_scan() {
    assert_all("11 (region scan)", &experiments::criterion_11_region_scan().unwrap());
}
