use quadqk::experiments::{
    cex2_node_checks, run_cex1, run_cex2, run_constant_vs_angle, run_sweep, Family, StudyOptions, SweepSpec, Verdict,
};
use std::f64::consts::PI;

fn dyadic_cex2() -> Vec<f64> {
    (3..=7).map(|e| 0.5 + 0.5f64.powi(e)).collect()
}

#[test]
fn max_angle_family_node_facts() {
    let c = cex2_node_checks(&dyadic_cex2()).unwrap();
    assert!(c.min_angle >= PI / 4.0 - 1e-12);
    assert!(c.max_angle > PI - 0.04);
    assert!(c.min_abs_u22 > 1e-3);
    assert!(c.max_dd1.is_finite() && c.max_dd2.is_finite());
}

#[test]
fn min_angle_lp_ratio_stays_bounded() {
    let grid = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let spec = SweepSpec { family: Family::Cex1, grid: grid.to_vec(), k: 2, p: 2.0, field: "cex1".into() };
    let rows = run_sweep(&spec, &StudyOptions::default()).unwrap();
    let lp: Vec<f64> = rows.iter().map(|r| r.ratio_lp.unwrap()).collect();
    let semi: Vec<f64> = rows.iter().map(|r| r.ratio_seminorm.unwrap()).collect();
    let spread = |v: &[f64]| v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(spread(&lp) < 3.0, "{lp:?}");
    assert!(spread(&semi) > 10.0, "{semi:?}");
}

#[test]
fn min_angle_study_verdict() {
    let r = run_cex1(1.5, &[0.2, 0.1, 0.05, 0.025], &StudyOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Diverges);
    assert!(r.checks.iter().all(|c| c.passed), "{:?}", r.checks);
}

#[test]
fn max_angle_study_rejects_small_p() {
    assert!(run_cex2(2.0, &dyadic_cex2(), &StudyOptions::default()).is_err());
    assert!(run_cex1(3.0, &[0.1], &StudyOptions::default()).is_err());
}

#[test]
fn max_angle_ratio_grows_for_large_p() {
    let r = run_cex2(4.0, &dyadic_cex2(), &StudyOptions::default()).unwrap();
    assert!(r.check("ratio_monotone_growth").unwrap().passed);
    assert!(r.check("basis_monotone_growth").unwrap().passed);
}

#[test]
fn constant_depends_on_angle_as_expected() {
    let grid: Vec<f64> = (0..8).map(|i| 0.4 * 0.5f64.powi(i)).collect();
    let low = run_constant_vs_angle(2, 2.0, &grid, &StudyOptions::default()).unwrap();
    assert_eq!(low.min_angle.growth, Verdict::Diverges);
    assert_eq!(low.max_angle.growth, Verdict::Bounded);
    assert_eq!(low.verdict, Verdict::Pass);
    let high = run_constant_vs_angle(2, 4.0, &grid, &StudyOptions::default()).unwrap();
    assert_eq!(high.max_angle.growth, Verdict::Diverges);
}
