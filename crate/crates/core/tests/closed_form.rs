use std::f64::consts::FRAC_PI_2;

use fbsplit::flow::{certified_trajectory, exp_formula, uniform_times};
use fbsplit::problems::{catalog, default_linear1d, l1_quadratic_1d, make_skew2d};
use fbsplit::splitting::run_fb_exact;
use fbsplit::{min_norm, run_fb, verify_kobayashi, ErrorSequence, StepSchedule, Vector};

fn v(xs: &[f64]) -> Vector {
    Vector::new(xs.to_vec()).unwrap()
}

#[test]
fn exponential_formula_on_linear1d() {
    let p = default_linear1d();
    let x0 = v(&[1.0]);
    let u4 = exp_formula(&p.pair, &x0, 1.0, 4).unwrap();
    assert!((u4.as_slice()[0] - 0.6f64.powi(4)).abs() < 1e-15);
    let u100 = exp_formula(&p.pair, &x0, 1.0, 100).unwrap();
    assert!((u100.as_slice()[0] - (0.99f64 / 1.01).powi(100)).abs() < 1e-13);
    assert!((u100.as_slice()[0] - (-2.0f64).exp()).abs() < 1e-5);
}

#[test]
fn skew_flow_rotates_counterclockwise() {
    let p = make_skew2d(1.0, 0.0).unwrap();
    let x0 = v(&[1.0, 0.0]);
    let exact = p.exact_flow_at(&x0, FRAC_PI_2).unwrap().unwrap();
    assert!(exact.dist(&v(&[0.0, 1.0])).unwrap() < 1e-15);
    let (minnorm, _) = min_norm(&p.pair, &x0).unwrap();
    let m = 4096;
    let approx = exp_formula(&p.pair, &x0, FRAC_PI_2, m).unwrap();
    assert!(approx.dist(&exact).unwrap() <= minnorm * FRAC_PI_2 / (m as f64).sqrt());
}

#[test]
fn certified_trajectory_tracks_exact_flow() {
    let p = default_linear1d();
    let x0 = v(&[1.0]);
    let grid = certified_trajectory(&p.pair, &x0, &uniform_times(2.0, 20), 1e-3, 50_000_000).unwrap();
    assert!(grid.certified_error <= 1e-3);
    for ((t, x), e) in grid.times.iter().zip(&grid.points).zip(&grid.errors) {
        let exact = p.exact_flow_at(&x0, *t).unwrap().unwrap();
        assert!(x.dist(&exact).unwrap() <= *e, "t = {t}");
    }
}

#[test]
fn two_sequence_bound_with_perturbations() {
    for p in catalog() {
        let theta = p.pair.theta_max();
        let first = StepSchedule::constant(theta / 2.0, None).unwrap();
        let second = StepSchedule::power(theta / 4.0, 0.75).unwrap();
        let mut dir = vec![0.0; p.pair.dim()];
        dir[0] = 1.0;
        let errors = ErrorSequence::power_decay(1e-2, 2.0, v(&dir)).unwrap();
        let t1 = run_fb(&p.pair, &first, &errors, &p.default_x0, 150).unwrap();
        let t2 = run_fb(&p.pair, &second, &errors, &p.default_x0.scale(-1.0).unwrap(), 150).unwrap();
        let u = p.zero_point(&p.default_x0).unwrap();
        let report = verify_kobayashi(&p.pair, &t1, &t2, &u).unwrap();
        assert!(report.slack >= -1e-9 * (1.0 + report.scale), "{}: {report:?}", p.id);
    }
}

#[test]
fn one_dimensional_lasso_reaches_its_zero() {
    let p = l1_quadratic_1d();
    let schedule = StepSchedule::constant(p.pair.theta_max() / 2.0, None).unwrap();
    let trace = run_fb_exact(&p.pair, &schedule, &v(&[3.0]), 200).unwrap();
    assert_eq!(trace.replay(&p.pair).unwrap(), None);
    let zero = p.zero_point(&v(&[3.0])).unwrap();
    assert_eq!(zero, v(&[0.0]));
    assert!(trace.last().dist(&zero).unwrap() < 1e-12);
}
