use drainet_core::estimators::{self as est, Params};
use drainet_core::reference::path_kernel;
use drainet_core::stats::Z95;
use drainet_core::{DnbError, Kind, Verdict};

fn params(p: f64, n: u64) -> Params {
    Params::new(p, 1.0, n, 1.0, 11).unwrap()
}

#[test]
fn drift_of_l_and_r_are_mirror_images() {
    let p = params(0.5, 30);
    let l = est::drift_experiment(p, Kind::Left, 2_000, 500).unwrap();
    let r = est::drift_experiment(p, Kind::Right, 2_000, 500).unwrap();
    let joint = (l.ci_half_width.powi(2) + r.ci_half_width.powi(2)).sqrt();
    assert!(
        (l.estimate + r.estimate).abs() <= 3.0 * joint / Z95,
        "{} vs {}",
        l.estimate,
        r.estimate
    );
}

#[test]
fn ci_width_shrinks_like_inverse_root_of_replicas() {
    let p = params(0.5, 30);
    let small = est::drift_experiment(p, Kind::Right, 400, 500).unwrap();
    let large = est::drift_experiment(p, Kind::Right, 1_600, 500).unwrap();
    let ratio = small.ci_half_width / large.ci_half_width;
    assert!((ratio / 2.0 - 1.0).abs() <= 0.2, "{ratio}");
}

#[test]
fn variance_vanishes_as_p_approaches_one() {
    let v = |p: f64| {
        est::variance_experiment(Params::with_epsilon(p, 1.0, 1, 0.0, 5).unwrap(), 200, 1_000)
            .unwrap()
            .estimate
    };
    let (v5, v9, v99) = (v(0.5), v(0.9), v(0.99));
    assert!(v5 > v9 && v9 > v99, "{v5} {v9} {v99}");
    assert!(v99 < 0.02);
}

#[test]
fn full_branching_variance_matches_enumerated_l_kernel() {
    let p = Params::with_epsilon(0.5, 1.0, 1, 1.0, 5).unwrap();
    let r = est::variance_experiment(p, 1_000, 1_000).unwrap();
    let kernel = path_kernel(0.5, 1.0, Kind::Left);
    let target = kernel.variance();
    assert!((target - path_kernel(0.5, 0.0, Kind::Left).variance()).abs() > 0.01);
    assert!(
        (r.estimate - target).abs() <= 3.0 * r.ci_half_width / Z95 + 1e-3,
        "{} vs {target}",
        r.estimate
    );
}

#[test]
fn coalescence_tail_needs_uncensored_samples() {
    let grid = [1, 2];
    let err = est::coalescence_tail_experiment(params(0.5, 50), &[1, 8], &grid, 200, 0).unwrap_err();
    assert!(matches!(err, DnbError::InsufficientUncensored { .. }), "{err:?}");
}

#[test]
fn survival_edge_cases() {
    let p = params(0.5, 50);
    let zero = est::survival_experiment(p, 0.0, 1.0, 200).unwrap();
    assert_eq!(zero.estimate, 0.0);
    let far = est::survival_experiment(p, 1.0, 0.01, 200).unwrap();
    assert!(far.estimate > 0.95 && far.verdict == Verdict::Pass, "{far:?}");
}

#[test]
fn lr_gaps_start_equal_and_grow() {
    let p = params(0.5, 40);
    let r = est::lr_comparison_experiment(p, 0, &[0.0], 200).unwrap();
    assert_eq!(r[0].estimate, 0.0);
    assert_eq!(r[0].verdict, Verdict::Diagnostic);

    let times = [0.1, 0.4, 1.0];
    let samples = est::lattice_gap_samples(p, 0, &times, 2_000).unwrap();
    assert!(samples.iter().flatten().all(|&g| g >= 0.0));
    let quantile = |j: usize, q: f64| {
        let mut v: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        v.sort_by(f64::total_cmp);
        v[(q * (v.len() - 1) as f64) as usize]
    };
    for q in [0.5, 0.75, 0.9] {
        assert!(
            quantile(0, q) <= quantile(1, q) && quantile(1, q) <= quantile(2, q),
            "quantile {q}"
        );
    }
}

#[test]
fn dual_mean_without_branching_is_zero() {
    let p = Params::with_epsilon(0.5, 1.0, 10, 0.0, 2).unwrap();
    let r = est::dual_kernel_experiment(p, 500, 300).unwrap();
    let m = r.iter().find(|x| x.name == "dual-mean-integer").unwrap();
    assert_eq!(m.target, est::Target::Equal { value: 0.0, tol: 0.0 });
    assert!(m.estimate.abs() <= 3.0 * m.ci_half_width / Z95, "{m:?}");
}

#[test]
fn overshoot_bound_value() {
    let r = est::overshoot_experiment(params(0.5, 30), 500, 1_000_000).unwrap();
    assert_eq!(r[0].target, est::Target::AtMost(10.0));
    assert!(r[0].estimate >= 0.0);
}

#[test]
fn collapse_target_is_four_ninths() {
    let p = Params::new(0.5, 1.0, 10, 2.0, 3).unwrap();
    let r = est::collapse_experiment(p, 1.0, &[10], 200, 0.5).unwrap();
    match r[0].target {
        est::Target::Equal { value, tol } => {
            assert!((value - 4.0 / 9.0).abs() < 1e-12);
            assert!((tol - 0.4 / 9.0).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn reports_are_reproducible() {
    let run = || serde_json::to_string(&est::survival_experiment(params(0.5, 30), 0.5, 0.5, 300).unwrap()).unwrap();
    assert_eq!(run(), run());
}
