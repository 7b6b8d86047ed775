use cesaro_core::convergence::{bound_domination_check, run_lp_experiment, trend_test, BoundParams};
use cesaro_core::cui::{cui_certificate, cui_report, default_level_grid, verify_criterion_equivalence};
use cesaro_core::distributions::sample_array;
use cesaro_core::lattice::{max_partial_norm, max_prefix_norm_within, prefix_sums, sub_box_offsets};
use cesaro_core::moments::{doubling_schedule, horizon_of, pow2_schedule};
use cesaro_core::poussin::{poussin_round_trip, DEFAULT_J_MAX, DEFAULT_LEVEL_CAP};
use cesaro_core::{DistributionSpec, ExperimentConfig, MomentMode, MomentSource, MultiIndex};

#[test]
fn nested_boxes_read_from_one_sweep() {
    let spec = DistributionSpec::gaussian(1.0).with_dim(3);
    let h = MultiIndex::new(vec![6, 5, 4]).unwrap();
    let big = sample_array(&spec, &h, 99).unwrap();
    let pre = prefix_sums(&big);
    for inner in [vec![1, 1, 1], vec![3, 5, 2], vec![6, 1, 4], vec![6, 5, 4]] {
        let n = MultiIndex::new(inner).unwrap();
        let small = sample_array(&spec, &n, 99).unwrap();
        let offs = sub_box_offsets(&h, &n).unwrap();
        assert_eq!(max_prefix_norm_within(&pre, &offs), max_partial_norm(&small));
    }
}

#[test]
fn integrable_family_passes_every_stage() {
    let spec = DistributionSpec::pareto(3.0);
    let h = MultiIndex::new(vec![32, 32]).unwrap();
    let src = MomentSource::new(&spec, &h, &pow2_schedule(&h), 1, 0).unwrap();

    let report = cui_report(&src, 1.0, &default_level_grid()).unwrap();
    assert!(report.tail_sup.windows(2).all(|w| w[1] <= w[0]));
    assert!(verify_criterion_equivalence(&src, 1.0, &[0.5, 0.1], &default_level_grid()).unwrap().pass);
    assert!(poussin_round_trip(&src, 1.0, DEFAULT_J_MAX, &[0.5, 0.1], DEFAULT_LEVEL_CAP).unwrap().pass);

    let sched = doubling_schedule(2, 4, 10).unwrap();
    let hz = horizon_of(&sched).unwrap();
    let at_p = MomentSource::new(&spec, &hz, &pow2_schedule(&hz), 1, 0).unwrap();
    let a = cui_certificate(&at_p, 0.5, 0.1, &default_level_grid()).unwrap().unwrap();
    let cfg = ExperimentConfig {
        spec,
        p: 0.5,
        n_schedule: sched,
        reps: 100,
        seed: 2024,
        center: false,
        bound_params: Some(BoundParams { eps: 0.1, a, c: None }),
    };
    let series = run_lp_experiment(&cfg).unwrap();
    assert!(trend_test(&series).unwrap().pass);
    assert!(bound_domination_check(&cfg, &series).unwrap().pass);
}

#[test]
fn empirical_and_analytic_reports_agree() {
    let h = MultiIndex::new(vec![16, 16]).unwrap();
    let grid = [1.0, 2.0, 4.0];
    let exact = cui_report(
        &MomentSource::new(&DistributionSpec::pareto(3.0), &h, &pow2_schedule(&h), 1, 0).unwrap(),
        1.0,
        &grid,
    )
    .unwrap();
    let spec = DistributionSpec::pareto(3.0).with_mode(MomentMode::Empirical);
    let mc = cui_report(&MomentSource::new(&spec, &h, &pow2_schedule(&h), 400, 8).unwrap(), 1.0, &grid).unwrap();
    assert!(!mc.low_reps_warning);
    for k in 0..grid.len() {
        assert!((mc.tail_sup[k] - exact.tail_sup[k]).abs() < 5.0 * mc.stderr[k] + 0.02, "{k}");
    }
}
