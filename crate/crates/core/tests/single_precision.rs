//! The same pipeline in `f32`.

use mdev_core::bounds::{normal_cdf, Theorem};
use mdev_core::mdp::{bound_comparison_run, estimate_error_probs, MCConfig as GenericConfig, RunSettings};
use mdev_core::model::builtin_model;
use mdev_core::schedule::Schedule;
use mdev_core::{infer, Grid32, MCConfig32, SignalModel32, TestKind};

#[test]
fn fisher_information_in_f32() {
    let m: SignalModel32 = builtin_model("nonlinear-sin", None).unwrap();
    let i = m.fisher_information(&[1.0], &Grid32::uniform(512).unwrap()).unwrap().scalar().unwrap();
    assert!((i - 0.176_292_14).abs() < 2e-6, "{i}");
}

#[test]
fn error_probabilities_in_f32() {
    let m: SignalModel32 = builtin_model("linear-sin", None).unwrap();
    let alpha = normal_cdf(-2.5f32);
    let spec = infer::TestSpec::new(vec![0.0f32], 0.1, alpha, TestKind::NeymanPearson).unwrap();
    let cfg: MCConfig32 = GenericConfig::new(20_000, 1).unwrap().with_grid_n(128);
    let (a, b) = estimate_error_probs(&m, &spec, 0.02, &cfg).unwrap();
    for e in [a, b] {
        assert!(e.within(6.209_665e-3, 3.0) && e.rel_se() < 0.02, "{e:?}");
    }
}

#[test]
fn sharp_type2_run_in_f32() {
    let m: SignalModel32 = builtin_model("linear-sin", None).unwrap();
    let cfg: MCConfig32 = GenericConfig::new(10_000, 2).unwrap().with_grid_n(64);
    let sched = Schedule::<f32>::new(vec![0.05, 0.02], 1.0, 0.8, 1.0);
    for r in bound_comparison_run(&m, Theorem::T3, &sched, &RunSettings::new(vec![0.0]), &cfg) {
        let r = r.unwrap();
        assert!(r.meets_bound && !r.hard_failure, "{r:?}");
    }
}
