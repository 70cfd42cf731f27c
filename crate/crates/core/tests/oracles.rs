//! Frozen values computed independently at 40 digits with mpmath.

#![allow(clippy::excessive_precision)]

use mdev_core::bounds::{
    chi_square_tail, log_normal_cdf, normal_cdf, normal_quantile, theorem2_scaled_log, theorem4_denominator,
};
use mdev_core::mdp::{gauss_exceedance, lemma1_tail_ratio};
use mdev_core::model::builtin_model;
use mdev_core::{Grid, MCConfig, OmegaSet, SignalModel};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn normal_tails_and_quantiles() {
    assert!(rel(normal_cdf(1.3), 0.903_199_515_414_389_7) < 1e-14);
    assert!(rel(log_normal_cdf(-40.0), -804.608_442_013_753_8) < 1e-14);
    assert!(rel(log_normal_cdf(-300.0), -45_006.622_732_118_66) < 1e-14);
    assert!(rel(normal_quantile(0.975).unwrap(), 1.959_963_984_540_054) < 1e-13);
    assert!(rel(normal_quantile(1e-10).unwrap(), -6.361_340_902_404_056) < 1e-12);
}

#[test]
fn chi_square_tails() {
    // P(chi2_d > r^2)
    assert!(rel(chi_square_tail(2, 3.0), 1.110_899_653_824_230_6e-2) < 1e-13);
    assert!(rel(chi_square_tail(3, 2.0), 0.261_464_129_949_110_6) < 1e-13);
    assert!(rel(chi_square_tail(5, 3.0), 0.109_064_157_949_772_4) < 1e-13);
    assert!(rel(chi_square_tail(7, 3.0), 0.252_656_046_496_563_8) < 1e-13);
    assert!(rel(chi_square_tail(4, 2.0), 0.406_005_849_709_838_1) < 1e-13);
    assert!(rel(chi_square_tail(6, 1.5), 0.895_330_632_636_698_9) < 1e-13);
}

#[test]
fn fisher_information_of_nonlinear_sine() {
    let m: SignalModel = builtin_model("nonlinear-sin", None).unwrap();
    let exact = [0.176_292_135_883_091_28, 0.043_038_667_438_386_27];
    for (theta, &want) in [1.0, 2.0].iter().zip(&exact) {
        let coarse = m.fisher_information(&[*theta], &Grid::uniform(512).unwrap()).unwrap().scalar().unwrap();
        let fine = m.fisher_information(&[*theta], &Grid::uniform(4096).unwrap()).unwrap().scalar().unwrap();
        assert!(rel(fine, want) < 5e-7, "{fine} vs {want}");
        // midpoint rule: error shrinks like n^-2
        let ratio = (coarse - want).abs() / (fine - want).abs();
        assert!(ratio > 40.0 && ratio < 90.0, "refinement ratio {ratio}");
    }
}

#[test]
fn hellinger_type_distance() {
    let m: SignalModel = builtin_model("nonlinear-sin", None).unwrap();
    let rho = m.rho_distance(&[1.5], &[1.0], &Grid::uniform(4096).unwrap()).unwrap();
    assert!(rel(rho, 0.172_317_794_738_224_785) < 1e-7);
}

#[test]
fn tail_ratios() {
    assert!(rel(lemma1_tail_ratio(0.01, 0.01, 2.0).unwrap(), 0.933_090_994_981_917_3) < 1e-13);
    assert!(rel(lemma1_tail_ratio(0.05, 0.1, 5.0).unwrap(), 0.074_029_845_222_326_06) < 1e-12);
    assert!(rel(lemma1_tail_ratio(0.001, 0.001, 3.0).unwrap(), 0.985_377) < 1e-6);
}

#[test]
fn bound_quantities() {
    // efficient one-step miss at x = 10: ln(2 Phi(-10)) / 100
    let ln_miss = 2f64.ln() + log_normal_cdf(-10.0);
    assert!(rel(theorem2_scaled_log(ln_miss, 0.01, 0.1, 1.0).unwrap(), -0.525_381_379_699_525_3) < 1e-13);
    assert!(rel(theorem4_denominator(0.02, 0.05, 1.0).unwrap(), 2.0 * 6.209_665_325_776_135e-3) < 1e-13);
}

#[test]
fn exceedance_of_non_round_bodies() {
    let cfg = MCConfig::new(40_000, 4).unwrap();
    // 1 - (1 - 2 Phi(-2))^2
    let cube = gauss_exceedance(&OmegaSet::cube(2), 2.0, &cfg).unwrap();
    assert!(cube.within(0.088_930_253_778_078_57, 3.0), "{cube:?}");
    // P(z1^2 + z2^2/4 > 4)
    let ell = gauss_exceedance(&OmegaSet::ellipsoid_axes(&[1.0, 2.0]).unwrap(), 2.0, &cfg).unwrap();
    assert!(ell.within(0.054_545_421_400_183_54, 3.0), "{ell:?}");
    assert!(ell.rel_se() < 0.02);
}
