//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per
//! criterion and exits non-zero if any criterion fails in a way that is
//! not listed in `KNOWN_DEVIATIONS`.

use std::process::ExitCode;
use std::time::Instant;

use mdev_cli::{run_experiment, ExperimentConfig};
use mdev_core::bounds::{log_normal_cdf, normal_cdf, theorem1_log_ratio_from_logs, Theorem};
use mdev_core::mdp::{
    bound_comparison_run, estimate_error_probs, estimate_miss_prob, gauss_exceedance, lemma1_tail_ratio,
};
use mdev_core::model::builtin_model;
use mdev_core::{
    EstimatorKind, EstimatorSpec, Grid, MCConfig, OmegaSet, RunSettings, Schedule, SignalModel, TestKind, TestSpec,
    Tilt,
};

/// Sub-checks that are expected to fail, with the reason printed next to
/// them. Everything else has to pass.
const KNOWN_DEVIATIONS: &[(&str, &str)] =
    &[("3/analytic x=10", "the stated target 1.049 is not the exact ratio sqrt(-2 ln Phi(-10))/10 = 1.031807")];

/// Exact values from 40-digit mpmath evaluations.
const T1_EXACT: [f64; 3] = [1.097_815_955_212_484, 1.031_807_008_606_866, 1.016_011_307_223_658];
const T2_EXACT: [f64; 2] = [-0.525_381_379_699_525_3, -0.504_031_218_639_759_2];
const PHI_M2_5: f64 = 6.209_665_325_776_135e-3;
const PHI_M8: f64 = 6.220_960_574_271_784e-16;
const EXP_M4_5: f64 = 1.110_899_653_824_230_6e-2;

struct Check {
    id: String,
    ok: bool,
    detail: String,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn check(&mut self, id: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check { id: id.into(), ok, detail: detail.into() });
    }

    fn fail(&mut self, id: impl Into<String>, err: impl std::fmt::Display) {
        self.check(id, false, format!("error: {err}"));
    }
}

fn linear() -> SignalModel {
    builtin_model("linear-sin", None).unwrap()
}

/// Schedule on `δ = 0.8` whose standardized separations `ε⁻¹u_ε` are
/// `xs` (increasing), starting from `eps0`.
fn schedule_for(eps0: f64, xs: &[f64]) -> Schedule {
    let delta = 0.8;
    let a = xs[0] * eps0.powf(1.0 - delta);
    let eps = xs.iter().map(|&x| eps0 * (xs[0] / x).powf(1.0 / (1.0 - delta))).collect();
    Schedule::new(eps, a, delta, 1.0)
}

fn c1(c: &mut Criterion) {
    let start = Instant::now();
    let m = linear();
    let alpha = normal_cdf(-2.5);
    let spec = TestSpec::new(vec![0.0], 0.1, alpha, TestKind::NeymanPearson).unwrap();
    let cfg = MCConfig::new(100_000, 11).unwrap().with_grid_n(1024);
    match estimate_error_probs(&m, &spec, 0.02, &cfg) {
        Ok((a, b)) => {
            c.check("1/alpha", a.within(PHI_M2_5, 3.0), format!("alpha_hat {:.5e} se {:.1e}", a.p_hat, a.se));
            c.check("1/beta", b.within(PHI_M2_5, 3.0), format!("beta_hat {:.5e} se {:.1e}", b.p_hat, b.se));
        }
        Err(e) => c.fail("1/run", e),
    }
    let secs = start.elapsed().as_secs_f64();
    c.check("1/runtime", secs < 30.0, format!("{secs:.1} s"));
}

fn c2(c: &mut Criterion) {
    let cfg = MCConfig::new(50_000, 12).unwrap().with_grid_n(256);
    let settings = RunSettings::new(vec![0.0]);
    for r in bound_comparison_run(&linear(), Theorem::T3, &Schedule::default(), &settings, &cfg) {
        match r {
            Ok(r) => {
                let (ratio, se) = (r.ratio_or_gap.unwrap_or(f64::NAN), r.se_combined.unwrap_or(f64::NAN));
                c.check(
                    format!("2/eps={}", r.epsilon),
                    (ratio - 1.0).abs() <= 3.0 * se,
                    format!("ratio {ratio:.4} +- {se:.4}"),
                );
            }
            Err(e) => c.fail("2/run", e),
        }
    }
}

fn c3(c: &mut Criterion) {
    let stated: [f64; 3] = [1.098, 1.049, 1.016];
    let xs = [5.0, 10.0, 15.0];
    for i in 0..3 {
        // symmetric thresholds alpha = beta = Phi(-x) at separation 2x
        let lp = log_normal_cdf(-xs[i]);
        let v = theorem1_log_ratio_from_logs(lp, lp, 1.0, 2.0 * xs[i], 1.0).unwrap();
        c.check(
            format!("3/analytic x={}", xs[i]),
            (v - stated[i]).abs() <= 0.01,
            format!("exact {v:.6} target {}", stated[i]),
        );
    }
    let sched = schedule_for(0.01, &[10.0, 20.0, 30.0]);
    let cfg = MCConfig::new(50_000, 13).unwrap().with_grid_n(256);
    let reports: Vec<_> =
        bound_comparison_run(&linear(), Theorem::T1, &sched, &RunSettings::new(vec![0.0]), &cfg).into_iter().collect();
    let mut ratios = Vec::new();
    for (i, r) in reports.into_iter().enumerate() {
        match r {
            Ok(r) => {
                let (ratio, se) = (r.ratio_or_gap.unwrap_or(f64::NAN), r.se_combined.unwrap_or(f64::NAN));
                c.check(
                    format!("3/mc x={}", xs[i]),
                    (ratio - T1_EXACT[i]).abs() <= 3.0 * se,
                    format!("ratio {ratio:.5} +- {se:.1e} exact {:.5}", T1_EXACT[i]),
                );
                ratios.push(ratio);
            }
            Err(e) => c.fail("3/mc", e),
        }
    }
    let decreasing = ratios.len() == 3 && ratios.windows(2).all(|w| w[1] < w[0]);
    c.check("3/decreasing", decreasing, format!("{ratios:.5?}"));
}

fn c4(c: &mut Criterion) {
    let m = linear();
    let est = EstimatorSpec::new(EstimatorKind::ScoreOneStep, vec![0.0], &m);
    let cfg = MCConfig::new(50_000, 14).unwrap().with_grid_n(256);
    let stated = [-0.5253, -0.5028];
    for (i, x) in [10.0, 30.0].into_iter().enumerate() {
        let eps = 0.01;
        let u = x * eps;
        let exact = (2f64.ln() + log_normal_cdf(-x)) / (x * x);
        c.check(
            format!("4/analytic x={x}"),
            (exact - stated[i]).abs() <= 0.01 && (exact - T2_EXACT[i]).abs() < 1e-12,
            format!("exact {exact:.6} target {}", stated[i]),
        );
        match estimate_miss_prob(&m, &est, &[0.0], u, eps, &cfg) {
            Ok(p) => {
                let scaled = p.log_p / (x * x);
                let se = p.rel_se() / (x * x);
                c.check(
                    format!("4/mc x={x}"),
                    (scaled - exact).abs() <= 3.0 * se,
                    format!("scaled {scaled:.6} +- {se:.1e}"),
                );
            }
            Err(e) => c.fail(format!("4/mc x={x}"), e),
        }
    }
}

fn c5(c: &mut Criterion) {
    let cfg = MCConfig::new(50_000, 15).unwrap().with_grid_n(256);
    let sched = schedule_for(0.01, &[4.0, 5.0, 6.0]);
    for r in bound_comparison_run(&linear(), Theorem::T4, &sched, &RunSettings::new(vec![0.0]), &cfg) {
        match r {
            Ok(r) => {
                let (ratio, se) = (r.ratio_or_gap.unwrap_or(f64::NAN), r.se_combined.unwrap_or(f64::NAN));
                let band = 0.02f64.max(3.0 * se / ratio);
                c.check(
                    format!("5/x={:.1}", r.x),
                    (ratio - 1.0).abs() <= band,
                    format!("max ratio {ratio:.4}, band {band:.4}"),
                );
            }
            Err(e) => c.fail("5/run", e),
        }
    }
}

fn c6(c: &mut Criterion) {
    let m: SignalModel = builtin_model("ortho-2d", None).unwrap();
    let info = m.fisher_information(&[0.0, 0.0], &Grid::uniform(256).unwrap()).unwrap();
    let off = info.matrix.max_abs_diff(&mdev_core::Matrix::identity(2));
    c.check("6/identity information", off < 1e-12, format!("max |I - Id| = {off:.1e}"));

    let cfg = MCConfig::new(50_000, 16).unwrap().with_grid_n(256);
    let exceed = gauss_exceedance(&OmegaSet::ball(2), 3.0, &cfg).unwrap();
    c.check(
        "6/denominator r=3",
        (exceed.p_hat - EXP_M4_5).abs() < 1e-12 * EXP_M4_5 && ((-4.5f64).exp() - EXP_M4_5).abs() < 1e-16,
        format!("P(zeta not in 3B) = {:.6e}", exceed.p_hat),
    );
    // the same denominator through importance sampling on a round ellipsoid
    let mc = gauss_exceedance(&OmegaSet::ellipsoid_axes(&[1.0, 1.0]).unwrap(), 3.0, &cfg).unwrap();
    c.check("6/denominator mc", mc.within(EXP_M4_5, 3.0), format!("{:.5e} +- {:.1e}", mc.p_hat, mc.se));

    let sched = schedule_for(0.01, &[3.0, 4.0, 5.0]);
    for r in bound_comparison_run(&m, Theorem::T5, &sched, &RunSettings::new(vec![0.0, 0.0]), &cfg) {
        match r {
            Ok(r) => {
                let (ratio, se) = (r.ratio_or_gap.unwrap_or(f64::NAN), r.se_combined.unwrap_or(f64::NAN));
                c.check(
                    format!("6/r={:.1}", r.x),
                    (ratio - 1.0).abs() <= 3.0 * se,
                    format!("ratio {ratio:.4} +- {se:.4}"),
                );
            }
            Err(e) => c.fail("6/run", e),
        }
    }
}

fn c7(c: &mut Criterion) {
    let gaps: Vec<f64> =
        [4e-2f64, 1e-2, 2.5e-3].iter().map(|&g| (lemma1_tail_ratio(g, g, 3.0).unwrap() - 1.0).abs()).collect();
    for w in gaps.windows(2) {
        let f = w[0] / w[1];
        c.check("7/step", (3.0..=5.0).contains(&f), format!("factor {f:.3}"));
    }
    let at_zero = lemma1_tail_ratio(0.0, 0.0, 3.0).unwrap();
    c.check("7/zero", at_zero == 1.0, format!("ratio(0,0,3) = {at_zero}"));
}

fn c8(c: &mut Criterion) {
    let grid = Grid::uniform(1024).unwrap();
    let radii: Vec<f64> = (0..8).map(|k| 0.1 * 0.5f64.powi(k)).collect();
    let lin = linear().check_regularity(&[0.3], &grid, &radii).unwrap();
    let worst = lin.residual_12.iter().chain(&lin.residual_14).chain(&lin.residual_15).fold(0f64, |m, &v| m.max(v));
    c.check(
        "8/linear",
        lin.passes_a1 && lin.passes_a2 && lin.passes_a3 && worst <= lin.noise_floor,
        format!("max residual {worst:.1e}, floor {:.1e}", lin.noise_floor),
    );
    let cusp = builtin_model("power-cusp", Some(0.2)).unwrap().with_lambda(1.0).unwrap();
    let rep = cusp.check_regularity(&[0.0], &grid, &radii).unwrap();
    let slope = rep.fitted_orders.residual_12;
    c.check(
        "8/power-cusp",
        !rep.passes_a2 && slope.is_some_and(|s| s < 2.75),
        format!("A2 {}, slope {slope:?}", if rep.passes_a2 { "pass" } else { "fail" }),
    );
}

fn c9(c: &mut Criterion) {
    let m = linear();
    let spec = TestSpec::new(vec![0.0], 0.1, PHI_M8, TestKind::ScoreT).unwrap();
    let cfg = MCConfig::new(100_000, 19).unwrap().with_grid_n(256);
    match estimate_error_probs(&m, &spec, 0.02, &cfg) {
        Ok((a, _)) => {
            c.check(
                "9/tilted",
                a.within(PHI_M8, 3.0) && a.ess >= 5e3,
                format!("{:.4e} +- {:.1e}, ESS {:.0}", a.p_hat, a.se, a.ess),
            );
        }
        Err(e) => c.fail("9/tilted", e),
    }
    let plain = cfg.clone().with_tilt(Tilt::None);
    match estimate_error_probs(&m, &spec, 0.02, &plain) {
        Ok((a, _)) => c.check(
            "9/plain",
            a.hits == 0 && a.is_hard_failure(),
            format!("{} hits (expected {:.1e})", a.hits, 1e5 * PHI_M8),
        ),
        Err(e) => c.fail("9/plain", e),
    }
}

fn c10(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for (i, workers) in [1usize, 8, 1].into_iter().enumerate() {
        let mut cfg = ExperimentConfig::parse(
            "theorems = T1, T2, T3, T4, T5\nschedule.eps = 0.05, 0.02\nmc.n_rep = 2000\nmc.grid_n = 64\nmc.seed = 7",
        )
        .unwrap();
        cfg.output_dir = dir.path().join(format!("run{i}"));
        match run_experiment(&cfg, workers) {
            Ok(out) => bytes.push(std::fs::read(out.csv_path).unwrap()),
            Err(e) => c.fail(format!("10/workers={workers}"), e),
        }
    }
    let same = bytes.len() == 3 && bytes.windows(2).all(|w| w[0] == w[1]);
    c.check("10/bytes", same, format!("{} runs at workers 1, 8, 1", bytes.len()));
}

fn main() -> ExitCode {
    type Run = fn(&mut Criterion);
    let criteria: [(&str, Run); 10] = [
        ("exact-Gaussian oracle equivalence", c1),
        ("sharp type II attainment", c2),
        ("logarithmic convergence of the test bound", c3),
        ("scaled log miss of the one-step estimator", c4),
        ("estimator miss ratio over the local lattice", c5),
        ("confidence-set miss ratio, planar ball", c6),
        ("tail-ratio perturbation", c7),
        ("regularity auditor", c8),
        ("rare-event depth", c9),
        ("determinism across worker counts", c10),
    ];
    let mut unexpected = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let mut c = Criterion::default();
        let t = Instant::now();
        run(&mut c);
        let ok = c.checks.iter().all(|k| k.ok);
        println!(
            "criterion {:>2}: {} {name} ({:.1} s)",
            n + 1,
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        for k in &c.checks {
            let known = KNOWN_DEVIATIONS.iter().find(|(id, _)| *id == k.id);
            let tag = match (k.ok, known) {
                (true, _) => "ok  ",
                (false, Some(_)) => "KNOWN",
                (false, None) => "BAD ",
            };
            println!("    {tag} {:<24} {}", k.id, k.detail);
            if let (false, Some((_, why))) = (k.ok, known) {
                println!("          {why}");
            }
            if !k.ok && known.is_none() {
                unexpected += 1;
            }
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected failing check(s)");
        ExitCode::FAILURE
    }
}
