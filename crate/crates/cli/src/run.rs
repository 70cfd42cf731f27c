//! Runs an experiment and writes its CSV, JSON sidecar and plot scripts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use mdev_core::mdp::bound_comparison_run;
use mdev_core::BoundReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 12] = [
    "theorem",
    "epsilon",
    "u_eps",
    "x",
    "alpha_target",
    "empirical_1",
    "empirical_2",
    "theoretical_1",
    "theoretical_2",
    "ratio",
    "se_combined",
    "meets_bound",
];

pub const RESULTS_FILE: &str = "results.csv";
pub const SIDECAR_FILE: &str = "results.json";

/// Everything recorded next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: ExperimentConfig,
    pub seed: u64,
    /// `sha256("blob <len>\0" + config text)`, the way git names objects.
    pub config_hash: String,
    pub wall_clock_seconds: f64,
    pub workers: usize,
    pub warnings: Vec<String>,
    pub violations: Vec<String>,
    pub hard_failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub csv_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub rows: usize,
    pub violations: Vec<String>,
    pub hard_failures: Vec<String>,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        self.violations.is_empty() && self.hard_failures.is_empty()
    }

    /// `0` when every bound held and every estimate was usable.
    pub fn exit_code(&self) -> i32 {
        if self.success() {
            0
        } else {
            1
        }
    }
}

pub fn git_blob_sha256(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "NA".into())
}

fn nth(values: &[(String, f64)], i: usize) -> String {
    values.get(i).map(|&(_, v)| num(v)).unwrap_or_else(|| "NA".into())
}

fn report_row(r: &BoundReport) -> Vec<String> {
    vec![
        r.theorem.to_string(),
        num(r.epsilon),
        num(r.u_eps),
        num(r.x),
        opt(r.alpha_target),
        nth(&r.empirical, 0),
        nth(&r.empirical, 1),
        nth(&r.theoretical, 0),
        nth(&r.theoretical, 1),
        opt(r.ratio_or_gap),
        opt(r.se_combined),
        r.meets_bound.to_string(),
    ]
}

/// Row of a cell that could not be computed at all.
fn failed_row(theorem: &str, epsilon: f64, u_eps: f64) -> Vec<String> {
    let mut row = vec![theorem.to_string(), num(epsilon), num(u_eps)];
    row.resize(CSV_COLUMNS.len() - 1, "NA".into());
    row.push("false".into());
    row
}

/// Runs every selected theorem along the schedule inside a pool of
/// `workers` threads and writes `results.csv` and `results.json` into the
/// configured output directory.
///
/// The replicate reduction is blocked and ordered, so the CSV bytes do not
/// depend on `workers`.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let model = cfg.build_model()?;
    let settings = cfg.run_settings()?;
    let mc = cfg.mc_config()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;

    let cells: Vec<_> = pool.install(|| {
        cfg.theorems.iter().map(|&t| (t, bound_comparison_run(&model, t, &cfg.schedule, &settings, &mc))).collect()
    });

    let mut rows = Vec::new();
    let (mut warnings, mut violations, mut hard_failures) = (Vec::new(), Vec::new(), Vec::new());
    for (theorem, results) in cells {
        for (res, &eps) in results.into_iter().zip(&cfg.schedule.eps_list) {
            let tag = format!("{theorem} at eps = {eps}");
            match res {
                Ok(r) => {
                    warnings.extend(r.warnings.iter().map(|w| format!("{tag}: {w}")));
                    if r.hard_failure {
                        hard_failures.push(tag.clone());
                    } else if !r.meets_bound {
                        violations.push(tag.clone());
                    }
                    rows.push(report_row(&r));
                }
                Err(e) => {
                    hard_failures.push(format!("{tag}: {e}"));
                    rows.push(failed_row(&theorem.to_string(), eps, cfg.schedule.u_eps(eps)));
                }
            }
        }
    }

    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let csv_path = cfg.output_dir.join(RESULTS_FILE);
    write_csv(&csv_path, &rows)?;

    let sidecar = Sidecar {
        config: cfg.clone(),
        seed: cfg.mc.seed,
        config_hash: git_blob_sha256(cfg.to_text().as_bytes()),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        workers: workers.max(1),
        warnings,
        violations: violations.clone(),
        hard_failures: hard_failures.clone(),
    };
    let sidecar_path = cfg.output_dir.join(SIDECAR_FILE);
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    fs::write(&sidecar_path, json).with_context(|| format!("writing {}", sidecar_path.display()))?;

    Ok(RunOutcome { csv_path, sidecar_path, rows: rows.len(), violations, hard_failures })
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}
