//! Experiment configuration in flat `key = value` form.
//!
//! ```text
//! # comments run to the end of the line
//! model.name = linear-sin
//! theorems = T1, T3
//! schedule.eps = 0.05, 0.02, 0.01
//! mc.n_rep = 20000
//! ```
//!
//! Unknown keys are rejected so that typos do not silently fall back to
//! defaults.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use mdev_core::model::builtin_model;
use mdev_core::{EstimatorKind, MCConfig, OmegaSet, RunSettings, Schedule, SignalModel, Theorem, Tilt};
use serde::{Deserialize, Serialize};

/// Replicates per Monte Carlo estimate unless configured.
pub const DEFAULT_N_REP: usize = 20_000;
/// Quadrature cells unless configured.
pub const DEFAULT_GRID_N: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub theorems: Vec<Theorem>,
    pub schedule: Schedule,
    /// Target level of the testing theorems; `None` picks the theorem's
    /// natural default.
    pub alpha: Option<f64>,
    pub omega: String,
    /// `one-step` or `mle`.
    pub estimator: String,
    pub mc: McSection,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub gamma: Option<f64>,
    pub theta0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSection {
    pub n_rep: usize,
    pub seed: u64,
    pub grid_n: usize,
    /// `auto`, `none`, or `theta:v1,v2,...`.
    pub tilt: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig { name: "linear-sin".into(), gamma: None, theta0: vec![0.0] },
            theorems: Vec::new(),
            schedule: Schedule::default(),
            alpha: None,
            omega: "ball".into(),
            estimator: "one-step".into(),
            mc: McSection { n_rep: DEFAULT_N_REP, seed: 0, grid_n: DEFAULT_GRID_N, tilt: "auto".into() },
            output_dir: PathBuf::from("out"),
        }
    }
}

fn floats(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("{key}: {s:?} is not a number")))
        .collect()
}

fn one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("{key}: {v:?}: {e}"))
}

/// Natural reference point of each built-in model.
pub fn default_theta0(name: &str) -> Vec<f64> {
    match name {
        "ortho-2d" => vec![0.0, 0.0],
        "nonlinear-sin" | "power-cusp" => vec![1.0],
        _ => vec![0.0],
    }
}

/// Canonical rendering of a float list: shortest round-trip digits.
fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut theta0_given = false;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`", no + 1))?;
            let (key, v) = (key.trim(), value.trim());
            let ctx = || format!("line {}", no + 1);
            match key {
                "model.name" => cfg.model.name = v.to_string(),
                "model.gamma" => cfg.model.gamma = Some(one(key, v).with_context(ctx)?),
                "model.theta0" => {
                    cfg.model.theta0 = floats(key, v).with_context(ctx)?;
                    theta0_given = true;
                }
                "theorems" => {
                    cfg.theorems = v
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| s.parse::<Theorem>().map_err(anyhow::Error::from))
                        .collect::<Result<_>>()
                        .with_context(ctx)?;
                }
                "schedule.eps" => cfg.schedule.eps_list = floats(key, v).with_context(ctx)?,
                "schedule.a" => cfg.schedule.a = one(key, v).with_context(ctx)?,
                "schedule.delta" => cfg.schedule.delta = one(key, v).with_context(ctx)?,
                "schedule.lambda" => cfg.schedule.lambda = one(key, v).with_context(ctx)?,
                "alpha" => cfg.alpha = if v == "default" { None } else { Some(one(key, v).with_context(ctx)?) },
                "omega.kind" => cfg.omega = v.to_string(),
                "estimator" => cfg.estimator = v.to_string(),
                "mc.n_rep" => cfg.mc.n_rep = one(key, v).with_context(ctx)?,
                "mc.seed" => cfg.mc.seed = one(key, v).with_context(ctx)?,
                "mc.grid_n" => cfg.mc.grid_n = one(key, v).with_context(ctx)?,
                "mc.tilt" => cfg.mc.tilt = v.to_string(),
                "output.dir" => cfg.output_dir = PathBuf::from(v),
                _ => bail!("line {}: unknown key {key:?}", no + 1),
            }
        }
        if !theta0_given {
            cfg.model.theta0 = default_theta0(&cfg.model.name);
        }
        Ok(cfg)
    }

    /// Renders the config in the form [`Self::parse`] reads, with every key
    /// spelled out.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model.name = {}", self.model.name);
        if let Some(g) = self.model.gamma {
            let _ = writeln!(s, "model.gamma = {g:?}");
        }
        let _ = writeln!(s, "model.theta0 = {}", join(&self.model.theta0));
        let names: Vec<String> = self.theorems.iter().map(|t| t.to_string()).collect();
        let _ = writeln!(s, "theorems = {}", names.join(", "));
        let _ = writeln!(s, "schedule.eps = {}", join(&self.schedule.eps_list));
        let _ = writeln!(s, "schedule.a = {:?}", self.schedule.a);
        let _ = writeln!(s, "schedule.delta = {:?}", self.schedule.delta);
        let _ = writeln!(s, "schedule.lambda = {:?}", self.schedule.lambda);
        match self.alpha {
            Some(a) => {
                let _ = writeln!(s, "alpha = {a:?}");
            }
            None => {
                let _ = writeln!(s, "alpha = default");
            }
        }
        let _ = writeln!(s, "omega.kind = {}", self.omega);
        let _ = writeln!(s, "estimator = {}", self.estimator);
        let _ = writeln!(s, "mc.n_rep = {}", self.mc.n_rep);
        let _ = writeln!(s, "mc.seed = {}", self.mc.seed);
        let _ = writeln!(s, "mc.grid_n = {}", self.mc.grid_n);
        let _ = writeln!(s, "mc.tilt = {}", self.mc.tilt);
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        s
    }

    pub fn build_model(&self) -> Result<SignalModel> {
        let m = builtin_model(&self.model.name, self.model.gamma)?;
        if m.dim() != self.model.theta0.len() {
            bail!("model {} has dimension {} but theta0 has {} entries", m.name(), m.dim(), self.model.theta0.len());
        }
        Ok(m)
    }

    pub fn estimator_kind(&self) -> Result<EstimatorKind> {
        match self.estimator.as_str() {
            "one-step" | "onestep" | "score" => Ok(EstimatorKind::ScoreOneStep),
            "mle" => Ok(EstimatorKind::Mle),
            other => bail!("unknown estimator {other:?}"),
        }
    }

    pub fn mc_config(&self) -> Result<MCConfig> {
        let tilt = match self.mc.tilt.as_str() {
            "auto" => Tilt::Auto,
            "none" => Tilt::None,
            t => match t.strip_prefix("theta:") {
                Some(list) => Tilt::ToParameter(floats("mc.tilt", list)?),
                None => bail!("unknown tilt {t:?}"),
            },
        };
        Ok(MCConfig::new(self.mc.n_rep, self.mc.seed)?.with_tilt(tilt).with_grid_n(self.mc.grid_n))
    }

    pub fn run_settings(&self) -> Result<RunSettings> {
        let mut s = RunSettings::new(self.model.theta0.clone());
        s.alpha = self.alpha;
        s.omega = OmegaSet::parse(&self.omega, self.model.theta0.len())?;
        s.estimator = self.estimator_kind()?;
        Ok(s)
    }

    /// Resolves every name and checks the schedule.
    pub fn validate(&self) -> Result<()> {
        self.build_model()?;
        self.run_settings()?;
        self.mc_config()?;
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                bail!("alpha = {a} outside (0, 1)");
            }
        }
        if let Err(violations) = self.schedule.validate() {
            let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            bail!("schedule leaves the moderate-deviation zone:\n  {}", lines.join("\n  "));
        }
        Ok(())
    }
}
