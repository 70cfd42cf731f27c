use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mdev_cli::config::default_theta0;
use mdev_cli::{default_workers, emit_plots, run_experiment, ExperimentConfig};
use mdev_core::mdp::{gauss_exceedance, lemma1_tail_ratio};
use mdev_core::{Grid, MCConfig, OmegaSet};

#[derive(Parser)]
#[command(name = "mdev", version, about = "Moderate-deviation bound checks for signals in white noise")]
struct Cli {
    /// Experiment configuration (flat `key = value` file).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MDEV_WORKERS")]
    workers: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Fisher information at theta0.
    Fisher(ModelArgs),
    /// Audit the smoothness assumptions at theta0.
    CheckModel(ModelArgs),
    /// Run the experiments of a config file.
    Run,
    /// Estimate P(zeta outside r*Omega) for a standard Gaussian vector.
    GaussExceed {
        #[arg(long, default_value = "ball")]
        omega: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 100_000)]
        n_rep: usize,
    },
    /// Tabulate the tail ratio P(e1 > c)/P(e1 + e2 > c) for shrinking perturbations.
    Lemma1 {
        #[arg(long, default_value_t = 3.0)]
        c: f64,
        /// Values used for both the variance and the covariance.
        #[arg(long, value_delimiter = ',', default_values_t = [0.04, 0.01, 0.0025])]
        gamma: Vec<f64>,
    },
}

#[derive(clap::Args)]
struct ModelArgs {
    /// Built-in model name; taken from the config when omitted.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated reference parameter.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta0: Option<Vec<f64>>,
    /// Exponent of the power-cusp model.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 4096)]
    grid_n: usize,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.mc.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn model_from(cli: &Cli, args: &ModelArgs) -> Result<(mdev_core::SignalModel, Vec<f64>)> {
    let mut cfg = load_config(cli)?;
    if let Some(m) = &args.model {
        cfg.model.name = m.clone();
        cfg.model.theta0 = default_theta0(m);
    }
    if let Some(g) = args.gamma {
        cfg.model.gamma = Some(g);
    }
    if let Some(t) = &args.theta0 {
        cfg.model.theta0 = t.clone();
    }
    Ok((cfg.build_model()?, cfg.model.theta0))
}

fn fisher(cli: &Cli, args: &ModelArgs) -> Result<()> {
    let (m, theta0) = model_from(cli, args)?;
    let grid = Grid::uniform(args.grid_n)?;
    let f = m.fisher_information(&theta0, &grid)?;
    println!("model {} at theta0 = {:?}", m.name(), theta0);
    for i in 0..f.dim() {
        let row: Vec<String> = f.matrix.row(i).iter().map(|v| format!("{v:.12e}")).collect();
        println!("  [{}]", row.join(", "));
    }
    println!("eigenvalues {:?}", f.eigenvalues);
    Ok(())
}

fn check_model(cli: &Cli, args: &ModelArgs) -> Result<bool> {
    let (m, theta0) = model_from(cli, args)?;
    let grid = Grid::uniform(args.grid_n)?;
    let radii: Vec<f64> = (0..8).map(|k| 0.1 * 0.5f64.powi(k)).collect();
    let r = m.check_regularity(&theta0, &grid, &radii)?;
    println!("model {} at theta0 = {:?} (noise floor {:.3e})", m.name(), theta0, r.noise_floor);
    println!("{:>12} {:>14} {:>14} {:>14}", "radius", "signal", "distance", "information");
    for i in 0..r.radii.len() {
        println!(
            "{:>12.4e} {:>14.4e} {:>14.4e} {:>14.4e}",
            r.radii[i], r.residual_12[i], r.residual_14[i], r.residual_15[i]
        );
    }
    let show = |o: Option<f64>| o.map_or("unresolved".to_string(), |v| format!("{v:.3}"));
    println!(
        "fitted orders: signal {}, distance {}, information {}",
        show(r.fitted_orders.residual_12),
        show(r.fitted_orders.residual_14),
        show(r.fitted_orders.residual_15)
    );
    println!("A1 {}  A2 {}  A3 {}", pass(r.passes_a1), pass(r.passes_a2), pass(r.passes_a3));
    Ok(r.passes_a1 && r.passes_a2 && r.passes_a3)
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    let workers = cli.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        bail!("--workers must be at least 1");
    }
    match &cli.command {
        Command::Fisher(a) => fisher(&cli, a).map(|_| true),
        Command::CheckModel(a) => check_model(&cli, a),
        Command::Run => {
            let cfg = load_config(&cli)?;
            let outcome = run_experiment(&cfg, workers)?;
            println!("wrote {} rows to {}", outcome.rows, outcome.csv_path.display());
            let plots = emit_plots(&outcome.csv_path)?;
            for w in &plots.warnings {
                eprintln!("warning: {w}");
            }
            for v in &outcome.violations {
                eprintln!("bound violated: {v}");
            }
            for h in &outcome.hard_failures {
                eprintln!("hard failure: {h}");
            }
            Ok(outcome.success())
        }
        Command::GaussExceed { omega, dim, r, n_rep } => {
            let body = OmegaSet::parse(omega, *dim)?;
            let cfg = MCConfig::new(*n_rep, load_config(&cli)?.mc.seed)?;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
            let e = pool.install(|| gauss_exceedance(&body, *r, &cfg))?;
            println!("P(zeta not in {r}*{omega}) = {:.6e} (se {:.3e}, ess {:.1})", e.p_hat, e.se, e.ess);
            Ok(!e.is_hard_failure())
        }
        Command::Lemma1 { c, gamma } => {
            println!("{:>12} {:>14} {:>14}", "gamma", "ratio", "|ratio - 1|");
            for &g in gamma {
                let v = lemma1_tail_ratio(g, g, *c)?;
                println!("{g:>12.4e} {v:>14.8} {:>14.6e}", (v - 1.0).abs());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
