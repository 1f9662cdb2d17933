use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use subspace_ucb::bench::{self, io, svg, ExperimentConfig, Mode};
use subspace_ucb::problems::{registry, Problem};
use subspace_ucb::regret::{check_gradient_error_bound, RegretTrace, BOUND_TOL};
use subspace_ucb::subspace_gd::{run_subspace_gd, GdConfig};

#[derive(Parser)]
#[command(name = "subucb", version, about = "Subspace optimization benchmarks with a UCB direction selector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a flat JSON config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Rebuild data profiles from the histories of a finished dfo experiment.
    Profile {
        config: PathBuf,
        /// Overrides `taus` from the config.
        #[arg(long, value_delimiter = ',')]
        tau: Vec<f64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the UCB solver with diagnostics and check the regret bound.
    Verify {
        /// Problem selector, e.g. `ill_quadratic:50`.
        problem: String,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "gaussian:p=1")]
        sketch: String,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        memory: Option<usize>,
        /// Checkpoints for the bound; defaults to ten evenly spaced ones.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<usize>,
        /// Also check the per-iteration estimate error bound (unit columns).
        #[arg(long)]
        error_bound: bool,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the problem catalog.
    ListProblems {
        #[arg(long)]
        json: bool,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, output_dir } => run(&config, output_dir),
        Command::Profile { config, tau, output_dir } => profile(&config, tau, output_dir),
        Command::Verify { problem, horizon, seed, sketch, lambda, memory, checkpoints, error_bound, out } => {
            let cfg = GdConfig {
                horizon,
                seed,
                sketch: sketch.parse()?,
                use_ucb: true,
                lambda,
                memory,
                unit_columns: error_bound,
                diagnostics: true,
                ..GdConfig::default()
            };
            verify(&problem, &cfg, checkpoints, error_bound, out.as_deref())
        }
        Command::ListProblems { json } => list_problems(json),
    }
}

fn load(config: &Path, output_dir: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config).with_context(|| format!("reading {}", config.display()))?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn run(config: &Path, output_dir: Option<PathBuf>) -> Result<()> {
    let cfg = load(config, output_dir)?;
    let out = bench::run_experiment(&cfg)?;
    let failures = out.failures().count();
    println!("{} runs, {} failed, output in {}", out.runs.len(), failures, cfg.output_dir);
    for f in out.failures() {
        eprintln!("failed: {} {} seed {}: {}", f.instance, f.solver, f.seed, f.error.as_deref().unwrap_or(""));
    }
    if !out.ratios.is_empty() {
        let wins = out.ratios.iter().filter(|r| r.r > 0.0).count();
        println!("ucb ahead in {wins} of {} cells", out.ratios.len());
    }
    for p in &out.profiles {
        for (solver, curve) in &p.curves {
            println!("tau={} {solver}: {:.3} solved at the full budget", p.tau, curve.last().copied().unwrap_or(0.0));
        }
    }
    Ok(())
}

fn profile(config: &Path, tau: Vec<f64>, output_dir: Option<PathBuf>) -> Result<()> {
    let cfg = load(config, output_dir)?;
    if cfg.mode != Mode::Dfo {
        bail!("profiles are built from dfo experiments");
    }
    let taus = if tau.is_empty() { cfg.taus.clone() } else { tau };
    let dir = PathBuf::from(&cfg.output_dir);
    for p in bench::profiles_from_histories(&cfg, &taus)? {
        let stem = format!("profile_tau{}", p.tau);
        io::write_atomic(&dir.join(format!("{stem}.csv")), p.to_csv().as_bytes())?;
        io::write_atomic(&dir.join(format!("{stem}.svg")), svg::profile_svg(&p).as_bytes())?;
        println!("wrote {}", dir.join(format!("{stem}.csv")).display());
    }
    Ok(())
}

fn verify(selector: &str, cfg: &GdConfig, checkpoints: Vec<usize>, error_bound: bool, out: Option<&Path>) -> Result<()> {
    let mut problem = Problem::new(registry::lookup(selector, None)?);
    let history = run_subspace_gd(&mut problem, cfg).map_err(|f| f.error)?;
    let trace = RegretTrace::from_history(&history)?;
    let k = trace.len();
    let checkpoints = if checkpoints.is_empty() { (1..=10).map(|i| (i * k / 10).max(1)).collect() } else { checkpoints };
    let regret = trace.regret_bound_report(&checkpoints)?;
    let mut ok = regret.violations(BOUND_TOL) == 0;
    let mut reports = vec![regret];
    if error_bound {
        let r = check_gradient_error_bound(&trace, cfg.seed)?;
        ok &= r.violations(BOUND_TOL) == 0;
        reports.push(r);
    }
    let text = serde_json::to_string_pretty(&serde_json::json!({
        "problem": selector,
        "iterations": k,
        "holds": ok,
        "reports": reports,
    }))?;
    match out {
        Some(path) => io::write_atomic(path, text.as_bytes())?,
        None => println!("{text}"),
    }
    for r in &reports {
        eprintln!("{}: {} rows, min slack {:.3e}", r.check, r.rows.len(), r.min_slack());
    }
    if !ok {
        bail!("bound violated");
    }
    Ok(())
}

fn list_problems(json: bool) -> Result<()> {
    let catalog = registry::catalog();
    if json {
        println!("{}", serde_json::to_string_pretty(&catalog)?);
        return Ok(());
    }
    for e in catalog {
        println!("{:<22} default d={:<4} {}", e.name, e.default_dim, e.dims);
    }
    println!("embedded: <name>@D=<D>,seed=<s>");
    Ok(())
}
