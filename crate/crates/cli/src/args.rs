//! Command-line surface.

use std::path::{Path, PathBuf};

use chi2dens::data::Synthetic;
use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Outcome};
use crate::config::{DataSource, RunConfig};
use crate::failure::{usage, CliResult};

#[derive(Debug, Parser)]
#[command(name = "chi2dens", version, about = "Bayesian density estimation on the square-root sphere")]
pub struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true, env = "CHI2DENS_CONFIG")]
    pub config: Option<PathBuf>,
    /// Random seed (chain seed for `fit`, sampling seed otherwise).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the sampler and write chains, summaries and a manifest.
    Fit(FitArgs),
    /// Recompute pointwise summaries from a finished run.
    Summarize(SummarizeArgs),
    /// Draw from the posterior predictive of a finished run.
    Predict(PredictArgs),
    /// Estimate a Cox-process intensity from a finished run.
    Cox(CoxArgs),
    /// Run the numerical verification suite.
    Verify(VerifyArgs),
    /// Write a synthetic data set.
    Generate(GenerateArgs),
}

#[derive(Debug, Args, Default)]
pub struct GridArgs {
    /// Grid points per axis.
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Comma-separated quantile levels.
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Option<Vec<f64>>,
}

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    /// CSV file of observations.
    #[arg(long, conflicts_with = "recipe")]
    pub data: Option<PathBuf>,
    /// Number of columns in the data file.
    #[arg(long, requires = "data")]
    pub dim: Option<usize>,
    /// Synthetic recipe as JSON, e.g. '{"name":"beta","a":2,"b":2}'.
    #[arg(long)]
    pub recipe: Option<String>,
    /// Synthetic sample size.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub max_index: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub leapfrog_steps: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Output directory (relative paths resolve against CHI2DENS_OUTPUT_ROOT).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Directory of a finished fit; defaults to the configured output directory.
    #[arg(long)]
    pub run: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also write the density of every draw at every node.
    #[arg(long)]
    pub draw_grid: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of predictive draws.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CoxArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Gamma prior shape for the total mass.
    #[arg(long)]
    pub a: Option<f64>,
    /// Gamma prior rate for the total mass.
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Report directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ambient dimension standing in for the infinite sphere.
    #[arg(long)]
    pub b_full: Option<usize>,
    /// Comma-separated truncation levels.
    #[arg(long, value_delimiter = ',')]
    pub truncations: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Recipe as JSON; defaults to the configured synthetic source.
    #[arg(long)]
    pub recipe: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_recipe(text: &str) -> CliResult<Synthetic> {
    serde_json::from_str(text).map_err(|e| usage(format!("invalid recipe: {e}")))
}

fn apply_grid(config: &mut RunConfig, grid: &GridArgs) {
    if let Some(n) = grid.grid_points {
        config.grid_points = Some(n);
    }
    if let Some(q) = &grid.quantiles {
        config.quantiles = q.clone();
    }
}

fn apply_fit(config: &mut RunConfig, args: &FitArgs, seed: Option<u64>) -> CliResult<()> {
    if let Some(path) = &args.data {
        let dim = args.dim.unwrap_or(1);
        config.data = DataSource::Csv {
            path: path.clone(),
            dim,
        };
    }
    if args.recipe.is_some() || args.n.is_some() || args.data_seed.is_some() {
        let (mut recipe, mut n, mut data_seed) = match &config.data {
            DataSource::Synthetic { recipe, n, seed } => (recipe.clone(), *n, *seed),
            DataSource::Csv { .. } => match &args.recipe {
                Some(_) => (Synthetic::Beta { a: 1.0, b: 1.0 }, 1000, 0),
                None => return Err(usage("--n and --data-seed apply to synthetic data only")),
            },
        };
        if let Some(r) = &args.recipe {
            recipe = parse_recipe(r)?;
        }
        n = args.n.unwrap_or(n);
        data_seed = args.data_seed.unwrap_or(data_seed);
        config.data = DataSource::Synthetic {
            recipe,
            n,
            seed: data_seed,
        };
    }
    let b = &mut config.basis;
    b.sigma = args.sigma.unwrap_or(b.sigma);
    b.alpha = args.alpha.unwrap_or(b.alpha);
    b.s = args.s.unwrap_or(b.s);
    if args.max_index.is_some() {
        b.max_index = args.max_index;
    }
    let c = &mut config.chain;
    c.step_size = args.step_size.unwrap_or(c.step_size);
    c.leapfrog_steps = args.leapfrog_steps.unwrap_or(c.leapfrog_steps);
    c.iterations = args.iterations.unwrap_or(c.iterations);
    c.burn_in = args.burn_in.unwrap_or(c.burn_in);
    c.thin = args.thin.unwrap_or(c.thin);
    c.seed = seed.unwrap_or(c.seed);
    config.chains = args.chains.unwrap_or(config.chains);
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    apply_grid(config, &args.grid);
    Ok(())
}

fn base_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn run_dir(args: &RunArgs, config: &RunConfig) -> PathBuf {
    match &args.run {
        Some(dir) => crate::config::resolve_output(dir),
        None => config.resolved_output_dir(),
    }
}

/// Post-processing commands start from the configuration recorded by the
/// fit, then apply the command-line overrides.
fn fitted_config(dir: &Path) -> CliResult<RunConfig> {
    Ok(crate::output::FitRecord::read(dir)?.config)
}

fn fitted_seed(dir: &Path, seed: Option<u64>) -> CliResult<u64> {
    match seed {
        Some(s) => Ok(s),
        None => Ok(crate::output::FitRecord::read(dir)?.seed),
    }
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // a second initialization (e.g. in tests) keeps the existing pool
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialized");
        }
    }
    let base = base_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Fit(args) => {
            let mut config = base;
            apply_fit(&mut config, args, cli.seed)?;
            commands::fit(&config)
        }
        Command::Summarize(args) => {
            let dir = run_dir(&args.run, &base);
            let mut config = fitted_config(&dir)?;
            apply_grid(&mut config, &args.grid);
            config.write_draw_grid |= args.draw_grid;
            commands::summarize(&dir, &config)
        }
        Command::Predict(args) => {
            let dir = run_dir(&args.run, &base);
            let mut config = fitted_config(&dir)?;
            config.predict_count = args.count.unwrap_or(base.predict_count);
            let seed = fitted_seed(&dir, cli.seed)?;
            commands::predict(&dir, &config, seed)
        }
        Command::Cox(args) => {
            let dir = run_dir(&args.run, &base);
            let mut config = fitted_config(&dir)?;
            config.prior = chi2dens::cox_process::GammaPrior::new(
                args.a.unwrap_or(base.prior.shape()),
                args.b.unwrap_or(base.prior.rate()),
            )?;
            apply_grid(&mut config, &args.grid);
            let seed = fitted_seed(&dir, cli.seed)?;
            commands::cox(&dir, &config, seed)
        }
        Command::Verify(args) => {
            let mut config = base;
            if let Some(b) = args.b_full {
                config.verify.trial.b_full = b;
            }
            if let Some(t) = &args.truncations {
                config.verify.truncations = t.clone();
            }
            if let Some(s) = cli.seed {
                config.verify.trial.seed = s;
            }
            let dir = match &args.out {
                Some(d) => crate::config::resolve_output(d),
                None => config.resolved_output_dir(),
            };
            commands::verify(&dir, &config)
        }
        Command::Generate(args) => {
            let config = base;
            let (recipe, n) = match (&args.recipe, &config.data) {
                (Some(r), DataSource::Synthetic { n, .. }) => (parse_recipe(r)?, *n),
                (Some(r), _) => (parse_recipe(r)?, 1000),
                (None, DataSource::Synthetic { recipe, n, .. }) => (recipe.clone(), *n),
                (None, DataSource::Csv { .. }) => return Err(usage("generate needs --recipe")),
            };
            let n = args.n.unwrap_or(n);
            let seed = match (cli.seed, &config.data) {
                (Some(s), _) => s,
                (None, DataSource::Synthetic { seed, .. }) => *seed,
                _ => 0,
            };
            commands::generate(&recipe, n, seed, &args.out, &config)
        }
    }
}
