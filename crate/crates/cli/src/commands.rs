//! Subcommand implementations.

use std::f64::consts::{PI, SQRT_2};
use std::path::{Path, PathBuf};

use chi2dens::cox_process::{intensity_draws, mass_posterior};
use chi2dens::data::{Dataset, Synthetic};
use chi2dens::fisher_checks::{
    convergence_table, geodesic_conservation, is_monotone_decreasing, isometry_residual_across, DensityFunction,
    TangentFunction, TrialReport,
};
use chi2dens::kl_basis::{orthonormality_residual, quadrature_grid, BasisSpec, MaternHyper};
use chi2dens::posterior_analysis::{
    evaluate_draws, pointwise_summary, predictive_sample, summarize_chain, DensityGrid, PointwiseSummary, UniformGrid,
};
use chi2dens::spherical_hmc::{chain_rng, run_chains};
use chi2dens::Chain;
use serde_json::json;

use crate::config::{resolve_output, RunConfig};
use crate::failure::{numeric, usage, CliResult};
use crate::output::{
    axis_columns, chain_columns, ensure_dir, quantile_label, write_chain_csv, ChainRecord, DataRecord, FitRecord,
    Manifest, Table, FIT_MANIFEST,
};

/// Random streams for post-processing, kept apart from the chain streams.
const PREDICT_STREAM: u64 = u64::MAX - 1;
const COX_STREAM: u64 = u64::MAX - 2;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const DRAW_GRID_FILE: &str = "draw_grid.csv";
pub const PREDICTIVE_FILE: &str = "predictive.csv";
pub const INTENSITY_FILE: &str = "intensity.csv";
pub const VERIFY_FILE: &str = "verify.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";

/// Outcome of a completed subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub output: PathBuf,
    /// False when a verification check failed.
    pub passed: bool,
}

fn data_record(data: &Dataset) -> DataRecord {
    DataRecord {
        count: data.len(),
        dim: data.dim(),
        rescale: data.rescale().clone(),
        raw_bounds: data.raw_bounds().to_vec(),
    }
}

/// Builds the basis and data, runs the chains, and writes chain files, the
/// summary table and the manifest.
pub fn fit(config: &RunConfig) -> CliResult<Outcome> {
    config.validate()?;
    let data = config.data.load()?;
    let basis = config.basis.build(data.dim())?;
    let dir = ensure_dir(&config.resolved_output_dir())?;
    log::info!(
        "fitting {} points with {} basis functions, {} chain(s)",
        data.len(),
        basis.len(),
        config.chains
    );
    let chains = run_chains(&data, &basis, &config.chain, config.chains)?;

    let mut manifest = Manifest::new("fit", config, config.chain.seed);
    manifest.data = Some(data_record(&data));
    manifest.basis = Some(basis.config());
    for (k, chain) in chains.iter().enumerate() {
        let file = format!("chain_{k}.csv");
        write_chain_csv(&dir.join(&file), chain)?;
        manifest.add_file(
            &file,
            "stored draws: iteration index, log-posterior, unit-norm coefficients",
            chain_columns(basis.len()),
        );
        manifest.chains.push(ChainRecord {
            file,
            stored_draws: chain.len(),
            accept_rate: chain.accept_rate,
            wall_time_secs: chain.wall_time_secs,
            init: chain.init.clone(),
        });
        if let Some(w) = &chain.init.warning {
            log::warn!("{w}");
        }
    }
    let pooled = pool(&chains)?;
    let record = data_record(&data);
    let (columns, _) = write_summary(&dir, &pooled, config, &record)?;
    manifest.add_file(SUMMARY_FILE, SUMMARY_DESCRIPTION, columns);
    manifest.write(&dir.join(FIT_MANIFEST))?;
    Ok(Outcome {
        output: dir,
        passed: true,
    })
}

fn pool(chains: &[Chain]) -> CliResult<Chain> {
    let basis = chains[0].basis.clone();
    let rows = chains
        .iter()
        .flat_map(|c| c.draws.iter().map(|d| d.coeffs().as_slice().to_vec()))
        .collect();
    Ok(Chain::from_coefficients(basis, rows)?)
}

const SUMMARY_DESCRIPTION: &str = "pointwise posterior density summaries on a uniform grid; \
     unit-domain values and raw-coordinate values (unit value divided by the rescaling Jacobian)";

fn grid_coordinates(grid: &UniformGrid, k: usize, record: &DataRecord) -> Vec<f64> {
    let unit = grid.node(k);
    let raw = record.rescale.to_raw(&unit);
    unit.into_iter().chain(raw).collect()
}

fn summary_columns(dim: usize, levels: &[f64], stat_suffixes: &[&str]) -> Vec<String> {
    let mut cols = axis_columns(dim, "");
    cols.extend(axis_columns(dim, "_raw"));
    for suffix in stat_suffixes {
        cols.push(format!("mean{suffix}"));
        cols.extend(levels.iter().map(|&l| format!("{}{suffix}", quantile_label(l))));
    }
    cols
}

fn write_summary_table(
    path: &Path,
    grid: &UniformGrid,
    summary: &PointwiseSummary,
    record: &DataRecord,
    scales: &[f64],
    suffixes: &[&str],
) -> CliResult<Vec<String>> {
    let mut table = Table::create(path, summary_columns(grid.dim(), &summary.levels, suffixes))?;
    for k in 0..grid.len() {
        let mut row = grid_coordinates(grid, k, record);
        for scale in scales {
            row.push(summary.mean[k] * scale);
            row.extend(summary.quantiles.iter().map(|q| q[k] * scale));
        }
        table.row(&row)?;
    }
    table.finish()
}

fn write_summary(
    dir: &Path,
    chain: &Chain,
    config: &RunConfig,
    record: &DataRecord,
) -> CliResult<(Vec<String>, Option<Vec<String>>)> {
    let grid = config.grid(chain.basis.dim())?;
    let summary = summarize_chain(chain, &grid, &config.quantiles)?;
    let columns = write_summary_table(
        &dir.join(SUMMARY_FILE),
        &grid,
        &summary,
        record,
        &[1.0, 1.0 / record.jacobian()],
        &["", "_raw"],
    )?;
    let draw_columns = if config.write_draw_grid {
        let values = evaluate_draws(chain, &grid)?;
        Some(write_draw_grid(&dir.join(DRAW_GRID_FILE), &values, record)?)
    } else {
        None
    };
    Ok((columns, draw_columns))
}

fn write_draw_grid(path: &Path, values: &DensityGrid, record: &DataRecord) -> CliResult<Vec<String>> {
    let grid = &values.grid;
    let mut cols = axis_columns(grid.dim(), "");
    cols.extend(axis_columns(grid.dim(), "_raw"));
    cols.extend((0..values.draws).map(|d| format!("draw_{d}")));
    let mut table = Table::create(path, cols)?;
    for k in 0..grid.len() {
        let mut row = grid_coordinates(grid, k, record);
        row.extend(values.node_values(k));
        table.row(&row)?;
    }
    table.finish()
}

/// Loads the fit manifest and pooled draws of a run directory.
pub fn load_run(run_dir: &Path) -> CliResult<(FitRecord, Chain)> {
    let record = FitRecord::read(run_dir)?;
    let chain = record.load_draws(run_dir)?;
    Ok((record, chain))
}

/// Recomputes the summary table of a finished run.
pub fn summarize(run_dir: &Path, config: &RunConfig) -> CliResult<Outcome> {
    config.validate()?;
    let (record, chain) = load_run(run_dir)?;
    let (columns, draw_columns) = write_summary(run_dir, &chain, config, &record.data)?;
    let mut manifest = Manifest::new("summarize", config, record.seed);
    manifest.source_run = Some(record.config_hash.clone());
    manifest.add_file(SUMMARY_FILE, SUMMARY_DESCRIPTION, columns);
    if let Some(cols) = draw_columns {
        manifest.add_file(
            DRAW_GRID_FILE,
            "unit-domain density of every stored draw at every grid node",
            cols,
        );
    }
    manifest.write(&run_dir.join("summary.manifest.json"))?;
    Ok(Outcome {
        output: run_dir.to_path_buf(),
        passed: true,
    })
}

/// Posterior predictive points in raw coordinates.
pub fn predict(run_dir: &Path, config: &RunConfig, seed: u64) -> CliResult<Outcome> {
    let (record, chain) = load_run(run_dir)?;
    let mut rng = chain_rng(seed, PREDICT_STREAM);
    let points = predictive_sample(&chain, config.predict_count, &mut rng)?;
    let cols = axis_columns(record.data.dim, "");
    let mut table = Table::create(&run_dir.join(PREDICTIVE_FILE), cols)?;
    for p in &points {
        table.row(&record.data.rescale.to_raw(p))?;
    }
    let cols = table.finish()?;
    let mut manifest = Manifest::new("predict", config, seed);
    manifest.source_run = Some(record.config_hash);
    manifest.add_file(PREDICTIVE_FILE, "posterior predictive draws in raw coordinates", cols);
    manifest.write(&run_dir.join("predictive.manifest.json"))?;
    Ok(Outcome {
        output: run_dir.to_path_buf(),
        passed: true,
    })
}

/// Cox-process intensity summaries in raw coordinates, with the event count
/// taken from the fitted data.
pub fn cox(run_dir: &Path, config: &RunConfig, seed: u64) -> CliResult<Outcome> {
    config.validate()?;
    let (record, chain) = load_run(run_dir)?;
    let grid = config.grid(record.data.dim)?;
    let count = record.data.count;
    let mut rng = chain_rng(seed, COX_STREAM);
    let draws = intensity_draws(&chain, &config.prior, count, &grid, &mut rng)?;
    let raw = DensityGrid {
        grid: grid.clone(),
        draws: draws.values.draws,
        values: draws.raw_values(record.data.jacobian()),
    };
    let summary = pointwise_summary(&raw, &config.quantiles)?;
    let cols = write_summary_table(&run_dir.join(INTENSITY_FILE), &grid, &summary, &record.data, &[1.0], &[""])?;

    let post = mass_posterior(&config.prior, count);
    let sampled_mean = draws.masses.iter().sum::<f64>() / draws.masses.len() as f64;
    let mut manifest = Manifest::new("cox", config, seed);
    manifest.source_run = Some(record.config_hash);
    manifest.details.insert(
        "mass_posterior".into(),
        json!({
            "events": count,
            "shape": post.shape(),
            "rate": post.rate(),
            "mean": post.mean(),
            "variance": post.variance(),
            "sampled_mean": sampled_mean,
        }),
    );
    manifest.add_file(
        INTENSITY_FILE,
        "pointwise intensity summaries per unit of raw coordinates; integrates to the total mass over the raw domain",
        cols,
    );
    manifest.write(&run_dir.join("intensity.manifest.json"))?;
    Ok(Outcome {
        output: run_dir.to_path_buf(),
        passed: true,
    })
}

/// One row of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }
}

/// Runs the numerical verification suite.
pub fn verification_checks(config: &RunConfig) -> CliResult<(Vec<Check>, Vec<TrialReport>)> {
    let mut checks = Vec::new();

    let grid1 = quadrature_grid(1, 256)?;
    let basis1 = BasisSpec::new(MaternHyper::new(0.5, 0.5, 0.8, 1)?, 30)?;
    checks.push(Check::at_most(
        "orthonormality_1d",
        orthonormality_residual(&basis1, &grid1),
        1e-8,
    ));
    let grid2 = quadrature_grid(2, 64)?;
    let basis2 = BasisSpec::new(MaternHyper::new(0.9, 0.1, 1.1, 2)?, 5)?;
    checks.push(Check::at_most(
        "orthonormality_2d",
        orthonormality_residual(&basis2, &grid2),
        1e-8,
    ));

    let p = DensityFunction::new(1, 64, |x| 0.5 + x[0])?;
    let phi = TangentFunction::new(1, 64, |x| SQRT_2 * (PI * x[0]).cos())?;
    let psi = TangentFunction::new(1, 64, |x| SQRT_2 * (2.0 * PI * x[0]).cos())?;
    checks.push(Check::at_most(
        "isometry_residual",
        isometry_residual_across(&p, &phi, &psi, 400)?,
        1e-8,
    ));

    let (norm_err, speed_err) = geodesic_conservation(31, config.verify.trial.seed, 10.0, 1001)?;
    checks.push(Check::at_most("geodesic_norm_drift", norm_err, 1e-10));
    checks.push(Check::at_most("geodesic_speed_drift", speed_err, 1e-10));

    let table = convergence_table(&config.verify.trial, &config.verify.truncations)?;
    for r in &table {
        checks.push(Check::at_most(
            format!("bound_violations_I{}", r.truncation),
            r.bound_violations as f64,
            0.0,
        ));
        if config.verify.trial.speed == 1.0 {
            checks.push(Check::at_most(format!("unit_speed_drift_I{}", r.truncation), r.max_drift, 1e-10));
        }
    }
    let monotone = is_monotone_decreasing(&table);
    checks.push(Check {
        name: "integral_monotone_in_I".into(),
        value: monotone as u8 as f64,
        threshold: 1.0,
        passed: monotone,
    });
    Ok((checks, table))
}

pub fn verify(dir: &Path, config: &RunConfig) -> CliResult<Outcome> {
    let dir = ensure_dir(dir)?;
    let (checks, table) = verification_checks(config)?;

    let mut t = Table::create(
        &dir.join(VERIFY_FILE),
        vec!["check".into(), "value".into(), "threshold".into(), "pass".into()],
    )?;
    for c in &checks {
        t.text_row(&[
            c.name.clone(),
            c.value.to_string(),
            c.threshold.to_string(),
            c.passed.to_string(),
        ])?;
    }
    let verify_cols = t.finish()?;

    let mut t = Table::create(
        &dir.join(CONVERGENCE_FILE),
        ["I", "f0", "max_f", "integral_f", "bound_violations"]
            .map(String::from)
            .to_vec(),
    )?;
    for r in &table {
        t.row(&[
            r.truncation as f64,
            r.f0,
            r.max_f,
            r.integral_f,
            r.bound_violations as f64,
        ])?;
    }
    let conv_cols = t.finish()?;

    let mut manifest = Manifest::new("verify", config, config.verify.trial.seed);
    manifest.add_file(VERIFY_FILE, "numerical checks with pass/fail flags", verify_cols);
    manifest.add_file(
        CONVERGENCE_FILE,
        "truncated geodesic flow gap per truncation level",
        conv_cols,
    );
    manifest.write(&dir.join("verify.manifest.json"))?;
    for c in checks.iter().filter(|c| !c.passed) {
        log::error!("check {} failed: {} > {}", c.name, c.value, c.threshold);
    }
    Ok(Outcome {
        output: dir,
        passed: checks.iter().all(|c| c.passed),
    })
}

/// Writes a synthetic sample as CSV with a manifest beside it.
pub fn generate(recipe: &Synthetic, n: usize, seed: u64, out: &Path, config: &RunConfig) -> CliResult<Outcome> {
    let out = resolve_output(out);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let data = chi2dens::data::generate_synthetic(recipe, n, seed)?;
    let cols = axis_columns(data.dim(), "");
    let mut table = Table::create(&out, cols)?;
    for p in data.points() {
        table.row(p)?;
    }
    let cols = table.finish()?;
    let mut manifest = Manifest::new("generate", config, seed);
    manifest.details.insert(
        "recipe".into(),
        serde_json::to_value(recipe).map_err(|e| numeric(e.to_string()))?,
    );
    manifest.details.insert("n".into(), json!(n));
    let name = out
        .file_name()
        .ok_or_else(|| usage("output path has no file name"))?
        .to_string_lossy()
        .into_owned();
    manifest.add_file(&name, "synthetic points on the unit domain", cols);
    manifest.write(&out.with_extension("manifest.json"))?;
    Ok(Outcome {
        output: out,
        passed: true,
    })
}
