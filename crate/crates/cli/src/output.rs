//! Chain files, manifests and CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chi2dens::data::AffineMap;
use chi2dens::kl_basis::{BasisConfig, BasisSpec};
use chi2dens::spherical_hmc::InitReport;
use chi2dens::Chain;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::failure::{usage, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const FIT_MANIFEST: &str = "manifest.json";

/// Hex SHA-256 of the compact JSON form of the configuration.
pub fn config_hash(config: &RunConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileLayout {
    pub description: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    pub count: usize,
    pub dim: usize,
    pub rescale: AffineMap,
    pub raw_bounds: Vec<(f64, f64)>,
}

impl DataRecord {
    pub fn jacobian(&self) -> f64 {
        self.rescale.jacobian()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainRecord {
    pub file: String,
    pub stored_draws: usize,
    pub accept_rate: f64,
    pub wall_time_secs: f64,
    pub init: InitReport,
}

/// Manifest written next to every set of outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    /// Config hash of the fit whose draws these outputs derive from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_run: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub chains: Vec<ChainRecord>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
    pub files: BTreeMap<String, FileLayout>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, seed: u64) -> Self {
        Self {
            tool: "chi2dens",
            version: VERSION,
            command: command.to_string(),
            seed,
            config_hash: config_hash(config),
            config: config.clone(),
            source_run: None,
            data: None,
            basis: None,
            chains: Vec::new(),
            details: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }

    pub fn add_file(&mut self, name: &str, description: &str, columns: Vec<String>) {
        self.files.insert(
            name.to_string(),
            FileLayout {
                description: description.to_string(),
                columns,
            },
        );
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// The parts of a fit manifest that later subcommands read back.
#[derive(Debug, Clone, Deserialize)]
pub struct FitRecord {
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub data: DataRecord,
    pub basis: BasisConfig,
    pub files: BTreeMap<String, FileLayout>,
}

impl FitRecord {
    pub fn read(run_dir: &Path) -> CliResult<Self> {
        let path = run_dir.join(FIT_MANIFEST);
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    pub fn chain_files(&self) -> Vec<String> {
        self.files.keys().filter(|k| k.starts_with("chain_")).cloned().collect()
    }

    /// Pools the stored draws of every chain file of the run, in file order.
    pub fn load_draws(&self, run_dir: &Path) -> CliResult<Chain> {
        let basis: Arc<BasisSpec> = Arc::new(BasisSpec::try_from(self.basis.clone())?);
        let mut rows = Vec::new();
        for file in self.chain_files() {
            rows.extend(read_chain_csv(&run_dir.join(&file), basis.len())?);
        }
        if rows.is_empty() {
            return Err(usage(format!("run in {} has no stored draws", run_dir.display())));
        }
        Ok(Chain::from_coefficients(basis, rows)?)
    }
}

pub fn chain_columns(b: usize) -> Vec<String> {
    let mut cols = vec!["iteration".to_string(), "log_posterior".to_string()];
    cols.extend((0..b).map(|i| format!("q_{i}")));
    cols
}

pub fn write_chain_csv(path: &Path, chain: &Chain) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(chain_columns(chain.basis.len()))?;
    for ((draw, it), lp) in chain.draws.iter().zip(&chain.draw_iterations).zip(&chain.draw_log_posterior) {
        let mut rec = vec![it.to_string(), lp.to_string()];
        rec.extend(draw.coeffs().as_slice().iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Coefficient rows of a chain file.
pub fn read_chain_csv(path: &Path, b: usize) -> CliResult<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let first = headers
        .iter()
        .position(|h| h == "q_0")
        .ok_or_else(|| usage(format!("{}: no q_0 column", path.display())))?;
    if headers.len() - first != b {
        return Err(usage(format!(
            "{}: expected {b} coefficient columns, found {}",
            path.display(),
            headers.len() - first
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(first)
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Simple numeric table writer.
pub struct Table {
    writer: csv::Writer<fs::File>,
    pub columns: Vec<String>,
}

impl Table {
    pub fn create(path: &Path, columns: Vec<String>) -> CliResult<Self> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(&columns)?;
        Ok(Self { writer, columns })
    }

    pub fn row(&mut self, values: &[f64]) -> CliResult<()> {
        self.writer.write_record(values.iter().map(|v| v.to_string()))?;
        Ok(())
    }

    pub fn text_row(&mut self, values: &[String]) -> CliResult<()> {
        self.writer.write_record(values)?;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<Vec<String>> {
        self.writer.flush()?;
        Ok(self.columns)
    }
}

/// Coordinate column names: `x` in 1D, `x0, x1` in 2D, with a suffix.
pub fn axis_columns(dim: usize, suffix: &str) -> Vec<String> {
    if dim == 1 {
        vec![format!("x{suffix}")]
    } else {
        (0..dim).map(|a| format!("x{a}{suffix}")).collect()
    }
}

pub fn quantile_label(level: f64) -> String {
    format!("q{level}")
}

pub fn ensure_dir(dir: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}
