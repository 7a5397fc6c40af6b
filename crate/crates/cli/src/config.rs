//! Run configuration: one JSON document, with command-line flags overriding
//! individual keys.

use std::fs;
use std::path::{Path, PathBuf};

use chi2dens::cox_process::GammaPrior;
use chi2dens::data::{generate_synthetic, ingest_csv, Dataset, Synthetic};
use chi2dens::fisher_checks::TrialConfig;
use chi2dens::kl_basis::{BasisSpec, MaternHyper};
use chi2dens::posterior_analysis::{UniformGrid, DEFAULT_QUANTILES};
use chi2dens::ChainConfig;
use serde::{Deserialize, Serialize};

use crate::failure::{io, usage, CliResult};

/// Environment variable naming the directory that relative output paths are
/// resolved against.
pub const OUTPUT_ROOT_ENV: &str = "CHI2DENS_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        dim: usize,
    },
    Synthetic {
        recipe: Synthetic,
        n: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            recipe: Synthetic::Beta { a: 2.0, b: 2.0 },
            n: 1000,
            seed: 0,
        }
    }
}

impl DataSource {
    pub fn dim(&self) -> usize {
        match self {
            DataSource::Csv { dim, .. } => *dim,
            DataSource::Synthetic { recipe, .. } => recipe.dim(),
        }
    }

    pub fn load(&self) -> CliResult<Dataset> {
        Ok(match self {
            DataSource::Csv { path, dim } => ingest_csv(path, *dim)?,
            DataSource::Synthetic { recipe, n, seed } => generate_synthetic(recipe, *n, *seed)?,
        })
    }
}

/// Prior hyperparameters and truncation. `max_index` defaults to 30 in one
/// dimension and 5 per axis in two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSettings {
    pub sigma: f64,
    pub alpha: f64,
    pub s: f64,
    pub max_index: Option<usize>,
}

impl Default for BasisSettings {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            alpha: 1.0,
            s: 1.0,
            max_index: None,
        }
    }
}

impl BasisSettings {
    pub fn build(&self, dim: usize) -> CliResult<BasisSpec> {
        let hyper = MaternHyper::new(self.sigma, self.alpha, self.s, dim)?;
        let max_index = self.max_index.unwrap_or(if dim == 1 { 30 } else { 5 });
        Ok(BasisSpec::new(hyper, max_index)?)
    }
}

/// Settings for the `verify` suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub trial: TrialConfig,
    pub truncations: Vec<usize>,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            trial: TrialConfig::default(),
            truncations: vec![10, 20, 40, 80],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub basis: BasisSettings,
    pub chain: ChainConfig,
    pub chains: usize,
    /// Grid points per axis for summaries; 512 in 1D and 128 in 2D if unset.
    pub grid_points: Option<usize>,
    pub quantiles: Vec<f64>,
    pub output_dir: PathBuf,
    pub prior: GammaPrior,
    pub predict_count: usize,
    /// Also write the per-draw density grid when summarizing.
    pub write_draw_grid: bool,
    pub verify: VerifySettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            basis: BasisSettings::default(),
            chain: ChainConfig::default(),
            chains: 1,
            grid_points: None,
            quantiles: DEFAULT_QUANTILES.to_vec(),
            output_dir: PathBuf::from("chi2dens-run"),
            prior: GammaPrior::default(),
            predict_count: 1000,
            write_draw_grid: false,
            verify: VerifySettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.chain.validate()?;
        if self.chains == 0 {
            return Err(usage("chains must be at least 1"));
        }
        if self.quantiles.is_empty() {
            return Err(usage("quantile list is empty"));
        }
        if let Some(q) = self.quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(usage(format!("quantile {q} outside [0, 1]")));
        }
        if let DataSource::Csv { path, dim } = &self.data {
            if !path.exists() {
                return Err(io(format!("data file {} does not exist", path.display())));
            }
            if *dim != 1 && *dim != 2 {
                return Err(usage(format!("dimension must be 1 or 2, got {dim}")));
            }
        }
        self.basis.build(self.data.dim())?;
        self.grid(self.data.dim())?;
        Ok(())
    }

    pub fn grid(&self, dim: usize) -> CliResult<UniformGrid> {
        Ok(match self.grid_points {
            Some(n) => UniformGrid::new(dim, n)?,
            None => UniformGrid::default_for(dim)?,
        })
    }

    /// Output directory, resolved against the output root when relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        resolve_output(&self.output_dir)
    }
}

pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        assert_eq!(c.basis.build(1).unwrap().len(), 31);
        assert_eq!(c.basis.build(2).unwrap().len(), 36);
    }

    #[test]
    fn partial_documents_merge_with_defaults() {
        let c: RunConfig = serde_json::from_str(
            r#"{"chain": {"iterations": 50, "burn_in": 10},
                "data": {"source": "synthetic", "recipe": {"name": "noisy_circle_2d",
                         "center": [0.5, 0.5], "radius": 0.3, "noise": 0.03}, "n": 20}}"#,
        )
        .unwrap();
        assert_eq!(c.chain.iterations, 50);
        assert_eq!(c.chain.leapfrog_steps, ChainConfig::default().leapfrog_steps);
        assert_eq!(c.data.dim(), 2);
        assert_eq!(c.data.load().unwrap().len(), 20);
    }

    #[test]
    fn invalid_documents_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"chian": {}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"chain": {"burn_in": 20000}}"#).is_err());
        let c = RunConfig {
            quantiles: vec![],
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            data: DataSource::Csv {
                path: "/nonexistent/file.csv".into(),
                dim: 1,
            },
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
