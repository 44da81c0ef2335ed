//! Experiment configuration files (JSON) and dataset sources.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cascade::{Consensus, RuntimeConfig, DEFAULT_RUNTIME_GRID};
use crate::classifiers::{ClassifierKind, ClassifierSpec, TrainConfig};
use crate::datasets::{generate_blobs, load_csv, load_idx, BlobConfig, CsvSchema, Dataset};
use crate::ensemble::{BuildConfig, SelectionRule};
use crate::error::{Error, Result};
use crate::metrics::{DEFAULT_ECE_BINS, DEFAULT_HISTOGRAM_BINS};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Blobs(BlobConfig),
    Csv {
        path: PathBuf,
        #[serde(default)]
        num_classes: Option<usize>,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
}

impl DataSource {
    /// Loads the dataset; relative paths resolve against `base_dir`.
    pub fn load<T: Scalar>(&self, base_dir: &Path) -> Result<Dataset<T>> {
        match self {
            DataSource::Blobs(cfg) => generate_blobs(cfg),
            DataSource::Csv { path, num_classes } => load_csv(
                &base_dir.join(path),
                &CsvSchema {
                    num_classes: *num_classes,
                },
            ),
            DataSource::Idx { images, labels } => load_idx(&base_dir.join(images), &base_dir.join(labels)),
        }
    }

    /// Parses a command-line data argument:
    /// `idx:<images>,<labels>`, a `.csv` file, or a `.json` file holding
    /// either a data source or a whole experiment config.
    pub fn resolve_arg(arg: &str) -> Result<(DataSource, PathBuf)> {
        if let Some(rest) = arg.strip_prefix("idx:") {
            let (images, labels) = rest
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("expected idx:<images>,<labels>, got '{arg}'")))?;
            return Ok((
                DataSource::Idx {
                    images: images.into(),
                    labels: labels.into(),
                },
                PathBuf::from("."),
            ));
        }
        let path = Path::new(arg);
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok((
                DataSource::Csv {
                    path: path.file_name().map(PathBuf::from).unwrap_or_default(),
                    num_classes: None,
                },
                base,
            )),
            Some("json") => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let value: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{arg}: {e}")))?;
                let block = value.get("dataset").cloned().unwrap_or(value);
                let source = serde_json::from_value(block).map_err(|e| Error::Config(format!("{arg}: {e}")))?;
                Ok((source, base))
            }
            _ => Err(Error::Config(format!(
                "cannot tell the format of '{arg}' (use .csv, .json or idx:<images>,<labels>)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierBlock {
    pub kind: ClassifierKind,
    #[serde(default)]
    pub hidden_units: usize,
    #[serde(default)]
    pub seed: u64,
    /// Taken from the dataset when absent.
    #[serde(default)]
    pub input_dim: Option<usize>,
    #[serde(default)]
    pub num_classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildBlock {
    pub num_members: usize,
    #[serde(default)]
    pub training_thresholds: Vec<f64>,
    pub selection_rule: SelectionRule,
    pub classifier: ClassifierBlock,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub min_subset_size: Option<usize>,
    #[serde(default)]
    pub histogram_bins: Option<usize>,
}

impl BuildBlock {
    pub fn to_build_config<T: Scalar>(&self, data: &Dataset<T>) -> Result<BuildConfig> {
        let cfg = BuildConfig {
            num_members: self.num_members,
            training_thresholds: self.training_thresholds.clone(),
            selection_rule: self.selection_rule,
            classifier: ClassifierSpec {
                kind: self.classifier.kind,
                input_dim: self.classifier.input_dim.unwrap_or(data.feature_dim()),
                num_classes: self.classifier.num_classes.unwrap_or(data.num_classes()),
                hidden_units: self.classifier.hidden_units,
                seed: self.classifier.seed,
            },
            train: self.train.clone(),
            min_subset_size: self.min_subset_size,
            histogram_bins: self.histogram_bins.unwrap_or(DEFAULT_HISTOGRAM_BINS),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsBlock {
    #[serde(default = "default_ece_bins")]
    pub ece_bins: usize,
    #[serde(default = "default_histogram_bins")]
    pub histogram_bins: usize,
}

fn default_ece_bins() -> usize {
    DEFAULT_ECE_BINS
}

fn default_histogram_bins() -> usize {
    DEFAULT_HISTOGRAM_BINS
}

impl Default for MetricsBlock {
    fn default() -> Self {
        MetricsBlock {
            ece_bins: DEFAULT_ECE_BINS,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DataSource,
    pub build: BuildBlock,
    /// Empty means the default grid under both consensus heuristics.
    #[serde(default)]
    pub runtime_sweep: Vec<RuntimeConfig>,
    #[serde(default)]
    pub metrics: MetricsBlock,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.runtime_sweep {
            r.validate(self.build.num_members)?;
        }
        if self.metrics.ece_bins == 0 || self.metrics.histogram_bins == 0 {
            return Err(Error::Config("metric bin counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn runtime_sweep(&self) -> Vec<RuntimeConfig> {
        if self.runtime_sweep.is_empty() {
            default_runtime_sweep(self.build.num_members)
        } else {
            self.runtime_sweep.clone()
        }
    }
}

/// Every default grid value, applied homogeneously, under both heuristics.
pub fn default_runtime_sweep(members: usize) -> Vec<RuntimeConfig> {
    [Consensus::LastMember, Consensus::MostConfident]
        .into_iter()
        .flat_map(|c| {
            DEFAULT_RUNTIME_GRID
                .iter()
                .map(move |&t| RuntimeConfig::homogeneous(t, members, c))
        })
        .collect()
}
