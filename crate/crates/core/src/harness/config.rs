use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{Algorithm, Hyperparams, MlpParams, SearchSpace};
use crate::error::{Error, Result};
use crate::subsets::{manual_families, SubsetSpec};

/// A grid run, normally loaded from TOML:
///
/// ```toml
/// manifest = "data/manifest.csv"
/// output_dir = "out"
/// subsets = ["all", "first:28", "last:33"]
/// algorithms = ["knn", "random_forest", "gradient_boosting", "mlp"]
/// qualities = [90, 70, 50, 30]
/// seed = 7
/// search_trials = 10
/// ```
///
/// `subsets` also accepts `"manual"`, which expands to every first-k,
/// last-t and centered family. Relative paths resolve against the config
/// file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    pub subsets: Vec<String>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_qualities")]
    pub qualities: Vec<i64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub search_trials: usize,
    /// Add POS-LIME and ABS-LIME subsets derived from an MLP on all features.
    #[serde(default = "default_true")]
    pub lime: bool,
    #[serde(default = "default_lime_samples")]
    pub lime_samples: usize,
    /// Replaces the default search space of the listed algorithms.
    #[serde(default)]
    pub search: Vec<SearchSpace>,
    /// Defaults to `<output_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn default_qualities() -> Vec<i64> {
    vec![90, 70, 50, 30]
}

fn default_trials() -> usize {
    10
}

fn default_true() -> bool {
    true
}

fn default_lime_samples() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn new(manifest: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            output_dir: output_dir.into(),
            subsets: vec!["all".into()],
            algorithms: Algorithm::ALL.to_vec(),
            qualities: default_qualities(),
            seed: 0,
            search_trials: default_trials(),
            lime: true,
            lime_samples: default_lime_samples(),
            search: Vec::new(),
            cache_dir: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.manifest = base.join(&cfg.manifest);
        cfg.output_dir = base.join(&cfg.output_dir);
        cfg.cache_dir = cfg.cache_dir.map(|c| base.join(c));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.subsets.is_empty() || self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("subsets and algorithms must be non-empty".into()));
        }
        if let Some(q) = self.qualities.iter().find(|q| !(1..=100).contains(*q)) {
            return Err(Error::QualityOutOfRange(*q));
        }
        if self.search_trials == 0 {
            return Err(Error::InvalidParameter("search_trials must be at least 1".into()));
        }
        self.subset_specs()?;
        Ok(())
    }

    /// Parsed manual subsets, in config order, duplicates removed.
    pub fn subset_specs(&self) -> Result<Vec<SubsetSpec>> {
        let mut out: Vec<SubsetSpec> = Vec::new();
        for s in &self.subsets {
            let specs = if s.trim() == "manual" {
                manual_families()
            } else {
                vec![SubsetSpec::parse(s)?]
            };
            for spec in specs {
                if spec.is_empty() {
                    return Err(Error::InvalidSubset(format!("{s} is empty")));
                }
                if !out.iter().any(|o| o.name() == spec.name()) {
                    out.push(spec);
                }
            }
        }
        Ok(out)
    }

    pub fn search_space(&self, algorithm: Algorithm) -> SearchSpace {
        self.search
            .iter()
            .find(|s| s.algorithm() == algorithm)
            .cloned()
            .unwrap_or_else(|| SearchSpace::default_for(algorithm))
    }

    /// Settings of the MLP used for LIME: the first point of its search space.
    pub fn lime_mlp(&self) -> Hyperparams {
        match self.search_space(Algorithm::Mlp) {
            SearchSpace::Mlp { points } => Hyperparams::Mlp(points.into_iter().next().unwrap_or_default()),
            _ => Hyperparams::Mlp(MlpParams::default()),
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }
}
