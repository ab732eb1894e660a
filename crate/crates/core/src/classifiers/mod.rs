//! K-NN, random forest, gradient boosting and MLP classifiers behind one
//! model type, with standardization, persistence and evaluation.

pub mod boosting;
pub mod forest;
pub mod knn;
pub mod metrics;
pub mod mlp;
pub mod search;
pub mod standardize;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::datasets::{ClassLabel, FeatureTable};
use crate::error::{Error, Result};
use crate::features::BetaVector;
use crate::subsets::{column_positions, project, SubsetSpec};

pub use boosting::Booster;
pub use forest::{Forest, MaxFeatures};
pub use knn::Knn;
pub use metrics::EvalMetrics;
pub use mlp::{argmax, Gradients, Mlp, MlpParams};
pub use search::{random_search_cv, SearchOutcome, SearchSpace};
pub use standardize::Standardizer;

/// Current model file format.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Knn,
    #[serde(alias = "rf")]
    RandomForest,
    #[serde(alias = "gb")]
    GradientBoosting,
    #[serde(alias = "nn")]
    Mlp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Knn,
        Algorithm::RandomForest,
        Algorithm::GradientBoosting,
        Algorithm::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::RandomForest => "random_forest",
            Algorithm::GradientBoosting => "gradient_boosting",
            Algorithm::Mlp => "mlp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "knn" | "k_nn" => Ok(Algorithm::Knn),
            "rf" | "random_forest" => Ok(Algorithm::RandomForest),
            "gb" | "gbm" | "gradient_boosting" => Ok(Algorithm::GradientBoosting),
            "mlp" | "nn" => Ok(Algorithm::Mlp),
            other => Err(Error::InvalidParameter(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Algorithm-specific hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Hyperparams {
    Knn {
        k: usize,
    },
    RandomForest {
        n_trees: usize,
        max_depth: Option<usize>,
        max_features: MaxFeatures,
    },
    GradientBoosting {
        n_trees: usize,
        learning_rate: f64,
        max_depth: usize,
    },
    Mlp(MlpParams),
}

impl Hyperparams {
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Knn => Hyperparams::Knn { k: 5 },
            Algorithm::RandomForest => Hyperparams::RandomForest {
                n_trees: 100,
                max_depth: None,
                max_features: MaxFeatures::Sqrt,
            },
            Algorithm::GradientBoosting => Hyperparams::GradientBoosting {
                n_trees: 100,
                learning_rate: 0.1,
                max_depth: 3,
            },
            Algorithm::Mlp => Hyperparams::Mlp(MlpParams::default()),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Hyperparams::Knn { .. } => Algorithm::Knn,
            Hyperparams::RandomForest { .. } => Algorithm::RandomForest,
            Hyperparams::GradientBoosting { .. } => Algorithm::GradientBoosting,
            Hyperparams::Mlp(_) => Algorithm::Mlp,
        }
    }

    /// Flat name -> value view, for logs and reports.
    pub fn describe(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        match self {
            Hyperparams::Knn { k } => {
                m.insert("k".into(), k.to_string());
            }
            Hyperparams::RandomForest {
                n_trees,
                max_depth,
                max_features,
            } => {
                m.insert("n_trees".into(), n_trees.to_string());
                m.insert(
                    "max_depth".into(),
                    max_depth.map_or("none".into(), |d| d.to_string()),
                );
                m.insert("max_features".into(), format!("{max_features:?}").to_lowercase());
            }
            Hyperparams::GradientBoosting {
                n_trees,
                learning_rate,
                max_depth,
            } => {
                m.insert("n_trees".into(), n_trees.to_string());
                m.insert("learning_rate".into(), format!("{learning_rate:.6}"));
                m.insert("max_depth".into(), max_depth.to_string());
            }
            Hyperparams::Mlp(p) => {
                m.insert("hidden".into(), format!("{:?}", p.hidden));
                m.insert("batch_size".into(), p.batch_size.to_string());
                m.insert("learning_rate".into(), p.learning_rate.to_string());
                m.insert("max_epochs".into(), p.max_epochs.to_string());
                m.insert("patience".into(), p.patience.to_string());
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "snake_case")]
pub enum ModelState {
    Knn(Knn),
    RandomForest(Forest),
    GradientBoosting(Booster),
    Mlp(Mlp),
}

/// A fitted classifier. Immutable after training and safe to share.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub algorithm: Algorithm,
    pub subset: SubsetSpec,
    pub standardizer: Standardizer,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub state: ModelState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub label: ClassLabel,
    pub scores: [f64; 3],
}

impl Prediction {
    fn from_scores(s: &[f64]) -> Self {
        let scores = [s[0], s[1], s[2]];
        Prediction {
            label: ClassLabel::from_ordinal(argmax(&scores)).expect("three classes"),
            scores,
        }
    }
}

/// Fits the standardizer on the subset-projected rows, then the algorithm
/// named by `hyperparams`.
pub fn train(features: &FeatureTable, subset: &SubsetSpec, hyperparams: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset(format!("subset {} is empty", subset.name())));
    }
    let present = features.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::SingleClass);
    }
    let projected = project(features, subset)?;
    let raw: Vec<Vec<f64>> = projected.rows.iter().map(|r| r.x.clone()).collect();
    let labels: Vec<usize> = projected.rows.iter().map(|r| r.label.ordinal()).collect();
    let standardizer = Standardizer::fit(&raw);
    let rows = standardizer.transform_all(&raw);
    let state = match hyperparams {
        Hyperparams::Knn { k } => {
            if *k == 0 {
                return Err(Error::InvalidParameter("k must be positive".into()));
            }
            ModelState::Knn(Knn::new(*k, rows, labels, 3))
        }
        Hyperparams::RandomForest {
            n_trees,
            max_depth,
            max_features,
        } => ModelState::RandomForest(forest::fit_forest(
            &rows,
            &labels,
            3,
            &forest::ForestParams {
                n_trees: *n_trees,
                max_depth: *max_depth,
                max_features: *max_features,
                bootstrap: true,
            },
            seed,
        )),
        Hyperparams::GradientBoosting {
            n_trees,
            learning_rate,
            max_depth,
        } => ModelState::GradientBoosting(boosting::fit_booster(
            &rows,
            &labels,
            3,
            &boosting::BoostParams {
                n_trees: *n_trees,
                learning_rate: *learning_rate,
                max_depth: *max_depth,
            },
        )),
        Hyperparams::Mlp(p) => {
            let (net, log) = mlp::fit_mlp(&rows, &labels, 3, p, seed);
            log::debug!("mlp stopped after {} epochs (val acc {:?})", log.epochs, log.best_validation_accuracy);
            ModelState::Mlp(net)
        }
    };
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        algorithm: hyperparams.algorithm(),
        subset: subset.clone(),
        standardizer,
        hyperparams: hyperparams.clone(),
        seed,
        state,
    })
}

impl TrainedModel {
    /// Class scores for an already projected and standardized input.
    pub fn scores_standardized(&self, z: &[f64]) -> Vec<f64> {
        match &self.state {
            ModelState::Knn(m) => m.vote_fractions(z),
            ModelState::RandomForest(m) => m.predict_proba(z),
            ModelState::GradientBoosting(m) => m.predict_proba(z),
            ModelState::Mlp(m) => m.predict_one(z),
        }
    }

    /// Scores for a projected (subset-only, unscaled) input.
    pub fn scores_projected(&self, x: &[f64]) -> Vec<f64> {
        self.scores_standardized(&self.standardizer.transform(x))
    }

    /// Selects this model's subset from a row whose columns are `columns`.
    pub fn project_input(&self, columns: &[usize], x: &[f64]) -> Result<Vec<f64>> {
        Ok(column_positions(columns, &self.subset)?
            .into_iter()
            .map(|c| x[c])
            .collect())
    }

    pub fn predict_row(&self, columns: &[usize], x: &[f64]) -> Result<Prediction> {
        Ok(Prediction::from_scores(&self.scores_projected(&self.project_input(columns, x)?)))
    }

    /// MLP probabilities for many projected inputs at once.
    pub fn mlp_batch_scores(&self, rows: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
        let ModelState::Mlp(net) = &self.state else {
            return None;
        };
        let d = self.standardizer.dim();
        let mut flat = Vec::with_capacity(rows.len() * d);
        for r in rows {
            flat.extend(self.standardizer.transform(r));
        }
        let view = ArrayView2::from_shape((rows.len(), d), &flat).ok()?;
        Some(net.predict_proba(view).rows().into_iter().map(|r| r.to_vec()).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let probe: serde_json::Value = serde_json::from_str(&text)?;
        let version = probe.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(version));
        }
        Ok(serde_json::from_value(probe)?)
    }
}

/// Label and class scores for a full 63-entry feature vector.
pub fn predict(model: &TrainedModel, x: &BetaVector) -> Prediction {
    let all: Vec<usize> = (1..=63).collect();
    model
        .predict_row(&all, x.as_slice())
        .expect("full vectors contain every subset index")
}

pub fn evaluate(model: &TrainedModel, test: &FeatureTable) -> Result<EvalMetrics> {
    if test.is_empty() {
        return Err(Error::EmptyTest);
    }
    let pairs = test
        .rows
        .iter()
        .map(|r| Ok((r.label, model.predict_row(&test.indices, &r.x)?.label)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalMetrics::from_pairs(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::FeatureRow;
    use crate::rng::rng;
    use rand::Rng;

    fn blobs(n_per: usize, seed: u64) -> FeatureTable {
        let mut r = rng(seed);
        let mut rows = Vec::new();
        for i in 0..3 * n_per {
            let label = ClassLabel::ALL[i % 3];
            let c = label.ordinal() as f64;
            let x = (0..63).map(|f| if f < 5 { c * 4.0 + r.random_range(-1.0..1.0) } else { r.random_range(0.0..1.0) }).collect();
            rows.push(FeatureRow { id: format!("{i}"), label, x });
        }
        FeatureTable::full(rows).unwrap()
    }

    #[test]
    fn knn_one_memorizes_training_set() {
        let t = blobs(30, 1);
        let m = train(&t, &SubsetSpec::all(), &Hyperparams::Knn { k: 1 }, 0).unwrap();
        assert_eq!(evaluate(&m, &t).unwrap().accuracy, 1.0);
    }

    #[test]
    fn single_class_and_empty_subset_are_rejected() {
        let mut t = blobs(5, 2);
        let empty = SubsetSpec::new("none", []).unwrap();
        assert!(matches!(train(&t, &empty, &Hyperparams::Knn { k: 1 }, 0), Err(Error::InvalidSubset(_))));
        t.rows.retain(|r| r.label == ClassLabel::Gan);
        assert!(matches!(train(&t, &SubsetSpec::all(), &Hyperparams::Knn { k: 1 }, 0), Err(Error::SingleClass)));
    }

    #[test]
    fn every_algorithm_is_deterministic_and_normalized() {
        let t = blobs(20, 3);
        let test = blobs(5, 4);
        for alg in Algorithm::ALL {
            let hp = match Hyperparams::default_for(alg) {
                Hyperparams::Mlp(p) => Hyperparams::Mlp(MlpParams { max_epochs: 5, ..p }),
                Hyperparams::RandomForest { max_depth, max_features, .. } => {
                    Hyperparams::RandomForest { n_trees: 10, max_depth, max_features }
                }
                other => other,
            };
            let a = train(&t, &SubsetSpec::all(), &hp, 9).unwrap();
            let b = train(&t, &SubsetSpec::all(), &hp, 9).unwrap();
            for r in &test.rows {
                let beta = BetaVector::from_slice(&r.x).unwrap();
                let (pa, pb) = (predict(&a, &beta), predict(&b, &beta));
                assert_eq!(pa, pb, "{alg}");
                assert!((pa.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{alg}");
            }
        }
    }

    #[test]
    fn model_file_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let t = blobs(10, 5);
        let m = train(&t, &crate::subsets::first_k(6).unwrap(), &Hyperparams::Knn { k: 3 }, 1).unwrap();
        let p = dir.path().join("m.json");
        m.save(&p).unwrap();
        assert_eq!(TrainedModel::load(&p).unwrap(), m);
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        v["version"] = serde_json::json!(99);
        std::fs::write(&p, v.to_string()).unwrap();
        assert!(matches!(TrainedModel::load(&p), Err(Error::ModelVersion(99))));
    }

    #[test]
    fn evaluate_on_empty_set_fails() {
        let t = blobs(5, 6);
        let m = train(&t, &SubsetSpec::all(), &Hyperparams::Knn { k: 1 }, 0).unwrap();
        assert!(matches!(evaluate(&m, &t.with_rows(vec![])), Err(Error::EmptyTest)));
    }

    #[test]
    fn projected_tables_are_accepted() {
        let t = blobs(10, 7);
        let s = crate::subsets::first_k(5).unwrap();
        let m = train(&t, &s, &Hyperparams::Knn { k: 1 }, 0).unwrap();
        let p = project(&t, &s).unwrap();
        assert_eq!(evaluate(&m, &p).unwrap(), evaluate(&m, &t).unwrap());
    }

    #[test]
    fn algorithm_names_parse() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("rf".parse::<Algorithm>().unwrap(), Algorithm::RandomForest);
        assert!("svm".parse::<Algorithm>().is_err());
    }
}
