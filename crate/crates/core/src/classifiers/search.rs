//! Random hyperparameter search scored by stratified k-fold cross-validation.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, train, Algorithm, Hyperparams, MaxFeatures, MlpParams};
use crate::datasets::{ClassLabel, FeatureTable};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};
use crate::subsets::SubsetSpec;

pub const CV_FOLDS: usize = 3;

/// Per-algorithm sampling domains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum SearchSpace {
    Knn {
        k: Vec<usize>,
    },
    RandomForest {
        n_trees: Vec<usize>,
        max_depth: Vec<Option<usize>>,
        max_features: Vec<MaxFeatures>,
    },
    GradientBoosting {
        n_trees: Vec<usize>,
        /// Sampled log-uniformly between the bounds.
        learning_rate: (f64, f64),
        max_depth: Vec<usize>,
    },
    Mlp {
        points: Vec<MlpParams>,
    },
}

impl SearchSpace {
    /// Default domains: odd k up to 31; 100-500 trees with depth 4-24 or
    /// unbounded; 50-400 boosting rounds at rates in [0.01, 0.3], depth 2-6.
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Knn => SearchSpace::Knn {
                k: (1..=31).step_by(2).collect(),
            },
            Algorithm::RandomForest => SearchSpace::RandomForest {
                n_trees: (100..=500).step_by(50).collect(),
                max_depth: (4..=24).map(Some).chain([None]).collect(),
                max_features: vec![MaxFeatures::Sqrt, MaxFeatures::Half, MaxFeatures::All],
            },
            Algorithm::GradientBoosting => SearchSpace::GradientBoosting {
                n_trees: (50..=400).step_by(50).collect(),
                learning_rate: (0.01, 0.3),
                max_depth: (2..=6).collect(),
            },
            Algorithm::Mlp => SearchSpace::Mlp {
                points: vec![MlpParams::default()],
            },
        }
    }

    /// A space containing exactly `hp`.
    pub fn single(hp: &Hyperparams) -> Self {
        match hp.clone() {
            Hyperparams::Knn { k } => SearchSpace::Knn { k: vec![k] },
            Hyperparams::RandomForest {
                n_trees,
                max_depth,
                max_features,
            } => SearchSpace::RandomForest {
                n_trees: vec![n_trees],
                max_depth: vec![max_depth],
                max_features: vec![max_features],
            },
            Hyperparams::GradientBoosting {
                n_trees,
                learning_rate,
                max_depth,
            } => SearchSpace::GradientBoosting {
                n_trees: vec![n_trees],
                learning_rate: (learning_rate, learning_rate),
                max_depth: vec![max_depth],
            },
            Hyperparams::Mlp(p) => SearchSpace::Mlp { points: vec![p] },
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            SearchSpace::Knn { .. } => Algorithm::Knn,
            SearchSpace::RandomForest { .. } => Algorithm::RandomForest,
            SearchSpace::GradientBoosting { .. } => Algorithm::GradientBoosting,
            SearchSpace::Mlp { .. } => Algorithm::Mlp,
        }
    }

    fn validate(&self) -> Result<()> {
        let empty = match self {
            SearchSpace::Knn { k } => k.is_empty(),
            SearchSpace::RandomForest {
                n_trees,
                max_depth,
                max_features,
            } => n_trees.is_empty() || max_depth.is_empty() || max_features.is_empty(),
            SearchSpace::GradientBoosting {
                n_trees,
                learning_rate,
                max_depth,
            } => {
                n_trees.is_empty()
                    || max_depth.is_empty()
                    || !(learning_rate.0 > 0.0 && learning_rate.0 <= learning_rate.1)
            }
            SearchSpace::Mlp { points } => points.is_empty(),
        };
        if empty {
            return Err(Error::InvalidParameter("search space has an empty domain".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Hyperparams {
        match self {
            SearchSpace::Knn { k } => Hyperparams::Knn {
                k: *k.choose(rng).expect("validated"),
            },
            SearchSpace::RandomForest {
                n_trees,
                max_depth,
                max_features,
            } => Hyperparams::RandomForest {
                n_trees: *n_trees.choose(rng).expect("validated"),
                max_depth: *max_depth.choose(rng).expect("validated"),
                max_features: *max_features.choose(rng).expect("validated"),
            },
            SearchSpace::GradientBoosting {
                n_trees,
                learning_rate: (lo, hi),
                max_depth,
            } => {
                let n = *n_trees.choose(rng).expect("validated");
                let lr = if lo == hi {
                    *lo
                } else {
                    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
                };
                Hyperparams::GradientBoosting {
                    n_trees: n,
                    learning_rate: lr,
                    max_depth: *max_depth.choose(rng).expect("validated"),
                }
            }
            SearchSpace::Mlp { points } => Hyperparams::Mlp(points.choose(rng).expect("validated").clone()),
        }
    }
}

/// Fold id per row: each class is shuffled and dealt round-robin.
pub fn stratified_folds(features: &FeatureTable, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let mut assignment = vec![0; features.len()];
    let mut r = rng(seed);
    for label in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..features.len())
            .filter(|&i| features.rows[i].label == label)
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(Error::FoldConstruction {
                class: label.as_str(),
                count: members.len(),
                folds,
            });
        }
        members.shuffle(&mut r);
        for (pos, i) in members.into_iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

/// Mean CV accuracy of one hyperparameter setting.
pub fn cross_validate(
    features: &FeatureTable,
    subset: &SubsetSpec,
    hp: &Hyperparams,
    folds: &[usize],
    n_folds: usize,
    seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for f in 0..n_folds {
        let (mut tr, mut va) = (Vec::new(), Vec::new());
        for (row, &fold) in features.rows.iter().zip(folds) {
            if fold == f {
                va.push(row.clone());
            } else {
                tr.push(row.clone());
            }
        }
        let model = train(&features.with_rows(tr), subset, hp, derive_seed(seed, f as u64))?;
        total += evaluate(&model, &features.with_rows(va))?.accuracy;
    }
    Ok(total / n_folds as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub best: Hyperparams,
    pub best_score: f64,
    /// Every sampled trial with its mean CV accuracy, in sampling order.
    pub trials: Vec<(Hyperparams, f64)>,
}

/// Samples `n_trials` settings, scores each by 3-fold stratified CV and keeps
/// the best. Ties go to the earliest trial.
pub fn random_search_cv(
    features: &FeatureTable,
    subset: &SubsetSpec,
    space: &SearchSpace,
    n_trials: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("n_trials must be at least 1".into()));
    }
    space.validate()?;
    let folds = stratified_folds(features, CV_FOLDS, derive_seed(seed, 0))?;
    let mut sampler = rng(derive_seed(seed, 1));
    let candidates: Vec<Hyperparams> = (0..n_trials).map(|_| space.sample(&mut sampler)).collect();
    let scores = candidates
        .par_iter()
        .enumerate()
        .map(|(t, hp)| cross_validate(features, subset, hp, &folds, CV_FOLDS, derive_seed(seed, 100 + t as u64)))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok(SearchOutcome {
        best: candidates[best].clone(),
        best_score: scores[best],
        trials: candidates.into_iter().zip(scores).collect(),
    })
}
