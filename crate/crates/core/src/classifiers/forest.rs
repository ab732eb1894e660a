//! Random forest: bootstrap-bagged Gini trees with per-split feature sampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Columns, Target, Tree, TreeParams};
use crate::rng::stream_rng;

/// Number of features examined per split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Half,
    All,
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().round() as usize,
            MaxFeatures::Half => d / 2,
            MaxFeatures::All => d,
        };
        m.clamp(1, d.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub k: usize,
}

pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

/// Trees are independent: tree `t` draws its bootstrap and feature samples
/// from stream `t` of `seed`, so the result does not depend on thread count.
pub fn fit_forest(rows: &[Vec<f64>], labels: &[usize], k: usize, params: &ForestParams, seed: u64) -> Forest {
    let data = Columns::from_rows(rows);
    let n = rows.len();
    let tp = TreeParams {
        max_depth: params.max_depth,
        max_features: Some(params.max_features.resolve(data.dim())),
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let mut weights = vec![0.0; n];
            if params.bootstrap {
                for _ in 0..n {
                    weights[rng.random_range(0..n)] += 1.0;
                }
            } else {
                weights.iter_mut().for_each(|w| *w = 1.0);
            }
            let leaf = |idx: &[u32]| {
                let mut v = vec![0.0; k];
                for &i in idx {
                    v[labels[i as usize]] += weights[i as usize];
                }
                let total: f64 = v.iter().sum();
                if total > 0.0 {
                    v.iter_mut().for_each(|x| *x /= total);
                }
                v
            };
            fit_tree(&data, &weights, &Target::Classes { labels, k }, &tp, &leaf, &mut rng)
        })
        .collect();
    Forest { trees, k }
}

impl Forest {
    /// Mean of per-tree leaf class distributions.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.k];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.leaf_value(x)) {
                *a += b;
            }
        }
        let total: f64 = p.iter().sum();
        if total > 0.0 {
            p.iter_mut().for_each(|v| *v /= total);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_zero_single_class_forest() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 1.0]).collect();
        let labels = vec![2; 5];
        let params = ForestParams {
            n_trees: 1,
            max_depth: Some(0),
            max_features: MaxFeatures::All,
            bootstrap: true,
        };
        let f = fit_forest(&rows, &labels, 3, &params, 1);
        for x in [[-10.0, 0.0], [3.0, 1.0], [99.0, 5.0]] {
            assert_eq!(f.predict_proba(&x), vec![0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn deterministic_regardless_of_threads() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 7) as f64, (i % 5) as f64]).collect();
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let params = ForestParams {
            n_trees: 8,
            max_depth: None,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        };
        let a = fit_forest(&rows, &labels, 3, &params, 4);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| fit_forest(&rows, &labels, 3, &params, 4));
        assert_eq!(a, b);
    }

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(63), 8);
        assert_eq!(MaxFeatures::Half.resolve(63), 31);
        assert_eq!(MaxFeatures::All.resolve(63), 63);
        assert_eq!(MaxFeatures::Half.resolve(1), 1);
    }
}
