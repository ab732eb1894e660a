//! Multiclass gradient boosting with a softmax link: one regression tree per
//! class per round, leaves set by a single Newton step on the multinomial
//! deviance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Columns, Target, Tree, TreeParams};
use crate::rng::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub init: Vec<f64>,
    /// `rounds[r][k]` is the class-`k` tree of round `r`.
    pub rounds: Vec<Vec<Tree>>,
    pub learning_rate: f64,
    pub k: usize,
}

pub struct BoostParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn fit_booster(rows: &[Vec<f64>], labels: &[usize], k: usize, params: &BoostParams) -> Booster {
    let n = rows.len();
    let data = Columns::from_rows(rows);
    let mut counts = vec![0.0; k];
    for &y in labels {
        counts[y] += 1.0;
    }
    // Log-priors; absent classes get a large negative start instead of -inf.
    let init: Vec<f64> = counts
        .iter()
        .map(|&c| if c > 0.0 { (c / n as f64).ln() } else { -30.0 })
        .collect();
    let mut scores: Vec<Vec<f64>> = vec![init.clone(); n];
    let weights = vec![1.0; n];
    let tp = TreeParams {
        max_depth: Some(params.max_depth),
        max_features: None,
    };
    let factor = (k as f64 - 1.0) / k as f64;
    let mut rounds = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let probs: Vec<Vec<f64>> = scores.iter().map(|s| softmax(s)).collect();
        let trees: Vec<Tree> = (0..k)
            .into_par_iter()
            .map(|c| {
                let resid: Vec<f64> = (0..n)
                    .map(|i| f64::from(u8::from(labels[i] == c)) - probs[i][c])
                    .collect();
                let leaf = |idx: &[u32]| {
                    let (mut num, mut den) = (0.0, 0.0);
                    for &i in idx {
                        let r = resid[i as usize];
                        num += r;
                        den += r.abs() * (1.0 - r.abs());
                    }
                    vec![if den.abs() < 1e-150 { 0.0 } else { factor * num / den }]
                };
                // No randomness: all rows, all features.
                fit_tree(&data, &weights, &Target::Values { y: &resid }, &tp, &leaf, &mut rng(0))
            })
            .collect();
        for (i, row) in rows.iter().enumerate() {
            for (c, t) in trees.iter().enumerate() {
                scores[i][c] += params.learning_rate * t.leaf_value(row)[0];
            }
        }
        rounds.push(trees);
    }
    Booster {
        init,
        rounds,
        learning_rate: params.learning_rate,
        k,
    }
}

impl Booster {
    pub fn decision(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.init.clone();
        for trees in &self.rounds {
            for (c, t) in trees.iter().enumerate() {
                s[c] += self.learning_rate * t.leaf_value(x)[0];
            }
        }
        s
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.decision(x))
    }
}
