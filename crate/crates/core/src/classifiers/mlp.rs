//! Fully connected ReLU network with a softmax output, trained with Adam on
//! mean cross-entropy.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datasets::{split_train_test, ClassLabel, Labeled};
use crate::rng::{rng, stream_rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs x outputs`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Gradients with the same shapes as the network's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![256, 128, 64],
            batch_size: 64,
            learning_rate: 1e-3,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.1,
        }
    }
}

fn relu_inplace(a: &mut Array2<f64>) {
    a.mapv_inplace(|v| v.max(0.0));
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

impl Mlp {
    /// He-normal weights, zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Self {
        let mut r = rng(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("valid std");
                Dense {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || normal.sample(&mut r)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            layers: dims
                .windows(2)
                .map(|w| Dense {
                    weights: Array2::zeros((w[0], w[1])),
                    bias: Array1::zeros(w[1]),
                })
                .collect(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].weights.nrows()];
        d.extend(self.layers.iter().map(|l| l.weights.ncols()));
        d
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Activations of every layer; the last entry holds softmax probabilities.
    fn forward_all(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.weights) + &layer.bias;
            if i + 1 < self.layers.len() {
                relu_inplace(&mut z);
            } else {
                softmax_rows(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward_all(x).pop().expect("at least one layer")
    }

    pub fn predict_one(&self, x: &[f64]) -> Vec<f64> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row shape");
        self.predict_proba(view).row(0).to_vec()
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, x: ArrayView2<'_, f64>, y: &[usize]) -> f64 {
        let p = self.predict_proba(x);
        -y.iter()
            .enumerate()
            .map(|(i, &c)| p[[i, c]].max(1e-300).ln())
            .sum::<f64>()
            / y.len() as f64
    }

    /// Exact backpropagation of [`Mlp::loss`].
    pub fn gradient(&self, x: ArrayView2<'_, f64>, y: &[usize]) -> Gradients {
        let n = y.len() as f64;
        let acts = self.forward_all(x);
        let mut delta = acts.last().expect("output").clone();
        for (i, &c) in y.iter().enumerate() {
            delta[[i, c]] -= 1.0;
        }
        delta /= n;
        let mut grads = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let gw = acts[l].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                // ReLU derivative: zero where the activation was clipped.
                ndarray::Zip::from(&mut back)
                    .and(&acts[l])
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                delta = back;
            }
            grads.push(Dense {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        Gradients { layers: grads }
    }
}

struct Adam {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(net: &Mlp, lr: f64) -> Self {
        let z = Mlp::zeros(&net.dims()).layers;
        Self {
            m: z.clone(),
            v: z,
            t: 0,
            lr,
        }
    }

    fn step(&mut self, net: &mut Mlp, g: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        };
        for (((layer, m), v), gl) in net.layers.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(&g.layers) {
            ndarray::Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&gl.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&gl.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

fn to_matrix(rows: &[Vec<f64>], idx: &[usize]) -> Array2<f64> {
    let d = rows.first().map_or(0, Vec::len);
    let mut m = Array2::zeros((idx.len(), d));
    for (r, &i) in idx.iter().enumerate() {
        for (c, v) in rows[i].iter().enumerate() {
            m[[r, c]] = *v;
        }
    }
    m
}

fn accuracy(net: &Mlp, x: &Array2<f64>, y: &[usize]) -> f64 {
    let p = net.predict_proba(x.view());
    let correct = p
        .rows()
        .into_iter()
        .zip(y)
        .filter(|(row, &c)| argmax(row.as_slice().expect("contiguous")) == c)
        .count();
    correct as f64 / y.len() as f64
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingLog {
    pub epochs: usize,
    pub best_validation_accuracy: Option<f64>,
}

/// Mini-batch Adam with early stopping on a stratified validation carve-out.
/// Without enough rows per class for a carve-out, trains for `max_epochs`.
pub fn fit_mlp(rows: &[Vec<f64>], labels: &[usize], classes: usize, params: &MlpParams, seed: u64) -> (Mlp, TrainingLog) {
    let d = rows.first().map_or(0, Vec::len);
    let mut dims = vec![d];
    dims.extend(&params.hidden);
    dims.push(classes);
    let mut net = Mlp::new(&dims, seed);

    #[derive(Clone)]
    struct Row(usize, ClassLabel);
    impl Labeled for Row {
        fn label(&self) -> ClassLabel {
            self.1
        }
    }
    let tagged: Vec<Row> = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| Row(i, ClassLabel::from_ordinal(c).unwrap_or(ClassLabel::Real)))
        .collect();
    let enough = params.validation_fraction > 0.0
        && crate::datasets::class_counts(&tagged).iter().all(|&c| c >= 10);
    let (train_idx, val_idx): (Vec<usize>, Vec<usize>) = if enough {
        let (tr, va) = split_train_test(&tagged, 1.0 - params.validation_fraction, stream_rng(seed, 1).random())
            .expect("all classes present");
        (tr.into_iter().map(|r| r.0).collect(), va.into_iter().map(|r| r.0).collect())
    } else {
        ((0..rows.len()).collect(), Vec::new())
    };
    let val_x = to_matrix(rows, &val_idx);
    let val_y: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let mut adam = Adam::new(&net, params.learning_rate);
    let mut order = train_idx.clone();
    let mut shuffler = stream_rng(seed, 2);
    let mut best: Option<(f64, Mlp)> = None;
    let mut stale = 0;
    let mut epochs = 0;
    for _ in 0..params.max_epochs {
        epochs += 1;
        order.shuffle(&mut shuffler);
        for batch in order.chunks(params.batch_size.max(1)) {
            let x = to_matrix(rows, batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let g = net.gradient(x.view(), &y);
            adam.step(&mut net, &g);
        }
        if val_y.is_empty() {
            continue;
        }
        let acc = accuracy(&net, &val_x, &val_y);
        if best.as_ref().is_none_or(|(b, _)| acc > *b) {
            best = Some((acc, net.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= params.patience {
                break;
            }
        }
    }
    let best_acc = best.as_ref().map(|(a, _)| *a);
    if let Some((_, b)) = best {
        net = b;
    }
    (
        net,
        TrainingLog {
            epochs,
            best_validation_accuracy: best_acc,
        },
    )
}
