//! CART trees on pre-sorted feature columns.
//!
//! Every node carries, per feature, the indices of its samples sorted by that
//! feature. Children inherit stable partitions of those lists, so no node
//! ever re-sorts. Samples carry weights (bootstrap multiplicities); a weight
//! of zero removes a sample from the tree.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Column-major training matrix plus per-feature sort orders.
pub struct Columns {
    pub cols: Vec<Vec<f64>>,
    pub order: Vec<Vec<u32>>,
    pub n: usize,
}

impl Columns {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let cols: Vec<Vec<f64>> = (0..d).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { cols, order, n }
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

/// What a tree is fitted to.
pub enum Target<'a> {
    /// Gini impurity on class ordinals in `0..k`.
    Classes { labels: &'a [usize], k: usize },
    /// Squared error on real targets.
    Values { y: &'a [f64] },
}

pub struct TreeParams {
    pub max_depth: Option<usize>,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

/// Weighted sufficient statistics of a sample set.
#[derive(Clone)]
struct Stats {
    w: f64,
    sums: Vec<f64>,
    sq: f64,
}

impl Target<'_> {
    fn empty(&self) -> Stats {
        let width = match self {
            Target::Classes { k, .. } => *k,
            Target::Values { .. } => 1,
        };
        Stats {
            w: 0.0,
            sums: vec![0.0; width],
            sq: 0.0,
        }
    }

    #[inline]
    fn add(&self, s: &mut Stats, i: usize, w: f64) {
        s.w += w;
        match self {
            Target::Classes { labels, .. } => s.sums[labels[i]] += w,
            Target::Values { y } => {
                s.sums[0] += w * y[i];
                s.sq += w * y[i] * y[i];
            }
        }
    }

    #[inline]
    fn sub(&self, s: &mut Stats, i: usize, w: f64) {
        s.w -= w;
        match self {
            Target::Classes { labels, .. } => s.sums[labels[i]] -= w,
            Target::Values { y } => {
                s.sums[0] -= w * y[i];
                s.sq -= w * y[i] * y[i];
            }
        }
    }

    /// Quantity whose sum over children is maximized by the best split:
    /// `sum_c n_c^2 / n` (Gini) or `(sum y)^2 / n` (squared error).
    #[inline]
    fn proxy(&self, s: &Stats) -> f64 {
        if s.w <= 0.0 {
            return 0.0;
        }
        s.sums.iter().map(|v| v * v).sum::<f64>() / s.w
    }

    /// Weighted impurity of a node; zero means nothing left to separate.
    fn impurity(&self, s: &Stats) -> f64 {
        match self {
            Target::Classes { .. } => s.w - self.proxy(s),
            Target::Values { .. } => s.sq - self.proxy(s),
        }
    }
}

struct Builder<'a, R: Rng> {
    data: &'a Columns,
    weights: &'a [f64],
    target: &'a Target<'a>,
    params: &'a TreeParams,
    leaf: &'a dyn Fn(&[u32]) -> Vec<f64>,
    rng: &'a mut R,
    nodes: Vec<Node>,
    go_left: Vec<bool>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: Vec::new() });
        let members = &lists[0];
        let mut total = self.target.empty();
        for &i in members {
            self.target.add(&mut total, i as usize, self.weights[i as usize]);
        }
        let depth_ok = self.params.max_depth.is_none_or(|m| depth < m);
        let split = if depth_ok && members.len() >= 2 && self.target.impurity(&total) > 1e-12 {
            self.best_split(&lists, &total)
        } else {
            None
        };
        let Some(split) = split else {
            self.nodes[id] = Node::Leaf {
                value: (self.leaf)(members),
            };
            return id;
        };
        let col = &self.data.cols[split.feature];
        for &i in members {
            self.go_left[i as usize] = col[i as usize] <= split.threshold;
        }
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in lists {
            let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&i| self.go_left[i as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        let left = self.build(left_lists, depth + 1);
        let right = self.build(right_lists, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, lists: &[Vec<u32>], total: &Stats) -> Option<BestSplit> {
        let d = self.data.dim();
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < d => {
                let mut f = sample(self.rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let parent = self.target.proxy(total);
        let mut best: Option<BestSplit> = None;
        for f in features {
            let col = &self.data.cols[f];
            let list = &lists[f];
            let mut left = self.target.empty();
            let mut right = total.clone();
            for pos in 0..list.len() - 1 {
                let i = list[pos] as usize;
                let w = self.weights[i];
                self.target.add(&mut left, i, w);
                self.target.sub(&mut right, i, w);
                let (a, b) = (col[i], col[list[pos + 1] as usize]);
                if a >= b {
                    continue;
                }
                let score = self.target.proxy(&left) + self.target.proxy(&right);
                if score <= parent + 1e-12 {
                    continue;
                }
                if best.as_ref().is_none_or(|bs| score > bs.score) {
                    let mut threshold = 0.5 * (a + b);
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Fits one tree. `leaf` maps the sample indices of a leaf to its stored value.
pub fn fit_tree<R: Rng>(
    data: &Columns,
    weights: &[f64],
    target: &Target<'_>,
    params: &TreeParams,
    leaf: &dyn Fn(&[u32]) -> Vec<f64>,
    rng: &mut R,
) -> Tree {
    let lists: Vec<Vec<u32>> = data
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&i| weights[i as usize] > 0.0).collect())
        .collect();
    let mut b = Builder {
        data,
        weights,
        target,
        params,
        leaf,
        rng,
        nodes: Vec::new(),
        go_left: vec![false; data.n],
    };
    if data.dim() == 0 || lists[0].is_empty() {
        return Tree {
            nodes: vec![Node::Leaf {
                value: leaf(&[]),
            }],
        };
    }
    b.build(lists, 0);
    Tree { nodes: b.nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;

    fn class_leaf<'a>(labels: &'a [usize], weights: &'a [f64]) -> impl Fn(&[u32]) -> Vec<f64> + 'a {
        move |idx| {
            let mut v = vec![0.0; 2];
            for &i in idx {
                v[labels[i as usize]] += weights[i as usize];
            }
            v
        }
    }

    #[test]
    fn separates_a_threshold() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        let labels: Vec<usize> = (0..10).map(|i| usize::from(i >= 6)).collect();
        let w = vec![1.0; 10];
        let data = Columns::from_rows(&rows);
        let t = fit_tree(
            &data,
            &w,
            &Target::Classes { labels: &labels, k: 2 },
            &TreeParams { max_depth: None, max_features: None },
            &class_leaf(&labels, &w),
            &mut rng(0),
        );
        assert_eq!(t.depth(), 1);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 5.5);
            }
            _ => panic!("expected a split"),
        }
    }

    #[test]
    fn fully_grown_tree_memorizes() {
        let mut r = rng(1);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| r.random::<f64>()).collect()).collect();
        let labels: Vec<usize> = (0..200).map(|i| (i * 7 % 3) % 2).collect();
        let w = vec![1.0; 200];
        let data = Columns::from_rows(&rows);
        let t = fit_tree(
            &data,
            &w,
            &Target::Classes { labels: &labels, k: 2 },
            &TreeParams { max_depth: None, max_features: None },
            &class_leaf(&labels, &w),
            &mut r,
        );
        for (x, &y) in rows.iter().zip(&labels) {
            let v = t.leaf_value(x);
            assert!(v[y] > 0.0 && v[1 - y] == 0.0);
        }
    }

    #[test]
    fn zero_weight_samples_are_ignored() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let labels = vec![0, 0, 0, 1, 1, 1];
        let w = vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let data = Columns::from_rows(&rows);
        let t = fit_tree(
            &data,
            &w,
            &Target::Classes { labels: &labels, k: 2 },
            &TreeParams { max_depth: None, max_features: None },
            &class_leaf(&labels, &w),
            &mut rng(0),
        );
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.leaf_value(&[5.0]), &[3.0, 0.0]);
    }

    #[test]
    fn regression_split_minimizes_squared_error() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y = vec![1.0, 1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 5.0];
        let w = vec![1.0; 8];
        let data = Columns::from_rows(&rows);
        let mean = |idx: &[u32]| vec![idx.iter().map(|&i| y[i as usize]).sum::<f64>() / idx.len() as f64];
        let t = fit_tree(
            &data,
            &w,
            &Target::Values { y: &y },
            &TreeParams { max_depth: Some(3), max_features: None },
            &mean,
            &mut rng(0),
        );
        assert_eq!(t.depth(), 1);
        assert_eq!(t.leaf_value(&[2.0]), &[1.0]);
        assert_eq!(t.leaf_value(&[6.0]), &[5.0]);
    }

    #[test]
    fn depth_zero_is_a_single_leaf() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let labels = vec![0, 1, 0, 1, 0, 1];
        let w = vec![1.0; 6];
        let data = Columns::from_rows(&rows);
        let t = fit_tree(
            &data,
            &w,
            &Target::Classes { labels: &labels, k: 2 },
            &TreeParams { max_depth: Some(0), max_features: None },
            &class_leaf(&labels, &w),
            &mut rng(0),
        );
        assert_eq!(t.nodes.len(), 1);
    }
}
