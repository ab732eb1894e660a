use serde::{Deserialize, Serialize};

/// Brute-force k-nearest-neighbour store (Euclidean, standardized space).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Knn {
    pub fn new(k: usize, points: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Self {
        Self {
            k,
            points,
            labels,
            classes,
        }
    }

    /// Vote fractions among the `k` nearest points. Equal distances are
    /// resolved by training order.
    pub fn vote_fractions(&self, x: &[f64]) -> Vec<f64> {
        let mut d: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(d.len()).max(1);
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
        }
        let mut votes = vec![0.0; self.classes];
        for &(_, i) in &d[..k] {
            votes[self.labels[i]] += 1.0;
        }
        votes.iter_mut().for_each(|v| *v /= k as f64);
        votes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_neighbour_vote() {
        // Nearest three: GAN, GAN, Real.
        let knn = Knn::new(
            3,
            vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]],
            vec![1, 1, 0, 2],
            3,
        );
        let v = knn.vote_fractions(&[0.5]);
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((v[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn distance_ties_use_training_order() {
        let knn = Knn::new(1, vec![vec![-1.0], vec![1.0]], vec![2, 0], 3);
        assert_eq!(knn.vote_fractions(&[0.0]), vec![0.0, 0.0, 1.0]);
    }
}
