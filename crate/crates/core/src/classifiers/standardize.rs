use serde::{Deserialize, Serialize};

/// Per-feature z-scoring fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics. Zero-variance features keep `std = 1`.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .enumerate()
            .map(|(f, s)| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    log::warn!("feature column {f} has zero variance; leaving it unscaled");
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_variance_column_uses_unit_scale() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&rows);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.transform(&[3.0, 5.0]), vec![1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn standardized_columns_have_zero_mean_unit_std(
            rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 3..50)
        ) {
            let s = Standardizer::fit(&rows);
            let z = s.transform_all(&rows);
            let n = z.len() as f64;
            for f in 0..4 {
                let m = z.iter().map(|r| r[f]).sum::<f64>() / n;
                let sd = (z.iter().map(|r| (r[f] - m).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!(m.abs() < 1e-9);
                let raw_m = rows.iter().map(|r| r[f]).sum::<f64>() / n;
                let raw_sd = (rows.iter().map(|r| (r[f] - raw_m).powi(2)).sum::<f64>() / n).sqrt();
                if raw_sd > 1e-6 {
                    prop_assert!((sd - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
