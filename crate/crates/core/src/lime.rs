//! Local surrogate explanations of MLP predictions and the coefficient
//! subsets derived from averaged contributions.
//!
//! Perturbations are drawn around an instance in the original feature space
//! with the training standard deviations, weighted by an exponential kernel
//! on their standardized distance, and regressed (weighted ridge) on the
//! model's score for the instance's predicted class. The surrogate weights
//! are the per-feature contributions.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::classifiers::{Algorithm, Standardizer, TrainedModel};
use crate::datasets::FeatureTable;
use crate::error::{Error, Result};
use crate::features::AC_COUNT;
use crate::rng::{derive_seed, rng, stable_hash};
use crate::subsets::SubsetSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct LimeConfig {
    pub n_samples: usize,
    /// Kernel width is `kernel_width_factor * sqrt(d)`.
    pub kernel_width_factor: f64,
    pub ridge_lambda: f64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            kernel_width_factor: 0.75,
            ridge_lambda: 1.0,
        }
    }
}

/// Average contribution per AC index (position `i-1` holds index `i`).
#[derive(Clone, Debug, PartialEq)]
pub struct ContributionVector {
    pub c_avg: Vec<f64>,
    pub n_correct: usize,
}

/// Explains a black-box `scorer` around `x`. `scorer` receives a batch of
/// raw (unstandardized) inputs and returns one score per input.
pub fn explain_with<F>(scorer: F, x: &[f64], scaler: &Standardizer, cfg: &LimeConfig, seed: u64) -> Result<Vec<f64>>
where
    F: Fn(&[Vec<f64>]) -> Vec<f64>,
{
    let d = x.len();
    if d != scaler.dim() {
        return Err(Error::InvalidParameter(format!(
            "instance has {d} features, standardizer {}",
            scaler.dim()
        )));
    }
    if cfg.n_samples < 2 {
        return Err(Error::InvalidParameter("LIME needs at least 2 samples".into()));
    }
    let mut r = rng(seed);
    // The first sample is the instance itself.
    let mut samples = Vec::with_capacity(cfg.n_samples);
    samples.push(x.to_vec());
    for _ in 1..cfg.n_samples {
        samples.push(
            x.iter()
                .zip(&scaler.std)
                .map(|(v, s)| {
                    let e: f64 = StandardNormal.sample(&mut r);
                    v + s * e
                })
                .collect(),
        );
    }
    let scores = scorer(&samples);
    let first = scores[0];
    if scores.iter().all(|&s| s == first) {
        log::warn!("all perturbed scores identical; contributions are zero");
        return Ok(vec![0.0; d]);
    }

    let x_std = scaler.transform(x);
    let width = cfg.kernel_width_factor * (d as f64).sqrt();
    let z: Vec<Vec<f64>> = samples.iter().map(|s| scaler.transform(s)).collect();
    let w: Vec<f64> = z
        .iter()
        .map(|zi| {
            let d2: f64 = zi.iter().zip(&x_std).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / (width * width)).exp()
        })
        .collect();
    Ok(weighted_ridge(&z, &scores, &w, cfg.ridge_lambda))
}

/// Weighted ridge regression with an unpenalized intercept; returns slopes.
pub fn weighted_ridge(x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    let d = x[0].len();
    let wsum: f64 = w.iter().sum();
    let mut xm = vec![0.0; d];
    let mut ym = 0.0;
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        for (m, v) in xm.iter_mut().zip(xi) {
            *m += wi * v;
        }
        ym += wi * yi;
    }
    xm.iter_mut().for_each(|m| *m /= wsum);
    ym /= wsum;
    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut b = DVector::<f64>::zeros(d);
    let mut row = vec![0.0; d];
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        for (c, (v, m)) in row.iter_mut().zip(xi.iter().zip(&xm)) {
            *c = v - m;
        }
        let yc = yi - ym;
        for p in 0..d {
            let wp = wi * row[p];
            b[p] += wp * yc;
            for q in p..d {
                a[(p, q)] += wp * row[q];
            }
        }
    }
    for p in 0..d {
        for q in 0..p {
            a[(p, q)] = a[(q, p)];
        }
        a[(p, p)] += lambda;
    }
    match a.clone().cholesky() {
        Some(ch) => ch.solve(&b).iter().copied().collect(),
        None => a
            .lu()
            .solve(&b)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_else(|| vec![0.0; d]),
    }
}

fn require_mlp(model: &TrainedModel) -> Result<()> {
    if model.algorithm != Algorithm::Mlp {
        return Err(Error::NotAnMlp(model.algorithm.to_string()));
    }
    Ok(())
}

/// Contributions (one per AC index 1..=63) for the model's predicted class at
/// `x`. Indices outside the model's subset get zero.
pub fn explain_instance(model: &TrainedModel, x: &[f64], cfg: &LimeConfig, seed: u64) -> Result<Vec<f64>> {
    require_mlp(model)?;
    let all: Vec<usize> = (1..=AC_COUNT).collect();
    let xp = model.project_input(&all, x)?;
    let class = model.predict_row(&all, x)?.label.ordinal();
    let local = explain_with(
        |batch| {
            model
                .mlp_batch_scores(batch)
                .expect("checked mlp")
                .into_iter()
                .map(|s| s[class])
                .collect()
        },
        &xp,
        &model.standardizer,
        cfg,
        seed,
    )?;
    let mut out = vec![0.0; AC_COUNT];
    for (i, c) in model.subset.indices().iter().zip(local) {
        out[i - 1] = c;
    }
    Ok(out)
}

/// Mean contributions over the correctly classified rows of `test`.
pub fn average_contributions(model: &TrainedModel, test: &FeatureTable, cfg: &LimeConfig, seed: u64) -> Result<ContributionVector> {
    require_mlp(model)?;
    let full: Vec<usize> = (1..=AC_COUNT).collect();
    if test.indices != full {
        return Err(Error::InvalidParameter("LIME needs unprojected 63-feature rows".into()));
    }
    let explained = test
        .rows
        .par_iter()
        .map(|row| {
            let pred = model.predict_row(&test.indices, &row.x)?;
            if pred.label != row.label {
                return Ok(None);
            }
            // Seeds follow row identity, not position, so row order is irrelevant.
            explain_instance(model, &row.x, cfg, derive_seed(seed, stable_hash(&row.id))).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    let correct: Vec<Vec<f64>> = explained.into_iter().flatten().collect();
    if correct.is_empty() {
        return Err(Error::NoCorrectPredictions);
    }
    Ok(mean_contributions(&correct))
}

pub fn mean_contributions(rows: &[Vec<f64>]) -> ContributionVector {
    let d = rows[0].len();
    let mut c = vec![0.0; d];
    for r in rows {
        for (a, b) in c.iter_mut().zip(r) {
            *a += b;
        }
    }
    c.iter_mut().for_each(|v| *v /= rows.len() as f64);
    ContributionVector {
        c_avg: c,
        n_correct: rows.len(),
    }
}

/// Indices with a strictly positive average contribution.
pub fn pos_lime(c: &ContributionVector) -> SubsetSpec {
    let s = SubsetSpec::new(
        "POS-LIME",
        c.c_avg.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(i, _)| i + 1),
    )
    .expect("indices in range");
    if s.is_empty() {
        log::warn!("POS-LIME subset is empty");
    }
    s
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Indices whose absolute average contribution strictly exceeds the median
/// absolute contribution.
pub fn abs_lime(c: &ContributionVector) -> SubsetSpec {
    let abs: Vec<f64> = c.c_avg.iter().map(|v| v.abs()).collect();
    let med = median(&abs);
    SubsetSpec::new(
        "ABS-LIME",
        abs.iter().enumerate().filter(|(_, v)| **v > med).map(|(i, _)| i + 1),
    )
    .expect("indices in range")
}

impl ContributionVector {
    /// `n_correct,<N>` then `index,c_avg` rows.
    pub fn to_file_string(&self) -> String {
        let mut s = format!("n_correct,{}\nindex,c_avg\n", self.n_correct);
        for (i, v) in self.c_avg.iter().enumerate() {
            s.push_str(&format!("{},{v:.16e}\n", i + 1));
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path.as_ref(), self.to_file_string()).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|msg| Error::format("contributions", path, msg))
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let n_correct = lines
            .next()
            .and_then(|l| l.trim().strip_prefix("n_correct,"))
            .and_then(|n| n.trim().parse().ok())
            .ok_or("first line must be n_correct,<N>")?;
        if lines.next().map(str::trim) != Some("index,c_avg") {
            return Err("second line must be index,c_avg".into());
        }
        let mut c = vec![0.0; AC_COUNT];
        let mut seen = 0;
        for l in lines {
            let (i, v) = l.split_once(',').ok_or_else(|| format!("bad line {l:?}"))?;
            let i: usize = i.trim().parse().map_err(|_| format!("bad index {i:?}"))?;
            let v: f64 = v.trim().parse().map_err(|_| format!("bad value {v:?}"))?;
            if !(1..=AC_COUNT).contains(&i) {
                return Err(format!("index {i} out of range"));
            }
            c[i - 1] = v;
            seen += 1;
        }
        if seen != AC_COUNT {
            return Err(format!("expected {AC_COUNT} rows, got {seen}"));
        }
        Ok(Self { c_avg: c, n_correct })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimeSubset {
    Positive,
    Absolute,
}

/// Loads a subset from either a contributions file (the subset is derived)
/// or a plain subset file with one index per line.
pub fn subset_from_file(path: &Path, kind: LimeSubset) -> Result<SubsetSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = match kind {
        LimeSubset::Positive => "POS-LIME",
        LimeSubset::Absolute => "ABS-LIME",
    };
    if text.trim_start().starts_with("n_correct") {
        let c = ContributionVector::parse(&text).map_err(|m| Error::format("contributions", path, m))?;
        return Ok(match kind {
            LimeSubset::Positive => pos_lime(&c),
            LimeSubset::Absolute => abs_lime(&c),
        });
    }
    let idx = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<usize>().map_err(|_| Error::format("subset", path, format!("bad index {l:?}"))))
        .collect::<Result<Vec<_>>>()?;
    SubsetSpec::new(name, idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cv(values: &[f64]) -> ContributionVector {
        ContributionVector {
            c_avg: values.to_vec(),
            n_correct: 1,
        }
    }

    #[test]
    fn pos_lime_examples() {
        assert_eq!(pos_lime(&cv(&[0.5, -0.2, 0.1])).indices(), &[1, 3]);
        assert!(pos_lime(&cv(&[-1.0; 63])).is_empty());
        assert_eq!(pos_lime(&cv(&[0.3; 63])).len(), 63);
    }

    #[test]
    fn abs_lime_examples() {
        assert_eq!(abs_lime(&cv(&[3.0, -1.0, 2.0])).indices(), &[1]);
        assert!(abs_lime(&cv(&[0.5; 63])).is_empty());
        let distinct: Vec<f64> = (0..63).map(|i| if i % 2 == 0 { i as f64 } else { -(i as f64) }).collect();
        assert_eq!(abs_lime(&cv(&distinct)).len(), 31);
    }

    #[test]
    fn averaging_examples() {
        let e1: Vec<f64> = (0..63).map(|i| f64::from(u8::from(i == 0))).collect();
        let e2: Vec<f64> = (0..63).map(|i| f64::from(u8::from(i == 1))).collect();
        assert_eq!(mean_contributions(&[e1.clone()]).c_avg, e1);
        let m = mean_contributions(&[e1, e2]);
        assert_eq!(m.n_correct, 2);
        assert_eq!(&m.c_avg[..3], &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn contributions_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = ContributionVector {
            c_avg: (0..63).map(|i| (i as f64 - 30.0) / 7.0).collect(),
            n_correct: 42,
        };
        let p = dir.path().join("c.csv");
        c.write(&p).unwrap();
        assert_eq!(ContributionVector::read(&p).unwrap(), c);
        assert_eq!(subset_from_file(&p, LimeSubset::Positive).unwrap(), pos_lime(&c));
        assert_eq!(subset_from_file(&p, LimeSubset::Absolute).unwrap(), abs_lime(&c));
        let sp = dir.path().join("s.txt");
        std::fs::write(&sp, abs_lime(&c).to_lines()).unwrap();
        assert_eq!(subset_from_file(&sp, LimeSubset::Absolute).unwrap(), abs_lime(&c));
        assert_eq!(
            SubsetSpec::parse(&format!("pos-lime:{}", p.display())).unwrap(),
            pos_lime(&c)
        );
    }

    fn linear_setup(d: usize) -> (Standardizer, Vec<f64>) {
        let scaler = Standardizer {
            mean: (0..d).map(|i| 10.0 + i as f64).collect(),
            std: (0..d).map(|i| 0.5 + 0.1 * i as f64).collect(),
        };
        let x = (0..d).map(|i| 10.0 + i as f64 + 0.3).collect();
        (scaler, x)
    }

    #[test]
    fn constant_scorer_gives_zero_contributions() {
        let (scaler, x) = linear_setup(5);
        let c = explain_with(|b| vec![0.7; b.len()], &x, &scaler, &LimeConfig::default(), 1).unwrap();
        assert_eq!(c, vec![0.0; 5]);
    }

    #[test]
    fn linear_scorer_is_recovered() {
        let (scaler, x) = linear_setup(63);
        let a: Vec<f64> = (0..63).map(|i| ((i * 37 % 11) as f64 - 5.0) / 10.0).collect();
        let s = scaler.clone();
        let a2 = a.clone();
        let scorer = move |batch: &[Vec<f64>]| -> Vec<f64> {
            batch.iter().map(|z| s.transform(z).iter().zip(&a2).map(|(u, v)| u * v).sum()).collect()
        };
        let cfg = LimeConfig { n_samples: 2000, ..LimeConfig::default() };
        let c = explain_with(scorer, &x, &scaler, &cfg, 3).unwrap();
        for (ci, ai) in c.iter().zip(&a) {
            assert!((ci - ai).abs() < 0.01, "{ci} vs {ai}");
        }
    }

    #[test]
    fn explanation_is_deterministic() {
        let (scaler, x) = linear_setup(4);
        let scorer = |b: &[Vec<f64>]| -> Vec<f64> { b.iter().map(|z| (z[0] - z[2]).tanh()).collect() };
        let a = explain_with(scorer, &x, &scaler, &LimeConfig::default(), 9).unwrap();
        let b = explain_with(scorer, &x, &scaler, &LimeConfig::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ridge_recovers_exact_linear_data() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, ((i * 7) % 13) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] - 3.0 * r[1] + 5.0).collect();
        let b = weighted_ridge(&x, &y, &vec![1.0; 50], 0.0);
        assert!((b[0] - 2.0).abs() < 1e-9 && (b[1] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn irrelevant_features_get_negligible_weight() {
        let (scaler, x) = linear_setup(8);
        let scorer = |b: &[Vec<f64>]| -> Vec<f64> { b.iter().map(|z| (z[2] - 12.0).tanh()).collect() };
        let c = explain_with(scorer, &x, &scaler, &LimeConfig::default(), 4).unwrap();
        let peak = c[2].abs();
        assert!(peak > 0.0);
        for (i, v) in c.iter().enumerate().filter(|(i, _)| *i != 2) {
            assert!(v.abs() < 0.05 * peak, "feature {i}: {v} vs {peak}");
        }
    }

    fn labelled_table(n_per: usize) -> FeatureTable {
        use crate::datasets::{ClassLabel, FeatureRow};
        use rand::Rng;
        let mut r = rng(21);
        let rows = (0..3 * n_per)
            .map(|i| {
                let label = ClassLabel::ALL[i % 3];
                let c = label.ordinal() as f64;
                let x = (0..63).map(|f| if f < 4 { c + r.random_range(-0.3..0.3) } else { r.random_range(-1.0..1.0) }).collect();
                FeatureRow { id: format!("r{i}"), label, x }
            })
            .collect();
        FeatureTable::full(rows).unwrap()
    }

    #[test]
    fn averaging_ignores_row_order() {
        use crate::classifiers::{train, Hyperparams, MlpParams};
        let t = labelled_table(40);
        let hp = Hyperparams::Mlp(MlpParams { hidden: vec![8], max_epochs: 30, ..MlpParams::default() });
        let model = train(&t, &SubsetSpec::all(), &hp, 2).unwrap();
        let test = labelled_table(6);
        let cfg = LimeConfig { n_samples: 200, ..LimeConfig::default() };
        let a = average_contributions(&model, &test, &cfg, 8).unwrap();
        let mut rows = test.rows.clone();
        rows.reverse();
        rows.rotate_left(5);
        let b = average_contributions(&model, &test.with_rows(rows), &cfg, 8).unwrap();
        assert_eq!(a.n_correct, b.n_correct);
        for (x, y) in a.c_avg.iter().zip(&b.c_avg) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn non_mlp_models_are_rejected() {
        use crate::classifiers::{train, Hyperparams};
        let t = labelled_table(5);
        let knn = train(&t, &SubsetSpec::all(), &Hyperparams::Knn { k: 1 }, 0).unwrap();
        assert!(matches!(average_contributions(&knn, &t, &LimeConfig::default(), 0), Err(Error::NotAnMlp(_))));
    }

    proptest! {
        #[test]
        fn derived_subsets_are_sorted_and_bounded(values in prop::collection::vec(-5.0f64..5.0, 63)) {
            let c = cv(&values);
            for s in [pos_lime(&c), abs_lime(&c)] {
                prop_assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
                prop_assert!(s.indices().iter().all(|i| (1..=63).contains(i)));
            }
            prop_assert!(abs_lime(&c).len() <= 31);
        }
    }
}
