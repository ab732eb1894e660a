//! Labels, manifests, feature tables, splitting, balancing and the
//! synthetic surrogate corpus.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_stats, BetaVector, AC_COUNT};
use crate::image::{GrayImage, Plane};
use crate::rng::{laplace, rng};
use crate::spectral::{assemble_plane, idct2_8x8, inverse_zigzag, ZigzagVector};

/// Image provenance. Ordinals are fixed: real 0, GAN 1, DM 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Real,
    Gan,
    Dm,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [ClassLabel::Real, ClassLabel::Gan, ClassLabel::Dm];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(k: usize) -> Option<Self> {
        Self::ALL.get(k).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Real => "real",
            ClassLabel::Gan => "gan",
            ClassLabel::Dm => "dm",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "real" => Ok(ClassLabel::Real),
            "gan" => Ok(ClassLabel::Gan),
            "dm" => Ok(ClassLabel::Dm),
            other => Err(Error::InvalidParameter(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidParameter(format!("unknown split {other:?}"))),
        }
    }
}

/// Anything carrying a class label; lets splitting and balancing work on
/// manifest rows and feature rows alike.
pub trait Labeled {
    fn label(&self) -> ClassLabel;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: PathBuf,
    pub label: ClassLabel,
    pub split: Split,
}

impl Labeled for ManifestRow {
    fn label(&self) -> ClassLabel {
        self.label
    }
}

/// `path,label,split` listing. Relative paths resolve against `base_dir`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub base_dir: PathBuf,
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    pub fn new(base_dir: impl Into<PathBuf>, rows: Vec<ManifestRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(&r.path) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate manifest path {}",
                    r.path.display()
                )));
            }
        }
        Ok(Self {
            base_dir: base_dir.into(),
            rows,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "label", "split"] {
            return Err(Error::format("manifest", path, "header must be path,label,split"));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push(ManifestRow {
                path: PathBuf::from(&rec[0]),
                label: rec[1].parse()?,
                split: rec[2].parse()?,
            });
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(base, rows)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["path", "label", "split"])?;
        for r in &self.rows {
            w.write_record([&r.path.to_string_lossy(), r.label.as_str(), r.split.as_str()])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
        Ok(())
    }

    pub fn resolve(&self, row: &ManifestRow) -> PathBuf {
        if row.path.is_absolute() {
            row.path.clone()
        } else {
            self.base_dir.join(&row.path)
        }
    }

    pub fn rows_in(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.rows
            .iter()
            .find(|r| r.path.to_string_lossy() == id)
            .map(|r| r.split)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub label: ClassLabel,
    pub x: Vec<f64>,
}

impl Labeled for FeatureRow {
    fn label(&self) -> ClassLabel {
        self.label
    }
}

/// Feature rows plus the AC indices (1..=63) their columns correspond to.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub indices: Vec<usize>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn full(rows: Vec<FeatureRow>) -> Result<Self> {
        for r in &rows {
            if r.x.len() != AC_COUNT || !r.x.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "row {} must have {AC_COUNT} finite features",
                    r.id
                )));
            }
        }
        Ok(Self {
            indices: (1..=AC_COUNT).collect(),
            rows,
        })
    }

    pub fn from_betas<I>(items: I) -> Self
    where
        I: IntoIterator<Item = (String, ClassLabel, BetaVector)>,
    {
        Self {
            indices: (1..=AC_COUNT).collect(),
            rows: items
                .into_iter()
                .map(|(id, label, b)| FeatureRow {
                    id,
                    label,
                    x: b.0.to_vec(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn class_counts(&self) -> [usize; 3] {
        class_counts(&self.rows)
    }

    pub fn labels(&self) -> Vec<ClassLabel> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn with_rows(&self, rows: Vec<FeatureRow>) -> Self {
        Self {
            indices: self.indices.clone(),
            rows,
        }
    }

    /// Full 63-entry beta vector of a row (only for unprojected tables).
    pub fn beta(&self, row: usize) -> Option<BetaVector> {
        BetaVector::from_slice(&self.rows[row].x).ok()
    }

    /// Keeps the rows whose id the manifest assigns to `split`.
    pub fn filter_split(&self, manifest: &DatasetManifest, split: Split) -> Self {
        let wanted: HashSet<String> = manifest
            .rows_in(split)
            .map(|r| r.path.to_string_lossy().into_owned())
            .collect();
        self.with_rows(
            self.rows
                .iter()
                .filter(|r| wanted.contains(&r.id))
                .cloned()
                .collect(),
        )
    }

    /// Writes the `path,label,beta_<i>...` cache format.
    pub fn write_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path.as_ref(), self.to_cache_string()).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn to_cache_string(&self) -> String {
        let mut out = String::from("path,label");
        for i in &self.indices {
            out.push_str(&format!(",beta_{i}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&csv_field(&r.id));
            out.push(',');
            out.push_str(r.label.as_str());
            for v in &r.x {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn read_cache(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "path" || &headers[1] != "label" {
            return Err(Error::format("feature cache", path, "header must start with path,label"));
        }
        let indices = headers
            .iter()
            .skip(2)
            .map(|h| {
                h.strip_prefix("beta_")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|i| (1..=AC_COUNT).contains(i))
                    .ok_or_else(|| Error::format("feature cache", path, format!("bad column {h:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let x = rec
                .iter()
                .skip(2)
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|f| f.is_finite())
                        .ok_or_else(|| Error::format("feature cache", path, format!("bad value {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if x.len() != indices.len() {
                return Err(Error::format("feature cache", path, "ragged row"));
            }
            rows.push(FeatureRow {
                id: rec[0].to_string(),
                label: rec[1].parse()?,
                x,
            });
        }
        Ok(Self { indices, rows })
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn class_counts<T: Labeled>(rows: &[T]) -> [usize; 3] {
    let mut c = [0; 3];
    for r in rows {
        c[r.label().ordinal()] += 1;
    }
    c
}

fn require_all_classes(counts: [usize; 3]) -> Result<()> {
    for label in ClassLabel::ALL {
        if counts[label.ordinal()] == 0 {
            return Err(Error::MissingClass(label.as_str()));
        }
    }
    Ok(())
}

/// Stratified shuffle split. Each class contributes `round(fraction * n_c)`
/// rows to train; both outputs keep the input order.
pub fn split_train_test<T: Labeled + Clone>(
    rows: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    require_all_classes(class_counts(rows))?;
    let mut in_train = vec![false; rows.len()];
    let mut r = rng(seed);
    for label in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].label() == label).collect();
        let take = (train_fraction * members.len() as f64).round() as usize;
        members.shuffle(&mut r);
        for &i in &members[..take] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (row, t) in rows.iter().zip(in_train) {
        if t {
            train.push(row.clone());
        } else {
            test.push(row.clone());
        }
    }
    Ok((train, test))
}

/// Reduces every class to the minority count by sampling without replacement.
pub fn undersample_rows<T: Labeled + Clone>(rows: &[T], seed: u64) -> Result<Vec<T>> {
    let counts = class_counts(rows);
    require_all_classes(counts)?;
    let target = *counts.iter().min().unwrap();
    let mut keep = vec![false; rows.len()];
    let mut r = rng(seed);
    for label in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].label() == label).collect();
        members.shuffle(&mut r);
        for &i in &members[..target] {
            keep[i] = true;
        }
    }
    Ok(rows
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(row, _)| row.clone())
        .collect())
}

pub fn undersample(train: &FeatureTable, seed: u64) -> Result<FeatureTable> {
    Ok(train.with_rows(undersample_rows(&train.rows, seed)?))
}

/// Per-class target beta curves, rows ordered real, GAN, DM.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthProfiles(pub [[f64; AC_COUNT]; 3]);

impl SynthProfiles {
    fn build(base: impl Fn(usize) -> f64, scale: impl Fn(ClassLabel, usize) -> f64) -> Self {
        let mut p = [[0.0; AC_COUNT]; 3];
        for label in ClassLabel::ALL {
            for i in 1..=AC_COUNT {
                p[label.ordinal()][i - 1] = base(i) * scale(label, i);
            }
        }
        Self(p)
    }

    /// Decaying spectrum with a distinct magnitude tier per class. DM tracks
    /// real at low frequencies and separates towards high frequencies.
    pub fn tiered() -> Self {
        Self::build(
            |i| 3.0 + 9.0 * (-((i - 1) as f64) / 12.0).exp(),
            |label, i| match label {
                ClassLabel::Real => 1.0,
                ClassLabel::Gan => 1.6,
                ClassLabel::Dm => 1.0 + 1.2 * (i - 1) as f64 / 62.0,
            },
        )
    }

    /// Same decaying spectrum for every class with a uniform per-class factor.
    pub fn scaled(factors: [f64; 3]) -> Self {
        Self::build(
            |i| 3.0 + 9.0 * (-((i - 1) as f64) / 12.0).exp(),
            |label, _| factors[label.ordinal()],
        )
    }

    /// Classes identical below AC index `from`, separated from `from` upward.
    pub fn separated_band(from: usize, to: usize, base: f64, factors: [f64; 3]) -> Self {
        Self::build(
            |_| base,
            |label, i| {
                if (from..=to).contains(&i) {
                    factors[label.ordinal()]
                } else {
                    1.0
                }
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        for row in &self.0 {
            if row.iter().any(|b| !b.is_finite() || *b < 0.0) {
                return Err(Error::InvalidProfile("beta targets must be finite and >= 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub profiles: SynthProfiles,
    pub n_per_class: usize,
    pub image_size: usize,
    pub seed: u64,
}

/// DC draws follow N(1024, 64), i.e. block means around mid-gray.
pub const SYNTH_DC_MEAN: f64 = 1024.0;
pub const SYNTH_DC_STD: f64 = 64.0;

#[derive(Clone, Debug)]
pub struct SynthImage {
    pub label: ClassLabel,
    pub image: GrayImage,
    /// Target profile the coefficients were drawn from.
    pub target_beta: BetaVector,
    /// sigma/sqrt(2) of the coefficients actually drawn, before clamping.
    pub drawn_beta: BetaVector,
    /// Beta re-measured on the final 8-bit image.
    pub realized_beta: BetaVector,
    /// Fraction of pixels that fell outside [0, 255] before clamping.
    pub clipped_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub images: Vec<SynthImage>,
}

/// Draws one image: per block, AC coefficient `i` ~ Laplace(0, beta_i) and
/// DC ~ N(1024, 64); inverse DCT; round and clamp to 8 bits.
pub fn synth_image(
    profile: &[f64; AC_COUNT],
    image_size: usize,
    seed: u64,
) -> Result<(GrayImage, BetaVector, f64)> {
    if image_size < 16 || image_size % 8 != 0 {
        return Err(Error::InvalidParameter(format!(
            "image size {image_size} must be a multiple of 8 and at least 16"
        )));
    }
    let mut r = rng(seed);
    let dc = Normal::new(SYNTH_DC_MEAN, SYNTH_DC_STD).expect("valid normal");
    let nb = (image_size / 8) * (image_size / 8);
    let mut sums = [0.0; AC_COUNT];
    let mut sq = [0.0; AC_COUNT];
    let mut blocks = Vec::with_capacity(nb);
    for _ in 0..nb {
        let mut z = [0.0; 64];
        z[0] = dc.sample(&mut r);
        for i in 1..64 {
            let c = if profile[i - 1] > 0.0 {
                laplace(&mut r, profile[i - 1])
            } else {
                0.0
            };
            z[i] = c;
            sums[i - 1] += c;
            sq[i - 1] += c * c;
        }
        blocks.push(idct2_8x8(&inverse_zigzag(&ZigzagVector(z))));
    }
    let n = nb as f64;
    let mut drawn = [0.0; AC_COUNT];
    for i in 0..AC_COUNT {
        let mean = sums[i] / n;
        drawn[i] = ((sq[i] / n - mean * mean).max(0.0)).sqrt() / std::f64::consts::SQRT_2;
    }
    let mut plane = Plane::zeros(image_size, image_size);
    assemble_plane(&mut plane, &blocks)?;
    let clipped = plane
        .samples()
        .iter()
        .filter(|&&v| v.round() < 0.0 || v.round() > 255.0)
        .count() as f64
        / plane.samples().len() as f64;
    Ok((plane.to_gray(), BetaVector(drawn), clipped))
}

pub fn synth_generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.profiles.validate()?;
    let total = 3 * config.n_per_class;
    let images = (0..total)
        .into_par_iter()
        .map(|idx| {
            let label = ClassLabel::ALL[idx / config.n_per_class];
            let profile = &config.profiles.0[label.ordinal()];
            let seed = crate::rng::derive_seed(config.seed, idx as u64);
            let (image, drawn_beta, clipped_fraction) = synth_image(profile, config.image_size, seed)?;
            let realized_beta = extract_stats(&image)?.beta;
            Ok(SynthImage {
                label,
                image,
                target_beta: BetaVector(*profile),
                drawn_beta,
                realized_beta,
                clipped_fraction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthCorpus { images })
}

impl SynthCorpus {
    /// Stratified split of the generated images (by position in `images`).
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<Vec<Split>> {
        #[derive(Clone)]
        struct Idx(usize, ClassLabel);
        impl Labeled for Idx {
            fn label(&self) -> ClassLabel {
                self.1
            }
        }
        let items: Vec<Idx> = self.images.iter().enumerate().map(|(i, s)| Idx(i, s.label)).collect();
        let (train, _) = split_train_test(&items, train_fraction, seed)?;
        let mut splits = vec![Split::Test; items.len()];
        for Idx(i, _) in train {
            splits[i] = Split::Train;
        }
        Ok(splits)
    }

    /// Writes `<label>_<n>.png` files, `manifest.csv` and `ground_truth.csv`.
    pub fn write(&self, dir: impl AsRef<Path>, train_fraction: f64, seed: u64) -> Result<DatasetManifest> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let splits = self.split(train_fraction, seed)?;
        let names: Vec<String> = self
            .images
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}_{i:05}.png", s.label))
            .collect();
        self.images
            .par_iter()
            .zip(names.par_iter())
            .try_for_each(|(s, name)| s.image.save_png(dir.join(name)))?;
        let rows = self
            .images
            .iter()
            .zip(&names)
            .zip(&splits)
            .map(|((s, name), split)| ManifestRow {
                path: PathBuf::from(name),
                label: s.label,
                split: *split,
            })
            .collect();
        let manifest = DatasetManifest::new(dir, rows)?;
        manifest.write(dir.join("manifest.csv"))?;
        FeatureTable::from_betas(
            self.images
                .iter()
                .zip(&names)
                .map(|(s, n)| (n.clone(), s.label, s.realized_beta)),
        )
        .write_cache(dir.join("ground_truth.csv"))?;
        Ok(manifest)
    }

    pub fn feature_table(&self) -> FeatureTable {
        FeatureTable::from_betas(
            self.images
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("{}_{i:05}.png", s.label), s.label, s.realized_beta)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Clone, Debug, PartialEq)]
    struct Item(usize, ClassLabel);
    impl Labeled for Item {
        fn label(&self) -> ClassLabel {
            self.1
        }
    }

    fn items(counts: [usize; 3]) -> Vec<Item> {
        let mut v = Vec::new();
        for (k, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                v.push(Item(v.len(), ClassLabel::ALL[k]));
            }
        }
        v
    }

    #[test]
    fn split_proportions() {
        // 400 + 300 + 300 -> 340 + 255 + 255
        let (train, test) = split_train_test(&items([400, 300, 300]), 0.85, 1).unwrap();
        assert_eq!((train.len(), test.len()), (850, 150));
        let mut one = items([20, 0, 0]);
        one.push(Item(20, ClassLabel::Gan));
        one.push(Item(21, ClassLabel::Dm));
        let (train, _) = split_train_test(&one, 0.85, 1).unwrap();
        assert_eq!(class_counts(&train)[0], 17);
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let rows = items([30, 30, 30]);
        let a = split_train_test(&rows, 0.85, 5).unwrap();
        let b = split_train_test(&rows, 0.85, 5).unwrap();
        let c = split_train_test(&rows, 0.85, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split_train_test(&items([5, 0, 5]), 0.85, 1), Err(Error::MissingClass("gan"))));
        assert!(split_train_test(&items([5, 5, 5]), 1.0, 1).is_err());
        assert!(split_train_test(&items([5, 5, 5]), 0.0, 1).is_err());
    }

    #[test]
    fn undersample_examples() {
        let out = undersample_rows(&items([100, 300, 200]), 3).unwrap();
        assert_eq!(class_counts(&out), [100, 100, 100]);
        let out = undersample_rows(&items([50, 50, 50]), 3).unwrap();
        assert_eq!(out, items([50, 50, 50]));
        let out = undersample_rows(&items([1, 5, 9]), 3).unwrap();
        assert_eq!(class_counts(&out), [1, 1, 1]);
        assert!(undersample_rows(&items([0, 5, 9]), 3).is_err());
    }

    proptest! {
        #[test]
        fn stratified_split_preserves_proportions(
            a in 1usize..60, b in 1usize..60, c in 1usize..60,
            frac in 0.05f64..0.95, seed in any::<u64>()
        ) {
            let rows = items([a, b, c]);
            let (train, test) = split_train_test(&rows, frac, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), rows.len());
            let tc = class_counts(&train);
            for (k, &n) in [a, b, c].iter().enumerate() {
                prop_assert!((tc[k] as f64 - frac * n as f64).abs() <= 1.0);
            }
        }

        #[test]
        fn undersample_balances_exactly(a in 1usize..80, b in 1usize..80, c in 1usize..80, seed in any::<u64>()) {
            let out = undersample_rows(&items([a, b, c]), seed).unwrap();
            let m = a.min(b).min(c);
            prop_assert_eq!(class_counts(&out), [m, m, m]);
        }
    }

    #[test]
    fn manifest_round_trip_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            ManifestRow { path: "a.png".into(), label: ClassLabel::Real, split: Split::Train },
            ManifestRow { path: "b.png".into(), label: ClassLabel::Dm, split: Split::Test },
        ];
        let m = DatasetManifest::new(dir.path(), rows.clone()).unwrap();
        let p = dir.path().join("manifest.csv");
        m.write(&p).unwrap();
        let back = DatasetManifest::read(&p).unwrap();
        assert_eq!(back.rows, rows);
        assert_eq!(back.resolve(&back.rows[0]), dir.path().join("a.png"));
        let dup = vec![rows[0].clone(), rows[0].clone()];
        assert!(DatasetManifest::new(dir.path(), dup).is_err());
    }

    #[test]
    fn feature_cache_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut v = [0.0; 63];
        for (i, x) in v.iter_mut().enumerate() {
            *x = (i as f64 + 0.1).sqrt() / 3.0;
        }
        let t = FeatureTable::from_betas(vec![
            ("x/a.png".to_string(), ClassLabel::Gan, BetaVector(v)),
            ("b,c.png".to_string(), ClassLabel::Real, BetaVector::ZERO),
        ]);
        let p = dir.path().join("f.csv");
        t.write_cache(&p).unwrap();
        assert_eq!(FeatureTable::read_cache(&p).unwrap(), t);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("path,label,beta_1,beta_2,"));
        assert!(text.lines().next().unwrap().ends_with(",beta_63"));
    }

    #[test]
    fn zero_profile_gives_constant_images() {
        let cfg = SynthConfig {
            profiles: SynthProfiles([[0.0; 63]; 3]),
            n_per_class: 2,
            image_size: 32,
            seed: 4,
        };
        let corpus = synth_generate(&cfg).unwrap();
        assert_eq!(corpus.images.len(), 6);
        for s in &corpus.images {
            // Flat blocks; only the block means differ.
            for by in 0..4 {
                for bx in 0..4 {
                    let v = s.image.get(bx * 8, by * 8);
                    for y in 0..8 {
                        for x in 0..8 {
                            assert_eq!(s.image.get(bx * 8 + x, by * 8 + y), v);
                        }
                    }
                }
            }
            assert_eq!(s.realized_beta, BetaVector::ZERO);
        }
    }

    #[test]
    fn synth_rejects_bad_inputs() {
        let mut p = SynthProfiles::tiered();
        p.0[1][4] = -1.0;
        let cfg = SynthConfig { profiles: p, n_per_class: 1, image_size: 32, seed: 0 };
        assert!(matches!(synth_generate(&cfg), Err(Error::InvalidProfile(_))));
        let cfg = SynthConfig { profiles: SynthProfiles::tiered(), n_per_class: 1, image_size: 36, seed: 0 };
        assert!(synth_generate(&cfg).is_err());
    }

    #[test]
    fn synth_is_reproducible() {
        let cfg = SynthConfig { profiles: SynthProfiles::tiered(), n_per_class: 2, image_size: 32, seed: 9 };
        let a = synth_generate(&cfg).unwrap();
        let b = synth_generate(&cfg).unwrap();
        for (x, y) in a.images.iter().zip(&b.images) {
            assert_eq!(x.image, y.image);
        }
    }

    #[test]
    fn tiered_class_means_are_well_separated() {
        let cfg = SynthConfig {
            profiles: SynthProfiles::scaled([1.0, 1.5, 2.25]),
            n_per_class: 20,
            image_size: 64,
            seed: 2,
        };
        let corpus = synth_generate(&cfg).unwrap();
        // Mean over all 63 entries per image, then class mean and its standard error.
        let mut per_class: [Vec<f64>; 3] = Default::default();
        for s in &corpus.images {
            per_class[s.label.ordinal()].push(s.realized_beta.band_mean(1, 63));
        }
        let stats: Vec<(f64, f64)> = per_class
            .iter()
            .map(|v| {
                let n = v.len() as f64;
                let m = v.iter().sum::<f64>() / n;
                let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                (m, sd / n.sqrt())
            })
            .collect();
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            let gap = (stats[b].0 - stats[a].0).abs();
            assert!(gap > 5.0 * stats[a].1.max(stats[b].1), "{a}-{b}: {stats:?}");
        }
    }

    #[test]
    fn corpus_write_produces_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig { profiles: SynthProfiles::tiered(), n_per_class: 4, image_size: 16, seed: 1 };
        let m = synth_generate(&cfg).unwrap().write(dir.path(), 0.75, 1).unwrap();
        let back = DatasetManifest::read(dir.path().join("manifest.csv")).unwrap();
        assert_eq!(back.rows, m.rows);
        assert_eq!(back.rows_in(Split::Train).count(), 9);
        let gt = FeatureTable::read_cache(dir.path().join("ground_truth.csv")).unwrap();
        assert_eq!(gt.len(), 12);
        for r in &back.rows {
            assert!(back.resolve(r).exists());
        }
    }
}
