//! Laplacian scale (beta) statistics of block-DCT coefficients.
//!
//! Every AC coefficient position, taken across all blocks of an image, is
//! modelled as a Laplacian population and summarized by its scale
//! `beta = sigma / sqrt(2)`. The DC population gets a Gaussian fit instead.

use std::f64::consts::SQRT_2;
use std::ops::Index;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::datasets::{ClassLabel, DatasetManifest, FeatureRow, FeatureTable, ManifestRow};
use crate::error::{Error, Result};
use crate::image::{GrayImage, Plane};
use crate::spectral::{dct2_8x8, partition_blocks, partition_plane, zigzag, Block8};

pub const AC_COUNT: usize = 63;

/// Scale parameters for zig-zag AC positions 1..=63.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaVector(pub [f64; AC_COUNT]);

impl BetaVector {
    pub const ZERO: BetaVector = BetaVector([0.0; AC_COUNT]);

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; AC_COUNT] = values.try_into().map_err(|_| {
            Error::InvalidParameter(format!("expected {AC_COUNT} beta values, got {}", values.len()))
        })?;
        Ok(Self(arr))
    }

    /// Value at AC index `i` (1-based, zig-zag order).
    pub fn at(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Mean over AC indices `lo..=hi`.
    pub fn band_mean(&self, lo: usize, hi: usize) -> f64 {
        let band = &self.0[lo - 1..hi];
        band.iter().sum::<f64>() / band.len() as f64
    }
}

impl Index<usize> for BetaVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i - 1]
    }
}

/// Gaussian fit of the DC coefficient population.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcStats {
    pub mean: f64,
    pub std_dev: f64,
}

/// Everything measured from one image. Only `beta` is used as a feature.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralStats {
    pub beta: BetaVector,
    pub dc: DcStats,
    /// Laplacian location estimate per AC index (sample mean).
    pub ac_location: [f64; AC_COUNT],
    pub blocks: usize,
}

fn mean_and_population_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let first = samples[0];
    if samples.iter().all(|&s| s == first) {
        return (first, 0.0);
    }
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    (mean, var.max(0.0).sqrt())
}

/// Laplacian scale by moment matching: population standard deviation over `sqrt(2)`.
pub fn estimate_beta(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(samples.len()));
    }
    Ok(mean_and_population_std(samples).1 / SQRT_2)
}

fn stats_from_blocks(blocks: Vec<Block8>) -> Result<SpectralStats> {
    if blocks.len() < 2 {
        return Err(Error::TooFewBlocks {
            blocks: blocks.len(),
            needed: 2,
        });
    }
    let n = blocks.len();
    // columns[pos][block]
    let mut columns = vec![Vec::with_capacity(n); 64];
    for block in &blocks {
        // Centering makes AC coefficients bit-identical under integer
        // brightness offsets: the block sum of integer pixels is exact.
        let mean = block.iter().sum::<f64>() / 64.0;
        let centered = Block8::from_fn(|r, c| block[(r, c)] - mean);
        let mut z = zigzag(&dct2_8x8(&centered));
        z.0[0] = 8.0 * mean;
        for (pos, col) in columns.iter_mut().enumerate() {
            col.push(z.0[pos]);
        }
    }
    let (dc_mean, dc_std) = mean_and_population_std(&columns[0]);
    let mut beta = [0.0; AC_COUNT];
    let mut location = [0.0; AC_COUNT];
    for i in 1..64 {
        let (m, s) = mean_and_population_std(&columns[i]);
        beta[i - 1] = s / SQRT_2;
        location[i - 1] = m;
    }
    Ok(SpectralStats {
        beta: BetaVector(beta),
        dc: DcStats {
            mean: dc_mean,
            std_dev: dc_std,
        },
        ac_location: location,
        blocks: n,
    })
}

/// Full per-image statistics (beta, DC fit, AC locations).
pub fn extract_stats(image: &GrayImage) -> Result<SpectralStats> {
    stats_from_blocks(partition_blocks(image)?)
}

pub fn extract_plane_stats(plane: &Plane) -> Result<SpectralStats> {
    stats_from_blocks(partition_plane(plane)?)
}

/// The 63-entry feature vector of an image.
pub fn extract_beta_vector(image: &GrayImage) -> Result<BetaVector> {
    Ok(extract_stats(image)?.beta)
}

/// Per-class mean beta curves, rows ordered real, GAN, DM.
pub fn average_beta_by_class<'a, I>(features: I) -> Result<[[f64; AC_COUNT]; 3]>
where
    I: IntoIterator<Item = (&'a BetaVector, ClassLabel)>,
{
    let mut sums = [[0.0; AC_COUNT]; 3];
    let mut counts = [0usize; 3];
    for (beta, label) in features {
        let k = label.ordinal();
        counts[k] += 1;
        for (s, b) in sums[k].iter_mut().zip(beta.0.iter()) {
            *s += b;
        }
    }
    for label in ClassLabel::ALL {
        let k = label.ordinal();
        if counts[k] == 0 {
            return Err(Error::MissingClass(label.as_str()));
        }
        for s in sums[k].iter_mut() {
            *s /= counts[k] as f64;
        }
    }
    Ok(sums)
}

/// Result of extracting features from many images; unreadable files are
/// skipped and listed in `failures`.
#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub table: FeatureTable,
    pub failures: Vec<(PathBuf, String)>,
}

/// Extracts one feature row per manifest row, in manifest order. `prepare`
/// may transform each decoded image before extraction.
pub fn extract_batch<F>(manifest: &DatasetManifest, prepare: F) -> BatchOutcome
where
    F: Fn(&ManifestRow, GrayImage) -> Result<GrayImage> + Sync,
{
    let results: Vec<Result<FeatureRow>> = manifest
        .rows
        .par_iter()
        .map(|row| {
            let img = GrayImage::open(manifest.resolve(row))?;
            let img = prepare(row, img)?;
            Ok(FeatureRow {
                id: row.path.to_string_lossy().into_owned(),
                label: row.label,
                x: extract_beta_vector(&img)?.0.to_vec(),
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (row, res) in manifest.rows.iter().zip(results) {
        match res {
            Ok(r) => rows.push(r),
            Err(e) => {
                log::warn!("skipping {}: {e}", row.path.display());
                failures.push((row.path.clone(), e.to_string()));
            }
        }
    }
    BatchOutcome {
        table: FeatureTable {
            indices: (1..=AC_COUNT).collect(),
            rows,
        },
        failures,
    }
}
