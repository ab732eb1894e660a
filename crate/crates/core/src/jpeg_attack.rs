//! Luma-only JPEG quantization attack.
//!
//! Each 8x8 block is level-shifted, transformed, quantized with the IJG-scaled
//! standard luminance table, dequantized and inverse transformed. There is no
//! chroma handling and no entropy coding, so the result depends only on the
//! quantization step and is bit-exactly reproducible.

use std::path::Path;

use crate::datasets::{DatasetManifest, FeatureTable, ManifestRow, Split};
use crate::error::{Error, Result};
use crate::features::{extract_batch, BatchOutcome};
use crate::image::GrayImage;
use crate::spectral::{assemble_plane, dct2_8x8, idct2_8x8, partition_plane, Block8};

/// Standard luminance quantization table, row-major (vertical frequency by row).
pub const STD_LUMINANCE: [[u16; 8]; 8] = [
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantTable(pub [[u16; 8]; 8]);

impl QuantTable {
    pub const ONES: QuantTable = QuantTable([[1; 8]; 8]);

    pub fn get(&self, r: usize, c: usize) -> u16 {
        self.0[r][c]
    }
}

/// IJG quality scaling of [`STD_LUMINANCE`].
pub fn quant_table(qf: i64) -> Result<QuantTable> {
    if !(1..=100).contains(&qf) {
        return Err(Error::QualityOutOfRange(qf));
    }
    let scale = if qf < 50 { 5000 / qf } else { 200 - 2 * qf };
    let mut q = [[0u16; 8]; 8];
    for r in 0..8 {
        for c in 0..8 {
            let v = (i64::from(STD_LUMINANCE[r][c]) * scale + 50) / 100;
            q[r][c] = v.clamp(1, 255) as u16;
        }
    }
    Ok(QuantTable(q))
}

/// Quantize/dequantize every whole block with `table`. Pixels in the
/// right/bottom remainder strips are copied unchanged.
pub fn compress_with_table(image: &GrayImage, table: &QuantTable) -> Result<GrayImage> {
    let mut plane = image.to_plane();
    let blocks: Vec<Block8> = partition_plane(&plane)?
        .iter()
        .map(|b| {
            let shifted = Block8::from_fn(|r, c| b[(r, c)] - 128.0);
            let coeffs = dct2_8x8(&shifted);
            let dequant = Block8::from_fn(|r, c| {
                let q = f64::from(table.get(r, c));
                (coeffs[(r, c)] / q).round() * q
            });
            let px = idct2_8x8(&dequant);
            Block8::from_fn(|r, c| px[(r, c)] + 128.0)
        })
        .collect();
    assemble_plane(&mut plane, &blocks)?;
    Ok(plane.to_gray())
}

pub fn compress_image(image: &GrayImage, qf: i64) -> Result<GrayImage> {
    compress_with_table(image, &quant_table(qf)?)
}

/// Re-extracts features for `manifest`, compressing test images at `qf`.
/// Training images are extracted untouched.
pub fn attack_dataset(manifest: &DatasetManifest, qf: i64) -> Result<BatchOutcome> {
    let table = quant_table(qf)?;
    Ok(extract_batch(manifest, move |row: &ManifestRow, img| {
        if row.split == Split::Test {
            compress_with_table(&img, &table)
        } else {
            Ok(img)
        }
    }))
}

/// Re-extracts every row of a feature cache from its image, compressed at
/// `qf`. Row ids are image paths relative to `base_dir`.
pub fn attack_feature_cache(table: &FeatureTable, base_dir: &Path, qf: i64) -> Result<BatchOutcome> {
    let rows = table
        .rows
        .iter()
        .map(|r| ManifestRow {
            path: r.id.clone().into(),
            label: r.label,
            split: Split::Test,
        })
        .collect();
    attack_dataset(&DatasetManifest::new(base_dir, rows)?, qf)
}
