//! 8x8 block partitioning, the orthonormal 2-D DCT-II and zig-zag ordering.
//!
//! Blocks are indexed `[row][col]`. The forward transform maps `f[x][y]` to
//! `DCT[u][v]` with `u` paired with the row index and `v` with the column
//! index. The scan starts `(0,0), (0,1), (1,0), (2,0), (1,1), ...`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::{Index, IndexMut};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::image::{GrayImage, Plane};

/// An 8x8 block of pixel intensities or DCT coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Block8(pub [[f64; 8]; 8]);

impl Block8 {
    pub const ZERO: Block8 = Block8([[0.0; 8]; 8]);

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut b = Self::ZERO;
        for r in 0..8 {
            for c in 0..8 {
                b.0[r][c] = f(r, c);
            }
        }
        b
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flat_map(|row| row.iter().copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn energy(&self) -> f64 {
        self.iter().map(|v| v * v).sum()
    }
}

impl Index<(usize, usize)> for Block8 {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for Block8 {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.0[r][c]
    }
}

/// 64 coefficients in zig-zag scan order; index 0 is DC.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZigzagVector(pub [f64; 64]);

impl ZigzagVector {
    pub fn dc(&self) -> f64 {
        self.0[0]
    }

    /// AC coefficients, zig-zag positions 1..=63.
    pub fn ac(&self) -> &[f64] {
        &self.0[1..]
    }
}

/// Zig-zag position -> row-major index (`8 * row + col`).
pub const ZIGZAG_TO_NATURAL: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, //
    17, 24, 32, 25, 18, 11, 4, 5, //
    12, 19, 26, 33, 40, 48, 41, 34, //
    27, 20, 13, 6, 7, 14, 21, 28, //
    35, 42, 49, 56, 57, 50, 43, 36, //
    29, 22, 15, 23, 30, 37, 44, 51, //
    58, 59, 52, 45, 38, 31, 39, 46, //
    53, 60, 61, 54, 47, 55, 62, 63,
];

/// Row-major index -> zig-zag position.
pub const NATURAL_TO_ZIGZAG: [usize; 64] = {
    let mut table = [0usize; 64];
    let mut i = 0;
    while i < 64 {
        table[ZIGZAG_TO_NATURAL[i]] = i;
        i += 1;
    }
    table
};

/// `basis[u][x] = C(u)/2 * cos((2x+1) u pi / 16)`; the 1-D orthonormal DCT-II matrix.
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; 8]; 8];
        for (u, row) in m.iter_mut().enumerate() {
            let cu = if u == 0 { FRAC_1_SQRT_2 } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = 0.5 * cu * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos();
            }
        }
        m
    })
}

/// Forward 8x8 DCT, computed separably (columns then rows).
pub fn dct2_8x8(block: &Block8) -> Block8 {
    let t = basis();
    // tmp = T * f
    let mut tmp = [[0.0; 8]; 8];
    for u in 0..8 {
        for y in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += t[u][x] * block.0[x][y];
            }
            tmp[u][y] = acc;
        }
    }
    // out = tmp * T^T
    let mut out = Block8::ZERO;
    for u in 0..8 {
        for v in 0..8 {
            let mut acc = 0.0;
            for y in 0..8 {
                acc += tmp[u][y] * t[v][y];
            }
            out.0[u][v] = acc;
        }
    }
    out
}

/// Inverse of [`dct2_8x8`].
pub fn idct2_8x8(coeffs: &Block8) -> Block8 {
    let t = basis();
    // tmp = T^T * F
    let mut tmp = [[0.0; 8]; 8];
    for x in 0..8 {
        for v in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                acc += t[u][x] * coeffs.0[u][v];
            }
            tmp[x][v] = acc;
        }
    }
    // out = tmp * T
    let mut out = Block8::ZERO;
    for x in 0..8 {
        for y in 0..8 {
            let mut acc = 0.0;
            for v in 0..8 {
                acc += tmp[x][v] * t[v][y];
            }
            out.0[x][y] = acc;
        }
    }
    out
}

pub fn zigzag(block: &Block8) -> ZigzagVector {
    let mut v = [0.0; 64];
    for (pos, &nat) in ZIGZAG_TO_NATURAL.iter().enumerate() {
        v[pos] = block.0[nat / 8][nat % 8];
    }
    ZigzagVector(v)
}

pub fn inverse_zigzag(v: &ZigzagVector) -> Block8 {
    let mut b = Block8::ZERO;
    for (pos, &nat) in ZIGZAG_TO_NATURAL.iter().enumerate() {
        b.0[nat / 8][nat % 8] = v.0[pos];
    }
    b
}

/// Number of whole blocks along each axis; remainder strips are ignored.
pub fn block_grid(width: usize, height: usize) -> Result<(usize, usize)> {
    if width < 8 || height < 8 {
        return Err(Error::DimensionTooSmall { width, height });
    }
    Ok((width / 8, height / 8))
}

/// Splits an image into non-overlapping 8x8 blocks in row-major block order.
pub fn partition_blocks(image: &GrayImage) -> Result<Vec<Block8>> {
    let (bw, bh) = block_grid(image.width(), image.height())?;
    let mut blocks = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            blocks.push(Block8::from_fn(|r, c| {
                f64::from(image.get(bx * 8 + c, by * 8 + r))
            }));
        }
    }
    Ok(blocks)
}

/// [`partition_blocks`] for a real-valued plane.
pub fn partition_plane(plane: &Plane) -> Result<Vec<Block8>> {
    let (bw, bh) = block_grid(plane.width(), plane.height())?;
    let mut blocks = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            blocks.push(Block8::from_fn(|r, c| plane.get(bx * 8 + c, by * 8 + r)));
        }
    }
    Ok(blocks)
}

/// Writes blocks back in the order produced by [`partition_plane`].
/// Pixels outside the block grid are left untouched.
pub fn assemble_plane(plane: &mut Plane, blocks: &[Block8]) -> Result<()> {
    let (bw, bh) = block_grid(plane.width(), plane.height())?;
    if blocks.len() != bw * bh {
        return Err(Error::InvalidParameter(format!(
            "{} blocks for a {bw}x{bh} grid",
            blocks.len()
        )));
    }
    for (i, b) in blocks.iter().enumerate() {
        let (bx, by) = (i % bw, i / bw);
        for r in 0..8 {
            for c in 0..8 {
                plane.set(bx * 8 + c, by * 8 + r, b.0[r][c]);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct quadruple-loop evaluation of the DCT definition.
    fn naive_dct(f: &Block8) -> Block8 {
        let c = |p: usize| if p == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
        let t = |z: usize, e: usize| ((2 * z + 1) as f64 * e as f64 * PI / 16.0).cos();
        Block8::from_fn(|u, v| {
            let mut acc = 0.0;
            for x in 0..8 {
                for y in 0..8 {
                    acc += f.0[x][y] * t(x, u) * t(y, v);
                }
            }
            c(u) * c(v) / 4.0 * acc
        })
    }

    fn random_block(rng: &mut ChaCha8Rng) -> Block8 {
        Block8::from_fn(|_, _| rng.random_range(0.0..255.0))
    }

    fn max_abs_diff(a: &Block8, b: &Block8) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn partition_counts_and_cropping() {
        assert_eq!(partition_blocks(&GrayImage::filled(16, 16, 3)).unwrap().len(), 4);
        assert_eq!(partition_blocks(&GrayImage::filled(17, 9, 3)).unwrap().len(), 2);
        assert!(matches!(
            partition_blocks(&GrayImage::filled(7, 64, 3)),
            Err(Error::DimensionTooSmall { width: 7, height: 64 })
        ));
    }

    #[test]
    fn partition_is_row_major() {
        let img = GrayImage::from_fn(24, 16, |x, y| ((x / 8) + 10 * (y / 8)) as u8);
        let blocks = partition_blocks(&img).unwrap();
        let firsts: Vec<f64> = blocks.iter().map(|b| b[(0, 0)]).collect();
        assert_eq!(firsts, vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        let b = &partition_blocks(&GrayImage::from_fn(8, 8, |x, y| (x + 8 * y) as u8)).unwrap()[0];
        assert_eq!(b[(2, 5)], 21.0);
    }

    #[test]
    fn constant_block_has_only_dc() {
        let d = dct2_8x8(&Block8([[128.0; 8]; 8]));
        assert!((d[(0, 0)] - 1024.0).abs() < 1e-9);
        for (i, v) in d.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-9, "entry {i} = {v}");
        }
    }

    #[test]
    fn single_basis_function() {
        let f = Block8::from_fn(|x, y| {
            ((2 * x + 1) as f64 * 3.0 * PI / 16.0).cos() * ((2 * y + 1) as f64 * 5.0 * PI / 16.0).cos()
        });
        let d = dct2_8x8(&f);
        for u in 0..8 {
            for v in 0..8 {
                let want = if (u, v) == (3, 5) { 4.0 } else { 0.0 };
                assert!((d[(u, v)] - want).abs() < 1e-12, "({u},{v}) = {}", d[(u, v)]);
            }
        }
    }

    #[test]
    fn separable_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let b = random_block(&mut rng);
            assert!(max_abs_diff(&dct2_8x8(&b), &naive_dct(&b)) < 1e-9);
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(idct2_8x8(&Block8::ZERO), Block8::ZERO);
        let mut dc = Block8::ZERO;
        dc[(0, 0)] = 1024.0;
        let px = idct2_8x8(&dc);
        assert!(px.iter().all(|v| (v - 128.0).abs() < 1e-9));
    }

    #[test]
    fn zigzag_index_table() {
        let b = Block8::from_fn(|r, c| (8 * r + c) as f64);
        let z = zigzag(&b);
        assert_eq!(&z.0[..8], &[0.0, 1.0, 8.0, 16.0, 9.0, 2.0, 3.0, 10.0]);
        assert_eq!(z.0[63], b[(7, 7)]);
        for i in 0..64 {
            assert_eq!(NATURAL_TO_ZIGZAG[ZIGZAG_TO_NATURAL[i]], i);
        }
    }

    #[test]
    fn inverse_zigzag_corners() {
        let mut v = ZigzagVector([0.0; 64]);
        v.0[0] = 5.0;
        let b = inverse_zigzag(&v);
        assert_eq!(b[(0, 0)], 5.0);
        assert_eq!(b.iter().filter(|x| *x != 0.0).count(), 1);
        let mut v = ZigzagVector([0.0; 64]);
        v.0[63] = 7.0;
        let b = inverse_zigzag(&v);
        assert_eq!(b[(7, 7)], 7.0);
        assert_eq!(b.iter().filter(|x| *x != 0.0).count(), 1);
    }

    #[test]
    fn assemble_inverts_partition() {
        let img = GrayImage::from_fn(20, 17, |x, y| (x * 3 + y * 5) as u8).to_plane();
        let blocks = partition_plane(&img).unwrap();
        let mut out = img.clone();
        for v in out.samples_mut() {
            *v = -1.0;
        }
        assemble_plane(&mut out, &blocks).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(out.get(x, y), img.get(x, y));
            }
        }
        assert_eq!(out.get(17, 3), -1.0);
    }

    fn block_strategy() -> impl Strategy<Value = Block8> {
        prop::array::uniform8(prop::array::uniform8(-300.0f64..300.0)).prop_map(Block8)
    }

    proptest! {
        #[test]
        fn parseval(b in block_strategy()) {
            let e = b.energy();
            let d = dct2_8x8(&b).energy();
            prop_assert!((e - d).abs() <= 1e-6 * e.max(1e-12));
        }

        #[test]
        fn round_trip(b in block_strategy()) {
            prop_assert!(max_abs_diff(&idct2_8x8(&dct2_8x8(&b)), &b) < 1e-9);
        }

        #[test]
        fn linearity(b1 in block_strategy(), b2 in block_strategy(), a in -3.0f64..3.0, s in -3.0f64..3.0) {
            let mix = Block8::from_fn(|r, c| a * b1[(r, c)] + s * b2[(r, c)]);
            let (d1, d2) = (dct2_8x8(&b1), dct2_8x8(&b2));
            let lhs = dct2_8x8(&mix);
            let rhs = Block8::from_fn(|r, c| a * d1[(r, c)] + s * d2[(r, c)]);
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
        }

        #[test]
        fn dc_shift_only_moves_dc(b in block_strategy(), shift in -100.0f64..100.0) {
            let shifted = Block8::from_fn(|r, c| b[(r, c)] + shift);
            let (d0, d1) = (dct2_8x8(&b), dct2_8x8(&shifted));
            prop_assert!((d1[(0, 0)] - d0[(0, 0)] - 8.0 * shift).abs() < 1e-9);
            for (i, (x, y)) in d0.iter().zip(d1.iter()).enumerate().skip(1) {
                prop_assert!((x - y).abs() < 1e-9, "entry {}", i);
            }
        }

        #[test]
        fn zigzag_is_a_permutation(b in block_strategy()) {
            let mut a: Vec<f64> = b.iter().collect();
            let mut z = zigzag(&b).0.to_vec();
            a.sort_by(f64::total_cmp);
            z.sort_by(f64::total_cmp);
            prop_assert_eq!(a, z);
            prop_assert_eq!(inverse_zigzag(&zigzag(&b)), b);
        }

        #[test]
        fn zigzag_after_inverse(v in prop::array::uniform32(-5.0f64..5.0)) {
            let mut full = [0.0; 64];
            full[..32].copy_from_slice(&v);
            full[32..].copy_from_slice(&v);
            let z = ZigzagVector(full);
            prop_assert_eq!(zigzag(&inverse_zigzag(&z)), z);
        }
    }
}
