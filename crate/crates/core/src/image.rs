//! Single-channel rasters and PNG I/O.
//!
//! [`GrayImage`] is the 8-bit unit of analysis. [`Plane`] is a real-valued
//! raster used where intermediate results must not be rounded (synthesis,
//! scaling checks).

use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit single-channel raster stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn to_plane(&self) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            samples: self.pixels.iter().map(|&p| f64::from(p)).collect(),
        }
    }

    /// Loads an image file, converting color to luma with
    /// `Y = round(0.299 R + 0.587 G + 0.114 B)`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let (width, height) = (img.width() as usize, img.height() as usize);
        let pixels = match img {
            image::DynamicImage::ImageLuma8(buf) => buf.into_raw(),
            other => other
                .to_rgb8()
                .pixels()
                .map(|p| luma_from_rgb(p.0[0], p.0[1], p.0[2]))
                .collect(),
        };
        Self::new(width, height, pixels)
    }

    /// Writes an 8-bit grayscale PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer_with_format(
            path,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn luma_from_rgb(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// Real-valued single-channel raster stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    samples: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} samples for a {width}x{height} plane",
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            samples: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.samples[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.samples[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rounds half away from zero and clamps into `[0, 255]`.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self
                .samples
                .iter()
                .map(|&v| v.round().clamp(0.0, 255.0) as u8)
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_weights() {
        assert_eq!(luma_from_rgb(255, 255, 255), 255);
        assert_eq!(luma_from_rgb(0, 0, 0), 0);
        // 0.299 * 100 = 29.9
        assert_eq!(luma_from_rgb(100, 0, 0), 30);
        assert_eq!(luma_from_rgb(0, 0, 100), 11);
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let img = GrayImage::from_fn(19, 11, |x, y| (x * 13 + y * 7) as u8);
        img.save_png(&path).unwrap();
        assert_eq!(GrayImage::open(&path).unwrap(), img);
    }

    #[test]
    fn rgb_png_is_converted_to_luma() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let raw: Vec<u8> = [200u8, 100, 50].repeat(4);
        image::save_buffer(&path, &raw, 2, 2, image::ExtendedColorType::Rgb8).unwrap();
        let img = GrayImage::open(&path).unwrap();
        assert_eq!(img.pixels(), &[luma_from_rgb(200, 100, 50); 4]);
    }

    #[test]
    fn plane_to_gray_rounds_and_clamps() {
        let p = Plane::new(4, 1, vec![-3.0, 2.5, 254.6, 400.0]).unwrap();
        assert_eq!(p.to_gray().pixels(), &[0, 3, 255, 255]);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        assert!(GrayImage::new(3, 3, vec![0; 8]).is_err());
        assert!(Plane::new(2, 2, vec![0.0; 5]).is_err());
    }
}
