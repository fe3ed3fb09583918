//! Pixel-level primitives: straight-alpha RGBA buffers, source-over
//! compositing, alpha masks and alpha-tight bounds, PSNR and SSIM.

mod composite;
mod quality;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};
use crate::geometry::BBox;

pub use composite::{composite_over, composite_over_in_place, flatten};
pub use quality::{psnr, ssim, ssim_with, Channels, PSNR_CAP_DB, SSIM_SIGMA, SSIM_WINDOW};

/// Alpha threshold used when nothing else is configured: any nonzero alpha
/// counts as content.
pub const DEFAULT_ALPHA_THRESHOLD: u8 = 0;

/// Owned 8-bit RGBA image, row-major, straight (non-premultiplied) alpha.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbaImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for RgbaImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RgbaImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RgbaImage {
    /// A fully transparent image.
    pub fn new(width: u32, height: u32) -> Result<Self> {
        Self::filled(width, height, [0, 0, 0, 0])
    }

    pub fn filled(width: u32, height: u32, px: [u8; 4]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero dimension {width}x{height}")));
        }
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 4);
        for _ in 0..n {
            data.extend_from_slice(&px);
        }
        Ok(Self { width, height, data })
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero dimension {width}x{height}")));
        }
        let expected = width as usize * height as usize * 4;
        if data.len() != expected {
            return Err(Error::InvalidImage(format!(
                "buffer of {} bytes for {width}x{height} RGBA (expected {expected})",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 4]) -> Result<Self> {
        let mut img = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                img.put(x, y, f(x, y));
            }
        }
        Ok(img)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 4
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 4] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2], self.data[o + 3]]
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, px: [u8; 4]) {
        let o = self.offset(x, y);
        self.data[o..o + 4].copy_from_slice(&px);
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(4)
    }

    /// Copies the sub-rectangle `b`, which must lie within the image.
    pub fn crop(&self, b: BBox) -> Result<RgbaImage> {
        if b.x0 < 0 || b.y0 < 0 || b.x1 as i64 > self.width as i64 || b.y1 as i64 > self.height as i64 {
            return Err(Error::InvalidImage(format!(
                "crop box {b} outside {}x{} image",
                self.width, self.height
            )));
        }
        let (w, h) = (b.width(), b.height());
        let mut data = Vec::with_capacity(w as usize * h as usize * 4);
        for y in b.y0 as u32..b.y1 as u32 {
            let start = self.offset(b.x0 as u32, y);
            data.extend_from_slice(&self.data[start..start + w as usize * 4]);
        }
        RgbaImage::from_raw(w, h, data)
    }

    /// Bilinear resampling to an exact target size.
    pub fn resize(&self, width: u32, height: u32) -> Result<RgbaImage> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("resize target {width}x{height}")));
        }
        if (width, height) == self.dimensions() {
            return Ok(self.clone());
        }
        let resized = image::imageops::resize(
            &self.to_image_buffer(),
            width,
            height,
            image::imageops::FilterType::Triangle,
        );
        RgbaImage::from_raw(width, height, resized.into_raw())
    }

    fn to_image_buffer(&self) -> image::RgbaImage {
        image::RgbaImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length checked at construction")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RgbaImage> {
        let path = path.as_ref();
        let decoded = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgba = decoded.to_rgba8();
        let (w, h) = rgba.dimensions();
        RgbaImage::from_raw(w, h, rgba.into_raw())
    }

    /// Writes an 8-bit RGBA PNG. Encoding is deterministic for a given buffer.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_png(BufWriter::new(file)).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_png(&mut buf).map_err(|source| Error::Image {
            path: "<memory>".into(),
            source,
        })?;
        Ok(buf)
    }

    fn write_png<W: std::io::Write>(&self, w: W) -> image::ImageResult<()> {
        PngEncoder::new_with_quality(w, CompressionType::Fast, FilterType::Adaptive).write_image(
            &self.data,
            self.width,
            self.height,
            ExtendedColorType::Rgba8,
        )
    }
}

/// Row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::InvalidImage(format!(
                "mask of {} bits for {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Mask of pixels whose alpha is strictly greater than `threshold`.
pub fn alpha_mask(img: &RgbaImage, threshold: u8) -> PixelMask {
    PixelMask {
        width: img.width,
        height: img.height,
        bits: img.pixels().map(|p| p[3] > threshold).collect(),
    }
}

/// Minimal box around all pixels with alpha above `threshold`, or `None`
/// when the image has no such pixel.
pub fn tighten_bbox_to_alpha(img: &RgbaImage, threshold: u8) -> Option<BBox> {
    let (w, h) = img.dimensions();
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
    let mut any = false;
    for y in 0..h {
        let row = &img.data[(y as usize * w as usize) * 4..((y as usize + 1) * w as usize) * 4];
        for (x, px) in row.chunks_exact(4).enumerate() {
            if px[3] > threshold {
                let x = x as u32;
                any = true;
                x0 = x0.min(x);
                x1 = x1.max(x + 1);
                y0 = y0.min(y);
                y1 = y1.max(y + 1);
            }
        }
    }
    any.then_some(BBox {
        x0: x0 as i32,
        y0: y0 as i32,
        x1: x1 as i32,
        y1: y1 as i32,
    })
}
