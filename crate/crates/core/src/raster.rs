//! Lossless raster images and their partition into a lattice of blocks.
//!
//! Samples are stored row-major, channel-interleaved (`RGBRGB...`), 8 bits
//! per channel. A block is itself a small [`RasterImage`].

use std::path::Path;

use crate::error::{Error, Result};

/// Bits per sample (L).
pub const BIT_DEPTH: u32 = 8;
/// Largest sample value, `2^L - 1`.
pub const MAX_SAMPLE: u8 = u8::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Dimension(format!(
                "empty raster {width}x{height}x{channels}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| Error::Dimension("raster size overflows".into()))?;
        if pixels.len() != expected {
            return Err(Error::Dimension(format!(
                "{width}x{height}x{channels} raster needs {expected} samples, got {}",
                pixels.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn rgb(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 3, pixels)
    }

    /// Builds an RGB image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        RasterImage {
            width,
            height,
            channels: 3,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bit_depth(&self) -> u32 {
        BIT_DEPTH
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let at = (y * self.width + x) * self.channels;
        &self.pixels[at..at + self.channels]
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    /// Copies the `w`x`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<RasterImage> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Dimension(format!(
                "window {w}x{h}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        let row_len = w * self.channels;
        let mut pixels = Vec::with_capacity(h * row_len);
        for y in y0..y0 + h {
            let at = (y * self.width + x0) * self.channels;
            pixels.extend_from_slice(&self.pixels[at..at + row_len]);
        }
        Ok(RasterImage {
            width: w,
            height: h,
            channels: self.channels,
            pixels,
        })
    }

    /// Reads a PPM (P6) or PNG file, sniffing the format from its magic bytes.
    pub fn read(path: impl AsRef<Path>) -> Result<RasterImage> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        decode_image(&bytes)
    }

    /// Writes PPM or PNG depending on the file extension (PPM when unknown).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        let bytes = if is_png {
            encode_png(self)?
        } else {
            crate::ppm::encode(self)?
        };
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Decodes PPM (P6) or PNG bytes into an 8-bit RGB raster.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    if bytes.starts_with(b"P6") {
        crate::ppm::decode(bytes)
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else {
        Err(Error::parse("image", "neither a P6 PPM nor a PNG"))
    }
}

fn decode_png(bytes: &[u8]) -> Result<RasterImage> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::parse("png", e.to_string()))?;
    if decoded.color().has_alpha() {
        return Err(Error::parse("png", "alpha channels are not supported"));
    }
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    RasterImage::rgb(w as usize, h as usize, rgb.into_raw())
}

fn encode_png(image: &RasterImage) -> Result<Vec<u8>> {
    if image.channels != 3 {
        return Err(Error::Channels(image.channels));
    }
    let buffer = image::RgbImage::from_raw(
        image.width as u32,
        image.height as u32,
        image.pixels.clone(),
    )
    .ok_or_else(|| Error::Dimension("png buffer size mismatch".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    buffer
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::parse("png", e.to_string()))?;
    Ok(out.into_inner())
}

/// An image cut into `rows x cols` blocks of `block_w x block_h` pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    rows: usize,
    cols: usize,
    block_w: usize,
    block_h: usize,
    blocks: Vec<RasterImage>,
}

impl BlockGrid {
    /// Assembles a grid from blocks already in row-major order.
    pub fn from_blocks(rows: usize, cols: usize, blocks: Vec<RasterImage>) -> Result<Self> {
        if rows == 0 || cols == 0 || blocks.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} grid cannot hold {} blocks",
                blocks.len()
            )));
        }
        let (block_w, block_h, channels) =
            (blocks[0].width, blocks[0].height, blocks[0].channels);
        if blocks
            .iter()
            .any(|b| b.width != block_w || b.height != block_h || b.channels != channels)
        {
            return Err(Error::Dimension("blocks differ in size".into()));
        }
        Ok(BlockGrid {
            rows,
            cols,
            block_w,
            block_h,
            blocks,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of blocks, `rows * cols`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_w(&self) -> usize {
        self.block_w
    }

    pub fn block_h(&self) -> usize {
        self.block_h
    }

    pub fn blocks(&self) -> &[RasterImage] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<RasterImage> {
        self.blocks
    }

    pub fn block(&self, row: usize, col: usize) -> &RasterImage {
        &self.blocks[row * self.cols + col]
    }
}

/// Number of whole blocks along each axis: `(rows, cols)`.
pub fn grid_dims(width: usize, height: usize, block_w: usize, block_h: usize) -> (usize, usize) {
    (height / block_h, width / block_w)
}

/// Cuts `image` into whole blocks; the right and bottom remainders are dropped.
pub fn partition(image: &RasterImage, block_w: usize, block_h: usize) -> Result<BlockGrid> {
    if block_w < 2 || block_h < 2 {
        return Err(Error::Dimension(format!(
            "block {block_w}x{block_h} is smaller than 2x2"
        )));
    }
    if block_w > image.width || block_h > image.height {
        return Err(Error::Dimension(format!(
            "block {block_w}x{block_h} exceeds {}x{} image",
            image.width, image.height
        )));
    }
    let (rows, cols) = grid_dims(image.width, image.height, block_w, block_h);
    let ch = image.channels;
    let row_len = block_w * ch;
    let mut blocks = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut samples = Vec::with_capacity(block_h * row_len);
            for y in r * block_h..(r + 1) * block_h {
                let at = (y * image.width + c * block_w) * ch;
                samples.extend_from_slice(&image.pixels[at..at + row_len]);
            }
            blocks.push(RasterImage {
                width: block_w,
                height: block_h,
                channels: ch,
                pixels: samples,
            });
        }
    }
    Ok(BlockGrid {
        rows,
        cols,
        block_w,
        block_h,
        blocks,
    })
}

/// Tiles the grid's blocks back into one image.
pub fn reassemble(grid: &BlockGrid) -> RasterImage {
    let ch = grid.blocks[0].channels;
    let width = grid.cols * grid.block_w;
    let height = grid.rows * grid.block_h;
    let row_len = grid.block_w * ch;
    let mut pixels = vec![0u8; width * height * ch];
    for (k, block) in grid.blocks.iter().enumerate() {
        let (r, c) = (k / grid.cols, k % grid.cols);
        for y in 0..grid.block_h {
            let dst = ((r * grid.block_h + y) * width + c * grid.block_w) * ch;
            pixels[dst..dst + row_len].copy_from_slice(&block.pixels[y * row_len..(y + 1) * row_len]);
        }
    }
    RasterImage {
        width,
        height,
        channels: ch,
        pixels,
    }
}

/// Mean squared error between two equally sized rasters.
pub fn mse(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels) {
        return Err(Error::Dimension(format!(
            "cannot compare {}x{}x{} with {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )));
    }
    let sum: u64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    Ok(sum as f64 / a.pixels.len() as f64)
}

/// Peak signal-to-noise ratio in dB; infinite for identical images.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    let m = mse(a, b)?;
    let peak = MAX_SAMPLE as f64;
    Ok(10.0 * (peak * peak / m).log10())
}
