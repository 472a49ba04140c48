//! Core image containers and the pixel-level primitives shared by the
//! whole pipeline: grayscale conversion, center crop, rotation, flips and
//! PNG round-tripping.

use std::path::Path;

use thiserror::Error;

/// Errors produced by the low-level image primitives.
#[derive(Debug, Error)]
pub enum RasterError {
    #[error("crop side {side} exceeds image bounds {width}x{height}")]
    CropTooLarge { side: u32, width: u32, height: u32 },
    #[error("adaptive threshold window must be odd and >= 3, got {0}")]
    BadWindow(u32),
    #[error("canny thresholds must satisfy low <= high, got low={low} high={high}")]
    BadThresholds { low: f64, high: f64 },
    #[error("expected {expected} channels, image has {actual}")]
    ChannelMismatch { expected: u8, actual: u8 },
    #[error("pixel buffer length {len} does not match {width}x{height}x{channels}")]
    BadBufferLength {
        len: usize,
        width: u32,
        height: u32,
        channels: u8,
    },
    #[error("image dimensions must be at least 1x1")]
    EmptyImage,
    #[error("png codec: {0}")]
    Png(#[from] image::ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported png color type {0:?}")]
    UnsupportedColor(image::ColorType),
}

/// Interpolation mode for geometric resampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    /// Round to the nearest source pixel. Exact for multiples of 90 degrees.
    Nearest,
    /// Bilinear blend of the four surrounding source pixels.
    Bilinear,
}

/// 8-bit raster image, 1 (gray) or 3 (RGB) channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Raster {
    /// Builds a raster from raw row-major samples.
    pub fn from_vec(
        width: u32,
        height: u32,
        channels: u8,
        data: Vec<u8>,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage);
        }
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(RasterError::BadBufferLength {
                len: data.len(),
                width,
                height,
                channels,
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// All-zero (black) image.
    pub fn zeros(width: u32, height: u32, channels: u8) -> Self {
        Self::filled(width, height, channels, 0)
    }

    /// Constant-intensity image.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Self {
        assert!(width >= 1 && height >= 1);
        assert!(channels == 1 || channels == 3);
        Self {
            width,
            height,
            channels,
            data: vec![value; width as usize * height as usize * channels as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    /// Sample of channel `c` at (x, y). Panics out of bounds.
    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        self.data[self.index(x, y) + c as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u8, value: u8) {
        let i = self.index(x, y) + c as usize;
        self.data[i] = value;
    }

    /// Intensity at (x, y): the sample itself for gray images, BT.601 luma
    /// for RGB.
    #[inline]
    pub fn luma(&self, x: u32, y: u32) -> u8 {
        if self.channels == 1 {
            self.get(x, y, 0)
        } else {
            let i = self.index(x, y);
            luma601(self.data[i], self.data[i + 1], self.data[i + 2])
        }
    }

    /// Bilinear intensity sample at a fractional position, clamped to the
    /// frame. Single-channel images only.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        debug_assert_eq!(self.channels, 1);
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor();
        let y0 = yc.floor();
        let fx = xc - x0;
        let fy = yc - y0;
        let x0 = x0 as u32;
        let y0 = y0 as u32;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let p00 = self.get(x0, y0, 0) as f64;
        let p10 = self.get(x1, y0, 0) as f64;
        let p01 = self.get(x0, y1, 0) as f64;
        let p11 = self.get(x1, y1, 0) as f64;
        p00 * (1.0 - fx) * (1.0 - fy)
            + p10 * fx * (1.0 - fy)
            + p01 * (1.0 - fx) * fy
            + p11 * fx * fy
    }

    /// Reads an 8-bit gray or RGB PNG.
    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        let img = image::open(path)?;
        Self::from_dynamic(img)
    }

    /// Decodes a PNG held in memory.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
        Self::from_dynamic(img)
    }

    fn from_dynamic(img: image::DynamicImage) -> Result<Self, RasterError> {
        match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Self::from_vec(w, h, 1, g.into_raw())
            }
            image::DynamicImage::ImageRgb8(c) => {
                let (w, h) = c.dimensions();
                Self::from_vec(w, h, 3, c.into_raw())
            }
            other => {
                // Normalize everything else (RGBA, 16-bit) to RGB8.
                let c = other.to_rgb8();
                let (w, h) = c.dimensions();
                Self::from_vec(w, h, 3, c.into_raw())
            }
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let bytes = self.to_png_bytes()?;
        std::fs::write(path, bytes)?;
        Ok(())
    }

    /// Encodes to PNG in memory. Deterministic for identical pixel data.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>, RasterError> {
        let mut out = std::io::Cursor::new(Vec::new());
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::write_buffer_with_format(
            &mut out,
            &self.data,
            self.width,
            self.height,
            color,
            image::ImageFormat::Png,
        )?;
        Ok(out.into_inner())
    }
}

#[inline]
fn luma601(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

/// BT.601 grayscale conversion. Single-channel input passes through
/// unchanged.
pub fn to_grayscale(img: &Raster) -> Raster {
    if img.channels() == 1 {
        return img.clone();
    }
    let mut data = Vec::with_capacity(img.width() as usize * img.height() as usize);
    for px in img.data().chunks_exact(3) {
        data.push(luma601(px[0], px[1], px[2]));
    }
    Raster::from_vec(img.width(), img.height(), 1, data).expect("sized buffer")
}

/// Square crop of `side` pixels about the image center. For even leftovers
/// the extra row/column goes to the bottom/right (top-left tie break).
pub fn crop_center(img: &Raster, side: u32) -> Result<Raster, RasterError> {
    if side > img.width() || side > img.height() || side == 0 {
        return Err(RasterError::CropTooLarge {
            side,
            width: img.width(),
            height: img.height(),
        });
    }
    let x0 = (img.width() - side) / 2;
    let y0 = (img.height() - side) / 2;
    let ch = img.channels() as usize;
    let row_bytes = side as usize * ch;
    let mut data = Vec::with_capacity(row_bytes * side as usize);
    for y in y0..y0 + side {
        let start = (y as usize * img.width() as usize + x0 as usize) * ch;
        data.extend_from_slice(&img.data()[start..start + row_bytes]);
    }
    Raster::from_vec(side, side, img.channels(), data)
}

/// Rotates about the image center. `angle` is in degrees, counter-clockwise
/// on screen (y axis pointing down). Out-of-frame samples fill with 0.
pub fn rotate(img: &Raster, angle_deg: f64, interp: Interp) -> Raster {
    let w = img.width();
    let h = img.height();
    let cx = (w - 1) as f64 / 2.0;
    let cy = (h - 1) as f64 / 2.0;
    let theta = angle_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let ch = img.channels();
    let mut out = Raster::zeros(w, h, ch);
    for y in 0..h {
        let dy = y as f64 - cy;
        for x in 0..w {
            let dx = x as f64 - cx;
            // Inverse map: rotate the output offset back into the source.
            let sx = cx + dx * cos - dy * sin;
            let sy = cy + dx * sin + dy * cos;
            match interp {
                Interp::Nearest => {
                    let nx = sx.round();
                    let ny = sy.round();
                    if nx >= 0.0 && ny >= 0.0 && nx < w as f64 && ny < h as f64 {
                        let (nx, ny) = (nx as u32, ny as u32);
                        for c in 0..ch {
                            out.set(x, y, c, img.get(nx, ny, c));
                        }
                    }
                }
                Interp::Bilinear => {
                    if sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f64 && sy <= (h - 1) as f64 {
                        for c in 0..ch {
                            let v = bilinear_channel(img, sx, sy, c);
                            out.set(x, y, c, v.round().clamp(0.0, 255.0) as u8);
                        }
                    }
                }
            }
        }
    }
    out
}

fn bilinear_channel(img: &Raster, x: f64, y: f64, c: u8) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as u32;
    let y0 = y0 as u32;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let p00 = img.get(x0, y0, c) as f64;
    let p10 = img.get(x1, y0, c) as f64;
    let p01 = img.get(x0, y1, c) as f64;
    let p11 = img.get(x1, y1, c) as f64;
    p00 * (1.0 - fx) * (1.0 - fy) + p10 * fx * (1.0 - fy) + p01 * (1.0 - fx) * fy + p11 * fx * fy
}

/// Mirror left-right.
pub fn flip_h(img: &Raster) -> Raster {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = Raster::zeros(w, h, ch);
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                out.set(x, y, c, img.get(w - 1 - x, y, c));
            }
        }
    }
    out
}

/// Mirror top-bottom.
pub fn flip_v(img: &Raster) -> Raster {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = Raster::zeros(w, h, ch);
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                out.set(x, y, c, img.get(x, h - 1 - y, c));
            }
        }
    }
    out
}

/// Mirror both axes; identical to a 180-degree rotation.
pub fn flip_hv(img: &Raster) -> Raster {
    flip_h(&flip_v(img))
}

/// Row-major boolean mask, the output type of thresholding, edges and
/// morphology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        assert!(width >= 1 && height >= 1);
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width as usize * height as usize);
        Self {
            width,
            height,
            bits,
        }
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

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    /// Number of set bits.
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Set-bit count of the intersection with `other`. Masks must agree in
    /// shape.
    pub fn intersection_count(&self, other: &BinaryMask) -> usize {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count()
    }

    /// In-place intersection.
    pub fn and_with(&mut self, other: &BinaryMask) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= b;
        }
    }

    /// In-place union.
    pub fn or_with(&mut self, other: &BinaryMask) {
        assert_eq!((self.width, self.height), (other.width, other.height));
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    /// Renders set bits as 255 on 0, the PNG serialization convention.
    pub fn to_raster(&self) -> Raster {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        Raster::from_vec(self.width, self.height, 1, data).expect("sized buffer")
    }

    /// Reads a mask from a gray raster: any non-zero sample is a set bit.
    pub fn from_raster(img: &Raster) -> Result<Self, RasterError> {
        if img.channels() != 1 {
            return Err(RasterError::ChannelMismatch {
                expected: 1,
                actual: img.channels(),
            });
        }
        let bits = img.data().iter().map(|&v| v > 0).collect();
        Ok(Self::from_bits(img.width(), img.height(), bits))
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        self.to_raster().save_png(path)
    }

    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        let img = Raster::load_png(path)?;
        Self::from_raster(&to_grayscale(&img))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(pixels: &[(u8, u8, u8)], w: u32, h: u32) -> Raster {
        let mut data = Vec::new();
        for &(r, g, b) in pixels {
            data.extend_from_slice(&[r, g, b]);
        }
        Raster::from_vec(w, h, 3, data).unwrap()
    }

    #[test]
    fn grayscale_extremes_and_red() {
        let img = rgb(&[(255, 255, 255), (0, 0, 0), (255, 0, 0)], 3, 1);
        let gray = to_grayscale(&img);
        assert_eq!(gray.data(), &[255, 0, 76]);
    }

    #[test]
    fn grayscale_passthrough_for_gray_input() {
        let img = Raster::filled(4, 3, 1, 97);
        assert_eq!(to_grayscale(&img), img);
    }

    #[test]
    fn crop_center_offsets() {
        // 1920x1440 with side 900 starts at (510, 270).
        let mut img = Raster::zeros(1920, 1440, 1);
        img.set(510, 270, 0, 200);
        let cropped = crop_center(&img, 900).unwrap();
        assert_eq!(cropped.width(), 900);
        assert_eq!(cropped.height(), 900);
        assert_eq!(cropped.get(0, 0, 0), 200);
    }

    #[test]
    fn crop_full_frame_is_identity() {
        let mut img = Raster::zeros(900, 900, 1);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = (i % 251) as u8;
        }
        assert_eq!(crop_center(&img, 900).unwrap(), img);
    }

    #[test]
    fn crop_too_large_errors() {
        let img = Raster::zeros(100, 100, 1);
        assert!(matches!(
            crop_center(&img, 900),
            Err(RasterError::CropTooLarge { .. })
        ));
    }

    #[test]
    fn crop_center_is_idempotent() {
        let mut img = Raster::zeros(101, 77, 1);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = (i * 7 % 256) as u8;
        }
        let once = crop_center(&img, 50).unwrap();
        let twice = crop_center(&once, 50).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn rotate_zero_is_identity() {
        let mut img = Raster::zeros(31, 20, 1);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = (i * 13 % 256) as u8;
        }
        assert_eq!(rotate(&img, 0.0, Interp::Bilinear), img);
        assert_eq!(rotate(&img, 0.0, Interp::Nearest), img);
    }

    #[test]
    fn rotate_full_turn_nearest_is_identity() {
        let mut img = Raster::zeros(25, 25, 1);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = (i * 31 % 256) as u8;
        }
        assert_eq!(rotate(&img, 360.0, Interp::Nearest), img);
    }

    #[test]
    fn rotate_quarter_turn_moves_point() {
        // Bright pixel at (c + r, c) must land at (c, c - r) within 1 px.
        let c = 20u32;
        let r = 12u32;
        let mut img = Raster::zeros(41, 41, 1);
        img.set(c + r, c, 0, 255);
        let rotated = rotate(&img, 90.0, Interp::Nearest);
        let mut found = None;
        for y in 0..41 {
            for x in 0..41 {
                if rotated.get(x, y, 0) > 128 {
                    found = Some((x as i64, y as i64));
                }
            }
        }
        let (x, y) = found.expect("bright pixel survives rotation");
        assert!((x - c as i64).abs() <= 1, "x={x}");
        assert!((y - (c - r) as i64).abs() <= 1, "y={y}");
    }

    #[test]
    fn rotate_round_trip_mostly_recovers_smooth_image() {
        // Smooth gradient; compare pixels well inside the inscribed circle.
        let n = 64u32;
        let mut img = Raster::zeros(n, n, 1);
        for y in 0..n {
            for x in 0..n {
                img.set(x, y, 0, ((x * 2 + y) % 256) as u8);
            }
        }
        let there = rotate(&img, 23.0, Interp::Nearest);
        let back = rotate(&there, -23.0, Interp::Nearest);
        let c = (n - 1) as f64 / 2.0;
        let r_ok = n as f64 / 2.0 - 2.0;
        let mut total = 0usize;
        let mut agree = 0usize;
        for y in 0..n {
            for x in 0..n {
                let d = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
                if d < r_ok {
                    total += 1;
                    let diff = (img.get(x, y, 0) as i32 - back.get(x, y, 0) as i32).abs();
                    if diff <= 2 {
                        agree += 1;
                    }
                }
            }
        }
        assert!(
            agree as f64 >= 0.99 * total as f64,
            "agreement {agree}/{total}"
        );
    }

    #[test]
    fn flips_are_involutions_and_compose() {
        let img = rgb(&[(1, 2, 3), (4, 5, 6), (7, 8, 9), (10, 11, 12)], 2, 2);
        assert_eq!(flip_h(&flip_h(&img)), img);
        assert_eq!(flip_v(&flip_v(&img)), img);
        assert_eq!(flip_hv(&img), rotate(&img, 180.0, Interp::Nearest));
    }

    #[test]
    fn flip_h_swaps_two_pixel_row() {
        let img = rgb(&[(10, 10, 10), (20, 20, 20)], 2, 1);
        let flipped = flip_h(&img);
        assert_eq!(flipped.get(0, 0, 0), 20);
        assert_eq!(flipped.get(1, 0, 0), 10);
    }

    #[test]
    fn png_round_trip_gray_and_rgb() {
        let dir = std::env::temp_dir().join("soluscan_raster_png_test");
        std::fs::create_dir_all(&dir).unwrap();
        let mut gray = Raster::zeros(13, 7, 1);
        for (i, v) in gray.data_mut().iter_mut().enumerate() {
            *v = (i * 19 % 256) as u8;
        }
        let p = dir.join("gray.png");
        gray.save_png(&p).unwrap();
        assert_eq!(Raster::load_png(&p).unwrap(), gray);

        let color = rgb(&[(9, 8, 7), (6, 5, 4), (3, 2, 1), (0, 255, 128)], 2, 2);
        let p = dir.join("rgb.png");
        color.save_png(&p).unwrap();
        assert_eq!(Raster::load_png(&p).unwrap(), color);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn mask_round_trips_through_raster() {
        let mut mask = BinaryMask::new(9, 4);
        mask.set(3, 2, true);
        mask.set(8, 0, true);
        let back = BinaryMask::from_raster(&mask.to_raster()).unwrap();
        assert_eq!(back, mask);
        assert_eq!(back.popcount(), 2);
    }
}
