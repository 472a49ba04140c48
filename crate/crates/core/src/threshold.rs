//! Integral-image adaptive thresholding.

use crate::raster::{BinaryMask, Raster, RasterError};

/// Summed-area table with O(1) rectangle queries. Values are cumulative
/// sums of the image's samples.
pub(crate) struct IntegralImage {
    width: usize,
    sums: Vec<u64>,
}

impl IntegralImage {
    pub(crate) fn new(img: &Raster) -> Self {
        debug_assert_eq!(img.channels(), 1);
        let w = img.width() as usize;
        let h = img.height() as usize;
        // One extra row/column of zeros removes all the border special cases.
        let stride = w + 1;
        let mut sums = vec![0u64; stride * (h + 1)];
        let data = img.data();
        for y in 0..h {
            let mut row = 0u64;
            for x in 0..w {
                row += data[y * w + x] as u64;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { width: w, sums }
    }

    /// Sum over the inclusive pixel rectangle [x0, x1] x [y0, y1].
    #[inline]
    pub(crate) fn rect_sum(&self, x0: u32, y0: u32, x1: u32, y1: u32) -> u64 {
        let stride = self.width + 1;
        let (x0, y0, x1, y1) = (x0 as usize, y0 as usize, x1 as usize + 1, y1 as usize + 1);
        self.sums[y1 * stride + x1] + self.sums[y0 * stride + x0]
            - self.sums[y0 * stride + x1]
            - self.sums[y1 * stride + x0]
    }
}

/// Sets a bit wherever the pixel is darker than its local window mean minus
/// `offset`. The window is a `window x window` square clipped at the image
/// borders; means come from an integral image.
///
/// With `invert` the comparison flips to select pixels *brighter* than the
/// local mean plus `offset`.
pub fn adaptive_threshold(
    img: &Raster,
    window: u32,
    offset: f64,
    invert: bool,
) -> Result<BinaryMask, RasterError> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(RasterError::BadWindow(window));
    }
    debug_assert_eq!(img.channels(), 1, "adaptive_threshold expects gray input");
    let w = img.width();
    let h = img.height();
    let half = window / 2;
    let integral = IntegralImage::new(img);
    let mut mask = BinaryMask::new(w, h);
    let data = img.data();
    for y in 0..h {
        let y0 = y.saturating_sub(half);
        let y1 = (y + half).min(h - 1);
        for x in 0..w {
            let x0 = x.saturating_sub(half);
            let x1 = (x + half).min(w - 1);
            let count = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
            let mean = integral.rect_sum(x0, y0, x1, y1) as f64 / count;
            let px = data[y as usize * w as usize + x as usize] as f64;
            let set = if invert {
                px > mean + offset
            } else {
                px < mean - offset
            };
            mask.set(x, y, set);
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force sliding-window oracle with the same border clipping.
    fn slow_threshold(img: &Raster, window: u32, offset: f64) -> BinaryMask {
        let w = img.width();
        let h = img.height();
        let half = (window / 2) as i64;
        let mut mask = BinaryMask::new(w, h);
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let mut sum = 0u64;
                let mut count = 0u64;
                for wy in y - half..=y + half {
                    for wx in x - half..=x + half {
                        if wx >= 0 && wy >= 0 && wx < w as i64 && wy < h as i64 {
                            sum += img.get(wx as u32, wy as u32, 0) as u64;
                            count += 1;
                        }
                    }
                }
                let mean = sum as f64 / count as f64;
                let px = img.get(x as u32, y as u32, 0) as f64;
                mask.set(x as u32, y as u32, px < mean - offset);
            }
        }
        mask
    }

    #[test]
    fn uniform_image_yields_empty_mask() {
        let img = Raster::filled(40, 40, 1, 128);
        let mask = adaptive_threshold(&img, 15, 5.0, false).unwrap();
        assert_eq!(mask.popcount(), 0);
    }

    #[test]
    fn single_black_pixel_on_white_is_selected() {
        let mut img = Raster::filled(64, 64, 1, 255);
        img.set(30, 31, 0, 0);
        let mask = adaptive_threshold(&img, 15, 10.0, false).unwrap();
        assert!(mask.get(30, 31));
        assert_eq!(mask.popcount(), 1);
        assert_eq!(mask, slow_threshold(&img, 15, 10.0));
    }

    #[test]
    fn step_image_marks_dark_boundary_band() {
        let mut img = Raster::zeros(60, 20, 1);
        for y in 0..20 {
            for x in 0..60 {
                img.set(x, y, 0, if x < 30 { 40 } else { 220 });
            }
        }
        let mask = adaptive_threshold(&img, 11, 0.0, false).unwrap();
        let oracle = slow_threshold(&img, 11, 0.0);
        assert_eq!(mask, oracle);
        // Only dark-side pixels near the step are below their window mean.
        for y in 0..20 {
            for x in 0..60u32 {
                if mask.get(x, y) {
                    assert!((25..30).contains(&x), "unexpected set bit at x={x}");
                }
            }
        }
        assert!(mask.popcount() > 0);
    }

    #[test]
    fn even_window_is_rejected() {
        let img = Raster::filled(10, 10, 1, 7);
        assert!(matches!(
            adaptive_threshold(&img, 8, 1.0, false),
            Err(RasterError::BadWindow(8))
        ));
    }

    #[test]
    fn matches_brute_force_on_patterned_image() {
        let mut img = Raster::zeros(37, 29, 1);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = ((i * 97 + 13) % 256) as u8;
        }
        for &window in &[3u32, 7, 15] {
            let fast = adaptive_threshold(&img, window, 4.0, false).unwrap();
            let slow = slow_threshold(&img, window, 4.0);
            assert_eq!(fast, slow, "window {window}");
        }
    }

    #[test]
    fn inverted_mode_selects_bright_pixels() {
        let mut img = Raster::filled(32, 32, 1, 30);
        img.set(16, 16, 0, 250);
        let mask = adaptive_threshold(&img, 15, 10.0, true).unwrap();
        assert!(mask.get(16, 16));
        assert_eq!(mask.popcount(), 1);
    }
}
