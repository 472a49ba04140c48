//! Gaussian smoothing, Sobel gradients and the Canny edge detector.

use crate::raster::{BinaryMask, Raster, RasterError};

/// Gradient field of a gray image: per-pixel x/y derivatives and L2
/// magnitude.
pub struct GradientField {
    pub width: u32,
    pub height: u32,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl GradientField {
    #[inline]
    pub fn at(&self, x: u32, y: u32) -> (f64, f64, f64) {
        let i = y as usize * self.width as usize + x as usize;
        (self.gx[i], self.gy[i], self.magnitude[i])
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur with border clamping. Returns f64 samples so the
/// downstream gradient work keeps full precision.
pub fn gaussian_blur_f64(img: &Raster, sigma: f64) -> Vec<f64> {
    debug_assert_eq!(img.channels(), 1);
    let w = img.width() as i64;
    let h = img.height() as i64;
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let data = img.data();

    let mut horiz = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &kv) in kernel.iter().enumerate() {
                let sx = (x + j as i64 - radius).clamp(0, w - 1);
                acc += kv * data[(y * w + sx) as usize] as f64;
            }
            horiz[(y * w + x) as usize] = acc;
        }
    }
    let mut out = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &kv) in kernel.iter().enumerate() {
                let sy = (y + j as i64 - radius).clamp(0, h - 1);
                acc += kv * horiz[(sy * w + x) as usize];
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    out
}

/// 3x3 Sobel gradients of a pre-smoothed field. Border pixels replicate
/// their neighbors.
fn sobel(field: &[f64], width: u32, height: u32) -> GradientField {
    let w = width as i64;
    let h = height as i64;
    let at = |x: i64, y: i64| -> f64 {
        let xc = x.clamp(0, w - 1);
        let yc = y.clamp(0, h - 1);
        field[(yc * w + xc) as usize]
    };
    let mut gx = vec![0.0; (w * h) as usize];
    let mut gy = vec![0.0; (w * h) as usize];
    let mut mag = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let sx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let sy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = (y * w + x) as usize;
            gx[i] = sx;
            gy[i] = sy;
            mag[i] = (sx * sx + sy * sy).sqrt();
        }
    }
    GradientField {
        width,
        height,
        gx,
        gy,
        magnitude: mag,
    }
}

/// Smoothed Sobel gradient field, shared by Canny and circle detection.
pub fn gradients(img: &Raster, sigma: f64) -> GradientField {
    let smoothed = gaussian_blur_f64(img, sigma);
    sobel(&smoothed, img.width(), img.height())
}

/// Canny edge detection: Gaussian smooth, Sobel, quantized non-maximum
/// suppression, then double-threshold hysteresis (8-connected).
pub fn canny(img: &Raster, low: f64, high: f64, sigma: f64) -> Result<BinaryMask, RasterError> {
    canny_with_gradients(img, low, high, sigma).map(|(mask, _)| mask)
}

/// [`canny`] that also hands back the gradient field, for callers that vote
/// along gradient directions afterwards.
pub fn canny_with_gradients(
    img: &Raster,
    low: f64,
    high: f64,
    sigma: f64,
) -> Result<(BinaryMask, GradientField), RasterError> {
    if low > high {
        return Err(RasterError::BadThresholds { low, high });
    }
    let grad = gradients(img, sigma);
    let w = img.width() as i64;
    let h = img.height() as i64;

    // Non-maximum suppression along the quantized gradient direction; ties
    // break toward the lower-index neighbor so plateau edges stay 1 px wide.
    let mut thin = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let m = grad.magnitude[i];
            if m == 0.0 {
                continue;
            }
            let angle = grad.gy[i].atan2(grad.gx[i]);
            // Quantize to one of four directions (in units of 45 degrees).
            let sector = ((angle + std::f64::consts::PI) / (std::f64::consts::PI / 4.0)).round()
                as i64
                % 4;
            let (dx, dy) = match sector {
                0 => (1i64, 0i64),  // horizontal gradient
                1 => (1, 1),        // diagonal
                2 => (0, 1),        // vertical gradient
                _ => (-1, 1),       // anti-diagonal
            };
            let fetch = |xx: i64, yy: i64| -> f64 {
                if xx < 0 || yy < 0 || xx >= w || yy >= h {
                    0.0
                } else {
                    grad.magnitude[(yy * w + xx) as usize]
                }
            };
            let fwd = fetch(x + dx, y + dy);
            let back = fetch(x - dx, y - dy);
            // Strict on the back side only, so a two-pixel plateau keeps
            // exactly one survivor.
            if m >= fwd && m > back {
                thin[i] = m;
            }
        }
    }

    // Hysteresis: strong seeds flood through weak pixels.
    let mut mask = BinaryMask::new(img.width(), img.height());
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if thin[i] >= high && !mask.get(x as u32, y as u32) {
                mask.set(x as u32, y as u32, true);
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for dy in -1..=1i64 {
                        for dx in -1..=1i64 {
                            let nx = cx + dx;
                            let ny = cy + dy;
                            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                                continue;
                            }
                            let ni = (ny * w + nx) as usize;
                            if thin[ni] >= low && !mask.get(nx as u32, ny as u32) {
                                mask.set(nx as u32, ny as u32, true);
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((mask, grad))
}
