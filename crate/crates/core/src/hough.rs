//! Gradient-vote circle detection.
//!
//! Two stages: edge pixels vote along their gradient direction into a
//! center accumulator, then a radius histogram around the winning center
//! picks the radius. Cheaper than a full 3-D accumulator and accurate to
//! a couple of pixels on clean rings.

use crate::edges::{canny_with_gradients, GradientField};
use crate::raster::{BinaryMask, Raster};
use crate::roi::{Circle, RoiError};

/// Knobs for [`hough_circle`]. Defaults match the pipeline configuration.
#[derive(Debug, Clone)]
pub struct HoughOptions {
    /// Reject detections whose edge support per unit circumference falls
    /// below this fraction.
    pub min_score: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub sigma: f64,
}

impl Default for HoughOptions {
    fn default() -> Self {
        Self {
            min_score: 0.25,
            canny_low: 50.0,
            canny_high: 150.0,
            sigma: 1.4,
        }
    }
}

/// Finds the strongest circle with radius in `[r_min, r_max]`.
pub fn hough_circle(
    img: &Raster,
    r_min: f64,
    r_max: f64,
    opts: &HoughOptions,
) -> Result<Circle, RoiError> {
    assert!(r_min > 0.0 && r_min < r_max, "bad radius band");
    let (edges, grad) = canny_with_gradients(img, opts.canny_low, opts.canny_high, opts.sigma)
        .map_err(RoiError::Raster)?;
    let edge_points = collect_edges(&edges);
    if edge_points.is_empty() {
        return Err(RoiError::NoCircleFound);
    }

    let acc = vote_centers(img.width(), img.height(), &edge_points, &grad, r_min, r_max);
    let (cx, cy) = match peak_centroid(&acc, img.width(), img.height()) {
        Some(c) => c,
        None => return Err(RoiError::NoCircleFound),
    };

    let mut r = match radius_histogram(&edge_points, cx, cy, r_min, r_max) {
        Some(r) => r,
        None => return Err(RoiError::NoCircleFound),
    };

    // Refine on the band inliers with an algebraic least-squares circle fit;
    // the accumulator peak is only pixel-accurate.
    let mut cx = cx;
    let mut cy = cy;
    for _ in 0..2 {
        let inliers: Vec<(f64, f64)> = edge_points
            .iter()
            .map(|&(x, y)| (x as f64, y as f64))
            .filter(|&(x, y)| {
                let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                (d - r).abs() <= 3.0
            })
            .collect();
        match kasa_fit(&inliers) {
            Some((fx, fy, fr)) if fr >= r_min - 3.0 && fr <= r_max + 3.0 => {
                cx = fx;
                cy = fy;
                r = fr;
            }
            _ => break,
        }
    }

    // Support: edge pixels lying on the circle band, normalized by the
    // circumference.
    let support = edge_points
        .iter()
        .filter(|&&(x, y)| {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            (d - r).abs() <= 2.0
        })
        .count() as f64;
    let score = support / (2.0 * std::f64::consts::PI * r);
    if score < opts.min_score {
        return Err(RoiError::NoCircleFound);
    }
    Ok(Circle::new(cx, cy, r))
}

/// Algebraic circle fit (Kasa): minimizes the residual of
/// `x^2 + y^2 + A x + B y + C = 0` over the points. Coordinates are
/// centered on their mean for conditioning.
fn kasa_fit(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz, mut sx, mut sy, mut sz) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &(px, py) in points {
        let x = px - mx;
        let y = py - my;
        let z = x * x + y * y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxz += x * z;
        syz += y * z;
        sx += x;
        sy += y;
        sz += z;
    }
    // Normal equations for z = a*x + b*y + c.
    let m = [[sxx, sxy, sx], [sxy, syy, sy], [sx, sy, n]];
    let rhs = [sxz, syz, sz];
    let (a, b, c) = solve3(m, rhs)?;
    let cx = a / 2.0;
    let cy = b / 2.0;
    let r2 = c + cx * cx + cy * cy;
    if r2 <= 0.0 {
        return None;
    }
    Some((cx + mx, cy + my, r2.sqrt()))
}

fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<(f64, f64, f64)> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (cell, pv) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *cell -= f * pv;
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let z = rhs[2] / m[2][2];
    let y = (rhs[1] - m[1][2] * z) / m[1][1];
    let x = (rhs[0] - m[0][1] * y - m[0][2] * z) / m[0][0];
    Some((x, y, z))
}

fn collect_edges(edges: &BinaryMask) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for y in 0..edges.height() {
        for x in 0..edges.width() {
            if edges.get(x, y) {
                out.push((x, y));
            }
        }
    }
    out
}

fn vote_centers(
    width: u32,
    height: u32,
    edge_points: &[(u32, u32)],
    grad: &GradientField,
    r_min: f64,
    r_max: f64,
) -> Vec<u32> {
    let w = width as i64;
    let h = height as i64;
    let mut acc = vec![0u32; (w * h) as usize];
    for &(x, y) in edge_points {
        let (gx, gy, mag) = grad.at(x, y);
        if mag < 1e-9 {
            continue;
        }
        let ux = gx / mag;
        let uy = gy / mag;
        for sign in [-1.0f64, 1.0] {
            let mut t = r_min;
            while t <= r_max {
                let cx = (x as f64 + sign * t * ux).round() as i64;
                let cy = (y as f64 + sign * t * uy).round() as i64;
                if cx >= 0 && cy >= 0 && cx < w && cy < h {
                    acc[(cy * w + cx) as usize] += 1;
                }
                t += 1.0;
            }
        }
    }
    acc
}

/// Smooths the accumulator, finds the global peak, then takes a windowed
/// baseline-subtracted centroid around it (twice, recentering once). The
/// vote blob spreads over several pixels because gradient directions are
/// noisy; a plain argmax sits anywhere on the plateau.
fn peak_centroid(acc: &[u32], width: u32, height: u32) -> Option<(f64, f64)> {
    let w = width as i64;
    let h = height as i64;
    let mut smooth = vec![0f64; acc.len()];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0u64;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let nx = x + dx;
                    let ny = y + dy;
                    if nx >= 0 && ny >= 0 && nx < w && ny < h {
                        s += acc[(ny * w + nx) as usize] as u64;
                    }
                }
            }
            smooth[(y * w + x) as usize] = s as f64;
        }
    }
    let (peak_i, &peak_v) = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if peak_v <= 0.0 {
        return None;
    }
    let baseline = 0.3 * peak_v;
    let mut cx = (peak_i as i64 % w) as f64;
    let mut cy = (peak_i as i64 / w) as f64;
    for _ in 0..2 {
        let px = cx.round() as i64;
        let py = cy.round() as i64;
        let mut wsum = 0.0;
        let mut xsum = 0.0;
        let mut ysum = 0.0;
        for dy in -6..=6i64 {
            for dx in -6..=6i64 {
                let nx = px + dx;
                let ny = py + dy;
                if nx >= 0 && ny >= 0 && nx < w && ny < h {
                    let v = (smooth[(ny * w + nx) as usize] - baseline).max(0.0);
                    wsum += v;
                    xsum += v * nx as f64;
                    ysum += v * ny as f64;
                }
            }
        }
        if wsum <= 0.0 {
            break;
        }
        cx = xsum / wsum;
        cy = ysum / wsum;
    }
    Some((cx, cy))
}

/// Histogram of edge distances from the candidate center; the radius is the
/// mass centroid of a window around the tallest bin, which keeps double-wall
/// rings centered.
fn radius_histogram(
    edge_points: &[(u32, u32)],
    cx: f64,
    cy: f64,
    r_min: f64,
    r_max: f64,
) -> Option<f64> {
    let lo = r_min.floor() as i64 - 2;
    let n_bins = (r_max.ceil() as i64 + 2 - lo + 1) as usize;
    let mut hist = vec![0u32; n_bins];
    for &(x, y) in edge_points {
        let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
        let bin = d.round() as i64 - lo;
        if bin >= 0 && (bin as usize) < n_bins {
            hist[bin as usize] += 1;
        }
    }
    let (peak, &peak_v) = hist.iter().enumerate().max_by_key(|(_, &v)| v)?;
    if peak_v == 0 {
        return None;
    }
    let from = peak.saturating_sub(4);
    let to = (peak + 4).min(n_bins - 1);
    let mut wsum = 0.0;
    let mut rsum = 0.0;
    for (bin, &v) in hist.iter().enumerate().take(to + 1).skip(from) {
        wsum += v as f64;
        rsum += v as f64 * (bin as i64 + lo) as f64;
    }
    if wsum <= 0.0 {
        None
    } else {
        Some(rsum / wsum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::flip_h;

    /// Draws an anti-aliased dark ring on a bright field.
    fn ring_image(w: u32, h: u32, cx: f64, cy: f64, r: f64) -> Raster {
        let mut img = Raster::filled(w, h, 1, 230);
        for y in 0..h {
            for x in 0..w {
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                let band = (2.0 - (d - r).abs()).clamp(0.0, 1.0);
                if band > 0.0 {
                    let v = 230.0 * (1.0 - band) + 50.0 * band;
                    img.set(x, y, 0, v.round() as u8);
                }
            }
        }
        img
    }

    #[test]
    fn centered_ring_recovered_within_two_px() {
        let img = ring_image(900, 900, 450.0, 450.0, 380.0);
        let c = hough_circle(&img, 270.0, 432.0, &HoughOptions::default()).unwrap();
        assert!((c.cx - 450.0).abs() <= 2.0, "cx={}", c.cx);
        assert!((c.cy - 450.0).abs() <= 2.0, "cy={}", c.cy);
        assert!((c.r - 380.0).abs() <= 2.0, "r={}", c.r);
    }

    #[test]
    fn off_center_ring_recovered() {
        let img = ring_image(900, 900, 400.0, 500.0, 300.0);
        let c = hough_circle(&img, 200.0, 432.0, &HoughOptions::default()).unwrap();
        assert!((c.cx - 400.0).abs() <= 2.0, "cx={}", c.cx);
        assert!((c.cy - 500.0).abs() <= 2.0, "cy={}", c.cy);
        assert!((c.r - 300.0).abs() <= 2.0, "r={}", c.r);
    }

    #[test]
    fn uniform_image_has_no_circle() {
        let img = Raster::filled(300, 300, 1, 128);
        assert!(matches!(
            hough_circle(&img, 60.0, 140.0, &HoughOptions::default()),
            Err(RoiError::NoCircleFound)
        ));
    }

    #[test]
    fn detection_is_flip_equivariant() {
        let img = ring_image(420, 400, 230.0, 190.0, 130.0);
        let opts = HoughOptions::default();
        let c = hough_circle(&img, 80.0, 190.0, &opts).unwrap();
        let cf = hough_circle(&flip_h(&img), 80.0, 190.0, &opts).unwrap();
        let expected_cx = (420 - 1) as f64 - c.cx;
        assert!((cf.cx - expected_cx).abs() <= 2.0);
        assert!((cf.cy - c.cy).abs() <= 2.0);
        assert!((cf.r - c.r).abs() <= 2.0);
    }
}
