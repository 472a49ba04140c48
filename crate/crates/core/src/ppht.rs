//! Progressive probabilistic Hough transform for line segments.
//!
//! Edge pixels are drawn in random order, vote over all angle bins, and as
//! soon as one bin crosses the vote threshold the corresponding line is
//! walked pixel-by-pixel to find the actual segment. Pixels of accepted
//! segments retract their votes, so overlapping structures do not multiply.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::raster::BinaryMask;

const THETA_BINS: usize = 180;

/// Detected line segment, endpoints in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl LineSegment {
    pub fn length(&self) -> f64 {
        ((self.x2 - self.x1).powi(2) + (self.y2 - self.y1).powi(2)).sqrt()
    }
}

/// Detector knobs; see the pipeline configuration for defaults.
#[derive(Debug, Clone)]
pub struct PphtParams {
    /// Accumulator votes required before a bin is considered a line.
    pub threshold: u32,
    /// Minimum accepted segment length in pixels.
    pub min_len: f64,
    /// Largest run of missing pixels the segment walk steps over.
    pub max_gap: u32,
    /// Sampling-order seed; fixes the output for a given edge map.
    pub seed: u64,
}

impl Default for PphtParams {
    fn default() -> Self {
        Self {
            threshold: 30,
            min_len: 20.0,
            max_gap: 5,
            seed: 7,
        }
    }
}

struct Accumulator {
    bins: Vec<u32>,
    rho_offset: f64,
    rho_count: usize,
    trig: Vec<(f64, f64)>,
}

impl Accumulator {
    fn new(width: u32, height: u32) -> Self {
        let diag = ((width as f64).powi(2) + (height as f64).powi(2)).sqrt();
        let rho_count = (2.0 * diag).ceil() as usize + 1;
        let trig = (0..THETA_BINS)
            .map(|t| {
                let theta = t as f64 * std::f64::consts::PI / THETA_BINS as f64;
                theta.sin_cos()
            })
            .collect();
        Self {
            bins: vec![0; rho_count * THETA_BINS],
            rho_offset: diag,
            rho_count,
            trig,
        }
    }

    #[inline]
    fn rho_bin(&self, x: f64, y: f64, t: usize) -> usize {
        let (sin, cos) = self.trig[t];
        let rho = x * cos + y * sin;
        ((rho + self.rho_offset).round() as usize).min(self.rho_count - 1)
    }

    /// Votes (x, y) into every angle bin; returns the best (votes, theta)
    /// among the bins just touched.
    fn vote(&mut self, x: f64, y: f64) -> (u32, usize) {
        let mut best = (0u32, 0usize);
        for t in 0..THETA_BINS {
            let r = self.rho_bin(x, y, t);
            let idx = r * THETA_BINS + t;
            self.bins[idx] += 1;
            if self.bins[idx] > best.0 {
                best = (self.bins[idx], t);
            }
        }
        best
    }

    fn unvote(&mut self, x: f64, y: f64) {
        for t in 0..THETA_BINS {
            let r = self.rho_bin(x, y, t);
            let idx = r * THETA_BINS + t;
            self.bins[idx] = self.bins[idx].saturating_sub(1);
        }
    }
}

/// Finds line segments in an edge mask. Deterministic for a fixed seed.
pub fn detect_segments(edges: &BinaryMask, params: &PphtParams) -> Vec<LineSegment> {
    let w = edges.width();
    let h = edges.height();
    let mut points: Vec<(u32, u32)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if edges.get(x, y) {
                points.push((x, y));
            }
        }
    }
    if points.is_empty() {
        return Vec::new();
    }

    let mut present = edges.clone();
    let mut voted = BinaryMask::new(w, h);
    let mut acc = Accumulator::new(w, h);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut segments = Vec::new();

    while !points.is_empty() {
        let idx = rng.random_range(0..points.len());
        let (x, y) = points.swap_remove(idx);
        if !present.get(x, y) {
            continue;
        }
        let (votes, theta_bin) = acc.vote(x as f64, y as f64);
        voted.set(x, y, true);
        if votes < params.threshold {
            continue;
        }

        let support = walk_line(&present, x, y, theta_bin, params.max_gap);
        let (first, last) = match (support.first(), support.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => continue,
        };
        let len = (((last.0 as f64) - (first.0 as f64)).powi(2)
            + ((last.1 as f64) - (first.1 as f64)).powi(2))
        .sqrt();
        if len < params.min_len {
            continue;
        }

        for &(sx, sy) in &support {
            present.set(sx, sy, false);
            if voted.get(sx, sy) {
                acc.unvote(sx as f64, sy as f64);
                voted.set(sx, sy, false);
            }
        }
        segments.push(LineSegment {
            x1: first.0 as f64,
            y1: first.1 as f64,
            x2: last.0 as f64,
            y2: last.1 as f64,
        });
    }
    segments
}

/// Walks from a seed pixel along the line of the given angle bin in both
/// directions, collecting edge pixels and tolerating gaps up to `max_gap`.
/// Returned pixels are ordered from one segment end to the other.
fn walk_line(
    present: &BinaryMask,
    x0: u32,
    y0: u32,
    theta_bin: usize,
    max_gap: u32,
) -> Vec<(u32, u32)> {
    let theta = theta_bin as f64 * std::f64::consts::PI / THETA_BINS as f64;
    // Line direction is perpendicular to the (cos, sin) normal.
    let dx = -theta.sin();
    let dy = theta.cos();
    // Perpendicular probe offsets cover a 1 px corridor on each side.
    let px = theta.cos().round() as i64;
    let py = theta.sin().round() as i64;
    let w = present.width() as i64;
    let h = present.height() as i64;

    let probe = |fx: f64, fy: f64| -> Option<(u32, u32)> {
        let rx = fx.round() as i64;
        let ry = fy.round() as i64;
        for (cx, cy) in [(rx, ry), (rx + px, ry + py), (rx - px, ry - py)] {
            if cx >= 0 && cy >= 0 && cx < w && cy < h && present.get(cx as u32, cy as u32) {
                return Some((cx as u32, cy as u32));
            }
        }
        None
    };

    let mut halves: [Vec<(u32, u32)>; 2] = [Vec::new(), Vec::new()];
    for (hi, sign) in [(-1.0f64), 1.0].into_iter().enumerate() {
        let mut gap = 0u32;
        let mut t = 1.0f64;
        while gap <= max_gap {
            let found = probe(x0 as f64 + sign * t * dx, y0 as f64 + sign * t * dy);
            match found {
                Some(p) => {
                    gap = 0;
                    if halves[hi].last() != Some(&p) {
                        halves[hi].push(p);
                    }
                }
                None => gap += 1,
            }
            t += 1.0;
        }
    }

    let mut out: Vec<(u32, u32)> = halves[0].iter().rev().copied().collect();
    out.push((x0, y0));
    out.extend_from_slice(&halves[1]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_with_line(w: u32, h: u32, x1: f64, y1: f64, x2: f64, y2: f64) -> BinaryMask {
        let mut mask = BinaryMask::new(w, h);
        let steps = ((x2 - x1).abs().max((y2 - y1).abs())).ceil() as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let x = (x1 + t * (x2 - x1)).round() as u32;
            let y = (y1 + t * (y2 - y1)).round() as u32;
            mask.set(x.min(w - 1), y.min(h - 1), true);
        }
        mask
    }

    fn endpoint_dist(seg: &LineSegment, p: (f64, f64)) -> f64 {
        let d1 = ((seg.x1 - p.0).powi(2) + (seg.y1 - p.1).powi(2)).sqrt();
        let d2 = ((seg.x2 - p.0).powi(2) + (seg.y2 - p.1).powi(2)).sqrt();
        d1.min(d2)
    }

    #[test]
    fn empty_mask_yields_no_segments() {
        let mask = BinaryMask::new(100, 100);
        assert!(detect_segments(&mask, &PphtParams::default()).is_empty());
    }

    #[test]
    fn single_slanted_line_recovered() {
        let mask = mask_with_line(200, 200, 30.0, 40.0, 160.0, 120.0);
        let segs = detect_segments(&mask, &PphtParams::default());
        assert_eq!(segs.len(), 1, "{segs:?}");
        let s = &segs[0];
        assert!(endpoint_dist(s, (30.0, 40.0)) <= 2.0, "{s:?}");
        assert!(endpoint_dist(s, (160.0, 120.0)) <= 2.0, "{s:?}");
    }

    #[test]
    fn axis_aligned_cross_yields_two_segments() {
        let mut mask = mask_with_line(150, 150, 20.0, 75.0, 130.0, 75.0);
        mask.or_with(&mask_with_line(150, 150, 75.0, 20.0, 75.0, 130.0));
        let segs = detect_segments(&mask, &PphtParams::default());
        assert_eq!(segs.len(), 2, "{segs:?}");
        let total: f64 = segs.iter().map(LineSegment::length).sum();
        assert!(total > 200.0, "covers both strokes: {total}");
    }

    #[test]
    fn short_strokes_are_ignored() {
        let mask = mask_with_line(100, 100, 40.0, 50.0, 52.0, 50.0);
        let params = PphtParams {
            threshold: 5,
            min_len: 20.0,
            ..Default::default()
        };
        assert!(detect_segments(&mask, &params).is_empty());
    }

    #[test]
    fn same_seed_same_output() {
        let mut mask = mask_with_line(200, 200, 10.0, 20.0, 180.0, 60.0);
        mask.or_with(&mask_with_line(200, 200, 30.0, 170.0, 170.0, 30.0));
        let a = detect_segments(&mask, &PphtParams::default());
        let b = detect_segments(&mask, &PphtParams::default());
        assert_eq!(a, b);
    }
}
