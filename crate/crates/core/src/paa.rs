//! Particle amount analysis: adaptive-threshold count of undissolved-solute
//! pixels inside the ROI of the white-background capture.

use crate::config::PaaCfg;
use crate::raster::{BinaryMask, RasterError};
use crate::roi::RoiImage;
use crate::threshold::adaptive_threshold;

/// Thresholds the ROI image and clears everything outside the (margin-eroded)
/// region of interest. Particles are darker than the transmitted white
/// backlight; `cfg.invert` flips the comparison for bright residues.
pub fn particle_mask(roi: &RoiImage, cfg: &PaaCfg) -> Result<BinaryMask, RasterError> {
    let mut mask = adaptive_threshold(&roi.img, cfg.window, cfg.offset, cfg.invert)?;
    mask.and_with(&roi.mask);
    // Drop a thin rim: meniscus shading and residual wall pixels otherwise
    // leak into the count.
    let rim = roi.circle.r - cfg.edge_margin;
    let rim2 = rim * rim;
    for y in 0..mask.height() {
        let dy = y as f64 - roi.circle.cy;
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let dx = x as f64 - roi.circle.cx;
                if dx * dx + dy * dy > rim2 {
                    mask.set(x, y, false);
                }
            }
        }
    }
    Ok(mask)
}

/// Number of particle pixels inside the ROI.
pub fn particle_pixel_count(roi: &RoiImage, cfg: &PaaCfg) -> Result<usize, RasterError> {
    Ok(particle_mask(roi, cfg)?.popcount())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{flip_h, flip_v, Raster};
    use crate::roi::{extract_roi, Circle};

    fn disk_scene(side: u32, particles: &[(f64, f64, f64)]) -> Raster {
        let mut img = Raster::filled(side, side, 1, 230);
        for y in 0..side {
            for x in 0..side {
                for &(px, py, pr) in particles {
                    let d = ((x as f64 - px).powi(2) + (y as f64 - py).powi(2)).sqrt();
                    let alpha = (pr + 0.5 - d).clamp(0.0, 1.0);
                    if alpha > 0.0 {
                        let v = 230.0 * (1.0 - alpha) + 50.0 * alpha;
                        img.set(x, y, 0, v.round() as u8);
                    }
                }
            }
        }
        img
    }

    fn centered_roi(img: &Raster, r: f64) -> RoiImage {
        let c = (img.width() - 1) as f64 / 2.0;
        extract_roi(img, Circle::new(c, c, r), 0.0).unwrap()
    }

    #[test]
    fn clean_scene_counts_nothing() {
        let img = disk_scene(201, &[]);
        let roi = centered_roi(&img, 90.0);
        let count = particle_pixel_count(&roi, &PaaCfg::default()).unwrap();
        assert_eq!(count, 0);
    }

    #[test]
    fn uniform_dark_roi_is_empty() {
        let img = Raster::zeros(151, 151, 1);
        let roi = centered_roi(&img, 70.0);
        assert_eq!(particle_pixel_count(&roi, &PaaCfg::default()).unwrap(), 0);
    }

    #[test]
    fn fifty_particles_count_close_to_area() {
        // 50 disks of radius 5 scattered well apart on a 501px frame.
        let mut particles = Vec::new();
        let c = 250.0;
        for i in 0..50 {
            let ang = i as f64 * 0.7;
            let rad = 40.0 + (i % 17) as f64 * 10.0;
            particles.push((c + rad * ang.cos(), c + rad * ang.sin(), 5.0));
        }
        let img = disk_scene(501, &particles);
        let roi = centered_roi(&img, 235.0);
        let mask = particle_mask(&roi, &PaaCfg::default()).unwrap();
        let count = mask.popcount() as f64;
        let expected = 50.0 * std::f64::consts::PI * 25.0;
        assert!(
            (count - expected).abs() / expected < 0.25,
            "count {count} vs {expected}"
        );
    }

    #[test]
    fn counts_grow_with_particle_load() {
        let c = 250.0;
        let build = |n: usize| {
            let particles: Vec<(f64, f64, f64)> = (0..n)
                .map(|i| {
                    let ang = i as f64 * 2.399963; // golden angle: no overlaps
                    let rad = 8.0 + 220.0 * ((i as f64 + 0.5) / 220.0).sqrt();
                    (c + rad * ang.cos(), c + rad * ang.sin(), 3.0)
                })
                .collect();
            let img = disk_scene(501, &particles);
            let roi = centered_roi(&img, 240.0);
            particle_pixel_count(&roi, &PaaCfg::default()).unwrap()
        };
        let counts: Vec<usize> = [0usize, 20, 80, 200].iter().map(|&n| build(n)).collect();
        assert!(
            counts.windows(2).all(|w| w[0] < w[1]),
            "not strictly increasing: {counts:?}"
        );
    }

    #[test]
    fn count_bounded_by_roi_area() {
        let img = disk_scene(201, &[(100.0, 100.0, 30.0)]);
        let roi = centered_roi(&img, 90.0);
        let count = particle_pixel_count(&roi, &PaaCfg::default()).unwrap();
        assert!(count <= roi.area());
        assert!(count > 0);
    }

    #[test]
    fn count_is_flip_invariant_for_mirrored_roi() {
        let img = disk_scene(201, &[(80.0, 120.0, 6.0), (140.0, 60.0, 4.0)]);
        let c = 100.0;
        let roi = extract_roi(&img, Circle::new(c, c, 90.0), 0.0).unwrap();
        let cfg = PaaCfg::default();
        let base = particle_pixel_count(&roi, &cfg).unwrap();
        for flipped in [flip_h(&img), flip_v(&img)] {
            let roi_f = extract_roi(&flipped, Circle::new(c, c, 90.0), 0.0).unwrap();
            assert_eq!(particle_pixel_count(&roi_f, &cfg).unwrap(), base);
        }
    }
}
