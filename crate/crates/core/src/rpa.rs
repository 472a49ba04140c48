//! Radial profile analysis: intensity along twelve diameters of the ROI,
//! averaged and fitted with an even quadratic. The curvature, minimum and
//! fit error expose undissolved material on the white-background capture.

use crate::roi::RoiImage;

/// Number of diameter profiles (30-degree steps over a half turn, both
/// directions emitted).
pub const PROFILE_COUNT: usize = 12;

/// Twelve diameter intensity profiles of equal length, sampled at unit
/// radial spacing with bilinear interpolation.
#[derive(Debug, Clone)]
pub struct RadialProfileSet {
    /// `profiles[k]` holds samples along the diameter at angle `30k`
    /// degrees, ordered from -r to +r.
    pub profiles: Vec<Vec<f64>>,
}

impl RadialProfileSet {
    pub fn len(&self) -> usize {
        self.profiles.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Least-squares fit of `y = a*x^2 + c` with x normalized to [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    /// Curvature: intensity per normalized radius squared.
    pub a: f64,
    /// Value at the center of the profile.
    pub c: f64,
    /// Mean squared residual of the fit.
    pub mse: f64,
}

/// The three white-background radial features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpaFeatures {
    pub radial_curvature: f64,
    pub radial_minimum: f64,
    pub radial_mse: f64,
}

/// Samples the twelve diameter profiles of the ROI.
///
/// Directions for the second half turn are exact negations of the first
/// six, so profile `k + 6` is sample-for-sample the reverse of profile `k`.
pub fn radial_profiles(roi: &RoiImage) -> RadialProfileSet {
    let radius = roi.circle.r.floor();
    let n = (2.0 * radius) as usize + 1;
    let mut dirs = Vec::with_capacity(PROFILE_COUNT);
    for k in 0..PROFILE_COUNT / 2 {
        let theta = (k as f64) * 30f64.to_radians();
        dirs.push((theta.cos(), theta.sin()));
    }
    for k in 0..PROFILE_COUNT / 2 {
        let (dx, dy) = dirs[k];
        dirs.push((-dx, -dy));
    }
    let profiles = dirs
        .into_iter()
        .map(|(dx, dy)| {
            (0..n)
                .map(|i| {
                    let t = i as f64 - radius;
                    let x = roi.circle.cx + t * dx;
                    let y = roi.circle.cy + t * dy;
                    roi.img.sample_bilinear(x, y)
                })
                .collect()
        })
        .collect();
    RadialProfileSet { profiles }
}

/// Element-wise mean over the profile set.
pub fn mean_profile(set: &RadialProfileSet) -> Vec<f64> {
    assert!(!set.profiles.is_empty());
    let n = set.len();
    let mut mean = vec![0.0; n];
    for profile in &set.profiles {
        assert_eq!(profile.len(), n, "profiles must align");
        for (m, &v) in mean.iter_mut().zip(profile) {
            *m += v;
        }
    }
    let count = set.profiles.len() as f64;
    for m in &mut mean {
        *m /= count;
    }
    mean
}

/// Closed-form least squares for `y = a*x^2 + c` over a profile, with the
/// abscissa normalized to [-1, 1].
pub fn fit_quadratic(profile: &[f64]) -> QuadraticFit {
    let n = profile.len();
    assert!(n >= 3, "profile too short to fit");
    let nf = n as f64;
    let mut s2 = 0.0;
    let mut s4 = 0.0;
    let mut b0 = 0.0;
    let mut b1 = 0.0;
    for (i, &y) in profile.iter().enumerate() {
        let x = -1.0 + 2.0 * i as f64 / (nf - 1.0);
        let x2 = x * x;
        s2 += x2;
        s4 += x2 * x2;
        b0 += y;
        b1 += y * x2;
    }
    let det = nf * s4 - s2 * s2;
    let a = (nf * b1 - s2 * b0) / det;
    let c = (b0 - a * s2) / nf;
    let mut sse = 0.0;
    for (i, &y) in profile.iter().enumerate() {
        let x = -1.0 + 2.0 * i as f64 / (nf - 1.0);
        let r = y - (a * x * x + c);
        sse += r * r;
    }
    QuadraticFit {
        a,
        c,
        mse: sse / nf,
    }
}

/// Profiles -> mean -> fit: the full white-background radial feature
/// extraction.
pub fn rpa_features(roi: &RoiImage) -> RpaFeatures {
    let set = radial_profiles(roi);
    let mean = mean_profile(&set);
    let fit = fit_quadratic(&mean);
    RpaFeatures {
        radial_curvature: fit.a,
        radial_minimum: fit.c,
        radial_mse: fit.mse,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Raster;
    use crate::roi::{extract_roi, Circle};

    fn roi_from_fn(side: u32, r: f64, f: impl Fn(f64, f64) -> f64) -> RoiImage {
        let c = (side - 1) as f64 / 2.0;
        let mut img = Raster::zeros(side, side, 1);
        for y in 0..side {
            for x in 0..side {
                let v = f(x as f64 - c, y as f64 - c);
                img.set(x, y, 0, v.round().clamp(0.0, 255.0) as u8);
            }
        }
        extract_roi(&img, Circle::new(c, c, r), 0.0).unwrap()
    }

    #[test]
    fn constant_field_gives_constant_profiles() {
        let roi = roi_from_fn(101, 40.0, |_, _| 200.0);
        let set = radial_profiles(&roi);
        assert_eq!(set.profiles.len(), PROFILE_COUNT);
        assert_eq!(set.len(), 81);
        for p in &set.profiles {
            for &v in p {
                assert!((v - 200.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn radial_paraboloid_matches_every_angle() {
        // I = 100 + 100 * (d / r)^2; every diameter profile reads the same
        // curve. u8 quantization bounds the sample error.
        let r = 45.0;
        let roi = roi_from_fn(121, r, |dx, dy| 100.0 + 100.0 * (dx * dx + dy * dy) / (r * r));
        let set = radial_profiles(&roi);
        let n = set.len();
        for (k, p) in set.profiles.iter().enumerate() {
            for (i, &v) in p.iter().enumerate() {
                let t = i as f64 - (n as f64 - 1.0) / 2.0;
                let expected = 100.0 + 100.0 * (t / r).powi(2);
                assert!(
                    (v - expected).abs() <= 0.75,
                    "angle {k} sample {i}: {v} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn opposite_profiles_are_reverses() {
        let roi = roi_from_fn(101, 40.0, |dx, dy| 120.0 + dx * 0.9 - dy * 0.4);
        let set = radial_profiles(&roi);
        for k in 0..PROFILE_COUNT / 2 {
            let fwd = &set.profiles[k];
            let mut rev = set.profiles[k + 6].clone();
            rev.reverse();
            for (a, b) in fwd.iter().zip(&rev) {
                assert!((a - b).abs() < 1e-9, "angle {k}");
            }
        }
    }

    #[test]
    fn mean_of_identical_profiles_is_that_profile() {
        let p = vec![1.0, 2.0, 3.0];
        let set = RadialProfileSet {
            profiles: vec![p.clone(); 12],
        };
        assert_eq!(mean_profile(&set), p);
    }

    #[test]
    fn mean_of_constants_averages() {
        let mut profiles = vec![vec![0.0; 5]; 11];
        profiles.push(vec![120.0; 5]);
        let set = RadialProfileSet { profiles };
        for v in mean_profile(&set) {
            assert!((v - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_matches_brute_force_on_random_profiles() {
        let mut profiles = Vec::new();
        let mut state = 0x12345u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64 * 255.0
        };
        for _ in 0..12 {
            profiles.push((0..33).map(|_| next()).collect::<Vec<_>>());
        }
        let set = RadialProfileSet {
            profiles: profiles.clone(),
        };
        let mean = mean_profile(&set);
        for i in 0..33 {
            let brute: f64 = profiles.iter().map(|p| p[i]).sum::<f64>() / 12.0;
            assert!((mean[i] - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_quadratic_recovery() {
        let n = 81;
        let profile: Vec<f64> = (0..n)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / (n as f64 - 1.0);
                5.0 * x * x + 100.0
            })
            .collect();
        let fit = fit_quadratic(&profile);
        assert!((fit.a - 5.0).abs() < 1e-9);
        assert!((fit.c - 100.0).abs() < 1e-9);
        assert!(fit.mse < 1e-18);
    }

    #[test]
    fn constant_profile_fits_flat() {
        let fit = fit_quadratic(&vec![128.0; 41]);
        assert!(fit.a.abs() < 1e-9);
        assert!((fit.c - 128.0).abs() < 1e-9);
        assert!(fit.mse < 1e-18);
    }

    #[test]
    fn fit_beats_perturbed_parameters() {
        // Local-minimum check over random noisy profiles.
        let mut state = 99u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        for _ in 0..100 {
            let a = next() * 160.0 - 80.0;
            let c = next() * 200.0 + 20.0;
            let n = 51;
            let profile: Vec<f64> = (0..n)
                .map(|i| {
                    let x = -1.0 + 2.0 * i as f64 / (n as f64 - 1.0);
                    a * x * x + c + (next() - 0.5) * 8.0
                })
                .collect();
            let fit = fit_quadratic(&profile);
            let mse_of = |aa: f64, cc: f64| -> f64 {
                profile
                    .iter()
                    .enumerate()
                    .map(|(i, &y)| {
                        let x = -1.0 + 2.0 * i as f64 / (n as f64 - 1.0);
                        (y - (aa * x * x + cc)).powi(2)
                    })
                    .sum::<f64>()
                    / n as f64
            };
            let eps = 1e-3;
            for (da, dc) in [(eps, 0.0), (-eps, 0.0), (0.0, eps), (0.0, -eps), (eps, eps)] {
                assert!(
                    mse_of(fit.a + da, fit.c + dc) >= fit.mse - 1e-12,
                    "perturbation improved the fit"
                );
            }
        }
    }

    #[test]
    fn vignette_yields_negative_curvature() {
        let r = 40.0;
        let roi = roi_from_fn(101, r, |dx, dy| {
            let d2 = (dx * dx + dy * dy) / (r * r);
            220.0 * (1.0 - 0.3 * d2)
        });
        let f = rpa_features(&roi);
        assert!(f.radial_curvature < -20.0, "a = {}", f.radial_curvature);
        assert!(f.radial_mse < 5.0);
    }

    #[test]
    fn curvature_is_radius_invariant() {
        // Same scene at two spatial scales: normalized x makes `a` agree.
        let build = |side: u32, r: f64| {
            roi_from_fn(side, r, |dx, dy| {
                100.0 + 100.0 * (dx * dx + dy * dy) / (r * r)
            })
        };
        let small = rpa_features(&build(101, 40.0));
        let large = rpa_features(&build(301, 120.0));
        let rel = (small.radial_curvature - large.radial_curvature).abs()
            / large.radial_curvature.abs();
        assert!(
            rel < 0.02,
            "a small={} large={}",
            small.radial_curvature,
            large.radial_curvature
        );
    }

    #[test]
    fn features_are_flip_invariant_for_centered_circles() {
        // Exactly centered circle: flips permute and reverse the twelve
        // diameters, so the even quadratic fit is unchanged up to float
        // summation order.
        use crate::raster::{flip_h, flip_v};
        let side = 101u32;
        let c = (side - 1) as f64 / 2.0;
        let r = 42.0;
        let mut img = Raster::zeros(side, side, 1);
        for y in 0..side {
            for x in 0..side {
                let dx = x as f64 - c;
                let dy = y as f64 - c;
                let v = 150.0 + 0.02 * dx * dx - 0.015 * dy * dy + 0.3 * dx;
                img.set(x, y, 0, v.round().clamp(0.0, 255.0) as u8);
            }
        }
        let features = |raster: &Raster| {
            let roi = extract_roi(raster, Circle::new(c, c, r), 0.0).unwrap();
            rpa_features(&roi)
        };
        let base = features(&img);
        for flipped in [flip_h(&img), flip_v(&img)] {
            let f = features(&flipped);
            assert!((f.radial_curvature - base.radial_curvature).abs() < 1e-6);
            assert!((f.radial_minimum - base.radial_minimum).abs() < 1e-6);
            assert!((f.radial_mse - base.radial_mse).abs() < 1e-6);
        }
    }

    #[test]
    fn mean_profile_is_linear_in_scaling() {
        let profiles: Vec<Vec<f64>> = (0..12)
            .map(|k| (0..21).map(|i| (i * (k + 1)) as f64).collect())
            .collect();
        let set = RadialProfileSet {
            profiles: profiles.clone(),
        };
        let scaled = RadialProfileSet {
            profiles: profiles
                .iter()
                .map(|p| p.iter().map(|v| v * 3.5).collect())
                .collect(),
        };
        let m = mean_profile(&set);
        let ms = mean_profile(&scaled);
        for (a, b) in m.iter().zip(&ms) {
            assert!((a * 3.5 - b).abs() < 1e-9);
        }
    }
}
