//! Calibration probe: SA ratio and PAA count across the turbidity range.
//! Not part of the shipped surface; run with `cargo run -p soluscan-core --example sa_probe`.

use soluscan_core::config::PipelineConfig;
use soluscan_core::pipeline::extract_pair_features;
use soluscan_core::synth::{render_scene, FrameGeometry, ParticleField, Placement, SceneParams};

fn main() {
    let mut cfg = PipelineConfig::default();
    cfg.crop.side = 480;
    let geom = FrameGeometry { width: 560, height: 560, crop_side: 480 };
    let taus = [0.0, 0.1, 0.18, 0.25, 0.3, 0.35, 0.42, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    for seed in [1u64, 2, 3] {
        println!("seed {seed}");
        for &tau in &taus {
            let mut p = SceneParams::clear(geom.width, geom.height, 0.41 * geom.crop_side as f64, seed);
            p.turbidity = tau;
            p.particles = ParticleField { count: 60, radius_min: 2.0, radius_max: 5.0, intensity: 30.0, placement: Placement::Uniform };
            let scene = render_scene(&p).unwrap();
            let t0 = std::time::Instant::now();
            match extract_pair_features(&scene.white, &scene.check, &cfg, None) {
                Ok((f, _, _)) => println!(
                    "  tau={tau:.2} ratio={:.3} count={:6.0} a={:8.2} c={:6.1} mse={:8.2}  ({} ms)",
                    f.superposition_ratio, f.particle_pixel_count, f.radial_curvature, f.radial_minimum, f.radial_mse, t0.elapsed().as_millis()
                ),
                Err(e) => println!("  tau={tau:.2} ERROR {e}"),
            }
        }
    }
}
