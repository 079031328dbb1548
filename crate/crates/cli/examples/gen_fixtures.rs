//! Regenerate the derived fixture files: the synthetic plate images and
//! the 15-target evaluation set. The hand-written fixtures (arm5.urdf,
//! calibration.txt, run.toml) are the source of truth this derives from.
//!
//!     cargo run -p mdn-ik --example gen_fixtures

use std::fmt::Write as _;
use std::path::Path;

use mdn_ik::pnm::write_image;
use mdn_ik::urdf::load_chain;
use mdn_ik_core::chain::forward_kinematics;
use mdn_ik_core::sampling::{sample_config, SampleRng};
use mdn_ik_core::vision::ImageBuf;

/// Seed for the held-out evaluation targets; disjoint from the training
/// dataset seed used in the walkthrough (1).
const TARGET_SEED: u64 = 4242;

fn plate(width: u32, height: u32, colonies: &[(f64, f64, f64)]) -> ImageBuf {
    let mut data = vec![0u8; (width * height) as usize];
    for y in 0..height {
        for x in 0..width {
            // Dish background: dim agar with a soft radial falloff.
            let dx = x as f64 - width as f64 / 2.0;
            let dy = y as f64 - height as f64 / 2.0;
            let r = (dx * dx + dy * dy).sqrt();
            let mut v = 26.0 - (r / width as f64) * 14.0;
            for &(cx, cy, radius) in colonies {
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                if d <= radius {
                    // Bright colony with a slightly dimmer rim.
                    v = 206.0 - 24.0 * (d / radius);
                }
            }
            data[(y * width + x) as usize] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    ImageBuf::gray(width, height, data).unwrap()
}

fn main() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");

    // Plate with three colonies (largest at pixel (228, 34), which
    // back-projects to x=0.3197, y=0.0502 on the z=-0.05 plane with the
    // run.toml camera) plus one speck below the min_area threshold.
    let colonies = [
        (228.0, 34.0, 9.0),
        (120.0, 80.0, 6.0),
        (100.0, 170.0, 4.0),
        (230.0, 180.0, 1.5),
    ];
    write_image(&plate(320, 240, &colonies), fixtures.join("plate.pgm")).unwrap();
    // A featureless plate: uniform agar, so any threshold mode yields an
    // empty mask and the pipeline takes its nothing-found branch.
    let blank = ImageBuf::gray(320, 240, vec![20u8; 320 * 240]).unwrap();
    write_image(&blank, fixtures.join("blank_plate.pgm")).unwrap();

    // 15 reachable evaluation targets: forward kinematics of uniformly
    // sampled configurations, full round-trip precision.
    let chain = load_chain(fixtures.join("arm5.urdf")).unwrap();
    let mut rng = SampleRng::from_seed(TARGET_SEED);
    let mut out = String::from(
        "# 15 Cartesian evaluation targets (meters): FK of configurations\n\
         # sampled uniformly within the arm5 joint limits, seed 4242.\n",
    );
    for _ in 0..15 {
        let q = sample_config(&chain, &mut rng);
        let p = forward_kinematics(&chain, &q).unwrap().translation;
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", p.x, p.y, p.z);
    }
    std::fs::write(fixtures.join("targets_15.csv"), out).unwrap();

    eprintln!("fixtures regenerated under {}", fixtures.display());
}
