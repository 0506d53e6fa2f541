//! One-call small-target detection on a synthetic frame: runs the full
//! pipeline (edge weights, patch tensor, decomposition, segmentation) and
//! prints every detection against the planted truth box.
//!
//! Usage: `cargo run --example detect_frame`

use ript::{detect, gen_scene, scr, DetectionConfig, SceneSpec};

fn main() -> ript::Result<()> {
    let spec = SceneSpec {
        seed: 9,
        spread_min: 40.0,
        spread_max: 80.0,
        cap: 120.0,
        target_scr: Some(4.0),
        ..Default::default()
    };
    let (img, truth) = gen_scene(&spec, 0)?;
    let tb = truth[0];
    println!(
        "planted target: {}x{} box at ({}, {}), contrast {:.2}",
        tb.a,
        tb.b,
        tb.row,
        tb.col,
        scr(&img, &tb, 20)?
    );

    let cfg = DetectionConfig::default();
    let result = detect(&img, &cfg)?;
    println!(
        "{} passes ({:?}), segmentation threshold {:.1}",
        result.iterations, result.stop_reason, result.t_up
    );

    if result.detections.is_empty() {
        println!("no detections");
    }
    for (i, d) in result.detections.iter().enumerate() {
        let verdict = if tb.contains(d.row, d.col) {
            "inside the truth box"
        } else {
            "FALSE ALARM"
        };
        println!(
            "detection {i}: centroid ({:.1}, {:.1}), {} px, peak {:.0} -- {verdict}",
            d.row, d.col, d.pixels, d.peak
        );
    }
    Ok(())
}
