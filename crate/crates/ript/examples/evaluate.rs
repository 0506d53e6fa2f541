//! Detect a small synthetic batch and score it: per-frame gain metrics
//! (local signal-to-noise, background suppression, contrast gain) plus a
//! compact detection-probability / false-alarm table over score thresholds.
//!
//! Usage: `cargo run --example evaluate`

use ript::pipeline::score_image;
use ript::{detect, gen_scene, metrics, roc, DetectionConfig, SceneSpec};

fn main() -> ript::Result<()> {
    let spec = SceneSpec {
        frames: 4,
        seed: 17,
        spread_min: 40.0,
        spread_max: 80.0,
        cap: 120.0,
        target_scr: Some(4.0),
        ..Default::default()
    };
    let cfg = DetectionConfig::default();

    let mut scores = Vec::new();
    let mut truths = Vec::new();
    println!("frame  lsnrg    bsf      scrg     detections");
    for idx in 0..spec.frames {
        let (img, boxes) = gen_scene(&spec, idx)?;
        let r = detect(&img, &cfg)?;
        let m = metrics(&img, &r.target_image, &boxes[0], 20)?;
        println!(
            "{idx:5}  {:<7.1}  {:<7.1}  {:<7.1}  {}",
            m.lsnrg,
            m.bsf,
            m.scrg,
            r.detections.len()
        );
        scores.push(score_image(&r.target_image));
        truths.push(boxes);
    }

    println!("\nthreshold  pd     fa");
    for p in roc(&scores, &truths, 9)? {
        println!("{:9.1}  {:.2}  {:5.2}", p.threshold, p.pd, p.fa);
    }
    Ok(())
}
