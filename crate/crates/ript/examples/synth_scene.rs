//! Generate a short synthetic cloud-clutter sequence and store it on disk:
//! one 8-bit PGM per frame plus a `truth.json` with the planted target boxes.
//!
//! Usage: `cargo run --example synth_scene [-- OUT_DIR]`

use std::path::PathBuf;

use ript::eval::{write_truth, TruthMap};
use ript::image_io::write_pgm8;
use ript::scene::frame_stem;
use ript::{gen_scene, SceneSpec};

fn main() -> ript::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "synth-out".into()),
    );
    std::fs::create_dir_all(&out)?;

    let spec = SceneSpec {
        frames: 4,
        seed: 11,
        spread_min: 40.0,
        spread_max: 80.0,
        cap: 80.0,
        target_scr: Some(4.0),
        noise_std: 5.0,
        ..Default::default()
    };
    spec.validate()?;

    let mut truth = TruthMap::new();
    for idx in 0..spec.frames {
        let (img, boxes) = gen_scene(&spec, idx)?;
        let stem = frame_stem(idx);
        let quantized = img.mapv(|v| v.round().clamp(0.0, 255.0) as u8);
        write_pgm8(&out.join(format!("{stem}.pgm")), &quantized)?;
        let peak = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tb = boxes[0];
        println!(
            "{stem}: {}x{} target box at ({}, {}), frame peak {peak:.1}",
            tb.a, tb.b, tb.row, tb.col
        );
        truth.insert(stem, boxes);
    }
    write_truth(&out.join("truth.json"), &truth)?;
    println!(
        "wrote {} frames and truth.json under {}",
        spec.frames,
        out.display()
    );
    Ok(())
}
