//! Compute the local-structure weight map for a scene with streaky clutter
//! and save an 8-bit view of it. Flat regions and compact blobs stay near
//! weight 1; oriented edges approach `exp(h)`, which prices them out of the
//! sparse target term during decomposition.
//!
//! Usage: `cargo run --example weight_map [-- OUT_PGM]`

use std::path::PathBuf;

use ript::image_io::write_pgm8;
use ript::structure::weight_display;
use ript::{edge_feature, gen_scene, local_structure_weight, structure_field, SceneSpec};

fn main() -> ript::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "weights.pgm".into()),
    );

    // Narrow spreads make elongated, edge-rich clutter.
    let spec = SceneSpec {
        seed: 5,
        spread_min: 2.0,
        spread_max: 9.0,
        cap: 200.0,
        ..Default::default()
    };
    let (img, _) = gen_scene(&spec, 0)?;

    let (sigma, alpha, h) = (1.0, 2.0, 10.0);
    let field = structure_field(&img, sigma, alpha)?;
    let feature = edge_feature(&field);
    let weights = local_structure_weight(&feature, h)?;

    let n = weights.len() as f64;
    let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = weights.sum() / n;
    let heavy = weights.iter().filter(|&&w| w > 100.0).count() as f64 / n;
    println!("weight range [{min:.2}, {max:.1}] (exp(h) = {:.1})", h.exp());
    println!("mean weight {mean:.2}; {:.1}% of pixels above 100", 100.0 * heavy);

    write_pgm8(&out, &weight_display(&feature, h))?;
    println!("wrote edge-penalty view to {}", out.display());
    Ok(())
}
