//! Decompose a single frame into low-rank background plus sparse target
//! tensors, printing the per-pass convergence trace: relative residual,
//! support size, and the continuation parameter.
//!
//! Usage: `cargo run --example decompose`

use ript::{
    edge_feature, gen_scene, image_to_tensor, local_structure_weight, solve, structure_field,
    tensor_to_image, PatchLayout, SceneSpec, SolverConfig,
};

fn main() -> ript::Result<()> {
    let spec = SceneSpec {
        seed: 3,
        rows: 150,
        cols: 150,
        target_amplitude: Some(120.0),
        target_scr: None,
        ..Default::default()
    };
    let (img, truth) = gen_scene(&spec, 0)?;
    let tb = truth[0];

    let layout = PatchLayout::new(img.dim(), (50, 50), (25, 25))?;
    let (i, j, p) = layout.tensor_dims();
    println!("patch tensor: {i}x{j}x{p} from a {}x{} frame", img.nrows(), img.ncols());

    let f = image_to_tensor(&img, &layout)?;
    let field = structure_field(&img, 1.0, 2.0)?;
    let weights = local_structure_weight(&edge_feature(&field), 10.0)?;
    let w_ls = image_to_tensor(&weights, &layout)?;

    let cfg = SolverConfig::default();
    let result = solve(&f, &w_ls, &cfg)?;

    println!("pass  rel_err      support  mu");
    for row in &result.trace {
        println!(
            "{:4}  {:.3e}  {:7}  {:.3}",
            row.iter, row.rel_err, row.l0, row.mu
        );
    }
    println!(
        "stopped after {} passes: {:?}",
        result.iterations, result.stop_reason
    );

    let target = tensor_to_image(&result.target, &layout)?;
    let peak = target.iter().copied().fold(0.0f64, f64::max);
    let support = target.iter().filter(|&&v| v > 0.0).count();
    let peak_in_box = target
        .indexed_iter()
        .filter(|((r, c), _)| tb.contains(*r as f64, *c as f64))
        .map(|(_, &v)| v)
        .fold(0.0f64, f64::max);
    println!(
        "target image: {support} positive pixels, peak {peak:.1} \
         (inside the truth box: {peak_in_box:.1})"
    );
    Ok(())
}
