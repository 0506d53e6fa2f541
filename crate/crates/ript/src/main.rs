//! Command-line front end: `detect` frames, `eval` outputs against ground
//! truth, and `synth` synthetic sequences.
//!
//! All numeric knobs resolve as: explicit flag, then config-file entry, then
//! built-in default. The output directory additionally honors the `RIPT_OUT`
//! environment variable between flag and config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use ript::config::{get, parse_kv, reject_unknown};
use ript::error::Result;
use ript::eval::{metrics, read_truth, roc, write_truth, TruthMap};
use ript::image_io::{read_image, unscale_u16, write_pgm8};
use ript::pipeline::{expand_inputs, run_batch, score_image, DetectionConfig, OutputSpec};
use ript::scene::{frame_stem, gen_scene, SceneSpec};
use ript::solver::SolverMode;
use ript::Error;

#[derive(Parser)]
#[command(
    name = "ript",
    version,
    about = "Single-frame infrared small-target detection by weighted \
             low-rank patch-tensor decomposition"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Detect small targets in frames and write per-frame artifacts.
    Detect(DetectArgs),
    /// Score detect outputs against ground truth (metrics and ROC CSVs).
    Eval(EvalArgs),
    /// Generate synthetic frames plus ground truth from a scene spec.
    Synth(SynthArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.cmd {
        Cmd::Detect(args) => cmd_detect(args),
        Cmd::Eval(args) => cmd_eval(args),
        Cmd::Synth(args) => cmd_synth(args),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

#[derive(Args)]
struct DetectArgs {
    /// Input frames (PGM/PNG) or directories of frames.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// `key = value` config file; explicit flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Patch side in pixels [default: 50].
    #[arg(long)]
    patch: Option<usize>,
    /// Sliding step in pixels [default: 10].
    #[arg(long)]
    step: Option<usize>,
    /// Structure-tensor smoothing scale [default: 1.0].
    #[arg(long)]
    sigma: Option<f64>,
    /// Structure-tensor integration scale [default: 2.0].
    #[arg(long)]
    alpha: Option<f64>,
    /// Edge-weight gain [default: 10].
    #[arg(long)]
    h: Option<f64>,
    /// Sparsity trade-off numerator [default: 1.0].
    #[arg(long = "L")]
    lambda_scale: Option<f64>,
    /// Initial continuation coefficient [default: 0.7].
    #[arg(long = "c-mu")]
    c_mu: Option<f64>,
    /// Continuation decay per pass [default: 1.05].
    #[arg(long)]
    rho: Option<f64>,
    /// Reweighting regularizer [default: 0.01].
    #[arg(long = "eps-w")]
    eps_w: Option<f64>,
    /// Relative-error stop tolerance [default: 1e-7].
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap [default: 500].
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Solver variant: ript, wipt, sipt, or ipt [default: ript].
    #[arg(long)]
    mode: Option<String>,
    /// Segmentation threshold multiplier [default: 5].
    #[arg(long = "k-seg")]
    k_seg: Option<f64>,
    /// Segmentation threshold floor [default: 0].
    #[arg(long = "v-min")]
    v_min: Option<f64>,
    /// Output directory [default: .].
    #[arg(long, env = "RIPT_OUT")]
    out: Option<PathBuf>,
    /// Also write `<stem>_trace.csv` (solver convergence log).
    #[arg(long)]
    trace: bool,
    /// Also write `<stem>_weights.pgm` (edge-penalty view).
    #[arg(long = "emit-weight-map")]
    emit_weight_map: bool,
}

const DETECT_KEYS: &[&str] = &[
    "patch",
    "step",
    "sigma",
    "alpha",
    "h",
    "L",
    "c_mu",
    "rho",
    "eps_w",
    "tol",
    "max_iter",
    "mode",
    "k_seg",
    "v_min",
    "out",
    "trace",
    "emit_weight_map",
];

fn detect_config(args: &DetectArgs, file: &BTreeMap<String, String>) -> Result<DetectionConfig> {
    let mut cfg = DetectionConfig::default();
    cfg.patch = args.patch.or(get(file, "patch")?).unwrap_or(cfg.patch);
    cfg.step = args.step.or(get(file, "step")?).unwrap_or(cfg.step);
    cfg.sigma = args.sigma.or(get(file, "sigma")?).unwrap_or(cfg.sigma);
    cfg.alpha = args.alpha.or(get(file, "alpha")?).unwrap_or(cfg.alpha);
    cfg.h = args.h.or(get(file, "h")?).unwrap_or(cfg.h);
    cfg.k_seg = args.k_seg.or(get(file, "k_seg")?).unwrap_or(cfg.k_seg);
    cfg.v_min = args.v_min.or(get(file, "v_min")?).unwrap_or(cfg.v_min);
    let s = &mut cfg.solver;
    s.lambda_scale = args
        .lambda_scale
        .or(get(file, "L")?)
        .unwrap_or(s.lambda_scale);
    s.c_mu = args.c_mu.or(get(file, "c_mu")?).unwrap_or(s.c_mu);
    s.rho = args.rho.or(get(file, "rho")?).unwrap_or(s.rho);
    s.eps_w = args.eps_w.or(get(file, "eps_w")?).unwrap_or(s.eps_w);
    s.tol = args.tol.or(get(file, "tol")?).unwrap_or(s.tol);
    s.max_iter = args.max_iter.or(get(file, "max_iter")?).unwrap_or(s.max_iter);
    s.mode = match &args.mode {
        Some(text) => text.parse::<SolverMode>()?,
        None => get::<SolverMode>(file, "mode")?.unwrap_or(s.mode),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_detect(args: DetectArgs) -> Result<ExitCode> {
    let file = match &args.config {
        Some(path) => parse_kv(&std::fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    reject_unknown(&file, DETECT_KEYS)?;
    let cfg = detect_config(&args, &file)?;
    let spec = OutputSpec {
        out_dir: args
            .out
            .clone()
            .or(get(&file, "out")?)
            .unwrap_or_else(|| PathBuf::from(".")),
        emit_trace: args.trace || get(&file, "trace")?.unwrap_or(false),
        emit_weight_map: args.emit_weight_map || get(&file, "emit_weight_map")?.unwrap_or(false),
    };

    let files = expand_inputs(&args.inputs)?;
    let summaries = run_batch(&files, &cfg, &spec)?;
    let mut failed = false;
    for summary in &summaries {
        failed |= !summary.is_ok();
        println!(
            "{}",
            serde_json::to_string(summary)
                .map_err(|e| Error::malformed("summary", e.to_string()))?
        );
    }
    Ok(if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EvalArgs {
    /// Directory with `detect` artifacts (`<stem>_target.pgm` + sidecars).
    #[arg(long)]
    outputs: PathBuf,
    /// Ground-truth JSON mapping frame stems to target boxes.
    #[arg(long)]
    truth: PathBuf,
    /// Directory with the original frames; enables the gain-metrics CSV.
    #[arg(long)]
    inputs: Option<PathBuf>,
    /// Neighborhood width around each truth box, in pixels.
    #[arg(long, default_value_t = 20)]
    d: usize,
    /// Number of ROC threshold levels.
    #[arg(long, default_value_t = 50)]
    thresholds: usize,
    /// Metrics CSV path [default: <outputs>/metrics.csv].
    #[arg(long = "metrics-csv")]
    metrics_csv: Option<PathBuf>,
    /// ROC CSV path [default: <outputs>/roc.csv].
    #[arg(long = "roc-csv")]
    roc_csv: Option<PathBuf>,
}

#[derive(Deserialize)]
struct SidecarRange {
    lo: f64,
    hi: f64,
}

#[derive(Deserialize)]
struct Sidecar {
    target: SidecarRange,
}

/// Reconstruct the real-valued target image written by `detect`.
fn read_target(outputs: &Path, stem: &str) -> Result<ript::Image> {
    let pgm = outputs.join(format!("{stem}_target.pgm"));
    let sidecar_path = outputs.join(format!("{stem}_scale.json"));
    let raw = read_image(&pgm)?;
    let text = std::fs::read_to_string(&sidecar_path)?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::malformed(sidecar_path.display().to_string(), e.to_string()))?;
    Ok(unscale_u16(&raw, sidecar.target.lo, sidecar.target.hi))
}

/// Find `<stem>.pgm` or `<stem>.png` in the originals directory.
fn find_input(dir: &Path, stem: &str) -> Result<PathBuf> {
    for ext in ["pgm", "png", "PGM", "PNG"] {
        let path = dir.join(format!("{stem}.{ext}"));
        if path.is_file() {
            return Ok(path);
        }
    }
    Err(Error::malformed(
        format!("{stem} under {}", dir.display()),
        "no matching .pgm or .png original frame",
    ))
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode> {
    let truth: TruthMap = read_truth(&args.truth)?;
    if truth.is_empty() {
        return Err(Error::malformed(
            args.truth.display().to_string(),
            "empty ground truth",
        ));
    }

    let mut scores = Vec::new();
    let mut boxes_per_frame = Vec::new();
    let mut metrics_rows = String::from("frame,box,lsnrg,bsf,scrg\n");
    let mut n_boxes = 0usize;
    for (stem, boxes) in &truth {
        let target = read_target(&args.outputs, stem)?;
        n_boxes += boxes.len();
        if let Some(inputs_dir) = &args.inputs {
            let input = read_image(&find_input(inputs_dir, stem)?)?;
            for (i, tb) in boxes.iter().enumerate() {
                let m = metrics(&input, &target, tb, args.d)?;
                metrics_rows.push_str(&format!(
                    "{stem},{i},{},{},{}\n",
                    m.lsnrg, m.bsf, m.scrg
                ));
            }
        }
        scores.push(score_image(&target));
        boxes_per_frame.push(boxes.clone());
    }

    let points = roc(&scores, &boxes_per_frame, args.thresholds)?;
    let roc_path = args
        .roc_csv
        .clone()
        .unwrap_or_else(|| args.outputs.join("roc.csv"));
    let mut roc_csv = String::from("threshold,pd,fa\n");
    for p in &points {
        roc_csv.push_str(&format!("{},{},{}\n", p.threshold, p.pd, p.fa));
    }
    std::fs::write(&roc_path, roc_csv)?;

    let mut written = vec![roc_path.display().to_string()];
    if args.inputs.is_some() {
        let metrics_path = args
            .metrics_csv
            .clone()
            .unwrap_or_else(|| args.outputs.join("metrics.csv"));
        std::fs::write(&metrics_path, metrics_rows)?;
        written.push(metrics_path.display().to_string());
    }
    println!(
        "{}",
        serde_json::json!({
            "frames": scores.len(),
            "boxes": n_boxes,
            "thresholds": points.len(),
            "written": written,
        })
    );
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SynthArgs {
    /// Scene spec file (`key = value`); defaults produce one 200x200 frame.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory for frames and truth.json.
    #[arg(long, env = "RIPT_OUT")]
    out: Option<PathBuf>,
    /// Override the spec's frame count.
    #[arg(long)]
    frames: Option<usize>,
    /// Override the spec's sequence seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the spec's noise std.
    #[arg(long = "noise-std")]
    noise_std: Option<f64>,
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let map = match &args.spec {
        Some(path) => parse_kv(&std::fs::read_to_string(path)?)?,
        None => BTreeMap::new(),
    };
    let mut spec = SceneSpec::from_kv(&map)?;
    if let Some(v) = args.frames {
        spec.frames = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(v) = args.noise_std {
        spec.noise_std = v;
    }
    spec.validate()?;

    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let mut truth = TruthMap::new();
    for idx in 0..spec.frames {
        let (img, boxes) = gen_scene(&spec, idx)?;
        let stem = frame_stem(idx);
        let quantized = img.mapv(|v| v.round().clamp(0.0, 255.0) as u8);
        let path = out_dir.join(format!("{stem}.pgm"));
        write_pgm8(&path, &quantized)?;
        println!(
            "{}",
            serde_json::json!({ "file": path.display().to_string(), "targets": boxes.len() })
        );
        truth.insert(stem, boxes);
    }
    write_truth(&out_dir.join("truth.json"), &truth)?;
    Ok(ExitCode::SUCCESS)
}
