//! Weighted ADMM solver for the low-rank + sparse patch-tensor split.
//!
//! The data tensor `F` is decomposed as `F = B + T` where every mode-wise
//! unfolding of the background `B` is pushed toward low rank (one auxiliary
//! background copy per mode, coupled through scaled dual tensors) and the
//! target `T` is pushed toward entry-wise sparsity under an adaptive weight
//! `W`. Each pass performs, in order: a singular-value thresholding update of
//! the three mode backgrounds, a non-negative weighted shrinkage update of the
//! target, a dual ascent step, an optional rebuild of the sparsity weight from
//! the fresh target, and a decay of the continuation parameter `mu`. Weight
//! entries of `+inf` pin the corresponding target entries to exactly zero,
//! which is how non-positive entries are kept out of the target between
//! passes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{fro_norm, l0_norm, tensor_svt, Tensor3, L0_TOL};
use crate::util::sample_std;

// ---------------------------------------------------------------------------
// Modes and configuration
// ---------------------------------------------------------------------------

/// Solver variant: which factors of the adaptive weight are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    /// Unweighted: `W = 1` throughout.
    Ipt,
    /// Sparsity reweighting only: `W = W_SE`, rebuilt every pass.
    Sipt,
    /// Local-structure prior only: `W = W_LS`, constant across passes.
    Wipt,
    /// Both factors: `W = W_LS ⊙ W_SE`.
    Ript,
}

impl SolverMode {
    /// Whether the mode consumes the caller-supplied local-structure weight.
    pub fn uses_local_structure(self) -> bool {
        matches!(self, SolverMode::Wipt | SolverMode::Ript)
    }

    /// Whether the sparsity weight is rebuilt from the target every pass.
    pub fn uses_sparsity_reweight(self) -> bool {
        matches!(self, SolverMode::Sipt | SolverMode::Ript)
    }

    /// Sparsity trade-off `lambda = scale / sqrt(dim)`. The structure-weighted
    /// family divides by the smallest tensor dimension; the unweighted family
    /// by the largest, matching how each variant is conventionally tuned.
    pub fn lambda(self, scale: f64, dims: (usize, usize, usize)) -> f64 {
        let (i, j, p) = dims;
        let denom = if self.uses_local_structure() {
            i.min(j).min(p)
        } else {
            i.max(j).max(p)
        };
        scale / (denom as f64).sqrt()
    }
}

impl std::fmt::Display for SolverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            SolverMode::Ipt => "ipt",
            SolverMode::Sipt => "sipt",
            SolverMode::Wipt => "wipt",
            SolverMode::Ript => "ript",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ipt" => Ok(SolverMode::Ipt),
            "sipt" => Ok(SolverMode::Sipt),
            "wipt" => Ok(SolverMode::Wipt),
            "ript" => Ok(SolverMode::Ript),
            other => Err(Error::InvalidParameter(format!(
                "unknown solver mode {other:?} (expected ript, wipt, sipt, or ipt)"
            ))),
        }
    }
}

/// Why the iteration loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Relative reconstruction error fell below `tol`.
    Tolerance,
    /// The count of non-zero target entries stopped changing.
    L0Stagnation,
    /// `max_iter` passes ran without meeting either criterion.
    MaxIter,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            StopReason::Tolerance => "tolerance",
            StopReason::L0Stagnation => "l0_stagnation",
            StopReason::MaxIter => "max_iter",
        };
        f.write_str(name)
    }
}

/// ADMM parameters. `..Default::default()` fills the standard values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Which weight factors are active.
    pub mode: SolverMode,
    /// Numerator of the sparsity trade-off `lambda = lambda_scale / sqrt(dim)`.
    pub lambda_scale: f64,
    /// `mu0 = c_mu * std(vec(F))`: initial continuation parameter.
    pub c_mu: f64,
    /// Per-pass decay `mu <- mu / rho`; must be >= 1.
    pub rho: f64,
    /// Regularizer of the reciprocal sparsity weight `1 / (T + eps_w)`.
    pub eps_w: f64,
    /// Stop once `|F - B - T|_F / |F|_F` falls below this.
    pub tol: f64,
    /// Hard cap on the number of passes.
    pub max_iter: usize,
    /// Also stop when the target's non-zero count stagnates.
    pub l0_stop_enabled: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: SolverMode::Ript,
            lambda_scale: 1.0,
            c_mu: 0.7,
            rho: 1.05,
            eps_w: 0.01,
            tol: 1e-7,
            max_iter: 500,
            l0_stop_enabled: true,
        }
    }
}

impl SolverConfig {
    /// Check parameter ranges; every numeric field must be finite.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_scale", self.lambda_scale),
            ("c_mu", self.c_mu),
            ("eps_w", self.eps_w),
            ("tol", self.tol),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if !self.rho.is_finite() || self.rho < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "rho must be finite and >= 1, got {}",
                self.rho
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// One row of the per-pass convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// 1-based pass number.
    pub iter: usize,
    /// `|F - B - T|_F / |F|_F` after this pass (0 when `|F|_F = 0`).
    pub rel_err: f64,
    /// Non-zero target entries after this pass.
    pub l0: usize,
    /// Continuation parameter used during this pass.
    pub mu: f64,
}

/// Decomposition output.
#[derive(Debug, Clone)]
pub struct SolverResult {
    /// Recovered background: mean of the three mode-wise copies.
    pub background: Tensor3,
    /// Recovered sparse target, entries >= 0.
    pub target: Tensor3,
    /// Number of passes executed (== `trace.len()`).
    pub iterations: usize,
    /// Which stop condition fired.
    pub stop_reason: StopReason,
    /// Per-pass convergence log.
    pub trace: Vec<TraceRow>,
    /// Effective sparsity trade-off used.
    pub lambda: f64,
    /// Initial continuation parameter used.
    pub mu0: f64,
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

/// Decompose `f` into a low-rank background and sparse non-negative target.
///
/// `w_ls` is the local-structure weight tensor (same shape as `f`); it is
/// consulted only in `Wipt`/`Ript` modes but always shape-checked so callers
/// cannot silently pass a stale layout.
pub fn solve(f: &Tensor3, w_ls: &Tensor3, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_inner(f, w_ls, cfg, true)
}

/// Like [`solve`], with the per-pass sparsity-weight rebuild optionally frozen
/// (the weight then stays at its all-ones initialization). Used by tests to
/// show the reweighting machinery reduces exactly to the unweighted modes.
pub(crate) fn solve_inner(
    f: &Tensor3,
    w_ls: &Tensor3,
    cfg: &SolverConfig,
    se_update_enabled: bool,
) -> Result<SolverResult> {
    cfg.validate()?;
    if f.dim() != w_ls.dim() {
        return Err(Error::ShapeMismatch(format!(
            "data tensor is {:?} but weight tensor is {:?}",
            f.dim(),
            w_ls.dim()
        )));
    }
    let dims = f.dim();
    if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
        return Err(Error::InvalidParameter("empty tensor".into()));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("data tensor".into()));
    }
    if w_ls.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite(
            "weight tensor (entries must be finite and >= 0)".into(),
        ));
    }

    let lambda = cfg.mode.lambda(cfg.lambda_scale, dims);
    let values: Vec<f64> = f.iter().copied().collect();
    let mu0 = cfg.c_mu * sample_std(&values);
    let fro_f = fro_norm(f);

    // State: T = 0, every mode background = F, duals = 0, weight = prior.
    let ones;
    let base: &Tensor3 = if cfg.mode.uses_local_structure() {
        w_ls
    } else {
        ones = Tensor3::ones(dims);
        &ones
    };
    let mut t = Tensor3::zeros(dims);
    let mut bs = [f.clone(), f.clone(), f.clone()];
    let mut ys = [
        Tensor3::zeros(dims),
        Tensor3::zeros(dims),
        Tensor3::zeros(dims),
    ];
    let mut w = base.clone();
    let mut mu = mu0;

    let mut trace: Vec<TraceRow> = Vec::new();
    let mut prev_l0 = 0usize;
    let mut stop_reason = StopReason::MaxIter;
    let mut scratch = Tensor3::zeros(dims);

    for pass in 0..cfg.max_iter {
        let mu_used = mu;

        // Mode-wise background updates: threshold the singular values of
        // each unfolding of (F + mu*Y_i - T).
        for (i, b) in bs.iter_mut().enumerate() {
            ndarray::Zip::from(&mut scratch)
                .and(f)
                .and(&ys[i])
                .and(&t)
                .for_each(|g, &fv, &yv, &tv| *g = fv + mu_used * yv - tv);
            *b = tensor_svt(&scratch, i + 1, mu_used)?;
        }

        // Target update: non-negative weighted shrinkage of the mean
        // argument. An infinite weight pins the entry to exactly zero; the
        // branch avoids forming 0 * inf when the threshold scale is zero.
        scratch.fill(0.0);
        for (b, y) in bs.iter().zip(ys.iter()) {
            ndarray::Zip::from(&mut scratch)
                .and(f)
                .and(y)
                .and(b)
                .for_each(|a, &fv, &yv, &bv| *a += (fv + mu_used * yv - bv) / 3.0);
        }
        let tau = mu_used * lambda / 3.0;
        ndarray::Zip::from(&mut t)
            .and(&scratch)
            .and(&w)
            .for_each(|tv, &a, &wv| {
                *tv = if wv.is_finite() {
                    (a - tau * wv).max(0.0)
                } else {
                    0.0
                };
            });

        // Dual ascent on the three split constraints F = B_i + T.
        if mu_used > 0.0 {
            for (b, y) in bs.iter().zip(ys.iter_mut()) {
                ndarray::Zip::from(y)
                    .and(f)
                    .and(b)
                    .and(&t)
                    .for_each(|yv, &fv, &bv, &tv| *yv += (fv - bv - tv) / mu_used);
            }
        }

        // Rebuild the sparsity weight from the fresh target: reciprocal
        // magnitude on positive entries, +inf elsewhere. Branching (rather
        // than multiplying by inf) keeps a zero prior entry from forming NaN.
        if cfg.mode.uses_sparsity_reweight() && se_update_enabled {
            ndarray::Zip::from(&mut w)
                .and(base)
                .and(&t)
                .for_each(|wv, &bv, &tv| {
                    *wv = if tv > 0.0 {
                        bv / (tv + cfg.eps_w)
                    } else {
                        f64::INFINITY
                    };
                });
        }

        mu /= cfg.rho;

        // Convergence bookkeeping for this pass.
        ndarray::Zip::from(&mut scratch)
            .and(f)
            .and(&bs[0])
            .and(&bs[1])
            .and(&bs[2])
            .for_each(|r, &fv, &b1, &b2, &b3| *r = fv - (b1 + b2 + b3) / 3.0);
        scratch -= &t;
        let rel_err = if fro_f == 0.0 {
            0.0
        } else {
            fro_norm(&scratch) / fro_f
        };
        let l0 = l0_norm(&t, L0_TOL);
        trace.push(TraceRow {
            iter: pass + 1,
            rel_err,
            l0,
            mu: mu_used,
        });

        if rel_err < cfg.tol {
            stop_reason = StopReason::Tolerance;
            break;
        }
        // Stagnation is armed only from the third pass on and only once the
        // target has support, so the all-zero initialization cannot trip it.
        if cfg.l0_stop_enabled && pass >= 2 && prev_l0 > 0 && l0 == prev_l0 {
            stop_reason = StopReason::L0Stagnation;
            break;
        }
        prev_l0 = l0;
    }

    let mut background = bs[0].clone();
    background += &bs[1];
    background += &bs[2];
    background /= 3.0;

    Ok(SolverResult {
        background,
        target: t,
        iterations: trace.len(),
        stop_reason,
        trace,
        lambda,
        mu0,
    })
}
