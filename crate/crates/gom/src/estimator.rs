//! End-to-end spectral fit: truncated SVD, pruning, successive projection,
//! closed-form membership and item-parameter estimates, and family-specific
//! post-processing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::data::{BlockPartition, Family, FlatMatrix};
use crate::error::{GomError, Result};
use crate::linalg::{truncated_svd, SvdFactors};
use crate::vertex::{candidates_excluding, prune, spa, PruneConfig, VertexResult};

/// Fit configuration. `prune` is skipped when `None`; `epsilon` is the
/// Poisson positivity floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub prune: Option<PruneConfig>,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            prune: Some(PruneConfig::default()),
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

/// Per-fit diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub seconds: f64,
    pub gap_warning: bool,
    /// Membership rows whose entries were all clipped to zero and mapped to
    /// the uniform vector.
    pub degenerate_membership_rows: usize,
    pub pruned_rows: usize,
}

/// Full estimator output.
#[derive(Debug, Clone)]
pub struct GomEstimate {
    pub vertices: VertexResult,
    pub memberships_raw: DMatrix<f64>,
    pub memberships: DMatrix<f64>,
    pub item_params_raw: DMatrix<f64>,
    pub item_params: DMatrix<f64>,
    pub factors: SvdFactors,
    pub family: Family,
    pub diagnostics: FitDiagnostics,
}

/// Pi-hat = U (U_{S,:})^{-1}. Errors when U_{S,:} has condition number
/// above 1e8.
pub fn estimate_memberships(factors: &SvdFactors, s: &[usize]) -> Result<DMatrix<f64>> {
    let k = factors.rank();
    if s.len() != k {
        return Err(GomError::DimensionMismatch(format!(
            "need {k} vertex indices, got {}",
            s.len()
        )));
    }
    let us = DMatrix::from_fn(k, k, |r, c| factors.u[(s[r], c)]);
    let svd = us.clone().svd(false, false);
    let (mut smax, mut smin) = (0.0f64, f64::INFINITY);
    for &sv in svd.singular_values.iter() {
        smax = smax.max(sv);
        smin = smin.min(sv);
    }
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !cond.is_finite() || cond > 1e8 {
        return Err(GomError::NearSingularVertices(cond));
    }
    let inv = us
        .try_inverse()
        .ok_or(GomError::NearSingularVertices(f64::INFINITY))?;
    Ok(&factors.u * inv)
}

/// Clips negatives to zero and renormalizes each row to the simplex. Rows
/// with no remaining mass map to the uniform vector. Returns the matrix and
/// the count of such degenerate rows.
pub fn postprocess_memberships(raw: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (n, k) = (raw.nrows(), raw.ncols());
    let mut out = DMatrix::zeros(n, k);
    let mut degenerate = 0;
    for i in 0..n {
        let mut sum = 0.0;
        for c in 0..k {
            let v = raw[(i, c)].max(0.0);
            out[(i, c)] = v;
            sum += v;
        }
        if sum > 0.0 {
            for c in 0..k {
                out[(i, c)] /= sum;
            }
        } else {
            degenerate += 1;
            for c in 0..k {
                out[(i, c)] = 1.0 / k as f64;
            }
        }
    }
    (out, degenerate)
}

/// Theta-hat = V Lambda (U_{S,:})^T.
pub fn estimate_item_params(factors: &SvdFactors, s: &[usize]) -> Result<DMatrix<f64>> {
    let k = factors.rank();
    if s.len() != k {
        return Err(GomError::DimensionMismatch(format!(
            "need {k} vertex indices, got {}",
            s.len()
        )));
    }
    let us = DMatrix::from_fn(k, k, |r, c| factors.u[(s[r], c)]);
    Ok(&factors.v * DMatrix::from_diagonal(&factors.singular_values) * us.transpose())
}

/// Family-specific truncation of Theta-hat: Bernoulli families clip to [0,1],
/// the one-hot family additionally renormalizes each (block, profile) slice
/// to sum 1, and Poisson floors entries at epsilon.
pub fn postprocess_item_params(
    raw: &DMatrix<f64>,
    family: Family,
    partition: &BlockPartition,
    epsilon: f64,
) -> Result<DMatrix<f64>> {
    let mut out = raw.clone();
    match family {
        Family::BernoulliOnehot => {
            out.apply(|v| *v = v.clamp(0.0, 1.0));
            for l in 0..partition.n_blocks() {
                for k in 0..out.ncols() {
                    let s: f64 = partition.range(l).map(|j| out[(j, k)]).sum();
                    if s <= 0.0 {
                        return Err(GomError::DegenerateBlock {
                            item: l + 1,
                            profile: k + 1,
                        });
                    }
                    for j in partition.range(l) {
                        out[(j, k)] /= s;
                    }
                }
            }
        }
        Family::BernoulliGeneral | Family::BinomialHalved => {
            out.apply(|v| *v = v.clamp(0.0, 1.0));
        }
        Family::Poisson => {
            out.apply(|v| {
                if *v < epsilon {
                    *v = epsilon;
                }
            });
        }
    }
    Ok(out)
}

/// Runs the full spectral pipeline on a flat data matrix.
pub fn fit(data: &FlatMatrix, k: usize, cfg: &FitConfig) -> Result<GomEstimate> {
    let start = Instant::now();
    let n = data.nrows();
    let j = data.ncols();
    if k < 1 || k > n.min(j) {
        return Err(GomError::RankOutOfRange { k, nrows: n, ncols: j });
    }

    let factors = truncated_svd(&data.values, k, cfg.seed)?;

    let pruned = match (&cfg.prune, n > k) {
        (Some(pc), true) => prune(&factors.u, pc)?,
        _ => Default::default(),
    };
    let candidates = candidates_excluding(n, &pruned);
    let vertices = spa(&factors.u, k, &candidates)?;
    debug_assert!(vertices.indices.iter().all(|i| !pruned.contains(i)));

    let memberships_raw = estimate_memberships(&factors, &vertices.indices)?;
    let (memberships, degenerate) = postprocess_memberships(&memberships_raw);
    let item_params_raw = estimate_item_params(&factors, &vertices.indices)?;
    let item_params =
        postprocess_item_params(&item_params_raw, data.family, &data.partition, cfg.epsilon)?;

    Ok(GomEstimate {
        diagnostics: FitDiagnostics {
            seconds: start.elapsed().as_secs_f64(),
            gap_warning: factors.gap_warning,
            degenerate_membership_rows: degenerate,
            pruned_rows: pruned.len(),
        },
        vertices: VertexResult {
            indices: vertices.indices,
            pruned,
        },
        memberships_raw,
        memberships,
        item_params_raw,
        item_params,
        factors,
        family: data.family,
    })
}
