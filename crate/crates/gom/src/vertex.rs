//! Vertex hunting: outlier pruning of the rows of U followed by the
//! successive projection algorithm to locate the K pure-subject rows.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{GomError, Result};

/// Tuning parameters for the pruning step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Neighbor count used for the isolation score.
    pub r: usize,
    /// Norm quantile: only rows with norm above the (1-q)-quantile are candidates.
    pub q: f64,
    /// Expansion tolerance on the median isolation score.
    pub e: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { r: 10, q: 0.4, e: 0.2 }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(GomError::Config("prune r must be >= 1".into()));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(GomError::Config("prune q must be in (0, 1)".into()));
        }
        if self.e < 0.0 {
            return Err(GomError::Config("prune e must be >= 0".into()));
        }
        Ok(())
    }
}

/// Output of the vertex-hunting stage.
#[derive(Debug, Clone)]
pub struct VertexResult {
    /// Selected pure-subject row indices, in selection order.
    pub indices: Vec<usize>,
    /// Rows excluded from SPA candidacy.
    pub pruned: BTreeSet<usize>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// High-norm rows that are isolated from their r nearest neighbors are
/// excluded from SPA candidacy. Let x_i = ||U_{i,:}||; T = rows with x_i above
/// the (1-q)-quantile of {x_i}; d_i = mean distance of row i to its r nearest
/// neighbors among all rows; prune i in T when d_i > (1+e) * median{d_j : j in T}.
/// Never excludes more than 20% of the rows.
pub fn prune(u: &DMatrix<f64>, cfg: &PruneConfig) -> Result<BTreeSet<usize>> {
    cfg.validate()?;
    let n = u.nrows();
    let k = u.ncols();
    if n <= k {
        return Err(GomError::Config(format!(
            "pruning needs more rows ({n}) than factors ({k})"
        )));
    }
    if cfg.r >= n {
        return Err(GomError::Config(format!(
            "prune r = {} must be smaller than the row count {n}",
            cfg.r
        )));
    }

    let norms: Vec<f64> = (0..n).map(|i| u.row(i).norm()).collect();
    let mut sorted = norms.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // (1-q)-quantile by nearest order statistic
    let idx = (((1.0 - cfg.q) * (n - 1) as f64).round() as usize).min(n - 1);
    let threshold = sorted[idx];
    let t: Vec<usize> = (0..n).filter(|&i| norms[i] > threshold).collect();
    if t.is_empty() {
        return Ok(BTreeSet::new());
    }

    // mean distance to the r nearest neighbors among all rows
    let mut scores = vec![0.0f64; n];
    let mut computed = vec![false; n];
    for &i in &t {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (u.row(i) - u.row(j)).norm())
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        scores[i] = dists[..cfg.r].iter().sum::<f64>() / cfg.r as f64;
        computed[i] = true;
    }
    let mut t_scores: Vec<f64> = t.iter().map(|&i| scores[i]).collect();
    t_scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = median(&t_scores);

    let mut pruned: Vec<usize> = t
        .iter()
        .copied()
        .filter(|&i| computed[i] && scores[i] > (1.0 + cfg.e) * med)
        .collect();
    let cap = n / 5;
    if pruned.len() > cap {
        pruned.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        pruned.truncate(cap);
    }
    Ok(pruned.into_iter().collect())
}

/// Successive projection: repeatedly select the candidate row of maximal
/// Euclidean norm, then project all rows onto the orthocomplement of the
/// selected direction. Ties break to the lowest index.
pub fn spa(y: &DMatrix<f64>, k: usize, candidates: &BTreeSet<usize>) -> Result<VertexResult> {
    let n = y.nrows();
    if y.ncols() != k {
        return Err(GomError::DimensionMismatch(format!(
            "SPA expects {} columns, got {}",
            k,
            y.ncols()
        )));
    }
    if candidates.len() < k {
        return Err(GomError::Degenerate(format!(
            "SPA needs at least {k} candidate rows, got {}",
            candidates.len()
        )));
    }
    if candidates.iter().any(|&i| i >= n) {
        return Err(GomError::Config("SPA candidate index out of range".into()));
    }

    let mut work = y.clone();
    let mut selected = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<usize> = None;
        let mut best_norm = 0.0f64;
        for &i in candidates {
            if selected.contains(&i) {
                continue;
            }
            let nrm = work.row(i).norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = Some(i);
            }
        }
        if best_norm < 1e-12 {
            return Err(GomError::Degenerate(
                "SPA residual norms vanish before K rows were selected".into(),
            ));
        }
        let s = best.unwrap();
        let dir = work.row(s).transpose() / best_norm;
        // Y <- Y (I - u u^T)
        let coeffs = &work * &dir; // N x 1
        work -= coeffs * dir.transpose();
        selected.push(s);
    }
    let pruned: BTreeSet<usize> = (0..n).filter(|i| !candidates.contains(i)).collect();
    Ok(VertexResult {
        indices: selected,
        pruned,
    })
}

/// All rows as SPA candidates except the given pruned set.
pub fn candidates_excluding(n: usize, pruned: &BTreeSet<usize>) -> BTreeSet<usize> {
    (0..n).filter(|i| !pruned.contains(i)).collect()
}
