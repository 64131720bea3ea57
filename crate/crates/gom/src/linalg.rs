//! Truncated rank-K SVD (randomized range finder) plus a dense full-SVD
//! oracle used for testing and as the small-matrix fallback.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GomError, Result};

/// Oversampling columns for the randomized range finder.
const OVERSAMPLE: usize = 10;
/// Power iterations for the randomized range finder.
const POWER_ITERS: usize = 2;
/// Below this min-dimension the dense oracle is used directly.
const DENSE_FALLBACK: usize = 64;

/// Top-K singular triplets (U, Lambda, V) with orthonormal columns.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
    /// Set when the spectral gap sigma_K - sigma_{K+1} <= 1e-6 * sigma_1,
    /// in which case subspace accuracy is not guaranteed.
    pub gap_warning: bool,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Max-abs deviation of U^T U and V^T V from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.rank();
        let du = (self.u.transpose() * &self.u - DMatrix::identity(k, k)).abs().max();
        let dv = (self.v.transpose() * &self.v - DMatrix::identity(k, k)).abs().max();
        du.max(dv)
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GomError::NonFinite);
    }
    Ok(())
}

/// Flips column signs so the first entry with magnitude above 1e-12 in each
/// column of U is nonnegative; V is flipped to match.
fn fix_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for k in 0..u.ncols() {
        let lead = u.column(k).iter().find(|x| x.abs() > 1e-12).copied();
        if let Some(x) = lead {
            if x < 0.0 {
                u.column_mut(k).neg_mut();
                v.column_mut(k).neg_mut();
            }
        }
    }
}

fn sorted_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    // the default convergence threshold of `svd()` can leave a reconstruction
    // error around 1e-3 on exactly low-rank inputs; ask for full precision
    // and fall back to the default only if the tight run does not converge
    let svd = nalgebra::linalg::SVD::try_new(m.clone(), true, true, 1e-17, 100_000)
        .unwrap_or_else(|| m.clone().svd(true, true));
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let s = svd.singular_values;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    let r = s.len();
    let mut us = DMatrix::zeros(u.nrows(), r);
    let mut vs = DMatrix::zeros(vt.ncols(), r);
    let mut ss = DVector::zeros(r);
    for (new, &old) in idx.iter().enumerate() {
        us.set_column(new, &u.column(old));
        vs.set_column(new, &vt.row(old).transpose());
        ss[new] = s[old];
    }
    fix_signs(&mut us, &mut vs);
    (us, ss, vs)
}

/// Full dense SVD, guarded to small matrices. Test oracle and fallback path.
pub fn dense_svd_oracle(m: &DMatrix<f64>) -> Result<SvdFactors> {
    let mindim = m.nrows().min(m.ncols());
    if mindim > 500 {
        return Err(GomError::OracleSizeGuard(mindim));
    }
    check_finite(m)?;
    let (u, s, v) = sorted_svd(m);
    Ok(SvdFactors {
        u,
        singular_values: s,
        v,
        gap_warning: false,
    })
}

fn gaussian_matrix(nrows: usize, ncols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(nrows, ncols, |_, _| StandardNormal.sample(rng))
}

/// Thin QR orthonormal basis of the columns of `m`.
fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    qr.q()
}

/// Rank-K truncated SVD. Uses the dense oracle when min(N, J) <= 64, else a
/// randomized range finder (oversampling 10, two power iterations) followed
/// by a small dense SVD of the projected matrix. Deterministic per seed.
pub fn truncated_svd(m: &DMatrix<f64>, k: usize, seed: u64) -> Result<SvdFactors> {
    let (n, j) = (m.nrows(), m.ncols());
    if k < 1 || k > n.min(j) {
        return Err(GomError::RankOutOfRange { k, nrows: n, ncols: j });
    }
    check_finite(m)?;

    let (u_full, s_full, v_full) = if n.min(j) <= DENSE_FALLBACK {
        sorted_svd(m)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sketch = (k + OVERSAMPLE).min(n.min(j));
        let omega = gaussian_matrix(j, sketch, &mut rng);
        let mut q = orthonormalize(&(m * &omega));
        for _ in 0..POWER_ITERS {
            let z = orthonormalize(&(m.transpose() * &q));
            q = orthonormalize(&(m * &z));
        }
        let b = q.transpose() * m; // sketch x J
        let (ub, s, v) = sorted_svd(&b);
        (q * ub, s, v)
    };

    let avail = s_full.len();
    let mut u = u_full.columns(0, k).into_owned();
    let mut v = v_full.columns(0, k).into_owned();
    let s = DVector::from_fn(k, |i, _| s_full[i]);
    fix_signs(&mut u, &mut v);

    let sigma1 = s_full[0];
    let next = if k < avail { s_full[k] } else { 0.0 };
    let gap_warning = sigma1 > 0.0 && (s[k - 1] - next) <= 1e-6 * sigma1;

    Ok(SvdFactors {
        u,
        singular_values: s,
        v,
        gap_warning,
    })
}

/// Largest singular value via power iteration on the Gram matrix;
/// deterministic start vector.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    check_finite(m)?;
    let (n, j) = (m.nrows(), m.ncols());
    if n == 0 || j == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    // iterate on the smaller Gram side
    let tall = n >= j;
    let dim = if tall { j } else { n };
    let mut x = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
    x /= x.norm();
    let mut prev = 0.0f64;
    for _ in 0..10_000 {
        let y = if tall {
            m.transpose() * (m * &x)
        } else {
            m * (m.transpose() * &x)
        };
        let lambda = y.norm();
        if lambda == 0.0 {
            return Ok(0.0);
        }
        x = y / lambda;
        if (lambda - prev).abs() <= 1e-10 * lambda.max(1e-300) {
            return Ok(lambda.sqrt());
        }
        prev = lambda;
    }
    Ok(prev.sqrt())
}
