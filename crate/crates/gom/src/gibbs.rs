//! Gibbs sampler for the polytomous GoM model with conjugate Dirichlet
//! priors, used as an accuracy baseline and timing comparator. The sweep
//! alternates latent class indicators Z, membership rows, and per-item
//! category tables; post-burn-in draws are averaged after aligning each
//! draw's profiles to the first retained draw.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::QuasiTensor;
use crate::error::{GomError, Result};
use crate::metrics::align_permutation;
use crate::simulate::{sample_dirichlet, stream_rng};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsConfig {
    /// Dirichlet prior on membership rows, length K.
    pub alpha: Vec<f64>,
    /// Dirichlet prior on category tables. A single entry broadcasts
    /// symmetrically to every item; otherwise the length must cover the
    /// largest category count and each item uses its first C_l entries.
    pub beta: Vec<f64>,
    pub burnin: usize,
    pub samples: usize,
    pub seed: u64,
}

impl GibbsConfig {
    fn validate(&self, k: usize, max_c: usize) -> Result<()> {
        if self.samples < 1 {
            return Err(GomError::Config("gibbs samples must be >= 1".into()));
        }
        if self.alpha.len() != k || self.alpha.iter().any(|&a| a <= 0.0) {
            return Err(GomError::Config(format!(
                "gibbs alpha must have {k} positive entries"
            )));
        }
        if self.beta.is_empty() || self.beta.iter().any(|&b| b <= 0.0) {
            return Err(GomError::Config("gibbs beta must be positive".into()));
        }
        if self.beta.len() != 1 && self.beta.len() < max_c {
            return Err(GomError::Config(format!(
                "gibbs beta must broadcast (length 1) or cover {max_c} categories"
            )));
        }
        Ok(())
    }

    fn beta_for(&self, c_l: usize) -> Vec<f64> {
        if self.beta.len() == 1 {
            vec![self.beta[0]; c_l]
        } else {
            self.beta[..c_l].to_vec()
        }
    }
}

/// Posterior means and chain diagnostics.
#[derive(Debug, Clone)]
pub struct GibbsEstimate {
    pub pi_mean: DMatrix<f64>,
    /// Flattened J x K posterior mean of the category tables, J = sum C_l.
    pub theta_mean: DMatrix<f64>,
    pub loglik_trace: Vec<f64>,
}

struct State {
    /// z[i * L + l] in 0..K
    z: Vec<usize>,
    pi: DMatrix<f64>,
    /// theta[l] is C_l x K
    theta: Vec<DMatrix<f64>>,
}

fn sample_categorical(probs: &[f64], total: f64, rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen_range(0.0..total);
    let mut acc = 0.0;
    for (idx, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return idx;
        }
    }
    probs.len() - 1
}

fn loglik(quasi: &QuasiTensor, state: &State) -> f64 {
    let (n, l_count, k) = (quasi.n_subjects(), quasi.n_items(), state.pi.ncols());
    let mut ll = 0.0;
    for i in 0..n {
        for l in 0..l_count {
            let c = quasi.response(i, l) - 1;
            let p: f64 = (0..k).map(|kk| state.pi[(i, kk)] * state.theta[l][(c, kk)]).sum();
            ll += p.max(1e-300).ln();
        }
    }
    ll
}

/// Runs the three-block Gibbs sweep for `burnin + samples` iterations and
/// returns post-burn-in averages.
pub fn gibbs_fit(quasi: &QuasiTensor, k: usize, cfg: &GibbsConfig) -> Result<GibbsEstimate> {
    if k == 0 {
        return Err(GomError::Config("gibbs needs K >= 1".into()));
    }
    let counts = quasi.category_counts().to_vec();
    let max_c = *counts.iter().max().unwrap();
    cfg.validate(k, max_c)?;
    let (n, l_count) = (quasi.n_subjects(), quasi.n_items());
    let j_total: usize = counts.iter().sum();
    let mut rng = stream_rng(cfg.seed, 0);

    // initialize Pi and Theta from their priors, Z from its conditional
    let pi = sample_dirichlet(&cfg.alpha, n, &mut rng)?;
    let mut theta = Vec::with_capacity(l_count);
    for &c_l in &counts {
        let beta = cfg.beta_for(c_l);
        let mut t = DMatrix::zeros(c_l, k);
        for kk in 0..k {
            let draw = sample_dirichlet(&beta, 1, &mut rng)?;
            for cc in 0..c_l {
                t[(cc, kk)] = draw[(0, cc)];
            }
        }
        theta.push(t);
    }
    let mut state = State {
        z: vec![0; n * l_count],
        pi,
        theta,
    };

    let mut probs = vec![0.0f64; k];
    let mut pi_acc = DMatrix::zeros(n, k);
    let mut theta_acc = DMatrix::zeros(j_total, k);
    let mut first_draw_pi: Option<DMatrix<f64>> = None;
    let mut trace = Vec::with_capacity(cfg.burnin + cfg.samples);
    let offsets: Vec<usize> = counts
        .iter()
        .scan(0usize, |acc, &c| {
            let o = *acc;
            *acc += c;
            Some(o)
        })
        .collect();

    for sweep in 0..cfg.burnin + cfg.samples {
        // Z | R, Theta, Pi
        for i in 0..n {
            for l in 0..l_count {
                let c = quasi.response(i, l) - 1;
                let mut total = 0.0;
                for kk in 0..k {
                    let p = state.theta[l][(c, kk)] * state.pi[(i, kk)];
                    probs[kk] = p;
                    total += p;
                }
                debug_assert!(total > 0.0);
                state.z[i * l_count + l] = sample_categorical(&probs, total, &mut rng);
            }
        }
        // Pi | Z
        for i in 0..n {
            let mut conc = cfg.alpha.clone();
            for l in 0..l_count {
                conc[state.z[i * l_count + l]] += 1.0;
            }
            let row = sample_dirichlet(&conc, 1, &mut rng)?;
            for kk in 0..k {
                state.pi[(i, kk)] = row[(0, kk)];
            }
        }
        // Theta | R, Z
        for l in 0..l_count {
            let c_l = counts[l];
            let beta = cfg.beta_for(c_l);
            for kk in 0..k {
                let mut conc = beta.clone();
                for i in 0..n {
                    if state.z[i * l_count + l] == kk {
                        conc[quasi.response(i, l) - 1] += 1.0;
                    }
                }
                let draw = sample_dirichlet(&conc, 1, &mut rng)?;
                for cc in 0..c_l {
                    state.theta[l][(cc, kk)] = draw[(0, cc)];
                }
            }
        }

        trace.push(loglik(quasi, &state));

        if sweep >= cfg.burnin {
            // align this draw's profiles to the first retained draw
            let perm: Vec<usize> = match &first_draw_pi {
                None => {
                    first_draw_pi = Some(state.pi.clone());
                    (0..k).collect()
                }
                Some(reference) => align_permutation(reference, &state.pi)?,
            };
            for i in 0..n {
                for kk in 0..k {
                    pi_acc[(i, kk)] += state.pi[(i, perm[kk])];
                }
            }
            for l in 0..l_count {
                for cc in 0..counts[l] {
                    for kk in 0..k {
                        theta_acc[(offsets[l] + cc, kk)] += state.theta[l][(cc, perm[kk])];
                    }
                }
            }
        }
    }

    let scale = 1.0 / cfg.samples as f64;
    Ok(GibbsEstimate {
        pi_mean: pi_acc * scale,
        theta_mean: theta_acc * scale,
        loglik_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(seed: u64) -> GibbsConfig {
        GibbsConfig {
            alpha: vec![1.0; 2],
            beta: vec![1.0],
            burnin: 50,
            samples: 100,
            seed,
        }
    }

    #[test]
    fn conjugate_posterior_mean_single_cell() {
        // one subject, one item, K = 1: Theta block has closed-form posterior
        // mean (beta_c + R_c) / (beta_0 + 1)
        let quasi = QuasiTensor::new(vec![2], 1, vec![3]).unwrap();
        let cfg = GibbsConfig {
            alpha: vec![1.0],
            beta: vec![0.5],
            burnin: 200,
            samples: 20_000,
            seed: 3,
        };
        let est = gibbs_fit(&quasi, 1, &cfg).unwrap();
        let beta0 = 1.5;
        for c in 0..3 {
            let r_c = if c == 1 { 1.0 } else { 0.0 };
            let expect = (0.5 + r_c) / (beta0 + 1.0);
            assert!(
                (est.theta_mean[(c, 0)] - expect).abs() < 0.01,
                "c={c}: {} vs {expect}",
                est.theta_mean[(c, 0)]
            );
        }
    }

    #[test]
    fn draws_stay_on_simplices() {
        let quasi = QuasiTensor::new(vec![1, 2, 2, 1, 1, 1], 3, vec![2, 2]).unwrap();
        let est = gibbs_fit(&quasi, 2, &small_cfg(4)).unwrap();
        for i in 0..3 {
            let s: f64 = est.pi_mean.row(i).sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(est.pi_mean.row(i).iter().all(|&v| v >= 0.0));
        }
        for l in 0..2 {
            for kk in 0..2 {
                let s: f64 = (0..2).map(|c| est.theta_mean[(l * 2 + c, kk)]).sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let quasi = QuasiTensor::new(vec![1, 2, 2, 1, 1, 1], 3, vec![2, 2]).unwrap();
        let a = gibbs_fit(&quasi, 2, &small_cfg(7)).unwrap();
        let b = gibbs_fit(&quasi, 2, &small_cfg(7)).unwrap();
        assert_eq!(a.pi_mean, b.pi_mean);
        assert_eq!(a.theta_mean, b.theta_mean);
    }

    #[test]
    fn invalid_priors_rejected() {
        let quasi = QuasiTensor::new(vec![1], 1, vec![2]).unwrap();
        let mut cfg = small_cfg(0);
        cfg.alpha = vec![1.0, -1.0];
        assert!(gibbs_fit(&quasi, 2, &cfg).is_err());
        let mut cfg = small_cfg(0);
        cfg.beta = vec![];
        assert!(gibbs_fit(&quasi, 2, &cfg).is_err());
        assert!(gibbs_fit(&quasi, 0, &small_cfg(0)).is_err());
    }

    #[test]
    fn stationary_trace_has_no_trend() {
        // flat priors, fixed data; slope t-statistic of the post-burn-in
        // log-likelihood trace must be small
        use crate::simulate::{generate, study_i};
        let sc = study_i(60, 1, 21);
        let gen = generate(&sc, 0).unwrap();
        let quasi = gen.quasi.unwrap();
        let cfg = GibbsConfig {
            alpha: vec![1.0; 3],
            beta: vec![1.0],
            burnin: 500,
            samples: 1000,
            seed: 21,
        };
        let est = gibbs_fit(&quasi, 3, &cfg).unwrap();
        let tail = &est.loglik_trace[est.loglik_trace.len() - 1000..];
        let n = tail.len() as f64;
        let xbar = (n - 1.0) / 2.0;
        let ybar = tail.iter().sum::<f64>() / n;
        let sxx: f64 = (0..tail.len()).map(|t| (t as f64 - xbar).powi(2)).sum();
        let sxy: f64 = tail.iter().enumerate().map(|(t, &y)| (t as f64 - xbar) * (y - ybar)).sum();
        let slope = sxy / sxx;
        let resid_ss: f64 = tail
            .iter()
            .enumerate()
            .map(|(t, &y)| (y - ybar - slope * (t as f64 - xbar)).powi(2))
            .sum();
        let se = (resid_ss / (n - 2.0) / sxx).sqrt();
        let t_stat = slope / se;
        assert!(t_stat.abs() < 3.0, "trend t-statistic {t_stat}");
    }
}
