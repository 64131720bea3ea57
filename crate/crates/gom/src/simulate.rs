//! Generators for the three simulation study designs: flattened polytomous
//! responses, AR-copula blockwise-dependent binary data, and Poisson counts.
//! Replications are embarrassingly parallel; each owns a ChaCha stream keyed
//! by its replication index so execution order cannot change results.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::data::{flatten, BlockPartition, Family, FlatMatrix, ModelParams, QuasiTensor};
use crate::error::{GomError, Result};
use crate::estimator::{fit, FitConfig};
use crate::metrics::{aligned_errors, scaled_frobenius};
use crate::normal::phi_inv;

/// Counter-based RNG for stream `stream` under base seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Data family of a simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioFamily {
    Polytomous,
    Bernoulli,
    Poisson,
}

/// Within-block AR copula dependence for the binary study.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Dependence {
    pub block_size: usize,
    pub rho: f64,
}

/// Declarative description of one simulation study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimScenario {
    pub family: ScenarioFamily,
    pub n: usize,
    /// Item count L for polytomous; column count J otherwise.
    pub num_items: usize,
    pub k: usize,
    /// Categories per item (polytomous only).
    #[serde(default)]
    pub categories: Option<usize>,
    /// Membership Dirichlet hyperparameter, length K.
    pub alpha: Vec<f64>,
    /// Dirichlet concentration for polytomous item blocks.
    #[serde(default)]
    pub item_dirichlet: Option<f64>,
    /// Beta(a, b) hyperparameters for Bernoulli item probabilities.
    #[serde(default)]
    pub beta_params: Option<(f64, f64)>,
    /// Gamma (shape, rate) hyperparameters for Poisson rates.
    #[serde(default)]
    pub gamma_params: Option<(f64, f64)>,
    #[serde(default)]
    pub dependence: Option<Dependence>,
    pub replications: usize,
    pub seed: u64,
    /// Place the K pure rows at random indices instead of rows 1..K.
    #[serde(default)]
    pub random_pure_rows: bool,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.num_items == 0 || self.k == 0 || self.replications == 0 {
            return Err(GomError::Config("scenario dimensions must be positive".into()));
        }
        if self.alpha.len() != self.k {
            return Err(GomError::Config(format!(
                "alpha has length {}, expected K = {}",
                self.alpha.len(),
                self.k
            )));
        }
        if self.alpha.iter().any(|&a| a <= 0.0) {
            return Err(GomError::Config("alpha entries must be positive".into()));
        }
        match self.family {
            ScenarioFamily::Polytomous => {
                if self.categories.map_or(true, |c| c < 2) {
                    return Err(GomError::Config(
                        "polytomous scenarios need categories >= 2".into(),
                    ));
                }
                if self.item_dirichlet.map_or(true, |b| b <= 0.0) {
                    return Err(GomError::Config(
                        "polytomous scenarios need a positive item_dirichlet".into(),
                    ));
                }
                if self.dependence.is_some() {
                    return Err(GomError::Config(
                        "dependence is only valid for the bernoulli family".into(),
                    ));
                }
            }
            ScenarioFamily::Bernoulli => {
                let (a, b) = self
                    .beta_params
                    .ok_or_else(|| GomError::Config("bernoulli scenarios need beta_params".into()))?;
                if a <= 0.0 || b <= 0.0 {
                    return Err(GomError::Config("beta_params must be positive".into()));
                }
                if let Some(dep) = &self.dependence {
                    if dep.block_size == 0 || self.num_items % dep.block_size != 0 {
                        return Err(GomError::Config(format!(
                            "J = {} must be divisible by the dependence block size {}",
                            self.num_items, dep.block_size
                        )));
                    }
                    if !(-1.0 < dep.rho && dep.rho < 1.0) {
                        return Err(GomError::Config("rho must lie in (-1, 1)".into()));
                    }
                }
            }
            ScenarioFamily::Poisson => {
                let (shape, rate) = self
                    .gamma_params
                    .ok_or_else(|| GomError::Config("poisson scenarios need gamma_params".into()))?;
                if shape <= 0.0 || rate <= 0.0 {
                    return Err(GomError::Config("gamma_params must be positive".into()));
                }
                if self.dependence.is_some() {
                    return Err(GomError::Config(
                        "dependence is only valid for the bernoulli family".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Rows of i.i.d. Dirichlet(alpha) draws, generated by normalizing
/// independent Gamma(alpha_k, 1) variates.
pub fn sample_dirichlet(alpha: &[f64], n: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    if alpha.iter().any(|&a| a <= 0.0) {
        return Err(GomError::Config("dirichlet alpha must be positive".into()));
    }
    let gammas: Vec<Gamma<f64>> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| GomError::Config(e.to_string())))
        .collect::<Result<_>>()?;
    let k = alpha.len();
    let mut out = DMatrix::zeros(n, k);
    for i in 0..n {
        let mut sum = 0.0;
        for c in 0..k {
            let g = gammas[c].sample(rng);
            out[(i, c)] = g;
            sum += g;
        }
        for c in 0..k {
            out[(i, c)] /= sum;
        }
    }
    Ok(out)
}

/// Membership matrix with the first K rows fixed to the identity (or K
/// random distinct rows when `random_pure` is set) and the remainder
/// i.i.d. Dirichlet(alpha).
pub fn gen_memberships(
    n: usize,
    k: usize,
    alpha: &[f64],
    random_pure: bool,
    rng: &mut impl Rng,
) -> Result<DMatrix<f64>> {
    if n < k {
        return Err(GomError::Config(format!("N = {n} must be at least K = {k}")));
    }
    let mut pi = sample_dirichlet(alpha, n, rng)?;
    let pure_rows: Vec<usize> = if random_pure {
        // reservoir-free distinct draw; K is tiny
        let mut rows = Vec::with_capacity(k);
        while rows.len() < k {
            let r = rng.gen_range(0..n);
            if !rows.contains(&r) {
                rows.push(r);
            }
        }
        rows
    } else {
        (0..k).collect()
    };
    for (c, &row) in pure_rows.iter().enumerate() {
        for cc in 0..k {
            pi[(row, cc)] = if cc == c { 1.0 } else { 0.0 };
        }
    }
    Ok(pi)
}

/// Polytomous responses: category of subject i on item l drawn from the
/// categorical distribution with probabilities Theta-block times pi_i.
pub fn gen_polytomous(
    pi: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    partition: &BlockPartition,
    rng: &mut impl Rng,
) -> Result<QuasiTensor> {
    let n = pi.nrows();
    let l_count = partition.n_blocks();
    let mut responses = Vec::with_capacity(n * l_count);
    for i in 0..n {
        for l in 0..l_count {
            let range = partition.range(l);
            let probs: Vec<f64> = range
                .clone()
                .map(|j| (0..pi.ncols()).map(|c| pi[(i, c)] * theta[(j, c)]).sum())
                .collect();
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(GomError::Degenerate(format!(
                    "category probabilities for subject {i}, item {l} sum to {total}"
                )));
            }
            let u: f64 = rng.gen_range(0.0..total);
            let mut acc = 0.0;
            let mut chosen = probs.len() - 1;
            for (c, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            responses.push(chosen + 1);
        }
    }
    QuasiTensor::new(responses, n, partition.sizes().to_vec())
}

/// Cholesky factor of the M x M AR(1) correlation matrix with parameter rho.
fn ar1_cholesky(m: usize, rho: f64) -> DMatrix<f64> {
    let sigma = DMatrix::from_fn(m, m, |i, j| rho.powi((i as i64 - j as i64).unsigned_abs() as i32));
    sigma.cholesky().expect("AR(1) correlation is positive definite").l()
}

/// Binary responses with within-block AR(rho) Gaussian-copula dependence:
/// R_{ij} = 1(eta_{ij} < Phi^{-1}(p_{ij})) where eta blocks are N(0, Sigma_0)
/// with (Sigma_0)_{ab} = rho^{|a-b|}. Marginal means equal Pi Theta^T exactly;
/// blocks and subjects are independent.
pub fn gen_block_dependent_binary(
    pi: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    m: usize,
    rho: f64,
    rng: &mut impl Rng,
) -> Result<FlatMatrix> {
    let n = pi.nrows();
    let j = theta.nrows();
    if m == 0 || j % m != 0 {
        return Err(GomError::Config(format!(
            "J = {j} must be divisible by block size M = {m}"
        )));
    }
    if !(-1.0 < rho && rho < 1.0) {
        return Err(GomError::Config("rho must lie in (-1, 1)".into()));
    }
    let chol = ar1_cholesky(m, rho);
    let mut values = DMatrix::zeros(n, j);
    let mut z = vec![0.0f64; m];
    for i in 0..n {
        for b in 0..j / m {
            for zc in z.iter_mut() {
                *zc = StandardNormal.sample(rng);
            }
            for a in 0..m {
                let jcol = b * m + a;
                let mean: f64 = (0..pi.ncols()).map(|c| pi[(i, c)] * theta[(jcol, c)]).sum();
                if !(0.0..=1.0).contains(&mean) {
                    return Err(GomError::Degenerate(format!(
                        "mean {mean} at ({i}, {jcol}) is outside [0, 1]"
                    )));
                }
                // threshold is +-inf at exact 0/1; clamp before inversion
                let d = phi_inv(mean.clamp(1e-12, 1.0 - 1e-12));
                let eta: f64 = (0..=a).map(|t| chol[(a, t)] * z[t]).sum();
                values[(i, jcol)] = if eta < d { 1.0 } else { 0.0 };
            }
        }
    }
    FlatMatrix::new(values, BlockPartition::singletons(j), Family::BernoulliGeneral)
}

/// Independent Bernoulli responses through the same normal-threshold stream
/// as the copula generator, so M = 1 dependence reduces to it bit-for-bit.
pub fn gen_independent_binary(
    pi: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    rng: &mut impl Rng,
) -> Result<FlatMatrix> {
    gen_block_dependent_binary(pi, theta, 1, 0.0, rng)
}

/// Independent Poisson counts with rate matrix Pi Theta^T.
pub fn gen_poisson(
    pi: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    rng: &mut impl Rng,
) -> Result<FlatMatrix> {
    let n = pi.nrows();
    let j = theta.nrows();
    let mut values = DMatrix::zeros(n, j);
    for i in 0..n {
        for jcol in 0..j {
            let rate: f64 = (0..pi.ncols()).map(|c| pi[(i, c)] * theta[(jcol, c)]).sum();
            if rate < 0.0 {
                return Err(GomError::Degenerate(format!(
                    "negative Poisson rate {rate} at ({i}, {jcol})"
                )));
            }
            values[(i, jcol)] = if rate == 0.0 {
                0.0
            } else {
                let d = rand_distr::Poisson::new(rate)
                    .map_err(|e| GomError::Degenerate(e.to_string()))?;
                d.sample(rng)
            };
        }
    }
    FlatMatrix::new(values, BlockPartition::singletons(j), Family::Poisson)
}

/// Item parameters drawn per the scenario family: Dirichlet blocks for
/// polytomous, Beta for Bernoulli, Gamma for Poisson. Returns (Theta, partition).
pub fn gen_item_params(
    scenario: &SimScenario,
    rng: &mut impl Rng,
) -> Result<(DMatrix<f64>, BlockPartition)> {
    let k = scenario.k;
    match scenario.family {
        ScenarioFamily::Polytomous => {
            let c = scenario.categories.unwrap();
            let conc = scenario.item_dirichlet.unwrap();
            let l_count = scenario.num_items;
            let partition = BlockPartition::from_sizes(vec![c; l_count])?;
            let mut theta = DMatrix::zeros(c * l_count, k);
            let alpha = vec![conc; c];
            for l in 0..l_count {
                for kk in 0..k {
                    let block = sample_dirichlet(&alpha, 1, rng)?;
                    for cc in 0..c {
                        theta[(l * c + cc, kk)] = block[(0, cc)];
                    }
                }
            }
            Ok((theta, partition))
        }
        ScenarioFamily::Bernoulli => {
            let (a, b) = scenario.beta_params.unwrap();
            let beta = Beta::new(a, b).map_err(|e| GomError::Config(e.to_string()))?;
            let j = scenario.num_items;
            let theta = DMatrix::from_fn(j, k, |_, _| beta.sample(rng));
            Ok((theta, BlockPartition::singletons(j)))
        }
        ScenarioFamily::Poisson => {
            let (shape, rate) = scenario.gamma_params.unwrap();
            let gamma = Gamma::new(shape, 1.0 / rate).map_err(|e| GomError::Config(e.to_string()))?;
            let j = scenario.num_items;
            let theta = DMatrix::from_fn(j, k, |_, _| gamma.sample(rng));
            Ok((theta, BlockPartition::singletons(j)))
        }
    }
}

/// One generated replication: ground truth plus observed data.
#[derive(Debug, Clone)]
pub struct Generated {
    pub truth: ModelParams,
    pub partition: BlockPartition,
    pub flat: FlatMatrix,
    pub quasi: Option<QuasiTensor>,
}

/// Generates parameters and data for replication `rep` of a scenario.
pub fn generate(scenario: &SimScenario, rep: usize) -> Result<Generated> {
    scenario.validate()?;
    let mut rng = stream_rng(scenario.seed, rep as u64);
    let pi = gen_memberships(
        scenario.n,
        scenario.k,
        &scenario.alpha,
        scenario.random_pure_rows,
        &mut rng,
    )?;
    let (theta, partition) = gen_item_params(scenario, &mut rng)?;
    let (flat, quasi, family) = match scenario.family {
        ScenarioFamily::Polytomous => {
            let quasi = gen_polytomous(&pi, &theta, &partition, &mut rng)?;
            (flatten(&quasi), Some(quasi), Family::BernoulliOnehot)
        }
        ScenarioFamily::Bernoulli => {
            let flat = match scenario.dependence {
                Some(dep) => gen_block_dependent_binary(&pi, &theta, dep.block_size, dep.rho, &mut rng)?,
                None => gen_independent_binary(&pi, &theta, &mut rng)?,
            };
            (flat, None, Family::BernoulliGeneral)
        }
        ScenarioFamily::Poisson => (gen_poisson(&pi, &theta, &mut rng)?, None, Family::Poisson),
    };
    Ok(Generated {
        truth: ModelParams {
            memberships: pi,
            item_params: theta,
            family,
        },
        partition,
        flat,
        quasi,
    })
}

/// One row of the replication results table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepRecord {
    pub replication: usize,
    pub metric: String,
    pub value: f64,
}

/// Per-replication outcome; failures are recorded without aborting the batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepOutcome {
    pub replication: usize,
    pub error: Option<String>,
    pub records: Vec<RepRecord>,
}

fn run_one(scenario: &SimScenario, fit_cfg: &FitConfig, rep: usize) -> RepOutcome {
    let result = (|| -> Result<Vec<RepRecord>> {
        let gen = generate(scenario, rep)?;
        let est = fit(&gen.flat, scenario.k, fit_cfg)?;
        let err = aligned_errors(
            &est.memberships,
            &gen.truth.memberships,
            &est.item_params,
            &gen.truth.item_params,
        )?;
        let rstar = &gen.truth.memberships * gen.truth.item_params.transpose();
        let frob = scaled_frobenius(&rstar, &est.memberships, &est.item_params);
        let rec = |metric: &str, value: f64| RepRecord {
            replication: rep,
            metric: metric.to_string(),
            value,
        };
        Ok(vec![
            rec("mae_pi", err.mae_pi),
            rec("mae_theta", err.mae_theta),
            rec("l2inf_pi", err.l2inf_pi),
            rec("maxabs_theta", err.maxabs_theta),
            rec("frob_scaled", frob),
            rec("seconds", est.diagnostics.seconds),
            rec("pruned_rows", est.diagnostics.pruned_rows as f64),
        ])
    })();
    match result {
        Ok(records) => RepOutcome {
            replication: rep,
            error: None,
            records,
        },
        Err(e) => RepOutcome {
            replication: rep,
            error: Some(e.to_string()),
            records: Vec::new(),
        },
    }
}

/// Runs every replication of a scenario sequentially.
pub fn run_replications_serial(scenario: &SimScenario, fit_cfg: &FitConfig) -> Result<Vec<RepOutcome>> {
    scenario.validate()?;
    Ok((0..scenario.replications)
        .map(|rep| run_one(scenario, fit_cfg, rep))
        .collect())
}

/// Runs every replication of a scenario, in parallel when the `parallel`
/// feature is enabled. Output order is keyed by replication index either way.
pub fn run_replications(scenario: &SimScenario, fit_cfg: &FitConfig) -> Result<Vec<RepOutcome>> {
    scenario.validate()?;
    #[cfg(feature = "parallel")]
    {
        let mut outcomes: Vec<RepOutcome> = (0..scenario.replications)
            .into_par_iter()
            .map(|rep| run_one(scenario, fit_cfg, rep))
            .collect();
        outcomes.sort_by_key(|o| o.replication);
        Ok(outcomes)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_replications_serial(scenario, fit_cfg)
    }
}

/// Study I scenario defaults: K = 3, C = 3, L = N/5 items, Dirichlet(1) rows,
/// Dirichlet(0.2) item blocks.
pub fn study_i(n: usize, replications: usize, seed: u64) -> SimScenario {
    SimScenario {
        family: ScenarioFamily::Polytomous,
        n,
        num_items: n / 5,
        k: 3,
        categories: Some(3),
        alpha: vec![1.0; 3],
        item_dirichlet: Some(0.2),
        beta_params: None,
        gamma_params: None,
        dependence: None,
        replications,
        seed,
        random_pure_rows: false,
    }
}

/// Study II scenario defaults: Bernoulli with Beta(0.2, 0.2) items and
/// AR(0.5) copula blocks of size 10; J = N/5.
pub fn study_ii(n: usize, replications: usize, seed: u64) -> SimScenario {
    SimScenario {
        family: ScenarioFamily::Bernoulli,
        n,
        num_items: n / 5,
        k: 3,
        categories: None,
        alpha: vec![1.0; 3],
        item_dirichlet: None,
        beta_params: Some((0.2, 0.2)),
        gamma_params: None,
        dependence: Some(Dependence {
            block_size: 10,
            rho: 0.5,
        }),
        replications,
        seed,
        random_pure_rows: false,
    }
}

/// Study III scenario defaults: Poisson rates from Gamma(1, 2); J = N/5.
pub fn study_iii(n: usize, replications: usize, seed: u64) -> SimScenario {
    SimScenario {
        family: ScenarioFamily::Poisson,
        n,
        num_items: n / 5,
        k: 3,
        categories: None,
        alpha: vec![1.0; 3],
        item_dirichlet: None,
        beta_params: None,
        gamma_params: Some((1.0, 2.0)),
        dependence: None,
        replications,
        seed,
        random_pure_rows: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_rows_on_simplex() {
        let mut rng = stream_rng(1, 0);
        let m = sample_dirichlet(&[0.5, 1.5, 2.0], 200, &mut rng).unwrap();
        for i in 0..200 {
            let s: f64 = m.row(i).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(m.row(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn dirichlet_concentration() {
        let mut rng = stream_rng(2, 0);
        let m = sample_dirichlet(&[1e6, 1e6], 1, &mut rng).unwrap();
        assert!((m[(0, 0)] - 0.5).abs() < 0.01);
    }

    #[test]
    fn dirichlet_moments() {
        let mut rng = stream_rng(3, 0);
        let n = 10_000;
        let m = sample_dirichlet(&[1.0, 1.0, 1.0], n, &mut rng).unwrap();
        let a0 = 3.0;
        for c in 0..3 {
            let mean = m.column(c).sum() / n as f64;
            assert!((mean - 1.0 / 3.0).abs() < 0.02, "mean[{c}] = {mean}");
        }
        // closed-form covariance: alpha_i (a0 delta_ij - alpha_j) / (a0^2 (a0+1))
        for a in 0..3 {
            for b in 0..3 {
                let delta = if a == b { a0 } else { 0.0 };
                let expect = 1.0 * (delta - 1.0) / (a0 * a0 * (a0 + 1.0));
                let ma = m.column(a).sum() / n as f64;
                let mb = m.column(b).sum() / n as f64;
                let cov: f64 = (0..n)
                    .map(|i| (m[(i, a)] - ma) * (m[(i, b)] - mb))
                    .sum::<f64>()
                    / n as f64;
                assert!(
                    (cov - expect).abs() < 0.2 * expect.abs(),
                    "cov[{a}][{b}] = {cov}, expect {expect}"
                );
            }
        }
    }

    #[test]
    fn dirichlet_rejects_bad_alpha() {
        let mut rng = stream_rng(4, 0);
        assert!(sample_dirichlet(&[1.0, -0.5], 1, &mut rng).is_err());
    }

    #[test]
    fn memberships_identity_block() {
        let mut rng = stream_rng(5, 0);
        let pi = gen_memberships(3, 3, &[1.0; 3], false, &mut rng).unwrap();
        assert!((pi - DMatrix::identity(3, 3)).abs().max() < 1e-15);

        let mut rng = stream_rng(5, 1);
        let pi = gen_memberships(10, 3, &[1.0; 3], false, &mut rng).unwrap();
        for c in 0..3 {
            for cc in 0..3 {
                assert_eq!(pi[(c, cc)], if c == cc { 1.0 } else { 0.0 });
            }
        }
        assert!(gen_memberships(2, 3, &[1.0; 3], false, &mut stream_rng(5, 2)).is_err());
    }

    #[test]
    fn membership_smallest_singular_value_grows() {
        // consistent with the high-probability bound sigma_K^2 >= N / (2 nu (1 + a0))
        for &(n, seed) in &[(5000usize, 6u64), (5000, 7), (5000, 8)] {
            let mut rng = stream_rng(seed, 0);
            let pi = gen_memberships(n, 3, &[1.0; 3], false, &mut rng).unwrap();
            let svd = pi.svd(false, false);
            let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(smin >= 0.1 * (n as f64).sqrt(), "smin = {smin}");
        }
    }

    #[test]
    fn polytomous_pure_subject_frequencies() {
        let mut rng = stream_rng(9, 0);
        let k = 2;
        let pi = DMatrix::from_row_slice(1, k, &[1.0, 0.0]);
        let partition = BlockPartition::from_sizes(vec![3]).unwrap();
        let theta = DMatrix::from_row_slice(3, 2, &[0.6, 0.1, 0.3, 0.3, 0.1, 0.6]);
        let mut counts = [0usize; 3];
        let reps = 100_000;
        for _ in 0..reps {
            let q = gen_polytomous(&pi, &theta, &partition, &mut rng).unwrap();
            counts[q.response(0, 0) - 1] += 1;
        }
        for c in 0..3 {
            let freq = counts[c] as f64 / reps as f64;
            assert!((freq - theta[(c, 0)]).abs() < 0.01, "c={c}: {freq}");
        }
    }

    #[test]
    fn polytomous_degenerate_category() {
        let mut rng = stream_rng(10, 0);
        let pi = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let partition = BlockPartition::from_sizes(vec![3]).unwrap();
        let theta = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 0.0]);
        let q = gen_polytomous(&pi, &theta, &partition, &mut rng).unwrap();
        assert_eq!(q.response(0, 0), 2);
        assert_eq!(q.response(1, 0), 2);
    }

    #[test]
    fn polytomous_mean_matches_model() {
        let mut rng = stream_rng(11, 0);
        let pi = DMatrix::from_row_slice(1, 2, &[0.3, 0.7]);
        let partition = BlockPartition::from_sizes(vec![3]).unwrap();
        let theta = DMatrix::from_row_slice(3, 2, &[0.6, 0.1, 0.3, 0.3, 0.1, 0.6]);
        let reps = 10_000;
        let mut sums = [0.0f64; 3];
        for _ in 0..reps {
            let q = gen_polytomous(&pi, &theta, &partition, &mut rng).unwrap();
            let f = flatten(&q);
            for c in 0..3 {
                sums[c] += f.values[(0, c)];
            }
        }
        for c in 0..3 {
            let mean: f64 = (0..2).map(|kk| pi[(0, kk)] * theta[(c, kk)]).sum();
            let se = (mean * (1.0 - mean) / reps as f64).sqrt();
            let emp = sums[c] / reps as f64;
            assert!((emp - mean).abs() < 3.0 * se + 1e-9, "c={c}: {emp} vs {mean}");
        }
    }

    #[test]
    fn copula_rho_zero_uncorrelated() {
        let mut rng = stream_rng(12, 0);
        let n = 100_000;
        let pi = DMatrix::from_element(n, 1, 1.0);
        let theta = DMatrix::from_element(10, 1, 0.5);
        let flat = gen_block_dependent_binary(&pi, &theta, 10, 0.0, &mut rng).unwrap();
        // adjacent columns inside a block
        let (c0, c1) = (flat.values.column(0), flat.values.column(1));
        let m0 = c0.sum() / n as f64;
        let m1 = c1.sum() / n as f64;
        let cov: f64 = (0..n).map(|i| (c0[i] - m0) * (c1[i] - m1)).sum::<f64>() / n as f64;
        let corr = cov / (m0 * (1.0 - m0) * m1 * (1.0 - m1)).sqrt();
        assert!(corr.abs() < 0.02, "corr = {corr}");
    }

    #[test]
    fn copula_correlation_matches_orthant_oracle() {
        use crate::normal::phi2;
        let mut rng = stream_rng(13, 0);
        let n = 100_000;
        let pi = DMatrix::from_element(n, 1, 1.0);
        let theta = DMatrix::from_element(10, 1, 0.5);
        let flat = gen_block_dependent_binary(&pi, &theta, 10, 0.5, &mut rng).unwrap();
        let (c0, c1) = (flat.values.column(0), flat.values.column(1));
        let m0 = c0.sum() / n as f64;
        let m1 = c1.sum() / n as f64;
        let cov: f64 = (0..n).map(|i| (c0[i] - m0) * (c1[i] - m1)).sum::<f64>() / n as f64;
        let corr = cov / (m0 * (1.0 - m0) * m1 * (1.0 - m1)).sqrt();
        // target correlation from the bivariate-normal orthant probability
        let p11 = phi2(0.0, 0.0, 0.5);
        let target = (p11 - 0.25) / 0.25;
        assert!((corr - target).abs() < 0.02, "corr = {corr}, target = {target}");
    }

    #[test]
    fn copula_means_match_model() {
        let mut rng = stream_rng(14, 0);
        let n = 20_000;
        let pi = DMatrix::from_fn(n, 2, |i, c| if c == 0 { 0.25 + 0.5 * ((i % 2) as f64) } else { 0.75 - 0.5 * ((i % 2) as f64) });
        let theta = DMatrix::from_row_slice(2, 2, &[0.2, 0.9, 0.6, 0.4]);
        let flat = gen_block_dependent_binary(&pi, &theta, 2, 0.5, &mut rng).unwrap();
        for j in 0..2 {
            let mut expect = 0.0;
            for i in 0..n {
                expect += (0..2).map(|c| pi[(i, c)] * theta[(j, c)]).sum::<f64>();
            }
            expect /= n as f64;
            let emp = flat.values.column(j).sum() / n as f64;
            let se = (0.25 / n as f64).sqrt();
            assert!((emp - expect).abs() < 3.0 * se, "col {j}: {emp} vs {expect}");
        }
    }

    #[test]
    fn copula_m1_equals_independent_stream() {
        let pi = DMatrix::from_element(50, 1, 1.0);
        let theta = DMatrix::from_fn(8, 1, |j, _| 0.1 + 0.1 * j as f64);
        let a = gen_block_dependent_binary(&pi, &theta, 1, 0.7, &mut stream_rng(15, 0)).unwrap();
        let b = gen_independent_binary(&pi, &theta, &mut stream_rng(15, 0)).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn copula_rejects_bad_inputs() {
        let pi = DMatrix::from_element(2, 1, 1.0);
        let theta = DMatrix::from_element(3, 1, 0.5);
        let mut rng = stream_rng(16, 0);
        assert!(gen_block_dependent_binary(&pi, &theta, 2, 0.5, &mut rng).is_err());
        let theta_bad = DMatrix::from_element(2, 1, 1.5);
        assert!(gen_block_dependent_binary(&pi, &theta_bad, 1, 0.5, &mut rng).is_err());
    }

    #[test]
    fn poisson_moments() {
        let mut rng = stream_rng(17, 0);
        let n = 100_000;
        let pi = DMatrix::from_element(n, 1, 1.0);
        let theta = DMatrix::from_element(1, 1, 3.0);
        let flat = gen_poisson(&pi, &theta, &mut rng).unwrap();
        let mean = flat.values.column(0).sum() / n as f64;
        let var: f64 = flat.values.column(0).iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - 3.0).abs() < 0.05, "mean = {mean}");
        assert!((var - 3.0).abs() < 0.1, "var = {var}");
    }

    #[test]
    fn poisson_zero_rate() {
        let mut rng = stream_rng(18, 0);
        let pi = DMatrix::from_element(10, 1, 1.0);
        let theta = DMatrix::from_element(1, 1, 0.0);
        let flat = gen_poisson(&pi, &theta, &mut rng).unwrap();
        assert!(flat.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn item_params_by_family() {
        let mut rng = stream_rng(19, 0);
        let sc = study_i(200, 1, 0);
        let (theta, partition) = gen_item_params(&sc, &mut rng).unwrap();
        for l in 0..partition.n_blocks() {
            for kk in 0..3 {
                let s: f64 = partition.range(l).map(|j| theta[(j, kk)]).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }

        let sc = study_ii(200, 1, 0);
        let (theta, _) = gen_item_params(&sc, &mut rng).unwrap();
        assert!(theta.iter().all(|&v| (0.0..=1.0).contains(&v)));

        let sc = study_iii(200, 1, 0);
        let mut sum = 0.0;
        let draws = 100_000;
        let gamma = Gamma::new(1.0, 0.5).unwrap();
        for _ in 0..draws {
            sum += gamma.sample(&mut rng);
        }
        let mean = sum / draws as f64;
        assert!((mean - 0.5).abs() < 0.01, "gamma mean = {mean}");
        let (theta, _) = gen_item_params(&sc, &mut rng).unwrap();
        assert!(theta.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn replications_deterministic() {
        let sc = study_i(200, 5, 42);
        let cfg = FitConfig::default();
        let a = run_replications(&sc, &cfg).unwrap();
        let b = run_replications_serial(&sc, &cfg).unwrap();
        assert_eq!(a.len(), 5);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.replication, y.replication);
            assert!(x.error.is_none());
            for (rx, ry) in x.records.iter().zip(&y.records) {
                if rx.metric == "seconds" {
                    continue;
                }
                assert_eq!(rx.value, ry.value, "metric {}", rx.metric);
            }
        }
    }

    #[test]
    fn degenerate_scenario_records_failures() {
        let mut sc = study_i(200, 3, 0);
        sc.n = 2;
        sc.num_items = 1;
        // N < K makes every replication fail the membership precondition
        let out = run_replications(&sc, &FitConfig::default()).unwrap();
        assert!(out.iter().all(|o| o.error.is_some()));
    }

    #[test]
    fn scenario_conflict_rejected() {
        let mut sc = study_i(200, 1, 0);
        sc.dependence = Some(Dependence { block_size: 2, rho: 0.5 });
        assert!(sc.validate().is_err());
    }
}
