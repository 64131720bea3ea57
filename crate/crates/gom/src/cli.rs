//! Command implementations and file formats: scenario-driven simulation,
//! fitting, evaluation, benchmarking, and the Gibbs baseline. Numeric CSV
//! uses 17 significant digits so doubles round-trip exactly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::data::{flatten, halve_binomial, BlockPartition, Family, FlatMatrix, QuasiTensor};
use crate::error::{GomError, Result};
use crate::estimator::{fit, FitConfig, GomEstimate};
use crate::gibbs::{gibbs_fit, GibbsConfig};
use crate::metrics::{aligned_errors, scaled_frobenius};
use crate::simulate::{generate, run_replications, ScenarioFamily, SimScenario};

/// Reproducibility record written next to every output set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub input_digests: BTreeMap<String, String>,
    pub timings_seconds: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_digests: BTreeMap::new(),
            timings_seconds: BTreeMap::new(),
        }
    }

    fn digest_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        self.input_digests.insert(path.display().to_string(), digest);
        Ok(())
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, body).map_err(|e| io_err(&path, e))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> GomError {
    GomError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes a matrix as plain numeric CSV, 17 significant digits.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{:.16e}", m[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads a plain numeric CSV into a matrix; a leading non-numeric header row
/// is skipped.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if row.len() != first.len() {
                        return Err(GomError::Parse {
                            path: path.display().to_string(),
                            line: lineno + 1,
                            message: format!(
                                "row has {} fields, expected {}",
                                row.len(),
                                first.len()
                            ),
                        });
                    }
                }
                rows.push(row);
            }
            Err(e) => {
                if lineno == 0 {
                    continue; // header row
                }
                return Err(GomError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: e.to_string(),
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(GomError::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "no numeric rows".into(),
        });
    }
    let (n, j) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, j, |i, c| rows[i][c]))
}

/// Reads the category-count sidecar: one line of comma-separated integers.
pub fn read_categories(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| GomError::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "empty categories file".into(),
        })?;
    line.split(',')
        .map(|f| {
            f.trim().parse::<usize>().map_err(|e| GomError::Parse {
                path: path.display().to_string(),
                line: 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_categories(path: &Path, counts: &[usize]) -> Result<()> {
    let line: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
    fs::write(path, line.join(",") + "\n").map_err(|e| io_err(path, e))
}

fn quasi_to_matrix(q: &QuasiTensor) -> DMatrix<f64> {
    DMatrix::from_fn(q.n_subjects(), q.n_items(), |i, l| q.response(i, l) as f64)
}

fn matrix_to_quasi(m: &DMatrix<f64>, counts: &[usize]) -> Result<QuasiTensor> {
    let responses: Vec<usize> = m
        .row_iter()
        .flat_map(|row| row.iter().map(|&v| v as usize).collect::<Vec<_>>())
        .collect();
    QuasiTensor::new(responses, m.nrows(), counts.to_vec())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn load_scenario(path: &Path) -> Result<SimScenario> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let scenario: SimScenario = serde_json::from_str(&text).map_err(|e| {
        GomError::Config(format!("{}:{}: {e}", path.display(), e.line()))
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// `simulate`: writes, for each replication, the data files and ground truth
/// under `out_dir/repNNN/`, plus a run manifest.
pub fn cmd_simulate(scenario_path: &Path, out_dir: &Path) -> Result<()> {
    let start = Instant::now();
    let scenario = load_scenario(scenario_path)?;
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::new(
        "simulate",
        serde_json::to_value(&scenario).unwrap(),
        scenario.seed,
    );
    manifest.digest_input(scenario_path)?;

    for rep in 0..scenario.replications {
        let rep_dir = out_dir.join(format!("rep{rep:03}"));
        ensure_dir(&rep_dir)?;
        let gen = generate(&scenario, rep)?;
        match &gen.quasi {
            Some(q) => {
                write_matrix_csv(&rep_dir.join("data.csv"), &quasi_to_matrix(q))?;
                write_categories(&rep_dir.join("categories.txt"), q.category_counts())?;
            }
            None => write_matrix_csv(&rep_dir.join("data.csv"), &gen.flat.values)?,
        }
        write_matrix_csv(&rep_dir.join("pi_true.csv"), &gen.truth.memberships)?;
        write_matrix_csv(&rep_dir.join("theta_true.csv"), &gen.truth.item_params)?;
    }
    manifest
        .timings_seconds
        .insert("total".into(), start.elapsed().as_secs_f64());
    manifest.write(out_dir)
}

/// CLI-facing data family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CliFamily {
    Polytomous,
    Bernoulli,
    Binomial,
    Poisson,
}

pub struct FitArgs {
    pub data: PathBuf,
    pub categories: Option<PathBuf>,
    pub k: usize,
    pub family: CliFamily,
    pub fit_cfg: FitConfig,
    pub out_dir: PathBuf,
}

fn load_flat(data: &Path, categories: Option<&Path>, family: CliFamily) -> Result<FlatMatrix> {
    let raw = read_matrix_csv(data)?;
    match family {
        CliFamily::Polytomous => {
            let cats_path = categories.ok_or_else(|| {
                GomError::Config("polytomous data needs a categories sidecar file".into())
            })?;
            let counts = read_categories(cats_path)?;
            let quasi = matrix_to_quasi(&raw, &counts)?;
            Ok(flatten(&quasi))
        }
        CliFamily::Bernoulli => FlatMatrix::new(
            raw.clone(),
            BlockPartition::singletons(raw.ncols()),
            Family::BernoulliGeneral,
        ),
        // raw counts in {0,1,2} are halved on ingestion
        CliFamily::Binomial => halve_binomial(&raw),
        CliFamily::Poisson => FlatMatrix::new(
            raw.clone(),
            BlockPartition::singletons(raw.ncols()),
            Family::Poisson,
        ),
    }
}

fn write_estimate(dir: &Path, est: &GomEstimate) -> Result<()> {
    ensure_dir(dir)?;
    let vertices: Vec<String> = est.vertices.indices.iter().map(|i| i.to_string()).collect();
    fs::write(dir.join("vertices.csv"), vertices.join(",") + "\n")
        .map_err(|e| io_err(&dir.join("vertices.csv"), e))?;
    write_matrix_csv(&dir.join("pi_post.csv"), &est.memberships)?;
    write_matrix_csv(&dir.join("theta_post.csv"), &est.item_params)?;
    write_matrix_csv(&dir.join("pi_raw.csv"), &est.memberships_raw)?;
    write_matrix_csv(&dir.join("theta_raw.csv"), &est.item_params_raw)?;
    write_matrix_csv(&dir.join("u.csv"), &est.factors.u)?;
    write_matrix_csv(
        &dir.join("singular_values.csv"),
        &DMatrix::from_column_slice(est.factors.rank(), 1, est.factors.singular_values.as_slice()),
    )?;
    write_matrix_csv(&dir.join("v.csv"), &est.factors.v)?;
    let diag = serde_json::json!({
        "family": family_tag(est.family),
        "n": est.memberships.nrows(),
        "j": est.item_params.nrows(),
        "k": est.memberships.ncols(),
        "diagnostics": est.diagnostics,
    });
    fs::write(
        dir.join("diagnostics.json"),
        serde_json::to_string_pretty(&diag).unwrap(),
    )
    .map_err(|e| io_err(&dir.join("diagnostics.json"), e))
}

fn family_tag(f: Family) -> &'static str {
    match f {
        Family::BernoulliOnehot => "bernoulli-onehot",
        Family::BernoulliGeneral => "bernoulli-general",
        Family::BinomialHalved => "binomial-halved",
        Family::Poisson => "poisson",
    }
}

/// `fit`: runs the spectral pipeline on a data file and writes the estimate.
pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let start = Instant::now();
    if args.k == 0 {
        return Err(GomError::Config("--k must be at least 1".into()));
    }
    let flat = load_flat(&args.data, args.categories.as_deref(), args.family)?;
    let est = fit(&flat, args.k, &args.fit_cfg)?;
    write_estimate(&args.out_dir, &est)?;
    let mut manifest = RunManifest::new(
        "fit",
        serde_json::json!({
            "k": args.k,
            "family": format!("{:?}", args.family),
            "fit": args.fit_cfg,
        }),
        args.fit_cfg.seed,
    );
    manifest.digest_input(&args.data)?;
    if let Some(c) = &args.categories {
        manifest.digest_input(c)?;
    }
    manifest
        .timings_seconds
        .insert("fit".into(), est.diagnostics.seconds);
    manifest
        .timings_seconds
        .insert("total".into(), start.elapsed().as_secs_f64());
    manifest.write(&args.out_dir)
}

fn metrics_header() -> &'static str {
    "replication,family,n,j,k,metric_name,value\n"
}

fn metrics_row(rep: usize, family: &str, n: usize, j: usize, k: usize, name: &str, value: f64) -> String {
    format!("{rep},{family},{n},{j},{k},{name},{value:.16e}\n")
}

/// `eval`: compares an estimate directory against a truth directory and
/// writes a tidy long-format metrics CSV.
pub fn cmd_eval(estimate_dir: &Path, truth_dir: &Path, out_file: &Path) -> Result<()> {
    let pi_est = read_matrix_csv(&estimate_dir.join("pi_post.csv"))?;
    let theta_est = read_matrix_csv(&estimate_dir.join("theta_post.csv"))?;
    let pi_true = read_matrix_csv(&truth_dir.join("pi_true.csv"))?;
    let theta_true = read_matrix_csv(&truth_dir.join("theta_true.csv"))?;
    let family = fs::read_to_string(estimate_dir.join("diagnostics.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v["family"].as_str().map(String::from))
        .unwrap_or_else(|| "unknown".into());

    let err = aligned_errors(&pi_est, &pi_true, &theta_est, &theta_true)?;
    let rstar = &pi_true * theta_true.transpose();
    let frob = scaled_frobenius(&rstar, &pi_est, &theta_est);

    let (n, k) = (pi_est.nrows(), pi_est.ncols());
    let j = theta_est.nrows();
    let mut out = String::from(metrics_header());
    for (name, value) in [
        ("mae_pi", err.mae_pi),
        ("mae_theta", err.mae_theta),
        ("l2inf_pi", err.l2inf_pi),
        ("maxabs_theta", err.maxabs_theta),
        ("frob_scaled", frob),
    ] {
        out.push_str(&metrics_row(0, &family, n, j, k, name, value));
    }
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    fs::write(out_file, out).map_err(|e| io_err(out_file, e))
}

/// Benchmark suite description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSuite {
    pub scenarios: Vec<SimScenario>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    /// When set, the Gibbs baseline also runs on replication 0 of every
    /// polytomous scenario and the relative speedup is recorded.
    #[serde(default)]
    pub gibbs: Option<GibbsConfig>,
}

/// `bench`: runs every scenario of a suite and writes one consolidated
/// metrics CSV plus a JSON summary.
pub fn cmd_bench(suite_path: &Path, out_dir: &Path, jobs: Option<usize>) -> Result<()> {
    let start = Instant::now();
    let text = fs::read_to_string(suite_path).map_err(|e| io_err(suite_path, e))?;
    let suite: BenchSuite = serde_json::from_str(&text).map_err(|e| {
        GomError::Config(format!("{}:{}: {e}", suite_path.display(), e.line()))
    })?;
    ensure_dir(out_dir)?;
    let fit_cfg = suite.fit.clone().unwrap_or_default();

    #[cfg(feature = "parallel")]
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            builder = builder.num_threads(j);
        }
        Some(builder.build().map_err(|e| GomError::Config(e.to_string()))?)
    };
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;

    let mut csv = format!("scenario,{}", metrics_header());
    let mut summary = Vec::new();
    for (si, scenario) in suite.scenarios.iter().enumerate() {
        let run = || run_replications(scenario, &fit_cfg);
        #[cfg(feature = "parallel")]
        let outcomes = pool.as_ref().unwrap().install(run)?;
        #[cfg(not(feature = "parallel"))]
        let outcomes = run()?;

        let j_cols = match scenario.family {
            ScenarioFamily::Polytomous => scenario.num_items * scenario.categories.unwrap(),
            _ => scenario.num_items,
        };
        let mut spectral_seconds = 0.0;
        let mut failures = 0usize;
        for outcome in &outcomes {
            if let Some(err) = &outcome.error {
                failures += 1;
                csv.push_str(&format!(
                    "{si},{rep},{fam},{n},{j},{k},error,nan # {err}\n",
                    rep = outcome.replication,
                    fam = family_name(scenario.family),
                    n = scenario.n,
                    j = j_cols,
                    k = scenario.k,
                ));
                continue;
            }
            for record in &outcome.records {
                if record.metric == "seconds" {
                    spectral_seconds += record.value;
                }
                csv.push_str(&format!(
                    "{si},{}",
                    metrics_row(
                        outcome.replication,
                        family_name(scenario.family),
                        scenario.n,
                        j_cols,
                        scenario.k,
                        &record.metric,
                        record.value,
                    )
                ));
            }
        }
        let mut entry = serde_json::json!({
            "scenario": si,
            "replications": scenario.replications,
            "failures": failures,
            "spectral_seconds_total": spectral_seconds,
        });

        if let (Some(gibbs_cfg), ScenarioFamily::Polytomous) = (&suite.gibbs, scenario.family) {
            let gen = generate(scenario, 0)?;
            let quasi = gen.quasi.as_ref().expect("polytomous generation yields a quasi-tensor");
            let spectral_start = Instant::now();
            let est = fit(&gen.flat, scenario.k, &fit_cfg)?;
            let spectral_one = spectral_start.elapsed().as_secs_f64();
            let gibbs_start = Instant::now();
            let gibbs_est = gibbs_fit(quasi, scenario.k, gibbs_cfg)?;
            let gibbs_seconds = gibbs_start.elapsed().as_secs_f64();
            let gerr = aligned_errors(
                &gibbs_est.pi_mean,
                &gen.truth.memberships,
                &gibbs_est.theta_mean,
                &gen.truth.item_params,
            )?;
            let serr = aligned_errors(
                &est.memberships,
                &gen.truth.memberships,
                &est.item_params,
                &gen.truth.item_params,
            )?;
            let speedup = gibbs_seconds / spectral_one.max(1e-12);
            entry["gibbs"] = serde_json::json!({
                "seconds": gibbs_seconds,
                "spectral_seconds": spectral_one,
                "speedup": speedup,
                "mae_pi": gerr.mae_pi,
                "mae_theta": gerr.mae_theta,
                "spectral_mae_pi": serr.mae_pi,
                "spectral_mae_theta": serr.mae_theta,
            });
            for (name, value) in [
                ("gibbs_seconds", gibbs_seconds),
                ("gibbs_speedup", speedup),
                ("gibbs_mae_pi", gerr.mae_pi),
                ("gibbs_mae_theta", gerr.mae_theta),
            ] {
                csv.push_str(&format!(
                    "{si},{}",
                    metrics_row(0, family_name(scenario.family), scenario.n, j_cols, scenario.k, name, value)
                ));
            }
        }
        summary.push(entry);
    }

    fs::write(out_dir.join("metrics.csv"), &csv)
        .map_err(|e| io_err(&out_dir.join("metrics.csv"), e))?;
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).unwrap(),
    )
    .map_err(|e| io_err(&out_dir.join("summary.json"), e))?;

    let mut manifest = RunManifest::new("bench", serde_json::to_value(&suite).unwrap(), 0);
    manifest.digest_input(suite_path)?;
    manifest
        .timings_seconds
        .insert("total".into(), start.elapsed().as_secs_f64());
    manifest.write(out_dir)
}

fn family_name(f: ScenarioFamily) -> &'static str {
    match f {
        ScenarioFamily::Polytomous => "polytomous",
        ScenarioFamily::Bernoulli => "bernoulli",
        ScenarioFamily::Poisson => "poisson",
    }
}

pub struct GibbsArgs {
    pub data: PathBuf,
    pub categories: PathBuf,
    pub k: usize,
    pub cfg: GibbsConfig,
    pub out_dir: PathBuf,
}

/// `gibbs`: runs the baseline sampler on a polytomous data file.
pub fn cmd_gibbs(args: &GibbsArgs) -> Result<()> {
    let start = Instant::now();
    let raw = read_matrix_csv(&args.data)?;
    let counts = read_categories(&args.categories)?;
    let quasi = matrix_to_quasi(&raw, &counts)?;
    let est = gibbs_fit(&quasi, args.k, &args.cfg)?;
    ensure_dir(&args.out_dir)?;
    write_matrix_csv(&args.out_dir.join("pi_mean.csv"), &est.pi_mean)?;
    write_matrix_csv(&args.out_dir.join("theta_mean.csv"), &est.theta_mean)?;
    write_matrix_csv(
        &args.out_dir.join("loglik_trace.csv"),
        &DMatrix::from_column_slice(est.loglik_trace.len(), 1, &est.loglik_trace),
    )?;
    let mut manifest = RunManifest::new(
        "gibbs",
        serde_json::json!({ "k": args.k, "gibbs": args.cfg }),
        args.cfg.seed,
    );
    manifest.digest_input(&args.data)?;
    manifest.digest_input(&args.categories)?;
    manifest
        .timings_seconds
        .insert("total".into(), start.elapsed().as_secs_f64());
    manifest.write(&args.out_dir)
}
