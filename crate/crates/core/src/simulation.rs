//! Data-generating process with a correlated binary regressor and the Monte
//! Carlo engine summarising ML and BR estimates of its coefficient.
//!
//! Design: `x₂ ~ U(-1, 1)`, `x₃ ~ Bernoulli(π)` when `x₂ > 0` and
//! `Bernoulli(1 - π)` otherwise. Small `π` ties `x₃` to the sign of `x₂`; at
//! `π = 1/2` the two are independent.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, Poisson, Uniform};
use rayon::prelude::*;

use crate::data::{Dataset, Estimator, Family, FitOptions, FitResult, INTERCEPT};
use crate::error::{Error, Result};
use crate::inference::wald_interval;
use crate::separation::{fit_ml, INFINITE_SE_THRESHOLD};

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub n: usize,
    pub pi: f64,
    pub beta: [f64; 3],
    /// Latent variance, Tobit only.
    pub phi: f64,
    pub family: Family,
    pub seed: u64,
}

impl DgpConfig {
    /// The single-dataset illustration: `n = 100`, `π = 1/4`, `β = (1, 1, -10)`, `φ = 2`.
    pub fn illustration(family: Family, seed: u64) -> Self {
        Self { n: 100, pi: 0.25, beta: [1.0, 1.0, -10.0], phi: 2.0, family, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::Domain(format!("sample size must be at least 4, got {}", self.n)));
        }
        if !(0.0..=0.5).contains(&self.pi) {
            return Err(Error::Domain(format!("pi must lie in [0, 1/2], got {}", self.pi)));
        }
        if self.family == Family::Tobit && !(self.phi > 0.0) {
            return Err(Error::Domain(format!("variance must be positive, got {}", self.phi)));
        }
        Ok(())
    }
}

pub fn generate_dataset(config: &DgpConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    generate_with(config, &mut rng)
}

/// Draws one dataset from `rng`; the seed in `config` is ignored.
pub fn generate_with<R: Rng>(config: &DgpConfig, rng: &mut R) -> Result<Dataset> {
    config.validate()?;
    let n = config.n;
    let unif = Uniform::new(-1.0, 1.0).expect("valid bounds");
    let same = Bernoulli::new(config.pi).map_err(|e| Error::Domain(e.to_string()))?;
    let flip = Bernoulli::new(1.0 - config.pi).map_err(|e| Error::Domain(e.to_string()))?;
    let [b1, b2, b3] = config.beta;
    let sd = config.phi.sqrt();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");

    let mut x = DMatrix::<f64>::zeros(n, 3);
    let mut y = DVector::<f64>::zeros(n);
    for i in 0..n {
        let x2: f64 = unif.sample(rng);
        let x3 = if x2 > 0.0 { same.sample(rng) } else { flip.sample(rng) };
        let x3 = if x3 { 1.0 } else { 0.0 };
        x[(i, 0)] = 1.0;
        x[(i, 1)] = x2;
        x[(i, 2)] = x3;
        let eta = b1 + b2 * x2 + b3 * x3;
        y[i] = match config.family {
            Family::Poisson => {
                let mu = eta.exp();
                Poisson::new(mu).map_err(|e| Error::Domain(format!("Poisson mean {mu}: {e}")))?.sample(rng)
            }
            Family::Tobit => (eta + sd * noise.sample(rng)).max(0.0),
        };
    }
    Dataset::new(x, y, config.family, vec![INTERCEPT.into(), "x2".into(), "x3".into()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub grid_n: Vec<usize>,
    pub grid_pi: Vec<f64>,
    pub reps: usize,
    pub family: Family,
    pub beta: [f64; 3],
    pub phi: f64,
    pub seed: u64,
    pub threads: usize,
    pub level: f64,
    pub threshold: f64,
    pub fit: FitOptions,
}

impl StudyConfig {
    /// The full grid: `n ∈ {25, 50, 100, 200, 400}`, `π ∈ {0, 1/8, 1/4, 3/8, 1/2}`,
    /// 10,000 replicates, `β = (1, 1, -3)`, `φ = 2`.
    pub fn full(family: Family, seed: u64) -> Self {
        Self {
            grid_n: vec![25, 50, 100, 200, 400],
            grid_pi: vec![0.0, 0.125, 0.25, 0.375, 0.5],
            reps: 10_000,
            family,
            beta: [1.0, 1.0, -3.0],
            phi: 2.0,
            seed,
            threads: 1,
            level: 0.95,
            threshold: INFINITE_SE_THRESHOLD,
            fit: FitOptions::default(),
        }
    }
}

/// Outcome of one estimator on one replicate, for the coefficient of `x₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Estimate { value: f64, std_error: f64, converged: bool },
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateRecord {
    pub n: usize,
    pub pi: f64,
    pub rep: usize,
    pub ml: Outcome,
    pub br: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Finite,
    Infinite,
    Failed,
}

/// ML estimates that stopped on the iteration limit while walking out along an
/// asymptote still count as infinite when their standard error is above the
/// threshold. Anything else that did not converge is a failure.
fn status(o: &Outcome, threshold: f64) -> Status {
    match *o {
        Outcome::Failed => Status::Failed,
        Outcome::Estimate { std_error, converged, .. } => {
            if !(std_error <= threshold) {
                Status::Infinite
            } else if converged {
                Status::Finite
            } else {
                Status::Failed
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyMetrics {
    pub n: usize,
    pub pi: f64,
    pub reps: usize,
    pub p_infinite_ml: f64,
    pub p_infinite_br: f64,
    pub bias_ml_cond: f64,
    pub bias_br_cond: f64,
    pub bias_br_uncond: f64,
    pub var_ml_cond: f64,
    pub var_br_cond: f64,
    pub var_br_uncond: f64,
    pub coverage_ml_cond: f64,
    pub coverage_br_cond: f64,
    pub coverage_br_uncond: f64,
    pub n_reps_finite_ml: usize,
    pub n_failed_ml: usize,
    pub n_failed_br: usize,
    /// Monte Carlo standard error of `bias_br_uncond`.
    pub mcse_bias_br_uncond: f64,
    pub max_se_br: f64,
}

pub const METRICS_HEADER: [&str; 20] = [
    "n",
    "pi",
    "reps",
    "p_infinite_ml",
    "p_infinite_br",
    "bias_ml_cond",
    "bias_br_cond",
    "bias_br_uncond",
    "var_ml_cond",
    "var_br_cond",
    "var_br_uncond",
    "coverage_ml_cond",
    "coverage_br_cond",
    "coverage_br_uncond",
    "n_reps_finite_ml",
    "n_failed_ml",
    "n_failed_br",
    "mcse_bias_br_uncond",
    "max_se_br",
    "family",
];

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub family: Family,
    pub metrics: Vec<StudyMetrics>,
    pub records: Vec<ReplicateRecord>,
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for replicate `rep` of cell `(n, π)`, the same whatever
/// the grid composition or worker count.
pub fn replicate_rng(seed: u64, n: usize, pi: f64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = mix(mix(n as u64 ^ mix(pi.to_bits())) ^ rep as u64);
    rng.set_stream(stream);
    rng
}

fn outcome(fit: Result<FitResult>) -> Outcome {
    match fit {
        Ok(f) if f.params.beta.len() == 3 => Outcome::Estimate {
            value: f.params.beta[2],
            std_error: f.std_errors[2],
            converged: f.converged,
        },
        _ => Outcome::Failed,
    }
}

fn run_replicate(cfg: &StudyConfig, n: usize, pi: f64, rep: usize) -> ReplicateRecord {
    let dgp = DgpConfig { n, pi, beta: cfg.beta, phi: cfg.phi, family: cfg.family, seed: 0 };
    let mut rng = replicate_rng(cfg.seed, n, pi, rep);
    match generate_with(&dgp, &mut rng) {
        Ok(data) => ReplicateRecord {
            n,
            pi,
            rep,
            ml: outcome(fit_ml(&data, Estimator::Ml, &cfg.fit)),
            br: outcome(fit_ml(&data, Estimator::Br, &cfg.fit)),
        },
        Err(_) => ReplicateRecord { n, pi, rep, ml: Outcome::Failed, br: Outcome::Failed },
    }
}

struct Summary {
    bias: f64,
    var: f64,
    coverage: f64,
    mcse_bias: f64,
}

fn summarise(est: &[(f64, f64)], truth: f64, level: f64) -> Summary {
    let k = est.len();
    if k == 0 {
        return Summary { bias: f64::NAN, var: f64::NAN, coverage: f64::NAN, mcse_bias: f64::NAN };
    }
    let mean = est.iter().map(|e| e.0).sum::<f64>() / k as f64;
    let var = if k > 1 { est.iter().map(|e| (e.0 - mean).powi(2)).sum::<f64>() / (k - 1) as f64 } else { f64::NAN };
    let covered = est
        .iter()
        .filter(|&&(b, se)| wald_interval(b, se, level).is_ok_and(|(lo, hi)| lo <= truth && truth <= hi))
        .count();
    Summary { bias: mean - truth, var, coverage: covered as f64 / k as f64, mcse_bias: (var / k as f64).sqrt() }
}

fn cell_metrics(cfg: &StudyConfig, n: usize, pi: f64, recs: &[ReplicateRecord]) -> StudyMetrics {
    let truth = cfg.beta[2];
    let th = cfg.threshold;
    let pair = |o: &Outcome| match *o {
        Outcome::Estimate { value, std_error, .. } => (value, std_error),
        Outcome::Failed => unreachable!("failed outcomes are filtered out"),
    };
    let ml_status: Vec<Status> = recs.iter().map(|r| status(&r.ml, th)).collect();
    let br_status: Vec<Status> = recs
        .iter()
        .map(|r| match status(&r.br, th) {
            // BR has no asymptote to walk along, so non-convergence is a failure
            Status::Infinite if !matches!(r.br, Outcome::Estimate { converged: true, .. }) => Status::Failed,
            s => s,
        })
        .collect();

    let ml_valid = ml_status.iter().filter(|s| **s != Status::Failed).count();
    let ml_inf = ml_status.iter().filter(|s| **s == Status::Infinite).count();
    let br_valid = br_status.iter().filter(|s| **s != Status::Failed).count();
    let br_inf = br_status.iter().filter(|s| **s == Status::Infinite).count();

    let ml_cond: Vec<(f64, f64)> =
        recs.iter().zip(&ml_status).filter(|(_, s)| **s == Status::Finite).map(|(r, _)| pair(&r.ml)).collect();
    let br_cond: Vec<(f64, f64)> = recs
        .iter()
        .zip(ml_status.iter().zip(&br_status))
        .filter(|(_, (m, b))| **m == Status::Finite && **b != Status::Failed)
        .map(|(r, _)| pair(&r.br))
        .collect();
    let br_all: Vec<(f64, f64)> =
        recs.iter().zip(&br_status).filter(|(_, s)| **s != Status::Failed).map(|(r, _)| pair(&r.br)).collect();

    let ml_s = summarise(&ml_cond, truth, cfg.level);
    let brc = summarise(&br_cond, truth, cfg.level);
    let bru = summarise(&br_all, truth, cfg.level);
    let ratio = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
    StudyMetrics {
        n,
        pi,
        reps: recs.len(),
        p_infinite_ml: ratio(ml_inf, ml_valid),
        p_infinite_br: ratio(br_inf, br_valid),
        bias_ml_cond: ml_s.bias,
        bias_br_cond: brc.bias,
        bias_br_uncond: bru.bias,
        var_ml_cond: ml_s.var,
        var_br_cond: brc.var,
        var_br_uncond: bru.var,
        coverage_ml_cond: ml_s.coverage,
        coverage_br_cond: brc.coverage,
        coverage_br_uncond: bru.coverage,
        n_reps_finite_ml: ml_cond.len(),
        n_failed_ml: recs.len() - ml_valid,
        n_failed_br: recs.len() - br_valid,
        mcse_bias_br_uncond: bru.mcse_bias,
        max_se_br: br_all.iter().map(|e| e.1).fold(f64::NAN, f64::max),
    }
}

/// Runs every grid cell in turn, replicates in parallel on `threads` workers.
/// `progress` is called once per finished cell.
pub fn run_study_with_progress(
    cfg: &StudyConfig,
    mut progress: impl FnMut(&StudyMetrics),
) -> Result<StudyOutput> {
    if cfg.reps == 0 {
        return Err(Error::Domain("reps must be at least 1".into()));
    }
    for &n in &cfg.grid_n {
        for &pi in &cfg.grid_pi {
            DgpConfig { n, pi, beta: cfg.beta, phi: cfg.phi, family: cfg.family, seed: 0 }.validate()?;
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;

    let mut metrics = Vec::new();
    let mut records = Vec::new();
    for &n in &cfg.grid_n {
        for &pi in &cfg.grid_pi {
            let recs: Vec<ReplicateRecord> =
                pool.install(|| (0..cfg.reps).into_par_iter().map(|r| run_replicate(cfg, n, pi, r)).collect());
            let m = cell_metrics(cfg, n, pi, &recs);
            progress(&m);
            metrics.push(m);
            records.extend(recs);
        }
    }
    Ok(StudyOutput { family: cfg.family, metrics, records })
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutput> {
    run_study_with_progress(cfg, |_| {})
}

fn num(v: f64) -> String {
    format!("{v}")
}

impl StudyOutput {
    /// One row per grid cell.
    pub fn write_metrics_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(METRICS_HEADER)?;
        for m in &self.metrics {
            w.write_record([
                m.n.to_string(),
                num(m.pi),
                m.reps.to_string(),
                num(m.p_infinite_ml),
                num(m.p_infinite_br),
                num(m.bias_ml_cond),
                num(m.bias_br_cond),
                num(m.bias_br_uncond),
                num(m.var_ml_cond),
                num(m.var_br_cond),
                num(m.var_br_uncond),
                num(m.coverage_ml_cond),
                num(m.coverage_br_cond),
                num(m.coverage_br_uncond),
                m.n_reps_finite_ml.to_string(),
                m.n_failed_ml.to_string(),
                m.n_failed_br.to_string(),
                num(m.mcse_bias_br_uncond),
                num(m.max_se_br),
                self.family.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-replicate audit trail.
    pub fn write_records_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "n", "pi", "rep", "ml_estimate", "ml_se", "ml_converged", "br_estimate", "br_se", "br_converged",
        ])?;
        let cols = |o: &Outcome| match *o {
            Outcome::Estimate { value, std_error, converged } => [num(value), num(std_error), converged.to_string()],
            Outcome::Failed => ["".into(), "".into(), "failed".into()],
        };
        for r in &self.records {
            let mut row = vec![r.n.to_string(), num(r.pi), r.rep.to_string()];
            row.extend(cols(&r.ml));
            row.extend(cols(&r.br));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
