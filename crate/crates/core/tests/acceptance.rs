//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//!     cargo test --release --test acceptance

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, Uniform};

use brsep::data::{Dataset, Estimator, Family, FitOptions, ParamVector, INTERCEPT};
use brsep::kernel::normal_eval;
use brsep::poisson::{poisson_fit, poisson_loglik, poisson_score};
use brsep::separation::{
    classify_infinite, detect_separation, fit_ml, fit_omission_strategy, Omission, INFINITE_SE_THRESHOLD,
};
use brsep::simulation::{generate_dataset, run_study, DgpConfig, StudyConfig};
use brsep::tobit::{
    tobit_expected_info, tobit_fit, tobit_loglik, tobit_observed_info, tobit_pq_blocks, tobit_score,
    truncated_moments_at,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| if j == 0 { INTERCEPT.to_string() } else { format!("x{}", j + 1) }).collect()
}

fn design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    let z = Normal::new(0.0, 1.0).unwrap();
    DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { z.sample(rng) })
}

fn poisson_data(rng: &mut ChaCha8Rng, n: usize, beta: &DVector<f64>) -> Dataset {
    let x = design(rng, n, beta.len());
    let eta = &x * beta;
    let y = eta.map(|e| Poisson::new(e.exp()).unwrap().sample(rng));
    Dataset::new(x, y, Family::Poisson, names(beta.len())).unwrap()
}

fn tobit_data(rng: &mut ChaCha8Rng, x: DMatrix<f64>, beta: &DVector<f64>, phi: f64) -> Dataset {
    let z = Normal::new(0.0, 1.0).unwrap();
    let eta = &x * beta;
    let y = eta.map(|e| (e + phi.sqrt() * z.sample(rng)).max(0.0));
    let p = beta.len();
    Dataset::new(x, y, Family::Tobit, names(p)).unwrap()
}

fn uniform_vec(rng: &mut ChaCha8Rng, p: usize, lo: f64, hi: f64) -> DVector<f64> {
    let u = Uniform::new(lo, hi).unwrap();
    DVector::from_fn(p, |_, _| u.sample(rng))
}

fn step(v: f64) -> f64 {
    1e-5 * v.abs().max(1.0)
}

/// Central-difference gradient of `f` at `theta`.
fn fd_gradient(theta: &DVector<f64>, f: impl Fn(&DVector<f64>) -> f64) -> DVector<f64> {
    DVector::from_fn(theta.len(), |j, _| {
        let h = step(theta[j]);
        let mut a = theta.clone();
        let mut b = theta.clone();
        a[j] += h;
        b[j] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

fn scaled_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / a.amax().max(1.0)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_p: f64 = 0.0;
    let mut worst_t: f64 = 0.0;
    for _ in 0..100 {
        let beta = uniform_vec(&mut rng, 3, -0.8, 0.8);
        let data = poisson_data(&mut rng, 30, &beta);
        let at = &beta + uniform_vec(&mut rng, 3, -0.3, 0.3);
        let s = poisson_score(&data, &at).unwrap();
        let fd = fd_gradient(&at, |b| poisson_loglik(&data, b).unwrap());
        worst_p = worst_p.max(scaled_error(&s, &fd));
    }
    for _ in 0..100 {
        let beta = uniform_vec(&mut rng, 3, -1.0, 1.0);
        let phi = rng.random_range(0.5..3.0);
        let x = design(&mut rng, 30, 3);
        let data = tobit_data(&mut rng, x, &beta, phi);
        let mut theta = ParamVector::tobit(&beta + uniform_vec(&mut rng, 3, -0.3, 0.3), phi * rng.random_range(0.7..1.4))
            .to_vector();
        theta[3] = theta[3].max(0.2);
        let s = tobit_score(&data, &ParamVector::from_vector(&theta, true)).unwrap();
        let fd = fd_gradient(&theta, |t| tobit_loglik(&data, &ParamVector::from_vector(t, true)).unwrap());
        worst_t = worst_t.max(scaled_error(&s, &fd));
    }
    Outcome {
        pass: worst_p < 1e-6 && worst_t < 1e-6,
        detail: format!(
            "score vs central differences, 100 points each: max scaled error Poisson {worst_p:.1e}, Tobit {worst_t:.1e} (limit 1e-6)"
        ),
    }
}

struct Moments {
    sum: Vec<f64>,
    sq: Vec<f64>,
    n: usize,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self { sum: vec![0.0; k], sq: vec![0.0; k], n: 0 }
    }

    fn push(&mut self, v: &[f64]) {
        for (k, &x) in v.iter().enumerate() {
            self.sum[k] += x;
            self.sq[k] += x * x;
        }
        self.n += 1;
    }

    fn mean(&self, k: usize) -> f64 {
        self.sum[k] / self.n as f64
    }

    fn se(&self, k: usize) -> f64 {
        let n = self.n as f64;
        let m = self.mean(k);
        ((self.sq[k] / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt()
    }
}

fn criterion_2() -> Outcome {
    // observed information against the finite-difference Hessian
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_h: f64 = 0.0;
    for _ in 0..50 {
        let beta = uniform_vec(&mut rng, 3, -1.0, 1.0);
        let phi = rng.random_range(0.5..3.0);
        let x = design(&mut rng, 25, 3);
        let data = tobit_data(&mut rng, x, &beta, phi);
        let theta = ParamVector::tobit(&beta + uniform_vec(&mut rng, 3, -0.3, 0.3), phi).to_vector();
        let j = tobit_observed_info(&data, &ParamVector::from_vector(&theta, true)).unwrap().assemble();
        let d = theta.len();
        let mut hess = DMatrix::zeros(d, d);
        for c in 0..d {
            let h = step(theta[c]);
            let mut a = theta.clone();
            let mut b = theta.clone();
            a[c] += h;
            b[c] -= h;
            let sa = tobit_score(&data, &ParamVector::from_vector(&a, true)).unwrap();
            let sb = tobit_score(&data, &ParamVector::from_vector(&b, true)).unwrap();
            hess.set_column(c, &((sa - sb) / (2.0 * h)));
        }
        let err = (&j + &hess).amax() / j.amax().max(1.0);
        worst_h = worst_h.max(err);
    }

    // expected information and P_t, Q_t against simulated responses
    let x = DMatrix::from_row_slice(
        8,
        2,
        &[1.0, -1.5, 1.0, -1.0, 1.0, -0.5, 1.0, 0.0, 1.0, 0.3, 1.0, 0.8, 1.0, 1.2, 1.0, 2.0],
    );
    let beta = DVector::from_vec(vec![0.3, 0.8]);
    let phi = 1.5;
    let theta = ParamVector::tobit(beta.clone(), phi);
    let template = tobit_data(&mut rng, x.clone(), &beta, phi);
    let info = tobit_expected_info(&template, &theta).unwrap().assemble();
    let pq = tobit_pq_blocks(&template, &theta).unwrap();
    let d = 3;
    let mut acc = Moments::new(d * d * (1 + 2 * d));
    let draws = 200_000;
    let mut buf = vec![0.0; d * d * (1 + 2 * d)];
    for _ in 0..draws {
        let data = tobit_data(&mut rng, x.clone(), &beta, phi);
        let s = tobit_score(&data, &theta).unwrap();
        let j = tobit_observed_info(&data, &theta).unwrap().assemble();
        let ss = &s * s.transpose();
        for r in 0..d {
            for c in 0..d {
                buf[r * d + c] = j[(r, c)];
                for t in 0..d {
                    buf[d * d * (1 + t) + r * d + c] = ss[(r, c)] * s[t];
                    buf[d * d * (1 + d + t) + r * d + c] = -j[(r, c)] * s[t];
                }
            }
        }
        acc.push(&buf);
    }
    let mut checked = 0;
    let mut outside = Vec::new();
    let mut worst_z: f64 = 0.0;
    for block in 0..(1 + 2 * d) {
        let exact = match block {
            0 => info.clone(),
            b if b <= d => pq.p[b - 1].assemble(),
            b => pq.q[b - 1 - d].assemble(),
        };
        for r in 0..d {
            for c in r..d {
                let k = block * d * d + r * d + c;
                let z = (acc.mean(k) - exact[(r, c)]).abs() / acc.se(k).max(1e-12);
                worst_z = worst_z.max(z);
                checked += 1;
                if z > 3.0 {
                    let label = match block {
                        0 => "i".to_string(),
                        b if b <= d => format!("P_{b}"),
                        b => format!("Q_{}", b - d),
                    };
                    outside.push(format!("{label}[{r},{c}] at {z:.2} SE"));
                }
            }
        }
    }
    Outcome {
        pass: worst_h < 1e-5 && outside.is_empty(),
        detail: format!(
            "observed information vs FD Hessian, 50 points: max scaled error {worst_h:.1e} (limit 1e-5); \
             i, P_t, Q_t vs {draws} simulated responses: {checked} entries, largest deviation {worst_z:.2} MC SE (limit 3){}",
            if outside.is_empty() { String::new() } else { format!("; outside: {}", outside.join(", ")) }
        ),
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let z = Normal::new(0.0, 1.0).unwrap();
    let draws = 1_000_000;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let phi: f64 = rng.random_range(0.3..4.0);
        let eta = rng.random_range(-1.5..2.0) * phi.sqrt();
        let exact = truncated_moments_at(eta, phi, normal_eval(eta / phi.sqrt()).unwrap().xi);
        let mut acc = Moments::new(6);
        let mut pw = [0.0; 6];
        while acc.n < draws {
            let y = eta + phi.sqrt() * z.sample(&mut rng);
            if y <= 0.0 {
                continue;
            }
            let r = y - eta;
            let mut v = 1.0;
            for p in pw.iter_mut() {
                v *= r;
                *p = v;
            }
            acc.push(&pw);
        }
        for (l, &e) in exact.iter().enumerate() {
            worst = worst.max((acc.mean(l) - e).abs() / acc.se(l));
        }
    }
    let mut half_normal: f64 = 0.0;
    for phi in [0.25, 1.0, 2.0, 7.5] {
        let m = truncated_moments_at(0.0, phi, normal_eval(0.0).unwrap().xi);
        let want = [phi, 3.0 * phi * phi, 15.0 * phi * phi * phi];
        for (got, w) in [m[1], m[3], m[5]].iter().zip(want) {
            half_normal = half_normal.max((got - w).abs() / w);
        }
    }
    Outcome {
        pass: worst <= 4.0 && half_normal <= 1e-10,
        detail: format!(
            "six moments vs {draws} accepted draws at 20 points: largest deviation {worst:.2} MC SE (limit 4); \
             even moments at eta = 0 off by {half_normal:.1e} relative (limit 1e-10)"
        ),
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for k in 0..100 {
        let n = rng.random_range(1..60);
        let mu = if k % 10 == 0 { 0.0 } else { rng.random_range(0.05..8.0) };
        let y = DVector::from_fn(n, |_, _| if mu == 0.0 { 0.0 } else { Poisson::new(mu).unwrap().sample(&mut rng) });
        let data = Dataset::new(DMatrix::from_element(n, 1, 1.0), y.clone(), Family::Poisson, names(1)).unwrap();
        match poisson_fit(&data, Estimator::Br, &FitOptions::default()) {
            Ok(fit) if fit.converged => {
                let want = (y.mean() + 0.5 / n as f64).ln();
                worst = worst.max((fit.params.beta[0] - want).abs());
            }
            _ => failures += 1,
        }
    }
    Outcome {
        pass: worst < 1e-8 && failures == 0,
        detail: format!(
            "intercept-only BR vs log(ybar + 1/(2n)), 100 count vectors: max abs error {worst:.1e} (limit 1e-8), {failures} fit failures"
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 20 {
        let beta = DVector::from_vec(vec![rng.random_range(6.0..9.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        let phi = rng.random_range(0.3..2.0);
        let n = rng.random_range(10..80);
        let x = design(&mut rng, n, 3);
        let data = tobit_data(&mut rng, x.clone(), &beta, phi);
        if data.y().iter().any(|&v| v <= 0.0) {
            continue;
        }
        done += 1;
        let xtx = x.transpose() * &x;
        let ols = xtx.cholesky().unwrap().solve(&(x.transpose() * data.y()));
        let rss = (data.y() - &x * &ols).norm_squared();
        let fit = tobit_fit(&data, Estimator::Ml, &FitOptions::default()).unwrap();
        worst = worst.max((&fit.params.beta - &ols).amax()).max((fit.params.phi.unwrap() - rss / n as f64).abs());
    }
    Outcome {
        pass: worst < 1e-6,
        detail: format!("uncensored Tobit ML vs OLS and RSS/n, 20 datasets: max abs difference {worst:.1e} (limit 1e-6)"),
    }
}

fn criterion_6() -> Outcome {
    let opts = FitOptions::default();
    let mut separated = 0;
    let mut problems = Vec::new();
    let mut min_gap = f64::INFINITY;
    for family in [Family::Poisson, Family::Tobit] {
        for seed in 1..=20 {
            let data = generate_dataset(&DgpConfig::illustration(family, seed)).unwrap();
            let report = detect_separation(&data).unwrap();
            if !report.separated {
                continue;
            }
            separated += 1;
            let tag = format!("{family} seed {seed}");
            let ml = fit_ml(&data, Estimator::Ml, &opts).unwrap();
            let br = fit_ml(&data, Estimator::Br, &opts).unwrap();
            let sub = fit_omission_strategy(&data, &report, Omission::MlSub, &opts).unwrap();
            let sst = fit_omission_strategy(&data, &report, Omission::MlSst, &opts).unwrap();
            if !classify_infinite(&ml, INFINITE_SE_THRESHOLD)[2] {
                problems.push(format!("{tag}: ML SE(b3) = {}", ml.std_errors[2]));
            }
            let (b3, se3) = (br.params.beta[2], br.std_errors[2]);
            if !(b3.is_finite() && se3 < INFINITE_SE_THRESHOLD && br.converged) {
                problems.push(format!("{tag}: BR b3 = {b3}, SE {se3}"));
            }
            for name in &sub.coef_names {
                let a = ml.coefficient(name).unwrap().0;
                let b = sub.coefficient(name).unwrap().0;
                if (a - b).abs() > 1e-3 {
                    problems.push(format!("{tag}: ML/sub {name} {b} vs ML {a}"));
                }
            }
            if let (Some(a), Some(b)) = (ml.params.phi, sub.params.phi) {
                if (a - b).abs() > 1e-3 {
                    problems.push(format!("{tag}: ML/sub variance {b} vs ML {a}"));
                }
            }
            if (ml.loglik - sub.loglik).abs() > 1e-4 {
                problems.push(format!("{tag}: loglik ML {} vs ML/sub {}", ml.loglik, sub.loglik));
            }
            let gap = ml.loglik - sst.loglik;
            min_gap = min_gap.min(gap);
            if gap < 10.0 {
                problems.push(format!("{tag}: ML/SST loglik only {gap:.2} below ML"));
            }
        }
    }
    Outcome {
        pass: problems.is_empty() && separated > 0,
        detail: format!(
            "illustration, 20 seeds x 2 families: {separated} separated samples checked, smallest ML - ML/SST loglik gap {min_gap:.1}{}",
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for family in [Family::Poisson, Family::Tobit] {
        let cfg = StudyConfig {
            grid_n: vec![25, 100, 400],
            grid_pi: vec![0.0, 0.25, 0.5],
            reps: 1000,
            threads: 4,
            ..StudyConfig::full(family, 7)
        };
        let out = run_study(&cfg).unwrap();
        let cell = |n: usize, pi: f64| out.metrics.iter().find(|m| m.n == n && m.pi == pi).unwrap();
        let failed: usize = out.metrics.iter().map(|m| m.n_failed_ml + m.n_failed_br).sum();
        let (mut cov_lo, mut cov_hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for m in &out.metrics {
            if m.p_infinite_br != 0.0 {
                problems.push(format!("{family} n={} pi={}: BR infinite rate {}", m.n, m.pi, m.p_infinite_br));
            }
            if m.n >= 100 {
                cov_lo = cov_lo.min(m.coverage_br_uncond);
                cov_hi = cov_hi.max(m.coverage_br_uncond);
                if !(0.92..=0.975).contains(&m.coverage_br_uncond) {
                    problems.push(format!("{family} n={} pi={}: BR coverage {}", m.n, m.pi, m.coverage_br_uncond));
                }
            }
        }
        let drop = cell(25, 0.0).p_infinite_ml - cell(400, 0.5).p_infinite_ml;
        if drop < 0.10 {
            problems.push(format!("{family}: ML infinite rate falls by only {drop:.3}"));
        }
        for pi in [0.0, 0.25, 0.5] {
            let ratio = |m: &brsep::simulation::StudyMetrics| (m.var_br_cond / m.var_ml_cond - 1.0).abs();
            let (small, large) = (ratio(cell(25, pi)), ratio(cell(400, pi)));
            if !(large < small) {
                problems.push(format!("{family} pi={pi}: |var ratio - 1| {large:.3} at n=400 vs {small:.3} at n=25"));
            }
        }
        summary.push(format!(
            "{family}: BR coverage (n >= 100) in [{cov_lo:.3}, {cov_hi:.3}], ML infinite rate drop {drop:.3}, {failed} failed fits"
        ));
    }
    Outcome {
        pass: problems.is_empty(),
        detail: format!(
            "simulation, 1000 reps, 3x3 grid: {}{}",
            summary.join("; "),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    }
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |family: &str, threads: u32, tag: &str| -> Vec<u8> {
        let path = dir.path().join(format!("{family}-{threads}-{tag}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_brsep"))
            .args(["simulate", "--family", family, "--reps", "150", "--grid-n", "25,100", "--grid-pi", "0,0.25"])
            .args(["--seed", "99", "--threads", &threads.to_string(), "--quiet", "--output"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let mut problems = Vec::new();
    for family in ["poisson", "tobit"] {
        let one = run(family, 1, "a");
        let four = run(family, 4, "a");
        let again = run(family, 4, "b");
        if one != four || four != again {
            problems.push(family);
        }
    }
    Outcome {
        pass: problems.is_empty(),
        detail: format!(
            "simulate metrics CSV byte-identical across threads 1, 4 and repeated runs: {}",
            if problems.is_empty() { "both families".to_string() } else { format!("differs for {}", problems.join(", ")) }
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 8] = [
        ("1 gradient correctness", criterion_1, Some(Duration::from_secs(10))),
        ("2 curvature correctness", criterion_2, Some(Duration::from_secs(300))),
        ("3 truncated moments", criterion_3, None),
        ("4 closed-form BR intercept", criterion_4, None),
        ("5 uncensored Tobit equals OLS", criterion_5, None),
        ("6 illustration pattern", criterion_6, Some(Duration::from_secs(60))),
        ("7 scaled simulation", criterion_7, Some(Duration::from_secs(900))),
        ("8 determinism", criterion_8, None),
    ];
    let mut all = true;
    for (name, f, budget) in criteria {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let in_time = budget.is_none_or(|b| took <= b);
        let pass = out.pass && in_time;
        all &= pass;
        println!(
            "{} [{name}] {} ({:.1}s{})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            match budget {
                Some(b) if !in_time => format!(", over the {}s budget", b.as_secs()),
                _ => String::new(),
            }
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
