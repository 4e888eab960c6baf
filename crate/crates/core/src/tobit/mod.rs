//! Left-censored (at zero) Tobit regression with θ = (β, φ), φ the latent
//! error variance.
//!
//! Observation `i` is uncensored (`d_i = 1`) iff `y_i > 0`. With
//! `z_i = η_i / √φ`, `f_i`, `F_i` the standard normal density and CDF at
//! `z_i`, and `λ_i = f_i / (1 - F_i)`:
//!
//! ```text
//! ℓ(θ) = Σ (1 - d_i) log(1 - F_i) - d_i log(2πφ)/2 - d_i (y_i - η_i)² / (2φ)
//! ```
//!
//! Everything here works on the scale of φ itself, not log φ; the
//! bias-reducing adjustment is derived for that parameterization.

mod adjustment;

pub use adjustment::{tobit_adjustment, tobit_pq_blocks, PqBlocks};

use nalgebra::{DMatrix, DVector};

use crate::data::{std_errors_of, Dataset, Estimator, Family, FitOptions, FitResult, ParamVector};
use crate::error::{Error, Result};
use crate::kernel::{log_sf, normal_eval, NormalEval, SpdFactor};
use crate::poisson::{least_squares, require_full_rank};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MAX_HALVINGS: usize = 50;
const START_PHI_FLOOR: f64 = 1e-4;

/// Linear predictors, censoring indicators and normal kernels at one θ.
#[derive(Debug, Clone)]
pub struct TobitPointEval {
    pub eta: DVector<f64>,
    /// `true` iff `y_i > 0`.
    pub d: Vec<bool>,
    pub normal: Vec<NormalEval>,
    pub phi: f64,
}

/// A symmetric `(p+1) x (p+1)` matrix stored by its β–β, β–φ and φ–φ blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoBlocks {
    pub bb: DMatrix<f64>,
    pub bphi: DVector<f64>,
    pub phiphi: f64,
}

impl InfoBlocks {
    pub fn zeros(p: usize) -> Self {
        Self { bb: DMatrix::zeros(p, p), bphi: DVector::zeros(p), phiphi: 0.0 }
    }

    pub fn p(&self) -> usize {
        self.bphi.len()
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut m = DMatrix::zeros(p + 1, p + 1);
        m.view_mut((0, 0), (p, p)).copy_from(&self.bb);
        for a in 0..p {
            m[(a, p)] = self.bphi[a];
            m[(p, a)] = self.bphi[a];
        }
        m[(p, p)] = self.phiphi;
        m
    }

    /// Adds `w_bb x xᵀ`, `w_bphi x` and `w_phiphi` for one observation row.
    fn accumulate(&mut self, x: &[f64], w_bb: f64, w_bphi: f64, w_phiphi: f64) {
        let p = x.len();
        for a in 0..p {
            let xa = x[a];
            for b in 0..=a {
                self.bb[(a, b)] += w_bb * xa * x[b];
            }
            self.bphi[a] += w_bphi * xa;
        }
        self.phiphi += w_phiphi;
    }

    fn mirror(&mut self) {
        self.bb.fill_upper_triangle_with_lower_triangle();
    }
}

/// Conditional moments `E((y_i - η_i)^l | y_i > 0)`, `l = 1..6`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMoments {
    pub m1: DVector<f64>,
    pub m2: DVector<f64>,
    pub m3: DVector<f64>,
    pub m4: DVector<f64>,
    pub m5: DVector<f64>,
    pub m6: DVector<f64>,
}

impl TruncatedMoments {
    pub fn order(&self, l: usize) -> &DVector<f64> {
        match l {
            1 => &self.m1,
            2 => &self.m2,
            3 => &self.m3,
            4 => &self.m4,
            5 => &self.m5,
            6 => &self.m6,
            _ => panic!("moment order {l} outside 1..=6"),
        }
    }
}

/// The six conditional moments for one observation, from `ξ = f/F`.
pub fn truncated_moments_at(eta: f64, phi: f64, xi: f64) -> [f64; 6] {
    let s = phi.sqrt();
    let e2 = eta * eta;
    [
        s * xi,
        phi - s * eta * xi,
        s * xi * (e2 + 2.0 * phi),
        3.0 * phi * phi - e2 * eta * s * xi - 3.0 * phi * s * eta * xi,
        s * e2 * e2 * xi + 4.0 * phi * s * xi * (e2 + 2.0 * phi),
        -eta * s * xi * (e2 * e2 + 5.0 * e2 * phi + 15.0 * phi * phi) + 15.0 * phi * phi * phi,
    ]
}

fn require_tobit(data: &Dataset) -> Result<()> {
    if data.family() != Family::Tobit {
        return Err(Error::Domain(format!("expected a Tobit dataset, got {}", data.family())));
    }
    Ok(())
}

fn split_theta(data: &Dataset, theta: &ParamVector) -> Result<f64> {
    require_tobit(data)?;
    if theta.beta.len() != data.p() {
        return Err(Error::Domain(format!("{} coefficients for {} regressors", theta.beta.len(), data.p())));
    }
    match theta.phi {
        Some(phi) if phi > 0.0 && phi.is_finite() => Ok(phi),
        Some(phi) => Err(Error::Domain(format!("variance must be positive, got {phi}"))),
        None => Err(Error::Domain("Tobit parameters need a variance".into())),
    }
}

pub fn tobit_point_eval(data: &Dataset, theta: &ParamVector) -> Result<TobitPointEval> {
    let phi = split_theta(data, theta)?;
    let s = phi.sqrt();
    let eta = data.x() * &theta.beta;
    let d = data.y().iter().map(|&y| y > 0.0).collect();
    let normal = eta.iter().map(|&e| normal_eval(e / s)).collect::<Result<Vec<_>>>()?;
    Ok(TobitPointEval { eta, d, normal, phi })
}

pub fn tobit_loglik(data: &Dataset, theta: &ParamVector) -> Result<f64> {
    let pe = tobit_point_eval(data, theta)?;
    let phi = pe.phi;
    Ok((0..data.n())
        .map(|i| {
            if pe.d[i] {
                let r = data.y()[i] - pe.eta[i];
                -0.5 * (LN_2PI + phi.ln()) - r * r / (2.0 * phi)
            } else {
                log_sf(pe.normal[i].z)
            }
        })
        .sum())
}

/// Per-observation score contributions `(s_β coefficient of x_i, s_φ)`.
fn score_terms(pe: &TobitPointEval, y: &DVector<f64>, i: usize) -> (f64, f64) {
    let phi = pe.phi;
    let ne = &pe.normal[i];
    if pe.d[i] {
        let r = y[i] - pe.eta[i];
        (r / phi, -0.5 / phi + r * r / (2.0 * phi * phi))
    } else {
        (-ne.lambda / phi.sqrt(), ne.lambda * ne.z / (2.0 * phi))
    }
}

pub fn tobit_score(data: &Dataset, theta: &ParamVector) -> Result<DVector<f64>> {
    let pe = tobit_point_eval(data, theta)?;
    Ok(score_from(&pe, data))
}

fn score_from(pe: &TobitPointEval, data: &Dataset) -> DVector<f64> {
    let p = data.p();
    let mut s = DVector::zeros(p + 1);
    for (i, row) in data.x().row_iter().enumerate() {
        let (sb, sp) = score_terms(pe, data.y(), i);
        for a in 0..p {
            s[a] += sb * row[a];
        }
        s[p] += sp;
    }
    s
}

/// Observed information `j(θ) = -∇∇ᵀℓ(θ)`.
///
/// For censored rows the `ν`-weighted terms simplify through `ν(1-F) = λ`
/// and `νf = λ²`, which keeps them finite where `1 - F` underflows.
pub fn tobit_observed_info(data: &Dataset, theta: &ParamVector) -> Result<InfoBlocks> {
    let pe = tobit_point_eval(data, theta)?;
    let phi = pe.phi;
    let phi32 = phi * phi.sqrt();
    let mut out = InfoBlocks::zeros(data.p());
    for (i, row) in data.x().row_iter().enumerate() {
        let row: Vec<f64> = row.iter().copied().collect();
        let (wbb, wbp, wpp) = if pe.d[i] {
            let r = data.y()[i] - pe.eta[i];
            (1.0 / phi, r / (phi * phi), -0.5 / (phi * phi) + r * r / (phi * phi * phi))
        } else {
            let NormalEval { z, lambda, .. } = pe.normal[i];
            let g = (lambda - z) * z;
            (
                lambda * (lambda - z) / phi,
                -lambda * (g + 1.0) / (2.0 * phi32),
                lambda * z * (g + 3.0) / (4.0 * phi * phi),
            )
        };
        out.accumulate(&row, wbb, wbp, wpp);
    }
    out.mirror();
    Ok(out)
}

/// Per-observation expected-information weights.
fn expected_info_terms(phi: f64, ne: &NormalEval) -> (f64, f64, f64) {
    let NormalEval { z, f, cdf, lambda, .. } = *ne;
    let phi32 = phi * phi.sqrt();
    (
        (cdf + lambda * f - z * f) / phi,
        f * (1.0 + z * z - lambda * z) / (2.0 * phi32),
        -(f * z * z * z + f * z - lambda * f * z * z - 2.0 * cdf) / (4.0 * phi * phi),
    )
}

/// Expected information `i(θ) = E j(θ)`.
pub fn tobit_expected_info(data: &Dataset, theta: &ParamVector) -> Result<InfoBlocks> {
    let pe = tobit_point_eval(data, theta)?;
    Ok(expected_info_from(&pe, data))
}

fn expected_info_from(pe: &TobitPointEval, data: &Dataset) -> InfoBlocks {
    let mut out = InfoBlocks::zeros(data.p());
    for (i, row) in data.x().row_iter().enumerate() {
        let row: Vec<f64> = row.iter().copied().collect();
        let (a, b, c) = expected_info_terms(pe.phi, &pe.normal[i]);
        out.accumulate(&row, a, b, c);
    }
    out.mirror();
    out
}

pub fn tobit_truncated_moments(theta: &ParamVector, data: &Dataset) -> Result<TruncatedMoments> {
    let pe = tobit_point_eval(data, theta)?;
    let n = data.n();
    let mut cols: Vec<DVector<f64>> = vec![DVector::zeros(n); 6];
    for i in 0..n {
        let m = truncated_moments_at(pe.eta[i], pe.phi, pe.normal[i].xi);
        for (l, v) in m.into_iter().enumerate() {
            cols[l][i] = v;
        }
    }
    let mut it = cols.into_iter();
    let mut next = || it.next().expect("six moment columns");
    Ok(TruncatedMoments { m1: next(), m2: next(), m3: next(), m4: next(), m5: next(), m6: next() })
}

/// Quasi Fisher scoring `θ ← θ + i(θ)⁻¹ {s(θ) + A(θ)}`, with `A ≡ 0` for ML.
///
/// Starts from least squares of `y` on `X` with the residual variance
/// floored at 1e-4. Steps are halved whenever they would push φ to or below
/// `opts.phi_floor`, produce non-finite values or, for ML, lower the
/// log-likelihood. The covariance is `i(θ̂)⁻¹`.
pub fn tobit_fit(data: &Dataset, estimator: Estimator, opts: &FitOptions) -> Result<FitResult> {
    require_tobit(data)?;
    if data.positive_rows().is_empty() {
        return Err(Error::Domain("all observations are censored".into()));
    }
    require_full_rank(data)?;
    let (n, p) = (data.n(), data.p());
    let max_iter = opts.max_iter_for(Family::Tobit);

    let beta0 = least_squares(data.x(), data.y())?;
    let resid = data.y() - data.x() * &beta0;
    let dof = if n > p { n - p } else { n };
    let phi0 = (resid.norm_squared() / dof as f64).max(START_PHI_FLOOR);
    let mut theta = ParamVector::tobit(beta0, phi0);
    let mut state = TobitIterate::new(data, &theta, estimator)?;

    let mut iterations = 0;
    let mut converged = state.adjusted.amax() <= opts.tol;
    while !converged && iterations < max_iter {
        let step = state.factor.solve(&state.adjusted);
        let current = theta.to_vector();
        let slack = 1e-12 * (1.0 + state.loglik.abs());
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &current + &step * alpha;
            if cand[p] > opts.phi_floor {
                let cand = ParamVector::from_vector(&cand, true);
                if let Ok(it) = TobitIterate::new(data, &cand, estimator) {
                    let ok = match estimator {
                        Estimator::Ml => it.loglik >= state.loglik - slack,
                        Estimator::Br => true,
                    };
                    if ok {
                        next = Some((cand, it));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, it)) = next else { break };
        theta = cand;
        state = it;
        iterations += 1;
        converged = state.adjusted.amax() <= opts.tol;
    }
    if converged {
        // one more full step so the estimate is accurate beyond `tol`
        let cand = theta.to_vector() + state.factor.solve(&state.adjusted);
        if cand[p] > opts.phi_floor {
            let cand = ParamVector::from_vector(&cand, true);
            if let Ok(it) = TobitIterate::new(data, &cand, estimator) {
                if it.adjusted.amax() <= state.adjusted.amax().max(opts.tol) {
                    theta = cand;
                    state = it;
                }
            }
        }
    }

    let vcov = state.factor.inverse();
    Ok(FitResult {
        method: estimator.into(),
        family: Family::Tobit,
        std_errors: std_errors_of(&vcov),
        loglik: state.loglik,
        params: theta,
        coef_names: data.column_names().to_vec(),
        vcov,
        converged,
        iterations,
        n_used: n,
        omitted_columns: Vec::new(),
        max_abs_adjusted_score: state.adjusted.amax(),
    })
}

struct TobitIterate {
    factor: SpdFactor,
    adjusted: DVector<f64>,
    loglik: f64,
}

impl TobitIterate {
    fn new(data: &Dataset, theta: &ParamVector, estimator: Estimator) -> Result<Self> {
        let pe = tobit_point_eval(data, theta)?;
        let info = expected_info_from(&pe, data).assemble();
        let factor = SpdFactor::new(&info)?;
        let mut adjusted = score_from(&pe, data);
        if estimator == Estimator::Br {
            adjusted += adjustment::adjustment_from(&pe, data, &factor);
        }
        let loglik = tobit_loglik(data, theta)?;
        if !loglik.is_finite() || adjusted.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite likelihood quantities".into()));
        }
        Ok(Self { factor, adjusted, loglik })
    }
}
