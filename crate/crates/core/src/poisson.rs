//! Log-link Poisson regression: likelihood, score, expected information,
//! leverages and ML/BR fitting by Fisher scoring.
//!
//! The bias-reducing adjustment for a canonical-link GLM is `Σ h_i x_i / 2`,
//! so the BR estimator solves `Σ (y_i + h_i/2 - μ_i) x_i = 0`. It is also the
//! gradient of `ℓ(β) + ½ log det(XᵀWX)`, which serves as the step-halving
//! merit function.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::data::{std_errors_of, Dataset, Estimator, Family, FitOptions, FitResult, ParamVector};
use crate::error::{Error, Result};
use crate::kernel::{rank_nullspace, RankTolerance, SpdFactor};

/// Linear predictors are clamped to this magnitude inside `exp` while iterating.
pub const ETA_CLAMP: f64 = 30.0;
const MAX_HALVINGS: usize = 50;

/// Means, expected information and (optionally) leverages at one β.
#[derive(Debug, Clone)]
pub struct PoissonWorkspace {
    pub mu: DVector<f64>,
    pub info: DMatrix<f64>,
    pub hat: DVector<f64>,
}

fn require_poisson(data: &Dataset) -> Result<()> {
    if data.family() != Family::Poisson {
        return Err(Error::Domain(format!("expected a Poisson dataset, got {}", data.family())));
    }
    Ok(())
}

fn means(data: &Dataset, beta: &DVector<f64>) -> Result<DVector<f64>> {
    let eta = data.x() * beta;
    eta.iter()
        .map(|&e| {
            let mu = e.exp();
            if mu.is_finite() && e.is_finite() {
                Ok(mu)
            } else {
                Err(Error::Evaluation { eta: e })
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}

fn weighted_cross_product(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let p = x.ncols();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for (i, row) in x.row_iter().enumerate() {
        let wi = w[i];
        for a in 0..p {
            let ra = wi * row[a];
            for b in 0..=a {
                m[(a, b)] += ra * row[b];
            }
        }
    }
    m.fill_upper_triangle_with_lower_triangle();
    m
}

fn hat_from_factor(x: &DMatrix<f64>, mu: &DVector<f64>, factor: &SpdFactor) -> DVector<f64> {
    DVector::from_iterator(
        x.nrows(),
        x.row_iter().enumerate().map(|(i, row)| {
            let v = factor.forward(&row.transpose());
            mu[i] * v.norm_squared()
        }),
    )
}

/// `Σ (y_i log μ_i - μ_i - log y_i!)`.
pub fn poisson_loglik(data: &Dataset, beta: &DVector<f64>) -> Result<f64> {
    require_poisson(data)?;
    let mu = means(data, beta)?;
    let eta = data.x() * beta;
    Ok(data
        .y()
        .iter()
        .zip(eta.iter().zip(mu.iter()))
        .map(|(&y, (&e, &m))| y * e - m - ln_gamma(y + 1.0))
        .sum())
}

/// `Σ (y_i - μ_i) x_i`.
pub fn poisson_score(data: &Dataset, beta: &DVector<f64>) -> Result<DVector<f64>> {
    require_poisson(data)?;
    let mu = means(data, beta)?;
    Ok(data.x().tr_mul(&(data.y() - mu)))
}

/// Expected (= observed) information `XᵀWX` with `W = diag(μ)`.
pub fn poisson_info(data: &Dataset, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
    require_poisson(data)?;
    let mu = means(data, beta)?;
    Ok(weighted_cross_product(data.x(), &mu))
}

/// Leverages `h_i = μ_i x_iᵀ (XᵀWX)⁻¹ x_i`.
pub fn poisson_hat_values(data: &Dataset, beta: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(poisson_workspace(data, beta)?.hat)
}

pub fn poisson_workspace(data: &Dataset, beta: &DVector<f64>) -> Result<PoissonWorkspace> {
    require_poisson(data)?;
    let mu = means(data, beta)?;
    let info = weighted_cross_product(data.x(), &mu);
    let factor = SpdFactor::new(&info)?;
    let hat = hat_from_factor(data.x(), &mu, &factor);
    Ok(PoissonWorkspace { mu, info, hat })
}

/// `Σ (y_i + h_i/2 - μ_i) x_i`; the plain score for ML.
pub fn poisson_adjusted_score(data: &Dataset, beta: &DVector<f64>, estimator: Estimator) -> Result<DVector<f64>> {
    match estimator {
        Estimator::Ml => poisson_score(data, beta),
        Estimator::Br => {
            let ws = poisson_workspace(data, beta)?;
            Ok(data.x().tr_mul(&(data.y() + ws.hat * 0.5 - ws.mu)))
        }
    }
}

struct Iterate {
    factor: SpdFactor,
    adjusted: DVector<f64>,
    merit: f64,
}

fn iterate_at(data: &Dataset, beta: &DVector<f64>, estimator: Estimator) -> Result<Option<Iterate>> {
    let eta = data.x() * beta;
    if eta.iter().any(|e| !e.is_finite()) {
        return Err(Error::Evaluation { eta: f64::NAN });
    }
    if eta.iter().any(|e| e.abs() > ETA_CLAMP) {
        return Ok(None);
    }
    let mu = eta.map(f64::exp);
    let info = weighted_cross_product(data.x(), &mu);
    let factor = SpdFactor::new(&info)?;
    let loglik: f64 = data.y().iter().zip(eta.iter().zip(mu.iter())).map(|(&y, (&e, &m))| y * e - m).sum();
    let (adjusted, merit) = match estimator {
        Estimator::Ml => (data.x().tr_mul(&(data.y() - &mu)), loglik),
        Estimator::Br => {
            let hat = hat_from_factor(data.x(), &mu, &factor);
            (data.x().tr_mul(&(data.y() + hat * 0.5 - &mu)), loglik + 0.5 * factor.log_det())
        }
    };
    Ok(Some(Iterate { factor, adjusted, merit }))
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let xtx = x.tr_mul(x);
    SpdFactor::new(&xtx).map(|f| f.solve(&x.tr_mul(y)))
}

pub(crate) fn require_full_rank(data: &Dataset) -> Result<()> {
    let r = rank_nullspace(data.x(), RankTolerance::Default)?;
    if r.rank < data.p() {
        return Err(Error::Degenerate(format!(
            "design matrix has rank {} < {} columns",
            r.rank,
            data.p()
        )));
    }
    Ok(())
}

/// Fisher scoring `β ← β + (XᵀWX)⁻¹ s_adj` with step halving on the merit
/// function. Starts from least squares of `log(y + 0.5)` on `X`.
pub fn poisson_fit(data: &Dataset, estimator: Estimator, opts: &FitOptions) -> Result<FitResult> {
    require_poisson(data)?;
    require_full_rank(data)?;
    let max_iter = opts.max_iter_for(Family::Poisson);

    let start = data.y().map(|y| (y + 0.5).ln());
    let mut beta = least_squares(data.x(), &start)?;
    let mut state = iterate_at(data, &beta, estimator)?
        .ok_or_else(|| Error::Degenerate("starting values exceed the linear predictor range".into()))?;

    let mut iterations = 0;
    let mut converged = state.adjusted.amax() <= opts.tol;
    while !converged && iterations < max_iter {
        let step = state.factor.solve(&state.adjusted);
        let slack = 1e-12 * (1.0 + state.merit.abs());
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &beta + &step * alpha;
            if let Ok(Some(it)) = iterate_at(data, &cand, estimator) {
                if it.merit >= state.merit - slack {
                    next = Some((cand, it));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, it)) = next else { break };
        beta = cand;
        state = it;
        iterations += 1;
        converged = state.adjusted.amax() <= opts.tol;
    }
    if converged {
        // one more full step so the estimate is accurate beyond `tol`
        let cand = &beta + state.factor.solve(&state.adjusted);
        if let Ok(Some(it)) = iterate_at(data, &cand, estimator) {
            if it.merit >= state.merit - 1e-12 * (1.0 + state.merit.abs()) && it.adjusted.amax() <= opts.tol {
                beta = cand;
                state = it;
            }
        }
    }

    let vcov = state.factor.inverse();
    Ok(FitResult {
        method: estimator.into(),
        family: Family::Poisson,
        std_errors: std_errors_of(&vcov),
        loglik: poisson_loglik(data, &beta)?,
        params: ParamVector::poisson(beta),
        coef_names: data.column_names().to_vec(),
        vcov,
        converged,
        iterations,
        n_used: data.n(),
        omitted_columns: Vec::new(),
        max_abs_adjusted_score: state.adjusted.amax(),
    })
}
