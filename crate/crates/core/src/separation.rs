//! Separation diagnostics and the two regressor-omission strategies.
//!
//! Separation shows up as perfect collinearity among the regressors once the
//! boundary observations (`y == 0`) are set aside: a direction `γ` with
//! `X₊ γ = 0` on the non-boundary rows but `x_iᵀγ ≠ 0` on some boundary rows
//! lets the likelihood keep increasing as `β` moves along `γ`.

use std::fmt;

use nalgebra::DMatrix;

use crate::data::{Dataset, Estimator, Family, FitOptions, FitResult, Method};
use crate::error::{Error, Result};
use crate::kernel::{rank_nullspace, RankTolerance};
use crate::poisson::poisson_fit;
use crate::tobit::tobit_fit;

/// Standard-error threshold above which an estimate is classified infinite.
pub const INFINITE_SE_THRESHOLD: f64 = 20.0;

/// Signs of `x_iᵀγ` over the boundary observations for one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectionSigns {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl DirectionSigns {
    /// All non-zero projections share one sign, so `β` can diverge along `±γ`.
    pub fn uniform(&self) -> bool {
        (self.positive > 0) != (self.negative > 0)
    }
}

#[derive(Debug, Clone)]
pub struct SeparationReport {
    pub separated: bool,
    /// `p x k` matrix whose columns span `{γ : X₊ γ = 0}`.
    pub nullspace_directions: DMatrix<f64>,
    /// Column indices whose removal restores full rank on the non-boundary rows.
    pub offending_columns: Vec<usize>,
    /// Boundary rows with `|x_iᵀγ| >` tolerance for some direction.
    pub boundary_active: Vec<usize>,
    pub sign_summary: Vec<DirectionSigns>,
    pub rank: usize,
    pub tolerance: f64,
    pub n_positive: usize,
    pub column_names: Vec<String>,
}

impl fmt::Display for SeparationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "separated: {}", if self.separated { "yes" } else { "no" })?;
        writeln!(
            f,
            "rank on y > 0 subset: {} of {} ({} observations)",
            self.rank,
            self.column_names.len(),
            self.n_positive
        )?;
        for (k, dir) in self.nullspace_directions.column_iter().enumerate() {
            let parts: Vec<String> = dir
                .iter()
                .zip(&self.column_names)
                .filter(|(g, _)| g.abs() > self.tolerance.max(1e-12))
                .map(|(g, name)| format!("{g:+.6}*{name}"))
                .collect();
            let s = &self.sign_summary[k];
            writeln!(
                f,
                "direction {}: {}  [boundary signs: {} positive, {} negative, {} zero{}]",
                k + 1,
                parts.join(" "),
                s.positive,
                s.negative,
                s.zero,
                if s.uniform() { ", uniform" } else { "" }
            )?;
        }
        let names: Vec<&str> = self.offending_columns.iter().map(|&j| self.column_names[j].as_str()).collect();
        writeln!(f, "offending columns: {}", if names.is_empty() { "none".into() } else { names.join(", ") })?;
        let rows: Vec<String> = self.boundary_active.iter().map(|i| (i + 1).to_string()).collect();
        write!(
            f,
            "boundary observations involved: {}{}",
            self.boundary_active.len(),
            if rows.is_empty() || rows.len() > 20 { String::new() } else { format!(" (rows {})", rows.join(", ")) }
        )
    }
}

fn columns(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

pub fn detect_separation(data: &Dataset) -> Result<SeparationReport> {
    let rows = data.positive_rows();
    if rows.is_empty() {
        return Err(Error::Degenerate("no observations away from the boundary".into()));
    }
    let p = data.p();
    let sub = DMatrix::from_fn(rows.len(), p, |i, j| data.x()[(rows[i], j)]);
    let info = rank_nullspace(&sub, RankTolerance::Default)?;
    let directions = info.nullspace.clone();
    let tol = info.tolerance;

    // greedy removal: largest |γ_j|, ties to the highest index
    let mut remaining: Vec<usize> = (0..p).collect();
    let mut offending = Vec::new();
    loop {
        let r = rank_nullspace(&columns(&sub, &remaining), RankTolerance::Default)?;
        if r.rank == remaining.len() {
            break;
        }
        let mut best = 0;
        let mut best_w = -1.0;
        for (pos, row) in r.nullspace.row_iter().enumerate() {
            let w = row.amax();
            if w >= best_w - 1e-12 {
                best = pos;
                best_w = w.max(best_w);
            }
        }
        offending.push(remaining.remove(best));
    }
    offending.sort_unstable();

    let proj_tol = tol.max(f64::EPSILON);
    let mut sign_summary = vec![DirectionSigns { positive: 0, negative: 0, zero: 0 }; directions.ncols()];
    let mut boundary_active = Vec::new();
    for i in (0..data.n()).filter(|&i| data.is_boundary(i)) {
        let mut active = false;
        for (k, dir) in directions.column_iter().enumerate() {
            let v = data.x().row(i).transpose().dot(&dir);
            if v > proj_tol {
                sign_summary[k].positive += 1;
                active = true;
            } else if v < -proj_tol {
                sign_summary[k].negative += 1;
                active = true;
            } else {
                sign_summary[k].zero += 1;
            }
        }
        if active {
            boundary_active.push(i);
        }
    }

    Ok(SeparationReport {
        separated: directions.ncols() > 0,
        nullspace_directions: directions,
        offending_columns: offending,
        boundary_active,
        sign_summary,
        rank: info.rank,
        tolerance: tol,
        n_positive: rows.len(),
        column_names: data.column_names().to_vec(),
    })
}

/// Flags parameters whose standard error exceeds `threshold` (strictly).
pub fn classify_infinite(fit: &FitResult, threshold: f64) -> Vec<bool> {
    fit.std_errors.iter().map(|&se| !(se <= threshold)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Omission {
    /// Drop the offending regressors and the boundary rows they activate.
    MlSub,
    /// Drop the offending regressors, keep every observation.
    MlSst,
}

impl From<Omission> for Method {
    fn from(o: Omission) -> Self {
        match o {
            Omission::MlSub => Method::MlSub,
            Omission::MlSst => Method::MlSst,
        }
    }
}

pub fn fit_ml(data: &Dataset, estimator: Estimator, opts: &FitOptions) -> Result<FitResult> {
    match data.family() {
        Family::Poisson => poisson_fit(data, estimator, opts),
        Family::Tobit => tobit_fit(data, estimator, opts),
    }
}

pub fn fit_omission_strategy(
    data: &Dataset,
    report: &SeparationReport,
    strategy: Omission,
    opts: &FitOptions,
) -> Result<FitResult> {
    if !report.separated {
        return Err(Error::NoSeparation);
    }
    let cols: Vec<usize> = (0..data.p()).filter(|j| !report.offending_columns.contains(j)).collect();
    let rows: Vec<usize> = match strategy {
        Omission::MlSst => (0..data.n()).collect(),
        Omission::MlSub => (0..data.n()).filter(|i| report.boundary_active.binary_search(i).is_err()).collect(),
    };
    let sub = data.select(&rows, &cols)?;
    let mut fit = fit_ml(&sub, Estimator::Ml, opts)?;
    fit.method = strategy.into();
    fit.n_used = rows.len();
    fit.omitted_columns = report.offending_columns.clone();
    Ok(fit)
}
