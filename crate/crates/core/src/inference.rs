//! Wald inference from a fitted model, normal reference distribution.

use libm::erfc;

use crate::data::FitResult;
use crate::error::{Error, Result};
use crate::kernel::normal_quantile;

#[derive(Debug, Clone, PartialEq)]
pub struct WaldRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    /// `None` when the standard error is not finite.
    pub interval: Option<(f64, f64)>,
}

impl WaldRow {
    pub fn covers(&self, value: f64) -> bool {
        self.interval.is_some_and(|(lo, hi)| lo <= value && value <= hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldSummary {
    pub level: f64,
    pub critical_value: f64,
    pub rows: Vec<WaldRow>,
}

impl WaldSummary {
    pub fn row(&self, name: &str) -> Option<&WaldRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

pub fn wald_interval(estimate: f64, std_error: f64, level: f64) -> Result<(f64, f64)> {
    let q = critical_value(level)?;
    Ok((estimate - q * std_error, estimate + q * std_error))
}

fn critical_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    Ok(normal_quantile(0.5 + level / 2.0))
}

pub fn wald_summary(fit: &FitResult, level: f64) -> Result<WaldSummary> {
    let q = critical_value(level)?;
    let est = fit.estimates();
    let rows = fit
        .parameter_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let (b, se) = (est[j], fit.std_errors[j]);
            let ok = se.is_finite() && se > 0.0;
            let z = if ok { b / se } else { f64::NAN };
            WaldRow {
                name,
                estimate: b,
                std_error: se,
                z,
                p_value: if ok { erfc(z.abs() * std::f64::consts::FRAC_1_SQRT_2) } else { f64::NAN },
                interval: ok.then_some((b - q * se, b + q * se)),
            }
        })
        .collect();
    Ok(WaldSummary { level, critical_value: q, rows })
}
