//! Side-by-side comparison of the four strategies and its text, JSON and CSV
//! renderings. Text tables print 3 decimals; JSON carries full precision.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::data::{Dataset, Estimator, FitOptions, FitResult, Method};
use crate::error::{Error, Result};
use crate::inference::{wald_summary, WaldSummary};
use crate::separation::{
    classify_infinite, detect_separation, fit_ml, fit_omission_strategy, Omission, SeparationReport,
};

pub const ALL_METHODS: [Method; 4] = [Method::Ml, Method::Br, Method::MlSub, Method::MlSst];

#[derive(Debug, Clone)]
pub struct MethodFit {
    pub fit: FitResult,
    pub wald: WaldSummary,
    pub infinite: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub parameter_names: Vec<String>,
    pub separation: SeparationReport,
    pub level: f64,
    pub threshold: f64,
    pub fits: Vec<MethodFit>,
}

impl Comparison {
    pub fn get(&self, method: Method) -> Option<&MethodFit> {
        self.fits.iter().find(|m| m.fit.method == method)
    }
}

/// Fits `methods` in order. Omission strategies on non-separated data give
/// [`Error::NoSeparation`].
pub fn compare(
    data: &Dataset,
    methods: &[Method],
    opts: &FitOptions,
    level: f64,
    threshold: f64,
) -> Result<Comparison> {
    let separation = detect_separation(data)?;
    let mut fits = Vec::with_capacity(methods.len());
    for &m in methods {
        let fit = match m {
            Method::Ml => fit_ml(data, Estimator::Ml, opts)?,
            Method::Br => fit_ml(data, Estimator::Br, opts)?,
            Method::MlSub => fit_omission_strategy(data, &separation, Omission::MlSub, opts)?,
            Method::MlSst => fit_omission_strategy(data, &separation, Omission::MlSst, opts)?,
        };
        let wald = wald_summary(&fit, level)?;
        let infinite = classify_infinite(&fit, threshold);
        fits.push(MethodFit { fit, wald, infinite });
    }
    let mut parameter_names = data.column_names().to_vec();
    if data.family() == crate::data::Family::Tobit {
        parameter_names.push("(Variance)".into());
    }
    Ok(Comparison { parameter_names, separation, level, threshold, fits })
}

fn cell(est: f64, se: f64, infinite: bool) -> String {
    format!("{est:.3} ({se:.3}){}", if infinite { "*" } else { "" })
}

/// Table with one column per method: estimates with standard errors in
/// parentheses, then log-likelihood and number of observations used.
pub fn render_table(c: &Comparison) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::new()];
    header.extend(c.fits.iter().map(|m| m.fit.method.label().to_string()));
    rows.push(header);
    for name in &c.parameter_names {
        let mut row = vec![name.clone()];
        for m in &c.fits {
            row.push(match m.wald.row(name) {
                Some(r) => {
                    let j = m.wald.rows.iter().position(|x| x.name == *name).unwrap_or(0);
                    cell(r.estimate, r.std_error, m.infinite[j])
                }
                None => "-".into(),
            });
        }
        rows.push(row);
    }
    let mut ll = vec!["Log-likelihood".to_string()];
    ll.extend(c.fits.iter().map(|m| format!("{:.3}", m.fit.loglik)));
    rows.push(ll);
    let mut n = vec!["N".to_string()];
    n.extend(c.fits.iter().map(|m| m.fit.n_used.to_string()));
    rows.push(n);

    let ncol = rows[0].len();
    let widths: Vec<usize> =
        (0..ncol).map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let mut line = format!("{:<w$}", r[0], w = widths[0]);
        for j in 1..ncol {
            let _ = write!(line, "  {:>w$}", r[j], w = widths[j]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if i == 0 || i == c.parameter_names.len() {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (ncol - 1)));
            out.push('\n');
        }
    }
    if c.fits.iter().any(|m| m.infinite.iter().any(|&b| b)) {
        let _ = writeln!(out, "* standard error above {}; estimate classified infinite", c.threshold);
    }
    for m in c.fits.iter().filter(|m| !m.fit.converged) {
        let _ = writeln!(out, "{} did not converge in {} iterations", m.fit.method.label(), m.fit.iterations);
    }
    out
}

/// Per-parameter Wald table for one fit.
pub fn render_wald(m: &MethodFit) -> String {
    let pct = m.wald.level * 100.0;
    let mut out = format!(
        "{} fit, {} observations, log-likelihood {:.3}{}\n",
        m.fit.method.label(),
        m.fit.n_used,
        m.fit.loglik,
        if m.fit.converged { String::new() } else { format!(" (not converged after {} iterations)", m.fit.iterations) }
    );
    let w = m.wald.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(9);
    let _ = writeln!(
        out,
        "{:<w$}  {:>10}  {:>10}  {:>8}  {:>8}  {:>21}",
        "parameter",
        "estimate",
        "std.err",
        "z",
        "p",
        format!("{pct}% interval")
    );
    for (r, &inf) in m.wald.rows.iter().zip(&m.infinite) {
        let ci = r.interval.map_or("-".into(), |(lo, hi)| format!("({lo:.3}, {hi:.3})"));
        let _ = writeln!(
            out,
            "{:<w$}  {:>10.3}  {:>10.3}  {:>8.3}  {:>8.3}  {:>21}{}",
            r.name,
            r.estimate,
            r.std_error,
            r.z,
            r.p_value,
            ci,
            if inf { " *" } else { "" }
        );
    }
    out
}

#[derive(Serialize)]
struct ParameterJson<'a> {
    name: &'a str,
    estimate: f64,
    std_error: f64,
    z: f64,
    p_value: f64,
    ci_lower: Option<f64>,
    ci_upper: Option<f64>,
    infinite: bool,
}

#[derive(Serialize)]
struct FitJson<'a> {
    method: &'a str,
    converged: bool,
    iterations: usize,
    n_used: usize,
    loglik: f64,
    omitted_columns: Vec<&'a str>,
    max_abs_adjusted_score: f64,
    parameters: Vec<ParameterJson<'a>>,
    vcov: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SeparationJson<'a> {
    separated: bool,
    rank: usize,
    n_positive: usize,
    offending_columns: Vec<&'a str>,
    /// 1-based row numbers, matching the input file.
    boundary_active_rows: Vec<usize>,
    directions: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ComparisonJson<'a> {
    level: f64,
    threshold: f64,
    separation: SeparationJson<'a>,
    fits: Vec<FitJson<'a>>,
}

fn separation_view(s: &SeparationReport) -> SeparationJson<'_> {
    let names = &s.column_names;
    SeparationJson {
        separated: s.separated,
        rank: s.rank,
        n_positive: s.n_positive,
        offending_columns: s.offending_columns.iter().map(|&j| names[j].as_str()).collect(),
        boundary_active_rows: s.boundary_active.iter().map(|i| i + 1).collect(),
        directions: s.nullspace_directions.column_iter().map(|d| d.iter().copied().collect()).collect(),
    }
}

pub fn separation_json(report: &SeparationReport) -> Result<String> {
    serde_json::to_string_pretty(&separation_view(report)).map_err(|e| Error::Domain(format!("json: {e}")))
}

/// JSON with full-precision estimates and the complete covariance matrices.
/// Non-finite numbers appear as `null`.
pub fn to_json(c: &Comparison) -> Result<String> {
    let s = &c.separation;
    let names = &s.column_names;
    let view = ComparisonJson {
        level: c.level,
        threshold: c.threshold,
        separation: separation_view(s),
        fits: c
            .fits
            .iter()
            .map(|m| FitJson {
                method: m.fit.method.label(),
                converged: m.fit.converged,
                iterations: m.fit.iterations,
                n_used: m.fit.n_used,
                loglik: m.fit.loglik,
                omitted_columns: m.fit.omitted_columns.iter().map(|&j| names[j].as_str()).collect(),
                max_abs_adjusted_score: m.fit.max_abs_adjusted_score,
                parameters: m
                    .wald
                    .rows
                    .iter()
                    .zip(&m.infinite)
                    .map(|(r, &infinite)| ParameterJson {
                        name: &r.name,
                        estimate: r.estimate,
                        std_error: r.std_error,
                        z: r.z,
                        p_value: r.p_value,
                        ci_lower: r.interval.map(|i| i.0),
                        ci_upper: r.interval.map(|i| i.1),
                        infinite,
                    })
                    .collect(),
                vcov: m.fit.vcov.row_iter().map(|r| r.iter().copied().collect()).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&view).map_err(|e| Error::Domain(format!("json: {e}")))
}

/// Long format: one row per method and parameter.
pub fn write_csv<W: Write>(c: &Comparison, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "method", "parameter", "estimate", "std_error", "z", "p_value", "ci_lower", "ci_upper", "infinite",
        "loglik", "n_used", "converged",
    ])?;
    let num = |v: f64| v.to_string();
    for m in &c.fits {
        for (r, &inf) in m.wald.rows.iter().zip(&m.infinite) {
            let (lo, hi) = r.interval.map_or((String::new(), String::new()), |(a, b)| (num(a), num(b)));
            w.write_record([
                m.fit.method.label().to_string(),
                r.name.clone(),
                num(r.estimate),
                num(r.std_error),
                num(r.z),
                num(r.p_value),
                lo,
                hi,
                inf.to_string(),
                num(m.fit.loglik),
                m.fit.n_used.to_string(),
                m.fit.converged.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
