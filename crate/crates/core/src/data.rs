//! Datasets, parameter vectors and fit results shared by every estimator.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Poisson,
    Tobit,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(Family::Poisson),
            "tobit" => Ok(Family::Tobit),
            other => Err(Error::Domain(format!("unknown family `{other}`"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Poisson => "poisson",
            Family::Tobit => "tobit",
        })
    }
}

/// Regressor matrix, non-negative response and family tag.
///
/// Observations with `y == 0` exactly form the boundary set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    family: Family,
    column_names: Vec<String>,
    response_name: String,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        family: Family,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::Domain(format!("{} responses for {} rows", y.len(), n)));
        }
        if column_names.len() != p {
            return Err(Error::Domain(format!("{} names for {} columns", column_names.len(), p)));
        }
        if p == 0 || n < p {
            return Err(Error::Degenerate(format!("need n >= p >= 1, got n = {n}, p = {p}")));
        }
        for i in 0..n {
            if x.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation { row: i + 1, msg: "non-finite regressor".into() });
            }
            check_response(y[i], family, i + 1)?;
        }
        Ok(Self { x, y, family, column_names, response_name: "y".into() })
    }

    pub fn with_response_name(mut self, name: impl Into<String>) -> Self {
        self.response_name = name.into();
        self
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.y[i] == 0.0
    }

    pub fn positive_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.is_boundary(i)).collect()
    }

    /// Copy restricted to the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Result<Dataset> {
        if rows.len() < cols.len() || cols.is_empty() {
            return Err(Error::Degenerate(format!(
                "subset keeps {} observations for {} regressors",
                rows.len(),
                cols.len()
            )));
        }
        let x = DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.x[(rows[i], cols[j])]);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let names = cols.iter().map(|&j| self.column_names[j].clone()).collect();
        Ok(Dataset::new(x, y, self.family, names)?.with_response_name(self.response_name.clone()))
    }

    /// Writes the response followed by every regressor column, intercept included.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![self.response_name.clone()];
        header.extend(self.column_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![format_exact(self.y[i])];
            rec.extend(self.x.row(i).iter().map(|&v| format_exact(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_exact(v: f64) -> String {
    // Display for f64 is the shortest string that round-trips
    format!("{v}")
}

fn check_response(y: f64, family: Family, row: usize) -> Result<()> {
    if !y.is_finite() {
        return Err(Error::Validation { row, msg: "non-finite response".into() });
    }
    if y < 0.0 {
        return Err(Error::Validation { row, msg: format!("negative response {y}") });
    }
    if family == Family::Poisson && y.fract() != 0.0 {
        return Err(Error::Validation { row, msg: format!("non-integer count {y}") });
    }
    Ok(())
}

/// Reads a comma-separated table with a header row.
///
/// Every column other than `response` becomes a regressor. An intercept
/// column is prepended unless some column already consists entirely of ones.
/// Row numbers in errors count data lines from 1.
pub fn load_dataset<R: Read>(source: R, response: &str, family: Family) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let resp_idx = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::MissingColumn(response.to_owned()))?;
    let reg_idx: Vec<usize> = (0..headers.len()).filter(|&j| j != resp_idx).collect();

    let mut y = Vec::new();
    let mut cells = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record?;
        let parse = |j: usize| -> Result<f64> {
            let cell = record.get(j).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::Validation { row, msg: format!("empty cell in column `{}`", headers[j]) });
            }
            cell.parse::<f64>().map_err(|_| Error::Validation {
                row,
                msg: format!("non-numeric cell `{cell}` in column `{}`", headers[j]),
            })
        };
        let yi = parse(resp_idx)?;
        check_response(yi, family, row)?;
        y.push(yi);
        for &j in &reg_idx {
            cells.push(parse(j)?);
        }
    }
    let n = y.len();
    let p_raw = reg_idx.len();
    let raw = DMatrix::from_row_slice(n, p_raw, &cells);
    let mut names: Vec<String> = reg_idx.iter().map(|&j| headers[j].clone()).collect();

    let has_intercept = n > 0 && (0..p_raw).any(|j| raw.column(j).iter().all(|&v| v == 1.0));
    let x = if has_intercept {
        raw
    } else {
        names.insert(0, INTERCEPT.to_owned());
        raw.insert_column(0, 1.0)
    };
    Ok(Dataset::new(x, DVector::from_vec(y), family, names)?.with_response_name(response))
}

/// Regression coefficients plus, for Tobit, the error variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub beta: DVector<f64>,
    pub phi: Option<f64>,
}

impl ParamVector {
    pub fn new(beta: DVector<f64>, phi: Option<f64>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        if let Some(phi) = phi {
            if !(phi > 0.0 && phi.is_finite()) {
                return Err(Error::Domain(format!("variance must be positive, got {phi}")));
            }
        }
        Ok(Self { beta, phi })
    }

    pub fn poisson(beta: DVector<f64>) -> Self {
        Self { beta, phi: None }
    }

    pub fn tobit(beta: DVector<f64>, phi: f64) -> Self {
        Self { beta, phi: Some(phi) }
    }

    pub fn len(&self) -> usize {
        self.beta.len() + usize::from(self.phi.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// θ stacked as one vector, variance last.
    pub fn to_vector(&self) -> DVector<f64> {
        match self.phi {
            Some(phi) => self.beta.clone().push(phi),
            None => self.beta.clone(),
        }
    }

    pub fn from_vector(theta: &DVector<f64>, with_phi: bool) -> Self {
        if with_phi {
            let p = theta.len() - 1;
            Self { beta: theta.rows(0, p).into_owned(), phi: Some(theta[p]) }
        } else {
            Self { beta: theta.clone(), phi: None }
        }
    }
}

/// Full-data estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Ml,
    Br,
}

impl From<Estimator> for Method {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Ml => Method::Ml,
            Estimator::Br => Method::Br,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ml,
    Br,
    MlSub,
    MlSst,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Ml => "ML",
            Method::Br => "BR",
            Method::MlSub => "ML/sub",
            Method::MlSst => "ML/SST",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Convergence threshold on the sup-norm of the (adjusted) score.
    pub tol: f64,
    /// `None` picks the family default: 100 for Poisson, 200 for Tobit.
    pub max_iter: Option<usize>,
    pub phi_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: None, phi_floor: 1e-10 }
    }
}

impl FitOptions {
    pub fn max_iter_for(&self, family: Family) -> usize {
        self.max_iter.unwrap_or(match family {
            Family::Poisson => 100,
            Family::Tobit => 200,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub method: Method,
    pub family: Family,
    pub params: ParamVector,
    /// Names of the estimated coefficients, in order.
    pub coef_names: Vec<String>,
    pub vcov: DMatrix<f64>,
    pub std_errors: DVector<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_used: usize,
    /// Indices, in the original design, of regressors left out of the fit.
    pub omitted_columns: Vec<usize>,
    pub max_abs_adjusted_score: f64,
}

impl FitResult {
    pub fn estimates(&self) -> DVector<f64> {
        self.params.to_vector()
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = self.coef_names.clone();
        if self.params.phi.is_some() {
            names.push("(Variance)".into());
        }
        names
    }

    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let j = self.coef_names.iter().position(|c| c == name)?;
        Some((self.params.beta[j], self.std_errors[j]))
    }
}

pub(crate) fn std_errors_of(vcov: &DMatrix<f64>) -> DVector<f64> {
    vcov.diagonal().map(|v| v.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_is_added() {
        let csv = "y,x2\n0,1.5\n1,-0.5\n4,2\n";
        let d = load_dataset(csv.as_bytes(), "y", Family::Poisson).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.column_names(), &[INTERCEPT.to_string(), "x2".to_string()]);
        assert_eq!(d.x()[(1, 0)], 1.0);
        assert_eq!(d.x()[(1, 1)], -0.5);
    }

    #[test]
    fn existing_intercept_is_kept() {
        let csv = "const,y,x2\n1,0,1.5\n1,1,-0.5\n1,4,2\n";
        let d = load_dataset(csv.as_bytes(), "y", Family::Poisson).unwrap();
        assert_eq!(d.p(), 2);
        assert_eq!(d.column_names()[0], "const");
    }

    #[test]
    fn negative_tobit_response_names_row() {
        let csv = "y,x2\n1,0\n-1,1\n";
        match load_dataset(csv.as_bytes(), "y", Family::Tobit) {
            Err(Error::Validation { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fractional_count_is_rejected() {
        let csv = "y,x2\n1.5,0\n1,1\n";
        let err = load_dataset(csv.as_bytes(), "y", Family::Poisson).unwrap_err();
        assert!(err.to_string().contains("non-integer count"), "{err}");
    }

    #[test]
    fn missing_and_malformed_columns() {
        assert!(matches!(
            load_dataset("a,b\n1,2\n".as_bytes(), "y", Family::Tobit),
            Err(Error::MissingColumn(_))
        ));
        let err = load_dataset("y,x\n1,abc\n2,3\n".as_bytes(), "y", Family::Tobit).unwrap_err();
        assert!(matches!(err, Error::Validation { row: 1, .. }), "{err:?}");
        let err = load_dataset("y,x\n1,\n2,3\n".as_bytes(), "y", Family::Tobit).unwrap_err();
        assert!(matches!(err, Error::Validation { row: 1, .. }), "{err:?}");
    }

    #[test]
    fn too_few_rows() {
        let err = load_dataset("y,x\n1,2\n".as_bytes(), "y", Family::Tobit).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn select_subset() {
        let csv = "y,x2\n0,1\n1,2\n2,3\n3,4\n";
        let d = load_dataset(csv.as_bytes(), "y", Family::Poisson).unwrap();
        let s = d.select(&[1, 3], &[0]).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.y().as_slice(), &[1.0, 3.0]);
        assert_eq!(s.column_names(), &[INTERCEPT.to_string()]);
        assert!(matches!(d.select(&[1], &[0, 1]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn param_vector_stacking() {
        let t = ParamVector::tobit(DVector::from_vec(vec![1.0, 2.0]), 3.0);
        let v = t.to_vector();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(ParamVector::from_vector(&v, true), t);
        assert!(ParamVector::new(DVector::from_vec(vec![1.0]), Some(0.0)).is_err());
    }
}
