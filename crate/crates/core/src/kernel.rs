//! Scalar normal kernels and the small dense linear algebra used by the
//! estimators.

use nalgebra::{DMatrix, DVector};
use libm::erfc;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this point the hazard is evaluated as `f / sf` from `erfc`, above it
/// by the Laplace continued fraction.
const HAZARD_SPLIT: f64 = 3.0;
const HAZARD_CF_TERMS: usize = 80;

/// Standard normal quantities at a standardized argument.
///
/// `lambda` is the upper hazard `f / (1 - F)`, `xi` the lower hazard `f / F`
/// and `nu = f / (1 - F)^2`. `sf` holds `1 - F` computed directly, so it stays
/// accurate in the upper tail where `1.0 - cdf` rounds to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalEval {
    pub z: f64,
    pub f: f64,
    pub cdf: f64,
    pub sf: f64,
    pub lambda: f64,
    pub xi: f64,
    pub nu: f64,
}

pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn normal_sf(z: f64) -> f64 {
    normal_cdf(-z)
}

/// Upper hazard `f(z) / (1 - F(z))` without forming `1 - F`.
pub fn upper_hazard(z: f64) -> f64 {
    if z < HAZARD_SPLIT {
        let sf = normal_sf(z);
        if sf >= 1.0 {
            // f underflows long before sf leaves 1
            return normal_pdf(z);
        }
        normal_pdf(z) / sf
    } else {
        // λ(z) = z + 1/(z + 2/(z + 3/(z + ...)))
        let mut t = z;
        for k in (1..=HAZARD_CF_TERMS).rev() {
            t = z + k as f64 / t;
        }
        t
    }
}

/// `log(1 - F(z))`, stable in both tails.
pub fn log_sf(z: f64) -> f64 {
    if z < 0.0 {
        (-normal_cdf(z)).ln_1p()
    } else if z < HAZARD_SPLIT {
        normal_sf(z).ln()
    } else {
        -0.5 * z * z - LN_SQRT_2PI - upper_hazard(z).ln()
    }
}

/// `log F(z)`.
pub fn log_cdf(z: f64) -> f64 {
    log_sf(-z)
}

pub fn normal_eval(z: f64) -> Result<NormalEval> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("normal_eval needs a finite argument, got {z}")));
    }
    let f = normal_pdf(z);
    let cdf = normal_cdf(z);
    let sf = normal_sf(z);
    let lambda = upper_hazard(z);
    let xi = upper_hazard(-z);
    let nu = if sf > 0.0 { lambda / sf } else { f64::INFINITY };
    Ok(NormalEval { z, f, cdf, sf, lambda, xi, nu })
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

/// Cholesky factor `M = L Lᵀ` of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    l: DMatrix<f64>,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let p = m.nrows();
        if m.ncols() != p {
            return Err(Error::Domain(format!("matrix is {}x{}, expected square", p, m.ncols())));
        }
        let scale = m.amax();
        for i in 0..p {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::Domain(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        let mut l = DMatrix::<f64>::zeros(p, p);
        for j in 0..p {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularInformation { pivot: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..p {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L v = b`.
    pub fn forward(&self, b: &DVector<f64>) -> DVector<f64> {
        let p = self.dim();
        let mut v = b.clone();
        for i in 0..p {
            let mut s = v[i];
            for k in 0..i {
                s -= self.l[(i, k)] * v[k];
            }
            v[i] = s / self.l[(i, i)];
        }
        v
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let p = self.dim();
        let mut x = self.forward(b);
        for i in (0..p).rev() {
            let mut s = x[i];
            for k in (i + 1)..p {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut inv = DMatrix::<f64>::zeros(p, p);
        for j in 0..p {
            let mut e = DVector::<f64>::zeros(p);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        // exact symmetry for downstream block assembly
        for i in 0..p {
            for j in 0..i {
                let a = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = a;
                inv[(j, i)] = a;
            }
        }
        inv
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Solves `M x = b` for symmetric positive-definite `M`.
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != m.nrows() {
        return Err(Error::Domain(format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            m.nrows()
        )));
    }
    Ok(SpdFactor::new(m)?.solve(b))
}

/// How small a singular value must be to count as zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RankTolerance {
    /// `max(m, p) * eps * sigma_max`.
    #[default]
    Default,
    /// `r * sigma_max`.
    Relative(f64),
    Absolute(f64),
}

#[derive(Debug, Clone)]
pub struct RankInfo {
    pub rank: usize,
    /// Orthonormal columns spanning the null space, `p x (p - rank)`.
    pub nullspace: DMatrix<f64>,
    /// Singular values in decreasing order.
    pub singular_values: Vec<f64>,
    pub tolerance: f64,
}

pub fn rank_nullspace(a: &DMatrix<f64>, policy: RankTolerance) -> Result<RankInfo> {
    let (m, p) = a.shape();
    if m == 0 || p == 0 {
        return Err(Error::Domain("rank of an empty matrix".into()));
    }
    // pad to at least p rows so the SVD returns a full p x p right factor
    let padded = if m < p {
        let mut b = DMatrix::<f64>::zeros(p, p);
        b.view_mut((0, 0), (m, p)).copy_from(a);
        b
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let tolerance = match policy {
        RankTolerance::Default => m.max(p) as f64 * f64::EPSILON * sigma_max,
        RankTolerance::Relative(r) => r * sigma_max,
        RankTolerance::Absolute(t) => t,
    };
    let rank = if sigma_max == 0.0 { 0 } else { sv.iter().filter(|&&s| s > tolerance).count() };
    let null_idx: Vec<usize> = order[rank..].to_vec();
    let mut nullspace = DMatrix::<f64>::zeros(p, null_idx.len());
    for (c, &i) in null_idx.iter().enumerate() {
        let mut v: DVector<f64> = v_t.row(i).transpose();
        let lead = v.iter().copied().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            v.neg_mut();
        }
        nullspace.set_column(c, &v);
    }
    Ok(RankInfo { rank, nullspace, singular_values: sv, tolerance })
}
