//! Bias-reducing adjustment `A_t(θ) = tr[i(θ)⁻¹ {P_t(θ) + Q_t(θ)}] / 2` with
//! `P_t = E(s sᵀ s_t)` and `Q_t = -E(j s_t)`.
//!
//! Each block is a sum over observations of a scalar weight times a product of
//! regressor values; the weights are the closed-form expectations below.

use nalgebra::{DMatrix, DVector};

use super::{tobit_point_eval, InfoBlocks, TobitPointEval};
use crate::data::{Dataset, ParamVector};
use crate::error::Result;
use crate::kernel::{NormalEval, SpdFactor};

/// `P_t` and `Q_t` for `t = 1..=p+1`, the last index being φ.
#[derive(Debug, Clone)]
pub struct PqBlocks {
    pub p: Vec<InfoBlocks>,
    pub q: Vec<InfoBlocks>,
}

/// Third-order expectations for one observation. Names read as the
/// expectation of the product, e.g. `bb_sb` is `E(j_ββ s_β)` per unit of
/// `x xᵀ x_t`, and `sbsbsp` is `E(s_β s_βᵀ s_φ)` per unit of `x xᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ThirdOrder {
    pub bb_sb: f64,
    pub bp_sb: f64,
    pub pp_sb: f64,
    pub bb_sp: f64,
    pub bp_sp: f64,
    pub pp_sp: f64,
    pub sbsbsb: f64,
    pub sbsbsp: f64,
    pub sbspsb: f64,
    pub sbspsp: f64,
    pub spspsb: f64,
    pub spspsp: f64,
}

pub(crate) fn third_order(eta: f64, phi: f64, ne: &NormalEval) -> ThirdOrder {
    let NormalEval { f, cdf: big_f, lambda: l, .. } = *ne;
    let s = phi.sqrt();
    let e = eta;
    let e2 = e * e;
    let p2 = phi * phi;
    let p3 = p2 * phi;
    let p32 = phi * s;
    let p52 = p2 * s;
    let p72 = p3 * s;
    let p92 = p2 * p2 * s;
    let l2 = l * l;
    let le = l * e / s;

    ThirdOrder {
        bb_sb: -(f / p32) * (l2 - le - 1.0),
        bp_sb: l * f * (-e2 / phi + 1.0 + le) / (2.0 * p2) + (big_f - e * f / s) / p2,
        pp_sb: (l * f * e / (4.0 * s) * (e2 / phi - 3.0 - le) + f * e2 / phi + 1.5 * f) / p52,
        // f²/(1 - F) written as λf
        bb_sp: l * f * e / (2.0 * p52) * (l - e / s) - e * f / (2.0 * p52),
        bp_sp: l * f * e / (4.0 * p3) * (e2 / phi - 1.0 - le) + f / (2.0 * p52) * (1.0 + e2 / phi),
        pp_sp: l * e2 / (8.0 * p2 * p2) * (-e2 * f / phi + 3.0 * f + l * f * e / s) + big_f / p3
            - 3.0 * e * f / (4.0 * p72)
            - f * e2 * e / (2.0 * p92),
        sbsbsb: -l2 * f / p32 + f / p52 * (e2 + 2.0 * phi),
        sbsbsp: e * f / (2.0 * p52) * (l2 - 2.0 - e2 / phi) + big_f / p2,
        sbspsb: f * e / (2.0 * p52) * (l2 - 2.0) + big_f / p2 - f * e2 * e / (2.0 * p72),
        sbspsp: f * e2 / (2.0 * p72) * (1.0 - 0.5 * l2) + f / (4.0 * p52) * (5.0 + e2 * e2 / p2),
        spspsb: -f * e2 / (4.0 * p72) * (l2 - 2.0 - e2 / phi) + 5.0 * f / (4.0 * p52),
        spspsp: f * e2 * e / (8.0 * p92) * (l2 - 2.0 - e2 / phi) + big_f / p3 - 9.0 * f * e / (8.0 * p72),
    }
}

pub(crate) fn pq_from(pe: &TobitPointEval, data: &Dataset) -> PqBlocks {
    let p = data.p();
    let mut pb = vec![InfoBlocks::zeros(p); p + 1];
    let mut qb = vec![InfoBlocks::zeros(p); p + 1];
    for (i, row) in data.x().row_iter().enumerate() {
        let x: Vec<f64> = row.iter().copied().collect();
        let t3 = third_order(pe.eta[i], pe.phi, &pe.normal[i]);
        for t in 0..p {
            let xt = x[t];
            pb[t].accumulate(&x, t3.sbsbsb * xt, t3.sbspsb * xt, t3.spspsb * xt);
            qb[t].accumulate(&x, -t3.bb_sb * xt, -t3.bp_sb * xt, -t3.pp_sb * xt);
        }
        pb[p].accumulate(&x, t3.sbsbsp, t3.sbspsp, t3.spspsp);
        qb[p].accumulate(&x, -t3.bb_sp, -t3.bp_sp, -t3.pp_sp);
    }
    for b in pb.iter_mut().chain(qb.iter_mut()) {
        b.mirror();
    }
    PqBlocks { p: pb, q: qb }
}

pub fn tobit_pq_blocks(data: &Dataset, theta: &ParamVector) -> Result<PqBlocks> {
    let pe = tobit_point_eval(data, theta)?;
    Ok(pq_from(&pe, data))
}

fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

pub(crate) fn adjustment_from(pe: &TobitPointEval, data: &Dataset, info: &SpdFactor) -> DVector<f64> {
    let inv = info.inverse();
    let blocks = pq_from(pe, data);
    DVector::from_iterator(
        data.p() + 1,
        blocks.p.iter().zip(&blocks.q).map(|(pt, qt)| {
            let sum = pt.assemble() + qt.assemble();
            0.5 * trace_of_product(&inv, &sum)
        }),
    )
}

/// The adjustment vector `A(θ)`; fails if `i(θ)` is not positive definite.
pub fn tobit_adjustment(data: &Dataset, theta: &ParamVector) -> Result<DVector<f64>> {
    let pe = tobit_point_eval(data, theta)?;
    let info = super::expected_info_from(&pe, data).assemble();
    let factor = SpdFactor::new(&info)?;
    Ok(adjustment_from(&pe, data, &factor))
}
