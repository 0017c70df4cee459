//! Sparse-dense products used by the multiplicative updates. `V` is sparse
//! (users × terms); the factors are dense with `k` columns/rows.

use ndarray::{Array2, ArrayView2};

use crate::corpus::CsrMatrix;

/// `V · Hᵀ`, shape `m × k`.
pub(crate) fn v_ht(v: &CsrMatrix, h: ArrayView2<f64>) -> Array2<f64> {
    let k = h.nrows();
    let mut out = Array2::zeros((v.n_rows(), k));
    for i in 0..v.n_rows() {
        for (j, x) in v.row(i).iter() {
            for r in 0..k {
                out[[i, r]] += x * h[[r, j]];
            }
        }
    }
    out
}

/// `Wᵀ · V`, shape `k × n`.
pub(crate) fn wt_v(w: ArrayView2<f64>, v: &CsrMatrix) -> Array2<f64> {
    let k = w.ncols();
    let mut out = Array2::zeros((k, v.n_cols()));
    for i in 0..v.n_rows() {
        for (j, x) in v.row(i).iter() {
            for r in 0..k {
                out[[r, j]] += x * w[[i, r]];
            }
        }
    }
    out
}

/// `‖V − W·H‖²_F` without materializing the dense reconstruction.
///
/// Stored entries contribute their residual directly; the implicit zeros
/// contribute `Σ (WH)²` over the unstored cells, obtained as the full
/// `tr(WᵀW · HHᵀ)` minus the stored cells' share.
pub(crate) fn squared_residual(v: &CsrMatrix, w: ArrayView2<f64>, h: ArrayView2<f64>) -> f64 {
    let k = w.ncols();
    let mut stored_residual = 0.0;
    let mut stored_recon = 0.0;
    for i in 0..v.n_rows() {
        for (j, x) in v.row(i).iter() {
            let mut r = 0.0;
            for t in 0..k {
                r += w[[i, t]] * h[[t, j]];
            }
            stored_residual += (x - r) * (x - r);
            stored_recon += r * r;
        }
    }
    let wtw = w.t().dot(&w);
    let hht = h.dot(&h.t());
    let total_recon: f64 = (&wtw * &hht).sum();
    stored_residual + (total_recon - stored_recon).max(0.0)
}
