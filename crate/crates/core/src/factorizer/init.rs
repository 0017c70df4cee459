use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::CsrMatrix;

fn mean_entry(v: &CsrMatrix) -> f64 {
    let cells = (v.n_rows() * v.n_cols()) as f64;
    if cells == 0.0 {
        return 0.0;
    }
    v.entries().map(|(_, _, x)| x).sum::<f64>() / cells
}

/// Uniform draws in (0, 1] scaled by `sqrt(mean(V) / k)`. `W` is drawn
/// first (row-major), then `H`.
pub(crate) fn random_uniform(v: &CsrMatrix, k: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = mean_entry(v);
    let scale = if mean > 0.0 { (mean / k as f64).sqrt() } else { 1.0 };
    let mut draw = || scale * (1.0 - rng.random::<f64>());
    let w = Array2::from_shape_simple_fn((v.n_rows(), k), &mut draw);
    let h = Array2::from_shape_simple_fn((k, v.n_cols()), &mut draw);
    (w, h)
}

fn mat_vec(v: &CsrMatrix, x: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(v.n_rows());
    for i in 0..v.n_rows() {
        out[i] = v.row(i).iter().map(|(j, a)| a * x[j]).sum();
    }
    out
}

fn mat_t_vec(v: &CsrMatrix, y: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(v.n_cols());
    for (i, j, a) in v.entries() {
        out[j] += a * y[i];
    }
    out
}

/// Leading `k` right singular vectors (as rows) and singular values, by
/// subspace iteration on `VᵀV` with modified Gram-Schmidt.
fn leading_singular(v: &CsrMatrix, k: usize, iterations: usize) -> (Vec<Array1<f64>>, Vec<f64>) {
    let n = v.n_cols();
    let mut basis: Vec<Array1<f64>> = (0..k)
        .map(|r| Array1::from_shape_fn(n, |j| 1.0 + ((j * (r + 1) * 7919) % 101) as f64 / 101.0))
        .collect();
    for _ in 0..iterations {
        for r in 0..k {
            let mut next = mat_t_vec(v, &mat_vec(v, &basis[r]));
            for prev in &basis[..r] {
                let proj = next.dot(prev);
                next.scaled_add(-proj, prev);
            }
            let norm = next.dot(&next).sqrt();
            basis[r] = if norm > 0.0 { next / norm } else { Array1::zeros(n) };
        }
    }
    let sigmas = basis
        .iter()
        .map(|x| {
            let y = mat_vec(v, x);
            y.dot(&y).sqrt()
        })
        .collect();
    (basis, sigmas)
}

fn split_signs(x: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
    (x.mapv(|a| a.max(0.0)), x.mapv(|a| (-a).max(0.0)))
}

fn norm(x: &Array1<f64>) -> f64 {
    x.dot(x).sqrt()
}

/// Non-negative double SVD initialization. Exact zeros are replaced by the
/// mean entry of `V` so multiplicative updates can move them.
pub(crate) fn nndsvd(v: &CsrMatrix, k: usize) -> (Array2<f64>, Array2<f64>) {
    let (m, n) = (v.n_rows(), v.n_cols());
    let (right, sigmas) = leading_singular(v, k, 200);
    let mut w = Array2::zeros((m, k));
    let mut h = Array2::zeros((k, n));
    for r in 0..k {
        let sigma = sigmas[r];
        if sigma <= 0.0 {
            continue;
        }
        let vr = &right[r];
        let ur = mat_vec(v, vr) / sigma;
        if r == 0 {
            // leading pair of a non-negative matrix is sign-coherent
            let sign = if ur.sum() + vr.sum() < 0.0 { -1.0 } else { 1.0 };
            w.column_mut(0).assign(&ur.mapv(|a| (sign * a).max(0.0) * sigma.sqrt()));
            h.row_mut(0).assign(&vr.mapv(|a| (sign * a).max(0.0) * sigma.sqrt()));
            continue;
        }
        let (up, un) = split_signs(&ur);
        let (vp, vn) = split_signs(vr);
        let (nup, nun, nvp, nvn) = (norm(&up), norm(&un), norm(&vp), norm(&vn));
        let (pos, neg) = (nup * nvp, nun * nvn);
        let (u, x, nu, nx, mass) = if pos >= neg {
            (up, vp, nup, nvp, pos)
        } else {
            (un, vn, nun, nvn, neg)
        };
        if nu == 0.0 || nx == 0.0 {
            continue;
        }
        let scale = (sigma * mass).sqrt();
        w.column_mut(r).assign(&(u * (scale / nu)));
        h.row_mut(r).assign(&(x * (scale / nx)));
    }
    let fill = mean_entry(v).max(f64::MIN_POSITIVE);
    w.mapv_inplace(|a| if a == 0.0 { fill } else { a });
    h.mapv_inplace(|a| if a == 0.0 { fill } else { a });
    (w, h)
}
