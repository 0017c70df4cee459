//! Topic-supervised non-negative matrix factorization.
//!
//! Minimizes `‖V − (W∘L)H‖²_F` over `W, H ≥ 0`, where `L` is the binary
//! supervision mask and `∘` the element-wise product. Updates are the
//! masked Lee-Seung multiplicative rules:
//!
//! ```text
//! W ← L ∘ W ∘ (V Hᵀ) ⊘ ((W∘L) H Hᵀ + ε)
//! H ← H ∘ ((W∘L)ᵀ V) ⊘ ((W∘L)ᵀ (W∘L) H + ε)
//! ```
//!
//! `W` is projected onto the mask at initialization and after every
//! update, so `W∘L = W` throughout and masked entries stay exactly zero.
//! After convergence the factors are rescaled by [`normalize_model`] so
//! each topic's term row sums to one and user associations lie in [0, 1].

mod init;
mod products;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::corpus::{CsrMatrix, DocumentTermMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::seeding::SupervisionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    RandomUniform,
    Nndsvd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorizationConfig {
    pub k: usize,
    pub max_iterations: usize,
    pub relative_tolerance: f64,
    /// Division guard added to every update denominator.
    pub epsilon: f64,
    pub rng_seed: u64,
    pub init: Init,
}

impl Default for FactorizationConfig {
    fn default() -> Self {
        FactorizationConfig {
            k: 2,
            max_iterations: 500,
            relative_tolerance: 1e-5,
            epsilon: 1e-12,
            rng_seed: 0,
            init: Init::RandomUniform,
        }
    }
}

impl FactorizationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.relative_tolerance > 0.0) {
            return bad("relative_tolerance must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// Raw solver output, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    /// `W∘L`, users × k.
    pub w: Array2<f64>,
    /// `H`, k × terms.
    pub h: Array2<f64>,
    /// Objective before the first update, then after each iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_run: usize,
}

/// `‖V − (U∘L)T‖²_F`.
pub fn objective(
    v: &CsrMatrix,
    u: ArrayView2<f64>,
    t: ArrayView2<f64>,
    mask: ArrayView2<f64>,
) -> Result<f64> {
    check_dims(v, u, t, mask)?;
    let masked = &u * &mask;
    Ok(products::squared_residual(v, masked.view(), t))
}

fn check_dims(
    v: &CsrMatrix,
    u: ArrayView2<f64>,
    t: ArrayView2<f64>,
    mask: ArrayView2<f64>,
) -> Result<()> {
    let k = u.ncols();
    if u.nrows() != v.n_rows() || t.ncols() != v.n_cols() || t.nrows() != k || mask.dim() != u.dim()
    {
        return Err(Error::DimensionMismatch(format!(
            "V {}x{}, U {}x{}, T {}x{}, L {}x{}",
            v.n_rows(),
            v.n_cols(),
            u.nrows(),
            u.ncols(),
            t.nrows(),
            t.ncols(),
            mask.nrows(),
            mask.ncols()
        )));
    }
    Ok(())
}

fn check_inputs(v: &CsrMatrix, mask: ArrayView2<f64>, k: usize) -> Result<()> {
    if v.n_rows() < k || v.n_cols() < k {
        return Err(Error::DimensionMismatch(format!(
            "V is {}x{}, need at least {k} rows and columns",
            v.n_rows(),
            v.n_cols()
        )));
    }
    if mask.dim() != (v.n_rows(), k) {
        return Err(Error::DimensionMismatch(format!(
            "mask is {}x{}, expected {}x{k}",
            mask.nrows(),
            mask.ncols(),
            v.n_rows()
        )));
    }
    if let Some((row, col, value)) = v.entries().find(|&(_, _, x)| !(x >= 0.0)) {
        return Err(Error::NonNegativityViolation { row, col, value });
    }
    for (i, row) in mask.rows().into_iter().enumerate() {
        if row.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::InvalidConfig(format!("mask row {i} is not binary")));
        }
        if row.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidConfig(format!("mask row {i} is all zero")));
        }
    }
    Ok(())
}

/// Runs the masked multiplicative updates from the configured
/// initialization.
pub fn factorize(
    v: &CsrMatrix,
    mask: ArrayView2<f64>,
    config: &FactorizationConfig,
) -> Result<Factorization> {
    config.validate()?;
    check_inputs(v, mask, config.k)?;
    let (w, h) = match config.init {
        Init::RandomUniform => init::random_uniform(v, config.k, config.rng_seed),
        Init::Nndsvd => init::nndsvd(v, config.k),
    };
    factorize_from(v, mask, config, w, h, |_, _, _| {})
}

/// Runs the updates from explicit starting factors. `observe` is called
/// after every iteration with the iteration number (1-based) and the
/// current `W∘L` and `H`.
pub fn factorize_from<F>(
    v: &CsrMatrix,
    mask: ArrayView2<f64>,
    config: &FactorizationConfig,
    w0: Array2<f64>,
    h0: Array2<f64>,
    mut observe: F,
) -> Result<Factorization>
where
    F: FnMut(usize, &Array2<f64>, &Array2<f64>),
{
    config.validate()?;
    let k = w0.ncols();
    check_inputs(v, mask, k)?;
    check_dims(v, w0.view(), h0.view(), mask)?;
    if w0.iter().chain(h0.iter()).any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidConfig("initial factors must be non-negative".into()));
    }

    let eps = config.epsilon;
    let mut w = w0;
    apply_mask(&mut w, mask);
    let mut h = h0;

    let mut trace = Vec::with_capacity(config.max_iterations + 1);
    trace.push(products::squared_residual(v, w.view(), h.view()));
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;

        let numer = products::v_ht(v, h.view());
        let denom = w.dot(&h.dot(&h.t()));
        ndarray::Zip::from(&mut w)
            .and(&numer)
            .and(&denom)
            .and(mask)
            .for_each(|x, &n, &d, &l| {
                *x = if l == 0.0 { 0.0 } else { *x * n / (d + eps) };
            });

        let numer = products::wt_v(w.view(), v);
        let denom = w.t().dot(&w).dot(&h);
        ndarray::Zip::from(&mut h)
            .and(&numer)
            .and(&denom)
            .for_each(|x, &n, &d| *x *= n / (d + eps));

        let current = products::squared_residual(v, w.view(), h.view());
        let previous = *trace.last().expect("trace starts non-empty");
        trace.push(current);
        observe(iterations, &w, &h);

        if current == 0.0 || (previous - current).abs() < config.relative_tolerance * previous {
            converged = true;
            break;
        }
    }

    Ok(Factorization {
        w,
        h,
        objective_trace: trace,
        converged,
        iterations_run: iterations,
    })
}

fn apply_mask(w: &mut Array2<f64>, mask: ArrayView2<f64>) {
    ndarray::Zip::from(w).and(mask).for_each(|x, &l| {
        if l == 0.0 {
            *x = 0.0;
        }
    });
}

/// Fitted and normalized model: `U` (users × k) holds user-attitude
/// associations, `T` (k × terms) term-attitude associations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelRepr", into = "ModelRepr")]
pub struct FactorModel {
    pub rows: Vec<String>,
    pub vocabulary: Vocabulary,
    pub user_factors: Array2<f64>,
    pub term_factors: Array2<f64>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_run: usize,
    /// Global divisor applied to `U` by normalization (1 when no clip).
    pub clip_factor: f64,
    pub config: FactorizationConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    rows: Vec<String>,
    vocabulary: Vocabulary,
    user_factors: Vec<Vec<f64>>,
    term_factors: Vec<Vec<f64>>,
    objective_trace: Vec<f64>,
    converged: bool,
    iterations_run: usize,
    clip_factor: f64,
    config: FactorizationConfig,
}

fn to_nested(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_nested(rows: Vec<Vec<f64>>, ncols: usize) -> Array2<f64> {
    let nrows = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((nrows, ncols), flat).expect("ragged factor matrix in model JSON")
}

impl From<FactorModel> for ModelRepr {
    fn from(m: FactorModel) -> Self {
        ModelRepr {
            user_factors: to_nested(&m.user_factors),
            term_factors: to_nested(&m.term_factors),
            rows: m.rows,
            vocabulary: m.vocabulary,
            objective_trace: m.objective_trace,
            converged: m.converged,
            iterations_run: m.iterations_run,
            clip_factor: m.clip_factor,
            config: m.config,
        }
    }
}

impl From<ModelRepr> for FactorModel {
    fn from(r: ModelRepr) -> Self {
        let k = r.config.k;
        let n = r.vocabulary.len();
        FactorModel {
            user_factors: from_nested(r.user_factors, k),
            term_factors: from_nested(r.term_factors, n),
            rows: r.rows,
            vocabulary: r.vocabulary,
            objective_trace: r.objective_trace,
            converged: r.converged,
            iterations_run: r.iterations_run,
            clip_factor: r.clip_factor,
            config: r.config,
        }
    }
}

impl FactorModel {
    pub fn k(&self) -> usize {
        self.user_factors.ncols()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: FactorModel = serde_json::from_reader(BufReader::new(file))?;
        if model.user_factors.nrows() != model.rows.len() {
            return Err(Error::DimensionMismatch(format!(
                "model has {} rows but {} user factor rows",
                model.rows.len(),
                model.user_factors.nrows()
            )));
        }
        Ok(model)
    }

    pub fn user_index(&self, user: &str) -> Option<usize> {
        self.rows.binary_search_by(|r| r.as_str().cmp(user)).ok()
    }
}

/// Rescales each topic's term row to unit L1 norm, moving the scale into
/// the matching user column, then divides `U` by `max(1, max U)` so every
/// association lies in [0, 1]. The reconstruction `(U∘L)T` changes only by
/// that final divisor, which is stored in `clip_factor` (accumulated
/// multiplicatively if the model had been clipped before).
pub fn normalize_model(mut model: FactorModel) -> Result<FactorModel> {
    let sums = model.term_factors.sum_axis(Axis(1));
    if let Some(topic) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateTopic(topic));
    }
    for (r, &s) in sums.iter().enumerate() {
        model.term_factors.row_mut(r).mapv_inplace(|x| x / s);
        model.user_factors.column_mut(r).mapv_inplace(|x| x * s);
    }
    let peak = model.user_factors.iter().copied().fold(0.0, f64::max);
    let clip = peak.max(1.0);
    if clip > 1.0 {
        model.user_factors.mapv_inplace(|x| x / clip);
    }
    model.clip_factor *= clip;
    Ok(model)
}

/// Factorizes the document-term matrix under the supervision mask and
/// normalizes the result.
pub fn fit(
    matrix: &DocumentTermMatrix,
    supervision: &SupervisionMatrix,
    config: &FactorizationConfig,
) -> Result<FactorModel> {
    if supervision.len() != matrix.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "supervision has {} rows, matrix has {}",
            supervision.len(),
            matrix.n_rows()
        )));
    }
    let raw = factorize(&matrix.values, supervision.mask().view(), config)?;
    normalize_model(FactorModel {
        rows: matrix.rows.clone(),
        vocabulary: matrix.vocabulary.clone(),
        user_factors: raw.w,
        term_factors: raw.h,
        objective_trace: raw.objective_trace,
        converged: raw.converged,
        iterations_run: raw.iterations_run,
        clip_factor: 1.0,
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn dense_objective(v: &Array2<f64>, u: &Array2<f64>, t: &Array2<f64>, l: &Array2<f64>) -> f64 {
        let mut total = 0.0;
        for i in 0..v.nrows() {
            for j in 0..v.ncols() {
                let mut r = 0.0;
                for a in 0..u.ncols() {
                    r += u[[i, a]] * l[[i, a]] * t[[a, j]];
                }
                total += (v[[i, j]] - r).powi(2);
            }
        }
        total
    }

    #[test]
    fn objective_exact_factorization_is_zero() {
        let u = array![[1.0, 0.0], [0.5, 2.0], [0.0, 1.0]];
        let t = array![[1.0, 2.0, 0.0], [0.0, 1.0, 3.0]];
        let l = array![[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let v = CsrMatrix::from_dense(&(&u * &l).dot(&t));
        let obj = objective(&v, u.view(), t.view(), l.view()).unwrap();
        assert!(obj.abs() < 1e-24);
    }

    #[test]
    fn objective_zero_user_factors() {
        let dense = array![[1.0, 2.0], [0.0, 3.0]];
        let v = CsrMatrix::from_dense(&dense);
        let u = Array2::zeros((2, 2));
        let t = array![[1.0, 1.0], [1.0, 1.0]];
        let l = Array2::ones((2, 2));
        assert_eq!(objective(&v, u.view(), t.view(), l.view()).unwrap(), 14.0);
    }

    #[test]
    fn objective_matches_loop() {
        let v = array![
            [0.1, 0.0, 0.7, 0.2],
            [0.0, 0.0, 0.0, 0.0],
            [0.3, 0.9, 0.0, 0.4],
            [0.5, 0.5, 0.5, 0.5],
            [0.0, 0.2, 0.0, 0.8],
            [0.6, 0.0, 0.1, 0.0]
        ];
        let u = array![[0.2, 0.9], [0.4, 0.1], [0.7, 0.3], [0.05, 0.6], [0.8, 0.8], [0.3, 0.0]];
        let t = array![[0.5, 0.1, 0.9, 0.3], [0.2, 0.7, 0.4, 0.6]];
        let l = array![[1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let got = objective(&CsrMatrix::from_dense(&v), u.view(), t.view(), l.view()).unwrap();
        assert!((got - dense_objective(&v, &u, &t, &l)).abs() < 1e-10);
    }

    #[test]
    fn objective_dimension_mismatch() {
        let v = CsrMatrix::from_dense(&array![[1.0, 2.0]]);
        let u = Array2::zeros((2, 2));
        let t = Array2::zeros((2, 2));
        let l = Array2::ones((2, 2));
        assert!(matches!(
            objective(&v, u.view(), t.view(), l.view()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn negative_input_rejected() {
        let v = CsrMatrix::from_dense(&array![[1.0, -2.0], [0.5, 1.0]]);
        let l = Array2::ones((2, 2));
        assert!(matches!(
            factorize(&v, l.view(), &FactorizationConfig::default()),
            Err(Error::NonNegativityViolation { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn bad_masks_rejected() {
        let v = CsrMatrix::from_dense(&array![[1.0, 2.0], [0.5, 1.0]]);
        let zero_row = array![[1.0, 1.0], [0.0, 0.0]];
        assert!(factorize(&v, zero_row.view(), &FactorizationConfig::default()).is_err());
        let wrong_shape = Array2::ones((3, 2));
        assert!(matches!(
            factorize(&v, wrong_shape.view(), &FactorizationConfig::default()),
            Err(Error::DimensionMismatch(_))
        ));
        let too_small = CsrMatrix::from_dense(&array![[1.0, 2.0]]);
        assert!(matches!(
            factorize(&too_small, Array2::ones((1, 2)).view(), &FactorizationConfig::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = FactorizationConfig::default();
        assert!(c.validate().is_ok());
        c.k = 0;
        assert!(c.validate().is_err());
        let c = FactorizationConfig { epsilon: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = FactorizationConfig { relative_tolerance: -1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = FactorizationConfig { max_iterations: 0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    fn toy_model(u: Array2<f64>, t: Array2<f64>) -> FactorModel {
        let n = t.ncols();
        FactorModel {
            rows: (0..u.nrows()).map(|i| format!("u{i}")).collect(),
            vocabulary: Vocabulary::new((0..n).map(|j| format!("t{j}")).collect(), vec![1; n]),
            user_factors: u,
            term_factors: t,
            objective_trace: vec![],
            converged: true,
            iterations_run: 0,
            clip_factor: 1.0,
            config: FactorizationConfig::default(),
        }
    }

    #[test]
    fn normalize_fixed_point() {
        let m = toy_model(array![[0.2, 0.5], [1.0, 0.0]], array![[0.25, 0.75], [0.5, 0.5]]);
        let n = normalize_model(m.clone()).unwrap();
        assert_eq!(n, m);
    }

    #[test]
    fn normalize_scale_invariance() {
        let m = toy_model(array![[0.2, 0.5], [1.3, 0.1]], array![[0.1, 0.3], [0.5, 0.2]]);
        let mut scaled = m.clone();
        scaled.term_factors.row_mut(0).mapv_inplace(|x| x * 10.0);
        scaled.user_factors.column_mut(0).mapv_inplace(|x| x / 10.0);
        let a = normalize_model(m).unwrap();
        let b = normalize_model(scaled).unwrap();
        for (x, y) in a.user_factors.iter().zip(b.user_factors.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in a.term_factors.iter().zip(b.term_factors.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.clip_factor - b.clip_factor).abs() < 1e-12);
    }

    #[test]
    fn degenerate_topic() {
        let m = toy_model(array![[0.2, 0.5]], array![[0.0, 0.0], [0.5, 0.2]]);
        assert!(matches!(normalize_model(m), Err(Error::DegenerateTopic(0))));
    }

    #[test]
    fn model_json_round_trip() {
        let m = toy_model(array![[0.2, 0.5], [1.0, 0.0]], array![[0.25, 0.75], [0.5, 0.5]]);
        let json = serde_json::to_string(&m).unwrap();
        let back: FactorModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
