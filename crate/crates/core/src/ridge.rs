//! Ridge regression via the centred normal equations.
//!
//! Minimizes `‖y − Xw − c‖² + α‖w‖²` (optionally with per-row weights). The
//! intercept `c` is not penalized: columns and targets are centred, the
//! system `(XcᵀXc + αI) w = Xcᵀyc` is solved by Cholesky factorization, and
//! `c = ȳ − x̄·w`.

use thiserror::Error;

/// Relative residual bound enforced on every solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum RidgeError {
    #[error("alpha must be finite and > 0, got {0}")]
    InvalidAlpha(f64),
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("design has {rows}x{cols} shape but {len} values")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not positive definite (pivot {0})")]
    NotPositiveDefinite(usize),
    #[error("linear system residual {0:e} exceeds tolerance")]
    Residual(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// `‖Gw − b‖ / ‖b‖` of the solved normal equations.
    pub system_residual: f64,
}

impl RidgeFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Unweighted ridge on a row-major `n_rows × n_cols` design.
pub fn ridge_fit(
    x: &[f64],
    n_rows: usize,
    n_cols: usize,
    y: &[f64],
    alpha: f64,
) -> Result<RidgeFit, RidgeError> {
    fit(x, n_rows, n_cols, y, None, alpha)
}

/// Ridge with non-negative per-row weights (weighted least squares).
pub fn weighted_ridge_fit(
    x: &[f64],
    n_rows: usize,
    n_cols: usize,
    y: &[f64],
    row_weights: &[f64],
    alpha: f64,
) -> Result<RidgeFit, RidgeError> {
    fit(x, n_rows, n_cols, y, Some(row_weights), alpha)
}

fn fit(
    x: &[f64],
    n_rows: usize,
    n_cols: usize,
    y: &[f64],
    row_weights: Option<&[f64]>,
    alpha: f64,
) -> Result<RidgeFit, RidgeError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(RidgeError::InvalidAlpha(alpha));
    }
    if n_rows < 2 {
        return Err(RidgeError::TooFewRows(n_rows));
    }
    if x.len() != n_rows * n_cols || y.len() != n_rows {
        return Err(RidgeError::Shape {
            rows: n_rows,
            cols: n_cols,
            len: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(RidgeError::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RidgeError::NonFinite("targets"));
    }
    let ones;
    let w = match row_weights {
        Some(w) => {
            if w.len() != n_rows {
                return Err(RidgeError::Shape {
                    rows: n_rows,
                    cols: 1,
                    len: w.len(),
                });
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(RidgeError::NonFinite("row weights"));
            }
            w
        }
        None => {
            ones = vec![1.0; n_rows];
            &ones[..]
        }
    };
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(RidgeError::NonFinite("row weights"));
    }

    let mut x_mean = vec![0.0; n_cols];
    let mut y_mean = 0.0;
    for (r, (&wr, &yr)) in w.iter().zip(y).enumerate() {
        let row = &x[r * n_cols..(r + 1) * n_cols];
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += wr * v;
        }
        y_mean += wr * yr;
    }
    x_mean.iter_mut().for_each(|m| *m /= total);
    y_mean /= total;

    let mut gram = vec![0.0; n_cols * n_cols];
    let mut rhs = vec![0.0; n_cols];
    let mut centred = vec![0.0; n_cols];
    for (r, (&wr, &yr)) in w.iter().zip(y).enumerate() {
        if wr == 0.0 {
            continue;
        }
        let row = &x[r * n_cols..(r + 1) * n_cols];
        for (c, (v, m)) in centred.iter_mut().zip(row.iter().zip(&x_mean)) {
            *c = v - m;
        }
        let yc = yr - y_mean;
        for i in 0..n_cols {
            let wi = wr * centred[i];
            rhs[i] += wi * yc;
            for j in 0..=i {
                gram[i * n_cols + j] += wi * centred[j];
            }
        }
    }
    for i in 0..n_cols {
        for j in 0..i {
            gram[j * n_cols + i] = gram[i * n_cols + j];
        }
        gram[i * n_cols + i] += alpha;
    }

    let (weights, system_residual) = solve_spd(&gram, n_cols, &rhs)?;
    let intercept = y_mean - x_mean.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>();
    Ok(RidgeFit {
        weights,
        intercept,
        system_residual,
    })
}

/// Solves the SPD system `a x = b` and returns `(x, relative residual)`.
///
/// Uses a Cholesky factorization followed by up to two rounds of iterative
/// refinement; fails if the residual stays above [`RESIDUAL_TOLERANCE`].
pub fn solve_spd(a: &[f64], n: usize, b: &[f64]) -> Result<(Vec<f64>, f64), RidgeError> {
    let l = cholesky(a, n)?;
    let mut x = cholesky_substitute(&l, n, b);
    let b_norm = norm(b);
    let mut rel = relative_residual(a, n, &x, b, b_norm);
    for _ in 0..2 {
        if rel <= RESIDUAL_TOLERANCE * 1e-3 {
            break;
        }
        let r: Vec<f64> = residual(a, n, &x, b);
        let dx = cholesky_substitute(&l, n, &r);
        x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
        rel = relative_residual(a, n, &x, b, b_norm);
    }
    if !(rel <= RESIDUAL_TOLERANCE) {
        return Err(RidgeError::Residual(rel));
    }
    Ok((x, rel))
}

/// Lower-triangular `L` with `a = L Lᵀ` (row-major, upper part zero).
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>, RidgeError> {
    if a.len() != n * n {
        return Err(RidgeError::Shape {
            rows: n,
            cols: n,
            len: a.len(),
        });
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return Err(RidgeError::NotPositiveDefinite(i));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

fn cholesky_substitute(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

fn residual(a: &[f64], n: usize, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| b[i] - (0..n).map(|j| a[i * n + j] * x[j]).sum::<f64>())
        .collect()
}

fn relative_residual(a: &[f64], n: usize, x: &[f64], b: &[f64], b_norm: f64) -> f64 {
    let r = norm(&residual(a, n, x, b));
    if b_norm == 0.0 {
        r
    } else {
        r / b_norm
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
