//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use philaex::data::FeatureVector;
use philaex::models::{ModelError, ScoreModel};

/// Dense Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let m = a[r][col] / a[col][col];
            if m == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= m * a[col][c];
            }
            b[r] -= m * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Ridge with an unpenalized intercept, solved on the uncentred design
/// `[1 | X]`. Returns `(weights, intercept)`.
pub fn ridge_oracle(x: &[f64], rows: usize, cols: usize, y: &[f64], alpha: f64) -> (Vec<f64>, f64) {
    let n = cols + 1;
    let z = |r: usize, c: usize| if c == 0 { 1.0 } else { x[r * cols + c - 1] };
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for r in 0..rows {
        for i in 0..n {
            b[i] += z(r, i) * y[r];
            for j in 0..n {
                a[i][j] += z(r, i) * z(r, j);
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate().skip(1) {
        row[i] += alpha;
    }
    let sol = gauss_solve(a, b);
    (sol[1..].to_vec(), sol[0])
}

pub fn rel_err(a: &[f64], oracle: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(oracle).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let den: f64 = oracle.iter().map(|q| q * q).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn dense_score<M: ScoreModel + ?Sized>(f: &M, v: &[f64]) -> f64 {
    f.score(&FeatureVector::from_dense(v).unwrap()).unwrap()
}

/// Greedy core search written against dense vectors: every step scans all
/// coordinates, keeps the first strict minimum of `|f − 0.5|` and stops when
/// that minimum does not beat the current gap.
pub fn brute_force_core<M: ScoreModel + ?Sized>(f: &M, x: &[f64], max_core: usize) -> Vec<(usize, f64)> {
    let mut cur = vec![0.0; x.len()];
    let mut gap = (dense_score(f, &cur) - 0.5).abs();
    let mut out: Vec<(usize, f64)> = Vec::new();
    while out.len() < max_core {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..x.len() {
            if x[i] == 0.0 || out.iter().any(|&(j, _)| j == i) {
                continue;
            }
            let mut c = cur.clone();
            c[i] = x[i];
            let g = (dense_score(f, &c) - 0.5).abs();
            if best.is_none() || g < best.unwrap().1 {
                best = Some((i, g));
            }
        }
        match best {
            Some((i, g)) if g < gap => {
                cur[i] = x[i];
                gap = g;
                out.push((i, g));
            }
            _ => break,
        }
    }
    out
}

/// Enumerates every single addition to the core and applies the
/// positive-contribution condition.
pub fn brute_force_positive<M: ScoreModel + ?Sized>(f: &M, x: &[f64], core: &[usize], eps: f64) -> Vec<usize> {
    let mut base = vec![0.0; x.len()];
    for &i in core {
        base[i] = x[i];
    }
    let fc = dense_score(f, &base);
    let fx = dense_score(f, x);
    let mut dir = (fx - fc).signum();
    if fx == fc {
        dir = if fx > 0.5 { 1.0 } else if fx < 0.5 { -1.0 } else { 0.0 };
    }
    (0..x.len())
        .filter(|&i| x[i] != 0.0 && !core.contains(&i))
        .filter(|&i| {
            let mut c = base.clone();
            c[i] = x[i];
            (dense_score(f, &c) - fc) * dir > eps
        })
        .collect()
}

/// Smallest `|f − 0.5|` over every subset of the support (m ≤ 12).
pub fn best_subset_gap<M: ScoreModel + ?Sized>(f: &M, x: &[f64]) -> f64 {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << support.len()) {
        let mut v = vec![0.0; x.len()];
        for (b, &i) in support.iter().enumerate() {
            if mask >> b & 1 == 1 {
                v[i] = x[i];
            }
        }
        best = best.min((dense_score(f, &v) - 0.5).abs());
    }
    best
}

/// Non-additive scorer with pairwise interactions, for oracle checks beyond
/// monotone models.
pub struct PairwiseModel {
    pub w: Vec<f64>,
    pub pairs: Vec<(usize, usize, f64)>,
    pub bias: f64,
}

impl ScoreModel for PairwiseModel {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn score(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        self.check_dim(x)?;
        let mut z = self.bias + x.iter().map(|(i, v)| self.w[i] * v).sum::<f64>();
        for &(i, j, c) in &self.pairs {
            z += c * x.get(i) * x.get(j);
        }
        Ok(1.0 / (1.0 + (-z).exp()))
    }
}
