//! Information estimates, confidence intervals and normal QQ data.

use nalgebra::SymmetricEigen;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::LocalGraph;
use crate::linalg::{self, Matrix};
use crate::model::ModelSpec;

/// Moment estimates of the per-subgraph Fisher information, built from the
/// spread of statistic slices across blocks and across block pairs.
#[derive(Clone, Debug)]
pub struct InfoEstimate {
    /// `K^-1 sum_k (s_kk - mean)(s_kk - mean)^T`.
    pub i_w_avg: Matrix,
    /// Same over the `K(K-1)/2` between subgraphs.
    pub i_b_avg: Matrix,
    pub k: usize,
    /// `K * i_w_avg`.
    pub full_w: Matrix,
    /// `K(K-1)/2 * i_b_avg`.
    pub full_b: Matrix,
}

fn spread(rows: &[Vec<f64>], dim: usize) -> Matrix {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut out = Matrix::zeros(dim, dim);
    for r in rows {
        for a in 0..dim {
            for b in 0..dim {
                out[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]) / n;
            }
        }
    }
    out
}

/// Assumes the within slices are identically distributed across blocks and
/// the between slices across pairs.
pub fn fisher_hat(g: &LocalGraph, spec: &ModelSpec) -> Result<InfoEstimate> {
    let part = spec.partition();
    let (p, q) = (spec.p(), spec.q());
    let mut w_rows = Vec::with_capacity(part.n_blocks());
    let mut b_rows = Vec::new();
    for r in part.subgraphs().filter(|r| r.is_within() || q > 0) {
        let s = spec.subgraph_statistics(g, r)?;
        let v: Vec<f64> = s.as_slice().iter().map(|&x| x as f64).collect();
        if r.is_within() {
            w_rows.push(v[..p].to_vec());
        } else {
            b_rows.push(v[p..].to_vec());
        }
    }
    fisher_hat_from_slices(&w_rows, &b_rows, part.n_blocks(), p, q)
}

/// The same estimator from per-subgraph statistic slices: `k` within rows
/// of length `p`, and either no between rows or `k(k-1)/2` of length `q`.
pub fn fisher_hat_from_slices(
    within: &[Vec<f64>],
    between: &[Vec<f64>],
    k: usize,
    p: usize,
    q: usize,
) -> Result<InfoEstimate> {
    if k < 2 {
        return Err(Error::Undefined("block moment estimates need at least two blocks".into()));
    }
    let pairs = k * (k - 1) / 2;
    if within.len() != k || !(between.is_empty() || between.len() == pairs) {
        return Err(Error::Dimension(format!(
            "{} within and {} between slices for {k} blocks",
            within.len(),
            between.len()
        )));
    }
    let i_w_avg = spread(within, p);
    let i_b_avg = if between.is_empty() { Matrix::zeros(q, q) } else { spread(between, q) };
    Ok(InfoEstimate { full_w: &i_w_avg * k as f64, full_b: &i_b_avg * pairs as f64, i_w_avg, i_b_avg, k })
}

/// Symmetric square root and inverse square root.
#[derive(Clone, Debug)]
pub struct MatrixRoots {
    pub sqrt: Matrix,
    pub inv_sqrt: Matrix,
}

/// Eigenvalues below `-1e-8` are rejected; the rest are floored at `1e-10`.
pub fn matrix_inv_sqrt(m: &Matrix) -> Result<MatrixRoots> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", n, m.ncols())));
    }
    let mut sym = m.clone();
    linalg::symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&v| v < -1e-8) {
        return Err(Error::NotPositiveSemidefinite(bad));
    }
    let mut sqrt = Matrix::zeros(n, n);
    let mut inv_sqrt = Matrix::zeros(n, n);
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let l = lam.max(1e-10);
        let v = eig.eigenvectors.column(j);
        let outer = v * v.transpose();
        sqrt += &outer * l.sqrt();
        inv_sqrt += outer / l.sqrt();
    }
    Ok(MatrixRoots { sqrt, inv_sqrt })
}

/// Standard normal quantile function.
pub fn normal_quantile(prob: f64) -> f64 {
    Normal::standard().inverse_cdf(prob)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WaldInterval {
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
}

impl WaldInterval {
    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Level `1 - alpha` Wald interval for coordinate `j`, with covariance
/// `S^-1`.
pub fn wald_ci(theta_hat: &[f64], info: &Matrix, j: usize, alpha: f64) -> Result<WaldInterval> {
    if j >= theta_hat.len() || info.nrows() != theta_hat.len() {
        return Err(Error::Dimension(format!("coordinate {j} of a {}-vector", theta_hat.len())));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Undefined(format!("alpha {alpha} outside (0, 1)")));
    }
    let eig = info.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v.abs())));
    if !(lo > 1e-12 * hi) {
        return Err(Error::Singular(j));
    }
    let inv = info.clone().try_inverse().ok_or(Error::Singular(j))?;
    let var = inv[(j, j)];
    if !var.is_finite() || var <= 0.0 {
        return Err(Error::Singular(j));
    }
    let se = var.sqrt();
    let z = normal_quantile(1.0 - alpha / 2.0);
    let est = theta_hat[j];
    Ok(WaldInterval { estimate: est, std_error: se, lower: est - z * se, upper: est + z * se })
}

/// Intervals for every coordinate.
pub fn wald_intervals(theta_hat: &[f64], info: &Matrix, alpha: f64) -> Result<Vec<WaldInterval>> {
    (0..theta_hat.len()).map(|j| wald_ci(theta_hat, info, j, alpha)).collect()
}

/// Sorted sample against `Phi^-1((i - 0.5) / n)`.
pub fn qq_points(sample: &[f64]) -> Vec<(f64, f64)> {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.into_iter().enumerate().map(|(i, v)| (normal_quantile((i as f64 + 0.5) / n), v)).collect()
}

/// Linear-interpolation quantile of a sample (type 7).
pub fn quantile(sample: &[f64], prob: f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    if s.is_empty() {
        return f64::NAN;
    }
    let h = (s.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}
