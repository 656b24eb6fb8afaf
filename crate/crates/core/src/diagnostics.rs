//! Interpretable quantities of the error bounds, evaluated at one parameter
//! value.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::BlockPartition;
use crate::linalg::{self, Matrix};

/// Block sizes, dimensions and extreme eigenvalues of the per-subgraph
/// information blocks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryQuantities {
    pub a_avg: f64,
    pub a_max: usize,
    pub k: usize,
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub lam_max_w_star: f64,
    pub lam_min_w_star: f64,
    pub lam_max_b_star: f64,
    pub lam_min_b_star: f64,
    /// A minimum eigenvalue was zero or negative and has been reported as 0.
    pub singular: bool,
}

fn extremes(m: &Matrix, scale: f64) -> (f64, f64, bool) {
    let ev = linalg::sorted_eigenvalues(m);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => {
            let lo = lo / scale;
            let hi = (hi / scale).max(0.0);
            if lo <= 1e-12 * hi.max(1.0) {
                (hi, 0.0, true)
            } else {
                (hi, lo, false)
            }
        }
        _ => (0.0, 0.0, false),
    }
}

/// `info_w` and `info_b` are full information blocks; they are averaged over
/// the `K` blocks and the `K(K-1)/2` block pairs.
pub fn theory_quantities(info_w: &Matrix, info_b: &Matrix, partition: &BlockPartition) -> TheoryQuantities {
    let k = partition.n_blocks();
    let pairs = (k * k.saturating_sub(1) / 2).max(1) as f64;
    let (lam_max_w_star, lam_min_w_star, sw) = extremes(info_w, k as f64);
    let (lam_max_b_star, lam_min_b_star, sb) = extremes(info_b, pairs);
    TheoryQuantities {
        a_avg: partition.a_avg(),
        a_max: partition.a_max(),
        k,
        n: partition.n_nodes(),
        p: info_w.nrows(),
        q: info_b.nrows(),
        lam_max_w_star,
        lam_min_w_star,
        lam_max_b_star,
        lam_min_b_star,
        singular: sw || sb,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRecord {
    pub c: f64,
    /// `c sqrt(A_avg) sqrt(lam_max_W) / lam_min_W sqrt(p / N)`.
    pub within: Option<f64>,
    /// `c A_avg sqrt(lam_max_B) / lam_min_B sqrt(q / N^2)`.
    pub between: Option<f64>,
    /// Largest block size the growth condition allows.
    pub a_max_ceiling: f64,
    pub a_max_ok: bool,
}

pub fn bound_expressions(tq: &TheoryQuantities, c: f64) -> Result<BoundRecord> {
    let n = tq.n as f64;
    let mut ceiling = f64::INFINITY;
    let within = if tq.p > 0 {
        if tq.lam_min_w_star <= 0.0 {
            return Err(Error::Undefined("within information has a zero eigenvalue".into()));
        }
        let p = tq.p as f64;
        ceiling = ceiling.min((n * tq.lam_max_w_star / (tq.a_avg * p * p)).powf(0.25));
        Some(c * tq.a_avg.sqrt() * tq.lam_max_w_star.sqrt() / tq.lam_min_w_star * (p / n).sqrt())
    } else {
        None
    };
    let between = if tq.q > 0 {
        if tq.lam_min_b_star <= 0.0 {
            return Err(Error::Undefined("between information has a zero eigenvalue".into()));
        }
        let q = tq.q as f64;
        ceiling = ceiling.min((n * n * tq.lam_max_b_star / (4.0 * tq.a_avg * tq.a_avg * q * q)).powf(0.25));
        Some(c * tq.a_avg * tq.lam_max_b_star.sqrt() / tq.lam_min_b_star * (q / (n * n)).sqrt())
    } else {
        None
    };
    Ok(BoundRecord { c, within, between, a_max_ceiling: ceiling, a_max_ok: tq.a_max as f64 <= ceiling })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictedError {
    pub c_hat_by_n: BTreeMap<usize, f64>,
    pub c_hat: f64,
    pub e_tilde_by_n: BTreeMap<usize, f64>,
}

/// Calibrates `C_N = Q_N / sqrt(p / N)`, averages over `N` and rescales.
pub fn predicted_error(q95_by_n: &BTreeMap<usize, f64>, p_by_n: &BTreeMap<usize, usize>) -> Result<PredictedError> {
    if q95_by_n.is_empty() {
        return Err(Error::Undefined("no error quantiles".into()));
    }
    if !q95_by_n.keys().eq(p_by_n.keys()) {
        return Err(Error::Dimension("quantile and dimension maps have different N values".into()));
    }
    let rate = |n: usize| (p_by_n[&n] as f64 / n as f64).sqrt();
    let c_hat_by_n: BTreeMap<usize, f64> = q95_by_n.iter().map(|(&n, &q)| (n, q / rate(n))).collect();
    let c_hat = c_hat_by_n.values().sum::<f64>() / c_hat_by_n.len() as f64;
    let e_tilde_by_n = p_by_n.keys().map(|&n| (n, c_hat * rate(n))).collect();
    Ok(PredictedError { c_hat_by_n, c_hat, e_tilde_by_n })
}
