//! Monte-Carlo maximum likelihood.
//!
//! The log-likelihood ratio `l(theta) - l(theta0)` is approximated with
//! statistics sampled at `theta0`:
//!
//! ```text
//! <theta - theta0, s(x)> - log mean_i exp<theta - theta0, s(x_i)>
//! ```
//!
//! and maximized by Newton steps whose curvature is the importance-weighted
//! covariance of the sampled statistics. The within and between parameters
//! are fitted by separate loops. Inside a loop, subgraphs whose statistic
//! slices share a law (same size, same term layout up to node relabeling)
//! share one chain: the normalizer of the whole side is then a weighted sum
//! of per-class log-mean-exps.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LocalGraph, SubgraphRef};
use crate::linalg::{self, Matrix};
use crate::model::{ModelSpec, ParamVector, StatisticTerm, SubgraphTerms};
use crate::sampler::{run_chain, McmcConfig, StatSample, SubgraphChain};
use crate::{par, rng};

fn check_dims(theta: &[f64], theta0: &[f64], sample: &StatSample) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if theta.len() != sample.dim() || theta0.len() != sample.dim() {
        return Err(Error::Dimension(format!(
            "sample has dimension {}, parameters have {} and {}",
            sample.dim(),
            theta.len(),
            theta0.len()
        )));
    }
    Ok(())
}

fn log_terms(theta: &[f64], theta0: &[f64], sample: &StatSample) -> Vec<f64> {
    let diff: Vec<f64> = theta.iter().zip(theta0).map(|(a, b)| a - b).collect();
    sample.rows().map(|row| diff.iter().zip(row).map(|(d, &s)| d * s as f64).sum()).collect()
}

/// Self-normalized weights `w_i(theta)`, computed with a max shift.
pub fn importance_weights(theta: &[f64], theta0: &[f64], sample: &StatSample) -> Result<Vec<f64>> {
    check_dims(theta, theta0, sample)?;
    let eta = log_terms(theta, theta0, sample);
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// `log mean_i exp<theta - theta0, s(x_i)>`, the estimate of
/// `psi(theta) - psi(theta0)`.
pub fn log_mean_exp_ratio(theta: &[f64], theta0: &[f64], sample: &StatSample) -> Result<f64> {
    check_dims(theta, theta0, sample)?;
    let eta = log_terms(theta, theta0, sample);
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = eta.iter().map(|e| (e - shift).exp()).sum();
    Ok(shift + (sum / eta.len() as f64).ln())
}

/// `(1 / sum w_i^2)` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Weighted mean and covariance of the sample rows.
pub fn weighted_moments(weights: &[f64], sample: &StatSample) -> (Vec<f64>, Matrix) {
    let d = sample.dim();
    let mut mean = vec![0.0; d];
    for (w, row) in weights.iter().zip(sample.rows()) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += w * v as f64;
        }
    }
    let mut cov = Matrix::zeros(d, d);
    for (w, row) in weights.iter().zip(sample.rows()) {
        if *w == 0.0 {
            continue;
        }
        for a in 0..d {
            let da = row[a] as f64 - mean[a];
            for b in a..d {
                cov[(a, b)] += w * da * (row[b] as f64 - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    (mean, cov)
}

/// Variance of each coordinate's sample mean by non-overlapping batch
/// means, with about `sqrt(n)` batches.
pub fn batch_means_variance(sample: &StatSample) -> Vec<f64> {
    let (n, d) = (sample.len(), sample.dim());
    let batches = (n as f64).sqrt().floor() as usize;
    if batches < 2 {
        return vec![0.0; d];
    }
    let m = n / batches;
    let means: Vec<Vec<f64>> = (0..batches)
        .map(|b| {
            let mut acc = vec![0.0; d];
            for i in b * m..(b + 1) * m {
                for (a, &v) in acc.iter_mut().zip(sample.row(i)) {
                    *a += v as f64;
                }
            }
            acc.iter().map(|a| a / m as f64).collect()
        })
        .collect();
    (0..d)
        .map(|j| {
            let grand = means.iter().map(|b| b[j]).sum::<f64>() / batches as f64;
            let ss: f64 = means.iter().map(|b| (b[j] - grand).powi(2)).sum();
            // batch variance estimates Var(mean of m draws); scale to n draws
            ss / (batches - 1) as f64 * m as f64 / (batches * m) as f64
        })
        .collect()
}

/// `s(x) - sum_i w_i(theta) s(x_i)`.
pub fn is_gradient(theta: &[f64], theta0: &[f64], observed: &[f64], sample: &StatSample) -> Result<Vec<f64>> {
    if observed.len() != sample.dim() {
        return Err(Error::Dimension("observed statistics and sample differ in length".into()));
    }
    let w = importance_weights(theta, theta0, sample)?;
    let (mean, _) = weighted_moments(&w, sample);
    Ok(observed.iter().zip(&mean).map(|(s, m)| s - m).collect())
}

#[derive(Clone, Debug)]
pub struct IsInformation {
    pub matrix: Matrix,
    /// False when the sample cannot support a covariance estimate (a single
    /// draw).
    pub usable: bool,
    pub ess: f64,
}

/// Importance-weighted covariance of the sampled statistics.
pub fn is_information(theta: &[f64], theta0: &[f64], sample: &StatSample) -> Result<IsInformation> {
    let w = importance_weights(theta, theta0, sample)?;
    let (_, matrix) = weighted_moments(&w, sample);
    Ok(IsInformation { matrix, usable: sample.len() > 1, ess: effective_sample_size(&w) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStatus {
    Converged,
    Nonexistence,
    MaxIter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Retained draws per subgraph class and outer iteration.
    pub n_mcmc: usize,
    pub burnin_multiplier: f64,
    pub interval_multiplier: f64,
    /// Re-sample once `ESS / n_mcmc` would fall below this.
    pub ess_threshold: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Gradient tolerance relative to the statistic standard deviation.
    pub tol: f64,
    /// Gradient entries within this many Monte-Carlo standard errors also
    /// count as converged.
    pub mcse_multiplier: f64,
    /// Parameter magnitude treated as divergence toward the boundary.
    pub divergence: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_mcmc: 20_000,
            burnin_multiplier: 10.0,
            interval_multiplier: 1.0,
            ess_threshold: 0.1,
            max_outer: 50,
            max_inner: 50,
            tol: 1e-3,
            mcse_multiplier: 3.0,
            divergence: 30.0,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.mcmc().validate()?;
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return Err(Error::config("fit.ess_threshold", "must lie in (0, 1]"));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::config("fit", "iteration limits must be positive"));
        }
        Ok(())
    }

    fn mcmc(&self) -> McmcConfig {
        McmcConfig {
            burnin_multiplier: self.burnin_multiplier,
            interval_multiplier: self.interval_multiplier,
            n_samples: self.n_mcmc,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PartFit {
    pub theta: Vec<f64>,
    /// Importance-weighted statistic covariance of the side at `theta`.
    pub info: Matrix,
    pub status: FitStatus,
    pub outer_iterations: usize,
    pub ess_trace: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub theta_hat: ParamVector,
    pub info_w: Matrix,
    pub info_b: Matrix,
    pub n_mcmc: usize,
    pub ess_trace: Vec<f64>,
    pub status: FitStatus,
    pub within: Option<PartFit>,
    pub between: Option<PartFit>,
    pub seed: u64,
}

impl FitResult {
    /// Standard errors from the inverse of each information block, within
    /// then between.
    pub fn standard_errors(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for m in [&self.info_w, &self.info_b] {
            for j in 0..m.nrows() {
                let mut e = vec![0.0; m.nrows()];
                e[j] = 1.0;
                let x = linalg::solve_regularized(m, &e);
                out.push(x[j].max(0.0).sqrt());
            }
        }
        out
    }
}

struct LawClass {
    rep: SubgraphRef,
    terms: SubgraphTerms,
    count: usize,
}

fn law_classes(spec: &ModelSpec, within: bool) -> Result<Vec<LawClass>> {
    let mut classes: Vec<LawClass> = Vec::new();
    let mut index: HashMap<SubgraphTerms, usize> = HashMap::new();
    for r in spec.partition().subgraphs().filter(|r| r.is_within() == within) {
        let terms = spec.subgraph_terms(r)?;
        if terms.is_inert() || terms.n_vars() == 0 {
            continue;
        }
        match index.get(&terms.law_key()) {
            Some(&i) => classes[i].count += 1,
            None => {
                index.insert(terms.law_key(), classes.len());
                classes.push(LawClass { rep: r, terms, count: 1 });
            }
        }
    }
    Ok(classes)
}

fn logit(d: f64) -> f64 {
    (d / (1.0 - d)).ln()
}

/// Independent-edge moment match for edge-type terms, zero for dependence
/// terms.
pub fn initial_theta(g: &LocalGraph, spec: &ModelSpec, within: bool) -> Vec<f64> {
    let p = spec.partition();
    let pairs = |k: usize| {
        let a = p.block_size(k);
        a * a.saturating_sub(1) / 2
    };
    let clamp = |num: f64, den: f64| {
        if den <= 0.0 {
            return 0.5;
        }
        let lo = 0.5 / den;
        (num / den).clamp(lo, 1.0 - lo)
    };
    let terms = if within { spec.within_terms() } else { spec.between_terms() };
    terms
        .iter()
        .map(|t| match *t {
            StatisticTerm::WithinEdgesTotal => {
                let e: u64 = (0..p.n_blocks()).map(|k| g.within(k).edge_count()).sum();
                let d: usize = (0..p.n_blocks()).map(pairs).sum();
                logit(clamp(e as f64, d as f64))
            }
            StatisticTerm::WithinEdgesPerBlock(k) => logit(clamp(g.within(k).edge_count() as f64, pairs(k) as f64)),
            StatisticTerm::WithinEdgesByNodeGroup(m) => {
                let mut ends = 0u64;
                let mut slots = 0usize;
                for i in 0..p.n_nodes() {
                    if p.node_group(i) == Some(m) {
                        let k = p.block_of(i);
                        let r = p.rank_of(i);
                        let st = g.within(k);
                        ends += (0..st.size()).filter(|&h| st.has(r, h)).count() as u64;
                        slots += st.size() - 1;
                    }
                }
                0.5 * logit(clamp(ends as f64, slots as f64))
            }
            StatisticTerm::BetweenEdgesTotal => {
                let mut e = 0u64;
                let mut d = 0usize;
                for k in 0..p.n_blocks() {
                    for l in k + 1..p.n_blocks() {
                        e += g.between(k, l).edge_count();
                        d += p.block_size(k) * p.block_size(l);
                    }
                }
                logit(clamp(e as f64, d as f64))
            }
            StatisticTerm::BetweenEdgesPerPair(k, l) => {
                logit(clamp(g.between(k, l).edge_count() as f64, (p.block_size(k) * p.block_size(l)) as f64))
            }
            StatisticTerm::WithinTransitiveEdgesTotal | StatisticTerm::WithinTransitiveEdgesByBlockGroup(_) => 0.0,
        })
        .collect()
}

/// Weighted per-class moments of one side at `theta`.
struct SideMoments {
    mean: Vec<f64>,
    cov: Matrix,
    /// Smallest class ESS.
    ess: f64,
    /// `sum_c n_c * logmeanexp_c`.
    log_ratio: f64,
}

fn side_moments(classes: &[LawClass], samples: &[StatSample], theta: &[f64], theta0: &[f64]) -> Result<SideMoments> {
    let d = theta.len();
    let mut mean = vec![0.0; d];
    let mut cov = Matrix::zeros(d, d);
    let mut ess = f64::INFINITY;
    let mut log_ratio = 0.0;
    for (c, s) in classes.iter().zip(samples) {
        let w = importance_weights(theta, theta0, s)?;
        let (m, v) = weighted_moments(&w, s);
        let n = c.count as f64;
        for a in 0..d {
            mean[a] += n * m[a];
        }
        cov += v * n;
        ess = ess.min(effective_sample_size(&w));
        log_ratio += n * log_mean_exp_ratio(theta, theta0, s)?;
    }
    Ok(SideMoments { mean, cov, ess, log_ratio })
}

fn objective(observed: &[f64], theta: &[f64], theta0: &[f64], log_ratio: f64) -> f64 {
    observed.iter().zip(theta.iter().zip(theta0)).map(|(s, (a, b))| s * (a - b)).sum::<f64>() - log_ratio
}

/// Newton ascent on the importance-sampled objective from `theta0`.
/// Returns the new point and whether it stopped because of weight
/// degeneracy rather than convergence.
fn inner_ascent(
    classes: &[LawClass],
    samples: &[StatSample],
    observed: &[f64],
    theta0: &[f64],
    sd: &[f64],
    cfg: &FitConfig,
) -> Result<(Vec<f64>, f64)> {
    let n = cfg.n_mcmc as f64;
    let mut theta = theta0.to_vec();
    let mut cur = side_moments(classes, samples, &theta, theta0)?;
    for _ in 0..cfg.max_inner {
        let grad: Vec<f64> = observed.iter().zip(&cur.mean).map(|(s, m)| s - m).collect();
        if grad.iter().zip(sd).all(|(g, s)| g.abs() <= 1e-9 * s.max(1.0)) {
            break;
        }
        let step = linalg::solve_regularized(&cur.cov, &grad);
        let f_cur = objective(observed, &theta, theta0, cur.log_ratio);
        let mut scale = 1.0;
        let mut limited = false;
        let mut next = None;
        for _ in 0..=30 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, d)| t + scale * d).collect();
            let m = side_moments(classes, samples, &cand, theta0)?;
            if m.ess < cfg.ess_threshold * n {
                limited = true;
            } else if objective(observed, &cand, theta0, m.log_ratio) >= f_cur {
                next = Some((cand, m));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, m)) = next else { break };
        let moved = cand.iter().zip(&theta).any(|(a, b)| a != b);
        theta = cand;
        cur = m;
        if limited || !moved {
            break;
        }
    }
    Ok((theta, cur.ess))
}

/// Fits one side (within or between) of the model.
pub fn fit_part(g: &LocalGraph, spec: &ModelSpec, within: bool, cfg: &FitConfig) -> Result<PartFit> {
    cfg.validate()?;
    let full_obs = spec.compute_statistics(g)?;
    let full_max = spec.max_attainable()?;
    let (off, dim) = if within { (0, spec.p()) } else { (spec.p(), spec.q()) };
    let observed: Vec<f64> = full_obs.as_slice()[off..off + dim].iter().map(|&v| v as f64).collect();
    let max = &full_max.as_slice()[off..off + dim];
    let init = initial_theta(g, spec, within);

    let nonexistent = |theta: Vec<f64>, outer, ess_trace| PartFit {
        theta,
        info: Matrix::zeros(dim, dim),
        status: FitStatus::Nonexistence,
        outer_iterations: outer,
        ess_trace,
    };
    if observed.iter().zip(max).any(|(&s, &m)| s <= 0.0 || s >= m as f64) {
        return Ok(nonexistent(init, 0, Vec::new()));
    }

    let classes = law_classes(spec, within)?;
    let mcmc = cfg.mcmc();
    let domain = if within { rng::domain::FIT_WITHIN } else { rng::domain::FIT_BETWEEN };
    let partition = spec.partition();

    let mut theta0 = init;
    let mut ess_trace = Vec::new();
    let mut status = FitStatus::MaxIter;
    let mut last: Option<(Vec<StatSample>, Vec<f64>)> = None;
    let mut outer = 0;
    while outer < cfg.max_outer {
        let samples = par::try_map_indexed(classes.len(), |i| -> Result<StatSample> {
            let c = &classes[i];
            let start = g.subgraph_state(c.rep)?;
            let mut chain = SubgraphChain::new(c.terms.clone(), &theta0, start)?;
            let idx = partition.subgraph_index(c.rep) as u64;
            let mut rng = rng::stream(cfg.seed, &[domain, outer as u64, idx]);
            Ok(run_chain(&mut chain, &mcmc, cfg.n_mcmc, false, &mut rng).stats)
        })?;
        outer += 1;

        let at0 = side_moments(&classes, &samples, &theta0, &theta0)?;
        let sd: Vec<f64> = (0..dim).map(|j| at0.cov[(j, j)].max(0.0).sqrt()).collect();
        let mean_var: Vec<Vec<f64>> = samples.iter().map(batch_means_variance).collect();
        let mcse: Vec<f64> = (0..dim)
            .map(|j| classes.iter().zip(&mean_var).map(|(c, v)| (c.count * c.count) as f64 * v[j]).sum::<f64>().sqrt())
            .collect();
        let converged = (0..dim).all(|j| {
            let gj = (observed[j] - at0.mean[j]).abs();
            gj <= cfg.tol * sd[j].max(1.0) || gj <= cfg.mcse_multiplier * mcse[j]
        });

        let (theta, ess) = inner_ascent(&classes, &samples, &observed, &theta0, &sd, cfg)?;
        ess_trace.push(ess);
        if theta.iter().any(|t| !t.is_finite() || t.abs() > cfg.divergence) {
            return Ok(nonexistent(theta, outer, ess_trace));
        }
        let base = std::mem::replace(&mut theta0, theta);
        last = Some((samples, base));
        if converged {
            status = FitStatus::Converged;
            break;
        }
    }

    let (samples, base) = last.expect("at least one outer iteration");
    let info = side_moments(&classes, &samples, &theta0, &base)?.cov;
    Ok(PartFit { theta: theta0, info, status, outer_iterations: outer, ess_trace })
}

/// Fits `theta_W` and `theta_B` by independent scoring loops.
pub fn fit(g: &LocalGraph, spec: &ModelSpec, cfg: &FitConfig) -> Result<FitResult> {
    let within = (spec.p() > 0).then(|| fit_part(g, spec, true, cfg)).transpose()?;
    let between = (spec.q() > 0).then(|| fit_part(g, spec, false, cfg)).transpose()?;
    let status =
        [&within, &between].iter().filter_map(|p| p.as_ref().map(|p| p.status)).fold(FitStatus::Converged, |acc, s| {
            match (acc, s) {
                (FitStatus::Nonexistence, _) | (_, FitStatus::Nonexistence) => FitStatus::Nonexistence,
                (FitStatus::MaxIter, _) | (_, FitStatus::MaxIter) => FitStatus::MaxIter,
                _ => FitStatus::Converged,
            }
        });
    let theta_hat = ParamVector::new(
        within.as_ref().map(|p| p.theta.clone()).unwrap_or_default(),
        between.as_ref().map(|p| p.theta.clone()).unwrap_or_default(),
    )
    .or_else(|_| {
        // divergent fits may carry huge but finite values; non-finite ones
        // are replaced so the result stays serializable
        let fix = |v: Vec<f64>| v.into_iter().map(|t| if t.is_finite() { t } else { 0.0 }).collect();
        Ok::<_, Error>(ParamVector {
            within: fix(within.as_ref().map(|p| p.theta.clone()).unwrap_or_default()),
            between: fix(between.as_ref().map(|p| p.theta.clone()).unwrap_or_default()),
        })
    })?;
    let mut ess_trace = Vec::new();
    for p in [&within, &between].into_iter().flatten() {
        ess_trace.extend(&p.ess_trace);
    }
    Ok(FitResult {
        theta_hat,
        info_w: within.as_ref().map_or_else(|| Matrix::zeros(0, 0), |p| p.info.clone()),
        info_b: between.as_ref().map_or_else(|| Matrix::zeros(0, 0), |p| p.info.clone()),
        n_mcmc: cfg.n_mcmc,
        ess_trace,
        status,
        within,
        between,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::graph::BlockPartition;
    use crate::model::StatisticTerm::*;

    fn sample(rows: &[Vec<i64>]) -> StatSample {
        StatSample::from_rows(rows[0].len(), rows)
    }

    #[test]
    fn ess_examples() {
        assert!((effective_sample_size(&vec![0.01; 100]) - 100.0).abs() < 1e-9);
        let mut one = vec![0.0; 10];
        one[3] = 1.0;
        assert_eq!(effective_sample_size(&one), 1.0);
        let mut two = vec![0.0; 10];
        two[0] = 0.5;
        two[1] = 0.5;
        assert_eq!(effective_sample_size(&two), 2.0);
    }

    #[test]
    fn gradient_at_base_point_is_observed_minus_mean() {
        let s = sample(&[vec![1, 2], vec![3, 0], vec![2, 7]]);
        let g = is_gradient(&[0.4, -0.1], &[0.4, -0.1], &[5.0, 5.0], &s).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-12);
        assert!((g[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_draws_give_constant_gradient() {
        let s = sample(&vec![vec![2, 1]; 5]);
        for th in [[0.0, 0.0], [3.0, -2.0], [-10.0, 4.0]] {
            let g = is_gradient(&th, &[0.0, 0.0], &[4.0, 4.0], &s).unwrap();
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn information_at_base_is_sample_covariance() {
        let s = sample(&[vec![1, 0], vec![3, 2], vec![2, 2]]);
        let i = is_information(&[0.0, 0.0], &[0.0, 0.0], &s).unwrap();
        let c = s.covariance();
        assert!((i.matrix.clone() - c).norm() < 1e-12);
        assert!(i.usable);

        let single = is_information(&[0.0], &[0.0], &sample(&[vec![4]])).unwrap();
        assert_eq!(single.matrix[(0, 0)], 0.0);
        assert!(!single.usable);
    }

    #[test]
    fn batch_means_of_iid_like_sample() {
        use rand::Rng;
        let mut r = crate::rng::stream(5, &[]);
        let rows: Vec<Vec<i64>> = (0..400).map(|_| vec![r.random_range(0..13)]).collect();
        let s = sample(&rows);
        let v = batch_means_variance(&s)[0];
        let iid = s.covariance()[(0, 0)] / 400.0;
        assert!(v > 0.2 * iid && v < 5.0 * iid, "{v} vs {iid}");
        let sorted: Vec<Vec<i64>> = {
            let mut r = rows.clone();
            r.sort();
            r
        };
        // strongly autocorrelated ordering inflates the estimate
        assert!(batch_means_variance(&sample(&sorted))[0] > 5.0 * iid);
    }

    #[test]
    fn weights_sum_to_one() {
        let s = sample(&[vec![100, 3], vec![0, 0], vec![50, 1], vec![700, 9]]);
        let w = importance_weights(&[2.0, -1.0], &[0.0, 0.0], &s).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(matches!(is_gradient(&[0.0], &[0.0], &[1.0], &StatSample::new(1)), Err(Error::EmptySample)));
    }

    #[test]
    fn complete_block_is_nonexistent() {
        let p = Arc::new(BlockPartition::equal_blocks(2, 3).unwrap());
        let spec = ModelSpec::new(vec![WithinEdgesPerBlock(0), WithinEdgesPerBlock(1)], vec![], p.clone()).unwrap();
        let g = LocalGraph::from_edges(p, &[(0, 1), (0, 2), (1, 2), (3, 4)]).unwrap();
        let r = fit(&g, &spec, &FitConfig { n_mcmc: 200, ..Default::default() }).unwrap();
        assert_eq!(r.status, FitStatus::Nonexistence);
    }

    #[test]
    fn initial_theta_is_logit_density() {
        let p = Arc::new(BlockPartition::equal_blocks(2, 4).unwrap());
        let spec = ModelSpec::new(
            vec![WithinEdgesTotal, WithinTransitiveEdgesTotal],
            vec![BetweenEdgesPerPair(0, 1)],
            p.clone(),
        )
        .unwrap();
        let g = LocalGraph::from_edges(p, &[(0, 1), (1, 2), (4, 5), (0, 4), (1, 5), (2, 6), (3, 7)]).unwrap();
        let w = initial_theta(&g, &spec, true);
        assert!((w[0] - logit(3.0 / 12.0)).abs() < 1e-12);
        assert_eq!(w[1], 0.0);
        assert!((initial_theta(&g, &spec, false)[0] - logit(4.0 / 16.0)).abs() < 1e-12);
    }
}
