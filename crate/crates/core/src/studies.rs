//! Simulation studies: estimation error as the network grows, and Wald
//! interval coverage for the transitive-edge parameter.
//!
//! Every case uses equal blocks with node groups assigned round-robin inside
//! each block. The within model has one `nodefactor` term per group plus
//! `transitive_edges`; between-block subgraphs are empty.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{predicted_error, PredictedError};
use crate::error::{Error, Result};
use crate::graph::{BlockPartition, LocalGraph};
use crate::inference::{fisher_hat, normal_quantile, qq_points, quantile, wald_ci};
use crate::io::{csv_number, write_csv, write_json, RunManifest};
use crate::mcmle::{fit, FitConfig, FitStatus};
use crate::model::{ModelSpec, ParamVector, StatisticTerm};
use crate::sampler::{sample_graph, BetweenMode, McmcConfig};
use crate::{par, rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// `M = 3`.
    Case1,
    /// `M = ceil(N^(2/5))`.
    Case2,
    /// `M = ceil(N^(1/2))`.
    Case3,
    /// `M = 4`.
    Study2Case1,
    /// `M = 2K - 1`.
    Study2Case2,
}

impl Case {
    fn id(self) -> u64 {
        match self {
            Case::Case1 => 1,
            Case::Case2 => 2,
            Case::Case3 => 3,
            Case::Study2Case1 => 4,
            Case::Study2Case2 => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::Case1 => "Case1",
            Case::Case2 => "Case2",
            Case::Case3 => "Case3",
            Case::Study2Case1 => "Study2Case1",
            Case::Study2Case2 => "Study2Case2",
        }
    }

    /// Number of node groups for `n` nodes in blocks of `block_size`.
    pub fn groups(self, n: usize, block_size: usize) -> usize {
        // smallest m with m^e >= n^f, in integers
        let ceil_root = |target: u128, e: u32| (1usize..).find(|&m| (m as u128).pow(e) >= target).unwrap();
        match self {
            Case::Case1 => 3,
            Case::Case2 => ceil_root((n as u128).pow(2), 5),
            Case::Case3 => ceil_root(n as u128, 2),
            Case::Study2Case1 => 4,
            Case::Study2Case2 => 2 * (n / block_size) - 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub case: Case,
    pub n_values: Vec<usize>,
    pub block_size: usize,
    pub replications: usize,
    pub theta_transitive: f64,
    pub theta_group_range: (f64, f64),
    /// Retained draws per fit iteration.
    pub n_mcmc: usize,
    pub seed: u64,
    /// Interval level for the coverage study.
    pub alpha: f64,
    /// Burn-in of the fitting chains, in multiples of the subgraph size.
    pub burnin_multiplier: f64,
    /// Thinning of the fitting chains, in multiples of the subgraph size.
    pub interval_multiplier: f64,
    /// Burn-in of the chain that generates each data graph.
    pub data_burnin_multiplier: f64,
    pub max_outer: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            case: Case::Case1,
            n_values: vec![50, 250, 500],
            block_size: 50,
            replications: 100,
            theta_transitive: 0.5,
            theta_group_range: (-1.5, -0.5),
            n_mcmc: 2000,
            seed: 1,
            alpha: 0.05,
            burnin_multiplier: 10.0,
            interval_multiplier: 0.2,
            data_burnin_multiplier: 50.0,
            max_outer: 50,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size < 2 {
            return Err(Error::config("block_size", "must be at least 2"));
        }
        if self.n_values.is_empty() {
            return Err(Error::config("n_values", "must not be empty"));
        }
        for (i, &n) in self.n_values.iter().enumerate() {
            if n == 0 || n % self.block_size != 0 {
                return Err(Error::config(
                    format!("n_values[{i}]"),
                    format!("{n} is not a positive multiple of block_size {}", self.block_size),
                ));
            }
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        let (lo, hi) = self.theta_group_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config("theta_group_range", "needs finite low < high"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", "must lie in (0, 1)"));
        }
        self.fit_config(0).validate()
    }

    fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            n_mcmc: self.n_mcmc,
            burnin_multiplier: self.burnin_multiplier,
            interval_multiplier: self.interval_multiplier,
            max_outer: self.max_outer,
            seed,
            ..FitConfig::default()
        }
    }
}

/// A case model at one network size.
#[derive(Clone, Debug)]
pub struct CaseModel {
    pub spec: ModelSpec,
    pub groups: usize,
    /// Feasibility notes, such as groups absent from every block.
    pub warnings: Vec<String>,
}

pub fn build_case_model(case: Case, n: usize, block_size: usize) -> Result<CaseModel> {
    if block_size == 0 || !n.is_multiple_of(block_size) {
        return Err(Error::InvalidPartition(format!("{n} nodes do not split into blocks of {block_size}")));
    }
    let k = n / block_size;
    let m = case.groups(n, block_size);
    let mut warnings = Vec::new();
    if m > block_size {
        warnings.push(format!(
            "{} groups exceed block size {block_size}; groups {}..{m} have no nodes",
            m,
            block_size + 1
        ));
    }
    let groups: Vec<usize> = (0..n).map(|i| (i % block_size) % m).collect();
    let partition = BlockPartition::equal_blocks(k, block_size)?.with_node_groups_count(groups, m)?;
    let mut within: Vec<StatisticTerm> = (0..m).map(StatisticTerm::WithinEdgesByNodeGroup).collect();
    within.push(StatisticTerm::WithinTransitiveEdgesTotal);
    let spec = ModelSpec::new(within, vec![], Arc::new(partition))?;
    Ok(CaseModel { spec, groups: m, warnings })
}

/// `theta_m ~ Unif(range)` for the groups, then the fixed transitive value.
/// Depends only on `(seed, case, n, replication)`.
pub fn draw_theta(cfg: &StudyConfig, groups: usize, n: usize, replication: usize) -> ParamVector {
    let mut r = rng::stream(cfg.seed, &[rng::domain::THETA, cfg.case.id(), n as u64, replication as u64]);
    let (lo, hi) = cfg.theta_group_range;
    let mut within: Vec<f64> = (0..groups).map(|_| r.random_range(lo..hi)).collect();
    within.push(cfg.theta_transitive);
    ParamVector { within, between: Vec::new() }
}

struct Replicate {
    theta: ParamVector,
    graph: LocalGraph,
    fit: crate::mcmle::FitResult,
}

fn replicate(cfg: &StudyConfig, model: &CaseModel, n: usize, rep: usize) -> Result<Replicate> {
    let theta = draw_theta(cfg, model.groups, n, rep);
    let data = McmcConfig {
        burnin_multiplier: cfg.data_burnin_multiplier,
        interval_multiplier: 1.0,
        n_samples: 1,
        seed: rng::derive_seed(cfg.seed, &[rng::domain::DATA, cfg.case.id(), n as u64]),
    };
    let g = sample_graph(&model.spec, &theta, &data, rep as u64, BetweenMode::Empty)?.remove(0);
    let fit_seed = rng::derive_seed(cfg.seed, &[rng::domain::FIT_WITHIN, cfg.case.id(), n as u64, rep as u64]);
    let fit = fit(&g, &model.spec, &cfg.fit_config(fit_seed))?;
    Ok(Replicate { theta, graph: g, fit })
}

fn run_replicates<T: Send>(
    cfg: &StudyConfig,
    f: impl Fn(usize, &CaseModel, Replicate) -> Result<T> + Sync,
) -> Result<(Vec<T>, BTreeMap<usize, CaseModel>)> {
    cfg.validate()?;
    let models: BTreeMap<usize, CaseModel> =
        cfg.n_values.iter().map(|&n| Ok((n, build_case_model(cfg.case, n, cfg.block_size)?))).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> =
        cfg.n_values.iter().flat_map(|&n| (0..cfg.replications).map(move |r| (n, r))).collect();
    let rows = par::try_map_indexed(jobs.len(), |i| {
        let (n, rep) = jobs[i];
        let model = &models[&n];
        f(rep, model, replicate(cfg, model, n, rep)?)
    })?;
    Ok((rows, models))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub case: Case,
    pub n: usize,
    pub p: usize,
    pub replication: usize,
    pub status: FitStatus,
    pub l2_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeSummary {
    pub n: usize,
    pub p: usize,
    /// 95% quantile of the l2 errors of fits that did not diverge.
    pub q95: f64,
    pub n_used: usize,
    pub n_nonexistence: usize,
    pub n_max_iter: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Study1Summary {
    pub case: Case,
    pub by_n: Vec<SizeSummary>,
    pub predicted: PredictedError,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Study1Output {
    pub rows: Vec<ErrorRow>,
    pub summary: Study1Summary,
}

pub fn run_study1(cfg: &StudyConfig) -> Result<Study1Output> {
    let (rows, models) = run_replicates(cfg, |rep, model, r| {
        let err = r.theta.within.iter().zip(&r.fit.theta_hat.within).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        Ok(ErrorRow {
            case: cfg.case,
            n: model.spec.partition().n_nodes(),
            p: model.spec.p(),
            replication: rep,
            status: r.fit.status,
            l2_error: err,
        })
    })?;
    let mut by_n = Vec::new();
    let mut q95 = BTreeMap::new();
    let mut dims = BTreeMap::new();
    for &n in &cfg.n_values {
        let here: Vec<&ErrorRow> = rows.iter().filter(|r| r.n == n).collect();
        let used: Vec<f64> = here.iter().filter(|r| r.status != FitStatus::Nonexistence).map(|r| r.l2_error).collect();
        let q = quantile(&used, 0.95);
        let p = models[&n].spec.p();
        if q.is_finite() {
            q95.insert(n, q);
            dims.insert(n, p);
        }
        by_n.push(SizeSummary {
            n,
            p,
            q95: q,
            n_used: used.len(),
            n_nonexistence: here.len() - used.len(),
            n_max_iter: here.iter().filter(|r| r.status == FitStatus::MaxIter).count(),
        });
    }
    let predicted = predicted_error(&q95, &dims)?;
    let warnings = models.values().flat_map(|m| m.warnings.clone()).collect();
    Ok(Study1Output { rows, summary: Study1Summary { case: cfg.case, by_n, predicted, warnings } })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageRow {
    pub n: usize,
    pub p: usize,
    pub replication: usize,
    pub status: FitStatus,
    pub theta_true: f64,
    pub estimate: f64,
    /// Zero when the information estimate was singular.
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
    /// `(estimate - theta_true) / std_error`.
    pub z: f64,
    /// Standard error from the block estimator `K I_W(x)` on the data
    /// graph; zero when singular.
    pub std_error_block: f64,
    pub covered_block: bool,
}

impl CoverageRow {
    fn usable(&self) -> bool {
        self.status != FitStatus::Nonexistence && self.std_error > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub n: usize,
    pub p: usize,
    pub coverage: f64,
    /// `sqrt(alpha (1 - alpha) / R)`.
    pub mc_se: f64,
    pub n_used: usize,
    pub n_failed: usize,
    /// Largest `|sample - theoretical|` over the QQ points.
    pub qq_max_deviation: f64,
    /// Coverage of the intervals built from the block estimator, over the
    /// fits where it is nonsingular.
    pub coverage_block: f64,
    pub n_used_block: usize,
    /// Median of `std_error_block / std_error`.
    pub se_ratio_median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Study2Summary {
    pub case: Case,
    pub alpha: f64,
    pub z_multiplier: f64,
    pub by_n: Vec<CoverageSummary>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Study2Output {
    pub rows: Vec<CoverageRow>,
    /// `(n, theoretical, sample)`.
    pub qq: Vec<(usize, f64, f64)>,
    pub summary: Study2Summary,
}

pub fn run_study2(cfg: &StudyConfig) -> Result<Study2Output> {
    let (rows, models) = run_replicates(cfg, |rep, model, r| {
        let j = model.spec.p() - 1;
        let truth = r.theta.within[j];
        let est = &r.fit.theta_hat.within;
        // rank deficient by construction when K <= p
        let block = if r.fit.status == FitStatus::Nonexistence || model.spec.partition().n_blocks() <= model.spec.p() {
            None
        } else {
            let info = fisher_hat(&r.graph, &model.spec)?.full_w;
            match wald_ci(est, &info, j, cfg.alpha) {
                Ok(ci) => Some(ci),
                Err(e) if e.is_numerical() => None,
                Err(e) => return Err(e),
            }
        };
        let row = |se: f64, lower: f64, upper: f64| CoverageRow {
            n: model.spec.partition().n_nodes(),
            p: model.spec.p(),
            replication: rep,
            status: r.fit.status,
            theta_true: truth,
            estimate: est[j],
            std_error: se,
            lower,
            upper,
            covered: lower <= truth && truth <= upper,
            z: if se > 0.0 { (est[j] - truth) / se } else { f64::NAN },
            std_error_block: block.as_ref().map_or(0.0, |c| c.std_error),
            covered_block: block.as_ref().is_some_and(|c| c.covers(truth)),
        };
        if r.fit.status == FitStatus::Nonexistence {
            return Ok(row(0.0, f64::NAN, f64::NAN));
        }
        match wald_ci(est, &r.fit.info_w, j, cfg.alpha) {
            Ok(ci) => Ok(row(ci.std_error, ci.lower, ci.upper)),
            Err(e) if e.is_numerical() => Ok(row(0.0, f64::NAN, f64::NAN)),
            Err(e) => Err(e),
        }
    })?;
    let mut by_n = Vec::new();
    let mut qq = Vec::new();
    for &n in &cfg.n_values {
        let here: Vec<&CoverageRow> = rows.iter().filter(|r| r.n == n).collect();
        let used: Vec<&&CoverageRow> = here.iter().filter(|r| r.usable()).collect();
        let r = used.len() as f64;
        let coverage = used.iter().filter(|r| r.covered).count() as f64 / r;
        let z: Vec<f64> = used.iter().map(|r| r.z).collect();
        let pts = qq_points(&z);
        let dev = pts.iter().map(|(t, s)| (s - t).abs()).fold(0.0, f64::max);
        qq.extend(pts.into_iter().map(|(t, s)| (n, t, s)));
        let block: Vec<&&CoverageRow> =
            here.iter().filter(|r| r.status != FitStatus::Nonexistence && r.std_error_block > 0.0).collect();
        let ratios: Vec<f64> =
            used.iter().filter(|r| r.std_error_block > 0.0).map(|r| r.std_error_block / r.std_error).collect();
        by_n.push(CoverageSummary {
            n,
            p: models[&n].spec.p(),
            coverage,
            mc_se: (cfg.alpha * (1.0 - cfg.alpha) / r).sqrt(),
            n_used: used.len(),
            n_failed: here.len() - used.len(),
            qq_max_deviation: dev,
            coverage_block: block.iter().filter(|r| r.covered_block).count() as f64 / block.len() as f64,
            n_used_block: block.len(),
            se_ratio_median: if ratios.is_empty() { f64::NAN } else { quantile(&ratios, 0.5) },
        });
    }
    let mut warnings: Vec<String> = models.values().flat_map(|m| m.warnings.clone()).collect();
    for (n, m) in &models {
        let k = m.spec.partition().n_blocks();
        if k <= m.spec.p() {
            warnings.push(format!("N={n}: block information estimator is singular with K={k} <= p={}", m.spec.p()));
        }
    }
    Ok(Study2Output {
        rows,
        qq,
        summary: Study2Summary {
            case: cfg.case,
            alpha: cfg.alpha,
            z_multiplier: normal_quantile(1.0 - cfg.alpha / 2.0),
            by_n,
            warnings,
        },
    })
}

fn status_name(s: FitStatus) -> &'static str {
    match s {
        FitStatus::Converged => "Converged",
        FitStatus::Nonexistence => "Nonexistence",
        FitStatus::MaxIter => "MaxIter",
    }
}

pub const ERRORS_COLUMNS: [&str; 6] = ["case", "n", "p", "replication", "status", "l2_error"];
pub const COVERAGE_COLUMNS: [&str; 13] = [
    "n",
    "p",
    "replication",
    "status",
    "theta_true",
    "estimate",
    "std_error",
    "lower",
    "upper",
    "covered",
    "z",
    "std_error_block",
    "covered_block",
];
pub const QQ_COLUMNS: [&str; 3] = ["n", "theoretical", "sample"];

/// Writes `errors.csv`, `summary.json`, `config.json` and `manifest.json`.
pub fn write_study1(dir: &Path, cfg: &StudyConfig, out: &Study1Output, manifest: &RunManifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let rows: Vec<Vec<String>> = out
        .rows
        .iter()
        .map(|r| {
            vec![
                r.case.name().into(),
                r.n.to_string(),
                r.p.to_string(),
                r.replication.to_string(),
                status_name(r.status).into(),
                csv_number(r.l2_error),
            ]
        })
        .collect();
    write_csv(&dir.join("errors.csv"), &ERRORS_COLUMNS, &rows)?;
    write_json(&dir.join("summary.json"), &out.summary)?;
    write_json(&dir.join("config.json"), cfg)?;
    write_json(&dir.join("manifest.json"), manifest)
}

/// Writes `coverage.csv`, `qq.csv`, `summary.json`, `config.json` and
/// `manifest.json`.
pub fn write_study2(dir: &Path, cfg: &StudyConfig, out: &Study2Output, manifest: &RunManifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let rows: Vec<Vec<String>> = out
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.p.to_string(),
                r.replication.to_string(),
                status_name(r.status).into(),
                csv_number(r.theta_true),
                csv_number(r.estimate),
                csv_number(r.std_error),
                csv_number(r.lower),
                csv_number(r.upper),
                u8::from(r.covered).to_string(),
                csv_number(r.z),
                csv_number(r.std_error_block),
                u8::from(r.covered_block).to_string(),
            ]
        })
        .collect();
    write_csv(&dir.join("coverage.csv"), &COVERAGE_COLUMNS, &rows)?;
    let qq: Vec<Vec<String>> =
        out.qq.iter().map(|&(n, t, s)| vec![n.to_string(), csv_number(t), csv_number(s)]).collect();
    write_csv(&dir.join("qq.csv"), &QQ_COLUMNS, &qq)?;
    write_json(&dir.join("summary.json"), &out.summary)?;
    write_json(&dir.join("config.json"), cfg)?;
    write_json(&dir.join("manifest.json"), manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_dimensions() {
        let ns = [50, 250, 500, 750, 1000];
        let p = |case: Case| ns.map(|n| case.groups(n, 50) + 1);
        assert_eq!(p(Case::Case1), [4; 5]);
        assert_eq!(p(Case::Case2), [6, 11, 14, 16, 17]);
        assert_eq!(p(Case::Case3), [9, 17, 24, 29, 33]);
        assert_eq!(Case::Study2Case1.groups(250, 50) + 1, 5);
        assert_eq!(Case::Study2Case2.groups(250, 50) + 1, 10);
    }

    #[test]
    fn case_model_layout() {
        let m = build_case_model(Case::Case1, 100, 50).unwrap();
        assert_eq!(m.spec.p(), 4);
        assert_eq!(m.spec.q(), 0);
        let part = m.spec.partition();
        assert_eq!(part.node_group(0), Some(0));
        assert_eq!(part.node_group(4), Some(1));
        assert_eq!(part.node_group(50), Some(0));
        assert!(m.warnings.is_empty());
        assert!(build_case_model(Case::Case1, 120, 50).is_err());
    }

    #[test]
    fn theta_draws_are_reproducible_and_in_range() {
        let cfg = StudyConfig::default();
        let a = draw_theta(&cfg, 3, 250, 7);
        assert_eq!(a, draw_theta(&cfg, 3, 250, 7));
        assert_ne!(a, draw_theta(&cfg, 3, 250, 8));
        assert_eq!(a.within[3], 0.5);
        assert!(a.within[..3].iter().all(|t| (-1.5..-0.5).contains(t)));
    }

    #[test]
    fn config_validation() {
        assert!(StudyConfig::default().validate().is_ok());
        let bad = StudyConfig { n_values: vec![60], ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::Config { path, .. }) if path == "n_values[0]"));
    }

    #[test]
    fn tiny_study_runs() {
        let cfg =
            StudyConfig { n_values: vec![20, 40], block_size: 10, replications: 3, n_mcmc: 300, ..Default::default() };
        let s1 = run_study1(&cfg).unwrap();
        assert_eq!(s1.rows.len(), 6);
        assert_eq!(s1.summary.by_n.len(), 2);
        let s2 = run_study2(&StudyConfig { case: Case::Study2Case1, ..cfg }).unwrap();
        assert_eq!(s2.rows.len(), 6);
    }

    #[test]
    fn block_estimator_skipped_when_blocks_do_not_exceed_parameters() {
        let cfg = StudyConfig {
            case: Case::Study2Case1,
            n_values: vec![50, 300],
            replications: 2,
            n_mcmc: 300,
            ..Default::default()
        };
        let out = run_study2(&cfg).unwrap();
        assert!(out.rows.iter().filter(|r| r.n == 50).all(|r| r.std_error_block == 0.0 && !r.covered_block));
        assert_eq!(out.summary.by_n[0].n_used_block, 0);
        assert_eq!(out.summary.warnings.len(), 1);
        assert!(out.summary.warnings[0].starts_with("N=50:"));
        assert!(out.rows.iter().filter(|r| r.n == 300).all(|r| r.std_error_block > 0.0));
    }
}
