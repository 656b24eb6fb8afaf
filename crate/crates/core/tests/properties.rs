use std::sync::Arc;

use locdep::diagnostics::theory_quantities;
use locdep::exact::{ExactModel, ExactSubgraphTable};
use locdep::graph::{BlockPartition, LocalGraph, SubgraphRef};
use locdep::inference::{fisher_hat, normal_quantile, qq_points};
use locdep::linalg::Matrix;
use locdep::mcmle::{fit, is_information, log_mean_exp_ratio, FitConfig};
use locdep::model::{ModelSpec, ParamVector, StatisticTerm::*};
use locdep::sampler::{sample_graph, sample_statistics, BetweenMode, McmcConfig};
use locdep::studies::{run_study2, Case, StudyConfig};

fn edges_transitive(blocks: usize, size: usize) -> ModelSpec {
    let p = Arc::new(BlockPartition::equal_blocks(blocks, size).unwrap());
    ModelSpec::new(vec![WithinEdgesTotal, WithinTransitiveEdgesTotal], vec![], p).unwrap()
}

#[test]
fn log_mean_exp_approaches_normalizer_ratio() {
    let spec = edges_transitive(1, 4);
    let model = ExactModel::build(&spec, 20).unwrap();
    let theta0 = ParamVector::new(vec![-0.8, 0.3], vec![]).unwrap();
    let theta = [-0.6, 0.5];
    let target = model.log_normalizer(&theta) - model.log_normalizer(&theta0.within);
    let cfg = McmcConfig { n_samples: 100_000, interval_multiplier: 3.0, seed: 4, ..Default::default() };
    let all = sample_statistics(&spec, &theta0, &cfg, 0, BetweenMode::Empty).unwrap();
    let errs: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&n| {
            let rows: Vec<Vec<i64>> = all.rows().take(n).map(<[i64]>::to_vec).collect();
            let s = locdep::sampler::StatSample::from_rows(2, &rows);
            (log_mean_exp_ratio(&theta, &theta0.within, &s).unwrap() - target).abs()
        })
        .collect();
    assert!(errs[2] < errs[0], "{errs:?}");
    assert!(errs[2] < 5e-3, "{errs:?}");
}

#[test]
fn information_matches_enumeration() {
    let spec = edges_transitive(3, 4);
    let model = ExactModel::build(&spec, 20).unwrap();
    let theta0 = ParamVector::new(vec![-1.0, 0.4], vec![]).unwrap();
    let cfg = McmcConfig { n_samples: 40_000, interval_multiplier: 3.0, seed: 8, ..Default::default() };
    let s = sample_statistics(&spec, &theta0, &cfg, 0, BetweenMode::Empty).unwrap();
    let theta = [-0.9, 0.3];
    let est = is_information(&theta, &theta0.within, &s).unwrap().matrix;
    let (_, _, exact) = model.moments(&theta);
    assert!((est - &exact).norm() < 0.05 * exact.norm());
}

#[test]
fn within_fit_ignores_between_terms() {
    let p = Arc::new(BlockPartition::equal_blocks(6, 5).unwrap());
    let with =
        ModelSpec::new(vec![WithinEdgesTotal, WithinTransitiveEdgesTotal], vec![BetweenEdgesTotal], p.clone()).unwrap();
    let without = ModelSpec::new(vec![WithinEdgesTotal, WithinTransitiveEdgesTotal], vec![], p).unwrap();
    let theta = ParamVector::new(vec![-0.7, 0.3], vec![-2.0]).unwrap();
    let data = McmcConfig { n_samples: 1, seed: 2, ..Default::default() };
    let g = sample_graph(&with, &theta, &data, 0, BetweenMode::Sample).unwrap().remove(0);
    let cfg = FitConfig { n_mcmc: 2000, seed: 5, ..Default::default() };
    let a = fit(&g, &with, &cfg).unwrap();
    let b = fit(&g, &without, &cfg).unwrap();
    assert_eq!(a.theta_hat.within, b.theta_hat.within);
    assert_eq!(a.info_w, b.info_w);
}

#[test]
fn independent_edge_fit_matches_logit_densities() {
    let p = Arc::new(BlockPartition::equal_blocks(3, 8).unwrap());
    let spec = ModelSpec::new(
        (0..3).map(WithinEdgesPerBlock).collect(),
        vec![BetweenEdgesPerPair(0, 1), BetweenEdgesPerPair(0, 2), BetweenEdgesPerPair(1, 2)],
        p,
    )
    .unwrap();
    let theta = ParamVector::new(vec![-0.5, 0.0, -1.0], vec![-1.5, -2.0, -1.0]).unwrap();
    let data = McmcConfig { n_samples: 1, seed: 12, ..Default::default() };
    let g = sample_graph(&spec, &theta, &data, 0, BetweenMode::Sample).unwrap().remove(0);
    let r = fit(&g, &spec, &FitConfig { n_mcmc: 50_000, seed: 13, ..Default::default() }).unwrap();
    let obs = spec.compute_statistics(&g).unwrap().to_f64();
    let dens = [28.0, 28.0, 28.0, 64.0, 64.0, 64.0];
    for ((o, d), est) in obs.iter().zip(dens).zip(r.theta_hat.to_flat()) {
        let closed = (o / (d - o)).ln();
        assert!((closed - est).abs() < 0.02, "{closed} vs {est}");
    }
}

#[test]
fn block_estimator_mean_matches_binomial_variance() {
    // independent edges in blocks of 6 with probability 0.3
    let p = Arc::new(BlockPartition::equal_blocks(10, 6).unwrap());
    let spec = ModelSpec::new(vec![WithinEdgesTotal], vec![], p).unwrap();
    let pi: f64 = 0.3;
    let theta = ParamVector::new(vec![(pi / (1.0 - pi)).ln()], vec![]).unwrap();
    let reps = 2000;
    let cfg = McmcConfig { n_samples: reps, interval_multiplier: 3.0, seed: 21, ..Default::default() };
    let graphs = sample_graph(&spec, &theta, &cfg, 0, BetweenMode::Empty).unwrap();
    let vals: Vec<f64> = graphs.iter().map(|g| fisher_hat(g, &spec).unwrap().i_w_avg[(0, 0)]).collect();
    let mean = vals.iter().sum::<f64>() / reps as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    // the divisor K makes the estimator's mean (K-1)/K of the variance
    let target = 15.0 * pi * (1.0 - pi) * 9.0 / 10.0;
    assert!((mean - target).abs() < 3.0 * sd / (reps as f64).sqrt(), "{mean} vs {target}");
}

#[test]
fn block_estimator_ignores_block_order() {
    let p = Arc::new(BlockPartition::equal_blocks(3, 4).unwrap());
    let spec =
        ModelSpec::new(vec![WithinEdgesTotal, WithinTransitiveEdgesTotal], vec![BetweenEdgesTotal], p.clone()).unwrap();
    let edges = [(0, 1), (1, 2), (0, 2), (4, 5), (8, 9), (9, 10), (0, 4), (5, 9), (3, 11)];
    let g = LocalGraph::from_edges(p, &edges).unwrap();
    // swap blocks 0 and 2
    let perm = |i: usize| match i / 4 {
        0 => i + 8,
        2 => i - 8,
        _ => i,
    };
    let q = Arc::new(BlockPartition::equal_blocks(3, 4).unwrap());
    let spec2 =
        ModelSpec::new(vec![WithinEdgesTotal, WithinTransitiveEdgesTotal], vec![BetweenEdgesTotal], q.clone()).unwrap();
    let h = LocalGraph::from_edges(q, &edges.map(|(a, b)| (perm(a), perm(b)))).unwrap();
    let a = fisher_hat(&g, &spec).unwrap();
    let b = fisher_hat(&h, &spec2).unwrap();
    assert!((a.i_w_avg - b.i_w_avg).norm() < 1e-12);
    assert!((a.i_b_avg - b.i_b_avg).norm() < 1e-12);
}

#[test]
fn theory_quantities_ignore_block_labels() {
    let a = BlockPartition::from_assignment(&[0, 0, 1, 1, 1, 2]).unwrap();
    let b = BlockPartition::from_assignment(&[2, 2, 0, 0, 0, 1]).unwrap();
    let w = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
    let bt = Matrix::identity(1, 1) * 3.0;
    assert_eq!(theory_quantities(&w, &bt, &a), theory_quantities(&w, &bt, &b));
}

#[test]
fn exact_information_equals_table_covariance() {
    let spec = edges_transitive(1, 4);
    let table = ExactSubgraphTable::build(&spec, SubgraphRef::within(0)).unwrap();
    let model = ExactModel::build(&spec, 20).unwrap();
    let (_, _, a) = table.moments(&[-0.3, 0.2]);
    let (_, _, b) = model.moments(&[-0.3, 0.2]);
    assert!((a - b).norm() < 1e-12);
}

#[test]
fn qq_of_plotting_positions_is_diagonal() {
    let n = 50;
    let xs: Vec<f64> = (0..n).rev().map(|i| normal_quantile((i as f64 + 0.5) / n as f64)).collect();
    for (t, s) in qq_points(&xs) {
        assert!((t - s).abs() < 1e-12);
    }
    assert!(qq_points(&[1.5; 7]).iter().all(|&(_, s)| s == 1.5));
}

#[test]
fn half_level_intervals_cover_about_half() {
    let cfg = StudyConfig {
        case: Case::Study2Case1,
        n_values: vec![100],
        replications: 60,
        alpha: 0.5,
        n_mcmc: 1000,
        seed: 77,
        ..Default::default()
    };
    let out = run_study2(&cfg).unwrap();
    let s = &out.summary.by_n[0];
    let se = (0.25 / s.n_used as f64).sqrt();
    assert!((s.coverage - 0.5).abs() < 3.0 * se, "{}", s.coverage);
}
