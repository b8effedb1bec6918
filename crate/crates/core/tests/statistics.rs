mod common;

use mtgibbs::covariates::{CovariateSet, NamedField};
use mtgibbs::fit::{
    compute_stat_cache, conditional_pseudo_loglik, fit_newton, observed_sensitivity, profile_fit, score, FitOptions,
    RangeCombo,
};
use mtgibbs::inference::pair_covariance;
use mtgibbs::interaction::{local_contribution, InteractionSpec};
use mtgibbs::model::{build_reparam, Constraints, Design, ModelSpec, ParameterVector, ReparamMap};
use mtgibbs::pattern::{MarkedPointPattern, NeighborIndex, Window};
use mtgibbs::simulate::{ChainConfig, GibbsSampler};
use mtgibbs::Point;
use proptest::prelude::*;
use rand::Rng;

use common::{protocol_fields, rel_err};

fn standard_reparam(design: &Design) -> ReparamMap {
    build_reparam(design.layout(), &design.names(), &Constraints::standard(design.num_types())).unwrap()
}

#[test]
fn cache_entries_equal_direct_local_contributions() {
    let design = common::geyer_design(3, 0.04, 0.06, 2.0);
    let pat = common::random_pattern(600, 3, 1);
    let cache = compute_stat_cache(&pat, &design).unwrap();
    let index = NeighborIndex::new(&pat, design.interaction().max_range());
    let mut r = common::rng(2);
    for _ in 0..100 {
        let n = r.random_range(0..cache.len());
        let u = cache.location(n);
        for l in 0..3 {
            let lc = local_contribution(design.interaction(), design.covariates(), design.layout(), &u, l, &index)
                .unwrap();
            assert_eq!(cache.stat(n, l), lc.values.as_slice());
            assert_eq!(cache.is_feasible(n, l), lc.feasible);
        }
    }
}

/// Residual `Tᵀ(v_obs − Σ_l q_l v_l)` of cached point `n`, computed directly.
fn naive_residual(cache: &mtgibbs::fit::StatCache, t: &ReparamMap, beta: &[f64], n: usize) -> Vec<f64> {
    let tm = t.matrix();
    let kp = beta.len();
    let x: Vec<Vec<f64>> = (0..cache.num_types())
        .map(|l| {
            let v = cache.stat(n, l);
            (0..kp).map(|c| (0..v.len()).map(|g| tm[(g, c)] * v[g]).sum()).collect()
        })
        .collect();
    let eta: Vec<f64> = x.iter().map(|x| x.iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = eta.iter().map(|e| (e - m).exp()).sum();
    let mut h = x[cache.mark(n)].clone();
    for (xl, e) in x.iter().zip(&eta) {
        let q = (e - m).exp() / z;
        for c in 0..kp {
            h[c] -= q * xl[c];
        }
    }
    h
}

#[test]
fn pair_covariance_matches_double_loop() {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let geyer = seed % 2 == 1;
        let design = if geyer {
            common::geyer_design(2, 0.05, 0.07, 1.5)
        } else {
            common::strauss_design(2, 0.05, 0.07)
        };
        let pat = common::random_pattern(150 + seed as usize, 2, 100 + seed);
        let cache = compute_stat_cache(&pat, &design).unwrap();
        let t = standard_reparam(&design);
        let beta: Vec<f64> = (0..t.beta_dim()).map(|k| 0.1 * (k as f64 - 2.0)).collect();
        let got = pair_covariance(&cache, &t, &beta).unwrap();
        let h: Vec<Vec<f64>> = (0..cache.len()).map(|n| naive_residual(&cache, &t, &beta, n)).collect();
        let r = cache.markov_range();
        let kp = beta.len();
        let mut want = vec![vec![0.0; kp]; kp];
        for a in 0..cache.len() {
            for b in 0..cache.len() {
                if a != b && cache.location(a).dist(&cache.location(b)) <= r {
                    for i in 0..kp {
                        for j in 0..kp {
                            want[i][j] += h[a][i] * h[b][j];
                        }
                    }
                }
            }
        }
        for i in 0..kp {
            for j in 0..kp {
                worst = worst.max(rel_err(got[(i, j)], want[i][j]));
            }
        }
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn geyer_score_and_sensitivity_match_finite_differences() {
    let design = common::geyer_design(3, 0.05, 0.08, 2.0);
    let pat = common::random_pattern(400, 3, 3);
    let cache = compute_stat_cache(&pat, &design).unwrap();
    let t = standard_reparam(&design);
    let beta: Vec<f64> = (0..t.beta_dim()).map(|k| 0.3 * (k as f64).cos()).collect();
    let e = score(&cache, &t, &beta).unwrap();
    let s = observed_sensitivity(&cache, &t, &beta).unwrap();
    let h = 1e-5;
    for a in 0..beta.len() {
        let mut bp = beta.clone();
        let mut bm = beta.clone();
        bp[a] += h;
        bm[a] -= h;
        let fd = (conditional_pseudo_loglik(&cache, &t, &bp).unwrap() - conditional_pseudo_loglik(&cache, &t, &bm).unwrap())
            / (2.0 * h);
        assert!(rel_err(fd, e[a]) < 1e-6, "score {a}: {fd} vs {}", e[a]);
        let ep = score(&cache, &t, &bp).unwrap();
        let em = score(&cache, &t, &bm).unwrap();
        for b in 0..beta.len() {
            let hess = (ep[b] - em[b]) / (2.0 * h);
            assert!(rel_err(-hess, s[(b, a)]) < 1e-5, "sensitivity ({b},{a})");
        }
    }
}

/// The three-type Strauss truth with covariate effects on the protocol fields.
fn protocol_strauss() -> (ModelSpec, ParameterVector) {
    let (phi0, z) = protocol_fields();
    let p = 3;
    let covars = CovariateSet::shared(p, true, vec![NamedField { name: "z".into(), field: z }]);
    let spec = InteractionSpec::strauss(InteractionSpec::range_matrix(p, 0.02, 0.04), None).unwrap();
    let design = Design::new(covars, spec).unwrap();
    let layout = design.layout().clone();
    let mut g = vec![0.0; layout.dim()];
    for (i, effect) in [0.5, -0.5, 0.0].into_iter().enumerate() {
        let r = layout.cov_range(i);
        g[r.start] = 1.6f64.ln();
        g[r.start + 1] = effect;
        for j in 0..p {
            g[layout.inter_index(i, j)] = if i == j { 0.8f64.ln() } else { 0.5 * 0.9f64.ln() };
        }
    }
    let model = ModelSpec {
        reparam: ReparamMap::identity(design.names()),
        design,
        baseline: Some(phi0),
    };
    let gamma = ParameterVector::new(&layout, g).unwrap();
    (model, gamma)
}

#[test]
fn strauss_fit_converges_quickly_from_zero() {
    let (model, gamma) = protocol_strauss();
    let config = ChainConfig {
        seed: 31,
        ..ChainConfig::default()
    };
    let window = Window::unit_square();
    let steps = mtgibbs::simulate::default_steps(&model, gamma.as_slice(), &window).unwrap();
    let mut chain = GibbsSampler::new(&model, &gamma, &window, &config).unwrap();
    chain.run(steps).unwrap();
    let pat = chain.pattern().unwrap();
    let cache = compute_stat_cache(&pat, &model.design).unwrap();
    let t = standard_reparam(&model.design);
    let fit = fit_newton(&cache, &t, &FitOptions::default()).unwrap();
    assert!(fit.converged && fit.iterations <= 15, "{} iterations", fit.iterations);
}

#[test]
fn planted_geyer_range_is_recovered() {
    let (phi0, z) = protocol_fields();
    let p = 3;
    let covars = CovariateSet::shared(p, true, vec![NamedField { name: "z".into(), field: z }]);
    let truth = InteractionSpec::geyer(
        InteractionSpec::range_matrix(p, 0.02, 0.04),
        InteractionSpec::constant_matrix(p, 10.0),
    )
    .unwrap();
    let design = Design::new(covars, truth).unwrap();
    let layout = design.layout().clone();
    let mut g = vec![0.0; layout.dim()];
    let intercepts = [(1.3f64 / 1.4).ln(), (1.3f64 / 1.6).ln(), 1.3f64.ln()];
    let diag = [1.1f64.ln(), 1.2f64.ln(), 0.8f64.ln()];
    for (i, effect) in [0.5, -0.5, 0.0].into_iter().enumerate() {
        let r = layout.cov_range(i);
        g[r.start] = intercepts[i];
        g[r.start + 1] = effect;
        g[layout.inter_index(i, i)] = diag[i];
    }
    let model = ModelSpec {
        design: design.clone(),
        reparam: ReparamMap::identity(design.names()),
        baseline: Some(phi0),
    };
    let gamma = ParameterVector::new(&layout, g).unwrap();
    let grid: Vec<RangeCombo> = [0.01, 0.02, 0.04]
        .into_iter()
        .map(|r| RangeCombo {
            r_within: r,
            r_between: 0.04,
            saturation: 10.0,
        })
        .collect();
    let window = Window::unit_square();
    let steps = mtgibbs::simulate::default_steps(&model, gamma.as_slice(), &window).unwrap();
    let reps = 50;
    let mut wins = 0;
    for rep in 0..reps {
        let config = ChainConfig {
            seed: 700 + rep,
            ..ChainConfig::default()
        };
        let mut chain = GibbsSampler::new(&model, &gamma, &window, &config).unwrap();
        chain.run(steps).unwrap();
        let pat = chain.pattern().unwrap();
        let res = profile_fit(&pat, &design, &Constraints::standard(p), &grid, &FitOptions::default()).unwrap();
        if res.best.r_within == 0.02 {
            wins += 1;
        }
    }
    assert!(wins * 2 > reps, "true range selected in {wins} of {reps} replications");
}

#[test]
fn loglik_does_not_depend_on_the_baseline() {
    // the cache is built from the design alone; any baseline attached to a model is ignored
    let design = common::strauss_design(2, 0.03, 0.05);
    let pat = common::random_pattern(300, 2, 8);
    let cache = compute_stat_cache(&pat, &design).unwrap();
    let t = standard_reparam(&design);
    let beta = vec![0.2; t.beta_dim()];
    let a = conditional_pseudo_loglik(&cache, &t, &beta).unwrap();
    let rect = mtgibbs::Rect::unit_square();
    for level in [1.0, 1e4] {
        let model = ModelSpec::new(design.clone(), &Constraints::standard(2), Some(common::constant_field(&rect, level)))
            .unwrap();
        let cache2 = compute_stat_cache(&pat, &model.design).unwrap();
        assert_eq!(conditional_pseudo_loglik(&cache2, &model.reparam, &beta).unwrap(), a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn loglik_is_invariant_to_point_order(seed in 0u64..10_000, n in 20usize..120) {
        let design = common::strauss_design(2, 0.06, 0.09);
        let pat = common::random_pattern(n, 2, seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut r = common::rng(seed + 1);
        for k in (1..n).rev() {
            order.swap(k, r.random_range(0..=k));
        }
        let pts: Vec<Point> = order.iter().map(|&k| pat.points()[k]).collect();
        let marks: Vec<usize> = order.iter().map(|&k| pat.marks()[k]).collect();
        let shuffled = MarkedPointPattern::new(pts, marks, Window::unit_square(), 2).unwrap();
        let t = standard_reparam(&design);
        let beta: Vec<f64> = (0..t.beta_dim()).map(|k| 0.1 * k as f64).collect();
        let a = compute_stat_cache(&pat, &design).and_then(|c| conditional_pseudo_loglik(&c, &t, &beta));
        let b = compute_stat_cache(&shuffled, &design).and_then(|c| conditional_pseudo_loglik(&c, &t, &beta));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0)),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one ordering failed"),
        }
    }

    #[test]
    fn sensitivity_is_positive_semidefinite(seed in 0u64..10_000, scale in 0.0f64..3.0) {
        let design = common::geyer_design(3, 0.05, 0.07, 1.0);
        let pat = common::random_pattern(200, 3, seed);
        let cache = compute_stat_cache(&pat, &design).unwrap();
        let t = standard_reparam(&design);
        let beta: Vec<f64> = (0..t.beta_dim()).map(|k| scale * ((k as f64) * 0.7).sin()).collect();
        let s = observed_sensitivity(&cache, &t, &beta).unwrap();
        let ll = conditional_pseudo_loglik(&cache, &t, &beta).unwrap();
        prop_assert!(ll <= 0.0);
        let min_eig = s.symmetric_eigenvalues().min();
        prop_assert!(min_eig >= -1e-9 * s.norm().max(1.0), "{}", min_eig);
    }
}
