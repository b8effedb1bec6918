//! Kernel estimate of the common baseline: simulate a two-type Strauss
//! pattern with a Gaussian-random-field baseline, fit the interaction, and
//! compare the estimated log baseline with the truth.
//!
//! `cargo run --release --example baseline_kernel`

use mtgibbs::baseline::{kernel_phi0, log_correlation, KernelSpec};
use mtgibbs::covariates::{CovariateSet, GridGeometry, GrfSampler, GrfSpec};
use mtgibbs::fit::{compute_stat_cache, fit_newton, FitOptions};
use mtgibbs::interaction::InteractionSpec;
use mtgibbs::model::{build_reparam, Constraints, Design, ModelSpec, ParameterVector};
use mtgibbs::pattern::Window;
use mtgibbs::simulate::{sample_gibbs_mh, ChainConfig};
use mtgibbs::Rect;

fn main() -> mtgibbs::Result<()> {
    let p = 2;
    let grid = GridGeometry::covering(&Rect::unit_square(), 25, 25)?;
    let phi0 = GrfSampler::new(GrfSpec {
        mean: 400.0,
        sigma2: 40_000.0,
        phi: 0.3,
        grid,
        truncate_at_zero: true,
    })?
    .sample(8);

    let interaction = InteractionSpec::strauss(InteractionSpec::range_matrix(p, 0.03, 0.05), None)?;
    let design = Design::new(CovariateSet::intercept_only(p), interaction)?;
    let layout = design.layout().clone();
    let model = ModelSpec::new(design.clone(), &Constraints::none(), Some(phi0.clone()))?;
    let mut g = vec![0.0; layout.dim()];
    g[layout.cov_range(0).start] = 0.4;
    for i in 0..p {
        for j in 0..p {
            g[layout.inter_index(i, j)] = if i == j { 0.7f64.ln() } else { 0.5 * 0.9f64.ln() };
        }
    }
    let gamma = ParameterVector::new(&layout, g)?;
    let config = ChainConfig {
        seed: 9,
        ..ChainConfig::default()
    };
    let pattern = sample_gibbs_mh(&model, &gamma, &Window::unit_square(), &config)?;

    println!("simulated {} points, counts {:?}", pattern.len(), pattern.counts());
    let cache = compute_stat_cache(&pattern, &design)?;
    let t = build_reparam(&layout, &design.names(), &Constraints::standard(p))?;
    let fit = fit_newton(&cache, &t, &FitOptions::default())?;
    print!("{}", fit.coefficient_table());

    // the reference-type intercept is not identified, so the estimate is φ₀ up to that factor
    let spec = KernelSpec::new(0.15, grid)?;
    let estimate = kernel_phi0(&pattern, &design, &fit.gamma_hat, &spec)?;
    let truth_log = phi0.map(|v| v.max(1e-9).ln());
    println!(
        "{} points; estimate range {:.1}..{:.1}; correlation of log estimate with log truth {:.3}",
        pattern.len(),
        estimate.min(),
        estimate.max(),
        log_correlation(&estimate, &truth_log)?
    );
    Ok(())
}
