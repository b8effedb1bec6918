//! Simulate a three-type Strauss pattern on the unit square, then fit it by
//! conditional pseudo likelihood and print estimates with sandwich intervals.
//!
//! `cargo run --release --example fit_strauss`

use mtgibbs::covariates::{CovariateSet, GridGeometry, GrfSampler, GrfSpec, NamedField};
use mtgibbs::fit::{compute_stat_cache, fit_newton, FitOptions};
use mtgibbs::interaction::InteractionSpec;
use mtgibbs::model::{build_reparam, Constraints, Design, ModelSpec, ParameterVector};
use mtgibbs::pattern::Window;
use mtgibbs::simulate::{sample_gibbs_mh, ChainConfig};
use mtgibbs::Rect;

fn main() -> mtgibbs::Result<()> {
    let p = 3;
    let grid = GridGeometry::covering(&Rect::unit_square(), 25, 25)?;
    let grf = |mean, sigma2| GrfSpec {
        mean,
        sigma2,
        phi: 0.1,
        grid,
        truncate_at_zero: mean > 0.0,
    };
    let phi0 = GrfSampler::new(grf(350.0, 900.0))?.sample(1);
    let z = GrfSampler::new(grf(0.0, 0.2))?.sample(2);

    let covariates = CovariateSet::shared(p, true, vec![NamedField::new("z", z)]);
    let interaction = InteractionSpec::strauss(InteractionSpec::range_matrix(p, 0.02, 0.04), None)?;
    let design = Design::new(covariates, interaction)?;
    let model = ModelSpec::new(design.clone(), &Constraints::none(), Some(phi0))?;

    // truth: intercepts log 1.6, covariate effects (1/2, -1/2, 0), pair factors 0.8 within and 0.9 between
    let layout = design.layout();
    let mut gamma = vec![0.0; design.dim()];
    for (i, effect) in [0.5, -0.5, 0.0].into_iter().enumerate() {
        let r = layout.cov_range(i);
        gamma[r.start] = 1.6f64.ln();
        gamma[r.start + 1] = effect;
        for j in 0..p {
            gamma[layout.inter_index(i, j)] = if i == j { 0.8f64.ln() } else { 0.5 * 0.9f64.ln() };
        }
    }
    let gamma = ParameterVector::new(layout, gamma)?;

    let config = ChainConfig {
        seed: 3,
        ..ChainConfig::default()
    };
    let pattern = sample_gibbs_mh(&model, &gamma, &Window::unit_square(), &config)?;
    println!("simulated {} points, counts per type {:?}", pattern.len(), pattern.counts());

    let cache = compute_stat_cache(&pattern, &design)?;
    let t = build_reparam(layout, &design.names(), &Constraints::standard(p))?;
    let fit = fit_newton(&cache, &t, &FitOptions::default())?;
    println!(
        "{} points in the eroded domain, converged in {} iterations, log pseudo-likelihood {:.4}",
        fit.n_points, fit.iterations, fit.logpl
    );
    print!("{}", fit.coefficient_table());
    Ok(())
}
