#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use mtgibbs::covariates::{CovariateSet, GridGeometry, NamedField, RasterField};
use mtgibbs::interaction::InteractionSpec;
use mtgibbs::model::Design;
use mtgibbs::pattern::{MarkedPointPattern, Window};
use mtgibbs::simulate::{ProtocolTruth, StudyConfig};
use mtgibbs::{Point, Rect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed of the shared protocol fields.
pub const FIELD_SEED: u64 = 20240607;

/// Cells per side of the protocol GRF grid on `[0,2]²`.
pub const FIELD_CELLS: usize = 50;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` uniform points in `rect` with uniform marks in `0..p`.
pub fn uniform_points(rng: &mut ChaCha8Rng, n: usize, p: usize, rect: &Rect) -> (Vec<Point>, Vec<usize>) {
    let pts = (0..n)
        .map(|_| {
            Point::new(
                rect.x_min + rng.random::<f64>() * rect.width(),
                rect.y_min + rng.random::<f64>() * rect.height(),
            )
        })
        .collect();
    let marks = (0..n).map(|_| rng.random_range(0..p)).collect();
    (pts, marks)
}

pub fn random_pattern(n: usize, p: usize, seed: u64) -> MarkedPointPattern {
    let (pts, marks) = uniform_points(&mut rng(seed), n, p, &Rect::unit_square());
    MarkedPointPattern::new(pts, marks, Window::unit_square(), p).unwrap()
}

/// A smooth covariate on a 40×40 grid over `[0,1]²`.
pub fn smooth_field() -> RasterField {
    let grid = GridGeometry::covering(&Rect::unit_square(), 40, 40).unwrap();
    RasterField::from_fn(grid, |u| (3.0 * u.x).sin() + 0.5 * (2.0 * u.y).cos())
}

pub fn constant_field(rect: &Rect, value: f64) -> RasterField {
    RasterField::constant(GridGeometry::covering(rect, 1, 1).unwrap(), value)
}

/// Intercept plus the smooth covariate `z`, shared by all types.
pub fn covariate_set(p: usize) -> CovariateSet {
    CovariateSet::shared(p, true, vec![NamedField::new("z", smooth_field())])
}

pub fn strauss_design(p: usize, r_within: f64, r_between: f64) -> Design {
    let spec = InteractionSpec::strauss(InteractionSpec::range_matrix(p, r_within, r_between), None).unwrap();
    Design::new(covariate_set(p), spec).unwrap()
}

pub fn geyer_design(p: usize, r_within: f64, r_between: f64, c: f64) -> Design {
    let spec = InteractionSpec::geyer(
        InteractionSpec::range_matrix(p, r_within, r_between),
        InteractionSpec::constant_matrix(p, c),
    )
    .unwrap();
    Design::new(covariate_set(p), spec).unwrap()
}

/// Baseline and covariate fields of the three-type protocol, simulated once.
pub fn protocol_fields() -> (Arc<RasterField>, Arc<RasterField>) {
    static FIELDS: OnceLock<(Arc<RasterField>, Arc<RasterField>)> = OnceLock::new();
    FIELDS
        .get_or_init(|| {
            let cfg = StudyConfig::protocol(ProtocolTruth::Poisson, vec![1.0], 1, FIELD_SEED, FIELD_CELLS);
            let (phi0, z) = cfg.simulate_fields().unwrap();
            (Arc::new(phi0), Arc::new(z))
        })
        .clone()
}

/// Relative error with unit floor on the denominator.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
