//! Marked point patterns: CSV round trip with a window sidecar, erosion,
//! fixed-radius neighbor queries and local interaction statistics.
//!
//! `cargo run --release --example patterns_and_neighbors`

use mtgibbs::covariates::CovariateSet;
use mtgibbs::interaction::{local_contribution, InteractionSpec};
use mtgibbs::model::Design;
use mtgibbs::pattern::{load_pattern, MarkedPointPattern, NeighborIndex, Window};
use mtgibbs::Point;
use rand::{Rng, SeedableRng};

fn main() -> mtgibbs::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let n = 500;
    let points: Vec<Point> = (0..n).map(|_| Point::new(rng.random(), rng.random())).collect();
    let marks: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let pattern = MarkedPointPattern::new(points, marks, Window::unit_square(), 3)?;

    let dir = std::env::temp_dir().join("mtgibbs_pattern_example");
    std::fs::create_dir_all(&dir).map_err(|e| mtgibbs::Error::io(&dir, e))?;
    let csv = dir.join("pattern.csv");
    pattern.write_csv(&csv)?;
    pattern.window().write_json(dir.join("pattern.window.json"))?;
    let back = load_pattern(&csv, 3)?;
    println!("{} points written to {} and read back, counts {:?}", back.len(), csv.display(), back.counts());

    let eroded = pattern.window().erode(0.04)?;
    let inside = pattern.points().iter().filter(|u| eroded.contains(u)).count();
    println!("erosion by 0.04 keeps area {:.4} and {inside} points", eroded.area());

    let index = NeighborIndex::new(&pattern, 0.05);
    let u = Point::new(0.5, 0.5);
    for (mark, label) in [(None, "any type"), (Some(0), "type 1")] {
        let near = index.neighbors_within(&u, 0.05, mark);
        println!("points of {label} within 0.05 of (0.5, 0.5): {}", near.len());
    }

    let spec = InteractionSpec::strauss(InteractionSpec::range_matrix(3, 0.02, 0.04), None)?;
    let design = Design::new(CovariateSet::intercept_only(3), spec)?;
    let names = design.names();
    for i in 0..3 {
        let lc = local_contribution(design.interaction(), design.covariates(), design.layout(), &u, i, &index)?;
        let nonzero: Vec<String> = lc
            .values
            .iter()
            .zip(&names)
            .filter(|(v, _)| **v != 0.0)
            .map(|(v, n)| format!("{n}={v}"))
            .collect();
        println!("statistic of a type-{} point at (0.5, 0.5): {}", i + 1, nonzero.join(" "));
    }
    Ok(())
}
