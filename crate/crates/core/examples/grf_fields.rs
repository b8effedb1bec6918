//! Gaussian random fields with exponential covariance: draw a field, write it
//! as a raster file, and check the empirical correlation at lag φ against e⁻¹.
//!
//! `cargo run --release --example grf_fields`

use mtgibbs::covariates::{exponential_covariance, GridGeometry, GrfSampler, GrfSpec, RasterField};
use mtgibbs::Rect;

fn main() -> mtgibbs::Result<()> {
    let grid = GridGeometry::covering(&Rect::square(2.0), 40, 40)?;
    let spec = GrfSpec {
        mean: 0.0,
        sigma2: 0.2,
        phi: 0.1,
        grid,
        truncate_at_zero: false,
    };
    let sampler = GrfSampler::new(spec)?;
    let field = sampler.sample(1);
    println!(
        "one draw: min {:.3}, mean {:.3}, max {:.3}",
        field.min(),
        field.mean(),
        field.max()
    );

    let path = std::env::temp_dir().join("mtgibbs_grf_example.grid");
    field.write(&path)?;
    let back = RasterField::read(&path)?;
    println!("written to {} and read back identically: {}", path.display(), back == field);

    // cells one grid step apart horizontally sit at lag dx = 0.05; two steps give lag φ
    let lag_cells = 2;
    let lag = lag_cells as f64 * grid.dx;
    let draws = 300;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for seed in 0..draws {
        let f = sampler.sample(100 + seed);
        let a = f.get(10, 20);
        let b = f.get(10 + lag_cells, 20);
        sab += a * b;
        saa += a * a;
        sbb += b * b;
    }
    println!(
        "correlation at lag {lag:.2} over {draws} draws: {:.3} (model {:.3})",
        sab / (saa * sbb).sqrt(),
        exponential_covariance(1.0, 0.1, lag)
    );
    Ok(())
}
