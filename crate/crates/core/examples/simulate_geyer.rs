//! Birth-death Metropolis-Hastings for a two-type Geyer saturation process
//! with attraction within type 1 and inhibition between types. Prints how
//! the number of close pairs evolves along the chain.
//!
//! `cargo run --release --example simulate_geyer`

use mtgibbs::covariates::{CovariateSet, GridGeometry, RasterField};
use mtgibbs::interaction::InteractionSpec;
use mtgibbs::model::{Constraints, Design, ModelSpec, ParameterVector};
use mtgibbs::pattern::Window;
use mtgibbs::simulate::{default_steps, ChainConfig, ChainInit, GibbsSampler};
use mtgibbs::{Point, Rect};

fn close_pairs(points: &[Point], marks: &[usize], a: usize, b: usize, r: f64) -> usize {
    let mut n = 0;
    for k in 0..points.len() {
        for l in k + 1..points.len() {
            let same = (marks[k], marks[l]) == (a, b) || (marks[k], marks[l]) == (b, a);
            if same && points[k].dist(&points[l]) <= r {
                n += 1;
            }
        }
    }
    n
}

fn main() -> mtgibbs::Result<()> {
    let p = 2;
    let r = 0.05;
    let interaction = InteractionSpec::geyer(
        InteractionSpec::range_matrix(p, r, r),
        InteractionSpec::constant_matrix(p, 3.0),
    )?;
    let design = Design::new(CovariateSet::empty(p), interaction)?;
    let layout = design.layout().clone();
    let baseline = RasterField::constant(GridGeometry::covering(&Rect::unit_square(), 1, 1)?, 100.0);
    let model = ModelSpec::new(design, &Constraints::none(), Some(baseline))?;

    let mut g = vec![0.0; layout.dim()];
    g[layout.inter_index(0, 0)] = 0.5;
    g[layout.inter_index(0, 1)] = -0.3;
    g[layout.inter_index(1, 0)] = -0.3;
    let gamma = ParameterVector::new(&layout, g)?;

    let window = Window::unit_square();
    let steps = default_steps(&model, gamma.as_slice(), &window)?;
    let config = ChainConfig {
        seed: 11,
        init: ChainInit::Empty,
        ..ChainConfig::default()
    };
    let mut chain = GibbsSampler::new(&model, &gamma, &window, &config)?;
    println!("{:>9} {:>6} {:>6} {:>9} {:>9}", "proposals", "n1", "n2", "pairs 1-1", "pairs 1-2");
    for block in 0..=10 {
        if block > 0 {
            chain.run(steps / 10)?;
        }
        let st = chain.state();
        let n1 = st.marks().iter().filter(|&&m| m == 0).count();
        println!(
            "{:>9} {:>6} {:>6} {:>9} {:>9}",
            block * (steps / 10),
            n1,
            st.len() - n1,
            close_pairs(st.points(), st.marks(), 0, 0, r),
            close_pairs(st.points(), st.marks(), 0, 1, r)
        );
    }
    Ok(())
}
