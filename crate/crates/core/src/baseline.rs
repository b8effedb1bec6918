//! Kernel estimate of the common baseline `φ₀`:
//!
//! ```text
//! φ̂₀(v) = (1/p) Σ_{(u,i) ∈ y} k(u − v) / exp[γᵀ v{(u,i), y ∖ (u,i)}]
//! ```
//!
//! with the two-dimensional Epanechnikov kernel
//! `k(x) = 2/(πω²) (1 − ‖x‖²/ω²)` on the disc of radius `ω`. No edge correction.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::{GridGeometry, RasterField};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::{dot, Design};
use crate::pattern::{MarkedPointPattern, NeighborIndex};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// Support radius `ω`.
    pub bandwidth: f64,
    /// Output raster geometry.
    pub grid: GridGeometry,
}

impl KernelSpec {
    pub fn new(bandwidth: f64, grid: GridGeometry) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth {bandwidth} must be positive")));
        }
        Ok(KernelSpec { bandwidth, grid })
    }
}

/// Epanechnikov kernel at squared distance `d2`.
#[inline]
pub fn epanechnikov(d2: f64, bandwidth: f64) -> f64 {
    let w2 = bandwidth * bandwidth;
    if d2 > w2 {
        0.0
    } else {
        2.0 / (std::f64::consts::PI * w2) * (1.0 - d2 / w2)
    }
}

/// Per-point weights `1 / exp[γᵀ v{(u,i), y ∖ (u,i)}]`.
pub fn point_weights(pattern: &MarkedPointPattern, design: &Design, gamma: &[f64]) -> Result<Vec<f64>> {
    if gamma.len() != design.dim() {
        return Err(Error::DimensionMismatch {
            expected: design.dim(),
            got: gamma.len(),
        });
    }
    let index = NeighborIndex::new(pattern, design.interaction().max_range().max(f64::MIN_POSITIVE));
    (0..pattern.len())
        .into_par_iter()
        .map(|n| {
            let (u, i) = pattern.point(n);
            let lc = design.local_contribution(&u, i, &index)?;
            if !lc.feasible {
                let (m, d) = pattern
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != n)
                    .map(|(m, (v, _))| (m, u.dist(&v)))
                    .fold((n, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
                return Err(Error::HardCoreViolation {
                    point: n,
                    neighbor: m,
                    distance: d,
                });
            }
            Ok((-dot(gamma, &lc.values)).exp())
        })
        .collect()
}

/// `φ̂₀` at the cell centers of `spec.grid`.
pub fn kernel_phi0(pattern: &MarkedPointPattern, design: &Design, gamma: &[f64], spec: &KernelSpec) -> Result<RasterField> {
    let weights = point_weights(pattern, design, gamma)?;
    kernel_sum(pattern.points(), &weights, pattern.num_types() as f64, spec)
}

/// `(1/norm) Σ_u w_u k(u − v)` at the cell centers of `spec.grid`.
pub fn kernel_sum(points: &[Point], weights: &[f64], norm: f64, spec: &KernelSpec) -> Result<RasterField> {
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: weights.len(),
        });
    }
    let grid = &spec.grid;
    let bounds = grid.extent();
    let lo = points.iter().fold(bounds, |r, u| crate::geometry::Rect {
        x_min: r.x_min.min(u.x),
        x_max: r.x_max.max(u.x),
        y_min: r.y_min.min(u.y),
        y_max: r.y_max.max(u.y),
    });
    let marks = vec![0; points.len()];
    let index = NeighborIndex::from_points(points, &marks, &lo, spec.bandwidth);
    let omega = spec.bandwidth;
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|c| {
            let v = grid.center(c % grid.n_x, c / grid.n_x);
            let mut acc = 0.0;
            index.for_each_index_within(&v, omega, |k| {
                acc += weights[k] * epanechnikov(points[k].dist2(&v), omega);
            });
            acc / norm
        })
        .collect();
    RasterField::new(*grid, values)
}

/// Replaces every cell by the mean of its region. `labels` shares the
/// geometry of `field`; cells whose label is NaN or negative keep their value.
pub fn average_by_region(field: &RasterField, labels: &RasterField) -> Result<RasterField> {
    if field.geometry() != labels.geometry() {
        return Err(Error::InvalidRaster("label raster geometry differs from the estimate".into()));
    }
    let mut sums: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for (&v, &l) in field.values().iter().zip(labels.values()) {
        if l.is_finite() && l >= 0.0 {
            let e = sums.entry(l.round() as i64).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    let values = field
        .values()
        .iter()
        .zip(labels.values())
        .map(|(&v, &l)| {
            if l.is_finite() && l >= 0.0 {
                let (s, n) = sums[&(l.round() as i64)];
                s / n as f64
            } else {
                v
            }
        })
        .collect();
    RasterField::new(*field.geometry(), values)
}

/// Pearson correlation of `log φ̂₀` and `reference` over cells where the estimate is positive.
pub fn log_correlation(estimate: &RasterField, reference: &RasterField) -> Result<f64> {
    if estimate.geometry() != reference.geometry() {
        return Err(Error::InvalidRaster("reference raster geometry differs from the estimate".into()));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&e, &r) in estimate.values().iter().zip(reference.values()) {
        if e > 0.0 && r.is_finite() {
            xs.push(e.ln());
            ys.push(r);
        }
    }
    pearson(&xs, &ys)
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Err(Error::InvalidRaster("too few cells for a correlation".into()));
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariates::CovariateSet;
    use crate::geometry::Rect;
    use crate::interaction::InteractionSpec;
    use crate::pattern::Window;
    use proptest::prelude::*;

    fn poisson_design(p: usize) -> Design {
        Design::new(
            CovariateSet::intercept_only(p),
            InteractionSpec::strauss(InteractionSpec::range_matrix(p, 0.0, 0.0), None).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_point_gives_kernel_at_origin() {
        let w = 0.1;
        let grid = GridGeometry::new([0.45, 0.45], 0.1, 0.1, 1, 1).unwrap();
        let pat = MarkedPointPattern::new(vec![Point::new(0.5, 0.5)], vec![0], Window::unit_square(), 1).unwrap();
        let est = kernel_phi0(&pat, &poisson_design(1), &[0.0, 0.0], &KernelSpec::new(w, grid).unwrap()).unwrap();
        assert!((est.values()[0] - 2.0 / (std::f64::consts::PI * w * w)).abs() < 1e-12);
    }

    #[test]
    fn kernel_integrates_to_one() {
        let w: f64 = 0.3;
        let n = 600;
        let h = 2.0 * w / n as f64;
        let mut total = 0.0;
        for a in 0..n {
            for b in 0..n {
                let x = -w + (a as f64 + 0.5) * h;
                let y = -w + (b as f64 + 0.5) * h;
                total += epanechnikov(x * x + y * y, w) * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn cells_far_from_points_are_zero() {
        let grid = GridGeometry::covering(&Rect::unit_square(), 10, 10).unwrap();
        let pat = MarkedPointPattern::new(vec![Point::new(0.05, 0.05)], vec![0], Window::unit_square(), 1).unwrap();
        let est = kernel_phi0(&pat, &poisson_design(1), &[0.0, 0.0], &KernelSpec::new(0.1, grid).unwrap()).unwrap();
        assert!(est.get(0, 0) > 0.0);
        assert_eq!(est.get(9, 9), 0.0);
    }

    #[test]
    fn region_average() {
        let g = GridGeometry::covering(&Rect::unit_square(), 2, 1).unwrap();
        let f = RasterField::new(g, vec![1.0, 3.0]).unwrap();
        let same = RasterField::new(g, vec![0.0, 0.0]).unwrap();
        assert_eq!(average_by_region(&f, &same).unwrap().values(), &[2.0, 2.0]);
        let none = RasterField::new(g, vec![f64::NAN, 1.0]).unwrap();
        assert_eq!(average_by_region(&f, &none).unwrap().values(), &[1.0, 3.0]);
    }

    proptest! {
        #[test]
        fn common_factor_divides_estimate(shift in -2.0f64..2.0, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Point> = (0..30).map(|_| Point::new(rng.random(), rng.random())).collect();
            let marks: Vec<usize> = (0..30).map(|_| rng.random_range(0..2)).collect();
            let pat = MarkedPointPattern::new(pts, marks, Window::unit_square(), 2).unwrap();
            let d = poisson_design(2);
            let spec = KernelSpec::new(0.2, GridGeometry::covering(&Rect::unit_square(), 8, 8).unwrap()).unwrap();
            let g0 = vec![0.3, 0.0, 0.0, -0.2, 0.0, 0.0];
            let mut g1 = g0.clone();
            g1[d.layout().cov_range(0).start] += shift;
            g1[d.layout().cov_range(1).start] += shift;
            let a = kernel_phi0(&pat, &d, &g0, &spec).unwrap();
            let b = kernel_phi0(&pat, &d, &g1, &spec).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x / shift.exp() - y).abs() <= 1e-12 * x.abs().max(1e-300));
            }
        }
    }
}
