//! Multi-type Strauss hard-core and Geyer saturation interactions.
//!
//! The sufficient statistic `v(y)` stacks, for each type `i`, the covariate
//! sum `Σ z_i(u)` followed by the interaction statistics `v_ij(x_i, x_j)` for
//! `j = i` first and then `j ≠ i` in ascending order (see [`Layout`]). The
//! local contribution `v{(u,i), y} = v{y ∪ (u,i)} − v{y ∖ (u,i)}` is computed
//! here from the neighbors of `u` only.

use serde::{Deserialize, Serialize};

use crate::covariates::CovariateSet;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::pattern::{PointContext, COINCIDENCE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[serde(alias = "strauss", alias = "strauss_hardcore")]
    StraussHardcore,
    #[serde(alias = "geyer", alias = "geyer_saturation")]
    GeyerSaturation,
}

/// Interaction family with its `p × p` range, hard-core and saturation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSpec {
    family: Family,
    p: usize,
    ranges: Vec<f64>,
    hardcore: Vec<f64>,
    saturation: Vec<f64>,
}

/// JSON form: `{"family": "strauss", "R": [[..]], "r": [[..]]}` or
/// `{"family": "geyer", "R": [[..]], "c": [[..]]}`, matrices row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub family: Family,
    #[serde(rename = "R")]
    pub ranges: Vec<Vec<f64>>,
    #[serde(rename = "r", default, skip_serializing_if = "Option::is_none")]
    pub hardcore: Option<Vec<Vec<f64>>>,
    #[serde(rename = "c", default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<Vec<Vec<f64>>>,
}

fn flatten(p: usize, name: &str, m: &[Vec<f64>]) -> Result<Vec<f64>> {
    if m.len() != p || m.iter().any(|row| row.len() != p) {
        return Err(Error::InvalidInteraction(format!("{name} must be a {p}x{p} matrix")));
    }
    Ok(m.iter().flatten().copied().collect())
}

impl InteractionSpec {
    /// Multi-type Strauss hard-core; `r = None` gives the plain Strauss model.
    pub fn strauss(ranges: Vec<Vec<f64>>, hardcore: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let p = ranges.len();
        let r = flatten(p, "R", &ranges)?;
        let h = match hardcore {
            Some(h) => flatten(p, "r", &h)?,
            None => vec![0.0; p * p],
        };
        let spec = InteractionSpec {
            family: Family::StraussHardcore,
            p,
            ranges: r,
            hardcore: h,
            saturation: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn geyer(ranges: Vec<Vec<f64>>, saturation: Vec<Vec<f64>>) -> Result<Self> {
        let p = ranges.len();
        let spec = InteractionSpec {
            family: Family::GeyerSaturation,
            p,
            ranges: flatten(p, "R", &ranges)?,
            hardcore: Vec::new(),
            saturation: flatten(p, "c", &saturation)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Ranges `r_within` on the diagonal and `r_between` elsewhere.
    pub fn range_matrix(p: usize, r_within: f64, r_between: f64) -> Vec<Vec<f64>> {
        (0..p)
            .map(|i| (0..p).map(|j| if i == j { r_within } else { r_between }).collect())
            .collect()
    }

    pub fn constant_matrix(p: usize, value: f64) -> Vec<Vec<f64>> {
        vec![vec![value; p]; p]
    }

    pub fn from_config(cfg: &InteractionConfig) -> Result<Self> {
        match cfg.family {
            Family::StraussHardcore => {
                if cfg.saturation.is_some() {
                    return Err(Error::InvalidInteraction(
                        "saturation matrix \"c\" given for a Strauss model".into(),
                    ));
                }
                InteractionSpec::strauss(cfg.ranges.clone(), cfg.hardcore.clone())
            }
            Family::GeyerSaturation => {
                if cfg.hardcore.is_some() {
                    return Err(Error::InvalidInteraction(
                        "hard-core matrix \"r\" given for a Geyer model".into(),
                    ));
                }
                let c = cfg.saturation.clone().ok_or_else(|| {
                    Error::InvalidInteraction("Geyer model needs a saturation matrix \"c\"".into())
                })?;
                InteractionSpec::geyer(cfg.ranges.clone(), c)
            }
        }
    }

    pub fn to_config(&self) -> InteractionConfig {
        let unflatten = |v: &[f64]| v.chunks(self.p).map(<[f64]>::to_vec).collect::<Vec<_>>();
        InteractionConfig {
            family: self.family,
            ranges: unflatten(&self.ranges),
            hardcore: (self.family == Family::StraussHardcore).then(|| unflatten(&self.hardcore)),
            saturation: (self.family == Family::GeyerSaturation).then(|| unflatten(&self.saturation)),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidInteraction("need at least one type".into()));
        }
        for (k, &r) in self.ranges.iter().enumerate() {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidInteraction(format!(
                    "R[{},{}] = {r} must be finite and >= 0",
                    k / self.p + 1,
                    k % self.p + 1
                )));
            }
        }
        if self.family == Family::StraussHardcore {
            for (k, (&h, &r)) in self.hardcore.iter().zip(&self.ranges).enumerate() {
                if !(h >= 0.0 && h <= r) {
                    return Err(Error::InvalidInteraction(format!(
                        "hard core r[{},{}] = {h} must satisfy 0 <= r <= R = {r}",
                        k / self.p + 1,
                        k % self.p + 1
                    )));
                }
            }
        } else {
            for (k, &c) in self.saturation.iter().enumerate() {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidInteraction(format!(
                        "saturation c[{},{}] = {c} must be positive and finite",
                        k / self.p + 1,
                        k % self.p + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn num_types(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn range(&self, i: usize, j: usize) -> f64 {
        self.ranges[i * self.p + j]
    }

    /// Hard-core distance (zero for Geyer).
    #[inline]
    pub fn hardcore(&self, i: usize, j: usize) -> f64 {
        match self.family {
            Family::StraussHardcore => self.hardcore[i * self.p + j],
            Family::GeyerSaturation => 0.0,
        }
    }

    /// Saturation threshold (infinite for Strauss).
    #[inline]
    pub fn saturation(&self, i: usize, j: usize) -> f64 {
        match self.family {
            Family::StraussHardcore => f64::INFINITY,
            Family::GeyerSaturation => self.saturation[i * self.p + j],
        }
    }

    pub fn has_hardcore(&self) -> bool {
        self.family == Family::StraussHardcore && self.hardcore.iter().any(|&h| h > 0.0)
    }

    /// `R∨ = max R_ij`.
    pub fn max_range(&self) -> f64 {
        self.ranges.iter().copied().fold(0.0, f64::max)
    }

    /// Largest range involving type `i` in either order.
    fn max_range_for(&self, i: usize) -> f64 {
        (0..self.p)
            .map(|j| self.range(i, j).max(self.range(j, i)))
            .fold(0.0, f64::max)
    }

    /// Markov (finite-range) distance: `R∨` for Strauss, `2R∨` for Geyer.
    pub fn markov_range(&self) -> f64 {
        match self.family {
            Family::StraussHardcore => self.max_range(),
            Family::GeyerSaturation => 2.0 * self.max_range(),
        }
    }

    /// Replaces within-type ranges by `r_within`, between-type by `r_between`
    /// and (Geyer) every saturation threshold by `c`. Hard cores are clipped to the new ranges.
    pub fn with_ranges(&self, r_within: f64, r_between: f64, c: f64) -> Result<Self> {
        let mut out = self.clone();
        for i in 0..self.p {
            for j in 0..self.p {
                let k = i * self.p + j;
                out.ranges[k] = if i == j { r_within } else { r_between };
                if out.family == Family::StraussHardcore {
                    out.hardcore[k] = out.hardcore[k].min(out.ranges[k]);
                } else {
                    out.saturation[k] = c;
                }
            }
        }
        out.validate()?;
        Ok(out)
    }
}

impl InteractionSpec {
    /// Copy with the range of every ordered pair `(i, j)` for which `active(i, j)`
    /// is false set to zero, unless the pair carries a hard core. Used to skip
    /// statistics whose coefficient is zero.
    pub fn pruned(&self, active: impl Fn(usize, usize) -> bool) -> Self {
        let mut out = self.clone();
        for i in 0..self.p {
            for j in 0..self.p {
                let k = i * self.p + j;
                if !active(i, j) && self.hardcore(i, j) == 0.0 && self.hardcore(j, i) == 0.0 {
                    out.ranges[k] = 0.0;
                }
            }
        }
        out
    }
}

/// Free-function form of [`InteractionSpec::markov_range`].
pub fn markov_range(spec: &InteractionSpec) -> f64 {
    spec.markov_range()
}

/// Positions of the blocks of the stacked parameter `γ` and statistic `v`.
///
/// For type `i` the block is `[γ_i0 (covariates); γ_ii; γ_ij for j ≠ i ascending]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    p: usize,
    cov_dims: Vec<usize>,
    starts: Vec<usize>,
    k: usize,
}

impl Layout {
    pub fn new(cov_dims: Vec<usize>) -> Self {
        let p = cov_dims.len();
        let mut starts = Vec::with_capacity(p);
        let mut k = 0;
        for &d in &cov_dims {
            starts.push(k);
            k += d + p;
        }
        Layout {
            p,
            cov_dims,
            starts,
            k,
        }
    }

    pub fn for_covariates(covars: &CovariateSet) -> Self {
        Layout::new(covars.dims())
    }

    pub fn num_types(&self) -> usize {
        self.p
    }

    /// Stacked dimension `k`.
    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn cov_dim(&self, i: usize) -> usize {
        self.cov_dims[i]
    }

    /// Index range of `γ_i0`.
    pub fn cov_range(&self, i: usize) -> std::ops::Range<usize> {
        self.starts[i]..self.starts[i] + self.cov_dims[i]
    }

    /// Index of the scalar `γ_ij`.
    #[inline]
    pub fn inter_index(&self, i: usize, j: usize) -> usize {
        let base = self.starts[i] + self.cov_dims[i];
        base + match j.cmp(&i) {
            std::cmp::Ordering::Equal => 0,
            std::cmp::Ordering::Less => 1 + j,
            std::cmp::Ordering::Greater => j,
        }
    }

    /// Parameter labels: `"<covariate>[i]"` for first-order terms and
    /// `"int[i,j]"` for interactions, types 1-based.
    pub fn names(&self, covars: &CovariateSet) -> Vec<String> {
        let mut out = vec![String::new(); self.k];
        for i in 0..self.p {
            for (slot, name) in self.cov_range(i).zip(covars.names(i)) {
                out[slot] = format!("{name}[{}]", i + 1);
            }
            for j in 0..self.p {
                out[self.inter_index(i, j)] = format!("int[{},{}]", i + 1, j + 1);
            }
        }
        out
    }
}

/// `v{(u,i), y}` together with hard-core feasibility.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalContribution {
    pub values: Vec<f64>,
    /// False iff adding `(u,i)` violates a hard core (the `−∞` case);
    /// interaction entries are then meaningless.
    pub feasible: bool,
}

/// `s(u, x_j, R) = (1/2)^{1(same_type)} #{v ∈ x_j ∖ u : ‖u − v‖ ≤ R}`.
pub fn pair_count(u: &Point, x_j: &[Point], r: f64, same_type: bool) -> f64 {
    let n = x_j
        .iter()
        .filter(|v| !coincident(u, v) && u.dist2(v) <= r * r)
        .count() as f64;
    if same_type {
        0.5 * n
    } else {
        n
    }
}

#[inline]
fn coincident(u: &Point, v: &Point) -> bool {
    u.dist2(v) <= COINCIDENCE_TOL * COINCIDENCE_TOL
}

/// Batch statistic `v_ij(x_i, x_j)`; `None` when a Strauss hard core is violated.
pub fn interaction_statistic(
    spec: &InteractionSpec,
    x_i: &[Point],
    x_j: &[Point],
    i: usize,
    j: usize,
) -> Option<f64> {
    let r = spec.range(i, j);
    let same = i == j;
    match spec.family() {
        Family::StraussHardcore => {
            let h = spec.hardcore(i, j);
            if h > 0.0 {
                for u in x_i {
                    for v in x_j {
                        if !coincident(u, v) && u.dist2(v) < h * h {
                            return None;
                        }
                    }
                }
            }
            Some(x_i.iter().map(|u| pair_count(u, x_j, r, same)).sum())
        }
        Family::GeyerSaturation => {
            let c = spec.saturation(i, j);
            Some(x_i.iter().map(|u| pair_count(u, x_j, r, same).min(c)).sum())
        }
    }
}

/// Computes `v{(u,i), y}` into `out` (length `layout.dim()`), treating any
/// point of `ctx` located at `u` as absent. Returns feasibility.
pub fn local_contribution_into<C: PointContext>(
    spec: &InteractionSpec,
    covars: &CovariateSet,
    layout: &Layout,
    u: &Point,
    i: usize,
    ctx: &C,
    out: &mut [f64],
) -> Result<bool> {
    out.fill(0.0);
    let cov = layout.cov_range(i);
    covars.eval_into(i, u, &mut out[cov])?;
    let feasible = match spec.family() {
        Family::StraussHardcore => strauss_into(spec, layout, u, i, ctx, out),
        Family::GeyerSaturation => {
            geyer_into(spec, layout, u, i, ctx, out);
            true
        }
    };
    Ok(feasible)
}

pub fn local_contribution<C: PointContext>(
    spec: &InteractionSpec,
    covars: &CovariateSet,
    layout: &Layout,
    u: &Point,
    i: usize,
    ctx: &C,
) -> Result<LocalContribution> {
    let mut values = vec![0.0; layout.dim()];
    let feasible = local_contribution_into(spec, covars, layout, u, i, ctx, &mut values)?;
    Ok(LocalContribution { values, feasible })
}

fn strauss_into<C: PointContext>(
    spec: &InteractionSpec,
    layout: &Layout,
    u: &Point,
    i: usize,
    ctx: &C,
    out: &mut [f64],
) -> bool {
    let p = spec.num_types();
    let reach = spec.max_range_for(i);
    let mut feasible = true;
    ctx.for_each_within(u, reach, None, |v, j| {
        if coincident(u, &v) {
            return;
        }
        let d2 = u.dist2(&v);
        if j == i {
            let h = spec.hardcore(i, i);
            if d2 < h * h {
                feasible = false;
            }
            let r = spec.range(i, i);
            if d2 <= r * r {
                // (1/2)·(own new pairs) + (1/2)·(one more neighbor for each of them)
                out[layout.inter_index(i, i)] += 1.0;
            }
        } else {
            let (h1, h2) = (spec.hardcore(i, j), spec.hardcore(j, i));
            if d2 < h1 * h1 || d2 < h2 * h2 {
                feasible = false;
            }
            let r1 = spec.range(i, j);
            if d2 <= r1 * r1 {
                out[layout.inter_index(i, j)] += 1.0;
            }
            let r2 = spec.range(j, i);
            if d2 <= r2 * r2 {
                out[layout.inter_index(j, i)] += 1.0;
            }
        }
    });
    debug_assert!(p == layout.num_types());
    feasible
}

fn geyer_into<C: PointContext>(
    spec: &InteractionSpec,
    layout: &Layout,
    u: &Point,
    i: usize,
    ctx: &C,
    out: &mut [f64],
) {
    let p = spec.num_types();
    for j in 0..p {
        if j == i {
            let r = spec.range(i, i);
            if r == 0.0 {
                continue;
            }
            let c = spec.saturation(i, i);
            let mut own = 0usize;
            let mut gain = 0.0;
            ctx.for_each_within(u, r, Some(i), |w, _| {
                if coincident(u, &w) {
                    return;
                }
                own += 1;
                // neighbors of w in x_i ∖ {u, w}
                let mut m = 0usize;
                ctx.for_each_within(&w, r, Some(i), |z, _| {
                    if !coincident(&z, &w) && !coincident(&z, u) {
                        m += 1;
                    }
                });
                let before = 0.5 * m as f64;
                gain += (before + 0.5).min(c) - before.min(c);
            });
            out[layout.inter_index(i, i)] = (0.5 * own as f64).min(c) + gain;
        } else {
            // u as a member of the first argument of v_ij
            let r1 = spec.range(i, j);
            if r1 > 0.0 {
                let mut n = 0usize;
                ctx.for_each_within(u, r1, Some(j), |w, _| {
                    if !coincident(u, &w) {
                        n += 1;
                    }
                });
                out[layout.inter_index(i, j)] = (n as f64).min(spec.saturation(i, j));
            }

            // u as a member of the second argument of v_ji
            let r2 = spec.range(j, i);
            if r2 == 0.0 {
                continue;
            }
            let c2 = spec.saturation(j, i);
            let mut gain = 0.0;
            ctx.for_each_within(u, r2, Some(j), |w, _| {
                if coincident(u, &w) {
                    return;
                }
                let mut m = 0usize;
                ctx.for_each_within(&w, r2, Some(i), |z, _| {
                    if !coincident(&z, u) {
                        m += 1;
                    }
                });
                let before = m as f64;
                gain += (before + 1.0).min(c2) - before.min(c2);
            });
            out[layout.inter_index(j, i)] = gain;
        }
    }
}

/// Full statistic `v(y)` of a configuration by direct enumeration
/// (`None` if a hard core is violated).
pub fn full_statistic(
    spec: &InteractionSpec,
    covars: &CovariateSet,
    layout: &Layout,
    points: &[Point],
    marks: &[usize],
) -> Result<Option<Vec<f64>>> {
    let p = spec.num_types();
    let by_type: Vec<Vec<Point>> = (0..p)
        .map(|t| {
            points
                .iter()
                .zip(marks)
                .filter(|(_, &m)| m == t)
                .map(|(u, _)| *u)
                .collect()
        })
        .collect();
    let mut v = vec![0.0; layout.dim()];
    for (u, &m) in points.iter().zip(marks) {
        let z = covars.eval(m, u)?;
        for (slot, zz) in layout.cov_range(m).zip(z) {
            v[slot] += zz;
        }
    }
    for i in 0..p {
        for j in 0..p {
            match interaction_statistic(spec, &by_type[i], &by_type[j], i, j) {
                Some(s) => v[layout.inter_index(i, j)] = s,
                None => return Ok(None),
            }
        }
    }
    Ok(Some(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;
    use crate::pattern::NeighborIndex;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    fn index(points: &[Point], marks: &[usize], cell: f64) -> NeighborIndex {
        NeighborIndex::from_points(points, marks, &Rect::new(-1.0, 1.0, -1.0, 1.0), cell)
    }

    #[test]
    fn pair_count_examples() {
        let u = Point::new(0.0, 0.0);
        let xj = pts(&[(0.01, 0.0), (0.05, 0.0)]);
        assert_eq!(pair_count(&u, &xj, 0.02, false), 1.0);
        assert_eq!(pair_count(&u, &xj, 0.02, true), 0.5);
        assert_eq!(pair_count(&u, &[], 0.02, false), 0.0);
    }

    #[test]
    fn strauss_within_counts_pairs_once() {
        let spec = InteractionSpec::strauss(vec![vec![0.02]], None).unwrap();
        let x = pts(&[(0.0, 0.0), (0.015, 0.0)]);
        assert_eq!(interaction_statistic(&spec, &x, &x, 0, 0), Some(1.0));
    }

    #[test]
    fn strauss_hardcore_violation_is_infeasible() {
        let spec = InteractionSpec::strauss(
            InteractionSpec::constant_matrix(2, 0.04),
            Some(vec![vec![0.0, 0.02], vec![0.02, 0.0]]),
        )
        .unwrap();
        let xi = pts(&[(0.0, 0.0)]);
        let xj = pts(&[(0.015, 0.0)]);
        assert_eq!(interaction_statistic(&spec, &xi, &xj, 0, 1), None);
        assert_eq!(interaction_statistic(&spec, &xi, &xi, 0, 0), Some(0.0));
    }

    #[test]
    fn geyer_asymmetry_example() {
        let spec = InteractionSpec::geyer(
            InteractionSpec::constant_matrix(2, 0.1),
            InteractionSpec::constant_matrix(2, 1.0),
        )
        .unwrap();
        let xi = pts(&[(0.0, 0.0)]);
        let xj = pts(&[(0.01, 0.0), (0.0, 0.01)]);
        assert_eq!(interaction_statistic(&spec, &xi, &xj, 0, 1), Some(1.0));
        assert_eq!(interaction_statistic(&spec, &xj, &xi, 1, 0), Some(2.0));
    }

    #[test]
    fn local_contribution_within_strauss() {
        let spec = InteractionSpec::strauss(vec![vec![0.02]], None).unwrap();
        let covars = CovariateSet::empty(1);
        let layout = Layout::for_covariates(&covars);
        let x = pts(&[(0.0, 0.0), (0.015, 0.0)]);
        let idx = index(&x, &[0, 0], 0.02);
        let lc = local_contribution(&spec, &covars, &layout, &Point::new(0.0075, 0.0), 0, &idx).unwrap();
        assert!(lc.feasible);
        assert_eq!(lc.values, vec![2.0]);
    }

    #[test]
    fn markov_range_examples() {
        let r = InteractionSpec::range_matrix(3, 0.02, 0.04);
        let s = InteractionSpec::strauss(r.clone(), None).unwrap();
        assert_eq!(s.markov_range(), 0.04);
        let g = InteractionSpec::geyer(r, InteractionSpec::constant_matrix(3, 10.0)).unwrap();
        assert_eq!(g.markov_range(), 0.08);
        let single = InteractionSpec::strauss(vec![vec![0.03]], None).unwrap();
        assert_eq!(single.markov_range(), 0.03);
    }

    #[test]
    fn layout_order() {
        let layout = Layout::new(vec![2, 2, 2]);
        assert_eq!(layout.dim(), 15);
        assert_eq!(layout.cov_range(1), 5..7);
        assert_eq!(layout.inter_index(0, 0), 2);
        assert_eq!(layout.inter_index(0, 1), 3);
        assert_eq!(layout.inter_index(0, 2), 4);
        assert_eq!(layout.inter_index(1, 1), 7);
        assert_eq!(layout.inter_index(1, 0), 8);
        assert_eq!(layout.inter_index(1, 2), 9);
        assert_eq!(layout.inter_index(2, 2), 12);
        assert_eq!(layout.inter_index(2, 0), 13);
        assert_eq!(layout.inter_index(2, 1), 14);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(InteractionSpec::strauss(vec![vec![0.02, 0.01]], None).is_err());
        assert!(InteractionSpec::strauss(vec![vec![0.02]], Some(vec![vec![0.03]])).is_err());
        assert!(InteractionSpec::geyer(vec![vec![0.02]], vec![vec![0.0]]).is_err());
        assert!(InteractionSpec::strauss(vec![vec![-0.1]], None).is_err());
        let cfg: InteractionConfig =
            serde_json::from_str(r#"{"family":"geyer","R":[[0.1]],"r":[[0.0]]}"#).unwrap();
        assert!(InteractionSpec::from_config(&cfg).is_err());
    }

    #[test]
    fn config_round_trip() {
        let cfg: InteractionConfig =
            serde_json::from_str(r#"{"family":"strauss","R":[[0.02,0.04],[0.04,0.02]],"r":[[0.0,0.01],[0.01,0.0]]}"#)
                .unwrap();
        let spec = InteractionSpec::from_config(&cfg).unwrap();
        assert_eq!(spec.hardcore(0, 1), 0.01);
        let again = InteractionSpec::from_config(&spec.to_config()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn incremental_matches_batch_point_by_point() {
        let spec = InteractionSpec::geyer(
            InteractionSpec::range_matrix(2, 0.2, 0.3),
            vec![vec![1.5, 2.0], vec![1.0, 0.5]],
        )
        .unwrap();
        let covars = CovariateSet::empty(2);
        let layout = Layout::for_covariates(&covars);
        let points = pts(&[(0.1, 0.1), (0.2, 0.15), (0.3, 0.1), (0.15, 0.3), (0.5, 0.5), (0.25, 0.25)]);
        let marks = [0, 1, 0, 1, 0, 0];
        let mut acc = vec![0.0; layout.dim()];
        for n in 0..points.len() {
            let idx = index(&points[..n], &marks[..n], 0.6);
            let lc = local_contribution(&spec, &covars, &layout, &points[n], marks[n], &idx).unwrap();
            for (a, b) in acc.iter_mut().zip(&lc.values) {
                *a += b;
            }
        }
        let batch = full_statistic(&spec, &covars, &layout, &points, &marks).unwrap().unwrap();
        for (a, b) in acc.iter().zip(&batch) {
            assert!((a - b).abs() < 1e-12, "{acc:?} vs {batch:?}");
        }
    }
}
