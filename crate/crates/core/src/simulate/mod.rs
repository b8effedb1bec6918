//! Exact multi-type Poisson sampling, birth–death Metropolis–Hastings for
//! multi-type Gibbs models and the Monte-Carlo study harness.

mod study;

pub use study::{
    run_study, run_study_with_fields, FitSpec, ProtocolTruth, RepRecord, StudyConfig, StudyReport, StudySummaryRow,
    TruthSpec, WindowSummary,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::interaction::{local_contribution_into, Family};
use crate::model::{dot, Design, ModelSpec, ParameterVector};
use crate::pattern::{BucketGrid, MarkedPointPattern, PointContext, Window, COINCIDENCE_TOL};

/// Generator used for every simulation stream.
pub type SimRng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Multi-type Poisson process by independent thinning of a homogeneous
/// process at rate `bounds[i]` per type.
pub fn sample_poisson_multitype<F, R>(
    window: &Window,
    p: usize,
    intensity: F,
    bounds: &[f64],
    rng: &mut R,
) -> Result<MarkedPointPattern>
where
    F: Fn(usize, &Point) -> Result<f64>,
    R: Rng + ?Sized,
{
    if bounds.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: bounds.len(),
        });
    }
    let rect = *window.rect();
    let mut points = Vec::new();
    let mut marks = Vec::new();
    for (i, &bound) in bounds.iter().enumerate() {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidModel(format!("dominating rate {bound} for type {}", i + 1)));
        }
        let mean = bound * rect.area();
        if mean == 0.0 {
            continue;
        }
        let n = Poisson::new(mean)
            .map_err(|e| Error::InvalidModel(e.to_string()))?
            .sample(rng) as usize;
        for _ in 0..n {
            let u = uniform_in(&rect, rng);
            let keep = rng.random::<f64>() * bound;
            if !window.contains(&u) {
                continue;
            }
            let lam = intensity(i, &u)?;
            if lam > bound {
                return Err(Error::DominationExceeded {
                    value: lam,
                    bound,
                    x: u.x,
                    y: u.y,
                });
            }
            if keep < lam {
                points.push(u);
                marks.push(i);
            }
        }
    }
    MarkedPointPattern::new(points, marks, window.clone(), p)
}

/// [`sample_poisson_multitype`] with a fresh generator seeded by `seed`.
pub fn sample_poisson_seeded<F>(window: &Window, p: usize, intensity: F, bounds: &[f64], seed: u64) -> Result<MarkedPointPattern>
where
    F: Fn(usize, &Point) -> Result<f64>,
{
    sample_poisson_multitype(window, p, intensity, bounds, &mut SimRng::seed_from_u64(seed))
}

#[inline]
fn uniform_in<R: Rng + ?Sized>(rect: &Rect, rng: &mut R) -> Point {
    Point::new(
        rect.x_min + rng.random::<f64>() * rect.width(),
        rect.y_min + rng.random::<f64>() * rect.height(),
    )
}

/// First-order intensity `φ₀(u) exp(γ_{i0}ᵀ z_i(u))`.
pub fn first_order_intensity(model: &ModelSpec, gamma: &[f64], i: usize, u: &Point) -> Result<f64> {
    let baseline = model.baseline.as_ref().ok_or(Error::MissingBaseline)?;
    let cov = model.design.covariates();
    let range = model.design.layout().cov_range(i);
    let z = cov.eval(i, u)?;
    Ok(baseline.lookup(u)? * dot(&gamma[range], &z).exp())
}

/// Upper bound of [`first_order_intensity`] over the rasters.
pub fn first_order_bound(model: &ModelSpec, gamma: &[f64], i: usize) -> Result<f64> {
    let baseline = model.baseline.as_ref().ok_or(Error::MissingBaseline)?;
    let cov = model.design.covariates();
    let range = model.design.layout().cov_range(i);
    let coefs = &gamma[range];
    let mut eta = 0.0;
    let mut k = 0;
    if cov.has_intercept() {
        eta += coefs[0];
        k = 1;
    }
    for f in cov.fields(i) {
        let g = coefs[k];
        eta += (g * f.field.min()).max(g * f.field.max());
        k += 1;
    }
    Ok(baseline.max() * eta.exp())
}

/// Midpoint-rule approximation of `∫_W` of the type-`i` first-order intensity.
pub fn expected_type_count(model: &ModelSpec, gamma: &[f64], i: usize, window: &Window) -> Result<f64> {
    const N: usize = 200;
    let rect = window.rect();
    let (dx, dy) = (rect.width() / N as f64, rect.height() / N as f64);
    let mut total = 0.0;
    for iy in 0..N {
        for ix in 0..N {
            let u = Point::new(rect.x_min + (ix as f64 + 0.5) * dx, rect.y_min + (iy as f64 + 0.5) * dy);
            if window.contains(&u) {
                total += first_order_intensity(model, gamma, i, &u)?;
            }
        }
    }
    Ok(total * dx * dy)
}

/// Sum over types of [`expected_type_count`].
pub fn expected_first_order_count(model: &ModelSpec, gamma: &[f64], window: &Window) -> Result<f64> {
    (0..model.design.num_types())
        .map(|i| expected_type_count(model, gamma, i, window))
        .sum()
}

/// Mutable point set with a bucket grid for fixed-radius queries.
#[derive(Debug, Clone)]
pub struct DynamicPattern {
    grid: BucketGrid,
    cells: Vec<Vec<u32>>,
    points: Vec<Point>,
    marks: Vec<usize>,
}

impl DynamicPattern {
    pub fn new(bounds: &Rect, cell_side: f64) -> Self {
        let grid = BucketGrid::new(bounds, cell_side);
        DynamicPattern {
            cells: vec![Vec::new(); grid.len()],
            grid,
            points: Vec::new(),
            marks: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, k: usize) -> (Point, usize) {
        (self.points[k], self.marks[k])
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn marks(&self) -> &[usize] {
        &self.marks
    }

    pub fn insert(&mut self, u: Point, mark: usize) {
        let k = self.points.len() as u32;
        self.cells[self.grid.bucket(&u)].push(k);
        self.points.push(u);
        self.marks.push(mark);
    }

    /// Removes point `k`; the last point takes its index.
    pub fn remove(&mut self, k: usize) -> (Point, usize) {
        let last = self.points.len() - 1;
        let u = self.points[k];
        let bucket = &mut self.cells[self.grid.bucket(&u)];
        let pos = bucket.iter().position(|&x| x as usize == k).expect("indexed point");
        bucket.swap_remove(pos);
        if k != last {
            let moved = self.points[last];
            let bucket = &mut self.cells[self.grid.bucket(&moved)];
            let pos = bucket.iter().position(|&x| x as usize == last).expect("indexed point");
            bucket[pos] = k as u32;
        }
        self.points.swap_remove(k);
        let mark = self.marks.swap_remove(k);
        (u, mark)
    }

    /// True if some stored point lies at `u`.
    pub fn occupied(&self, u: &Point) -> bool {
        let mut hit = false;
        self.for_each_within(u, COINCIDENCE_TOL, None, |_, _| hit = true);
        hit
    }

    pub fn to_pattern(&self, window: &Window, p: usize) -> Result<MarkedPointPattern> {
        MarkedPointPattern::new(self.points.clone(), self.marks.clone(), window.clone(), p)
    }
}

impl PointContext for DynamicPattern {
    #[inline]
    fn for_each_within<F: FnMut(Point, usize)>(&self, u: &Point, r: f64, mark: Option<usize>, mut f: F) {
        let r2 = r * r;
        self.grid.for_each_bucket(u, r, |b| {
            for &k in &self.cells[b] {
                let k = k as usize;
                let m = self.marks[k];
                if mark.is_none_or(|x| x == m) && self.points[k].dist2(u) <= r2 {
                    f(self.points[k], m);
                }
            }
        });
    }
}

/// Starting state of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainInit {
    Empty,
    /// Poisson draw at the first-order intensity (interactions off).
    #[default]
    FirstOrder,
    /// Homogeneous Poisson draw at `rate` per type.
    Poisson { rate: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    /// Proposals to run; `None` uses 1000 per expected first-order point.
    pub steps: Option<u64>,
    pub birth_prob: f64,
    pub seed: u64,
    pub init: ChainInit,
    /// Declared local-stability bound; a birth proposal above it aborts the chain.
    pub intensity_bound: Option<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            steps: None,
            birth_prob: 0.5,
            seed: 0,
            init: ChainInit::FirstOrder,
            intensity_bound: None,
        }
    }
}

/// Default proposals per expected point.
pub const STEPS_PER_POINT: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Birth,
    Death,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub kind: MoveKind,
    pub accepted: bool,
    /// The proposed point (absent for a death proposal on an empty state).
    pub point: Option<(Point, usize)>,
}

#[derive(Debug, Clone)]
enum Proposal {
    Window(Rect, f64),
    Sites(Vec<Point>),
}

/// Birth–death Metropolis–Hastings chain targeting the finite-window Gibbs density.
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    model: &'a ModelSpec,
    /// The model's design with zero-coefficient interaction pairs switched off.
    design: Design,
    gamma: Vec<f64>,
    window: Window,
    proposal: Proposal,
    state: DynamicPattern,
    rng: SimRng,
    birth_prob: f64,
    bound: Option<f64>,
    buf: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    /// Continuous-window chain starting from the configured initial state.
    pub fn new(model: &'a ModelSpec, gamma: &ParameterVector, window: &Window, config: &ChainConfig) -> Result<Self> {
        Self::new_with_rng(model, gamma, window, config, SimRng::seed_from_u64(config.seed))
    }

    /// As [`GibbsSampler::new`] but drawing from `rng` (`config.seed` is ignored).
    pub fn new_with_rng(
        model: &'a ModelSpec,
        gamma: &ParameterVector,
        window: &Window,
        config: &ChainConfig,
        rng: SimRng,
    ) -> Result<Self> {
        check_stability(model, gamma.as_slice())?;
        let mut s = Self::bare(model, gamma, window, config, rng)?;
        s.proposal = Proposal::Window(*window.rect(), window.rect().area());
        s.initialize(config.init)?;
        Ok(s)
    }

    /// Chain whose proposals are uniform over a finite set of sites; at most
    /// one point may occupy a site.
    pub fn on_sites(
        model: &'a ModelSpec,
        gamma: &ParameterVector,
        window: &Window,
        sites: Vec<Point>,
        config: &ChainConfig,
    ) -> Result<Self> {
        if sites.is_empty() || sites.iter().any(|u| !window.contains(u)) {
            return Err(Error::Config("sites must be nonempty and inside the window".into()));
        }
        check_stability(model, gamma.as_slice())?;
        let mut s = Self::bare(model, gamma, window, config, SimRng::seed_from_u64(config.seed))?;
        s.proposal = Proposal::Sites(sites);
        Ok(s)
    }

    fn bare(
        model: &'a ModelSpec,
        gamma: &ParameterVector,
        window: &Window,
        config: &ChainConfig,
        rng: SimRng,
    ) -> Result<Self> {
        if model.baseline.is_none() {
            return Err(Error::MissingBaseline);
        }
        if gamma.as_slice().len() != model.design.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.design.dim(),
                got: gamma.as_slice().len(),
            });
        }
        if !(config.birth_prob > 0.0 && config.birth_prob < 1.0) {
            return Err(Error::Config(format!("birth_prob {} is not in (0,1)", config.birth_prob)));
        }
        model.design.covariates().check_covers(window.rect())?;
        if !model.baseline.as_ref().is_some_and(|b| b.covers(window.rect())) {
            return Err(Error::InvalidRaster("baseline does not cover the window".into()));
        }
        let layout = model.design.layout();
        let g = gamma.as_slice();
        let active = model
            .design
            .interaction()
            .pruned(|i, j| g[layout.inter_index(i, j)] != 0.0);
        let design = model.design.with_interaction(active)?;
        let cell = design.interaction().max_range();
        let cell = if cell > 0.0 { cell } else { window.rect().width().max(window.rect().height()) };
        Ok(GibbsSampler {
            model,
            design,
            gamma: gamma.as_slice().to_vec(),
            window: window.clone(),
            proposal: Proposal::Window(*window.rect(), window.rect().area()),
            state: DynamicPattern::new(window.rect(), cell),
            rng,
            birth_prob: config.birth_prob,
            bound: config.intensity_bound,
            buf: vec![0.0; model.design.dim()],
        })
    }

    fn initialize(&mut self, init: ChainInit) -> Result<()> {
        let p = self.model.design.num_types();
        let draw = match init {
            ChainInit::Empty => return Ok(()),
            ChainInit::FirstOrder => {
                let bounds: Vec<f64> = (0..p)
                    .map(|i| first_order_bound(self.model, &self.gamma, i))
                    .collect::<Result<_>>()?;
                let (model, gamma) = (self.model, self.gamma.clone());
                sample_poisson_multitype(
                    &self.window,
                    p,
                    |i, u| first_order_intensity(model, &gamma, i, u),
                    &bounds,
                    &mut self.rng,
                )?
            }
            ChainInit::Poisson { rate } => {
                sample_poisson_multitype(&self.window, p, |_, _| Ok(rate), &vec![rate; p], &mut self.rng)?
            }
        };
        // points that would violate a hard core are dropped
        for (u, i) in draw.iter() {
            if self.intensity(&u, i)? > 0.0 {
                self.state.insert(u, i);
            }
        }
        Ok(())
    }

    /// Replaces the state; errors if it has zero density.
    pub fn set_state(&mut self, pattern: &MarkedPointPattern) -> Result<()> {
        let mut state = DynamicPattern::new(self.window.rect(), self.state.grid_cell());
        for (u, i) in pattern.iter() {
            if !self.window.contains(&u) {
                return Err(Error::InfeasibleInitialState);
            }
            state.insert(u, i);
        }
        let old = std::mem::replace(&mut self.state, state);
        for k in 0..self.state.len() {
            let (u, i) = self.state.point(k);
            if self.raw_intensity(&u, i)? <= 0.0 {
                self.state = old;
                return Err(Error::InfeasibleInitialState);
            }
        }
        Ok(())
    }

    pub fn state(&self) -> &DynamicPattern {
        &self.state
    }

    pub fn pattern(&self) -> Result<MarkedPointPattern> {
        self.state.to_pattern(&self.window, self.model.design.num_types())
    }

    /// `λ{(u,i), state ∖ u}` including the window and site-occupancy restrictions.
    fn intensity(&mut self, u: &Point, i: usize) -> Result<f64> {
        if !self.window.contains(u) {
            return Ok(0.0);
        }
        if matches!(self.proposal, Proposal::Sites(_)) && self.state.occupied(u) {
            return Ok(0.0);
        }
        self.raw_intensity(u, i)
    }

    fn raw_intensity(&mut self, u: &Point, i: usize) -> Result<f64> {
        let d = &self.design;
        let feasible = local_contribution_into(
            d.interaction(),
            d.covariates(),
            d.layout(),
            u,
            i,
            &self.state,
            &mut self.buf,
        )?;
        if !feasible {
            return Ok(0.0);
        }
        let phi = self.model.baseline.as_ref().ok_or(Error::MissingBaseline)?.lookup(u)?;
        Ok(phi * dot(&self.gamma, &self.buf).exp())
    }

    fn measure(&self) -> f64 {
        match &self.proposal {
            Proposal::Window(_, area) => *area,
            Proposal::Sites(s) => s.len() as f64,
        }
    }

    /// One birth or death proposal.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let p = self.model.design.num_types();
        let pb = self.birth_prob;
        let odds = (1.0 - pb) / pb;
        let scale = p as f64 * self.measure();
        let n = self.state.len();
        if self.rng.random::<f64>() < pb {
            let u = match &self.proposal {
                Proposal::Window(rect, _) => uniform_in(rect, &mut self.rng),
                Proposal::Sites(s) => s[self.rng.random_range(0..s.len())],
            };
            let i = self.rng.random_range(0..p);
            let lam = self.intensity(&u, i)?;
            if let Some(b) = self.bound {
                if lam > b {
                    return Err(Error::Unstable(format!(
                        "conditional intensity {lam} exceeds the declared bound {b} at ({}, {})",
                        u.x, u.y
                    )));
                }
            }
            let ratio = lam * scale / (n + 1) as f64 * odds;
            let accepted = ratio >= 1.0 || self.rng.random::<f64>() < ratio;
            if accepted {
                self.state.insert(u, i);
            }
            Ok(StepOutcome {
                kind: MoveKind::Birth,
                accepted,
                point: Some((u, i)),
            })
        } else {
            if n == 0 {
                return Ok(StepOutcome {
                    kind: MoveKind::Death,
                    accepted: false,
                    point: None,
                });
            }
            let k = self.rng.random_range(0..n);
            let (u, i) = self.state.point(k);
            let lam = self.raw_intensity(&u, i)?;
            let ratio = n as f64 / (scale * lam) / odds;
            let accepted = ratio >= 1.0 || self.rng.random::<f64>() < ratio;
            if accepted {
                self.state.remove(k);
            }
            Ok(StepOutcome {
                kind: MoveKind::Death,
                accepted,
                point: Some((u, i)),
            })
        }
    }

    pub fn run(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }
}

impl DynamicPattern {
    fn grid_cell(&self) -> f64 {
        self.grid.cell()
    }
}

/// Rejects Strauss models with attraction and no hard core.
pub fn check_stability(model: &ModelSpec, gamma: &[f64]) -> Result<()> {
    let spec = model.design.interaction();
    if spec.family() == Family::GeyerSaturation {
        return Ok(());
    }
    let layout = model.design.layout();
    let p = spec.num_types();
    for i in 0..p {
        for j in 0..p {
            let g = gamma[layout.inter_index(i, j)];
            if g > 0.0 && spec.range(i, j) > 0.0 && spec.hardcore(i, j).max(spec.hardcore(j, i)) == 0.0 {
                return Err(Error::Unstable(format!(
                    "Strauss interaction ({}, {}) is positive without a hard core",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

/// Runs a chain for `config.steps` proposals (or the default) and returns its final state.
pub fn sample_gibbs_mh(
    model: &ModelSpec,
    gamma: &ParameterVector,
    window: &Window,
    config: &ChainConfig,
) -> Result<MarkedPointPattern> {
    let steps = match config.steps {
        Some(s) => s,
        None => default_steps(model, gamma.as_slice(), window)?,
    };
    let mut sampler = GibbsSampler::new(model, gamma, window, config)?;
    sampler.run(steps)?;
    sampler.pattern()
}

/// `STEPS_PER_POINT` times the expected first-order count (at least 1000).
pub fn default_steps(model: &ModelSpec, gamma: &[f64], window: &Window) -> Result<u64> {
    let n = expected_first_order_count(model, gamma, window)?;
    Ok(((STEPS_PER_POINT * n).ceil() as u64).max(1000))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariates::{CovariateSet, GridGeometry, RasterField};
    use crate::interaction::InteractionSpec;
    use crate::model::{Constraints, Design};

    fn constant_model(p: usize, phi: f64, spec: InteractionSpec) -> ModelSpec {
        let design = Design::new(CovariateSet::empty(p), spec).unwrap();
        let grid = GridGeometry::covering(&Rect::unit_square(), 1, 1).unwrap();
        ModelSpec::new(design, &Constraints::none(), Some(RasterField::constant(grid, phi))).unwrap()
    }

    #[test]
    fn zero_intensity_is_empty() {
        let pat = sample_poisson_seeded(&Window::unit_square(), 2, |_, _| Ok(0.0), &[1.0, 1.0], 1).unwrap();
        assert!(pat.is_empty());
        let pat = sample_poisson_seeded(&Window::unit_square(), 2, |_, _| Ok(5.0), &[0.0, 0.0], 1).unwrap();
        assert!(pat.is_empty());
    }

    #[test]
    fn domination_error() {
        let err = sample_poisson_seeded(&Window::unit_square(), 1, |_, _| Ok(10.0), &[5.0], 1).unwrap_err();
        assert!(matches!(err, Error::DominationExceeded { .. }));
    }

    #[test]
    fn dynamic_pattern_remove_keeps_index_consistent() {
        let mut d = DynamicPattern::new(&Rect::unit_square(), 0.1);
        let mut rng = SimRng::seed_from_u64(1);
        for k in 0..200 {
            d.insert(uniform_in(&Rect::unit_square(), &mut rng), k % 3);
        }
        for _ in 0..150 {
            let k = rng.random_range(0..d.len());
            d.remove(k);
            let u = uniform_in(&Rect::unit_square(), &mut rng);
            let mut fast = Vec::new();
            d.for_each_within(&u, 0.15, None, |v, m| fast.push((v.x.to_bits(), v.y.to_bits(), m)));
            let mut brute: Vec<_> = d
                .points()
                .iter()
                .zip(d.marks())
                .filter(|(v, _)| v.dist2(&u) <= 0.15 * 0.15)
                .map(|(v, &m)| (v.x.to_bits(), v.y.to_bits(), m))
                .collect();
            fast.sort_unstable();
            brute.sort_unstable();
            assert_eq!(fast, brute);
        }
    }

    #[test]
    fn unstable_strauss_rejected() {
        let spec = InteractionSpec::strauss(InteractionSpec::range_matrix(1, 0.05, 0.05), None).unwrap();
        let m = constant_model(1, 100.0, spec);
        let g = ParameterVector::new(m.design.layout(), vec![0.5]).unwrap();
        let err = GibbsSampler::new(&m, &g, &Window::unit_square(), &ChainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Unstable(_)));
    }

    #[test]
    fn declared_bound_is_enforced() {
        let spec = InteractionSpec::geyer(InteractionSpec::range_matrix(1, 0.05, 0.05), InteractionSpec::constant_matrix(1, 5.0))
            .unwrap();
        let m = constant_model(1, 100.0, spec);
        let g = ParameterVector::new(m.design.layout(), vec![0.0]).unwrap();
        let cfg = ChainConfig {
            intensity_bound: Some(50.0),
            init: ChainInit::Empty,
            ..ChainConfig::default()
        };
        let mut s = GibbsSampler::new(&m, &g, &Window::unit_square(), &cfg).unwrap();
        assert!(matches!(s.run(100), Err(Error::Unstable(_))));
    }

    #[test]
    fn chains_are_reproducible() {
        let spec = InteractionSpec::strauss(InteractionSpec::range_matrix(2, 0.05, 0.08), None).unwrap();
        let m = constant_model(2, 80.0, spec);
        let g = ParameterVector::new(m.design.layout(), vec![-0.5, -0.2, -0.2, -0.5]).unwrap();
        let cfg = ChainConfig {
            steps: Some(20_000),
            seed: 17,
            ..ChainConfig::default()
        };
        let a = sample_gibbs_mh(&m, &g, &Window::unit_square(), &cfg).unwrap();
        let b = sample_gibbs_mh(&m, &g, &Window::unit_square(), &cfg).unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    }

    #[test]
    fn hardcore_state_is_rejected() {
        let spec = InteractionSpec::strauss(
            InteractionSpec::range_matrix(1, 0.05, 0.05),
            Some(InteractionSpec::range_matrix(1, 0.03, 0.03)),
        )
        .unwrap();
        let m = constant_model(1, 50.0, spec);
        let g = ParameterVector::new(m.design.layout(), vec![0.0]).unwrap();
        let mut s = GibbsSampler::new(
            &m,
            &g,
            &Window::unit_square(),
            &ChainConfig {
                init: ChainInit::Empty,
                ..Default::default()
            },
        )
        .unwrap();
        let bad = MarkedPointPattern::new(
            vec![Point::new(0.5, 0.5), Point::new(0.51, 0.5)],
            vec![0, 0],
            Window::unit_square(),
            1,
        )
        .unwrap();
        assert!(matches!(s.set_state(&bad), Err(Error::InfeasibleInitialState)));
        assert!(s.state().is_empty());
    }
}
