//! Conditional pseudo likelihood, its score and sensitivity, Newton fitting
//! and grid profiling over interaction ranges.
//!
//! Each observed point `(u,i)` of the eroded domain `D = W ⊖ R` contributes
//! `log p{(u,i), Y ∖ (u,i)}`, the log-probability of its own mark among the
//! `p` candidate marks at `u`. The statistics `v{(u,l), Y ∖ (u,i)}` do not
//! depend on `γ`, so they are computed once into a [`StatCache`] and the fit
//! reduces to a multinomial logistic regression on that cache.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::inference::{self, ConfidenceInterval, SandwichEstimate};
use crate::interaction::{local_contribution_into, LocalContribution};
use crate::model::{build_reparam, dot, softmax, Constraints, Design, ReparamMap};
use crate::pattern::{MarkedPointPattern, NeighborIndex, Window, COINCIDENCE_TOL};

/// Points per parallel work unit; fixed so reductions do not depend on the thread count.
const CHUNK: usize = 256;

/// γ-independent statistics for every observed point in the eroded domain.
#[derive(Debug, Clone)]
pub struct StatCache {
    p: usize,
    k: usize,
    /// Index into the original pattern.
    indices: Vec<usize>,
    locations: Vec<Point>,
    marks: Vec<usize>,
    /// `n · p · k` statistic values, point-major then mark-major.
    values: Vec<f64>,
    /// `n · p` feasibility flags.
    feasible: Vec<bool>,
    domain: Window,
    erosion: f64,
    markov_range: f64,
    conflict: Option<(usize, usize, f64)>,
}

impl StatCache {
    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn num_types(&self) -> usize {
        self.p
    }

    /// Stacked dimension `k` of each statistic.
    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn location(&self, n: usize) -> Point {
        self.locations[n]
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    pub fn mark(&self, n: usize) -> usize {
        self.marks[n]
    }

    pub fn marks(&self) -> &[usize] {
        &self.marks
    }

    /// Index of cached point `n` in the source pattern.
    pub fn pattern_index(&self, n: usize) -> usize {
        self.indices[n]
    }

    /// `v{(u,l), Y ∖ (u,i)}` for cached point `n`.
    pub fn stat(&self, n: usize, l: usize) -> &[f64] {
        let start = (n * self.p + l) * self.k;
        &self.values[start..start + self.k]
    }

    pub fn is_feasible(&self, n: usize, l: usize) -> bool {
        self.feasible[n * self.p + l]
    }

    pub fn contributions(&self, n: usize) -> Vec<LocalContribution> {
        (0..self.p)
            .map(|l| LocalContribution {
                values: self.stat(n, l).to_vec(),
                feasible: self.is_feasible(n, l),
            })
            .collect()
    }

    pub fn domain(&self) -> &Window {
        &self.domain
    }

    pub fn erosion(&self) -> f64 {
        self.erosion
    }

    /// Pair distance used by the score covariance estimate.
    pub fn markov_range(&self) -> f64 {
        self.markov_range
    }

    /// Cached points per type.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.p];
        for &m in &self.marks {
            c[m] += 1;
        }
        c
    }

    /// Copy with cached points reordered by `perm` (a permutation of `0..len`).
    pub fn permuted(&self, perm: &[usize]) -> StatCache {
        let mut out = self.clone();
        out.indices = perm.iter().map(|&n| self.indices[n]).collect();
        out.locations = perm.iter().map(|&n| self.locations[n]).collect();
        out.marks = perm.iter().map(|&n| self.marks[n]).collect();
        out.values = perm
            .iter()
            .flat_map(|&n| self.values[n * self.p * self.k..(n + 1) * self.p * self.k].iter().copied())
            .collect();
        out.feasible = perm
            .iter()
            .flat_map(|&n| self.feasible[n * self.p..(n + 1) * self.p].iter().copied())
            .collect();
        out
    }

    fn check_conflict(&self) -> Result<()> {
        match self.conflict {
            Some((point, neighbor, distance)) => Err(Error::HardCoreViolation {
                point,
                neighbor,
                distance,
            }),
            None => Ok(()),
        }
    }
}

/// Cache for the domain eroded by the design's Markov range.
pub fn compute_stat_cache(pattern: &MarkedPointPattern, design: &Design) -> Result<StatCache> {
    compute_stat_cache_with_erosion(pattern, design, design.markov_range())
}

/// Cache for the domain `W ⊖ erosion`; `erosion` must be at least the Markov range.
pub fn compute_stat_cache_with_erosion(
    pattern: &MarkedPointPattern,
    design: &Design,
    erosion: f64,
) -> Result<StatCache> {
    let p = design.num_types();
    if pattern.num_types() != p {
        return Err(Error::InvalidModel(format!(
            "pattern has {} types, model {p}",
            pattern.num_types()
        )));
    }
    let range = design.markov_range();
    if erosion < range {
        return Err(Error::InvalidModel(format!(
            "erosion {erosion} is smaller than the Markov range {range}"
        )));
    }
    let domain = pattern.window().erode(erosion)?;
    design.covariates().check_covers(pattern.window().rect())?;
    let k = design.dim();
    let index = NeighborIndex::new(pattern, design.interaction().max_range().max(f64::MIN_POSITIVE));
    let inside: Vec<usize> = (0..pattern.len())
        .filter(|&n| domain.contains(&pattern.points()[n]))
        .collect();
    if inside.is_empty() {
        return Err(Error::EmptyDomain);
    }

    let chunks: Vec<Result<(Vec<f64>, Vec<bool>)>> = inside
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut values = vec![0.0; chunk.len() * p * k];
            let mut feasible = vec![false; chunk.len() * p];
            for (c, &n) in chunk.iter().enumerate() {
                let u = pattern.points()[n];
                for l in 0..p {
                    let slot = c * p + l;
                    feasible[slot] = local_contribution_into(
                        design.interaction(),
                        design.covariates(),
                        design.layout(),
                        &u,
                        l,
                        &index,
                        &mut values[slot * k..(slot + 1) * k],
                    )?;
                }
            }
            Ok((values, feasible))
        })
        .collect();

    let mut values = Vec::with_capacity(inside.len() * p * k);
    let mut feasible = Vec::with_capacity(inside.len() * p);
    for chunk in chunks {
        let (v, f) = chunk?;
        values.extend(v);
        feasible.extend(f);
    }
    let marks: Vec<usize> = inside.iter().map(|&n| pattern.marks()[n]).collect();
    let conflict = inside.iter().enumerate().find_map(|(c, &n)| {
        (!feasible[c * p + marks[c]]).then(|| hardcore_conflict(pattern, design, n))
    });
    Ok(StatCache {
        p,
        k,
        locations: inside.iter().map(|&n| pattern.points()[n]).collect(),
        indices: inside,
        marks,
        values,
        feasible,
        domain,
        erosion,
        markov_range: range,
        conflict,
    })
}

fn hardcore_conflict(pattern: &MarkedPointPattern, design: &Design, n: usize) -> (usize, usize, f64) {
    let (u, i) = pattern.point(n);
    let spec = design.interaction();
    pattern
        .iter()
        .enumerate()
        .filter(|&(m, _)| m != n)
        .find_map(|(m, (v, j))| {
            let d = u.dist(&v);
            let h = spec.hardcore(i, j).max(spec.hardcore(j, i));
            (d > COINCIDENCE_TOL && d < h).then_some((n, m, d))
        })
        .unwrap_or((n, n, 0.0))
}

/// Compensated (Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }
}

/// The cache projected through `T`: the design of a multinomial logit in `β`.
#[derive(Debug, Clone)]
pub struct LogitDesign {
    p: usize,
    kp: usize,
    /// `n · p · k'` projected statistics `Tᵀ v`.
    x: Vec<f64>,
    feasible: Vec<bool>,
    marks: Vec<usize>,
}

/// `ℓ(β)`, its gradient and `Ŝ(β)` (the negative Hessian).
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loglik: f64,
    pub score: DVector<f64>,
    pub sensitivity: DMatrix<f64>,
}

#[derive(Default, Clone)]
struct Partial {
    loglik: KahanSum,
    score: Vec<KahanSum>,
    sens: Vec<KahanSum>,
}

impl LogitDesign {
    pub fn new(cache: &StatCache, t: &ReparamMap) -> Result<Self> {
        if t.gamma_dim() != cache.dim() {
            return Err(Error::DimensionMismatch {
                expected: cache.dim(),
                got: t.gamma_dim(),
            });
        }
        cache.check_conflict()?;
        let kp = t.beta_dim();
        let tm = t.matrix();
        let mut x = Vec::with_capacity(cache.len() * cache.p * kp);
        for n in 0..cache.len() {
            for l in 0..cache.p {
                let v = cache.stat(n, l);
                for c in 0..kp {
                    let col = tm.column(c);
                    x.push(col.iter().zip(v).map(|(a, b)| a * b).sum());
                }
            }
        }
        Ok(LogitDesign {
            p: cache.p,
            kp,
            x,
            feasible: cache.feasible.clone(),
            marks: cache.marks.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kp
    }

    #[inline]
    fn row(&self, n: usize, l: usize) -> &[f64] {
        let s = (n * self.p + l) * self.kp;
        &self.x[s..s + self.kp]
    }

    fn probs(&self, n: usize, beta: &[f64]) -> Vec<f64> {
        let etas: Vec<Option<f64>> = (0..self.p)
            .map(|l| self.feasible[n * self.p + l].then(|| dot(beta, self.row(n, l))))
            .collect();
        softmax(&etas)
    }

    /// Residual `h = x_obs − E` of cached point `n`.
    pub fn residual(&self, n: usize, beta: &[f64]) -> Vec<f64> {
        let q = self.probs(n, beta);
        let mut h = self.row(n, self.marks[n]).to_vec();
        for (l, &ql) in q.iter().enumerate() {
            if ql > 0.0 {
                for (hh, xx) in h.iter_mut().zip(self.row(n, l)) {
                    *hh -= ql * xx;
                }
            }
        }
        h
    }

    pub fn loglik(&self, beta: &[f64]) -> f64 {
        self.accumulate(beta, false).loglik
    }

    pub fn evaluate(&self, beta: &[f64]) -> Evaluation {
        self.accumulate(beta, true)
    }

    fn accumulate(&self, beta: &[f64], derivatives: bool) -> Evaluation {
        let kp = self.kp;
        let n = self.len();
        let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
        let partials: Vec<Partial> = starts
            .par_iter()
            .map(|&s| {
                let mut part = Partial {
                    loglik: KahanSum::default(),
                    score: vec![KahanSum::default(); if derivatives { kp } else { 0 }],
                    sens: vec![KahanSum::default(); if derivatives { kp * kp } else { 0 }],
                };
                let mut e = vec![0.0; kp];
                for m in s..(s + CHUNK).min(n) {
                    let etas: Vec<Option<f64>> = (0..self.p)
                        .map(|l| self.feasible[m * self.p + l].then(|| dot(beta, self.row(m, l))))
                        .collect();
                    let obs = self.marks[m];
                    let max = etas.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + etas.iter().flatten().map(|&x| (x - max).exp()).sum::<f64>().ln();
                    part.loglik.add(etas[obs].expect("observed mark feasible") - lse);
                    if !derivatives {
                        continue;
                    }
                    let q = softmax(&etas);
                    e.fill(0.0);
                    for (l, &ql) in q.iter().enumerate() {
                        if ql == 0.0 {
                            continue;
                        }
                        let x = self.row(m, l);
                        for a in 0..kp {
                            e[a] += ql * x[a];
                        }
                    }
                    let xo = self.row(m, obs);
                    for a in 0..kp {
                        part.score[a].add(xo[a] - e[a]);
                    }
                    // V = Σ_l q_l (x_l − E)(x_l − E)ᵀ
                    for (l, &ql) in q.iter().enumerate() {
                        if ql == 0.0 {
                            continue;
                        }
                        let x = self.row(m, l);
                        for a in 0..kp {
                            let da = ql * (x[a] - e[a]);
                            if da == 0.0 {
                                continue;
                            }
                            for b in a..kp {
                                part.sens[a * kp + b].add(da * (x[b] - e[b]));
                            }
                        }
                    }
                }
                part
            })
            .collect();
        let mut total = Partial {
            loglik: KahanSum::default(),
            score: vec![KahanSum::default(); kp],
            sens: vec![KahanSum::default(); kp * kp],
        };
        for part in &partials {
            total.loglik.merge(&part.loglik);
            for (t, s) in total.score.iter_mut().zip(&part.score) {
                t.merge(s);
            }
            for (t, s) in total.sens.iter_mut().zip(&part.sens) {
                t.merge(s);
            }
        }
        let score = DVector::from_iterator(kp, total.score.iter().map(KahanSum::value));
        let mut sensitivity = DMatrix::zeros(kp, kp);
        if derivatives {
            for a in 0..kp {
                for b in a..kp {
                    let v = total.sens[a * kp + b].value();
                    sensitivity[(a, b)] = v;
                    sensitivity[(b, a)] = v;
                }
            }
        }
        Evaluation {
            loglik: total.loglik.value(),
            score,
            sensitivity,
        }
    }
}

/// `ℓ(Tβ)`.
pub fn conditional_pseudo_loglik(cache: &StatCache, t: &ReparamMap, beta: &[f64]) -> Result<f64> {
    let d = checked_design(cache, t, beta)?;
    Ok(d.loglik(beta))
}

/// `e(β) = Tᵀ Σ h{(u,i), Y ∖ (u,i)}`.
pub fn score(cache: &StatCache, t: &ReparamMap, beta: &[f64]) -> Result<DVector<f64>> {
    Ok(checked_design(cache, t, beta)?.evaluate(beta).score)
}

/// `Ŝ(β) = Tᵀ [Σ V{u, Y ∖ (u,i)}] T`.
pub fn observed_sensitivity(cache: &StatCache, t: &ReparamMap, beta: &[f64]) -> Result<DMatrix<f64>> {
    Ok(checked_design(cache, t, beta)?.evaluate(beta).sensitivity)
}

fn checked_design(cache: &StatCache, t: &ReparamMap, beta: &[f64]) -> Result<LogitDesign> {
    if cache.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if beta.len() != t.beta_dim() {
        return Err(Error::DimensionMismatch {
            expected: t.beta_dim(),
            got: beta.len(),
        });
    }
    LogitDesign::new(cache, t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Convergence threshold on the sup-norm of the score.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Starting `β`; zeros when absent.
    pub init: Option<Vec<f64>>,
    /// Confidence level for the Wald intervals.
    pub level: f64,
    /// Any `|β_j|` beyond this is treated as divergence.
    pub divergence_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 50,
            max_halvings: 30,
            init: None,
            level: 0.95,
            divergence_bound: 1e3,
        }
    }
}

/// Estimates plus the sandwich inference block.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_names: Vec<String>,
    pub beta_hat: Vec<f64>,
    pub gamma_names: Vec<String>,
    pub gamma_hat: Vec<f64>,
    pub logpl: f64,
    pub score_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_points: usize,
    pub counts: Vec<usize>,
    pub erosion: f64,
    pub markov_range: f64,
    pub sandwich: Option<SandwichEstimate>,
    pub ci: Vec<ConfidenceInterval>,
}

impl FitResult {
    /// Sandwich standard errors (NaN when unavailable).
    pub fn std_errors(&self) -> Vec<f64> {
        match &self.sandwich {
            Some(s) => (0..self.beta_hat.len())
                .map(|j| {
                    let v = s.vcov[(j, j)];
                    if v >= 0.0 {
                        v.sqrt()
                    } else {
                        f64::NAN
                    }
                })
                .collect(),
            None => vec![f64::NAN; self.beta_hat.len()],
        }
    }

    pub fn to_report(&self) -> FitReport {
        let mat = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
        };
        FitReport {
            schema: 1,
            beta_names: self.beta_names.clone(),
            beta_hat: self.beta_hat.clone(),
            gamma_names: self.gamma_names.clone(),
            gamma_hat: self.gamma_hat.clone(),
            logpl: self.logpl,
            score_norm: self.score_norm,
            iterations: self.iterations,
            converged: self.converged,
            n_points: self.n_points,
            counts: self.counts.clone(),
            erosion: self.erosion,
            markov_range: self.markov_range,
            std_errors: self.std_errors(),
            s_hat: self.sandwich.as_ref().map(|s| mat(&s.s_hat)),
            sigma_pair_hat: self.sandwich.as_ref().map(|s| mat(&s.sigma_pair_hat)),
            vcov: self.sandwich.as_ref().map(|s| mat(&s.vcov)),
            ci: self.ci.clone(),
        }
    }

    /// Human-readable coefficient table.
    pub fn coefficient_table(&self) -> String {
        let se = self.std_errors();
        let width = self.beta_names.iter().map(String::len).max().unwrap_or(4).max(9);
        let mut out = format!(
            "{:<width$} {:>12} {:>12} {:>12} {:>12}\n",
            "parameter", "estimate", "std.err", "ci.low", "ci.high"
        );
        for (j, name) in self.beta_names.iter().enumerate() {
            let (lo, hi) = self.ci.get(j).map_or((f64::NAN, f64::NAN), |c| (c.low, c.high));
            out.push_str(&format!(
                "{:<width$} {:>12.6} {:>12.6} {:>12.6} {:>12.6}\n",
                name, self.beta_hat[j], se[j], lo, hi
            ));
        }
        out.push_str(&format!(
            "log pseudo-likelihood {:.6}, {} points, {} iterations, converged: {}\n",
            self.logpl, self.n_points, self.iterations, self.converged
        ));
        out
    }
}

/// JSON form of a [`FitResult`] (matrices row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub schema: u32,
    pub beta_names: Vec<String>,
    pub beta_hat: Vec<f64>,
    pub gamma_names: Vec<String>,
    pub gamma_hat: Vec<f64>,
    pub logpl: f64,
    pub score_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_points: usize,
    pub counts: Vec<usize>,
    pub erosion: f64,
    pub markov_range: f64,
    pub std_errors: Vec<f64>,
    pub s_hat: Option<Vec<Vec<f64>>>,
    pub sigma_pair_hat: Option<Vec<Vec<f64>>>,
    pub vcov: Option<Vec<Vec<f64>>>,
    pub ci: Vec<ConfidenceInterval>,
}

/// Relative eigenvalue threshold for calling the sensitivity singular.
const SINGULAR_REL: f64 = 1e-10;
/// Relative eigenvalue threshold at the optimum indicating separation.
const SEPARATION_REL: f64 = 1e-8;

/// Newton–Raphson with step halving on the concave `ℓ(β)`.
pub fn fit_newton(cache: &StatCache, t: &ReparamMap, options: &FitOptions) -> Result<FitResult> {
    let beta0 = options.init.clone().unwrap_or_else(|| vec![0.0; t.beta_dim()]);
    let design = checked_design(cache, t, &beta0)?;
    let names = t.beta_names();
    let mut beta = beta0;
    let mut eval = design.evaluate(&beta);

    let scale0 = eigen_range(&eval.sensitivity).1.max(f64::MIN_POSITIVE);
    let (min0, _) = eigen_range(&eval.sensitivity);
    if min0 <= SINGULAR_REL * scale0 {
        return Err(Error::RankDeficient {
            params: null_space_params(&eval.sensitivity, names),
        });
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iter {
        if eval.score.amax() <= options.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let step = match eval.sensitivity.clone().cholesky() {
            Some(ch) => ch.solve(&eval.score),
            None => {
                return Err(Error::Separation {
                    direction: weakest_direction(&eval.sensitivity, &beta, names),
                })
            }
        };
        let mut accepted = false;
        let mut size = 1.0;
        for _ in 0..=options.max_halvings {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + size * s).collect();
            let ll = design.loglik(&cand);
            if ll >= eval.loglik {
                beta = cand;
                accepted = true;
                break;
            }
            size *= 0.5;
        }
        if !accepted {
            break;
        }
        eval = design.evaluate(&beta);
        log::debug!("newton iteration {iterations}: logpl {:.10}, max |score| {:.3e}", eval.loglik, eval.score.amax());
        if beta.iter().any(|b| b.abs() > options.divergence_bound) {
            return Err(Error::Separation {
                direction: weakest_direction(&eval.sensitivity, &beta, names),
            });
        }
    }
    if !converged && eval.score.amax() <= options.tol {
        converged = true;
    }
    let (min_eig, _) = eigen_range(&eval.sensitivity);
    if min_eig <= SEPARATION_REL * scale0 {
        return Err(Error::Separation {
            direction: weakest_direction(&eval.sensitivity, &beta, names),
        });
    }

    let sandwich = inference::sandwich_from_design(cache, &design, t, &beta, eval.sensitivity.clone()).ok();
    let ci = match &sandwich {
        Some(s) => inference::confidence_intervals(&beta, &s.vcov, options.level, names)?,
        None => Vec::new(),
    };
    Ok(FitResult {
        beta_names: names.to_vec(),
        gamma_hat: t.gamma(&beta),
        gamma_names: t.gamma_names().to_vec(),
        beta_hat: beta,
        logpl: eval.loglik,
        score_norm: eval.score.amax(),
        iterations,
        converged,
        n_points: cache.len(),
        counts: cache.counts(),
        erosion: cache.erosion(),
        markov_range: cache.markov_range(),
        sandwich,
        ci,
    })
}

fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigenvalues();
    (eig.min(), eig.max())
}

fn smallest_eigvec(m: &DMatrix<f64>) -> DVector<f64> {
    let se = m.clone().symmetric_eigen();
    let (idx, _) = se
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    se.eigenvectors.column(idx).into_owned()
}

fn null_space_params(m: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let v = smallest_eigvec(m);
    names
        .iter()
        .zip(v.iter())
        .filter(|(_, c)| c.abs() > 0.1)
        .map(|(n, _)| n.clone())
        .collect()
}

fn weakest_direction(m: &DMatrix<f64>, beta: &[f64], names: &[String]) -> Vec<(String, f64)> {
    let mut v = smallest_eigvec(m);
    if v.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
        v.neg_mut();
    }
    names
        .iter()
        .zip(v.iter())
        .filter(|(_, c)| c.abs() > 1e-3)
        .map(|(n, &c)| (n.clone(), c))
        .collect()
}

/// One grid combination `(R_within, R_between, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeCombo {
    pub r_within: f64,
    pub r_between: f64,
    pub saturation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileRow {
    pub r_within: f64,
    pub r_between: f64,
    pub saturation: f64,
    pub logpl: f64,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ProfileResult {
    pub best: RangeCombo,
    pub fit: FitResult,
    pub table: Vec<ProfileRow>,
    pub erosion: f64,
}

/// Erosion shared by every grid combination: twice the largest interaction range in the grid.
pub fn profile_erosion(grid: &[RangeCombo]) -> f64 {
    2.0 * grid
        .iter()
        .map(|c| c.r_within.max(c.r_between))
        .fold(0.0, f64::max)
}

/// Fits every combination on one common eroded domain and returns the
/// combination with the largest conditional pseudo likelihood.
pub fn profile_fit(
    pattern: &MarkedPointPattern,
    template: &Design,
    constraints: &Constraints,
    grid: &[RangeCombo],
    options: &FitOptions,
) -> Result<ProfileResult> {
    if grid.is_empty() {
        return Err(Error::Config("profile grid is empty".into()));
    }
    let erosion = profile_erosion(grid);
    let fits: Vec<Result<FitResult>> = grid
        .par_iter()
        .map(|combo| {
            let spec = template
                .interaction()
                .with_ranges(combo.r_within, combo.r_between, combo.saturation)?;
            let design = template.with_interaction(spec)?;
            let cache = compute_stat_cache_with_erosion(pattern, &design, erosion.max(design.markov_range()))?;
            let t = build_reparam(design.layout(), &design.names(), constraints)?;
            fit_newton(&cache, &t, options)
        })
        .collect();
    let mut table = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, FitResult)> = None;
    for (n, (combo, fit)) in grid.iter().zip(fits).enumerate() {
        match fit {
            Ok(f) => {
                table.push(ProfileRow {
                    r_within: combo.r_within,
                    r_between: combo.r_between,
                    saturation: combo.saturation,
                    logpl: f.logpl,
                    converged: f.converged,
                    error: None,
                });
                if f.converged && best.as_ref().is_none_or(|(_, b)| f.logpl > b.logpl) {
                    best = Some((n, f));
                }
            }
            Err(e) => table.push(ProfileRow {
                r_within: combo.r_within,
                r_between: combo.r_between,
                saturation: combo.saturation,
                logpl: f64::NAN,
                converged: false,
                error: Some(e.to_string()),
            }),
        }
    }
    let (n, fit) = best.ok_or(Error::ProfileFailed)?;
    Ok(ProfileResult {
        best: grid[n],
        fit,
        table,
        erosion,
    })
}
