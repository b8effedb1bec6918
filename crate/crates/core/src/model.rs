//! Parameter stacking, identifiability constraints, conditional intensity,
//! type probabilities and conditional moments.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariates::{CovariateSet, RasterField};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::interaction::{local_contribution, InteractionSpec, Layout, LocalContribution};
use crate::pattern::PointContext;

/// Probabilities below this are flushed to zero.
const PROB_FLOOR: f64 = 1e-300;

/// Covariates plus interaction: everything the pseudo likelihood needs.
/// It deliberately carries no baseline surface.
#[derive(Debug, Clone)]
pub struct Design {
    covariates: CovariateSet,
    interaction: InteractionSpec,
    layout: Layout,
}

impl Design {
    pub fn new(covariates: CovariateSet, interaction: InteractionSpec) -> Result<Self> {
        if covariates.num_types() != interaction.num_types() {
            return Err(Error::InvalidModel(format!(
                "covariates describe {} types but the interaction {}",
                covariates.num_types(),
                interaction.num_types()
            )));
        }
        let layout = Layout::for_covariates(&covariates);
        Ok(Design {
            covariates,
            interaction,
            layout,
        })
    }

    pub fn num_types(&self) -> usize {
        self.layout.num_types()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn covariates(&self) -> &CovariateSet {
        &self.covariates
    }

    pub fn interaction(&self) -> &InteractionSpec {
        &self.interaction
    }

    pub fn markov_range(&self) -> f64 {
        self.interaction.markov_range()
    }

    pub fn names(&self) -> Vec<String> {
        self.layout.names(&self.covariates)
    }

    /// Same covariates with a different interaction.
    pub fn with_interaction(&self, interaction: InteractionSpec) -> Result<Self> {
        Design::new(self.covariates.clone(), interaction)
    }

    /// `v{(u,i), y}` with any point at `u` removed from `ctx`.
    pub fn local_contribution<C: PointContext>(
        &self,
        u: &Point,
        i: usize,
        ctx: &C,
    ) -> Result<LocalContribution> {
        local_contribution(&self.interaction, &self.covariates, &self.layout, u, i, ctx)
    }

    /// `v{(u,l), y}` for every mark `l`.
    pub fn local_contributions<C: PointContext>(
        &self,
        u: &Point,
        ctx: &C,
    ) -> Result<Vec<LocalContribution>> {
        (0..self.num_types())
            .map(|l| self.local_contribution(u, l, ctx))
            .collect()
    }
}

/// Stacked natural parameter `γ` in [`Layout`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(layout: &Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: values.len(),
            });
        }
        Ok(ParameterVector(values))
    }

    pub fn zeros(layout: &Layout) -> Self {
        ParameterVector(vec![0.0; layout.dim()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    #[inline]
    pub fn dot(&self, v: &[f64]) -> f64 {
        dot(&self.0, v)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Identifiability constraints on `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Constraints {
    /// Type whose first-order block `γ_{ref,0}` is fixed at zero (1-based).
    /// `None` disables the contrast constraint.
    pub reference_type: Option<usize>,
    /// Merge `γ_ij` and `γ_ji` into one parameter.
    pub symmetric_cross: bool,
    /// Further entries of `γ` fixed at zero, by parameter label.
    pub extra_fixes: Vec<String>,
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints {
            reference_type: None,
            symmetric_cross: true,
            extra_fixes: Vec::new(),
        }
    }
}

impl Constraints {
    /// Reference type `p` and symmetric cross terms.
    pub fn standard(p: usize) -> Self {
        Constraints {
            reference_type: Some(p),
            ..Constraints::default()
        }
    }

    pub fn none() -> Self {
        Constraints {
            reference_type: None,
            symmetric_cross: false,
            extra_fixes: Vec::new(),
        }
    }
}

/// Full-rank linear map `γ = Tβ` with labels for `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparamMap {
    t: DMatrix<f64>,
    beta_names: Vec<String>,
    gamma_names: Vec<String>,
    /// Reference type (0-based) whose first-order block is fixed, if any.
    reference: Option<usize>,
}

impl ReparamMap {
    pub fn identity(gamma_names: Vec<String>) -> Self {
        let k = gamma_names.len();
        ReparamMap {
            t: DMatrix::identity(k, k),
            beta_names: gamma_names.clone(),
            gamma_names,
            reference: None,
        }
    }

    /// The `k × k'` Jacobian `T`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn gamma_dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn beta_dim(&self) -> usize {
        self.t.ncols()
    }

    pub fn beta_names(&self) -> &[String] {
        &self.beta_names
    }

    pub fn gamma_names(&self) -> &[String] {
        &self.gamma_names
    }

    /// `γ = Tβ`.
    pub fn gamma(&self, beta: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(beta);
        (&self.t * b).as_slice().to_vec()
    }

    /// `Tᵀ x` for `x` of length `k`.
    pub fn pull_back(&self, x: &[f64]) -> Vec<f64> {
        self.t.tr_mul(&DVector::from_column_slice(x)).as_slice().to_vec()
    }

    /// `Tᵀ M T`.
    pub fn pull_back_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.t.transpose() * m * &self.t
    }

    /// The `β` that represents `γ` under this map, after moving the common
    /// first-order shift onto the reference type when covariates are shared.
    /// Errors if `γ` is not representable (for instance an asymmetric truth
    /// under a symmetric parametrization).
    pub fn identified_beta(&self, layout: &Layout, covariates_shared: bool, gamma: &[f64]) -> Result<Vec<f64>> {
        let mut g = gamma.to_vec();
        if let (Some(r), true) = (self.reference, covariates_shared) {
            let shift: Vec<f64> = layout.cov_range(r).map(|k| gamma[k]).collect();
            for i in 0..layout.num_types() {
                for (k, s) in layout.cov_range(i).zip(&shift) {
                    g[k] -= s;
                }
            }
        }
        let t = &self.t;
        let rhs = t.tr_mul(&DVector::from_column_slice(&g));
        let beta = (t.transpose() * t)
            .cholesky()
            .ok_or_else(|| Error::RankDeficientReparam("TᵀT is singular".into()))?
            .solve(&rhs);
        let back = t * &beta;
        let resid = back
            .iter()
            .zip(&g)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if resid > 1e-10 * (1.0 + g.iter().map(|x| x.abs()).fold(0.0, f64::max)) {
            return Err(Error::InvalidModel(format!(
                "parameter vector is not representable under the constraints (residual {resid:e})"
            )));
        }
        Ok(beta.as_slice().to_vec())
    }
}

/// Builds `T` from the constraints. `names` labels `γ` in layout order.
pub fn build_reparam(layout: &Layout, names: &[String], constraints: &Constraints) -> Result<ReparamMap> {
    let p = layout.num_types();
    let k = layout.dim();
    if names.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: names.len(),
        });
    }
    // column assigned to each γ entry; None = fixed at zero
    let mut fixed = vec![false; k];
    let reference = match constraints.reference_type {
        None => None,
        Some(r) if r >= 1 && r <= p => Some(r - 1),
        Some(r) => {
            return Err(Error::InvalidModel(format!("reference type {r} not in 1..={p}")));
        }
    };
    if let Some(r) = reference {
        for slot in layout.cov_range(r) {
            fixed[slot] = true;
        }
    }
    for name in &constraints.extra_fixes {
        let slot = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidModel(format!("unknown parameter {name:?} in extra_fixes")))?;
        fixed[slot] = true;
    }
    let mut column_of: Vec<Option<usize>> = vec![None; k];
    let mut beta_names = Vec::new();
    for slot in 0..k {
        if fixed[slot] {
            continue;
        }
        if constraints.symmetric_cross {
            if let Some((i, j)) = cross_pair(layout, slot) {
                if i > j {
                    let partner = layout.inter_index(j, i);
                    if !fixed[partner] {
                        column_of[slot] = column_of[partner];
                        continue;
                    }
                }
            }
        }
        column_of[slot] = Some(beta_names.len());
        beta_names.push(names[slot].clone());
    }
    let kp = beta_names.len();
    if kp == 0 {
        return Err(Error::RankDeficientReparam("every parameter is fixed".into()));
    }
    let mut t = DMatrix::zeros(k, kp);
    for (slot, col) in column_of.iter().enumerate() {
        if let Some(c) = col {
            t[(slot, *c)] = 1.0;
        }
    }
    let rank = t.clone().svd(false, false).rank(1e-10);
    if rank < kp {
        return Err(Error::RankDeficientReparam(format!("rank {rank} < {kp}")));
    }
    Ok(ReparamMap {
        t,
        beta_names,
        gamma_names: names.to_vec(),
        reference,
    })
}

/// `(i, j)` when `slot` holds a cross interaction `γ_ij`, `i ≠ j`.
fn cross_pair(layout: &Layout, slot: usize) -> Option<(usize, usize)> {
    let p = layout.num_types();
    (0..p)
        .flat_map(|i| (0..p).map(move |j| (i, j)))
        .find(|&(i, j)| i != j && layout.inter_index(i, j) == slot)
}

/// Design plus identifiability map plus (for simulation only) the baseline `φ₀`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub design: Design,
    pub reparam: ReparamMap,
    pub baseline: Option<Arc<RasterField>>,
}

impl ModelSpec {
    pub fn new(design: Design, constraints: &Constraints, baseline: Option<RasterField>) -> Result<Self> {
        if let Some(b) = &baseline {
            if b.min() < 0.0 {
                return Err(Error::InvalidModel("baseline must be nonnegative".into()));
            }
        }
        let reparam = build_reparam(design.layout(), &design.names(), constraints)?;
        Ok(ModelSpec {
            design,
            reparam,
            baseline: baseline.map(Arc::new),
        })
    }
}

/// `λ{(u,i), y} = φ₀(u) exp(γᵀ v{(u,i), y})`, zero on a hard-core violation.
pub fn conditional_intensity<C: PointContext>(
    model: &ModelSpec,
    gamma: &ParameterVector,
    u: &Point,
    i: usize,
    ctx: &C,
) -> Result<f64> {
    let baseline = model.baseline.as_ref().ok_or(Error::MissingBaseline)?;
    let lc = model.design.local_contribution(u, i, ctx)?;
    if !lc.feasible {
        return Ok(0.0);
    }
    Ok(baseline.lookup(u)? * gamma.dot(&lc.values).exp())
}

/// Softmax of the linear predictors `γᵀ v_l` over feasible marks; all zeros
/// when every mark is infeasible.
pub fn type_probability(gamma: &[f64], stats: &[LocalContribution]) -> Vec<f64> {
    let etas: Vec<Option<f64>> = stats
        .iter()
        .map(|s| s.feasible.then(|| dot(gamma, &s.values)))
        .collect();
    softmax(&etas)
}

pub(crate) fn softmax(etas: &[Option<f64>]) -> Vec<f64> {
    let max = etas.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; etas.len()];
    }
    let w: Vec<f64> = etas
        .iter()
        .map(|e| e.map_or(0.0, |e| (e - max).exp()))
        .collect();
    let total: f64 = w.iter().sum();
    w.iter()
        .map(|x| {
            let q = x / total;
            if q < PROB_FLOOR {
                0.0
            } else {
                q
            }
        })
        .collect()
}

/// Conditional mean `E`, second moment `E²`, variance `V = E² − EEᵀ` of the
/// statistic under the type probabilities, and residuals `h_i = v_i − E`.
#[derive(Debug, Clone)]
pub struct ConditionalMoments {
    pub probs: Vec<f64>,
    pub e: DVector<f64>,
    pub e2: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub h: Vec<DVector<f64>>,
}

pub fn conditional_moments(gamma: &[f64], stats: &[LocalContribution]) -> Result<ConditionalMoments> {
    let k = gamma.len();
    if stats.iter().all(|s| !s.feasible) {
        return Err(Error::AllMarksInfeasible {
            x: f64::NAN,
            y: f64::NAN,
        });
    }
    let probs = type_probability(gamma, stats);
    let mut e = DVector::zeros(k);
    let mut e2 = DMatrix::zeros(k, k);
    for (s, &q) in stats.iter().zip(&probs) {
        if q == 0.0 {
            continue;
        }
        let v = DVector::from_column_slice(&s.values);
        e.axpy(q, &v, 1.0);
        e2.ger(q, &v, &v, 1.0);
    }
    let v = &e2 - &e * e.transpose();
    let h = stats
        .iter()
        .map(|s| DVector::from_column_slice(&s.values) - &e)
        .collect();
    Ok(ConditionalMoments { probs, e, e2, v, h })
}
