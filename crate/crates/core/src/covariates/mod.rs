//! Covariate rasters and Gaussian random field simulation.

mod grf;
mod raster;

pub use grf::{exponential_covariance, simulate_grf, GrfSampler, GrfSpec, DEFAULT_CHOLESKY_LIMIT};
pub use raster::{GridGeometry, RasterField};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};

/// Value of `f` at `u` (nearest cell center).
pub fn field_lookup(f: &RasterField, u: &Point) -> Result<f64> {
    f.lookup(u)
}

/// A covariate raster with a label used in parameter names.
#[derive(Debug, Clone)]
pub struct NamedField {
    pub name: String,
    pub field: Arc<RasterField>,
}

impl NamedField {
    pub fn new(name: impl Into<String>, field: RasterField) -> Self {
        NamedField {
            name: name.into(),
            field: Arc::new(field),
        }
    }
}

/// Per-type covariate vectors `z_i(u)`, optionally led by an intercept.
#[derive(Debug, Clone)]
pub struct CovariateSet {
    intercept: bool,
    per_type: Vec<Vec<NamedField>>,
}

impl CovariateSet {
    pub fn new(intercept: bool, per_type: Vec<Vec<NamedField>>) -> Result<Self> {
        if per_type.is_empty() {
            return Err(Error::InvalidModel("covariate set needs at least one type".into()));
        }
        Ok(CovariateSet { intercept, per_type })
    }

    /// The same covariates for every one of `p` types.
    pub fn shared(p: usize, intercept: bool, fields: Vec<NamedField>) -> Self {
        CovariateSet {
            intercept,
            per_type: vec![fields; p],
        }
    }

    /// Intercepts only.
    pub fn intercept_only(p: usize) -> Self {
        CovariateSet::shared(p, true, Vec::new())
    }

    /// No first-order terms at all.
    pub fn empty(p: usize) -> Self {
        CovariateSet::shared(p, false, Vec::new())
    }

    pub fn num_types(&self) -> usize {
        self.per_type.len()
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn fields(&self, i: usize) -> &[NamedField] {
        &self.per_type[i]
    }

    pub fn dim(&self, i: usize) -> usize {
        usize::from(self.intercept) + self.per_type[i].len()
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..self.num_types()).map(|i| self.dim(i)).collect()
    }

    /// Writes `z_i(u)` into `out` (length `dim(i)`).
    #[inline]
    pub fn eval_into(&self, i: usize, u: &Point, out: &mut [f64]) -> Result<()> {
        let mut k = 0;
        if self.intercept {
            out[0] = 1.0;
            k = 1;
        }
        for f in &self.per_type[i] {
            out[k] = f.field.lookup(u)?;
            k += 1;
        }
        Ok(())
    }

    pub fn eval(&self, i: usize, u: &Point) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim(i)];
        self.eval_into(i, u, &mut out)?;
        Ok(out)
    }

    /// Labels of the entries of `z_i`.
    pub fn names(&self, i: usize) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dim(i));
        if self.intercept {
            out.push("intercept".to_string());
        }
        out.extend(self.per_type[i].iter().map(|f| f.name.clone()));
        out
    }

    /// True when every type uses the same fields in the same order.
    pub fn is_shared(&self) -> bool {
        let first = &self.per_type[0];
        self.per_type.iter().all(|fs| {
            fs.len() == first.len()
                && fs
                    .iter()
                    .zip(first)
                    .all(|(a, b)| a.name == b.name && (Arc::ptr_eq(&a.field, &b.field) || a.field == b.field))
        })
    }

    /// Checks that every raster covers `rect`.
    pub fn check_covers(&self, rect: &Rect) -> Result<()> {
        for fs in &self.per_type {
            for f in fs {
                if !f.field.covers(rect) {
                    return Err(Error::InvalidRaster(format!(
                        "covariate {:?} does not cover the window",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }
}
