//! Monte-Carlo coverage study: one baseline and covariate realization shared
//! by all replications, a true model simulated on each window, and the
//! pseudo-likelihood fit summarized per parameter.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::{CovariateSet, GridGeometry, GrfSampler, GrfSpec, NamedField, RasterField};
use crate::error::{Error, Result};
use crate::fit::{compute_stat_cache, fit_newton, FitOptions};
use crate::geometry::Rect;
use crate::interaction::{Family, InteractionConfig, InteractionSpec};
use crate::model::{build_reparam, Constraints, Design, ModelSpec, ParameterVector, ReparamMap};
use crate::pattern::{MarkedPointPattern, Window};

use super::{
    expected_type_count, first_order_bound, first_order_intensity, sample_poisson_multitype, stream_rng,
    ChainConfig, ChainInit, GibbsSampler, STEPS_PER_POINT,
};

/// Data-generating model. Without an interaction block the truth is Poisson.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionConfig>,
    pub intercepts: Vec<f64>,
    pub covariate_effects: Vec<f64>,
    /// `γ_ij`, row-major `p × p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_gamma: Option<Vec<Vec<f64>>>,
}

/// Model fitted in every replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub interaction: InteractionConfig,
    #[serde(default)]
    pub constraints: Constraints,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub num_types: usize,
    pub truth: TruthSpec,
    pub fit: FitSpec,
    /// Baseline field `φ₀`; its grid must cover the largest window.
    pub phi0: GrfSpec,
    pub covariate: GrfSpec,
    #[serde(default = "default_covariate_name")]
    pub covariate_name: String,
    /// Side lengths `s` of the square windows `[0,s]²`.
    pub windows: Vec<f64>,
    pub replications: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    pub seed: u64,
    /// MH proposals per expected first-order point (interacting truths only).
    #[serde(default = "default_steps_per_point")]
    pub steps_per_point: f64,
    #[serde(default)]
    pub fit_options: FitOptions,
}

fn default_covariate_name() -> String {
    "z".into()
}

fn default_level() -> f64 {
    0.95
}

fn default_steps_per_point() -> f64 {
    STEPS_PER_POINT
}

/// Truth families of the reference protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolTruth {
    Poisson,
    Strauss,
    Geyer,
}

impl StudyConfig {
    /// The three-type protocol: baseline GRF (mean 350, σ² 900, φ 0.1,
    /// truncated at 0) and covariate GRF (mean 0, σ² 0.2, φ 0.1) on
    /// `[0,2]²` with `cells × cells` cells, covariate effects `(1/2, −1/2, 0)`,
    /// ranges 0.02 within and 0.04 between types, fitted with symmetric
    /// cross terms and reference type 3.
    ///
    /// Strauss truth: intercepts `log 1.6`, pair factor 0.8 within and 0.9
    /// between types. Geyer truth: intercepts `log(1.3/1.4)`, `log(1.3/1.6)`,
    /// `log 1.3`, `γ_ii = log 1.1, log 1.2, log 0.8`, saturation 10, no
    /// between-type interaction.
    pub fn protocol(truth: ProtocolTruth, windows: Vec<f64>, replications: usize, seed: u64, cells: usize) -> Self {
        let p = 3;
        let grid = GridGeometry::covering(&Rect::square(2.0), cells, cells).expect("valid grid");
        let strauss_ranges = InteractionSpec::range_matrix(p, 0.02, 0.04);
        let strauss_fit = InteractionConfig {
            family: Family::StraussHardcore,
            ranges: strauss_ranges.clone(),
            hardcore: None,
            saturation: None,
        };
        let geyer_cfg = InteractionConfig {
            family: Family::GeyerSaturation,
            ranges: strauss_ranges.clone(),
            hardcore: None,
            saturation: Some(InteractionSpec::constant_matrix(p, 10.0)),
        };
        let effects = vec![0.5, -0.5, 0.0];
        let (truth, fit) = match truth {
            ProtocolTruth::Poisson => (
                TruthSpec {
                    interaction: None,
                    intercepts: vec![0.0; p],
                    covariate_effects: effects,
                    interaction_gamma: None,
                },
                strauss_fit,
            ),
            ProtocolTruth::Strauss => {
                // Pair factors 0.8 within and 0.9 between types. A cross pair
                // enters both v_ij and v_ji, so each of γ_ij, γ_ji carries half of log 0.9.
                let g = (0..p)
                    .map(|i| (0..p).map(|j| if i == j { 0.8f64.ln() } else { 0.5 * 0.9f64.ln() }).collect())
                    .collect();
                (
                    TruthSpec {
                        interaction: Some(strauss_fit.clone()),
                        intercepts: vec![1.6f64.ln(); p],
                        covariate_effects: effects,
                        interaction_gamma: Some(g),
                    },
                    strauss_fit,
                )
            }
            ProtocolTruth::Geyer => {
                let diag = [1.1f64.ln(), 1.2f64.ln(), 0.8f64.ln()];
                let g = (0..p)
                    .map(|i| (0..p).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
                    .collect();
                (
                    TruthSpec {
                        interaction: Some(geyer_cfg.clone()),
                        intercepts: vec![(1.3f64 / 1.4).ln(), (1.3f64 / 1.6).ln(), 1.3f64.ln()],
                        covariate_effects: effects,
                        interaction_gamma: Some(g),
                    },
                    geyer_cfg,
                )
            }
        };
        StudyConfig {
            num_types: p,
            truth,
            fit: FitSpec {
                interaction: fit,
                constraints: Constraints::standard(p),
            },
            phi0: GrfSpec {
                mean: 350.0,
                sigma2: 900.0,
                phi: 0.1,
                grid,
                truncate_at_zero: true,
            },
            covariate: GrfSpec {
                mean: 0.0,
                sigma2: 0.2,
                phi: 0.1,
                grid,
                truncate_at_zero: false,
            },
            covariate_name: default_covariate_name(),
            windows,
            replications,
            level: 0.95,
            seed,
            steps_per_point: STEPS_PER_POINT,
            fit_options: FitOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.num_types;
        if p == 0 || self.replications == 0 || self.windows.is_empty() {
            return Err(Error::Config("study needs types, replications and windows".into()));
        }
        if self.truth.intercepts.len() != p || self.truth.covariate_effects.len() != p {
            return Err(Error::Config(format!("truth intercepts and covariate effects need {p} entries")));
        }
        if self.windows.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Config("window sides must be positive".into()));
        }
        if !(self.steps_per_point > 0.0) {
            return Err(Error::Config("steps_per_point must be positive".into()));
        }
        Ok(())
    }

    /// Simulates the shared baseline and covariate fields.
    pub fn simulate_fields(&self) -> Result<(RasterField, RasterField)> {
        let phi0 = GrfSampler::new(self.phi0)?.sample_with(&mut stream_rng(self.seed, u64::MAX));
        let z = GrfSampler::new(self.covariate)?.sample_with(&mut stream_rng(self.seed, u64::MAX - 1));
        Ok((phi0, z))
    }
}

/// Per-replication outcome on one window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub window: usize,
    pub stream: u64,
    pub n_points: usize,
    pub counts: Vec<usize>,
    pub n_fitted: usize,
    pub converged: bool,
    pub error: Option<String>,
    pub beta_hat: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covered: Vec<bool>,
}

impl RepRecord {
    pub fn ok(&self) -> bool {
        self.converged && self.error.is_none()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudySummaryRow {
    pub window: usize,
    pub side: f64,
    pub parameter: String,
    pub truth: f64,
    pub n_ok: usize,
    pub mean: f64,
    pub bias: f64,
    pub empirical_se: f64,
    pub mean_estimated_se: f64,
    pub coverage: f64,
    /// Binomial Monte-Carlo standard error of `coverage` at the nominal level.
    pub coverage_mc_se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: usize,
    pub side: f64,
    pub replications: usize,
    pub failures: usize,
    pub mean_counts: Vec<f64>,
    pub expected_counts: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub seed: u64,
    pub level: f64,
    pub beta_names: Vec<String>,
    pub truth_beta: Vec<f64>,
    pub windows: Vec<WindowSummary>,
    pub rows: Vec<StudySummaryRow>,
    pub reps: Vec<RepRecord>,
}

impl StudyReport {
    pub fn failures(&self) -> usize {
        self.windows.iter().map(|w| w.failures).sum()
    }

    pub fn row(&self, window: usize, parameter: &str) -> Option<&StudySummaryRow> {
        self.rows.iter().find(|r| r.window == window && r.parameter == parameter)
    }

    pub fn rows_for(&self, window: usize) -> impl Iterator<Item = &StudySummaryRow> {
        self.rows.iter().filter(move |r| r.window == window)
    }

    /// Writes `summary.csv`, `windows.csv` and `replications.csv` into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(dir.join("summary.csv"), e))?;

        let path = dir.join("windows.csv");
        let mut w = csv::Writer::from_path(&path)?;
        let p = self.windows.first().map_or(0, |x| x.mean_counts.len());
        let mut header = vec!["window".to_string(), "side".into(), "replications".into(), "failures".into()];
        header.extend((1..=p).map(|i| format!("mean_count[{i}]")));
        header.extend((1..=p).map(|i| format!("expected_count[{i}]")));
        w.write_record(&header)?;
        for s in &self.windows {
            let mut rec = vec![
                s.window.to_string(),
                format!("{:?}", s.side),
                s.replications.to_string(),
                s.failures.to_string(),
            ];
            rec.extend(s.mean_counts.iter().map(|c| format!("{c:?}")));
            rec.extend(s.expected_counts.iter().map(|c| format!("{c:?}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("replications.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "rep", "window", "stream", "n_points", "n_fitted", "converged", "error", "parameter", "estimate", "std_error",
            "covered",
        ])?;
        for r in &self.reps {
            if r.beta_hat.is_empty() {
                w.write_record([
                    r.rep.to_string(),
                    r.window.to_string(),
                    r.stream.to_string(),
                    r.n_points.to_string(),
                    r.n_fitted.to_string(),
                    r.converged.to_string(),
                    r.error.clone().unwrap_or_default(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
                continue;
            }
            for (j, name) in self.beta_names.iter().enumerate() {
                w.write_record([
                    r.rep.to_string(),
                    r.window.to_string(),
                    r.stream.to_string(),
                    r.n_points.to_string(),
                    r.n_fitted.to_string(),
                    r.converged.to_string(),
                    r.error.clone().unwrap_or_default(),
                    name.clone(),
                    format!("{:?}", r.beta_hat[j]),
                    format!("{:?}", r.std_errors[j]),
                    r.covered[j].to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

/// Runs the study, simulating the shared fields from the configured seed.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let (phi0, z) = cfg.simulate_fields()?;
    run_study_with_fields(cfg, Arc::new(phi0), Arc::new(z))
}

struct Prepared {
    truth: ModelSpec,
    truth_gamma: ParameterVector,
    fit_design: Design,
    reparam: ReparamMap,
    truth_beta: Vec<f64>,
    poisson: bool,
}

fn prepare(cfg: &StudyConfig, phi0: &Arc<RasterField>, z: &Arc<RasterField>) -> Result<Prepared> {
    let p = cfg.num_types;
    let named = NamedField {
        name: cfg.covariate_name.clone(),
        field: z.clone(),
    };
    let covars = CovariateSet::shared(p, true, vec![named]);
    let poisson = cfg.truth.interaction.is_none();
    let truth_spec = match &cfg.truth.interaction {
        Some(c) => InteractionSpec::from_config(c)?,
        None => InteractionSpec::strauss(InteractionSpec::range_matrix(p, 0.0, 0.0), None)?,
    };
    let truth_design = Design::new(covars.clone(), truth_spec.clone())?;
    let layout = truth_design.layout().clone();
    let mut gamma = vec![0.0; layout.dim()];
    for i in 0..p {
        let r = layout.cov_range(i);
        gamma[r.start] = cfg.truth.intercepts[i];
        gamma[r.start + 1] = cfg.truth.covariate_effects[i];
    }
    if let Some(g) = &cfg.truth.interaction_gamma {
        if g.len() != p || g.iter().any(|row| row.len() != p) {
            return Err(Error::Config(format!("interaction_gamma must be {p}x{p}")));
        }
        for i in 0..p {
            for j in 0..p {
                gamma[layout.inter_index(i, j)] = g[i][j];
            }
        }
    }
    let truth_gamma = ParameterVector::new(&layout, gamma.clone())?;
    let truth = ModelSpec {
        design: truth_design,
        reparam: ReparamMap::identity(layout.names(&covars)),
        baseline: Some(phi0.clone()),
    };

    let fit_spec = InteractionSpec::from_config(&cfg.fit.interaction)?;
    let fit_design = Design::new(covars.clone(), fit_spec.clone())?;
    let reparam = build_reparam(fit_design.layout(), &fit_design.names(), &cfg.fit.constraints)?;
    // the truth expressed in the fitted parametrization
    let interactions_known = poisson || fit_spec == truth_spec;
    if !interactions_known {
        return Err(Error::Config(
            "the fitted interaction must match the true interaction (or the truth must be Poisson)".into(),
        ));
    }
    let mut fit_gamma = gamma;
    if poisson {
        for i in 0..p {
            for j in 0..p {
                fit_gamma[layout.inter_index(i, j)] = 0.0;
            }
        }
    }
    let truth_beta = reparam.identified_beta(fit_design.layout(), covars.is_shared(), &fit_gamma)?;
    Ok(Prepared {
        truth,
        truth_gamma,
        fit_design,
        reparam,
        truth_beta,
        poisson,
    })
}

/// Runs the study on given baseline and covariate realizations.
pub fn run_study_with_fields(cfg: &StudyConfig, phi0: Arc<RasterField>, z: Arc<RasterField>) -> Result<StudyReport> {
    cfg.validate()?;
    let prep = prepare(cfg, &phi0, &z)?;
    let windows: Vec<Window> = cfg
        .windows
        .iter()
        .map(|&s| Window::square(s))
        .collect::<Result<_>>()?;
    let p = cfg.num_types;
    let gamma = prep.truth_gamma.as_slice();
    let bounds: Vec<f64> = (0..p)
        .map(|i| first_order_bound(&prep.truth, gamma, i))
        .collect::<Result<_>>()?;
    let expected: Vec<Vec<f64>> = windows
        .iter()
        .map(|w| {
            (0..p)
                .map(|i| expected_type_count(&prep.truth, gamma, i, w))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let steps: Vec<u64> = expected
        .iter()
        .map(|e| ((cfg.steps_per_point * e.iter().sum::<f64>()).ceil() as u64).max(1000))
        .collect();

    let nw = windows.len();
    log::info!("study: {} replications on {} windows, steps per window {:?}", cfg.replications, nw, steps);
    let jobs: Vec<(usize, usize)> = (0..cfg.replications).flat_map(|r| (0..nw).map(move |w| (r, w))).collect();
    let reps: Vec<RepRecord> = jobs
        .par_iter()
        .map(|&(rep, w)| {
            let stream = (rep * nw + w) as u64;
            let window = &windows[w];
            let pattern = simulate_truth(&prep, window, &bounds, steps[w], cfg.seed, stream);
            match pattern {
                Ok(pat) => fit_one(cfg, &prep, &pat, rep, w, stream),
                Err(e) => RepRecord {
                    rep,
                    window: w,
                    stream,
                    n_points: 0,
                    counts: vec![0; p],
                    n_fitted: 0,
                    converged: false,
                    error: Some(format!("simulation: {e}")),
                    beta_hat: Vec::new(),
                    std_errors: Vec::new(),
                    covered: Vec::new(),
                },
            }
        })
        .collect();

    let names = prep.reparam.beta_names().to_vec();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (w, &side) in cfg.windows.iter().enumerate() {
        let mine: Vec<&RepRecord> = reps.iter().filter(|r| r.window == w).collect();
        let ok: Vec<&RepRecord> = mine.iter().copied().filter(|r| r.ok()).collect();
        let mean_counts = (0..p)
            .map(|i| mine.iter().map(|r| r.counts[i] as f64).sum::<f64>() / mine.len() as f64)
            .collect();
        summaries.push(WindowSummary {
            window: w,
            side,
            replications: mine.len(),
            failures: mine.len() - ok.len(),
            mean_counts,
            expected_counts: expected[w].clone(),
        });
        for (j, name) in names.iter().enumerate() {
            let est: Vec<f64> = ok.iter().map(|r| r.beta_hat[j]).collect();
            let ses: Vec<f64> = ok.iter().map(|r| r.std_errors[j]).filter(|s| s.is_finite()).collect();
            let n = est.len();
            let mean = est.iter().sum::<f64>() / n as f64;
            let var = if n > 1 {
                est.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                f64::NAN
            };
            let coverage = ok.iter().filter(|r| r.covered[j]).count() as f64 / n as f64;
            rows.push(StudySummaryRow {
                window: w,
                side,
                parameter: name.clone(),
                truth: prep.truth_beta[j],
                n_ok: n,
                mean,
                bias: mean - prep.truth_beta[j],
                empirical_se: var.sqrt(),
                mean_estimated_se: ses.iter().sum::<f64>() / ses.len() as f64,
                coverage,
                coverage_mc_se: (cfg.level * (1.0 - cfg.level) / n as f64).sqrt(),
            });
        }
    }
    Ok(StudyReport {
        seed: cfg.seed,
        level: cfg.level,
        beta_names: names,
        truth_beta: prep.truth_beta.clone(),
        windows: summaries,
        rows,
        reps,
    })
}

fn simulate_truth(
    prep: &Prepared,
    window: &Window,
    bounds: &[f64],
    steps: u64,
    seed: u64,
    stream: u64,
) -> Result<MarkedPointPattern> {
    let mut rng = stream_rng(seed, stream);
    let gamma = prep.truth_gamma.as_slice();
    let p = prep.truth.design.num_types();
    if prep.poisson {
        return sample_poisson_multitype(
            window,
            p,
            |i, u| first_order_intensity(&prep.truth, gamma, i, u),
            bounds,
            &mut rng,
        );
    }
    let config = ChainConfig {
        steps: Some(steps),
        birth_prob: 0.5,
        seed: 0,
        init: ChainInit::FirstOrder,
        intensity_bound: None,
    };
    let mut sampler = GibbsSampler::new_with_rng(&prep.truth, &prep.truth_gamma, window, &config, rng)?;
    sampler.run(steps)?;
    sampler.pattern()
}

fn fit_one(cfg: &StudyConfig, prep: &Prepared, pat: &MarkedPointPattern, rep: usize, w: usize, stream: u64) -> RepRecord {
    let mut rec = RepRecord {
        rep,
        window: w,
        stream,
        n_points: pat.len(),
        counts: pat.counts(),
        n_fitted: 0,
        converged: false,
        error: None,
        beta_hat: Vec::new(),
        std_errors: Vec::new(),
        covered: Vec::new(),
    };
    let mut options = cfg.fit_options.clone();
    options.level = cfg.level;
    let fit = compute_stat_cache(pat, &prep.fit_design).and_then(|cache| fit_newton(&cache, &prep.reparam, &options));
    match fit {
        Ok(f) => {
            rec.n_fitted = f.n_points;
            rec.converged = f.converged;
            rec.std_errors = f.std_errors();
            rec.covered = if f.ci.is_empty() {
                vec![false; f.beta_hat.len()]
            } else {
                f.ci.iter().zip(&prep.truth_beta).map(|(c, &t)| c.covers(t)).collect()
            };
            if f.sandwich.is_none() {
                rec.error = Some("sandwich covariance unavailable".into());
            }
            rec.beta_hat = f.beta_hat;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_truth_in_fit_parametrization() {
        let cfg = StudyConfig::protocol(ProtocolTruth::Geyer, vec![1.0], 1, 1, 8);
        let grid = cfg.phi0.grid;
        let phi0 = Arc::new(RasterField::constant(grid, 350.0));
        let z = Arc::new(RasterField::constant(grid, 0.0));
        let prep = prepare(&cfg, &phi0, &z).unwrap();
        assert_eq!(prep.truth_beta.len(), 10);
        let names = prep.reparam.beta_names();
        let get = |n: &str| prep.truth_beta[names.iter().position(|x| x == n).unwrap()];
        assert!((get("intercept[1]") - (1.0f64 / 1.4).ln()).abs() < 1e-12);
        assert!((get("intercept[2]") - (1.0f64 / 1.6).ln()).abs() < 1e-12);
        assert!((get("z[1]") - 0.5).abs() < 1e-12);
        assert!((get("int[3,3]") - 0.8f64.ln()).abs() < 1e-12);
        assert_eq!(get("int[1,2]"), 0.0);
    }

    #[test]
    fn poisson_truth_expected_counts() {
        let cfg = StudyConfig::protocol(ProtocolTruth::Poisson, vec![1.0], 1, 1, 8);
        let grid = cfg.phi0.grid;
        let phi0 = Arc::new(RasterField::constant(grid, 350.0));
        let z = Arc::new(RasterField::constant(grid, 0.0));
        let prep = prepare(&cfg, &phi0, &z).unwrap();
        let w = Window::unit_square();
        for i in 0..3 {
            let c = expected_type_count(&prep.truth, prep.truth_gamma.as_slice(), i, &w).unwrap();
            assert!((c - 350.0).abs() < 1e-6, "{c}");
        }
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let cfg = StudyConfig::protocol(ProtocolTruth::Poisson, vec![1.0], 1, 1, 8);
        let mut v = serde_json::to_value(&cfg).unwrap();
        v.as_object_mut().unwrap().insert("replicatoins".into(), 3.into());
        let err = serde_json::from_value::<StudyConfig>(v).unwrap_err();
        assert!(err.to_string().contains("replicatoins"));
    }
}
