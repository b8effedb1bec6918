//! JSON run configurations and the command runners behind the `mtgibbs` binary.
//!
//! A config file names the command and the blocks it needs:
//!
//! ```json
//! {
//!   "command": "fit",
//!   "pattern": "banks.csv",
//!   "num_types": 3,
//!   "model": {
//!     "covariates": [{"name": "z", "path": "z.grid"}],
//!     "interaction": {"family": "strauss", "R": [[0.02, 0.04], [0.04, 0.02]]},
//!     "constraints": {"reference_type": 2}
//!   }
//! }
//! ```
//!
//! Relative paths are resolved against the config file's directory. Unknown
//! keys are rejected everywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::baseline::{average_by_region, kernel_phi0, log_correlation, KernelSpec};
use crate::covariates::{CovariateSet, NamedField, RasterField};
use crate::error::{Error, Result};
use crate::fit::{compute_stat_cache, fit_newton, profile_fit, FitOptions, FitReport, ProfileRow, RangeCombo};
use crate::geometry::Rect;
use crate::interaction::{InteractionConfig, InteractionSpec};
use crate::model::{Constraints, Design, ModelSpec, ParameterVector};
use crate::pattern::{load_pattern, MarkedPointPattern, Window};
use crate::simulate::{default_steps, ChainConfig, GibbsSampler, StudyConfig};

/// Version of every JSON result written by the runners.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Fit,
    Simulate,
    Study,
    Profile,
    Baseline,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Simulate => "simulate",
            Command::Study => "study",
            Command::Profile => "profile",
            Command::Baseline => "baseline",
        }
    }
}

/// A covariate raster applied to some (default all) types.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateConfig {
    pub name: String,
    pub path: PathBuf,
    /// 1-based types using this covariate; all types when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "yes")]
    pub intercept: bool,
    #[serde(default)]
    pub covariates: Vec<CovariateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Constraints>,
    /// Baseline raster `φ₀` (simulation only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

/// Grid of interaction ranges for `profile`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub r_within: Vec<f64>,
    pub r_between: Vec<f64>,
    /// Saturation thresholds (Geyer); ignored for Strauss.
    #[serde(default = "one_saturation")]
    pub saturation: Vec<f64>,
}

fn one_saturation() -> Vec<f64> {
    vec![1.0]
}

impl ProfileConfig {
    pub fn combos(&self) -> Vec<RangeCombo> {
        let mut out = Vec::new();
        for &rw in &self.r_within {
            for &rb in &self.r_between {
                for &c in &self.saturation {
                    out.push(RangeCombo {
                        r_within: rw,
                        r_between: rb,
                        saturation: c,
                    });
                }
            }
        }
        out
    }
}

/// Inputs of the `baseline` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub kernel: KernelSpec,
    /// Fit result JSON supplying `γ̂`.
    pub fit_result: PathBuf,
    /// Optional raster to correlate `log φ̂₀` with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    /// Optional region label raster for averaging.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<PathBuf>,
}

/// Inputs of the `simulate` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub window: Rect,
    /// Natural parameters by label; unlisted entries are 0.
    pub gamma: BTreeMap<String, f64>,
    #[serde(default)]
    pub chain: ChainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_types: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// Reads, resolves and validates a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}

/// Parses config text; relative paths are resolved against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig> {
    let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.resolve_paths(base);
    cfg.validate()?;
    Ok(cfg)
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &mut self.pattern {
            resolve(base, p);
        }
        if let Some(m) = &mut self.model {
            for c in &mut m.covariates {
                resolve(base, &mut c.path);
            }
            if let Some(b) = &mut m.baseline {
                resolve(base, b);
            }
        }
        if let Some(b) = &mut self.baseline {
            resolve(base, &mut b.fit_result);
            if let Some(r) = &mut b.reference {
                resolve(base, r);
            }
            if let Some(r) = &mut b.regions {
                resolve(base, r);
            }
        }
        if let Some(o) = &mut self.out {
            resolve(base, o);
        }
    }

    fn require<T>(&self, v: &Option<T>, what: &str) -> Result<()> {
        match v {
            Some(_) => Ok(()),
            None => Err(Error::Config(format!(
                "command `{}` requires the \"{what}\" block",
                self.command.name()
            ))),
        }
    }

    /// Command-specific checks.
    pub fn validate(&self) -> Result<()> {
        if !(self.fit.level >= 0.0 && self.fit.level < 1.0) {
            return Err(Error::Config(format!("level {} is not in [0,1)", self.fit.level)));
        }
        if self.fit.tol <= 0.0 {
            return Err(Error::Config("tol must be positive".into()));
        }
        let needs_model = matches!(
            self.command,
            Command::Fit | Command::Profile | Command::Simulate | Command::Baseline
        );
        if needs_model {
            self.require(&self.num_types, "num_types")?;
            self.require(&self.model, "model")?;
            let m = self.model.as_ref().expect("checked");
            if m.interaction.is_none() {
                return Err(Error::Config(format!(
                    "command `{}` requires the \"interaction\" block in \"model\"",
                    self.command.name()
                )));
            }
            for c in &m.covariates {
                for &t in c.types.iter().flatten() {
                    if t == 0 || t > self.num_types.unwrap_or(0) {
                        return Err(Error::Config(format!("covariate {:?} names type {t}", c.name)));
                    }
                }
            }
        }
        match self.command {
            Command::Fit | Command::Profile | Command::Baseline => self.require(&self.pattern, "pattern")?,
            _ => {}
        }
        match self.command {
            Command::Profile => self.require(&self.profile, "profile")?,
            Command::Baseline => self.require(&self.baseline, "baseline")?,
            Command::Simulate => {
                self.require(&self.simulate, "simulate")?;
                self.require(&self.model.as_ref().and_then(|m| m.baseline.clone()), "model.baseline")?;
            }
            Command::Study => self.require(&self.study, "study")?,
            Command::Fit => {}
        }
        Ok(())
    }

    fn model(&self) -> &ModelConfig {
        self.model.as_ref().expect("validated")
    }

    fn p(&self) -> usize {
        self.num_types.expect("validated")
    }

    /// Covariate set described by the model block.
    pub fn covariate_set(&self) -> Result<CovariateSet> {
        let p = self.p();
        let mut per_type: Vec<Vec<NamedField>> = vec![Vec::new(); p];
        for c in &self.model().covariates {
            let field = Arc::new(RasterField::read(&c.path)?);
            let types: Vec<usize> = match &c.types {
                Some(t) => t.iter().map(|t| t - 1).collect(),
                None => (0..p).collect(),
            };
            for t in types {
                per_type[t].push(NamedField {
                    name: c.name.clone(),
                    field: field.clone(),
                });
            }
        }
        CovariateSet::new(self.model().intercept, per_type)
    }

    pub fn design(&self) -> Result<Design> {
        let spec = InteractionSpec::from_config(self.model().interaction.as_ref().expect("validated"))?;
        if spec.num_types() != self.p() {
            return Err(Error::Config(format!(
                "interaction matrices are {}x{} but num_types is {}",
                spec.num_types(),
                spec.num_types(),
                self.p()
            )));
        }
        Design::new(self.covariate_set()?, spec)
    }

    /// Constraints from the model block, defaulting to the last type as reference.
    pub fn constraints(&self) -> Constraints {
        self.model()
            .constraints
            .clone()
            .unwrap_or_else(|| Constraints::standard(self.p()))
    }

    pub fn load_pattern(&self) -> Result<MarkedPointPattern> {
        load_pattern(self.pattern.as_ref().expect("validated"), self.p())
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub level: Option<f64>,
    pub reference_type: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
            if let Some(sim) = &mut cfg.simulate {
                sim.chain.seed = s;
            }
            if let Some(st) = &mut cfg.study {
                st.seed = s;
            }
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        if let Some(l) = self.level {
            cfg.fit.level = l;
            if let Some(st) = &mut cfg.study {
                st.level = l;
            }
        }
        if let Some(r) = self.reference_type {
            if let Some(m) = &mut cfg.model {
                let mut c = m.constraints.clone().unwrap_or_default();
                c.reference_type = Some(r);
                m.constraints = Some(c);
            }
            if let Some(st) = &mut cfg.study {
                st.fit.constraints.reference_type = Some(r);
            }
        }
        cfg.validate()
    }
}

/// Summary of a completed command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    /// True when every requested fit converged and no replication failed.
    pub success: bool,
    pub message: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: u32,
    command: &'a str,
    package: &'static str,
    version: &'static str,
    seed: u64,
    threads: Option<usize>,
    config: &'a RunConfig,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Runs the command described by `cfg`, writing outputs and a manifest into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(
        &out.join("manifest.json"),
        &Manifest {
            schema: SCHEMA_VERSION,
            command: cfg.command.name(),
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            threads: cfg.threads,
            config: cfg,
        },
    )?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match cfg.command {
        Command::Fit => run_fit(cfg, &out),
        Command::Profile => run_profile(cfg, &out),
        Command::Simulate => run_simulate(cfg, &out),
        Command::Study => run_study_cmd(cfg, &out),
        Command::Baseline => run_baseline(cfg, &out),
    })
}

fn run_fit(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let pattern = cfg.load_pattern()?;
    let design = cfg.design()?;
    let t = crate::model::build_reparam(design.layout(), &design.names(), &cfg.constraints())?;
    let cache = compute_stat_cache(&pattern, &design)?;
    let fit = fit_newton(&cache, &t, &cfg.fit)?;
    write_json(&out.join("fit.json"), &fit.to_report())?;
    write_ci_csv(&out.join("coefficients.csv"), &fit.to_report())?;
    Ok(Outcome {
        out_dir: out.to_path_buf(),
        success: fit.converged,
        message: fit.coefficient_table(),
    })
}

fn write_ci_csv(path: &Path, report: &FitReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["parameter", "estimate", "std_error", "ci_low", "ci_high", "level", "valid"])?;
    for (j, name) in report.beta_names.iter().enumerate() {
        let ci = report.ci.get(j);
        w.write_record([
            name.clone(),
            format!("{:?}", report.beta_hat[j]),
            format!("{:?}", report.std_errors[j]),
            ci.map_or("NaN".into(), |c| format!("{:?}", c.low)),
            ci.map_or("NaN".into(), |c| format!("{:?}", c.high)),
            ci.map_or("NaN".into(), |c| format!("{:?}", c.level)),
            ci.map_or("false".into(), |c| c.valid.to_string()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ProfileReport<'a> {
    schema: u32,
    erosion: f64,
    best: RangeCombo,
    table: &'a [ProfileRow],
    fit: FitReport,
}

fn run_profile(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let pattern = cfg.load_pattern()?;
    let design = cfg.design()?;
    let grid = cfg.profile.as_ref().expect("validated").combos();
    let res = profile_fit(&pattern, &design, &cfg.constraints(), &grid, &cfg.fit)?;
    let mut w = csv::Writer::from_path(out.join("profile.csv"))?;
    for row in &res.table {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(out.join("profile.csv"), e))?;
    write_json(
        &out.join("profile.json"),
        &ProfileReport {
            schema: SCHEMA_VERSION,
            erosion: res.erosion,
            best: res.best,
            table: &res.table,
            fit: res.fit.to_report(),
        },
    )?;
    let all = res.table.iter().all(|r| r.converged);
    Ok(Outcome {
        out_dir: out.to_path_buf(),
        success: all,
        message: format!(
            "best R_within {} R_between {} c {} (log pseudo-likelihood {:.6}, erosion {})\n{}",
            res.best.r_within,
            res.best.r_between,
            res.best.saturation,
            res.fit.logpl,
            res.erosion,
            res.fit.coefficient_table()
        ),
    })
}

fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let sim = cfg.simulate.as_ref().expect("validated");
    let design = cfg.design()?;
    let baseline = RasterField::read(cfg.model().baseline.as_ref().expect("validated"))?;
    let names = design.names();
    let mut gamma = vec![0.0; design.dim()];
    for (label, &v) in &sim.gamma {
        let k = names
            .iter()
            .position(|n| n == label)
            .ok_or_else(|| Error::Config(format!("unknown parameter label {label:?}; known: {}", names.join(", "))))?;
        gamma[k] = v;
    }
    let model = ModelSpec::new(design, &Constraints::none(), Some(baseline))?;
    let gamma = ParameterVector::new(model.design.layout(), gamma)?;
    let window = Window::rectangle(sim.window)?;
    let mut chain = sim.chain.clone();
    if chain.steps.is_none() {
        chain.steps = Some(default_steps(&model, gamma.as_slice(), &window)?);
    }
    let mut sampler = GibbsSampler::new(&model, &gamma, &window, &chain)?;
    sampler.run(chain.steps.expect("set"))?;
    let pattern = sampler.pattern()?;
    let path = out.join("pattern.csv");
    pattern.write_csv(&path)?;
    window.write_json(out.join("pattern.window.json"))?;
    write_json(
        &out.join("simulation.json"),
        &serde_json::json!({
            "schema": SCHEMA_VERSION,
            "seed": chain.seed,
            "steps": chain.steps,
            "n_points": pattern.len(),
            "counts": pattern.counts(),
        }),
    )?;
    Ok(Outcome {
        out_dir: out.to_path_buf(),
        success: true,
        message: format!(
            "simulated {} points (counts {:?}) with {} proposals, seed {}",
            pattern.len(),
            pattern.counts(),
            chain.steps.expect("set"),
            chain.seed
        ),
    })
}

fn run_study_cmd(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let study = cfg.study.as_ref().expect("validated");
    let report = crate::simulate::run_study(study)?;
    report.write_csv(out)?;
    write_json(
        &out.join("study.json"),
        &serde_json::json!({
            "schema": SCHEMA_VERSION,
            "seed": report.seed,
            "level": report.level,
            "beta_names": report.beta_names,
            "truth_beta": report.truth_beta,
            "windows": report.windows,
            "rows": report.rows,
        }),
    )?;
    let mut msg = String::new();
    for row in &report.rows {
        msg.push_str(&format!(
            "W{} {:<14} truth {:>9.4} mean {:>9.4} emp.se {:>8.4} est.se {:>8.4} coverage {:.3}\n",
            row.window + 1,
            row.parameter,
            row.truth,
            row.mean,
            row.empirical_se,
            row.mean_estimated_se,
            row.coverage
        ));
    }
    msg.push_str(&format!("failed replications: {}\n", report.failures()));
    Ok(Outcome {
        out_dir: out.to_path_buf(),
        success: report.failures() == 0,
        message: msg,
    })
}

fn run_baseline(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let b = cfg.baseline.as_ref().expect("validated");
    let pattern = cfg.load_pattern()?;
    let design = cfg.design()?;
    let text = fs::read_to_string(&b.fit_result).map_err(|e| Error::io(&b.fit_result, e))?;
    let report: FitReport = serde_json::from_str(&text)?;
    if report.gamma_names != design.names() {
        return Err(Error::Config("fit result parameters do not match the model".into()));
    }
    let mut est = kernel_phi0(&pattern, &design, &report.gamma_hat, &b.kernel)?;
    if let Some(r) = &b.regions {
        est = average_by_region(&est, &RasterField::read(r)?)?;
    }
    est.write(out.join("phi0.grid"))?;
    est.map(f64::ln).write(out.join("log_phi0.grid"))?;
    est.write_long_csv(out.join("phi0.csv"))?;
    let mut msg = format!(
        "phi0 estimate on {}x{} cells: min {:.4}, mean {:.4}, max {:.4}\n",
        est.geometry().n_x,
        est.geometry().n_y,
        est.min(),
        est.mean(),
        est.max()
    );
    if let Some(r) = &b.reference {
        let c = log_correlation(&est, &RasterField::read(r)?)?;
        write_json(
            &out.join("baseline.json"),
            &serde_json::json!({"schema": SCHEMA_VERSION, "log_correlation": c}),
        )?;
        msg.push_str(&format!("correlation of log phi0 with reference: {c:.4}\n"));
    }
    Ok(Outcome {
        out_dir: out.to_path_buf(),
        success: report.converged,
        message: msg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig> {
        parse_config_str(s, Path::new("/data"))
    }

    const MINIMAL_FIT: &str = r#"{
        "command": "fit",
        "pattern": "p.csv",
        "num_types": 2,
        "model": {"interaction": {"family": "strauss", "R": [[0.02, 0.04], [0.04, 0.02]]}}
    }"#;

    #[test]
    fn minimal_fit_gets_defaults() {
        let cfg = parse(MINIMAL_FIT).unwrap();
        assert_eq!(cfg.fit.tol, 1e-8);
        assert_eq!(cfg.fit.level, 0.95);
        assert_eq!(cfg.pattern.as_deref(), Some(Path::new("/data/p.csv")));
        assert_eq!(cfg.constraints_or_default_reference(), Some(2));
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL_FIT.replacen("\"num_types\"", "\"bandwith\": 1, \"num_types\"", 1);
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("bandwith"), "{err}");
    }

    #[test]
    fn fit_without_interaction_is_rejected() {
        let text = r#"{"command": "fit", "pattern": "p.csv", "num_types": 2, "model": {}}"#;
        let err = parse(text).unwrap_err().to_string();
        assert!(err.contains("interaction"), "{err}");
    }

    #[test]
    fn type_mismatch_is_rejected() {
        let text = MINIMAL_FIT.replace("\"num_types\": 2", "\"num_types\": \"two\"");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn reference_override() {
        let mut cfg = parse(MINIMAL_FIT).unwrap();
        Overrides {
            reference_type: Some(1),
            level: Some(0.9),
            ..Default::default()
        }
        .apply(&mut cfg)
        .unwrap();
        assert_eq!(cfg.constraints().reference_type, Some(1));
        assert_eq!(cfg.fit.level, 0.9);
    }

    impl RunConfig {
        fn constraints_or_default_reference(&self) -> Option<usize> {
            self.constraints().reference_type
        }
    }
}
