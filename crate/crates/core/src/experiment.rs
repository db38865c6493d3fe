//! Batch experiments: TOML configuration, deterministic runs written to
//! CSV/JSON, and pooled summaries.
//!
//! A run directory holds `correlations.csv` (one row per `(t, ρ)` cell),
//! `classification.json`, `conditions.json` when condition checks were
//! requested, and `manifest.json`. The manifest is rewritten after every
//! experiment so an interrupted or failing run leaves a `"status"` marker
//! next to the rows flushed so far.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clock::{
    estimate_rem_correlation, ClockScaling, CorrelationEstimate, CorrelationPlan, Init, Mode, DEFAULT_STEP_CAP,
};
use crate::conditions::{check_conditions, ConditionOptions, ConditionReport};
use crate::error::{Error, Result};
use crate::landscape::{beta_for_alpha, ClassThresholds, LandscapeParams, ScaleClass, ScaleKind, ScaleSpec};
use crate::limits::asl_cdf;
use crate::stats::Z95;
use crate::trap::{compare_models, estimate_trap_correlation, ComparisonReport, TrapParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Column order of every correlation CSV.
pub const COLUMNS: [&str; 15] = [
    "model", "n", "beta", "eps", "scale_kind", "t", "rho", "mode", "init", "n_env", "n_chain", "p_hat", "ci95",
    "asl_target", "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Rem,
    Trap,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Rem => "rem",
            Model::Trap => "trap",
        }
    }
}

/// Top-level configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentSpec>,
}

/// Acceptance tolerances for the summary checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerance {
    /// Absolute floor of the allowed `|p_hat - Asl|`.
    pub abs: f64,
    /// Multiple of the 95% half-width allowed on top of the floor.
    pub ci_mult: f64,
    /// Minimum `p_hat` on short scales.
    pub short_min: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 0.05, ci_mult: 3.0, short_min: 0.95 }
    }
}

/// Optional condition checks run next to a REM experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsSpec {
    pub t: f64,
    pub u: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeletons: Option<usize>,
}

/// One `[[experiment]]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_states: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Trap: Pareto index. REM: target `α(ε)`, from which `β` is derived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ln_rn: Option<f64>,
    /// Overrides the default `a_n` (`b_n` for the REM, `n_states` for the trap).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_n: Option<f64>,
    pub t: Vec<f64>,
    pub rho: Vec<f64>,
    pub n_env: usize,
    pub n_chain: usize,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// `uniform`, `gibbs` or `fixed:<vertex>`.
    #[serde(default = "default_init")]
    pub init: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<u64>,
    #[serde(default)]
    pub tolerance: Tolerance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ClassThresholds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionsSpec>,
}

fn default_mode() -> Mode {
    Mode::Quenched
}

fn default_init() -> String {
    "uniform".into()
}

pub fn parse_init(s: &str) -> Option<Init> {
    match s {
        "uniform" => Some(Init::Uniform),
        "gibbs" => Some(Init::Gibbs),
        _ => s.strip_prefix("fixed:")?.parse().ok().map(Init::Fixed),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config { field: "config".into(), reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        ExperimentConfig::parse(&text).map_err(|e| match e {
            Error::Config { field, reason } => Error::Config { field: format!("{}: {field}", path.display()), reason },
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config { field: "config".into(), reason: e.to_string() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(
                "schema_version",
                format!("found {}, this build reads {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.experiments.is_empty() {
            return Err(cfg_err("experiment", "no [[experiment]] tables"));
        }
        for (i, e) in self.experiments.iter().enumerate() {
            e.resolve(self.master_seed).map_err(|err| match err {
                Error::Config { field, reason } => {
                    Error::Config { field: format!("experiment[{i}] ({}).{field}", e.name), reason }
                }
                other => other,
            })?;
        }
        Ok(())
    }
}

fn cfg_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.into(), reason: reason.into() }
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Rem { params: LandscapeParams, class: ScaleClass, scaling: ClockScaling, plan: CorrelationPlan },
    Trap { params: TrapParams, scaling: ClockScaling, plan: CorrelationPlan },
}

impl ExperimentSpec {
    pub fn seed(&self, master_seed: u64) -> u64 {
        self.seed.unwrap_or(master_seed)
    }

    pub fn resolve(&self, master_seed: u64) -> Result<Resolved> {
        if self.t.is_empty() || self.rho.is_empty() {
            return Err(cfg_err("t/rho", "time grid is empty"));
        }
        if let Some(t) = self.t.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(cfg_err("t", format!("{t} is not a finite nonnegative time")));
        }
        if let Some(r) = self.rho.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(cfg_err("rho", format!("{r} is not positive")));
        }
        if self.n_env == 0 || self.n_chain == 0 {
            return Err(cfg_err("n_env/n_chain", "replication must be positive"));
        }
        let init = parse_init(&self.init)
            .ok_or_else(|| cfg_err("init", format!("`{}` is not uniform, gibbs or fixed:<vertex>", self.init)))?;
        let seed = self.seed(master_seed);
        let mut plan = CorrelationPlan::aging(&self.t, &self.rho, self.n_env, self.n_chain, seed);
        plan.mode = self.mode;
        plan.init = init;
        plan.step_cap = self.step_cap.unwrap_or(DEFAULT_STEP_CAP);
        let param = |e: Error| match e {
            Error::InvalidParameter { name, reason } => cfg_err(name, reason),
            other => other,
        };
        match self.model {
            Model::Rem => {
                if self.n_states.is_some() {
                    return Err(cfg_err("n_states", "only valid for the trap model"));
                }
                let n = self.n.ok_or_else(|| cfg_err("n", "required for the REM"))?;
                let scale = match (self.eps, self.ln_rn) {
                    (Some(eps), None) => ScaleSpec::Epsilon(eps),
                    (None, Some(l)) => ScaleSpec::LnSpaceScale(l),
                    _ => return Err(cfg_err("eps/ln_rn", "give exactly one of eps and ln_rn")),
                };
                let beta = match (self.beta, self.alpha) {
                    (Some(b), None) => b,
                    (None, Some(a)) => {
                        let eps = self.eps.ok_or_else(|| cfg_err("alpha", "deriving beta from alpha needs eps"))?;
                        if !(a > 0.0) {
                            return Err(cfg_err("alpha", format!("{a} must be positive")));
                        }
                        beta_for_alpha(eps, a)
                    }
                    _ => return Err(cfg_err("beta/alpha", "give exactly one of beta and alpha")),
                };
                let params = LandscapeParams::new(n, beta, scale, seed).map_err(param)?;
                let sc = params.scale().map_err(param)?;
                let class = sc.classify_with(&self.thresholds.unwrap_or_default());
                let mut scaling = ClockScaling::rem(&sc);
                if let Some(a) = self.a_n {
                    scaling = ClockScaling { a_n: positive("a_n", a)?, ..scaling };
                }
                Ok(Resolved::Rem { params, class, scaling, plan })
            }
            Model::Trap => {
                for (set, field) in [
                    (self.n.is_some(), "n"),
                    (self.beta.is_some(), "beta"),
                    (self.eps.is_some(), "eps"),
                    (self.ln_rn.is_some(), "ln_rn"),
                    (self.conditions.is_some(), "conditions"),
                ] {
                    if set {
                        return Err(cfg_err(field, "only valid for the REM"));
                    }
                }
                let n_states = self.n_states.ok_or_else(|| cfg_err("n_states", "required for the trap model"))?;
                let alpha = self.alpha.ok_or_else(|| cfg_err("alpha", "required for the trap model"))?;
                let params = TrapParams::new(n_states, alpha, seed).map_err(param)?;
                let scaling = match self.a_n {
                    Some(a) => {
                        let a = positive("a_n", a)?;
                        ClockScaling { a_n: a, ln_c_n: a.ln() / alpha }
                    }
                    None => params.scaling(),
                };
                Ok(Resolved::Trap { params, scaling, plan })
            }
        }
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(cfg_err(field, format!("{v} must be positive")))
    }
}

/// One line of a correlation CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub model: String,
    pub n: u64,
    pub beta: Option<f64>,
    pub eps: Option<f64>,
    pub scale_kind: String,
    pub t: f64,
    pub rho: f64,
    pub mode: String,
    pub init: String,
    pub n_env: usize,
    pub n_chain: usize,
    pub p_hat: f64,
    pub ci95: f64,
    pub asl_target: Option<f64>,
    pub seed: u64,
}

/// Limit of `C_n(t, ρt)` for the row's regime: 1 on short scales,
/// `Asl_α(1/(1+ρ))` otherwise (the `t ↓ 0` limit on extreme scales).
pub fn asl_target(kind: ScaleKind, alpha: f64, rho: f64) -> Option<f64> {
    match kind {
        ScaleKind::Short => Some(1.0),
        _ => asl_cdf(alpha, 1.0 / (1.0 + rho)).ok(),
    }
}

fn rows_for(spec: &ExperimentSpec, resolved: &Resolved, est: &[CorrelationEstimate], seed: u64) -> Vec<CorrelationRow> {
    let init = spec.init.clone();
    est.iter()
        .map(|e| {
            let (model, n, beta, eps, kind, target) = match resolved {
                Resolved::Rem { params, class, .. } => (
                    Model::Rem,
                    u64::from(params.n),
                    Some(params.beta),
                    Some(class.epsilon),
                    class.kind.as_str(),
                    asl_target(class.kind, class.alpha_eps, e.rho),
                ),
                Resolved::Trap { params, .. } => (
                    Model::Trap,
                    params.n_states,
                    None,
                    None,
                    "trap",
                    asl_cdf(params.alpha, 1.0 / (1.0 + e.rho)).ok(),
                ),
            };
            CorrelationRow {
                model: model.as_str().into(),
                n,
                beta,
                eps,
                scale_kind: kind.into(),
                t: e.t,
                rho: e.rho,
                mode: e.mode.as_str().into(),
                init: init.clone(),
                n_env: e.n_env,
                n_chain: e.n_chain,
                p_hat: e.p_hat,
                ci95: e.ci_half_width,
                asl_target: target,
                seed,
            }
        })
        .collect()
}

pub fn write_rows(path: &Path, rows: &[CorrelationRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a correlation CSV, insisting on the exact column order.
pub fn read_rows(path: &Path) -> Result<Vec<CorrelationRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if headers != COLUMNS {
        return Err(Error::Schema {
            path: path.display().to_string(),
            reason: format!("columns {headers:?}, expected {COLUMNS:?}"),
        });
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Schema { path: path.display().to_string(), reason: e.to_string() }))
        .collect()
}

/// Status of one experiment in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStatus {
    pub name: String,
    pub seed: u64,
    /// `ok`, `partial` (some environments failed) or `failed`.
    pub status: String,
    pub n_failed_env: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub master_seed: u64,
    /// `running`, `complete` or `failed`.
    pub status: String,
    pub wall_time_s: f64,
    pub experiments: Vec<ExperimentStatus>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Classification {
    name: String,
    model: Model,
    #[serde(skip_serializing_if = "Option::is_none")]
    rem: Option<(LandscapeParams, ScaleClass)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trap: Option<TrapParams>,
    scaling: ClockScaling,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<CorrelationRow>,
    /// Rows checked with their experiment's tolerance.
    pub summary: Summary,
    pub manifest: Manifest,
    pub conditions: Vec<ConditionReport>,
}

impl RunOutput {
    /// Every experiment ran.
    pub fn ok(&self) -> bool {
        self.manifest.status == "complete"
    }
}

/// Execute every experiment of `config` and write the bundle into `out`.
///
/// A failing experiment is recorded in the manifest and the run continues;
/// rows of finished experiments are on disk before the next one starts.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    config.validate()?;
    fs::create_dir_all(out)?;
    let started = Instant::now();
    let mut manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: config.master_seed,
        status: "running".into(),
        wall_time_s: 0.0,
        experiments: Vec::new(),
        config: config.clone(),
    };
    let mut rows = Vec::new();
    let mut checked = Vec::new();
    let mut classes = Vec::new();
    let mut reports = Vec::new();
    write_rows(&out.join("correlations.csv"), &rows)?;
    write_json(&out.join("manifest.json"), &manifest)?;
    for spec in &config.experiments {
        let t0 = Instant::now();
        let seed = spec.seed(config.master_seed);
        let resolved = spec.resolve(config.master_seed)?;
        classes.push(match &resolved {
            Resolved::Rem { params, class, scaling, .. } => Classification {
                name: spec.name.clone(),
                model: Model::Rem,
                rem: Some((*params, *class)),
                trap: None,
                scaling: *scaling,
            },
            Resolved::Trap { params, scaling, .. } => Classification {
                name: spec.name.clone(),
                model: Model::Trap,
                rem: None,
                trap: Some(*params),
                scaling: *scaling,
            },
        });
        let est = match &resolved {
            Resolved::Rem { params, scaling, plan, .. } => estimate_rem_correlation(params, *scaling, plan),
            Resolved::Trap { params, scaling, plan } => estimate_trap_correlation(params, *scaling, plan),
        };
        let mut status = match est {
            Ok(est) => {
                let failed = est.first().map_or(0, |e| e.n_failed_env);
                let new = rows_for(spec, &resolved, &est, seed);
                checked.extend(new.iter().map(|r| check_row(r.clone(), spec.tolerance)));
                rows.extend(new);
                ExperimentStatus {
                    name: spec.name.clone(),
                    seed,
                    status: if failed > 0 { "partial" } else { "ok" }.into(),
                    n_failed_env: failed,
                    error: None,
                    wall_time_s: 0.0,
                }
            }
            Err(e) => ExperimentStatus {
                name: spec.name.clone(),
                seed,
                status: "failed".into(),
                n_failed_env: spec.n_env,
                error: Some(e.to_string()),
                wall_time_s: 0.0,
            },
        };
        if let (Some(c), Resolved::Rem { params, .. }) = (&spec.conditions, &resolved) {
            let mut opts = ConditionOptions { seed, ..ConditionOptions::default() };
            if let Some(k) = c.skeletons {
                opts.skeletons = k;
            }
            match check_conditions(params, c.t, &c.u, &c.delta, opts) {
                Ok(r) => reports.push(r),
                Err(e) => {
                    status.status = "failed".into();
                    status.error = Some(format!("conditions: {e}"));
                }
            }
        }
        status.wall_time_s = t0.elapsed().as_secs_f64();
        manifest.experiments.push(status);
        manifest.wall_time_s = started.elapsed().as_secs_f64();
        write_rows(&out.join("correlations.csv"), &rows)?;
        write_json(&out.join("classification.json"), &classes)?;
        if !reports.is_empty() {
            write_json(&out.join("conditions.json"), &reports)?;
        }
        write_json(&out.join("manifest.json"), &manifest)?;
    }
    manifest.status = if manifest.experiments.iter().any(|e| e.status == "failed") { "failed" } else { "complete" }.into();
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    write_json(&out.join("manifest.json"), &manifest)?;
    let summary = Summary { rows: checked };
    write_checks(&out.join("checks.csv"), &summary)?;
    Ok(RunOutput { rows, summary, manifest, conditions: reports })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Outcome of a summary check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Not an acceptance check (extreme scales: the target is a `t ↓ 0` limit).
    Info,
}

/// A pooled row and its check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub row: CorrelationRow,
    /// `(p_hat - asl_target)/se`.
    pub dev_se: Option<f64>,
    pub allowed: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn failed(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == Verdict::Fail)
    }

    pub fn pooled_rows(&self) -> Vec<CorrelationRow> {
        self.rows.iter().map(|r| r.row.clone()).collect()
    }

    /// Fixed-width text table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<5} {:>8} {:<12} {:>6} {:>6} {:>8} {:>8} {:>8} {:>8}  {}\n",
            "model", "n", "scale", "t", "rho", "p_hat", "ci95", "target", "dev/se", "check"
        );
        for r in &self.rows {
            let w = &r.row;
            let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$}"));
            s.push_str(&format!(
                "{:<5} {:>8} {:<12} {:>6} {:>6} {:>8.4} {:>8.4} {:>8} {:>8}  {}\n",
                w.model,
                w.n,
                w.scale_kind,
                w.t,
                w.rho,
                w.p_hat,
                w.ci95,
                opt(w.asl_target, 4),
                opt(r.dev_se, 2),
                match r.verdict {
                    Verdict::Pass => "pass",
                    Verdict::Fail => "FAIL",
                    Verdict::Info => "info",
                }
            ));
        }
        s
    }
}

/// Pool rows describing the same cell across files and environments, then
/// check each pooled cell against its regime target.
///
/// Rows are pooled with weights `n_env·n_chain`, treating the inputs as
/// independent; a group of one row passes through unchanged.
pub fn summarize(paths: &[PathBuf], tol: Tolerance) -> Result<Summary> {
    if paths.is_empty() {
        return Err(cfg_err("inputs", "need at least one result file"));
    }
    let mut groups: BTreeMap<String, Vec<CorrelationRow>> = BTreeMap::new();
    let mut order = Vec::new();
    for p in paths {
        for r in read_rows(p)? {
            let key = format!(
                "{}|{}|{:?}|{:?}|{}|{}|{}|{}|{}",
                r.model, r.n, r.beta, r.eps, r.scale_kind, r.t, r.rho, r.mode, r.init
            );
            let g = groups.entry(key.clone()).or_default();
            if g.is_empty() {
                order.push(key);
            }
            g.push(r);
        }
    }
    let rows = order
        .iter()
        .map(|k| {
            let row = pool_rows(&groups[k]);
            check_row(row, tol)
        })
        .collect();
    Ok(Summary { rows })
}

fn pool_rows(g: &[CorrelationRow]) -> CorrelationRow {
    if g.len() == 1 {
        return g[0].clone();
    }
    let w: Vec<f64> = g.iter().map(|r| (r.n_env * r.n_chain) as f64).collect();
    let total: f64 = w.iter().sum();
    let p = g.iter().zip(&w).map(|(r, w)| w * r.p_hat).sum::<f64>() / total;
    let var = g.iter().zip(&w).map(|(r, w)| (w * r.ci95 / Z95).powi(2)).sum::<f64>() / (total * total);
    let n_env: usize = g.iter().map(|r| r.n_env).sum();
    let chains: usize = g.iter().map(|r| r.n_env * r.n_chain).sum();
    CorrelationRow { n_env, n_chain: chains / n_env, p_hat: p, ci95: Z95 * var.sqrt(), ..g[0].clone() }
}

fn check_row(row: CorrelationRow, tol: Tolerance) -> SummaryRow {
    let se = row.ci95 / Z95;
    let dev_se = row.asl_target.filter(|_| se > 0.0).map(|a| (row.p_hat - a) / se);
    let (verdict, allowed) = match (row.scale_kind.as_str(), row.asl_target) {
        ("short", _) => (if row.p_hat >= tol.short_min { Verdict::Pass } else { Verdict::Fail }, None),
        ("intermediate" | "trap", Some(a)) => {
            let allowed = tol.abs.max(tol.ci_mult * row.ci95);
            (if (row.p_hat - a).abs() <= allowed { Verdict::Pass } else { Verdict::Fail }, Some(allowed))
        }
        _ => (Verdict::Info, None),
    };
    SummaryRow { row, dev_se, allowed, verdict }
}

/// Write the checks next to a pooled summary.
pub fn write_checks(path: &Path, s: &Summary) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        model: &'a str,
        n: u64,
        scale_kind: &'a str,
        t: f64,
        rho: f64,
        p_hat: f64,
        asl_target: Option<f64>,
        dev_se: Option<f64>,
        allowed: Option<f64>,
        verdict: Verdict,
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in &s.rows {
        w.serialize(Line {
            model: &r.row.model,
            n: r.row.n,
            scale_kind: &r.row.scale_kind,
            t: r.row.t,
            rho: r.row.rho,
            p_hat: r.row.p_hat,
            asl_target: r.row.asl_target,
            dev_se: r.dev_se,
            allowed: r.allowed,
            verdict: r.verdict,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Estimate view of a CSV row; the SE is recovered from the half-width.
pub fn row_estimate(r: &CorrelationRow) -> CorrelationEstimate {
    CorrelationEstimate {
        t: r.t,
        s: if r.t > 0.0 { r.rho * r.t } else { r.rho },
        rho: r.rho,
        p_hat: r.p_hat,
        ci_half_width: r.ci95,
        se: r.ci95 / Z95,
        n_env: r.n_env,
        n_chain: r.n_chain,
        n_failed_env: 0,
        mode: if r.mode == "annealed" { Mode::Annealed } else { Mode::Quenched },
        env_p_hat: Vec::new(),
    }
}

/// Compare two result files cell by cell.
pub fn compare_files(a: &Path, b: &Path, k_se: f64) -> Result<ComparisonReport> {
    let ea: Vec<_> = read_rows(a)?.iter().map(row_estimate).collect();
    let eb: Vec<_> = read_rows(b)?.iter().map(row_estimate).collect();
    compare_models(&ea, &eb, k_se)
}
