//! Clock processes and two-time correlation estimates.
//!
//! The clock after `k` jumps is `S̃(k) = Σ_{i=0}^{k} τ(J(i)) e_i` with
//! i.i.d. mean-one exponentials `e_i`; the term `i = 0` is included, so the
//! clock is already positive at step zero. Paths are stored in rescaled
//! units `S̃(k)/c_n`. Increments far below the resolution of the running
//! sum do not change it in floating point, so stored values are
//! nondecreasing rather than strictly increasing.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::landscape::{Caps, Landscape, LandscapeParams, Scale, Storage};
use crate::seed::{self, Purpose, SimRng};
use crate::stats::{mean_var, wilson_half_width, Z95};
use crate::walk;

/// Default cap on jump-chain steps per path.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

/// A random environment driving a clock: holding-time means and a jump chain.
pub trait Environment: Sync {
    fn n_states(&self) -> u64;

    /// `ln τ(x)`.
    fn log_holding(&self, x: u64) -> f64;

    /// Next state of the jump chain.
    fn jump<R: Rng + ?Sized>(&self, x: u64, rng: &mut R) -> u64;

    /// All `ln τ` values, when stored.
    fn log_holding_all(&self) -> Option<&[f64]>;
}

impl Environment for Landscape {
    fn n_states(&self) -> u64 {
        self.len()
    }

    #[inline]
    fn log_holding(&self, x: u64) -> f64 {
        self.log_tau(x)
    }

    #[inline]
    fn jump<R: Rng + ?Sized>(&self, x: u64, rng: &mut R) -> u64 {
        walk::step(x, self.n(), rng)
    }

    fn log_holding_all(&self) -> Option<&[f64]> {
        self.log_tau_slice()
    }
}

/// Time normalizations: `k = ⌊a_n t⌋` steps, clock divided by `c_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockScaling {
    pub a_n: f64,
    pub ln_c_n: f64,
}

impl ClockScaling {
    pub fn new(a_n: f64, c_n: f64) -> Result<Self> {
        if !(a_n > 0.0 && c_n > 0.0) {
            return Err(invalid("a_n, c_n", "scalings must be positive"));
        }
        Ok(ClockScaling { a_n, ln_c_n: c_n.ln() })
    }

    /// The REM choice `c_n = r_n`, `a_n = b_n`.
    pub fn rem(scale: &Scale) -> Self {
        ClockScaling { a_n: scale.b_n(), ln_c_n: scale.ln_r_n }
    }

    /// `⌊a_n t⌋`.
    pub fn steps(&self, t: f64) -> u64 {
        (self.a_n * t).floor() as u64
    }
}

/// Initial distribution of the jump chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Uniform,
    Gibbs,
    Fixed(u64),
}

impl Init {
    pub fn label(&self) -> String {
        match self {
            Init::Uniform => "uniform".into(),
            Init::Gibbs => "gibbs".into(),
            Init::Fixed(x) => format!("fixed:{x}"),
        }
    }
}

/// A prepared sampler for the initial state.
#[derive(Debug, Clone)]
pub enum Start {
    Uniform(u64),
    Gibbs(Vec<f64>),
    Fixed(u64),
}

impl Start {
    pub fn prepare<E: Environment>(init: Init, env: &E) -> Result<Start> {
        Ok(match init {
            Init::Uniform => Start::Uniform(env.n_states()),
            Init::Fixed(x) if x >= env.n_states() => {
                return Err(invalid("init", format!("vertex {x} outside the state space")))
            }
            Init::Fixed(x) => Start::Fixed(x),
            Init::Gibbs => Start::Gibbs(gibbs_cdf(env)?),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Start::Uniform(n) => rng.gen_range(0..*n),
            Start::Fixed(x) => *x,
            Start::Gibbs(cdf) => {
                let u: f64 = rng.gen::<f64>() * cdf[cdf.len() - 1];
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64
            }
        }
    }
}

/// Cumulative Gibbs weights `τ(x)/Σ τ` of an environment with stored values.
pub fn gibbs_cdf<E: Environment>(env: &E) -> Result<Vec<f64>> {
    let lt = env.log_holding_all().ok_or(Error::Capacity {
        n: 64 - env.n_states().leading_zeros() - 1,
        cap: crate::landscape::DENSE_LIMIT,
        limit: "dense (Gibbs start needs stored values)",
    })?;
    let max = lt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = lt
        .iter()
        .map(|&l| {
            acc += (l - max).exp();
            acc
        })
        .collect();
    let total = acc;
    cdf.iter_mut().for_each(|c| *c /= total);
    Ok(cdf)
}

/// Mean-one exponential by inversion of an open-interval uniform.
#[inline]
pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -seed::open_unit(rng.gen::<u64>()).ln()
}

/// Options for [`simulate_clock`].
#[derive(Debug, Clone, Copy)]
pub struct ClockOptions {
    pub step_cap: u64,
    pub record_vertices: bool,
}

impl Default for ClockOptions {
    fn default() -> Self {
        ClockOptions { step_cap: DEFAULT_STEP_CAP, record_vertices: false }
    }
}

/// A realized clock path in rescaled units.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockPath {
    /// `values[k] = S̃(k)/c_n`.
    pub values: Vec<f64>,
    /// Visited states `J(0), J(1), ...` when recorded.
    pub vertices: Option<Vec<u64>>,
    pub a_n: f64,
}

impl ClockPath {
    /// Last stored rescaled clock value.
    pub fn end(&self) -> f64 {
        *self.values.last().expect("paths hold at least the initial value")
    }

    /// `S_n(t) = c_n^{-1} S̃(⌊a_n t⌋)`.
    pub fn rescaled_at(&self, t: f64) -> Result<f64> {
        let k = (self.a_n * t).floor() as usize;
        self.values
            .get(k)
            .copied()
            .ok_or(Error::InsufficientHorizon { end: self.values.len() as f64 / self.a_n, needed: t })
    }

    /// First rescaled clock value strictly above `t`.
    pub fn first_above(&self, t: f64) -> Option<f64> {
        let i = self.values.partition_point(|&v| v <= t);
        self.values.get(i).copied()
    }
}

/// Run the clock until its rescaled value exceeds `horizon`.
pub fn simulate_clock<E: Environment, R: Rng + ?Sized>(
    env: &E,
    start: &Start,
    horizon: f64,
    scaling: ClockScaling,
    opts: ClockOptions,
    rng: &mut R,
) -> Result<ClockPath> {
    if !(horizon > 0.0) {
        return Err(invalid("horizon", format!("{horizon} must be positive")));
    }
    let mut x = start.sample(rng);
    let mut values = Vec::new();
    let mut vertices = opts.record_vertices.then(Vec::new);
    let mut s = 0.0;
    let mut k = 0u64;
    loop {
        s += (env.log_holding(x) - scaling.ln_c_n).exp() * exp1(rng);
        values.push(s);
        if let Some(v) = vertices.as_mut() {
            v.push(x);
        }
        if s > horizon {
            break;
        }
        k += 1;
        if k > opts.step_cap {
            return Err(Error::StepCap { cap: opts.step_cap, horizon });
        }
        x = env.jump(x, rng);
    }
    Ok(ClockPath { values, vertices, a_n: scaling.a_n })
}

/// Whether no rescaled clock value lies in the open interval `(t, t + s)`.
pub fn range_avoids(path: &ClockPath, t: f64, s: f64) -> Result<bool> {
    if path.end() <= t + s {
        return Err(Error::InsufficientHorizon { end: path.end(), needed: t + s });
    }
    if s <= 0.0 {
        return Ok(true);
    }
    Ok(path.first_above(t).is_none_or(|d| d >= t + s))
}

/// First rescaled clock value above each level, for levels sorted ascending,
/// without storing the path.
pub fn first_passages<E: Environment, R: Rng + ?Sized>(
    env: &E,
    start: &Start,
    levels: &[f64],
    scaling: ClockScaling,
    step_cap: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(levels.len());
    let Some(&top) = levels.last() else { return Ok(out) };
    let mut x = start.sample(rng);
    let mut s = 0.0;
    let mut k = 0u64;
    loop {
        s += (env.log_holding(x) - scaling.ln_c_n).exp() * exp1(rng);
        while out.len() < levels.len() && s > levels[out.len()] {
            out.push(s);
        }
        if s > top {
            return Ok(out);
        }
        k += 1;
        if k > step_cap {
            return Err(Error::StepCap { cap: step_cap, horizon: top });
        }
        x = env.jump(x, rng);
    }
}

/// Quenched (fixed environments) or annealed (fresh environment per chain).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Quenched,
    Annealed,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Quenched => "quenched",
            Mode::Annealed => "annealed",
        }
    }
}

/// A time cell: the interval `(t, t + s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub t: f64,
    pub s: f64,
}

impl Cell {
    /// Aging cell `s = ρt`; at `t = 0` the interval is `(0, ρ)`.
    pub fn aging(t: f64, rho: f64) -> Cell {
        Cell { t, s: if t > 0.0 { rho * t } else { rho } }
    }

    /// `s/t`, or `s` itself at `t = 0`.
    pub fn rho(&self) -> f64 {
        if self.t > 0.0 {
            self.s / self.t
        } else {
            self.s
        }
    }
}

/// What to estimate and how much replication to use.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPlan {
    pub cells: Vec<Cell>,
    pub n_env: usize,
    pub n_chain: usize,
    pub mode: Mode,
    pub init: Init,
    pub step_cap: u64,
    pub master_seed: u64,
}

impl CorrelationPlan {
    pub fn aging(ts: &[f64], rhos: &[f64], n_env: usize, n_chain: usize, master_seed: u64) -> Self {
        let cells = ts.iter().flat_map(|&t| rhos.iter().map(move |&r| Cell::aging(t, r))).collect();
        CorrelationPlan {
            cells,
            n_env,
            n_chain,
            mode: Mode::Quenched,
            init: Init::Uniform,
            step_cap: DEFAULT_STEP_CAP,
            master_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_env == 0 || self.n_chain == 0 {
            return Err(invalid("n_env * n_chain", "replication must be positive"));
        }
        if self.cells.is_empty() {
            return Err(invalid("cells", "time grid is empty"));
        }
        for c in &self.cells {
            if !(c.t >= 0.0 && c.s > 0.0 && (c.t + c.s).is_finite()) {
                return Err(invalid("cells", format!("bad cell t={} s={}", c.t, c.s)));
            }
        }
        Ok(())
    }

    fn levels(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.cells.iter().map(|c| c.t).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// Monte Carlo estimate of `C_n(t, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub t: f64,
    pub s: f64,
    pub rho: f64,
    pub p_hat: f64,
    /// 95% half-width.
    pub ci_half_width: f64,
    pub se: f64,
    pub n_env: usize,
    pub n_chain: usize,
    /// Environments excluded from pooling after a replica error.
    pub n_failed_env: usize,
    pub mode: Mode,
    /// Per-environment estimates (quenched mode).
    pub env_p_hat: Vec<f64>,
}

/// Avoidance indicators of one chain for every cell.
fn chain_indicators<E: Environment>(
    env: &E,
    start: &Start,
    plan: &CorrelationPlan,
    levels: &[f64],
    scaling: ClockScaling,
    rng: &mut SimRng,
) -> Result<Vec<bool>> {
    let d = first_passages(env, start, levels, scaling, plan.step_cap, rng)?;
    Ok(plan
        .cells
        .iter()
        .map(|c| {
            let i = levels.partition_point(|&l| l < c.t);
            d[i] >= c.t + c.s
        })
        .collect())
}

/// Estimate `C_n` over the plan's cells for environments produced by `make_env`.
///
/// Environment `e` is `make_env(e)`; chain `(e, c)` uses the stream
/// `(master_seed, Chain, e, c)`. In annealed mode every replica gets its
/// own environment index.
pub fn estimate_correlation<E, F>(
    make_env: F,
    scaling: ClockScaling,
    plan: &CorrelationPlan,
) -> Result<Vec<CorrelationEstimate>>
where
    E: Environment,
    F: Fn(u64) -> Result<E> + Sync,
{
    plan.validate()?;
    let levels = plan.levels();
    let n_cells = plan.cells.len();
    // per environment: Some(counts) or None when it failed
    let per_env: Vec<Option<Vec<u64>>> = match plan.mode {
        Mode::Quenched => {
            let mut out = Vec::with_capacity(plan.n_env);
            for e in 0..plan.n_env as u64 {
                let env = make_env(e)?;
                let start = Start::prepare(plan.init, &env)?;
                let rows: Vec<Result<Vec<bool>>> = (0..plan.n_chain as u64)
                    .into_par_iter()
                    .map(|c| {
                        let mut rng = seed::rng(plan.master_seed, Purpose::Chain, e, c);
                        chain_indicators(&env, &start, plan, &levels, scaling, &mut rng)
                    })
                    .collect();
                out.push(tally(rows, n_cells));
            }
            out
        }
        Mode::Annealed => {
            let total = (plan.n_env * plan.n_chain) as u64;
            (0..total)
                .into_par_iter()
                .map(|r| {
                    let env = make_env(r)?;
                    let start = Start::prepare(plan.init, &env)?;
                    let mut rng = seed::rng(plan.master_seed, Purpose::Chain, r, 0);
                    Ok(tally(vec![chain_indicators(&env, &start, plan, &levels, scaling, &mut rng)], n_cells))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    pool(plan, &per_env)
}

fn tally(rows: Vec<Result<Vec<bool>>>, n_cells: usize) -> Option<Vec<u64>> {
    let mut counts = vec![0u64; n_cells];
    for row in rows {
        let row = row.ok()?;
        for (c, &hit) in counts.iter_mut().zip(&row) {
            *c += u64::from(hit);
        }
    }
    Some(counts)
}

fn pool(plan: &CorrelationPlan, per_env: &[Option<Vec<u64>>]) -> Result<Vec<CorrelationEstimate>> {
    let ok: Vec<&Vec<u64>> = per_env.iter().flatten().collect();
    let failed = per_env.len() - ok.len();
    if ok.is_empty() {
        return Err(Error::StepCap { cap: plan.step_cap, horizon: f64::NAN });
    }
    let chains_per = match plan.mode {
        Mode::Quenched => plan.n_chain,
        Mode::Annealed => 1,
    };
    let total = (ok.len() * chains_per) as f64;
    Ok(plan
        .cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let k: u64 = ok.iter().map(|c| c[i]).sum();
            let p = k as f64 / total;
            let binom_se = (p * (1.0 - p) / total).sqrt();
            let env_p: Vec<f64> = match plan.mode {
                Mode::Quenched => ok.iter().map(|c| c[i] as f64 / chains_per as f64).collect(),
                Mode::Annealed => Vec::new(),
            };
            let env_se = if env_p.len() > 1 { (mean_var(&env_p).1 / env_p.len() as f64).sqrt() } else { 0.0 };
            let se = binom_se.max(env_se);
            let extreme = k == 0 || k as f64 == total || total * p * (1.0 - p) < 5.0;
            let ci = if extreme { wilson_half_width(k as f64, total).max(Z95 * se) } else { Z95 * se };
            CorrelationEstimate {
                t: cell.t,
                s: cell.s,
                rho: cell.rho(),
                p_hat: p,
                ci_half_width: ci,
                se,
                n_env: match plan.mode {
                    Mode::Quenched => ok.len(),
                    Mode::Annealed => plan.n_env,
                },
                n_chain: plan.n_chain,
                n_failed_env: failed,
                mode: plan.mode,
                env_p_hat: env_p,
            }
        })
        .collect())
}

/// REM estimate: environment `e` is the landscape seeded by
/// `(master_seed, Landscape, e)`. Quenched runs store landscapes densely;
/// annealed runs generate energies on demand along the path.
pub fn estimate_rem_correlation(
    params: &LandscapeParams,
    scaling: ClockScaling,
    plan: &CorrelationPlan,
) -> Result<Vec<CorrelationEstimate>> {
    let storage = match plan.mode {
        Mode::Quenched => Storage::Auto,
        Mode::Annealed => Storage::OnDemand,
    };
    estimate_correlation(|e| Landscape::sample_with(&env_params(params, plan.master_seed, e), storage, Caps::default()), scaling, plan)
}

/// Parameters of environment `e` under `master_seed`.
pub fn env_params(params: &LandscapeParams, master_seed: u64, e: u64) -> LandscapeParams {
    LandscapeParams { master_seed: seed::derive(master_seed, Purpose::Landscape, e, 0), ..*params }
}

/// Correlation from the Gibbs start at extreme scales, per environment.
pub fn stationary_start_correlation(
    params: &LandscapeParams,
    cells: &[Cell],
    scaling: ClockScaling,
    n_env: usize,
    n_chain: usize,
    master_seed: u64,
) -> Result<Vec<CorrelationEstimate>> {
    let class = params.scale()?.classify();
    if class.kind != crate::landscape::ScaleKind::Extreme {
        return Err(invalid("scale", "stationary start is defined for extreme scales"));
    }
    if let Some(c) = cells.iter().find(|c| c.s > c.t) {
        return Err(invalid("cells", format!("s = {} exceeds t = {}", c.s, c.t)));
    }
    let plan = CorrelationPlan {
        cells: cells.to_vec(),
        n_env,
        n_chain,
        mode: Mode::Quenched,
        init: Init::Gibbs,
        step_cap: DEFAULT_STEP_CAP,
        master_seed,
    };
    estimate_rem_correlation(params, scaling, &plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Constant holding times, walk on a small cube.
    struct Flat {
        n: u32,
        log_tau: f64,
    }

    impl Environment for Flat {
        fn n_states(&self) -> u64 {
            1 << self.n
        }
        fn log_holding(&self, _: u64) -> f64 {
            self.log_tau
        }
        fn jump<R: Rng + ?Sized>(&self, x: u64, rng: &mut R) -> u64 {
            walk::step(x, self.n, rng)
        }
        fn log_holding_all(&self) -> Option<&[f64]> {
            None
        }
    }

    fn path(values: &[f64]) -> ClockPath {
        ClockPath { values: values.to_vec(), vertices: None, a_n: 1.0 }
    }

    #[test]
    fn avoidance_uses_open_interval() {
        let p = path(&[0.5, 1.0, 2.0, 5.0]);
        assert!(range_avoids(&p, 1.0, 1.0).unwrap());
        assert!(!range_avoids(&p, 1.0, 1.5).unwrap());
        assert!(range_avoids(&p, 2.5, 0.0).unwrap());
        assert!(matches!(range_avoids(&p, 3.0, 3.0), Err(Error::InsufficientHorizon { .. })));
    }

    #[test]
    fn flat_clock_law_of_large_numbers() {
        let k = 10_000.0;
        let env = Flat { n: 10, log_tau: 0.0 };
        let scaling = ClockScaling::new(k, k).unwrap();
        let start = Start::Uniform(env.n_states());
        let mut rng = seed::rng(3, Purpose::Chain, 0, 0);
        let reps = 200;
        let mut sum = 0.0;
        for _ in 0..reps {
            let p = simulate_clock(&env, &start, 1.5, scaling, ClockOptions::default(), &mut rng).unwrap();
            sum += p.rescaled_at(1.0).unwrap();
        }
        assert!((sum / reps as f64 - 1.0).abs() < 0.01);
    }

    #[test]
    fn step_cap_reported() {
        let env = Flat { n: 6, log_tau: 0.0 };
        let scaling = ClockScaling::new(1.0, 1e9).unwrap();
        let opts = ClockOptions { step_cap: 100, record_vertices: false };
        let mut rng = seed::rng(3, Purpose::Chain, 0, 0);
        let r = simulate_clock(&env, &Start::Fixed(0), 1.0, scaling, opts, &mut rng);
        assert!(matches!(r, Err(Error::StepCap { cap: 100, .. })));
    }

    #[test]
    fn first_passages_agree_with_stored_path() {
        let params = LandscapeParams::new(10, 1.5, crate::landscape::ScaleSpec::Epsilon(0.5), 8).unwrap();
        let land = Landscape::sample(&params).unwrap();
        let scaling = ClockScaling::rem(land.scale());
        let start = Start::Uniform(land.len());
        let levels = [0.0, 0.3, 1.0, 2.0];
        let mut r1 = seed::rng(5, Purpose::Chain, 1, 1);
        let mut r2 = r1.clone();
        let d = first_passages(&land, &start, &levels, scaling, DEFAULT_STEP_CAP, &mut r1).unwrap();
        let p = simulate_clock(&land, &start, 2.0, scaling, ClockOptions::default(), &mut r2).unwrap();
        for (l, v) in levels.iter().zip(&d) {
            assert_eq!(p.first_above(*l), Some(*v));
        }
    }

    #[test]
    fn empty_replication_rejected() {
        let params = LandscapeParams::new(8, 1.5, crate::landscape::ScaleSpec::Epsilon(0.5), 8).unwrap();
        let scaling = ClockScaling::rem(&params.scale().unwrap());
        let plan = CorrelationPlan::aging(&[1.0], &[1.0], 0, 10, 1);
        assert!(estimate_rem_correlation(&params, scaling, &plan).is_err());
        let plan = CorrelationPlan::aging(&[], &[1.0], 1, 10, 1);
        assert!(estimate_rem_correlation(&params, scaling, &plan).is_err());
    }
}
