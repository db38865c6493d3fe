//! Bouchaud's trap model on the complete graph with Pareto depths
//! `τ'(x) = e^{E_x/α}`, `E_x` mean-one exponential.
//!
//! The jump chain moves to a uniformly chosen *other* state; including
//! self-jumps would change transition probabilities by `O(1/n_states)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clock::{
    estimate_correlation, ClockScaling, CorrelationEstimate, CorrelationPlan, Environment,
};
use crate::error::{invalid, Error, Result};
use crate::seed::{self, Purpose};
use crate::special::gamma;
use crate::stats::kahan_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub n_states: u64,
    pub alpha: f64,
    pub master_seed: u64,
}

impl TrapParams {
    pub fn new(n_states: u64, alpha: f64, master_seed: u64) -> Result<Self> {
        if n_states < 2 {
            return Err(invalid("n_states", "need at least two states"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("{alpha} outside (0, 1)")));
        }
        Ok(TrapParams { n_states, alpha, master_seed })
    }

    /// `a_n = n_states`, `c_n = a_n^{1/α}`.
    pub fn scaling(&self) -> ClockScaling {
        ClockScaling { a_n: self.n_states as f64, ln_c_n: (self.n_states as f64).ln() / self.alpha }
    }
}

/// A sampled trap landscape (`ln τ'` for each state).
#[derive(Debug, Clone)]
pub struct TrapLandscape {
    params: TrapParams,
    log_tau: Vec<f64>,
}

impl TrapLandscape {
    pub fn sample(params: &TrapParams) -> Result<Self> {
        let len = usize::try_from(params.n_states)
            .map_err(|_| Error::Capacity { n: 64, cap: 0, limit: "trap states" })?;
        let key = seed::derive(params.master_seed, Purpose::Trap, 0, 0);
        let log_tau = (0..len as u64)
            .map(|x| -seed::open_unit(seed::keyed(key, x)).ln() / params.alpha)
            .collect();
        Ok(TrapLandscape { params: *params, log_tau })
    }

    pub fn params(&self) -> &TrapParams {
        &self.params
    }

    pub fn log_tau(&self) -> &[f64] {
        &self.log_tau
    }

    /// `a_n E[e^{-u c_n/τ'}]` over the sampled states; tends to `α Γ(α) u^{-α}`.
    pub fn nu_avg(&self, u: f64, scaling: ClockScaling) -> f64 {
        let s = kahan_sum(self.log_tau.iter().map(|&l| (-u * (scaling.ln_c_n - l).exp()).exp()));
        scaling.a_n * s / self.log_tau.len() as f64
    }
}

impl Environment for TrapLandscape {
    fn n_states(&self) -> u64 {
        self.params.n_states
    }

    #[inline]
    fn log_holding(&self, x: u64) -> f64 {
        self.log_tau[x as usize]
    }

    #[inline]
    fn jump<R: Rng + ?Sized>(&self, x: u64, rng: &mut R) -> u64 {
        let j = rng.gen_range(0..self.params.n_states - 1);
        if j >= x {
            j + 1
        } else {
            j
        }
    }

    fn log_holding_all(&self) -> Option<&[f64]> {
        Some(&self.log_tau)
    }
}

/// Trap-model correlation estimate; environment `e` uses seed
/// `(master_seed, Trap, e)`.
pub fn estimate_trap_correlation(
    params: &TrapParams,
    scaling: ClockScaling,
    plan: &CorrelationPlan,
) -> Result<Vec<CorrelationEstimate>> {
    estimate_correlation(
        |e| {
            let p = TrapParams { master_seed: seed::derive(plan.master_seed, Purpose::Trap, e, 0), ..*params };
            TrapLandscape::sample(&p)
        },
        scaling,
        plan,
    )
}

/// `α Γ(α) u^{-α}`.
pub fn stable_tail(alpha: f64, u: f64) -> f64 {
    alpha * gamma(alpha) * u.powf(-alpha)
}

/// One cell of a model comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellComparison {
    pub t: f64,
    pub rho: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub diff: f64,
    pub pooled_se: f64,
    pub within: bool,
}

/// Per-cell differences and the all-cells flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub cells: Vec<CellComparison>,
    /// Multiple of the pooled SE allowed per cell.
    pub k_se: f64,
    pub all_within: bool,
}

/// Compare two estimate sets on matched `(t, ρ)` grids.
pub fn compare_models(a: &[CorrelationEstimate], b: &[CorrelationEstimate], k_se: f64) -> Result<ComparisonReport> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} cells vs {}", a.len(), b.len())));
    }
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
    let cells = a
        .iter()
        .map(|ea| {
            let eb = b
                .iter()
                .find(|eb| close(ea.t, eb.t) && close(ea.rho, eb.rho))
                .ok_or_else(|| Error::GridMismatch(format!("no match for t={} rho={}", ea.t, ea.rho)))?;
            let diff = ea.p_hat - eb.p_hat;
            let pooled_se = (ea.se * ea.se + eb.se * eb.se).sqrt();
            Ok(CellComparison {
                t: ea.t,
                rho: ea.rho,
                p_a: ea.p_hat,
                p_b: eb.p_hat,
                diff,
                pooled_se,
                within: diff.abs() <= k_se * pooled_se,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_within = cells.iter().all(|c| c.within);
    Ok(ComparisonReport { cells, k_se, all_within })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::Mode;

    #[test]
    fn depths_at_least_one_and_jumps_leave() {
        let p = TrapParams::new(1000, 0.5, 3).unwrap();
        let l = TrapLandscape::sample(&p).unwrap();
        assert!(l.log_tau().iter().all(|&v| v >= 0.0));
        let mut rng = seed::rng(1, Purpose::Chain, 0, 0);
        for x in [0, 500, 999] {
            for _ in 0..100 {
                let y = l.jump(x, &mut rng);
                assert!(y != x && y < 1000);
            }
        }
    }

    #[test]
    fn identical_inputs_compare_equal() {
        let e = CorrelationEstimate {
            t: 1.0,
            s: 1.0,
            rho: 1.0,
            p_hat: 0.4,
            ci_half_width: 0.02,
            se: 0.01,
            n_env: 1,
            n_chain: 100,
            n_failed_env: 0,
            mode: Mode::Annealed,
            env_p_hat: vec![],
        };
        let r = compare_models(std::slice::from_ref(&e), std::slice::from_ref(&e), 3.0).unwrap();
        assert!(r.all_within);
        assert_eq!(r.cells[0].diff, 0.0);
        let mut f = e.clone();
        f.rho = 2.0;
        assert!(matches!(compare_models(&[e], &[f], 3.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn params_validated() {
        assert!(TrapParams::new(1, 0.5, 0).is_err());
        assert!(TrapParams::new(10, 1.0, 0).is_err());
    }
}
