//! The REM random environment `τ_n(x) = exp(-β√n H_n(x))` on the n-cube.
//!
//! Energies are generated counter-style: `H_n(x)` is a pure function of
//! `(seed, x)`, so the dense and on-demand storage modes give identical
//! values and a landscape can be regenerated bit-for-bit.

mod io;
mod scale;

pub use io::{read_landscape, write_landscape};
pub use scale::{
    beta_c, beta_for_alpha, solve_bn, ClassThresholds, LandscapeParams, Scale, ScaleClass,
    ScaleKind, ScaleSpec,
};

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::seed::{self, Purpose};

/// Default ceiling for dense storage.
pub const DENSE_LIMIT: u32 = 30;
/// Default ceiling for on-demand generation.
pub const ON_DEMAND_LIMIT: u32 = 48;

/// Storage mode requested at sampling time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    /// Dense up to `dense_limit`, on-demand above.
    Auto,
    Dense,
    OnDemand,
}

/// Capacity limits for [`Landscape::sample_with`].
#[derive(Debug, Clone, Copy)]
pub struct Caps {
    pub dense_limit: u32,
    pub on_demand_limit: u32,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { dense_limit: DENSE_LIMIT, on_demand_limit: ON_DEMAND_LIMIT }
    }
}

#[derive(Debug, Clone)]
enum Store {
    Dense(Vec<f64>),
    OnDemand,
}

/// A sampled landscape.
#[derive(Debug, Clone)]
pub struct Landscape {
    params: LandscapeParams,
    scale: Scale,
    key: u64,
    store: Store,
}

/// `H_n(x)` for the landscape keyed by `key`.
#[inline]
pub fn energy(key: u64, x: u64) -> f64 {
    let u = seed::open_unit(seed::keyed(key, x));
    // Φ^{-1}(u) = -√2 erfc^{-1}(2u)
    -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * u)
}

impl Landscape {
    /// Sample with automatic storage and default caps.
    pub fn sample(params: &LandscapeParams) -> Result<Landscape> {
        Landscape::sample_with(params, Storage::Auto, Caps::default())
    }

    pub fn sample_with(params: &LandscapeParams, storage: Storage, caps: Caps) -> Result<Landscape> {
        let scale = params.scale()?;
        let key = seed::derive(params.master_seed, Purpose::Landscape, 0, 0);
        let n = params.n;
        let dense = match storage {
            Storage::Dense => true,
            Storage::OnDemand => false,
            Storage::Auto => n <= caps.dense_limit,
        };
        let store = if dense {
            if n > caps.dense_limit {
                return Err(Error::Capacity { n, cap: caps.dense_limit, limit: "dense" });
            }
            let len = 1usize << n;
            let mut v: Vec<f64> = Vec::new();
            v.try_reserve_exact(len)
                .map_err(|_| Error::Capacity { n, cap: caps.dense_limit, limit: "memory" })?;
            let bsn = params.beta * f64::from(n).sqrt();
            v.extend((0..len as u64).map(|x| -bsn * energy(key, x)));
            Store::Dense(v)
        } else {
            if n > caps.on_demand_limit {
                return Err(Error::Capacity { n, cap: caps.on_demand_limit, limit: "on-demand" });
            }
            Store::OnDemand
        };
        Ok(Landscape { params: *params, scale, key, store })
    }

    /// Rebuild a dense landscape from stored values.
    pub(crate) fn from_dense(params: LandscapeParams, scale: Scale, log_tau: Vec<f64>) -> Landscape {
        let key = seed::derive(params.master_seed, Purpose::Landscape, 0, 0);
        Landscape { params, scale, key, store: Store::Dense(log_tau) }
    }

    pub fn params(&self) -> &LandscapeParams {
        &self.params
    }

    pub fn scale(&self) -> &Scale {
        &self.scale
    }

    pub fn n(&self) -> u32 {
        self.params.n
    }

    pub fn len(&self) -> u64 {
        1u64 << self.params.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.store, Store::Dense(_))
    }

    /// `ln τ_n(x)`.
    #[inline]
    pub fn log_tau(&self, x: u64) -> f64 {
        match &self.store {
            Store::Dense(v) => v[x as usize],
            Store::OnDemand => -self.params.beta * f64::from(self.params.n).sqrt() * energy(self.key, x),
        }
    }

    /// `H_n(x)`.
    pub fn energy(&self, x: u64) -> f64 {
        -self.log_tau(x) / (self.params.beta * f64::from(self.params.n).sqrt())
    }

    /// `ln γ_n(x) = ln τ_n(x) - ln r_n`.
    #[inline]
    pub fn ln_gamma(&self, x: u64) -> f64 {
        self.log_tau(x) - self.scale.ln_r_n
    }

    /// Dense values of `ln τ`, if stored.
    pub fn log_tau_slice(&self) -> Option<&[f64]> {
        match &self.store {
            Store::Dense(v) => Some(v),
            Store::OnDemand => None,
        }
    }

    fn require_dense(&self) -> Result<&[f64]> {
        self.log_tau_slice().ok_or(Error::Capacity {
            n: self.params.n,
            cap: DENSE_LIMIT,
            limit: "dense (operation needs stored values)",
        })
    }

    /// Gibbs measure `τ(x)/Σ τ`, by log-sum-exp.
    pub fn gibbs_measure(&self) -> Result<Vec<f64>> {
        let lt = self.require_dense()?;
        let max = lt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = lt.iter().map(|&l| (l - max).exp()).collect();
        let z = crate::stats::kahan_sum(w.iter().copied());
        w.iter_mut().for_each(|p| *p /= z);
        Ok(w)
    }

    /// Cumulative Gibbs weights, for inverse-CDF sampling of the start.
    pub fn gibbs_cdf(&self) -> Result<Vec<f64>> {
        let mut w = self.gibbs_measure()?;
        let mut acc = 0.0;
        for p in w.iter_mut() {
            acc += *p;
            *p = acc;
        }
        Ok(w)
    }
}
