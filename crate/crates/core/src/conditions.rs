//! Durrett–Resnick verification quantities for the REM clock.
//!
//! With `w_x = c_n / τ(x)` (so that `u/γ(x) = u w_x` when `c_n = r_n`):
//!
//! * `h^u(y) = (1/n) Σ_{x∼y} e^{-u w_x}`
//! * `ν^{J,t}(u) = Σ_{j=1}^{k} h^u(J(j-1))`, `(σ^{J,t})^2 = Σ (h^u(J(j-1)))^2`, `k = ⌊a_n t⌋`
//! * `ν_n(u) = (a_n/2^n) Σ_x e^{-u w_x}`, `σ_n^2(u) = (a_n/2^n) Σ_y h^u(y)^2`

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clock::ClockScaling;
use crate::error::{invalid, Error, Result};
use crate::landscape::{Landscape, LandscapeParams, Scale, ScaleClass, ScaleKind};
use crate::seed::{self, Purpose};
use crate::special::{gamma, integrate};
use crate::stats::{kahan_sum, mean_var, median};
use crate::walk;

/// `e^{-u w}` with `w = exp(ln c_n - ln τ)`, guarded against overflow.
#[inline]
fn weight(u: f64, ln_w: f64) -> f64 {
    if u == 0.0 {
        return 1.0;
    }
    let e = u.ln() + ln_w;
    if e > 6.62 {
        // u w > 750
        0.0
    } else {
        (-e.exp()).exp()
    }
}

/// `h^u_n(y)`.
pub fn h_u(land: &Landscape, y: u64, u: f64, scaling: ClockScaling) -> f64 {
    let n = land.n();
    let s: f64 = (0..n).map(|i| weight(u, scaling.ln_c_n - land.log_tau(y ^ (1 << i)))).sum();
    s / f64::from(n)
}

/// `h^u` at every vertex of a dense landscape.
pub fn h_table(land: &Landscape, u: f64, scaling: ClockScaling) -> Result<Vec<f64>> {
    let lt = dense(land)?;
    let n = land.n();
    let f: Vec<f64> = lt.iter().map(|&l| weight(u, scaling.ln_c_n - l)).collect();
    let inv_n = 1.0 / f64::from(n);
    Ok((0..f.len())
        .map(|y| (0..n).map(|i| f[y ^ (1 << i)]).sum::<f64>() * inv_n)
        .collect())
}

fn dense(land: &Landscape) -> Result<&[f64]> {
    land.log_tau_slice().ok_or(Error::Capacity {
        n: land.n(),
        cap: crate::landscape::DENSE_LIMIT,
        limit: "dense (exact averages need stored values)",
    })
}

/// `k = ⌊a_n t⌋` and a check that the skeleton covers it.
fn chain_len(skeleton: &[u64], t: f64, scaling: ClockScaling) -> Result<usize> {
    let k = scaling.steps(t) as usize;
    if skeleton.len() < k {
        return Err(Error::InsufficientHorizon { end: skeleton.len() as f64, needed: k as f64 });
    }
    Ok(k)
}

/// `ν^{J,t}_n(u, ∞)` along a jump-chain skeleton `J(0), J(1), ...`.
pub fn nu_chain(skeleton: &[u64], land: &Landscape, u: f64, t: f64, scaling: ClockScaling) -> Result<f64> {
    let k = chain_len(skeleton, t, scaling)?;
    Ok(skeleton[..k].iter().map(|&y| h_u(land, y, u, scaling)).sum())
}

/// `(σ^{J,t}_n)^2(u, ∞)` along a skeleton.
pub fn sigma2_chain(skeleton: &[u64], land: &Landscape, u: f64, t: f64, scaling: ClockScaling) -> Result<f64> {
    let k = chain_len(skeleton, t, scaling)?;
    Ok(skeleton[..k].iter().map(|&y| h_u(land, y, u, scaling).powi(2)).sum())
}

/// Sorted `ln w_x` for repeated evaluation of `ν_n` on many `u`.
#[derive(Debug, Clone)]
pub struct NuTable {
    ln_w: Vec<f64>,
    a_n: f64,
}

impl NuTable {
    pub fn new(land: &Landscape, scaling: ClockScaling) -> Result<Self> {
        let mut ln_w: Vec<f64> = dense(land)?.iter().map(|&l| scaling.ln_c_n - l).collect();
        ln_w.sort_by(f64::total_cmp);
        Ok(NuTable { ln_w, a_n: scaling.a_n })
    }

    /// `ν_n(u, ∞)`; terms with `u w > 750` vanish and are skipped.
    pub fn nu(&self, u: f64) -> f64 {
        if u == 0.0 {
            return self.a_n;
        }
        let cut = 6.62 - u.ln();
        let end = self.ln_w.partition_point(|&l| l <= cut);
        let s = kahan_sum(self.ln_w[..end].iter().map(|&l| weight(u, l)));
        self.a_n * s / self.ln_w.len() as f64
    }

    /// `∫_0^δ ν_n(u, ∞) du = (a_n/2^n) Σ_x (1 - e^{-δ w_x}) / w_x`.
    pub fn integral_to(&self, delta: f64) -> f64 {
        let s = kahan_sum(self.ln_w.iter().map(|&l| {
            let w = l.exp();
            if w == 0.0 {
                delta
            } else if w.is_infinite() {
                0.0
            } else {
                -(-delta * w).exp_m1() / w
            }
        }));
        self.a_n * s / self.ln_w.len() as f64
    }
}

/// `ν_n(u, ∞)` over a dense landscape.
pub fn nu_avg(land: &Landscape, u: f64, scaling: ClockScaling) -> Result<f64> {
    let lt = dense(land)?;
    let s = kahan_sum(lt.iter().map(|&l| weight(u, scaling.ln_c_n - l)));
    Ok(scaling.a_n * s / lt.len() as f64)
}

/// `σ_n^2(u, ∞) = (a_n/2^n) Σ_y h^u(y)^2`, exact.
///
/// Equivalent to `(a_n/2^n)[(1/n) Σ_x f_x^2 + (2/n^2) Σ_{dist(x,x')=2} f_x f_{x'}]`
/// with `f = e^{-u w}`, but linear in `2^n n`.
pub fn sigma2_avg(land: &Landscape, u: f64, scaling: ClockScaling) -> Result<f64> {
    let h = h_table(land, u, scaling)?;
    Ok(scaling.a_n * kahan_sum(h.iter().map(|v| v * v)) / h.len() as f64)
}

/// A Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampled {
    pub value: f64,
    pub se: f64,
}

/// `ν_n(u, ∞)` from uniformly sampled vertices; works for on-demand landscapes.
pub fn nu_avg_sampled<R: Rng + ?Sized>(land: &Landscape, u: f64, scaling: ClockScaling, samples: usize, rng: &mut R) -> Sampled {
    let xs: Vec<f64> = (0..samples)
        .map(|_| weight(u, scaling.ln_c_n - land.log_tau(rng.gen_range(0..land.len()))))
        .collect();
    scaled(&xs, scaling.a_n)
}

/// `σ_n^2(u, ∞)` from uniformly sampled vertices `y` (each contributing the
/// neighbour-pair sum `h^u(y)^2`).
pub fn sigma2_avg_sampled<R: Rng + ?Sized>(land: &Landscape, u: f64, scaling: ClockScaling, samples: usize, rng: &mut R) -> Sampled {
    let xs: Vec<f64> = (0..samples)
        .map(|_| h_u(land, rng.gen_range(0..land.len()), u, scaling).powi(2))
        .collect();
    scaled(&xs, scaling.a_n)
}

fn scaled(xs: &[f64], a: f64) -> Sampled {
    let (m, v) = mean_var(xs);
    Sampled { value: a * m, se: a * (v / xs.len() as f64).sqrt() }
}

/// `E ν_n(u, ∞) = (a_n/b_n) ∫ f'(y) h_n(y) dy` with `f(y) = e^{-u/y}`,
/// evaluated on `y = e^w`.
pub fn expected_nu(scale: &Scale, u: f64, a_n: f64) -> f64 {
    if u == 0.0 {
        return a_n;
    }
    let lu = u.ln();
    // f'(e^w) e^w = u e^{-w} exp(-u e^{-w}), a Gumbel density centred at ln u
    let g = |w: f64| (lu - w - (lu - w).exp() + scale.ln_h_of_ln(w)).exp();
    let left = integrate(g, lu - 8.0, lu, 1e-13);
    let right = integrate(g, lu, lu + 60.0, 1e-13);
    (a_n.ln() - scale.ln_b_n).exp() * (left + right)
}

/// `E σ_n^2(u) = E ν_n(2u)/n + (E ν_n(u))^2 (n-1)/(a_n n)`.
pub fn expected_sigma2(scale: &Scale, u: f64, a_n: f64) -> f64 {
    let n = f64::from(scale.n);
    expected_nu(scale, 2.0 * u, a_n) / n + expected_nu(scale, u, a_n).powi(2) * (n - 1.0) / (a_n * n)
}

/// Constants of the ergodic bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaParams {
    pub c: f64,
    pub rho_n: f64,
}

impl ThetaParams {
    /// `c = 10`, `ρ_n = 1/ln n`.
    pub fn default_for(n: u32) -> Self {
        ThetaParams { c: 10.0, rho_n: 1.0 / f64::from(n).ln() }
    }
}

/// `Θ_n(t,u) = (k/a)^2 ν_n(u)^2/2^n + (k/a) σ_n^2(u) + c ν_n(2u)/n^2 + ρ_n (E ν_n(u))^2`.
pub fn theta_bound(land: &Landscape, u: f64, t: f64, scaling: ClockScaling, tp: ThetaParams) -> Result<f64> {
    if !(u > 0.0 && t > 0.0) {
        return Err(invalid("u, t", "must be positive"));
    }
    let kt = scaling.steps(t) as f64 / scaling.a_n;
    let n = f64::from(land.n());
    let nu = nu_avg(land, u, scaling)?;
    let s2 = sigma2_avg(land, u, scaling)?;
    let nu2 = nu_avg(land, 2.0 * u, scaling)?;
    let e_nu = expected_nu(land.scale(), u, scaling.a_n);
    Ok(kt * kt * nu * nu / land.len() as f64 + kt * s2 + tp.c * nu2 / (n * n) + tp.rho_n * e_nu * e_nu)
}

/// Skeleton `J(0..len)` of the jump chain started at `x0`.
pub fn skeleton<R: Rng + ?Sized>(n: u32, len: usize, x0: u64, rng: &mut R) -> Vec<u64> {
    let mut out = Vec::with_capacity(len);
    let mut x = x0;
    for _ in 0..len {
        out.push(x);
        x = walk::step(x, n, rng);
    }
    out
}

/// Which limit the first condition is compared to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `ν^short(u, ∞) = 1`.
    Short,
    /// `ν^int(u, ∞) = u^{-α} α Γ(α)`.
    Intermediate,
    /// Mean of the random `ν^ext`, `ε' u^{-α} α Γ(α)`.
    ExtremeMean,
}

/// `ν^int(u, ∞) = u^{-α} α Γ(α)`.
pub fn nu_int(alpha: f64, u: f64) -> f64 {
    u.powf(-alpha) * alpha * gamma(alpha)
}

/// Tolerances and constants of [`check_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionOptions {
    pub a0_tol: f64,
    pub a1_tol: f64,
    pub a2_tol: f64,
    /// Envelope constant of the small-jump integral.
    pub c0: f64,
    pub skeletons: usize,
    pub seed: u64,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        ConditionOptions { a0_tol: 1e-2, a1_tol: 0.1, a2_tol: 0.1, c0: 2.0, skeletons: 200, seed: 0 }
    }
}

/// Pass/fail of the four conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionFlags {
    pub a0: bool,
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
}

/// Everything computed by [`check_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub params: LandscapeParams,
    pub class: ScaleClass,
    pub t: f64,
    pub u_grid: Vec<f64>,
    pub nu_avg: Vec<f64>,
    pub sigma2_avg: Vec<f64>,
    pub nu_chain: Vec<Vec<f64>>,
    pub nu_chain_median: Vec<f64>,
    pub sigma2_chain_median: Vec<f64>,
    pub theta_bound: Vec<f64>,
    pub target_kind: TargetKind,
    pub limit_target: Vec<f64>,
    /// `ν_n(u)/a_n`, the start-measure term.
    pub a0: Vec<f64>,
    pub a1_max_dev: f64,
    pub a2_max_median: f64,
    pub delta_grid: Vec<f64>,
    pub a3_integral: Vec<f64>,
    pub a3_envelope: Vec<f64>,
    /// Integral divided by `t`.
    pub a3_eps_n: Vec<f64>,
    pub options: ConditionOptions,
    pub pass: ConditionFlags,
}

/// Evaluate the four conditions on one landscape.
pub fn check_conditions(
    params: &LandscapeParams,
    t: f64,
    u_grid: &[f64],
    delta_grid: &[f64],
    opts: ConditionOptions,
) -> Result<ConditionReport> {
    if u_grid.is_empty() || delta_grid.is_empty() {
        return Err(invalid("grids", "u and delta grids must be nonempty"));
    }
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let land = Landscape::sample(params)?;
    let scaling = ClockScaling::rem(land.scale());
    let class = land.scale().classify();
    let table = NuTable::new(&land, scaling)?;
    let k = scaling.steps(t) as usize;
    let alpha = class.alpha_eps;
    let (target_kind, target): (TargetKind, Box<dyn Fn(f64) -> f64>) = match class.kind {
        ScaleKind::Short => (TargetKind::Short, Box::new(|_| 1.0)),
        ScaleKind::Intermediate => (TargetKind::Intermediate, Box::new(move |u| nu_int(alpha, u))),
        ScaleKind::Extreme => {
            let ep = class.epsilon_prime.unwrap_or(1.0);
            (TargetKind::ExtremeMean, Box::new(move |u| ep * nu_int(alpha, u)))
        }
    };

    let mut nu_avg = Vec::new();
    let mut sigma2 = Vec::new();
    let mut chains = Vec::new();
    let mut chain_med = Vec::new();
    let mut s2_med = Vec::new();
    let mut theta = Vec::new();
    let mut limit = Vec::new();
    let mut a0 = Vec::new();
    let tp = ThetaParams::default_for(params.n);
    for (iu, &u) in u_grid.iter().enumerate() {
        let h = h_table(&land, u, scaling)?;
        let nu = table.nu(u);
        let s2 = scaling.a_n * kahan_sum(h.iter().map(|v| v * v)) / h.len() as f64;
        let mut nus = Vec::with_capacity(opts.skeletons);
        let mut s2s = Vec::with_capacity(opts.skeletons);
        for j in 0..opts.skeletons as u64 {
            let mut rng = seed::rng(opts.seed, Purpose::Skeleton, iu as u64, j);
            let x0 = rng.gen_range(0..land.len());
            let sk = skeleton(params.n, k, x0, &mut rng);
            nus.push(sk.iter().map(|&y| h[y as usize]).sum::<f64>());
            s2s.push(sk.iter().map(|&y| h[y as usize].powi(2)).sum::<f64>());
        }
        let kt = k as f64 / scaling.a_n;
        let nu2 = table.nu(2.0 * u);
        let e_nu = expected_nu(land.scale(), u, scaling.a_n);
        theta.push(kt * kt * nu * nu / land.len() as f64 + kt * s2 + tp.c * nu2 / f64::from(params.n).powi(2) + tp.rho_n * e_nu * e_nu);
        chain_med.push(median(&nus));
        s2_med.push(median(&s2s));
        chains.push(nus);
        nu_avg.push(nu);
        sigma2.push(s2);
        limit.push(target(u));
        a0.push(nu / scaling.a_n);
    }
    let a1_max_dev = chain_med.iter().zip(&limit).map(|(m, l)| (m - t * l).abs()).fold(0.0, f64::max);
    let a2_max_median = s2_med.iter().copied().fold(0.0, f64::max);

    let a3_integral: Vec<f64> = delta_grid.iter().map(|&d| table.integral_to(d)).collect();
    let a3_envelope: Vec<f64> = delta_grid
        .iter()
        .map(|&d| if alpha < 1.0 { opts.c0 * d.powf(1.0 - alpha) * alpha * gamma(alpha) / (1.0 - alpha) } else { f64::NAN })
        .collect();
    let a3_eps_n = a3_integral.iter().map(|v| v / t).collect();
    let pass = ConditionFlags {
        a0: a0.iter().all(|&v| v <= opts.a0_tol),
        a1: a1_max_dev <= opts.a1_tol,
        a2: a2_max_median <= opts.a2_tol,
        a3: a3_integral.iter().zip(&a3_envelope).all(|(i, e)| i <= e),
    };
    Ok(ConditionReport {
        params: *params,
        class,
        t,
        u_grid: u_grid.to_vec(),
        nu_avg,
        sigma2_avg: sigma2,
        nu_chain: chains,
        nu_chain_median: chain_med,
        sigma2_chain_median: s2_med,
        theta_bound: theta,
        target_kind,
        limit_target: limit,
        a0,
        a1_max_dev,
        a2_max_median,
        delta_grid: delta_grid.to_vec(),
        a3_integral,
        a3_envelope,
        a3_eps_n,
        options: opts,
        pass,
    })
}
