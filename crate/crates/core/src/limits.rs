//! Limit objects: the generalized arcsine law, Poisson marks, the random
//! Lévy measure `ν^ext`, the Lepage representation of ordered landscapes,
//! and subordinators simulated with a small-jump cutoff.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clock::{exp1, CorrelationEstimate, Mode};
use crate::error::{invalid, Result};
use crate::landscape::Scale;
use crate::seed::{self, Purpose};
use crate::special::{gamma, upper_incomplete_gamma};
use crate::stats::{kahan_sum, wilson_half_width, Z95};

/// Generalized arcsine distribution function
/// `Asl_α(u) = (sin απ/π) ∫_0^u (1-x)^{-α} x^{α-1} dx`.
pub fn asl_cdf(alpha: f64, u: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("{alpha} outside (0, 1)")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(invalid("u", format!("{u} outside [0, 1]")));
    }
    if u == 0.0 || u == 1.0 {
        return Ok(u);
    }
    Ok(statrs::function::beta::beta_reg(alpha, 1.0 - alpha, u))
}

/// Marks `γ_k = Γ_k^{-1/α}` of a Poisson random measure with
/// `μ(x, ∞) = x^{-α}`, truncated at `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrmMarks {
    /// Decreasing marks.
    pub gamma: Vec<f64>,
    pub alpha: f64,
    /// `Γ_K`.
    pub gamma_tail: f64,
    pub seed: u64,
}

/// Draw the first `k` marks.
pub fn sample_prm_marks(alpha: f64, k: usize, seed: u64) -> Result<PrmMarks> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("{alpha} outside (0, 1)")));
    }
    if k == 0 {
        return Err(invalid("K", "need at least one mark"));
    }
    let mut rng = seed::rng(seed, Purpose::Marks, 0, 0);
    let mut big_gamma = 0.0;
    let gamma = (0..k)
        .map(|_| {
            big_gamma += exp1(&mut rng);
            big_gamma.powf(-1.0 / alpha)
        })
        .collect();
    Ok(PrmMarks { gamma, alpha, gamma_tail: big_gamma, seed })
}

impl PrmMarks {
    /// Marks built from given values (decreasing), e.g. for tests.
    pub fn from_marks(gamma: Vec<f64>, alpha: f64) -> Self {
        let last = *gamma.last().expect("at least one mark");
        PrmMarks { gamma_tail: last.powf(-alpha), gamma, alpha, seed: 0 }
    }

    fn gamma_k(&self) -> f64 {
        self.gamma_tail.powf(-1.0 / self.alpha)
    }

    /// `Σ_k γ_k` plus the expected contribution of marks beyond `K`,
    /// `α γ_K^{1-α}/(1-α)`.
    pub fn total(&self) -> f64 {
        let a = self.alpha;
        kahan_sum(self.gamma.iter().copied()) + a * self.gamma_k().powf(1.0 - a) / (1.0 - a)
    }
}

/// `ν^ext(u, ∞)` with its truncation accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuExt {
    /// Stored-mark sum plus the tail estimate.
    pub value: f64,
    /// `ε' α u^{-α} Γ(α, u/γ_K)`, the expected mass of the unstored marks.
    pub tail: f64,
    /// Tail above `1e-6` of the value.
    pub truncation_warning: bool,
}

/// `ν^ext(u, ∞) = ε' Σ_k e^{-u/γ_k}`.
pub fn nu_ext(marks: &PrmMarks, eps_prime: f64, u: f64) -> Result<NuExt> {
    if !(u > 0.0) {
        return Err(invalid("u", format!("{u} must be positive")));
    }
    let a = marks.alpha;
    let head = kahan_sum(marks.gamma.iter().map(|g| (-u / g).exp()));
    let tail = a * u.powf(-a) * upper_incomplete_gamma(a, u / marks.gamma_k());
    let value = eps_prime * (head + tail);
    let tail = eps_prime * tail;
    Ok(NuExt { value, tail, truncation_warning: tail > 1e-6 * value })
}

/// `∫_s^∞ ν^ext(u, ∞) du = ε' Σ_k γ_k e^{-s/γ_k}` (tail included).
pub fn nu_ext_integrated(marks: &PrmMarks, eps_prime: f64, s: f64) -> f64 {
    let a = marks.alpha;
    let gk = marks.gamma_k();
    let head = kahan_sum(marks.gamma.iter().map(|g| g * (-s / g).exp()));
    // ∫_0^{γ_K} γ e^{-s/γ} α γ^{-α-1} dγ = α s^{1-α} Γ(α-1, s/γ_K)
    let tail = if s == 0.0 {
        a * gk.powf(1.0 - a) / (1.0 - a)
    } else {
        let x = s / gk;
        let g_am1 = (upper_incomplete_gamma(a, x) - x.powf(a - 1.0) * (-x).exp()) / (a - 1.0);
        a * s.powf(1.0 - a) * g_am1
    };
    eps_prime * (head + tail)
}

/// `C^sta_∞(s) = Σ_k (γ_k / Σ γ) e^{-s/γ_k}`.
pub fn c_sta(marks: &PrmMarks, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(invalid("s", format!("{s} must be nonnegative")));
    }
    Ok(nu_ext_integrated(marks, 1.0, s) / nu_ext_integrated(marks, 1.0, 0.0))
}

/// Ordered rescaled landscape from exponential partial sums.
#[derive(Debug, Clone, PartialEq)]
pub struct LepageLandscape {
    /// `ln γ_n(x^{(k)})`, decreasing in `k`.
    pub ln_gamma: Vec<f64>,
    /// Vertex carrying the `k`-th largest value (empty when only the top was built).
    pub labels: Vec<u64>,
}

/// `γ_n(x^{(k)}) = r_n^{-1} G_n^{-1}(Γ_k/Γ_{N+1}) = g_n(b_n Γ_k/Γ_{N+1})`, `N = 2^n`.
pub fn lepage_landscape(scale: &Scale, seed: u64) -> Result<LepageLandscape> {
    if scale.n > 26 {
        return Err(invalid("n", format!("{} above 26", scale.n)));
    }
    let n_sites = 1usize << scale.n;
    let mut out = lepage_top(scale, n_sites, seed)?;
    let mut labels: Vec<u64> = (0..n_sites as u64).collect();
    labels.shuffle(&mut seed::rng(seed, Purpose::Labelling, 0, 0));
    out.labels = labels;
    Ok(out)
}

/// The `top` largest values of the Lepage representation; the partial sums
/// are shared with [`lepage_landscape`] under the same seed.
pub fn lepage_top(scale: &Scale, top: usize, seed: u64) -> Result<LepageLandscape> {
    let n_sites = 1u64 << scale.n;
    let top = top.min(n_sites as usize);
    let mut rng = seed::rng(seed, Purpose::Marks, 0, 0);
    let mut g = Vec::with_capacity(top);
    let mut acc = 0.0;
    for _ in 0..top {
        acc += exp1(&mut rng);
        g.push(acc);
    }
    for _ in top as u64..=n_sites {
        acc += exp1(&mut rng);
    }
    let ln_total = acc.ln();
    let ln_gamma = g
        .iter()
        .map(|gk| scale.ln_g_of_ln(scale.ln_b_n + gk.ln() - ln_total))
        .collect::<Result<Vec<_>>>()?;
    Ok(LepageLandscape { ln_gamma, labels: Vec::new() })
}

/// Lévy measure of a driftless subordinator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SubordinatorSpec {
    /// `ν(u, ∞) = α Γ(α) u^{-α}`.
    Stable { alpha: f64 },
    /// `ν(u, ∞) = ε' Σ_k e^{-u/γ_k}`.
    ExtremeRandom { marks: PrmMarks, eps_prime: f64 },
}

impl SubordinatorSpec {
    pub fn alpha(&self) -> f64 {
        match self {
            SubordinatorSpec::Stable { alpha } => *alpha,
            SubordinatorSpec::ExtremeRandom { marks, .. } => marks.alpha,
        }
    }

    /// `ν(u, ∞)` (stored marks only for the random measure).
    pub fn tail(&self, u: f64) -> f64 {
        match self {
            SubordinatorSpec::Stable { alpha } => alpha * gamma(*alpha) * u.powf(-alpha),
            SubordinatorSpec::ExtremeRandom { marks, eps_prime } => {
                eps_prime * kahan_sum(marks.gamma.iter().map(|g| (-u / g).exp()))
            }
        }
    }

    /// `∫_0^δ u ν(du)`, the mean drift of the jumps below `δ`.
    pub fn small_jump_mean(&self, delta: f64) -> f64 {
        match self {
            SubordinatorSpec::Stable { alpha } => {
                let a = *alpha;
                a * a * gamma(a) * delta.powf(1.0 - a) / (1.0 - a)
            }
            SubordinatorSpec::ExtremeRandom { marks, eps_prime } => {
                let a = marks.alpha;
                let head = kahan_sum(marks.gamma.iter().map(|&g| {
                    let x = delta / g;
                    g * (-(-x).exp_m1() - x * (-x).exp())
                }));
                let gk = marks.gamma_k();
                eps_prime * (head + a * gk.powf(1.0 - a) / (1.0 - a))
            }
        }
    }

    /// One jump of size at least `δ`.
    fn big_jump<R: Rng + ?Sized>(&self, delta: f64, cdf: &[f64], rng: &mut R) -> f64 {
        match self {
            SubordinatorSpec::Stable { alpha } => delta * seed::open_unit(rng.gen()).powf(-1.0 / alpha),
            SubordinatorSpec::ExtremeRandom { marks, .. } => {
                let u = rng.gen::<f64>() * cdf[cdf.len() - 1];
                let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                delta + marks.gamma[k] * exp1(rng)
            }
        }
    }

    /// Cumulative mark weights `e^{-δ/γ_k}` for jumps above `δ`.
    fn jump_cdf(&self, delta: f64) -> Vec<f64> {
        match self {
            SubordinatorSpec::Stable { .. } => Vec::new(),
            SubordinatorSpec::ExtremeRandom { marks, .. } => {
                let mut acc = 0.0;
                marks
                    .gamma
                    .iter()
                    .map(|g| {
                        acc += (-delta / g).exp();
                        acc
                    })
                    .collect()
            }
        }
    }
}

/// A subordinator path on `[0, T]`: drift plus jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorPath {
    /// `(t_k, ξ_k)` in increasing time.
    pub jumps: Vec<(f64, f64)>,
    pub drift: f64,
    pub horizon: f64,
}

impl SubordinatorPath {
    /// `S(t) = drift·t + Σ_{t_k ≤ t} ξ_k`.
    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.jumps.partition_point(|&(tk, _)| tk <= t);
        self.drift * t + self.jumps[..i].iter().map(|j| j.1).sum::<f64>()
    }
}

/// Poisson jumps of size `≥ δ_cut` on `[0, T]` with optional drift
/// compensation `∫_0^{δ_cut} u dν`.
pub fn simulate_subordinator<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    horizon: f64,
    delta_cut: f64,
    compensate: bool,
    rng: &mut R,
) -> Result<SubordinatorPath> {
    if !(horizon > 0.0 && delta_cut > 0.0) {
        return Err(invalid("horizon, delta_cut", "must be positive"));
    }
    let rate = spec.tail(delta_cut);
    if !rate.is_finite() {
        return Err(invalid("delta_cut", "ν(δ_cut, ∞) is not finite"));
    }
    let cdf = spec.jump_cdf(delta_cut);
    let mut jumps = Vec::new();
    let mut t = 0.0;
    if rate > 0.0 {
        loop {
            t += exp1(rng) / rate;
            if t > horizon {
                break;
            }
            jumps.push((t, spec.big_jump(delta_cut, &cdf, rng)));
        }
    }
    let drift = if compensate { spec.small_jump_mean(delta_cut) } else { 0.0 };
    Ok(SubordinatorPath { jumps, drift, horizon })
}

/// First point of the range of `S` strictly above each level (sorted
/// ascending). The drift makes the range contain whole segments, so a
/// level crossed during a drift stretch has first point equal to the level.
pub fn subordinator_first_passages<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    levels: &[f64],
    delta_cut: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let rate = spec.tail(delta_cut);
    if !(rate.is_finite() && rate > 0.0) {
        return Err(invalid("delta_cut", "ν(δ_cut, ∞) must be finite and positive"));
    }
    let cdf = spec.jump_cdf(delta_cut);
    let drift = spec.small_jump_mean(delta_cut);
    let mut out = Vec::with_capacity(levels.len());
    let Some(&top) = levels.last() else { return Ok(out) };
    let mut s = 0.0;
    loop {
        // drift segment [s, s + drift·dt]
        let end = s + drift * exp1(rng) / rate;
        while out.len() < levels.len() && end > levels[out.len()] {
            let l = levels[out.len()];
            out.push(if s > l { s } else { l });
        }
        s = end + spec.big_jump(delta_cut, &cdf, rng);
        while out.len() < levels.len() && s > levels[out.len()] {
            out.push(s);
        }
        if s > top {
            return Ok(out);
        }
    }
}

/// `P(range of S avoids (t, t(1+ρ)))` for each `ρ`, by Monte Carlo with
/// common random numbers across `ρ`.
pub fn overshoot_correlation(
    spec: &SubordinatorSpec,
    t: f64,
    rhos: &[f64],
    replicas: usize,
    delta_cut: f64,
    seed: u64,
) -> Result<Vec<CorrelationEstimate>> {
    if replicas == 0 || !(t > 0.0) || rhos.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("t, rho, replicas", "t, ρ and replicas must be positive"));
    }
    let first: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed, Purpose::Subordinator, r, 0);
            subordinator_first_passages(spec, &[t], delta_cut, &mut rng).map(|v| v[0])
        })
        .collect::<Result<_>>()?;
    let n = replicas as f64;
    Ok(rhos
        .iter()
        .map(|&rho| {
            let k = first.iter().filter(|&&d| d >= t * (1.0 + rho)).count() as f64;
            let p = k / n;
            let se = (p * (1.0 - p) / n).sqrt();
            let ci = if n * p * (1.0 - p) < 5.0 { wilson_half_width(k, n) } else { Z95 * se };
            CorrelationEstimate {
                t,
                s: rho * t,
                rho,
                p_hat: p,
                ci_half_width: ci,
                se,
                n_env: 1,
                n_chain: replicas,
                n_failed_env: 0,
                mode: Mode::Annealed,
                env_p_hat: Vec::new(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::integrate;

    #[test]
    fn asl_endpoints_and_symmetry() {
        for a in [0.1, 0.5, 0.9] {
            assert_eq!(asl_cdf(a, 0.0).unwrap(), 0.0);
            assert_eq!(asl_cdf(a, 1.0).unwrap(), 1.0);
        }
        assert!((asl_cdf(0.5, 0.5).unwrap() - 0.5).abs() < 1e-14);
        assert!(asl_cdf(1.0, 0.5).is_err());
        assert!(asl_cdf(0.5, 1.5).is_err());
    }

    #[test]
    fn asl_against_defining_integral() {
        let (a, u): (f64, f64) = (0.3, 0.7);
        let c = (a * std::f64::consts::PI).sin() / std::f64::consts::PI;
        // x = y^{1/α} removes the singularity at 0
        let q = c / a * integrate(|y: f64| (1.0 - y.powf(1.0 / a)).powf(-a), 0.0, u.powf(a), 1e-14);
        assert!((asl_cdf(a, u).unwrap() - q).abs() < 1e-10);
    }

    #[test]
    fn marks_decrease() {
        let m = sample_prm_marks(0.5, 1000, 1).unwrap();
        assert!(m.gamma.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn single_mark_nu() {
        let m = PrmMarks { gamma: vec![2.0], alpha: 0.5, gamma_tail: 1e300, seed: 0 };
        let v = nu_ext(&m, 0.7, 1.0).unwrap();
        assert!((v.value - 0.7 * (-0.5f64).exp()).abs() < 1e-15);
        assert!(!v.truncation_warning);
    }

    #[test]
    fn c_sta_limits() {
        let m = sample_prm_marks(0.5, 10_000, 2).unwrap();
        assert!((c_sta(&m, 0.0).unwrap() - 1.0).abs() < 1e-14);
        let mut prev = 1.0;
        for s in [0.01, 0.1, 1.0, 10.0] {
            let c = c_sta(&m, s).unwrap();
            assert!(c < prev && c > 0.0);
            prev = c;
        }
    }

    #[test]
    fn subordinator_paths_monotone() {
        let spec = SubordinatorSpec::Stable { alpha: 0.6 };
        let mut rng = seed::rng(1, Purpose::Subordinator, 0, 0);
        let p = simulate_subordinator(&spec, 2.0, 1e-3, true, &mut rng).unwrap();
        assert!(p.jumps.iter().all(|j| j.1 >= 1e-3));
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = p.value_at(i as f64 * 0.02);
            assert!(v >= prev);
            prev = v;
        }
    }
}
