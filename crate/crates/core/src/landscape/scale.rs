//! Space scales `r_n`, their companions `b_n`, `B_n`, `α_n`, and the
//! tail functions `h_n`, `g_n`.
//!
//! Everything that could overflow (`r_n`, `b_n` for large `n`) is carried
//! as a logarithm.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{gaussian_tail_inv_ln, hall_surrogate, ln_gaussian_tail, ln_normal_pdf};

/// How the space scale is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleSpec {
    /// Explicit `ln r_n` (must be positive).
    LnSpaceScale(f64),
    /// Target `ε ∈ (0, 1]`; `m_n = ⌈εn⌉` and `b_n = 2^{m_n}`.
    Epsilon(f64),
}

impl ScaleSpec {
    /// Explicit space scale `r_n > 1`.
    pub fn space_scale(r_n: f64) -> ScaleSpec {
        ScaleSpec::LnSpaceScale(r_n.ln())
    }
}

/// Parameters of a REM landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeParams {
    pub n: u32,
    pub beta: f64,
    pub scale: ScaleSpec,
    pub master_seed: u64,
}

impl LandscapeParams {
    pub fn new(n: u32, beta: f64, scale: ScaleSpec, master_seed: u64) -> Result<Self> {
        let p = LandscapeParams { n, beta, scale, master_seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("n", format!("{} < 2", self.n)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", format!("{} is not a positive number", self.beta)));
        }
        match self.scale {
            ScaleSpec::LnSpaceScale(l) if !(l > 0.0 && l.is_finite()) => {
                Err(invalid("r_n", "space scale must exceed 1"))
            }
            ScaleSpec::Epsilon(e) if !(e > 0.0 && e <= 1.0) => {
                Err(invalid("epsilon", format!("{e} is outside (0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Derived scale quantities.
    pub fn scale(&self) -> Result<Scale> {
        self.validate()?;
        match self.scale {
            ScaleSpec::LnSpaceScale(ln_r) => Scale::from_ln_space_scale(self.n, self.beta, ln_r),
            ScaleSpec::Epsilon(eps) => Scale::from_epsilon(self.n, self.beta, eps),
        }
    }
}

/// `β_c(ε) = √(2ε ln 2)`.
pub fn beta_c(eps: f64) -> f64 {
    (2.0 * eps * LN_2).sqrt()
}

/// The `β` that puts `α(ε) = β_c(ε)/β` at the requested value.
pub fn beta_for_alpha(eps: f64, alpha: f64) -> f64 {
    beta_c(eps) / alpha
}

/// Scale quantities derived from `(n, β, r_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub n: u32,
    pub beta: f64,
    pub ln_r_n: f64,
    /// `ln b_n`, where `b_n P(τ_n ≥ r_n) = 1`.
    pub ln_b_n: f64,
    /// `m_n = log_2 b_n`.
    pub m_n: f64,
    /// `B̄_n = ln r_n / (β√n)`, the Gaussian threshold of `r_n`.
    pub bbar_n: f64,
    /// Root of `b_n φ(B)/B = 1`.
    pub big_b_n: f64,
    /// `A_n = 1/B_n`.
    pub big_a_n: f64,
    /// `α_n = B_n / (β√n)`.
    pub alpha_n: f64,
}

impl Scale {
    pub fn from_ln_space_scale(n: u32, beta: f64, ln_r_n: f64) -> Result<Scale> {
        let bbar = ln_r_n / (beta * f64::from(n).sqrt());
        let ln_b = -ln_gaussian_tail(bbar);
        Scale::assemble(n, beta, ln_r_n, ln_b, bbar)
    }

    /// `m_n = ⌈εn⌉`, `b_n = 2^{m_n}`, `r_n = G_n^{-1}(1/b_n)`.
    pub fn from_epsilon(n: u32, beta: f64, eps: f64) -> Result<Scale> {
        let m = (eps * f64::from(n)).ceil().max(1.0);
        Scale::from_m(n, beta, m)
    }

    /// Scale with `b_n = 2^m` exactly.
    pub fn from_m(n: u32, beta: f64, m: f64) -> Result<Scale> {
        if !(m > 0.0) {
            return Err(invalid("m_n", format!("{m} must be positive")));
        }
        let ln_b = m * LN_2;
        let bbar = gaussian_tail_inv_ln(-ln_b)?;
        let ln_r = beta * f64::from(n).sqrt() * bbar;
        if !(ln_r > 0.0) {
            return Err(invalid("m_n", "space scale r_n must exceed 1"));
        }
        Scale::assemble(n, beta, ln_r, ln_b, bbar)
    }

    fn assemble(n: u32, beta: f64, ln_r_n: f64, ln_b_n: f64, bbar_n: f64) -> Result<Scale> {
        let big_b = solve_bn_ln(ln_b_n)?;
        Ok(Scale {
            n,
            beta,
            ln_r_n,
            ln_b_n,
            m_n: ln_b_n / LN_2,
            bbar_n,
            big_b_n: big_b,
            big_a_n: 1.0 / big_b,
            alpha_n: big_b / (beta * f64::from(n).sqrt()),
        })
    }

    /// `b_n` (may be infinite for very large `m_n`).
    pub fn b_n(&self) -> f64 {
        self.ln_b_n.exp()
    }

    /// `β√n`.
    pub fn beta_sqrt_n(&self) -> f64 {
        self.beta * f64::from(self.n).sqrt()
    }

    /// `ln h_n(v)`.
    pub fn ln_h(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(invalid("v", format!("{v} must be positive")));
        }
        Ok(self.ln_h_of_ln(v.ln()))
    }

    /// `ln h_n(e^w)`, total in `w`.
    pub fn ln_h_of_ln(&self, w: f64) -> f64 {
        self.ln_b_n + ln_gaussian_tail(self.bbar_n + w / self.beta_sqrt_n())
    }

    /// `h_n(v) = b_n G_n(r_n v)`.
    pub fn h(&self, v: f64) -> Result<f64> {
        Ok(self.ln_h(v)?.exp())
    }

    /// `ln g_n(u)`, with `-∞` when `u ≥ b_n`.
    pub fn ln_g(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) {
            return Err(invalid("u", format!("{u} must be positive")));
        }
        self.ln_g_of_ln(u.ln())
    }

    /// `ln g_n(e^l)`.
    pub fn ln_g_of_ln(&self, ln_u: f64) -> Result<f64> {
        let ln_p = ln_u - self.ln_b_n;
        if ln_p >= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let x = gaussian_tail_inv_ln(ln_p)?;
        Ok(self.beta_sqrt_n() * (x - self.bbar_n))
    }

    /// `g_n(u) = r_n^{-1} G_n^{-1}(u / b_n)`, the inverse of `h_n`.
    pub fn g(&self, u: f64) -> Result<f64> {
        Ok(self.ln_g(u)?.exp())
    }

    /// Classification with the default thresholds.
    pub fn classify(&self) -> ScaleClass {
        self.classify_with(&ClassThresholds::default())
    }

    pub fn classify_with(&self, th: &ClassThresholds) -> ScaleClass {
        let n = f64::from(self.n);
        let eps = self.m_n / n;
        let ratio = ((self.m_n - n) * LN_2).exp();
        let kind = if eps <= th.short_max {
            ScaleKind::Short
        } else if ratio >= th.extreme_min {
            ScaleKind::Extreme
        } else {
            ScaleKind::Intermediate
        };
        ScaleClass {
            kind,
            epsilon: eps,
            epsilon_prime: (kind == ScaleKind::Extreme).then_some(ratio),
            m_n: self.m_n,
            alpha_n: self.alpha_n,
            alpha_eps: beta_c(eps) / self.beta,
        }
    }
}

/// Solve `b φ(B)/B = 1` for `B > 0`.
///
/// `φ(B)/B` decreases strictly from `+∞` to `0`, so the root is unique for
/// every `b`; it is only requested for `b > 1` (the branch threshold), where
/// the Hall surrogate is defined and brackets the root.
pub fn solve_bn(b: f64) -> Result<f64> {
    if !(b > 1.0) {
        return Err(invalid("b_n", format!("{b} is not above the branch threshold 1")));
    }
    solve_bn_ln(b.ln())
}

fn solve_bn_ln(ln_b: f64) -> Result<f64> {
    if !(ln_b > 0.0) {
        return Err(invalid("b_n", "b_n must exceed the branch threshold 1"));
    }
    // decreasing in B
    let residual = |x: f64| ln_b + ln_normal_pdf(x) - x.ln();
    let guess = if ln_b > 1.0 { hall_surrogate(ln_b.exp()) } else { 1.0 };
    let a = 1.0 / guess.max(0.5);
    let mut lo = (guess - 5.0 * a).max(1e-300);
    let mut hi = guess + 5.0 * a;
    let mut widen = 0;
    while residual(lo) < 0.0 {
        lo *= 0.5;
        widen += 1;
        if widen > 2000 {
            return Err(Error::NoConvergence { what: "B_n bracket" });
        }
    }
    while residual(hi) > 0.0 {
        hi *= 2.0;
        widen += 1;
        if widen > 2000 {
            return Err(Error::NoConvergence { what: "B_n bracket" });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Kind of space scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleKind {
    Short,
    Intermediate,
    Extreme,
}

impl ScaleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScaleKind::Short => "short",
            ScaleKind::Intermediate => "intermediate",
            ScaleKind::Extreme => "extreme",
        }
    }
}

/// Finite-n thresholds for the scale taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholds {
    /// Short iff `m_n/n ≤ short_max`.
    pub short_max: f64,
    /// Extreme iff `2^{m_n}/2^n ≥ extreme_min`.
    pub extreme_min: f64,
}

impl Default for ClassThresholds {
    fn default() -> Self {
        ClassThresholds { short_max: 0.05, extreme_min: 0.5 }
    }
}

/// Classification of a space scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleClass {
    pub kind: ScaleKind,
    pub epsilon: f64,
    pub epsilon_prime: Option<f64>,
    pub m_n: f64,
    pub alpha_n: f64,
    pub alpha_eps: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{gaussian_tail, normal_pdf};

    fn bisect_oracle(b: f64) -> f64 {
        let f = |x: f64| normal_pdf(x) / x - 1.0 / b;
        let (mut lo, mut hi) = (1e-6, 40.0);
        for _ in 0..300 {
            let m = 0.5 * (lo + hi);
            if f(m) > 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn bn_matches_bisection_at_ten() {
        let b = solve_bn(10.0).unwrap();
        assert!((b - bisect_oracle(10.0)).abs() < 1e-12);
        assert!((10.0 * normal_pdf(b) / b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bn_increasing_and_rejects_threshold() {
        let mut prev = 0.0;
        for k in 1..60 {
            let b = solve_bn(2f64.powi(k)).unwrap();
            assert!(b > prev);
            prev = b;
        }
        assert!(solve_bn(1.0).is_err());
        assert!(solve_bn(0.3).is_err());
    }

    #[test]
    fn bn_near_hall_surrogate() {
        let b = 2f64.powi(20);
        let root = solve_bn(b).unwrap();
        let err = (hall_surrogate(b) - root).abs();
        assert!(err < 1.0 / b.ln(), "{err}");
    }

    #[test]
    fn epsilon_scale_defining_identity() {
        let s = Scale::from_epsilon(16, 1.0, 1.0).unwrap();
        assert_eq!(s.m_n.round(), 16.0);
        let p = gaussian_tail(s.ln_r_n / s.beta_sqrt_n());
        assert!((s.b_n() * p - 1.0).abs() < 1e-10);
        assert!((s.h(1.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn inverse_pair() {
        let s = Scale::from_epsilon(32, 1.2, 0.5).unwrap();
        let r = s.ln_r_n.exp();
        for i in 0..100 {
            let v = (1.0 / r) * (r * r).powf(i as f64 / 99.0);
            let back = s.g(s.h(v).unwrap()).unwrap();
            assert!(((back - v) / v).abs() < 1e-8, "v={v} back={back}");
        }
        assert_eq!(s.g(s.b_n() * 1.5).unwrap(), 0.0);
        assert!(s.h(0.0).is_err());
    }

    #[test]
    fn classification_examples() {
        let n = 32;
        let mid = Scale::from_m(n, 2.0, 16.0).unwrap().classify();
        assert_eq!(mid.kind, ScaleKind::Intermediate);
        assert!((mid.epsilon - 0.5).abs() < 1e-12);
        assert!((mid.alpha_eps - beta_c(0.5) / 2.0).abs() < 1e-15);

        let short = Scale::from_m(256, 2.0, 8.0).unwrap().classify();
        assert_eq!(short.kind, ScaleKind::Short);

        let ext = Scale::from_m(n, 2.0, 32.0).unwrap().classify();
        assert_eq!(ext.kind, ScaleKind::Extreme);
        assert!((ext.epsilon_prime.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(LandscapeParams::new(10, 0.0, ScaleSpec::Epsilon(0.5), 1).is_err());
        assert!(LandscapeParams::new(1, 1.0, ScaleSpec::Epsilon(0.5), 1).is_err());
        assert!(LandscapeParams::new(10, 1.0, ScaleSpec::Epsilon(1.5), 1).is_err());
        assert!(LandscapeParams::new(10, 1.0, ScaleSpec::space_scale(0.5), 1).is_err());
        assert!(LandscapeParams::new(10, 1.0, ScaleSpec::space_scale(5.0), 1).is_ok());
    }

    #[test]
    fn alpha_n_below_alpha_at_critical_beta() {
        for n in [16, 32, 64, 128] {
            let s = Scale::from_epsilon(n, beta_c(1.0), 1.0).unwrap();
            assert!(s.alpha_n <= 1.0, "n={n}: {}", s.alpha_n);
        }
    }
}
