//! Gaussian tail machinery, Gamma helpers and one-dimensional quadrature.
//!
//! All REM landscape quantities reduce to the standard Gaussian tail
//! `1 - Φ(x)`, which must keep full *relative* accuracy far into the tail
//! (products like `b_n · G_n(r_n)` with `b_n ~ 2^n`).  Below `x = 8` the
//! tail comes from a correctly rounded `erfc`; above it from the Mills
//! ratio continued fraction, with `exp(-x²/2)` evaluated on an exact
//! split of `x²`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const CF_SWITCH: f64 = 8.0;

/// Standard Gaussian density.
pub fn normal_pdf(x: f64) -> f64 {
    ln_normal_pdf(x).exp()
}

/// `ln φ(x)`, with `x²` split exactly so the result stays accurate for large `|x|`.
pub fn ln_normal_pdf(x: f64) -> f64 {
    let hi = x * x;
    let lo = x.mul_add(x, -hi);
    -0.5 * hi - 0.5 * lo - LN_SQRT_2PI
}

/// Mills ratio `(1 - Φ(x)) / φ(x)` by the Laplace continued fraction, `x >= CF_SWITCH`.
fn mills_ratio_cf(x: f64) -> f64 {
    // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...)))), modified Lentz.
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    1.0 / f
}

/// Upper Gaussian tail `1 - Φ(x)`.
///
/// Relative error stays near machine precision wherever the result is a
/// normal `f64` (`x` up to about 37.5); beyond that it underflows and
/// [`ln_gaussian_tail`] should be used.
pub fn gaussian_tail(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < CF_SWITCH {
        0.5 * libm::erfc(x / SQRT_2)
    } else {
        normal_pdf(x) * mills_ratio_cf(x)
    }
}

/// `ln(1 - Φ(x))`, finite for every finite `x`.
pub fn ln_gaussian_tail(x: f64) -> f64 {
    if x < CF_SWITCH {
        if x < -1.0 {
            // 1 - Φ(x) = 1 - Φ(-x) with Φ(-x) small
            (-gaussian_tail(-x)).ln_1p()
        } else {
            gaussian_tail(x).ln()
        }
    } else {
        ln_normal_pdf(x) + mills_ratio_cf(x).ln()
    }
}

/// Inverse of the Gaussian tail: the `x` with `1 - Φ(x) = p`, `p ∈ (0, 1)`.
pub fn gaussian_tail_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(crate::error::invalid("p", format!("{p} is outside (0, 1)")));
    }
    if p > 0.5 {
        return Ok(-gaussian_tail_inv_ln((1.0 - p).ln())?);
    }
    gaussian_tail_inv_ln(p.ln())
}

/// Inverse of the Gaussian tail given `ln p`, usable when `p` underflows.
///
/// Safeguarded Newton iteration on the concave, strictly decreasing map
/// `x ↦ ln(1 - Φ(x))`, kept inside a shrinking bisection bracket.
pub fn gaussian_tail_inv_ln(ln_p: f64) -> Result<f64> {
    if !(ln_p < 0.0) || ln_p.is_nan() {
        return Err(crate::error::invalid("ln_p", format!("{ln_p} is not negative")));
    }
    if ln_p > -std::f64::consts::LN_2 {
        let q = -ln_p.exp_m1();
        return Ok(-gaussian_tail_inv_ln(q.ln())?);
    }
    let residual = |x: f64| ln_gaussian_tail(x) - ln_p;
    let mut lo = 0.0_f64;
    let mut hi = (-2.0 * ln_p).sqrt() + 1.0;
    let t = -2.0 * ln_p;
    let guess = (t - (2.0 * PI * t).ln()).max(0.0).sqrt();
    let mut x = guess.clamp(lo, hi);
    for _ in 0..100 {
        let f = residual(x);
        if f == 0.0 {
            return Ok(x);
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d/dx ln(1 - Φ) = -φ / (1 - Φ)
        let slope = -(ln_normal_pdf(x) - ln_gaussian_tail(x)).exp();
        let mut next = x - f / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15 * hi.max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence { what: "Gaussian tail inverse" })
}

/// Hall's surrogate for the solution of `b φ(B)/B = 1`.
pub fn hall_surrogate(b: f64) -> f64 {
    let l = b.ln();
    let s = (2.0 * l).sqrt();
    s - 0.5 * (l.ln() + (4.0 * PI).ln()) / s
}

/// `Γ(a)`.
pub fn gamma(a: f64) -> f64 {
    statrs::function::gamma::gamma(a)
}

/// Upper incomplete Gamma function `Γ(a, x)` (not regularized).
pub fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return gamma(a);
    }
    if x > 1e3 {
        // Γ(a, x) < x^{a-1} e^{-x} underflows
        return 0.0;
    }
    statrs::function::gamma::gamma_ur(a, x) * gamma(a)
}

/// Adaptive integration of `f` over `[a, b]`.
///
/// Double-exponential rule on each panel; a panel whose error estimate
/// exceeds its share of `tol` is bisected, down to `max_depth` levels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_panel(&f, a, b, tol, 18)
}

fn integrate_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    if out.error_estimate <= tol || depth == 0 || !out.integral.is_finite() {
        return out.integral;
    }
    let m = 0.5 * (a + b);
    integrate_panel(f, a, m, 0.5 * tol, depth - 1) + integrate_panel(f, m, b, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    // 1 - Φ(x) at 40 significant digits (mpmath, erfc(x/sqrt 2)/2).
    const TAIL: &[(f64, f64)] = &[
        (-3.0, 0.998_650_101_968_369_9),
        (0.0, 0.5),
        (0.5, 0.308_537_538_725_986_9),
        (1.0, 0.158_655_253_931_457_05),
        (3.0, 0.001_349_898_031_630_094_6),
        (7.5, 3.190_891_672_910_896_2e-14),
        (8.0, 6.220_960_574_271_784e-16),
        (12.0, 1.776_482_112_077_679e-33),
        (25.0, 3.056_696_706_382_561e-138),
        (37.0, 5.725_571_222_524_577e-300),
    ];

    #[test]
    fn tail_matches_high_precision_values() {
        for &(x, want) in TAIL {
            let got = gaussian_tail(x);
            assert!(((got - want) / want).abs() < 1e-13, "x={x}: {got:e} vs {want:e}");
        }
    }

    #[test]
    fn ln_tail_far_beyond_underflow() {
        // ln(1 - Φ(40)) from mpmath
        let want = -804.608_442_013_753_8;
        assert!((ln_gaussian_tail(40.0) - want).abs() < 1e-12 * want.abs());
        assert_eq!(gaussian_tail(40.0), 0.0);
    }

    #[test]
    fn tail_within_sandwich() {
        let mut x = 0.05;
        while x <= 40.0 {
            let lt = ln_gaussian_tail(x);
            let upper = ln_normal_pdf(x) - x.ln();
            let lower = upper + (1.0 - x.powi(-2)).ln();
            assert!(lt < upper, "x={x}");
            if x > 1.0 {
                assert!(lt > lower, "x={x}");
            }
            x += 0.05;
        }
    }

    #[test]
    fn inverse_round_trips() {
        for &p in &[0.9, 0.5, 0.3, 1e-3, 1e-10, 1e-100, 1e-300] {
            let x = gaussian_tail_inv(p).unwrap();
            assert!(((gaussian_tail(x) - p) / p).abs() < 1e-12, "p={p}");
        }
        for &lp in &[-800.0, -2000.0] {
            let x = gaussian_tail_inv_ln(lp).unwrap();
            assert!((ln_gaussian_tail(x) - lp).abs() < 1e-10 * lp.abs());
        }
        assert!(gaussian_tail_inv(1.0).is_err());
        assert!(gaussian_tail_inv(0.0).is_err());
    }

    #[test]
    fn quadrature_handles_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let v = integrate(|x| x.powf(-0.5), 0.0, 1.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-9);
    }
}
