//! Simple random walk on the hypercube `{-1, 1}^n`.
//!
//! Vertices are machine words (bit `i` set means coordinate `i` is `+1`).
//! Exact `l`-step transition probabilities go through the `(n+1)`-state
//! distance chain: `p^l(x, y)` depends only on `d = dist(x, y)` and equals
//! `P(D_l = d | D_0 = 0) / C(n, d)`.

use rand::Rng;

use crate::error::{invalid, Error, Result};

/// Hamming distance.
#[inline]
pub fn dist(x: u64, y: u64) -> u32 {
    (x ^ y).count_ones()
}

/// One step of the jump chain: flip a uniformly chosen coordinate.
#[inline]
pub fn step<R: Rng + ?Sized>(v: u64, n: u32, rng: &mut R) -> u64 {
    v ^ (1u64 << rng.gen_range(0..n))
}

/// `C(n, k)` as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * f64::from(n - i) / f64::from(i + 1);
    }
    c.round()
}

/// Distance chain of the walk seen from a fixed vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceChain {
    pub n: u32,
}

impl DistanceChain {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 || n > 63 {
            return Err(invalid("n", format!("{n} outside 1..=63")));
        }
        Ok(DistanceChain { n })
    }

    /// Row-stochastic `(n+1) × (n+1)` transition matrix.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n as usize;
        let nf = f64::from(self.n);
        let mut m = vec![vec![0.0; n + 1]; n + 1];
        for (d, row) in m.iter_mut().enumerate() {
            if d < n {
                row[d + 1] = (n - d) as f64 / nf;
            }
            if d > 0 {
                row[d - 1] = d as f64 / nf;
            }
        }
        m
    }

    /// Advance a distribution over distances by one step.
    pub fn advance(&self, from: &[f64], to: &mut [f64]) {
        let n = self.n as usize;
        let nf = f64::from(self.n);
        for d in 0..=n {
            let up = if d > 0 { from[d - 1] * (n - d + 1) as f64 / nf } else { 0.0 };
            let down = if d < n { from[d + 1] * (d + 1) as f64 / nf } else { 0.0 };
            to[d] = (up + down).clamp(0.0, 1.0);
        }
    }

    /// Distance laws after `0..=l_max` steps from distance 0.
    pub fn laws(&self, l_max: usize) -> Vec<Vec<f64>> {
        let n = self.n as usize;
        let mut out = Vec::with_capacity(l_max + 1);
        let mut cur = vec![0.0; n + 1];
        cur[0] = 1.0;
        out.push(cur.clone());
        let mut next = vec![0.0; n + 1];
        for _ in 0..l_max {
            self.advance(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            out.push(cur.clone());
        }
        out
    }
}

/// Table of `p^l(d)` for `l ≤ l_max`, reusable across queries.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    n: u32,
    /// `p[l][d]` = probability of a given vertex at distance `d` after `l` steps.
    p: Vec<Vec<f64>>,
}

impl TransitionTable {
    pub fn new(n: u32, l_max: usize) -> Result<Self> {
        let chain = DistanceChain::new(n)?;
        let binom: Vec<f64> = (0..=n).map(|d| binomial(n, d)).collect();
        let p = chain
            .laws(l_max)
            .into_iter()
            .map(|law| law.iter().zip(&binom).map(|(q, c)| q / c).collect())
            .collect();
        Ok(TransitionTable { n, p })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn l_max(&self) -> usize {
        self.p.len() - 1
    }

    /// `p^l(x, y)` for `dist(x, y) = d`.
    pub fn get(&self, d: u32, l: usize) -> f64 {
        self.p[l][d as usize]
    }
}

/// `p_n^l(x, y)` for any pair at Hamming distance `d`.
pub fn transition_prob(n: u32, d: u32, l: usize) -> Result<f64> {
    if d > n {
        return Err(invalid("d", format!("{d} exceeds n = {n}")));
    }
    Ok(TransitionTable::new(n, l)?.get(d, l))
}

/// `θ_n = 2⌈(3/2)(n-1) ln 2 / |ln(1 - 2/n)|⌉`.
pub fn theta_n(n: u32) -> Result<u64> {
    if n < 3 {
        return Err(invalid("n", format!("{n} < 3")));
    }
    let nf = f64::from(n);
    let x = 1.5 * (nf - 1.0) * std::f64::consts::LN_2 / (1.0 - 2.0 / nf).ln().abs();
    Ok(2 * x.ceil() as u64)
}

/// `|Δ / (2 π(x) π(y)) - 1|` for the two-time probability
/// `Δ = P_π(J(i+θ_n) = y, J(0) = x) + P_π(J(i+1+θ_n) = y, J(0) = x)`.
pub fn two_time_uniformization_defect(n: u32, i: u64, x: u64, y: u64) -> Result<f64> {
    if n > 20 {
        return Err(invalid("n", format!("{n} above the exact regime")));
    }
    let theta = theta_n(n)?;
    let l = (i + theta) as usize;
    let table = TransitionTable::new(n, l + 1)?;
    Ok(defect_from_table(&table, dist(x, y), l))
}

/// Defect at distance `d` with `l = i + θ_n`, from a precomputed table.
pub fn defect_from_table(table: &TransitionTable, d: u32, l: usize) -> f64 {
    let half_cube = 2f64.powi(table.n() as i32 - 1);
    (half_cube * (table.get(d, l) + table.get(d, l + 1)) - 1.0).abs()
}

/// Right side of the Diaconis–Stroock bound for the parity chain:
/// `(1 - ν)/ν · β_*^{2m}` with `ν = 2^{1-n}` and `β_* = (1 - 2/n)^2`.
pub fn tv_bound(n: u32, m: u64) -> f64 {
    let nf = f64::from(n);
    let ln_ratio = (2f64.powi(n as i32 - 1) - 1.0).ln();
    let beta_star = (1.0 - 2.0 / nf).powi(2);
    (ln_ratio + 2.0 * m as f64 * beta_star.ln()).exp()
}

/// `P(J°(l) = y | J°(0) = x)` for the walk observed at even times.
pub fn parity_transition(n: u32, x: u64, y: u64, l: usize) -> Result<f64> {
    let d = dist(x, y);
    if d % 2 == 1 {
        return Err(Error::ParityMismatch { distance: d });
    }
    transition_prob(n, d, 2 * l)
}

/// `Σ_{l=1}^{2m} p^{l+2}(z, z)`.
pub fn return_sum(n: u32, m: usize) -> Result<f64> {
    far_pair_sum(n, m, 0)
}

/// `Σ_{l=1}^{2m} p^{l+2}(y, z)` for `dist(y, z) = d`.
pub fn far_pair_sum(n: u32, m: usize, d: u32) -> Result<f64> {
    if d > n {
        return Err(invalid("d", format!("{d} exceeds n = {n}")));
    }
    if m == 0 {
        return Ok(0.0);
    }
    let table = TransitionTable::new(n, 2 * m + 2)?;
    Ok(crate::stats::kahan_sum((1..=2 * m).map(|l| table.get(d, l + 2))))
}
