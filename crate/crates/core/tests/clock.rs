use rand::Rng;
use rem_aging::clock::*;
use rem_aging::landscape::{Landscape, LandscapeParams, ScaleSpec};
use rem_aging::seed::{self, Purpose};
use rem_aging::stats::chi_square;
use rem_aging::walk;

/// Constant holding times on the hypercube.
struct Flat {
    n: u32,
}

impl Environment for Flat {
    fn n_states(&self) -> u64 {
        1 << self.n
    }
    fn log_holding(&self, _: u64) -> f64 {
        0.0
    }
    fn jump<R: Rng + ?Sized>(&self, x: u64, rng: &mut R) -> u64 {
        walk::step(x, self.n, rng)
    }
    fn log_holding_all(&self) -> Option<&[f64]> {
        None
    }
}

/// One deep trap at the origin, depth `e^{depth}`, everything else at 1.
struct OneTrap {
    n: u32,
    depth: f64,
}

impl Environment for OneTrap {
    fn n_states(&self) -> u64 {
        1 << self.n
    }
    fn log_holding(&self, x: u64) -> f64 {
        if x == 0 {
            self.depth
        } else {
            0.0
        }
    }
    fn jump<R: Rng + ?Sized>(&self, x: u64, rng: &mut R) -> u64 {
        walk::step(x, self.n, rng)
    }
    fn log_holding_all(&self) -> Option<&[f64]> {
        None
    }
}

fn params() -> LandscapeParams {
    LandscapeParams::new(12, 1.2, ScaleSpec::Epsilon(0.5), 0).unwrap()
}

#[test]
fn thread_count_does_not_change_estimates() {
    let p = params();
    let scaling = ClockScaling::rem(&p.scale().unwrap());
    let plan = CorrelationPlan::aging(&[0.5, 1.0], &[0.5, 2.0], 3, 64, 11);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| estimate_rem_correlation(&p, scaling, &plan).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn annealed_runs_are_reproducible() {
    let p = params();
    let scaling = ClockScaling::rem(&p.scale().unwrap());
    let mut plan = CorrelationPlan::aging(&[1.0], &[1.0], 4, 16, 2);
    plan.mode = Mode::Annealed;
    let a = estimate_rem_correlation(&p, scaling, &plan).unwrap();
    let b = estimate_rem_correlation(&p, scaling, &plan).unwrap();
    assert_eq!(a, b);
    assert_eq!(a[0].n_env, 4);
    assert!(a[0].env_p_hat.is_empty());
}

#[test]
fn constant_holding_times_fill_the_range() {
    // S̃(k)/k → 1, so with 10^4 steps per unit every gap is tiny
    let scaling = ClockScaling::new(1e4, 1e4).unwrap();
    let plan = CorrelationPlan::aging(&[0.5, 1.0], &[0.1, 1.0], 2, 50, 4);
    let est = estimate_correlation(|_| Ok(Flat { n: 10 }), scaling, &plan).unwrap();
    for e in &est {
        assert_eq!(e.p_hat, 0.0, "t={} rho={}", e.t, e.rho);
        assert!(e.ci_half_width > 0.0);
    }
}

#[test]
fn deep_trap_started_inside_is_rarely_left() {
    // from the trap the first holding time is e_0 · e^{depth}/c_n, mean 100
    let scaling = ClockScaling::new(1.0, 1.0).unwrap();
    let mut plan = CorrelationPlan::aging(&[1.0], &[1.0], 1, 2000, 6);
    plan.init = Init::Fixed(0);
    let est = estimate_correlation(|_| Ok(OneTrap { n: 6, depth: 100f64.ln() }), scaling, &plan).unwrap();
    // P(e·100 > 2 | e·100 > 1) · P(e·100 > 1) + small correction
    let want = (-0.02f64).exp();
    assert!((est[0].p_hat - want).abs() < 4.0 * est[0].se + 1e-3, "{} vs {want}", est[0].p_hat);
}

#[test]
fn fixed_start_outside_space_rejected() {
    let scaling = ClockScaling::new(1.0, 1.0).unwrap();
    let mut plan = CorrelationPlan::aging(&[1.0], &[1.0], 1, 1, 0);
    plan.init = Init::Fixed(64);
    assert!(estimate_correlation(|_| Ok(Flat { n: 6 }), scaling, &plan).is_err());
}

#[test]
fn gibbs_start_weights_by_depth() {
    let land = Landscape::sample(&LandscapeParams::new(8, 2.0, ScaleSpec::Epsilon(1.0), 3).unwrap()).unwrap();
    let start = Start::prepare(Init::Gibbs, &land).unwrap();
    let best = (0..land.len()).max_by(|&a, &b| land.log_tau(a).total_cmp(&land.log_tau(b))).unwrap();
    let gibbs = land.gibbs_measure().unwrap();
    let mut rng = seed::rng(1, Purpose::Chain, 0, 0);
    let draws = 20_000;
    let hits = (0..draws).filter(|_| start.sample(&mut rng) == best).count() as f64;
    let p = gibbs[best as usize];
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((hits / draws as f64 - p).abs() < 5.0 * se, "{} vs {p}", hits / draws as f64);
}

#[test]
fn walk_steps_flip_uniform_coordinates() {
    let n = 12;
    let mut rng = seed::rng(9, Purpose::Chain, 0, 0);
    let mut counts = vec![0.0; n as usize];
    let draws = 60_000;
    for _ in 0..draws {
        let y = walk::step(0, n, &mut rng);
        assert_eq!(y.count_ones(), 1);
        counts[y.trailing_zeros() as usize] += 1.0;
    }
    let expected = vec![draws as f64 / f64::from(n); n as usize];
    let (_, p) = chi_square(&counts, &expected);
    assert!(p > 1e-3, "chi-square p = {p}");
}

#[test]
fn two_step_return_is_one_over_n() {
    let n = 10;
    let mut rng = seed::rng(10, Purpose::Chain, 0, 0);
    let draws = 100_000;
    let back = (0..draws)
        .filter(|_| {
            let x = walk::step(0, n, &mut rng);
            walk::step(x, n, &mut rng) == 0
        })
        .count() as f64;
    let p = 1.0 / f64::from(n);
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((back / draws as f64 - p).abs() < 5.0 * se);
}

#[test]
fn zero_time_cells_use_rho_as_length() {
    let c = Cell::aging(0.0, 0.5);
    assert_eq!((c.t, c.s, c.rho()), (0.0, 0.5, 0.5));
    let c = Cell::aging(2.0, 0.5);
    assert_eq!((c.s, c.rho()), (1.0, 0.5));
}

#[test]
fn rescaled_clock_is_monotone_and_steps_floor() {
    let land = Landscape::sample(&params()).unwrap();
    let scaling = ClockScaling::rem(land.scale());
    let mut rng = seed::rng(2, Purpose::Chain, 0, 0);
    let path = simulate_clock(&land, &Start::Uniform(land.len()), 3.0, scaling, ClockOptions::default(), &mut rng).unwrap();
    assert!(path.values.windows(2).all(|w| w[0] <= w[1]));
    assert!(path.end() > 3.0);
    assert_eq!(scaling.steps(1.0), scaling.a_n.floor() as u64);
}
