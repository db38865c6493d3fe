use rand::Rng;
use rem_aging::clock::ClockScaling;
use rem_aging::conditions::*;
use rem_aging::landscape::{beta_for_alpha, Landscape, LandscapeParams, ScaleSpec};
use rem_aging::seed::{self, Purpose};
use rem_aging::stats::mean_var;

fn params(n: u32, seed: u64) -> LandscapeParams {
    LandscapeParams::new(n, beta_for_alpha(0.5, 0.5), ScaleSpec::Epsilon(0.5), seed).unwrap()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_var(xs);
    (m, (v / xs.len() as f64).sqrt())
}

#[test]
fn landscape_averages_match_their_expectations() {
    let n = 12;
    let envs: Vec<Landscape> = (0..80).map(|e| Landscape::sample(&params(n, 100 + e)).unwrap()).collect();
    let scaling = ClockScaling::rem(envs[0].scale());
    for u in [0.5, 1.0, 2.0] {
        let nus: Vec<f64> = envs.iter().map(|l| nu_avg(l, u, scaling).unwrap()).collect();
        let (m, se) = mean_and_se(&nus);
        let want = expected_nu(envs[0].scale(), u, scaling.a_n);
        assert!((m - want).abs() < 5.0 * se, "nu u={u}: {m} ± {se} vs {want}");

        let s2: Vec<f64> = envs.iter().map(|l| sigma2_avg(l, u, scaling).unwrap()).collect();
        let (m, se) = mean_and_se(&s2);
        let want = expected_sigma2(envs[0].scale(), u, scaling.a_n);
        assert!((m - want).abs() < 5.0 * se, "sigma2 u={u}: {m} ± {se} vs {want}");
    }
}

#[test]
fn chain_average_from_uniform_start() {
    // the uniform law is invariant, so E ν^{J,t} = k ν_n / a_n exactly
    let land = Landscape::sample(&params(10, 7)).unwrap();
    let scaling = ClockScaling::rem(land.scale());
    let t = 1.0;
    let k = scaling.steps(t) as usize;
    let mut rng = seed::rng(7, Purpose::Skeleton, 0, 0);
    let vals: Vec<f64> = (0..3000)
        .map(|_| {
            let x0 = rng.gen_range(0..land.len());
            nu_chain(&skeleton(10, k, x0, &mut rng), &land, 1.0, t, scaling).unwrap()
        })
        .collect();
    let (m, se) = mean_and_se(&vals);
    let want = k as f64 / scaling.a_n * nu_avg(&land, 1.0, scaling).unwrap();
    assert!((m - want).abs() < 5.0 * se, "{m} ± {se} vs {want}");
}

#[test]
fn short_skeletons_are_rejected() {
    let land = Landscape::sample(&params(10, 7)).unwrap();
    let scaling = ClockScaling::rem(land.scale());
    assert!(nu_chain(&[0, 1], &land, 1.0, 1.0, scaling).is_err());
    assert!(sigma2_chain(&[0, 1], &land, 1.0, 1.0, scaling).is_err());
}

#[test]
fn sampled_averages_agree_with_exact_ones() {
    let land = Landscape::sample(&params(14, 3)).unwrap();
    let scaling = ClockScaling::rem(land.scale());
    let mut rng = seed::rng(3, Purpose::Skeleton, 1, 0);
    for u in [0.5, 2.0] {
        let s = nu_avg_sampled(&land, u, scaling, 20_000, &mut rng);
        let exact = nu_avg(&land, u, scaling).unwrap();
        assert!((s.value - exact).abs() < 5.0 * s.se, "nu u={u}");
        let s = sigma2_avg_sampled(&land, u, scaling, 20_000, &mut rng);
        let exact = sigma2_avg(&land, u, scaling).unwrap();
        assert!((s.value - exact).abs() < 5.0 * s.se, "sigma2 u={u}");
    }
}

#[test]
fn theta_dominates_its_terms() {
    let land = Landscape::sample(&params(12, 1)).unwrap();
    let scaling = ClockScaling::rem(land.scale());
    let tp = ThetaParams::default_for(12);
    for u in [0.5, 1.0, 2.0] {
        let th = theta_bound(&land, u, 1.0, scaling, tp).unwrap();
        let kt = scaling.steps(1.0) as f64 / scaling.a_n;
        assert!(th >= kt * sigma2_avg(&land, u, scaling).unwrap());
        assert!(th >= tp.rho_n * expected_nu(land.scale(), u, scaling.a_n).powi(2));
    }
    assert!(theta_bound(&land, 0.0, 1.0, scaling, tp).is_err());
}

#[test]
fn report_is_reproducible_and_serializable() {
    let p = params(12, 5);
    let opts = ConditionOptions { skeletons: 50, seed: 5, ..ConditionOptions::default() };
    let a = check_conditions(&p, 1.0, &[0.5, 1.0], &[0.01, 0.1], opts).unwrap();
    let b = check_conditions(&p, 1.0, &[0.5, 1.0], &[0.01, 0.1], opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.target_kind, TargetKind::Intermediate);
    assert_eq!(a.nu_chain.len(), 2);
    assert_eq!(a.nu_chain[0].len(), 50);
    for (v, nu) in a.a0.iter().zip(&a.nu_avg) {
        assert!((v * ClockScaling::rem(&p.scale().unwrap()).a_n - nu).abs() < 1e-9 * nu);
    }
    let json = serde_json::to_string(&a).unwrap();
    let back: ConditionReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.pass, a.pass);
    assert_eq!(back.u_grid, a.u_grid);
}

#[test]
fn start_term_is_small_at_moderate_n() {
    let opts = ConditionOptions { skeletons: 10, ..ConditionOptions::default() };
    let r = check_conditions(&params(20, 0), 1.0, &[0.5, 1.0, 2.0], &[0.1], opts).unwrap();
    assert!(r.pass.a0, "{:?}", r.a0);
    assert!(r.a0.iter().all(|&v| v <= 1e-2));
}

#[test]
fn empty_grids_rejected() {
    let p = params(10, 0);
    assert!(check_conditions(&p, 1.0, &[], &[0.1], ConditionOptions::default()).is_err());
    assert!(check_conditions(&p, 1.0, &[1.0], &[], ConditionOptions::default()).is_err());
    assert!(check_conditions(&p, 0.0, &[1.0], &[0.1], ConditionOptions::default()).is_err());
}

#[test]
fn intermediate_target_formula() {
    // α Γ(α) u^{-α} at α = 1/2 is √π/(2√u)
    for u in [0.25, 1.0, 4.0] {
        let want = std::f64::consts::PI.sqrt() / (2.0 * f64::sqrt(u));
        assert!((nu_int(0.5, u) - want).abs() < 1e-13);
    }
}
