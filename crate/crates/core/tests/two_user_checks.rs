mod common;

use anece::barrier::{solve_max_sum_mi, solve_min_sum_mse, BarrierSettings};
use anece::closed_form::theorem1_factor;
use anece::metrics::{sum_mi, user_mse};
use anece::model::NetworkConfig;
use anece::two_user::*;
use rand::Rng;

fn two_user_config(rng: &mut rand_chacha::ChaCha8Rng) -> NetworkConfig {
    let antennas = vec![rng.random_range(1..=3), rng.random_range(1..=3)];
    let correlation = antennas.iter().map(|&n| common::random_correlation(rng, n)).collect();
    NetworkConfig::builder(antennas)
        .kp_db(vec![rng.random_range(-5.0..25.0), rng.random_range(-5.0..25.0)])
        .noise(vec![rng.random_range(0.2..2.0), rng.random_range(0.2..2.0)])
        .correlation(correlation)
        .build()
        .unwrap()
}

fn random_allocation(rng: &mut rand_chacha::ChaCha8Rng, cfg: &NetworkConfig) -> PowerAllocation {
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, i: usize| {
        let raw: Vec<f64> = (0..cfg.antennas(i)).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s * cfg.kp(i)).collect()
    };
    PowerAllocation { c1: draw(rng, 0), c2: draw(rng, 1) }
}

fn descending(c: &[f64]) -> bool {
    c.windows(2).all(|w| w[0] >= w[1] * (1.0 - 1e-9))
}

fn budget_tight(cfg: &NetworkConfig, a: &PowerAllocation) -> bool {
    (0..2).all(|i| (a.user(i).iter().sum::<f64>() - cfg.kp(i)).abs() <= 1e-8 * cfg.kp(i))
}

#[test]
fn objective_matches_full_metrics() {
    let mut rng = common::rng(21);
    for _ in 0..25 {
        let cfg = two_user_config(&mut rng);
        let alloc = random_allocation(&mut rng, &cfg);
        let (j2, i2) = two_user_objective(&cfg, &alloc).unwrap();
        let pf = assemble_two_user_pilot(&cfg, &alloc).unwrap();
        let j = user_mse(&cfg, pf.f()).unwrap().1;
        let i = sum_mi(&cfg, pf.f()).unwrap().1;
        assert!((j2 - j).abs() <= 1e-9 * j.max(1.0), "{j2} vs {j}");
        assert!((i2 - i).abs() <= 1e-9 * i.max(1.0), "{i2} vs {i}");
        for u in 0..2 {
            assert!((cfg.pilot_energy(pf.f(), u) - alloc.user(u).iter().sum::<f64>()).abs() < 1e-9 * cfg.kp(u));
        }
    }
}

#[test]
fn mse_allocation_dominates_feasible_points() {
    let mut rng = common::rng(22);
    for _ in 0..10 {
        let cfg = two_user_config(&mut rng);
        let best = mse_decoupled_allocation(&cfg).unwrap();
        assert!(budget_tight(&cfg, &best));
        let (jb, _) = two_user_objective(&cfg, &best).unwrap();
        let (ju, _) = two_user_objective(&cfg, &PowerAllocation::uniform(&cfg).unwrap()).unwrap();
        assert!(jb <= ju * (1.0 + 1e-12));
        for _ in 0..100 {
            let (jr, _) = two_user_objective(&cfg, &random_allocation(&mut rng, &cfg)).unwrap();
            assert!(jb <= jr * (1.0 + 1e-12));
        }
    }
}

#[test]
fn isotropic_allocations_are_uniform() {
    let cfg = NetworkConfig::symmetric(2, 3, 12.0, 0.0).unwrap();
    let u = PowerAllocation::uniform(&cfg).unwrap();
    let m = mse_decoupled_allocation(&cfg).unwrap();
    let i = mi_alternating_bisection(&cfg, 1e-12).unwrap();
    for (a, b) in m.c1.iter().chain(&m.c2).zip(u.c1.iter().chain(&u.c2)) {
        assert!((a - b).abs() < 1e-9 * b);
    }
    for (a, b) in i.allocation.c1.iter().chain(&i.allocation.c2).zip(u.c1.iter().chain(&u.c2)) {
        assert!((a - b).abs() < 1e-9 * b);
    }
}

#[test]
fn mi_allocation_invariants() {
    let mut rng = common::rng(23);
    for _ in 0..15 {
        let cfg = two_user_config(&mut rng);
        let out = mi_alternating_bisection(&cfg, 1e-11).unwrap();
        assert!(out.converged);
        assert!(budget_tight(&cfg, &out.allocation));
        assert!(descending(&out.allocation.c1) && descending(&out.allocation.c2), "{:?}", out.allocation);
        assert!(out.history.windows(2).all(|w| w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0)));
        let (_, i2) = two_user_objective(&cfg, &out.allocation).unwrap();
        assert!((i2 - out.i2).abs() < 1e-12 * i2.max(1.0));
        let floor = STREAM_FLOOR * cfg.kp(0).min(cfg.kp(1));
        assert!(out.allocation.c1.iter().chain(&out.allocation.c2).all(|&c| c >= floor * 0.999));
    }
}

#[test]
fn asymptotic_regimes() {
    let high = NetworkConfig::symmetric(2, 4, 70.0, 0.8).unwrap();
    let out = mi_alternating_bisection(&high, 1e-12).unwrap();
    let uni = theorem4_reference(&high, AsymptoticRegime::Uniform).unwrap();
    for (a, b) in out.allocation.c1.iter().zip(&uni.c1) {
        assert!((a - b).abs() < 1e-2 * b);
    }
    assert!(hessian_certificate(&high, &out.allocation).unwrap().convex);
    let low = NetworkConfig::symmetric(2, 4, -30.0, 0.8).unwrap();
    let out = mi_alternating_bisection(&low, 1e-12).unwrap();
    let single = theorem4_reference(&low, AsymptoticRegime::SingleStream).unwrap();
    assert!(out.allocation.c1[0] > 0.99 * single.c1[0]);
    assert!(out.allocation.c2[0] > 0.99 * single.c2[0]);
    assert!(!hessian_certificate(&low, &out.allocation).unwrap().convex);
}

#[test]
fn uniform_pilot_matches_closed_form() {
    let cfg = NetworkConfig::symmetric(2, 2, 15.0, 0.0).unwrap();
    let u = PowerAllocation::uniform(&cfg).unwrap();
    let (j2, i2) = two_user_objective(&cfg, &u).unwrap();
    let pf = theorem1_factor(&cfg, 0).unwrap();
    assert!((j2 - user_mse(&cfg, pf.f()).unwrap().1).abs() < 1e-10 * j2);
    assert!((i2 - sum_mi(&cfg, pf.f()).unwrap().1).abs() < 1e-10 * i2);
}

#[test]
fn barrier_agrees_with_decoupled_mse() {
    let settings = BarrierSettings::default();
    for rho in [0.0, 0.5, 0.8] {
        for kp in [10.0, 20.0, 30.0] {
            let cfg = NetworkConfig::symmetric(2, 2, kp, rho).unwrap();
            let (j2, _) = two_user_objective(&cfg, &mse_decoupled_allocation(&cfg).unwrap()).unwrap();
            let jb = user_mse(&cfg, solve_min_sum_mse(&cfg, &settings).unwrap().factor.f()).unwrap().1;
            assert!((jb - j2).abs() <= 1e-3 * j2, "rho {rho} kp {kp}: {jb} vs {j2}");
        }
    }
}

#[test]
fn barrier_agrees_with_alternating_mi() {
    let settings = BarrierSettings::default();
    for kp in [10.0, 30.0] {
        let cfg = NetworkConfig::symmetric(2, 2, kp, 0.5).unwrap();
        let i2 = mi_alternating_bisection(&cfg, 1e-12).unwrap().i2;
        let ib = sum_mi(&cfg, solve_max_sum_mi(&cfg, &settings).unwrap().factor.f()).unwrap().1;
        assert!((ib - i2).abs() <= 1e-3 * i2, "kp {kp}: {ib} vs {i2}");
    }
}
