mod common;

use anece::closed_form::theorem1_factor;
use anece::linalg::{self, cx};
use anece::metrics::{
    eve_mse, mi_lemma1_oracle, pairwise_mi, pairwise_mi_joint, sum_mi, user_mse,
};
use anece::model::{assemble_pilot, NetworkConfig, PilotFactor};
use common::*;

#[test]
fn gamma_form_matches_joint_covariance_form() {
    let mut rng = rng(11);
    for _ in 0..30 {
        let cfg = random_config(&mut rng);
        let pf = PilotFactor::with_default_v(&cfg, random_factor(&mut rng, &cfg, 0.7)).unwrap();
        for i in 0..cfg.users() {
            for j in 0..cfg.users() {
                if i == j {
                    continue;
                }
                let a = pairwise_mi(&cfg, pf.f(), i, j).unwrap();
                let b = pairwise_mi_joint(&cfg, &pf, i, j).unwrap();
                assert!((a - b).abs() < 1e-9 * a.max(1.0), "{a} vs {b}");
            }
        }
    }
}

#[test]
fn pairwise_mi_is_symmetric() {
    let mut rng = rng(12);
    for _ in 0..30 {
        let cfg = random_config(&mut rng);
        let f = random_factor(&mut rng, &cfg, 0.9);
        let a = pairwise_mi(&cfg, &f, 0, 1).unwrap();
        let b = pairwise_mi(&cfg, &f, 1, 0).unwrap();
        assert!((a - b).abs() < 1e-10 * a.max(1.0));
    }
}

#[test]
fn estimate_oracle_on_two_user_dft_pilots() {
    let cfg = NetworkConfig::symmetric(2, 2, 15.0, 0.0).unwrap();
    let pf = theorem1_factor(&cfg, 1).unwrap();
    let a = pairwise_mi(&cfg, pf.f(), 0, 1).unwrap();
    let b = mi_lemma1_oracle(&cfg, &pf, 0, 1).unwrap();
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn estimate_oracle_rejects_degenerate_pilot() {
    let cfg = NetworkConfig::symmetric(2, 2, 15.0, 0.0).unwrap();
    let mut f = theorem1_factor(&cfg, 0).unwrap().into_f();
    f.row_mut(3).fill(cx(0.0, 0.0));
    let pf = PilotFactor::with_default_v(&cfg, f).unwrap();
    assert!(mi_lemma1_oracle(&cfg, &pf, 0, 1).is_err());
}

#[test]
fn scaling_up_is_monotone() {
    let mut rng = rng(13);
    for _ in 0..20 {
        let cfg = random_config(&mut rng);
        let f = random_factor(&mut rng, &cfg, 0.5);
        let g = &f * cx(1.7, 0.0);
        let (m1, _) = user_mse(&cfg, &f).unwrap();
        let (m2, _) = user_mse(&cfg, &g).unwrap();
        assert!(m1.iter().zip(&m2).all(|(a, b)| *b <= *a + 1e-12));
        let (p1, _) = sum_mi(&cfg, &f).unwrap();
        let (p2, _) = sum_mi(&cfg, &g).unwrap();
        assert!(p1.iter().zip(&p2).all(|(a, b)| b.value >= a.value - 1e-12));
    }
}

#[test]
fn mse_bounded_by_prior() {
    let mut rng = rng(14);
    for _ in 0..20 {
        let cfg = random_config(&mut rng);
        let f = random_factor(&mut rng, &cfg, 1.0);
        let (per_user, _) = user_mse(&cfg, &f).unwrap();
        for (i, m) in per_user.iter().enumerate() {
            let n = cfg.antennas(i) as f64;
            assert!(*m >= 0.0 && *m <= n * (cfg.total_antennas() as f64 - n) + 1e-12);
        }
    }
}

#[test]
fn eve_floor_scales_out() {
    let mut rng = rng(15);
    for _ in 0..10 {
        let cfg = random_config(&mut rng);
        let pf = PilotFactor::with_default_v(&cfg, random_factor(&mut rng, &cfg, 1.0)).unwrap();
        let sp = assemble_pilot(&cfg, &pf).unwrap();
        let floor = eve_mse(&cfg, &sp).floor_per_user;
        let big = eve_mse(&cfg, &sp.scaled(1e6)).per_user;
        for (a, b) in floor.iter().zip(&big) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
    let _ = linalg::identity(1);
}

#[test]
fn user_mse_matches_monte_carlo() {
    let mut rng = common::rng(404);
    for _ in 0..3 {
        let cfg = common::random_config(&mut rng);
        let f = common::random_factor(&mut rng, &cfg, 1.0);
        let pf = anece::model::PilotFactor::with_default_v(&cfg, f.clone()).unwrap();
        let analytic = anece::metrics::user_mse(&cfg, &f).unwrap().0;
        let mc = common::monte_carlo_mse(&mut rng, &cfg, &pf, 4000);
        for (a, (mean, se)) in analytic.iter().zip(&mc) {
            assert!((a - mean).abs() <= 4.0 * se, "{a} vs {mean} ± {se}");
        }
    }
}
