mod common;

use anece::gradients::*;
use anece::linalg::{self, cx};
use anece::metrics::{pairwise_mi, sum_mi, user_mse};
use common::*;

#[test]
fn mse_gradient_matches_finite_differences_on_random_configs() {
    let mut rng = rng(21);
    for _ in 0..15 {
        let cfg = random_config(&mut rng);
        let f = random_factor(&mut rng, &cfg, 0.8);
        let g = grad_j_m(&cfg, &f).unwrap();
        let fd = fd_gradient(|x| user_mse(&cfg, x).unwrap().1, &f, 1e-6);
        assert!(rel_err(&g.gradient, &fd) < 1e-5, "{}", rel_err(&g.gradient, &fd));
        assert!((g.value - user_mse(&cfg, &f).unwrap().1).abs() < 1e-10);
    }
}

#[test]
fn mi_gradient_matches_finite_differences_on_random_configs() {
    let mut rng = rng(22);
    for _ in 0..15 {
        let cfg = random_config(&mut rng);
        let f = random_factor(&mut rng, &cfg, 0.8);
        let g = grad_i_m(&cfg, &f).unwrap();
        let fd = fd_gradient(|x| sum_mi(&cfg, x).unwrap().1, &f, 1e-6);
        assert!(rel_err(&g.gradient, &fd) < 1e-4, "{}", rel_err(&g.gradient, &fd));
        let gp = grad_pairwise_mi(&cfg, &f, 1, 0).unwrap();
        let fdp = fd_gradient(|x| pairwise_mi(&cfg, x, 1, 0).unwrap(), &f, 1e-6);
        assert!(rel_err(&gp.gradient, &fdp) < 1e-4);
    }
}

#[test]
fn barrier_gradient_matches_finite_differences() {
    let mut rng = rng(23);
    for _ in 0..15 {
        let cfg = random_config(&mut rng);
        let f = random_factor(&mut rng, &cfg, 0.8);
        for i in 0..cfg.users() {
            let g = grad_power_barrier(&cfg, &f, i).unwrap();
            let fd = fd_gradient(|x| -cfg.power_slack(x, i).ln(), &f, 1e-6);
            assert!(rel_err(&g.gradient, &fd) < 1e-5);
        }
    }
}

#[test]
fn fairness_gradient_matches_finite_differences() {
    let mut rng = rng(24);
    for mode in [FairnessMode::Mse, FairnessMode::Mi] {
        for _ in 0..8 {
            let cfg = random_config(&mut rng);
            let f = random_factor(&mut rng, &cfg, 0.8);
            let eps = match mode {
                FairnessMode::Mse => user_mse(&cfg, &f).unwrap().0.iter().cloned().fold(0.0, f64::max) * 1.1,
                FairnessMode::Mi => {
                    let (p, _) = sum_mi(&cfg, &f).unwrap();
                    -p.iter().map(|v| v.value).fold(f64::INFINITY, f64::min) * 0.9
                }
            };
            let t = 3.0;
            let g = grad_fairness(&cfg, &f, eps, mode, t).unwrap();
            let fd = fd_gradient(|x| grad_fairness(&cfg, x, eps, mode, t).unwrap().value, &f, 1e-6);
            assert!(rel_err(&g.gradient, &fd) < 1e-4, "{:?} {}", mode, rel_err(&g.gradient, &fd));
            let h = 1e-6 * eps.abs();
            let de = (grad_fairness(&cfg, &f, eps + h, mode, t).unwrap().value
                - grad_fairness(&cfg, &f, eps - h, mode, t).unwrap().value)
                / (2.0 * h);
            assert!((de - g.d_eps).abs() < 1e-5 * g.d_eps.abs().max(1.0));
        }
    }
    let _ = (linalg::identity(1), cx(0.0, 0.0));
}
