mod common;

use anece::closed_form::{scale_to_budget, theorem1_factor};
use anece::linalg::{self, cx, kron};
use anece::metrics::{fairness_ratio, sum_mi, user_mse};
use anece::model::{assemble_pilot, factor_from_pilot, validate_anece, NetworkConfig, PilotFactor};
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kron_mixed_product(seed in any::<u64>(), p in 1usize..4, q in 1usize..4, r in 1usize..4, s in 1usize..4) {
        let mut rng = rng(seed);
        let (a, b) = (random_matrix(&mut rng, p, q, 1.0), random_matrix(&mut rng, r, s, 1.0));
        let (c, d) = (random_matrix(&mut rng, q, 2, 1.0), random_matrix(&mut rng, s, 3, 1.0));
        let lhs = kron(&a, &b) * kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        prop_assert!(linalg::frob(&(lhs - &rhs)) <= 1e-12 * linalg::frob(&rhs).max(1.0));
    }

    #[test]
    fn evd_and_svd_reconstruct(seed in any::<u64>(), n in 1usize..6, m in 1usize..6) {
        let mut rng = rng(seed);
        let h = random_correlation(&mut rng, n);
        let evd = linalg::hermitian_evd(&h).unwrap();
        prop_assert!(rel_err(&evd.reconstruct(), &h) < 1e-12);
        prop_assert!(evd.values.windows(2).all(|w| w[0] >= w[1]));
        let a = random_matrix(&mut rng, n, m, 1.0);
        let svd = linalg::svd(&a);
        prop_assert!(rel_err(&svd.reconstruct(), &a) < 1e-12);
        prop_assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn hpd_solve_round_trip(seed in any::<u64>(), n in 1usize..6, k in 1usize..4) {
        let mut rng = rng(seed);
        let a = random_correlation(&mut rng, n);
        let x = random_matrix(&mut rng, n, k, 1.0);
        let b = &a * &x;
        prop_assert!(rel_err(&linalg::solve_hpd(&a, &b).unwrap(), &x) < 1e-9);
    }

    #[test]
    fn pilot_round_trips_through_stacked_form(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let cfg = random_config(&mut rng);
        let pf = PilotFactor::with_default_v(&cfg, random_factor(&mut rng, &cfg, 0.9)).unwrap();
        let sp = assemble_pilot(&cfg, &pf).unwrap();
        for i in 0..cfg.users() {
            prop_assert!((sp.energy(&cfg, i) - cfg.pilot_energy(pf.f(), i)).abs() <= 1e-9 * cfg.kp(i));
        }
        let back = factor_from_pilot(&cfg, &sp, pf.v()).unwrap();
        prop_assert!(rel_err(back.f(), pf.f()) < 1e-9);
    }

    #[test]
    fn objectives_are_phase_invariant(seed in any::<u64>(), theta in 0.0f64..std::f64::consts::TAU) {
        let mut rng = rng(seed);
        let cfg = random_config(&mut rng);
        let f = random_factor(&mut rng, &cfg, 0.9);
        let rotated = &f * cx(theta.cos(), theta.sin());
        let (j, jr) = (user_mse(&cfg, &f).unwrap().1, user_mse(&cfg, &rotated).unwrap().1);
        let (i, ir) = (sum_mi(&cfg, &f).unwrap().1, sum_mi(&cfg, &rotated).unwrap().1);
        prop_assert!((j - jr).abs() <= 1e-9 * j);
        prop_assert!((i - ir).abs() <= 1e-9 * i.max(1.0));
    }

    #[test]
    fn per_user_mse_within_prior(seed in any::<u64>(), fraction in 0.01f64..1.0) {
        let mut rng = rng(seed);
        let cfg = random_config(&mut rng);
        let f = scale_to_budget(&cfg, &random_factor(&mut rng, &cfg, 1.0), fraction).unwrap();
        let (per_user, total) = user_mse(&cfg, &f).unwrap();
        prop_assert!((per_user.iter().sum::<f64>() - total).abs() <= 1e-10 * total.max(1.0));
        for (i, mse) in per_user.iter().enumerate() {
            let prior: f64 = cfg.antennas(i) as f64 * (cfg.total_antennas() - cfg.antennas(i)) as f64;
            prop_assert!(*mse >= 0.0 && *mse <= prior * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dft_pilots_satisfy_rank_conditions(m in 2usize..5, n in 1usize..4, kp in -10.0f64..60.0) {
        let cfg = NetworkConfig::symmetric(m, n, kp, 0.0).unwrap();
        for split in 0..m {
            let pf = theorem1_factor(&cfg, split).unwrap();
            prop_assert!(validate_anece(&cfg, &assemble_pilot(&cfg, &pf).unwrap()).passes());
            for i in 0..m {
                prop_assert!(cfg.power_slack(pf.f(), i).abs() <= 1e-9 * cfg.kp(i));
            }
        }
    }

    #[test]
    fn fairness_ratio_at_least_one(values in proptest::collection::vec(1e-6f64..1e6, 1..8)) {
        let r = fairness_ratio(&values).unwrap();
        prop_assert!(r >= 1.0);
    }
}
