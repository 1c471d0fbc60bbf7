#![allow(dead_code)]

use anece::linalg::{self, cx, CMatrix};
use anece::model::NetworkConfig;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries i.i.d. CN(0, scale²).
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> CMatrix {
    let s = scale / 2f64.sqrt();
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        cx(s * re, s * im)
    })
}

/// Random Hermitian PD matrix with trace `n`.
pub fn random_correlation(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = random_matrix(rng, n, n, 1.0);
    let h = &a * a.adjoint() + linalg::identity(n) * cx(0.3, 0.0);
    let t = linalg::trace_re(&h);
    linalg::hermitian_part(&(h * cx(n as f64 / t, 0.0)))
}

/// Random heterogeneous instance with `M ∈ {2,3}`, `N_i ∈ 1..=3`.
pub fn random_config(rng: &mut ChaCha8Rng) -> NetworkConfig {
    let m = rng.random_range(2..=3);
    let antennas: Vec<usize> = (0..m).map(|_| rng.random_range(1..=3)).collect();
    let total: usize = antennas.iter().sum();
    let n_min = *antennas.iter().min().unwrap();
    let r = rng.random_range(total - n_min..=total - 1);
    let k = r + rng.random_range(0..=2);
    let correlation = antennas.iter().map(|&n| random_correlation(rng, n)).collect();
    NetworkConfig::builder(antennas)
        .kp_db((0..m).map(|_| rng.random_range(0.0..20.0)).collect())
        .noise((0..m).map(|_| rng.random_range(0.2..2.0)).collect())
        .correlation(correlation)
        .rank(r)
        .pilot_len(k)
        .build()
        .unwrap()
}

/// Random factor with every user at `fraction` of its budget.
pub fn random_factor(rng: &mut ChaCha8Rng, cfg: &NetworkConfig, fraction: f64) -> CMatrix {
    let f = random_matrix(rng, cfg.total_antennas(), cfg.rank(), 1.0);
    anece::closed_form::scale_to_budget(cfg, &f, fraction).unwrap()
}

/// Central differences in the `∂/∂Re + j∂/∂Im` convention.
pub fn fd_gradient(f: impl Fn(&CMatrix) -> f64, x: &CMatrix, h: f64) -> CMatrix {
    let mut g = linalg::zeros(x.nrows(), x.ncols());
    for idx in 0..x.len() {
        let mut d = [0.0; 2];
        for (part, step) in [cx(h, 0.0), cx(0.0, h)].into_iter().enumerate() {
            let mut xp = x.clone();
            xp[idx] += step;
            let mut xm = x.clone();
            xm[idx] -= step;
            d[part] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        g[idx] = cx(d[0], d[1]);
    }
    g
}

pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    linalg::frob(&(a - b)) / linalg::frob(b).max(1e-300)
}

/// Empirical MMSE error per user: `(mean, standard error)` of `‖ĥ_i − h_i‖²`
/// over `draws` realizations of `y_i = Σ_u (P_uᵀR_u^{1/2} ⊗ R_i^{1/2}) h_iu + n_i`
/// with white `h_iu`.
pub fn monte_carlo_mse(
    rng: &mut ChaCha8Rng,
    cfg: &NetworkConfig,
    pf: &anece::model::PilotFactor,
    draws: usize,
) -> Vec<(f64, f64)> {
    let sp = anece::model::assemble_pilot(cfg, pf).unwrap();
    (0..cfg.users())
        .map(|i| {
            let blocks: Vec<CMatrix> = (0..cfg.users())
                .filter(|&u| u != i)
                .map(|u| {
                    let tx = sp.block(cfg, u).transpose() * &cfg.eigenbasis(u).sqrt;
                    linalg::kron(&tx, &cfg.eigenbasis(i).sqrt)
                })
                .collect();
            let rows = blocks[0].nrows();
            let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
            let mut g = linalg::zeros(rows, cols);
            let mut at = 0;
            for b in &blocks {
                g.view_mut((0, at), (rows, b.ncols())).copy_from(b);
                at += b.ncols();
            }
            let noise = cfg.noise(i);
            let cov = &g * g.adjoint() + linalg::identity(rows) * cx(noise, 0.0);
            let w = g.adjoint() * cov.clone().cholesky().unwrap().inverse();
            let (mut sum, mut sum2) = (0.0, 0.0);
            for _ in 0..draws {
                let h = random_matrix(rng, cols, 1, 1.0);
                let n = random_matrix(rng, rows, 1, noise.sqrt());
                let y = &g * &h + n;
                let e = linalg::frob(&(&w * y - h)).powi(2);
                sum += e;
                sum2 += e * e;
            }
            let mean = sum / draws as f64;
            let var = (sum2 / draws as f64 - mean * mean) * draws as f64 / (draws as f64 - 1.0);
            (mean, (var / draws as f64).sqrt())
        })
        .collect()
}
