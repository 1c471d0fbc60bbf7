//! DFT-based pilots, the baseline initializer, KKT residuals and the
//! Kronecker determinant bounds.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::gradients::{grad_i_m, grad_j_m, power_gradient};
use crate::linalg::{self, cx, hermitian_eigenvalues, inner_re, kron, select_cols, CMatrix};
pub use crate::linalg::dft_matrix;
use crate::model::{NetworkConfig, PilotFactor};

/// `(Q_m, Q̄_m)`: columns `m, m+M, …, m+(N−1)M` of the `NM`-point DFT and the rest.
pub fn qm_split(users: usize, n: usize, m: usize) -> Result<(CMatrix, CMatrix)> {
    if users == 0 || n == 0 || m >= users {
        return Err(Error::InvalidConfig(format!("need 0 <= m < M, got m = {m}, M = {users}")));
    }
    let q = dft_matrix(n * users);
    let (chosen, rest): (Vec<usize>, Vec<usize>) = (0..n * users).partition(|k| k % users == m);
    Ok((select_cols(&q, &chosen), select_cols(&q, &rest)))
}

/// `q_m = [1, w_M^m, …, w_M^{(M−1)m}]ᵀ`.
pub fn q_vector(users: usize, m: usize) -> CMatrix {
    CMatrix::from_fn(users, 1, |k, _| {
        let phase = -2.0 * std::f64::consts::PI * ((k * m) % users) as f64 / users as f64;
        num_complex::Complex64::from_polar(1.0, phase)
    })
}

/// Scalars of the symmetric-isotropic closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedFormContext {
    pub m: usize,
    /// `KP / (N²(M−1))`.
    pub alpha_d: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Multiplier with `∇J_M = −2 μ F̄` at the closed-form pilots.
    pub mu_mse: f64,
    /// Multiplier with `∇I_M = 2 μ F̄` at the closed-form pilots, equal to
    /// `Γ Γ'(α_d) / ((1 − Γ²) ln 2)`.
    pub mu_mi: f64,
}

impl ClosedFormContext {
    pub fn from_params(users: usize, n: usize, kp: f64, sigma2: f64, m: usize) -> Result<Self> {
        if users < 2 || n == 0 || m >= users || !(kp > 0.0) || !(sigma2 > 0.0) {
            return Err(Error::InvalidConfig("closed-form parameters out of range".into()));
        }
        let (mf, nf) = (users as f64, n as f64);
        let alpha_d = kp / (nf * nf * (mf - 1.0));
        let a = alpha_d / sigma2;
        let na = nf * a;
        let mna = mf * na;
        let beta = (2.0 * na * (1.0 + na) + na * na * (mf - 1.0)) / (1.0 + na).powi(2);
        let gamma = (mna - na / (1.0 + na)) / (1.0 + mna);
        let mu_mse = nf * (mf - 1.0 + beta) / (1.0 + mna).powi(2) / sigma2;
        let mu_mi = nf * gamma / ((1.0 - gamma * gamma) * LN_2)
            * ((mf - 1.0) / ((1.0 + na).powi(2) * (1.0 + mna).powi(2))
                + 2.0 * mna / ((1.0 + na) * (1.0 + mna).powi(2)))
            / sigma2;
        Ok(ClosedFormContext { m, alpha_d, beta, gamma, mu_mse, mu_mi })
    }

    pub fn new(cfg: &NetworkConfig, m: usize) -> Result<Self> {
        require_symmetric(cfg)?;
        let n = cfg.antennas(0);
        Self::from_params(cfg.users(), n, cfg.kp(0), cfg.noise(0), m)
    }
}

fn require_symmetric(cfg: &NetworkConfig) -> Result<()> {
    if !cfg.is_symmetric_isotropic() {
        return Err(Error::Unsupported(
            "closed-form pilots need equal N, P, σ², R = I and r = (M−1)N".into(),
        ));
    }
    Ok(())
}

/// `F̄ = √α_d · Q̄_m`, optimal for both criteria in the symmetric-isotropic case.
pub fn theorem1_factor(cfg: &NetworkConfig, m: usize) -> Result<PilotFactor> {
    let ctx = ClosedFormContext::new(cfg, m)?;
    let (_, qbar) = qm_split(cfg.users(), cfg.antennas(0), m)?;
    PilotFactor::with_default_v(cfg, qbar * cx(ctx.alpha_d.sqrt(), 0.0))
}

/// Scales each user's block of `f` so its pilot energy is `fraction · K·P_i`.
pub fn scale_to_budget(cfg: &NetworkConfig, f: &CMatrix, fraction: f64) -> Result<CMatrix> {
    let mut out = f.clone();
    for i in 0..cfg.users() {
        let e = cfg.pilot_energy(f, i);
        if !(e > 0.0) {
            return Err(Error::RankDeficient(format!("user {i} has an all-zero pilot block")));
        }
        let s = (fraction * cfg.kp(i) / e).sqrt();
        let rows = cfg.user_rows(i);
        out.rows_mut(rows.start, rows.len()).iter_mut().for_each(|z| *z *= s);
    }
    Ok(out)
}

/// `√D Q̄_m` with `D` chosen so every user meets its budget with equality.
/// Needs equal antenna counts and `r = (M−1)N`; correlation, powers and
/// noise may differ across users.
pub fn dft_scaled_factor(cfg: &NetworkConfig, m: usize) -> Result<PilotFactor> {
    let n = cfg.common_antennas().ok_or_else(|| {
        Error::Unsupported("DFT pilots need equal antenna counts".into())
    })?;
    if cfg.rank() != (cfg.users() - 1) * n {
        return Err(Error::Unsupported(format!("DFT pilots need r = (M−1)N = {}", (cfg.users() - 1) * n)));
    }
    let (_, qbar) = qm_split(cfg.users(), n, m)?;
    PilotFactor::with_default_v(cfg, scale_to_budget(cfg, &qbar, 1.0)?)
}

/// `√D Q_t`: the first `r` columns of the `N_T`-point DFT, scaled per user to
/// meet each budget with equality.
pub fn baseline_first_factor(cfg: &NetworkConfig) -> Result<PilotFactor> {
    let q = dft_matrix(cfg.total_antennas());
    let qt = q.columns(0, cfg.rank()).into_owned();
    PilotFactor::with_default_v(cfg, scale_to_budget(cfg, &qt, 1.0)?)
}

/// Stationarity residual and the multipliers used to form it.
#[derive(Clone, Debug, PartialEq)]
pub struct KktReport {
    pub residual: f64,
    pub mu: Vec<f64>,
}

/// Relative power slack above which a constraint counts as inactive.
pub const ACTIVE_SLACK: f64 = 1e-3;

/// `sign = +1` for `∇J + Σ μ_i ∇p_i = 0`, `−1` for `∇I − Σ μ_i ∇p_i = 0`.
fn kkt(cfg: &NetworkConfig, f: &CMatrix, grad: &CMatrix, sign: f64, mu: Option<&[f64]>) -> KktReport {
    let mut r = grad * cx(sign, 0.0);
    let mut mus = Vec::with_capacity(cfg.users());
    for i in 0..cfg.users() {
        let gp = power_gradient(cfg, f, i);
        let fitted = match mu {
            Some(m) => m[i],
            None => {
                let active = cfg.power_slack(f, i) <= ACTIVE_SLACK * cfg.kp(i);
                let norm2 = inner_re(&gp, &gp);
                if active && norm2 > 0.0 {
                    (-inner_re(&gp, &r) / norm2).max(0.0)
                } else {
                    0.0
                }
            }
        };
        r += gp * cx(fitted, 0.0);
        mus.push(fitted);
    }
    let scale = linalg::frob(grad);
    let abs = linalg::frob(&r);
    KktReport { residual: if scale > 0.0 { abs / scale } else { abs }, mu: mus }
}

fn check_mu(cfg: &NetworkConfig, mu: &[f64]) -> Result<()> {
    if mu.len() != cfg.users() {
        return Err(Error::Dimension(format!("{} multipliers for {} users", mu.len(), cfg.users())));
    }
    Ok(())
}

/// `‖∇J_M + Σ μ_i ∇p_i‖ / ‖∇J_M‖` with least-squares multipliers. Inactive
/// constraints get `μ_i = 0`; a vanishing gradient returns the absolute norm.
pub fn kkt_residual_mse(cfg: &NetworkConfig, f: &CMatrix) -> Result<KktReport> {
    Ok(kkt(cfg, f, &grad_j_m(cfg, f)?.gradient, 1.0, None))
}

pub fn kkt_residual_mse_with(cfg: &NetworkConfig, f: &CMatrix, mu: &[f64]) -> Result<f64> {
    check_mu(cfg, mu)?;
    Ok(kkt(cfg, f, &grad_j_m(cfg, f)?.gradient, 1.0, Some(mu)).residual)
}

/// `‖∇I_M − Σ μ_i ∇p_i‖ / ‖∇I_M‖` with least-squares multipliers.
pub fn kkt_residual_mi(cfg: &NetworkConfig, f: &CMatrix) -> Result<KktReport> {
    Ok(kkt(cfg, f, &grad_i_m(cfg, f)?.gradient, -1.0, None))
}

pub fn kkt_residual_mi_with(cfg: &NetworkConfig, f: &CMatrix, mu: &[f64]) -> Result<f64> {
    check_mu(cfg, mu)?;
    Ok(kkt(cfg, f, &grad_i_m(cfg, f)?.gradient, -1.0, Some(mu)).residual)
}

/// `|Λ_a⊗Λ_b + Λ_c⊗Λ_d|`, `|A⊗B + C⊗D|` and `|Λ_a⊗Λ_b + Λ̄_c⊗Λ̄_d|` for
/// positive semidefinite `A, C` (`n×n`) and `B, D` (`m×m`), with all
/// eigenvalues descending and `Λ̄` in ascending order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetBounds {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

pub fn kron_det_bounds(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> Result<DetBounds> {
    if a.shape() != c.shape() || b.shape() != d.shape() {
        return Err(Error::Dimension("A, C and B, D must have matching shapes".into()));
    }
    let (la, lb, lc, ld) = (
        hermitian_eigenvalues(a)?,
        hermitian_eigenvalues(b)?,
        hermitian_eigenvalues(c)?,
        hermitian_eigenvalues(d)?,
    );
    let pair = |x: &[f64], y: &[f64], rev: bool| -> f64 {
        let mut p = 1.0;
        for l in 0..la.len() {
            for k in 0..lb.len() {
                let (lx, ky) = if rev { (la.len() - 1 - l, lb.len() - 1 - k) } else { (l, k) };
                p *= la[l] * lb[k] + x[lx] * y[ky];
            }
        }
        p
    };
    let sum = kron(a, b) + kron(c, d);
    let value = sum.lu().determinant().re;
    Ok(DetBounds { lower: pair(&lc, &ld, false), value, upper: pair(&lc, &ld, true) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qm_split_two_users() {
        let (q, qbar) = qm_split(2, 1, 0).unwrap();
        assert!((q[(1, 0)] - cx(1.0, 0.0)).norm() < 1e-15);
        assert!((qbar[(1, 0)] - cx(-1.0, 0.0)).norm() < 1e-15);
        assert!(qm_split(2, 1, 2).is_err());
    }

    #[test]
    fn dft_factor_scalar_case() {
        let cfg = NetworkConfig::builder(vec![1, 1]).power(vec![1.0]).build().unwrap();
        let pf = theorem1_factor(&cfg, 0).unwrap();
        assert!((pf.f()[(0, 0)] - cx(1.0, 0.0)).norm() < 1e-14);
        assert!((pf.f()[(1, 0)] - cx(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn dft_factor_rejects_asymmetric() {
        let cfg = NetworkConfig::symmetric(3, 2, 10.0, 0.5).unwrap();
        assert!(matches!(theorem1_factor(&cfg, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn context_invariants() {
        for kp in [1e-3, 1.0, 1e3, 1e7] {
            let ctx = ClosedFormContext::from_params(3, 2, kp, 1.0, 1).unwrap();
            assert!(ctx.gamma > 0.0 && ctx.gamma < 1.0);
            assert!(ctx.beta > 0.0);
            assert!(ctx.mu_mse > 0.0 && ctx.mu_mi > 0.0);
        }
    }

    #[test]
    fn baseline_two_single_antenna_users() {
        let cfg = NetworkConfig::builder(vec![1, 1]).power(vec![1.0]).build().unwrap();
        let pf = baseline_first_factor(&cfg).unwrap();
        assert!((pf.f()[(0, 0)] - cx(1.0, 0.0)).norm() < 1e-14);
        assert!((pf.f()[(1, 0)] - cx(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_factor_kkt_conventions() {
        let cfg = NetworkConfig::symmetric(2, 2, 10.0, 0.0).unwrap();
        let rep = kkt_residual_mse(&cfg, &linalg::zeros(4, 2)).unwrap();
        assert_eq!(rep.mu, vec![0.0, 0.0]);
        assert_eq!(rep.residual, 0.0);
    }
}
