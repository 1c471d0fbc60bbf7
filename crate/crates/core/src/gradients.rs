//! Analytic gradients with respect to the pilot factor `F̄`.
//!
//! Convention: `∇f = ∂f/∂Re(F) + j ∂f/∂Im(F)`, so that
//! `df = Re Tr(∇ᴴ dF)` and `∇ Tr(F Fᴴ) = 2F`.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky, commutation, cx, select_rows, CMatrix};
use crate::metrics::{gamma_pair, pairwise_mi};
use crate::model::NetworkConfig;

/// A scalar objective and its gradient at one point.
#[derive(Clone, Debug)]
pub struct GradientResult {
    pub gradient: CMatrix,
    pub value: f64,
}

/// Gradient of user `i`'s MMSE error trace.
pub fn grad_user_mse(cfg: &NetworkConfig, f: &CMatrix, i: usize) -> Result<GradientResult> {
    cfg.check_user(i)?;
    cfg.check_factor_rows(f)?;
    let others = cfg.other_rows(i);
    let g = select_rows(f, &others);
    let x = &g * g.adjoint();
    let n = others.len();
    let s2 = cfg.noise(i);
    let mut acc = linalg::zeros(n, f.ncols());
    let mut value = 0.0;
    for &l in cfg.eigenvalues(i) {
        let c = l / s2;
        let a = linalg::identity(n) + &x * cx(c, 0.0);
        let chol = cholesky(&a)?;
        value += linalg::trace_re(&chol.solve(&linalg::identity(n)));
        let once = chol.solve(&g);
        acc += chol.solve(&once) * cx(c, 0.0);
    }
    let mut gradient = linalg::zeros(f.nrows(), f.ncols());
    for (k, &row) in others.iter().enumerate() {
        gradient.row_mut(row).copy_from(&(acc.row(k) * cx(-2.0, 0.0)));
    }
    Ok(GradientResult { gradient, value })
}

/// Gradient of the sum MSE `J_M`.
pub fn grad_j_m(cfg: &NetworkConfig, f: &CMatrix) -> Result<GradientResult> {
    let mut gradient = linalg::zeros(f.nrows(), f.ncols());
    let mut value = 0.0;
    for i in 0..cfg.users() {
        let g = grad_user_mse(cfg, f, i)?;
        gradient += g.gradient;
        value += g.value;
    }
    Ok(GradientResult { gradient, value })
}

/// Gradient of user `i`'s pilot energy `Tr(S_i R̄^{−H/2} F Fᴴ R̄^{−1/2} S_iᵀ)`.
pub fn power_gradient(cfg: &NetworkConfig, f: &CMatrix, i: usize) -> CMatrix {
    let rows = cfg.user_rows(i);
    let w = &cfg.eigenbasis(i).inv_sqrt_h;
    let block = w.adjoint() * w * f.rows(rows.start, rows.len()) * cx(2.0, 0.0);
    let mut out = linalg::zeros(f.nrows(), f.ncols());
    out.rows_mut(rows.start, rows.len()).copy_from(&block);
    out
}

/// Gradient of the power barrier `−ln ψ_{P,i}`.
pub fn grad_power_barrier(cfg: &NetworkConfig, f: &CMatrix, i: usize) -> Result<GradientResult> {
    cfg.check_user(i)?;
    cfg.check_factor_rows(f)?;
    let psi = cfg.power_slack(f, i);
    if !(psi > 0.0) {
        return Err(Error::Infeasible(format!("user {i} exceeds its power budget (slack {psi:e})")));
    }
    Ok(GradientResult { gradient: power_gradient(cfg, f, i) / cx(psi, 0.0), value: -psi.ln() })
}

/// `2 (Γ⁽⁰⁾ − Γ⁽¹⁾ + Γ⁽²⁾ − Γ⁽³⁾) F` for one side of a pair: the gradient of
/// `Σ_l Tr(W_l A_l)` where `A_l = c_l S X Sᵀ − c_l² S X S̄ᵀ Z_l S̄ X Sᵀ`,
/// `X = F Fᴴ` and `Z_l = (I + c_l S̄ X S̄ᵀ)⁻¹`.
fn four_term_gradient(
    f: &CMatrix,
    target: &[usize],
    others: &[usize],
    lam: &[f64],
    s2: f64,
    blocks: &[CMatrix],
) -> Result<CMatrix> {
    let gt = select_rows(f, target);
    let go = select_rows(f, others);
    let xoo = &go * go.adjoint();
    let xot = &go * gt.adjoint();
    let (nt, no) = (target.len(), others.len());
    let mut m_tt = linalg::zeros(nt, nt);
    let mut m_ot = linalg::zeros(no, nt);
    let mut m_oo = linalg::zeros(no, no);
    for (&l, w) in lam.iter().zip(blocks) {
        let c = l / s2;
        let chol = cholesky(&(linalg::identity(no) + &xoo * cx(c, 0.0)))?;
        let e = chol.solve(&xot);
        let ew = &e * w;
        m_tt += w * cx(c, 0.0);
        m_ot -= &ew * cx(c * c, 0.0);
        m_oo += &ew * e.adjoint() * cx(c * c * c, 0.0);
    }
    let n = f.nrows();
    let mut m = linalg::zeros(n, n);
    for (a, &ra) in target.iter().enumerate() {
        for (b, &rb) in target.iter().enumerate() {
            m[(ra, rb)] += m_tt[(a, b)];
        }
    }
    for (a, &ra) in others.iter().enumerate() {
        for (b, &rb) in target.iter().enumerate() {
            m[(ra, rb)] += m_ot[(a, b)];
            m[(rb, ra)] += m_ot[(a, b)].conj();
        }
        for (b, &rb) in others.iter().enumerate() {
            m[(ra, rb)] += m_oo[(a, b)];
        }
    }
    Ok(m * f * cx(2.0, 0.0))
}

fn diagonal_blocks(m: &CMatrix, size: usize) -> Vec<CMatrix> {
    (0..m.nrows() / size)
        .map(|l| m.view((l * size, l * size), (size, size)).into_owned())
        .collect()
}

/// Gradient of the pairwise MI between users `i` and `j`.
pub fn grad_pairwise_mi(cfg: &NetworkConfig, f: &CMatrix, i: usize, j: usize) -> Result<GradientResult> {
    let value = pairwise_mi(cfg, f, i, j)?;
    let (a, b) = gamma_pair(cfg, f, i, j)?;
    let n = a.nrows();
    let d = linalg::identity(n) - &a * &b;
    let d_inv = d.lu().solve(&linalg::identity(n)).ok_or_else(|| {
        Error::RankDeficient(format!("pair ({i}, {j}) observations are fully dependent"))
    })?;
    let w = linalg::hermitian_part(&(&b * &d_inv));
    let w_rev = linalg::hermitian_part(&(&d_inv * &a));
    let (ni, nj) = (cfg.antennas(i), cfg.antennas(j));
    let t = commutation(nj, ni);
    let w_perm = t.transpose() * w * &t;
    let first = four_term_gradient(
        f,
        &cfg.user_row_list(j),
        &cfg.other_rows(i),
        cfg.eigenvalues(i),
        cfg.noise(i),
        &diagonal_blocks(&w_perm, nj),
    )?;
    let second = four_term_gradient(
        f,
        &cfg.user_row_list(i),
        &cfg.other_rows(j),
        cfg.eigenvalues(j),
        cfg.noise(j),
        &diagonal_blocks(&w_rev, ni),
    )?;
    Ok(GradientResult { gradient: (first + second) / cx(LN_2, 0.0), value })
}

/// Gradient of the sum MI `I_M` over pairs `i < j`.
pub fn grad_i_m(cfg: &NetworkConfig, f: &CMatrix) -> Result<GradientResult> {
    cfg.check_factor_rows(f)?;
    let mut gradient = linalg::zeros(f.nrows(), f.ncols());
    let mut value = 0.0;
    for i in 0..cfg.users() {
        for j in i + 1..cfg.users() {
            let g = grad_pairwise_mi(cfg, f, i, j)?;
            gradient += g.gradient;
            value += g.value;
        }
    }
    Ok(GradientResult { gradient, value })
}

fn power_barriers(cfg: &NetworkConfig, f: &CMatrix) -> Result<GradientResult> {
    let mut gradient = linalg::zeros(f.nrows(), f.ncols());
    let mut value = 0.0;
    for i in 0..cfg.users() {
        let g = grad_power_barrier(cfg, f, i)?;
        gradient += g.gradient;
        value += g.value;
    }
    Ok(GradientResult { gradient, value })
}

/// `g₁ = t·J_M + Σ_i B_{P,i}`.
pub fn grad_g1(cfg: &NetworkConfig, f: &CMatrix, t: f64) -> Result<GradientResult> {
    let b = power_barriers(cfg, f)?;
    let j = grad_j_m(cfg, f)?;
    Ok(GradientResult { gradient: j.gradient * cx(t, 0.0) + b.gradient, value: t * j.value + b.value })
}

/// `g₂ = −t·I_M + Σ_i B_{P,i}`.
pub fn grad_g2(cfg: &NetworkConfig, f: &CMatrix, t: f64) -> Result<GradientResult> {
    let b = power_barriers(cfg, f)?;
    let mi = grad_i_m(cfg, f)?;
    Ok(GradientResult { gradient: b.gradient - mi.gradient * cx(t, 0.0), value: b.value - t * mi.value })
}

/// Which per-user quantity the min-max design equalizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FairnessMode {
    /// Minimize the largest per-user MSE.
    Mse,
    /// Maximize the smallest pairwise MI (the slack variable is `ε = −min MI`).
    Mi,
}

/// Value and gradient of the fairness barrier function over `(ε, F)`.
#[derive(Clone, Debug)]
pub struct FairnessGradient {
    pub value: f64,
    pub d_eps: f64,
    pub gradient: CMatrix,
}

/// `t·ε + Σ_i B_{P,i} + Σ −ln(ε − MSE_i)` in MSE mode, or
/// `t·ε + Σ_i B_{P,i} + Σ_{i<j} −ln(ε + MI_ij)` in MI mode.
pub fn grad_fairness(
    cfg: &NetworkConfig,
    f: &CMatrix,
    eps: f64,
    mode: FairnessMode,
    t: f64,
) -> Result<FairnessGradient> {
    let base = power_barriers(cfg, f)?;
    let mut value = t * eps + base.value;
    let mut d_eps = t;
    let mut gradient = base.gradient;
    match mode {
        FairnessMode::Mse => {
            for i in 0..cfg.users() {
                let g = grad_user_mse(cfg, f, i)?;
                let slack = eps - g.value;
                if !(slack > 0.0) {
                    return Err(Error::Infeasible(format!("user {i} MSE {} exceeds ε = {eps}", g.value)));
                }
                value -= slack.ln();
                d_eps -= 1.0 / slack;
                gradient += g.gradient / cx(slack, 0.0);
            }
        }
        FairnessMode::Mi => {
            for i in 0..cfg.users() {
                for j in i + 1..cfg.users() {
                    let g = grad_pairwise_mi(cfg, f, i, j)?;
                    let slack = eps + g.value;
                    if !(slack > 0.0) {
                        return Err(Error::Infeasible(format!(
                            "pair ({i}, {j}) MI {} below −ε = {}",
                            g.value, -eps
                        )));
                    }
                    value -= slack.ln();
                    d_eps -= 1.0 / slack;
                    gradient -= g.gradient / cx(slack, 0.0);
                }
            }
        }
    }
    Ok(FairnessGradient { value, d_eps, gradient })
}
