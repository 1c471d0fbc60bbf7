//! Estimation-error and mutual-information metrics of a pilot design.
//!
//! Evaluators that work in the factor domain take `F̄` directly; Eve's error is
//! defined on the stacked pilot `P̄` and takes a [`StackedPilot`].

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, cholesky, cx, hermitian_eigenvalues, kron, ln_abs_det, logdet_hpd, real_diag, select_rows,
    CMatrix,
};
use crate::model::{assemble_pilot, NetworkConfig, PilotFactor, StackedPilot};

/// `S̄_(i) F F ᴴ S̄_(i)ᵀ`.
pub(crate) fn others_gram(cfg: &NetworkConfig, f: &CMatrix, i: usize) -> CMatrix {
    let g = select_rows(f, &cfg.other_rows(i));
    &g * g.adjoint()
}

/// Per-user MMSE error traces and their sum `J_M`.
pub fn user_mse(cfg: &NetworkConfig, f: &CMatrix) -> Result<(Vec<f64>, f64)> {
    cfg.check_factor_rows(f)?;
    let mut per_user = Vec::with_capacity(cfg.users());
    for i in 0..cfg.users() {
        let xi = hermitian_eigenvalues(&others_gram(cfg, f, i))?;
        let s2 = cfg.noise(i);
        let mse: f64 = cfg
            .eigenvalues(i)
            .iter()
            .map(|&l| xi.iter().map(|&x| 1.0 / (1.0 + l * x.max(0.0) / s2)).sum::<f64>())
            .sum();
        per_user.push(mse);
    }
    let total = per_user.iter().sum();
    Ok((per_user, total))
}

/// Error trace of maximum-likelihood estimation, which ignores the channel prior.
pub fn ml_mse(cfg: &NetworkConfig, f: &CMatrix) -> Result<f64> {
    cfg.check_factor_rows(f)?;
    let mut total = 0.0;
    for i in 0..cfg.users() {
        let xi = hermitian_eigenvalues(&others_gram(cfg, f, i))?;
        let max = xi[0];
        let min = *xi.last().unwrap();
        if !(max > 0.0 && min > linalg::PD_RATIO * max) {
            return Err(Error::RankDeficient(format!("effective pilot seen by user {i} is singular")));
        }
        let inv_l: f64 = cfg.eigenvalues(i).iter().map(|l| 1.0 / l).sum();
        let inv_x: f64 = xi.iter().map(|x| 1.0 / x).sum();
        total += cfg.noise(i) * inv_l * inv_x;
    }
    Ok(total)
}

fn check_pair(cfg: &NetworkConfig, i: usize, j: usize) -> Result<()> {
    cfg.check_user(i)?;
    cfg.check_user(j)?;
    if i == j {
        return Err(Error::InvalidConfig(format!("pair ({i}, {j}) must name two distinct users")));
    }
    Ok(())
}

fn sqrt_diag(values: &[f64]) -> CMatrix {
    real_diag(&values.iter().map(|v| v.sqrt()).collect::<Vec<_>>())
}

/// `Γ_{i,j}` and `Γ_{T,j,i}`, both `N_jN_i × N_jN_i`.
pub(crate) fn gamma_pair(cfg: &NetworkConfig, f: &CMatrix, i: usize, j: usize) -> Result<(CMatrix, CMatrix)> {
    let r = f.ncols();
    let a = {
        let lam = cfg.eigenvalues(i);
        let sj_f = select_rows(f, &cfg.user_row_list(j));
        let gbar = select_rows(f, &cfg.other_rows(i));
        let middle = linalg::identity(r * lam.len()) * cx(cfg.noise(i), 0.0)
            + kron(&(gbar.adjoint() * &gbar), &real_diag(lam));
        let left = kron(&sj_f, &sqrt_diag(lam));
        let y = cholesky(&middle)?.solve(&left.adjoint());
        linalg::hermitian_part(&(&left * y))
    };
    let b = {
        let lam = cfg.eigenvalues(j);
        let si_f = select_rows(f, &cfg.user_row_list(i));
        let gbar = select_rows(f, &cfg.other_rows(j));
        let middle = linalg::identity(r * lam.len()) * cx(cfg.noise(j), 0.0)
            + kron(&real_diag(lam), &(gbar.adjoint() * &gbar));
        let left = kron(&sqrt_diag(lam), &si_f);
        let y = cholesky(&middle)?.solve(&left.adjoint());
        linalg::hermitian_part(&(&left * y))
    };
    Ok((a, b))
}

/// Mutual information in bits between the observations of users `i` and `j`
/// about their shared channel, `−log₂|I − Γ_{i,j} Γ_{T,j,i}|`.
pub fn pairwise_mi(cfg: &NetworkConfig, f: &CMatrix, i: usize, j: usize) -> Result<f64> {
    check_pair(cfg, i, j)?;
    cfg.check_factor_rows(f)?;
    let (a, b) = gamma_pair(cfg, f, i, j)?;
    let n = a.nrows();
    let value = -ln_abs_det(&(linalg::identity(n) - a * b)) / LN_2;
    Ok(value.max(0.0))
}

/// Per-pair MI for all `i < j` and the sum `I_M`.
pub fn sum_mi(cfg: &NetworkConfig, f: &CMatrix) -> Result<(Vec<PairValue>, f64)> {
    let mut pairs = Vec::new();
    for i in 0..cfg.users() {
        for j in i + 1..cfg.users() {
            pairs.push(PairValue { i, j, value: pairwise_mi(cfg, f, i, j)? });
        }
    }
    let total = pairs.iter().map(|p| p.value).sum();
    Ok((pairs, total))
}

/// Linear maps from the shared channel `vec(H_ij)` into user `i`'s observation
/// and into the transposed observation of user `j`, plus the per-user
/// observation covariances, all built from `P̄` directly.
struct ObservationModel {
    to_i: CMatrix,
    to_j: CMatrix,
    k_i: CMatrix,
    k_j: CMatrix,
}

fn observation_model(cfg: &NetworkConfig, sp: &StackedPilot, i: usize, j: usize) -> ObservationModel {
    let k = cfg.pilot_len();
    let sqrt = |u: usize| cfg.eigenbasis(u).sqrt.clone();
    // Row u of the model: P_uᵀ R_u^{1/2}.
    let tx = |u: usize| sp.block(cfg, u).transpose() * sqrt(u);
    let mut k_i = linalg::identity(k * cfg.antennas(i)) * cx(cfg.noise(i), 0.0);
    let mut k_j = linalg::identity(k * cfg.antennas(j)) * cx(cfg.noise(j), 0.0);
    let mut to_i = None;
    let mut to_j = None;
    for u in 0..cfg.users() {
        if u != i {
            let g = kron(&tx(u), &sqrt(i));
            k_i += &g * g.adjoint();
            if u == j {
                to_i = Some(g);
            }
        }
        if u != j {
            let g = kron(&sqrt(j), &tx(u));
            k_j += &g * g.adjoint();
            if u == i {
                to_j = Some(g);
            }
        }
    }
    ObservationModel { to_i: to_i.unwrap(), to_j: to_j.unwrap(), k_i, k_j }
}

/// Pairwise MI from the joint covariance of the two raw observations. Used
/// as an independent cross-check of [`pairwise_mi`].
pub fn pairwise_mi_joint(cfg: &NetworkConfig, pf: &PilotFactor, i: usize, j: usize) -> Result<f64> {
    check_pair(cfg, i, j)?;
    let sp = assemble_pilot(cfg, pf)?;
    let m = observation_model(cfg, &sp, i, j);
    let cross = &m.to_i * m.to_j.adjoint();
    let (ni, nj) = (m.k_i.nrows(), m.k_j.nrows());
    let mut joint = linalg::zeros(ni + nj, ni + nj);
    joint.view_mut((0, 0), (ni, ni)).copy_from(&m.k_i);
    joint.view_mut((ni, ni), (nj, nj)).copy_from(&m.k_j);
    joint.view_mut((0, ni), (ni, nj)).copy_from(&cross);
    joint.view_mut((ni, 0), (nj, ni)).copy_from(&cross.adjoint());
    Ok(logdet_hpd(&m.k_i)? + logdet_hpd(&m.k_j)? - logdet_hpd(&joint)?)
}

/// Pairwise MI between the two users' MMSE channel estimates, from their
/// covariances `K_a`, `K_b` and cross-covariance `K_a K_b`.
pub fn mi_lemma1_oracle(cfg: &NetworkConfig, pf: &PilotFactor, i: usize, j: usize) -> Result<f64> {
    check_pair(cfg, i, j)?;
    let sp = assemble_pilot(cfg, pf)?;
    let m = observation_model(cfg, &sp, i, j);
    for (map, who) in [(&m.to_i, i), (&m.to_j, j)] {
        if linalg::numerical_rank(map) < map.ncols() {
            return Err(Error::RankDeficient(format!(
                "shared channel of pair ({i}, {j}) not observable by user {who}"
            )));
        }
    }
    let ka = linalg::hermitian_part(&(m.to_i.adjoint() * linalg::solve_hpd(&m.k_i, &m.to_i)?));
    let kb = linalg::hermitian_part(&(m.to_j.adjoint() * linalg::solve_hpd(&m.k_j, &m.to_j)?));
    let kab = &ka * &kb;
    let n = ka.nrows();
    let mut joint = linalg::zeros(2 * n, 2 * n);
    joint.view_mut((0, 0), (n, n)).copy_from(&ka);
    joint.view_mut((n, n), (n, n)).copy_from(&kb);
    joint.view_mut((0, n), (n, n)).copy_from(&kab);
    joint.view_mut((n, 0), (n, n)).copy_from(&kab.adjoint());
    let rank_err = |_| Error::RankDeficient(format!("estimate covariance of pair ({i}, {j}) is singular"));
    Ok(logdet_hpd(&ka).map_err(rank_err)? + logdet_hpd(&kb).map_err(rank_err)?
        - logdet_hpd(&joint).map_err(rank_err)?)
}

/// Eve's per-user MMSE error traces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EveReport {
    pub per_user: Vec<f64>,
    /// Power-independent part contributed by the null space of Eve's pilot.
    pub floor_per_user: Vec<f64>,
    /// `(1/M) Σ_i Tr(K_{Δh_{E,i}}) / (N_E N_i)`.
    pub norm: f64,
}

pub fn eve_mse(cfg: &NetworkConfig, sp: &StackedPilot) -> EveReport {
    let n_t = cfg.total_antennas();
    let mut weighted = cfg.stacked_sqrt_h() * sp.p().conjugate();
    for i in 0..cfg.users() {
        let s = cfg.eve_gain(i).sqrt();
        for r in cfg.user_rows(i) {
            weighted.row_mut(r).iter_mut().for_each(|z| *z *= s);
        }
    }
    let (u, sigma) = linalg::left_singular_basis(&weighted);
    let max = sigma[0];
    let is_null = |s: f64| max <= 0.0 || s <= linalg::RANK_TOL * max;
    let n_e = cfg.eve_antennas() as f64;
    let mut per_user = Vec::with_capacity(cfg.users());
    let mut floor_per_user = Vec::with_capacity(cfg.users());
    for i in 0..cfg.users() {
        let (mut total, mut floor) = (0.0, 0.0);
        for k in 0..n_t {
            let w: f64 = cfg.user_rows(i).map(|r| u[(r, k)].norm_sqr()).sum();
            if is_null(sigma[k]) {
                floor += w;
                total += w;
            } else {
                total += w / (1.0 + sigma[k] * sigma[k]);
            }
        }
        let scale = cfg.eve_gain(i) * n_e;
        per_user.push(scale * total);
        floor_per_user.push(scale * floor);
    }
    let norm = per_user
        .iter()
        .enumerate()
        .map(|(i, t)| t / (n_e * cfg.antennas(i) as f64))
        .sum::<f64>()
        / cfg.users() as f64;
    EveReport { per_user, floor_per_user, norm }
}

/// `(J_M / (M(M−1)N²), I_M / (M(M−1)N²/2))`; requires equal antenna counts.
pub fn normalize(cfg: &NetworkConfig, j_m: f64, i_m: f64) -> Result<(f64, f64)> {
    let n = cfg.common_antennas().ok_or_else(|| {
        Error::Unsupported("normalized metrics need equal antenna counts".into())
    })? as f64;
    let m = cfg.users() as f64;
    let d = m * (m - 1.0) * n * n;
    Ok((j_m / d, i_m / (d / 2.0)))
}

/// A value attached to the user pair `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Which metric groups to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MetricSet {
    pub mse: bool,
    pub mi: bool,
    pub eve: bool,
}

impl MetricSet {
    pub const ALL: MetricSet = MetricSet { mse: true, mi: true, eve: true };

    /// Parses a comma-separated list such as `mse,mi,eve`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut set = MetricSet { mse: false, mi: false, eve: false };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "mse" => set.mse = true,
                "mi" => set.mi = true,
                "eve" => set.eve = true,
                other => return Err(Error::InvalidConfig(format!("unknown metric '{other}'"))),
            }
        }
        Ok(set)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseMetrics {
    pub per_user: Vec<f64>,
    pub j_m: f64,
    pub j_norm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiMetrics {
    pub per_pair: Vec<PairValue>,
    pub i_m: f64,
    pub i_norm: Option<f64>,
}

/// All requested metrics of one pilot design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: Option<MseMetrics>,
    pub mi: Option<MiMetrics>,
    pub eve: Option<EveReport>,
}

pub fn evaluate(cfg: &NetworkConfig, pf: &PilotFactor, set: MetricSet) -> Result<MetricReport> {
    let norm = |j: f64, i: f64| normalize(cfg, j, i).ok();
    let mse = if set.mse {
        let (per_user, j_m) = user_mse(cfg, pf.f())?;
        Some(MseMetrics { per_user, j_m, j_norm: norm(j_m, 0.0).map(|x| x.0) })
    } else {
        None
    };
    let mi = if set.mi {
        let (per_pair, i_m) = sum_mi(cfg, pf.f())?;
        Some(MiMetrics { per_pair, i_m, i_norm: norm(0.0, i_m).map(|x| x.1) })
    } else {
        None
    };
    let eve = if set.eve { Some(eve_mse(cfg, &assemble_pilot(cfg, pf)?)) } else { None };
    Ok(MetricReport { mse, mi, eve })
}

/// Ratio of the largest to the smallest entry; `None` if any entry is not positive.
pub fn fairness_ratio(values: &[f64]) -> Option<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    (min > 0.0 && max.is_finite()).then(|| max / min)
}
