//! Problem instances, selection operators, pilot representations and the
//! ANECE rank conditions.
//!
//! User indices are zero-based throughout the crate.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, cx, dft_matrix, frob, hermitian_evd, numerical_rank, real_diag, select_rows, CMatrix,
    MatrixRecord,
};

/// Tolerance on `V Vᴴ = I`.
pub const SEMI_UNITARY_TOL: f64 = 1e-10;

/// Exponential correlation matrix with entries `rho^|l−k|`.
pub fn exp_correlation(n: usize, rho: f64) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::InvalidConfig("correlation size must be positive".into()));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("correlation coefficient {rho} outside [0, 1)")));
    }
    Ok(CMatrix::from_fn(n, n, |l, k| cx(rho.powi(l.abs_diff(k) as i32), 0.0)))
}

/// Eigenbasis of one user's correlation matrix and the square roots built from it.
#[derive(Clone, Debug)]
pub struct Eigenbasis {
    /// `Ũ`, columns ordered with the eigenvalues.
    pub vectors: CMatrix,
    /// `λ̃`, descending.
    pub values: Vec<f64>,
    /// `R^{1/2} = Ũ Λ̃^{1/2}`.
    pub sqrt: CMatrix,
    /// `R^{−H/2} = Ũ Λ̃^{−1/2}`.
    pub inv_sqrt_h: CMatrix,
}

impl Eigenbasis {
    fn new(r: &CMatrix) -> Result<Self> {
        let evd = hermitian_evd(r)?;
        let sqrt = &evd.vectors * real_diag(&evd.values.iter().map(|v| v.sqrt()).collect::<Vec<_>>());
        let inv_sqrt_h =
            &evd.vectors * real_diag(&evd.values.iter().map(|v| 1.0 / v.sqrt()).collect::<Vec<_>>());
        Ok(Eigenbasis { vectors: evd.vectors, values: evd.values, sqrt, inv_sqrt_h })
    }
}

/// How per-user pilot power is specified.
#[derive(Clone, Debug)]
enum PowerSpec {
    PerSample(Vec<f64>),
    EnergyDb(Vec<f64>),
}

/// Builder for [`NetworkConfig`].
#[derive(Clone, Debug)]
pub struct NetworkBuilder {
    antennas: Vec<usize>,
    power: Option<PowerSpec>,
    noise: Option<Vec<f64>>,
    correlation: Option<Vec<CMatrix>>,
    rho: Option<Vec<f64>>,
    pilot_len: Option<usize>,
    rank: Option<usize>,
    eve_antennas: usize,
    eve_gain: Option<Vec<f64>>,
}

fn per_user<T: Clone>(values: Vec<T>, m: usize, what: &str) -> Result<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); m]),
        n if n == m => Ok(values),
        n => Err(Error::InvalidConfig(format!("{what} has {n} entries for {m} users"))),
    }
}

impl NetworkBuilder {
    /// Per-sample power budgets `P_i` (linear). One value applies to all users.
    pub fn power(mut self, p: Vec<f64>) -> Self {
        self.power = Some(PowerSpec::PerSample(p));
        self
    }

    /// Pilot energy budgets `10·log₁₀(K·P_i)`. One value applies to all users.
    pub fn kp_db(mut self, db: Vec<f64>) -> Self {
        self.power = Some(PowerSpec::EnergyDb(db));
        self
    }

    pub fn noise(mut self, sigma2: Vec<f64>) -> Self {
        self.noise = Some(sigma2);
        self
    }

    /// Exponential correlation coefficients, one per user or one shared.
    pub fn rho(mut self, rho: Vec<f64>) -> Self {
        self.rho = Some(rho);
        self.correlation = None;
        self
    }

    /// Explicit correlation matrices.
    pub fn correlation(mut self, r: Vec<CMatrix>) -> Self {
        self.correlation = Some(r);
        self.rho = None;
        self
    }

    pub fn pilot_len(mut self, k: usize) -> Self {
        self.pilot_len = Some(k);
        self
    }

    pub fn rank(mut self, r: usize) -> Self {
        self.rank = Some(r);
        self
    }

    pub fn eve(mut self, antennas: usize, gain: Vec<f64>) -> Self {
        self.eve_antennas = antennas;
        self.eve_gain = Some(gain);
        self
    }

    pub fn build(self) -> Result<NetworkConfig> {
        let m = self.antennas.len();
        if m < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 users, got {m}")));
        }
        if self.antennas.contains(&0) {
            return Err(Error::InvalidConfig("antenna counts must be positive".into()));
        }
        let total: usize = self.antennas.iter().sum();
        let n_min = *self.antennas.iter().min().unwrap();
        let rank = self.rank.unwrap_or(total - n_min);
        if rank + n_min < total || rank + 1 > total {
            return Err(Error::InvalidConfig(format!(
                "pilot rank {rank} outside [{}, {}]",
                total - n_min,
                total - 1
            )));
        }
        let pilot_len = self.pilot_len.unwrap_or(rank);
        if pilot_len < rank {
            return Err(Error::InvalidConfig(format!(
                "pilot length {pilot_len} shorter than rank {rank}"
            )));
        }
        let power = match self.power {
            Some(PowerSpec::PerSample(p)) => per_user(p, m, "P")?,
            Some(PowerSpec::EnergyDb(db)) => per_user(db, m, "KP_dB")?
                .into_iter()
                .map(|d| 10f64.powf(d / 10.0) / pilot_len as f64)
                .collect(),
            None => return Err(Error::InvalidConfig("power budget missing".into())),
        };
        if power.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidConfig("power budgets must be positive and finite".into()));
        }
        let noise = per_user(self.noise.unwrap_or_else(|| vec![1.0]), m, "sigma2")?;
        if noise.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidConfig("noise variances must be positive".into()));
        }
        let correlation = match (self.correlation, self.rho) {
            (Some(r), _) => {
                if r.len() != m {
                    return Err(Error::InvalidConfig(format!(
                        "{} correlation matrices for {m} users",
                        r.len()
                    )));
                }
                r
            }
            (None, rho) => per_user(rho.unwrap_or_else(|| vec![0.0]), m, "rho")?
                .into_iter()
                .zip(&self.antennas)
                .map(|(rho, &n)| exp_correlation(n, rho))
                .collect::<Result<Vec<_>>>()?,
        };
        let mut eig = Vec::with_capacity(m);
        for (i, (r, &n)) in correlation.iter().zip(&self.antennas).enumerate() {
            if r.nrows() != n || r.ncols() != n {
                return Err(Error::InvalidConfig(format!(
                    "correlation of user {i} is {}x{}, expected {n}x{n}",
                    r.nrows(),
                    r.ncols()
                )));
            }
            let trace = linalg::trace_re(r);
            if (trace - n as f64).abs() > 1e-9 * n as f64 {
                return Err(Error::InvalidConfig(format!(
                    "correlation of user {i} has trace {trace}, expected {n}"
                )));
            }
            let basis = Eigenbasis::new(r)?;
            let last = *basis.values.last().unwrap();
            if !(last > linalg::PD_RATIO * basis.values[0]) {
                return Err(Error::InvalidConfig(format!("correlation of user {i} is singular")));
            }
            eig.push(basis);
        }
        if self.eve_antennas == 0 {
            return Err(Error::InvalidConfig("N_E must be positive".into()));
        }
        let eve_gain = per_user(self.eve_gain.unwrap_or_else(|| vec![1.0]), m, "sigmaE2")?;
        if eve_gain.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidConfig("Eve channel variances must be positive".into()));
        }
        let mut offsets = Vec::with_capacity(m + 1);
        offsets.push(0);
        for &n in &self.antennas {
            offsets.push(offsets.last().unwrap() + n);
        }
        Ok(NetworkConfig {
            antennas: self.antennas,
            power,
            noise,
            correlation,
            pilot_len,
            rank,
            eve_antennas: self.eve_antennas,
            eve_gain,
            offsets,
            eig,
        })
    }
}

/// A complete problem instance.
#[derive(Clone, Debug)]
pub struct NetworkConfig {
    antennas: Vec<usize>,
    power: Vec<f64>,
    noise: Vec<f64>,
    correlation: Vec<CMatrix>,
    pilot_len: usize,
    rank: usize,
    eve_antennas: usize,
    eve_gain: Vec<f64>,
    offsets: Vec<usize>,
    eig: Vec<Eigenbasis>,
}

impl NetworkConfig {
    pub fn builder(antennas: Vec<usize>) -> NetworkBuilder {
        NetworkBuilder {
            antennas,
            power: None,
            noise: None,
            correlation: None,
            rho: None,
            pilot_len: None,
            rank: None,
            eve_antennas: 1,
            eve_gain: None,
        }
    }

    /// `M` users with `N` antennas each, unit noise, shared `KP` in dB and
    /// exponential correlation `rho`.
    pub fn symmetric(m: usize, n: usize, kp_db: f64, rho: f64) -> Result<Self> {
        Self::builder(vec![n; m]).kp_db(vec![kp_db]).rho(vec![rho]).build()
    }

    pub fn users(&self) -> usize {
        self.antennas.len()
    }

    pub fn antennas(&self, i: usize) -> usize {
        self.antennas[i]
    }

    pub fn antenna_counts(&self) -> &[usize] {
        &self.antennas
    }

    /// `N_T`.
    pub fn total_antennas(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// The shared antenna count when all users agree.
    pub fn common_antennas(&self) -> Option<usize> {
        let n = self.antennas[0];
        self.antennas.iter().all(|&x| x == n).then_some(n)
    }

    pub fn power(&self, i: usize) -> f64 {
        self.power[i]
    }

    /// Pilot energy budget `K·P_i`.
    pub fn kp(&self, i: usize) -> f64 {
        self.pilot_len as f64 * self.power[i]
    }

    pub fn noise(&self, i: usize) -> f64 {
        self.noise[i]
    }

    pub fn correlation(&self, i: usize) -> &CMatrix {
        &self.correlation[i]
    }

    pub fn eigenbasis(&self, i: usize) -> &Eigenbasis {
        &self.eig[i]
    }

    /// `λ̃_i`, descending.
    pub fn eigenvalues(&self, i: usize) -> &[f64] {
        &self.eig[i].values
    }

    /// `K`.
    pub fn pilot_len(&self) -> usize {
        self.pilot_len
    }

    /// `r`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn eve_antennas(&self) -> usize {
        self.eve_antennas
    }

    /// `σ²_{E,i}`.
    pub fn eve_gain(&self, i: usize) -> f64 {
        self.eve_gain[i]
    }

    pub fn check_user(&self, i: usize) -> Result<()> {
        if i >= self.users() {
            return Err(Error::IndexOutOfRange { index: i, users: self.users() });
        }
        Ok(())
    }

    /// Rows of the stacked pilot owned by user `i`.
    pub fn user_rows(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn user_row_list(&self, i: usize) -> Vec<usize> {
        self.user_rows(i).collect()
    }

    /// Rows of all users other than `i`, ascending.
    pub fn other_rows(&self, i: usize) -> Vec<usize> {
        let own = self.user_rows(i);
        (0..self.total_antennas()).filter(|r| !own.contains(r)).collect()
    }

    /// `(S_i, S̄_(i))` as explicit 0/1 matrices.
    pub fn selection(&self, i: usize) -> Result<(CMatrix, CMatrix)> {
        self.check_user(i)?;
        let n = self.total_antennas();
        Ok((
            linalg::selection_matrix(&self.user_row_list(i), n),
            linalg::selection_matrix(&self.other_rows(i), n),
        ))
    }

    /// All users share `N`, `P`, `σ²`, have `R_i = I` and `r = (M−1)N`.
    pub fn is_symmetric_isotropic(&self) -> bool {
        let Some(n) = self.common_antennas() else { return false };
        let same = |v: &[f64]| v.iter().all(|x| (x - v[0]).abs() <= 1e-12 * v[0].abs());
        same(&self.power)
            && same(&self.noise)
            && self.eig.iter().all(|e| e.values.iter().all(|l| (l - 1.0).abs() < 1e-12))
            && self.rank == (self.users() - 1) * n
    }

    /// `R̄^{H/2} = blockdiag(R_i^{H/2})`.
    pub fn stacked_sqrt_h(&self) -> CMatrix {
        self.block_diag(|e| e.sqrt.adjoint())
    }

    /// `R̄^{−H/2} = blockdiag(R_i^{−H/2})`.
    pub fn stacked_inv_sqrt_h(&self) -> CMatrix {
        self.block_diag(|e| e.inv_sqrt_h.clone())
    }

    fn block_diag(&self, f: impl Fn(&Eigenbasis) -> CMatrix) -> CMatrix {
        let n = self.total_antennas();
        let mut out = linalg::zeros(n, n);
        for (i, e) in self.eig.iter().enumerate() {
            let o = self.offsets[i];
            let b = f(e);
            out.view_mut((o, o), (b.nrows(), b.ncols())).copy_from(&b);
        }
        out
    }

    /// Pilot energy `Tr(S_i R̄^{−H/2} F Fᴴ R̄^{−1/2} S_iᵀ)` spent by user `i`.
    pub fn pilot_energy(&self, f: &CMatrix, i: usize) -> f64 {
        let rows = f.rows(self.offsets[i], self.antennas[i]);
        let whitened = &self.eig[i].inv_sqrt_h * rows;
        whitened.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `ψ_{P,i} = K·P_i − energy_i`.
    pub fn power_slack(&self, f: &CMatrix, i: usize) -> f64 {
        self.kp(i) - self.pilot_energy(f, i)
    }

    pub(crate) fn check_factor_rows(&self, f: &CMatrix) -> Result<()> {
        if f.nrows() != self.total_antennas() {
            return Err(Error::Dimension(format!(
                "pilot factor has {} rows, expected N_T = {}",
                f.nrows(),
                self.total_antennas()
            )));
        }
        Ok(())
    }
}

/// First `r` rows of the `K`-point DFT scaled by `1/√K`.
pub fn default_v(r: usize, k: usize) -> CMatrix {
    let q = dft_matrix(k);
    q.rows(0, r).into_owned() * cx(1.0 / (k as f64).sqrt(), 0.0)
}

/// The design variable `F̄` and the semi-unitary `V̄` completing the pilot.
#[derive(Clone, Debug, PartialEq)]
pub struct PilotFactor {
    f: CMatrix,
    v: CMatrix,
}

impl PilotFactor {
    pub fn new(f: CMatrix, v: CMatrix) -> Result<Self> {
        if f.ncols() != v.nrows() {
            return Err(Error::Dimension(format!(
                "F has {} columns but V has {} rows",
                f.ncols(),
                v.nrows()
            )));
        }
        let defect = frob(&(&v * v.adjoint() - linalg::identity(v.nrows())));
        if defect > SEMI_UNITARY_TOL {
            return Err(Error::InvalidConfig(format!("V is not semi-unitary (defect {defect:e})")));
        }
        Ok(PilotFactor { f, v })
    }

    /// Pairs `f` with [`default_v`] for the configured `r` and `K`.
    pub fn with_default_v(cfg: &NetworkConfig, f: CMatrix) -> Result<Self> {
        cfg.check_factor_rows(&f)?;
        if f.ncols() != cfg.rank() {
            return Err(Error::Dimension(format!(
                "pilot factor has {} columns, expected r = {}",
                f.ncols(),
                cfg.rank()
            )));
        }
        Self::new(f, default_v(cfg.rank(), cfg.pilot_len()))
    }

    pub fn f(&self) -> &CMatrix {
        &self.f
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    pub fn into_f(self) -> CMatrix {
        self.f
    }
}

/// The stacked pilot matrix `P̄` (`N_T × K`).
#[derive(Clone, Debug, PartialEq)]
pub struct StackedPilot {
    p: CMatrix,
}

impl StackedPilot {
    pub fn new(cfg: &NetworkConfig, p: CMatrix) -> Result<Self> {
        if p.nrows() != cfg.total_antennas() || p.ncols() != cfg.pilot_len() {
            return Err(Error::Dimension(format!(
                "pilot is {}x{}, expected {}x{}",
                p.nrows(),
                p.ncols(),
                cfg.total_antennas(),
                cfg.pilot_len()
            )));
        }
        Ok(StackedPilot { p })
    }

    pub fn p(&self) -> &CMatrix {
        &self.p
    }

    /// `P_i = S_i P̄`.
    pub fn block(&self, cfg: &NetworkConfig, i: usize) -> CMatrix {
        select_rows(&self.p, &cfg.user_row_list(i))
    }

    /// `Tr(P_i P_iᴴ)`.
    pub fn energy(&self, cfg: &NetworkConfig, i: usize) -> f64 {
        self.block(cfg, i).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        StackedPilot { p: &self.p * cx(s, 0.0) }
    }
}

/// `P̄ = R̄^{−T/2} F̄* V̄*`.
pub fn assemble_pilot(cfg: &NetworkConfig, pf: &PilotFactor) -> Result<StackedPilot> {
    cfg.check_factor_rows(pf.f())?;
    if pf.v().ncols() != cfg.pilot_len() {
        return Err(Error::Dimension(format!(
            "V has {} columns, expected K = {}",
            pf.v().ncols(),
            cfg.pilot_len()
        )));
    }
    // User block: conj(R_i^{−H/2} S_i F V).
    let fv = pf.f() * pf.v();
    let mut p = linalg::zeros(cfg.total_antennas(), cfg.pilot_len());
    for i in 0..cfg.users() {
        let rows = cfg.user_rows(i);
        let block = &cfg.eigenbasis(i).inv_sqrt_h * fv.rows(rows.start, rows.len());
        p.rows_mut(rows.start, rows.len()).copy_from(&block.conjugate());
    }
    StackedPilot::new(cfg, p)
}

/// Recovers `F̄ = R̄^{H/2} P̄* V̄ᴴ` from a stacked pilot.
pub fn factor_from_pilot(cfg: &NetworkConfig, sp: &StackedPilot, v: &CMatrix) -> Result<PilotFactor> {
    if v.ncols() != cfg.pilot_len() {
        return Err(Error::Dimension(format!(
            "V has {} columns, expected K = {}",
            v.ncols(),
            cfg.pilot_len()
        )));
    }
    let f = cfg.stacked_sqrt_h() * sp.p().conjugate() * v.adjoint();
    PilotFactor::new(f, v.clone())
}

/// Outcome of checking the ANECE rank conditions on a stacked pilot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    /// `rank(P̄)`.
    pub rank_total: usize,
    /// `rank(P̄_(i))` for every user.
    pub rank_excluding: Vec<usize>,
    /// Every user's channels are identifiable: `rank(P̄_(i)) = N_T − N_i`.
    pub identifiable: bool,
    /// Eve is left with an unobservable subspace: `rank(P̄) = r ≤ N_T − 1`.
    pub eve_blind: bool,
    /// Users whose `P̄_(i)` lost rank.
    pub deficient_users: Vec<usize>,
}

impl RankReport {
    pub fn passes(&self) -> bool {
        self.identifiable && self.eve_blind
    }
}

pub fn validate_anece(cfg: &NetworkConfig, sp: &StackedPilot) -> RankReport {
    let n_t = cfg.total_antennas();
    let rank_total = numerical_rank(sp.p());
    let mut rank_excluding = Vec::with_capacity(cfg.users());
    let mut deficient_users = Vec::new();
    for i in 0..cfg.users() {
        let rk = numerical_rank(&select_rows(sp.p(), &cfg.other_rows(i)));
        if rk != n_t - cfg.antennas(i) {
            deficient_users.push(i);
        }
        rank_excluding.push(rk);
    }
    RankReport {
        rank_total,
        rank_excluding,
        identifiable: deficient_users.is_empty(),
        eve_blind: rank_total == cfg.rank() && rank_total < n_t,
        deficient_users,
    }
}

/// Per-user value that may be given once for everyone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser<T> {
    Shared(T),
    Each(Vec<T>),
}

impl<T: Clone> PerUser<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            PerUser::Shared(x) => vec![x.clone()],
            PerUser::Each(v) => v.clone(),
        }
    }
}

/// JSON configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    #[serde(rename = "M")]
    pub users: usize,
    #[serde(rename = "N")]
    pub antennas: PerUser<usize>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PerUser<f64>>,
    #[serde(rename = "KP_dB", default, skip_serializing_if = "Option::is_none")]
    pub kp_db: Option<PerUser<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<PerUser<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<PerUser<f64>>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Vec<MatrixRecord>>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub pilot_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(rename = "N_E", default, skip_serializing_if = "Option::is_none")]
    pub eve_antennas: Option<usize>,
    #[serde(rename = "sigmaE2", default, skip_serializing_if = "Option::is_none")]
    pub eve_gain: Option<PerUser<f64>>,
}

impl ConfigSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<NetworkConfig> {
        let m = self.users;
        let antennas = match &self.antennas {
            PerUser::Shared(n) => vec![*n; m],
            PerUser::Each(v) => {
                if v.len() != m {
                    return Err(Error::InvalidConfig(format!("N has {} entries for {m} users", v.len())));
                }
                v.clone()
            }
        };
        let mut b = NetworkConfig::builder(antennas);
        b = match (&self.power, &self.kp_db) {
            (Some(p), None) => b.power(p.to_vec()),
            (None, Some(db)) => b.kp_db(db.to_vec()),
            _ => {
                return Err(Error::InvalidConfig("exactly one of P and KP_dB must be given".into()))
            }
        };
        if let Some(s) = &self.sigma2 {
            b = b.noise(s.to_vec());
        }
        match (&self.rho, &self.correlation) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig("rho and R are mutually exclusive".into()))
            }
            (Some(rho), None) => b = b.rho(rho.to_vec()),
            (None, Some(r)) => {
                b = b.correlation(r.iter().map(MatrixRecord::to_matrix).collect::<Result<_>>()?)
            }
            (None, None) => {}
        }
        if let Some(k) = self.pilot_len {
            b = b.pilot_len(k);
        }
        if let Some(r) = self.r {
            b = b.rank(r);
        }
        let gain = self.eve_gain.as_ref().map(PerUser::to_vec).unwrap_or_else(|| vec![1.0]);
        b = b.eve(self.eve_antennas.unwrap_or(1), gain);
        b.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_correlation_values() {
        assert_eq!(exp_correlation(2, 0.0).unwrap(), linalg::identity(2));
        let r = exp_correlation(2, 0.5).unwrap();
        assert_eq!(r[(0, 1)], cx(0.5, 0.0));
        assert!(exp_correlation(2, 1.0).is_err());
    }

    #[test]
    fn selection_two_single_antenna_users() {
        let cfg = NetworkConfig::symmetric(2, 1, 0.0, 0.0).unwrap();
        let (s, sbar) = cfg.selection(0).unwrap();
        assert_eq!(s, CMatrix::from_row_slice(1, 2, &[cx(1., 0.), cx(0., 0.)]));
        assert_eq!(sbar, CMatrix::from_row_slice(1, 2, &[cx(0., 0.), cx(1., 0.)]));
        assert!(matches!(cfg.selection(2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn builder_rejects_bad_rank_and_length() {
        assert!(NetworkConfig::builder(vec![2, 2]).kp_db(vec![10.0]).rank(4).build().is_err());
        assert!(NetworkConfig::builder(vec![2, 2]).kp_db(vec![10.0]).rank(1).build().is_err());
        assert!(NetworkConfig::builder(vec![2, 2]).kp_db(vec![10.0]).pilot_len(1).build().is_err());
        assert!(NetworkConfig::builder(vec![2]).kp_db(vec![10.0]).build().is_err());
    }

    #[test]
    fn kp_db_resolves_through_default_pilot_length() {
        let cfg = NetworkConfig::symmetric(3, 2, 20.0, 0.0).unwrap();
        assert_eq!(cfg.rank(), 4);
        assert_eq!(cfg.pilot_len(), 4);
        assert!((cfg.kp(1) - 100.0).abs() < 1e-12);
        assert!(cfg.is_symmetric_isotropic());
    }

    #[test]
    fn config_json_round_trip() {
        let text = r#"{"M": 3, "N": [2, 2, 1], "KP_dB": 20, "sigma2": [1, 0.6, 0.1], "rho": 0.5, "N_E": 2}"#;
        let spec = ConfigSpec::from_json(text).unwrap();
        let cfg = spec.build().unwrap();
        assert_eq!(cfg.total_antennas(), 5);
        assert_eq!(cfg.rank(), 4);
        assert_eq!(cfg.eve_antennas(), 2);
        assert!((cfg.noise(2) - 0.1).abs() < 1e-15);
        let again: ConfigSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
        assert!(ConfigSpec::from_json(r#"{"M": 2, "N": 1}"#).unwrap().build().is_err());
    }

    #[test]
    fn explicit_correlation_must_have_unit_average_eigenvalues() {
        let r = linalg::identity(2) * cx(2.0, 0.0);
        let err = NetworkConfig::builder(vec![2, 2])
            .kp_db(vec![10.0])
            .correlation(vec![r.clone(), r])
            .build();
        assert!(err.is_err());
    }

    #[test]
    fn zero_pilot_fails_both_conditions() {
        let cfg = NetworkConfig::symmetric(3, 2, 10.0, 0.0).unwrap();
        let sp = StackedPilot::new(&cfg, linalg::zeros(6, 4)).unwrap();
        let rep = validate_anece(&cfg, &sp);
        assert!(!rep.identifiable && !rep.eve_blind);
        assert_eq!(rep.deficient_users, vec![0, 1, 2]);
    }

    #[test]
    fn default_v_is_semi_unitary() {
        let v = default_v(3, 5);
        assert!(frob(&(&v * v.adjoint() - linalg::identity(3))) < 1e-12);
    }
}
