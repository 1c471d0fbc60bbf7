//! Log-barrier gradient descent over the pilot factor.
//!
//! [`minimize_barrier`] works on any [`BarrierProblem`]; the four pilot
//! designs (sum MSE, sum MI, min-max MSE, min-max MI) are provided as
//! problem types with `solve_*` wrappers.
//!
//! The objective is divided by its magnitude at the starting point, so `t0`,
//! `eps1` and `eps2` are scale-free. The outer loop stops once
//! `m / t < eps1`, i.e. when the barrier gap is below `eps1` relative to the
//! starting objective. Each centering step runs gradient descent with a
//! Barzilai-Borwein trial step and Armijo backtracking, and stops when the
//! gradient change between iterations falls below `eps2` times the gradient
//! norm at the start of that centering step.

use serde::{Deserialize, Serialize};

use crate::closed_form::{baseline_first_factor, dft_scaled_factor, scale_to_budget};
use crate::error::{Error, Result};
use crate::gradients::{grad_fairness, grad_g1, grad_g2, FairnessMode};
use crate::linalg::{cx, inner_re, CMatrix};
use crate::metrics::{sum_mi, user_mse};
use crate::model::{assemble_pilot, validate_anece, NetworkConfig, PilotFactor, RankReport};

/// Parameters of the barrier method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierSettings {
    pub t0: f64,
    pub mu: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Inner iteration cap per centering step.
    #[serde(rename = "Np")]
    pub max_inner: usize,
    pub max_outer: usize,
    pub ls_alpha: f64,
    pub ls_beta: f64,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        BarrierSettings {
            t0: 1.0,
            mu: 10.0,
            eps1: 1e-6,
            eps2: 1e-6,
            max_inner: 500,
            max_outer: 60,
            ls_alpha: 0.3,
            ls_beta: 0.5,
        }
    }
}

impl BarrierSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t0 > 0.0
            && self.mu > 1.0
            && self.eps1 > 0.0
            && self.eps2 > 0.0
            && self.max_inner > 0
            && self.max_outer > 0
            && self.ls_alpha > 0.0
            && self.ls_alpha < 0.5
            && self.ls_beta > 0.0
            && self.ls_beta < 1.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("invalid barrier settings {self:?}")));
        }
        Ok(())
    }
}

/// A point of the descent: the pilot factor and, for min-max designs, the
/// epigraph variable `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignPoint {
    pub eps: Option<f64>,
    pub factor: CMatrix,
}

impl DesignPoint {
    pub fn factor_only(factor: CMatrix) -> Self {
        DesignPoint { eps: None, factor }
    }

    fn dot(&self, other: &DesignPoint) -> f64 {
        inner_re(&self.factor, &other.factor) + self.eps.unwrap_or(0.0) * other.eps.unwrap_or(0.0)
    }

    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self + s · dir`.
    fn step(&self, s: f64, dir: &DesignPoint) -> DesignPoint {
        DesignPoint {
            eps: self.eps.map(|e| e + s * dir.eps.unwrap_or(0.0)),
            factor: &self.factor + &dir.factor * cx(s, 0.0),
        }
    }

    /// `self − other`.
    fn minus(&self, other: &DesignPoint) -> DesignPoint {
        self.step(-1.0, other)
    }
}

/// Per-iterate health data reported by a problem.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub power_slack: Vec<f64>,
    pub rank: Option<RankReport>,
}

/// An inequality-constrained minimization handled by the barrier method.
pub trait BarrierProblem {
    /// Number of inequality constraints `m`.
    fn constraint_count(&self) -> usize;

    /// The objective `f(x)` without barrier terms.
    fn objective(&self, x: &DesignPoint) -> Result<f64>;

    /// `weight · f(x) + Σ −ln(slack)` and its gradient, or `None` when `x` is
    /// not strictly feasible.
    fn evaluate(&self, x: &DesignPoint, weight: f64) -> Result<Option<(f64, DesignPoint)>>;

    fn diagnostics(&self, _x: &DesignPoint) -> Diagnostics {
        Diagnostics::default()
    }
}

/// One centering step of the barrier method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub t: f64,
    pub objective: f64,
    pub barrier: f64,
    pub inner_iterations: usize,
    /// The gradient-change criterion was met.
    pub inner_converged: bool,
    /// Backtracking could not make progress at working precision.
    pub stalled: bool,
    /// Smallest Armijo margin `g + α γ ∇gᵀd − g_new` over accepted steps.
    pub min_armijo_margin: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub outer: Vec<OuterRecord>,
    /// The outer gap criterion was met.
    pub converged: bool,
    pub total_inner: usize,
    /// Users whose effective pilot lost rank at the returned point.
    pub rank_collapse: Option<Vec<usize>>,
}

struct Centering {
    iterations: usize,
    converged: bool,
    stalled: bool,
    min_margin: f64,
}

fn center<P: BarrierProblem>(
    problem: &P,
    x: &mut DesignPoint,
    weight: f64,
    settings: &BarrierSettings,
    step_hint: &mut f64,
) -> Result<Centering> {
    let (mut value, mut grad) = problem
        .evaluate(x, weight)?
        .ok_or_else(|| Error::Infeasible("iterate left the strict interior".into()))?;
    let start_norm = grad.norm();
    let mut out = Centering { iterations: 0, converged: false, stalled: false, min_margin: f64::INFINITY };
    if start_norm == 0.0 {
        out.converged = true;
        return Ok(out);
    }
    let mut previous: Option<(DesignPoint, DesignPoint)> = None;
    while out.iterations < settings.max_inner {
        let gnorm2 = grad.dot(&grad);
        if gnorm2 == 0.0 {
            out.converged = true;
            break;
        }
        let mut gamma = match &previous {
            Some((xp, gp)) => {
                let s = x.minus(xp);
                let y = grad.minus(gp);
                let sy = s.dot(&y);
                if sy > 0.0 {
                    s.dot(&s) / sy
                } else {
                    *step_hint * 2.0
                }
            }
            None => *step_hint,
        };
        let x_scale = x.norm().max(f64::MIN_POSITIVE);
        let accepted = loop {
            if gamma * gnorm2.sqrt() <= 1e-15 * x_scale {
                break None;
            }
            let trial = x.step(-gamma, &grad);
            match problem.evaluate(&trial, weight)? {
                Some((v, g)) if v <= value - settings.ls_alpha * gamma * gnorm2 => {
                    break Some((trial, v, g));
                }
                _ => gamma *= settings.ls_beta,
            }
        };
        let Some((trial, v, g)) = accepted else {
            out.stalled = true;
            break;
        };
        out.min_margin = out.min_margin.min(value - settings.ls_alpha * gamma * gnorm2 - v);
        *step_hint = gamma;
        let change = g.minus(&grad).norm();
        previous = Some((std::mem::replace(x, trial), std::mem::replace(&mut grad, g)));
        value = v;
        out.iterations += 1;
        if change <= settings.eps2 * start_norm {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}

/// `argmin_t ‖t∇f + ∇φ‖` at `x`, the barrier weight for which `x` is closest
/// to centered. Zero when the objective gradient vanishes.
fn centering_t<P: BarrierProblem>(problem: &P, x: &DesignPoint, scale: f64) -> Result<f64> {
    let phi = problem.evaluate(x, 0.0)?;
    let both = problem.evaluate(x, 1.0 / scale)?;
    let (Some((_, gphi)), Some((_, gboth))) = (phi, both) else {
        return Ok(0.0);
    };
    let gf = gboth.minus(&gphi);
    let nf = gf.dot(&gf);
    let t = -gf.dot(&gphi) / nf;
    Ok(if nf > 0.0 && t.is_finite() { t } else { 0.0 })
}

/// Runs the barrier method from a strictly feasible `x0`.
///
/// The first barrier weight is `t0` or the centering weight of `x0`,
/// whichever is larger.
pub fn minimize_barrier<P: BarrierProblem>(
    problem: &P,
    x0: DesignPoint,
    settings: &BarrierSettings,
) -> Result<(DesignPoint, SolveTrace)> {
    settings.validate()?;
    if problem.evaluate(&x0, 0.0)?.is_none() {
        return Err(Error::Infeasible("starting point is not strictly feasible".into()));
    }
    let f0 = problem.objective(&x0)?;
    let scale = if f0.abs() > 0.0 && f0.is_finite() { f0.abs() } else { 1.0 };
    let m = problem.constraint_count() as f64;
    let mut t = settings.t0.max(centering_t(problem, &x0, scale)?);
    let mut x = x0;
    let mut trace = SolveTrace::default();
    let mut step_hint = 1e-2 * x.norm().max(1.0)
        / problem.evaluate(&x, t / scale)?.map(|(_, g)| g.norm()).unwrap_or(1.0).max(f64::MIN_POSITIVE);
    for _ in 0..settings.max_outer {
        let c = center(problem, &mut x, t / scale, settings, &mut step_hint)?;
        let barrier = problem.evaluate(&x, 0.0)?.map(|(v, _)| v).unwrap_or(f64::INFINITY);
        trace.total_inner += c.iterations;
        trace.outer.push(OuterRecord {
            t,
            objective: problem.objective(&x)?,
            barrier,
            inner_iterations: c.iterations,
            inner_converged: c.converged,
            stalled: c.stalled,
            min_armijo_margin: c.min_margin,
            diagnostics: problem.diagnostics(&x),
        });
        if m / t < settings.eps1 {
            trace.converged = true;
            break;
        }
        t *= settings.mu;
    }
    Ok((x, trace))
}

fn power_feasible(cfg: &NetworkConfig, f: &CMatrix) -> bool {
    (0..cfg.users()).all(|i| cfg.power_slack(f, i) > 0.0)
}

fn pilot_diagnostics(cfg: &NetworkConfig, f: &CMatrix) -> Diagnostics {
    let rank = PilotFactor::with_default_v(cfg, f.clone())
        .and_then(|pf| assemble_pilot(cfg, &pf))
        .map(|sp| validate_anece(cfg, &sp))
        .ok();
    Diagnostics { power_slack: (0..cfg.users()).map(|i| cfg.power_slack(f, i)).collect(), rank }
}

fn infeasible_as_none<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Minimize `J_M` subject to the per-user power budgets.
pub struct SumMseProblem<'a> {
    pub cfg: &'a NetworkConfig,
}

impl BarrierProblem for SumMseProblem<'_> {
    fn constraint_count(&self) -> usize {
        self.cfg.users()
    }

    fn objective(&self, x: &DesignPoint) -> Result<f64> {
        Ok(user_mse(self.cfg, &x.factor)?.1)
    }

    fn evaluate(&self, x: &DesignPoint, weight: f64) -> Result<Option<(f64, DesignPoint)>> {
        if !power_feasible(self.cfg, &x.factor) {
            return Ok(None);
        }
        let g = grad_g1(self.cfg, &x.factor, weight)?;
        Ok(Some((g.value, DesignPoint::factor_only(g.gradient))))
    }

    fn diagnostics(&self, x: &DesignPoint) -> Diagnostics {
        pilot_diagnostics(self.cfg, &x.factor)
    }
}

/// Maximize `I_M` subject to the per-user power budgets (objective `−I_M`).
pub struct SumMiProblem<'a> {
    pub cfg: &'a NetworkConfig,
}

impl BarrierProblem for SumMiProblem<'_> {
    fn constraint_count(&self) -> usize {
        self.cfg.users()
    }

    fn objective(&self, x: &DesignPoint) -> Result<f64> {
        Ok(-sum_mi(self.cfg, &x.factor)?.1)
    }

    fn evaluate(&self, x: &DesignPoint, weight: f64) -> Result<Option<(f64, DesignPoint)>> {
        if !power_feasible(self.cfg, &x.factor) {
            return Ok(None);
        }
        let g = grad_g2(self.cfg, &x.factor, weight)?;
        Ok(Some((g.value, DesignPoint::factor_only(g.gradient))))
    }

    fn diagnostics(&self, x: &DesignPoint) -> Diagnostics {
        pilot_diagnostics(self.cfg, &x.factor)
    }
}

/// Epigraph form of the min-max designs: minimize `ε` subject to the power
/// budgets and `MSE_i ≤ ε` (MSE mode) or `−MI_ij ≤ ε` (MI mode).
///
/// The descent coordinate is `e = ε / eps_unit`.
pub struct FairnessProblem<'a> {
    pub cfg: &'a NetworkConfig,
    pub mode: FairnessMode,
    pub eps_unit: f64,
}

impl FairnessProblem<'_> {
    /// Unit making `ε` and `F̄` comparable in size at the start point.
    pub fn unit_for(eps0: f64, f0: &CMatrix) -> f64 {
        let f = crate::linalg::frob(f0);
        if eps0 != 0.0 && f > 0.0 {
            eps0.abs() / f
        } else {
            1.0
        }
    }
}

impl BarrierProblem for FairnessProblem<'_> {
    fn constraint_count(&self) -> usize {
        let m = self.cfg.users();
        match self.mode {
            FairnessMode::Mse => 2 * m,
            FairnessMode::Mi => m + m * (m - 1) / 2,
        }
    }

    fn objective(&self, x: &DesignPoint) -> Result<f64> {
        x.eps
            .map(|e| e * self.eps_unit)
            .ok_or_else(|| Error::InvalidConfig("fairness design point lacks ε".into()))
    }

    fn evaluate(&self, x: &DesignPoint, weight: f64) -> Result<Option<(f64, DesignPoint)>> {
        let eps = self.objective(x)?;
        if !power_feasible(self.cfg, &x.factor) {
            return Ok(None);
        }
        Ok(infeasible_as_none(grad_fairness(self.cfg, &x.factor, eps, self.mode, weight))?
            .map(|g| (g.value, DesignPoint { eps: Some(g.d_eps * self.eps_unit), factor: g.gradient })))
    }

    fn diagnostics(&self, x: &DesignPoint) -> Diagnostics {
        pilot_diagnostics(self.cfg, &x.factor)
    }
}

/// Fraction of each budget used by the solver's starting point.
pub const START_FRACTION: f64 = 0.999;

/// Result of a pilot design solve.
#[derive(Clone, Debug)]
pub struct Solution {
    pub factor: PilotFactor,
    /// Final `ε` for min-max designs.
    pub eps: Option<f64>,
    pub trace: SolveTrace,
}

fn finish(cfg: &NetworkConfig, x: DesignPoint, eps: Option<f64>, mut trace: SolveTrace) -> Result<Solution> {
    let factor = PilotFactor::with_default_v(cfg, x.factor)?;
    let rep = validate_anece(cfg, &assemble_pilot(cfg, &factor)?);
    if !rep.passes() {
        let mut users = rep.deficient_users.clone();
        if users.is_empty() {
            users = (0..cfg.users()).collect();
        }
        trace.rank_collapse = Some(users);
    }
    Ok(Solution { factor, eps, trace })
}

/// Default starting factor: the baseline pilots pulled into the interior.
pub fn default_start(cfg: &NetworkConfig) -> Result<CMatrix> {
    scale_to_budget(cfg, baseline_first_factor(cfg)?.f(), START_FRACTION)
}

/// Starting factor of the min-max designs: `√D Q̄_m` pulled into the interior,
/// or the baseline start when antenna counts differ.
pub fn fairness_start(cfg: &NetworkConfig, m: usize) -> Result<CMatrix> {
    match dft_scaled_factor(cfg, m) {
        Ok(pf) => scale_to_budget(cfg, pf.f(), START_FRACTION),
        Err(Error::Unsupported(_)) => default_start(cfg),
        Err(e) => Err(e),
    }
}

pub fn solve_min_sum_mse(cfg: &NetworkConfig, settings: &BarrierSettings) -> Result<Solution> {
    solve_min_sum_mse_from(cfg, default_start(cfg)?, settings)
}

pub fn solve_min_sum_mse_from(cfg: &NetworkConfig, f0: CMatrix, settings: &BarrierSettings) -> Result<Solution> {
    cfg.check_factor_rows(&f0)?;
    let (x, trace) = minimize_barrier(&SumMseProblem { cfg }, DesignPoint::factor_only(f0), settings)?;
    finish(cfg, x, None, trace)
}

pub fn solve_max_sum_mi(cfg: &NetworkConfig, settings: &BarrierSettings) -> Result<Solution> {
    solve_max_sum_mi_from(cfg, default_start(cfg)?, settings)
}

pub fn solve_max_sum_mi_from(cfg: &NetworkConfig, f0: CMatrix, settings: &BarrierSettings) -> Result<Solution> {
    cfg.check_factor_rows(&f0)?;
    let (x, trace) = minimize_barrier(&SumMiProblem { cfg }, DesignPoint::factor_only(f0), settings)?;
    finish(cfg, x, None, trace)
}

/// Relative inflation of the initial `ε` for strict feasibility.
pub const EPS_INFLATION: f64 = 0.01;

fn fairness_eps0(cfg: &NetworkConfig, f: &CMatrix, mode: FairnessMode) -> Result<f64> {
    let v = match mode {
        FairnessMode::Mse => user_mse(cfg, f)?.0.into_iter().fold(f64::NEG_INFINITY, f64::max),
        FairnessMode::Mi => -sum_mi(cfg, f)?.0.iter().map(|p| p.value).fold(f64::INFINITY, f64::min),
    };
    Ok(v + EPS_INFLATION * v.abs().max(f64::MIN_POSITIVE))
}

pub fn solve_minmax(cfg: &NetworkConfig, mode: FairnessMode, m: usize, settings: &BarrierSettings) -> Result<Solution> {
    solve_minmax_from(cfg, mode, fairness_start(cfg, m)?, settings)
}

pub fn solve_minmax_from(
    cfg: &NetworkConfig,
    mode: FairnessMode,
    f0: CMatrix,
    settings: &BarrierSettings,
) -> Result<Solution> {
    cfg.check_factor_rows(&f0)?;
    let eps = fairness_eps0(cfg, &f0, mode)?;
    let problem = FairnessProblem { cfg, mode, eps_unit: FairnessProblem::unit_for(eps, &f0) };
    let x0 = DesignPoint { eps: Some(eps / problem.eps_unit), factor: f0 };
    let (x, trace) = minimize_barrier(&problem, x0, settings)?;
    let eps = problem.objective(&x)?;
    finish(cfg, x, Some(eps), trace)
}

pub fn solve_minmax_mse(cfg: &NetworkConfig, settings: &BarrierSettings) -> Result<Solution> {
    solve_minmax(cfg, FairnessMode::Mse, 0, settings)
}

pub fn solve_minmax_mi(cfg: &NetworkConfig, settings: &BarrierSettings) -> Result<Solution> {
    solve_minmax(cfg, FairnessMode::Mi, 0, settings)
}
