//! Two-user pilot design through per-stream power allocation.
//!
//! With `M = 2` the sum MSE and the pair MI depend on the pilot factor only
//! through the stream powers `c₁ ∈ ℝ^{N₁}`, `c₂ ∈ ℝ^{N₂}` (in each user's
//! correlation eigenbasis), with budgets `Σc_i ≤ KP_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cx, zeros};
use crate::model::{NetworkConfig, PilotFactor};

/// Streams are never driven below this fraction of the budget.
pub const STREAM_FLOOR: f64 = 1e-12;

const BISECTION_STEPS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
}

impl PowerAllocation {
    pub fn uniform(cfg: &NetworkConfig) -> Result<Self> {
        check_two_users(cfg)?;
        let flat = |i: usize| vec![cfg.kp(i) / cfg.antennas(i) as f64; cfg.antennas(i)];
        Ok(PowerAllocation { c1: flat(0), c2: flat(1) })
    }

    pub fn user(&self, i: usize) -> &[f64] {
        if i == 0 {
            &self.c1
        } else {
            &self.c2
        }
    }

    fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        check_two_users(cfg)?;
        for i in 0..2 {
            let c = self.user(i);
            if c.len() != cfg.antennas(i) {
                return Err(Error::Dimension(format!(
                    "user {i} allocation has {} streams, expected {}",
                    c.len(),
                    cfg.antennas(i)
                )));
            }
            if c.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::InvalidConfig(format!("user {i} allocation must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}

fn check_two_users(cfg: &NetworkConfig) -> Result<()> {
    if cfg.users() != 2 {
        return Err(Error::Unsupported(format!("two-user solver called with M = {}", cfg.users())));
    }
    Ok(())
}

/// Bisects a decreasing function `g` for `g(x) = target` on `[lo, hi]`.
fn bisect_decreasing(g: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    if g(hi) >= target {
        return hi;
    }
    if g(lo) <= target {
        return lo;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Water-filling over streams: finds the multiplier at which the per-stream
/// solutions `stream(level)` (each nonincreasing in `level`) spend `budget`,
/// then floors and rescales them onto the budget exactly.
fn fill_budget(n: usize, budget: f64, level_max: f64, stream: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    let spend = |level: f64| (0..n).map(|k| stream(k, level)).sum::<f64>();
    let (mut lo, mut hi) = (0.0f64, level_max.max(f64::MIN_POSITIVE));
    for _ in 0..BISECTION_STEPS {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        if mid <= lo || mid >= hi {
            break;
        }
        if spend(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-15 * hi {
            break;
        }
    }
    let level = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
    let floor = STREAM_FLOOR * budget;
    let mut c: Vec<f64> = (0..n).map(|k| stream(k, level).max(floor)).collect();
    let total: f64 = c.iter().sum();
    let free: f64 = c.iter().filter(|&&x| x > floor).sum();
    if free > 0.0 {
        let s = (budget - (total - free)) / free;
        c.iter_mut().filter(|x| **x > floor).for_each(|x| *x *= s);
    }
    c
}

/// Optimal `c_j` for the MSE of the user observing `j`: minimizes
/// `Σ_l Σ_k 1/(1 + λ̃_{i,l} λ̃_{j,k} c_{j,k}/σ_i²)` over `Σc_j = KP_j`.
fn mse_streams(cfg: &NetworkConfig, observer: usize, sender: usize) -> Vec<f64> {
    let lam_i = cfg.eigenvalues(observer);
    let lam_j = cfg.eigenvalues(sender);
    let s2 = cfg.noise(observer);
    let budget = cfg.kp(sender);
    let a = |l: usize, k: usize| lam_i[l] * lam_j[k] / s2;
    let h = |k: usize, c: f64| (0..lam_i.len()).map(|l| a(l, k) / (1.0 + a(l, k) * c).powi(2)).sum::<f64>();
    let top = (0..lam_j.len()).map(|k| h(k, 0.0)).fold(0.0, f64::max);
    fill_budget(lam_j.len(), budget, top, |k, nu| bisect_decreasing(|c| h(k, c), nu, 0.0, budget))
}

/// Minimizes `J₂` exactly: the two users' allocations decouple.
pub fn mse_decoupled_allocation(cfg: &NetworkConfig) -> Result<PowerAllocation> {
    check_two_users(cfg)?;
    Ok(PowerAllocation { c1: mse_streams(cfg, 1, 0), c2: mse_streams(cfg, 0, 1) })
}

/// Natural-log MI kernel for one stream pair with `x = c_{1,l}`,
/// `y = c_{2,k}`, `a = λ̃_{1,l}λ̃_{2,k}`.
#[derive(Clone, Copy)]
struct Kernel {
    a: f64,
    s1: f64,
    s2: f64,
}

impl Kernel {
    fn denom(&self, x: f64, y: f64) -> f64 {
        self.s1 * self.s2 + self.s1 * self.a * x + self.s2 * self.a * y
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        let (a, s1, s2) = (self.a, self.s1, self.s2);
        ((s2 + a * x).ln() + (s1 + a * y).ln() - self.denom(x, y).ln()) / std::f64::consts::LN_2
    }

    fn dx(&self, x: f64, y: f64) -> f64 {
        self.s2 * self.a * self.a * y / ((self.s2 + self.a * x) * self.denom(x, y))
    }

    fn dy(&self, x: f64, y: f64) -> f64 {
        self.s1 * self.a * self.a * x / ((self.s1 + self.a * y) * self.denom(x, y))
    }
}

fn kernels(cfg: &NetworkConfig) -> Vec<Vec<Kernel>> {
    let (l1, l2) = (cfg.eigenvalues(0), cfg.eigenvalues(1));
    let (s1, s2) = (cfg.noise(0), cfg.noise(1));
    l1.iter().map(|&a1| l2.iter().map(|&a2| Kernel { a: a1 * a2, s1, s2 }).collect()).collect()
}

fn pair_mi(kern: &[Vec<Kernel>], c1: &[f64], c2: &[f64]) -> f64 {
    kern.iter()
        .enumerate()
        .map(|(l, row)| row.iter().enumerate().map(|(k, kk)| kk.value(c1[l], c2[k])).sum::<f64>())
        .sum()
}

fn mi_half_step(kern: &[Vec<Kernel>], fixed: &[f64], budget: f64, first: bool) -> Vec<f64> {
    let n = if first { kern.len() } else { kern[0].len() };
    let grad = |s: usize, x: f64| -> f64 {
        if first {
            kern[s].iter().zip(fixed).map(|(kk, &y)| kk.dx(x, y)).sum()
        } else {
            kern.iter().zip(fixed).map(|(row, &y)| row[s].dy(y, x)).sum()
        }
    };
    let eps = STREAM_FLOOR * budget;
    let top = (0..n).map(|s| grad(s, eps)).fold(0.0, f64::max);
    fill_budget(n, budget, top, |s, mu| bisect_decreasing(|x| grad(s, x), mu, 0.0, budget))
}

/// Outcome of the alternating MI allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiAllocation {
    pub allocation: PowerAllocation,
    /// `I₂` in bits.
    pub i2: f64,
    /// `I₂` after each outer iteration, starting from the uniform point.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub const MI_MAX_ITERATIONS: usize = 10_000;

/// Alternating bisection: solves the `c₁` subproblem for fixed `c₂`, then the
/// `c₂` subproblem for fixed `c₁`, until `‖Δc‖ ≤ tol · max KP`.
pub fn mi_alternating_bisection(cfg: &NetworkConfig, tol: f64) -> Result<MiAllocation> {
    check_two_users(cfg)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    let kern = kernels(cfg);
    let start = PowerAllocation::uniform(cfg)?;
    let (mut c1, mut c2) = (start.c1, start.c2);
    let scale = cfg.kp(0).max(cfg.kp(1));
    let mut history = vec![pair_mi(&kern, &c1, &c2)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MI_MAX_ITERATIONS {
        let n1 = mi_half_step(&kern, &c2, cfg.kp(0), true);
        let n2 = mi_half_step(&kern, &n1, cfg.kp(1), false);
        let change = c1.iter().zip(&n1).chain(c2.iter().zip(&n2)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        c1 = n1;
        c2 = n2;
        iterations += 1;
        history.push(pair_mi(&kern, &c1, &c2));
        if change <= tol * scale {
            converged = true;
            break;
        }
    }
    let i2 = *history.last().unwrap();
    Ok(MiAllocation { allocation: PowerAllocation { c1, c2 }, i2, history, iterations, converged })
}

/// `(J₂, I₂)` of an allocation.
pub fn two_user_objective(cfg: &NetworkConfig, alloc: &PowerAllocation) -> Result<(f64, f64)> {
    alloc.check(cfg)?;
    let mse_of = |obs: usize, snd: usize| -> f64 {
        let (li, lj, s2) = (cfg.eigenvalues(obs), cfg.eigenvalues(snd), cfg.noise(obs));
        let c = alloc.user(snd);
        li.iter().map(|a| lj.iter().zip(c).map(|(b, x)| 1.0 / (1.0 + a * b * x / s2)).sum::<f64>()).sum()
    };
    let j2 = mse_of(0, 1) + mse_of(1, 0);
    let i2 = pair_mi(&kernels(cfg), &alloc.c1, &alloc.c2);
    Ok((j2, i2))
}

/// Pilot factor realizing an allocation: `S_iF̄ = [diag(√(c_i λ̃_i)), 0]`.
pub fn assemble_two_user_pilot(cfg: &NetworkConfig, alloc: &PowerAllocation) -> Result<PilotFactor> {
    alloc.check(cfg)?;
    let r = cfg.rank();
    let need = cfg.antennas(0).max(cfg.antennas(1));
    if r < need {
        return Err(Error::InvalidConfig(format!("rank {r} is below max(N₁, N₂) = {need}")));
    }
    let mut f = zeros(cfg.total_antennas(), r);
    for i in 0..2 {
        let lam = cfg.eigenvalues(i);
        for (l, (&c, &lt)) in alloc.user(i).iter().zip(lam).enumerate() {
            f[(cfg.user_rows(i).start + l, l)] = cx((c * lt).sqrt(), 0.0);
        }
    }
    PilotFactor::with_default_v(cfg, f)
}

/// Per-pair convexity check of the negated MI kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianCertificate {
    /// Every pair satisfies `c_{1,l}c_{2,k} ≥ σ₁²σ₂²/(2λ̃_{1,l}²λ̃_{2,k}²)`.
    pub convex: bool,
    /// Smallest ratio of the left side to the right side.
    pub min_ratio: f64,
}

pub fn hessian_certificate(cfg: &NetworkConfig, alloc: &PowerAllocation) -> Result<HessianCertificate> {
    alloc.check(cfg)?;
    let (l1, l2) = (cfg.eigenvalues(0), cfg.eigenvalues(1));
    let s = cfg.noise(0) * cfg.noise(1);
    let mut min_ratio = f64::INFINITY;
    for (a, x) in l1.iter().zip(&alloc.c1) {
        for (b, y) in l2.iter().zip(&alloc.c2) {
            min_ratio = min_ratio.min(x * y * 2.0 * (a * b).powi(2) / s);
        }
    }
    Ok(HessianCertificate { convex: min_ratio >= 1.0, min_ratio })
}

/// Limiting MI allocations for very high and very low power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticRegime {
    Uniform,
    SingleStream,
}

pub fn theorem4_reference(cfg: &NetworkConfig, regime: AsymptoticRegime) -> Result<PowerAllocation> {
    match regime {
        AsymptoticRegime::Uniform => PowerAllocation::uniform(cfg),
        AsymptoticRegime::SingleStream => {
            check_two_users(cfg)?;
            let single = |i: usize| {
                let mut c = vec![0.0; cfg.antennas(i)];
                c[0] = cfg.kp(i);
                c
            };
            Ok(PowerAllocation { c1: single(0), c2: single(1) })
        }
    }
}
