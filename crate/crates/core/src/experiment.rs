//! Batch experiments: design pilots by any method over a power/correlation
//! grid and tabulate their metrics.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barrier::{solve_max_sum_mi, solve_min_sum_mse, solve_minmax, BarrierSettings};
use crate::closed_form::{baseline_first_factor, dft_scaled_factor, kkt_residual_mi, kkt_residual_mse};
use crate::error::{Error, Result};
use crate::gradients::FairnessMode;
use crate::metrics::{evaluate, fairness_ratio, MetricSet};
use crate::linalg::MatrixRecord;
use crate::model::{
    assemble_pilot, default_v, factor_from_pilot, validate_anece, ConfigSpec, NetworkConfig, PerUser, PilotFactor,
    StackedPilot,
};
use crate::two_user::{assemble_two_user_pilot, mi_alternating_bisection, mse_decoupled_allocation, PowerAllocation};

/// Convergence tolerance of the two-user MI allocation.
pub const TWO_USER_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    First,
    MseOpt,
    MiOpt,
    MseFair,
    MiFair,
    TwoUserMse,
    TwoUserMi,
    Uniform,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::ClosedForm,
        Method::First,
        Method::MseOpt,
        Method::MiOpt,
        Method::MseFair,
        Method::MiFair,
        Method::TwoUserMse,
        Method::TwoUserMi,
        Method::Uniform,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::First => "first",
            Method::MseOpt => "mse-opt",
            Method::MiOpt => "mi-opt",
            Method::MseFair => "mse-fair",
            Method::MiFair => "mi-fair",
            Method::TwoUserMse => "two-user-mse",
            Method::TwoUserMi => "two-user-mi",
            Method::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// A designed pilot and how the solver got there.
#[derive(Clone, Debug)]
pub struct Design {
    pub factor: PilotFactor,
    pub eps: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub rank_collapse: Option<Vec<usize>>,
}

impl Design {
    fn direct(factor: PilotFactor) -> Self {
        Design { factor, eps: None, iterations: None, converged: true, rank_collapse: None }
    }
}

/// Designs a pilot with `method`. `m` selects the closed-form split and the
/// min-max starting point.
pub fn design(cfg: &NetworkConfig, method: Method, m: usize, settings: &BarrierSettings) -> Result<Design> {
    let from_solution = |s: crate::barrier::Solution| Design {
        iterations: Some(s.trace.total_inner),
        converged: s.trace.converged,
        rank_collapse: s.trace.rank_collapse,
        eps: s.eps,
        factor: s.factor,
    };
    Ok(match method {
        Method::ClosedForm => Design::direct(dft_scaled_factor(cfg, m)?),
        Method::First => Design::direct(baseline_first_factor(cfg)?),
        Method::MseOpt => from_solution(solve_min_sum_mse(cfg, settings)?),
        Method::MiOpt => from_solution(solve_max_sum_mi(cfg, settings)?),
        Method::MseFair => from_solution(solve_minmax(cfg, FairnessMode::Mse, m, settings)?),
        Method::MiFair => from_solution(solve_minmax(cfg, FairnessMode::Mi, m, settings)?),
        Method::TwoUserMse => Design::direct(assemble_two_user_pilot(cfg, &mse_decoupled_allocation(cfg)?)?),
        Method::TwoUserMi => {
            let out = mi_alternating_bisection(cfg, TWO_USER_TOL)?;
            Design {
                factor: assemble_two_user_pilot(cfg, &out.allocation)?,
                eps: None,
                iterations: Some(out.iterations),
                converged: out.converged,
                rank_collapse: None,
            }
        }
        Method::Uniform => Design::direct(assemble_two_user_pilot(cfg, &PowerAllocation::uniform(cfg)?)?),
    })
}

/// Pilot file: the factor `F`, the right factor `V` and the stacked pilot
/// `P`. Reading needs `F` or `P`; `V` defaults to the scaled DFT rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<MatrixRecord>,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<MatrixRecord>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub pilot: Option<MatrixRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl PilotFile {
    pub fn from_design(cfg: &NetworkConfig, method: Option<Method>, d: &Design) -> Result<Self> {
        Ok(PilotFile {
            method,
            factor: Some(MatrixRecord::from_matrix(d.factor.f())),
            v: Some(MatrixRecord::from_matrix(d.factor.v())),
            pilot: Some(MatrixRecord::from_matrix(assemble_pilot(cfg, &d.factor)?.p())),
            eps: d.eps,
        })
    }

    pub fn to_factor(&self, cfg: &NetworkConfig) -> Result<PilotFactor> {
        let v = match &self.v {
            Some(v) => v.to_matrix()?,
            None => default_v(cfg.rank(), cfg.pilot_len()),
        };
        match (&self.factor, &self.pilot) {
            (Some(f), _) => PilotFactor::new(f.to_matrix()?, v),
            (None, Some(p)) => factor_from_pilot(cfg, &StackedPilot::new(cfg, p.to_matrix()?)?, &v),
            (None, None) => Err(Error::InvalidConfig("pilot file needs F or P".into())),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "KP_dB", default)]
    pub kp_db: Vec<f64>,
    #[serde(default)]
    pub rho: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub config: ConfigSpec,
    pub methods: Vec<Method>,
    pub sweep: Sweep,
    /// Metric list such as `"mse,mi,eve"`; all metrics when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub barrier: BarrierSettings,
    #[serde(default)]
    pub m: usize,
}

/// One grid point: the swept values, `None` where the axis is not swept.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub kp_db: Option<f64>,
    pub rho: Option<f64>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn metric_set(&self) -> Result<MetricSet> {
        self.outputs.as_deref().map_or(Ok(MetricSet::ALL), MetricSet::parse)
    }

    /// Grid in row order: power outer, correlation inner.
    pub fn grid(&self) -> Vec<GridPoint> {
        let kps: Vec<Option<f64>> =
            if self.sweep.kp_db.is_empty() { vec![None] } else { self.sweep.kp_db.iter().copied().map(Some).collect() };
        let rhos: Vec<Option<f64>> =
            if self.sweep.rho.is_empty() { vec![None] } else { self.sweep.rho.iter().copied().map(Some).collect() };
        kps.iter().flat_map(|&kp_db| rhos.iter().map(move |&rho| GridPoint { kp_db, rho })).collect()
    }

    pub fn config_at(&self, point: GridPoint) -> Result<NetworkConfig> {
        let mut c = self.config.clone();
        if let Some(db) = point.kp_db {
            c.kp_db = Some(PerUser::Shared(db));
            c.power = None;
        }
        if let Some(rho) = point.rho {
            c.rho = Some(PerUser::Shared(rho));
            c.correlation = None;
        }
        c.build()
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("experiment needs at least one method".into()));
        }
        if self.sweep.kp_db.is_empty() && self.sweep.rho.is_empty() {
            return Err(Error::InvalidConfig("experiment needs a KP_dB or rho grid".into()));
        }
        self.barrier.validate()?;
        self.metric_set()?;
        for p in self.grid() {
            self.config_at(p)?;
        }
        Ok(())
    }
}

/// One table line: a method evaluated at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    #[serde(rename = "KP_dB")]
    pub kp_db: f64,
    pub rho: Option<f64>,
    #[serde(rename = "J_norm")]
    pub j_norm: Option<f64>,
    #[serde(rename = "I_norm")]
    pub i_norm: Option<f64>,
    pub eve_norm: Option<f64>,
    pub mse_per_user: Vec<f64>,
    pub mi_per_pair: Vec<f64>,
    pub fairness_mse: Option<f64>,
    pub fairness_mi: Option<f64>,
    pub iterations: Option<usize>,
    pub kkt_residual_mse: Option<f64>,
    pub kkt_residual_mi: Option<f64>,
    pub rank_ok: Option<bool>,
    pub status: String,
}

pub const STATUS_OK: &str = "ok";
pub const STATUS_NOT_CONVERGED: &str = "not-converged";
pub const STATUS_RANK_COLLAPSE: &str = "rank-collapse";

fn shared_value(v: &Option<PerUser<f64>>) -> Option<f64> {
    match v {
        Some(PerUser::Shared(x)) => Some(*x),
        Some(PerUser::Each(xs)) if xs.windows(2).all(|w| w[0] == w[1]) => xs.first().copied(),
        _ => None,
    }
}

fn empty_row(method: Method, kp_db: f64, rho: Option<f64>, status: String) -> ResultRow {
    ResultRow {
        method,
        kp_db,
        rho,
        j_norm: None,
        i_norm: None,
        eve_norm: None,
        mse_per_user: Vec::new(),
        mi_per_pair: Vec::new(),
        fairness_mse: None,
        fairness_mi: None,
        iterations: None,
        kkt_residual_mse: None,
        kkt_residual_mi: None,
        rank_ok: None,
        status,
    }
}

fn evaluate_row(
    cfg: &NetworkConfig,
    method: Method,
    kp_db: f64,
    rho: Option<f64>,
    spec: &ExperimentSpec,
    set: MetricSet,
) -> ResultRow {
    let d = match design(cfg, method, spec.m, &spec.barrier) {
        Ok(d) => d,
        Err(e) => return empty_row(method, kp_db, rho, format!("error: {e}")),
    };
    let report = match evaluate(cfg, &d.factor, set) {
        Ok(r) => r,
        Err(e) => return empty_row(method, kp_db, rho, format!("error: {e}")),
    };
    let rank_ok = assemble_pilot(cfg, &d.factor).ok().map(|sp| validate_anece(cfg, &sp).passes());
    let status = if d.rank_collapse.is_some() || rank_ok == Some(false) {
        STATUS_RANK_COLLAPSE
    } else if !d.converged {
        STATUS_NOT_CONVERGED
    } else {
        STATUS_OK
    };
    let mse_per_user = report.mse.as_ref().map(|m| m.per_user.clone()).unwrap_or_default();
    let mi_per_pair: Vec<f64> =
        report.mi.as_ref().map(|m| m.per_pair.iter().map(|p| p.value).collect()).unwrap_or_default();
    ResultRow {
        method,
        kp_db,
        rho,
        j_norm: report.mse.as_ref().and_then(|m| m.j_norm),
        i_norm: report.mi.as_ref().and_then(|m| m.i_norm),
        eve_norm: report.eve.as_ref().map(|e| e.norm),
        fairness_mse: fairness_ratio(&mse_per_user),
        fairness_mi: fairness_ratio(&mi_per_pair),
        mse_per_user,
        mi_per_pair,
        iterations: d.iterations,
        kkt_residual_mse: set.mse.then(|| kkt_residual_mse(cfg, d.factor.f()).ok().map(|k| k.residual)).flatten(),
        kkt_residual_mi: set.mi.then(|| kkt_residual_mi(cfg, d.factor.f()).ok().map(|k| k.residual)).flatten(),
        rank_ok,
        status: status.to_string(),
    }
}

/// Runs every method at every grid point. Grid points run in parallel; rows
/// come back in grid order (power outer, correlation inner) with methods in
/// spec order. Solver failures are recorded in the row status.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let set = spec.metric_set()?;
    let grid = spec.grid();
    let blocks: Vec<Vec<ResultRow>> = grid
        .par_iter()
        .map(|&p| {
            let cfg = spec.config_at(p).expect("grid validated");
            let kp_db = p.kp_db.unwrap_or_else(|| 10.0 * cfg.kp(0).log10());
            let rho = p.rho.or_else(|| shared_value(&spec.config.rho));
            spec.methods.iter().map(|&m| evaluate_row(&cfg, m, kp_db, rho, spec, set)).collect()
        })
        .collect();
    Ok(blocks.into_iter().flatten().collect())
}

/// Fairness ratios of the sum and min-max designs at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessRow {
    #[serde(rename = "KP_dB")]
    pub kp_db: f64,
    pub rho: Option<f64>,
    pub mse_sum: Option<f64>,
    pub mse_fair: Option<f64>,
    pub mi_sum: Option<f64>,
    pub mi_fair: Option<f64>,
}

/// Runs the sum and min-max solvers of both criteria over the spec's grid
/// (its method list is ignored).
pub fn compare_fairness(spec: &ExperimentSpec) -> Result<Vec<FairnessRow>> {
    let mut s = spec.clone();
    s.methods = vec![Method::MseOpt, Method::MseFair, Method::MiOpt, Method::MiFair];
    s.outputs = Some("mse,mi".into());
    let rows = run(&s)?;
    Ok(rows
        .chunks(4)
        .map(|c| FairnessRow {
            kp_db: c[0].kp_db,
            rho: c[0].rho,
            mse_sum: c[0].fairness_mse,
            mse_fair: c[1].fairness_mse,
            mi_sum: c[2].fairness_mi,
            mi_fair: c[3].fairness_mi,
        })
        .collect())
}

pub const CSV_COLUMNS: [&str; 15] = [
    "method",
    "KP_dB",
    "rho",
    "J_norm",
    "I_norm",
    "eve_norm",
    "mse_per_user",
    "mi_per_pair",
    "fairness_mse",
    "fairness_mi",
    "iterations",
    "kkt_residual_mse",
    "kkt_residual_mi",
    "rank_ok",
    "status",
];

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt<T>(x: Option<T>, f: impl Fn(T) -> String) -> String {
    x.map(f).unwrap_or_default()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|&x| fmt_f(x)).collect::<Vec<_>>().join(";")
}

fn parse_f(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::InvalidConfig(format!("bad number '{s}'")))
}

fn parse_opt<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        f(s).map(Some)
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(parse_f).collect()
}

/// Writes rows as CSV with the fixed column order of [`CSV_COLUMNS`].
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.method.as_str().to_string(),
            fmt_f(r.kp_db),
            fmt_opt(r.rho, fmt_f),
            fmt_opt(r.j_norm, fmt_f),
            fmt_opt(r.i_norm, fmt_f),
            fmt_opt(r.eve_norm, fmt_f),
            fmt_list(&r.mse_per_user),
            fmt_list(&r.mi_per_pair),
            fmt_opt(r.fairness_mse, fmt_f),
            fmt_opt(r.fairness_mi, fmt_f),
            fmt_opt(r.iterations, |n| n.to_string()),
            fmt_opt(r.kkt_residual_mse, fmt_f),
            fmt_opt(r.kkt_residual_mi, fmt_f),
            fmt_opt(r.rank_ok, |b| b.to_string()),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::InvalidConfig(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        rows.push(ResultRow {
            method: f(0).parse()?,
            kp_db: parse_f(f(1))?,
            rho: parse_opt(f(2), parse_f)?,
            j_norm: parse_opt(f(3), parse_f)?,
            i_norm: parse_opt(f(4), parse_f)?,
            eve_norm: parse_opt(f(5), parse_f)?,
            mse_per_user: parse_list(f(6))?,
            mi_per_pair: parse_list(f(7))?,
            fairness_mse: parse_opt(f(8), parse_f)?,
            fairness_mi: parse_opt(f(9), parse_f)?,
            iterations: parse_opt(f(10), |s| {
                s.parse().map_err(|_| Error::InvalidConfig(format!("bad iteration count '{s}'")))
            })?,
            kkt_residual_mse: parse_opt(f(11), parse_f)?,
            kkt_residual_mi: parse_opt(f(12), parse_f)?,
            rank_ok: parse_opt(f(13), |s| {
                s.parse().map_err(|_| Error::InvalidConfig(format!("bad flag '{s}'")))
            })?,
            status: f(14).to_string(),
        });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `.json` selects JSON; anything else CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

pub fn emit(rows: &[ResultRow], format: Format, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        Format::Csv => write_csv(rows, file),
        Format::Json => {
            let mut file = file;
            serde_json::to_writer_pretty(&mut file, rows)?;
            file.flush()?;
            Ok(())
        }
    }
}

pub fn parse(format: Format, path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    match format {
        Format::Csv => read_csv(file),
        Format::Json => Ok(serde_json::from_reader(file)?),
    }
}

pub fn write_fairness_csv<W: Write>(rows: &[FairnessRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["KP_dB", "rho", "mse_sum", "mse_fair", "mi_sum", "mi_fair"])?;
    for r in rows {
        w.write_record([
            fmt_f(r.kp_db),
            fmt_opt(r.rho, fmt_f),
            fmt_opt(r.mse_sum, fmt_f),
            fmt_opt(r.mse_fair, fmt_f),
            fmt_opt(r.mi_sum, fmt_f),
            fmt_opt(r.mi_fair, fmt_f),
        ])?;
    }
    w.flush()?;
    Ok(())
}
