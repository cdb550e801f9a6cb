//! Rate studies: continuous dependence on the data and the homogenization
//! error, with least-squares rate fits and deterministic reports.

use crate::dsl::{parse, BinOp, DslError, Expr, Var};
use crate::exec::Exec;
use crate::grid::{Grid, Loc, ScalarField, SpaceTimeField};
use crate::homog::{HomogSolution, Reconstruction, TwoScaleData};
use crate::norms::{h21star_majorant, h_minus_one, lq, lqr_norm, lr_time, sup_h_minus_one, v2star_majorant, Exponent};
use crate::ops::{time_primitive_field, OperatorContext};
use crate::problem::{BoundaryData, ForceTerm, PerturbationSpec, ProblemConfig, ProblemSpec, SpecError, TimeSeries};
use crate::solver::{solve, SchemeParams, SolutionBundle, SolverError};
use crate::twoscale::OscillationSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Smallest admissible ratio `ε_min / Δx`.
pub const MIN_CELLS_PER_PERIOD: f64 = 16.0;
/// Errors at or below this level are solver noise and are not fitted.
pub const FIT_FLOOR: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("solve at {param} = {value:e} failed: {source}")]
    Solver { param: &'static str, value: f64, source: SolverError },
    #[error("data evaluation: {0}")]
    Dsl(#[from] DslError),
    #[error("resolution guard: eps_min / dx = {ratio:.3} < {MIN_CELLS_PER_PERIOD} (eps_min = {eps_min:e}, dx = {dx:e})")]
    ResolutionGuard { eps_min: f64, dx: f64, ratio: f64 },
    #[error("incompatible specs: {0}")]
    IncompatibleSpecs(String),
    #[error("study config: {0}")]
    Config(String),
    #[error("study aborted after {} rows: {source}", .table.rows.len())]
    Aborted { table: Box<ConvergenceTable>, source: Box<StudyError> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ------------------------------------------------------------------ E⁰ and Δ

/// Modified total energy `E⁰ = ½(u⁰ - u_Γ⁰)² + c_V θ⁰` at the centers.
pub fn compute_e0(grid: &Grid, u0: &ScalarField, theta0: &ScalarField, eta0: &ScalarField, bc: &BoundaryData, c_v: f64) -> Result<ScalarField, DslError> {
    let uc = u0.to_centers();
    let nx = grid.nx;
    let ug: Vec<f64> = match bc.m {
        1 => {
            let ctx = OperatorContext::new(*grid);
            let ie = ctx.primitive(eta0);
            let v0 = ie.values[nx];
            let (a, b) = (bc.u0.at(0.0)?, bc.ux.at(0.0)?);
            (0..nx)
                .map(|i| {
                    let left = 0.5 * (ie.values[i] + ie.values[i + 1]);
                    ((v0 - left) * a + left * b) / v0
                })
                .collect()
        }
        2 => vec![bc.ux.at(0.0)?; nx],
        _ => vec![0.0; nx],
    };
    Ok(ScalarField::new(
        Loc::Center,
        (0..nx).map(|i| 0.5 * (uc.values[i] - ug[i]).powi(2) + c_v * theta0.values[i]).collect(),
    ))
}

/// Itemized right-hand side of the continuous-dependence bound.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DeltaBreakdown {
    pub eta0_l2: f64,
    pub u0_hm1: f64,
    pub e0_hm1: f64,
    pub beta_e: f64,
    pub ub_w11: f64,
    pub pb_l1: f64,
    pub pib_l1: f64,
    /// Minimum over the sampled M₀ pairs.
    pub beta1: f64,
    /// `‖I^<3>β₂‖` at the pair (∞, 2).
    pub beta2_i3: f64,
    /// Zero when `q_e = 2`.
    pub beta2_iti1: f64,
    pub beta2_mean: f64,
    pub gamma: f64,
    pub g1_l1: f64,
    pub g2: f64,
    pub f: f64,
    pub total: f64,
}

impl DeltaBreakdown {
    pub fn items(&self) -> [(&'static str, f64); 15] {
        [
            ("eta0_L2", self.eta0_l2),
            ("u0_H-1", self.u0_hm1),
            ("E0_H-1;3", self.e0_hm1),
            ("beta_e", self.beta_e),
            ("ub_W11", self.ub_w11),
            ("pb_L1", self.pb_l1),
            ("pib_L1", self.pib_l1),
            ("beta1_M0", self.beta1),
            ("beta2_I3", self.beta2_i3),
            ("beta2_ItI1", self.beta2_iti1),
            ("beta2_mean", self.beta2_mean),
            ("gamma", self.gamma),
            ("g1_L1", self.g1_l1),
            ("g2", self.g2),
            ("f", self.f),
        ]
    }

    fn summed(mut self) -> Self {
        self.total = self.items().iter().map(|(_, v)| v).sum();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaOptions {
    pub q_e: Exponent,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        Self { q_e: Exponent::Inf }
    }
}

fn l1_time(times: &[f64], v: &[f64]) -> f64 {
    lr_time(times, v, Exponent::Finite(1.0))
}

fn series_diff(a: &TimeSeries, b: &TimeSeries, times: &[f64]) -> Result<Vec<f64>, DslError> {
    times.iter().map(|&t| Ok(a.at(t)? - b.at(t)?)).collect()
}

fn sample_xt(grid: &Grid, loc: Loc, times: &[f64], e: &Expr) -> Result<SpaceTimeField, DslError> {
    let xs = grid.coords(loc);
    let rows: Result<Vec<Vec<f64>>, DslError> =
        times.iter().map(|&t| xs.iter().map(|&x| e.eval_xt(x, t)).collect()).collect();
    Ok(SpaceTimeField::new(loc, times.to_vec(), rows?))
}

fn force_diff(hat: &ForceTerm, base: &ForceTerm, grid: &Grid, loc: Loc, xe: &SpaceTimeField) -> Result<SpaceTimeField, DslError> {
    let xs = grid.coords(loc);
    let xe = if loc == Loc::Center { xe.to_centers() } else { xe.clone() };
    let mut rows = Vec::with_capacity(xe.nt());
    for (n, &t) in xe.times.iter().enumerate() {
        let row: Result<Vec<f64>, DslError> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let chi = xe.rows[n][i];
                Ok(hat.eval(chi, x, t)? - base.eval(chi, x, t)?)
            })
            .collect();
        rows.push(row?);
    }
    Ok(SpaceTimeField::new(loc, xe.times.clone(), rows))
}

/// Δ for the pair (`base`, `perturbed`); β, γ, β_e and g₁ are read from the
/// perturbation of `perturbed`. The force items need the perturbed
/// trajectory `xe_hat` whenever the forces differ.
pub fn compute_delta(base: &ProblemSpec, perturbed: &ProblemSpec, opts: &DeltaOptions, xe_hat: Option<&SpaceTimeField>) -> Result<DeltaBreakdown, StudyError> {
    if base.grid != perturbed.grid {
        return Err(StudyError::IncompatibleSpecs("grids differ".into()));
    }
    if base.gas != perturbed.gas {
        return Err(StudyError::IncompatibleSpecs("gas parameters differ".into()));
    }
    if base.bc.m != perturbed.bc.m {
        return Err(StudyError::IncompatibleSpecs("boundary families differ".into()));
    }
    if base.perturbation.as_ref().is_some_and(|p| *p != PerturbationSpec::zero()) {
        return Err(StudyError::IncompatibleSpecs("the base problem must be unperturbed".into()));
    }
    let grid = &base.grid;
    let m = base.bc.m;
    let times = grid.times();
    let (hb, bb) = (&perturbed.bc, &base.bc);
    let two = Exponent::Finite(2.0);

    let mut d = DeltaBreakdown {
        eta0_l2: lq(grid, Loc::Center, &perturbed.eta0.sub(&base.eta0).values, two),
        u0_hm1: h_minus_one(grid, &perturbed.u0.sub(&base.u0), m),
        ..DeltaBreakdown::default()
    };
    let e_hat = compute_e0(grid, &perturbed.u0, &perturbed.theta0, &perturbed.eta0, hb, perturbed.gas.c_v)?;
    let e = compute_e0(grid, &base.u0, &base.theta0, &base.eta0, bb, base.gas.c_v)?;
    d.e0_hm1 = h_minus_one(grid, &e_hat.sub(&e), 3);

    for (a, b) in [(&hb.u0, &bb.u0), (&hb.ux, &bb.ux)] {
        let v = series_diff(a, b, &times)?;
        d.ub_w11 += l1_time(&times, &v) + v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
    }
    for (a, b) in [(&hb.p0, &bb.p0), (&hb.px, &bb.px)] {
        d.pb_l1 += l1_time(&times, &series_diff(a, b, &times)?);
    }
    for (a, b) in [(&hb.pi0, &bb.pi0), (&hb.pix, &bb.pix)] {
        d.pib_l1 += l1_time(&times, &series_diff(a, b, &times)?);
    }

    let ctx = OperatorContext::new(*grid);
    if let Some(p) = &perturbed.perturbation {
        let be: Result<Vec<f64>, DslError> = grid.coords(Loc::Edge).iter().map(|&x| p.beta_e.eval_xt(x, 0.0)).collect();
        d.beta_e = lq(grid, Loc::Edge, &be?, opts.q_e);
        if !p.beta1.is_zero() {
            d.beta1 = v2star_majorant(grid, &sample_xt(grid, Loc::Center, &times, &p.beta1)?);
        }
        if !p.beta2.is_zero() {
            let b2 = sample_xt(grid, Loc::Center, &times, &p.beta2)?;
            let i3 = b2.map_rows(|r| ctx.i_bracket(r, 3).expect("valid bracket"));
            d.beta2_i3 = lqr_norm(grid, &i3, Exponent::Inf, two).expect("valid exponents");
            if opts.q_e != two {
                let i1 = time_primitive_field(&b2.map_rows(|r| ctx.i_bracket(r, 1).expect("valid bracket")));
                d.beta2_iti1 = lqr_norm(grid, &i1, opts.q_e, Exponent::Inf).map_err(|e| StudyError::Config(e.to_string()))?;
            }
            let means: Vec<f64> = b2.rows.iter().map(|r| ctx.mean_omega(&ScalarField::new(Loc::Center, r.clone()))).collect();
            d.beta2_mean = l1_time(&times, &means);
        }
        if !p.gamma.is_zero() {
            d.gamma = v2star_majorant(grid, &sample_xt(grid, Loc::Edge, &times, &p.gamma)?);
        }
    }

    let g1 = match &perturbed.perturbation {
        Some(p) if !p.g1.is_zero() => Some(sample_xt(grid, Loc::Edge, &times, &p.g1)?),
        _ => None,
    };
    if let Some(g1) = &g1 {
        d.g1_l1 = lqr_norm(grid, g1, 1.0, 1.0).expect("valid exponents");
    }
    let forces_differ = perturbed.g != base.g || perturbed.f != base.f;
    if forces_differ || g1.is_some() {
        let xe = xe_hat.ok_or_else(|| StudyError::IncompatibleSpecs("forces differ but no perturbed trajectory was given".into()))?;
        let dg = force_diff(&perturbed.g, &base.g, grid, Loc::Edge, xe)?;
        let g2 = match &g1 {
            None => dg,
            Some(_) => dg.sub(&sample_xt(grid, Loc::Edge, &xe.times, &g1_expr(perturbed))?),
        };
        let ib = g2.map_rows(|r| ctx.i_bracket(r, m).expect("valid bracket"));
        d.g2 = lqr_norm(grid, &ib, two, two).expect("valid exponents");
        if m == 3 {
            let means: Vec<f64> = g2.rows.iter().map(|r| ctx.mean_omega(&ScalarField::new(Loc::Edge, r.clone()))).collect();
            d.g2 += l1_time(&g2.times, &means);
        }
        if perturbed.f != base.f {
            let df = force_diff(&perturbed.f, &base.f, grid, Loc::Center, xe)?;
            d.f = h21star_majorant(grid, &df, m, 1.0 / base.n_bound);
        }
    }
    Ok(d.summed())
}

fn g1_expr(spec: &ProblemSpec) -> Expr {
    spec.perturbation.as_ref().map_or(Expr::Num(0.0), |p| p.g1.clone())
}

// ------------------------------------------------------------------ fitting

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% interval for the slope.
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("at least 4 rows are needed, got {0}")]
    TooFewRows(usize),
    #[error("degenerate fit: error {0:e} at or below the noise floor")]
    DegenerateFit(f64),
    #[error("abscissa must be positive, got {0:e}")]
    BadAbscissa(f64),
}

/// Least squares of `log e` on `log h`.
pub fn fit_rate(rows: &[(f64, f64)]) -> Result<RateFit, FitError> {
    if rows.len() < 4 {
        return Err(FitError::TooFewRows(rows.len()));
    }
    if let Some(&(h, _)) = rows.iter().find(|(h, _)| !(*h > 0.0)) {
        return Err(FitError::BadAbscissa(h));
    }
    if let Some(&(_, e)) = rows.iter().find(|(_, e)| !(*e > FIT_FLOOR)) {
        return Err(FitError::DegenerateFit(e));
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = n - 2.0;
    let tq = StudentsT::new(0.0, 1.0, dof).expect("positive dof").inverse_cdf(0.975);
    let half_width = tq * (ssr / dof / sxx).sqrt();
    Ok(RateFit { slope, intercept, half_width })
}

// ------------------------------------------------------------------ tables

/// Rate family of a column and the threshold applied to its slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateClass {
    /// Exponent 1.
    Theorem,
    /// Exponent 1/2.
    Half,
    /// Exponent 2/3.
    TwoThirds,
    /// Exponent 1/2, ζ-weighted.
    ZetaHalf,
    /// Exponent 1/4, ζ-weighted.
    ZetaQuarter,
}

impl RateClass {
    pub fn expected(self) -> f64 {
        match self {
            RateClass::Theorem => 1.0,
            RateClass::Half | RateClass::ZetaHalf => 0.5,
            RateClass::TwoThirds => 2.0 / 3.0,
            RateClass::ZetaQuarter => 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub theorem_min: f64,
    /// Upper bound on Theorem slopes; used by the continuous-dependence study.
    pub theorem_max: Option<f64>,
    pub half_min: f64,
    pub two_thirds_min: f64,
    pub quarter_min: f64,
    /// Allowed growth of a Theorem error when the parameter halves.
    pub monotone_factor: f64,
    /// Required ratio of the largest error to the solver floor.
    pub decade_factor: f64,
    /// Allowed spread of LHS/Δ across the sweep.
    pub ratio_spread: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            theorem_min: 0.9,
            theorem_max: None,
            half_min: 0.45,
            two_thirds_min: 0.6,
            quarter_min: 0.2,
            monotone_factor: 1.25,
            decade_factor: 10.0,
            ratio_spread: 3.0,
        }
    }
}

impl Thresholds {
    fn bounds(&self, class: RateClass) -> (f64, Option<f64>) {
        match class {
            RateClass::Theorem => (self.theorem_min, self.theorem_max),
            RateClass::Half | RateClass::ZetaHalf => (self.half_min, None),
            RateClass::TwoThirds => (self.two_thirds_min, None),
            RateClass::ZetaQuarter => (self.quarter_min, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub class: RateClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    /// ε or δ.
    pub param: f64,
    /// Abscissa of the fit: ε, or Δ for the continuous-dependence study.
    pub abscissa: f64,
    pub values: Vec<f64>,
    pub monitors: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StudyKind {
    Homogenization,
    Lipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FitOutcome {
    Fitted(RateFit),
    Degenerate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub kind: StudyKind,
    pub columns: Vec<Column>,
    pub monitor_names: Vec<String>,
    pub rows: Vec<TableRow>,
    pub config_hash: String,
    pub grid: Grid,
    pub thresholds: Thresholds,
    /// Solver self-convergence floor per column, when measured.
    pub floor: Option<Vec<f64>>,
    /// Error that stopped the sweep early.
    pub partial: Option<String>,
    pub notes: Vec<String>,
}

impl ConvergenceTable {
    pub fn new(kind: StudyKind, grid: Grid, config_hash: String, thresholds: Thresholds) -> Self {
        let mut columns = error_columns();
        let monitor_names = match kind {
            StudyKind::Homogenization => vec!["eta_eps_min".into(), "eta_eps_max".into()],
            StudyKind::Lipschitz => {
                columns.iter_mut().filter(|c| c.name == "xe_Linf").for_each(|c| c.name = "xe_Lqe_inf".into());
                ["uhat_Linf", "Duhat_L2", "thetahat_Linf1", "xehat_Linf", "etahat_min", "etahat_max"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect()
            }
        };
        Self { kind, columns, monitor_names, rows: Vec::new(), config_hash, grid, thresholds, floor: None, partial: None, notes: Vec::new() }
    }

    pub fn param_name(&self) -> &'static str {
        match self.kind {
            StudyKind::Homogenization => "eps",
            StudyKind::Lipschitz => "delta",
        }
    }

    fn abscissa_name(&self) -> &'static str {
        match self.kind {
            StudyKind::Homogenization => "eps",
            StudyKind::Lipschitz => "Delta",
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn fits(&self) -> Vec<FitOutcome> {
        (0..self.columns.len())
            .map(|k| {
                let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.abscissa, r.values[k])).collect();
                match fit_rate(&pts) {
                    Ok(f) => FitOutcome::Fitted(f),
                    Err(e) => FitOutcome::Degenerate(e.to_string()),
                }
            })
            .collect()
    }

    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        for (c, fit) in self.columns.iter().zip(self.fits()) {
            let (lo, hi) = self.thresholds.bounds(c.class);
            let check = match fit {
                FitOutcome::Fitted(f) => {
                    let ok = f.slope >= lo && hi.is_none_or(|h| f.slope <= h);
                    let range = match hi {
                        Some(h) => format!("[{lo}, {h}]"),
                        None => format!(">= {lo}"),
                    };
                    Check {
                        name: format!("slope {}", c.name),
                        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
                        detail: format!("{:.4} (required {range})", f.slope),
                    }
                }
                FitOutcome::Degenerate(why) => Check { name: format!("slope {}", c.name), status: CheckStatus::Skipped, detail: why },
            };
            out.push(check);
        }
        let theorem: Vec<usize> = (0..self.columns.len()).filter(|&k| self.columns[k].class == RateClass::Theorem).collect();
        match self.kind {
            StudyKind::Homogenization => {
                for &k in &theorem {
                    let worst = self
                        .rows
                        .windows(2)
                        .map(|w| if w[0].values[k] > 0.0 { w[1].values[k] / w[0].values[k] } else { 0.0 })
                        .fold(0.0, f64::max);
                    let ok = worst <= self.thresholds.monotone_factor;
                    out.push(Check {
                        name: format!("monotone {}", self.columns[k].name),
                        status: if self.rows.len() < 2 { CheckStatus::Skipped } else if ok { CheckStatus::Pass } else { CheckStatus::Fail },
                        detail: format!("largest growth factor {worst:.4}"),
                    });
                    if let (Some(floor), Some(first)) = (&self.floor, self.rows.first()) {
                        let ratio = first.values[k] / floor[k];
                        out.push(Check {
                            name: format!("above floor {}", self.columns[k].name),
                            status: if ratio >= self.thresholds.decade_factor { CheckStatus::Pass } else { CheckStatus::Fail },
                            detail: format!("e(eps_max) / floor = {ratio:.4e}"),
                        });
                    }
                }
            }
            StudyKind::Lipschitz => {
                for &k in &theorem {
                    let ratios: Vec<f64> = self.rows.iter().filter(|r| r.abscissa > 0.0).map(|r| r.values[k] / r.abscissa).collect();
                    let (mn, mx) = ratios.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
                    let spread = mx / mn;
                    out.push(Check {
                        name: format!("ratio {}", self.columns[k].name),
                        status: if ratios.len() < 2 || !spread.is_finite() {
                            CheckStatus::Skipped
                        } else if spread < self.thresholds.ratio_spread {
                            CheckStatus::Pass
                        } else {
                            CheckStatus::Fail
                        },
                        detail: format!("LHS/Delta spread {spread:.4}"),
                    });
                }
            }
        }
        if let Some(p) = &self.partial {
            out.push(Check { name: "complete".into(), status: CheckStatus::Fail, detail: p.clone() });
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.param_name().to_string()];
        if self.kind == StudyKind::Lipschitz {
            header.push(self.abscissa_name().to_string());
        }
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        header.extend(self.monitor_names.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![format!("{:e}", r.param)];
            if self.kind == StudyKind::Lipschitz {
                rec.push(format!("{:e}", r.abscissa));
            }
            rec.extend(r.values.iter().chain(&r.monitors).map(|v| format!("{v:e}")));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let title = match self.kind {
            StudyKind::Homogenization => "homogenization error study",
            StudyKind::Lipschitz => "continuous dependence study",
        };
        let g = &self.grid;
        writeln!(s, "{title}").unwrap();
        writeln!(s, "config sha256: {}", self.config_hash).unwrap();
        writeln!(s, "grid: X = {:e}, T = {:e}, nx = {}, nt = {}", g.x_len, g.t_end, g.nx, g.nt).unwrap();
        if self.rows.is_empty() {
            writeln!(s, "no rows").unwrap();
        } else {
            writeln!(s, "rows: {}", self.rows.len()).unwrap();
            writeln!(s, "slopes vs {}:", self.abscissa_name()).unwrap();
            for (c, fit) in self.columns.iter().zip(self.fits()) {
                match fit {
                    FitOutcome::Fitted(f) => writeln!(
                        s,
                        "  {:<14} slope {:.4} +- {:.4}  intercept {:.4}  expected {:.4}",
                        c.name,
                        f.slope,
                        f.half_width,
                        f.intercept,
                        c.class.expected()
                    )
                    .unwrap(),
                    FitOutcome::Degenerate(why) => writeln!(s, "  {:<14} degenerate ({why})", c.name).unwrap(),
                }
            }
        }
        if let Some(floor) = &self.floor {
            writeln!(s, "solver floor:").unwrap();
            for (c, f) in self.columns.iter().zip(floor) {
                writeln!(s, "  {:<14} {f:e}", c.name).unwrap();
            }
        }
        for n in &self.notes {
            writeln!(s, "note: {n}").unwrap();
        }
        writeln!(s, "checks:").unwrap();
        for c in self.checks() {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "SKIP",
            };
            writeln!(s, "  {tag} {}: {}", c.name, c.detail).unwrap();
        }
        writeln!(s, "overall: {}", if self.passed() { "PASS" } else { "FAIL" }).unwrap();
        s
    }
}

/// Writes the CSV to `path` and the summary next to it with extension
/// `summary.txt`.
pub fn write_report(table: &ConvergenceTable, path: &Path) -> Result<(), StudyError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, table.to_csv())?;
    std::fs::write(path.with_extension("summary.txt"), table.summary())?;
    Ok(())
}

pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

// ------------------------------------------------------------------ norms of differences

fn error_columns() -> Vec<Column> {
    use RateClass::*;
    [
        ("eta_CL2", Theorem),
        ("u_L2", Theorem),
        ("u_supHm1", Theorem),
        ("theta_L2", Theorem),
        ("xe_Linf", Theorem),
        ("Itsigma_CL2", Theorem),
        ("eta_Linf", Half),
        ("u_Linf2", Half),
        ("theta_Linf2", Half),
        ("Itsigma_CQ", TwoThirds),
        ("zu_CL2", ZetaHalf),
        ("z2theta_CL2", ZetaHalf),
        ("zu_CQ", ZetaQuarter),
        ("z2theta_CQ", ZetaQuarter),
    ]
    .into_iter()
    .map(|(n, c)| Column { name: n.to_string(), class: c })
    .collect()
}

/// Trajectory fields compared by the studies.
#[derive(Debug, Clone, Copy)]
pub struct Fields<'a> {
    pub eta: &'a SpaceTimeField,
    pub u: &'a SpaceTimeField,
    pub theta: &'a SpaceTimeField,
    pub x_e: &'a SpaceTimeField,
    pub it_sigma: &'a SpaceTimeField,
}

impl<'a> Fields<'a> {
    pub fn of(sol: &'a SolutionBundle) -> Self {
        Self { eta: &sol.eta, u: &sol.u, theta: &sol.theta, x_e: &sol.x_e, it_sigma: &sol.it_sigma }
    }
}

/// The study columns for `a - b`, in the order of the table columns.
pub fn difference_norms(grid: &Grid, m: u8, xe_q: Exponent, t0: f64, a: Fields, b: Fields) -> Vec<f64> {
    let two = Exponent::Finite(2.0);
    let n = |w: &SpaceTimeField, q: Exponent, r: Exponent| lqr_norm(grid, w, q, r).expect("valid exponents");
    let de = a.eta.sub(b.eta);
    let du = a.u.sub(b.u);
    let dth = a.theta.sub(b.theta);
    let dx = a.x_e.sub(b.x_e);
    let ds = a.it_sigma.sub(b.it_sigma);
    let zeta = |t: f64| (t / t0).min(1.0);
    let zu = du.weight_in_time(zeta);
    let zth = dth.weight_in_time(|t| zeta(t).powi(2));
    vec![
        n(&de, two, Exponent::Inf),
        n(&du, two, two),
        sup_h_minus_one(grid, &du, m),
        n(&dth, two, two),
        n(&dx, xe_q, Exponent::Inf),
        n(&ds, two, Exponent::Inf),
        de.max_abs(),
        n(&du, Exponent::Inf, two),
        n(&dth, Exponent::Inf, two),
        ds.max_abs(),
        n(&zu, two, Exponent::Inf),
        n(&zth, two, Exponent::Inf),
        zu.max_abs(),
        zth.max_abs(),
    ]
}

/// Restriction of a field on the twice refined grid to the coarse grid.
fn restrict(w: &SpaceTimeField) -> SpaceTimeField {
    w.map_rows(|r| match r.loc {
        Loc::Center => ScalarField::new(Loc::Center, r.values.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect()),
        Loc::Edge => ScalarField::new(Loc::Edge, r.values.iter().step_by(2).copied().collect()),
    })
}

fn refined(grid: &Grid) -> Result<Grid, SpecError> {
    Ok(Grid::new(grid.x_len, grid.t_end, 2 * grid.nx, 2 * grid.nt)?)
}

// ------------------------------------------------------------------ homogenization study

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogStudyConfig {
    pub problem: ProblemConfig,
    /// Largest ε of the sweep.
    pub eps0: f64,
    /// Number of ε values, halving each time.
    pub levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default)]
    pub a_eps: f64,
    #[serde(default)]
    pub scheme: SchemeParams,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// `t₀ = zeta_t0_fraction · T` in `ζ(t) = min(t/t₀, 1)`.
    #[serde(default = "default_t0_fraction")]
    pub zeta_t0_fraction: f64,
    #[serde(default = "default_true")]
    pub measure_floor: bool,
    #[serde(default)]
    pub reconstruction: Reconstruction,
}

fn default_t0_fraction() -> f64 {
    0.2
}

fn default_true() -> bool {
    true
}

fn halving_sweep(start: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|j| start / f64::powi(2.0, j as i32)).collect()
}

fn check_halving(v: &[f64], what: &str) -> Result<(), StudyError> {
    if v.is_empty() {
        return Err(StudyError::Config(format!("{what} sweep is empty")));
    }
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(StudyError::Config(format!("{what} values must be positive")));
    }
    if v.windows(2).any(|w| ((w[0] / w[1]) - 2.0).abs() > 1e-9) {
        return Err(StudyError::Config(format!("{what} values must decrease by a factor of 2")));
    }
    Ok(())
}

impl HomogStudyConfig {
    pub fn from_json(s: &str) -> Result<Self, StudyError> {
        serde_json::from_str(s).map_err(|e| StudyError::Config(e.to_string()))
    }

    pub fn eps_values(&self) -> Vec<f64> {
        self.eps_list.clone().unwrap_or_else(|| halving_sweep(self.eps0, self.levels))
    }
}

fn t0_of(grid: &Grid, frac: f64) -> Result<f64, StudyError> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(StudyError::Config("zeta_t0_fraction must lie in (0, 1]".into()));
    }
    Ok(frac * grid.t_end)
}

fn finish_rows(
    mut table: ConvergenceTable,
    results: Vec<Result<TableRow, StudyError>>,
) -> Result<ConvergenceTable, StudyError> {
    for r in results {
        match r {
            Ok(row) => table.rows.push(row),
            Err(e) => {
                table.partial = Some(e.to_string());
                return Err(StudyError::Aborted { table: Box::new(table), source: Box::new(e) });
            }
        }
    }
    Ok(table)
}

/// Solver self-convergence of the averaged problem: the study columns
/// between the run on the study grid and the restricted run on the twice
/// refined grid.
pub fn homog_floor(data: &TwoScaleData, scheme: &SchemeParams, coarse: &HomogSolution, t0: f64) -> Result<Vec<f64>, StudyError> {
    let mut fine_data = data.clone();
    fine_data.grid = refined(&data.grid)?;
    let fine_scheme = scheme.clone().storing_every(2 * scheme.store_every);
    let spec = fine_data.averaged_spec()?;
    let fine = solve(&spec, &fine_scheme).map_err(|source| StudyError::Solver { param: "floor", value: 0.0, source })?;
    let (eta, u, theta, x_e, it_sigma) =
        (restrict(&fine.eta), restrict(&fine.u), restrict(&fine.theta), restrict(&fine.x_e), restrict(&fine.it_sigma));
    let f = Fields { eta: &eta, u: &u, theta: &theta, x_e: &x_e, it_sigma: &it_sigma };
    Ok(difference_norms(&data.grid, data.bc.m, Exponent::Inf, t0, Fields::of(&coarse.base), f))
}

pub fn run_homog_study(cfg: &HomogStudyConfig) -> Result<ConvergenceTable, StudyError> {
    run_homog_study_with(cfg, Exec::default())
}

pub fn run_homog_study_with(cfg: &HomogStudyConfig, exec: Exec) -> Result<ConvergenceTable, StudyError> {
    let data = TwoScaleData::from_config(&cfg.problem)?;
    let grid = data.grid;
    let eps = cfg.eps_values();
    check_halving(&eps, "eps")?;
    let eps_min = eps[eps.len() - 1];
    let ratio = eps_min / grid.dx();
    if ratio < MIN_CELLS_PER_PERIOD {
        return Err(StudyError::ResolutionGuard { eps_min, dx: grid.dx(), ratio });
    }
    let t0 = t0_of(&grid, cfg.zeta_t0_fraction)?;
    let mut table = ConvergenceTable::new(StudyKind::Homogenization, grid, config_hash(cfg), cfg.thresholds);
    if data.is_xi_independent() {
        table.notes.push("data do not depend on xi; the errors sit at the solver floor".into());
    }

    let hs = crate::homog::solve_homogenized(&data, &cfg.scheme).map_err(|source| StudyError::Solver { param: "averaged", value: 0.0, source });
    let hs = match hs {
        Ok(h) => h.with_rule(cfg.reconstruction),
        Err(e) => return finish_rows(table, vec![Err(e)]),
    };
    if cfg.measure_floor {
        match homog_floor(&data, &cfg.scheme, &hs, t0) {
            Ok(f) => table.floor = Some(f),
            Err(e) => return finish_rows(table, vec![Err(e)]),
        }
    }
    let m = data.bc.m;
    let results = exec.map(&eps, |&e| -> Result<TableRow, StudyError> {
        let osc = OscillationSpec::with_phase(e, cfg.a_eps).map_err(|err| StudyError::Config(err.to_string()))?;
        let spec = data.realized_spec(&osc)?;
        let sol = solve(&spec, &cfg.scheme).map_err(|source| StudyError::Solver { param: "eps", value: e, source })?;
        let eta_eps = hs.eta_epsilon(&data.eta0, &osc)?;
        let avg = Fields { eta: &eta_eps, ..Fields::of(&hs.base) };
        let values = difference_norms(&grid, m, Exponent::Inf, t0, avg, Fields::of(&sol));
        Ok(TableRow { param: e, abscissa: e, values, monitors: vec![eta_eps.min(), eta_eps.max_abs()] })
    });
    finish_rows(table, results)
}

// ------------------------------------------------------------------ continuous dependence study

/// Directions of the data perturbation; the perturbed problem uses
/// `base + δ·direction` and `δ·(β, β₁, γ, β_e, g₁)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationFamily {
    pub eta0: String,
    pub u0: String,
    pub theta0: String,
    pub g: String,
    pub f: String,
    pub beta: String,
    pub beta1: Option<String>,
    pub gamma: String,
    pub beta_e: String,
    pub g1: String,
    pub bc_u0: String,
    #[serde(rename = "bc_uX")]
    pub bc_ux: String,
    pub bc_p0: String,
    #[serde(rename = "bc_pX")]
    pub bc_px: String,
    pub bc_pi0: String,
    #[serde(rename = "bc_piX")]
    pub bc_pix: String,
}

impl Default for PerturbationFamily {
    fn default() -> Self {
        let z = || "0".to_string();
        Self {
            eta0: z(),
            u0: z(),
            theta0: z(),
            g: z(),
            f: z(),
            beta: z(),
            beta1: None,
            gamma: z(),
            beta_e: z(),
            g1: z(),
            bc_u0: z(),
            bc_ux: z(),
            bc_p0: z(),
            bc_px: z(),
            bc_pi0: z(),
            bc_pix: z(),
        }
    }
}

/// Parsed perturbation directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFamily {
    pub eta0: Expr,
    pub u0: Expr,
    pub theta0: Expr,
    pub g: Expr,
    pub f: Expr,
    pub terms: PerturbationSpec,
    pub bc: [Expr; 6],
}

fn field(src: &str, name: &str) -> Result<Expr, StudyError> {
    parse(src).map_err(|source| StudyError::Spec(SpecError::Dsl { field: format!("family.{name}"), source }))
}

impl PerturbationFamily {
    pub fn parse(&self) -> Result<ParsedFamily, StudyError> {
        let beta = field(&self.beta, "beta")?;
        let beta1 = match &self.beta1 {
            Some(s) => field(s, "beta1")?,
            None => beta.clone(),
        };
        let p = ParsedFamily {
            eta0: field(&self.eta0, "eta0")?,
            u0: field(&self.u0, "u0")?,
            theta0: field(&self.theta0, "theta0")?,
            g: field(&self.g, "g")?,
            f: field(&self.f, "f")?,
            terms: PerturbationSpec::with_split(beta, beta1, field(&self.gamma, "gamma")?, field(&self.beta_e, "beta_e")?, field(&self.g1, "g1")?),
            bc: [
                field(&self.bc_u0, "bc_u0")?,
                field(&self.bc_ux, "bc_uX")?,
                field(&self.bc_p0, "bc_p0")?,
                field(&self.bc_px, "bc_pX")?,
                field(&self.bc_pi0, "bc_pi0")?,
                field(&self.bc_pix, "bc_piX")?,
            ],
        };
        for e in [&p.eta0, &p.u0, &p.theta0] {
            if e.uses(Var::Xi) || e.uses(Var::Chi) || e.uses(Var::T) {
                return Err(StudyError::Config("initial-data directions may only depend on x".into()));
            }
        }
        if p.bc.iter().any(|e| e.uses(Var::X) || e.uses(Var::Xi) || e.uses(Var::Chi)) {
            return Err(StudyError::Config("boundary directions may only depend on t".into()));
        }
        Ok(p)
    }
}

fn plus(base: Expr, d: &Expr, delta: f64) -> Expr {
    if d.is_zero() {
        base
    } else {
        Expr::bin(BinOp::Add, base, Expr::bin(BinOp::Mul, Expr::Num(delta), d.clone()))
    }
}

fn series_plus(base: &TimeSeries, d: &Expr, delta: f64, name: &str) -> Result<TimeSeries, StudyError> {
    if d.is_zero() {
        return Ok(base.clone());
    }
    match base {
        TimeSeries::Const(c) => Ok(TimeSeries::Expr(plus(Expr::Num(*c), d, delta))),
        TimeSeries::Expr(e) => Ok(TimeSeries::Expr(plus(e.clone(), d, delta))),
        TimeSeries::Table { .. } => Err(StudyError::Config(format!("cannot perturb tabulated boundary datum {name}"))),
    }
}

fn force_plus(base: &ForceTerm, d: &Expr, delta: f64) -> Result<ForceTerm, StudyError> {
    if d.is_zero() {
        return Ok(base.clone());
    }
    match base {
        ForceTerm::Zero => Ok(ForceTerm::Expr(plus(Expr::Num(0.0), d, delta))),
        ForceTerm::Expr(e) => Ok(ForceTerm::Expr(plus(e.clone(), d, delta))),
        ForceTerm::XiMean { .. } => Err(StudyError::Config("cannot perturb an averaged two-scale force".into())),
    }
}

fn sample_at(grid: &Grid, loc: Loc, e: &Expr) -> Result<ScalarField, DslError> {
    let v: Result<Vec<f64>, DslError> = grid.coords(loc).into_iter().map(|x| e.eval_xt(x, 0.0)).collect();
    Ok(ScalarField::new(loc, v?))
}

/// The member `δ` of the perturbation family around `base`.
pub fn perturbed_spec(base: &ProblemSpec, fam: &ParsedFamily, delta: f64) -> Result<ProblemSpec, StudyError> {
    let g = &base.grid;
    let mut s = base.clone();
    s.eta0 = base.eta0.add(&sample_at(g, Loc::Center, &fam.eta0)?.scale(delta));
    s.u0 = base.u0.add(&sample_at(g, Loc::Edge, &fam.u0)?.scale(delta));
    s.theta0 = base.theta0.add(&sample_at(g, Loc::Center, &fam.theta0)?.scale(delta));
    if let Some(src) = &mut s.sources {
        src.eta0 = plus(src.eta0.clone(), &fam.eta0, delta);
        src.u0 = plus(src.u0.clone(), &fam.u0, delta);
        src.theta0 = plus(src.theta0.clone(), &fam.theta0, delta);
    }
    s.g = force_plus(&base.g, &fam.g, delta)?;
    s.f = force_plus(&base.f, &fam.f, delta)?;
    let b = &base.bc;
    s.bc = BoundaryData {
        m: b.m,
        u0: series_plus(&b.u0, &fam.bc[0], delta, "u0")?,
        ux: series_plus(&b.ux, &fam.bc[1], delta, "uX")?,
        p0: series_plus(&b.p0, &fam.bc[2], delta, "p0")?,
        px: series_plus(&b.px, &fam.bc[3], delta, "pX")?,
        pi0: series_plus(&b.pi0, &fam.bc[4], delta, "pi0")?,
        pix: series_plus(&b.pix, &fam.bc[5], delta, "piX")?,
    };
    s.perturbation = Some(fam.terms.scaled(delta));
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzStudyConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub family: PerturbationFamily,
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Spatial exponent of the x_e column and of β_e; absent means ∞.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_e: Option<f64>,
    #[serde(default)]
    pub scheme: SchemeParams,
    #[serde(default = "lipschitz_thresholds")]
    pub thresholds: Thresholds,
    #[serde(default = "default_t0_fraction")]
    pub zeta_t0_fraction: f64,
}

fn default_delta0() -> f64 {
    0.1
}

fn default_levels() -> usize {
    5
}

pub fn lipschitz_thresholds() -> Thresholds {
    Thresholds { theorem_max: Some(1.1), ..Thresholds::default() }
}

impl LipschitzStudyConfig {
    pub fn from_json(s: &str) -> Result<Self, StudyError> {
        serde_json::from_str(s).map_err(|e| StudyError::Config(e.to_string()))
    }

    pub fn deltas(&self) -> Vec<f64> {
        halving_sweep(self.delta0, self.levels)
    }

    pub fn q_e(&self) -> Result<Exponent, StudyError> {
        match self.q_e {
            None => Ok(Exponent::Inf),
            Some(q) if (2.0..=f64::INFINITY).contains(&q) => Ok(Exponent::from(q)),
            Some(q) => Err(StudyError::Config(format!("q_e must lie in [2, inf], got {q}"))),
        }
    }
}

fn hypothesis_monitors(grid: &Grid, sol: &SolutionBundle) -> Vec<f64> {
    let du = sol.du();
    vec![
        sol.u.max_abs(),
        lqr_norm(grid, &du, 2.0, 2.0).expect("valid exponents"),
        lqr_norm(grid, &sol.theta, Exponent::Inf, 1.0).expect("valid exponents"),
        sol.x_e.max_abs(),
        sol.eta.min(),
        sol.eta.max_abs(),
    ]
}

pub fn run_lipschitz_study(cfg: &LipschitzStudyConfig) -> Result<ConvergenceTable, StudyError> {
    run_lipschitz_study_with(cfg, Exec::default())
}

pub fn run_lipschitz_study_with(cfg: &LipschitzStudyConfig, exec: Exec) -> Result<ConvergenceTable, StudyError> {
    let base = cfg.problem.build()?;
    let grid = base.grid;
    let deltas = cfg.deltas();
    check_halving(&deltas, "delta")?;
    let q_e = cfg.q_e()?;
    let fam = cfg.family.parse()?;
    let t0 = t0_of(&grid, cfg.zeta_t0_fraction)?;
    let table = ConvergenceTable::new(StudyKind::Lipschitz, grid, config_hash(cfg), cfg.thresholds);
    let base_sol = match solve(&base, &cfg.scheme) {
        Ok(s) => s,
        Err(source) => return finish_rows(table, vec![Err(StudyError::Solver { param: "delta", value: 0.0, source })]),
    };
    let opts = DeltaOptions { q_e };
    let m = base.bc.m;
    let results = exec.map(&deltas, |&d| -> Result<TableRow, StudyError> {
        let spec = perturbed_spec(&base, &fam, d)?;
        let sol = solve(&spec, &cfg.scheme).map_err(|source| StudyError::Solver { param: "delta", value: d, source })?;
        let delta = compute_delta(&base, &spec, &opts, Some(&sol.x_e))?;
        let values = difference_norms(&grid, m, q_e, t0, Fields::of(&sol), Fields::of(&base_sol));
        Ok(TableRow { param: d, abscissa: delta.total, values, monitors: hypothesis_monitors(&grid, &sol) })
    });
    let mut table = finish_rows(table, results)?;
    for (k, name) in table.monitor_names.clone().iter().enumerate() {
        let vals: Vec<f64> = table.rows.iter().map(|r| r.monitors[k].abs()).collect();
        let (mn, mx) = vals.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
        if mn > 0.0 && mx / mn > 2.0 {
            table.notes.push(format!("hypothesis norm {name} drifts by a factor {:.3} across the sweep", mx / mn));
        }
    }
    Ok(table)
}

/// Δ items for every member of the family, without solving when the forces
/// are unperturbed.
pub fn delta_breakdowns(cfg: &LipschitzStudyConfig) -> Result<Vec<(f64, DeltaBreakdown)>, StudyError> {
    let base = cfg.problem.build()?;
    let fam = cfg.family.parse()?;
    let opts = DeltaOptions { q_e: cfg.q_e()? };
    cfg.deltas()
        .into_iter()
        .map(|d| {
            let spec = perturbed_spec(&base, &fam, d)?;
            let xe = if spec.g != base.g || spec.f != base.f || !fam.terms.g1.is_zero() {
                Some(solve(&spec, &cfg.scheme).map_err(|source| StudyError::Solver { param: "delta", value: d, source })?.x_e)
            } else {
                None
            };
            Ok((d, compute_delta(&base, &spec, &opts, xe.as_ref())?))
        })
        .collect()
}

pub fn write_delta_csv(rows: &[(f64, DeltaBreakdown)], path: &Path) -> Result<(), StudyError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["delta".to_string()];
    header.extend(DeltaBreakdown::default().items().iter().map(|(n, _)| n.to_string()));
    header.push("total".into());
    w.write_record(&header).expect("in-memory write");
    for (d, b) in rows {
        let mut rec = vec![format!("{d:e}")];
        rec.extend(b.items().iter().map(|(_, v)| format!("{v:e}")));
        rec.push(format!("{:e}", b.total));
        w.write_record(&rec).expect("in-memory write");
    }
    std::fs::write(path, w.into_inner().expect("flush"))?;
    Ok(())
}
