//! Problem data, validation of the data conditions and the JSON config.

use crate::dsl::{parse, Bindings, DslError, Expr, PiecewiseCertificate, Var};
use crate::grid::{Grid, GridError, Loc, ScalarField};
use crate::ops::{time_primitive, OperatorContext};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasParams {
    pub nu: f64,
    pub k: f64,
    #[serde(rename = "cV")]
    pub c_v: f64,
    pub lambda: f64,
}

impl Default for GasParams {
    fn default() -> Self {
        Self { nu: 1.0, k: 1.0, c_v: 1.0, lambda: 1.0 }
    }
}

/// Boundary datum as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeSeries {
    Const(f64),
    /// Linear interpolation, constant extrapolation.
    Table { t: Vec<f64>, v: Vec<f64> },
    Expr(Expr),
}

impl TimeSeries {
    pub fn zero() -> Self {
        TimeSeries::Const(0.0)
    }

    pub fn at(&self, t: f64) -> Result<f64, DslError> {
        match self {
            TimeSeries::Const(c) => Ok(*c),
            TimeSeries::Table { t: ts, v } => Ok(interp(ts, v, t)),
            TimeSeries::Expr(e) => e.eval(&Bindings { t: Some(t), ..Bindings::default() }),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TimeSeries::Const(c) => *c == 0.0,
            TimeSeries::Table { v, .. } => v.iter().all(|x| *x == 0.0),
            TimeSeries::Expr(e) => e.is_zero(),
        }
    }

    /// Samples at the given times; evaluation errors become NaN.
    pub fn sample(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.at(t).unwrap_or(f64::NAN)).collect()
    }
}

fn interp(ts: &[f64], v: &[f64], t: f64) -> f64 {
    if ts.is_empty() {
        return 0.0;
    }
    if t <= ts[0] {
        return v[0];
    }
    if t >= ts[ts.len() - 1] {
        return v[v.len() - 1];
    }
    let k = ts.partition_point(|&s| s <= t) - 1;
    let w = (t - ts[k]) / (ts[k + 1] - ts[k]);
    v[k] + w * (v[k + 1] - v[k])
}

/// Boundary data of family `m`; entries the family does not use must vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub m: u8,
    pub u0: TimeSeries,
    pub ux: TimeSeries,
    pub p0: TimeSeries,
    pub px: TimeSeries,
    pub pi0: TimeSeries,
    pub pix: TimeSeries,
}

impl BoundaryData {
    /// m = 1: velocities at both ends.
    pub fn velocity(u0: TimeSeries, ux: TimeSeries, pi0: TimeSeries, pix: TimeSeries) -> Self {
        Self { m: 1, u0, ux, p0: TimeSeries::zero(), px: TimeSeries::zero(), pi0, pix }
    }

    /// m = 2: outer pressure on the left, velocity on the right.
    pub fn mixed(p0: TimeSeries, ux: TimeSeries, pi0: TimeSeries, pix: TimeSeries) -> Self {
        Self { m: 2, u0: TimeSeries::zero(), ux, p0, px: TimeSeries::zero(), pi0, pix }
    }

    /// m = 3: outer pressures at both ends.
    pub fn pressure(p0: TimeSeries, px: TimeSeries, pi0: TimeSeries, pix: TimeSeries) -> Self {
        Self { m: 3, u0: TimeSeries::zero(), ux: TimeSeries::zero(), p0, px, pi0, pix }
    }

    fn inactive(&self) -> Vec<(&'static str, &TimeSeries)> {
        match self.m {
            1 => vec![("p0", &self.p0), ("pX", &self.px)],
            2 => vec![("u0", &self.u0), ("pX", &self.px)],
            _ => vec![("u0", &self.u0), ("uX", &self.ux)],
        }
    }

    fn active_pressures(&self) -> Vec<(&'static str, &TimeSeries)> {
        match self.m {
            1 => vec![],
            2 => vec![("p0", &self.p0)],
            _ => vec![("p0", &self.p0), ("pX", &self.px)],
        }
    }
}

/// Force or heat source `h(χ, x, t)` evaluated along `χ = x_e(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceTerm {
    Zero,
    Expr(Expr),
    /// Cell average over ξ of a two-scale source, by the given nodes and weights.
    XiMean { expr: Expr, nodes: Vec<(f64, f64)> },
}

impl ForceTerm {
    pub fn from_expr(e: Expr) -> Self {
        if e.is_zero() {
            ForceTerm::Zero
        } else {
            ForceTerm::Expr(e)
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ForceTerm::Zero)
    }

    pub fn eval(&self, chi: f64, x: f64, t: f64) -> Result<f64, DslError> {
        match self {
            ForceTerm::Zero => Ok(0.0),
            ForceTerm::Expr(e) => e.eval(&Bindings::xt(x, t).with_chi(chi)),
            ForceTerm::XiMean { expr, nodes } => {
                let mut s = 0.0;
                for &(xi, w) in nodes {
                    s += w * expr.eval(&Bindings::xt(x, t).with_chi(chi).with_xi(xi))?;
                }
                Ok(s)
            }
        }
    }
}

/// Perturbation terms of the perturbed system.
///
/// `β = β₁ + β₂` by construction; `g1` is the first part of the force
/// difference, the remainder being `ĝ - g - g₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub beta1: Expr,
    pub beta2: Expr,
    pub gamma: Expr,
    pub beta_e: Expr,
    pub g1: Expr,
}

impl PerturbationSpec {
    pub fn zero() -> Self {
        let z = Expr::Num(0.0);
        Self { beta1: z.clone(), beta2: z.clone(), gamma: z.clone(), beta_e: z.clone(), g1: z }
    }

    /// Splits `beta` so that `β₁ = beta1` and `β₂ = beta - beta1`.
    pub fn with_split(beta: Expr, beta1: Expr, gamma: Expr, beta_e: Expr, g1: Expr) -> Self {
        let beta2 = Expr::bin(crate::dsl::BinOp::Sub, beta, beta1.clone());
        Self { beta1, beta2, gamma, beta_e, g1 }
    }

    pub fn beta_at(&self, x: f64, t: f64) -> Result<f64, DslError> {
        let b = Bindings::xt(x, t);
        Ok(self.beta1.eval(&b)? + self.beta2.eval(&b)?)
    }

    pub fn gamma_at(&self, x: f64, t: f64) -> Result<f64, DslError> {
        self.gamma.eval(&Bindings::xt(x, t))
    }

    /// Scales every term by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let s = |e: &Expr| {
            if e.is_zero() {
                e.clone()
            } else {
                Expr::bin(crate::dsl::BinOp::Mul, Expr::Num(c), e.clone())
            }
        };
        Self { beta1: s(&self.beta1), beta2: s(&self.beta2), gamma: s(&self.gamma), beta_e: s(&self.beta_e), g1: s(&self.g1) }
    }
}

/// DSL sources of the initial data, kept for edge-point validation.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSources {
    pub eta0: Expr,
    pub u0: Expr,
    pub theta0: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub gas: GasParams,
    pub bc: BoundaryData,
    /// Centers.
    pub eta0: ScalarField,
    /// Edges.
    pub u0: ScalarField,
    /// Centers.
    pub theta0: ScalarField,
    pub g: ForceTerm,
    pub f: ForceTerm,
    pub perturbation: Option<PerturbationSpec>,
    /// Declared data bound used only by `validate`.
    pub n_bound: f64,
    pub sources: Option<DataSources>,
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("in field '{field}': {source}")]
    Dsl { field: String, source: DslError },
    #[error("field '{field}' may only depend on {allowed}")]
    Vars { field: String, allowed: String },
    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

fn sample(grid: &Grid, loc: Loc, e: &Expr, field: &str) -> Result<ScalarField, SpecError> {
    let vals: Result<Vec<f64>, DslError> = grid.coords(loc).into_iter().map(|x| e.eval_xt(x, 0.0)).collect();
    vals.map(|v| ScalarField::new(loc, v)).map_err(|source| SpecError::Dsl { field: field.to_string(), source })
}

impl ProblemSpec {
    /// Samples initial data given as expressions of `x`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_exprs(
        grid: Grid,
        gas: GasParams,
        bc: BoundaryData,
        eta0: &Expr,
        u0: &Expr,
        theta0: &Expr,
        g: ForceTerm,
        f: ForceTerm,
        n_bound: f64,
    ) -> Result<Self, SpecError> {
        for (name, e) in [("eta0", eta0), ("u0", u0), ("theta0", theta0)] {
            if e.uses(Var::Xi) || e.uses(Var::Chi) {
                return Err(SpecError::Vars { field: name.into(), allowed: "x, t".into() });
            }
        }
        Ok(Self {
            grid,
            gas,
            bc,
            eta0: sample(&grid, Loc::Center, eta0, "eta0")?,
            u0: sample(&grid, Loc::Edge, u0, "u0")?,
            theta0: sample(&grid, Loc::Center, theta0, "theta0")?,
            g,
            f,
            perturbation: None,
            n_bound,
            sources: Some(DataSources { eta0: eta0.clone(), u0: u0.clone(), theta0: theta0.clone() }),
        })
    }

    pub fn with_perturbation(mut self, p: PerturbationSpec) -> Self {
        self.perturbation = Some(p);
        self
    }

    /// `x_e⁰ = Iη⁰ + β_e` at the edges.
    pub fn x_e0(&self) -> ScalarField {
        let ctx = OperatorContext::new(self.grid);
        let base = ctx.primitive(&self.eta0);
        match &self.perturbation {
            None => base,
            Some(p) => {
                let xs = self.grid.coords(Loc::Edge);
                ScalarField::new(
                    Loc::Edge,
                    base.values
                        .iter()
                        .zip(xs)
                        .map(|(v, x)| v + p.beta_e.eval_xt(x, 0.0).unwrap_or(f64::NAN))
                        .collect(),
                )
            }
        }
    }

    /// Gas volume `V(t) = ‖η⁰‖_{L¹} + I_t(u_X - u_0)` at the step times.
    pub fn gas_volume(&self) -> Vec<f64> {
        let times = self.grid.times();
        let v0 = OperatorContext::new(self.grid).integral(&self.eta0);
        let d: Vec<f64> = times
            .iter()
            .map(|&t| self.bc.ux.at(t).unwrap_or(f64::NAN) - self.bc.u0.at(t).unwrap_or(f64::NAN))
            .collect();
        time_primitive(&times, &d).into_iter().map(|s| v0 + s).collect()
    }
}

/// A violated data condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition, self.message)
    }
}

/// Reports every violated condition; an empty list means the spec is valid.
pub fn validate(spec: &ProblemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |condition: &'static str, message: String| out.push(Violation { condition, message });
    let gr = &spec.grid;
    if Grid::new(gr.x_len, gr.t_end, gr.nx, gr.nt).is_err() {
        push("grid", format!("invalid grid {gr:?}"));
    }
    let gas = &spec.gas;
    for (name, v) in [("nu", gas.nu), ("k", gas.k), ("cV", gas.c_v), ("lambda", gas.lambda)] {
        if !(v > 0.0 && v.is_finite()) {
            push("gas", format!("{name} must be positive, got {v}"));
        }
    }
    if !(spec.n_bound >= 1.0) {
        push("N", format!("N must be at least 1, got {}", spec.n_bound));
    }
    let inv_n = 1.0 / spec.n_bound;
    if !(1..=3).contains(&spec.bc.m) {
        push("bc", format!("boundary family must be 1, 2 or 3, got {}", spec.bc.m));
    }
    if spec.eta0.len() != gr.nx || spec.theta0.len() != gr.nx || spec.u0.len() != gr.nx + 1 {
        push("grid", "initial data do not match the grid".into());
        return out;
    }

    let edges = gr.coords(Loc::Edge);
    let eta_min = spec.eta0.values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut theta_min = spec.theta0.values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut eta_edge_min = f64::INFINITY;
    if let Some(src) = &spec.sources {
        for &x in &edges {
            theta_min = theta_min.min(src.theta0.eval_xt(x, 0.0).unwrap_or(f64::NAN));
            eta_edge_min = eta_edge_min.min(src.eta0.eval_xt(x, 0.0).unwrap_or(f64::NAN));
        }
    }
    if !(eta_min >= inv_n) || eta_edge_min < inv_n || eta_edge_min.is_nan() {
        push("C1", format!("eta0 must be at least 1/N = {inv_n}, minimum is {}", eta_min.min(eta_edge_min)));
    }
    if !(theta_min > 0.0) {
        push("C1", format!("theta0 must be strictly positive, minimum is {theta_min}"));
    }
    if spec.u0.values.iter().any(|v| !v.is_finite()) {
        push("C1", "u0 must be finite".into());
    }

    let times = gr.times();
    let xe0 = OperatorContext::new(*gr).primitive(&spec.eta0).to_centers();
    let centers = gr.coords(Loc::Center);
    let mut f_min = f64::INFINITY;
    let mut g_bad = false;
    if !spec.f.is_zero() || !spec.g.is_zero() {
        for &t in &times {
            for (i, &x) in centers.iter().enumerate() {
                if !spec.f.is_zero() {
                    f_min = f_min.min(spec.f.eval(xe0.values[i], x, t).unwrap_or(f64::NAN));
                }
                if !spec.g.is_zero() && !spec.g.eval(xe0.values[i], x, t).is_ok_and(f64::is_finite) {
                    g_bad = true;
                }
            }
        }
    }
    if f_min < 0.0 || f_min.is_nan() {
        push("C2", format!("f must be nonnegative, minimum sampled value is {f_min}"));
    }
    if g_bad {
        push("C2", "g must be finite and bounded".into());
    }

    for (name, s) in spec.bc.inactive() {
        if !s.is_zero() {
            push("bc", format!("{name} is not used by family m = {} and must be zero", spec.bc.m));
        }
    }
    for (name, s) in spec.bc.active_pressures() {
        let lo = s.sample(&times).into_iter().fold(f64::INFINITY, f64::min);
        if !(lo >= inv_n) {
            push("C3", format!("pressure {name} must be at least 1/N = {inv_n}, minimum is {lo}"));
        }
    }
    for (name, s) in [("pi0", &spec.bc.pi0), ("piX", &spec.bc.pix)] {
        let v = s.sample(&times);
        if v.iter().any(|x| !x.is_finite()) {
            push("bc", format!("{name} must be finite"));
        }
    }
    for (name, s) in [("u0", &spec.bc.u0), ("uX", &spec.bc.ux)] {
        if s.sample(&times).iter().any(|x| !x.is_finite()) {
            push("bc", format!("{name} must be finite"));
        }
    }
    if spec.bc.m == 1 {
        let vol = spec.gas_volume();
        if let Some((n, v)) = vol.iter().enumerate().find(|(_, v)| !(**v >= inv_n)) {
            push("gas volume", format!("gas volume {v} drops below 1/N = {inv_n} at t = {}", times[n]));
        }
    }
    if let Some(p) = &spec.perturbation {
        let bad = times.iter().any(|&t| {
            edges.iter().any(|&x| {
                !p.beta_at(x, t).is_ok_and(f64::is_finite) || !p.gamma_at(x, t).is_ok_and(f64::is_finite)
            })
        });
        if bad {
            push("perturbation", "beta and gamma must be finite on the grid".into());
        }
    }
    out
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainCfg {
    #[serde(rename = "X")]
    pub x: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCfg {
    pub nx: usize,
    pub nt: usize,
}

/// A boundary time series: number, DSL expression in `t`, or table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesCfg {
    Num(f64),
    Expr(String),
    Table { t: Vec<f64>, v: Vec<f64> },
}

impl Default for SeriesCfg {
    fn default() -> Self {
        SeriesCfg::Num(0.0)
    }
}

impl SeriesCfg {
    fn build(&self, field: &str) -> Result<TimeSeries, SpecError> {
        match self {
            SeriesCfg::Num(c) => Ok(TimeSeries::Const(*c)),
            SeriesCfg::Expr(s) => {
                let e = parse(s).map_err(|source| SpecError::Dsl { field: field.into(), source })?;
                if e.uses(Var::X) || e.uses(Var::Xi) || e.uses(Var::Chi) {
                    return Err(SpecError::Vars { field: field.into(), allowed: "t".into() });
                }
                Ok(TimeSeries::Expr(e))
            }
            SeriesCfg::Table { t, v } => {
                if t.len() != v.len() || t.is_empty() || t.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(SpecError::Invalid(format!("table for '{field}' needs increasing times and matching values")));
                }
                Ok(TimeSeries::Table { t: t.clone(), v: v.clone() })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcCfg {
    pub m: u8,
    #[serde(default)]
    pub u0: SeriesCfg,
    #[serde(default, rename = "uX")]
    pub ux: SeriesCfg,
    #[serde(default)]
    pub p0: SeriesCfg,
    #[serde(default, rename = "pX")]
    pub px: SeriesCfg,
    #[serde(default)]
    pub pi0: SeriesCfg,
    #[serde(default, rename = "piX")]
    pub pix: SeriesCfg,
}

fn zero_expr() -> String {
    "0".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataCfg {
    pub eta0: String,
    pub u0: String,
    pub theta0: String,
    #[serde(default = "zero_expr")]
    pub g: String,
    #[serde(default = "zero_expr")]
    pub f: String,
    /// ξ-breakpoints shared by all two-scale data fields.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breakpoints_xi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_xi: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCfg {
    #[serde(default = "zero_expr")]
    pub beta: String,
    /// First part of the split of β; defaults to β itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<String>,
    #[serde(default = "zero_expr")]
    pub gamma: String,
    #[serde(default = "zero_expr")]
    pub beta_e: String,
    #[serde(default = "zero_expr")]
    pub g1: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub domain: DomainCfg,
    pub grid: GridCfg,
    pub gas: GasParams,
    pub bc: BcCfg,
    pub data: DataCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationCfg>,
    #[serde(rename = "N")]
    pub n: f64,
}

fn parse_field(src: &str, field: &str) -> Result<Expr, SpecError> {
    parse(src).map_err(|source| SpecError::Dsl { field: field.into(), source })
}

impl ProblemConfig {
    pub fn from_json(s: &str) -> Result<Self, SpecError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Grid, SpecError> {
        Ok(Grid::new(self.domain.x, self.domain.t, self.grid.nx, self.grid.nt)?)
    }

    pub fn boundary(&self) -> Result<BoundaryData, SpecError> {
        let b = &self.bc;
        if !(1..=3).contains(&b.m) {
            return Err(SpecError::Invalid(format!("boundary family must be 1, 2 or 3, got {}", b.m)));
        }
        Ok(BoundaryData {
            m: b.m,
            u0: b.u0.build("bc.u0")?,
            ux: b.ux.build("bc.uX")?,
            p0: b.p0.build("bc.p0")?,
            px: b.px.build("bc.pX")?,
            pi0: b.pi0.build("bc.pi0")?,
            pix: b.pix.build("bc.piX")?,
        })
    }

    pub fn certificate(&self) -> Result<PiecewiseCertificate, SpecError> {
        PiecewiseCertificate::new(self.data.breakpoints_xi.clone()).map_err(|e| SpecError::Invalid(e.to_string()))
    }

    /// Parsed `(eta0, u0, theta0, g, f)` expressions.
    pub fn data_exprs(&self) -> Result<[Expr; 5], SpecError> {
        let d = &self.data;
        Ok([
            parse_field(&d.eta0, "data.eta0")?,
            parse_field(&d.u0, "data.u0")?,
            parse_field(&d.theta0, "data.theta0")?,
            parse_field(&d.g, "data.g")?,
            parse_field(&d.f, "data.f")?,
        ])
    }

    pub fn is_two_scale(&self) -> Result<bool, SpecError> {
        Ok(self.data_exprs()?.iter().any(|e| e.uses(Var::Xi)))
    }

    pub fn perturbation_spec(&self) -> Result<Option<PerturbationSpec>, SpecError> {
        let Some(p) = &self.perturbation else { return Ok(None) };
        let beta = parse_field(&p.beta, "perturbation.beta")?;
        let beta1 = match &p.beta1 {
            Some(s) => parse_field(s, "perturbation.beta1")?,
            None => beta.clone(),
        };
        let spec = PerturbationSpec::with_split(
            beta,
            beta1,
            parse_field(&p.gamma, "perturbation.gamma")?,
            parse_field(&p.beta_e, "perturbation.beta_e")?,
            parse_field(&p.g1, "perturbation.g1")?,
        );
        for (name, e) in [("beta", &spec.beta2), ("beta1", &spec.beta1), ("gamma", &spec.gamma), ("beta_e", &spec.beta_e), ("g1", &spec.g1)] {
            if e.uses(Var::Xi) || e.uses(Var::Chi) {
                return Err(SpecError::Vars { field: format!("perturbation.{name}"), allowed: "x, t".into() });
            }
        }
        Ok(Some(spec))
    }

    /// Builds the spec of a problem whose data do not depend on ξ.
    pub fn build(&self) -> Result<ProblemSpec, SpecError> {
        let grid = self.grid()?;
        let [eta0, u0, theta0, g, f] = self.data_exprs()?;
        if [&eta0, &u0, &theta0, &g, &f].iter().any(|e| e.uses(Var::Xi)) {
            return Err(SpecError::Invalid("data depend on xi; use the two-scale tools".into()));
        }
        let mut spec = ProblemSpec::from_exprs(
            grid,
            self.gas,
            self.boundary()?,
            &eta0,
            &u0,
            &theta0,
            ForceTerm::from_expr(g),
            ForceTerm::from_expr(f),
            self.n,
        )?;
        spec.perturbation = self.perturbation_spec()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Expr {
        parse(s).unwrap()
    }

    fn base(m: u8, theta0: &str) -> ProblemSpec {
        let grid = Grid::new(1.0, 1.0, 16, 20).unwrap();
        let bc = match m {
            1 => BoundaryData::velocity(TimeSeries::zero(), TimeSeries::zero(), TimeSeries::zero(), TimeSeries::zero()),
            _ => BoundaryData::pressure(TimeSeries::Const(1.0), TimeSeries::Const(1.0), TimeSeries::zero(), TimeSeries::zero()),
        };
        ProblemSpec::from_exprs(grid, GasParams::default(), bc, &e("1"), &e("0"), &e(theta0), ForceTerm::Zero, ForceTerm::Zero, 10.0).unwrap()
    }

    #[test]
    fn constants_are_valid() {
        assert!(validate(&base(3, "1")).is_empty());
    }

    #[test]
    fn vanishing_temperature_reported() {
        let v = validate(&base(3, "x"));
        assert_eq!(v.len(), 1);
        assert!(v[0].message.starts_with("theta0 must be strictly positive"));
    }

    #[test]
    fn gas_volume_violation() {
        let mut s = base(1, "1");
        s.bc.ux = TimeSeries::Const(-2.0);
        let v = validate(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].condition, "gas volume");
        let times = s.grid.times();
        let first = times.iter().position(|t| 1.0 - 2.0 * t < 0.1).unwrap();
        assert!(v[0].message.ends_with(&format!("at t = {}", times[first])));
    }

    #[test]
    fn inactive_and_pressure_checks() {
        let mut s = base(3, "1");
        s.bc.u0 = TimeSeries::Const(1.0);
        s.bc.p0 = TimeSeries::Const(0.01);
        let v = validate(&s);
        assert!(v.iter().any(|x| x.condition == "bc"));
        assert!(v.iter().any(|x| x.condition == "C3"));
    }

    #[test]
    fn table_interpolation() {
        let ts = TimeSeries::Table { t: vec![0.0, 1.0, 3.0], v: vec![0.0, 2.0, 0.0] };
        assert_eq!(ts.at(0.5).unwrap(), 1.0);
        assert_eq!(ts.at(2.0).unwrap(), 1.0);
        assert_eq!(ts.at(5.0).unwrap(), 0.0);
        assert_eq!(ts.at(-1.0).unwrap(), 0.0);
    }

    #[test]
    fn config_round_trip() {
        let src = r#"{
            "domain": {"X": 1.0, "T": 0.5},
            "grid": {"nx": 32, "nt": 10},
            "gas": {"nu": 1.0, "k": 1.0, "cV": 2.0, "lambda": 0.5},
            "bc": {"m": 3, "p0": 1.0, "pX": "1 + 0.1*t", "pi0": {"t": [0, 1], "v": [0, 0.1]}},
            "data": {"eta0": "1 + 0.2*sin(2*pi*x)", "u0": "0.1*sin(pi*x)", "theta0": "1"},
            "perturbation": {"beta": "0.01*x", "gamma": "0.001"},
            "N": 10
        }"#;
        let cfg = ProblemConfig::from_json(src).unwrap();
        let again = ProblemConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        let a = cfg.build().unwrap();
        let b = again.build().unwrap();
        assert_eq!(a, b);
        assert!(validate(&a).is_empty(), "{:?}", validate(&a));
        assert_eq!(a.bc.pi0.at(0.5).unwrap(), 0.05);
        let p = a.perturbation.as_ref().unwrap();
        assert!((p.beta_at(0.3, 0.1).unwrap() - 0.003).abs() < 1e-17);
    }
}
