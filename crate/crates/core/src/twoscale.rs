//! Two-scale fields `w(ξ, x[, t])`, their realization at scale ε, cell
//! averages and the averaged initial temperature.

use crate::dsl::{parse, BinOp, Bindings, DslError, Expr, Func, PiecewiseCertificate, Var};
use crate::grid::{Grid, Loc, ScalarField, SpaceTimeField};
use crate::norms::wh_two_scale;
use crate::ops::OperatorContext;
use thiserror::Error;

pub const DEFAULT_N_XI: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwoScaleError {
    #[error("scale must be in (0, 1], got {0}")]
    BadScale(f64),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

/// Fast variable `ξ = {x/ε - a_ε}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationSpec {
    pub eps: f64,
    pub a_eps: f64,
}

impl OscillationSpec {
    pub fn new(eps: f64) -> Result<Self, TwoScaleError> {
        Self::with_phase(eps, 0.0)
    }

    pub fn with_phase(eps: f64, a_eps: f64) -> Result<Self, TwoScaleError> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(TwoScaleError::BadScale(eps));
        }
        Ok(Self { eps, a_eps })
    }

    pub fn xi(&self, x: f64) -> f64 {
        let v = if self.a_eps == 0.0 { x / self.eps } else { x / self.eps - self.a_eps };
        v - v.floor()
    }

    /// The same map as a DSL expression in `x`.
    pub fn xi_expr(&self) -> Expr {
        let mut v = Expr::bin(BinOp::Div, Expr::Var(Var::X), Expr::Num(self.eps));
        if self.a_eps != 0.0 {
            v = Expr::bin(BinOp::Sub, v, Expr::Num(self.a_eps));
        }
        Expr::call(Func::Frac, vec![v])
    }
}

/// Composite midpoint nodes and weights on `(0, 1)` refined at the breakpoints.
pub fn xi_nodes(cert: &PiecewiseCertificate, n_xi: usize) -> Vec<(f64, f64)> {
    let mut cuts = vec![0.0];
    cuts.extend_from_slice(cert.breakpoints());
    cuts.push(1.0);
    let mut out = Vec::with_capacity(n_xi + cuts.len());
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        let n = ((len * n_xi as f64).round() as usize).max(1);
        let h = len / n as f64;
        for k in 0..n {
            out.push((w[0] + (k as f64 + 0.5) * h, h));
        }
    }
    out
}

/// A function of `(ξ, x)` or `(ξ, x, t)`, possibly also of `χ`, with
/// certified ξ-breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleField {
    pub expr: Expr,
    pub cert: PiecewiseCertificate,
    pub n_xi: usize,
}

impl TwoScaleField {
    pub fn new(expr: Expr, cert: PiecewiseCertificate) -> Self {
        Self { expr, cert, n_xi: DEFAULT_N_XI }
    }

    pub fn parse(src: &str, cert: PiecewiseCertificate) -> Result<Self, DslError> {
        Ok(Self::new(parse(src)?, cert))
    }

    pub fn with_n_xi(mut self, n_xi: usize) -> Self {
        self.n_xi = n_xi.max(1);
        self
    }

    pub fn is_xi_independent(&self) -> bool {
        !self.expr.uses(Var::Xi)
    }

    pub fn nodes(&self) -> Vec<(f64, f64)> {
        xi_nodes(&self.cert, self.n_xi)
    }

    pub fn eval(&self, xi: f64, x: f64, t: f64) -> Result<f64, DslError> {
        self.expr.eval(&Bindings::xt(x, t).with_xi(xi))
    }

    /// `w^(ε)` as an expression in `x` (and `t`, `χ`).
    pub fn realize_expr(&self, osc: &OscillationSpec) -> Expr {
        self.expr.substitute(Var::Xi, &osc.xi_expr())
    }

    /// `⟨w⟩` as an expression when `w` does not depend on ξ.
    pub fn mean_expr(&self) -> Option<Expr> {
        self.is_xi_independent().then(|| self.expr.clone())
    }

    /// `w^(ε)(x, t) = w({x/ε - a_ε}, x, t)`; right-continuous at jumps.
    pub fn realize(&self, grid: &Grid, loc: Loc, osc: &OscillationSpec, t: f64) -> Result<ScalarField, DslError> {
        let vals: Result<Vec<f64>, DslError> =
            grid.coords(loc).into_iter().map(|x| self.eval(osc.xi(x), x, t)).collect();
        Ok(ScalarField::new(loc, vals?))
    }

    pub fn realize_in_time(&self, grid: &Grid, loc: Loc, osc: &OscillationSpec, times: &[f64]) -> Result<SpaceTimeField, DslError> {
        let rows: Result<Vec<Vec<f64>>, DslError> =
            times.iter().map(|&t| self.realize(grid, loc, osc, t).map(|f| f.values)).collect();
        Ok(SpaceTimeField::new(loc, times.to_vec(), rows?))
    }

    /// `⟨w⟩(x, t) = ∫_0^1 w(ξ, x, t) dξ`.
    pub fn mean_at(&self, x: f64, t: f64) -> Result<f64, DslError> {
        if self.is_xi_independent() {
            return self.expr.eval_xt(x, t);
        }
        let mut s = 0.0;
        for (xi, w) in self.nodes() {
            s += w * self.eval(xi, x, t)?;
        }
        Ok(s)
    }

    pub fn xi_mean(&self, grid: &Grid, loc: Loc, t: f64) -> Result<ScalarField, DslError> {
        let vals: Result<Vec<f64>, DslError> = grid.coords(loc).into_iter().map(|x| self.mean_at(x, t)).collect();
        Ok(ScalarField::new(loc, vals?))
    }

    pub fn xi_mean_in_time(&self, grid: &Grid, loc: Loc, times: &[f64]) -> Result<SpaceTimeField, DslError> {
        let rows: Result<Vec<Vec<f64>>, DslError> =
            times.iter().map(|&t| self.xi_mean(grid, loc, t).map(|f| f.values)).collect();
        Ok(SpaceTimeField::new(loc, times.to_vec(), rows?))
    }

    /// `R_ε w = w^(ε) - ⟨w⟩`.
    pub fn averaging_error(&self, grid: &Grid, loc: Loc, osc: &OscillationSpec, t: f64) -> Result<ScalarField, DslError> {
        Ok(self.realize(grid, loc, osc, t)?.sub(&self.xi_mean(grid, loc, t)?))
    }

    pub fn averaging_error_in_time(&self, grid: &Grid, loc: Loc, osc: &OscillationSpec, times: &[f64]) -> Result<SpaceTimeField, DslError> {
        Ok(self.realize_in_time(grid, loc, osc, times)?.sub(&self.xi_mean_in_time(grid, loc, times)?))
    }

    /// Samples `w(ξ_k, ·, t)` at the ξ-nodes.
    pub fn samples(&self, grid: &Grid, loc: Loc, t: f64) -> Result<Vec<(f64, ScalarField)>, DslError> {
        let xs = grid.coords(loc);
        self.nodes()
            .into_iter()
            .map(|(xi, w)| {
                let v: Result<Vec<f64>, DslError> = xs.iter().map(|&x| self.eval(xi, x, t)).collect();
                Ok((w, ScalarField::new(loc, v?)))
            })
            .collect()
    }

    /// `WH^{0,1;1}` norm at time `t`.
    pub fn wh_seminorm(&self, grid: &Grid, loc: Loc, t: f64) -> Result<f64, DslError> {
        Ok(wh_two_scale(grid, &self.samples(grid, loc, t)?))
    }
}

/// `θ̂⁰ = ⟨(u⁰ - ⟨u⁰⟩)²⟩ / (2c_V) + ⟨θ⁰⟩` at the cell centers.
pub fn homogenized_theta0(u0: &TwoScaleField, theta0: &TwoScaleField, c_v: f64, grid: &Grid) -> Result<ScalarField, DslError> {
    let mut out = Vec::with_capacity(grid.nx);
    let nodes = u0.nodes();
    for x in grid.coords(Loc::Center) {
        let th = theta0.mean_at(x, 0.0)?;
        if u0.is_xi_independent() {
            out.push(th);
            continue;
        }
        let vals: Result<Vec<f64>, DslError> = nodes.iter().map(|&(xi, _)| u0.eval(xi, x, 0.0)).collect();
        let vals = vals?;
        let mean: f64 = nodes.iter().zip(&vals).map(|((_, w), v)| w * v).sum();
        let var: f64 = nodes.iter().zip(&vals).map(|((_, w), v)| w * (v - mean) * (v - mean)).sum();
        out.push(var / (2.0 * c_v) + th);
    }
    Ok(ScalarField::new(Loc::Center, out))
}

/// `β_eε = -I R_ε η⁰` at the edges.
pub fn beta_e_of(eta0: &TwoScaleField, grid: &Grid, osc: &OscillationSpec) -> Result<ScalarField, DslError> {
    let r = eta0.averaging_error(grid, Loc::Center, osc, 0.0)?;
    Ok(OperatorContext::new(*grid).primitive(&r).scale(-1.0))
}
