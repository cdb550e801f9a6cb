//! Averaged problem for rapidly oscillating data and explicit
//! reconstruction of the two-scale specific volume.
//!
//! With constant gas parameters the two-scale system closes on
//! `(⟨η⟩, û, θ̂, x̂_e)`, which is an ordinary problem of the same family.
//! The specific volume then follows from
//! `η = B̂[η⁰ + (k/ν) I_t(B̂⁻¹θ̂)]`, `B̂ = exp(I_tσ̂/ν)`.

use crate::dsl::{DslError, Var};
use crate::grid::{Grid, Loc, ScalarField, SpaceTimeField};
use crate::norms::{lqr_norm, Exponent};
use crate::problem::{BoundaryData, ForceTerm, GasParams, ProblemConfig, ProblemSpec, SpecError};
use crate::solver::{solve, SchemeParams, SolutionBundle, SolverError};
use crate::twoscale::{homogenized_theta0, OscillationSpec, TwoScaleField, DEFAULT_N_XI};
use serde::{Deserialize, Serialize};

/// Data of the oscillating problem family: fields of `(ξ, x)`; forces may
/// also depend on `χ` and `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleData {
    pub grid: Grid,
    pub gas: GasParams,
    pub bc: BoundaryData,
    pub eta0: TwoScaleField,
    pub u0: TwoScaleField,
    pub theta0: TwoScaleField,
    pub g: TwoScaleField,
    pub f: TwoScaleField,
    pub n_bound: f64,
}

fn force_of(expr: crate::dsl::Expr) -> ForceTerm {
    ForceTerm::from_expr(expr)
}

impl TwoScaleData {
    pub fn from_config(cfg: &ProblemConfig) -> Result<Self, SpecError> {
        let cert = cfg.certificate()?;
        let n_xi = cfg.data.n_xi.unwrap_or(DEFAULT_N_XI);
        let [eta0, u0, theta0, g, f] = cfg.data_exprs()?;
        for (name, e) in [("eta0", &eta0), ("u0", &u0), ("theta0", &theta0)] {
            if e.uses(Var::Chi) {
                return Err(SpecError::Vars { field: format!("data.{name}"), allowed: "xi, x".into() });
            }
        }
        let tf = |e| TwoScaleField::new(e, cert.clone()).with_n_xi(n_xi);
        Ok(Self {
            grid: cfg.grid()?,
            gas: cfg.gas,
            bc: cfg.boundary()?,
            eta0: tf(eta0),
            u0: tf(u0),
            theta0: tf(theta0),
            g: tf(g),
            f: tf(f),
            n_bound: cfg.n,
        })
    }

    pub fn is_xi_independent(&self) -> bool {
        [&self.eta0, &self.u0, &self.theta0, &self.g, &self.f].iter().all(|w| w.is_xi_independent())
    }

    /// The problem with data realized at scale ε.
    pub fn realized_spec(&self, osc: &OscillationSpec) -> Result<ProblemSpec, SpecError> {
        ProblemSpec::from_exprs(
            self.grid,
            self.gas,
            self.bc.clone(),
            &self.eta0.realize_expr(osc),
            &self.u0.realize_expr(osc),
            &self.theta0.realize_expr(osc),
            force_of(self.g.realize_expr(osc)),
            force_of(self.f.realize_expr(osc)),
            self.n_bound,
        )
    }

    fn averaged_force(w: &TwoScaleField) -> ForceTerm {
        match w.mean_expr() {
            Some(e) => force_of(e),
            None => ForceTerm::XiMean { expr: w.expr.clone(), nodes: w.nodes() },
        }
    }

    /// The averaged problem: `⟨η⁰⟩`, `⟨u⁰⟩`, `θ̂⁰`, `⟨g⟩`, `⟨f⟩`.
    pub fn averaged_spec(&self) -> Result<ProblemSpec, SpecError> {
        let dsl = |field: &str| {
            let field = field.to_string();
            move |source: DslError| SpecError::Dsl { field: field.clone(), source }
        };
        let grid = &self.grid;
        Ok(ProblemSpec {
            grid: *grid,
            gas: self.gas,
            bc: self.bc.clone(),
            eta0: self.eta0.xi_mean(grid, Loc::Center, 0.0).map_err(dsl("eta0"))?,
            u0: self.u0.xi_mean(grid, Loc::Edge, 0.0).map_err(dsl("u0"))?,
            theta0: homogenized_theta0(&self.u0, &self.theta0, self.gas.c_v, grid).map_err(dsl("theta0"))?,
            g: Self::averaged_force(&self.g),
            f: Self::averaged_force(&self.f),
            perturbation: None,
            n_bound: self.n_bound,
            sources: None,
        })
    }
}

/// Quadrature behind `B̂` and `I_t(B̂⁻¹θ̂)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Discrete exponential of the solver's mass update; `⟨η⟩` is
    /// reproduced to round-off.
    #[default]
    Scheme,
    /// Trapezoid `I_tσ̂` followed by `exp`; first order in time.
    Exponential,
}

/// Solution of the averaged problem with the factor `B̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogSolution {
    pub base: SolutionBundle,
    pub rule: Reconstruction,
    /// `exp(I_tσ̂/ν)` at the centers and stored times.
    pub b_hat: SpaceTimeField,
}

pub fn solve_homogenized(data: &TwoScaleData, scheme: &SchemeParams) -> Result<HomogSolution, SolverError> {
    let spec = data.averaged_spec().map_err(|e| SolverError::Data(e.to_string()))?;
    let base = solve(&spec, scheme)?;
    Ok(HomogSolution::from_base(base, Reconstruction::default()))
}

impl HomogSolution {
    pub fn from_base(base: SolutionBundle, rule: Reconstruction) -> Self {
        let nu = base.spec.gas.nu;
        let it_sigma = match rule {
            Reconstruction::Scheme => &base.it_sigma_be,
            Reconstruction::Exponential => &base.it_sigma_tr,
        };
        let b_hat = it_sigma.map(|s| (s / nu).exp());
        Self { base, rule, b_hat }
    }

    pub fn with_rule(self, rule: Reconstruction) -> Self {
        Self::from_base(self.base, rule)
    }

    fn it_binv_theta(&self) -> &SpaceTimeField {
        match self.rule {
            Reconstruction::Scheme => &self.base.it_binv_theta_be,
            Reconstruction::Exponential => &self.base.it_binv_theta,
        }
    }

    /// `B̂[y⁰ + (k/ν) I_t(B̂⁻¹θ̂)]` for an initial profile `y⁰` at the centers.
    pub fn evolve_initial(&self, y0: &[f64]) -> SpaceTimeField {
        let GasParams { nu, k, .. } = self.base.spec.gas;
        let rows = self
            .b_hat
            .rows
            .iter()
            .zip(&self.it_binv_theta().rows)
            .map(|(b, it)| (0..y0.len()).map(|i| b[i] * (y0[i] + k / nu * it[i])).collect())
            .collect();
        SpaceTimeField::new(Loc::Center, self.b_hat.times.clone(), rows)
    }

    /// `η(ξ, ·, ·)` for one cell point ξ.
    pub fn reconstruct_eta(&self, eta0: &TwoScaleField, xi: f64) -> Result<SpaceTimeField, DslError> {
        let y0: Result<Vec<f64>, DslError> =
            self.base.grid().coords(Loc::Center).into_iter().map(|x| eta0.eval(xi, x, 0.0)).collect();
        Ok(self.evolve_initial(&y0?))
    }

    /// `⟨η⟩` from the reconstruction formula.
    pub fn reconstruct_eta_mean(&self, eta0: &TwoScaleField) -> Result<SpaceTimeField, DslError> {
        let y0 = eta0.xi_mean(self.base.grid(), Loc::Center, 0.0)?;
        Ok(self.evolve_initial(&y0.values))
    }

    /// `η^(ε) = B̂[η^{0,ε} + (k/ν) I_t(B̂⁻¹θ̂)]`.
    pub fn eta_epsilon(&self, eta0: &TwoScaleField, osc: &OscillationSpec) -> Result<SpaceTimeField, DslError> {
        let y0 = eta0.realize(self.base.grid(), Loc::Center, osc, 0.0)?;
        Ok(self.evolve_initial(&y0.values))
    }

    /// `β^(ε) = σ̂(η^(ε) - ⟨η⟩)/ν` at the centers.
    pub fn beta_epsilon(&self, eta_eps: &SpaceTimeField) -> SpaceTimeField {
        let nu = self.base.spec.gas.nu;
        let r = eta_eps.sub(&self.base.eta);
        self.base.sigma().zip_with(&r, |s, d| s * d / nu)
    }

    /// `γ^(ε) = π̂(η^(ε) - ⟨η⟩)/λ` at the edges; the averaging error is
    /// carried to the interior edges by the mean of its neighbours.
    pub fn gamma_epsilon(&self, eta_eps: &SpaceTimeField) -> SpaceTimeField {
        let lam = self.base.spec.gas.lambda;
        let r = eta_eps.sub(&self.base.eta);
        let pi = self.base.pi();
        let rows = pi
            .rows
            .iter()
            .zip(&r.rows)
            .map(|(p, d)| {
                let nx = d.len();
                (0..=nx)
                    .map(|j| {
                        let rj = if j == 0 {
                            d[0]
                        } else if j == nx {
                            d[nx - 1]
                        } else {
                            0.5 * (d[j - 1] + d[j])
                        };
                        p[j] * rj / lam
                    })
                    .collect()
            })
            .collect();
        SpaceTimeField::new(Loc::Edge, pi.times.clone(), rows)
    }

    /// `‖σ̃⟨η⟩/ν + kθ̂/ν - Dû‖_{L²(Q)}` where `σ̃` is the difference quotient
    /// in time of the trapezoid `I_tσ̂` between consecutive stored states.
    pub fn eq6g_residual(&self) -> f64 {
        let b = &self.base;
        let GasParams { nu, k, .. } = b.spec.gas;
        let du = b.du();
        let times = &b.eta.times;
        let rows: Vec<Vec<f64>> = (1..times.len())
            .map(|n| {
                let h = times[n] - times[n - 1];
                (0..b.grid().nx)
                    .map(|i| {
                        let s = (b.it_sigma_tr.rows[n][i] - b.it_sigma_tr.rows[n - 1][i]) / h;
                        s * b.eta.rows[n][i] / nu + k * b.theta.rows[n][i] / nu - du.rows[n][i]
                    })
                    .collect()
            })
            .collect();
        let w = SpaceTimeField::new(Loc::Center, times[1..].to_vec(), rows);
        lqr_norm(b.grid(), &w, Exponent::Finite(2.0), Exponent::Finite(2.0)).expect("valid exponents")
    }
}

/// `‖a - b‖_{C(0,T;L²)}` for fields on the same grid and times.
pub fn c_l2_distance(grid: &Grid, a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    lqr_norm(grid, &a.sub(b), Exponent::Finite(2.0), Exponent::Inf).expect("valid exponents")
}

/// Realized initial data `η^{0,ε}` at the centers.
pub fn realized_eta0(data: &TwoScaleData, osc: &OscillationSpec) -> Result<ScalarField, DslError> {
    data.eta0.realize(&data.grid, Loc::Center, osc, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse, PiecewiseCertificate};
    use crate::problem::TimeSeries;

    fn data(eta0: &str, u0: &str, bps: &[f64]) -> TwoScaleData {
        let cert = PiecewiseCertificate::new(bps.to_vec()).unwrap();
        let tf = |s: &str| TwoScaleField::parse(s, cert.clone()).unwrap();
        TwoScaleData {
            grid: Grid::new(1.0, 0.2, 64, 40).unwrap(),
            gas: GasParams::default(),
            bc: BoundaryData::pressure(TimeSeries::Const(1.0), TimeSeries::Const(1.0), TimeSeries::zero(), TimeSeries::zero()),
            eta0: tf(eta0),
            u0: tf(u0),
            theta0: tf("1"),
            g: tf("0"),
            f: tf("0"),
            n_bound: 10.0,
        }
    }

    #[test]
    fn xi_independent_matches_direct_solve() {
        let d = data("1 + 0.2*x", "0.1*sin(pi*x)", &[]);
        let hs = solve_homogenized(&d, &SchemeParams::default()).unwrap();
        let direct = ProblemSpec::from_exprs(
            d.grid,
            d.gas,
            d.bc.clone(),
            &parse("1 + 0.2*x").unwrap(),
            &parse("0.1*sin(pi*x)").unwrap(),
            &parse("1").unwrap(),
            ForceTerm::Zero,
            ForceTerm::Zero,
            10.0,
        )
        .unwrap();
        let sol = solve(&direct, &SchemeParams::default()).unwrap();
        assert_eq!(hs.base.eta, sol.eta);
        assert_eq!(hs.base.u, sol.u);
        assert_eq!(hs.base.theta, sol.theta);
        let osc = OscillationSpec::new(1.0 / 8.0).unwrap();
        let ee = hs.eta_epsilon(&d.eta0, &osc).unwrap();
        assert!(c_l2_distance(&d.grid, &ee, &hs.base.eta) < 1e-3);
    }

    #[test]
    fn variance_enters_theta_hat() {
        let d = data("1", "2*step(xi - 0.5) - 1", &[0.5]);
        let spec = d.averaged_spec().unwrap();
        assert!(spec.theta0.values.iter().all(|&v| (v - 1.5).abs() < 1e-12));
        assert!(spec.u0.max_abs() < 1e-15);
    }

    #[test]
    fn reconstruction_at_initial_time() {
        let d = data("1 + 0.5*step(xi - 0.5)", "0", &[0.5]);
        let hs = solve_homogenized(&d, &SchemeParams::default()).unwrap();
        let osc = OscillationSpec::new(1.0 / 8.0).unwrap();
        let ee = hs.eta_epsilon(&d.eta0, &osc).unwrap();
        assert_eq!(ee.rows[0], realized_eta0(&d, &osc).unwrap().values);
        let mean = hs.reconstruct_eta_mean(&d.eta0).unwrap();
        assert!(c_l2_distance(&d.grid, &mean, &hs.base.eta) < 1e-9);
        let hs = hs.with_rule(Reconstruction::Exponential);
        let mean = hs.reconstruct_eta_mean(&d.eta0).unwrap();
        assert!(c_l2_distance(&d.grid, &mean, &hs.base.eta) < 1e-2);
    }
}
