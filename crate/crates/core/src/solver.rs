//! Semi-implicit staggered solver for the gas system and its perturbed form.
//!
//! Each step is backward Euler (or a θ-weighted variant for the diffusion
//! terms) with Picard iteration on the density and temperature entering the
//! stress and the heat flux. The mass update is exactly conservative.

use crate::grid::{Grid, Loc, ScalarField, SpaceTimeField};
use crate::linalg::solve_tridiagonal;
use crate::norms::{lqr_norm, Exponent};
use crate::ops::OperatorContext;
use crate::problem::{validate, GasParams, ProblemSpec, Violation};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeParams {
    /// Weight of the new time level in `Du` and `Dθ`, in `[1/2, 1]`.
    pub theta_implicitness: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// How many times one step may be halved.
    pub max_halvings: u32,
    pub positivity_floor: f64,
    /// Store a snapshot every this many base steps; the final state is always stored.
    pub store_every: usize,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            theta_implicitness: 1.0,
            max_iterations: 50,
            tolerance: 1e-10,
            max_halvings: 10,
            positivity_floor: 1e-12,
            store_every: 1,
        }
    }
}

impl SchemeParams {
    pub fn storing_every(mut self, n: usize) -> Self {
        self.store_every = n;
        self
    }

    fn check(&self) -> Result<(), SolverError> {
        let th = self.theta_implicitness;
        if !(0.5..=1.0).contains(&th) {
            return Err(SolverError::BadScheme(format!("theta_implicitness {th} outside [1/2, 1]")));
        }
        if !(self.tolerance > 0.0) || !(self.positivity_floor > 0.0) {
            return Err(SolverError::BadScheme("tolerance and positivity floor must be positive".into()));
        }
        if self.max_iterations == 0 || self.store_every == 0 {
            return Err(SolverError::BadScheme("iteration cap and store stride must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("positivity of {variable} lost at t = {t}")]
    PositivityLoss { t: f64, variable: &'static str },
    #[error("nonlinear iteration failed to converge at step {step}")]
    NonlinearDivergence { step: usize },
    #[error("invalid problem: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidSpec(Vec<Violation>),
    #[error("invalid scheme parameters: {0}")]
    BadScheme(String),
    #[error("data evaluation failed: {0}")]
    Data(String),
}

/// Step bookkeeping of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepRecord {
    pub base_dt: f64,
    pub effective_steps: usize,
    pub halved_steps: usize,
    pub max_depth: u32,
    pub min_dt: f64,
    pub picard_iterations: usize,
    pub max_picard: usize,
}

/// Stored trajectory and the time integrals accumulated by the scheme.
///
/// The `it_*` fields are `I_t` of the named quantity by the scheme's own
/// backward rule, so the discrete momentum balance telescopes in them.
/// `it_sigma_tr` and `it_binv_theta` use the trapezoid rule on every substep.
/// `it_sigma_be` is `ν ln B` for the discrete exponential `B` of the mass
/// update, `η^{n+1} = c(η^n + hkθ^{n+1}/ν)`, `B^{n+1} = cB^n`, and
/// `it_binv_theta_be` the matching sum of `hθ^{n+1}/B^n`; with them
/// `η = B[η⁰ + (k/ν)·it_binv_theta_be]` holds to round-off.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionBundle {
    pub spec: ProblemSpec,
    pub scheme: SchemeParams,
    pub eta: SpaceTimeField,
    pub u: SpaceTimeField,
    pub theta: SpaceTimeField,
    pub x_e: SpaceTimeField,
    /// β at the centers at the stored times (zero when unperturbed).
    pub beta: SpaceTimeField,
    /// γ at the edges at the stored times.
    pub gamma: SpaceTimeField,
    pub it_sigma: SpaceTimeField,
    pub it_p: SpaceTimeField,
    /// Edges.
    pub it_g: SpaceTimeField,
    pub it_sigma_tr: SpaceTimeField,
    /// `I_t(exp(-I_tσ/ν) θ)`.
    pub it_binv_theta: SpaceTimeField,
    pub it_sigma_be: SpaceTimeField,
    pub it_binv_theta_be: SpaceTimeField,
    /// `I_t(ū_X - ū_0)` with the scheme's weighting.
    pub flux_integral: Vec<f64>,
    /// `I_t ∫_Ω β`.
    pub beta_integral: Vec<f64>,
    pub it_p0: Vec<f64>,
    pub it_px: Vec<f64>,
    /// Boundary work, boundary heat and source power, integrated in time.
    pub work_integral: Vec<f64>,
    pub steps: StepRecord,
}

impl SolutionBundle {
    pub fn grid(&self) -> &Grid {
        &self.spec.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.eta.times
    }

    pub fn rho(&self) -> SpaceTimeField {
        self.eta.map(|v| 1.0 / v)
    }

    pub fn p(&self) -> SpaceTimeField {
        let k = self.spec.gas.k;
        self.theta.zip_with(&self.eta, |th, e| k * th / e)
    }

    /// `Du` at the centers.
    pub fn du(&self) -> SpaceTimeField {
        let dx = self.grid().dx();
        let rows = self.u.rows.iter().map(|r| r.windows(2).map(|w| (w[1] - w[0]) / dx).collect()).collect();
        SpaceTimeField::new(Loc::Center, self.u.times.clone(), rows)
    }

    /// `σ = νρ(Du + β) - p` at the centers.
    pub fn sigma(&self) -> SpaceTimeField {
        let GasParams { nu, k, .. } = self.spec.gas;
        let du = self.du();
        let rows = (0..self.eta.nt())
            .map(|n| {
                let (e, th, d, b) = (&self.eta.rows[n], &self.theta.rows[n], &du.rows[n], &self.beta.rows[n]);
                (0..e.len()).map(|i| (nu * (d[i] + b[i]) - k * th[i]) / e[i]).collect()
            })
            .collect();
        SpaceTimeField::new(Loc::Center, self.eta.times.clone(), rows)
    }

    /// `π = λρ(Dθ + γ)` at the edges, with the boundary data at the ends.
    pub fn pi(&self) -> SpaceTimeField {
        let lam = self.spec.gas.lambda;
        let dx = self.grid().dx();
        let bc = &self.spec.bc;
        let rows = (0..self.eta.nt())
            .map(|n| {
                let t = self.eta.times[n];
                let (e, th, g) = (&self.eta.rows[n], &self.theta.rows[n], &self.gamma.rows[n]);
                let nx = e.len();
                let mut r = vec![0.0; nx + 1];
                r[0] = bc.pi0.at(t).unwrap_or(f64::NAN);
                r[nx] = bc.pix.at(t).unwrap_or(f64::NAN);
                for j in 1..nx {
                    let rho = 2.0 / (e[j - 1] + e[j]);
                    r[j] = lam * rho * ((th[j] - th[j - 1]) / dx + g[j]);
                }
                r
            })
            .collect();
        SpaceTimeField::new(Loc::Edge, self.eta.times.clone(), rows)
    }

    /// Writes `t, x, eta, u, theta, sigma, pi` at the centers; `u` and `π`
    /// are averaged from the edges.
    pub fn write_trajectory_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "eta", "u", "theta", "sigma", "pi"])?;
        let sigma = self.sigma();
        let pi = self.pi().to_centers();
        let u = self.u.to_centers();
        let xs = self.grid().coords(Loc::Center);
        for n in 0..self.eta.nt() {
            let t = self.eta.times[n];
            for (i, x) in xs.iter().enumerate() {
                w.write_record(
                    [t, *x, self.eta.rows[n][i], u.rows[n][i], self.theta.rows[n][i], sigma.rows[n][i], pi.rows[n][i]]
                        .map(|v| format!("{v:e}")),
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------- stepping

#[derive(Debug, Clone)]
struct Acc {
    it_sigma: Vec<f64>,
    it_p: Vec<f64>,
    it_g: Vec<f64>,
    it_sigma_tr: Vec<f64>,
    sigma_prev: Vec<f64>,
    it_binv_theta: Vec<f64>,
    binv_prev: Vec<f64>,
    it_sigma_be: Vec<f64>,
    it_binv_theta_be: Vec<f64>,
    flux: f64,
    beta_int: f64,
    it_p0: f64,
    it_px: f64,
    work: f64,
}

#[derive(Debug, Clone)]
struct State {
    eta: Vec<f64>,
    u: Vec<f64>,
    theta: Vec<f64>,
    xe: Vec<f64>,
    acc: Acc,
}

enum Fail {
    Positivity(&'static str),
    Divergence,
    Data(String),
}

impl From<crate::dsl::DslError> for Fail {
    fn from(e: crate::dsl::DslError) -> Self {
        Fail::Data(e.to_string())
    }
}

struct Stepper<'a> {
    spec: &'a ProblemSpec,
    p: SchemeParams,
    nx: usize,
    dx: f64,
    xc: Vec<f64>,
    xs: Vec<f64>,
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| {
        let d = (x - y).abs();
        if d.is_nan() {
            f64::INFINITY
        } else {
            m.max(d)
        }
    })
}

impl Stepper<'_> {
    fn beta_at(&self, t: f64) -> Result<Vec<f64>, Fail> {
        match &self.spec.perturbation {
            None => Ok(vec![0.0; self.nx]),
            Some(pt) => self.xc.iter().map(|&x| pt.beta_at(x, t).map_err(Fail::from)).collect(),
        }
    }

    fn gamma_at(&self, t: f64) -> Result<Vec<f64>, Fail> {
        match &self.spec.perturbation {
            None => Ok(vec![0.0; self.nx + 1]),
            Some(pt) => self.xs.iter().map(|&x| pt.gamma_at(x, t).map_err(Fail::from)).collect(),
        }
    }

    fn sigma(&self, eta: &[f64], theta: &[f64], dub: &[f64], beta: &[f64]) -> Vec<f64> {
        let GasParams { nu, k, .. } = self.spec.gas;
        (0..self.nx).map(|i| (nu * (dub[i] + beta[i]) - k * theta[i]) / eta[i]).collect()
    }

    fn initial(&self) -> Result<State, Fail> {
        let spec = self.spec;
        let nx = self.nx;
        let eta = spec.eta0.values.clone();
        let u = spec.u0.values.clone();
        let theta = spec.theta0.values.clone();
        let xe = spec.x_e0().values;
        if xe.iter().any(|v| !v.is_finite()) {
            return Err(Fail::Data("x_e0 is not finite".into()));
        }
        let beta = self.beta_at(0.0)?;
        let du: Vec<f64> = u.windows(2).map(|w| (w[1] - w[0]) / self.dx).collect();
        let sigma0 = self.sigma(&eta, &theta, &du, &beta);
        let acc = Acc {
            it_sigma: vec![0.0; nx],
            it_p: vec![0.0; nx],
            it_g: vec![0.0; nx + 1],
            it_sigma_tr: vec![0.0; nx],
            sigma_prev: sigma0,
            it_binv_theta: vec![0.0; nx],
            binv_prev: theta.clone(),
            it_sigma_be: vec![0.0; nx],
            it_binv_theta_be: vec![0.0; nx],
            flux: 0.0,
            beta_int: 0.0,
            it_p0: 0.0,
            it_px: 0.0,
            work: 0.0,
        };
        Ok(State { eta, u, theta, xe, acc })
    }

    fn step(&self, s: &State, t: f64, h: f64, iters: &mut usize) -> Result<State, Fail> {
        let spec = self.spec;
        let GasParams { nu, k, c_v, lambda } = spec.gas;
        let (nx, dx) = (self.nx, self.dx);
        let th = self.p.theta_implicitness;
        let floor = self.p.positivity_floor;
        let t1 = t + h;
        let bc = &spec.bc;
        let m = bc.m;
        let ub0 = bc.u0.at(t1)?;
        let ubx = bc.ux.at(t1)?;
        let p0 = if m >= 2 { bc.p0.at(t1)? } else { 0.0 };
        let px = if m == 3 { bc.px.at(t1)? } else { 0.0 };
        let pi0 = bc.pi0.at(t1)?;
        let pix = bc.pix.at(t1)?;
        let beta = self.beta_at(t1)?;
        let gamma = self.gamma_at(t1)?;

        let du_n: Vec<f64> = s.u.windows(2).map(|w| (w[1] - w[0]) / dx).collect();
        let dth_n: Vec<f64> = (0..=nx)
            .map(|j| if j == 0 || j == nx { 0.0 } else { (s.theta[j] - s.theta[j - 1]) / dx })
            .collect();

        let mut eta_k = s.eta.clone();
        let mut theta_k = s.theta.clone();
        let mut u_k = s.u.clone();
        let mut xe_k = s.xe.clone();
        let mut g = vec![0.0; nx + 1];
        let mut f = vec![0.0; nx];
        let mut dub = vec![0.0; nx];

        let (mut a, mut b, mut c, mut d) = (vec![0.0; nx + 1], vec![0.0; nx + 1], vec![0.0; nx + 1], vec![0.0; nx + 1]);
        let mut kk = vec![0.0; nx];
        let mut rr = vec![0.0; nx];
        let mut scratch = Vec::new();
        let r = h / dx;
        let mut converged = false;

        for _ in 0..self.p.max_iterations {
            *iters += 1;
            for j in 0..=nx {
                xe_k[j] = s.xe[j] + 0.5 * h * (s.u[j] + u_k[j]);
            }
            if !spec.g.is_zero() {
                for j in 0..=nx {
                    g[j] = spec.g.eval(xe_k[j], self.xs[j], t1)?;
                }
            }

            // momentum
            for i in 0..nx {
                let (e, pk) = (eta_k[i], k * theta_k[i] / eta_k[i]);
                let aa = nu / e + h * pk / e;
                let ss = nu * beta[i] / e - pk + (pk / e) * (s.eta[i] + h * beta[i] - e);
                kk[i] = th * aa / dx;
                rr[i] = aa * (1.0 - th) * du_n[i] + ss;
            }
            for j in 1..nx {
                a[j] = -r * kk[j - 1];
                b[j] = 1.0 + r * (kk[j] + kk[j - 1]);
                c[j] = -r * kk[j];
                d[j] = s.u[j] + r * (rr[j] - rr[j - 1]) + h * g[j];
            }
            a[0] = 0.0;
            if m == 1 {
                b[0] = 1.0;
                c[0] = 0.0;
                d[0] = ub0;
            } else {
                b[0] = 1.0 + 2.0 * r * kk[0];
                c[0] = -2.0 * r * kk[0];
                d[0] = s.u[0] + 2.0 * r * (rr[0] + p0) + h * g[0];
            }
            c[nx] = 0.0;
            if m == 3 {
                a[nx] = -2.0 * r * kk[nx - 1];
                b[nx] = 1.0 + 2.0 * r * kk[nx - 1];
                d[nx] = s.u[nx] - 2.0 * r * (px + rr[nx - 1]) + h * g[nx];
            } else {
                a[nx] = 0.0;
                b[nx] = 1.0;
                d[nx] = ubx;
            }
            if !solve_tridiagonal(&a, &b, &c, &mut d, &mut scratch) {
                return Err(Fail::Divergence);
            }
            let u_new = d.clone();

            // mass
            let mut eta_new = vec![0.0; nx];
            for i in 0..nx {
                dub[i] = th * (u_new[i + 1] - u_new[i]) / dx + (1.0 - th) * du_n[i];
                eta_new[i] = s.eta[i] + h * dub[i] + h * beta[i];
            }
            if eta_new.iter().any(|v| !v.is_finite()) {
                return Err(Fail::Divergence);
            }
            if eta_new.iter().any(|&v| v <= floor) {
                return Err(Fail::Positivity("eta"));
            }

            // energy
            if !spec.f.is_zero() {
                for i in 0..nx {
                    f[i] = spec.f.eval(0.5 * (xe_k[i] + xe_k[i + 1]), self.xc[i], t1)?;
                }
            }
            let s_c = h / (c_v * dx);
            let hc = h / c_v;
            let mut ll = vec![0.0; nx + 1];
            let mut mm = vec![0.0; nx + 1];
            mm[0] = pi0;
            mm[nx] = pix;
            for j in 1..nx {
                let rho = 2.0 / (eta_new[j - 1] + eta_new[j]);
                ll[j] = lambda * rho * th / dx;
                mm[j] = lambda * rho * ((1.0 - th) * dth_n[j] + gamma[j]);
            }
            let (mut ta, mut tb, mut tc, mut td) = (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
            for i in 0..nx {
                let e = eta_new[i];
                let w = nu / e * (dub[i] + beta[i]) * dub[i];
                let (pimp, pexp) = if dub[i] > 0.0 { (k * dub[i] / e, 0.0) } else { (0.0, -k * theta_k[i] * dub[i] / e) };
                ta[i] = -s_c * ll[i];
                tc[i] = -s_c * ll[i + 1];
                tb[i] = 1.0 + s_c * (ll[i] + ll[i + 1]) + hc * pimp;
                td[i] = s.theta[i] + s_c * (mm[i + 1] - mm[i]) + hc * (w + pexp + f[i]);
            }
            if !solve_tridiagonal(&ta, &tb, &tc, &mut td, &mut scratch) {
                return Err(Fail::Divergence);
            }
            let theta_new = td;
            if theta_new.iter().any(|v| !v.is_finite()) {
                return Err(Fail::Divergence);
            }
            if theta_new.iter().any(|&v| v <= floor) {
                return Err(Fail::Positivity("theta"));
            }

            let change = max_change(&u_new, &u_k).max(max_change(&eta_new, &eta_k)).max(max_change(&theta_new, &theta_k));
            u_k = u_new;
            eta_k = eta_new;
            theta_k = theta_new;
            if change < self.p.tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Fail::Divergence);
        }

        for j in 0..=nx {
            xe_k[j] = s.xe[j] + 0.5 * h * (s.u[j] + u_k[j]);
        }
        let sigma = self.sigma(&eta_k, &theta_k, &dub, &beta);
        let mut acc = s.acc.clone();
        for i in 0..nx {
            acc.it_sigma[i] += h * sigma[i];
            acc.it_p[i] += h * k * theta_k[i] / eta_k[i];
            acc.it_sigma_tr[i] += 0.5 * h * (acc.sigma_prev[i] + sigma[i]);
            let binv = (-acc.it_sigma_tr[i] / nu).exp() * theta_k[i];
            acc.it_binv_theta[i] += 0.5 * h * (acc.binv_prev[i] + binv);
            acc.binv_prev[i] = binv;
            let b_old = (acc.it_sigma_be[i] / nu).exp();
            acc.it_binv_theta_be[i] += h * theta_k[i] / b_old;
            let c = eta_k[i] / (s.eta[i] + h * k * theta_k[i] / nu);
            acc.it_sigma_be[i] += nu * c.ln();
        }
        for j in 0..=nx {
            acc.it_g[j] += h * g[j];
        }
        let ubar: Vec<f64> = (0..=nx).map(|j| th * u_k[j] + (1.0 - th) * s.u[j]).collect();
        acc.flux += h * (ubar[nx] - ubar[0]);
        acc.beta_int += h * spec.grid.integrate(Loc::Center, &beta);
        acc.it_p0 += h * p0;
        acc.it_px += h * px;
        let sig_l = if m >= 2 { -p0 } else { sigma[0] };
        let sig_r = if m == 3 { -px } else { sigma[nx - 1] };
        let gu: Vec<f64> = (0..=nx).map(|j| g[j] * ubar[j]).collect();
        acc.work += h
            * (sig_r * ubar[nx] - sig_l * ubar[0] + pix - pi0
                + spec.grid.integrate(Loc::Edge, &gu)
                + spec.grid.integrate(Loc::Center, &f));
        acc.sigma_prev = sigma;
        Ok(State { eta: eta_k, u: u_k, theta: theta_k, xe: xe_k, acc })
    }

    fn advance(&self, s: &State, t: f64, h: f64, depth: u32, step: usize, rec: &mut StepRecord) -> Result<State, SolverError> {
        let mut iters = 0;
        let res = self.step(s, t, h, &mut iters);
        rec.picard_iterations += iters;
        rec.max_picard = rec.max_picard.max(iters);
        match res {
            Ok(next) => {
                rec.effective_steps += 1;
                rec.max_depth = rec.max_depth.max(depth);
                rec.min_dt = rec.min_dt.min(h);
                Ok(next)
            }
            Err(Fail::Data(msg)) => Err(SolverError::Data(msg)),
            Err(fail) if depth >= self.p.max_halvings => Err(match fail {
                Fail::Positivity(variable) => SolverError::PositivityLoss { t: t + h, variable },
                _ => SolverError::NonlinearDivergence { step },
            }),
            Err(_) => {
                if depth == 0 {
                    rec.halved_steps += 1;
                }
                let mid = self.advance(s, t, 0.5 * h, depth + 1, step, rec)?;
                self.advance(&mid, t + 0.5 * h, 0.5 * h, depth + 1, step, rec)
            }
        }
    }
}

#[derive(Default)]
struct Recorder {
    times: Vec<f64>,
    eta: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
    xe: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    gamma: Vec<Vec<f64>>,
    it_sigma: Vec<Vec<f64>>,
    it_p: Vec<Vec<f64>>,
    it_g: Vec<Vec<f64>>,
    it_sigma_tr: Vec<Vec<f64>>,
    it_binv_theta: Vec<Vec<f64>>,
    it_sigma_be: Vec<Vec<f64>>,
    it_binv_theta_be: Vec<Vec<f64>>,
    flux: Vec<f64>,
    beta_int: Vec<f64>,
    it_p0: Vec<f64>,
    it_px: Vec<f64>,
    work: Vec<f64>,
}

impl Recorder {
    fn push(&mut self, st: &Stepper, s: &State, t: f64) -> Result<(), Fail> {
        self.times.push(t);
        self.eta.push(s.eta.clone());
        self.u.push(s.u.clone());
        self.theta.push(s.theta.clone());
        self.xe.push(s.xe.clone());
        self.beta.push(st.beta_at(t)?);
        self.gamma.push(st.gamma_at(t)?);
        let a = &s.acc;
        self.it_sigma.push(a.it_sigma.clone());
        self.it_p.push(a.it_p.clone());
        self.it_g.push(a.it_g.clone());
        self.it_sigma_tr.push(a.it_sigma_tr.clone());
        self.it_binv_theta.push(a.it_binv_theta.clone());
        self.it_sigma_be.push(a.it_sigma_be.clone());
        self.it_binv_theta_be.push(a.it_binv_theta_be.clone());
        self.flux.push(a.flux);
        self.beta_int.push(a.beta_int);
        self.it_p0.push(a.it_p0);
        self.it_px.push(a.it_px);
        self.work.push(a.work);
        Ok(())
    }
}

/// Runs the scheme from `t = 0` to `T`.
pub fn solve(spec: &ProblemSpec, scheme: &SchemeParams) -> Result<SolutionBundle, SolverError> {
    scheme.check()?;
    let violations = validate(spec);
    if !violations.is_empty() {
        return Err(SolverError::InvalidSpec(violations));
    }
    let grid = spec.grid;
    let st = Stepper {
        spec,
        p: *scheme,
        nx: grid.nx,
        dx: grid.dx(),
        xc: grid.coords(Loc::Center),
        xs: grid.coords(Loc::Edge),
    };
    let data_err = |f: Fail| match f {
        Fail::Data(m) => SolverError::Data(m),
        _ => SolverError::Data("initial state".into()),
    };
    let mut state = st.initial().map_err(data_err)?;
    let mut rec = StepRecord { base_dt: grid.dt(), min_dt: f64::INFINITY, ..StepRecord::default() };
    let mut out = Recorder::default();
    out.push(&st, &state, 0.0).map_err(data_err)?;
    for n in 0..grid.nt {
        let t = grid.time(n);
        let h = grid.time(n + 1) - t;
        state = st.advance(&state, t, h, 0, n, &mut rec)?;
        if (n + 1) % scheme.store_every == 0 || n + 1 == grid.nt {
            out.push(&st, &state, grid.time(n + 1)).map_err(data_err)?;
        }
    }
    let f = |loc, rows| SpaceTimeField::new(loc, out.times.clone(), rows);
    Ok(SolutionBundle {
        spec: spec.clone(),
        scheme: *scheme,
        eta: f(Loc::Center, out.eta),
        u: f(Loc::Edge, out.u),
        theta: f(Loc::Center, out.theta),
        x_e: f(Loc::Edge, out.xe),
        beta: f(Loc::Center, out.beta),
        gamma: f(Loc::Edge, out.gamma),
        it_sigma: f(Loc::Center, out.it_sigma),
        it_p: f(Loc::Center, out.it_p),
        it_g: f(Loc::Edge, out.it_g),
        it_sigma_tr: f(Loc::Center, out.it_sigma_tr),
        it_binv_theta: f(Loc::Center, out.it_binv_theta),
        it_sigma_be: f(Loc::Center, out.it_sigma_be),
        it_binv_theta_be: f(Loc::Center, out.it_binv_theta_be),
        flux_integral: out.flux,
        beta_integral: out.beta_int,
        it_p0: out.it_p0,
        it_px: out.it_px,
        work_integral: out.work,
        steps: rec,
    })
}

// ---------------------------------------------------------------- diagnostics

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRow {
    pub t: f64,
    /// `∫(u²/2 + c_V θ)`.
    pub energy: f64,
    /// Boundary work and heat plus source power, integrated in time.
    pub supplied: f64,
    /// `|E(t) - E(0) - supplied(t)|`.
    pub imbalance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    /// `max_t |V(t) - V(0) - I_t(u_X - u_0) - I_t∫β|`.
    pub volume_residual: f64,
    /// `‖ν ln η - ν ln η⁰ - I_tσ - I_tp‖_{C(0,T;L²)}`.
    pub logvol_residual: f64,
    /// `‖I_tσ - (I^<m>(u - u⁰ - I_t g) + I_tσ_Γ)‖_{C(0,T;L²)}`, with `⟨I_tσ⟩` in place of `I_tσ_Γ` for m = 1.
    pub stress_repr_residual: f64,
    pub min_eta: f64,
    pub min_theta: f64,
    pub linf_velocity: f64,
    pub energy_ledger: Vec<EnergyRow>,
}

impl DiagnosticsReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["quantity", "value"])?;
        for (name, v) in [
            ("volume_residual", self.volume_residual),
            ("logvol_residual", self.logvol_residual),
            ("stress_repr_residual", self.stress_repr_residual),
            ("min_eta", self.min_eta),
            ("min_theta", self.min_theta),
            ("linf_velocity", self.linf_velocity),
        ] {
            w.write_record([name.to_string(), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_energy_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "energy", "supplied", "imbalance"])?;
        for r in &self.energy_ledger {
            w.write_record([r.t, r.energy, r.supplied, r.imbalance].map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "volume residual         {:e}", self.volume_residual)?;
        writeln!(f, "log-volume residual     {:e}", self.logvol_residual)?;
        writeln!(f, "stress repr. residual   {:e}", self.stress_repr_residual)?;
        writeln!(f, "min eta                 {:e}", self.min_eta)?;
        writeln!(f, "min theta               {:e}", self.min_theta)?;
        writeln!(f, "max |u|                 {:e}", self.linf_velocity)?;
        if let Some(last) = self.energy_ledger.last() {
            writeln!(f, "energy imbalance at T   {:e}", last.imbalance)?;
        }
        Ok(())
    }
}

/// `I_tσ_Γ` at the centers at snapshot `n`.
fn it_sigma_gamma(sol: &SolutionBundle, n: usize) -> Vec<f64> {
    let g = sol.grid();
    let (p0, px) = (sol.it_p0[n], sol.it_px[n]);
    g.coords(Loc::Center)
        .into_iter()
        .map(|x| match sol.spec.bc.m {
            2 => -p0,
            3 => {
                let s = x / g.x_len;
                -(1.0 - s) * p0 - s * px
            }
            _ => 0.0,
        })
        .collect()
}

/// Stress representation residual `I_tσ - RHS` at every snapshot.
pub fn stress_representation_defect(sol: &SolutionBundle, spec: &ProblemSpec) -> SpaceTimeField {
    let grid = *sol.grid();
    let ctx = OperatorContext::new(grid);
    let m = spec.bc.m;
    let rows = (0..sol.eta.nt())
        .map(|n| {
            let w = ScalarField::new(
                Loc::Edge,
                (0..=grid.nx).map(|j| sol.u.rows[n][j] - spec.u0.values[j] - sol.it_g.rows[n][j]).collect(),
            );
            let rhs = ctx.i_bracket(&w, m).expect("valid family").to_centers();
            let its = ScalarField::new(Loc::Center, sol.it_sigma.rows[n].clone());
            let extra = if m == 1 { vec![ctx.mean_omega(&its); grid.nx] } else { it_sigma_gamma(sol, n) };
            (0..grid.nx).map(|i| its.values[i] - rhs.values[i] - extra[i]).collect()
        })
        .collect();
    SpaceTimeField::new(Loc::Center, sol.eta.times.clone(), rows)
}

pub fn diagnostics(sol: &SolutionBundle, spec: &ProblemSpec) -> DiagnosticsReport {
    let grid = *sol.grid();
    let nu = spec.gas.nu;
    let c_v = spec.gas.c_v;
    let v0 = grid.integrate(Loc::Center, &spec.eta0.values);
    let volume_residual = (0..sol.eta.nt())
        .map(|n| {
            let v = grid.integrate(Loc::Center, &sol.eta.rows[n]);
            (v - v0 - sol.flux_integral[n] - sol.beta_integral[n]).abs()
        })
        .fold(0.0, f64::max);

    let lne = SpaceTimeField::new(
        Loc::Center,
        sol.eta.times.clone(),
        (0..sol.eta.nt())
            .map(|n| {
                (0..grid.nx)
                    .map(|i| {
                        nu * sol.eta.rows[n][i].ln() - nu * spec.eta0.values[i].ln() - sol.it_sigma.rows[n][i] - sol.it_p.rows[n][i]
                    })
                    .collect()
            })
            .collect(),
    );
    let l2inf = |w: &SpaceTimeField| lqr_norm(&grid, w, Exponent::Finite(2.0), Exponent::Inf).expect("valid exponents");
    let logvol_residual = l2inf(&lne);
    let stress_repr_residual = l2inf(&stress_representation_defect(sol, spec));

    let energy = |n: usize| {
        let ke: Vec<f64> = sol.u.rows[n].iter().map(|v| 0.5 * v * v).collect();
        grid.integrate(Loc::Edge, &ke) + c_v * grid.integrate(Loc::Center, &sol.theta.rows[n])
    };
    let e0 = energy(0);
    let energy_ledger = (0..sol.eta.nt())
        .map(|n| {
            let e = energy(n);
            let w = sol.work_integral[n];
            EnergyRow { t: sol.eta.times[n], energy: e, supplied: w, imbalance: (e - e0 - w).abs() }
        })
        .collect();

    DiagnosticsReport {
        volume_residual,
        logvol_residual,
        stress_repr_residual,
        min_eta: sol.eta.min(),
        min_theta: sol.theta.min(),
        linf_velocity: linf_velocity_check(sol, spec),
        energy_ledger,
    }
}

/// `‖u‖_{L^∞(Q)}` over the stored states.
pub fn linf_velocity_check(sol: &SolutionBundle, _spec: &ProblemSpec) -> f64 {
    sol.u.max_abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::problem::{BoundaryData, ForceTerm, TimeSeries};

    fn equilibrium(nx: usize, nt: usize) -> ProblemSpec {
        let grid = Grid::new(1.0, 1.0, nx, nt).unwrap();
        let gas = GasParams { nu: 1.0, k: 1.3, c_v: 1.0, lambda: 1.0 };
        let bc = BoundaryData::pressure(TimeSeries::Const(1.3), TimeSeries::Const(1.3), TimeSeries::zero(), TimeSeries::zero());
        let one = parse("1").unwrap();
        let zero = parse("0").unwrap();
        ProblemSpec::from_exprs(grid, gas, bc, &one, &zero, &one, ForceTerm::Zero, ForceTerm::Zero, 10.0).unwrap()
    }

    #[test]
    fn equilibrium_is_steady() {
        let spec = equilibrium(32, 50);
        let sol = solve(&spec, &SchemeParams::default()).unwrap();
        let dev = sol.eta.map(|v| v - 1.0).max_abs().max(sol.theta.map(|v| v - 1.0).max_abs()).max(sol.u.max_abs());
        assert!(dev <= 10.0 * f64::EPSILON * 50.0, "deviation {dev}");
        let d = diagnostics(&sol, &spec);
        assert!(d.logvol_residual <= 1e-10);
        assert_eq!(sol.steps.halved_steps, 0);
    }

    #[test]
    fn bad_scheme_rejected() {
        let spec = equilibrium(8, 2);
        let s = SchemeParams { theta_implicitness: 0.3, ..SchemeParams::default() };
        assert!(matches!(solve(&spec, &s), Err(SolverError::BadScheme(_))));
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = equilibrium(8, 2);
        spec.theta0.values[3] = 0.0;
        assert!(matches!(solve(&spec, &SchemeParams::default()), Err(SolverError::InvalidSpec(_))));
    }
}
