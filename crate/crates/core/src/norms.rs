//! Norms, seminorms and computable majorants of dual norms.
//!
//! Dual norms over test-function spaces are never computed as suprema.
//! `v2star_majorant` and `h21star_majorant` return the embedding and
//! integration-by-parts bounds instead; they agree with the true dual norms up
//! to constants that do not depend on the argument.

use crate::grid::{Grid, Loc, ScalarField, SpaceTimeField};
use crate::ops::{time_primitive, OperatorContext};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("exponent must lie in [1, inf], got {0}")]
    BadExponent(f64),
}

/// An integrability exponent in `[1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Inf,
}

impl Exponent {
    pub fn new(q: f64) -> Result<Self, NormError> {
        if q == f64::INFINITY {
            Ok(Exponent::Inf)
        } else if q >= 1.0 && q.is_finite() {
            Ok(Exponent::Finite(q))
        } else {
            Err(NormError::BadExponent(q))
        }
    }

    fn check(self) -> Result<Self, NormError> {
        match self {
            Exponent::Finite(q) => Exponent::new(q),
            Exponent::Inf => Ok(self),
        }
    }
}

impl From<f64> for Exponent {
    /// Infinite input maps to `Inf`; other values are checked on use.
    fn from(q: f64) -> Self {
        if q == f64::INFINITY {
            Exponent::Inf
        } else {
            Exponent::Finite(q)
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(q) => write!(f, "{q}"),
            Exponent::Inf => f.write_str("inf"),
        }
    }
}

/// Names of the norms the toolkit evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormTag {
    Lq(Exponent),
    Lqr(Exponent, Exponent),
    V2,
    Hm1(u8),
    C0L2,
    LqInfty(Exponent),
    WHspace,
    WHspacetime(Exponent),
    V2starMajorant,
    H21starMajorant(u8),
}

impl fmt::Display for NormTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormTag::Lq(q) => write!(f, "L{q}"),
            NormTag::Lqr(q, r) => write!(f, "L{q},{r}"),
            NormTag::V2 => f.write_str("V2"),
            NormTag::Hm1(m) => write!(f, "H-1;{m}"),
            NormTag::C0L2 => f.write_str("C(L2)"),
            NormTag::LqInfty(q) => write!(f, "L{q},inf"),
            NormTag::WHspace => f.write_str("WH0,1;1"),
            NormTag::WHspacetime(r) => write!(f, "WH0,1,0;1,1,{r}"),
            NormTag::V2starMajorant => f.write_str("V2*maj"),
            NormTag::H21starMajorant(m) => write!(f, "H2,1;{m}*maj"),
        }
    }
}

/// `‖v‖_{L^q(Ω)}` for samples at `loc`.
pub fn lq(grid: &Grid, loc: Loc, v: &[f64], q: Exponent) -> f64 {
    match q {
        Exponent::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        Exponent::Finite(q) if q == 1.0 => grid.integrate(loc, &v.iter().map(|x| x.abs()).collect::<Vec<_>>()),
        Exponent::Finite(q) if q == 2.0 => grid.integrate(loc, &v.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt(),
        Exponent::Finite(q) => grid
            .integrate(loc, &v.iter().map(|x| x.abs().powf(q)).collect::<Vec<_>>())
            .powf(1.0 / q),
    }
}

/// `‖b‖_{L^r(0,T)}` for a time series sampled at `times` (trapezoid).
pub fn lr_time(times: &[f64], b: &[f64], r: Exponent) -> f64 {
    match r {
        Exponent::Inf => b.iter().fold(0.0, |m, x| m.max(x.abs())),
        Exponent::Finite(r) => {
            if b.len() < 2 {
                return 0.0;
            }
            let pw: Vec<f64> = b.iter().map(|x| x.abs().powf(r)).collect();
            let s = *time_primitive(times, &pw).last().expect("nonempty");
            s.powf(1.0 / r)
        }
    }
}

/// `‖‖w(·,t)‖_{L^q(Ω)}‖_{L^r(0,T)}`.
pub fn lqr_norm(grid: &Grid, w: &SpaceTimeField, q: impl Into<Exponent>, r: impl Into<Exponent>) -> Result<f64, NormError> {
    let q = q.into().check()?;
    let r = r.into().check()?;
    let inner: Vec<f64> = w.rows.iter().map(|row| lq(grid, w.loc, row, q)).collect();
    Ok(lr_time(&w.times, &inner, r))
}

/// `‖·‖_{H^{-1;m}}`: `‖I^<m>y‖_{L²}` for m = 1, 2 and `‖Iy‖_{L²} + X|⟨y⟩|` for m = 3.
pub fn h_minus_one(grid: &Grid, y: &ScalarField, m: u8) -> f64 {
    let ctx = OperatorContext::new(*grid);
    match m {
        1 | 2 => {
            let b = ctx.i_bracket(y, m).expect("valid bracket");
            lq(grid, b.loc, &b.values, Exponent::Finite(2.0))
        }
        3 => {
            let p = ctx.primitive(y);
            lq(grid, p.loc, &p.values, Exponent::Finite(2.0)) + grid.x_len * ctx.mean_omega(y).abs()
        }
        _ => panic!("bracket index must be 1, 2 or 3"),
    }
}

/// `sup_t ‖w(·,t)‖_{H^{-1;m}}`.
pub fn sup_h_minus_one(grid: &Grid, w: &SpaceTimeField, m: u8) -> f64 {
    w.rows
        .iter()
        .map(|r| h_minus_one(grid, &ScalarField::new(w.loc, r.clone()), m))
        .fold(0.0, f64::max)
}

/// `‖w‖_{L^{2,∞}(Q)} + ‖Dw‖_{L²(Q)}`.
pub fn v2_norm(grid: &Grid, w: &SpaceTimeField) -> f64 {
    let ctx = OperatorContext::new(*grid);
    let dw = w.map_rows(|r| ctx.derivative(r));
    lqr_norm(grid, w, Exponent::Finite(2.0), Exponent::Inf).expect("valid exponents")
        + lqr_norm(grid, &dw, Exponent::Finite(2.0), Exponent::Finite(2.0)).expect("valid exponents")
}

/// `‖y‖_{L¹} + max_j ‖Δ_{j dx}^{(1)} y‖_{L¹(0, X - j dx)}`.
pub fn wh_seminorm(grid: &Grid, y: &ScalarField) -> f64 {
    wh_two_scale(grid, &[(1.0, y.clone())])
}

/// WH norm of a profile sampled at cell points `ξ_k` with weights `w_k`:
/// `∫_Ω max_k |y_k| dx + max_j Σ_k w_k ‖Δ_j y_k‖_{L¹}`.
pub fn wh_two_scale(grid: &Grid, samples: &[(f64, ScalarField)]) -> f64 {
    let ctx = OperatorContext::new(*grid);
    let loc = samples[0].1.loc;
    let n = samples[0].1.len();
    let sup: Vec<f64> = (0..n)
        .map(|i| samples.iter().fold(0.0_f64, |m, (_, s)| m.max(s.values[i].abs())))
        .collect();
    let first = grid.integrate(loc, &sup);
    let h = ctx.dx();
    let mut best: f64 = 0.0;
    for j in 1..grid.nx {
        let delta = j as f64 * h;
        let mut tot = 0.0;
        for (w, s) in samples {
            let v = &s.values;
            let q: Vec<f64> = (0..v.len() - j).map(|i| ((v[i + j] - v[i]) / delta).abs()).collect();
            tot += w * ctx.truncated_integral(loc, &q);
        }
        best = best.max(tot);
    }
    first + best
}

/// Exponent pairs sampled from the admissible set for `[V₂]*` majorants.
pub const M0_PAIRS: [(f64, f64); 3] = [(2.0, 1.0), (1.0, 4.0 / 3.0), (1.2, 1.2)];

/// `min over M0_PAIRS of ‖w‖_{L^{q,r}(Q)}`.
pub fn v2star_majorant(grid: &Grid, w: &SpaceTimeField) -> f64 {
    M0_PAIRS
        .iter()
        .map(|&(q, r)| lqr_norm(grid, w, q, r).expect("valid exponents"))
        .fold(f64::INFINITY, f64::min)
}

/// Index into `M0_PAIRS` of the pair attaining `v2star_majorant`.
pub fn v2star_argmin(grid: &Grid, w: &SpaceTimeField) -> usize {
    let vals: Vec<f64> = M0_PAIRS
        .iter()
        .map(|&(q, r)| lqr_norm(grid, w, q, r).expect("valid exponents"))
        .collect();
    (0..vals.len()).fold(0, |b, k| if vals[k] < vals[b] { k } else { b })
}

/// Majorant of `‖F‖_{[H^{2,1;ϰ,m}]*}` given `ϰ >= kappa_floor`:
/// the smaller of `N‖F‖_{L¹(Q)}` and
/// `N·v2star(I^<m>F) + δ_{m3} √X ‖I_t⟨F⟩‖_{L²(0,T)}` with `N = 1/kappa_floor`.
pub fn h21star_majorant(grid: &Grid, f: &SpaceTimeField, m: u8, kappa_floor: f64) -> f64 {
    let n = 1.0 / kappa_floor;
    let l1 = n * lqr_norm(grid, f, 1.0, 1.0).expect("valid exponents");
    let ctx = OperatorContext::new(*grid);
    let ib = f.map_rows(|r| ctx.i_bracket(r, m).expect("valid bracket"));
    let mut route = n * v2star_majorant(grid, &ib);
    if m == 3 {
        let means: Vec<f64> = f.rows.iter().map(|r| ctx.mean_omega(&ScalarField::new(f.loc, r.clone()))).collect();
        let itm = time_primitive(&f.times, &means);
        route += grid.x_len.sqrt() * lr_time(&f.times, &itm, Exponent::Finite(2.0));
    }
    l1.min(route)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn times(t_end: f64, nt: usize) -> Vec<f64> {
        (0..=nt).map(|n| t_end * n as f64 / nt as f64).collect()
    }

    #[test]
    fn lqr_examples() {
        let g = Grid::new(1.0, 2.0, 64, 64).unwrap();
        let t = times(2.0, 64);
        let c = SpaceTimeField::from_fn(&g, Loc::Center, &t, |_, _| -3.0);
        assert!((lqr_norm(&g, &c, 2.0, f64::INFINITY).unwrap() - 3.0).abs() < 1e-14);
        assert!((lqr_norm(&g, &c, f64::INFINITY, 1.0).unwrap() - 6.0).abs() < 1e-13);
        let g2 = Grid::new(1.0, 2.0, 512, 512).unwrap();
        let xt = SpaceTimeField::from_fn(&g2, Loc::Center, &times(2.0, 512), |x, t| x * t);
        let v = lqr_norm(&g2, &xt, 2.0, 2.0).unwrap();
        let exact = (1.0 / 3f64.sqrt()) * (8.0 / 3.0f64).sqrt();
        assert!((v - exact).abs() < 1e-5, "{v} vs {exact}");
        assert_eq!(lqr_norm(&g, &c, 0.5, 1.0), Err(NormError::BadExponent(0.5)));
        assert_eq!(lqr_norm(&g, &c, 2.0, -1.0), Err(NormError::BadExponent(-1.0)));
    }

    #[test]
    fn h_minus_one_examples() {
        let g = Grid::new(1.0, 1.0, 1024, 1).unwrap();
        let one = ScalarField::constant(&g, Loc::Center, 1.0);
        assert!((h_minus_one(&g, &one, 3) - (1.0 / 3f64.sqrt() + 1.0)).abs() < 1e-6);
        let s = ScalarField::from_fn(&g, Loc::Edge, |x| x * (1.0 - x));
        let ds = OperatorContext::new(g).derivative(&s);
        let oracle = {
            // ‖x(1-x) - 1/6‖ by fine Simpson quadrature
            let n = 20000;
            let f = |x: f64| (x * (1.0 - x) - 1.0 / 6.0).powi(2);
            let h = 1.0 / n as f64;
            let mut acc = f(0.0) + f(1.0);
            for k in 1..n {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
            }
            (acc * h / 3.0).sqrt()
        };
        assert!((h_minus_one(&g, &ds, 1) - oracle).abs() < 1e-6);
        assert!((oracle - 0.0745).abs() < 1e-4);
        let z = ScalarField::zeros(&g, Loc::Center);
        for m in 1..=3 {
            assert_eq!(h_minus_one(&g, &z, m), 0.0);
        }
    }

    #[test]
    fn v2_examples() {
        let g = Grid::new(1.0, 1.0, 256, 256).unwrap();
        let t = times(1.0, 256);
        let c = SpaceTimeField::from_fn(&g, Loc::Edge, &t, |_, _| 2.5);
        assert!((v2_norm(&g, &c) - 2.5).abs() < 1e-14);
        let x = SpaceTimeField::from_fn(&g, Loc::Edge, &t, |x, _| x);
        assert!((v2_norm(&g, &x) - (1.0 / 3f64.sqrt() + 1.0)).abs() < 1e-5);
        let s = SpaceTimeField::from_fn(&g, Loc::Edge, &t, |x, t| (PI * x).sin() * t);
        let exact = 1.0 / 2f64.sqrt() + PI / 2f64.sqrt() / 3f64.sqrt();
        assert!((v2_norm(&g, &s) - exact).abs() < 1e-4);
    }

    #[test]
    fn wh_examples() {
        let g = Grid::new(1.0, 1.0, 64, 1).unwrap();
        let y = ScalarField::from_fn(&g, Loc::Center, |x| x);
        assert!((wh_seminorm(&g, &y) - (1.5 - g.dx())).abs() < 1e-12);
        let s = ScalarField::from_fn(&g, Loc::Center, |x| if x > 0.5 { 1.0 } else { 0.0 });
        assert!((wh_seminorm(&g, &s) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn majorant_examples() {
        let g = Grid::new(1.0, 1.0, 16, 64).unwrap();
        let t = times(1.0, 64);
        let z = SpaceTimeField::from_fn(&g, Loc::Center, &t, |_, _| 0.0);
        assert_eq!(v2star_majorant(&g, &z), 0.0);
        assert_eq!(h21star_majorant(&g, &z, 2, 1.0), 0.0);
        let one = SpaceTimeField::from_fn(&g, Loc::Center, &t, |_, _| 1.0);
        assert!((v2star_majorant(&g, &one) - 1.0).abs() < 1e-14);
        let g2 = Grid::new(1.0, 1.0, 16, 4096).unwrap();
        let one2 = SpaceTimeField::from_fn(&g2, Loc::Center, &times(1.0, 4096), |_, _| 1.0);
        assert!((h21star_majorant(&g2, &one2, 3, 1.0) - 1.0 / 3f64.sqrt()).abs() < 1e-7);
    }
}
