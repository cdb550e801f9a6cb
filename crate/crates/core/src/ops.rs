//! Discrete primitives, means, projections and difference quotients.
//!
//! A center field `y` has the primitive `(Iy)_j = dx * sum_{i<j} y_i` at the
//! edges. Edge fields integrate by the trapezoid rule. Products of an edge
//! field with a center field average the edge field onto the centers, so that
//! `∫(Iy)z = ∫y(I*z)` and `∫(I^<1>y)z = -∫y(I^<3>z)` hold to round-off.

use crate::grid::{Grid, Loc, ScalarField, SpaceTimeField};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpsError {
    #[error("weight must be positive, minimum is {0}")]
    NonpositiveWeight(f64),
    #[error("shift {j} must satisfy 1 <= j < {len}")]
    ShiftOutOfRange { j: usize, len: usize },
    #[error("bracket index must be 1, 2 or 3, got {0}")]
    BadBracket(u8),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorContext {
    pub grid: Grid,
}

impl OperatorContext {
    pub fn new(grid: Grid) -> Self {
        Self { grid }
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    /// ∫_Ω y with the rule matching its location.
    pub fn integral(&self, y: &ScalarField) -> f64 {
        self.grid.integrate(y.loc, &y.values)
    }

    /// `(Iy)(x) = ∫_0^x y`, sampled at the edges.
    pub fn primitive(&self, y: &ScalarField) -> ScalarField {
        let h = self.dx();
        let mut out = Vec::with_capacity(self.grid.nx + 1);
        let mut acc = 0.0;
        out.push(0.0);
        match y.loc {
            Loc::Center => {
                for &v in &y.values {
                    acc += h * v;
                    out.push(acc);
                }
            }
            Loc::Edge => {
                for w in y.values.windows(2) {
                    acc += 0.5 * h * (w[0] + w[1]);
                    out.push(acc);
                }
            }
        }
        ScalarField::new(Loc::Edge, out)
    }

    /// `(I*y)(x) = ∫_x^X y`, sampled at the edges.
    pub fn coprimitive(&self, y: &ScalarField) -> ScalarField {
        let p = self.primitive(y);
        let total = *p.values.last().expect("nonempty primitive");
        p.map(|v| total - v)
    }

    /// ⟨y⟩_Ω.
    pub fn mean_omega(&self, y: &ScalarField) -> f64 {
        self.integral(y) / self.grid.x_len
    }

    /// `I^<1>y = Iy - ⟨Iy⟩`, `I^<2>y = Iy`, `I^<3>y = I(y - ⟨y⟩)`.
    pub fn i_bracket(&self, y: &ScalarField, m: u8) -> Result<ScalarField, OpsError> {
        match m {
            1 => {
                let p = self.primitive(y);
                let c = self.mean_omega(&p);
                Ok(p.map(|v| v - c))
            }
            2 => Ok(self.primitive(y)),
            3 => {
                let c = self.mean_omega(y);
                Ok(self.primitive(&y.map(|v| v - c)))
            }
            other => Err(OpsError::BadBracket(other)),
        }
    }

    /// `⟨z⟩_{Ω,1/ϰ} = ⟨z/ϰ⟩ / ⟨1/ϰ⟩`.
    pub fn weighted_mean(&self, z: &ScalarField, kappa: &ScalarField) -> Result<f64, OpsError> {
        check_weight(kappa)?;
        let num = self.mean_omega(&z.zip_with(kappa, |a, k| a / k));
        let den = self.mean_omega(&kappa.map(|k| 1.0 / k));
        Ok(num / den)
    }

    /// `P_{1/ϰ}y = y - (1/ϰ)/⟨1/ϰ⟩ · ⟨y⟩`.
    pub fn weighted_projection(&self, y: &ScalarField, kappa: &ScalarField) -> Result<ScalarField, OpsError> {
        check_weight(kappa)?;
        let inv = kappa.map(|k| 1.0 / k);
        let c = self.mean_omega(y) / self.mean_omega(&inv);
        Ok(y.zip_with(&inv, |v, w| v - w * c))
    }

    /// Δ_δ^{(1)}y with δ = j·dx on the truncated domain (0, X - δ).
    pub fn difference_quotient(&self, y: &ScalarField, j: usize) -> Result<ScalarField, OpsError> {
        if j < 1 || j >= self.grid.nx {
            return Err(OpsError::ShiftOutOfRange { j, len: self.grid.nx });
        }
        let delta = j as f64 * self.dx();
        let n = y.len() - j;
        Ok(ScalarField::new(
            y.loc,
            (0..n).map(|i| (y.values[i + j] - y.values[i]) / delta).collect(),
        ))
    }

    /// ∫ of |v|^q over a field truncated to `len` samples (as after a shift).
    pub fn truncated_integral(&self, loc: Loc, v: &[f64]) -> f64 {
        let h = self.dx();
        match loc {
            Loc::Center => h * v.iter().sum::<f64>(),
            Loc::Edge => {
                if v.len() < 2 {
                    return 0.0;
                }
                h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
            }
        }
    }

    /// Discrete L² pairing `∫ a b`, edge data averaged to centers when the
    /// locations differ.
    pub fn dot(&self, a: &ScalarField, b: &ScalarField) -> f64 {
        if a.loc == b.loc {
            return self.integral(&a.zip_with(b, |x, y| x * y));
        }
        let (a, b) = (a.to_centers(), b.to_centers());
        self.integral(&a.zip_with(&b, |x, y| x * y))
    }

    /// Spatial derivative: edge data differentiate onto centers; center data
    /// onto edges, with boundary edges copying their neighbour.
    pub fn derivative(&self, y: &ScalarField) -> ScalarField {
        let h = self.dx();
        let d: Vec<f64> = y.values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        match y.loc {
            Loc::Edge => ScalarField::new(Loc::Center, d),
            Loc::Center => {
                let mut out = Vec::with_capacity(d.len() + 2);
                out.push(d[0]);
                out.extend_from_slice(&d);
                out.push(d[d.len() - 1]);
                ScalarField::new(Loc::Edge, out)
            }
        }
    }
}

fn check_weight(kappa: &ScalarField) -> Result<(), OpsError> {
    let m = kappa.min();
    if m <= 0.0 || m.is_nan() {
        return Err(OpsError::NonpositiveWeight(m));
    }
    Ok(())
}

/// Cumulative trapezoid in time, zero at the first sample.
pub fn time_primitive(times: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), b.len());
    let mut out = Vec::with_capacity(b.len());
    let mut acc = 0.0;
    for n in 0..b.len() {
        if n > 0 {
            acc += 0.5 * (times[n] - times[n - 1]) * (b[n] + b[n - 1]);
        }
        out.push(acc);
    }
    out
}

/// `I_t w` for every spatial sample.
pub fn time_primitive_field(w: &SpaceTimeField) -> SpaceTimeField {
    let mut rows = Vec::with_capacity(w.rows.len());
    let mut acc = vec![0.0; w.rows.first().map_or(0, |r| r.len())];
    for n in 0..w.rows.len() {
        if n > 0 {
            let h = 0.5 * (w.times[n] - w.times[n - 1]);
            for (a, (p, q)) in acc.iter_mut().zip(w.rows[n - 1].iter().zip(&w.rows[n])) {
                *a += h * (p + q);
            }
        }
        rows.push(acc.clone());
    }
    SpaceTimeField::new(w.loc, w.times.clone(), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ctx(x: f64, nx: usize) -> OperatorContext {
        OperatorContext::new(Grid::new(x, 1.0, nx, 1).unwrap())
    }

    #[test]
    fn primitive_examples() {
        let c = ctx(1.0, 64);
        let one = ScalarField::constant(&c.grid, Loc::Center, 1.0);
        let p = c.primitive(&one);
        for (v, x) in p.values.iter().zip(c.grid.coords(Loc::Edge)) {
            assert!((v - x).abs() < 1e-15);
        }
        let y = ScalarField::from_fn(&c.grid, Loc::Center, |x| 2.0 * x);
        assert!((c.primitive(&y).values[32] - 0.25).abs() < 1e-14);
        let s = ScalarField::from_fn(&c.grid, Loc::Center, |x| (2.0 * PI * x).sin());
        assert!(c.primitive(&s).values[64].abs() < 1e-14);
    }

    #[test]
    fn coprimitive_examples() {
        let c = ctx(2.0, 128);
        let y = ScalarField::from_fn(&c.grid, Loc::Center, |x| x);
        let q = c.coprimitive(&y);
        assert!((q.values[64] - 1.5).abs() < 1e-4);
        let p = c.primitive(&y);
        for (a, b) in p.values.iter().zip(&q.values) {
            assert!((a + b - p.values[128]).abs() < 1e-14);
        }
        assert!((c.mean_omega(&y) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bracket_examples() {
        let c = ctx(1.0, 50);
        let k = ScalarField::constant(&c.grid, Loc::Center, 3.0);
        assert!(c.i_bracket(&k, 3).unwrap().max_abs() < 1e-14);
        let s = ScalarField::from_fn(&c.grid, Loc::Edge, |x| x);
        let ds = c.derivative(&s);
        let b1 = c.i_bracket(&ds, 1).unwrap();
        for (v, x) in b1.values.iter().zip(c.grid.coords(Loc::Edge)) {
            assert!((v - (x - 0.5)).abs() < 1e-14);
        }
        let s2 = ScalarField::from_fn(&c.grid, Loc::Edge, |x| x * x);
        let b3 = c.i_bracket(&c.derivative(&s2), 3).unwrap();
        for (v, x) in b3.values.iter().zip(c.grid.coords(Loc::Edge)) {
            assert!((v - (x * x - x)).abs() < 1e-14);
        }
        assert_eq!(c.i_bracket(&k, 4), Err(OpsError::BadBracket(4)));
    }

    #[test]
    fn projection_examples() {
        let c = ctx(1.0, 400);
        let y = ScalarField::from_fn(&c.grid, Loc::Center, |x| x * x);
        let one = ScalarField::constant(&c.grid, Loc::Center, 1.0);
        let p = c.weighted_projection(&y, &one).unwrap();
        let m = c.mean_omega(&y);
        for (a, b) in p.values.iter().zip(&y.values) {
            assert!((a - (b - m)).abs() < 1e-15);
        }
        let z = ScalarField::zeros(&c.grid, Loc::Center);
        let kap = ScalarField::from_fn(&c.grid, Loc::Center, |x| 1.0 + x);
        assert!(c.weighted_projection(&z, &kap).unwrap().max_abs() == 0.0);
        let p1 = c.weighted_projection(&one, &kap).unwrap();
        for (v, x) in p1.values.iter().zip(c.grid.coords(Loc::Center)) {
            assert!((v - (1.0 - 1.0 / ((1.0 + x) * 2f64.ln()))).abs() < 1e-5);
        }
        assert!(c.mean_omega(&p1).abs() < 1e-15);
        let bad = ScalarField::from_fn(&c.grid, Loc::Center, |x| x - 0.5);
        assert!(matches!(c.weighted_projection(&one, &bad), Err(OpsError::NonpositiveWeight(_))));
    }

    #[test]
    fn time_primitive_examples() {
        let t: Vec<f64> = (0..=10).map(|n| n as f64 / 10.0).collect();
        let one = time_primitive(&t, &vec![1.0; 11]);
        assert!((one[10] - 1.0).abs() < 1e-15);
        let lin = time_primitive(&t, &t.iter().map(|s| 2.0 * s).collect::<Vec<_>>());
        for (v, s) in lin.iter().zip(&t) {
            assert!((v - s * s).abs() < 1e-14);
        }
        let g = Grid::new(1.0, 1.0, 4, 10).unwrap();
        let w = SpaceTimeField::from_fn(&g, Loc::Center, &t, |x, _| x);
        let it = time_primitive_field(&w);
        for (n, s) in t.iter().enumerate() {
            for (v, x) in it.rows[n].iter().zip(g.coords(Loc::Center)) {
                assert!((v - x * s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn difference_quotient_examples() {
        let c = ctx(1.0, 16);
        let y = ScalarField::from_fn(&c.grid, Loc::Center, |x| x);
        for j in 1..16 {
            assert!(c.difference_quotient(&y, j).unwrap().values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
        let k = ScalarField::constant(&c.grid, Loc::Center, 2.0);
        assert_eq!(c.difference_quotient(&k, 3).unwrap().max_abs(), 0.0);
        let step = ScalarField::from_fn(&c.grid, Loc::Center, |x| if x > 0.5 { 1.0 } else { 0.0 });
        let q = c.difference_quotient(&step, 4).unwrap();
        let xs = c.grid.coords(Loc::Center);
        for (i, v) in q.values.iter().enumerate() {
            let expect = if xs[i] > 0.25 && xs[i] < 0.5 { 4.0 } else { 0.0 };
            assert_eq!(*v, expect);
        }
        assert_eq!(c.difference_quotient(&y, 16), Err(OpsError::ShiftOutOfRange { j: 16, len: 16 }));
        assert!(c.difference_quotient(&y, 0).is_err());
    }
}
