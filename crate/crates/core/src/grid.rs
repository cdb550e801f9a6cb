//! Uniform staggered grids and sampled fields.
//!
//! Thermodynamic quantities live at cell centers `x_i = (i + 1/2) dx`,
//! velocities at cell edges `x_j = j dx`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("domain length must be positive, got {0}")]
    BadLength(f64),
    #[error("final time must be positive, got {0}")]
    BadTime(f64),
    #[error("need at least 4 cells, got {0}")]
    TooFewCells(usize),
    #[error("need at least one time step")]
    NoSteps,
}

/// Sample location on the staggered grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loc {
    Center,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_len: f64,
    pub t_end: f64,
    pub nx: usize,
    pub nt: usize,
}

impl Grid {
    pub fn new(x_len: f64, t_end: f64, nx: usize, nt: usize) -> Result<Self, GridError> {
        if !(x_len > 0.0 && x_len.is_finite()) {
            return Err(GridError::BadLength(x_len));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(GridError::BadTime(t_end));
        }
        if nx < 4 {
            return Err(GridError::TooFewCells(nx));
        }
        if nt < 1 {
            return Err(GridError::NoSteps);
        }
        Ok(Self { x_len, t_end, nx, nt })
    }

    pub fn dx(&self) -> f64 {
        self.x_len / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    pub fn len(&self, loc: Loc) -> usize {
        match loc {
            Loc::Center => self.nx,
            Loc::Edge => self.nx + 1,
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.x_len / self.nx as f64
    }

    pub fn edge(&self, j: usize) -> f64 {
        if j == self.nx {
            self.x_len
        } else {
            j as f64 * self.x_len / self.nx as f64
        }
    }

    pub fn coords(&self, loc: Loc) -> Vec<f64> {
        match loc {
            Loc::Center => (0..self.nx).map(|i| self.center(i)).collect(),
            Loc::Edge => (0..=self.nx).map(|j| self.edge(j)).collect(),
        }
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.nt {
            self.t_end
        } else {
            n as f64 * self.t_end / self.nt as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|n| self.time(n)).collect()
    }

    /// Quadrature over Ω: midpoint for centers, trapezoid for edges.
    /// The constant 1 integrates to `x_len` exactly.
    pub fn integrate(&self, loc: Loc, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.len(loc));
        let s = match loc {
            Loc::Center => v.iter().sum::<f64>(),
            Loc::Edge => {
                let inner: f64 = v[1..self.nx].iter().sum();
                inner + 0.5 * (v[0] + v[self.nx])
            }
        };
        s / self.nx as f64 * self.x_len
    }
}

/// Samples of a function on Ω at one staggering location.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub loc: Loc,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(loc: Loc, values: Vec<f64>) -> Self {
        Self { loc, values }
    }

    pub fn zeros(grid: &Grid, loc: Loc) -> Self {
        Self::new(loc, vec![0.0; grid.len(loc)])
    }

    pub fn constant(grid: &Grid, loc: Loc, c: f64) -> Self {
        Self::new(loc, vec![c; grid.len(loc)])
    }

    pub fn from_fn(grid: &Grid, loc: Loc, f: impl Fn(f64) -> f64) -> Self {
        Self::new(loc, grid.coords(loc).into_iter().map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.loc, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.loc, other.loc, "field locations differ");
        assert_eq!(self.len(), other.len(), "field lengths differ");
        Self::new(
            self.loc,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Edge samples averaged onto centers; centers are returned unchanged.
    pub fn to_centers(&self) -> Self {
        match self.loc {
            Loc::Center => self.clone(),
            Loc::Edge => Self::new(
                Loc::Center,
                self.values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
            ),
        }
    }
}

/// Snapshots of a field at a sequence of times.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub loc: Loc,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn new(loc: Loc, times: Vec<f64>, rows: Vec<Vec<f64>>) -> Self {
        assert_eq!(times.len(), rows.len(), "one row per time");
        Self { loc, times, rows }
    }

    pub fn from_fn(grid: &Grid, loc: Loc, times: &[f64], f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = grid.coords(loc);
        let rows = times
            .iter()
            .map(|&t| xs.iter().map(|&x| f(x, t)).collect())
            .collect();
        Self::new(loc, times.to_vec(), rows)
    }

    pub fn zeros_like(&self) -> Self {
        Self::new(
            self.loc,
            self.times.clone(),
            self.rows.iter().map(|r| vec![0.0; r.len()]).collect(),
        )
    }

    pub fn nt(&self) -> usize {
        self.times.len()
    }

    pub fn row(&self, n: usize) -> ScalarField {
        ScalarField::new(self.loc, self.rows[n].clone())
    }

    pub fn last(&self) -> ScalarField {
        self.row(self.rows.len() - 1)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(
            self.loc,
            self.times.clone(),
            self.rows.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect(),
        )
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.loc, other.loc, "field locations differ");
        assert_eq!(self.rows.len(), other.rows.len(), "snapshot counts differ");
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                assert_eq!(a.len(), b.len(), "row lengths differ");
                a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
            })
            .collect();
        Self::new(self.loc, self.times.clone(), rows)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Applies a row transformation, possibly changing location.
    pub fn map_rows(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        let mut loc = self.loc;
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let out = f(&ScalarField::new(self.loc, r.clone()));
                loc = out.loc;
                out.values
            })
            .collect();
        Self::new(loc, self.times.clone(), rows)
    }

    /// Multiplies each snapshot by a time weight.
    pub fn weight_in_time(&self, w: impl Fn(f64) -> f64) -> Self {
        let rows = self
            .times
            .iter()
            .zip(&self.rows)
            .map(|(&t, r)| {
                let c = w(t);
                r.iter().map(|v| c * v).collect()
            })
            .collect();
        Self::new(self.loc, self.times.clone(), rows)
    }

    pub fn to_centers(&self) -> Self {
        self.map_rows(|r| r.to_centers())
    }

    pub fn max_abs(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}
