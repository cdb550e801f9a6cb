#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use nslab::grid::{Grid, Loc, ScalarField};
use nslab::problem::{ProblemConfig, ProblemSpec};
use rand::Rng;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn read_config(name: &str) -> String {
    std::fs::read_to_string(config_path(name)).expect("config file")
}

/// Expected outcome of parsing and evaluating at `x = 0.3, t = 0.7, xi = 0.6, chi = 1.5`.
pub enum Golden {
    Value(f64),
    Error(&'static str),
}

pub const GOLDEN_BINDING: (f64, f64, f64, f64) = (0.3, 0.7, 0.6, 1.5);

pub fn dsl_golden() -> Vec<(&'static str, Golden)> {
    use Golden::*;
    vec![
        ("1 + 2*x", Value(1.6)),
        ("-2^2", Value(-4.0)),
        ("2^3^2", Value(512.0)),
        ("2^-1", Value(0.5)),
        ("8/4/2", Value(1.0)),
        ("1 - 2 - 3", Value(-4.0)),
        ("sin(pi*x)*exp(-t)", Value(0.40174594992409635)),
        ("step(xi - 0.5)", Value(1.0)),
        ("frac(x/0.25)", Value(0.19999999999999996)),
        ("min(x, t) + max(x, t)", Value(1.0)),
        ("abs(-3)*chi", Value(4.5)),
        ("ln(1 + x^2)", Value(0.08617769624105241)),
        ("(1 + 2)*3", Value(9.0)),
        ("cos(2*pi*xi)^2", Value(0.654508497187474)),
        ("1e-3*x + 2.5E2", Value(250.0003)),
        ("x + * 2", Error("syntax error at 1:5: found '*', expected one of [number, identifier, '(', '-']")),
        ("sin(x", Error("syntax error at 1:6: found end of input, expected one of ['+', '-', '*', '/', '^', ')']")),
        ("y + 1", Error("unknown identifier 'y' at 1:1")),
        ("min(x)", Error("syntax error at 1:6: found ')', expected one of ['+', '-', '*', '/', '^', ',']")),
        ("2 3", Error("syntax error at 1:3: found number '3', expected one of ['+', '-', '*', '/', '^', end of input]")),
    ]
}

/// `s(x) = c + Σ a_k cos(kπx/X) + b_k sin(kπx/X)` with an exact mean and derivative.
#[derive(Debug, Clone)]
pub struct Trig {
    pub x_len: f64,
    pub c: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Trig {
    pub fn random(rng: &mut impl Rng, x_len: f64, modes: usize) -> Self {
        Self {
            x_len,
            c: rng.gen_range(-1.0..1.0),
            a: (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            b: (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    fn w(&self, k: usize) -> f64 {
        (k + 1) as f64 * PI / self.x_len
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c
            + (0..self.a.len())
                .map(|k| self.a[k] * (self.w(k) * x).cos() + self.b[k] * (self.w(k) * x).sin())
                .sum::<f64>()
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (0..self.a.len())
            .map(|k| self.w(k) * (-self.a[k] * (self.w(k) * x).sin() + self.b[k] * (self.w(k) * x).cos()))
            .sum()
    }

    /// `⟨s⟩_Ω` in closed form.
    pub fn mean(&self) -> f64 {
        let x = self.x_len;
        self.c
            + (0..self.a.len())
                .map(|k| {
                    let w = self.w(k);
                    (self.a[k] * (w * x).sin() + self.b[k] * (1.0 - (w * x).cos())) / (w * x)
                })
                .sum::<f64>()
    }

    pub fn sample(&self, grid: &Grid, loc: Loc) -> ScalarField {
        ScalarField::from_fn(grid, loc, |x| self.eval(x))
    }
}

/// Smooth-pulse problem for family `m` with `nt = ratio · nx`.
pub fn pulse_spec(m: u8, nx: usize, ratio: usize) -> ProblemSpec {
    let bc = match m {
        1 => r#"{"m": 1}"#,
        2 => r#"{"m": 2, "p0": 1.0}"#,
        _ => r#"{"m": 3, "p0": 1.0, "pX": 1.0}"#,
    };
    let nt = ratio * nx;
    let json = format!(
        r#"{{"domain": {{"X": 1.0, "T": 0.5}}, "grid": {{"nx": {nx}, "nt": {nt}}},
          "gas": {{"nu": 1.0, "k": 1.0, "cV": 1.0, "lambda": 1.0}}, "bc": {bc},
          "data": {{"eta0": "1", "u0": "0.1*sin(pi*x)", "theta0": "1"}}, "N": 10}}"#
    );
    ProblemConfig::from_json(&json).unwrap().build().unwrap()
}

/// `log2(e_k / e_{k+1})` for consecutive halvings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
