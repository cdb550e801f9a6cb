mod common;

use nslab::dsl::PiecewiseCertificate;
use nslab::grid::{Grid, Loc};
use nslab::homog::{c_l2_distance, solve_homogenized, TwoScaleData};
use nslab::ops::OperatorContext;
use nslab::problem::ProblemConfig;
use nslab::solver::{solve, SchemeParams};
use nslab::study::{run_homog_study, HomogStudyConfig};
use nslab::twoscale::{homogenized_theta0, OscillationSpec, TwoScaleField};
use proptest::prelude::*;

fn config(data: &str) -> ProblemConfig {
    let json = format!(
        r#"{{"domain": {{"X": 1.0, "T": 0.2}}, "grid": {{"nx": 64, "nt": 128}},
          "gas": {{"nu": 1.0, "k": 1.0, "cV": 1.0, "lambda": 1.0}}, "bc": {{"m": 2, "p0": 1.0}},
          "data": {data}, "N": 10}}"#
    );
    ProblemConfig::from_json(&json).unwrap()
}

#[test]
fn xi_independent_data_reduce_to_the_direct_solve() {
    let cfg = config(r#"{"eta0": "1 + 0.2*x", "u0": "0.1*sin(pi*x)", "theta0": "1 + 0.1*cos(pi*x)"}"#);
    let data = TwoScaleData::from_config(&cfg).unwrap();
    assert!(data.is_xi_independent());
    let scheme = SchemeParams::default();
    let hom = solve_homogenized(&data, &scheme).unwrap();
    let direct = solve(&cfg.build().unwrap(), &scheme).unwrap();
    assert_eq!(hom.base.eta, direct.eta);
    assert_eq!(hom.base.u, direct.u);
    assert_eq!(hom.base.theta, direct.theta);
}

#[test]
fn reconstruction_matches_data_and_mean() {
    let cfg = config(
        r#"{"eta0": "1 + 0.5*step(xi - 0.5)", "u0": "0.1*sin(pi*x)", "theta0": "1 + 0.2*sin(2*pi*xi)", "breakpoints_xi": [0.5]}"#,
    );
    let data = TwoScaleData::from_config(&cfg).unwrap();
    let hom = solve_homogenized(&data, &SchemeParams::default()).unwrap();
    let g = data.grid;
    for xi in [0.1, 0.7] {
        let eta = hom.reconstruct_eta(&data.eta0, xi).unwrap();
        let row0 = eta.row(0);
        for (v, x) in row0.values.iter().zip(g.coords(Loc::Center)) {
            assert!((v - data.eta0.eval(xi, x, 0.0).unwrap()).abs() <= 1e-14);
        }
        assert!(eta.min() > 0.0);
    }
    let mean = hom.reconstruct_eta_mean(&data.eta0).unwrap();
    assert!(c_l2_distance(&g, &mean, &hom.base.eta) <= 1e-12);
    let osc = OscillationSpec::new(0.125).unwrap();
    assert!(hom.eta_epsilon(&data.eta0, &osc).unwrap().min() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn theta_hat_dominates_mean(a in -2.0f64..2.0, b in -1.0f64..1.0, c in 0.1f64..2.0, d in 0.0f64..1.0, c_v in 0.5f64..5.0, k in 1u32..20) {
        let bp = k as f64 / 20.0;
        let cert = PiecewiseCertificate::new(vec![bp]).unwrap();
        let u = TwoScaleField::parse(&format!("{a}*sin(2*pi*xi) + {b}*step(xi - {bp})*(1 + x)"), cert.clone()).unwrap();
        let th = TwoScaleField::parse(&format!("{c} + {d}*cos(2*pi*xi + x)^2"), cert).unwrap();
        let g = Grid::new(1.0, 1.0, 32, 1).unwrap();
        let hat = homogenized_theta0(&u, &th, c_v, &g).unwrap();
        let mean = th.xi_mean(&g, Loc::Center, 0.0).unwrap();
        for (h, m) in hat.values.iter().zip(&mean.values) {
            prop_assert!(h - m >= -1e-12);
        }
    }

    /// `max |I R_ε y| <= 2ε ‖y‖_WH` with breakpoints on cell faces.
    #[test]
    fn averaging_error_bound(k in 4u32..36, amp in 0.1f64..3.0, j in 3i32..7, smooth in -1.0f64..1.0) {
        let bp = k as f64 / 40.0;
        let y = TwoScaleField::parse(
            &format!("{amp}*(1 + x^2)*step(xi - {bp}) + {smooth}*sin(2*pi*xi)*cos(pi*x)"),
            PiecewiseCertificate::new(vec![bp]).unwrap(),
        )
        .unwrap();
        let eps = 0.5f64.powi(j);
        let grid = Grid::new(1.0, 1.0, 2560, 1).unwrap();
        let coarse = Grid::new(1.0, 1.0, 256, 1).unwrap();
        let ctx = OperatorContext::new(grid);
        let r = y.averaging_error(&grid, Loc::Center, &OscillationSpec::new(eps).unwrap(), 0.0).unwrap();
        let wh = y.wh_seminorm(&coarse, Loc::Center, 0.0).unwrap();
        prop_assert!(ctx.primitive(&r).max_abs() <= 2.0 * eps * wh);
    }
}

#[test]
fn oscillating_benchmark_passes() {
    let cfg = HomogStudyConfig::from_json(&common::read_config("homog_oscillating.json")).unwrap();
    let table = run_homog_study(&cfg).unwrap();
    assert!(table.partial.is_none());
    assert!(table.passed(), "{}", table.summary());
}
