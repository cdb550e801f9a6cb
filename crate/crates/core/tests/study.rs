mod common;

use nslab::exec::Exec;
use nslab::study::{
    compute_delta, fit_rate, perturbed_spec, run_lipschitz_study_with, write_report, DeltaOptions, FitError,
    LipschitzStudyConfig, PerturbationFamily, StudyError,
};
use proptest::prelude::*;
use serde_json::Value;

/// The bundled m = 3 study on a coarser grid.
fn small_lipschitz(edit: impl FnOnce(&mut Value)) -> LipschitzStudyConfig {
    let mut v: Value = serde_json::from_str(&common::read_config("lipschitz_m3.json")).unwrap();
    v["problem"]["grid"] = serde_json::json!({"nx": 64, "nt": 128});
    edit(&mut v);
    LipschitzStudyConfig::from_json(&v.to_string()).unwrap()
}

fn linear_family() -> PerturbationFamily {
    PerturbationFamily {
        eta0: "0.5*sin(2*pi*x)".into(),
        theta0: "0.5*cos(pi*x)".into(),
        beta: "sin(2*pi*x)*exp(-t)".into(),
        gamma: "x*(1-x)".into(),
        beta_e: "cos(pi*x)".into(),
        bc_p0: "1".into(),
        bc_px: "-0.5".into(),
        bc_pi0: "0.3*t".into(),
        bc_pix: "-0.2".into(),
        ..PerturbationFamily::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn delta_is_homogeneous(delta in 1e-3f64..0.2, c in 0.1f64..3.0) {
        let cfg = small_lipschitz(|_| {});
        let base = cfg.problem.build().unwrap();
        let fam = linear_family().parse().unwrap();
        let opts = DeltaOptions::default();
        let a = compute_delta(&base, &perturbed_spec(&base, &fam, delta).unwrap(), &opts, None).unwrap();
        let b = compute_delta(&base, &perturbed_spec(&base, &fam, c * delta).unwrap(), &opts, None).unwrap();
        for ((name, x), (_, y)) in a.items().iter().zip(b.items().iter()) {
            prop_assert!((y - c * x).abs() <= 1e-10 * (c * x).abs().max(1e-14), "{}: {:e} vs {:e}", name, y, c * x);
        }
        prop_assert!(a.total > 0.0);
    }

    #[test]
    fn fit_recovers_power_laws(p in 0.2f64..2.5, k in 1e-3f64..1e3, n in 4usize..9) {
        let rows: Vec<(f64, f64)> = (0..n).map(|j| {
            let h = 0.5f64.powi(j as i32);
            (h, k * h.powf(p))
        }).collect();
        let fit = fit_rate(&rows).unwrap();
        prop_assert!((fit.slope - p).abs() <= 1e-9);
        prop_assert!((fit.intercept - k.ln()).abs() <= 1e-8);
        prop_assert!(fit.half_width <= 1e-8);
    }
}

#[test]
fn fit_rejects_bad_rows() {
    assert_eq!(fit_rate(&[(1.0, 1.0); 3]), Err(FitError::TooFewRows(3)));
    let rows = [(1.0, 1.0), (0.5, 0.5), (0.25, 0.0), (0.125, 0.1)];
    assert!(matches!(fit_rate(&rows), Err(FitError::DegenerateFit(_))));
    let rows = [(1.0, 1.0), (0.0, 0.5), (0.25, 0.2), (0.125, 0.1)];
    assert!(matches!(fit_rate(&rows), Err(FitError::BadAbscissa(_))));
}

#[test]
fn study_output_is_deterministic() {
    let cfg = small_lipschitz(|_| {});
    let a = run_lipschitz_study_with(&cfg, Exec::Sequential).unwrap();
    let b = run_lipschitz_study_with(&cfg, Exec::default()).unwrap();
    let c = run_lipschitz_study_with(&cfg, Exec::default()).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(b.to_csv(), c.to_csv());
    assert_eq!(a.summary(), b.summary());
}

#[test]
fn failed_sweep_keeps_a_partial_table() {
    let cfg = small_lipschitz(|v| v["family"]["eta0"] = Value::from("-20"));
    let dir = std::env::temp_dir().join(format!("nslab-partial-{}", std::process::id()));
    match run_lipschitz_study_with(&cfg, Exec::Sequential) {
        Err(StudyError::Aborted { table, source }) => {
            let msg = table.partial.clone().expect("partial marker");
            assert_eq!(msg, source.to_string());
            write_report(&table, &dir.join("t.csv")).unwrap();
            let summary = std::fs::read_to_string(dir.join("t.summary.txt")).unwrap();
            assert!(summary.contains("FAIL complete"), "{summary}");
            assert!(summary.contains("overall: FAIL"));
        }
        other => panic!("expected an aborted study, got {:?}", other.map(|t| t.summary())),
    }
    let _ = std::fs::remove_dir_all(dir);
}
