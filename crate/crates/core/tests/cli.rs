mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::config_path;
use nslab::grid::{Grid, Loc, SpaceTimeField};
use nslab::norms;
use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nslab-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn nslab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nslab")).arg("--out").arg(out).args(args).output().unwrap()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, v.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

fn small_lipschitz(edit: impl FnOnce(&mut Value)) -> Value {
    let mut v: Value = serde_json::from_str(&common::read_config("lipschitz_m3.json")).unwrap();
    v["problem"]["grid"] = serde_json::json!({"nx": 64, "nt": 128});
    edit(&mut v);
    v
}

#[test]
fn solve_writes_trajectory_and_diagnostics() {
    let dir = scratch("solve");
    let cfg = config_path("solve_pulse.json");
    let o = nslab(&dir, &["solve", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trajectory.csv", "diagnostics.csv", "energy.csv", "diagnostics.txt"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn norms_matches_library() {
    let dir = scratch("norms");
    let cfg = config_path("norms_hm1.json");
    let o = nslab(&dir, &["norms", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let printed: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    let g = Grid::new(1.0, 1.0, 256, 64).unwrap();
    let w = SpaceTimeField::from_fn(&g, Loc::Center, &g.times(), |x, t| (2.0 * std::f64::consts::PI * x).sin() * (1.0 + t));
    let want = norms::sup_h_minus_one(&g, &w, 1);
    assert!((printed - want).abs() <= 1e-12 * want, "{printed} vs {want}");
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn study_exit_codes() {
    let dir = scratch("study");
    let ok = write_json(&dir, "ok.json", &small_lipschitz(|_| {}));
    let o = nslab(&dir.join("ok"), &["study-lipschitz", &ok]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    for f in ["lipschitz_table.csv", "lipschitz_table.summary.txt", "lipschitz_delta.csv"] {
        assert!(dir.join("ok").join(f).is_file(), "{f}");
    }

    let strict = write_json(&dir, "strict.json", &small_lipschitz(|v| v["thresholds"] = serde_json::json!({"theorem_min": 1.5})));
    let o = nslab(&dir.join("strict"), &["study-lipschitz", &strict]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("overall: FAIL"));

    let broken = write_json(&dir, "broken.json", &small_lipschitz(|v| v["family"]["eta0"] = Value::from("-20")));
    let o = nslab(&dir.join("broken"), &["--sequential", "study-lipschitz", &broken]);
    assert_eq!(o.status.code(), Some(2));
    assert!(dir.join("broken").join("lipschitz_table.csv").is_file());
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn errors_exit_with_two() {
    let dir = scratch("errors");
    let o = nslab(&dir, &["solve", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let homog = config_path("homog_oscillating.json");
    let o = nslab(&dir, &["--eps-list", "0.01,0.005", "study-homog", homog.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("resolution guard"));
    let _ = std::fs::remove_dir_all(dir);
}
