use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nslab::exec::{with_jobs, Exec};
use nslab::grid::{Grid, Loc, ScalarField, SpaceTimeField};
use nslab::homog::{solve_homogenized, Reconstruction, TwoScaleData};
use nslab::norms::{self, Exponent};
use nslab::problem::ProblemConfig;
use nslab::solver::{diagnostics, solve, SchemeParams};
use nslab::study::{self, ConvergenceTable, HomogStudyConfig, LipschitzStudyConfig, StudyError};
use nslab::twoscale::OscillationSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "nslab", version, about = "Viscous heat-conducting gas: solves, homogenization and rate studies")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output directory for reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Comma-separated ε values (overrides the config sweep).
    #[arg(long, global = true, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
    /// Worker threads for the sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for randomized fields.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Run sweeps on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// ε-sweep of the two-scale problem against its averaged problem.
    StudyHomog { config: PathBuf },
    /// δ-sweep of a perturbation family against the base problem.
    StudyLipschitz { config: PathBuf },
    /// One solve: trajectory snapshots and diagnostics.
    Solve {
        config: PathBuf,
        /// Snapshot stride in base steps.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Averaged run plus reconstructed η^(ε) snapshots.
    Homogenize { config: PathBuf },
    /// Evaluates one norm of a field and prints it.
    Norms { config: PathBuf },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Msg(String),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<String> for CliError {
    fn from(s: String) -> Self {
        CliError::Msg(s)
    }
}

/// A problem with optional scheme settings; a bare problem config is accepted too.
#[derive(Deserialize)]
struct RunConfig {
    problem: ProblemConfig,
    #[serde(default)]
    scheme: SchemeParams,
    #[serde(default)]
    eps_list: Option<Vec<f64>>,
    #[serde(default)]
    reconstruction: Reconstruction,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Msg(format!("{}: {e}", path.display())))
}

fn run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = read(path)?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if v.get("problem").is_some() {
        serde_json::from_value(v).map_err(|e| format!("{}: {e}", path.display()).into())
    } else {
        let problem: ProblemConfig = serde_json::from_value(v).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(RunConfig { problem, scheme: SchemeParams::default(), eps_list: None, reconstruction: Reconstruction::default() })
    }
}

fn exec_of(cli: &Cli) -> Exec {
    if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn finish_table(table: &ConvergenceTable, out: &Path, stem: &str) -> Result<bool, CliError> {
    study::write_report(table, &out.join(format!("{stem}.csv")))?;
    println!("{}", table.summary());
    Ok(table.passed())
}

fn settle(r: Result<ConvergenceTable, StudyError>, out: &Path, stem: &str) -> Result<bool, CliError> {
    match r {
        Ok(t) => finish_table(&t, out, stem),
        Err(StudyError::Aborted { table, source }) => {
            study::write_report(&table, &out.join(format!("{stem}.csv")))?;
            eprintln!("partial report written to {}", out.display());
            Err(CliError::Study(*source))
        }
        Err(e) => Err(e.into()),
    }
}

fn study_homog(cli: &Cli, path: &Path) -> Result<bool, CliError> {
    let mut cfg = HomogStudyConfig::from_json(&read(path)?)?;
    if let Some(e) = &cli.eps_list {
        cfg.eps_list = Some(e.clone());
    }
    let exec = exec_of(cli);
    let r = with_jobs(cli.jobs, || study::run_homog_study_with(&cfg, exec));
    settle(r, &cli.out, "homog_table")
}

fn study_lipschitz(cli: &Cli, path: &Path) -> Result<bool, CliError> {
    let cfg = LipschitzStudyConfig::from_json(&read(path)?)?;
    let exec = exec_of(cli);
    let r = with_jobs(cli.jobs, || study::run_lipschitz_study_with(&cfg, exec));
    let ok = settle(r, &cli.out, "lipschitz_table")?;
    let rows = study::delta_breakdowns(&cfg)?;
    study::write_delta_csv(&rows, &cli.out.join("lipschitz_delta.csv"))?;
    Ok(ok)
}

fn run_solve(cli: &Cli, path: &Path, stride: Option<usize>) -> Result<bool, CliError> {
    let rc = run_config(path)?;
    let spec = rc.problem.build().map_err(|e| e.to_string())?;
    let mut scheme = rc.scheme;
    if let Some(s) = stride {
        scheme.store_every = s;
    }
    let sol = solve(&spec, &scheme).map_err(|e| e.to_string())?;
    let rep = diagnostics(&sol, &spec);
    let out = &cli.out;
    sol.write_trajectory_csv(fs::File::create(out.join("trajectory.csv"))?).map_err(|e| e.to_string())?;
    rep.write_csv(fs::File::create(out.join("diagnostics.csv"))?).map_err(|e| e.to_string())?;
    rep.write_energy_csv(fs::File::create(out.join("energy.csv"))?).map_err(|e| e.to_string())?;
    let st = sol.steps;
    let text = format!(
        "effective steps         {} ({} halved, min dt {:e})\nPicard iterations       {} (max {})\n{rep}",
        st.effective_steps, st.halved_steps, st.min_dt, st.picard_iterations, st.max_picard
    );
    fs::write(out.join("diagnostics.txt"), &text)?;
    print!("{text}");
    Ok(true)
}

fn eta_csv(grid: &Grid, eta: &SpaceTimeField) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Msg(e.to_string());
    w.write_record(["t", "x", "eta"]).map_err(err)?;
    let xs = grid.coords(Loc::Center);
    for (n, t) in eta.times.iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            w.write_record([t, x, &eta.rows[n][i]].map(|v| format!("{v:e}"))).map_err(err)?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).expect("ascii"))
}

fn homogenize(cli: &Cli, path: &Path) -> Result<bool, CliError> {
    let rc = run_config(path)?;
    let eps = cli.eps_list.clone().or(rc.eps_list.clone()).ok_or_else(|| CliError::Msg("homogenize needs --eps-list or eps_list in the config".into()))?;
    let data = TwoScaleData::from_config(&rc.problem).map_err(|e| e.to_string())?;
    let hs = solve_homogenized(&data, &rc.scheme).map_err(|e| e.to_string())?.with_rule(rc.reconstruction);
    let out = &cli.out;
    hs.base.write_trajectory_csv(fs::File::create(out.join("averaged.csv"))?).map_err(|e| e.to_string())?;
    let grid = data.grid;
    let exec = exec_of(cli);
    let files = with_jobs(cli.jobs, || {
        exec.map(&eps, |&e| -> Result<(f64, f64, f64, String), CliError> {
            let osc = OscillationSpec::new(e).map_err(|err| err.to_string())?;
            let eta = hs.eta_epsilon(&data.eta0, &osc).map_err(|err| err.to_string())?;
            Ok((e, eta.min(), eta.max_abs(), eta_csv(&grid, &eta)?))
        })
    });
    let mut summary = format!("eq6g residual           {:e}\n", hs.eq6g_residual());
    for f in files {
        let (e, lo, hi, body) = f?;
        fs::write(out.join(format!("eta_eps_{e:e}.csv")), body)?;
        summary.push_str(&format!("eps {e:e}: eta in [{lo:e}, {hi:e}]\n"));
    }
    fs::write(out.join("homogenize.txt"), &summary)?;
    print!("{summary}");
    Ok(true)
}

#[derive(Deserialize, Clone, Copy)]
#[serde(untagged)]
enum ExpCfg {
    Num(f64),
    Word(InfWord),
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum InfWord {
    Inf,
}

impl ExpCfg {
    fn get(self) -> Result<Exponent, CliError> {
        match self {
            ExpCfg::Num(q) => Exponent::new(q).map_err(|e| CliError::Msg(e.to_string())),
            ExpCfg::Word(_) => Ok(Exponent::Inf),
        }
    }
}

#[derive(Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "snake_case")]
enum NormName {
    Lq,
    Lqr,
    Hm1,
    SupHm1,
    V2,
    Wh,
    V2star,
    H21star,
}

#[derive(Deserialize)]
struct NormsConfig {
    #[serde(rename = "X", default = "one")]
    x: f64,
    #[serde(rename = "T", default = "one")]
    t: f64,
    nx: usize,
    #[serde(default = "default_nt")]
    nt: usize,
    /// DSL expression in `x, t`, or `"random"`.
    field: String,
    norm: NormName,
    #[serde(default)]
    edges: bool,
    #[serde(default)]
    q: Option<ExpCfg>,
    #[serde(default)]
    r: Option<ExpCfg>,
    #[serde(default = "default_m")]
    m: u8,
    #[serde(default = "one")]
    kappa_floor: f64,
    /// Time at which spatial norms are taken.
    #[serde(default)]
    at: f64,
}

fn one() -> f64 {
    1.0
}

fn default_nt() -> usize {
    64
}

fn default_m() -> u8 {
    3
}

/// Random trigonometric polynomial in `x` with time-dependent amplitudes.
fn random_field(seed: u64) -> impl Fn(f64, f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<(f64, f64)> = (0..8).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    move |x, t| {
        coef.iter()
            .enumerate()
            .map(|(k, (a, b))| (a + b * t) * (std::f64::consts::PI * (k as f64 + 1.0) * x).sin() / (k as f64 + 1.0))
            .sum()
    }
}

fn eval_norm(cfg: &NormsConfig, seed: u64) -> Result<f64, CliError> {
    let grid = Grid::new(cfg.x, cfg.t, cfg.nx, cfg.nt).map_err(|e| e.to_string())?;
    let loc = if cfg.edges { Loc::Edge } else { Loc::Center };
    let f: Box<dyn Fn(f64, f64) -> f64> = if cfg.field.trim() == "random" {
        Box::new(random_field(seed))
    } else {
        let e = nslab::dsl::parse(&cfg.field).map_err(|e| e.to_string())?;
        Box::new(move |x, t| e.eval_xt(x, t).unwrap_or(f64::NAN))
    };
    let times = grid.times();
    let w = SpaceTimeField::from_fn(&grid, loc, &times, |x, t| f(x, t));
    let y = ScalarField::from_fn(&grid, loc, |x| f(x, cfg.at));
    if !w.rows.iter().flatten().chain(y.values.iter()).all(|v| v.is_finite()) {
        return Err("field is not finite on the grid".to_string().into());
    }
    let q = cfg.q.map(ExpCfg::get).transpose()?.unwrap_or(Exponent::Finite(2.0));
    let r = cfg.r.map(ExpCfg::get).transpose()?.unwrap_or(Exponent::Finite(2.0));
    if !(1..=3).contains(&cfg.m) {
        return Err(format!("m must be 1, 2 or 3, got {}", cfg.m).into());
    }
    Ok(match cfg.norm {
        NormName::Lq => norms::lq(&grid, loc, &y.values, q),
        NormName::Lqr => norms::lqr_norm(&grid, &w, q, r).map_err(|e| e.to_string())?,
        NormName::Hm1 => norms::h_minus_one(&grid, &y, cfg.m),
        NormName::SupHm1 => norms::sup_h_minus_one(&grid, &w, cfg.m),
        NormName::V2 => norms::v2_norm(&grid, &w),
        NormName::Wh => norms::wh_seminorm(&grid, &y),
        NormName::V2star => norms::v2star_majorant(&grid, &w),
        NormName::H21star => {
            if !(cfg.kappa_floor > 0.0) {
                return Err("kappa_floor must be positive".to_string().into());
            }
            norms::h21star_majorant(&grid, &w, cfg.m, cfg.kappa_floor)
        }
    })
}

fn run_norms(cli: &Cli, path: &Path) -> Result<bool, CliError> {
    let cfg: NormsConfig = serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    println!("{:e}", eval_norm(&cfg, cli.seed)?);
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    if !matches!(cli.cmd, Cmd::Norms { .. }) {
        fs::create_dir_all(&cli.out)?;
    }
    match &cli.cmd {
        Cmd::StudyHomog { config } => study_homog(cli, config),
        Cmd::StudyLipschitz { config } => study_lipschitz(cli, config),
        Cmd::Solve { config, stride } => run_solve(cli, config, *stride),
        Cmd::Homogenize { config } => homogenize(cli, config),
        Cmd::Norms { config } => run_norms(cli, config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
