//! `mnpairs`: command-line front end for the pairs-trading library.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 domain verdict
//! (ill-posed market, violated condition, failed verification).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mnpairs::analysis::{
    run_blowup_sweep, run_verification_suite, run_wellposedness_analysis, wellposedness_consistent, ExperimentReport,
    McSection, Table, Verdict, VerificationConfig, WellposednessGrid, DEFAULT_SEED,
};
use mnpairs::closed_form::{merton_specialize, mn_optimal_weights, optimal_weights, value_function};
use mnpairs::market_model::{check_wellposedness, derive_spread, validate_market, MarketParams};
use mnpairs::numerics::{solve_cauchy_fd, BoundaryCondition, FdGrid};
use mnpairs::simulation::{
    mc_utility_samples, sample_moments, simulate, simulate_terminal, write_paths_csv, SimConfig, Strategy,
};
use mnpairs::Error;

#[derive(Parser, Debug)]
#[command(name = "mnpairs", version, about = "Optimal pairs trading for two cointegrated stocks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON parameter file with alpha1, alpha2, sigma1, sigma2, rho, c.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha2: Option<f64>,
    #[arg(long, global = true)]
    sigma1: Option<f64>,
    #[arg(long, global = true)]
    sigma2: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    c: Option<f64>,
    /// Directory receiving `<report>.json` and one CSV per table.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spread parameters, critical risk aversion and the well-posedness verdict.
    Analyze {
        /// Number of risk aversions k / (n + 1) in the critical-horizon table.
        #[arg(long, default_value_t = 19)]
        gamma_points: usize,
    },
    /// Closed-form h, g, value and optimal weights at one state.
    Solve {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        z: f64,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        x: f64,
    },
    /// Monte Carlo expected utility of the optimal, market-neutral and no-trade strategies.
    Simulate {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        /// Fixed initial spread; omitted means a stationary draw.
        #[arg(long, allow_hyphen_values = true)]
        z0: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        x0: f64,
        /// Write the first `dump_paths` paths of the optimal strategy to this CSV file.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        dump_paths: usize,
        /// Gzip the path dump.
        #[arg(long)]
        gzip: bool,
    },
    /// Closed form against RK4, quadrature, finite differences and Monte Carlo.
    Verify {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        z0: f64,
    },
    /// Finite-difference solution of the auxiliary PDE against the closed form.
    PdeCheck {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
        z_min: f64,
        #[arg(long, default_value_t = 6.0)]
        z_max: f64,
        #[arg(long, default_value_t = 801)]
        nz: usize,
        #[arg(long, default_value_t = 2000)]
        nt: usize,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        /// Use zero curvature instead of closed-form values at the truncation points.
        #[arg(long)]
        zero_curvature: bool,
        /// Compare over |z| <= check.
        #[arg(long, default_value_t = 3.0)]
        check: f64,
    },
    /// Value function as the horizon approaches the critical horizon.
    Blowup {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        x: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        z: f64,
        #[arg(long, default_value_t = 6)]
        k_max: u32,
    },
}

enum Failure {
    Input(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::IllPosedHorizon { .. }
            | Error::ConditionViolated { .. }
            | Error::NotIllPosed { .. }
            | Error::EscapeTimeExceeded { .. }
            | Error::HorizonNearEscape { .. }
            | Error::GridTooCoarse { .. } => Failure::Domain(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

fn load_params(common: &Common) -> Result<MarketParams, Failure> {
    let mut fields = [None; 6];
    if let Some(path) = &common.params {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        let p: MarketParams = serde_json::from_str(&text)
            .map_err(|e| Failure::Input(format!("invalid parameter file {}: {e}", path.display())))?;
        fields = [Some(p.alpha1), Some(p.alpha2), Some(p.sigma1), Some(p.sigma2), Some(p.rho), Some(p.c)];
    }
    let overrides = [common.alpha1, common.alpha2, common.sigma1, common.sigma2, common.rho, common.c];
    for (f, o) in fields.iter_mut().zip(overrides) {
        if o.is_some() {
            *f = o;
        }
    }
    let names = ["alpha1", "alpha2", "sigma1", "sigma2", "rho", "c"];
    let missing: Vec<&str> = names.iter().zip(&fields).filter(|(_, f)| f.is_none()).map(|(n, _)| *n).collect();
    if !missing.is_empty() {
        return Err(Failure::Input(format!(
            "missing market parameters: {} (give --params FILE or the flags)",
            missing.join(", ")
        )));
    }
    let v: Vec<f64> = fields.iter().flatten().copied().collect();
    Ok(validate_market(MarketParams::new(v[0], v[1], v[2], v[3], v[4], v[5]))?)
}

fn render(report: &ExperimentReport, format: Format) -> String {
    match format {
        Format::Json => report.to_json() + "\n",
        Format::Text => report.render_text(),
        Format::Csv => {
            let mut out = String::new();
            for t in &report.tables {
                out += &format!("# {}\n{}\n", t.name, t.columns.join(","));
                for row in &t.rows {
                    let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
                    out += &cells.join(",");
                    out.push('\n');
                }
            }
            if !report.verdicts.is_empty() {
                out += "# verdicts\nname,passed,residual,tolerance\n";
                for v in &report.verdicts {
                    out += &format!("{},{},{:e},{:e}\n", v.name, v.passed, v.residual, v.tolerance);
                }
            }
            out
        }
    }
}

fn emit(report: &ExperimentReport, common: &Common) -> Result<(), Failure> {
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = std::io::stdout().lock().write_all(render(report, common.format).as_bytes());
    if let Some(dir) = &common.out_dir {
        write_outputs(report, dir).map_err(|e| Failure::Input(format!("cannot write to {}: {e}", dir.display())))?;
    }
    Ok(())
}

fn write_outputs(report: &ExperimentReport, dir: &Path) -> mnpairs::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{}.json", report.name)), report.to_json())?;
    report.write_table_csvs(dir)?;
    Ok(())
}

fn analyze(p: MarketParams, gamma_points: usize, common: &Common) -> Result<bool, Failure> {
    let grid = WellposednessGrid { n_gamma: gamma_points, ..WellposednessGrid::default() };
    let mut report = run_wellposedness_analysis(p, &grid)?;
    let cond = check_wellposedness(p)?;
    report.set("seed", common.seed);
    report.set_num("gamma0", cond.gamma0);
    report.set("holds", cond.holds);
    emit(&report, common)?;
    if !wellposedness_consistent(&report) {
        return Err(Failure::Domain("well-posedness characterisations disagree".into()));
    }
    Ok(cond.holds)
}

#[allow(clippy::too_many_arguments)]
fn solve(p: MarketParams, gamma: f64, horizon: f64, z: f64, t: f64, x: f64, common: &Common) -> Result<bool, Failure> {
    let sol = merton_specialize(p, gamma, horizon)?;
    let tau = horizon - t;
    let mut report = ExperimentReport::new("solve", sol.market);
    for (k, v) in [("gamma", gamma), ("horizon", horizon), ("z", z), ("t", t), ("x", x)] {
        report.set_num(k, v);
    }
    report.set("seed", common.seed);
    report.set_num("t_n", sol.t_n);
    report.set_num("gamma0", sol.spread.gamma0);
    report.set_num("h", sol.h(tau)?);
    report.set_num("g", sol.g(tau)?);
    report.set_num("log_kernel", sol.log_kernel(x, z, t)?);
    match value_function(&sol, x, z, t) {
        Ok(v) => report.set_num("v", v),
        Err(Error::ValueOverflow { .. }) => report.set_num("v", f64::INFINITY),
        Err(e) => return Err(e.into()),
    }
    let w = optimal_weights(&sol, z, t)?;
    report.set("optimal_weights", w);
    let cond = check_wellposedness(sol.market)?;
    if cond.holds && t < horizon {
        report.set("market_neutral_weights", mn_optimal_weights(sol.market, gamma, horizon, z, t)?);
    }
    let mut table = Table::new("weights", &["asset", "optimal"]);
    table.rows.push(vec![1.0, w[0]]);
    table.rows.push(vec![2.0, w[1]]);
    report.tables.push(table);
    emit(&report, common)?;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    p: MarketParams,
    gamma: f64,
    horizon: f64,
    paths: usize,
    steps: usize,
    z0: Option<f64>,
    x0: f64,
    dump: Option<&Path>,
    dump_paths: usize,
    gzip: bool,
    common: &Common,
) -> Result<bool, Failure> {
    let sol = merton_specialize(p, gamma, horizon)?;
    let mut strategies = vec![Strategy::optimal(&sol)];
    if let Ok(mn) = Strategy::market_neutral(sol.market, gamma, horizon) {
        strategies.push(mn);
    }
    strategies.push(Strategy::zero());
    let mut cfg = SimConfig::new(paths, steps, horizon, common.seed);
    cfg.x0 = x0;
    if let Some(z) = z0 {
        cfg = cfg.with_fixed_z0(z);
    }
    let samples = mc_utility_samples(sol.market, &strategies, &cfg, gamma)?;
    let terminal = simulate_terminal(sol.market, &[], &cfg)?;
    let zs: Vec<f64> = terminal.iter().map(|s| s.z).collect();
    let zm = sample_moments(&zs);

    let mut report = ExperimentReport::new("simulate", sol.market);
    report.set("seed", common.seed);
    report.set("config", cfg);
    report.set_num("gamma", gamma);
    let reference = match z0 {
        Some(z) => value_function(&sol, x0, z, 0.0).unwrap_or(f64::INFINITY),
        None => f64::NAN,
    };
    for (k, label) in samples.labels.iter().enumerate() {
        let est = samples.estimate(k);
        let z = (est.mean - reference) / est.std_error;
        report.mc_sections.push(McSection {
            name: label.clone(),
            estimate: est,
            reference: if label == "zero" { f64::NAN } else { reference },
            z_score: if label == "zero" { f64::NAN } else { z },
            threshold: 3.0,
            seeds: vec![common.seed],
            // informational: the simulate command reports, it does not judge
            passed: true,
        });
    }
    let mut table = Table::new("terminal_spread", &["mean", "se_mean", "variance", "se_variance"]);
    table.rows.push(vec![zm.mean, zm.se_mean, zm.variance, zm.se_variance]);
    report.tables.push(table);

    if let Some(path) = dump {
        let n = dump_paths.clamp(1, paths);
        let small = SimConfig { n_paths: n, ..cfg };
        let bundle = simulate(sol.market, &strategies[..1], &small)?;
        write_paths_csv(path, &bundle, 0, gzip)?;
        report.set("dump", path.display().to_string());
    }
    emit(&report, common)?;
    Ok(true)
}

fn verify(p: MarketParams, gamma: f64, horizon: f64, paths: usize, steps: usize, z0: f64, common: &Common) -> Result<bool, Failure> {
    let cfg = VerificationConfig { n_paths: paths, n_steps: steps, seed: common.seed, z0, ..VerificationConfig::default() };
    let mut report = run_verification_suite(p, gamma, horizon, &cfg)?;
    report.set("seed", common.seed);
    emit(&report, common)?;
    Ok(report.passed())
}

fn pde_check(p: MarketParams, gamma: f64, horizon: f64, grid: FdGrid, check: f64, common: &Common) -> Result<bool, Failure> {
    let sol = merton_specialize(p, gamma, horizon)?;
    let fd = solve_cauchy_fd(&sol.spec, horizon, &grid)?;
    let (g, h) = (sol.g(horizon)?, sol.h(horizon)?);
    let mut report = ExperimentReport::new("pde_check", sol.market);
    report.set("seed", common.seed);
    report.set_num("gamma", gamma);
    report.set_num("horizon", horizon);
    report.set("grid", grid);
    report.set_num("self_consistency", fd.self_consistency);
    let mut table = Table::new("profile", &["z", "phi_fd", "phi_closed_form"]);
    let mut worst = 0.0f64;
    for (&z, &phi) in fd.z.iter().zip(&fd.phi) {
        let exact = (g + 0.5 * h * z * z).exp();
        if z.abs() <= check {
            worst = worst.max(((phi - exact) / exact).abs());
        }
        table.rows.push(vec![z, phi, exact]);
    }
    report.verdicts.push(Verdict::at_most(
        "pde_vs_closed_form",
        worst,
        1e-3,
        format!("max relative error over |z| <= {check}"),
    ));
    report.tables.push(table);
    emit(&report, common)?;
    Ok(report.passed())
}

fn blowup(p: MarketParams, gamma: f64, x: f64, z: f64, k_max: u32, common: &Common) -> Result<bool, Failure> {
    let spread = derive_spread(p)?;
    let mut report = run_blowup_sweep(p, gamma, x, z, k_max)?;
    report.set("seed", common.seed);
    report.set_num("gamma0", spread.gamma0);
    emit(&report, common)?;
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let common = &cli.common;
    if let Some(n) = common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(format!("cannot set worker count: {e}")))?;
    }
    let p = load_params(common)?;
    match cli.command {
        Command::Analyze { gamma_points } => analyze(p, gamma_points, common),
        Command::Solve { gamma, horizon, z, t, x } => solve(p, gamma, horizon, z, t, x, common),
        Command::Simulate { gamma, horizon, paths, steps, z0, x0, dump, dump_paths, gzip } => {
            simulate_cmd(p, gamma, horizon, paths, steps, z0, x0, dump.as_deref(), dump_paths, gzip, common)
        }
        Command::Verify { gamma, horizon, paths, steps, z0 } => verify(p, gamma, horizon, paths, steps, z0, common),
        Command::PdeCheck { gamma, horizon, z_min, z_max, nz, nt, theta, zero_curvature, check } => {
            let boundary =
                if zero_curvature { BoundaryCondition::ZeroCurvature } else { BoundaryCondition::ClosedForm };
            let grid = FdGrid { z_min, z_max, nz, nt, theta, boundary };
            pde_check(p, gamma, horizon, grid, check, common)
        }
        Command::Blowup { gamma, x, z, k_max } => blowup(p, gamma, x, z, k_max, common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
