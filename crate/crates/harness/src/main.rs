use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use forage_core::analytic::{AnalyticConfig, DthetaSign};
use forage_core::fit::{pipeline_prediction, FitConfig};
use forage_core::microsim::{
    measure_single_robot_with, run_manifest, run_with, steady_stats, write_series_csv, SimConfig,
};
use forage_core::odemodel::{
    integrate, write_trajectory_csv, GeneralizedModel, IntegrateOptions, OdeState,
};
use forage_core::scenario::{make_scenario, DistributionKind, Scenario};
use forage_harness::plan::derive_seed;
use forage_harness::report::{
    read_rows_csv, render_report, render_rows_summary, write_rows_csv, ComparisonRow,
};
use forage_harness::runner::{run_plan, FitStore, RunnerConfig};
use forage_harness::{plot, ExperimentPlan, Regime};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "forage",
    about = "Central place foraging swarms: analytic rate model, population dynamics, and an agent-based microsimulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario file for one of the four block distributions.
    Generate(GenerateArgs),
    /// Run microsimulator replicates for a scenario and report steady statistics.
    Simulate(SimulateArgs),
    /// Fit the diffusion and collision-avoidance characterizations for a scenario kind.
    Calibrate(CalibrateArgs),
    /// Derive model parameters and predict steady behavior for a scenario.
    Predict(PredictArgs),
    /// Predict and simulate one scenario, emitting a comparison row.
    Compare(CompareArgs),
    /// Run a full experiment plan: calibrate, predict, simulate, compare, report.
    Sweep(SweepArgs),
    /// Re-render report and plots from an existing rows.csv.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: DistributionKind,
    /// Arena dimensions as WxH in meters, e.g. 16x8.
    #[arg(long, value_parser = parse_dims)]
    arena: (f64, f64),
    #[arg(long)]
    robots: u32,
    #[arg(long)]
    blocks: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output scenario file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 20_000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 8)]
    replicates: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    burn_in_fraction: f64,
    /// Output directory for per-replicate series and the run manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: DistributionKind,
    /// Swarm density robots/m^2 for the calibration ladder.
    #[arg(long, default_value_t = 0.01)]
    density: f64,
    /// Calibration swarm sizes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![5, 10, 20])]
    sizes: Vec<u32>,
    #[arg(long, default_value_t = 20)]
    blocks: u32,
    #[arg(long, default_value_t = 20_000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 8)]
    replicates: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_parser = parse_sign, default_value = "plus")]
    dtheta_sign: DthetaSign,
    /// Output directory; fits merge into <out>/fits.toml.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Directory holding fits.toml from a calibration run.
    #[arg(long)]
    fit_from: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 20_000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.2)]
    burn_in_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    mu_h: f64,
    #[arg(long, value_parser = parse_sign, default_value = "plus")]
    dtheta_sign: DthetaSign,
    /// Optional output directory for the parameter block and trajectory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    fit_from: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 8)]
    replicates: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    burn_in_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    mu_h: f64,
    #[arg(long, value_parser = parse_sign, default_value = "plus")]
    dtheta_sign: DthetaSign,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the plan seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u32>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Reuse fitted characterizations from a previous output directory.
    #[arg(long)]
    fit_from: Option<PathBuf>,
    #[arg(long, value_parser = parse_sign, default_value = "plus")]
    dtheta_sign: DthetaSign,
}

#[derive(Args)]
struct ReportArgs {
    /// rows.csv from a previous sweep.
    #[arg(long)]
    rows: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    regime: Option<String>,
}

fn parse_kind(s: &str) -> Result<DistributionKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_sign(s: &str) -> Result<DthetaSign, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_dims(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: f64 = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h: f64 = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    Ok((w, h))
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match Cli::parse().command {
        Command::Generate(args) => generate(args),
        Command::Simulate(args) => simulate(args),
        Command::Calibrate(args) => calibrate(args),
        Command::Predict(args) => predict(args),
        Command::Compare(args) => compare(args),
        Command::Sweep(args) => sweep(args),
        Command::Report(args) => report(args),
    }
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let scenario = make_scenario(args.kind, args.arena, args.robots, args.blocks, args.seed)?;
    scenario.save(&args.out)?;
    println!(
        "wrote {} ({} kind, {} clusters, hash {})",
        args.out.display(),
        scenario.kind,
        scenario.clusters.len(),
        scenario.content_hash()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let scenario = Scenario::load(&args.scenario)?;
    fs::create_dir_all(&args.out)?;
    let config = SimConfig::default();
    let series = run_with(&scenario, args.horizon, args.replicates, args.seed, config)?;
    for ts in &series {
        let path = args.out.join(format!("rep_{:03}.csv", ts.replicate_id));
        let file = fs::File::create(&path)?;
        write_series_csv(ts, std::io::BufWriter::new(file))?;
    }
    let manifest = run_manifest(&scenario, &config, args.horizon, args.replicates, args.seed);
    fs::write(args.out.join("manifest.txt"), &manifest)?;
    let stats = steady_stats(&series, args.burn_in_fraction * args.horizon)?;
    println!("replay seed: {}", args.seed);
    println!(
        "steady n_h = {:.4} [{:.4}, {:.4}]",
        stats.n_h.mean, stats.n_h.lo, stats.n_h.hi
    );
    println!(
        "steady n_av = {:.4} [{:.4}, {:.4}]",
        stats.n_av.mean, stats.n_av.lo, stats.n_av.hi
    );
    println!(
        "collection rate = {:.6} blocks/s [{:.6}, {:.6}]",
        stats.collection_rate.mean, stats.collection_rate.lo, stats.collection_rate.hi
    );
    if stats.nonstationary {
        println!("warning: post-burn-in trend detected; consider a longer horizon");
    }
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> anyhow::Result<()> {
    let plan = ExperimentPlan {
        regime: Regime::ConstRhoSmall,
        kinds: vec![args.kind],
        swarm_sizes: args.sizes.clone(),
        densities: vec![args.density],
        horizon: args.horizon,
        replicates: args.replicates,
        seed: args.seed,
        total_blocks: args.blocks,
        calibration_sizes: args.sizes,
        burn_in_fraction: 0.2,
        arena: None,
    };
    plan.validate()?;
    let cfg = runner_config(args.dtheta_sign);
    let fit = forage_harness::runner::calibrate_kind(&plan, &cfg, args.kind)?;
    fs::create_dir_all(&args.out)?;
    let fits_path = args.out.join("fits.toml");
    let mut store = if fits_path.exists() {
        FitStore::load(&fits_path)?
    } else {
        FitStore::default()
    };
    println!(
        "{}: sigma_m = {:.6}, chi_m = {:.6}, residual = {:.3e}",
        args.kind, fit.sigma_m, fit.chi_m, fit.residual
    );
    store.insert(fit);
    store.save(&fits_path)?;
    println!("wrote {}", fits_path.display());
    Ok(())
}

fn load_characterizations(
    fit_from: Option<&Path>,
    kind: DistributionKind,
) -> anyhow::Result<(f64, f64)> {
    match fit_from {
        Some(dir) => {
            let store = FitStore::load(&dir.join("fits.toml"))?;
            let fit = store
                .get(kind)
                .with_context(|| format!("no fit for {kind} in {}", dir.display()))?;
            Ok((fit.sigma_m, fit.chi_m))
        }
        None => {
            log::warn!("no --fit-from given; using sigma_m = chi_m = 1 (uncalibrated)");
            Ok((1.0, 1.0))
        }
    }
}

fn runner_config(sign: DthetaSign) -> RunnerConfig {
    let mut cfg = RunnerConfig::default();
    cfg.analytic.dtheta_sign = sign;
    cfg
}

fn predict(args: PredictArgs) -> anyhow::Result<()> {
    let scenario = Scenario::load(&args.scenario)?;
    let (sigma_m, chi_m) = load_characterizations(args.fit_from.as_deref(), scenario.kind)?;
    let analytic = AnalyticConfig {
        dtheta_sign: args.dtheta_sign,
        ..AnalyticConfig::default()
    };
    let single = measure_single_robot_with(
        &scenario,
        50_000.0,
        derive_seed(args.seed, &[3]),
        SimConfig::default(),
    )?;
    let mut fit_cfg = FitConfig::new(args.horizon, args.burn_in_fraction * args.horizon);
    fit_cfg.analytic = analytic;
    let pred = pipeline_prediction(&scenario, &single, sigma_m, chi_m, &fit_cfg)?;
    println!("{}", pred.params.to_kv_block());
    println!("predicted window-mean n_h  = {:.6}", pred.n_h);
    println!("predicted window-mean n_av = {:.6}", pred.n_av);
    println!(
        "predicted performance P = {:.6} blocks/s (mu_h = {})",
        pred.performance / args.mu_h,
        args.mu_h
    );
    if let Some(dir) = args.out {
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("params.txt"), pred.params.to_kv_block())?;
        let model = GeneralizedModel::new(pred.params, &scenario)?;
        let solved = integrate(
            &model,
            &OdeState::initial(&scenario),
            IntegrateOptions::new(fit_cfg.dt, args.horizon),
        )?;
        let file = fs::File::create(dir.join("trajectory.csv"))?;
        write_trajectory_csv(&solved, std::io::BufWriter::new(file))?;
        println!("wrote {}", dir.join("trajectory.csv").display());
    }
    Ok(())
}

fn compare(args: CompareArgs) -> anyhow::Result<()> {
    let scenario = Scenario::load(&args.scenario)?;
    let (sigma_m, chi_m) = load_characterizations(args.fit_from.as_deref(), scenario.kind)?;
    let analytic = AnalyticConfig {
        dtheta_sign: args.dtheta_sign,
        ..AnalyticConfig::default()
    };
    let config = SimConfig::default();
    let single = measure_single_robot_with(
        &scenario,
        50_000.0,
        derive_seed(args.seed, &[3]),
        config,
    )?;
    let mut fit_cfg = FitConfig::new(args.horizon, args.burn_in_fraction * args.horizon);
    fit_cfg.analytic = analytic;
    let pred = pipeline_prediction(&scenario, &single, sigma_m, chi_m, &fit_cfg)?;
    let series = run_with(
        &scenario,
        args.horizon,
        args.replicates,
        derive_seed(args.seed, &[2]),
        config,
    )?;
    let stats = steady_stats(&series, fit_cfg.burn_in)?;
    let row = ComparisonRow {
        kind: scenario.kind,
        n: scenario.robot_count,
        rho: forage_core::scenario::swarm_density(&scenario),
        pred_nh: pred.n_h,
        pred_nav: pred.n_av,
        pred_p: pred.performance / args.mu_h,
        sim_nh_mean: stats.n_h.mean,
        sim_nh_lo: stats.n_h.lo,
        sim_nh_hi: stats.n_h.hi,
        sim_nav_mean: stats.n_av.mean,
        sim_nav_lo: stats.n_av.lo,
        sim_nav_hi: stats.n_av.hi,
        sim_p_mean: stats.collection_rate.mean,
        in_ci_nh: stats.n_h.contains(pred.n_h),
        in_ci_nav: stats.n_av.contains(pred.n_av),
    };
    let mut buf = Vec::new();
    write_rows_csv(std::slice::from_ref(&row), &mut buf)?;
    print!("{}", String::from_utf8_lossy(&buf));
    if let Some(dir) = args.out {
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("rows.csv"), buf)?;
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let mut plan = ExperimentPlan::load(&args.plan)?;
    if let Some(seed) = args.seed {
        plan.seed = seed;
    }
    if let Some(replicates) = args.replicates {
        plan.replicates = replicates;
    }
    if let Some(horizon) = args.horizon {
        plan.horizon = horizon;
    }
    plan.validate()?;
    let cfg = runner_config(args.dtheta_sign);
    let prior = match &args.fit_from {
        Some(dir) => Some(FitStore::load(&dir.join("fits.toml"))?),
        None => None,
    };
    let outcome = run_plan(&plan, &cfg, prior)?;
    fs::create_dir_all(&args.out)?;

    let mut buf = Vec::new();
    write_rows_csv(&outcome.rows, &mut buf)?;
    fs::write(args.out.join("rows.csv"), buf)?;
    outcome.fits.save(&args.out.join("fits.toml"))?;
    let report = render_report(&plan, &outcome);
    fs::write(args.out.join("report.txt"), &report)?;
    plot::emit_plots(&outcome.rows, plan.regime.as_str(), &args.out)?;
    print!("{report}");
    println!("artifacts in {}", args.out.display());
    if !outcome.failures.is_empty() {
        bail!("{} cell(s) failed; see report", outcome.failures.len());
    }
    Ok(())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let file = fs::File::open(&args.rows)?;
    let rows = read_rows_csv(std::io::BufReader::new(file))?;
    let regime = match &args.regime {
        Some(name) => Some(match name.as_str() {
            "const-rho-large" => Regime::ConstRhoLarge,
            "const-rho-small" => Regime::ConstRhoSmall,
            "var-rho-large" => Regime::VarRhoLarge,
            "var-rho-small" => Regime::VarRhoSmall,
            other => bail!("unknown regime {other}"),
        }),
        None => None,
    };
    fs::create_dir_all(&args.out)?;
    let summary = render_rows_summary(&rows, regime);
    fs::write(args.out.join("report.txt"), &summary)?;
    let name = regime.map(|r| r.as_str()).unwrap_or("rows");
    plot::emit_plots(&rows, name, &args.out)?;
    print!("{summary}");
    Ok(())
}
