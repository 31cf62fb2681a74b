//! Executes an experiment plan end to end: scenario generation, single-
//! robot calibration, characterization fitting, model prediction,
//! microsimulation, and comparison-row assembly.

use crate::plan::{ExperimentPlan, PlanPoint};
use crate::report::ComparisonRow;
use anyhow::Context;
use forage_core::analytic::AnalyticConfig;
use forage_core::fit::{
    fit_characterizations, pipeline_prediction, CalibrationPoint, FitConfig, FitResult,
    SteadyObservation,
};
use forage_core::microsim::{
    measure_single_robot_with, run_with, steady_stats, SimConfig, SingleRobotCalibration,
    SteadyStats,
};
use forage_core::scenario::{DistributionKind, Scenario, ScenarioConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct RunnerConfig {
    pub sim: SimConfig,
    pub analytic: AnalyticConfig,
    pub scenario: ScenarioConfig,
    /// Horizon of the single-robot interference measurement.
    pub single_robot_horizon: f64,
    /// Homing-queue service rate for the performance predictor.
    pub mu_h: f64,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            analytic: AnalyticConfig::default(),
            scenario: ScenarioConfig::default(),
            single_robot_horizon: 400_000.0,
            mu_h: 1.0,
        }
    }
}

/// Fitted characterizations per kind, serialized to `fits.toml` so later
/// runs can skip calibration via `--fit-from`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitStore {
    pub fits: BTreeMap<String, FitResult>,
}

impl FitStore {
    pub fn get(&self, kind: DistributionKind) -> Option<&FitResult> {
        self.fits.get(kind.as_str())
    }

    pub fn insert(&mut self, fit: FitResult) {
        self.fits.insert(fit.scenario_kind.as_str().to_string(), fit);
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("fit store serializes")
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<FitStore> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        Ok(toml::from_str(&text).context("parsing fit store")?)
    }

    pub fn save(&self, path: &std::path::Path) -> anyhow::Result<()> {
        std::fs::write(path, self.to_toml_string())
            .with_context(|| format!("writing {}", path.display()))
    }
}

#[derive(Debug)]
pub struct PlanOutcome {
    pub rows: Vec<ComparisonRow>,
    pub fits: FitStore,
    /// (point label, error) for cells that failed; the plan continues.
    pub failures: Vec<(String, String)>,
    pub runtime_secs: f64,
}

/// Simulation and calibration results for one cell, cached by scenario
/// hash so calibration cells double as comparison cells.
struct PointData {
    stats: SteadyStats,
    single: SingleRobotCalibration,
    scenario: Scenario,
}

struct PointCache<'a> {
    plan: &'a ExperimentPlan,
    cfg: &'a RunnerConfig,
    entries: BTreeMap<String, PointData>,
}

impl<'a> PointCache<'a> {
    fn new(plan: &'a ExperimentPlan, cfg: &'a RunnerConfig) -> Self {
        Self {
            plan,
            cfg,
            entries: BTreeMap::new(),
        }
    }

    fn get(&mut self, point: &PlanPoint) -> anyhow::Result<&PointData> {
        let scenario = point
            .scenario_with(self.plan.total_blocks, self.plan.seed, &self.cfg.scenario)
            .with_context(|| format!("generating scenario for {}", point.label()))?;
        let key = scenario.content_hash();
        if !self.entries.contains_key(&key) {
            log::info!("simulating {}", point.label());
            let series = run_with(
                &scenario,
                self.plan.horizon,
                self.plan.replicates,
                point.sim_seed(self.plan.seed),
                self.cfg.sim,
            )?;
            let stats = steady_stats(&series, self.plan.burn_in())?;
            let single = measure_single_robot_with(
                &scenario,
                self.cfg.single_robot_horizon,
                point.single_robot_seed(self.plan.seed),
                self.cfg.sim,
            )?;
            self.entries.insert(
                key.clone(),
                PointData {
                    stats,
                    single,
                    scenario,
                },
            );
        }
        Ok(&self.entries[&key])
    }
}

fn fit_config(plan: &ExperimentPlan, cfg: &RunnerConfig) -> FitConfig {
    let mut fc = FitConfig::new(plan.horizon, plan.burn_in());
    fc.analytic = cfg.analytic;
    fc
}

/// Fits (sigma_m, chi_m) for one kind from the plan's calibration ladder.
pub fn calibrate_kind(
    plan: &ExperimentPlan,
    cfg: &RunnerConfig,
    kind: DistributionKind,
) -> anyhow::Result<FitResult> {
    let mut cache = PointCache::new(plan, cfg);
    calibrate_kind_with_cache(plan, cfg, kind, &mut cache)
}

/// Runs every cell of the plan: calibrate (or reuse) per kind, then per
/// point derive rates, solve the population model, simulate, and compare.
/// Failures are recorded per cell and do not abort the plan.
pub fn run_plan(
    plan: &ExperimentPlan,
    cfg: &RunnerConfig,
    prior_fits: Option<FitStore>,
) -> anyhow::Result<PlanOutcome> {
    plan.validate()?;
    let started = Instant::now();
    let mut fits = prior_fits.unwrap_or_default();
    let mut failures = Vec::new();
    let mut cache = PointCache::new(plan, cfg);

    for &kind in &plan.kinds {
        if fits.get(kind).is_some() {
            log::info!("{kind}: reusing fitted characterizations");
            continue;
        }
        match calibrate_kind_with_cache(plan, cfg, kind, &mut cache) {
            Ok(fit) => {
                log::info!(
                    "{kind}: sigma_m = {:.4}, chi_m = {:.4}, residual = {:.3e}",
                    fit.sigma_m,
                    fit.chi_m,
                    fit.residual
                );
                fits.insert(fit);
            }
            Err(e) => failures.push((format!("{kind} calibration"), format!("{e:#}"))),
        }
    }

    let fit_cfg = fit_config(plan, cfg);
    let mut rows = Vec::new();
    for point in plan.points() {
        match run_point(cfg, &fit_cfg, &mut cache, &fits, &point) {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((point.label(), format!("{e:#}"))),
        }
    }

    Ok(PlanOutcome {
        rows,
        fits,
        failures,
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

fn calibrate_kind_with_cache(
    plan: &ExperimentPlan,
    cfg: &RunnerConfig,
    kind: DistributionKind,
    cache: &mut PointCache,
) -> anyhow::Result<FitResult> {
    let mut points = Vec::new();
    for p in plan.calibration_points(kind) {
        let data = cache.get(&p)?;
        points.push(CalibrationPoint {
            scenario: data.scenario.clone(),
            single: data.single,
            observed: SteadyObservation {
                n_h: data.stats.n_h.mean,
                n_av: data.stats.n_av.mean,
            },
        });
    }
    Ok(fit_characterizations(kind, &points, &fit_config(plan, cfg))?)
}

fn run_point(
    cfg: &RunnerConfig,
    fit_cfg: &FitConfig,
    cache: &mut PointCache,
    fits: &FitStore,
    point: &PlanPoint,
) -> anyhow::Result<ComparisonRow> {
    let fit = fits
        .get(point.kind)
        .with_context(|| format!("no fitted characterizations for {}", point.kind))?;
    let (sigma_m, chi_m) = (fit.sigma_m, fit.chi_m);
    let data = cache.get(point)?;
    let pred = pipeline_prediction(&data.scenario, &data.single, sigma_m, chi_m, fit_cfg)?;
    let pred_p = pred.performance / cfg.mu_h;
    let stats = &data.stats;
    Ok(ComparisonRow {
        kind: point.kind,
        n: point.n,
        rho: point.rho,
        pred_nh: pred.n_h,
        pred_nav: pred.n_av,
        pred_p,
        sim_nh_mean: stats.n_h.mean,
        sim_nh_lo: stats.n_h.lo,
        sim_nh_hi: stats.n_h.hi,
        sim_nav_mean: stats.n_av.mean,
        sim_nav_lo: stats.n_av.lo,
        sim_nav_hi: stats.n_av.hi,
        sim_p_mean: stats.collection_rate.mean,
        in_ci_nh: stats.n_h.contains(pred.n_h),
        in_ci_nav: stats.n_av.contains(pred.n_av),
    })
}
