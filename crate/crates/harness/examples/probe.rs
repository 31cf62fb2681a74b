// Scratch probe: end-to-end within-CI cell counts for candidate
// configurations, running the real calibrate -> fit -> compare pipeline.
// Not part of the deliverable.

use forage_core::scenario::{DistributionKind, ScenarioConfig};
use forage_harness::plan::{ExperimentPlan, Regime};
use forage_harness::runner::{run_plan, RunnerConfig};

fn main() {
    let candidates: &[(&str, f64, f64, u32)] = &[
        ("B250 v.03/.3", 0.03, 0.3, 250),
        ("B185 v.03/.3", 0.03, 0.3, 185),
        ("B100 v.03/.3", 0.03, 0.3, 100),
        ("B400 v.03/.3", 0.03, 0.3, 400),
        ("B250 v.03/.45", 0.03, 0.45, 250),
    ];
    for &(name, v_s, v_h, blocks) in candidates {
        let plan = ExperimentPlan {
            regime: Regime::ConstRhoSmall,
            kinds: vec![DistributionKind::SS, DistributionKind::DS],
            swarm_sizes: vec![5, 10, 20, 50],
            densities: vec![0.01],
            horizon: 20_000.0,
            replicates: 8,
            seed: 42,
            total_blocks: blocks,
            calibration_sizes: vec![5, 10, 20],
            burn_in_fraction: 0.2,
            arena: None,
        };
        let mut cfg = RunnerConfig::default();
        cfg.scenario = ScenarioConfig {
            search_speed: v_s,
            homing_speed: v_h,
            ..ScenarioConfig::default()
        };
        let outcome = run_plan(&plan, &cfg, None).unwrap();
        let greens_nh = outcome.rows.iter().filter(|r| r.in_ci_nh).count();
        let greens_nav = outcome.rows.iter().filter(|r| r.in_ci_nav).count();
        println!(
            "== {name}: nh {greens_nh}/8 nav {greens_nav}/8 total {}/16",
            greens_nh + greens_nav
        );
        for r in &outcome.rows {
            println!(
                "   {} N={:>2}: nh {:+.1}% [{}] nav {:+.1}% [{}] p {:+.1}%",
                r.kind,
                r.n,
                100.0 * (r.pred_nh / r.sim_nh_mean - 1.0),
                if r.in_ci_nh { "ok" } else { "RED" },
                100.0 * (r.pred_nav / r.sim_nav_mean - 1.0),
                if r.in_ci_nav { "ok" } else { "RED" },
                100.0 * (r.pred_p / r.sim_p_mean - 1.0),
            );
        }
    }
}
