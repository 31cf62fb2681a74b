// Scratch probe: drift diagnostics per (kind, N) — realized pickup
// distance vs model acquisition radius, wall/robot episode split, and
// fraction shapes. Not part of the deliverable.

use forage_core::analytic::{derive_params, AcquisitionModel, AnalyticConfig};
use forage_core::microsim::{measure_single_robot_with, SimConfig, SimWorld};
use forage_core::scenario::{make_scenario_with, DistributionKind, ScenarioConfig};

fn main() {
    let scfg = ScenarioConfig::default();
    let sim = SimConfig::default();
    let acfg = AnalyticConfig::default();
    let blocks = 250;
    for kind in [DistributionKind::SS, DistributionKind::DS] {
        println!("== {kind} B={blocks} v=({}, {}) ==", scfg.search_speed, scfg.homing_speed);
        for &n in &[5u32, 10, 20, 50] {
            let area = n as f64 / 0.01;
            let h = (area / 2.0).sqrt();
            let s = make_scenario_with(kind, (2.0 * h, h), n, blocks, 1, &scfg).unwrap();
            let acq = AcquisitionModel::new(&s).unwrap();
            let single = measure_single_robot_with(&s, 400_000.0, 7, sim).unwrap();
            let p = derive_params(&s, 1.0, 1.0, single.tau_av, single.alpha_r1, single.n_av1, &acfg)
                .unwrap();

            let mut world = SimWorld::new(&s, sim, 11, 0);
            let steps = 100_000; // 20 000 s
            let mut occ_sum = 0.0;
            for _ in 0..steps {
                world.step();
                let counts = world.state_counts();
                occ_sum += (counts[2] + counts[3]) as f64;
            }
            let c = &world.counters;
            let r_pick = c.mean_pickup_distance();
            let occ = occ_sum / steps as f64 / n as f64;
            let robot_frac =
                (c.avoidance_episodes - c.wall_episodes) as f64 / c.avoidance_episodes.max(1) as f64;
            let sim_fraction = {
                // Quick occupancy from collected flow: rate * tau_h / n.
                let rate = c.collected as f64 / (steps as f64 * 0.2);
                rate * (c.homing_time / c.homing_episodes.max(1) as f64) / n as f64
            };
            let model_fraction = p.alpha_b * p.tau_h / n as f64;
            println!(
                "N={n:>3}: r_acq={:>6.2} r_pick={:>6.2} ratio={:.3} | occ={:.4} n_av1={:.4} ratio={:.3} robot_ep={:.0}% | frac sim/model={:.1}",
                acq.expected_radius,
                r_pick,
                r_pick / acq.expected_radius,
                occ,
                single.n_av1,
                occ / single.n_av1,
                100.0 * robot_frac,
                sim_fraction / model_fraction,
            );
        }
    }
}
