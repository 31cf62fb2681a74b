//! Population model of the foraging swarm: the generalized system with
//! derived rate constants and block redistribution, the legacy five-free-
//! parameter system with a depleting block pool, and a fixed-step
//! fourth-order integrator chosen for bit-reproducible reports.

use crate::analytic::ModelParams;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Population counts: robots per state plus expected blocks per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub n_s: f64,
    pub n_h: f64,
    pub n_av_s: f64,
    pub n_av_h: f64,
    pub b: Vec<f64>,
}

impl OdeState {
    /// All robots searching, blocks at their configured counts.
    pub fn initial(s: &Scenario) -> Self {
        Self {
            n_s: s.robot_count as f64,
            n_h: 0.0,
            n_av_s: 0.0,
            n_av_h: 0.0,
            b: s.clusters.iter().map(|c| c.block_count).collect(),
        }
    }

    pub fn robot_total(&self) -> f64 {
        self.n_s + self.n_h + self.n_av_s + self.n_av_h
    }

    pub fn block_total(&self) -> f64 {
        self.b.iter().sum()
    }

    pub fn dim(&self) -> usize {
        4 + self.b.len()
    }

    fn to_flat(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&[self.n_s, self.n_h, self.n_av_s, self.n_av_h]);
        out.extend_from_slice(&self.b);
    }

    fn from_flat(y: &[f64]) -> Self {
        Self {
            n_s: y[0],
            n_h: y[1],
            n_av_s: y[2],
            n_av_h: y[3],
            b: y[4..].to_vec(),
        }
    }
}

fn component_name(i: usize) -> String {
    match i {
        0 => "n_s".into(),
        1 => "n_h".into(),
        2 => "n_av_s".into(),
        3 => "n_av_h".into(),
        j => format!("b_{}", j - 4),
    }
}

/// Right-hand side of a population system over the flat state layout
/// `[n_s, n_h, n_av_s, n_av_h, b_0, ...]`.
pub trait OdeRhs {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]);
    /// Instantaneous block-collection rate of the swarm, blocks/s.
    fn collection_rate(&self, y: &[f64]) -> f64;
}

/// Generalized system: aggregate encounter rates, mirrored avoidance pools,
/// and per-cluster block balances under immediate redistribution.
#[derive(Debug, Clone)]
pub struct GeneralizedModel {
    pub params: ModelParams,
    /// A_j / A_d per cluster.
    area_fractions: Vec<f64>,
}

impl GeneralizedModel {
    pub fn new(params: ModelParams, s: &Scenario) -> Result<Self> {
        if !(params.tau_h > 0.0) {
            return Err(Error::ModelDomain(
                "homing time is zero; acquisition location degenerate".into(),
            ));
        }
        if !(params.tau_av > 0.0) {
            return Err(Error::ModelDomain("tau_av must be positive".into()));
        }
        let a_d: f64 = s.clusters.iter().map(|c| c.area).sum();
        Ok(Self {
            params,
            area_fractions: s.clusters.iter().map(|c| c.area / a_d).collect(),
        })
    }
}

impl OdeRhs for GeneralizedModel {
    fn dim(&self) -> usize {
        4 + self.area_fractions.len()
    }

    fn eval(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        let p = &self.params;
        let (n_h, n_av_s, n_av_h) = (y[1], y[2], y[3]);
        let homing_return = n_h / p.tau_h;
        dydt[0] = -p.alpha_b - p.alpha_r + homing_return + n_av_s / p.tau_av;
        dydt[1] = p.alpha_b - p.alpha_r - homing_return + n_av_h / p.tau_av;
        dydt[2] = p.alpha_r - n_av_s / p.tau_av;
        dydt[3] = p.alpha_r - n_av_h / p.tau_av;
        for (d, frac) in dydt[4..].iter_mut().zip(&self.area_fractions) {
            *d = (homing_return - p.alpha_b) * frac;
        }
    }

    fn collection_rate(&self, y: &[f64]) -> f64 {
        y[1] / self.params.tau_h
    }
}

/// The five free parameters of the legacy system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegacyParams {
    /// Pairwise robot-encounter rate anywhere in the arena.
    pub alpha_r: f64,
    /// Pairwise robot-encounter rate near the nest.
    pub alpha_r_prime: f64,
    /// Per-robot-per-block acquisition rate.
    pub alpha_b: f64,
    pub tau_h: f64,
    pub tau_av: f64,
}

/// Legacy system: pairwise encounter terms and a depleting block pool.
/// Searching encounters feed the searching-avoidance pool and homing
/// encounters the homing-avoidance pool, which keeps robots conserved.
#[derive(Debug, Clone)]
pub struct LegacyModel {
    pub params: LegacyParams,
    pub n_total: f64,
}

impl LegacyModel {
    pub fn new(params: LegacyParams, n_total: f64) -> Self {
        Self { params, n_total }
    }
}

impl OdeRhs for LegacyModel {
    fn dim(&self) -> usize {
        5
    }

    fn eval(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        let p = &self.params;
        let (n_s, n_h, n_av_s, n_av_h, blocks) = (y[0], y[1], y[2], y[3], y[4]);
        let pickup = p.alpha_b * n_s * (blocks - n_h - n_av_h);
        let search_encounters = p.alpha_r * n_s * (n_s + self.n_total);
        let homing_encounters = p.alpha_r_prime * n_h * (n_h + self.n_total);
        let homing_return = n_h / p.tau_h;
        dydt[0] = -pickup - search_encounters + homing_return + n_av_s / p.tau_av;
        dydt[1] = pickup - homing_encounters - homing_return + n_av_h / p.tau_av;
        dydt[2] = search_encounters - n_av_s / p.tau_av;
        dydt[3] = homing_encounters - n_av_h / p.tau_av;
        dydt[4] = -homing_return;
    }

    fn collection_rate(&self, y: &[f64]) -> f64 {
        y[1] / self.params.tau_h
    }
}

/// Generalized right-hand side as a plain function of the population state.
pub fn generalized_rhs(state: &OdeState, params: &ModelParams, s: &Scenario) -> OdeState {
    let model = GeneralizedModel::new(*params, s).expect("valid params");
    apply_rhs(&model, state)
}

/// Legacy right-hand side as a plain function of the population state
/// (single block pool in `b[0]`).
pub fn legacy_rhs(state: &OdeState, params: &LegacyParams, n_total: f64) -> OdeState {
    let model = LegacyModel::new(*params, n_total);
    apply_rhs(&model, state)
}

fn apply_rhs(rhs: &impl OdeRhs, state: &OdeState) -> OdeState {
    let mut y = Vec::new();
    state.to_flat(&mut y);
    let mut d = vec![0.0; y.len()];
    rhs.eval(0.0, &y, &mut d);
    OdeState::from_flat(&d)
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Trajectory sampling stride in steps.
    pub stride: usize,
}

impl IntegrateOptions {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            stride: 50,
        }
    }
}

/// Result of one integration.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Time-indexed samples, every `stride` steps plus the final state.
    pub trajectory: Vec<(f64, OdeState)>,
    /// State when the steady criterion first held (final state otherwise).
    pub steady_state: OdeState,
    /// Time of steady-state declaration, or the horizon if never reached.
    pub steady_time: f64,
    /// Collection rate at the steady state, blocks/s.
    pub performance: f64,
}

impl SolveReport {
    /// Componentwise mean of trajectory samples with `t >= from`.
    pub fn window_mean(&self, from: f64) -> OdeState {
        let samples: Vec<&OdeState> = self
            .trajectory
            .iter()
            .filter(|(t, _)| *t >= from)
            .map(|(_, s)| s)
            .collect();
        assert!(!samples.is_empty(), "empty averaging window");
        let nb = samples[0].b.len();
        let mut acc = OdeState {
            n_s: 0.0,
            n_h: 0.0,
            n_av_s: 0.0,
            n_av_h: 0.0,
            b: vec![0.0; nb],
        };
        for s in &samples {
            acc.n_s += s.n_s;
            acc.n_h += s.n_h;
            acc.n_av_s += s.n_av_s;
            acc.n_av_h += s.n_av_h;
            for (a, v) in acc.b.iter_mut().zip(&s.b) {
                *a += v;
            }
        }
        let k = samples.len() as f64;
        acc.n_s /= k;
        acc.n_h /= k;
        acc.n_av_s /= k;
        acc.n_av_h /= k;
        for v in &mut acc.b {
            *v /= k;
        }
        acc
    }
}

/// Steady state declared when every derivative stays below `1e-9 * N` for
/// this many consecutive steps.
const STEADY_WINDOW: usize = 100;
const STEADY_TOL_PER_ROBOT: f64 = 1e-9;
/// Negatives larger than this are integration artifacts and clamp to zero.
const NEGATIVE_CLAMP: f64 = -1e-9;

/// Fixed-step classic Runge-Kutta integration to the horizon. Steady state
/// is detected and recorded but integration always continues to the
/// horizon so window statistics line up with simulation output.
pub fn integrate(rhs: &impl OdeRhs, initial: &OdeState, opts: IntegrateOptions) -> Result<SolveReport> {
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidConfig("dt must be positive".into()));
    }
    if opts.horizon < opts.dt {
        return Err(Error::InvalidConfig("horizon must be at least dt".into()));
    }
    let dim = rhs.dim();
    assert_eq!(initial.dim(), dim, "state/model dimension mismatch");

    let robot_scale = initial.robot_total();
    let block_scale = initial.block_total();
    let steady_tol = STEADY_TOL_PER_ROBOT * robot_scale;
    let robot_cap = 10.0 * robot_scale;
    let block_cap = 10.0 * (robot_scale + block_scale);

    let mut y = Vec::with_capacity(dim);
    initial.to_flat(&mut y);
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    let steps = (opts.horizon / opts.dt).round() as usize;
    let stride = opts.stride.max(1);
    let mut trajectory = Vec::with_capacity(steps / stride + 2);
    trajectory.push((0.0, OdeState::from_flat(&y)));

    let mut steady: Option<(f64, OdeState)> = None;
    let mut quiet_steps = 0usize;
    let dt = opts.dt;

    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        rhs.eval(t, &y, &mut k1);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * dt * k1[i];
        }
        rhs.eval(t + 0.5 * dt, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * dt * k2[i];
        }
        rhs.eval(t + 0.5 * dt, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + dt * k3[i];
        }
        rhs.eval(t + dt, &tmp, &mut k4);
        for i in 0..dim {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if y[i] < 0.0 && y[i] > NEGATIVE_CLAMP {
                y[i] = 0.0;
            }
        }
        let t_now = step as f64 * dt;

        for (i, &v) in y.iter().enumerate() {
            let cap = if i < 4 { robot_cap } else { block_cap };
            if !v.is_finite() || v > cap {
                return Err(Error::Instability {
                    component: component_name(i),
                    value: v,
                    t: t_now,
                });
            }
        }

        if steady.is_none() {
            let max_rate = k1.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
            if max_rate < steady_tol {
                quiet_steps += 1;
                if quiet_steps >= STEADY_WINDOW {
                    steady = Some((t_now, OdeState::from_flat(&y)));
                }
            } else {
                quiet_steps = 0;
            }
        }

        if step % stride == 0 || step == steps {
            trajectory.push((t_now, OdeState::from_flat(&y)));
        }
    }

    let (steady_time, steady_state) = steady.unwrap_or_else(|| {
        let (t, s) = trajectory.last().expect("non-empty trajectory");
        (*t, s.clone())
    });
    let mut flat = Vec::new();
    steady_state.to_flat(&mut flat);
    let performance = rhs.collection_rate(&flat).max(0.0);
    Ok(SolveReport {
        trajectory,
        steady_state,
        steady_time,
        performance,
    })
}

/// A-priori swarm performance predictor: block-encounter rate over the
/// homing-queue service rate.
pub fn predict_performance(params: &ModelParams, mu_h: f64) -> Result<f64> {
    if !(mu_h > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "mu_h must be positive, got {mu_h}"
        )));
    }
    Ok(params.alpha_b / mu_h)
}

/// Writes the sampled trajectory as delimited text, time in seconds with
/// six decimal places.
pub fn write_trajectory_csv<W: Write>(report: &SolveReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,n_s,n_h,n_av_s,n_av_h,b_total")?;
    for (t, s) in &report.trajectory {
        writeln!(
            out,
            "{t:.6},{:.9},{:.9},{:.9},{:.9},{:.9}",
            s.n_s,
            s.n_h,
            s.n_av_s,
            s.n_av_h,
            s.block_total()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{derive_params, AnalyticConfig};
    use crate::scenario::{make_scenario, DistributionKind};

    fn test_params(alpha_b: f64, alpha_r: f64) -> ModelParams {
        ModelParams {
            tau_h1: 40.0,
            tau_h: 44.0,
            tau_av: 2.0,
            alpha_b,
            alpha_r,
            alpha_r1: 0.01,
            n_av1: 0.02,
            chi_m: 1.0,
            d_cr: 0.3,
            x_eacq: crate::geom::Vec2::new(12.0, 4.0),
            diffusion: crate::analytic::DiffusionQuantities {
                d_xy: 0.1,
                d_theta: 2.0,
                d_swarm: 1.0,
                sigma_m: 1.0,
            },
        }
    }

    fn scenario() -> Scenario {
        make_scenario(DistributionKind::DS, (16.0, 8.0), 10, 20, 1).unwrap()
    }

    #[test]
    fn robot_derivatives_cancel() {
        let s = scenario();
        let params = test_params(0.08, 0.03);
        let state = OdeState {
            n_s: 6.0,
            n_h: 2.5,
            n_av_s: 0.9,
            n_av_h: 0.6,
            b: vec![10.0, 10.0],
        };
        let d = generalized_rhs(&state, &params, &s);
        let total = d.n_s + d.n_h + d.n_av_s + d.n_av_h;
        let scale = params.alpha_b + params.alpha_r + state.n_h / params.tau_h + 1.0;
        assert!(total.abs() < 1e-12 * scale, "total {total}");
    }

    #[test]
    fn block_balance_at_steady_flow() {
        let s = scenario();
        let params = test_params(0.08, 0.03);
        // With homing outflow equal to the acquisition rate, every cluster
        // balance is zero.
        let state = OdeState {
            n_s: 5.0,
            n_h: params.alpha_b * params.tau_h,
            n_av_s: 0.0,
            n_av_h: 0.0,
            b: vec![10.0, 10.0],
        };
        let d = generalized_rhs(&state, &params, &s);
        for db in &d.b {
            assert!(db.abs() < 1e-15);
        }
    }

    #[test]
    fn empty_avoidance_queue_is_stationary() {
        let s = scenario();
        let params = test_params(0.08, 0.0);
        let state = OdeState {
            n_s: 10.0,
            n_h: 0.0,
            n_av_s: 0.0,
            n_av_h: 0.0,
            b: vec![10.0, 10.0],
        };
        let d = generalized_rhs(&state, &params, &s);
        assert_eq!(d.n_av_s, 0.0);
        assert_eq!(d.n_av_h, 0.0);
    }

    #[test]
    fn legacy_term_structure() {
        let p = LegacyParams {
            alpha_r: 0.002,
            alpha_r_prime: 0.003,
            alpha_b: 0.004,
            tau_h: 50.0,
            tau_av: 2.0,
        };
        let n = 10.0;
        let state = OdeState {
            n_s: 7.0,
            n_h: 0.0,
            n_av_s: 0.0,
            n_av_h: 0.0,
            b: vec![20.0],
        };
        let d = legacy_rhs(&state, &p, n);
        let expected = -p.alpha_b * 7.0 * 20.0 - p.alpha_r * 7.0 * (7.0 + n);
        assert!((d.n_s - expected).abs() < 1e-12);

        // Single robot, no blocks, currently avoiding: the only active flow
        // is the avoidance decay.
        let avoiding = OdeState {
            n_s: 0.0,
            n_h: 0.0,
            n_av_s: 1.0,
            n_av_h: 0.0,
            b: vec![0.0],
        };
        let d = legacy_rhs(&avoiding, &p, 1.0);
        assert!((d.n_av_s + 1.0 / p.tau_av).abs() < 1e-15);
        assert!((d.n_s - 1.0 / p.tau_av).abs() < 1e-15);
        assert_eq!(d.n_h, 0.0);
        assert_eq!(d.b[0], 0.0);
    }

    #[test]
    fn legacy_blocks_never_increase() {
        let p = LegacyParams {
            alpha_r: 0.001,
            alpha_r_prime: 0.001,
            alpha_b: 0.002,
            tau_h: 40.0,
            tau_av: 2.0,
        };
        let model = LegacyModel::new(p, 10.0);
        let initial = OdeState {
            n_s: 10.0,
            n_h: 0.0,
            n_av_s: 0.0,
            n_av_h: 0.0,
            b: vec![30.0],
        };
        let report = integrate(&model, &initial, IntegrateOptions::new(0.1, 2000.0)).unwrap();
        let mut last = f64::INFINITY;
        for (_, s) in &report.trajectory {
            assert!(s.b[0] <= last + 1e-9);
            last = s.b[0];
        }
    }

    #[test]
    fn zero_dynamics_is_constant() {
        let s = scenario();
        let params = test_params(0.0, 0.0);
        let model = GeneralizedModel::new(params, &s).unwrap();
        let initial = OdeState::initial(&s);
        let report = integrate(&model, &initial, IntegrateOptions::new(0.1, 100.0)).unwrap();
        for (_, st) in &report.trajectory {
            assert_eq!(st.n_s, initial.n_s);
            assert_eq!(st.n_h, 0.0);
        }
    }

    /// Block equation with a frozen homing count is linear in time and
    /// matches its closed-form solution.
    struct FrozenHomingBlocks {
        n_h: f64,
        tau_h: f64,
        alpha_b: f64,
        fractions: Vec<f64>,
    }

    impl OdeRhs for FrozenHomingBlocks {
        fn dim(&self) -> usize {
            4 + self.fractions.len()
        }
        fn eval(&self, _t: f64, _y: &[f64], dydt: &mut [f64]) {
            dydt[..4].fill(0.0);
            for (d, f) in dydt[4..].iter_mut().zip(&self.fractions) {
                *d = (self.n_h / self.tau_h - self.alpha_b) * f;
            }
        }
        fn collection_rate(&self, _y: &[f64]) -> f64 {
            self.n_h / self.tau_h
        }
    }

    #[test]
    fn block_equation_matches_linear_solution() {
        let rhs = FrozenHomingBlocks {
            n_h: 3.0,
            tau_h: 50.0,
            alpha_b: 0.02,
            fractions: vec![0.25, 0.75],
        };
        let initial = OdeState {
            n_s: 5.0,
            n_h: 3.0,
            n_av_s: 0.0,
            n_av_h: 0.0,
            b: vec![8.0, 12.0],
        };
        let report = integrate(&rhs, &initial, IntegrateOptions::new(0.1, 500.0)).unwrap();
        let slope = 3.0 / 50.0 - 0.02;
        for (t, s) in &report.trajectory {
            for (j, f) in rhs.fractions.iter().enumerate() {
                let exact = initial.b[j] + slope * f * t;
                assert!(
                    (s.b[j] - exact).abs() < 1e-9,
                    "t {t}: b_{j} {} vs {exact}",
                    s.b[j]
                );
            }
        }
    }

    #[test]
    fn conservation_and_nonnegativity_along_generalized_solve() {
        let s = scenario();
        let params = test_params(0.05, 0.02);
        let model = GeneralizedModel::new(params, &s).unwrap();
        let initial = OdeState::initial(&s);
        let n = initial.robot_total();
        let report = integrate(&model, &initial, IntegrateOptions::new(0.1, 5000.0)).unwrap();
        for (t, st) in &report.trajectory {
            assert!(
                (st.robot_total() - n).abs() < 1e-6 * n,
                "t {t}: drift {}",
                st.robot_total() - n
            );
            for v in [st.n_s, st.n_h, st.n_av_s, st.n_av_h] {
                assert!(v >= -1e-9);
            }
        }
    }

    #[test]
    fn steady_state_matches_closed_form_and_dt_refinement() {
        let s = scenario();
        let params = test_params(0.05, 0.02);
        let model = GeneralizedModel::new(params, &s).unwrap();
        let initial = OdeState::initial(&s);
        let coarse = integrate(&model, &initial, IntegrateOptions::new(0.2, 5000.0)).unwrap();
        let fine = integrate(&model, &initial, IntegrateOptions::new(0.1, 5000.0)).unwrap();
        // Closed-form fixed point of the linear system.
        let n_h = params.alpha_b * params.tau_h;
        let n_av = params.alpha_r * params.tau_av;
        assert!((coarse.steady_state.n_h - n_h).abs() < 1e-6);
        assert!((coarse.steady_state.n_av_s - n_av).abs() < 1e-6);
        assert!((coarse.steady_state.n_av_h - n_av).abs() < 1e-6);
        assert!(coarse.steady_time < 5000.0);
        // Halving dt moves the steady vector by less than 1e-6 relative.
        let scale = initial.robot_total();
        for (a, b) in [
            (coarse.steady_state.n_s, fine.steady_state.n_s),
            (coarse.steady_state.n_h, fine.steady_state.n_h),
            (coarse.steady_state.n_av_s, fine.steady_state.n_av_s),
            (coarse.steady_state.n_av_h, fine.steady_state.n_av_h),
        ] {
            assert!((a - b).abs() < 1e-6 * scale);
        }
    }

    #[test]
    fn divergence_is_reported_with_component() {
        let p = LegacyParams {
            alpha_r: 100.0,
            alpha_r_prime: 100.0,
            alpha_b: 100.0,
            tau_h: 0.001,
            tau_av: 0.001,
            // Wildly stiff parameters blow up under the fixed step.
        };
        let model = LegacyModel::new(p, 10.0);
        let initial = OdeState {
            n_s: 10.0,
            n_h: 0.0,
            n_av_s: 0.0,
            n_av_h: 0.0,
            b: vec![20.0],
        };
        match integrate(&model, &initial, IntegrateOptions::new(0.1, 10.0)) {
            Err(Error::Instability { component, .. }) => {
                assert!(!component.is_empty());
            }
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn performance_predictor() {
        let mut params = test_params(0.3, 0.0);
        assert!((predict_performance(&params, 1.0).unwrap() - 0.3).abs() < 1e-15);
        params.alpha_b = 0.0;
        assert_eq!(predict_performance(&params, 1.0).unwrap(), 0.0);
        assert!(predict_performance(&params, 0.0).is_err());
    }

    #[test]
    fn derived_params_solve_end_to_end() {
        let s = scenario();
        let params = derive_params(&s, 1.0, 1.0, 2.0, 0.01, 0.02, &AnalyticConfig::default()).unwrap();
        let model = GeneralizedModel::new(params, &s).unwrap();
        let report = integrate(&model, &OdeState::initial(&s), IntegrateOptions::new(0.2, 20000.0)).unwrap();
        assert!((report.steady_state.n_h - params.alpha_b * params.tau_h).abs() < 1e-6);
        assert!(report.performance >= 0.0);
        // Window mean of a converged run equals the steady value closely.
        let mean = report.window_mean(4000.0);
        assert!((mean.n_h - report.steady_state.n_h).abs() < 1e-3);
    }

    #[test]
    fn trajectory_export_format() {
        let s = scenario();
        let params = test_params(0.05, 0.02);
        let model = GeneralizedModel::new(params, &s).unwrap();
        let report = integrate(&model, &OdeState::initial(&s), IntegrateOptions::new(0.1, 50.0)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,n_s,n_h,n_av_s,n_av_h,b_total");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.000000,"));
    }
}
