//! Agent-based 2D kinematic microsimulator of the foraging state machine:
//! correlated-random-walk searching, phototaxis homing with a congestion-
//! reducing drop rule, reactive collision avoidance against robots and
//! walls, and immediate block redistribution. Ground truth for validating
//! the population model and the source of the single-robot calibration
//! quantities.

use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};
use crate::scenario::Scenario;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::f64::consts::PI;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RobotState {
    Searching,
    Homing,
    AvoidingWhileSearching,
    AvoidingWhileHoming,
}

impl RobotState {
    fn index(self) -> usize {
        match self {
            RobotState::Searching => 0,
            RobotState::Homing => 1,
            RobotState::AvoidingWhileSearching => 2,
            RobotState::AvoidingWhileHoming => 3,
        }
    }

    fn is_avoiding(self) -> bool {
        matches!(
            self,
            RobotState::AvoidingWhileSearching | RobotState::AvoidingWhileHoming
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Robot {
    pub position: Vec2,
    pub heading: f64,
    pub state: RobotState,
    pub carried_block: Option<usize>,
    pub avoidance_timer: f64,
    /// Drop point chosen on nest entry; `None` until the robot enters.
    pub nest_target: Option<Vec2>,
    homing_start: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Block {
    pub id: usize,
    pub position: Vec2,
    pub cluster: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    /// Control-loop period, s.
    pub dt: f64,
    pub robot_radius: f64,
    /// Proximity threshold that triggers avoidance, robots and walls alike.
    pub sensing_radius: f64,
    /// Fixed avoidance maneuver duration, s.
    pub avoid_duration: f64,
    /// Maneuver heading jitter half-width, radians.
    pub avoid_jitter: f64,
    /// Half side of the square block pickup footprint, m.
    pub block_half_side: f64,
    /// Sampling stride in steps.
    pub sample_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.2,
            robot_radius: 0.15,
            sensing_radius: 0.3,
            avoid_duration: 2.0,
            // Wide enough that a wall maneuver usually clears the sensing
            // band within an episode or two instead of grazing along it.
            avoid_jitter: PI / 4.0,
            block_half_side: 0.1,
            sample_stride: 50,
        }
    }
}

/// Running tallies over a replicate.
#[derive(Debug, Clone, Default)]
pub struct Counters {
    pub avoidance_episodes: u64,
    /// Episodes triggered by a wall rather than another robot.
    pub wall_episodes: u64,
    pub avoidance_time: f64,
    pub homing_episodes: u64,
    pub homing_time: f64,
    /// Summed nest distance of pickup locations.
    pub pickup_distance: f64,
    pub collected: u64,
    /// Transition counts indexed by (from, to) state.
    pub transitions: [[u64; 4]; 4],
}

impl Counters {
    /// Mean nest distance at block acquisition.
    pub fn mean_pickup_distance(&self) -> f64 {
        if self.homing_episodes == 0 {
            0.0
        } else {
            self.pickup_distance / self.homing_episodes as f64
        }
    }
}

impl Counters {
    /// Edges of the robot state machine; anything else is a bug.
    pub const LEGAL_TRANSITIONS: [(usize, usize); 6] = [
        (0, 1), // pickup
        (1, 0), // drop
        (0, 2), // searching -> avoiding
        (2, 0), // avoidance expiry back to searching
        (1, 3), // homing -> avoiding
        (3, 1), // avoidance expiry back to homing
    ];

    pub fn illegal_transitions(&self) -> u64 {
        let mut total = 0;
        for from in 0..4 {
            for to in 0..4 {
                if !Self::LEGAL_TRANSITIONS.contains(&(from, to)) {
                    total += self.transitions[from][to];
                }
            }
        }
        total
    }
}

/// Sampled population counts and cumulative collections for one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub replicate_id: u32,
    pub times: Vec<f64>,
    pub n_s: Vec<u32>,
    pub n_h: Vec<u32>,
    pub n_av_s: Vec<u32>,
    pub n_av_h: Vec<u32>,
    pub collected_cum: Vec<u64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Uniform grid over block positions; cells are one pickup footprint wide
/// so a containment query touches at most four cells.
#[derive(Debug, Default)]
struct BlockGrid {
    cell: f64,
    map: std::collections::HashMap<(i32, i32), Vec<u32>>,
}

impl BlockGrid {
    fn new(cell: f64) -> Self {
        Self {
            cell,
            map: std::collections::HashMap::new(),
        }
    }

    fn key(&self, p: Vec2) -> (i32, i32) {
        ((p.x / self.cell).floor() as i32, (p.y / self.cell).floor() as i32)
    }

    fn insert(&mut self, id: u32, p: Vec2) {
        self.map.entry(self.key(p)).or_default().push(id);
    }

    fn remove(&mut self, id: u32, p: Vec2) {
        let key = self.key(p);
        let slot = self.map.get_mut(&key).expect("block cell exists");
        let idx = slot.iter().position(|&b| b == id).expect("block in cell");
        slot.swap_remove(idx);
    }

    /// Ids in the cells overlapping the square of half-side `reach` around
    /// `p`, visited in a fixed cell order.
    fn candidates<'a>(&'a self, p: Vec2, reach: f64) -> impl Iterator<Item = u32> + 'a {
        let (x0, y0) = self.key(Vec2::new(p.x - reach, p.y - reach));
        let (x1, y1) = self.key(Vec2::new(p.x + reach, p.y + reach));
        (x0..=x1)
            .flat_map(move |cx| (y0..=y1).map(move |cy| (cx, cy)))
            .filter_map(move |key| self.map.get(&key))
            .flatten()
            .copied()
    }
}

#[derive(Debug)]
pub struct SimWorld {
    pub scenario: Scenario,
    pub config: SimConfig,
    pub robots: Vec<Robot>,
    pub clock: f64,
    pub rng_seed: u64,
    pub counters: Counters,
    /// Slot per block id; `None` while a robot carries it.
    blocks: Vec<Option<Block>>,
    grid: BlockGrid,
    free_blocks: usize,
    rng: ChaCha8Rng,
    cluster_rects: Vec<Rect>,
    /// Cumulative A_j / A_d for redistribution draws.
    cluster_cum: Vec<f64>,
}

impl SimWorld {
    pub fn new(scenario: &Scenario, config: SimConfig, seed: u64, stream: u64) -> SimWorld {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);

        let cluster_rects: Vec<Rect> = scenario.clusters.iter().map(|c| c.rect()).collect();
        let a_d: f64 = scenario.clusters.iter().map(|c| c.area).sum();
        let mut acc = 0.0;
        let cluster_cum: Vec<f64> = scenario
            .clusters
            .iter()
            .map(|c| {
                acc += c.area / a_d;
                acc
            })
            .collect();

        let counts = integer_block_counts(scenario);
        let mut blocks = Vec::with_capacity(scenario.total_blocks as usize);
        let mut grid = BlockGrid::new(2.0 * config.block_half_side);
        for (cluster, (&count, rect)) in counts.iter().zip(&cluster_rects).enumerate() {
            for _ in 0..count {
                let position = Vec2::new(
                    rng.gen_range(rect.min.x..rect.max.x),
                    rng.gen_range(rect.min.y..rect.max.y),
                );
                let id = blocks.len() as u32;
                grid.insert(id, position);
                blocks.push(Some(Block {
                    id: id as usize,
                    position,
                    cluster,
                }));
            }
        }
        let free_blocks = blocks.len();

        let nest = scenario.arena.nest_rect();
        let robots = (0..scenario.robot_count)
            .map(|_| Robot {
                position: Vec2::new(
                    rng.gen_range(nest.min.x..nest.max.x),
                    rng.gen_range(nest.min.y..nest.max.y),
                ),
                heading: rng.gen_range(-PI..PI),
                state: RobotState::Searching,
                carried_block: None,
                avoidance_timer: 0.0,
                nest_target: None,
                homing_start: 0.0,
            })
            .collect();

        SimWorld {
            scenario: scenario.clone(),
            config,
            robots,
            clock: 0.0,
            rng_seed: seed,
            counters: Counters::default(),
            blocks,
            grid,
            free_blocks,
            rng,
            cluster_rects,
            cluster_cum,
        }
    }

    fn transition(&mut self, robot: &mut Robot, to: RobotState) {
        self.counters.transitions[robot.state.index()][to.index()] += 1;
        robot.state = to;
    }

    /// Advances the world by one control period: per robot in id order,
    /// move according to state (searching turn + step, homing step toward
    /// the drop target, avoidance maneuver countdown), then a proximity
    /// pass that sends non-avoiding robots near another robot or a wall
    /// into the context-matching avoidance state.
    pub fn step(&mut self) {
        let dt = self.config.dt;
        let arena = self.scenario.arena;
        let nest = arena.nest_rect();

        for i in 0..self.robots.len() {
            let mut r = self.robots[i];
            match r.state {
                RobotState::Searching => {
                    let theta = self.scenario.crw_half_angle;
                    r.heading += self.rng.gen_range(-theta..theta);
                    r.heading = wrap_angle(r.heading);
                    r.position = r.position + Vec2::from_angle(r.heading).scale(self.scenario.search_speed * dt);
                    reflect(&mut r, &arena);
                    if let Some(id) = self.block_under(r.position) {
                        let block = self.blocks[id as usize].take().expect("free block");
                        self.grid.remove(id, block.position);
                        self.free_blocks -= 1;
                        r.carried_block = Some(block.id);
                        r.nest_target = None;
                        r.homing_start = self.clock;
                        self.counters.homing_episodes += 1;
                        self.counters.pickup_distance += r.position.dist(arena.nest_center);
                        self.transition(&mut r, RobotState::Homing);
                    }
                }
                RobotState::Homing => {
                    let prev = r.position;
                    let target = r.nest_target.unwrap_or(arena.nest_center);
                    let to_target = target - r.position;
                    let step_len = self.scenario.homing_speed * dt;
                    if r.nest_target.is_some() && to_target.norm() <= step_len {
                        // Reached the drop point.
                        r.position = target;
                        let id = r.carried_block.take().expect("homing robot carries");
                        self.redistribute(id);
                        r.nest_target = None;
                        self.counters.collected += 1;
                        self.counters.homing_time += (self.clock + dt) - r.homing_start;
                        self.transition(&mut r, RobotState::Searching);
                    } else {
                        r.heading = to_target.angle();
                        r.position = r.position + to_target.normalized().scale(step_len);
                        reflect(&mut r, &arena);
                        if r.nest_target.is_none() && nest.contains(r.position) {
                            let entry = nest.entry_point(prev, r.position);
                            r.nest_target =
                                Some(nest_target_choice(entry, arena.nest_center, &mut self.rng));
                        }
                    }
                }
                RobotState::AvoidingWhileSearching | RobotState::AvoidingWhileHoming => {
                    r.position = r.position + Vec2::from_angle(r.heading).scale(self.scenario.search_speed * dt);
                    reflect(&mut r, &arena);
                    self.counters.avoidance_time += dt;
                    r.avoidance_timer -= dt;
                    if r.avoidance_timer <= 1e-12 {
                        r.avoidance_timer = 0.0;
                        let back = if r.state == RobotState::AvoidingWhileSearching {
                            RobotState::Searching
                        } else {
                            RobotState::Homing
                        };
                        self.transition(&mut r, back);
                    }
                }
            }
            self.robots[i] = r;
        }

        // Proximity pass on updated positions. Robots already avoiding are
        // exempt; both members of a mutual encounter trigger because each
        // sees the other regardless of its state.
        let sensing = self.config.sensing_radius;
        for i in 0..self.robots.len() {
            if self.robots[i].state.is_avoiding() {
                continue;
            }
            let pos = self.robots[i].position;
            let mut nearest: Option<(f64, Vec2, bool)> = None;
            for (j, other) in self.robots.iter().enumerate() {
                if j == i {
                    continue;
                }
                let dx = (other.position.x - pos.x).abs();
                if dx > sensing {
                    continue;
                }
                let dy = (other.position.y - pos.y).abs();
                if dy > sensing {
                    continue;
                }
                let d2 = dx * dx + dy * dy;
                if d2 <= sensing * sensing && nearest.map_or(true, |(best, _, _)| d2 < best) {
                    nearest = Some((d2, other.position - pos, false));
                }
            }
            // Walls: nearest boundary within sensing range.
            let wall_candidates = [
                (pos.x, Vec2::new(-1.0, 0.0)),
                (arena.width - pos.x, Vec2::new(1.0, 0.0)),
                (pos.y, Vec2::new(0.0, -1.0)),
                (arena.height - pos.y, Vec2::new(0.0, 1.0)),
            ];
            for (dist, dir) in wall_candidates {
                let d2 = dist * dist;
                if dist <= sensing && nearest.map_or(true, |(best, _, _)| d2 < best) {
                    nearest = Some((d2, dir, true));
                }
            }
            if let Some((_, threat, is_wall)) = nearest {
                let mut r = self.robots[i];
                let bearing = threat.angle();
                let side = if wrap_angle(r.heading - bearing) >= 0.0 {
                    1.0
                } else {
                    -1.0
                };
                let jitter = self.rng.gen_range(-self.config.avoid_jitter..self.config.avoid_jitter);
                r.heading = wrap_angle(bearing + side * (PI / 2.0 + jitter));
                r.avoidance_timer = self.config.avoid_duration;
                let to = if r.state == RobotState::Searching {
                    RobotState::AvoidingWhileSearching
                } else {
                    RobotState::AvoidingWhileHoming
                };
                self.counters.avoidance_episodes += 1;
                if is_wall {
                    self.counters.wall_episodes += 1;
                }
                self.transition(&mut r, to);
                self.robots[i] = r;
            }
        }

        self.clock += dt;
    }

    /// Nearest free block whose pickup footprint covers `pos`; ties break
    /// toward the lower id.
    fn block_under(&self, pos: Vec2) -> Option<u32> {
        let half = self.config.block_half_side;
        let mut best: Option<(f64, u32)> = None;
        for id in self.grid.candidates(pos, half) {
            let b = self.blocks[id as usize].as_ref().expect("gridded block is free");
            let dx = (b.position.x - pos.x).abs();
            let dy = (b.position.y - pos.y).abs();
            if dx <= half && dy <= half {
                let d2 = dx * dx + dy * dy;
                if best.map_or(true, |(bd, bid)| d2 < bd || (d2 == bd && id < bid)) {
                    best = Some((d2, id));
                }
            }
        }
        best.map(|(_, id)| id)
    }

    /// Returns a collected block to the arena: cluster chosen with
    /// probability proportional to its share of the distributable area,
    /// position uniform within it, stacking permitted.
    fn redistribute(&mut self, id: usize) {
        let u: f64 = self.rng.gen_range(0.0..1.0);
        let cluster = self
            .cluster_cum
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cluster_cum.len() - 1);
        let rect = self.cluster_rects[cluster];
        let position = Vec2::new(
            self.rng.gen_range(rect.min.x..rect.max.x),
            self.rng.gen_range(rect.min.y..rect.max.y),
        );
        self.grid.insert(id as u32, position);
        self.blocks[id] = Some(Block {
            id,
            position,
            cluster,
        });
        self.free_blocks += 1;
    }

    /// Free (not carried) blocks in id order.
    pub fn free_blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().flatten()
    }

    /// Removes every free block; test helper for block-free worlds.
    pub fn remove_all_blocks(&mut self) {
        for slot in &mut self.blocks {
            if let Some(b) = slot.take() {
                self.grid.remove(b.id as u32, b.position);
                self.free_blocks -= 1;
            }
        }
    }

    pub fn state_counts(&self) -> [u32; 4] {
        let mut counts = [0u32; 4];
        for r in &self.robots {
            counts[r.state.index()] += 1;
        }
        counts
    }

    /// Total blocks, free plus carried.
    pub fn block_total(&self) -> usize {
        self.free_blocks + self.robots.iter().filter(|r| r.carried_block.is_some()).count()
    }

    /// Structural invariants; violations are simulator bugs.
    pub fn check_invariants(&self) -> Result<()> {
        let bounds = self.scenario.arena.bounds();
        for (i, r) in self.robots.iter().enumerate() {
            if !bounds.contains(r.position) {
                return Err(Error::InvalidScenario(format!(
                    "robot {i} outside arena at {:?}",
                    r.position
                )));
            }
            let homing_like = matches!(
                r.state,
                RobotState::Homing | RobotState::AvoidingWhileHoming
            );
            if homing_like != r.carried_block.is_some() {
                return Err(Error::InvalidScenario(format!(
                    "robot {i} carry flag inconsistent with state"
                )));
            }
            if r.state.is_avoiding() != (r.avoidance_timer > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "robot {i} avoidance timer inconsistent with state"
                )));
            }
        }
        if self.free_blocks != self.blocks.iter().flatten().count() {
            return Err(Error::InvalidScenario("free-block tally out of sync".into()));
        }
        if self.block_total() != self.scenario.total_blocks as usize {
            return Err(Error::InvalidScenario(format!(
                "block count {} != {}",
                self.block_total(),
                self.scenario.total_blocks
            )));
        }
        if self.counters.illegal_transitions() > 0 {
            return Err(Error::InvalidScenario("illegal state transition".into()));
        }
        Ok(())
    }
}

/// Drop point on the segment from the nest entry toward the center,
/// uniformly distributed along it.
pub fn nest_target_choice<R: Rng>(entry: Vec2, center: Vec2, rng: &mut R) -> Vec2 {
    nest_target_at(entry, center, rng.gen_range(0.0..=1.0))
}

pub fn nest_target_at(entry: Vec2, center: Vec2, u: f64) -> Vec2 {
    entry + (center - entry).scale(u)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Mirror position and heading at the arena walls.
fn reflect(robot: &mut Robot, arena: &crate::scenario::Arena) {
    let mut p = robot.position;
    let mut h = robot.heading;
    for _ in 0..4 {
        let mut bounced = false;
        if p.x < 0.0 {
            p.x = -p.x;
            h = PI - h;
            bounced = true;
        } else if p.x > arena.width {
            p.x = 2.0 * arena.width - p.x;
            h = PI - h;
            bounced = true;
        }
        if p.y < 0.0 {
            p.y = -p.y;
            h = -h;
            bounced = true;
        } else if p.y > arena.height {
            p.y = 2.0 * arena.height - p.y;
            h = -h;
            bounced = true;
        }
        if !bounced {
            break;
        }
    }
    robot.position = p;
    robot.heading = wrap_angle(h);
}

fn integer_block_counts(s: &Scenario) -> Vec<u32> {
    let total = s.total_blocks;
    let mut counts: Vec<u32> = s.clusters.iter().map(|c| c.block_count.floor() as u32).collect();
    let mut assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..s.clusters.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = s.clusters[a].block_count.fract();
        let fb = s.clusters[b].block_count.fract();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut i = 0;
    while assigned < total {
        counts[order[i % order.len()]] += 1;
        assigned += 1;
        i += 1;
    }
    counts
}

/// Runs independent replicates in parallel; replicate `k` uses RNG stream
/// `k` of the given seed, so results are reproducible and independent of
/// scheduling.
pub fn run(s: &Scenario, horizon: f64, replicates: u32, seed: u64) -> Result<Vec<TimeSeries>> {
    run_with(s, horizon, replicates, seed, SimConfig::default())
}

pub fn run_with(
    s: &Scenario,
    horizon: f64,
    replicates: u32,
    seed: u64,
    config: SimConfig,
) -> Result<Vec<TimeSeries>> {
    if replicates < 1 {
        return Err(Error::InvalidConfig("replicates must be >= 1".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    s.validate()?;
    let steps = (horizon / config.dt).round() as usize;
    (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut world = SimWorld::new(s, config, seed, rep as u64);
            let stride = config.sample_stride.max(1);
            let mut series = TimeSeries {
                replicate_id: rep,
                times: Vec::with_capacity(steps / stride + 2),
                n_s: Vec::new(),
                n_h: Vec::new(),
                n_av_s: Vec::new(),
                n_av_h: Vec::new(),
                collected_cum: Vec::new(),
            };
            let record = |w: &SimWorld, series: &mut TimeSeries| {
                let c = w.state_counts();
                series.times.push(w.clock);
                series.n_s.push(c[0]);
                series.n_h.push(c[1]);
                series.n_av_s.push(c[2]);
                series.n_av_h.push(c[3]);
                series.collected_cum.push(w.counters.collected);
            };
            record(&world, &mut series);
            for step in 1..=steps {
                world.step();
                if step % stride == 0 || step == steps {
                    record(&world, &mut series);
                }
            }
            debug_assert!(world.check_invariants().is_ok());
            Ok(series)
        })
        .collect()
}

/// Single-robot calibration quantities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SingleRobotCalibration {
    /// Mean avoidance episode duration, s.
    pub tau_av: f64,
    /// Avoidance episode rate over the whole run, 1/s.
    pub alpha_r1: f64,
    /// Time-averaged avoidance occupancy in [0, 1].
    pub n_av1: f64,
    pub episodes: u64,
}

/// Measures the single-robot interference quantities by running the
/// scenario with the swarm forced to one robot. Walls are the only
/// interference source, which is exactly what the wall-correction term
/// needs.
pub fn measure_single_robot(s: &Scenario, horizon: f64, seed: u64) -> Result<SingleRobotCalibration> {
    measure_single_robot_with(s, horizon, seed, SimConfig::default())
}

pub fn measure_single_robot_with(
    s: &Scenario,
    horizon: f64,
    seed: u64,
    config: SimConfig,
) -> Result<SingleRobotCalibration> {
    let solo = s.with_robot_count(1);
    let mut world = SimWorld::new(&solo, config, seed, 0);
    let steps = (horizon / config.dt).round() as usize;
    for _ in 0..steps {
        world.step();
    }
    let episodes = world.counters.avoidance_episodes;
    if episodes == 0 {
        return Err(Error::InsufficientHorizon);
    }
    let total = steps as f64 * config.dt;
    Ok(SingleRobotCalibration {
        tau_av: world.counters.avoidance_time / episodes as f64,
        alpha_r1: episodes as f64 / total,
        n_av1: world.counters.avoidance_time / total,
        episodes,
    })
}

/// Mean and 95% confidence interval of one steady quantity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuantityStats {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub sd: f64,
}

impl QuantityStats {
    fn from_samples(samples: &[f64]) -> QuantityStats {
        let k = samples.len();
        let mean = samples.iter().sum::<f64>() / k as f64;
        if k < 2 {
            return QuantityStats {
                mean,
                lo: mean,
                hi: mean,
                sd: 0.0,
            };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        let sd = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, (k - 1) as f64)
            .expect("valid dof")
            .inverse_cdf(0.975);
        let half = t * sd / (k as f64).sqrt();
        QuantityStats {
            mean,
            lo: mean - half,
            hi: mean + half,
            sd,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lo && value <= self.hi
    }
}

/// Post-burn-in steady statistics across replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteadyStats {
    pub n_s: QuantityStats,
    pub n_h: QuantityStats,
    /// Combined avoidance occupancy, both contexts.
    pub n_av: QuantityStats,
    /// Steady block-collection rate, blocks/s.
    pub collection_rate: QuantityStats,
    pub replicates: usize,
    /// Set when the post-burn-in window still shows a linear trend in the
    /// population counts exceeding 5% of the swarm.
    pub nonstationary: bool,
}

/// Time-averages each replicate past the burn-in, then reduces across
/// replicates with a t-interval.
pub fn steady_stats(series: &[TimeSeries], burn_in: f64) -> Result<SteadyStats> {
    if series.is_empty() {
        return Err(Error::InvalidConfig("no replicates".into()));
    }
    let horizon = *series[0].times.last().expect("non-empty series");
    if burn_in >= horizon {
        return Err(Error::InvalidConfig(format!(
            "burn-in {burn_in} not below horizon {horizon}"
        )));
    }
    let mut n_s = Vec::new();
    let mut n_h = Vec::new();
    let mut n_av = Vec::new();
    let mut rate = Vec::new();
    for ts in series {
        let idx: Vec<usize> = (0..ts.len()).filter(|&i| ts.times[i] >= burn_in).collect();
        if idx.len() < 2 {
            return Err(Error::InvalidConfig(
                "averaging window holds fewer than two samples".into(),
            ));
        }
        let k = idx.len() as f64;
        n_s.push(idx.iter().map(|&i| ts.n_s[i] as f64).sum::<f64>() / k);
        n_h.push(idx.iter().map(|&i| ts.n_h[i] as f64).sum::<f64>() / k);
        n_av.push(
            idx.iter()
                .map(|&i| (ts.n_av_s[i] + ts.n_av_h[i]) as f64)
                .sum::<f64>()
                / k,
        );
        let (first, last) = (idx[0], *idx.last().unwrap());
        let window = ts.times[last] - ts.times[first];
        rate.push((ts.collected_cum[last] - ts.collected_cum[first]) as f64 / window);
    }
    let n_total = {
        let ts = &series[0];
        (ts.n_s[0] + ts.n_h[0] + ts.n_av_s[0] + ts.n_av_h[0]) as f64
    };
    let nonstationary = trend_exceeds(series, burn_in, 0.05 * n_total);
    Ok(SteadyStats {
        n_s: QuantityStats::from_samples(&n_s),
        n_h: QuantityStats::from_samples(&n_h),
        n_av: QuantityStats::from_samples(&n_av),
        collection_rate: QuantityStats::from_samples(&rate),
        replicates: series.len(),
        nonstationary,
    })
}

/// Ordinary least-squares drift of the replicate-averaged homing and
/// avoidance counts across the window, compared against a tolerance in
/// robots.
fn trend_exceeds(series: &[TimeSeries], burn_in: f64, tol: f64) -> bool {
    let template = &series[0];
    let idx: Vec<usize> = (0..template.len())
        .filter(|&i| template.times[i] >= burn_in)
        .collect();
    if idx.len() < 3 {
        return false;
    }
    let times: Vec<f64> = idx.iter().map(|&i| template.times[i]).collect();
    let window = times[times.len() - 1] - times[0];
    for quantity in ["n_h", "n_av"] {
        let values: Vec<f64> = idx
            .iter()
            .map(|&i| {
                series
                    .iter()
                    .map(|ts| match quantity {
                        "n_h" => ts.n_h[i] as f64,
                        _ => (ts.n_av_s[i] + ts.n_av_h[i]) as f64,
                    })
                    .sum::<f64>()
                    / series.len() as f64
            })
            .collect();
        let tm = times.iter().sum::<f64>() / times.len() as f64;
        let vm = values.iter().sum::<f64>() / values.len() as f64;
        let cov: f64 = times
            .iter()
            .zip(&values)
            .map(|(t, v)| (t - tm) * (v - vm))
            .sum();
        let var: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
        if var > 0.0 {
            let slope = cov / var;
            if (slope * window).abs() > tol {
                return true;
            }
        }
    }
    false
}

/// Per-replicate delimited text output.
pub fn write_series_csv<W: Write>(ts: &TimeSeries, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,n_s,n_h,n_av_s,n_av_h,collected_cum")?;
    for i in 0..ts.len() {
        writeln!(
            out,
            "{:.6},{},{},{},{},{}",
            ts.times[i], ts.n_s[i], ts.n_h[i], ts.n_av_s[i], ts.n_av_h[i], ts.collected_cum[i]
        )?;
    }
    Ok(())
}

/// Text block identifying a run for replay.
pub fn run_manifest(s: &Scenario, config: &SimConfig, horizon: f64, replicates: u32, seed: u64) -> String {
    format!(
        "seed = {seed}\nscenario_hash = \"{}\"\nkind = \"{}\"\nrobots = {}\nblocks = {}\nhorizon = {horizon}\nreplicates = {replicates}\ndt = {}\nsensing_radius = {}\navoid_duration = {}\n",
        s.content_hash(),
        s.kind,
        s.robot_count,
        s.total_blocks,
        config.dt,
        config.sensing_radius,
        config.avoid_duration,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{make_scenario, DistributionKind};

    fn small_scenario() -> Scenario {
        make_scenario(DistributionKind::SS, (16.0, 8.0), 10, 20, 1).unwrap()
    }

    #[test]
    fn single_robot_without_blocks_stays_in_search_states() {
        let s = small_scenario().with_robot_count(1);
        let mut world = SimWorld::new(&s, SimConfig::default(), 3, 0);
        world.remove_all_blocks();
        for _ in 0..40_000 {
            world.step();
            let st = world.robots[0].state;
            assert!(matches!(
                st,
                RobotState::Searching | RobotState::AvoidingWhileSearching
            ));
        }
        // Walls alone produce avoidance episodes.
        assert!(world.counters.avoidance_episodes > 0);
        assert_eq!(world.counters.illegal_transitions(), 0);
    }

    #[test]
    fn pickup_transitions_to_homing_and_conserves_blocks() {
        let s = small_scenario();
        let mut world = SimWorld::new(&s, SimConfig::default(), 4, 0);
        let total = s.total_blocks as usize;
        assert_eq!(world.block_total(), total);
        // Teleport robot 0 onto the first block.
        let bpos = world.free_blocks().next().unwrap().position;
        world.robots[0].position = bpos;
        world.robots[0].state = RobotState::Searching;
        world.step();
        // Free pool shrank by one; the carried block keeps the total.
        assert_eq!(world.robots[0].state, RobotState::Homing);
        assert!(world.robots[0].carried_block.is_some());
        assert_eq!(world.free_blocks().count(), total - 1);
        assert_eq!(world.block_total(), total);
    }

    #[test]
    fn block_total_constant_over_many_steps() {
        for kind in DistributionKind::ALL {
            let dims = match kind {
                DistributionKind::SS | DistributionKind::DS => (16.0, 8.0),
                _ => (8.0, 8.0),
            };
            let s = make_scenario(kind, dims, 10, 20, 5).unwrap();
            let mut world = SimWorld::new(&s, SimConfig::default(), 6, 0);
            for step in 0..10_000 {
                world.step();
                if step % 500 == 0 {
                    world.check_invariants().unwrap();
                }
                assert_eq!(world.block_total(), 20);
            }
            assert!(world.counters.collected > 0, "{kind}: no collections");
            world.check_invariants().unwrap();
        }
    }

    #[test]
    fn nest_target_on_segment() {
        let entry = Vec2::new(1.0, 2.0);
        let center = Vec2::new(3.0, 4.0);
        assert_eq!(nest_target_at(entry, center, 0.0), entry);
        assert_eq!(nest_target_at(entry, center, 1.0), center);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1_000 {
            let p = nest_target_choice(entry, center, &mut rng);
            // Colinear and between the endpoints.
            let d = center - entry;
            let t = (p - entry).x / d.x;
            assert!((0.0..=1.0).contains(&t));
            assert!(((p - entry).y - t * d.y).abs() < 1e-12);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let s = small_scenario();
        let a = run(&s, 200.0, 2, 42).unwrap();
        let b = run(&s, 200.0, 2, 42).unwrap();
        assert_eq!(a, b);
        // Different replicates explore different streams.
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn counts_always_sum_to_n() {
        let s = small_scenario();
        let series = run(&s, 500.0, 2, 7).unwrap();
        for ts in &series {
            for i in 0..ts.len() {
                assert_eq!(ts.n_s[i] + ts.n_h[i] + ts.n_av_s[i] + ts.n_av_h[i], 10);
            }
            for w in ts.collected_cum.windows(2) {
                assert!(w[1] >= w[0]);
            }
        }
    }

    #[test]
    fn single_robot_measurement_and_littles_law() {
        let s = small_scenario();
        let cal = measure_single_robot(&s, 20_000.0, 11).unwrap();
        // Fixed 2 s maneuver shows up directly as the mean episode length.
        assert!((cal.tau_av - 2.0).abs() / 2.0 < 0.01, "tau_av {}", cal.tau_av);
        // Occupancy identity from the measured streams.
        let rel = (cal.n_av1 - cal.alpha_r1 * cal.tau_av).abs() / cal.n_av1;
        assert!(rel < 0.05, "identity off by {rel}");
        assert!(cal.episodes > 10);
    }

    #[test]
    fn larger_arena_means_fewer_wall_episodes() {
        let small = make_scenario(DistributionKind::RN, (8.0, 8.0), 1, 10, 2).unwrap();
        let large = make_scenario(DistributionKind::RN, (24.0, 24.0), 1, 10, 2).unwrap();
        let a = measure_single_robot(&small, 20_000.0, 13).unwrap();
        let b = measure_single_robot(&large, 20_000.0, 13).unwrap();
        assert!(b.alpha_r1 < a.alpha_r1);
    }

    #[test]
    fn insufficient_horizon_is_an_error() {
        // One robot in the middle of a large arena cannot reach a wall in
        // a couple of steps.
        let s = make_scenario(DistributionKind::RN, (40.0, 40.0), 1, 10, 2).unwrap();
        assert!(matches!(
            measure_single_robot(&s, 1.0, 1),
            Err(Error::InsufficientHorizon)
        ));
    }

    #[test]
    fn steady_stats_basics() {
        let s = small_scenario();
        let series = run(&s, 2_000.0, 3, 21).unwrap();
        let stats = steady_stats(&series, 400.0).unwrap();
        let sum = stats.n_s.mean + stats.n_h.mean + stats.n_av.mean;
        assert!((sum - 10.0).abs() < 1e-9);
        assert!(stats.n_h.lo <= stats.n_h.mean && stats.n_h.mean <= stats.n_h.hi);
        // Identical replicates collapse the interval.
        let twin = vec![series[0].clone(), series[0].clone()];
        let stats = steady_stats(&twin, 400.0).unwrap();
        assert_eq!(stats.n_h.lo, stats.n_h.hi);
        assert!(steady_stats(&series, 3_000.0).is_err());
    }

    #[test]
    fn collection_rate_times_homing_time_matches_occupancy() {
        // Flow balance on the simulated streams: the measured homing
        // duration spans pickup to drop, interruptions included, so by
        // Little's law rate * tau_h matches the mean occupancy of the
        // homing and homing-avoidance states together.
        let s = make_scenario(DistributionKind::SS, (12.0, 6.0), 8, 30, 3).unwrap();
        let mut world = SimWorld::new(&s, SimConfig::default(), 17, 0);
        let steps = 100_000;
        let mut occupancy_sum = 0.0;
        for _ in 0..steps {
            world.step();
            let c = world.state_counts();
            occupancy_sum += (c[1] + c[3]) as f64;
        }
        let mean_occupancy = occupancy_sum / steps as f64;
        let horizon = steps as f64 * world.config.dt;
        let rate = world.counters.collected as f64 / horizon;
        let tau_h = world.counters.homing_time / world.counters.homing_episodes as f64;
        let rel = (rate * tau_h - mean_occupancy).abs() / mean_occupancy;
        assert!(rel < 0.1, "flow balance off by {rel}");
    }

    #[test]
    fn rejects_bad_run_arguments() {
        let s = small_scenario();
        assert!(run(&s, 100.0, 0, 1).is_err());
        assert!(run(&s, 0.0, 1, 1).is_err());
    }

    #[test]
    fn manifest_mentions_seed_and_hash() {
        let s = small_scenario();
        let m = run_manifest(&s, &SimConfig::default(), 100.0, 2, 99);
        assert!(m.contains("seed = 99"));
        assert!(m.contains("scenario_hash"));
    }
}
