//! Arena, nest, and block-cluster definitions plus the four canonical
//! block distributions (single source, dual source, random, power law).
//!
//! A [`Scenario`] is the complete input shared by the rate derivations and
//! the microsimulator. Values are immutable after construction and safe to
//! share across workers.

use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DistributionKind {
    /// Single source: one cluster on the arena half opposite the nest.
    SS,
    /// Dual source: two mirror clusters flanking a centered nest.
    DS,
    /// Random: blocks anywhere outside the nest footprint.
    RN,
    /// Power law: clusters of power-law-distributed sizes.
    PL,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 4] = [
        DistributionKind::SS,
        DistributionKind::DS,
        DistributionKind::RN,
        DistributionKind::PL,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DistributionKind::SS => "SS",
            DistributionKind::DS => "DS",
            DistributionKind::RN => "RN",
            DistributionKind::PL => "PL",
        }
    }
}

impl std::fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DistributionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SS" => Ok(DistributionKind::SS),
            "DS" => Ok(DistributionKind::DS),
            "RN" => Ok(DistributionKind::RN),
            "PL" => Ok(DistributionKind::PL),
            other => Err(Error::Parse(format!("unknown distribution kind {other:?}"))),
        }
    }
}

/// Rectangular operating area with a square nest region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
    /// Nest reference point `x_n`.
    pub nest_center: Vec2,
    /// Side length `L` of the square nest region.
    pub nest_side: f64,
}

impl Arena {
    pub fn bounds(&self) -> Rect {
        Rect::new(Vec2::new(0.0, 0.0), Vec2::new(self.width, self.height))
    }

    pub fn nest_rect(&self) -> Rect {
        Rect::centered(self.nest_center, Vec2::new(self.nest_side, self.nest_side))
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// One rectangular sub-area where blocks may be distributed, described by
/// the tuple (area, center, dims, density) plus its expected block count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockCluster {
    /// Area of the sub-area in m^2.
    pub area: f64,
    pub center: Vec2,
    pub dims: Vec2,
    /// Expected steady-state block count within the sub-area.
    pub block_count: f64,
    /// Mean steady-state block density, blocks per m^2.
    pub density: f64,
}

impl BlockCluster {
    pub fn from_rect(rect: Rect, block_count: f64) -> Self {
        let dims = rect.dims();
        let area = rect.area();
        Self {
            area,
            center: rect.center(),
            dims,
            block_count,
            density: block_count / area,
        }
    }

    pub fn rect(&self) -> Rect {
        Rect::centered(self.center, self.dims)
    }
}

/// Complete description of one foraging problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: DistributionKind,
    /// Generation seed; all downstream randomness derives from it unless
    /// the caller supplies another one explicitly.
    #[serde(with = "seed_serde")]
    pub seed: u64,
    /// Swarm size N.
    pub robot_count: u32,
    /// Total blocks B(0) across all clusters.
    pub total_blocks: u32,
    /// Mean searching (random walk) speed, m/s.
    pub search_speed: f64,
    /// Homing (phototaxis) speed, m/s.
    pub homing_speed: f64,
    /// Half-angle of the uniform turning distribution, radians.
    pub crw_half_angle: f64,
    pub arena: Arena,
    pub clusters: Vec<BlockCluster>,
}

/// Knobs of [`make_scenario`] that the input files may override.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub search_speed: f64,
    pub homing_speed: f64,
    pub crw_half_angle: f64,
    /// Nest side as a fraction of the shorter arena dimension.
    pub nest_fraction: f64,
    /// Power-law generator: fraction of the arena to cover with clusters.
    pub pl_area_fraction: f64,
    /// Power-law generator: maximum number of clusters.
    pub pl_max_clusters: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            // Ground-sensing creep while searching, full speed on the
            // straight phototaxis run home. The slow search keeps the
            // walk's persistence length (~4.7 m at this speed and turning
            // spread) below desk-scale arena dimensions, the regime the
            // diffusion-based rate derivations assume.
            search_speed: 0.03,
            homing_speed: 0.3,
            crw_half_angle: std::f64::consts::PI / 36.0,
            nest_fraction: 0.1,
            pl_area_fraction: 0.2,
            pl_max_clusters: 12,
        }
    }
}

/// Builds one of the four canonical scenarios. Regeneration with the same
/// arguments is bit-identical.
pub fn make_scenario(
    kind: DistributionKind,
    arena_dims: (f64, f64),
    n_robots: u32,
    n_blocks: u32,
    seed: u64,
) -> Result<Scenario> {
    make_scenario_with(kind, arena_dims, n_robots, n_blocks, seed, &ScenarioConfig::default())
}

pub fn make_scenario_with(
    kind: DistributionKind,
    arena_dims: (f64, f64),
    n_robots: u32,
    n_blocks: u32,
    seed: u64,
    cfg: &ScenarioConfig,
) -> Result<Scenario> {
    let (width, height) = arena_dims;
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "arena dims must be positive, got {width} x {height}"
        )));
    }
    if n_robots < 1 {
        return Err(Error::InvalidScenario("robot count must be >= 1".into()));
    }
    if n_blocks < 1 {
        return Err(Error::InvalidScenario("block count must be >= 1".into()));
    }

    let nest_side = cfg.nest_fraction * width.min(height);
    let nest_center = match kind {
        // Nest at the left edge-center, objects on the opposite half.
        DistributionKind::SS => Vec2::new(nest_side, height / 2.0),
        _ => Vec2::new(width / 2.0, height / 2.0),
    };
    let arena = Arena {
        width,
        height,
        nest_center,
        nest_side,
    };

    let rects: Vec<Rect> = match kind {
        DistributionKind::SS => vec![Rect::new(
            Vec2::new(width / 2.0, 0.0),
            Vec2::new(width, height),
        )],
        DistributionKind::DS => vec![
            Rect::new(Vec2::new(0.0, 0.0), Vec2::new(width / 4.0, height)),
            Rect::new(Vec2::new(3.0 * width / 4.0, 0.0), Vec2::new(width, height)),
        ],
        DistributionKind::RN => {
            let nest = arena.nest_rect();
            // Frame of four rectangles covering the arena minus the nest
            // footprint (blocks never spawn inside the nest).
            vec![
                Rect::new(Vec2::new(0.0, 0.0), Vec2::new(nest.min.x, height)),
                Rect::new(Vec2::new(nest.max.x, 0.0), Vec2::new(width, height)),
                Rect::new(Vec2::new(nest.min.x, 0.0), Vec2::new(nest.max.x, nest.min.y)),
                Rect::new(Vec2::new(nest.min.x, nest.max.y), Vec2::new(nest.max.x, height)),
            ]
        }
        DistributionKind::PL => place_power_law_clusters(&arena, seed, cfg)?,
    };

    let counts = apportion_blocks(n_blocks, &rects);
    let clusters: Vec<BlockCluster> = rects
        .iter()
        .zip(counts.iter())
        .filter(|(_, &c)| c > 0)
        .map(|(r, &c)| BlockCluster::from_rect(*r, c as f64))
        .collect();

    let scenario = Scenario {
        kind,
        seed,
        robot_count: n_robots,
        total_blocks: n_blocks,
        search_speed: cfg.search_speed,
        homing_speed: cfg.homing_speed,
        crw_half_angle: cfg.crw_half_angle,
        arena,
        clusters,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// TOML integers are signed 64-bit, so seeds beyond i64::MAX round-trip as
/// decimal strings; both encodings parse.
mod seed_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, ser: S) -> Result<S::Ok, S::Error> {
        if *seed <= i64::MAX as u64 {
            ser.serialize_i64(*seed as i64)
        } else {
            ser.serialize_str(&seed.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<u64, D::Error> {
        match Raw::deserialize(de)? {
            Raw::Int(v) if v >= 0 => Ok(v as u64),
            Raw::Int(v) => Err(serde::de::Error::custom(format!("negative seed {v}"))),
            Raw::Text(s) => s
                .parse::<u64>()
                .map_err(|e| serde::de::Error::custom(format!("seed {s:?}: {e}"))),
        }
    }
}

/// Largest-remainder apportionment of `total` blocks by cluster area;
/// the counts always sum to `total` exactly.
fn apportion_blocks(total: u32, rects: &[Rect]) -> Vec<u32> {
    let area_sum: f64 = rects.iter().map(Rect::area).sum();
    let quotas: Vec<f64> = rects
        .iter()
        .map(|r| total as f64 * r.area() / area_sum)
        .collect();
    let mut counts: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let mut remaining = total - counts.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..rects.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for idx in order {
        if remaining == 0 {
            break;
        }
        counts[idx] += 1;
        remaining -= 1;
    }
    counts
}

/// Cluster side lengths follow a discrete power law with exponent 2 over
/// {1, 2, 4, ...} grid units; placement is rejection-sampled against the
/// nest and previously placed clusters.
fn place_power_law_clusters(arena: &Arena, seed: u64, cfg: &ScenarioConfig) -> Result<Vec<Rect>> {
    const RETRY_CAP: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nest = arena.nest_rect();
    let bounds = arena.bounds();
    // A cluster wider than (min_dim - nest_side) / 2 cannot sit beside a
    // centered nest at all, so cap the drawable sizes there.
    let max_side = ((arena.width.min(arena.height) - arena.nest_side) / 2.0).max(1.0);
    let mut sides = Vec::new();
    let mut s = 1.0;
    while s <= max_side {
        sides.push(s);
        s *= 2.0;
    }
    let weights: Vec<f64> = sides.iter().map(|s| s.powi(-2)).collect();
    let weight_sum: f64 = weights.iter().sum();

    let target_area = cfg.pl_area_fraction * arena.area();
    let mut placed: Vec<Rect> = Vec::new();
    let mut covered = 0.0;
    while covered < target_area && placed.len() < cfg.pl_max_clusters {
        let mut pick = rng.gen_range(0.0..weight_sum);
        let mut side = sides[0];
        for (s, w) in sides.iter().zip(weights.iter()) {
            if pick < *w {
                side = *s;
                break;
            }
            pick -= w;
        }
        let mut ok = false;
        for _ in 0..RETRY_CAP {
            let cx = rng.gen_range(side / 2.0..arena.width - side / 2.0);
            let cy = rng.gen_range(side / 2.0..arena.height - side / 2.0);
            let cand = Rect::centered(Vec2::new(cx, cy), Vec2::new(side, side));
            if bounds.contains_rect(&cand)
                && !cand.intersects(&nest)
                && placed.iter().all(|p| !p.intersects(&cand))
            {
                placed.push(cand);
                covered += cand.area();
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::InfeasibleGeometry(format!(
                "could not place a {side} m power-law cluster after {RETRY_CAP} attempts"
            )));
        }
    }
    Ok(placed)
}

/// Sum of cluster areas, `A_d`.
pub fn distributable_area(s: &Scenario) -> f64 {
    s.clusters.iter().map(|c| c.area).sum()
}

/// Swarm density `rho_S = N / A`, robots per m^2.
pub fn swarm_density(s: &Scenario) -> f64 {
    s.robot_count as f64 / s.arena.area()
}

impl Scenario {
    /// Checks every structural invariant; generated scenarios always pass,
    /// hand-edited files may not.
    pub fn validate(&self) -> Result<()> {
        let a = &self.arena;
        if !(a.width > 0.0 && a.height > 0.0) {
            return Err(Error::InvalidScenario("non-positive arena dims".into()));
        }
        if !(a.nest_side > 0.0) {
            return Err(Error::InvalidScenario("non-positive nest side".into()));
        }
        if !a.bounds().contains_rect(&a.nest_rect()) {
            return Err(Error::InvalidScenario("nest extends outside arena".into()));
        }
        if self.robot_count < 1 {
            return Err(Error::InvalidScenario("robot count must be >= 1".into()));
        }
        if self.total_blocks < 1 {
            return Err(Error::InvalidScenario("block count must be >= 1".into()));
        }
        if !(self.search_speed > 0.0 && self.homing_speed > 0.0) {
            return Err(Error::InvalidScenario("speeds must be positive".into()));
        }
        if !(self.crw_half_angle > 0.0 && self.crw_half_angle <= std::f64::consts::PI) {
            return Err(Error::InvalidScenario(
                "crw half angle must lie in (0, pi]".into(),
            ));
        }
        if self.clusters.is_empty() {
            return Err(Error::InvalidScenario("no block clusters".into()));
        }
        // Cluster rectangles reconstruct from center/extent, so geometric
        // checks carry an ulp-scale tolerance.
        let eps = 1e-9 * a.width.max(a.height);
        let nest = a.nest_rect();
        for (i, c) in self.clusters.iter().enumerate() {
            let r = c.rect();
            if !a.bounds().contains_rect_eps(&r, eps) {
                return Err(Error::InvalidScenario(format!(
                    "cluster {i} extends outside arena"
                )));
            }
            if r.intersects_eps(&nest, eps) {
                return Err(Error::InvalidScenario(format!(
                    "cluster {i} intersects the nest"
                )));
            }
            if (c.area - c.dims.x * c.dims.y).abs() > 1e-9 * c.area.max(1.0) {
                return Err(Error::InvalidScenario(format!(
                    "cluster {i}: area does not match dims"
                )));
            }
            if (c.density - c.block_count / c.area).abs() > 1e-9 * c.density.max(1e-12) {
                return Err(Error::InvalidScenario(format!(
                    "cluster {i}: density does not match block count / area"
                )));
            }
            for (j, other) in self.clusters.iter().enumerate().skip(i + 1) {
                if r.intersects_eps(&other.rect(), eps) {
                    return Err(Error::InvalidScenario(format!(
                        "clusters {i} and {j} overlap"
                    )));
                }
            }
        }
        let total: f64 = self.clusters.iter().map(|c| c.block_count).sum();
        if (total - self.total_blocks as f64).abs() > 1e-9 {
            return Err(Error::InvalidScenario(format!(
                "cluster block counts sum to {total}, expected {}",
                self.total_blocks
            )));
        }
        if distributable_area(self) > a.area() + 1e-9 {
            return Err(Error::InvalidScenario(
                "distributable area exceeds arena area".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Stable content hash used in run manifests.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_toml_string().as_bytes());
        let out = h.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Same scenario with a different swarm size (used for calibration runs).
    pub fn with_robot_count(&self, n: u32) -> Scenario {
        let mut s = self.clone();
        s.robot_count = n.max(1);
        s
    }
}
