//! Experiment plans: the four regimes, their point expansion, and
//! deterministic seed derivation.

use anyhow::{bail, Context};
use forage_core::scenario::{
    make_scenario_with, DistributionKind, Scenario, ScenarioConfig,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ConstRhoLarge,
    ConstRhoSmall,
    VarRhoLarge,
    VarRhoSmall,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::ConstRhoLarge => "const-rho-large",
            Regime::ConstRhoSmall => "const-rho-small",
            Regime::VarRhoLarge => "var-rho-large",
            Regime::VarRhoSmall => "var-rho-small",
        }
    }

    /// Constant-density regimes scale the arena with the swarm; variable-
    /// density regimes hold the arena fixed and sweep the density.
    pub fn is_const_rho(&self) -> bool {
        matches!(self, Regime::ConstRhoLarge | Regime::ConstRhoSmall)
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub regime: Regime,
    pub kinds: Vec<DistributionKind>,
    #[serde(default)]
    pub swarm_sizes: Vec<u32>,
    pub densities: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    pub seed: u64,
    #[serde(default = "default_blocks")]
    pub total_blocks: u32,
    #[serde(default = "default_calibration_sizes")]
    pub calibration_sizes: Vec<u32>,
    #[serde(default = "default_burn_in_fraction")]
    pub burn_in_fraction: f64,
    /// Fixed arena for variable-density regimes; per-kind defaults apply
    /// when absent.
    #[serde(default)]
    pub arena: Option<(f64, f64)>,
}

fn default_horizon() -> f64 {
    20_000.0
}
fn default_replicates() -> u32 {
    8
}
fn default_blocks() -> u32 {
    250
}
fn default_calibration_sizes() -> Vec<u32> {
    vec![5, 10, 20]
}
fn default_burn_in_fraction() -> f64 {
    0.2
}

impl ExperimentPlan {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        let plan: ExperimentPlan = toml::from_str(text).context("parsing plan")?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &std::path::Path) -> anyhow::Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path).context("reading plan file")?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.kinds.is_empty() {
            bail!("plan has no scenario kinds");
        }
        if self.densities.is_empty() {
            bail!("plan has no densities");
        }
        if self.regime.is_const_rho() {
            if self.densities.len() != 1 {
                bail!("constant-density plans take exactly one density");
            }
            if self.swarm_sizes.is_empty() {
                bail!("constant-density plans need swarm sizes");
            }
        }
        if self.replicates < 2 {
            bail!("interval reporting needs at least 2 replicates");
        }
        if !(self.horizon > 0.0) {
            bail!("horizon must be positive");
        }
        if !(self.burn_in_fraction > 0.0 && self.burn_in_fraction < 1.0) {
            bail!("burn-in fraction must lie in (0, 1)");
        }
        if self.calibration_sizes.len() < 2 {
            bail!("need at least two calibration sizes");
        }
        Ok(())
    }

    pub fn burn_in(&self) -> f64 {
        self.burn_in_fraction * self.horizon
    }

    /// One comparison cell per (kind, swarm size / density), deterministic
    /// order.
    pub fn points(&self) -> Vec<PlanPoint> {
        let mut out = Vec::new();
        for &kind in &self.kinds {
            if self.regime.is_const_rho() {
                let rho = self.densities[0];
                for &n in &self.swarm_sizes {
                    out.push(PlanPoint::at_density(kind, n, rho));
                }
            } else {
                let dims = self.arena.unwrap_or_else(|| default_arena(kind));
                let area = dims.0 * dims.1;
                for &rho in &self.densities {
                    let n = ((rho * area).round() as u32).max(1);
                    out.push(PlanPoint {
                        kind,
                        n,
                        rho: n as f64 / area,
                        arena_dims: dims,
                    });
                }
            }
        }
        out
    }

    /// Calibration cells for one kind: the default small-N ladder at the
    /// plan's base density (constant-rho) or inside the fixed arena
    /// (variable-rho).
    pub fn calibration_points(&self, kind: DistributionKind) -> Vec<PlanPoint> {
        self.calibration_sizes
            .iter()
            .map(|&n| {
                if self.regime.is_const_rho() {
                    PlanPoint::at_density(kind, n, self.densities[0])
                } else {
                    let dims = self.arena.unwrap_or_else(|| default_arena(kind));
                    PlanPoint {
                        kind,
                        n,
                        rho: n as f64 / (dims.0 * dims.1),
                        arena_dims: dims,
                    }
                }
            })
            .collect()
    }
}

/// Arena shapes follow the scenario convention: 2:1 for source
/// distributions, square for the nest-centered ones.
fn default_arena(kind: DistributionKind) -> (f64, f64) {
    match kind {
        DistributionKind::SS | DistributionKind::DS => (32.0, 16.0),
        DistributionKind::RN | DistributionKind::PL => (16.0, 16.0),
    }
}

/// One comparison cell: a kind, swarm size, density, and arena.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanPoint {
    pub kind: DistributionKind,
    pub n: u32,
    pub rho: f64,
    pub arena_dims: (f64, f64),
}

impl PlanPoint {
    /// Arena sized for the target density, 2:1 for SS/DS, square otherwise.
    pub fn at_density(kind: DistributionKind, n: u32, rho: f64) -> PlanPoint {
        let area = n as f64 / rho;
        let arena_dims = match kind {
            DistributionKind::SS | DistributionKind::DS => {
                let h = (area / 2.0).sqrt();
                (2.0 * h, h)
            }
            DistributionKind::RN | DistributionKind::PL => {
                let s = area.sqrt();
                (s, s)
            }
        };
        PlanPoint {
            kind,
            n,
            rho: n as f64 / (arena_dims.0 * arena_dims.1),
            arena_dims,
        }
    }

    pub fn label(&self) -> String {
        format!("{} N={} rho={:.4}", self.kind, self.n, self.rho)
    }

    pub fn scenario(&self, total_blocks: u32, plan_seed: u64) -> forage_core::Result<Scenario> {
        self.scenario_with(total_blocks, plan_seed, &ScenarioConfig::default())
    }

    pub fn scenario_with(
        &self,
        total_blocks: u32,
        plan_seed: u64,
        cfg: &ScenarioConfig,
    ) -> forage_core::Result<Scenario> {
        let seed = derive_seed(plan_seed, &[1, kind_tag(self.kind), self.n as u64, self.rho.to_bits()]);
        make_scenario_with(self.kind, self.arena_dims, self.n, total_blocks, seed, cfg)
    }

    pub fn sim_seed(&self, plan_seed: u64) -> u64 {
        derive_seed(plan_seed, &[2, kind_tag(self.kind), self.n as u64, self.rho.to_bits()])
    }

    pub fn single_robot_seed(&self, plan_seed: u64) -> u64 {
        derive_seed(plan_seed, &[3, kind_tag(self.kind), self.n as u64, self.rho.to_bits()])
    }
}

fn kind_tag(kind: DistributionKind) -> u64 {
    match kind {
        DistributionKind::SS => 0x5353,
        DistributionKind::DS => 0x4453,
        DistributionKind::RN => 0x524e,
        DistributionKind::PL => 0x504c,
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed derivation: every downstream seed is a pure function of the
/// plan seed and the point identity.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for &t in tags {
        state = splitmix64(state ^ t);
    }
    state
}
