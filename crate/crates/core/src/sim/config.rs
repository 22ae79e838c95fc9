use serde::{Deserialize, Serialize};

use crate::agents::{OrcaParams, SocialForceParams};
use crate::error::{Error, Result};

/// Which of the two environment layouts to generate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    /// Circle-crossing humans, limited robot field of view.
    Fov,
    /// Dense crowd with static circle groups, full field of view.
    Group,
}

/// Controller driving the simulated humans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HumanPolicy {
    Orca(OrcaParams),
    SocialForce(SocialForceParams),
}

impl Default for HumanPolicy {
    fn default() -> Self {
        HumanPolicy::Orca(OrcaParams::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    pub radius: f64,
    pub v_max: f64,
    /// Minimum straight-line distance between sampled start and goal.
    pub min_goal_distance: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            radius: 0.3,
            v_max: 1.0,
            min_goal_distance: 6.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanConfig {
    pub radius_range: [f64; 2],
    pub v_max_range: [f64; 2],
    /// Per-human, per-step probability of switching to a fresh goal.
    pub goal_change_prob: f64,
    /// Half-width of the uniform jitter added to circle placements.
    pub placement_noise: f64,
    pub policy: HumanPolicy,
    /// Whether humans perceive and avoid the robot. Off in every training
    /// and evaluation suite; on only for reciprocal sanity checks.
    pub robot_visible: bool,
}

impl Default for HumanConfig {
    fn default() -> Self {
        HumanConfig {
            radius_range: [0.3, 0.5],
            v_max_range: [0.5, 1.5],
            goal_change_prob: 0.01,
            placement_noise: 0.5,
            policy: HumanPolicy::default(),
            robot_visible: false,
        }
    }
}

/// Everything needed to generate and run one family of episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub env_kind: EnvKind,
    pub fov_deg: f64,
    pub n_humans: usize,
    pub n_static_groups: usize,
    pub group_size: usize,
    pub circle_radius: f64,
    pub dt: f64,
    pub horizon: usize,
    pub gamma: f64,
    pub rng_seed: u64,
    /// Minimum clearance between any two agent circles at spawn.
    pub spawn_margin: f64,
    pub robot: RobotConfig,
    pub human: HumanConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::fov(360.0)
    }
}

impl ScenarioConfig {
    /// FoV environment: five circle-crossing humans on a 6 m circle.
    pub fn fov(fov_deg: f64) -> Self {
        ScenarioConfig {
            env_kind: EnvKind::Fov,
            fov_deg,
            n_humans: 5,
            n_static_groups: 0,
            group_size: 3,
            circle_radius: 6.0,
            dt: 0.25,
            horizon: 100,
            gamma: 0.99,
            rng_seed: 0,
            spawn_margin: 0.2,
            robot: RobotConfig::default(),
            human: HumanConfig::default(),
        }
    }

    /// Group environment with `n_humans` total, one static group of three
    /// per five humans.
    pub fn group(n_humans: usize) -> Self {
        ScenarioConfig {
            env_kind: EnvKind::Group,
            fov_deg: 360.0,
            n_humans,
            n_static_groups: n_humans / 5,
            ..ScenarioConfig::fov(360.0)
        }
    }

    pub fn n_static_humans(&self) -> usize {
        match self.env_kind {
            EnvKind::Fov => 0,
            EnvKind::Group => self.n_static_groups * self.group_size,
        }
    }

    /// Validates the config, reporting the first offending field as
    /// `<prefix>.<field>`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let field = |name: &str| {
            if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            }
        };
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field(name), format!("must be > 0, got {v}")))
            }
        };
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return Err(Error::config(
                field("fov_deg"),
                format!("must be in (0, 360], got {}", self.fov_deg),
            ));
        }
        positive("circle_radius", self.circle_radius)?;
        positive("dt", self.dt)?;
        if self.horizon == 0 {
            return Err(Error::config(field("horizon"), "must be >= 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(
                field("gamma"),
                format!("must be in (0, 1], got {}", self.gamma),
            ));
        }
        if !(self.spawn_margin >= 0.0) {
            return Err(Error::config(field("spawn_margin"), "must be >= 0"));
        }
        positive("robot.radius", self.robot.radius)?;
        positive("robot.v_max", self.robot.v_max)?;
        if !(self.robot.min_goal_distance >= 0.0) {
            return Err(Error::config(
                field("robot.min_goal_distance"),
                "must be >= 0",
            ));
        }
        for (name, [lo, hi]) in [
            ("human.radius_range", self.human.radius_range),
            ("human.v_max_range", self.human.v_max_range),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::config(
                    field(name),
                    format!("must satisfy 0 < lo <= hi, got [{lo}, {hi}]"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.human.goal_change_prob) {
            return Err(Error::config(
                field("human.goal_change_prob"),
                "must be in [0, 1]",
            ));
        }
        if !(self.human.placement_noise >= 0.0) {
            return Err(Error::config(
                field("human.placement_noise"),
                "must be >= 0",
            ));
        }
        match &self.human.policy {
            HumanPolicy::Orca(p) => p.validate(&field("human.policy"))?,
            HumanPolicy::SocialForce(p) => p.validate(&field("human.policy"))?,
        }
        if self.env_kind == EnvKind::Group {
            if self.group_size == 0 && self.n_static_groups > 0 {
                return Err(Error::config(field("group_size"), "must be >= 1"));
            }
            if self.n_static_humans() > self.n_humans {
                return Err(Error::config(
                    field("n_static_groups"),
                    format!(
                        "{} groups of {} exceed n_humans = {}",
                        self.n_static_groups, self.group_size, self.n_humans
                    ),
                ));
            }
        }
        Ok(())
    }
}
