use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{
    orca_velocity_with, social_force_velocity, AgentView, OrcaParams, SocialForceParams,
};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::net::{forward, HiddenState, PolicyParams};
use crate::sim::{Observation, ScenarioConfig};

/// Radius the model-based baselines assume for every human; the robot
/// cannot observe true radii.
pub const ASSUMED_HUMAN_RADIUS: f64 = 0.5;

/// Anything that maps the robot's observation to a velocity command.
pub trait Controller {
    fn name(&self) -> String;

    /// Called before every episode.
    fn reset(&mut self, config: &ScenarioConfig, seed: u64) -> Result<()>;

    fn act(&mut self, obs: &Observation, config: &ScenarioConfig) -> Result<Vec2>;
}

fn robot_view(obs: &Observation) -> AgentView {
    let r = &obs.robot_node;
    AgentView {
        position: Vec2::new(r[0], r[1]),
        velocity: Vec2::new(r[2], r[3]),
        goal: Vec2::new(r[4], r[5]),
        v_max: r[6],
        radius: r[8],
    }
}

/// Humans as the robot believes them: estimated positions and velocities.
fn believed_humans(obs: &Observation) -> Vec<AgentView> {
    (0..obs.n_humans())
        .map(|i| {
            let position = obs.believed_position(i);
            AgentView {
                position,
                velocity: obs.last_seen[i].velocity,
                radius: ASSUMED_HUMAN_RADIUS,
                v_max: 0.0,
                goal: position,
            }
        })
        .collect()
}

/// A trained DS-RNN or RNN+Attn policy, run on its mean action.
pub struct LearnedController {
    pub params: PolicyParams,
    pub label: String,
    hidden: HiddenState,
}

impl LearnedController {
    pub fn new(params: PolicyParams, label: impl Into<String>) -> Self {
        let hidden = HiddenState::zeros(&params.config, 0);
        LearnedController {
            params,
            label: label.into(),
            hidden,
        }
    }
}

impl Controller for LearnedController {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn reset(&mut self, config: &ScenarioConfig, _seed: u64) -> Result<()> {
        self.hidden = HiddenState::zeros(&self.params.config, config.n_humans);
        Ok(())
    }

    fn act(&mut self, obs: &Observation, _config: &ScenarioConfig) -> Result<Vec2> {
        let (out, hidden) = forward(&self.params, obs, &self.hidden)?;
        self.hidden = hidden;
        Ok(Vec2::new(out.action_mean[0], out.action_mean[1]))
    }
}

/// The robot runs ORCA and takes full responsibility for avoidance, since
/// humans do not react to it.
pub struct OrcaController {
    pub params: OrcaParams,
}

impl Controller for OrcaController {
    fn name(&self) -> String {
        "orca".into()
    }

    fn reset(&mut self, _config: &ScenarioConfig, _seed: u64) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, obs: &Observation, config: &ScenarioConfig) -> Result<Vec2> {
        let me = robot_view(obs);
        let preferred = me.preferred_velocity(config.dt);
        Ok(orca_velocity_with(
            &me,
            preferred,
            &believed_humans(obs),
            &self.params,
            config.dt,
            1.0,
        ))
    }
}

pub struct SocialForceController {
    pub params: SocialForceParams,
    rng: ChaCha8Rng,
}

impl SocialForceController {
    pub fn new(params: SocialForceParams) -> Self {
        SocialForceController {
            params,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl Controller for SocialForceController {
    fn name(&self) -> String {
        "sf".into()
    }

    fn reset(&mut self, _config: &ScenarioConfig, seed: u64) -> Result<()> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(())
    }

    fn act(&mut self, obs: &Observation, config: &ScenarioConfig) -> Result<Vec2> {
        Ok(social_force_velocity(
            &robot_view(obs),
            &believed_humans(obs),
            &self.params,
            config.dt,
            &mut self.rng,
        ))
    }
}

/// Full speed straight at the goal, ignoring everyone.
pub struct GoStraight;

impl Controller for GoStraight {
    fn name(&self) -> String {
        "straight".into()
    }

    fn reset(&mut self, _config: &ScenarioConfig, _seed: u64) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, obs: &Observation, config: &ScenarioConfig) -> Result<Vec2> {
        Ok(robot_view(obs).preferred_velocity(config.dt))
    }
}

/// Never moves.
pub struct Stationary;

impl Controller for Stationary {
    fn name(&self) -> String {
        "zero".into()
    }

    fn reset(&mut self, _config: &ScenarioConfig, _seed: u64) -> Result<()> {
        Ok(())
    }

    fn act(&mut self, _obs: &Observation, _config: &ScenarioConfig) -> Result<Vec2> {
        Ok(Vec2::ZERO)
    }
}

/// Names accepted by [`baseline`].
pub const BASELINES: [&str; 4] = ["orca", "sf", "straight", "zero"];

#[derive(Debug)]
pub struct UnknownBaseline(pub String);

impl fmt::Display for UnknownBaseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown controller `{}`; available: {}",
            self.0,
            BASELINES.join(", ")
        )
    }
}

/// Builds a model-based baseline by name.
pub fn baseline(name: &str) -> Result<Box<dyn Controller>> {
    Ok(match name {
        "orca" => Box::new(OrcaController {
            params: OrcaParams::default(),
        }),
        "sf" | "social-force" => Box::new(SocialForceController::new(SocialForceParams::default())),
        "straight" | "go-straight" => Box::new(GoStraight),
        "zero" => Box::new(Stationary),
        other => {
            return Err(Error::InvalidInput(
                UnknownBaseline(other.to_string()).to_string(),
            ))
        }
    })
}
