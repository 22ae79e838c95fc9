use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentView;
use crate::error::{Error, Result};
use crate::geom::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocialForceParams {
    /// Time constant of the goal-attraction term (s).
    pub relaxation_time: f64,
    pub repulsion_strength: f64,
    /// Length scale of the exponential repulsion (m).
    pub repulsion_range: f64,
}

impl Default for SocialForceParams {
    fn default() -> Self {
        SocialForceParams {
            relaxation_time: 0.5,
            repulsion_strength: 2.0,
            repulsion_range: 1.0,
        }
    }
}

impl SocialForceParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("relaxation_time", self.relaxation_time),
            ("repulsion_strength", self.repulsion_strength),
            ("repulsion_range", self.repulsion_range),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("must be > 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Magnitude of the pairwise repulsion at centre distance `dist`.
    pub fn repulsion(&self, combined_radius: f64, dist: f64) -> f64 {
        self.repulsion_strength * ((combined_radius - dist) / self.repulsion_range).exp()
    }
}

/// One explicit-Euler step of the social force model; the returned
/// velocity is clipped to the agent's `v_max`. Coincident neighbours push
/// along a direction drawn from `rng`.
pub fn social_force_velocity(
    agent: &AgentView,
    neighbors: &[AgentView],
    params: &SocialForceParams,
    dt: f64,
    rng: &mut impl Rng,
) -> Vec2 {
    let preferred = agent.preferred_velocity(dt);
    let mut force = (preferred - agent.velocity) / params.relaxation_time;
    for other in neighbors {
        let away = agent.position - other.position;
        let dist = away.length();
        let direction = if dist > 0.0 {
            away / dist
        } else {
            Vec2::from_angle(rng.random::<f64>() * std::f64::consts::TAU)
        };
        force += direction * params.repulsion(agent.radius + other.radius, dist);
    }
    (agent.velocity + force * dt).clamp_length(agent.v_max)
}
