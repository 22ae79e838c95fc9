//! Scripted velocity controllers used for the simulated humans and as
//! robot baselines.

mod linear_program;
mod orca;
mod social_force;

pub use linear_program::{solve_linear_program, Line};
pub use orca::{orca_lines, orca_velocity, orca_velocity_with, OrcaParams};
pub use social_force::{social_force_velocity, SocialForceParams};

use crate::geom::Vec2;

/// The kinematic view of an agent that a controller reasons about.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentView {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub v_max: f64,
    pub goal: Vec2,
}

impl AgentView {
    /// Unit vector to the goal scaled by `v_max`, shortened so that the
    /// agent lands exactly on its goal when it is within one step.
    pub fn preferred_velocity(&self, dt: f64) -> Vec2 {
        let to_goal = self.goal - self.position;
        let dist = to_goal.length();
        if dist == 0.0 {
            Vec2::ZERO
        } else if dist <= self.v_max * dt {
            to_goal / dt
        } else {
            to_goal * (self.v_max / dist)
        }
    }
}
