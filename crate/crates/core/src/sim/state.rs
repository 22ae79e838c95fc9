use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::geom::Vec2;

/// Full robot state; the policy sees all of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub goal: Vec2,
    pub v_max: f64,
    /// Heading angle in radians.
    pub theta: f64,
    pub radius: f64,
}

impl RobotState {
    /// Robot node feature: `(px, py, vx, vy, gx, gy, v_max, theta, radius)`.
    pub fn node_feature(&self) -> [f64; 9] {
        [
            self.position.x,
            self.position.y,
            self.velocity.x,
            self.velocity.y,
            self.goal.x,
            self.goal.y,
            self.v_max,
            self.theta,
            self.radius,
        ]
    }

    pub fn goal_distance(&self) -> f64 {
        self.position.distance(self.goal)
    }
}

/// Ground-truth human state. Only `position` is ever observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub goal: Vec2,
    pub radius: f64,
    pub v_max: f64,
    /// Member of a static group; never moves towards a goal.
    pub is_static: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot: RobotState,
    pub humans: Vec<HumanState>,
    pub t: usize,
    pub config: ScenarioConfig,
}

impl WorldState {
    /// Minimum surface-to-surface separation between the robot and any
    /// human; `+inf` with no humans.
    pub fn min_separation(&self) -> f64 {
        self.humans
            .iter()
            .map(|h| h.position.distance(self.robot.position) - self.robot.radius - h.radius)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn robot_overlaps_any_human(&self) -> bool {
        self.humans.iter().any(|h| {
            let r = self.robot.radius + h.radius;
            (h.position - self.robot.position).length_squared() < r * r
        })
    }
}
