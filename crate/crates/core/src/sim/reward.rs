use serde::{Deserialize, Serialize};

use super::state::WorldState;

pub const COLLISION_PENALTY: f64 = -20.0;
pub const GOAL_REWARD: f64 = 10.0;
pub const DISCOMFORT_DIST: f64 = 0.25;
pub const DISCOMFORT_SCALE: f64 = 2.5;
pub const SHAPING_SCALE: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminal {
    Running,
    ReachGoal,
    Collision,
    Timeout,
}

impl Terminal {
    pub fn is_done(self) -> bool {
        self != Terminal::Running
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub terminal: Terminal,
    /// Minimum robot-human surface separation (m); `+inf` without humans.
    pub d_min: f64,
    /// Robot-goal distance after the step (m).
    pub d_goal: f64,
}

/// Piecewise reward, cases checked in order: collision, discomfort, goal,
/// potential shaping.
pub fn reward_from_distances(d_min: f64, d_goal: f64, d_goal_prev: f64, robot_radius: f64) -> f64 {
    if d_min < 0.0 {
        COLLISION_PENALTY
    } else if d_min > 0.0 && d_min < DISCOMFORT_DIST {
        DISCOMFORT_SCALE * (d_min - DISCOMFORT_DIST)
    } else if d_goal <= robot_radius {
        GOAL_REWARD
    } else {
        SHAPING_SCALE * (-d_goal + d_goal_prev)
    }
}

/// Terminal classification; a collision takes precedence over reaching the
/// goal in the same step.
pub fn classify(d_min: f64, d_goal: f64, robot_radius: f64, t: usize, horizon: usize) -> Terminal {
    if d_min < 0.0 {
        Terminal::Collision
    } else if d_goal <= robot_radius {
        Terminal::ReachGoal
    } else if t >= horizon {
        Terminal::Timeout
    } else {
        Terminal::Running
    }
}

/// Reward and terminal status for the transition `prev -> cur`.
pub fn compute_reward(prev: &WorldState, cur: &WorldState) -> StepOutcome {
    let d_min = cur.min_separation();
    let d_goal = cur.robot.goal_distance();
    let d_goal_prev = prev.robot.goal_distance();
    let rho = cur.robot.radius;
    StepOutcome {
        reward: reward_from_distances(d_min, d_goal, d_goal_prev, rho),
        terminal: classify(d_min, d_goal, rho, cur.t, cur.config.horizon),
        d_min,
        d_goal,
    }
}
