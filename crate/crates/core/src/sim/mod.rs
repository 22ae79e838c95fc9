//! Deterministic 2D crowd-navigation environment: kinematics, reward,
//! partial observability and scenario generation.

mod config;
mod env;
mod kinematics;
mod observe;
mod reward;
mod scenario;
mod state;
mod trajectory;

pub use config::{EnvKind, HumanConfig, HumanPolicy, RobotConfig, ScenarioConfig};
pub use env::CrowdEnv;
pub use kinematics::step_kinematics;
pub use observe::{in_fov, observe, spawn_snapshot, LastSeen, Observation};
pub use reward::{
    classify, compute_reward, reward_from_distances, StepOutcome, Terminal, COLLISION_PENALTY,
    DISCOMFORT_DIST, DISCOMFORT_SCALE, GOAL_REWARD, SHAPING_SCALE,
};
pub use scenario::{
    generate_scenario, sample_circle_point, sample_human_goal, MAX_PLACEMENT_ATTEMPTS,
};
pub use state::{HumanState, RobotState, WorldState};
pub use trajectory::{AgentSample, Trajectory, CSV_COLUMNS};

/// Length of the robot node feature vector.
pub const ROBOT_NODE_DIM: usize = 9;
/// Length of a spatial edge feature.
pub const SPATIAL_EDGE_DIM: usize = 2;
/// Length of the temporal edge feature.
pub const TEMPORAL_EDGE_DIM: usize = 2;
