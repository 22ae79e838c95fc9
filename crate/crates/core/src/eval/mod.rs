//! Batch evaluation on seeded test scenarios, outcome statistics and
//! trajectory export.

mod controller;
mod report;
mod svg;

pub use controller::{
    baseline, Controller, GoStraight, LearnedController, OrcaController, SocialForceController,
    Stationary, ASSUMED_HUMAN_RADIUS, BASELINES,
};
pub use report::{outcome_rates, EpisodeRecord, EvalReport};
pub use svg::{export_trajectory, trajectory_svg, SvgOptions};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::ppo::TRAIN_SEED_BIT;
use crate::sim::{CrowdEnv, ScenarioConfig, Terminal, Trajectory};

/// The six evaluation settings: three fields of view with 5 humans and
/// three crowd sizes with static groups at 360 degrees.
pub const SUITES: [&str; 6] = [
    "fov-90", "fov-180", "fov-360", "group-10", "group-15", "group-20",
];

pub fn suite(name: &str) -> Result<ScenarioConfig> {
    let bad = || {
        Error::InvalidInput(format!(
            "unknown suite `{name}`; available: {}",
            SUITES.join(", ")
        ))
    };
    let (kind, value) = name.split_once('-').ok_or_else(bad)?;
    let value: usize = value.parse().map_err(|_| bad())?;
    let config = match (kind, value) {
        ("fov", 90 | 180 | 360) => ScenarioConfig::fov(value as f64),
        ("group", 10 | 15 | 20) => ScenarioConfig::group(value),
        _ => return Err(bad()),
    };
    Ok(config)
}

/// One evaluated episode with everything needed to draw it.
#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    pub record: EpisodeRecord,
    pub trajectory: Trajectory,
    pub robot_goal: Vec2,
    pub final_heading: f64,
    pub fov_deg: f64,
}

impl EpisodeTrace {
    pub fn svg_options(&self) -> SvgOptions {
        SvgOptions {
            robot_goal: Some(self.robot_goal),
            fov_deg: Some(self.fov_deg),
            final_heading: Some(self.final_heading),
        }
    }
}

/// Runs one episode on scenario `seed`.
pub fn run_episode(
    controller: &mut dyn Controller,
    config: &ScenarioConfig,
    seed: u64,
    record_trajectory: bool,
) -> Result<EpisodeTrace> {
    if seed & TRAIN_SEED_BIT != 0 {
        return Err(Error::InvalidInput(format!(
            "evaluation seed {seed} lies in the training seed range"
        )));
    }
    let mut env = CrowdEnv::new(config, seed)?;
    controller.reset(config, seed)?;
    let mut trajectory = Trajectory::default();
    let mut total_reward = 0.0;
    let outcome = loop {
        let action = controller.act(env.observation(), config)?;
        let out = env.step(action)?;
        total_reward += out.reward;
        if record_trajectory {
            trajectory.record(env.world(), env.observation());
        }
        if out.terminal.is_done() {
            break out.terminal;
        }
    };
    let steps = env.world().t;
    Ok(EpisodeTrace {
        record: EpisodeRecord {
            seed,
            outcome,
            steps,
            total_reward,
            nav_time: (outcome == Terminal::ReachGoal).then_some(steps as f64 * config.dt),
        },
        trajectory,
        robot_goal: env.world().robot.goal,
        final_heading: env.world().robot.theta,
        fov_deg: config.fov_deg,
    })
}

/// Evaluates `n_episodes` scenarios with seeds `seed_base..seed_base + n`.
/// Returned traces are empty unless `record_trajectories` is set.
pub fn evaluate(
    controller: &mut dyn Controller,
    config: &ScenarioConfig,
    suite_name: &str,
    n_episodes: usize,
    seed_base: u64,
    record_trajectories: bool,
) -> Result<(EvalReport, Vec<EpisodeTrace>)> {
    config.validate("scenario")?;
    let end = seed_base
        .checked_add(n_episodes as u64)
        .filter(|&e| e <= TRAIN_SEED_BIT)
        .ok_or_else(|| {
            Error::InvalidInput("evaluation seeds overflow into the training seed range".into())
        })?;
    let mut records = Vec::with_capacity(n_episodes);
    let mut traces = Vec::new();
    for seed in seed_base..end {
        let trace = run_episode(controller, config, seed, record_trajectories)?;
        records.push(trace.record.clone());
        if record_trajectories {
            traces.push(trace);
        }
    }
    let report = EvalReport::from_episodes(&controller.name(), suite_name, records)?;
    Ok((report, traces))
}
