use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::HumanPolicy;
use super::kinematics::step_kinematics;
use super::observe::{observe, spawn_snapshot, LastSeen, Observation};
use super::reward::{compute_reward, StepOutcome, Terminal};
use super::scenario::{generate_scenario, sample_human_goal};
use super::state::{HumanState, WorldState};
use super::ScenarioConfig;
use crate::agents::{orca_velocity, social_force_velocity, AgentView};
use crate::error::{Error, Result};
use crate::geom::Vec2;

fn human_view(h: &HumanState) -> AgentView {
    AgentView {
        position: h.position,
        velocity: h.velocity,
        radius: h.radius,
        v_max: h.v_max,
        goal: if h.is_static { h.position } else { h.goal },
    }
}

/// One running episode: ground truth, the robot's sighting cache and the
/// episode's private RNG stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrowdEnv {
    world: WorldState,
    observation: Observation,
    rng: ChaCha8Rng,
    terminal: Terminal,
    seed: u64,
}

impl CrowdEnv {
    pub fn new(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        let world = generate_scenario(config, seed)?;
        let observation = observe(
            &world,
            world.robot.theta,
            config.fov_deg,
            &spawn_snapshot(&world),
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(CrowdEnv {
            world,
            observation,
            rng,
            terminal: Terminal::Running,
            seed,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn terminal(&self) -> Terminal {
        self.terminal
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn last_seen(&self) -> &[LastSeen] {
        &self.observation.last_seen
    }

    /// Humans' next velocities. They react to each other, and to the robot
    /// only when the scenario makes it visible to them. Static group members
    /// stay put; the others still treat them as ORCA neighbours.
    fn human_actions(&mut self) -> Vec<Vec2> {
        let cfg = &self.world.config;
        let dt = cfg.dt;
        let views: Vec<AgentView> = self.world.humans.iter().map(human_view).collect();
        let mut others = Vec::with_capacity(views.len());
        let mut actions = Vec::with_capacity(views.len());
        for (i, me) in views.iter().enumerate() {
            if self.world.humans[i].is_static {
                actions.push(Vec2::ZERO);
                continue;
            }
            others.clear();
            others.extend(
                views
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, v)| *v),
            );
            if cfg.human.robot_visible {
                let r = &self.world.robot;
                others.push(AgentView {
                    position: r.position,
                    velocity: r.velocity,
                    radius: r.radius,
                    v_max: r.v_max,
                    goal: r.goal,
                });
            }
            let v = match &cfg.human.policy {
                HumanPolicy::Orca(p) => orca_velocity(me, &others, p, dt),
                HumanPolicy::SocialForce(p) => {
                    social_force_velocity(me, &others, p, dt, &mut self.rng)
                }
            };
            actions.push(v);
        }
        actions
    }

    /// Advances the episode by one timestep with the given robot velocity
    /// command.
    pub fn step(&mut self, action: Vec2) -> Result<StepOutcome> {
        if self.terminal.is_done() {
            return Err(Error::Contract(format!(
                "step called on a finished episode ({:?})",
                self.terminal
            )));
        }
        if !action.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite robot action ({}, {})",
                action.x, action.y
            )));
        }
        let human_actions = self.human_actions();
        let dt = self.world.config.dt;
        let prev = self.world.clone();

        let robot = &mut self.world.robot;
        let (p, v) = step_kinematics(robot.position, action, robot.v_max, dt)?;
        robot.position = p;
        robot.velocity = v;
        if v.length_squared() > 0.0 {
            robot.theta = v.angle();
        }
        for (h, a) in self.world.humans.iter_mut().zip(human_actions) {
            let (p, v) = step_kinematics(h.position, a, h.v_max, dt)?;
            h.position = p;
            h.velocity = v;
        }
        self.world.t += 1;

        let outcome = compute_reward(&prev, &self.world);

        let cfg = &self.world.config;
        for h in self.world.humans.iter_mut().filter(|h| !h.is_static) {
            let arrived = h.position.distance(h.goal) <= h.radius;
            let switch = self.rng.random::<f64>() < cfg.human.goal_change_prob;
            if arrived || switch {
                h.goal = sample_human_goal(cfg, h.position, &mut self.rng);
            }
        }

        self.observation = observe(
            &self.world,
            self.world.robot.theta,
            self.world.config.fov_deg,
            &self.observation.last_seen,
        )?;
        self.terminal = outcome.terminal;
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::ScenarioConfig;

    fn empty_config() -> ScenarioConfig {
        ScenarioConfig {
            n_humans: 0,
            ..ScenarioConfig::fov(360.0)
        }
    }

    #[test]
    fn reaches_goal_with_bonus() {
        let mut env = CrowdEnv::new(&empty_config(), 4).unwrap();
        let outcome = loop {
            let r = &env.world().robot;
            let out = env.step((r.goal - r.position).normalize_or_zero()).unwrap();
            if out.terminal.is_done() {
                break out;
            }
        };
        assert_eq!(outcome.terminal, Terminal::ReachGoal);
        assert_eq!(outcome.reward, 10.0);
        assert!(env.step(Vec2::ZERO).is_err());
    }

    #[test]
    fn idle_robot_times_out_at_horizon() {
        let mut cfg = empty_config();
        cfg.horizon = 7;
        let mut env = CrowdEnv::new(&cfg, 1).unwrap();
        for t in 1..=7 {
            let out = env.step(Vec2::ZERO).unwrap();
            assert_eq!(env.world().t, t);
            assert_eq!(out.terminal.is_done(), t == 7);
        }
        assert_eq!(env.terminal(), Terminal::Timeout);
    }

    #[test]
    fn arriving_human_gets_new_goal() {
        let mut cfg = ScenarioConfig::fov(360.0);
        cfg.n_humans = 1;
        cfg.human.goal_change_prob = 0.0;
        let mut env = CrowdEnv::new(&cfg, 11).unwrap();
        // Put the human right next to its goal.
        let goal = env.world.humans[0].goal;
        env.world.humans[0].position = goal + Vec2::new(0.05, 0.0);
        env.world.robot.position = Vec2::new(50.0, 50.0);
        env.world.robot.goal = Vec2::new(60.0, 50.0);
        env.step(Vec2::ZERO).unwrap();
        let h = &env.world().humans[0];
        assert_ne!(h.goal, goal);
        assert!(h.position.distance(h.goal) > h.radius);
    }

    #[test]
    fn rejects_nan_action() {
        let mut env = CrowdEnv::new(&empty_config(), 0).unwrap();
        assert!(env.step(Vec2::new(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn static_humans_never_move() {
        let cfg = ScenarioConfig::group(10);
        let mut env = CrowdEnv::new(&cfg, 5).unwrap();
        let start: Vec<_> = env.world().humans.iter().map(|h| h.position).collect();
        for _ in 0..40 {
            if env.step(Vec2::ZERO).unwrap().terminal.is_done() {
                break;
            }
        }
        for (h, s) in env.world().humans.iter().zip(start) {
            if h.is_static {
                assert_eq!(h.position, s);
            }
        }
    }
}
