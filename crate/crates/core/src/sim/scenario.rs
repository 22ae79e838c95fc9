use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{EnvKind, ScenarioConfig};
use super::state::{HumanState, RobotState, WorldState};
use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Rejection-sampling budget per placed agent or group.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 2000;

struct Disk {
    center: Vec2,
    radius: f64,
}

fn clear_of(disks: &[Disk], center: Vec2, radius: f64, margin: f64) -> bool {
    disks
        .iter()
        .all(|d| d.center.distance(center) >= d.radius + radius + margin)
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// A point on the human circle with uniform jitter.
pub fn sample_circle_point(config: &ScenarioConfig, rng: &mut impl Rng) -> Vec2 {
    let angle = rng.random::<f64>() * TAU;
    let noise = config.human.placement_noise;
    let jitter = if noise > 0.0 {
        Vec2::new(
            rng.random_range(-noise..noise),
            rng.random_range(-noise..noise),
        )
    } else {
        Vec2::ZERO
    };
    Vec2::from_angle(angle) * config.circle_radius + jitter
}

/// Fresh goal for a dynamic human: a circle point at least one circle
/// radius away from where it stands.
pub fn sample_human_goal(config: &ScenarioConfig, position: Vec2, rng: &mut impl Rng) -> Vec2 {
    let mut goal = sample_circle_point(config, rng);
    for _ in 0..16 {
        if goal.distance(position) >= config.circle_radius {
            break;
        }
        goal = sample_circle_point(config, rng);
    }
    goal
}

/// Radius of the ring on which a static group's members sit.
fn group_ring_radius(size: usize, member_radius: f64, margin: f64) -> f64 {
    if size <= 1 {
        0.0
    } else {
        (2.0 * member_radius + margin) / (2.0 * (PI / size as f64).sin())
    }
}

fn placement_error(what: &str) -> Error {
    Error::ScenarioGeneration {
        attempts: MAX_PLACEMENT_ATTEMPTS,
        reason: format!("could not place {what} without overlap"),
    }
}

/// Generates the initial world for `(config, seed)`. Deterministic.
pub fn generate_scenario(config: &ScenarioConfig, seed: u64) -> Result<WorldState> {
    config.validate("scenario")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = config.spawn_margin;
    let r = config.circle_radius;
    let mut humans: Vec<HumanState> = Vec::with_capacity(config.n_humans);
    let mut bodies: Vec<Disk> = Vec::new();

    if config.env_kind == EnvKind::Group && config.n_static_groups > 0 {
        let max_r = config.human.radius_range[1];
        let ring = group_ring_radius(config.group_size, max_r, margin);
        let bound = ring + max_r;
        let mut groups: Vec<Disk> = Vec::new();
        let placement_radius = (r - bound - 1.0).max(0.0);
        for g in 0..config.n_static_groups {
            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let rho = placement_radius * rng.random::<f64>().sqrt();
                let center = Vec2::from_angle(rng.random::<f64>() * TAU) * rho;
                if clear_of(&groups, center, bound, margin) {
                    placed = Some(center);
                    break;
                }
            }
            let center = placed.ok_or_else(|| placement_error(&format!("static group {g}")))?;
            groups.push(Disk {
                center,
                radius: bound,
            });
            let phase = rng.random::<f64>() * TAU;
            for k in 0..config.group_size {
                let angle = phase + TAU * k as f64 / config.group_size as f64;
                let position = center + Vec2::from_angle(angle) * ring;
                let radius = uniform(&mut rng, config.human.radius_range);
                let v_max = uniform(&mut rng, config.human.v_max_range);
                bodies.push(Disk {
                    center: position,
                    radius,
                });
                humans.push(HumanState {
                    position,
                    velocity: Vec2::ZERO,
                    goal: position,
                    radius,
                    v_max,
                    is_static: true,
                });
            }
        }
    }

    let n_dynamic = config.n_humans - humans.len();
    let mut goals: Vec<Disk> = Vec::new();
    for i in 0..n_dynamic {
        let radius = uniform(&mut rng, config.human.radius_range);
        let v_max = uniform(&mut rng, config.human.v_max_range);
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let position = sample_circle_point(config, &mut rng);
            let goal = -position;
            if clear_of(&bodies, position, radius, margin)
                && clear_of(&goals, goal, radius, margin)
                && clear_of(&bodies, goal, radius, margin)
            {
                placed = Some((position, goal));
                break;
            }
        }
        let (position, goal) =
            placed.ok_or_else(|| placement_error(&format!("dynamic human {i}")))?;
        bodies.push(Disk {
            center: position,
            radius,
        });
        goals.push(Disk {
            center: goal,
            radius,
        });
        humans.push(HumanState {
            position,
            velocity: Vec2::ZERO,
            goal,
            radius,
            v_max,
            is_static: false,
        });
    }

    let rho = config.robot.radius;
    let statics: Vec<Disk> = humans
        .iter()
        .filter(|h| h.is_static)
        .map(|h| Disk {
            center: h.position,
            radius: h.radius,
        })
        .collect();
    let mut robot = None;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let start = Vec2::new(rng.random_range(-r..r), rng.random_range(-r..r));
        let goal = Vec2::new(rng.random_range(-r..r), rng.random_range(-r..r));
        if start.distance(goal) >= config.robot.min_goal_distance
            && clear_of(&bodies, start, rho, margin)
            && clear_of(&statics, goal, rho, margin)
        {
            robot = Some((start, goal));
            break;
        }
    }
    let (start, goal) = robot.ok_or_else(|| placement_error("robot"))?;

    Ok(WorldState {
        robot: RobotState {
            position: start,
            velocity: Vec2::ZERO,
            goal,
            v_max: config.robot.v_max,
            theta: (goal - start).angle(),
            radius: rho,
        },
        humans,
        t: 0,
        config: config.clone(),
    })
}
