use serde::{Deserialize, Serialize};

use super::state::WorldState;
use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Vec2};

/// Most recent sighting of a human, used to extrapolate it while hidden.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LastSeen {
    pub position: Vec2,
    /// Finite-difference velocity estimate; never fed to the network.
    pub velocity: Vec2,
    /// Timestep of the sighting.
    pub t: usize,
}

/// What the robot policy receives at one timestep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub robot_node: [f64; 9],
    /// Row `i`: believed position of human `i` minus robot position.
    pub spatial_edges: Vec<[f64; 2]>,
    /// Robot velocity.
    pub temporal_edge: [f64; 2],
    pub visible: Vec<bool>,
    pub last_seen: Vec<LastSeen>,
}

impl Observation {
    pub fn n_humans(&self) -> usize {
        self.spatial_edges.len()
    }

    pub fn robot_position(&self) -> Vec2 {
        Vec2::new(self.robot_node[0], self.robot_node[1])
    }

    /// Believed absolute position of human `i`.
    pub fn believed_position(&self, i: usize) -> Vec2 {
        let e = self.spatial_edges[i];
        self.robot_position() + Vec2::new(e[0], e[1])
    }
}

/// The free observation granted at spawn: every human seen at rest.
pub fn spawn_snapshot(world: &WorldState) -> Vec<LastSeen> {
    world
        .humans
        .iter()
        .map(|h| LastSeen {
            position: h.position,
            velocity: Vec2::ZERO,
            t: world.t,
        })
        .collect()
}

/// True if a point at `relative` (from the robot centre) lies inside the
/// field of view centred on `heading`.
pub fn in_fov(relative: Vec2, heading: f64, fov_deg: f64) -> bool {
    if fov_deg >= 360.0 {
        return true;
    }
    let bearing = wrap_angle(relative.angle() - heading);
    bearing.abs() <= fov_deg.to_radians() / 2.0
}

/// Builds the observation for `world`, refreshing sightings of visible
/// humans and extrapolating hidden ones along their last estimated
/// velocity.
pub fn observe(
    world: &WorldState,
    heading: f64,
    fov_deg: f64,
    prev: &[LastSeen],
) -> Result<Observation> {
    if !(fov_deg > 0.0 && fov_deg <= 360.0) {
        return Err(Error::InvalidInput(format!(
            "fov_deg must be in (0, 360], got {fov_deg}"
        )));
    }
    if prev.len() != world.humans.len() {
        return Err(Error::shape("last_seen", world.humans.len(), prev.len()));
    }
    let dt = world.config.dt;
    let robot = &world.robot;
    let n = world.humans.len();
    let mut spatial_edges = Vec::with_capacity(n);
    let mut visible = Vec::with_capacity(n);
    let mut last_seen = Vec::with_capacity(n);

    for (human, seen) in world.humans.iter().zip(prev) {
        let is_visible = in_fov(human.position - robot.position, heading, fov_deg);
        let elapsed = world.t.saturating_sub(seen.t) as f64;
        let (believed, record) = if is_visible {
            let velocity = if elapsed > 0.0 {
                (human.position - seen.position) / (elapsed * dt)
            } else {
                seen.velocity
            };
            (
                human.position,
                LastSeen {
                    position: human.position,
                    velocity,
                    t: world.t,
                },
            )
        } else {
            (seen.position + seen.velocity * (elapsed * dt), *seen)
        };
        let rel = believed - robot.position;
        spatial_edges.push([rel.x, rel.y]);
        visible.push(is_visible);
        last_seen.push(record);
    }

    Ok(Observation {
        robot_node: robot.node_feature(),
        spatial_edges,
        temporal_edge: [robot.velocity.x, robot.velocity.y],
        visible,
        last_seen,
    })
}
