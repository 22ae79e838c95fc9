use serde::{Deserialize, Serialize};

use super::linear_program::{solve_linear_program, Line};
use super::AgentView;
use crate::error::{Error, Result};
use crate::geom::Vec2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrcaParams {
    /// Seconds ahead over which collisions are avoided.
    pub time_horizon: f64,
    pub neighbor_dist: f64,
    pub max_neighbors: usize,
    /// Extra clearance added to the combined radius of each pair.
    pub safety_buffer: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        OrcaParams {
            time_horizon: 5.0,
            neighbor_dist: 10.0,
            max_neighbors: 10,
            safety_buffer: 0.01,
        }
    }
}

impl OrcaParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("time_horizon", self.time_horizon),
            ("neighbor_dist", self.neighbor_dist),
            ("safety_buffer", self.safety_buffer),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("must be > 0, got {v}"),
                ));
            }
        }
        if self.max_neighbors == 0 {
            return Err(Error::config(
                format!("{prefix}.max_neighbors"),
                "must be >= 1",
            ));
        }
        Ok(())
    }
}

/// Half-plane constraints induced on `agent` by each neighbour within
/// `neighbor_dist` (nearest `max_neighbors` first). `responsibility` is
/// the share of the avoidance this agent takes on: 0.5 for mutually
/// reciprocating agents, 1.0 when the neighbour will not react.
pub fn orca_lines(
    agent: &AgentView,
    neighbors: &[AgentView],
    params: &OrcaParams,
    dt: f64,
    responsibility: f64,
) -> Vec<Line> {
    let mut near: Vec<(f64, &AgentView)> = neighbors
        .iter()
        .map(|n| ((n.position - agent.position).length_squared(), n))
        .filter(|(d2, _)| *d2 < params.neighbor_dist * params.neighbor_dist)
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    near.truncate(params.max_neighbors);

    let inv_horizon = 1.0 / params.time_horizon;
    near.into_iter()
        .map(|(dist_sq, other)| {
            let rel_pos = other.position - agent.position;
            let rel_vel = agent.velocity - other.velocity;
            let combined = agent.radius + other.radius + params.safety_buffer;
            let combined_sq = combined * combined;

            let (direction, u) = if dist_sq > combined_sq {
                // Vector from the cutoff centre to the relative velocity.
                let w = rel_vel - rel_pos * inv_horizon;
                let w_len_sq = w.length_squared();
                let dot1 = w.dot(rel_pos);
                if dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq {
                    // Project on the cutoff circle.
                    let w_len = w_len_sq.sqrt();
                    let unit_w = w / w_len;
                    (
                        Vec2::new(unit_w.y, -unit_w.x),
                        unit_w * (combined * inv_horizon - w_len),
                    )
                } else {
                    // Project on the nearer leg of the cone.
                    let leg = (dist_sq - combined_sq).sqrt();
                    let direction = if rel_pos.det(w) > 0.0 {
                        Vec2::new(
                            rel_pos.x * leg - rel_pos.y * combined,
                            rel_pos.x * combined + rel_pos.y * leg,
                        ) / dist_sq
                    } else {
                        -Vec2::new(
                            rel_pos.x * leg + rel_pos.y * combined,
                            -rel_pos.x * combined + rel_pos.y * leg,
                        ) / dist_sq
                    };
                    let dot2 = rel_vel.dot(direction);
                    (direction, direction * dot2 - rel_vel)
                }
            } else {
                // Already overlapping: resolve within one timestep.
                let inv_dt = 1.0 / dt;
                let w = rel_vel - rel_pos * inv_dt;
                let w_len = w.length();
                let unit_w = w.normalize_or_zero();
                (
                    Vec2::new(unit_w.y, -unit_w.x),
                    unit_w * (combined * inv_dt - w_len),
                )
            };
            Line {
                point: agent.velocity + u * responsibility,
                direction,
            }
        })
        .collect()
}

/// ORCA velocity towards an explicit preferred velocity.
pub fn orca_velocity_with(
    agent: &AgentView,
    preferred: Vec2,
    neighbors: &[AgentView],
    params: &OrcaParams,
    dt: f64,
    responsibility: f64,
) -> Vec2 {
    let lines = orca_lines(agent, neighbors, params, dt, responsibility);
    // A preferred velocity of exactly v_max can measure one ulp long.
    if lines.is_empty() && preferred.length() <= agent.v_max * (1.0 + 1e-12) {
        return preferred;
    }
    solve_linear_program(&lines, preferred, agent.v_max).clamp_length(agent.v_max)
}

/// Reciprocal ORCA velocity for `agent` heading to its goal.
pub fn orca_velocity(
    agent: &AgentView,
    neighbors: &[AgentView],
    params: &OrcaParams,
    dt: f64,
) -> Vec2 {
    orca_velocity_with(
        agent,
        agent.preferred_velocity(dt),
        neighbors,
        params,
        dt,
        0.5,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(x: f64, y: f64, gx: f64, gy: f64) -> AgentView {
        AgentView {
            position: Vec2::new(x, y),
            velocity: Vec2::ZERO,
            radius: 0.3,
            v_max: 1.0,
            goal: Vec2::new(gx, gy),
        }
    }

    #[test]
    fn no_neighbors_gives_preferred() {
        let a = agent(0.0, 0.0, 5.0, 2.0);
        let p = OrcaParams::default();
        assert_eq!(orca_velocity(&a, &[], &p, 0.25), a.preferred_velocity(0.25));
    }

    #[test]
    fn near_goal_lands_on_goal() {
        let a = agent(0.0, 0.0, 0.1, -0.05);
        let v = orca_velocity(&a, &[], &OrcaParams::default(), 0.25);
        assert!((a.position + v * 0.25 - a.goal).length() < 1e-12);
    }

    #[test]
    fn far_neighbor_is_ignored() {
        let a = agent(0.0, 0.0, 5.0, 0.0);
        let far = agent(30.0, 0.0, 30.0, 0.0);
        let p = OrcaParams::default();
        assert_eq!(
            orca_velocity(&a, &[far], &p, 0.25),
            a.preferred_velocity(0.25)
        );
    }

    #[test]
    fn head_on_pair_deflects() {
        let mut a = agent(-2.0, 0.0, 5.0, 0.0);
        let mut b = agent(2.0, 0.0, -5.0, 0.0);
        a.velocity = Vec2::new(1.0, 0.0);
        b.velocity = Vec2::new(-1.0, 0.0);
        let p = OrcaParams::default();
        let va = orca_velocity(&a, &[b], &p, 0.25);
        let vb = orca_velocity(&b, &[a], &p, 0.25);
        assert_eq!(va, -vb);
        assert!(va.y.abs() > 1e-3, "{va:?}");
        assert!(va.length() <= 1.0 + 1e-12);
    }

    #[test]
    fn max_neighbors_limits_constraints() {
        let a = agent(0.0, 0.0, 5.0, 0.0);
        let ns: Vec<_> = (1..=5).map(|i| agent(i as f64, 3.0, 0.0, 0.0)).collect();
        let p = OrcaParams {
            max_neighbors: 2,
            ..OrcaParams::default()
        };
        assert_eq!(orca_lines(&a, &ns, &p, 0.25, 0.5).len(), 2);
    }
}
