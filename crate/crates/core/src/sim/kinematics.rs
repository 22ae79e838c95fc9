use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Holonomic single-integrator step. The desired velocity is clipped to
/// `v_max` and held for `dt` seconds; returns `(position, velocity)`.
pub fn step_kinematics(position: Vec2, action: Vec2, v_max: f64, dt: f64) -> Result<(Vec2, Vec2)> {
    if !action.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite action ({}, {})",
            action.x, action.y
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    let velocity = action.clamp_length(v_max);
    let next = Vec2::new(position.x + velocity.x * dt, position.y + velocity.y * dt);
    Ok((next, velocity))
}
