use crate::geom::Vec2;

const EPSILON: f64 = 1e-9;

// A half-plane constraint: velocities `v` with det(direction, point - v) <= 0
// are valid, i.e. the valid side is to the left of `direction`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub point: Vec2,
    pub direction: Vec2,
}

/// Velocity nearest to `preferred` that has length at most `max_speed` and
/// satisfies every half-plane in `lines`. When the constraints are jointly
/// infeasible, the half-planes are pushed back at equal speed until a
/// point satisfies all of them (the least-violating velocity).
pub fn solve_linear_program(lines: &[Line], preferred: Vec2, max_speed: f64) -> Vec2 {
    let (failed, result) = linear_program_2d(lines, max_speed, preferred, false);
    if failed < lines.len() {
        linear_program_3d(lines, failed, max_speed, result)
    } else {
        result
    }
}

// Optimises along line `line_no` subject to the lines before it and the
// speed circle. Returns None when the 1D program is infeasible.
fn linear_program_1d(
    lines: &[Line],
    line_no: usize,
    radius: f64,
    opt: Vec2,
    direction_opt: bool,
) -> Option<Vec2> {
    let line = lines[line_no];
    let dot = line.point.dot(line.direction);
    let discriminant = dot * dot + radius * radius - line.point.length_squared();
    if discriminant < 0.0 {
        return None;
    }
    let sqrt_d = discriminant.sqrt();
    let mut t_left = -dot - sqrt_d;
    let mut t_right = -dot + sqrt_d;

    for other in &lines[..line_no] {
        let denominator = line.direction.det(other.direction);
        let numerator = other.direction.det(line.point - other.point);
        if denominator.abs() <= EPSILON {
            // Parallel lines.
            if numerator < 0.0 {
                return None;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return None;
        }
    }

    let t = if direction_opt {
        if opt.dot(line.direction) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        line.direction.dot(opt - line.point).clamp(t_left, t_right)
    };
    Some(line.point + line.direction * t)
}

// Returns (index of first failing line or lines.len(), best result so far).
fn linear_program_2d(lines: &[Line], radius: f64, opt: Vec2, direction_opt: bool) -> (usize, Vec2) {
    let mut result = if direction_opt {
        opt * radius
    } else if opt.length_squared() > radius * radius {
        opt.normalize_or_zero() * radius
    } else {
        opt
    };
    for (i, line) in lines.iter().enumerate() {
        if line.direction.det(line.point - result) > 0.0 {
            match linear_program_1d(lines, i, radius, opt, direction_opt) {
                Some(r) => result = r,
                None => return (i, result),
            }
        }
    }
    (lines.len(), result)
}

fn linear_program_3d(lines: &[Line], begin: usize, radius: f64, mut result: Vec2) -> Vec2 {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        let li = lines[i];
        if li.direction.det(li.point - result) <= distance {
            continue;
        }
        let mut projected = Vec::with_capacity(i);
        for lj in &lines[..i] {
            let determinant = li.direction.det(lj.direction);
            let point = if determinant.abs() <= EPSILON {
                if li.direction.dot(lj.direction) > 0.0 {
                    continue;
                }
                (li.point + lj.point) * 0.5
            } else {
                li.point + li.direction * (lj.direction.det(li.point - lj.point) / determinant)
            };
            projected.push(Line {
                point,
                direction: (lj.direction - li.direction).normalize_or_zero(),
            });
        }
        let fallback = result;
        let (failed, r) = linear_program_2d(
            &projected,
            radius,
            Vec2::new(-li.direction.y, li.direction.x),
            true,
        );
        // Only numerical error can make this fail; keep the previous value.
        result = if failed < projected.len() {
            fallback
        } else {
            r
        };
        distance = li.direction.det(li.point - result);
    }
    result
}
