use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::geom::Vec2;
use crate::sim::Trajectory;

const SCALE: f64 = 40.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
];
const ROBOT_COLOR: &str = "#d62728";
const WEDGE_RADIUS: f64 = 2.0;

/// Extra context a trajectory CSV does not carry.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SvgOptions {
    pub robot_goal: Option<Vec2>,
    pub fov_deg: Option<f64>,
    /// Robot heading at the final pose; defaults to its last direction of
    /// motion.
    pub final_heading: Option<f64>,
}

fn fmt(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

/// Static picture of an episode: one `<path>` per agent, start markers, a
/// goal star, the robot disk at its final pose and its field-of-view wedge.
pub fn trajectory_svg(traj: &Trajectory, opts: &SvgOptions) -> String {
    let n = traj.n_agents();
    let mut pts: Vec<Vec2> = traj.samples.iter().map(|s| Vec2::new(s.px, s.py)).collect();
    if let Some(g) = opts.robot_goal {
        pts.push(g);
    }
    let pad = 1.5;
    let (mut lo, mut hi) = (Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0));
    for p in &pts {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    lo -= Vec2::new(pad, pad);
    hi += Vec2::new(pad, pad);
    let (w, h) = ((hi.x - lo.x) * SCALE, (hi.y - lo.y) * SCALE);
    let tx = |p: Vec2| (fmt((p.x - lo.x) * SCALE), fmt((hi.y - p.y) * SCALE));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        fmt(w),
        fmt(h),
        fmt(w),
        fmt(h)
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let robot_last = traj.last_sample(0);
    if let (Some(r), Some(fov)) = (robot_last, opts.fov_deg) {
        let pos = Vec2::new(r.px, r.py);
        let heading = opts.final_heading.unwrap_or_else(|| {
            traj.samples
                .iter()
                .rev()
                .filter(|s| s.agent_id == 0 && (s.vx != 0.0 || s.vy != 0.0))
                .map(|s| s.vy.atan2(s.vx))
                .next()
                .unwrap_or(0.0)
        });
        let half = fov.to_radians() / 2.0;
        let steps = ((fov / 5.0).ceil() as usize).max(2);
        let mut poly = Vec::new();
        if fov < 360.0 {
            poly.push(tx(pos));
        }
        for k in 0..=steps {
            let a = heading - half + 2.0 * half * k as f64 / steps as f64;
            poly.push(tx(pos + Vec2::from_angle(a) * WEDGE_RADIUS));
        }
        let points: Vec<String> = poly.iter().map(|(x, y)| format!("{x},{y}")).collect();
        let _ = writeln!(
            s,
            r##"<polygon class="fov" data-fov-deg="{}" data-heading-rad="{}" points="{}" fill="#d62728" fill-opacity="0.15" stroke="none"/>"##,
            fov,
            fmt(heading),
            points.join(" ")
        );
    }

    for id in 0..n {
        let path = traj.path(id);
        let color = if id == 0 {
            ROBOT_COLOR
        } else {
            COLORS[(id - 1) % COLORS.len()]
        };
        let mut d = String::new();
        for (k, p) in path.iter().enumerate() {
            let (x, y) = tx(*p);
            let _ = write!(d, "{}{x} {y}", if k == 0 { "M" } else { " L" });
        }
        let _ = writeln!(
            s,
            r#"<path class="agent" data-agent="{id}" d="{d}" fill="none" stroke="{color}" stroke-width="2"/>"#
        );
        if let Some(p) = path.first() {
            let _ = writeln!(
                s,
                r#"<rect class="start" data-agent="{id}" x="{}" y="{}" width="8" height="8" fill="{color}"/>"#,
                fmt((p.x - lo.x) * SCALE - 4.0),
                fmt((hi.y - p.y) * SCALE - 4.0)
            );
        }
        if id > 0 {
            if let Some(last) = traj.last_sample(id) {
                let (x, y) = tx(Vec2::new(last.px, last.py));
                let _ = writeln!(
                    s,
                    r#"<circle class="human" data-agent="{id}" cx="{x}" cy="{y}" r="{}" fill="none" stroke="{color}"/>"#,
                    fmt(last.radius * SCALE)
                );
            }
        }
    }

    if let Some(g) = opts.robot_goal {
        let star: Vec<String> = (0..10)
            .map(|k| {
                let r = if k % 2 == 0 { 0.35 } else { 0.15 };
                let a = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
                let (x, y) = tx(g + Vec2::from_angle(a) * r);
                format!("{x},{y}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon class="goal" points="{}" fill="{ROBOT_COLOR}"/>"#,
            star.join(" ")
        );
    }
    if let Some(r) = robot_last {
        let (x, y) = tx(Vec2::new(r.px, r.py));
        let _ = writeln!(
            s,
            r#"<circle class="robot" cx="{x}" cy="{y}" r="{}" fill="{ROBOT_COLOR}" fill-opacity="0.6"/>"#,
            fmt(r.radius * SCALE)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<stem>.csv` and `<stem>.svg`.
pub fn export_trajectory(traj: &Trajectory, opts: &SvgOptions, stem: &Path) -> Result<()> {
    traj.save_csv(&stem.with_extension("csv"))?;
    std::fs::write(stem.with_extension("svg"), trajectory_svg(traj, opts))?;
    Ok(())
}
