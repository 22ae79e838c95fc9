use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::observe::Observation;
use super::state::WorldState;
use crate::error::{Error, Result};
use crate::geom::Vec2;

pub const CSV_COLUMNS: [&str; 8] = [
    "t",
    "agent_id",
    "px",
    "py",
    "vx",
    "vy",
    "radius",
    "visible_flag",
];

/// One agent at one timestep. Agent 0 is the robot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSample {
    pub t: usize,
    pub agent_id: usize,
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
    pub radius: f64,
    pub visible_flag: u8,
}

/// Per-step samples of every agent, recorded after each environment step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<AgentSample>,
}

impl Trajectory {
    pub fn record(&mut self, world: &WorldState, obs: &Observation) {
        let r = &world.robot;
        self.samples.push(AgentSample {
            t: world.t,
            agent_id: 0,
            px: r.position.x,
            py: r.position.y,
            vx: r.velocity.x,
            vy: r.velocity.y,
            radius: r.radius,
            visible_flag: 1,
        });
        for (i, h) in world.humans.iter().enumerate() {
            self.samples.push(AgentSample {
                t: world.t,
                agent_id: i + 1,
                px: h.position.x,
                py: h.position.y,
                vx: h.velocity.x,
                vy: h.velocity.y,
                radius: h.radius,
                visible_flag: u8::from(obs.visible.get(i).copied().unwrap_or(false)),
            });
        }
    }

    pub fn n_agents(&self) -> usize {
        self.samples
            .iter()
            .map(|s| s.agent_id + 1)
            .max()
            .unwrap_or(0)
    }

    /// Positions of one agent in time order.
    pub fn path(&self, agent_id: usize) -> Vec<Vec2> {
        self.samples
            .iter()
            .filter(|s| s.agent_id == agent_id)
            .map(|s| Vec2::new(s.px, s.py))
            .collect()
    }

    pub fn last_sample(&self, agent_id: usize) -> Option<&AgentSample> {
        self.samples.iter().rev().find(|s| s.agent_id == agent_id)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.samples {
            w.serialize(s).map_err(csv_write_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parses a trajectory CSV; errors name the missing column or the
    /// offending line.
    pub fn read_csv<R: Read>(reader: R) -> Result<Trajectory> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r
            .headers()
            .map_err(|e| Error::Csv {
                line: 1,
                reason: e.to_string(),
            })?
            .clone();
        for col in CSV_COLUMNS {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::Csv {
                    line: 1,
                    reason: format!("missing column `{col}`"),
                });
            }
        }
        let mut samples = Vec::new();
        for row in r.deserialize::<AgentSample>() {
            match row {
                Ok(s) => samples.push(s),
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    return Err(Error::Csv {
                        line,
                        reason: e.to_string(),
                    });
                }
            }
        }
        Ok(Trajectory { samples })
    }

    pub fn load_csv(path: &Path) -> Result<Trajectory> {
        Trajectory::read_csv(std::fs::File::open(path)?)
    }
}

fn csv_write_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: usize, id: usize) -> AgentSample {
        AgentSample {
            t,
            agent_id: id,
            px: t as f64 * 0.25,
            py: -(id as f64),
            vx: 1.0,
            vy: 0.0,
            radius: 0.3,
            visible_flag: 1,
        }
    }

    #[test]
    fn csv_roundtrip() {
        let traj = Trajectory {
            samples: (1..=3)
                .flat_map(|t| (0..2).map(move |i| sample(t, i)))
                .collect(),
        };
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,agent_id,px,py,vx,vy,radius,visible_flag\n"));
        assert_eq!(Trajectory::read_csv(&buf[..]).unwrap(), traj);
        assert_eq!(traj.n_agents(), 2);
        assert_eq!(traj.path(1).len(), 3);
    }

    #[test]
    fn missing_column_is_named() {
        let text = "t,agent_id,px,py,vx,vy,visible_flag\n1,0,0,0,0,0,1\n";
        let err = Trajectory::read_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("`radius`"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let text =
            "t,agent_id,px,py,vx,vy,radius,visible_flag\n1,0,0,0,0,0,0.3,1\n2,0,abc,0,0,0,0.3,1\n";
        let err = Trajectory::read_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
