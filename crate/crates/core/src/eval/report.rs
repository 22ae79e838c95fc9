use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Terminal;

/// Result of one evaluation episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub outcome: Terminal,
    pub steps: usize,
    /// Undiscounted sum of rewards.
    pub total_reward: f64,
    /// Seconds to reach the goal; absent unless the episode succeeded.
    pub nav_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub controller: String,
    pub suite: String,
    pub n_episodes: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    /// Mean over successful episodes only; absent when there were none.
    pub mean_nav_time: Option<f64>,
    /// Mean undiscounted episode return.
    pub mean_reward: f64,
    pub episodes: Vec<EpisodeRecord>,
}

/// Outcome fractions for the given counts, chosen so that
/// `success + collision + timeout == 1.0` holds exactly in floating point
/// while each rate stays within an ulp or two of `count / n`.
pub fn outcome_rates(success: usize, collision: usize, timeout: usize) -> (f64, f64, f64) {
    let n = (success + collision + timeout) as f64;
    let (mut s, mut c, mut t) = (success as f64 / n, collision as f64 / n, timeout as f64 / n);
    if s + c + t != 1.0 {
        if timeout > 0 {
            t = 1.0 - (s + c);
        } else if collision > 0 {
            c = 1.0 - s;
        } else {
            s = 1.0;
        }
    }
    (s, c, t)
}

impl EvalReport {
    pub fn from_episodes(
        controller: &str,
        suite: &str,
        mut episodes: Vec<EpisodeRecord>,
    ) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::InvalidInput(
                "evaluation needs at least one episode".into(),
            ));
        }
        episodes.sort_by_key(|e| e.seed);
        let count = |k: Terminal| episodes.iter().filter(|e| e.outcome == k).count();
        let (ns, nc, nt) = (
            count(Terminal::ReachGoal),
            count(Terminal::Collision),
            count(Terminal::Timeout),
        );
        if ns + nc + nt != episodes.len() {
            return Err(Error::Contract(
                "evaluation episode ended without a terminal outcome".into(),
            ));
        }
        let (success_rate, collision_rate, timeout_rate) = outcome_rates(ns, nc, nt);
        let times: Vec<f64> = episodes.iter().filter_map(|e| e.nav_time).collect();
        let mean_nav_time =
            (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
        let mean_reward =
            episodes.iter().map(|e| e.total_reward).sum::<f64>() / episodes.len() as f64;
        Ok(EvalReport {
            controller: controller.to_string(),
            suite: suite.to_string(),
            n_episodes: episodes.len(),
            success_rate,
            collision_rate,
            timeout_rate,
            mean_nav_time,
            mean_reward,
            episodes,
        })
    }

    pub const TABLE_HEADER: &'static str =
        "| Method | Suite | Success | Collision | Timeout | Nav. Time (s) |";

    /// One results-table row: rates as percentages, time in seconds.
    pub fn table_row(&self) -> String {
        let time = self
            .mean_nav_time
            .map(|t| format!("{t:.2}"))
            .unwrap_or_else(|| "-".into());
        format!(
            "| {} | {} | {:.2} | {:.2} | {:.2} | {} |",
            self.controller,
            self.suite,
            100.0 * self.success_rate,
            100.0 * self.collision_rate,
            100.0 * self.timeout_rate,
            time
        )
    }

    /// Writes `summary.json` and `episodes.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json =
            serde_json::to_string_pretty(self).map_err(|e| Error::Contract(e.to_string()))?;
        std::fs::write(dir.join("summary.json"), json + "\n")?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("episodes.csv"))?);
        writeln!(f, "seed,outcome,steps,total_reward,nav_time")?;
        for e in &self.episodes {
            let outcome = match e.outcome {
                Terminal::ReachGoal => "success",
                Terminal::Collision => "collision",
                Terminal::Timeout => "timeout",
                Terminal::Running => "running",
            };
            let t = e.nav_time.map(|t| t.to_string()).unwrap_or_default();
            writeln!(
                f,
                "{},{},{},{},{}",
                e.seed, outcome, e.steps, e.total_reward, t
            )?;
        }
        f.flush()?;
        Ok(())
    }
}
