use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rollout::{collect_rollouts, compute_advantages, EpisodeStat, RolloutBuffer, VecEnv};
use super::update::{ppo_update, Adam, UpdateStats};
use super::PpoConfig;
use crate::error::{Error, Result};
use crate::net::{Checkpoint, NetConfig, PolicyParams, Tensor};
use crate::sim::{ScenarioConfig, Terminal};

pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_COLUMNS: [&str; 8] = [
    "update_idx",
    "env_steps",
    "mean_reward",
    "success_rate",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_frac",
];

/// One row of the metrics log. Episode statistics cover the episodes that
/// finished during this update and are NaN when none did.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub update_idx: u64,
    pub env_steps: u64,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
}

impl UpdateMetrics {
    fn new(update_idx: u64, env_steps: u64, episodes: &[EpisodeStat], stats: &UpdateStats) -> Self {
        let (mean_reward, success_rate) = if episodes.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let n = episodes.len() as f64;
            (
                episodes.iter().map(|e| e.episode_return).sum::<f64>() / n,
                episodes
                    .iter()
                    .filter(|e| e.terminal == Terminal::ReachGoal)
                    .count() as f64
                    / n,
            )
        };
        UpdateMetrics {
            update_idx,
            env_steps,
            mean_reward,
            success_rate,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_frac: stats.clip_frac,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.update_idx,
            self.env_steps,
            self.mean_reward,
            self.success_rate,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.clip_frac
        )
    }
}

/// Everything needed to continue training bit-for-bit, except the
/// parameters and optimizer moments which travel as checkpoint tensors.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct TrainerState {
    scenario: ScenarioConfig,
    ppo: PpoConfig,
    seed: u64,
    update_idx: u64,
    env_steps: u64,
    adam_t: u64,
    rng: ChaCha8Rng,
    venv: VecEnv,
}

pub struct Trainer {
    pub scenario: ScenarioConfig,
    pub ppo: PpoConfig,
    pub params: PolicyParams,
    pub adam: Adam,
    pub venv: VecEnv,
    pub seed: u64,
    pub update_idx: u64,
    pub env_steps: u64,
    /// Caller metadata stored verbatim in every checkpoint under `run`.
    pub run_info: serde_json::Value,
    rng: ChaCha8Rng,
    last_buffer: Option<RolloutBuffer>,
}

impl Trainer {
    pub fn new(
        scenario: &ScenarioConfig,
        net: &NetConfig,
        ppo: &PpoConfig,
        seed: u64,
    ) -> Result<Self> {
        scenario.validate("scenario")?;
        net.validate("network")?;
        ppo.validate("ppo")?;
        let params = PolicyParams::init(net, seed)?;
        let venv = VecEnv::new(scenario, &params, ppo.n_envs, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        Ok(Trainer {
            scenario: scenario.clone(),
            ppo: ppo.clone(),
            adam: Adam::new(&params),
            params,
            venv,
            seed,
            update_idx: 0,
            env_steps: 0,
            run_info: serde_json::Value::Null,
            rng,
            last_buffer: None,
        })
    }

    pub fn total_updates(&self) -> u64 {
        self.ppo.total_updates()
    }

    pub fn is_finished(&self) -> bool {
        self.update_idx >= self.total_updates()
    }

    /// Buffer gathered by the most recent update, with advantages filled in.
    pub fn last_buffer(&self) -> Option<&RolloutBuffer> {
        self.last_buffer.as_ref()
    }

    /// Collects one batch of experience and runs one PPO update on it.
    pub fn update(&mut self) -> Result<UpdateMetrics> {
        let (mut buffer, episodes) =
            collect_rollouts(&mut self.venv, &self.params, self.ppo.segment_len, false)?;
        compute_advantages(&mut buffer, self.scenario.gamma, self.ppo.gae_lambda, true);
        let cfg = PpoConfig {
            lr: self.ppo.lr_at(self.update_idx),
            ..self.ppo.clone()
        };
        let stats = ppo_update(
            &mut self.params,
            &mut self.adam,
            &buffer,
            &cfg,
            &mut self.rng,
        )?;
        self.env_steps += buffer.n_frames() as u64;
        let metrics = UpdateMetrics::new(self.update_idx, self.env_steps, &episodes, &stats);
        self.update_idx += 1;
        self.last_buffer = Some(buffer);
        Ok(metrics)
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let state = TrainerState {
            scenario: self.scenario.clone(),
            ppo: self.ppo.clone(),
            seed: self.seed,
            update_idx: self.update_idx,
            env_steps: self.env_steps,
            adam_t: self.adam.t,
            rng: self.rng.clone(),
            venv: self.venv.clone(),
        };
        let mut ckpt = Checkpoint::new(self.params.clone());
        ckpt.extra = serde_json::json!({
            "update_idx": self.update_idx,
            "run": self.run_info,
            "trainer": serde_json::to_value(&state).map_err(|e| Error::Contract(format!("trainer state: {e}")))?,
        });
        for (prefix, moments) in [("adam.m", &self.adam.m), ("adam.v", &self.adam.v)] {
            for (t, data) in self.params.tensors().iter().zip(&moments.tensors) {
                ckpt.extra_tensors.push(Tensor {
                    name: format!("{prefix}/{}", t.name),
                    shape: t.shape.clone(),
                    data: data.clone(),
                });
            }
        }
        Ok(ckpt)
    }

    /// Restores a trainer from `ckpt`. `net`, when given, must match the
    /// checkpoint's network dimensions.
    pub fn from_checkpoint(ckpt: Checkpoint, net: Option<&NetConfig>) -> Result<Self> {
        if let Some(net) = net {
            if *net != ckpt.params.config {
                return Err(Error::config(
                    "network",
                    format!(
                        "checkpoint network {:?} does not match configured network {:?}",
                        ckpt.params.config, net
                    ),
                ));
            }
        }
        let state: TrainerState =
            serde_json::from_value(ckpt.extra.get("trainer").cloned().unwrap_or_default())
                .map_err(|e| {
                    Error::Contract(format!("checkpoint has no usable trainer state: {e}"))
                })?;
        let mut adam = Adam::new(&ckpt.params);
        adam.t = state.adam_t;
        for (prefix, moments) in [("adam.m", &mut adam.m), ("adam.v", &mut adam.v)] {
            for (i, t) in ckpt.params.tensors().iter().enumerate() {
                let name = format!("{prefix}/{}", t.name);
                let src = ckpt
                    .extra_tensors
                    .iter()
                    .find(|x| x.name == name)
                    .ok_or_else(|| {
                        Error::Contract(format!("checkpoint is missing optimizer tensor `{name}`"))
                    })?;
                if src.data.len() != t.data.len() {
                    return Err(Error::shape(name, t.data.len(), src.data.len()));
                }
                moments.tensors[i] = src.data.clone();
            }
        }
        Ok(Trainer {
            scenario: state.scenario,
            ppo: state.ppo,
            params: ckpt.params,
            adam,
            venv: state.venv,
            seed: state.seed,
            update_idx: state.update_idx,
            env_steps: state.env_steps,
            run_info: ckpt.extra.get("run").cloned().unwrap_or_default(),
            rng: state.rng,
            last_buffer: None,
        })
    }
}

pub fn checkpoint_path(dir: &Path, update_idx: u64) -> PathBuf {
    dir.join("checkpoints")
        .join(format!("checkpoint_{update_idx}.ckpt"))
}

/// Rewrites `path` keeping only rows for updates before `keep_below`.
fn truncate_metrics(path: &Path, keep_below: u64) -> Result<()> {
    let header = METRICS_COLUMNS.join(",");
    let mut out = format!("{header}\n");
    if path.exists() {
        let text = fs::read_to_string(path)?;
        for line in text.lines().skip(1) {
            let idx: u64 = line
                .split(',')
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Contract(format!("malformed metrics row `{line}`")))?;
            if idx < keep_below {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<UpdateMetrics>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
        line: 0,
        reason: e.to_string(),
    })?;
    reader
        .deserialize()
        .map(|r| {
            r.map_err(|e: csv::Error| Error::Csv {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Runs updates until the configured step budget is spent. Writes
/// `checkpoint_<k>` after every `checkpoint_every` updates and at the end,
/// and appends one metrics row per update. A trainer restored from
/// `checkpoint_<k>` continues the log at row `k`.
pub fn train(
    trainer: &mut Trainer,
    dir: &Path,
    checkpoint_every: u64,
    mut on_update: impl FnMut(&UpdateMetrics),
) -> Result<()> {
    fs::create_dir_all(dir.join("checkpoints"))?;
    let first = checkpoint_path(dir, trainer.update_idx);
    if !first.exists() {
        crate::net::save_checkpoint(&trainer.checkpoint()?, &first)?;
    }
    let metrics_path = dir.join(METRICS_FILE);
    truncate_metrics(&metrics_path, trainer.update_idx)?;
    let mut log = fs::OpenOptions::new().append(true).open(&metrics_path)?;
    while !trainer.is_finished() {
        let m = trainer.update()?;
        writeln!(log, "{}", m.csv_row())?;
        log.flush()?;
        on_update(&m);
        if (checkpoint_every > 0 && trainer.update_idx.is_multiple_of(checkpoint_every))
            || trainer.is_finished()
        {
            crate::net::save_checkpoint(
                &trainer.checkpoint()?,
                &checkpoint_path(dir, trainer.update_idx),
            )?;
        }
    }
    Ok(())
}
