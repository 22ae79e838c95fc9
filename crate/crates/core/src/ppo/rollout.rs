use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::gaussian_log_prob;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::net::{forward, HiddenState, PolicyParams, Segment};
use crate::sim::{CrowdEnv, Observation, ScenarioConfig, Terminal};

/// Training scenario seeds carry the top bit; evaluation seeds never do.
pub const TRAIN_SEED_BIT: u64 = 1 << 63;

/// One stored transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub obs: Observation,
    pub action: [f64; 2],
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
    pub episode_id: u64,
}

/// One environment's segment for a single update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSegment {
    pub initial_hidden: HiddenState,
    pub frames: Vec<Frame>,
    /// Value of the state following the last frame (unused if it is done).
    pub bootstrap_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl EnvSegment {
    pub fn to_segment(&self) -> Segment {
        Segment {
            initial_hidden: self.initial_hidden.clone(),
            observations: self.frames.iter().map(|f| f.obs.clone()).collect(),
            dones: self.frames.iter().map(|f| f.done).collect(),
            episode_ids: self.frames.iter().map(|f| f.episode_id).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    pub envs: Vec<EnvSegment>,
}

impl RolloutBuffer {
    pub fn n_frames(&self) -> usize {
        self.envs.iter().map(|e| e.frames.len()).sum()
    }
}

/// Summary of one finished training episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStat {
    pub episode_return: f64,
    pub terminal: Terminal,
    pub steps: usize,
}

/// One environment with its recurrent state and private RNG.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvSlot {
    pub env: CrowdEnv,
    pub hidden: HiddenState,
    pub episode_id: u64,
    pub episode_return: f64,
    pub episode_steps: usize,
    rng: ChaCha8Rng,
}

/// The set of parallel training environments.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VecEnv {
    pub config: ScenarioConfig,
    pub slots: Vec<EnvSlot>,
}

impl VecEnv {
    /// `n` environments; environment `i` draws from its own stream of `seed`.
    pub fn new(
        config: &ScenarioConfig,
        params: &PolicyParams,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate("scenario")?;
        let slots = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                let scenario_seed = rng.next_u64() | TRAIN_SEED_BIT;
                let env = CrowdEnv::new(config, scenario_seed).map_err(|e| Error::Env {
                    index: i,
                    source: Box::new(e),
                })?;
                Ok(EnvSlot {
                    hidden: HiddenState::zeros(&params.config, env.observation().n_humans()),
                    env,
                    episode_id: 0,
                    episode_return: 0.0,
                    episode_steps: 0,
                    rng,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VecEnv {
            config: config.clone(),
            slots,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Steps every environment `segment_len` times under the current policy.
/// With `deterministic` the mean action is taken instead of a sample.
/// Finished episodes restart on a fresh scenario with a zeroed hidden state.
pub fn collect_rollouts(
    venv: &mut VecEnv,
    params: &PolicyParams,
    segment_len: usize,
    deterministic: bool,
) -> Result<(RolloutBuffer, Vec<EpisodeStat>)> {
    let mut buffer = RolloutBuffer::default();
    let mut finished = Vec::new();
    let config = venv.config.clone();
    for (index, slot) in venv.slots.iter_mut().enumerate() {
        let wrap = |e: Error| Error::Env {
            index,
            source: Box::new(e),
        };
        let mut seg = EnvSegment {
            initial_hidden: slot.hidden.clone(),
            frames: Vec::with_capacity(segment_len),
            bootstrap_value: 0.0,
            advantages: Vec::new(),
            returns: Vec::new(),
        };
        for _ in 0..segment_len {
            let obs = slot.env.observation().clone();
            let (out, next_hidden) = forward(params, &obs, &slot.hidden).map_err(wrap)?;
            let std = [out.action_log_std[0].exp(), out.action_log_std[1].exp()];
            let action = if deterministic {
                out.action_mean
            } else {
                let n0: f64 = slot.rng.sample(StandardNormal);
                let n1: f64 = slot.rng.sample(StandardNormal);
                [
                    out.action_mean[0] + std[0] * n0,
                    out.action_mean[1] + std[1] * n1,
                ]
            };
            let log_prob = gaussian_log_prob(&action, &out.action_mean, &out.action_log_std);
            let outcome = slot
                .env
                .step(Vec2::new(action[0], action[1]))
                .map_err(wrap)?;
            let done = outcome.terminal.is_done();
            slot.episode_return += outcome.reward;
            slot.episode_steps += 1;
            seg.frames.push(Frame {
                obs,
                action,
                log_prob,
                value: out.value,
                reward: outcome.reward,
                done,
                episode_id: slot.episode_id,
            });
            if done {
                finished.push(EpisodeStat {
                    episode_return: slot.episode_return,
                    terminal: outcome.terminal,
                    steps: slot.episode_steps,
                });
                let seed = slot.rng.next_u64() | TRAIN_SEED_BIT;
                slot.env = CrowdEnv::new(&config, seed).map_err(wrap)?;
                slot.hidden = HiddenState::zeros(&params.config, slot.env.observation().n_humans());
                slot.episode_id += 1;
                slot.episode_return = 0.0;
                slot.episode_steps = 0;
            } else {
                slot.hidden = next_hidden;
            }
        }
        if !seg.frames.last().is_some_and(|f| f.done) {
            let (out, _) = forward(params, slot.env.observation(), &slot.hidden).map_err(wrap)?;
            seg.bootstrap_value = out.value;
        }
        buffer.envs.push(seg);
    }
    Ok((buffer, finished))
}

/// Generalized advantage estimation. A done frame does not bootstrap from
/// its successor. Advantages are then normalized over the whole buffer.
pub fn compute_advantages(buffer: &mut RolloutBuffer, gamma: f64, lambda: f64, normalize: bool) {
    for seg in &mut buffer.envs {
        let n = seg.frames.len();
        seg.advantages = vec![0.0; n];
        let mut gae = 0.0;
        let mut next_value = seg.bootstrap_value;
        for t in (0..n).rev() {
            let f = &seg.frames[t];
            let not_done = if f.done { 0.0 } else { 1.0 };
            let delta = f.reward + gamma * next_value * not_done - f.value;
            gae = delta + gamma * lambda * not_done * gae;
            seg.advantages[t] = gae;
            next_value = f.value;
        }
        seg.returns = seg
            .advantages
            .iter()
            .zip(&seg.frames)
            .map(|(a, f)| a + f.value)
            .collect();
    }
    if normalize {
        let all: Vec<f64> = buffer
            .envs
            .iter()
            .flat_map(|s| s.advantages.iter().copied())
            .collect();
        if all.len() < 2 {
            return;
        }
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / all.len() as f64;
        let std = var.sqrt() + 1e-8;
        for seg in &mut buffer.envs {
            for a in &mut seg.advantages {
                *a = (*a - mean) / std;
            }
        }
    }
}
