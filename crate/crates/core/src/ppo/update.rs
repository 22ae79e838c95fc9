use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rollout::RolloutBuffer;
use super::{gaussian_entropy, gaussian_log_prob, PpoConfig};
use crate::error::{Error, Result};
use crate::net::{gradients, FrameGrad, Gradients, PolicyOutput, PolicyParams, Segment};

/// Adaptive moment estimation state.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
}

impl Adam {
    pub fn new(params: &PolicyParams) -> Self {
        Adam {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut PolicyParams, grads: &Gradients, cfg: &PpoConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        for (i, tensor) in params.tensors_mut().iter_mut().enumerate() {
            let (m, v, g) = (
                &mut self.m.tensors[i],
                &mut self.v.tensors[i],
                &grads.tensors[i],
            );
            for k in 0..g.len() {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                let step = cfg.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + cfg.adam_eps);
                tensor.data[k] -= step;
            }
        }
    }
}

/// Averages over all frames of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    /// Mean global gradient norm before clipping.
    pub grad_norm: f64,
}

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// Per-frame clipped-surrogate loss and its output derivatives.
pub(crate) struct FrameTerms {
    pub grad: FrameGrad,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clipped: bool,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn frame_terms(
    out: &PolicyOutput,
    action: &[f64; 2],
    old_log_prob: f64,
    advantage: f64,
    ret: f64,
    cfg: &PpoConfig,
    weight: f64,
) -> FrameTerms {
    let log_prob = gaussian_log_prob(action, &out.action_mean, &out.action_log_std);
    let ratio = (log_prob - old_log_prob).exp();
    let clipped_ratio = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    let (s1, s2) = (ratio * advantage, clipped_ratio * advantage);
    let surrogate = clipped_surrogate(ratio, advantage, cfg.clip_eps);
    assert!(
        surrogate <= s1.max(s2),
        "clipped surrogate above both branches"
    );
    let policy_loss = -surrogate;
    // d(policy_loss)/d(log_prob); zero when the clipped branch is active.
    let d_logp = if s1 <= s2 { -advantage * ratio } else { 0.0 };
    let value_err = out.value - ret;
    let value_loss = value_err * value_err;
    let entropy = gaussian_entropy(&out.action_log_std);

    let mut d_mean = [0.0; 2];
    let mut d_log_std = [0.0; 2];
    for k in 0..2 {
        let var = (2.0 * out.action_log_std[k]).exp();
        let diff = action[k] - out.action_mean[k];
        d_mean[k] = weight * d_logp * diff / var;
        d_log_std[k] = weight * (d_logp * (diff * diff / var - 1.0) - cfg.entropy_coef);
    }
    FrameTerms {
        grad: FrameGrad {
            loss: weight * (policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy),
            d_value: weight * cfg.value_coef * 2.0 * value_err,
            d_mean,
            d_log_std,
        },
        policy_loss,
        value_loss,
        entropy,
        clipped: (ratio - 1.0).abs() > cfg.clip_eps,
    }
}

/// Clipped-surrogate PPO over `epochs` passes, re-running the recurrent
/// network from each segment's stored hidden state.
pub fn ppo_update(
    params: &mut PolicyParams,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    let segments: Vec<Segment> = buffer.envs.iter().map(|e| e.to_segment()).collect();
    let mut order: Vec<usize> = (0..segments.len()).collect();
    let mut stats = UpdateStats::default();
    let mut frames_seen = 0usize;
    let mut steps = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let per = order.len().div_ceil(cfg.minibatches);
        for (mb, chunk) in order.chunks(per.max(1)).enumerate() {
            let batch: Vec<Segment> = chunk.iter().map(|&i| segments[i].clone()).collect();
            let n_frames: usize = chunk.iter().map(|&i| buffer.envs[i].frames.len()).sum();
            if n_frames == 0 {
                continue;
            }
            let weight = 1.0 / n_frames as f64;
            let acc = std::cell::RefCell::new(UpdateStats::default());
            let loss = |s: usize, t: usize, out: &PolicyOutput| {
                let seg = &buffer.envs[chunk[s]];
                let f = &seg.frames[t];
                let terms = frame_terms(
                    out,
                    &f.action,
                    f.log_prob,
                    seg.advantages[t],
                    seg.returns[t],
                    cfg,
                    weight,
                );
                let mut a = acc.borrow_mut();
                a.policy_loss += terms.policy_loss;
                a.value_loss += terms.value_loss;
                a.entropy += terms.entropy;
                a.clip_frac += terms.clipped as u8 as f64;
                terms.grad
            };
            let (total, mut grads) = match gradients(params, &batch, &loss) {
                Ok(r) => r,
                Err(Error::NonFinite { .. }) => {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        minibatch: mb,
                    })
                }
                Err(e) => return Err(e),
            };
            if !total.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    minibatch: mb,
                });
            }
            let norm = grads.l2_norm();
            if cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm {
                grads.scale(cfg.max_grad_norm / norm);
            }
            adam.step(params, &grads, cfg);
            let a = acc.into_inner();
            stats.policy_loss += a.policy_loss;
            stats.value_loss += a.value_loss;
            stats.entropy += a.entropy;
            stats.clip_frac += a.clip_frac;
            stats.grad_norm += norm;
            frames_seen += n_frames;
            steps += 1;
        }
    }
    if frames_seen > 0 {
        let n = frames_seen as f64;
        stats.policy_loss /= n;
        stats.value_loss /= n;
        stats.entropy /= n;
        stats.clip_frac /= n;
        stats.grad_norm /= steps as f64;
    }
    Ok(stats)
}
