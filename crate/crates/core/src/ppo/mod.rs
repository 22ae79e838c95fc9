//! Recurrent PPO: parallel rollout collection, generalized advantage
//! estimation, clipped-surrogate updates and a resumable training loop.

mod config;
mod rollout;
mod trainer;
mod update;

pub use config::PpoConfig;
pub use rollout::{
    collect_rollouts, compute_advantages, EnvSegment, EnvSlot, EpisodeStat, Frame, RolloutBuffer,
    VecEnv, TRAIN_SEED_BIT,
};
pub use trainer::{
    checkpoint_path, read_metrics, train, Trainer, UpdateMetrics, METRICS_COLUMNS, METRICS_FILE,
};
pub use update::{clipped_surrogate, ppo_update, Adam, UpdateStats};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Log density of a diagonal Gaussian.
pub fn gaussian_log_prob(action: &[f64; 2], mean: &[f64; 2], log_std: &[f64; 2]) -> f64 {
    (0..2)
        .map(|k| {
            let z = (action[k] - mean[k]) / log_std[k].exp();
            -0.5 * z * z - log_std[k] - 0.5 * LN_2PI
        })
        .sum()
}

pub fn gaussian_entropy(log_std: &[f64; 2]) -> f64 {
    log_std.iter().map(|s| 0.5 + 0.5 * LN_2PI + s).sum()
}
