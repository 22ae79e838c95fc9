use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PPO hyperparameters and rollout geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub total_steps: u64,
    pub lr: f64,
    /// Anneal the learning rate linearly to zero over the run.
    pub lr_decay: bool,
    pub clip_eps: f64,
    pub epochs: usize,
    /// Minibatches per epoch; environments are split evenly between them.
    pub minibatches: usize,
    pub gae_lambda: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub n_envs: usize,
    /// Steps collected per environment per update (the BPTT segment length).
    pub segment_len: usize,
    pub adam_eps: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            total_steps: 10_000_000,
            lr: 4e-5,
            lr_decay: false,
            clip_eps: 0.2,
            epochs: 5,
            minibatches: 2,
            gae_lambda: 0.95,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            n_envs: 12,
            segment_len: 30,
            adam_eps: 1e-5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
        }
    }
}

impl PpoConfig {
    pub fn frames_per_update(&self) -> u64 {
        (self.n_envs * self.segment_len) as u64
    }

    pub fn total_updates(&self) -> u64 {
        self.total_steps / self.frames_per_update()
    }

    /// Learning rate for update `update_idx`.
    pub fn lr_at(&self, update_idx: u64) -> f64 {
        if !self.lr_decay {
            return self.lr;
        }
        let total = self.total_updates().max(1);
        self.lr * (1.0 - update_idx.min(total) as f64 / total as f64)
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let field = |f: &str| format!("{prefix}.{f}");
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config(
                field("lr"),
                format!("must be finite and >= 0, got {}", self.lr),
            ));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::config(
                field("clip_eps"),
                format!("must lie in (0, 1), got {}", self.clip_eps),
            ));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config(
                field("gae_lambda"),
                format!("must lie in [0, 1], got {}", self.gae_lambda),
            ));
        }
        for (name, v) in [
            ("value_coef", self.value_coef),
            ("entropy_coef", self.entropy_coef),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(
                    field(name),
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::config(field("adam_eps"), "must be > 0"));
        }
        for (name, v) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(
                    field(name),
                    format!("must lie in [0, 1), got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("n_envs", self.n_envs),
            ("segment_len", self.segment_len),
            ("minibatches", self.minibatches),
        ] {
            if v == 0 {
                return Err(Error::config(field(name), "must be at least 1"));
            }
        }
        if self.minibatches > self.n_envs {
            return Err(Error::config(
                field("minibatches"),
                format!("cannot exceed n_envs ({})", self.n_envs),
            ));
        }
        if self.total_steps < self.frames_per_update() {
            return Err(Error::config(
                field("total_steps"),
                format!(
                    "must cover at least one update of {} frames",
                    self.frames_per_update()
                ),
            ));
        }
        Ok(())
    }
}
