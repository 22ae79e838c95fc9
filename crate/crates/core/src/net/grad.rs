//! Backpropagation through time over stored sequence segments.

use super::model::{check_inputs, record_step, HiddenNodes};
use super::params::{Arch, Gradients, PolicyParams};
use super::tape::Tape;
use super::{HiddenState, PolicyOutput};
use crate::error::{Error, Result};
use crate::sim::Observation;

/// A contiguous run of frames from one environment. `dones[t]` marks that
/// frame `t` ended its episode, so the hidden state is reset to zeros before
/// frame `t + 1`, which must then carry a new episode id.
#[derive(Clone, Debug)]
pub struct Segment {
    pub initial_hidden: HiddenState,
    pub observations: Vec<Observation>,
    pub dones: Vec<bool>,
    pub episode_ids: Vec<u64>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    fn validate(&self, index: usize) -> Result<()> {
        let n = self.observations.len();
        if self.dones.len() != n || self.episode_ids.len() != n {
            return Err(Error::Contract(format!(
                "segment {index}: {n} observations but {} dones and {} episode ids",
                self.dones.len(),
                self.episode_ids.len()
            )));
        }
        for t in 1..n {
            let changed = self.episode_ids[t] != self.episode_ids[t - 1];
            if changed && !self.dones[t - 1] {
                return Err(Error::Contract(format!(
                    "segment {index}: frame {t} starts episode {} without a hidden reset",
                    self.episode_ids[t]
                )));
            }
            if !changed && self.dones[t - 1] {
                return Err(Error::Contract(format!(
                    "segment {index}: frame {t} continues episode {} past its terminal frame",
                    self.episode_ids[t]
                )));
            }
        }
        Ok(())
    }
}

/// Derivatives of one frame's loss term with respect to the network outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameGrad {
    pub loss: f64,
    pub d_value: f64,
    pub d_mean: [f64; 2],
    pub d_log_std: [f64; 2],
}

/// A scalar loss that decomposes into a sum of per-frame terms.
pub trait FrameLoss {
    fn frame(&self, segment: usize, t: usize, output: &PolicyOutput) -> FrameGrad;
}

impl<F: Fn(usize, usize, &PolicyOutput) -> FrameGrad> FrameLoss for F {
    fn frame(&self, segment: usize, t: usize, output: &PolicyOutput) -> FrameGrad {
        self(segment, t, output)
    }
}

/// Total loss and its gradient with respect to every parameter tensor.
pub fn gradients(
    params: &PolicyParams,
    segments: &[Segment],
    loss: &impl FrameLoss,
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(params);
    let mut total = 0.0;
    let mut tape = Tape::new();
    let mut seeds = Vec::new();
    for (s, segment) in segments.iter().enumerate() {
        segment.validate(s)?;
        if segment.is_empty() {
            continue;
        }
        tape.clear();
        seeds.clear();
        let mut hidden = HiddenNodes::inputs(&mut tape, &segment.initial_hidden);
        for (t, obs) in segment.observations.iter().enumerate() {
            if t == 0 {
                check_inputs(params, obs, &segment.initial_hidden)?;
            } else if segment.dones[t - 1] {
                let fresh = HiddenState::zeros(&params.config, obs.n_humans());
                check_inputs(params, obs, &fresh)?;
                hidden = HiddenNodes::inputs(&mut tape, &fresh);
            } else if params.config.arch == Arch::DsRnn && obs.n_humans() != hidden.spatial.len() {
                return Err(Error::shape(
                    "segment human count",
                    hidden.spatial.len(),
                    obs.n_humans(),
                ));
            }
            let nodes = record_step(&mut tape, params, obs, &hidden)?;
            let fg = loss.frame(s, t, &nodes.output(&tape));
            total += fg.loss;
            if fg.d_value != 0.0 {
                seeds.push((nodes.value, vec![fg.d_value]));
            }
            seeds.push((nodes.mean, fg.d_mean.to_vec()));
            seeds.push((nodes.log_std, fg.d_log_std.to_vec()));
            hidden = nodes.hidden;
        }
        tape.backward(params, &seeds, &mut grads);
    }
    if !total.is_finite() {
        return Err(Error::NonFinite {
            tensor: "loss".into(),
        });
    }
    Ok((total, grads))
}
