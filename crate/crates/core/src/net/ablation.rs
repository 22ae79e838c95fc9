//! RNN+Attn ablation: humans are embedded independently, scored by an
//! attention MLP against the crowd mean, pooled, joined with the robot
//! embedding and fed to a single RNN sized like the DS-RNN node RNN.

use super::model::{check_inputs, dense, dense_tanh, heads, GruIds, HiddenNodes, StepNodes};
use super::params::{Arch, PolicyParams};
use super::tape::Tape;
use super::{HiddenState, PolicyOutput};
use crate::error::{Error, Result};
use crate::sim::Observation;

pub(crate) fn record(
    tape: &mut Tape,
    params: &PolicyParams,
    obs: &Observation,
    hidden: &HiddenNodes,
) -> StepNodes {
    let cfg = &params.config;
    let n = obs.n_humans();

    tape.set_scope("human_embed");
    let humans: Vec<_> = obs
        .spatial_edges
        .iter()
        .map(|edge| {
            let x = tape.input(edge.to_vec());
            dense_tanh(tape, params, "human_embed", x)
        })
        .collect();

    tape.set_scope("attention");
    let (pooled, attention) = if n == 0 {
        (tape.input(vec![0.0; cfg.d_embed]), None)
    } else {
        let uniform = tape.input(vec![1.0 / n as f64; n]);
        let mean = tape.weighted_sum(uniform, &humans);
        let scores: Vec<_> = humans
            .iter()
            .map(|&m| {
                let pair = tape.concat(&[m, mean]);
                let hidden = dense_tanh(tape, params, "attn.hidden", pair);
                dense(tape, params, "attn.score", hidden)
            })
            .collect();
        let scores = tape.concat(&scores);
        let alpha = tape.softmax(scores);
        (tape.weighted_sum(alpha, &humans), Some(alpha))
    };

    tape.set_scope("node_rnn");
    let x_node = tape.input(obs.robot_node.to_vec());
    let node_emb = dense_tanh(tape, params, "node_embed", x_node);
    let rnn_in = tape.concat(&[pooled, node_emb]);
    let h_node = GruIds::resolve(params, "node_rnn").step(tape, params, rnn_in, hidden.node);

    let (value, mean, log_std) = heads(tape, params, h_node);
    StepNodes {
        value,
        mean,
        log_std,
        attention,
        hidden: HiddenNodes {
            spatial: Vec::new(),
            temporal: None,
            node: h_node,
        },
    }
}

/// One RNN+Attn timestep.
pub fn forward_ablation(
    params: &PolicyParams,
    obs: &Observation,
    hidden: &HiddenState,
) -> Result<(PolicyOutput, HiddenState)> {
    if params.config.arch != Arch::RnnAttn {
        return Err(Error::Contract(format!(
            "ablation forward called with {:?} parameters",
            params.config.arch
        )));
    }
    check_inputs(params, obs, hidden)?;
    super::model::forward(params, obs, hidden)
}
