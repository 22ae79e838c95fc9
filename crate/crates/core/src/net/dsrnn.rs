//! Decentralized structural-RNN: a shared spatial edge RNN per human, a
//! temporal edge RNN on the robot's velocity, scaled dot-product attention
//! over the spatial hidden states, and a node RNN feeding the heads.

use super::model::{check_inputs, dense_tanh, heads, GruIds, HiddenNodes, StepNodes};
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

    tape.set_scope("spatial_edge_rnn");
    let spatial_rnn = GruIds::resolve(params, "spatial_rnn");
    let h_spatial: Vec<_> = obs
        .spatial_edges
        .iter()
        .zip(&hidden.spatial)
        .map(|(edge, &h)| {
            let x = tape.input(edge.to_vec());
            let e = dense_tanh(tape, params, "spatial_embed", x);
            spatial_rnn.step(tape, params, e, h)
        })
        .collect();

    tape.set_scope("temporal_edge_rnn");
    let x = tape.input(obs.temporal_edge.to_vec());
    let e = dense_tanh(tape, params, "temporal_embed", x);
    let h_prev = hidden.temporal.expect("temporal hidden state");
    let h_temporal = GruIds::resolve(params, "temporal_rnn").step(tape, params, e, h_prev);

    tape.set_scope("attention");
    let (v_att, attention) = if n == 0 {
        (tape.input(vec![0.0; cfg.d_rnn]), None)
    } else {
        let w_q = params.require("attn.w_q");
        let w_k = params.require("attn.w_k");
        let key = tape.linear(params, w_k, None, h_temporal);
        let logits: Vec<_> = h_spatial
            .iter()
            .map(|&h| {
                let q = tape.linear(params, w_q, None, h);
                tape.dot(q, key)
            })
            .collect();
        let logits = tape.concat(&logits);
        let scaled = tape.scale(logits, n as f64 / (cfg.d_k as f64).sqrt());
        let alpha = tape.softmax(scaled);
        (tape.weighted_sum(alpha, &h_spatial), Some(alpha))
    };

    tape.set_scope("node_rnn");
    let joint = tape.concat(&[v_att, h_temporal]);
    let edge_emb = dense_tanh(tape, params, "edge_embed", joint);
    let x_node = tape.input(obs.robot_node.to_vec());
    let node_emb = dense_tanh(tape, params, "node_embed", x_node);
    let rnn_in = tape.concat(&[edge_emb, node_emb]);
    let h_node = GruIds::resolve(params, "node_rnn").step(tape, params, rnn_in, hidden.node);

    let (value, mean, log_std) = heads(tape, params, h_node);
    StepNodes {
        value,
        mean,
        log_std,
        attention,
        hidden: HiddenNodes {
            spatial: h_spatial,
            temporal: Some(h_temporal),
            node: h_node,
        },
    }
}

/// One DS-RNN timestep.
pub fn forward(
    params: &PolicyParams,
    obs: &Observation,
    hidden: &HiddenState,
) -> Result<(PolicyOutput, HiddenState)> {
    if params.config.arch != Arch::DsRnn {
        return Err(Error::Contract(format!(
            "DS-RNN forward called with {:?} parameters",
            params.config.arch
        )));
    }
    check_inputs(params, obs, hidden)?;
    super::model::forward(params, obs, hidden)
}
