use serde::{Deserialize, Serialize};

use super::params::{Arch, NetConfig, ParamId, PolicyParams};
use super::tape::{NodeId, Tape};
use super::{ablation, dsrnn};
use crate::error::{Error, Result};
use crate::sim::Observation;

/// Recurrent state carried between timesteps of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    /// One row per human (DS-RNN only).
    pub h_spatial: Vec<Vec<f64>>,
    /// Temporal edge RNN state (DS-RNN only; empty for the ablation).
    pub h_temporal: Vec<f64>,
    pub h_node: Vec<f64>,
}

impl HiddenState {
    /// Episode-start state for a scenario with `n_humans` humans.
    pub fn zeros(config: &NetConfig, n_humans: usize) -> Self {
        let h = config.d_rnn;
        match config.arch {
            Arch::DsRnn => HiddenState {
                h_spatial: vec![vec![0.0; h]; n_humans],
                h_temporal: vec![0.0; h],
                h_node: vec![0.0; h],
            },
            Arch::RnnAttn => HiddenState {
                h_spatial: Vec::new(),
                h_temporal: Vec::new(),
                h_node: vec![0.0; h],
            },
        }
    }

    fn check(&self, config: &NetConfig, n_humans: usize) -> Result<()> {
        let h = config.d_rnn;
        let (rows, temporal) = match config.arch {
            Arch::DsRnn => (n_humans, h),
            Arch::RnnAttn => (0, 0),
        };
        if self.h_spatial.len() != rows {
            return Err(Error::shape(
                "hidden.h_spatial rows",
                rows,
                self.h_spatial.len(),
            ));
        }
        if let Some(bad) = self.h_spatial.iter().find(|r| r.len() != h) {
            return Err(Error::shape("hidden.h_spatial row width", h, bad.len()));
        }
        if self.h_temporal.len() != temporal {
            return Err(Error::shape(
                "hidden.h_temporal",
                temporal,
                self.h_temporal.len(),
            ));
        }
        if self.h_node.len() != h {
            return Err(Error::shape("hidden.h_node", h, self.h_node.len()));
        }
        Ok(())
    }
}

/// Value estimate and diagonal Gaussian action distribution for one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutput {
    pub value: f64,
    pub action_mean: [f64; 2],
    pub action_log_std: [f64; 2],
    /// One weight per human; empty when there are no humans.
    pub attention_weights: Vec<f64>,
}

pub(crate) struct HiddenNodes {
    pub spatial: Vec<NodeId>,
    pub temporal: Option<NodeId>,
    pub node: NodeId,
}

pub(crate) struct StepNodes {
    pub value: NodeId,
    pub mean: NodeId,
    pub log_std: NodeId,
    pub attention: Option<NodeId>,
    pub hidden: HiddenNodes,
}

impl HiddenNodes {
    pub fn inputs(tape: &mut Tape, hidden: &HiddenState) -> Self {
        tape.set_scope("hidden_input");
        HiddenNodes {
            spatial: hidden
                .h_spatial
                .iter()
                .map(|r| tape.input(r.clone()))
                .collect(),
            temporal: (!hidden.h_temporal.is_empty())
                .then(|| tape.input(hidden.h_temporal.clone())),
            node: tape.input(hidden.h_node.clone()),
        }
    }

    pub fn read(&self, tape: &Tape) -> HiddenState {
        HiddenState {
            h_spatial: self
                .spatial
                .iter()
                .map(|&id| tape.value(id).to_vec())
                .collect(),
            h_temporal: self
                .temporal
                .map(|id| tape.value(id).to_vec())
                .unwrap_or_default(),
            h_node: tape.value(self.node).to_vec(),
        }
    }
}

impl StepNodes {
    pub fn output(&self, tape: &Tape) -> PolicyOutput {
        let m = tape.value(self.mean);
        let s = tape.value(self.log_std);
        PolicyOutput {
            value: tape.value(self.value)[0],
            action_mean: [m[0], m[1]],
            action_log_std: [s[0], s[1]],
            attention_weights: self
                .attention
                .map(|a| tape.value(a).to_vec())
                .unwrap_or_default(),
        }
    }
}

pub(crate) struct GruIds {
    w_ih: ParamId,
    w_hh: ParamId,
    b_ih: ParamId,
    b_hh: ParamId,
    hidden: usize,
}

impl GruIds {
    pub fn resolve(params: &PolicyParams, prefix: &str) -> Self {
        GruIds {
            w_ih: params.require(&format!("{prefix}.w_ih")),
            w_hh: params.require(&format!("{prefix}.w_hh")),
            b_ih: params.require(&format!("{prefix}.b_ih")),
            b_hh: params.require(&format!("{prefix}.b_hh")),
            hidden: params.config.d_rnn,
        }
    }

    /// Gated recurrent cell:
    /// r = s(W_ir x + b_ir + W_hr h + b_hr), z likewise,
    /// n = tanh(W_in x + b_in + r * (W_hn h + b_hn)), h' = n + z * (h - n).
    pub fn step(&self, tape: &mut Tape, params: &PolicyParams, x: NodeId, h: NodeId) -> NodeId {
        let hs = self.hidden;
        let gi = tape.linear(params, self.w_ih, Some(self.b_ih), x);
        let gh = tape.linear(params, self.w_hh, Some(self.b_hh), h);
        let (gi_r, gh_r) = (tape.slice(gi, 0, hs), tape.slice(gh, 0, hs));
        let pre_r = tape.add(gi_r, gh_r);
        let r = tape.sigmoid(pre_r);
        let (gi_z, gh_z) = (tape.slice(gi, hs, hs), tape.slice(gh, hs, hs));
        let pre_z = tape.add(gi_z, gh_z);
        let z = tape.sigmoid(pre_z);
        let (gi_n, gh_n) = (tape.slice(gi, 2 * hs, hs), tape.slice(gh, 2 * hs, hs));
        let gated = tape.mul(r, gh_n);
        let pre_n = tape.add(gi_n, gated);
        let n = tape.tanh(pre_n);
        let diff = tape.sub(h, n);
        let keep = tape.mul(z, diff);
        tape.add(n, keep)
    }
}

/// `tanh(W x + b)` for a named linear layer.
pub(crate) fn dense_tanh(tape: &mut Tape, params: &PolicyParams, name: &str, x: NodeId) -> NodeId {
    let w = params.require(&format!("{name}.w"));
    let b = params.require(&format!("{name}.b"));
    let y = tape.linear(params, w, Some(b), x);
    tape.tanh(y)
}

pub(crate) fn dense(tape: &mut Tape, params: &PolicyParams, name: &str, x: NodeId) -> NodeId {
    let w = params.require(&format!("{name}.w"));
    let b = params.require(&format!("{name}.b"));
    tape.linear(params, w, Some(b), x)
}

/// Value and Gaussian policy heads on the final recurrent state.
pub(crate) fn heads(
    tape: &mut Tape,
    params: &PolicyParams,
    h_node: NodeId,
) -> (NodeId, NodeId, NodeId) {
    tape.set_scope("heads");
    let value = dense(tape, params, "value_head", h_node);
    let mean = dense(tape, params, "policy_head", h_node);
    let log_std = tape.param(params, params.require("log_std"));
    (value, mean, log_std)
}

/// Records one timestep of the configured architecture onto `tape`.
pub(crate) fn record_step(
    tape: &mut Tape,
    params: &PolicyParams,
    obs: &Observation,
    hidden: &HiddenNodes,
) -> Result<StepNodes> {
    let start = tape.len();
    let nodes = match params.config.arch {
        Arch::DsRnn => dsrnn::record(tape, params, obs, hidden),
        Arch::RnnAttn => ablation::record(tape, params, obs, hidden),
    };
    let outputs = [nodes.value, nodes.mean, nodes.log_std];
    if outputs
        .iter()
        .any(|&id| tape.value(id).iter().any(|v| !v.is_finite()))
    {
        let scope = tape
            .first_non_finite(start)
            .map(|(_, s)| s)
            .unwrap_or("heads");
        return Err(Error::NonFinite {
            tensor: scope.to_string(),
        });
    }
    Ok(nodes)
}

pub(crate) fn check_inputs(
    params: &PolicyParams,
    obs: &Observation,
    hidden: &HiddenState,
) -> Result<()> {
    hidden.check(&params.config, obs.n_humans())?;
    let fields = obs
        .robot_node
        .iter()
        .chain(&obs.temporal_edge)
        .chain(obs.spatial_edges.iter().flatten());
    if fields.clone().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            tensor: "observation".into(),
        });
    }
    Ok(())
}

/// Single-step evaluation for whichever architecture `params` holds.
pub fn forward(
    params: &PolicyParams,
    obs: &Observation,
    hidden: &HiddenState,
) -> Result<(PolicyOutput, HiddenState)> {
    check_inputs(params, obs, hidden)?;
    let mut tape = Tape::new();
    let h = HiddenNodes::inputs(&mut tape, hidden);
    let nodes = record_step(&mut tape, params, obs, &h)?;
    Ok((nodes.output(&tape), nodes.hidden.read(&tape)))
}
