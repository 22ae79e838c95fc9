use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{ROBOT_NODE_DIM, SPATIAL_EDGE_DIM, TEMPORAL_EDGE_DIM};

pub type ParamId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// Spatial/temporal edge RNNs, attention and node RNN.
    DsRnn,
    /// Attention over embedded humans feeding a single RNN.
    RnnAttn,
}

/// Network dimensions. Input sizes are fixed by the observation layout but
/// recorded so checkpoints can be checked against it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub arch: Arch,
    pub d_rnn: usize,
    pub d_k: usize,
    pub d_embed: usize,
    /// Hidden width of the ablation's attention scoring layer.
    pub d_attn_hidden: usize,
    pub robot_dim: usize,
    pub edge_dim: usize,
    pub temporal_dim: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            arch: Arch::DsRnn,
            d_rnn: 128,
            d_k: 64,
            d_embed: 64,
            d_attn_hidden: 64,
            robot_dim: ROBOT_NODE_DIM,
            edge_dim: SPATIAL_EDGE_DIM,
            temporal_dim: TEMPORAL_EDGE_DIM,
        }
    }
}

impl NetConfig {
    pub fn ablation() -> Self {
        NetConfig {
            arch: Arch::RnnAttn,
            ..NetConfig::default()
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("d_rnn", self.d_rnn),
            ("d_k", self.d_k),
            ("d_embed", self.d_embed),
            ("d_attn_hidden", self.d_attn_hidden),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{prefix}.{name}"), "must be >= 1"));
            }
        }
        for (name, v, want) in [
            ("robot_dim", self.robot_dim, ROBOT_NODE_DIM),
            ("edge_dim", self.edge_dim, SPATIAL_EDGE_DIM),
            ("temporal_dim", self.temporal_dim, TEMPORAL_EDGE_DIM),
        ] {
            if v != want {
                return Err(Error::config(
                    format!("{prefix}.{name}"),
                    format!("observation provides {want}, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Names and shapes of every tensor, in storage order.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut specs = Vec::new();
        let h = self.d_rnn;
        let e = self.d_embed;
        let linear = |specs: &mut Vec<(String, Vec<usize>)>, name: &str, out: usize, inp: usize| {
            specs.push((format!("{name}.w"), vec![out, inp]));
            specs.push((format!("{name}.b"), vec![out]));
        };
        let gru = |specs: &mut Vec<(String, Vec<usize>)>, name: &str, inp: usize| {
            specs.push((format!("{name}.w_ih"), vec![3 * h, inp]));
            specs.push((format!("{name}.w_hh"), vec![3 * h, h]));
            specs.push((format!("{name}.b_ih"), vec![3 * h]));
            specs.push((format!("{name}.b_hh"), vec![3 * h]));
        };
        match self.arch {
            Arch::DsRnn => {
                linear(&mut specs, "spatial_embed", e, self.edge_dim);
                gru(&mut specs, "spatial_rnn", e);
                linear(&mut specs, "temporal_embed", e, self.temporal_dim);
                gru(&mut specs, "temporal_rnn", e);
                // Stored transposed: q = w_q h for each spatial hidden row.
                specs.push(("attn.w_q".to_string(), vec![self.d_k, h]));
                specs.push(("attn.w_k".to_string(), vec![self.d_k, h]));
                linear(&mut specs, "edge_embed", e, 2 * h);
                linear(&mut specs, "node_embed", e, self.robot_dim);
                gru(&mut specs, "node_rnn", 2 * e);
            }
            Arch::RnnAttn => {
                linear(&mut specs, "human_embed", e, self.edge_dim);
                linear(&mut specs, "attn.hidden", self.d_attn_hidden, 2 * e);
                linear(&mut specs, "attn.score", 1, self.d_attn_hidden);
                linear(&mut specs, "node_embed", e, self.robot_dim);
                gru(&mut specs, "node_rnn", 2 * e);
            }
        }
        linear(&mut specs, "value_head", 1, h);
        linear(&mut specs, "policy_head", 2, h);
        specs.push(("log_std".to_string(), vec![2]));
        specs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            name: name.into(),
            shape,
            data: vec![0.0; n],
        }
    }
}

/// Every trainable tensor of a policy network, addressable by name.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub config: NetConfig,
    tensors: Vec<Tensor>,
}

/// Per-parameter gradients, aligned with [`PolicyParams`] ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &PolicyParams) -> Self {
        Gradients {
            tensors: params
                .tensors
                .iter()
                .map(|t| vec![0.0; t.data.len()])
                .collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.tensors.iter_mut().flatten() {
            *g *= c;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|g| g.is_finite())
    }
}

fn xavier(rng: &mut impl Rng, out: usize, inp: usize) -> Vec<f64> {
    let a = (6.0 / (out + inp) as f64).sqrt();
    (0..out * inp).map(|_| rng.random_range(-a..a)).collect()
}

/// Square matrix with orthonormal rows, by Gram-Schmidt on Gaussian rows.
fn orthogonal(rng: &mut impl Rng, n: usize, gain: f64) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for r in &rows {
                let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi -= d * ri;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    rows.into_iter().flatten().map(|x| x * gain).collect()
}

impl PolicyParams {
    /// All-zero parameters.
    pub fn zeros(config: &NetConfig) -> Result<Self> {
        config.validate("network")?;
        Ok(PolicyParams {
            config: config.clone(),
            tensors: config
                .tensor_specs()
                .into_iter()
                .map(|(name, shape)| Tensor::zeros(name, shape))
                .collect(),
        })
    }

    /// Seeded initialisation: orthogonal recurrent blocks, Xavier input and
    /// embedding weights, a near-zero policy head and zero biases and
    /// log-std.
    pub fn init(config: &NetConfig, seed: u64) -> Result<Self> {
        let mut params = PolicyParams::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.d_rnn;
        for t in &mut params.tensors {
            let name = t.name.as_str();
            if t.shape.len() != 2 {
                continue;
            }
            let (out, inp) = (t.shape[0], t.shape[1]);
            t.data = if name.ends_with(".w_hh") {
                (0..3).flat_map(|_| orthogonal(&mut rng, h, 1.0)).collect()
            } else if name == "policy_head.w" {
                xavier(&mut rng, out, inp)
                    .into_iter()
                    .map(|x| x * 0.01)
                    .collect()
            } else {
                xavier(&mut rng, out, inp)
            };
        }
        Ok(params)
    }

    /// Rebuilds parameters from named tensors, checking the set of names and
    /// every shape against `config`.
    pub fn from_tensors(config: &NetConfig, tensors: Vec<Tensor>) -> Result<Self> {
        config.validate("network")?;
        let specs = config.tensor_specs();
        let mut by_name: std::collections::HashMap<String, Tensor> =
            tensors.into_iter().map(|t| (t.name.clone(), t)).collect();
        let mut ordered = Vec::with_capacity(specs.len());
        for (name, shape) in specs {
            let t = by_name
                .remove(&name)
                .ok_or_else(|| Error::InvalidInput(format!("missing tensor `{name}`")))?;
            if t.shape != shape {
                return Err(Error::shape(
                    format!("tensor `{name}`"),
                    format!("{shape:?}"),
                    format!("{:?}", t.shape),
                ));
            }
            if t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::shape(
                    format!("tensor `{name}` payload"),
                    shape.iter().product::<usize>(),
                    t.data.len(),
                ));
            }
            if let Some(bad) = t.data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    tensor: format!("{name}[{bad}]"),
                });
            }
            ordered.push(t);
        }
        if let Some(extra) = by_name.keys().min() {
            return Err(Error::InvalidInput(format!("unexpected tensor `{extra}`")));
        }
        Ok(PolicyParams {
            config: config.clone(),
            tensors: ordered,
        })
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.tensors[id]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub(crate) fn require(&self, name: &str) -> ParamId {
        self.id(name)
            .unwrap_or_else(|| panic!("parameter `{name}` missing for {:?}", self.config.arch))
    }
}
