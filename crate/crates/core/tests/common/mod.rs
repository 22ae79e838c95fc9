//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use crowdnav::net::{Arch, NetConfig, PolicyParams};
use crowdnav::sim::{LastSeen, Observation};
use crowdnav::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_config(arch: Arch) -> NetConfig {
    NetConfig {
        arch,
        d_rnn: 4,
        d_k: 4,
        d_embed: 3,
        d_attn_hidden: 3,
        ..NetConfig::default()
    }
}

/// Parameters drawn uniformly from [-scale, scale], biases included.
pub fn random_params(config: &NetConfig, seed: u64, scale: f64) -> PolicyParams {
    let mut p = PolicyParams::zeros(config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in p.tensors_mut() {
        for v in &mut t.data {
            *v = rng.random_range(-scale..scale);
        }
    }
    p
}

pub fn random_obs(rng: &mut ChaCha8Rng, n: usize) -> Observation {
    let mut robot_node = [0.0; 9];
    for v in &mut robot_node {
        *v = rng.random_range(-3.0..3.0);
    }
    Observation {
        robot_node,
        spatial_edges: (0..n)
            .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect(),
        temporal_edge: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        visible: vec![true; n],
        last_seen: vec![
            LastSeen {
                position: Vec2::ZERO,
                velocity: Vec2::ZERO,
                t: 0,
            };
            n
        ],
    }
}

/// Straight-line DS-RNN step written directly from the model equations with
/// plain loops, sharing no code with the library's tape.
pub mod oracle {
    use crowdnav::net::PolicyParams;
    use crowdnav::sim::Observation;

    pub struct Out {
        pub value: f64,
        pub mean: [f64; 2],
        pub log_std: [f64; 2],
        pub alpha: Vec<f64>,
        pub h_spatial: Vec<Vec<f64>>,
        pub h_temporal: Vec<f64>,
        pub h_node: Vec<f64>,
    }

    fn t<'a>(p: &'a PolicyParams, name: &str) -> (&'a [f64], &'a [usize]) {
        let x = p.get(name).unwrap_or_else(|| panic!("{name}"));
        (&x.data, &x.shape)
    }

    fn affine(p: &PolicyParams, name: &str, x: &[f64]) -> Vec<f64> {
        let (w, s) = t(p, &format!("{name}.w"));
        let (b, _) = t(p, &format!("{name}.b"));
        let mut y = vec![0.0; s[0]];
        for i in 0..s[0] {
            let mut acc = b[i];
            for j in 0..s[1] {
                acc += w[i * s[1] + j] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    fn mat(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; rows];
        for i in 0..rows {
            for j in 0..cols {
                y[i] += w[i * cols + j] * x[j];
            }
        }
        y
    }

    fn gru(p: &PolicyParams, name: &str, x: &[f64], h: &[f64]) -> Vec<f64> {
        let hs = h.len();
        let (wi, si) = t(p, &format!("{name}.w_ih"));
        let (wh, _) = t(p, &format!("{name}.w_hh"));
        let (bi, _) = t(p, &format!("{name}.b_ih"));
        let (bh, _) = t(p, &format!("{name}.b_hh"));
        let gi = mat(wi, 3 * hs, si[1], x);
        let gh = mat(wh, 3 * hs, hs, h);
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        (0..hs)
            .map(|k| {
                let r = sig(gi[k] + bi[k] + gh[k] + bh[k]);
                let z = sig(gi[hs + k] + bi[hs + k] + gh[hs + k] + bh[hs + k]);
                let n = (gi[2 * hs + k] + bi[2 * hs + k] + r * (gh[2 * hs + k] + bh[2 * hs + k]))
                    .tanh();
                (1.0 - z) * n + z * h[k]
            })
            .collect()
    }

    fn tanh(v: Vec<f64>) -> Vec<f64> {
        v.into_iter().map(f64::tanh).collect()
    }

    pub fn step(
        p: &PolicyParams,
        obs: &Observation,
        hs: &[Vec<f64>],
        ht: &[f64],
        hn: &[f64],
    ) -> Out {
        let d = p.config.d_rnn;
        let dk = p.config.d_k;
        let n = obs.spatial_edges.len();
        let h_spatial: Vec<Vec<f64>> = obs
            .spatial_edges
            .iter()
            .zip(hs)
            .map(|(e, h)| gru(p, "spatial_rnn", &tanh(affine(p, "spatial_embed", e)), h))
            .collect();
        let h_temporal = gru(
            p,
            "temporal_rnn",
            &tanh(affine(p, "temporal_embed", &obs.temporal_edge)),
            ht,
        );
        // Q = V W_Q (n x dk), K = h_ww W_K (1 x dk); stored as dk x d.
        let (wq, _) = t(p, "attn.w_q");
        let (wk, _) = t(p, "attn.w_k");
        let k = mat(wk, dk, d, &h_temporal);
        let mut alpha = vec![0.0; n];
        let mut v_att = vec![0.0; d];
        if n > 0 {
            let logits: Vec<f64> = h_spatial
                .iter()
                .map(|h| {
                    let q = mat(wq, dk, d, h);
                    q.iter().zip(&k).map(|(a, b)| a * b).sum::<f64>() * n as f64
                        / (dk as f64).sqrt()
                })
                .collect();
            let m = logits.iter().cloned().fold(f64::MIN, f64::max);
            let ex: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let s: f64 = ex.iter().sum();
            for i in 0..n {
                alpha[i] = ex[i] / s;
                for j in 0..d {
                    v_att[j] += alpha[i] * h_spatial[i][j];
                }
            }
        }
        let mut joint = v_att.clone();
        joint.extend_from_slice(&h_temporal);
        let e = tanh(affine(p, "edge_embed", &joint));
        let ne = tanh(affine(p, "node_embed", &obs.robot_node));
        let mut x = e;
        x.extend(ne);
        let h_node = gru(p, "node_rnn", &x, hn);
        let value = affine(p, "value_head", &h_node)[0];
        let mean = affine(p, "policy_head", &h_node);
        let (ls, _) = t(p, "log_std");
        Out {
            value,
            mean: [mean[0], mean[1]],
            log_std: [ls[0], ls[1]],
            alpha,
            h_spatial,
            h_temporal,
            h_node,
        }
    }
}
