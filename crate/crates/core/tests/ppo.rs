mod common;

use common::{random_obs, random_params, small_config};
use crowdnav::net::{
    forward, gradients, load_checkpoint, save_checkpoint, Arch, FrameGrad, HiddenState, NetConfig,
    PolicyOutput, PolicyParams, Segment,
};
use crowdnav::ppo::{
    collect_rollouts, compute_advantages, gaussian_log_prob, ppo_update, read_metrics, train, Adam,
    EnvSegment, Frame, PpoConfig, RolloutBuffer, Trainer, UpdateMetrics, VecEnv,
};
use crowdnav::sim::ScenarioConfig;
use crowdnav::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_net() -> NetConfig {
    NetConfig {
        d_rnn: 8,
        d_k: 4,
        d_embed: 6,
        ..NetConfig::default()
    }
}

fn scenario(n: usize) -> ScenarioConfig {
    ScenarioConfig {
        n_humans: n,
        ..ScenarioConfig::fov(360.0)
    }
}

fn frame(reward: f64, value: f64, done: bool) -> Frame {
    Frame {
        obs: random_obs(&mut ChaCha8Rng::seed_from_u64(0), 0),
        action: [0.0; 2],
        log_prob: 0.0,
        value,
        reward,
        done,
        episode_id: 0,
    }
}

fn buffer(frames: Vec<Frame>, bootstrap: f64) -> RolloutBuffer {
    RolloutBuffer {
        envs: vec![EnvSegment {
            initial_hidden: HiddenState::zeros(&tiny_net(), 0),
            frames,
            bootstrap_value: bootstrap,
            advantages: vec![],
            returns: vec![],
        }],
    }
}

#[test]
fn single_terminal_step_advantage() {
    for gamma in [0.0, 0.5, 0.99] {
        let mut b = buffer(vec![frame(1.0, 0.0, true)], 123.0);
        compute_advantages(&mut b, gamma, 0.95, false);
        assert_eq!(b.envs[0].advantages, vec![1.0]);
        assert_eq!(b.envs[0].returns, vec![1.0]);
    }
}

#[test]
fn lambda_one_gives_monte_carlo_advantages() {
    let rewards = [0.3, -1.0, 2.0, 0.5, 10.0];
    let values = [0.1, 0.4, -0.2, 1.5, 3.0];
    let gamma = 0.9;
    let frames = (0..5)
        .map(|t| frame(rewards[t], values[t], t == 4))
        .collect();
    let mut b = buffer(frames, 99.0);
    compute_advantages(&mut b, gamma, 1.0, false);
    for t in 0..5 {
        let mc: f64 = (t..5)
            .map(|k| gamma.powi((k - t) as i32) * rewards[k])
            .sum();
        assert!((b.envs[0].advantages[t] - (mc - values[t])).abs() < 1e-12);
        assert!((b.envs[0].returns[t] - mc).abs() < 1e-12);
    }
}

#[test]
fn zero_rewards_and_values_give_zero_advantages() {
    let frames = (0..6).map(|t| frame(0.0, 0.0, t == 2)).collect();
    let mut b = buffer(frames, 0.0);
    compute_advantages(&mut b, 0.99, 0.95, true);
    assert!(b.envs[0].advantages.iter().all(|&a| a == 0.0));
}

#[test]
fn done_blocks_bootstrapping_across_episodes() {
    let frames = vec![frame(1.0, 0.5, true), frame(0.0, 100.0, false)];
    let mut b = buffer(frames, 0.0);
    compute_advantages(&mut b, 0.99, 0.95, false);
    assert_eq!(b.envs[0].advantages[0], 0.5);
}

#[test]
fn normalized_advantages_have_zero_mean_unit_variance() {
    let frames = (0..8)
        .map(|t| frame(t as f64, 0.2 * t as f64, t == 7))
        .collect();
    let mut b = buffer(frames, 0.0);
    compute_advantages(&mut b, 0.99, 0.95, true);
    let a = &b.envs[0].advantages;
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / a.len() as f64;
    assert!(mean.abs() < 1e-12);
    assert!((var - 1.0).abs() < 1e-6);
}

#[test]
fn twelve_envs_by_thirty_steps() {
    let net = tiny_net();
    let params = PolicyParams::init(&net, 0).unwrap();
    let mut venv = VecEnv::new(&scenario(2), &params, 12, 5).unwrap();
    let (b, _) = collect_rollouts(&mut venv, &params, 30, false).unwrap();
    assert_eq!(b.envs.len(), 12);
    assert_eq!(b.n_frames(), 360);
}

#[test]
fn rollouts_are_reproducible() {
    let net = tiny_net();
    let params = PolicyParams::init(&net, 0).unwrap();
    for deterministic in [true, false] {
        let run = || {
            let mut venv = VecEnv::new(&scenario(3), &params, 4, 9).unwrap();
            let a = collect_rollouts(&mut venv, &params, 40, deterministic).unwrap();
            let b = collect_rollouts(&mut venv, &params, 40, deterministic).unwrap();
            (a, b)
        };
        assert_eq!(run(), run());
    }
}

/// Re-runs every segment through the network and checks stored values and
/// log-probabilities.
fn assert_replays(params: &PolicyParams, buffer: &RolloutBuffer) {
    for seg in &buffer.envs {
        let mut h = seg.initial_hidden.clone();
        for (t, f) in seg.frames.iter().enumerate() {
            if t > 0 && seg.frames[t - 1].done {
                assert_ne!(f.episode_id, seg.frames[t - 1].episode_id);
                h = HiddenState::zeros(&params.config, f.obs.n_humans());
            }
            let (out, next) = forward(params, &f.obs, &h).unwrap();
            assert!((out.value - f.value).abs() < 1e-10);
            let lp = gaussian_log_prob(&f.action, &out.action_mean, &out.action_log_std);
            assert!((lp - f.log_prob).abs() < 1e-10);
            h = next;
        }
    }
}

#[test]
fn early_termination_resets_and_replays() {
    let net = tiny_net();
    let params = PolicyParams::init(&net, 0).unwrap();
    let mut cfg = scenario(2);
    cfg.horizon = 7;
    let mut venv = VecEnv::new(&cfg, &params, 3, 1).unwrap();
    let (b, episodes) = collect_rollouts(&mut venv, &params, 30, false).unwrap();
    assert!(episodes.len() >= 3 * 4);
    for seg in &b.envs {
        let first_done = seg.frames.iter().position(|f| f.done).unwrap();
        assert!(first_done < 7);
        assert_eq!(
            seg.frames[first_done + 1].episode_id,
            seg.frames[first_done].episode_id + 1
        );
    }
    assert_replays(&params, &b);
}

#[test]
fn first_update_starts_unclipped_and_zero_lr_is_a_no_op() {
    let net = tiny_net();
    let mut params = PolicyParams::init(&net, 0).unwrap();
    let mut venv = VecEnv::new(&scenario(2), &params, 4, 2).unwrap();
    let (mut b, _) = collect_rollouts(&mut venv, &params, 12, false).unwrap();
    compute_advantages(&mut b, 0.99, 0.95, true);
    let cfg = PpoConfig {
        epochs: 1,
        minibatches: 1,
        lr: 0.0,
        n_envs: 4,
        segment_len: 12,
        ..PpoConfig::default()
    };
    let before = params.clone();
    let mut adam = Adam::new(&params);
    let stats = ppo_update(
        &mut params,
        &mut adam,
        &b,
        &cfg,
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert_eq!(stats.clip_frac, 0.0);
    for (a, c) in before.tensors().iter().zip(params.tensors()) {
        assert!(a
            .data
            .iter()
            .zip(&c.data)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    let cfg = PpoConfig { lr: 1e-3, ..cfg };
    ppo_update(
        &mut params,
        &mut adam,
        &b,
        &cfg,
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert_ne!(before, params);
}

#[test]
fn non_finite_loss_names_the_minibatch() {
    let net = tiny_net();
    let mut params = PolicyParams::init(&net, 0).unwrap();
    let mut venv = VecEnv::new(&scenario(1), &params, 2, 2).unwrap();
    let (mut b, _) = collect_rollouts(&mut venv, &params, 5, false).unwrap();
    compute_advantages(&mut b, 0.99, 0.95, true);
    params.get_mut("value_head.b").unwrap().data[0] = f64::NAN;
    let cfg = PpoConfig {
        n_envs: 2,
        segment_len: 5,
        ..PpoConfig::default()
    };
    let mut adam = Adam::new(&params);
    let err = ppo_update(
        &mut params,
        &mut adam,
        &b,
        &cfg,
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap_err();
    assert!(
        matches!(
            err,
            Error::NonFiniteLoss {
                epoch: 0,
                minibatch: 0
            }
        ),
        "{err}"
    );
}

#[test]
fn frames_after_a_done_never_reach_the_previous_episode() {
    let cfg = small_config(Arch::DsRnn);
    let p = random_params(&cfg, 3, 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let obs: Vec<_> = (0..4).map(|_| random_obs(&mut rng, 2)).collect();
    let seg = |obs: Vec<_>| Segment {
        initial_hidden: HiddenState::zeros(&cfg, 2),
        observations: obs,
        dones: vec![false, true, false, false],
        episode_ids: vec![0, 0, 1, 1],
    };
    // Loss only on the second episode's frames.
    let loss = |_s: usize, t: usize, o: &PolicyOutput| {
        let on = if t >= 2 { 1.0 } else { 0.0 };
        FrameGrad {
            loss: on * (o.value + o.action_mean[0]),
            d_value: on,
            d_mean: [on, 0.0],
            d_log_std: [0.0; 2],
        }
    };
    let (_, g1) = gradients(&p, &[seg(obs.clone())], &loss).unwrap();
    let mut changed = obs.clone();
    changed[0] = random_obs(&mut rng, 2);
    changed[1] = random_obs(&mut rng, 2);
    let (_, g2) = gradients(&p, &[seg(changed)], &loss).unwrap();
    assert_eq!(g1, g2);
}

fn tiny_ppo(total_steps: u64) -> PpoConfig {
    PpoConfig {
        total_steps,
        n_envs: 3,
        segment_len: 8,
        epochs: 2,
        lr: 1e-3,
        ..PpoConfig::default()
    }
}

#[test]
fn metrics_row_count_matches_update_count() {
    let dir = tempfile::tempdir().unwrap();
    let ppo = tiny_ppo(24 * 5 + 7);
    let mut t = Trainer::new(&scenario(1), &tiny_net(), &ppo, 4).unwrap();
    assert_eq!(t.total_updates(), 5);
    train(&mut t, dir.path(), 2, |_| {}).unwrap();
    let rows = read_metrics(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(
        rows.iter().map(|r| r.update_idx).collect::<Vec<_>>(),
        vec![0, 1, 2, 3, 4]
    );
    assert_eq!(rows[4].env_steps, 120);
    for k in [0, 2, 4, 5] {
        assert!(
            dir.path()
                .join(format!("checkpoints/checkpoint_{k}.ckpt"))
                .exists(),
            "{k}"
        );
    }
}

#[test]
fn lr_decays_linearly_to_zero() {
    let ppo = PpoConfig {
        lr_decay: true,
        ..tiny_ppo(24 * 4)
    };
    let lrs: Vec<f64> = (0..=5).map(|k| ppo.lr_at(k)).collect();
    assert_eq!(lrs, vec![1e-3, 7.5e-4, 5e-4, 2.5e-4, 0.0, 0.0]);
    assert_eq!(tiny_ppo(24 * 4).lr_at(3), 1e-3);
}

fn same_metrics(a: &[UpdateMetrics], b: &[UpdateMetrics]) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert_eq!(x.csv_row(), y.csv_row());
    }
}

#[test]
fn resume_reproduces_the_metrics_log() {
    let full = tempfile::tempdir().unwrap();
    let ppo = PpoConfig {
        lr_decay: true,
        ..tiny_ppo(24 * 6)
    };
    let mut t = Trainer::new(&scenario(2), &tiny_net(), &ppo, 8).unwrap();
    train(&mut t, full.path(), 1, |_| {}).unwrap();
    let reference = read_metrics(&full.path().join("metrics.csv")).unwrap();

    let part = tempfile::tempdir().unwrap();
    let ckpt = load_checkpoint(&full.path().join("checkpoints/checkpoint_3.ckpt")).unwrap();
    let mut resumed = Trainer::from_checkpoint(ckpt, Some(&tiny_net())).unwrap();
    assert_eq!(resumed.update_idx, 3);
    train(&mut resumed, part.path(), 1, |_| {}).unwrap();
    let tail = read_metrics(&part.path().join("metrics.csv")).unwrap();
    same_metrics(&tail, &reference[3..]);
    assert_eq!(resumed.params, t.params);
}

#[test]
fn checkpoint_roundtrip_continues_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = Trainer::new(&scenario(2), &tiny_net(), &tiny_ppo(24 * 4), 2).unwrap();
    a.update().unwrap();
    let path = dir.path().join("t.ckpt");
    save_checkpoint(&a.checkpoint().unwrap(), &path).unwrap();
    let mut b = Trainer::from_checkpoint(load_checkpoint(&path).unwrap(), None).unwrap();
    for _ in 0..2 {
        same_metrics(&[a.update().unwrap()], &[b.update().unwrap()]);
    }
    assert_eq!(a.params, b.params);
    assert_eq!(a.adam, b.adam);
}

#[test]
fn resume_with_other_dims_is_refused() {
    let t = Trainer::new(&scenario(1), &tiny_net(), &tiny_ppo(24), 2).unwrap();
    let other = NetConfig {
        d_rnn: 16,
        ..tiny_net()
    };
    match Trainer::from_checkpoint(t.checkpoint().unwrap(), Some(&other)) {
        Err(Error::Config { field, reason }) => {
            assert_eq!(field, "network");
            assert!(reason.contains("d_rnn: 16"), "{reason}");
        }
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("accepted"),
    }
}

#[test]
fn training_scenarios_avoid_evaluation_seeds() {
    let params = PolicyParams::init(&tiny_net(), 0).unwrap();
    let venv = VecEnv::new(&scenario(1), &params, 12, 0).unwrap();
    assert!(venv.slots.iter().all(|s| s.env.seed() >= 1 << 63));
}

#[test]
fn config_validation_names_fields() {
    let bad = [
        (
            PpoConfig {
                clip_eps: 1.0,
                ..PpoConfig::default()
            },
            "ppo.clip_eps",
        ),
        (
            PpoConfig {
                gae_lambda: 1.5,
                ..PpoConfig::default()
            },
            "ppo.gae_lambda",
        ),
        (
            PpoConfig {
                lr: -1.0,
                ..PpoConfig::default()
            },
            "ppo.lr",
        ),
        (
            PpoConfig {
                minibatches: 13,
                ..PpoConfig::default()
            },
            "ppo.minibatches",
        ),
    ];
    for (cfg, field) in bad {
        match cfg.validate("ppo") {
            Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
            other => panic!("{other:?}"),
        }
    }
    let d = PpoConfig::default();
    assert_eq!(
        (d.lr, d.total_steps, d.n_envs, d.segment_len),
        (4e-5, 10_000_000, 12, 30)
    );
}

proptest::proptest! {
    #[test]
    fn surrogate_never_exceeds_either_branch(
        ratio in 0.0f64..3.0,
        adv in -5.0f64..5.0,
        eps in 0.05f64..0.5,
    ) {
        let s = crowdnav::ppo::clipped_surrogate(ratio, adv, eps);
        let unclipped = ratio * adv;
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        proptest::prop_assert!(s <= unclipped.max(clipped));
        proptest::prop_assert!(s <= unclipped && s <= clipped);
    }
}
