"""Smoke test for the crowdnav_py extension module.

Build and install first, e.g.
    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o target/wheels
    pip install target/wheels/crowdnav_py-*.whl
"""

import json
import math
import os
import tempfile

import crowdnav_py as cn


def main():
    assert "fov-90" in cn.suites() and len(cn.suites()) == 6

    world = json.loads(cn.scenario_json("group-10", 3))
    assert len(world["humans"]) == 10

    env = cn.Env(seed=7, suite="fov-180")
    obs = env.observation()
    assert len(obs["robot_node"]) == 9
    assert len(obs["spatial_edges"]) == env.n_humans == 5

    policy = cn.Policy(seed=1, d_rnn=16, d_k=8, d_embed=8)
    out = policy.forward(env)
    assert abs(sum(out["attention_weights"]) - 1.0) < 1e-9
    assert policy.param_count == sum(
        math.prod(policy.tensor(n)[0]) for n in policy.tensor_names()
    )

    done = False
    while not done:
        gx, gy = env.robot_goal
        px, py = env.robot_position
        d = math.hypot(gx - px, gy - py) or 1.0
        _, outcome, done = env.step((gx - px) / d, (gy - py) / d)
    assert outcome in ("success", "collision", "timeout")

    # Humans ignore the robot, so an idle robot can still be hit; it never
    # reaches its goal though.
    report = cn.evaluate_baseline("zero", "fov-360", n=3)
    assert report["success_rate"] == 0.0
    report = cn.evaluate_baseline("orca", "fov-360", n=5)
    total = report["success_rate"] + report["collision_rate"] + report["timeout_rate"]
    assert total == 1.0

    try:
        cn.evaluate_baseline("teleport")
    except ValueError as e:
        assert "orca" in str(e)
    else:
        raise AssertionError("unknown baseline accepted")

    trainer = cn.Trainer(
        "[network]\nd_rnn = 8\nd_k = 4\nd_embed = 4\n"
        "[ppo]\ntotal_steps = 20\nn_envs = 2\nsegment_len = 5\nepochs = 1\n"
    )
    assert trainer.total_updates == 2
    m = trainer.update()
    assert m["env_steps"] == 10
    report = trainer.policy().evaluate(config_toml="[scenario]\nn_humans = 0\n", n=4)
    assert report["n_episodes"] == 4 and report["collision_rate"] == 0.0
    assert trainer.policy().evaluate("fov-90", n=2)["suite"] == "fov-90"

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "t.ckpt")
        trainer.save(path)
        resumed = cn.Trainer.resume(path)
        assert resumed.update_idx == 1
        assert repr(resumed.update()) == repr(trainer.update())
        p2 = os.path.join(tmp, "p.ckpt")
        policy.save(p2)
        assert cn.Policy.load(p2).tensor("log_std") == policy.tensor("log_std")

    print("crowdnav_py smoke test passed")


if __name__ == "__main__":
    main()
