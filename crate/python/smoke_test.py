"""Smoke test for the `dllm` extension module.

Build and install first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/dllm-*.whl
"""

import json
import math

import dllm


def main():
    a = dllm.embed("collect the wood")
    b = dllm.embed("collect the stone")
    assert abs(sum(x * x for x in a) - 1.0) < 1e-9
    assert 0.5 < dllm.cosine(a, b) < 1.0

    r = dllm.intrinsic_rewards([[0.9, 0.1], [0.95, 0.2]], [3.0, 1.0])
    assert abs(r[0] - 2.7) < 1e-12 and r[1] == 0.0

    ret = dllm.lambda_returns([1.0, 1.0], [1.0, 1.0], [0.0, 0.0, 10.0], lam=0.0, gamma=0.5)
    assert ret == [1.0, 6.0]

    th = dllm.TwoHot()
    assert abs(th.decode(th.encode(3.7)) - 3.7) < 1e-9

    nov = dllm.Novelty(seed=1)
    before = nov.errors(["collect the wood"])[0]
    for _ in range(50):
        nov.update(["collect the wood", "place the table"])
    assert nov.errors(["collect the wood"])[0] < before

    env = dllm.MiniGrid()
    obs, caption = env.reset(7)
    assert len(obs) > 0 and caption
    goals = env.scripted_goals()
    assert goals and all(env.assess_goal(g)["correct"] for g in goals)
    obs, reward, cont, event = env.step("craft_stone_pickaxe")
    assert event == "noop" and cont

    t = dllm.Trainer(
        "total_steps = 300\nbatch_size = 2\nbatch_length = 8\ntrain_start = 32\n"
        "groups = 2\nclasses = 4\ndeter = 16\nhidden = 16\nhorizon = 5\nimagine_starts = 8\n"
    )
    t.act(64)
    losses = t.train_step()
    assert all(math.isfinite(v) for v in losses.values())
    summary = json.loads(t.run())
    assert summary["steps"] == 300
    assert len(t.evaluate(2, 3)) == 2
    print("ok", summary["final_mean_achievements"])


if __name__ == "__main__":
    main()
