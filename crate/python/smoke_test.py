"""Smoke test for the cmamae_py extension.

Build and install first:

    cd crates/python && maturin build --release -o dist && pip install dist/*.whl
"""

import math

import cmamae_py as qd


def check_strategy():
    for kind in ["full-cma", "sep-cma", "lm-ma", "openai"]:
        es = qd.EvolutionStrategy(kind, [1.0] * 10, sigma0=0.3, batch_size=12, seed=7)
        for _ in range(30):
            xs = es.ask()
            f = [-sum(v * v for v in x) for x in xs]
            es.tell(xs, f)
        assert es.generation == 30
        assert all(math.isfinite(v) for v in es.mean)
        assert len(es.covariance()) == 10
        print(f"{kind:>9}: |m| = {math.sqrt(sum(v * v for v in es.mean)):.4f}")


def check_archive():
    a = qd.Archive([10, 10], [-1.0, -1.0], [1.0, 1.0], alpha=0.1, min_f=0.0)
    imp, accepted, cell = a.insert([0.0], 1.0, [0.05, 0.05])
    assert accepted and imp == 1.0
    assert abs(a.threshold(cell) - 0.1) < 1e-12
    _, accepted, _ = a.insert([0.0], 0.05, [0.05, 0.05])
    assert not accepted
    assert len(a) == 1
    assert a.stats()["qd_score"] == 1.0


def check_run():
    r = qd.run(seed=3, domain="arm-100", algorithm="sep-cma", iterations=20, psi=2)
    assert r["evaluations"] == 20 * 2 * 40
    assert 0.0 < r["coverage"] <= 1.0
    print("run:", r)


if __name__ == "__main__":
    check_strategy()
    check_archive()
    check_run()
    print("ok")
