"""Smoke test for the bwk_lab extension module.

Build and run from the workspace root:

    cargo build -p bwk-py --release --features extension-module
    cp target/release/libbwk_lab.so crates/py/python/bwk_lab.so
    python3 crates/py/python/smoke_test.py
"""

import json
import math

import bwk_lab


def main():
    k = bwk_lab.Instance.canonical()
    assert (k.num_arms, k.num_resources, k.horizon, k.budget) == (2, 2, 100, 50.0)
    gt = k.ground_truth()
    assert math.isclose(gt.opt_lp, 65.0, abs_tol=1e-9)
    assert math.isclose(gt.delta, 0.15, abs_tol=1e-9)
    assert math.isclose(gt.chi, 0.375, abs_tol=1e-9)
    assert abs(gt.sigma - 0.3347) < 1e-4
    assert gt.nondegenerate

    exact = bwk_lab.solve_lp([0.9, 0.5], [[1.0, 1.0], [1.0, 0.2]], [100.0, 50.0])
    assert exact.status == "optimal" and math.isclose(exact.value, 65.0, abs_tol=1e-9)
    approx = bwk_lab.solve_lp([0.9, 0.5], [[1.0, 1.0], [1.0, 0.2]], [100.0, 50.0], mode="approx", eps=0.02)
    assert abs(approx.value - 65.0) <= 2.0

    big = k.with_horizon(4096, 2048.0)
    a = bwk_lab.simulate(big, "alg1-quantum", seed=7)
    b = bwk_lab.simulate(big, "alg1-quantum", seed=7)
    assert a.to_json() == b.to_json()
    assert a.tau <= 4096 and sum(a.pulls) == a.tau
    assert min(a.remaining_budget) >= -1e-9

    planted = bwk_lab.Instance.planted(seed=1)
    trace = bwk_lab.simulate(planted, "alg2-classical", seed=3, run_config=json.dumps({"c1": 1.0}))
    assert json.loads(trace.to_json())["algorithm"] == "alg2-classical"

    degenerate = bwk_lab.Instance.from_json(json.dumps({
        "m": 2, "d_user": 1, "T": 1000, "B": 500,
        "arms": [{"atoms": [{"p": 1.0, "reward": 0.5, "cost": [0.5]}]}] * 2,
    }))
    try:
        bwk_lab.simulate(degenerate, "alg2-quantum")
    except ValueError as e:
        assert "nondegeneracy" in str(e)
    else:
        raise AssertionError("degenerate instance accepted")

    assert bwk_lab.qmc1_queries(0.1, 0.01) > 0
    assert abs(sum(bwk_lab.ae_outcome_law(0.3, 16)) - 1.0) < 1e-10
    assert bwk_lab.hoeffding_radius(100, 1000) > 0
    print("bwk_lab smoke test: ok")


if __name__ == "__main__":
    main()
