import math

import pytest

import ncmdp


def test_objectives_telescope():
    rewards = [0.5, -2.0, 3.25, 1.0]
    for oid in ncmdp.objective_ids():
        f = ncmdp.Objective(oid)
        assert math.isclose(sum(f.adapted_rewards(rewards)), f.value(rewards), rel_tol=1e-9, abs_tol=1e-12)


def test_min_by_hand():
    f = ncmdp.Objective("min")
    assert f.adapted_rewards([3.0, 5.0, 1.0]) == [3.0, 0.0, -2.0]
    s = f.update(f.init(), 3.0)
    assert s.t == 1
    assert f.adapted_reward(s, 1.0) == -2.0


def test_errors():
    with pytest.raises(ncmdp.Error):
        ncmdp.Objective("nope")
    with pytest.raises(ncmdp.Error):
        ncmdp.Objective("harmonic").value([1.0, 0.0])
    with pytest.raises(ValueError):
        ncmdp.bootstrap_ci([1.0])


def test_verify_and_toy():
    checks = ncmdp.verify()
    assert checks and all(ok for _, ok, _ in checks)
    ours, cui = ncmdp.toy_returns()
    assert math.isclose(ours, -0.15, abs_tol=1e-12)
    assert math.isclose(cui, -0.5, abs_tol=1e-12)


def test_grid():
    tiles = ncmdp.grid_tiles(2, 0)
    assert len(tiles) == 4
    runs = ncmdp.run_grid(n=3, grids=1, seeds=2, steps=3000)
    assert len(runs) == 2
    assert runs[0]["oracle_return"] == ncmdp.grid_oracle(3, runs[0]["grid_seed"])
    mean, lo, hi = ncmdp.bootstrap_ci([r["final_return"] for r in runs] + [0.0], 500, 1)
    assert lo <= mean <= hi
