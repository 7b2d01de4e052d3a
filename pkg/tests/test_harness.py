import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balance.harness import (
    BRUTE_FORCE,
    FULL_ASI,
    RANDOM,
    SI_ONLY,
    TRIAL_COLUMNS,
    ExperimentConfig,
    TooLarge,
    baseline_random,
    baseline_si_only,
    brute_force_prefix_opt,
    run_experiment,
)
from balance.instance import VectorInstance, generate_random
from balance.walk import L2_TO_L2, ModeParams, run


def naive_opt(A):
    """Reference oracle: a plain loop over all 2^n sign vectors."""
    best = np.inf
    for signs in itertools.product([-1.0, 1.0], repeat=A.shape[1]):
        S = np.cumsum(A * np.array(signs), axis=1)
        best = min(best, np.max(np.linalg.norm(S, axis=0)))
    return best


def test_oracle_examples():
    assert brute_force_prefix_opt(VectorInstance(np.array([[1.0, 1.0]]))) == 1.0
    assert brute_force_prefix_opt(VectorInstance(np.array([[1.0, 1.0, 1.0]]))) == 1.0
    v = np.array([[0.6], [0.8]])
    assert brute_force_prefix_opt(VectorInstance(v)) == pytest.approx(1.0)


def test_oracle_coloring_attains_value():
    inst = generate_random(11, 3, seed=2)
    best, signs = brute_force_prefix_opt(inst, return_coloring=True)
    S = np.cumsum(inst.A * signs, axis=1)
    assert np.max(np.linalg.norm(S, axis=0)) == pytest.approx(best, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 9), d=st.integers(1, 3), seed=st.integers(0, 10_000))
def test_oracle_matches_naive(n, d, seed):
    inst = generate_random(n, d, seed=seed)
    assert brute_force_prefix_opt(inst) == pytest.approx(naive_opt(inst.A), abs=1e-12)


def test_oracle_too_large():
    with pytest.raises(TooLarge):
        brute_force_prefix_opt(generate_random(17, 1, seed=0))


def test_random_baseline():
    inst = VectorInstance(np.array([[0.6], [0.8]]))
    assert baseline_random(inst, 0).max_l2 == pytest.approx(1.0)
    inst = generate_random(50, 3, seed=1)
    a, b = baseline_random(inst, 7), baseline_random(inst, 7)
    assert np.array_equal(a.coloring, b.coloring)


@pytest.mark.parametrize("seed", range(4))
def test_oracle_lower_bounds_everything(seed):
    inst = generate_random(10, 2, seed=100 + seed)
    opt = brute_force_prefix_opt(inst)
    params = ModeParams.default(L2_TO_L2, 10, 2, dt=0.05)
    assert run(inst, params, seed).final_max_l2 >= opt - 1e-9
    assert baseline_si_only(inst, params, seed).final_max_l2 >= opt - 1e-9
    assert baseline_random(inst, seed).max_l2 >= opt - 1e-9


def test_si_only_relaxation():
    inst = generate_random(64, 4, seed=3)
    params = ModeParams.default(L2_TO_L2, 64, 4, dt=0.05)
    full = run(inst, params, 1)
    si = baseline_si_only(inst, params, 1)
    assert si.sdp_passes / si.sdp_checks >= full.sdp_passes / full.sdp_checks
    assert all(r["n_guards"] >= 0 for r in si.records)


def test_config_validation(tmp_path):
    with pytest.raises(TooLarge):
        ExperimentConfig({"n": 20, "d": 2}, algorithm=BRUTE_FORCE)
    with pytest.raises(ValueError):
        ExperimentConfig({"n": 20, "d": 2}, algorithm="GREEDY")
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"instance": {"n": 4, "d": 1}, "colour": "red"})
    cfg = ExperimentConfig({"n": 4, "d": 1}, trials=4, seeds=[9, 3])
    assert cfg.trial_seeds() == [9, 3, 4, 5]


def test_zero_trials(tmp_path):
    out = run_experiment(ExperimentConfig({"n": 8, "d": 2}, trials=0, output=str(tmp_path)))
    assert (tmp_path / "trials.csv").read_text().strip() == ",".join(TRIAL_COLUMNS)
    assert out["summary"]["aggregate"]["trials"] == 0


@pytest.mark.parametrize("algorithm", [FULL_ASI, SI_ONLY, RANDOM, BRUTE_FORCE])
def test_experiment_reproducible(tmp_path, algorithm):
    cfg = dict(instance={"n": 12, "d": 2, "seed": 4}, algorithm=algorithm, trials=2,
               seeds=[1, 2], dt=0.05, write_trajectories=True)
    run_experiment(ExperimentConfig(output=str(tmp_path / "a"), **cfg))
    run_experiment(ExperimentConfig(output=str(tmp_path / "b"), **cfg))
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.name != "timing.json")
    assert "trials.csv" in names and "summary.json" in names
    for name in names:
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        if name == "summary.json":
            # only the output path differs between the two configs
            a, b = (json.loads(x) for x in (a, b))
            a["config"].pop("output"), b["config"].pop("output")
        assert a == b


def test_experiment_from_file(tmp_path):
    from balance.instance import save_instance
    save_instance(generate_random(6, 2, seed=0), tmp_path / "i.json")
    cfg = ExperimentConfig({"file": str(tmp_path / "i.json")}, algorithm=BRUTE_FORCE,
                           output=str(tmp_path / "o"))
    row = run_experiment(cfg)["rows"][0]
    assert row["n"] == 6 and row["ratio_l2"] > 0
