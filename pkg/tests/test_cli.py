import json

import numpy as np

from balance.cli import EXIT_HALT, EXIT_OK, EXIT_SDP, EXIT_USAGE, main
from balance.instance import load_instance, save_instance, VectorInstance


def gen(tmp_path, *extra, n=12, d=2):
    out = tmp_path / "inst.json"
    assert main(["gen", "--n", str(n), "--d", str(d), "--seed", "3", "--out", str(out), *extra]) == 0
    return out


def test_gen_round_trip(tmp_path):
    path = gen(tmp_path)
    inst = load_instance(path)
    assert (inst.n, inst.d) == (12, 2)
    assert gen(tmp_path).read_bytes() == path.read_bytes()


def test_gen_zero_sum(tmp_path):
    assert load_instance(gen(tmp_path, "--zero-sum")).zero_sum
    inst = load_instance(gen(tmp_path, "--zero-sum", "--mode", "LINF_UNIT"))
    assert inst.zero_sum and inst.n > 12


def test_oracle(tmp_path, capsys):
    path = gen(tmp_path)
    assert main(["oracle", "--input", str(path)]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["optimum"] > 0 and len(out["coloring"]) == 12


def test_oracle_too_large(tmp_path, capsys):
    path = gen(tmp_path, n=20)
    assert main(["oracle", "--input", str(path)]) == EXIT_USAGE


def test_run_writes_outputs(tmp_path, capsys):
    gen(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"input": "inst.json", "seed": 1, "dt": 0.05}))
    traj, log = tmp_path / "t.csv", tmp_path / "m.jsonl"
    rc = main(["run", "--config", str(cfg), "--trajectory", str(traj), "--merge-log", str(log)])
    assert rc == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["converged"] and len(summary["coloring"]) == 12
    assert traj.read_text().startswith("step,t,")
    assert all(json.loads(line)["kind"] for line in log.read_text().splitlines())


def test_run_halt_exit_code(tmp_path, capsys):
    gen(tmp_path, n=64, d=4)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"input": "inst.json", "dt": 0.05, "abort_policy": "HALT",
                               "C_tau": 0.01}))
    assert main(["run", "--config", str(cfg)]) == EXIT_HALT


def test_run_sdp_failure_exit_code(tmp_path, capsys):
    # a negative tolerance can never be met, which drives every solve into the failure path
    inst = VectorInstance(np.array([[1.0, 1.0]]))
    save_instance(inst, tmp_path / "inst.json")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"input": "inst.json", "resolve_tol": -1.0, "max_sdp_iter": 1}))
    rc = main(["run", "--config", str(cfg), "--debug-dir", str(tmp_path / "dbg")])
    assert rc == EXIT_SDP
    assert any((tmp_path / "dbg").iterdir())


def test_run_generator_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"instance": {"n": 10, "d": 1}, "mode": "L2_TO_L2"}))
    assert main(["run", "--config", str(cfg), "--dt", "0.05", "--seed", "2"]) == EXIT_OK


def test_steinitz(tmp_path, capsys):
    path = gen(tmp_path, "--zero-sum", n=16)
    assert main(["steinitz", "--input", str(path), "--seed", "1", "--dt", "0.05"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    pi = json.loads(lines[0])
    info = json.loads(lines[1])
    assert sorted(pi) == list(range(16))
    assert info["max_prefix_norm"] >= 0


def test_steinitz_rejects_non_zero_sum(tmp_path, capsys):
    path = gen(tmp_path)
    assert main(["steinitz", "--input", str(path)]) == EXIT_USAGE


def test_experiment(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"instance": {"n": 10, "d": 2}, "algorithm": "RANDOM",
                               "trials": 3, "output": str(tmp_path / "out")}))
    assert main(["experiment", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "out" / "trials.csv").exists()


def test_missing_input(tmp_path, capsys):
    assert main(["oracle", "--input", str(tmp_path / "nope.json")]) == EXIT_USAGE
