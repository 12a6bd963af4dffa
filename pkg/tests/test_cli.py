import csv
import json

import pytest

from jumptime.cli import main
from jumptime.config import ConfigError, ExperimentConfig, LockError, output_lock


def _run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--output", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    return code, out, manifest


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"N": 5, "colour": "red"})


def test_hash_is_stable_and_sensitive():
    a = ExperimentConfig.from_dict({"N": 10})
    b = ExperimentConfig.from_dict(json.loads(a.to_json()))
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != ExperimentConfig.from_dict({"N": 11}).content_hash()


def test_lock_is_exclusive(tmp_path):
    with output_lock(tmp_path / "run"):
        with pytest.raises(LockError):
            with output_lock(tmp_path / "run"):
                pass
    with output_lock(tmp_path / "run"):
        pass


def test_simulate_writes_outputs(tmp_path):
    code, out, man = _run(tmp_path, "sim", "simulate", "--trajectories", "20", "--lattice-size", "32")
    assert code == 0 and man["status"] == "ok"
    assert man["schemas"]["observables.csv"] == "observables/1"
    rows = list(csv.DictReader(open(out / "observables.csv")))
    assert {r["observable"] for r in rows} == {"x", "popA", "popB"}


def test_outputs_reproducible(tmp_path):
    args = ("simulate", "--trajectories", "10", "--lattice-size", "32", "--base-seed", "5")
    _, a, man_a = _run(tmp_path, "a", *args)
    _, b, man_b = _run(tmp_path, "b", *args)
    assert man_a["config_hash"] == man_b["config_hash"]
    assert (a / "observables.csv").read_bytes() == (b / "observables.csv").read_bytes()


def test_boundary_guard_flags_small_lattice(tmp_path):
    code, _, man = _run(tmp_path, "small", "simulate", "--trajectories", "10", "--lattice-size", "6")
    assert code == 1 and "seam" in man["error"]


def test_config_error_exit_code(tmp_path, capsys):
    code = main(["simulate", "--model-json", '{"builtin": "nope"}', "--output", str(tmp_path / "x")])
    assert code == 2
    assert main(["simulate", "--dissipator-json", '{"type": "teleport"}', "--output", str(tmp_path / "y")]) == 2


def test_dark_contact_exit_code(tmp_path):
    code, _, man = _run(tmp_path, "dark", "topology", "--model-json", '{"builtin": "ssh", "v": 0.5, "w": 0.5}')
    assert code == 3 and man["exit_code"] == 3


def test_topology_sweep_marks_dark_rows(tmp_path):
    sweep = json.dumps({"param": "v", "values": [0.2, 0.5, 0.8]})
    code, out, _ = _run(tmp_path, "sweep", "topology", "--model-json", '{"builtin": "ssh", "v": 0.2, "w": 0.5}',
                        "--sweep-json", sweep)
    rows = list(csv.DictReader(open(out / "phase_diagram.csv")))
    assert code == 0 and [r["T"] for r in rows][1] == "nan"
    assert float(rows[0]["T"]) == pytest.approx(1.0, abs=1e-8)


def test_jumptime_map_and_walltime(tmp_path):
    code, out, _ = _run(tmp_path, "map", "jumptime-map", "--lattice-size", "16", "--n-max", "2")
    rows = list(csv.DictReader(open(out / "jumptime_map.csv")))
    assert code == 0 and float(rows[-1]["kernel_max_diff"]) < 1e-9
    code, out, _ = _run(tmp_path, "wall", "walltime", "--lattice-size", "16", "--trajectories", "20",
                        "--times", "0.5,1")
    assert code == 0 and (out / "walltime.csv").exists()


def test_steady_state_command(tmp_path):
    sweep = json.dumps({"ratios": [0.5, 1.0, 2.0], "gammas": [0.5]})
    code, out, man = _run(tmp_path, "ss", "steady-state", "--sweep-json", sweep)
    rows = list(csv.DictReader(open(out / "crossover.csv")))
    assert code == 0 and len(rows) == 3 and rows[1]["a_times_T"] == "nan"
    assert man["schemas"]["crossover.csv"] == "crossover/1"


def test_fig2_small(tmp_path):
    code, out, man = _run(tmp_path, "fig2", "fig2", "--trajectories", "10")
    assert code == 0
    assert {"transport.csv", "histograms.csv", "skewness.csv"} <= set(man["files"])
    rows = list(csv.DictReader(open(out / "histograms.csv")))
    assert {r["n"] for r in rows} == {"0", "3"}


def test_verify_reports_failure(tmp_path, capsys):
    code, out, _ = _run(tmp_path, "verify", "verify", "--only", "6a,6c")
    text = capsys.readouterr().out
    assert code == 1 and "[PASS]  6a" in text and "[FAIL]  6c" in text
    code, _, _ = _run(tmp_path, "verify2", "verify", "--only", "6a,6b")
    assert code == 0
