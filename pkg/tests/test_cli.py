import json
import subprocess
import sys

import pytest

from gammaflow.cli import FIXTURES, config_schema, fixtures, load_fixture, resolve_config, run
from gammaflow.io import current_from_json, current_to_json, json_text, sha256


def _run(tmp_path, kind, cfg, *extra):
    c = tmp_path / f"{kind}.json"
    c.write_text(json.dumps(cfg))
    out = tmp_path / f"out_{kind}"
    return run([kind, "--config", str(c), "--out", str(out), *extra]), out


def test_fixture_listing_stable():
    assert {n.rsplit(".", 1)[0] for n in fixtures()} >= set(FIXTURES)
    for name in FIXTURES:
        assert load_fixture(name)


@pytest.mark.parametrize("name", ["dipole", "three_atoms", "square_loop"])
def test_fixture_round_trip_bytes(name):
    raw = fixtures()[name + ".json"].read_text()
    obj = json.loads(raw)
    obj["current"] = current_to_json(current_from_json(obj["current"]), obj["current"].get("source"))
    assert json_text(obj) == raw


def test_selftest(tmp_path):
    assert run(["selftest", "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["status"] == 0


def test_console_script_usage_exit(tmp_path):
    r = subprocess.run([sys.executable, "-m", "gammaflow.cli", "bogus"], capture_output=True)
    assert r.returncode == 1
    r = subprocess.run([sys.executable, "-m", "gammaflow.cli", "decompose", "--out", str(tmp_path)],
                       capture_output=True)
    assert r.returncode == 1


@pytest.mark.parametrize("cfg", [
    {"params": {"current": {"fixture": "dipole"}, "p": 1.9}},                 # missing alpha
    {"params": {"current": {"fixture": "dipole"}, "p": 2.5, "alpha": 0.9}},   # p out of range
    {"params": {"current": {"fixture": "nope"}, "p": 1.9, "alpha": 0.9}},
    {"params": {"current": {"fixture": "dipole"}, "p": 1.9, "alpha": 0.9, "extra": 1}},
    {"bogus": 1, "params": {}},
])
def test_schema_errors_exit_one(tmp_path, cfg):
    code, out = _run(tmp_path, "decompose", cfg)
    assert code == 1
    assert not (out / "manifest.json").exists()


def test_minimize_flag_only_for_minimize(tmp_path):
    code, _ = _run(tmp_path, "decompose", {"params": {"current": {"fixture": "dipole"}, "p": 1.9, "alpha": 0.9}},
                   "--degree", "2")
    assert code == 1


def test_decompose_dipole(tmp_path):
    code, out = _run(tmp_path, "decompose", {"params": {"current": {"fixture": "dipole"}, "p": 1.9, "alpha": 0.9}})
    assert code == 0
    obj = json.loads((out / "decomposition.json").read_text())
    assert obj["X"]["atoms"] == []
    assert len(obj["S"]["segments"]) == 1
    man = json.loads((out / "manifest.json").read_text())
    for name, digest in man["outputs"].items():
        assert sha256(out / name) == digest
    assert man["units"]["ledger.csv"]["alpha_k"] == "length"


def test_decompose_bounds_admissible(tmp_path):
    code, out = _run(tmp_path, "decompose", {"params": {"current": {"fixture": "dipole"}, "p": 1.998,
                                                         "alpha": 0.95, "check_bounds": True}})
    assert code == 0
    assert json.loads((out / "decomposition.json").read_text())["bounds"]["mass_ok"]


def test_invariant_failure_exit_two(tmp_path, monkeypatch):
    import gammaflow.decomposition as dec
    real = dec.verify_bounds

    def broken(*a, **k):
        rep = real(*a, **k)
        rep.mass_rhs = -1.0
        return rep
    monkeypatch.setattr(dec, "verify_bounds", broken)
    code, out = _run(tmp_path, "decompose", {"params": {"current": {"fixture": "dipole"}, "p": 1.998,
                                                         "alpha": 0.95, "check_bounds": True}})
    assert code == 2
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == 2 and "bounds" in man["message"]


@pytest.mark.parametrize("golden", sorted(json.loads(fixtures()["golden_configs.json"].read_text())))
def test_goldens(tmp_path, golden):
    entry = json.loads(fixtures()["golden_configs.json"].read_text())[golden]
    code, out = _run(tmp_path, entry["kind"], entry["config"])
    assert code == 0
    assert (out / entry["output"]).read_bytes() == fixtures()[golden].read_bytes()


def test_thread_count_does_not_change_outputs(tmp_path):
    cfg = {"params": {"current": {"fixture": "three_atoms"}, "p_values": [1.2, 1.3]}}
    c = tmp_path / "c.json"
    c.write_text(json.dumps(cfg))
    outs = []
    for t in (1, 8):
        o = tmp_path / f"t{t}"
        assert run(["sweep", "--config", str(c), "--out", str(o), "--threads", str(t)]) == 0
        outs.append(o)
    names = sorted(p.name for p in outs[0].iterdir() if p.name != "manifest.json")
    assert names
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()


def test_minimize_cli(tmp_path):
    out = tmp_path / "m"
    assert run(["minimize", "--out", str(out), "--degree", "1", "--grid", "40", "--p", "1.6"]) == 0
    rows = (out / "vortices.csv").read_text().splitlines()
    assert rows[0] == "x,y,multiplicity" and len(rows) == 2
    assert json.loads((out / "energy.json").read_text())["total"] > 0
    out2 = tmp_path / "m2"
    assert run(["minimize", "--out", str(out2), "--grid", "40", "--p", "1.5",
                "--warm-from", str(out / "field.sphf")]) == 0


def test_config_schema_closed():
    for kind in ("decompose", "sweep", "minimize"):
        s = config_schema(kind)
        assert s["additionalProperties"] is False
    cfg = resolve_config("minimize", {})
    assert cfg["params"]["grid"] == 128
