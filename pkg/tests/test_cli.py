import json

import pytest

from cwmdp.cli import main, resolve_seed, validate


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def _run(tmp_path, experiment, cfg, *extra, out="out"):
    return main([experiment, "--config", _write(tmp_path, cfg), "--out",
                 str(tmp_path / out), *extra])


def test_validate_examples():
    bad = {"params": {"beta": 0.5}, "regime": {"kind": "mdp", "k": 0, "b_exponent": 0.6}}
    assert any("n^0.2" in v for v in validate(bad))
    assert validate({"regime": {"kind": "mdp_temp", "kappa": -1.0}})
    good = {"params": {"beta": 0.5}, "regime": {"kind": "mdp", "k": 0, "m": 0.0}, "n": 10_000}
    assert validate(good) == []
    assert validate({}) == ["empty configuration"]


def test_validate_flatness_mismatch():
    cfg = {"params": {"beta": 0.5}, "regime": {"kind": "clt", "k": 1, "m": 0.0}}
    assert validate(cfg)


def test_seed_precedence(monkeypatch):
    monkeypatch.setenv("CW_SEED", "17")
    assert resolve_seed({"seed": 3}, 5) == (5, "cli")
    assert resolve_seed({"seed": 3}, None) == (17, "env")
    monkeypatch.delenv("CW_SEED")
    assert resolve_seed({"seed": 3}, None) == (3, "config")
    seed, source = resolve_seed({}, None)
    assert source == "random" and 0 <= seed < 2**63


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_exit_codes(tmp_path):
    assert _run(tmp_path, "table1", "") == 2
    assert _run(tmp_path, "table1", "{}") == 2
    assert _run(tmp_path, "table1", "not json") == 2
    with pytest.raises(SystemExit) as exc:
        main(["nonsense", "--config", _write(tmp_path, {"a": 1})])
    assert exc.value.code == 2
    cfg = {"params": {"beta": 0.5}, "regime": {"kind": "mdp", "k": 0, "b_exponent": 0.6},
           "n": 1000, "test_functions": []}
    assert _run(tmp_path, "genconv", cfg) == 3
    big = {"hamiltonian": {"drift": [0.0, -1.0], "D": 2.0}, "x_start": 0.0, "x_end": 1e300,
           "T": 1.0}
    assert _run(tmp_path, "optimal-path", big) == 4


def test_table1(tmp_path):
    assert _run(tmp_path, "table1", {"experiment": "table1", "seed": 1}) == 0
    rows = json.loads((tmp_path / "out" / "table1.json").read_text())
    assert len(rows) == 9
    assert {r["alpha"] for r in rows} >= {"0", "1/2", "1/4"}
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert set(manifest["files"]) == {"table1.csv", "table1.json"}
    assert manifest["seed"] == 1 and manifest["seed_source"] == "config"


def test_reruns_are_byte_identical(tmp_path):
    cfg = {"params": {"beta": 1.5}, "regime": {"kind": "clt", "k": 0, "m": "positive_root"},
           "n": 2000, "n_replicas": 200, "T": 0.5, "dt": 0.01}
    for out in ("a", "b"):
        assert _run(tmp_path, "clt-compare", cfg, "--seed", "42", out=out) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    for name in ("ks_report.json", "samples.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    ma.pop("wall_time_s"), mb.pop("wall_time_s")
    assert ma == mb
    assert sorted(p.name for p in a.iterdir()) == sorted(ma["files"] + ["manifest.json"])
    assert b"\r\n" not in (a / "samples.csv").read_bytes()


@pytest.mark.parametrize("experiment,cfg,key,expected", [
    ("optimal-path", {"params": {"beta": 0.5}, "regime": {"kind": "mdp", "k": 0, "m": 0.0},
                      "x_start": 0.0, "x_end": 1.0, "T": 20.0}, "action", 0.25),
    ("action", {"params": {"beta": 0.5}, "regime": {"kind": "mdp", "k": 0, "m": 0.0}},
     "action", 0.25),
    ("quasipotential", {"params": {"beta": 1.0}, "regime": {"kind": "mdp", "k": 1, "m": 0.0}},
     "residual", 0.0),
    ("containment", {"hamiltonian": {"drift": [0.0], "D": 2.0}}, "grid_sup", 1.0),
])
def test_experiments_end_to_end(tmp_path, experiment, cfg, key, expected):
    assert _run(tmp_path, experiment, cfg, "--seed", "1") == 0
    summary = json.loads((tmp_path / "out" / "manifest.json").read_text())["summary"]
    assert summary[key] == pytest.approx(expected, rel=1e-3, abs=1e-9)


def test_other_experiments_run(tmp_path):
    base = {"params": {"beta": 0.5}, "regime": {"kind": "clt", "k": 0, "m": 0.0}}
    assert _run(tmp_path, "simulate", dict(base, n=400, n_replicas=5, record_paths=True),
                "--seed", "2", out="s") == 0
    assert (tmp_path / "s" / "paths.csv").read_text().startswith("replica,t,y\n")
    assert _run(tmp_path, "sde", dict(base, n_paths=50, T=0.2), "--seed", "2", out="d") == 0
    assert _run(tmp_path, "stationary", base, "--seed", "2", out="st") == 0
    st = json.loads((tmp_path / "st" / "stationary.json").read_text())
    assert "ratio" in st["constant_report"]
    g = {"params": {"beta": 0.5}, "regime": {"kind": "mdp", "k": 0, "m": 0.0},
         "ns": [1000, 10_000]}
    assert _run(tmp_path, "genconv", g, "--seed", "2", out="g") == 0
    assert (tmp_path / "g" / "ladder_2.csv").exists()
