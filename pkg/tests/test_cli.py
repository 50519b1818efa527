import csv
import json

import pytest

from multisum.cli import (EXIT_CONFIG, EXIT_DEPTH, EXIT_OK, EXIT_STARVED, EXIT_VERIFY, EXIT_WITNESS, main,
                          parse_config)
from multisum.errors import ConfigError
from multisum.perms import Permutation

BASE = {"n": 2, "series": "alternating_sqrt", "targets": {"1 2": 1, "2 1": -1},
        "budget": {"depth": 2, "slab_budget": 2000}, "tolerance": 0.2}


def _run(tmp_path, cfg, command, *extra, name="run"):
    path = tmp_path / f"{name}.json"
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    out = tmp_path / name
    return main(["--config", str(path), "--out", str(out), "--command", command, *extra]), out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_build_then_verify(tmp_path):
    code, out = _run(tmp_path, BASE, "build")
    assert code == EXIT_OK
    rows = _rows(out / "assignment.csv")
    assert rows[0] == ["j1", "j2", "m", "a_m", "slab_d", "slab_mu"]
    assert len(rows) - 1 == 2 * 2 * 2000
    code, out = _run(tmp_path, BASE, "verify")
    assert code == EXIT_OK
    assert (out / "assignment.csv").exists()
    checks = _rows(out / "verification.csv")
    assert checks[0] == ["sigma", "k", "measured", "target", "bound", "pass"]
    assert len(checks) - 1 == 4 and all(r[-1] == "true" for r in checks[1:])


def test_crlf_and_repr_floats(tmp_path):
    _, out = _run(tmp_path, BASE, "build")
    raw = (out / "assignment.csv").read_bytes()
    assert raw.count(b"\r\n") == raw.count(b"\n")
    first = _rows(out / "assignment.csv")[1]
    assert float(first[3]) == (-1) ** (int(first[2]) + 1) / int(first[2]) ** 0.5


def test_missing_permutation(tmp_path):
    cfg = dict(BASE, targets={"1 2": 1})
    with pytest.raises(ConfigError) as exc:
        parse_config(cfg)
    assert "2 1" in exc.value.path
    code, _ = _run(tmp_path, cfg, "build")
    assert code == EXIT_CONFIG


def test_default_wildcard():
    cfg = parse_config(dict(BASE, n=3, targets={"default": 0.5, "2 1 3": {"linear": 1.0}}))
    assert cfg.targets(Permutation.of(1, 2, 3), 4) == 0.5
    assert cfg.targets(Permutation.of(2, 1, 3), 4) == 4.0
    assert cfg.limits is None


@pytest.mark.parametrize("bad", ["{not json", json.dumps({"n": 2}), json.dumps(dict(BASE, tolerance=-1)),
                                 json.dumps(dict(BASE, series="nope"))])
def test_bad_configs(tmp_path, bad):
    code, _ = _run(tmp_path, bad, "build")
    assert code == EXIT_CONFIG


def test_split(tmp_path):
    code, out = _run(tmp_path, dict(BASE, horizon=10_000), "split")
    assert code == EXIT_OK
    rows = _rows(out / "partition.csv")
    assert len(rows) == 10_001
    assert rows[1][0] == "1" and int(rows[1][1]) >= 1


def test_deterministic_outputs(tmp_path):
    _, a = _run(tmp_path, BASE, "verify", name="a")
    _, b = _run(tmp_path, BASE, "verify", "--seed", "7", name="b")
    for f in ("assignment.csv", "verification.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_verification_failure(tmp_path):
    code, out = _run(tmp_path, BASE, "verify", "--tolerance", "1e-12")
    assert code == EXIT_VERIFY
    assert any(r[-1] == "false" for r in _rows(out / "verification.csv")[1:])


def test_starvation(tmp_path):
    cfg = dict(BASE, series={"terms": [1.0, -1.0, 0.5]},
               budget={"depth": 1, "slab_budget": 50, "max_horizon": 4096})
    code, _ = _run(tmp_path, cfg, "build")
    assert code == EXIT_STARVED


def test_witness_failure(tmp_path):
    cfg = dict(BASE, series="alternating_harmonic", witness={"horizon": 1000, "bound": 50})
    code, _ = _run(tmp_path, cfg, "build")
    assert code == EXIT_WITNESS


def test_depth_exit_code_is_distinct():
    assert len({EXIT_OK, EXIT_CONFIG, EXIT_STARVED, EXIT_VERIFY, EXIT_WITNESS, EXIT_DEPTH}) == 6


def test_fubini_command(tmp_path):
    cfg = dict(BASE, targets={"1 2": 2.0, "2 1": -1.0}, budget={"depth": 3, "slab_budget": 5000})
    code, out = _run(tmp_path, cfg, "fubini")
    assert code == EXIT_OK
    rows = _rows(out / "fubini.csv")[1:]
    assert len(rows) == 2 * 3
    for sigma, _, quad, coeff in rows:
        target = 2.0 if sigma == "1 2" else -1.0
        assert abs(float(coeff) - target) <= 0.05
        assert quad == "nan"  # prefix boxes hold far more than max_peaks peaks


def test_fubini_explicit_boxes(tmp_path):
    cfg = dict(BASE, targets={"1 2": 2.0, "2 1": -1.0}, budget={"depth": 3, "slab_budget": 5000},
               fubini={"boxes": [[3.5, 3.5], [4.2, 2.7]]})
    code, out = _run(tmp_path, cfg, "fubini")
    assert code == EXIT_OK
    rows = _rows(out / "fubini.csv")[1:]
    assert len(rows) == 4
    for _, _, quad, coeff in rows:
        assert abs(float(quad) - float(coeff)) <= 1e-3 * 20


def test_fubini_needs_limits(tmp_path):
    code, _ = _run(tmp_path, dict(BASE, targets={"1 2": {"linear": 1}, "2 1": 0}), "fubini")
    assert code == EXIT_CONFIG
