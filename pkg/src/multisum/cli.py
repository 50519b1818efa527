"""Batch interface: JSON configuration in, CSV artifacts out.

Exit codes: 0 pass, 2 configuration, 3 starvation, 4 quadrature,
5 verification failure, 6 convergability witness failed, 7 depth or stage
errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from . import fubini as fb
from .builder import Assignment, TruncationBudget, build_nd
from .errors import (ConfigError, DepthExceeded, MissingStage, NotConvergable, PhaseStarvation,
                     QuadratureFailure)
from .partition import DEFAULT_MAX_HORIZON, DEFAULT_THRESHOLD, IndexPartition
from .perms import Permutation, PermTargets, all_permutations, constant, corollary, explicit, linear
from .series import BUILTIN, SeriesSource, builtin, from_values, witness_convergability
from .verify import VerificationReport, verify_theorem

EXIT_OK, EXIT_CONFIG, EXIT_STARVED, EXIT_QUAD, EXIT_VERIFY, EXIT_WITNESS, EXIT_DEPTH = 0, 2, 3, 4, 5, 6, 7
COMMANDS = ("build", "verify", "split", "fubini")
DEFAULT_OUTPUTS = {"build": "assignment.csv", "verify": "verification.csv",
                   "split": "partition.csv", "fubini": "fubini.csv"}


@dataclass
class RunConfig:
    n: int
    series: SeriesSource
    targets: PermTargets
    limits: Optional[dict[Permutation, float]]  # set when every target is a single extended real
    budget: TruncationBudget
    tolerance: float
    horizon: int = 10_000
    witness: Optional[dict[str, float]] = None
    fubini: dict[str, Any] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_OUTPUTS))


def _num(value, path: str, positive: bool = False, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and (not float(value).is_integer()):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(path, "must be positive")
    return int(value) if integer else float(value)


def _extended(value, path: str) -> float:
    if isinstance(value, str):
        text = value.strip().lower().lstrip("+")
        if text in ("inf", "infinity"):
            return math.inf
        if text in ("-inf", "-infinity"):
            return -math.inf
        raise ConfigError(path, f"expected a number or ±inf, got {value!r}")
    return _num(value, path)


def _sequence(spec, path: str):
    """``(sequence, limit_or_None)`` from one target entry."""
    if isinstance(spec, (int, float, str)) and not isinstance(spec, bool):
        val = _extended(spec, path)
        return corollary(val), val
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(path, "expected a number, ±inf, or one of {constant|linear|explicit}")
    (kind, arg), = spec.items()
    if kind == "constant":
        return constant(_num(arg, f"{path}.constant")), None
    if kind == "linear":
        return linear(_num(arg, f"{path}.linear")), None
    if kind == "explicit":
        if not isinstance(arg, list) or not arg:
            raise ConfigError(f"{path}.explicit", "expected a non-empty list")
        return explicit([_num(v, f"{path}.explicit[{i}]") for i, v in enumerate(arg)]), None
    raise ConfigError(path, f"unknown target kind {kind!r}")


def _targets(n: int, raw, path: str = "targets"):
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object keyed by permutations")
    table, limits = {}, {}
    default = raw.get("default")
    for key in raw:
        if key == "default":
            continue
        try:
            sigma = Permutation.parse(key)
        except ValueError as exc:
            raise ConfigError(f"{path}.{key}", str(exc)) from None
        if sigma.n != n:
            raise ConfigError(f"{path}.{key}", f"permutation of {sigma.n} elements for n={n}")
        table[sigma], limits[sigma] = _sequence(raw[key], f"{path}.{key}")
    for sigma in all_permutations(n):
        if sigma in table:
            continue
        if default is None:
            raise ConfigError(f"{path}.{sigma.one_line()}", "no target and no default")
        table[sigma], limits[sigma] = _sequence(default, f"{path}.default")
    full = None if any(v is None for v in limits.values()) else limits
    return PermTargets(n, table), full


def _series(raw) -> SeriesSource:
    if isinstance(raw, str):
        if raw not in BUILTIN:
            raise ConfigError("series", f"unknown built-in {raw!r}; choose from {sorted(BUILTIN)}")
        return builtin(raw)
    if isinstance(raw, dict) and isinstance(raw.get("terms"), list) and raw["terms"]:
        return from_values([_num(v, f"series.terms[{i}]") for i, v in enumerate(raw["terms"])],
                           name=str(raw.get("name", "inline")))
    raise ConfigError("series", "expected a built-in name or {\"terms\": [...]}")


def parse_config(raw: dict) -> RunConfig:
    """Validate a decoded JSON configuration."""
    if not isinstance(raw, dict):
        raise ConfigError("$", "configuration must be a JSON object")
    if "n" not in raw:
        raise ConfigError("n", "missing")
    n = _num(raw["n"], "n", positive=True, integer=True)
    series = _series(raw.get("series", "alternating_sqrt"))
    if "targets" not in raw:
        raise ConfigError("targets", "missing")
    targets, limits = _targets(n, raw["targets"])
    b = raw.get("budget", {})
    if not isinstance(b, dict):
        raise ConfigError("budget", "expected an object")
    subs = b.get("sub_depths", {})
    if not isinstance(subs, dict):
        raise ConfigError("budget.sub_depths", "expected an object keyed by dimension")
    budget = TruncationBudget(
        depth=_num(b.get("depth", 2), "budget.depth", positive=True, integer=True),
        slab_budget=_num(b.get("slab_budget", 10_000), "budget.slab_budget", positive=True, integer=True),
        sub_depths={int(k): _num(v, f"budget.sub_depths.{k}", positive=True, integer=True)
                    for k, v in subs.items()},
        threshold=_num(b.get("threshold", DEFAULT_THRESHOLD), "budget.threshold", positive=True),
        max_horizon=_num(b.get("max_horizon", DEFAULT_MAX_HORIZON), "budget.max_horizon",
                         positive=True, integer=True),
    )
    tol = _num(raw.get("tolerance", 0.1), "tolerance", positive=True)
    horizon = _num(raw.get("horizon", 10_000), "horizon", positive=True, integer=True)
    witness = raw.get("witness")
    if witness is not None:
        if not isinstance(witness, dict):
            raise ConfigError("witness", "expected {\"horizon\": ..., \"bound\": ...}")
        witness = {"horizon": _num(witness.get("horizon"), "witness.horizon", positive=True, integer=True),
                   "bound": _num(witness.get("bound"), "witness.bound", positive=True)}
    fub = raw.get("fubini", {})
    if not isinstance(fub, dict):
        raise ConfigError("fubini", "expected an object")
    if fub.get("layout", fb.LATTICE) not in (fb.LATTICE, fb.UNIT_CUBE):
        raise ConfigError("fubini.layout", f"expected {fb.LATTICE!r} or {fb.UNIT_CUBE!r}")
    outputs = dict(DEFAULT_OUTPUTS)
    outputs.update(raw.get("outputs", {}))
    return RunConfig(n, series, targets, limits, budget, tol, horizon, witness, fub, outputs)


def load_config(path: Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError("--config", f"{path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    return parse_config(raw)


# -- CSV writers ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _writer(path: Path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\r\n")


def write_assignment(assignment: Assignment, path: Path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow([f"j{i}" for i in range(1, assignment.n + 1)] + ["m", "a_m", "slab_d", "slab_mu"])
        for j in sorted(assignment.entries):
            d, mu = assignment.slab[j]
            w.writerow([*j, assignment.entries[j], _fmt(assignment.values[j]), d, mu])


def write_verification(report: VerificationReport, path: Path) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["sigma", "k", "measured", "target", "bound", "pass"])
        for c in report.checks:
            w.writerow([c.sigma.one_line(), c.k, _fmt(c.measured), _fmt(c.target), _fmt(c.bound),
                        str(c.passed).lower()])


def write_split(partition: IndexPartition, horizon: int, path: Path) -> None:
    owner = partition.memberships(horizon)
    vals = partition.values(range(1, horizon + 1))
    fh, w = _writer(path)
    with fh:
        w.writerow(["m", "t", "a_m"])
        for m in range(1, horizon + 1):
            w.writerow([m, int(owner[m - 1]), _fmt(vals[m - 1])])


# -- orchestration ------------------------------------------------------------------

def _build(config: RunConfig) -> Assignment:
    if config.witness:
        witness_convergability(config.series, config.witness["horizon"], config.witness["bound"])
    if config.n < 2:
        raise ConfigError("n", "builds need n >= 2")
    return build_nd(config.n, config.series, None, config.targets, config.budget)


def _fubini(config: RunConfig, out: Path) -> int:
    if config.limits is None:
        raise ConfigError("targets", "fubini needs one extended real per integration order")
    quad_tol = _num(config.fubini.get("quad_tol", 1e-6), "fubini.quad_tol", positive=True)
    max_peaks = _num(config.fubini.get("max_peaks", 100), "fubini.max_peaks", positive=True, integer=True)
    field, _, _ = fb.build_field(config.n, config.limits, config.series, config.budget,
                                 quad_tol=min(quad_tol, 1e-8), layout=config.fubini.get("layout", fb.LATTICE))
    boxes = config.fubini.get("boxes", "prefix")
    fh, w = _writer(out / config.outputs["fubini"])
    with fh:
        w.writerow(["sigma", "box", "quadrature", "coefficient_sum"])
        for sigma in all_permutations(config.n):
            if boxes == "prefix":
                schedule = [fb.prefix_box(field, sigma, k) for k in range(1, config.budget.depth + 1)]
            elif isinstance(boxes, list):
                schedule = boxes
            else:
                raise ConfigError("fubini.boxes", "expected \"prefix\" or a list of boxes")
            for i, box in enumerate(schedule):
                if not isinstance(box, (list, tuple)) or len(box) != config.n:
                    raise ConfigError(f"fubini.boxes[{i}]", f"expected {config.n} limits")
                est = fb.iterated_integral(field, sigma, box, quad_tol, max_peaks)
                w.writerow([sigma.one_line(), ";".join(_fmt(b) for b in box), _fmt(est.quadrature),
                            _fmt(est.coefficient_sum)])
    return EXIT_OK


def run(config: RunConfig, command: str, out: Path) -> int:
    """Run one command, write its CSV artifacts into ``out`` and return the exit status."""
    if command not in COMMANDS:
        raise ConfigError("--command", f"expected one of {COMMANDS}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if command == "split":
        write_split(IndexPartition(config.series, config.budget.threshold, config.budget.max_horizon),
                    config.horizon, out / config.outputs["split"])
        return EXIT_OK
    if command == "fubini":
        return _fubini(config, out)
    assignment = _build(config)
    write_assignment(assignment, out / config.outputs["build"])
    if command == "build":
        return EXIT_OK
    report = verify_theorem(assignment, config.targets, config.tolerance)
    write_verification(report, out / config.outputs["verify"])
    return EXIT_OK if report.passed else EXIT_VERIFY


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="multisum", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    parser.add_argument("--out", type=Path, default=Path("."), help="directory for CSV artifacts")
    parser.add_argument("--command", required=True, choices=COMMANDS)
    parser.add_argument("--seed", type=int, default=None, help="reserved; the pipeline is deterministic")
    parser.add_argument("--tolerance", type=float, default=None, help="override the configured tolerance")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.tolerance is not None:
            if not args.tolerance > 0:
                raise ConfigError("--tolerance", "must be positive")
            config.tolerance = args.tolerance
        return run(config, args.command, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhaseStarvation as exc:
        print(f"starvation: {exc}", file=sys.stderr)
        return EXIT_STARVED
    except QuadratureFailure as exc:
        print(f"quadrature: {exc}", file=sys.stderr)
        return EXIT_QUAD
    except NotConvergable as exc:
        print(f"witness: {exc}", file=sys.stderr)
        return EXIT_WITNESS
    except (DepthExceeded, MissingStage) as exc:
        print(f"depth: {exc}", file=sys.stderr)
        return EXIT_DEPTH


if __name__ == "__main__":
    sys.exit(main())
