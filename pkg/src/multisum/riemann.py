"""Greedy rearrangement of a single conditionally convergable subseries.

Positive (or zero) terms are appended while the running sum is at or below
the target, negative terms while it is at or above it; a phase only ends on
a strict crossing.  Within a phase, terms are taken in increasing index
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Union

from .partition import SignedStream, signed_stream
from .series import SeriesSource

# slack for the float check of the crossing bound
_CROSS_RTOL = 1e-12


@dataclass
class ConvergenceReport:
    """Outcome of one greedy run.

    ``error_bound`` is the magnitude of the term appended at the last
    crossing (finite targets), or the last threshold cleared (infinite
    targets).  With no crossing at all it falls back to ``|achieved - target|``.
    """

    target: float
    achieved: float
    error_bound: float
    crossings: int
    used: int
    budget: int
    starved: bool = False
    crossing_violations: int = 0


@dataclass
class GreedyResult:
    ordering: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    report: ConvergenceReport = None

    def __iter__(self):
        # allows ``ordering, report = greedy_to_value(...)``
        yield self.ordering
        yield self.report


class _Running:
    """Neumaier-compensated running sum."""

    __slots__ = ("s", "c")

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, x: float) -> None:
        t = self.s + x
        if abs(self.s) >= abs(x):
            self.c += (self.s - t) + x
        else:
            self.c += (x - t) + self.s
        self.s = t

    @property
    def value(self) -> float:
        return self.s + self.c


def _as_stream(indices, source: SeriesSource) -> SignedStream:
    if isinstance(indices, SignedStream):
        return indices
    return signed_stream(indices, source)


def greedy_to_value(indices: Union[SignedStream, Iterable[int]], source: SeriesSource,
                    target: float, budget: int) -> GreedyResult:
    """Rearrange the terms over ``indices`` so the running sum approaches ``target``.

    Consumes exactly ``budget`` terms unless a phase is starved, in which
    case the report carries ``starved=True`` and the run stops early.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not math.isfinite(target):
        raise ValueError("greedy_to_value needs a finite target; use greedy_to_infinity")
    stream = _as_stream(indices, source)
    res = GreedyResult()
    run = _Running()
    up = run.value <= target
    last_cross = None
    crossings = 0
    violations = 0
    starved = False
    while len(res.ordering) < budget:
        try:
            m, v = next(stream.positive if up else stream.negative)
        except StopIteration:
            starved = True
            break
        res.ordering.append(m)
        res.values.append(v)
        run.add(v)
        s = run.value
        if (up and s > target) or (not up and s < target):
            crossings += 1
            last_cross = abs(v)
            if abs(s - target) > abs(v) * (1 + _CROSS_RTOL) + 1e-300:
                violations += 1
            up = not up
    achieved = math.fsum(res.values)
    bound = last_cross if last_cross is not None else abs(achieved - target)
    res.report = ConvergenceReport(target, achieved, bound, crossings, len(res.ordering),
                                   budget, starved, violations)
    return res


def greedy_to_infinity(indices: Union[SignedStream, Iterable[int]], source: SeriesSource,
                       sign: int, budget: int) -> GreedyResult:
    """Rearrange so the running sum diverges to ``sign * inf``.

    Same-sign terms are pushed until the sum strictly clears the next
    threshold ``sign*1, sign*2, ...``; then exactly one opposite-sign term is
    appended so that every index is eventually used.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    stream = _as_stream(indices, source)
    same, other = (stream.positive, stream.negative) if sign > 0 else (stream.negative, stream.positive)
    res = GreedyResult()
    run = _Running()
    level = 1
    cleared = 0
    starved = False
    while len(res.ordering) < budget:
        try:
            m, v = next(same)
        except StopIteration:
            starved = True
            break
        res.ordering.append(m)
        res.values.append(v)
        run.add(v)
        if sign * run.value > level:
            cleared = level
            level += 1
            if len(res.ordering) >= budget:
                break
            try:
                m, v = next(other)
            except StopIteration:
                starved = True
                break
            res.ordering.append(m)
            res.values.append(v)
            run.add(v)
    achieved = math.fsum(res.values)
    res.report = ConvergenceReport(sign * math.inf, achieved, float(cleared), cleared,
                                   len(res.ordering), budget, starved)
    return res
