"""Input series and finite-horizon checks of conditional convergability."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NotConvergable


@dataclass(frozen=True)
class SeriesSource:
    """A real series ``a_1, a_2, ...`` given by a total term function.

    ``vector`` is an optional vectorised form of ``term`` taking an integer
    array of indices; it must agree with ``term`` bit for bit.  ``origin``
    maps indices of this series to indices of the root series it was cut
    from (identity for root series).
    """

    name: str
    term: Callable[[int], float]
    vector: Optional[Callable[[np.ndarray], np.ndarray]] = None
    origin: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, m: int) -> float:
        if m < 1:
            raise IndexError(f"series index must be >= 1, got {m}")
        return float(self.term(int(m)))

    def terms(self, start: int, stop: int) -> np.ndarray:
        """Return ``a_m`` for ``start <= m < stop`` as a float array."""
        if start < 1:
            raise IndexError(f"series index must be >= 1, got {start}")
        idx = np.arange(start, max(start, stop), dtype=np.int64)
        if self.vector is not None:
            return np.asarray(self.vector(idx), dtype=np.float64)
        return np.fromiter((self.term(int(m)) for m in idx), dtype=np.float64, count=len(idx))

    def root_index(self, idx):
        """Translate indices of this series to indices of the root series."""
        idx = np.asarray(idx, dtype=np.int64)
        return idx if self.origin is None else self.origin(idx)


def _alternating(power: float, name: str) -> SeriesSource:
    def vector(idx: np.ndarray) -> np.ndarray:
        x = idx.astype(np.float64)
        if power == 1.0:
            mag = x
        elif power == 0.5:
            mag = np.sqrt(x)
        else:
            mag = np.power(x, power)
        return np.where(idx % 2 == 1, 1.0, -1.0) / mag

    def term(m: int) -> float:
        # routed through the array form so both agree bit for bit
        return float(vector(np.array([m], dtype=np.int64))[0])

    return SeriesSource(name, term, vector)


def alternating_harmonic() -> SeriesSource:
    """``a_m = (-1)^(m+1) / m``."""
    return _alternating(1.0, "alternating_harmonic")


def alternating_power(power: float) -> SeriesSource:
    """``a_m = (-1)^(m+1) / m**power``; conditionally convergent for 0 < power <= 1."""
    if not 0.0 < power <= 1.0:
        raise ValueError("power must lie in (0, 1]")
    name = {1.0: "alternating_harmonic", 0.5: "alternating_sqrt"}.get(power, f"alternating_power_{power:g}")
    return _alternating(power, name)


def alternating_sqrt() -> SeriesSource:
    """``a_m = (-1)^(m+1) / sqrt(m)``.

    Its sign parts diverge like ``sqrt(M)`` rather than ``log(M)``, which
    leaves enough mass in every partition class for desk-scale builds.
    """
    return _alternating(0.5, "alternating_sqrt")


def from_values(values: Sequence[float], name: str = "inline") -> SeriesSource:
    """A finite list of terms padded with zeros."""
    vals = np.asarray([float(v) for v in values], dtype=np.float64)

    def term(m: int) -> float:
        return float(vals[m - 1]) if m <= len(vals) else 0.0

    def vector(idx: np.ndarray) -> np.ndarray:
        out = np.zeros(len(idx), dtype=np.float64)
        inside = idx <= len(vals)
        out[inside] = vals[idx[inside] - 1]
        return out

    return SeriesSource(name, term, vector)


BUILTIN = {
    "alternating_harmonic": alternating_harmonic,
    "alternating_sqrt": alternating_sqrt,
}


def builtin(name: str) -> SeriesSource:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise KeyError(f"unknown built-in series {name!r}; choose from {sorted(BUILTIN)}") from None


@dataclass(frozen=True)
class ConvergabilityWitness:
    horizon: int
    pos_sum: float
    neg_sum: float
    max_tail_term: float


def convergability_stats(source: SeriesSource, horizon: int) -> ConvergabilityWitness:
    """Sign-part sums over ``1..horizon`` and the largest term in the last decile."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    a = source.terms(1, horizon + 1)
    tail_len = max(1, horizon // 10)
    return ConvergabilityWitness(
        horizon=horizon,
        pos_sum=math.fsum(a[a > 0]),
        neg_sum=math.fsum(a[a < 0]),
        max_tail_term=float(np.max(np.abs(a[-tail_len:]))),
    )


def witness_convergability(source: SeriesSource, horizon: int, bound: float) -> ConvergabilityWitness:
    """Witness, up to ``horizon``, that both sign parts diverge and terms vanish.

    Succeeds iff ``pos_sum >= bound``, ``neg_sum <= -bound`` and
    ``max_tail_term <= 1/bound``.  This cannot prove divergence; it only
    certifies that the sign parts have grown past ``bound`` by the horizon.
    Raises :class:`NotConvergable` listing the failed conditions.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    w = convergability_stats(source, horizon)
    failed = []
    if not w.pos_sum >= bound:
        failed.append("pos_sum")
    if not w.neg_sum <= -bound:
        failed.append("neg_sum")
    if not w.max_tail_term <= 1.0 / bound:
        failed.append("tail")
    if failed:
        raise NotConvergable(failed, w)
    return w
